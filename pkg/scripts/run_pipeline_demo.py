#!/usr/bin/env python3
"""End-to-end pipeline demo on a synthetic corpus.

Builds a fixture store, mines pairs, accepts everything in batch review,
generates the question manifest, answers it with a perfect oracle and
with an always-Yes responder, and scores both response sets.
"""

import argparse
import hashlib
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
from make_fixture_corpus import build_store  # noqa: E402

from hallucbench.cli import main as cli_main  # noqa: E402
from hallucbench.cli import read_manifest  # noqa: E402
from hallucbench.tensor_store import TensorFile, write_tensor  # noqa: E402


def run(cmd: list[str]) -> None:
    code = cli_main(cmd)
    if code != 0:
        raise SystemExit(f"command failed ({code}): {' '.join(cmd)}")


def oracle_answer(rec: dict) -> str:
    truth = rec["ground_truth"]
    if rec["kind"] == "binary":
        return f"{truth}."
    if rec["kind"] == "mcq":
        return str(truth)
    if rec["kind"] == "sorting":
        return f"{truth}."
    if truth["change"] == "Yes":
        return (f"Scene change: Yes, Locations: from {truth['scene_from']} "
                f"to {truth['scene_to']}.")
    return "Scene change: No, Locations: None"


def write_responses(path: Path, records: list[dict], answer) -> None:
    path.write_text(
        "".join(json.dumps({"qa_id": rec["qa_id"], "raw_text": answer(rec)}) + "\n"
                for rec in records),
        encoding="utf-8",
    )


def write_scene_cache(store: Path, records: list[dict]) -> Path:
    sentences = sorted({
        truth[key]
        for rec in records if rec["kind"] == "open_sth"
        for truth in [rec["ground_truth"]] if truth["change"] == "Yes"
        for key in ("scene_from", "scene_to")
    })
    rows = []
    for sentence in sentences:
        digest = hashlib.sha256(sentence.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(32)
        rows.append(v / np.linalg.norm(v))
    matrix = np.asarray(rows, dtype=np.float32)
    write_tensor(store / "desc_cache.vhtn", TensorFile.from_array(matrix))
    index = store / "desc_cache.json"
    index.write_text(json.dumps({"sentences": sentences, "tensor": "desc_cache.vhtn",
                                 "checkpoint": "demo-hash-cache"}, indent=2),
                     encoding="utf-8")
    return index


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--store", default=None,
                    help="store directory (default: fresh temp dir)")
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    store = Path(args.store) if args.store else Path(tempfile.mkdtemp(prefix="hallucbench-"))
    build_store(store, videos=6, clips_per_video=4, dim=64, seed=args.seed)
    base = ["--store", str(store), "--seed", str(args.seed)]

    run(base + ["mine"])
    _, pairs = read_manifest(store / "pairs.jsonl")
    batch = store / "accept_all.jsonl"
    batch.write_text(
        "".join(json.dumps({"pair_id": rec["pair_id"], "verdict": "accept"}) + "\n"
                for rec in pairs),
        encoding="utf-8",
    )
    run(base + ["review", "--batch", str(batch)])
    run(base + ["generate"])

    _, questions = read_manifest(store / "questions.jsonl")
    cache = write_scene_cache(store, questions)

    print("\n=== perfect oracle responder ===")
    write_responses(store / "responses_oracle.jsonl", questions, oracle_answer)
    run(base + ["score", str(store / "questions.jsonl"),
                str(store / "responses_oracle.jsonl"),
                "--desc-cache", str(cache),
                "--out", str(store / "report_oracle.json")])

    print("\n=== always-Yes responder ===")
    write_responses(store / "responses_yes.jsonl", questions,
                    lambda rec: "Scene change: Yes, Locations: from a to b."
                    if rec["kind"] == "open_sth" else "Yes.")
    run(base + ["score", str(store / "questions.jsonl"),
                str(store / "responses_yes.jsonl"),
                "--desc-cache", str(cache),
                "--out", str(store / "report_yes.json")])

    print(f"\nstore: {store}")


if __name__ == "__main__":
    main()
