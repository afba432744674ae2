"""Pipeline entrypoint: mine, review, generate, heal, score.

Every command is deterministic given (inputs, seed); each output manifest
carries a leading ``_meta`` record embedding the seed and a config hash,
and every file is written to a temp path then atomically renamed. Exit
codes are a stable contract: 0 success, 2 input error, 3 empty pipeline,
4 shape error, 5 join error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dino_heal, pair_miner, question_gen, scorer, tensor_store
from .dino_heal import HealConfig
from .pair_miner import CandidatePair, ClipRecord, MinerConfig, SthSpec, TshEntry
from .question_gen import QAItem
from .scorer import CachedEmbeddingProvider, DescConfig, ModelResponse
from .tensor_store import dumps_record, read_jsonl, read_tensor, write_tensor

log = logging.getLogger("hallucbench")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_SHAPE = 4
EXIT_JOIN = 5

REVIEW_REASONS = ("no_clear_action", "multiple_actions", "identical_actions", "other")

DEFAULT_SEM_DIR = "semantic"
DEFAULT_VIS_DIR = "visual"


class InputError(Exception):
    pass


class EmptyPipelineError(Exception):
    pass


class CliShapeError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    store_root: Path
    seed: int = 0
    miner: MinerConfig = field(default_factory=MinerConfig)
    desc: DescConfig = field(default_factory=DescConfig)
    heal: HealConfig = field(default_factory=HealConfig)
    scan_mode: str = "within_video"

    def config_dict(self) -> dict:
        d = asdict(self)
        d["store_root"] = str(self.store_root)
        return d

    @property
    def config_hash(self) -> str:
        # Hash the behavioral knobs only; the store location is incidental
        # and must not break cross-machine reproducibility.
        hashed = {k: v for k, v in self.config_dict().items() if k != "store_root"}
        canonical = json.dumps(hashed, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _meta_record(kind: str, config: RunConfig, **extra) -> dict:
    meta = {"kind": kind, "seed": config.seed, "config_hash": config.config_hash,
            "tool": "hallucbench"}
    meta.update(extra)
    return {"_meta": meta}


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_manifest(path: Path, kind: str, records: list[dict], config: RunConfig, **meta) -> None:
    lines = [dumps_record(_meta_record(kind, config, **meta))]
    lines += [dumps_record(rec) for rec in records]
    _atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_manifest(path: Path) -> tuple[dict | None, list[dict]]:
    meta = None
    records = []
    for rec in read_jsonl(path):
        if "_meta" in rec:
            meta = rec["_meta"]
        else:
            records.append(rec)
    return meta, records


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise InputError(f"missing {what}: {path}")
    return path


# ---------------------------------------------------------------------------
# record (de)serialization

def clip_from_record(rec: dict) -> ClipRecord:
    return ClipRecord(
        clip_id=rec["clip_id"],
        source_video_id=rec["source_video_id"],
        start_s=float(rec["start_s"]),
        end_s=float(rec["end_s"]),
        action=rec.get("action", ""),
        scene=rec.get("scene", ""),
        caption=rec.get("caption", ""),
        order_index=int(rec.get("order_index", 0)),
    )


def pair_to_record(pair: CandidatePair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "clip_a": pair.clip_a,
        "clip_b": pair.clip_b,
        "sem_sim": pair.sem_sim,
        "vis_sim": pair.vis_sim,
        "adjacent": pair.adjacent,
        "distinct_scene": pair.distinct_scene,
    }


def pair_from_record(rec: dict) -> CandidatePair:
    return CandidatePair(
        clip_a=rec["clip_a"],
        clip_b=rec["clip_b"],
        sem_sim=float(rec["sem_sim"]),
        vis_sim=float(rec["vis_sim"]),
        adjacent=bool(rec["adjacent"]),
        distinct_scene=bool(rec["distinct_scene"]),
    )


def tsh_to_record(entry: TshEntry) -> dict:
    return {
        "entry_id": entry.entry_id,
        "pair_id": entry.pair_id,
        "clip_sequence": list(entry.clip_sequence),
        "actions": list(entry.actions),
    }


def tsh_from_record(rec: dict) -> TshEntry:
    return TshEntry(
        pair_id=rec["pair_id"],
        clip_sequence=tuple(rec["clip_sequence"]),
        actions=tuple(rec["actions"]),
    )


def sth_to_record(spec: SthSpec) -> dict:
    return {
        "spec_id": spec.spec_id,
        "pair_id": spec.pair_id,
        "clip_sequence": list(spec.clip_sequence),
        "change": spec.change,
        "scene_from": spec.scene_from,
        "scene_to": spec.scene_to,
    }


def sth_from_record(rec: dict) -> SthSpec:
    return SthSpec(
        spec_id=rec["spec_id"],
        clip_sequence=tuple(rec["clip_sequence"]),
        change=bool(rec["change"]),
        scene_from=rec.get("scene_from"),
        scene_to=rec.get("scene_to"),
        pair_id=rec.get("pair_id"),
    )


def load_pooled_vector(path: Path) -> np.ndarray:
    """Load a per-clip embedding file: a pooled [D] vector is used as-is,
    a [T, D] frame matrix is pooled here."""
    tensor = read_tensor(path)
    if len(tensor.dims) == 1:
        vec = np.asarray(tensor.values, dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise pair_miner.DegenerateEmbeddingError(f"{path}: zero embedding")
        return vec / norm
    if len(tensor.dims) == 2:
        return pair_miner.pool_video(tensor_store.EmbeddingMatrix(values=tensor.values))
    raise InputError(f"{path}: expected a [D] or [T, D] embedding, got dims {tensor.dims}")


# ---------------------------------------------------------------------------
# commands

def cmd_mine(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    store = config.store_root
    clips_path = _require(store / "clips.jsonl", "clip manifest")
    sem_dir = _require(store / args.sem_encoder, f"{args.sem_encoder} embedding dir")
    vis_dir = _require(store / args.vis_encoder, f"{args.vis_encoder} embedding dir")

    _, clip_records = read_manifest(clips_path)
    clips = pair_miner.filter_short_clips(
        [clip_from_record(rec) for rec in clip_records], config.miner.min_duration_s
    )
    sem_vectors: dict[str, np.ndarray] = {}
    vis_vectors: dict[str, np.ndarray] = {}
    for clip in clips:
        for vectors, enc_dir in ((sem_vectors, sem_dir), (vis_vectors, vis_dir)):
            path = enc_dir / f"{clip.clip_id}.vhtn"
            if not path.exists():
                raise InputError(f"missing embedding for clip {clip.clip_id}: {path}")
            vectors[clip.clip_id] = load_pooled_vector(path)

    pairs = pair_miner.mine_pairs(clips, sem_vectors, vis_vectors, config.miner,
                                  scan_mode=config.scan_mode)
    pairs = pair_miner.filter_identical_actions(pairs, clips)
    tsh = pair_miner.assemble_tsh(pairs, clips)
    sth = pair_miner.assemble_sth(pairs, clips, rng_seed=config.seed)
    if not clips:
        log.warning("empty corpus: no clips survived quality filtering")

    out = Path(args.out) if args.out else store
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "pairs.jsonl", "pairs", [pair_to_record(p) for p in pairs], config)
    write_manifest(out / "tsh.jsonl", "tsh", [tsh_to_record(e) for e in tsh], config)
    sth_meta = {} if sth else {"warnings": ["no distinct-scene pairs"]}
    write_manifest(out / "sth.jsonl", "sth", [sth_to_record(s) for s in sth], config, **sth_meta)
    print(f"clips: {len(clips)}  pairs: {len(pairs)}  tsh: {len(tsh)}  sth: {len(sth)}")
    return EXIT_OK


def _validate_verdict(rec: dict, known_pairs: set[str], source: str) -> dict:
    for key in ("pair_id", "verdict"):
        if key not in rec:
            raise InputError(f"{source}: verdict record missing {key!r}: {rec}")
    if rec["verdict"] not in ("accept", "reject"):
        raise InputError(f"{source}: bad verdict {rec['verdict']!r} for pair {rec['pair_id']}")
    reason = rec.get("reason")
    if rec["verdict"] == "reject" and reason not in REVIEW_REASONS:
        raise InputError(
            f"{source}: reject for pair {rec['pair_id']} needs a reason in {REVIEW_REASONS}"
        )
    if reason is not None and reason not in REVIEW_REASONS:
        raise InputError(f"{source}: unknown reason {reason!r}")
    if rec["pair_id"] not in known_pairs:
        raise InputError(f"{source}: verdict for unknown pair {rec['pair_id']!r}")
    return {"pair_id": rec["pair_id"], "verdict": rec["verdict"],
            "reason": reason, "note": rec.get("note", "")}


def cmd_review(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    store = config.store_root
    pairs_path = _require(Path(args.pairs) if args.pairs else store / "pairs.jsonl", "pair manifest")
    _, pair_records = read_manifest(pairs_path)
    known = {rec["pair_id"] for rec in pair_records}

    verdicts_path = Path(args.verdicts) if args.verdicts else store / "verdicts.jsonl"
    existing: dict[str, dict] = {}
    if verdicts_path.exists():
        _, old = read_manifest(verdicts_path)
        for rec in old:
            existing[rec["pair_id"]] = _validate_verdict(rec, known, str(verdicts_path))

    if args.batch:
        batch_path = _require(Path(args.batch), "batch verdict file")
        batch: dict[str, dict] = {}
        for rec in read_manifest(batch_path)[1]:
            # Within one file the latest verdict for a pair wins.
            batch[rec["pair_id"]] = _validate_verdict(rec, known, str(batch_path))
        clash = sorted(set(batch) & set(existing))
        if clash:
            raise InputError(
                f"duplicate verdicts across merged files for pair(s): {', '.join(clash)}"
            )
        existing.update(batch)
    else:
        if not sys.stdin.isatty():
            raise InputError("interactive review needs a terminal; use --batch FILE otherwise")
        clips_path = store / "clips.jsonl"
        clips = {}
        if clips_path.exists():
            clips = {rec["clip_id"]: rec for rec in read_manifest(clips_path)[1]}
        pending = [rec for rec in pair_records if rec["pair_id"] not in existing]
        print(f"{len(pending)} pair(s) to review; Ctrl-C to stop (progress is kept)")
        for rec in pending:
            _print_pair(rec, clips)
            verdict = _prompt_verdict()
            if verdict is None:
                break
            existing[rec["pair_id"]] = verdict | {"pair_id": rec["pair_id"]}

    ordered = [existing[pid] for pid in sorted(existing)]
    write_manifest(verdicts_path, "verdicts", ordered, config)
    accepted = sum(1 for v in ordered if v["verdict"] == "accept")
    print(f"verdicts: {len(ordered)} ({accepted} accepted)")
    return EXIT_OK


def _print_pair(rec: dict, clips: dict) -> None:
    print(f"\npair {rec['pair_id']}  sem={rec['sem_sim']:.3f} vis={rec['vis_sim']:.3f}")
    for side in ("clip_a", "clip_b"):
        clip = clips.get(rec[side], {})
        print(f"  {side}: {rec[side]}  action={clip.get('action', '?')!r} "
              f"scene={clip.get('scene', '')!r}")
        if clip.get("caption"):
            print(f"    caption: {clip['caption']}")


def _prompt_verdict() -> dict | None:
    while True:
        try:
            answer = input("[a]ccept / [r]eject / [q]uit: ").strip().lower()
        except (EOFError, KeyboardInterrupt):
            return None
        if answer in ("q", "quit"):
            return None
        if answer in ("a", "accept"):
            return {"verdict": "accept", "reason": None, "note": ""}
        if answer in ("r", "reject"):
            print("reasons: " + ", ".join(f"{i}={r}" for i, r in enumerate(REVIEW_REASONS)))
            idx = input("reason number: ").strip()
            if idx.isdigit() and int(idx) < len(REVIEW_REASONS):
                note = input("note (optional): ").strip()
                return {"verdict": "reject", "reason": REVIEW_REASONS[int(idx)], "note": note}
        print("unrecognized input")


def cmd_generate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    store = config.store_root
    _, clip_records = read_manifest(_require(store / "clips.jsonl", "clip manifest"))
    clips = {rec["clip_id"]: clip_from_record(rec) for rec in clip_records}
    _, pair_records = read_manifest(_require(store / "pairs.jsonl", "pair manifest"))
    _, verdict_records = read_manifest(_require(store / "verdicts.jsonl", "review verdicts"))
    _, tsh_records = read_manifest(_require(store / "tsh.jsonl", "tsh manifest"))
    _, sth_records = read_manifest(_require(store / "sth.jsonl", "sth manifest"))

    accepted_ids = {rec["pair_id"] for rec in verdict_records if rec["verdict"] == "accept"}
    pairs = [pair_from_record(rec) for rec in pair_records if rec["pair_id"] in accepted_ids]
    if not pairs:
        raise EmptyPipelineError("no accepted pairs; nothing to generate")

    provider = question_gen.CorpusDistractorProvider.from_actions(
        [clip.action for clip in clips.values() if clip.action]
    )
    items: list[QAItem] = []
    for pair in sorted(pairs, key=lambda p: p.pair_id):
        items.extend(question_gen.gen_binary(pair, clips, config.seed))
        items.extend(_gen_mcq_with_retry(pair, clips, provider, config.seed))

    for rec in tsh_records:
        if rec["pair_id"] in accepted_ids:
            items.append(question_gen.gen_sorting(tsh_from_record(rec), config.seed))

    sth_specs = [sth_from_record(rec) for rec in sth_records
                 if rec.get("pair_id") is None or rec["pair_id"] in accepted_ids]
    yes = sorted((s for s in sth_specs if s.change), key=lambda s: s.spec_id)
    no = sorted((s for s in sth_specs if not s.change), key=lambda s: s.spec_id)
    keep = min(len(yes), len(no))
    if keep < max(len(yes), len(no)):
        log.info("rebalancing scene-transition specs after review: %d yes / %d no -> %d each",
                 len(yes), len(no), keep)
    for spec in yes[:keep] + no[:keep]:
        items.append(question_gen.gen_sth(spec))

    items.sort(key=lambda i: i.qa_id)
    counts: dict[str, int] = {}
    for item in items:
        counts[item.kind] = counts.get(item.kind, 0) + 1
    out = Path(args.out) if args.out else store / "questions.jsonl"
    write_manifest(out, "questions", [i.to_record() for i in items], config)
    print("questions: " + "  ".join(f"{kind}={n}" for kind, n in sorted(counts.items())))
    return EXIT_OK


def _gen_mcq_with_retry(pair, clips, provider, seed: int, attempts: int = 5) -> list[QAItem]:
    for offset in range(attempts):
        try:
            return question_gen.gen_mcq(pair, clips, provider, seed + offset)
        except question_gen.DistractorCollisionError as exc:
            last = exc
            log.warning("pair %s: distractor collision at seed offset %d (%s); retrying",
                        pair.pair_id, offset, exc)
    raise last


def cmd_heal(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    frames_dir = _require(Path(args.frames_dir), "frames directory")
    attn_paths = sorted(frames_dir.glob("*.attn.vhtn"))
    if not attn_paths:
        raise InputError(f"no *.attn.vhtn frames under {frames_dir}")

    # Validate every frame before writing anything.
    frames = []
    for attn_path in attn_paths:
        stem = attn_path.name[: -len(".attn.vhtn")]
        feat_path = frames_dir / f"{stem}.feat.vhtn"
        if not feat_path.exists():
            raise InputError(f"frame {stem}: missing feature file {feat_path}")
        attention = tensor_store.AttentionTensor.from_tensor(read_tensor(attn_path))
        features = tensor_store.FeatureGrid.from_tensor(read_tensor(feat_path))
        violations = tensor_store.validate_attention(attention)
        if violations:
            preview = "; ".join(violations[:3])
            raise InputError(f"frame {stem}: attention invariant violations: {preview}")
        grid_hw = _grid_from_sidecar(frames_dir / f"{stem}.attn.json")
        spatial = attention.seq_len - 1
        if grid_hw is None:
            try:
                grid_hw = dino_heal.infer_grid(spatial)
            except dino_heal.ShapeError as exc:
                raise CliShapeError(f"frame {stem}: {exc}") from exc
        elif grid_hw[0] * grid_hw[1] != spatial:
            raise CliShapeError(
                f"frame {stem}: token grid {grid_hw[0]}x{grid_hw[1]} does not hold "
                f"{spatial} spatial tokens"
            )
        frames.append((stem, attention, features, grid_hw))

    for stem, attention, features, grid_hw in frames:
        try:
            healed = dino_heal.heal(features, attention, config.heal, grid_hw)
        except dino_heal.HealStageError as exc:
            raise CliShapeError(f"frame {stem}: {exc}") from exc
        out_path = frames_dir / f"{stem}.healed.vhtn"
        tmp = out_path.with_name(out_path.name + ".tmp")
        write_tensor(tmp, tensor_store.TensorFile.from_array(
            np.asarray(healed.values, dtype=np.float32)))
        os.replace(tmp, out_path)
        sidecar = {
            "frame": stem,
            "seed": config.seed,
            "config_hash": config.config_hash,
            "config": asdict(config.heal),
            "token_grid": list(grid_hw),
            "feature_grid": [features.height, features.width, features.channels],
            "checksums": _stage_checksums(features, attention, config.heal, grid_hw),
        }
        _atomic_write_text(frames_dir / f"{stem}.healed.json",
                           json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    print(f"healed {len(frames)} frame(s) in {frames_dir}")
    return EXIT_OK


def _grid_from_sidecar(path: Path) -> tuple[int, int] | None:
    if not path.exists():
        return None
    data = json.loads(path.read_text(encoding="utf-8"))
    grid = data.get("grid") or data.get("token_grid")
    if not (isinstance(grid, list) and len(grid) == 2):
        raise InputError(f"{path}: expected a 2-element 'grid' entry")
    return int(grid[0]), int(grid[1])


def _stage_checksums(features, attention, heal_cfg, grid_hw) -> dict:
    def digest(arr) -> str:
        return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()[:16]

    averaged = dino_heal.head_average(attention)
    saliency = dino_heal.extract_saliency(averaged, heal_cfg.saliency_mode)
    grid = dino_heal.to_grid(saliency, *grid_hw)
    upsampled = dino_heal.upsample(grid, features.height, features.width, heal_cfg.interp)
    weights = dino_heal.normalize(upsampled)
    healed = dino_heal.reweight(features, weights)
    return {
        "head_average": digest(averaged),
        "saliency": digest(saliency),
        "saliency_grid": digest(grid),
        "upsampled": digest(upsampled),
        "weights": digest(weights),
        "healed": digest(healed.values),
    }


def cmd_score(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    questions_path = _require(Path(args.questions), "question manifest")
    responses_path = _require(Path(args.responses), "response file")
    _, question_records = read_manifest(questions_path)
    _, response_records = read_manifest(responses_path)
    manifest = [QAItem.from_record(rec) for rec in question_records]
    responses = [ModelResponse(qa_id=rec["qa_id"], raw_text=rec.get("raw_text", ""))
                 for rec in response_records]

    provider = None
    if args.desc_cache:
        provider = CachedEmbeddingProvider.load(_require(Path(args.desc_cache), "desc cache index"))

    report = scorer.score_run(manifest, responses, provider, config.desc)

    metrics = report.metrics_dict()
    payload = {
        "seed": config.seed,
        "config_hash": config.config_hash,
        "thr_low": report.thr_low,
        "alpha": report.alpha,
        "notes": list(report.notes),
        "metrics": metrics,
        "metrics_pct": {k: (round(v * 100.0, 4) if v is not None else None)
                        for k, v in metrics.items()},
        "unparsed": dict(report.unparsed),
        "tsh_single_action": report.tsh_single_action,
        "desc_flagged": report.desc_flagged,
        "missing_responses": report.missing_responses,
        "items": list(report.audit),
    }
    out = Path(args.out) if args.out else questions_path.parent / "report.json"
    _atomic_write_text(out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    _print_headline(metrics)
    print(f"report written to {out}")
    return EXIT_OK


def _print_headline(metrics: dict) -> None:
    def pct(value):
        return f"{value * 100.0:6.2f}" if value is not None else "     -"

    print("             Binary QA     MCQ     TSH     STH")
    print(f"accuracy     {pct(metrics['ach_binary_acc'])}    {pct(metrics['ach_mcq_acc'])}"
          f"  {pct(metrics['tsh_acc'])}  {pct(metrics['sth_score_overall'])}")
    print(f"pair acc     {pct(metrics['ach_binary_pair_acc'])}    {pct(metrics['ach_mcq_pair_acc'])}"
          f"       -       -")
    print(f"sth detail   cls {pct(metrics['sth_score_cls'])}  desc {pct(metrics['sth_score_desc'])}"
          f"  mcc {metrics['sth_mcc'] if metrics['sth_mcc'] is not None else '-'}")


# ---------------------------------------------------------------------------
# argument plumbing

def _config_from_args(args: argparse.Namespace) -> RunConfig:
    store = getattr(args, "store", None) or os.environ.get("HALLUC_STORE")
    if store is None:
        store = "."
    return RunConfig(
        store_root=Path(store),
        seed=args.seed,
        miner=MinerConfig(
            lambda_sem=args.lambda_sem,
            lambda_vis=args.lambda_vis,
            min_duration_s=args.min_duration,
        ),
        desc=DescConfig(thr_low=args.thr_low, alpha=args.alpha),
        heal=HealConfig(saliency_mode=args.saliency_mode, interp=args.interp),
        scan_mode=args.scan_mode,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hallucbench",
        description="Mine adversarial clip pairs, generate hallucination probes, "
                    "reweight visual features, and score model responses.",
    )
    parser.add_argument("--store", default=None,
                        help="store root (default: $HALLUC_STORE or cwd)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lambda-sem", dest="lambda_sem", type=float, default=0.9)
    parser.add_argument("--lambda-vis", dest="lambda_vis", type=float, default=0.6)
    parser.add_argument("--min-duration", dest="min_duration", type=float, default=1.0)
    parser.add_argument("--thr-low", dest="thr_low", type=float, default=0.5)
    parser.add_argument("--alpha", type=float, default=0.6)
    parser.add_argument("--saliency-mode", dest="saliency_mode",
                        choices=dino_heal.SALIENCY_MODES, default="cls_row")
    parser.add_argument("--interp", choices=dino_heal.INTERP_MODES, default="bilinear")
    parser.add_argument("--scan-mode", dest="scan_mode",
                        choices=("within_video", "cross_video"), default="within_video")
    parser.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p_mine = sub.add_parser("mine", help="mine candidate pairs from the embedding store")
    p_mine.add_argument("--sem-encoder", default=DEFAULT_SEM_DIR,
                        help="store subdirectory with semantic embeddings")
    p_mine.add_argument("--vis-encoder", default=DEFAULT_VIS_DIR,
                        help="store subdirectory with visual embeddings")
    p_mine.add_argument("--out", default=None, help="output directory (default: store)")
    p_mine.set_defaults(func=cmd_mine)

    p_review = sub.add_parser("review", help="record accept/reject verdicts for mined pairs")
    p_review.add_argument("--pairs", default=None, help="pair manifest (default: store/pairs.jsonl)")
    p_review.add_argument("--verdicts", default=None,
                          help="verdict file to resume/extend (default: store/verdicts.jsonl)")
    p_review.add_argument("--batch", default=None, help="merge verdicts from this file")
    p_review.set_defaults(func=cmd_review)

    p_gen = sub.add_parser("generate", help="render the question manifest from accepted pairs")
    p_gen.add_argument("--out", default=None, help="output path (default: store/questions.jsonl)")
    p_gen.set_defaults(func=cmd_generate)

    p_heal = sub.add_parser("heal", help="saliency-reweight per-frame feature files")
    p_heal.add_argument("frames_dir", help="directory of <frame>.attn.vhtn/<frame>.feat.vhtn")
    p_heal.set_defaults(func=cmd_heal)

    p_score = sub.add_parser("score", help="score a response file against a question manifest")
    p_score.add_argument("questions", help="questions.jsonl")
    p_score.add_argument("responses", help="responses.jsonl ({qa_id, raw_text})")
    p_score.add_argument("--desc-cache", dest="desc_cache", default=None,
                         help="sentence-embedding cache index JSON for description scoring")
    p_score.add_argument("--out", default=None, help="report path (default: next to questions)")
    p_score.set_defaults(func=cmd_score)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except scorer.JoinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_JOIN
    except (CliShapeError, dino_heal.ShapeError, dino_heal.HealStageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except EmptyPipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (InputError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
