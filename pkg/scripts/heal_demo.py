#!/usr/bin/env python3
"""Saliency-reweighting demo on synthetic frames.

Writes a few frames of softmax attention plus random feature grids, runs
the heal command in both saliency modes, and prints how the per-position
weights spread around the sigma(0) = 0.5 midpoint.
"""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np

from hallucbench.cli import main as cli_main
from hallucbench.tensor_store import TensorFile, read_tensor, write_tensor


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=4)
    ap.add_argument("--grid", type=int, default=4, help="token grid side (L = grid^2 + 1)")
    ap.add_argument("--feature-size", type=int, default=8)
    ap.add_argument("--channels", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    seq = args.grid**2 + 1
    workdir = Path(tempfile.mkdtemp(prefix="heal-demo-"))
    for idx in range(args.frames):
        logits = rng.standard_normal((4, seq, seq)) * 2.0
        expd = np.exp(logits)
        att = (expd / expd.sum(axis=2, keepdims=True)).astype(np.float32)
        feat = rng.standard_normal(
            (args.feature_size, args.feature_size, args.channels)).astype(np.float32)
        write_tensor(workdir / f"{idx:04d}.attn.vhtn", TensorFile.from_array(att))
        write_tensor(workdir / f"{idx:04d}.feat.vhtn", TensorFile.from_array(feat))
        (workdir / f"{idx:04d}.attn.json").write_text(
            json.dumps({"grid": [args.grid, args.grid]}), encoding="utf-8")

    for mode in ("cls_row", "query_sum"):
        code = cli_main(["--saliency-mode", mode, "heal", str(workdir)])
        if code != 0:
            raise SystemExit(code)
        for idx in range(args.frames):
            feat = read_tensor(workdir / f"{idx:04d}.feat.vhtn").values
            healed = read_tensor(workdir / f"{idx:04d}.healed.vhtn").values
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(feat != 0, healed / feat, np.nan)
            weights = np.nanmean(ratio, axis=2)
            print(f"mode={mode} frame={idx}: weight min={np.nanmin(weights):.4f} "
                  f"mean={np.nanmean(weights):.4f} max={np.nanmax(weights):.4f}")
    print(f"workdir: {workdir}")


if __name__ == "__main__":
    main()
