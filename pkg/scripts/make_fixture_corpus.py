#!/usr/bin/env python3
"""Build a synthetic clip corpus with planted similarities.

Writes clips.jsonl plus pooled semantic/visual embedding files under a
store directory, so the full mine -> review -> generate -> score pipeline
can run without any real encoder. Clips of one source video share a tight
semantic cone (pairwise cosine ~0.95) while visual vectors stay random,
so within-video pairs trip the dual-threshold rule.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hallucbench.tensor_store import TensorFile, write_tensor

ACTIONS = (
    "skiing", "ironing wax on the ski", "mixing the ingredients",
    "watching the oven", "gutting a fish", "starting a fire",
    "turning the steering wheel", "wakeboarding", "changing gears",
    "adjusting the rearview mirror", "unloading shingles onto the roof",
    "removing old shingles",
)
SCENES = (
    "in a swimming pool", "in a bathtub", "in a kitchen",
    "on a snowy slope", "in a workshop", "on a rooftop",
)


def unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def cone(rng, base, spread):
    noise = rng.standard_normal(base.shape[0])
    noise -= noise.dot(base) * base
    noise /= np.linalg.norm(noise)
    v = np.sqrt(1.0 - spread**2) * base + spread * noise
    return v / np.linalg.norm(v)


def build_store(root: Path, videos: int, clips_per_video: int, dim: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    (root / "semantic").mkdir(exist_ok=True)
    (root / "visual").mkdir(exist_ok=True)
    lines = []
    count = 0
    for v in range(videos):
        video_id = f"vid{v:03d}"
        sem_base = unit(rng, dim)
        for k in range(clips_per_video):
            clip_id = f"{video_id}-c{k}"
            action = ACTIONS[(v * clips_per_video + k) % len(ACTIONS)]
            scene = SCENES[(v + k // 2) % len(SCENES)]
            lines.append(json.dumps({
                "clip_id": clip_id,
                "source_video_id": video_id,
                "start_s": 10.0 * k,
                "end_s": 10.0 * k + 5.0,
                "action": action,
                "scene": scene,
                "caption": f"someone {action} {scene}",
                "order_index": k,
            }, sort_keys=True))
            sem = cone(rng, sem_base, spread=0.15).astype(np.float32)
            vis = unit(rng, dim).astype(np.float32)
            write_tensor(root / "semantic" / f"{clip_id}.vhtn", TensorFile.from_array(sem))
            write_tensor(root / "visual" / f"{clip_id}.vhtn", TensorFile.from_array(vis))
            count += 1
    (root / "clips.jsonl").write_text("".join(line + "\n" for line in lines),
                                      encoding="utf-8")
    return count


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="store directory to create")
    ap.add_argument("--videos", type=int, default=6)
    ap.add_argument("--clips-per-video", type=int, default=4)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    n = build_store(Path(args.out), args.videos, args.clips_per_video, args.dim, args.seed)
    print(f"wrote {n} clips under {args.out}")


if __name__ == "__main__":
    main()
