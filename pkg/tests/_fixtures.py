"""Synthetic corpora with planted similarities, shared across test modules.

Vectors are constructed so that pair cosines land far from the mining
thresholds: clips of one source video share a tight semantic cone
(cosine well above 0.9 pairwise) while visual vectors are near-random
(cosine far below 0.6) except for planted look-alike pairs.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from hallucbench.pair_miner import ClipRecord
from hallucbench.tensor_store import TensorFile, write_tensor

ACTIONS = (
    "skiing",
    "ironing wax on the ski",
    "mixing the ingredients",
    "watching the oven",
    "gutting a fish",
    "starting a fire",
    "turning the steering wheel",
    "wakeboarding",
    "changing gears",
    "adjusting the rearview mirror",
    "unloading shingles onto the roof",
    "removing old shingles",
)

SCENES = (
    "in a swimming pool",
    "in a bathtub",
    "in a kitchen",
    "on a snowy slope",
    "in a workshop",
    "on a rooftop",
)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _cone_vector(rng: np.random.Generator, base: np.ndarray, spread: float) -> np.ndarray:
    """A unit vector at cosine ~sqrt(1 - spread^2) from ``base``."""
    noise = rng.standard_normal(base.shape[0])
    noise -= noise.dot(base) * base
    noise /= np.linalg.norm(noise)
    v = np.sqrt(1.0 - spread**2) * base + spread * noise
    return v / np.linalg.norm(v)


def make_corpus(
    n_videos: int = 4,
    clips_per_video: int = 4,
    dim: int = 64,
    seed: int = 7,
    identical_action_videos: tuple[int, ...] = (),
    visual_twin_videos: tuple[int, ...] = (),
) -> tuple[list[ClipRecord], dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Build clips plus per-clip pooled semantic/visual unit vectors.

    Clips within one video pass the semantic threshold pairwise. In
    ``visual_twin_videos`` all clips also share a visual cone (so pairs
    fail the visual cut); in ``identical_action_videos`` all clips carry
    the same action label (so pairs hit the identical-action filter).
    """
    rng = np.random.default_rng(seed)
    clips: list[ClipRecord] = []
    sem: dict[str, np.ndarray] = {}
    vis: dict[str, np.ndarray] = {}
    for v in range(n_videos):
        video_id = f"vid{v:03d}"
        sem_base = _unit(rng, dim)
        vis_base = _unit(rng, dim)
        for k in range(clips_per_video):
            clip_id = f"{video_id}-c{k}"
            action = ACTIONS[0] if v in identical_action_videos else ACTIONS[(v * clips_per_video + k) % len(ACTIONS)]
            # Consecutive clip pairs (2m, 2m+1) share a scene so same-scene
            # negatives exist; other combinations change scene.
            scene = SCENES[(v + k // 2) % len(SCENES)]
            clips.append(
                ClipRecord(
                    clip_id=clip_id,
                    source_video_id=video_id,
                    start_s=10.0 * k,
                    end_s=10.0 * k + 5.0,
                    action=action,
                    scene=scene,
                    caption=f"someone {action} {scene}",
                    order_index=k,
                )
            )
            sem[clip_id] = _cone_vector(rng, sem_base, spread=0.15)
            if v in visual_twin_videos:
                vis[clip_id] = _cone_vector(rng, vis_base, spread=0.1)
            else:
                vis[clip_id] = _unit(rng, dim)
    return clips, sem, vis


def write_store(
    root: Path,
    clips: list[ClipRecord],
    sem: dict[str, np.ndarray],
    vis: dict[str, np.ndarray],
    frame_matrix_clips: tuple[str, ...] = (),
) -> Path:
    """Lay out clips.jsonl plus per-encoder .vhtn files under ``root``.

    Clips named in ``frame_matrix_clips`` are stored as [T, D] frame
    matrices (three identical rows, so pooling returns the same vector);
    all others as pooled [D] vectors.
    """
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for clip in clips:
        lines.append(json.dumps({
            "clip_id": clip.clip_id,
            "source_video_id": clip.source_video_id,
            "start_s": clip.start_s,
            "end_s": clip.end_s,
            "action": clip.action,
            "scene": clip.scene,
            "caption": clip.caption,
            "order_index": clip.order_index,
        }, sort_keys=True))
    (root / "clips.jsonl").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    for name, vectors in (("semantic", sem), ("visual", vis)):
        enc_dir = root / name
        enc_dir.mkdir(exist_ok=True)
        for clip_id, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float32)
            if clip_id in frame_matrix_clips:
                arr = np.tile(arr, (3, 1))
            write_tensor(enc_dir / f"{clip_id}.vhtn", TensorFile.from_array(arr))
    return root


def sentence_vector(sentence: str, dim: int = 32) -> np.ndarray:
    """Deterministic per-string unit vector (exact-match cache semantics)."""
    digest = hashlib.sha256(sentence.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return _unit(rng, dim)


def write_desc_cache(path: Path, sentences: list[str], dim: int = 32) -> Path:
    """Write a sentence-embedding cache index next to its tensor file."""
    sentences = sorted(set(sentences))
    matrix = np.stack([sentence_vector(s, dim) for s in sentences]).astype(np.float32)
    tensor_name = path.stem + ".vhtn"
    write_tensor(path.parent / tensor_name, TensorFile.from_array(matrix))
    path.write_text(
        json.dumps({"sentences": sentences, "tensor": tensor_name, "checkpoint": "fixture"},
                   sort_keys=True, indent=2),
        encoding="utf-8",
    )
    return path


def oracle_responses(question_records: list[dict]) -> list[dict]:
    """Perfect answers for every question record, in compliant formats."""
    responses = []
    for rec in question_records:
        kind = rec["kind"]
        truth = rec["ground_truth"]
        if kind == "binary":
            text = f"{truth}."
        elif kind == "mcq":
            text = truth
        elif kind == "sorting":
            text = f"{truth}."
        elif kind == "open_sth":
            if truth["change"] == "Yes":
                text = (f"Scene change: Yes, Locations: from {truth['scene_from']} "
                        f"to {truth['scene_to']}.")
            else:
                text = "Scene change: No, Locations: None"
        else:
            raise ValueError(kind)
        responses.append({"qa_id": rec["qa_id"], "raw_text": text})
    return responses


def collect_scene_sentences(question_records: list[dict]) -> list[str]:
    sentences = []
    for rec in question_records:
        if rec["kind"] == "open_sth" and rec["ground_truth"]["change"] == "Yes":
            sentences.append(rec["ground_truth"]["scene_from"])
            sentences.append(rec["ground_truth"]["scene_to"])
    return sentences
