"""Adversarial clip-pair mining from pooled encoder embeddings.

A candidate pair is two clips a semantic (image-text) encoder considers
near-duplicates while a purely visual (self-supervised) encoder does not:
semantic cosine at or above ``lambda_sem``, visual cosine strictly below
``lambda_vis``. Downstream assemblers turn candidates into temporal-order
entries (adjacent clips of one source video) and scene-transition specs
(balanced Yes/No concatenation orders).
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .tensor_store import EmbeddingMatrix

log = logging.getLogger(__name__)

ScanMode = Literal["within_video", "cross_video"]

_DEGENERATE_NORM = 1e-30


class DegenerateEmbeddingError(ValueError):
    """A vector too close to zero to compare by cosine."""


class MissingEmbeddingError(ValueError):
    """A clip has no stored vector under one of the encoders."""


@dataclass(frozen=True)
class ClipRecord:
    """Metadata for a single clip of a source video."""

    clip_id: str
    source_video_id: str
    start_s: float
    end_s: float
    action: str
    scene: str = ""
    caption: str = ""
    order_index: int = 0

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise ValueError(
                f"clip {self.clip_id}: end_s ({self.end_s}) must exceed start_s ({self.start_s})"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class MinerConfig:
    lambda_sem: float = 0.9
    lambda_vis: float = 0.6
    min_duration_s: float = 1.0

    def __post_init__(self) -> None:
        for name, value in (("lambda_sem", self.lambda_sem), ("lambda_vis", self.lambda_vis)):
            if not (-1.0 < value <= 1.0):
                raise ValueError(f"{name} must lie in (-1, 1], got {value}")


@dataclass(frozen=True)
class CandidatePair:
    """A mined pair in canonical (clip_a < clip_b) order."""

    clip_a: str
    clip_b: str
    sem_sim: float
    vis_sim: float
    adjacent: bool
    distinct_scene: bool

    def __post_init__(self) -> None:
        if self.clip_a >= self.clip_b:
            raise ValueError(
                f"pair must be canonically ordered clip_a < clip_b, got {self.clip_a!r} >= {self.clip_b!r}"
            )

    @property
    def pair_id(self) -> str:
        return f"{self.clip_a}--{self.clip_b}"


@dataclass(frozen=True)
class TshEntry:
    """An adjacent same-video pair with its chronological clip order."""

    pair_id: str
    clip_sequence: tuple[str, str]
    actions: tuple[str, str]

    @property
    def entry_id(self) -> str:
        return f"tsh:{self.pair_id}"


@dataclass(frozen=True)
class SthSpec:
    """One concatenated-video spec for scene-transition probing."""

    spec_id: str
    clip_sequence: tuple[str, str]
    change: bool
    scene_from: str | None = None
    scene_to: str | None = None
    pair_id: str | None = None

    def __post_init__(self) -> None:
        if self.change and not (self.scene_from and self.scene_to):
            raise ValueError(f"spec {self.spec_id}: change=True requires both scene labels")


def normalize_label(label: str) -> str:
    """Whitespace-collapse and Unicode-casefold a free-text label."""
    return " ".join(label.split()).casefold()


def pool_video(frames: EmbeddingMatrix) -> np.ndarray:
    """Mean-pool frame embeddings and L2-normalize the result."""
    mean = np.asarray(frames.values, dtype=np.float64).mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < _DEGENERATE_NORM:
        raise DegenerateEmbeddingError(
            f"pooled embedding is numerically zero (norm {norm:.3e})"
        )
    return mean / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1]; symmetric in its arguments."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < _DEGENERATE_NORM or nv < _DEGENERATE_NORM:
        raise DegenerateEmbeddingError("cannot take cosine of a zero vector")
    return min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))


def passes_thresholds(sem_sim: float, vis_sim: float, cfg: MinerConfig) -> bool:
    """Dual-threshold rule: semantic inclusive (>=), visual strict (<)."""
    return sem_sim >= cfg.lambda_sem and vis_sim < cfg.lambda_vis


def filter_short_clips(
    clips: Sequence[ClipRecord], min_duration_s: float = 1.0
) -> list[ClipRecord]:
    """Quality gate: drop clips shorter than ``min_duration_s`` seconds."""
    kept = [c for c in clips if c.duration_s >= min_duration_s]
    if len(kept) < len(clips):
        log.info("dropped %d clip(s) shorter than %.2fs", len(clips) - len(kept), min_duration_s)
    return kept


def _clips_by_id(clips: Sequence[ClipRecord]) -> dict[str, ClipRecord]:
    by_id: dict[str, ClipRecord] = {}
    for clip in clips:
        if clip.clip_id in by_id:
            raise ValueError(f"duplicate clip_id {clip.clip_id!r}")
        by_id[clip.clip_id] = clip
    return by_id


def mine_pairs(
    clips: Sequence[ClipRecord],
    sem_vectors: Mapping[str, np.ndarray],
    vis_vectors: Mapping[str, np.ndarray],
    cfg: MinerConfig = MinerConfig(),
    scan_mode: ScanMode = "within_video",
) -> list[CandidatePair]:
    """Scan clip pairs and emit every one passing the dual-threshold rule.

    ``within_video`` scans pairs sharing a source video (multi-segment
    corpora); ``cross_video`` scans the full corpus (flat corpora). Output
    is sorted by (clip_a, clip_b) and is invariant to input permutation.
    """
    by_id = _clips_by_id(clips)
    for clip_id in by_id:
        for name, vectors in (("semantic", sem_vectors), ("visual", vis_vectors)):
            if clip_id not in vectors:
                raise MissingEmbeddingError(f"clip {clip_id!r} has no {name} embedding")

    ordered = sorted(by_id.values(), key=lambda c: c.clip_id)
    pairs: list[CandidatePair] = []
    for i, first in enumerate(ordered):
        for second in ordered[i + 1 :]:
            if scan_mode == "within_video" and first.source_video_id != second.source_video_id:
                continue
            sem = cosine(sem_vectors[first.clip_id], sem_vectors[second.clip_id])
            vis = cosine(vis_vectors[first.clip_id], vis_vectors[second.clip_id])
            if not passes_thresholds(sem, vis, cfg):
                continue
            adjacent = (
                first.source_video_id == second.source_video_id
                and abs(first.order_index - second.order_index) == 1
            )
            scene_a, scene_b = normalize_label(first.scene), normalize_label(second.scene)
            pairs.append(
                CandidatePair(
                    clip_a=first.clip_id,
                    clip_b=second.clip_id,
                    sem_sim=sem,
                    vis_sim=vis,
                    adjacent=adjacent,
                    distinct_scene=bool(scene_a and scene_b and scene_a != scene_b),
                )
            )
    return sorted(pairs, key=lambda p: (p.clip_a, p.clip_b))


def filter_identical_actions(
    pairs: Sequence[CandidatePair], clips: Sequence[ClipRecord] | Mapping[str, ClipRecord]
) -> list[CandidatePair]:
    """Drop pairs whose action labels match after normalization."""
    by_id = clips if isinstance(clips, Mapping) else _clips_by_id(clips)
    kept = []
    for pair in pairs:
        action_a = by_id[pair.clip_a].action
        action_b = by_id[pair.clip_b].action
        if not action_a or not action_b:
            empty = pair.clip_a if not action_a else pair.clip_b
            raise ValueError(f"clip {empty!r} has an empty action label")
        if normalize_label(action_a) != normalize_label(action_b):
            kept.append(pair)
    return kept


def assemble_tsh(
    pairs: Sequence[CandidatePair], clips: Sequence[ClipRecord] | Mapping[str, ClipRecord]
) -> list[TshEntry]:
    """Keep adjacent same-video pairs, ordered chronologically by position.

    The concatenated segment is represented as the clip-id sequence only;
    no pixels are touched here.
    """
    by_id = clips if isinstance(clips, Mapping) else _clips_by_id(clips)
    entries = []
    for pair in pairs:
        if not pair.adjacent:
            continue
        a, b = by_id[pair.clip_a], by_id[pair.clip_b]
        if a.source_video_id != b.source_video_id:
            continue
        first, second = (a, b) if a.order_index < b.order_index else (b, a)
        entries.append(
            TshEntry(
                pair_id=pair.pair_id,
                clip_sequence=(first.clip_id, second.clip_id),
                actions=(first.action, second.action),
            )
        )
    return sorted(entries, key=lambda e: e.pair_id)


def assemble_sth(
    pairs: Sequence[CandidatePair],
    clips: Sequence[ClipRecord] | Mapping[str, ClipRecord],
    rng_seed: int,
) -> list[SthSpec]:
    """Build balanced scene-transition specs from mined pairs.

    Every distinct-scene pair yields both concatenation orders as Yes
    specs, ground truth scenes passed through verbatim. An equal number of
    No specs is sampled deterministically under ``rng_seed``: same-scene
    pair orders first, then single clips duplicated against themselves.
    """
    by_id = clips if isinstance(clips, Mapping) else _clips_by_id(clips)
    yes_specs: list[SthSpec] = []
    for pair in sorted(pairs, key=lambda p: p.pair_id):
        if not pair.distinct_scene:
            continue
        a, b = by_id[pair.clip_a], by_id[pair.clip_b]
        yes_specs.append(
            SthSpec(
                spec_id=f"{pair.pair_id}:ab",
                clip_sequence=(a.clip_id, b.clip_id),
                change=True,
                scene_from=a.scene,
                scene_to=b.scene,
                pair_id=pair.pair_id,
            )
        )
        yes_specs.append(
            SthSpec(
                spec_id=f"{pair.pair_id}:ba",
                clip_sequence=(b.clip_id, a.clip_id),
                change=True,
                scene_from=b.scene,
                scene_to=a.scene,
                pair_id=pair.pair_id,
            )
        )
    if not yes_specs:
        log.warning("no distinct-scene pairs; scene-transition set is empty")
        return []

    no_candidates: list[SthSpec] = []
    for pair in sorted(pairs, key=lambda p: p.pair_id):
        a, b = by_id[pair.clip_a], by_id[pair.clip_b]
        same_scene = (
            a.scene and b.scene and normalize_label(a.scene) == normalize_label(b.scene)
        )
        if not same_scene:
            continue
        for tag, seq in (("ab", (a.clip_id, b.clip_id)), ("ba", (b.clip_id, a.clip_id))):
            no_candidates.append(
                SthSpec(
                    spec_id=f"{pair.pair_id}:same:{tag}",
                    clip_sequence=seq,
                    change=False,
                    pair_id=pair.pair_id,
                )
            )

    need = len(yes_specs)
    rng = random.Random(rng_seed)
    if len(no_candidates) >= need:
        no_specs = rng.sample(no_candidates, need)
    else:
        # A clip concatenated with itself trivially has no transition.
        no_specs = list(no_candidates)
        solo_ids = sorted(by_id)
        repeat = 0
        while len(no_specs) < need:
            for clip_id in solo_ids:
                if len(no_specs) == need:
                    break
                suffix = f":{repeat}" if repeat else ""
                no_specs.append(
                    SthSpec(
                        spec_id=f"solo:{clip_id}{suffix}",
                        clip_sequence=(clip_id, clip_id),
                        change=False,
                    )
                )
            repeat += 1

    return sorted(yes_specs + no_specs, key=lambda s: s.spec_id)
