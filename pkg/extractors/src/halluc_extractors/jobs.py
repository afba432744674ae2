"""Extraction job descriptions and sidecar schema."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class JobError(RuntimeError):
    """A per-clip extraction failed; the message names the clip."""


class UnsupportedEncoderError(RuntimeError):
    """The selected encoder cannot serve the requested export."""


@dataclass(frozen=True)
class ExtractJob:
    """One clip's export: where the media lives, which encoder, where to write.

    ``checkpoint`` is recorded verbatim in the output sidecar; together with
    the preprocessing spec and frame timestamps it fully determines the
    export.
    """

    clip_id: str
    source: Path
    checkpoint: str
    output: Path
    frame_count: int = 8
    fps: float | None = None

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ValueError(f"job {self.clip_id}: frame_count must be >= 1")
        if self.fps is not None and self.fps <= 0:
            raise ValueError(f"job {self.clip_id}: fps must be positive")


def sidecar_path(tensor_path: Path) -> Path:
    return tensor_path.with_suffix(".json")
