"""Frame loading with uniform temporal sampling.

Sources are either a directory of image frames (sorted by name) or a video
file decoded through OpenCV when it is installed. Sampling is uniform over
the source; sampled indices and timestamps land in the export sidecar.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


class DecodeError(RuntimeError):
    pass


def uniform_indices(total: int, count: int) -> list[int]:
    """``count`` indices spread evenly over [0, total); repeats when short."""
    if total < 1:
        raise DecodeError("source has no frames")
    positions = (np.arange(count) + 0.5) * (total / count) - 0.5
    return [int(round(min(max(p, 0.0), total - 1))) for p in positions]


def _load_image(path: Path, size: int) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float32) / 255.0


def load_frames(
    source: Path, count: int, size: int, fps: float | None = None
) -> tuple[np.ndarray, list[int], list[float] | None]:
    """Return (frames [T, size, size, 3] in [0, 1], indices, timestamps_s).

    Timestamps are known for videos (from the container frame rate) and for
    directories only when ``fps`` is given; otherwise None.
    """
    source = Path(source)
    if source.is_dir():
        files = sorted(p for p in source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise DecodeError(f"no image frames under {source}")
        indices = uniform_indices(len(files), count)
        try:
            frames = np.stack([_load_image(files[i], size) for i in indices])
        except OSError as exc:
            raise DecodeError(f"unreadable frame in {source}: {exc}") from exc
        timestamps = [i / fps for i in indices] if fps else None
        return frames, indices, timestamps
    if source.is_file():
        return _load_video(source, count, size)
    raise DecodeError(f"source does not exist: {source}")


def _load_video(path: Path, count: int, size: int):
    try:
        import cv2
    except ImportError as exc:
        raise DecodeError(
            f"{path}: video decoding needs opencv-python; extract to a frame directory instead"
        ) from exc
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise DecodeError(f"cannot open video {path}")
    try:
        total = int(capture.get(cv2.CAP_PROP_FRAME_COUNT))
        rate = capture.get(cv2.CAP_PROP_FPS) or 0.0
        indices = uniform_indices(total, count)
        frames = []
        for index in indices:
            capture.set(cv2.CAP_PROP_POS_FRAMES, index)
            ok, frame = capture.read()
            if not ok:
                raise DecodeError(f"{path}: failed to decode frame {index}")
            rgb = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
            resized = cv2.resize(rgb, (size, size), interpolation=cv2.INTER_LINEAR)
            frames.append(np.asarray(resized, dtype=np.float32) / 255.0)
    finally:
        capture.release()
    timestamps = [i / rate for i in indices] if rate > 0 else None
    return np.stack(frames), indices, timestamps
