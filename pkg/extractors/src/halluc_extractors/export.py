"""Export operations: frame embeddings, attention maps, sentence caches.

Everything is written through the hallucbench tensor container and store
layout; each tensor gets a JSON sidecar that pins the checkpoint id
verbatim, the preprocessing spec, and the sampled frame timestamps.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from hallucbench.tensor_store import TensorFile, write_tensor

from .frames import DecodeError, load_frames
from .jobs import ExtractJob, JobError, sidecar_path

log = logging.getLogger(__name__)


def _write_sidecar(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _preprocessing_spec(encoder) -> dict:
    return {
        "resize": [encoder.image_size, encoder.image_size],
        "color": "rgb",
        "scale": "1/255",
        "resample": "bilinear",
    }


def extract_frame_embeddings(job: ExtractJob, encoder) -> Path:
    """Write a [T, D] embedding matrix plus its sidecar; returns the tensor path."""
    try:
        frames, indices, timestamps = load_frames(
            job.source, job.frame_count, encoder.image_size, job.fps
        )
    except DecodeError as exc:
        raise JobError(f"clip {job.clip_id}: {exc}") from exc
    matrix = encoder.embed_frames(frames)
    if matrix.shape != (len(indices), encoder.dim):
        raise JobError(
            f"clip {job.clip_id}: encoder returned shape {matrix.shape}, "
            f"expected ({len(indices)}, {encoder.dim})"
        )
    job.output.parent.mkdir(parents=True, exist_ok=True)
    write_tensor(job.output, TensorFile.from_array(matrix.astype(np.float32)))
    _write_sidecar(sidecar_path(job.output), {
        "clip_id": job.clip_id,
        "checkpoint": encoder.checkpoint,
        "frame_indices": indices,
        "timestamps_s": timestamps,
        "preprocessing": _preprocessing_spec(encoder),
        "tensor": job.output.name,
        "shape": list(matrix.shape),
    })
    return job.output


def extract_attention(job: ExtractJob, encoder) -> list[Path]:
    """Write one H x L x L attention tensor per sampled frame.

    Files land as ``<output_dir>/<clip_id>_f<k>.attn.vhtn`` with sidecars
    recording the token grid, ready for the heal command. ``job.output``
    names the directory.
    """
    try:
        frames, indices, timestamps = load_frames(
            job.source, job.frame_count, encoder.image_size, job.fps
        )
    except DecodeError as exc:
        raise JobError(f"clip {job.clip_id}: {exc}") from exc
    maps = encoder.attention_maps(frames)
    grid_h, grid_w = encoder.grid
    if (maps.ndim != 4 or maps.shape[2] != encoder.seq_len
            or maps.shape[3] != encoder.seq_len
            or grid_h * grid_w != encoder.seq_len - 1):
        raise JobError(
            f"clip {job.clip_id}: attention shape {maps.shape} does not match "
            f"a {grid_h}x{grid_w} grid plus [CLS]"
        )
    out_dir = job.output
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for k, frame_attention in enumerate(maps):
        stem = f"{job.clip_id}_f{k}"
        tensor_path = out_dir / f"{stem}.attn.vhtn"
        write_tensor(tensor_path, TensorFile.from_array(frame_attention.astype(np.float32)))
        _write_sidecar(out_dir / f"{stem}.attn.json", {
            "clip_id": job.clip_id,
            "checkpoint": encoder.checkpoint,
            "grid": [grid_h, grid_w],
            "frame_index": indices[k],
            "timestamp_s": None if timestamps is None else timestamps[k],
            "preprocessing": _preprocessing_spec(encoder),
        })
        written.append(tensor_path)
    return written


def build_desc_cache(sentences_file: Path, out_index: Path, encoder) -> Path:
    """Embed newline-delimited sentences into an exact-string cache index."""
    sentences = []
    seen = set()
    for line in Path(sentences_file).read_text(encoding="utf-8").splitlines():
        sentence = line.strip()
        if not sentence:
            log.warning("skipping empty sentence line in %s", sentences_file)
            continue
        if sentence in seen:
            continue
        seen.add(sentence)
        sentences.append(sentence)
    if not sentences:
        raise JobError(f"{sentences_file}: no usable sentences")
    matrix = np.stack([encoder.encode(s) for s in sentences]).astype(np.float32)
    out_index.parent.mkdir(parents=True, exist_ok=True)
    tensor_name = out_index.stem + ".vhtn"
    write_tensor(out_index.parent / tensor_name, TensorFile.from_array(matrix))
    _write_sidecar(out_index, {
        "sentences": sentences,
        "tensor": tensor_name,
        "checkpoint": encoder.checkpoint,
        "dim": int(matrix.shape[1]),
    })
    return out_index
