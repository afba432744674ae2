"""Command-line exporters: extract-frames, extract-attn, build-desc-cache.

Media resolution: for each clip id, ``<media_root>/<clip_id>/`` (a frame
directory) wins, else ``<media_root>/<clip_id>.<ext>`` for common video
extensions. Outputs follow the hallucbench store layout.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from hallucbench.tensor_store import read_jsonl

from .encoders import build_vision_encoder
from .export import build_desc_cache, extract_attention, extract_frame_embeddings
from .jobs import ExtractJob, JobError, UnsupportedEncoderError
from .sentence import build_sentence_encoder

log = logging.getLogger("halluc_extractors")

VIDEO_SUFFIXES = (".mp4", ".mkv", ".webm", ".avi", ".mov")


def _resolve_media(media_root: Path, clip_id: str) -> Path:
    directory = media_root / clip_id
    if directory.is_dir():
        return directory
    for suffix in VIDEO_SUFFIXES:
        candidate = media_root / f"{clip_id}{suffix}"
        if candidate.is_file():
            return candidate
    raise JobError(f"clip {clip_id}: no media under {media_root} "
                   f"(tried {clip_id}/ and {clip_id}.<video>)")


def _clip_ids(args) -> list[str]:
    if args.clip:
        return list(args.clip)
    records = read_jsonl(Path(args.clips))
    return [rec["clip_id"] for rec in records if "clip_id" in rec]


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--media-root", required=True, help="frame dirs / videos per clip id")
    parser.add_argument("--clips", default=None, help="clips.jsonl listing clip ids")
    parser.add_argument("--clip", action="append", default=None,
                        help="single clip id (repeatable); overrides --clips")
    parser.add_argument("--frames", type=int, default=8, help="uniform sample count")
    parser.add_argument("--fps", type=float, default=None,
                        help="frame-directory timestamp rate (timestamps only)")
    parser.add_argument("-v", "--verbose", action="store_true")


def _setup(args) -> None:
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.clip and not args.clips:
        raise JobError("pass --clips clips.jsonl or at least one --clip")


def extract_frames_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-frames",
        description="Export per-clip [T, D] frame-embedding matrices.")
    _common_flags(parser)
    parser.add_argument("--encoder", default="toy-vit:0",
                        help="checkpoint id: toy-vit[:seed] or hf:<name>")
    parser.add_argument("--out-dir", required=True,
                        help="output directory, e.g. <store>/semantic")
    args = parser.parse_args(argv)
    try:
        _setup(args)
        encoder = build_vision_encoder(args.encoder)
        media_root = Path(args.media_root)
        out_dir = Path(args.out_dir)
        for clip_id in _clip_ids(args):
            job = ExtractJob(
                clip_id=clip_id,
                source=_resolve_media(media_root, clip_id),
                checkpoint=args.encoder,
                output=out_dir / f"{clip_id}.vhtn",
                frame_count=args.frames,
                fps=args.fps,
            )
            path = extract_frame_embeddings(job, encoder)
            log.info("wrote %s", path)
    except (JobError, UnsupportedEncoderError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def extract_attn_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-attn",
        description="Export per-frame H x L x L attention tensors with grid sidecars.")
    _common_flags(parser)
    parser.add_argument("--encoder", default="toy-vit:1",
                        help="checkpoint id: toy-vit[:seed] or hf:<name>")
    parser.add_argument("--out-dir", required=True,
                        help="output directory compatible with `hallucbench heal`")
    args = parser.parse_args(argv)
    try:
        _setup(args)
        encoder = build_vision_encoder(args.encoder)
        media_root = Path(args.media_root)
        out_dir = Path(args.out_dir)
        for clip_id in _clip_ids(args):
            job = ExtractJob(
                clip_id=clip_id,
                source=_resolve_media(media_root, clip_id),
                checkpoint=args.encoder,
                output=out_dir,
                frame_count=args.frames,
                fps=args.fps,
            )
            written = extract_attention(job, encoder)
            log.info("wrote %d attention frame(s) for %s", len(written), clip_id)
    except (JobError, UnsupportedEncoderError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_desc_cache_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="build-desc-cache",
        description="Embed newline-delimited sentences into a scorer cache index.")
    parser.add_argument("sentences", help="UTF-8 text file, one sentence per line")
    parser.add_argument("--encoder", default="hash-ngram",
                        help="checkpoint id: hash-ngram[:dim] or hf:<name>")
    parser.add_argument("--out", required=True, help="cache index JSON path")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        encoder = build_sentence_encoder(args.encoder)
        path = build_desc_cache(Path(args.sentences), Path(args.out), encoder)
        log.info("wrote %s", path)
    except (JobError, UnsupportedEncoderError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(extract_frames_main())
