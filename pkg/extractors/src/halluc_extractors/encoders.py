"""Vision encoder adapters behind one small interface.

``build_vision_encoder`` resolves a checkpoint id:

- ``toy-vit:<seed>`` — a deterministic randomly-initialized single-block
  vision transformer (32 px input, 8 px patches, 4x4 token grid, dim 64).
  No downloads, genuine softmax attention; used for offline runs and the
  test suite.
- ``hf:<name>`` — a pretrained checkpoint through transformers (CLIP or
  SigLIP vision towers for embeddings, DINOv2-style models for attention).
  Needs the checkpoint to be reachable or cached locally.

Adapters only run the encoder and hand back arrays; similarity and
saliency math stays downstream.
"""

from __future__ import annotations

import math
import re

import numpy as np
import torch

from .jobs import UnsupportedEncoderError

TOY_IMAGE_SIZE = 32
TOY_PATCH_SIZE = 8
TOY_DIM = 64
TOY_HEADS = 4


class ToyViT:
    """Seed-initialized one-block ViT exposing embeddings and attention.

    Weights are drawn from a fixed torch generator, so one checkpoint id
    always denotes the same function of the input frames.
    """

    def __init__(self, checkpoint: str, seed: int):
        self.checkpoint = checkpoint
        self.image_size = TOY_IMAGE_SIZE
        self.patch_size = TOY_PATCH_SIZE
        self.dim = TOY_DIM
        self.heads = TOY_HEADS
        side = self.image_size // self.patch_size
        self.grid = (side, side)
        self.seq_len = side * side + 1

        gen = torch.Generator().manual_seed(seed)
        patch_in = 3 * self.patch_size**2

        def randn(*shape, scale):
            return torch.randn(*shape, generator=gen, dtype=torch.float32) * scale

        self.w_patch = randn(patch_in, self.dim, scale=patch_in**-0.5)
        self.cls_token = randn(self.dim, scale=0.02)
        self.pos = randn(self.seq_len, self.dim, scale=0.02)
        self.w_qkv = randn(self.dim, 3 * self.dim, scale=self.dim**-0.5)
        self.w_out = randn(self.dim, self.dim, scale=self.dim**-0.5)

    def _patchify(self, frames: torch.Tensor) -> torch.Tensor:
        # frames: (T, size, size, 3) -> (T, tokens, 3 * patch^2)
        t = frames.shape[0]
        p = self.patch_size
        side = self.image_size // p
        x = frames.reshape(t, side, p, side, p, 3)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(t, side * side, p * p * 3)
        return x

    @torch.no_grad()
    def _forward(self, frames: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.from_numpy(np.ascontiguousarray(frames, dtype=np.float32))
        if x.ndim != 4 or x.shape[1:] != (self.image_size, self.image_size, 3):
            raise ValueError(
                f"expected frames (T, {self.image_size}, {self.image_size}, 3), got {tuple(x.shape)}"
            )
        tokens = self._patchify(x) @ self.w_patch
        cls = self.cls_token.expand(tokens.shape[0], 1, self.dim)
        seq = torch.cat([cls, tokens], dim=1) + self.pos
        qkv = seq @ self.w_qkv
        q, k, v = qkv.chunk(3, dim=-1)
        head_dim = self.dim // self.heads

        def split(m):
            return m.reshape(m.shape[0], m.shape[1], self.heads, head_dim).transpose(1, 2)

        q, k, v = split(q), split(k), split(v)
        attention = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(head_dim), dim=-1)
        mixed = (attention @ v).transpose(1, 2).reshape(seq.shape[0], self.seq_len, self.dim)
        out = seq + mixed @ self.w_out
        return out, attention

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        out, _ = self._forward(frames)
        return out[:, 0].numpy().astype(np.float32)

    def attention_maps(self, frames: np.ndarray) -> np.ndarray:
        _, attention = self._forward(frames)
        return attention.numpy().astype(np.float32)


class HfVisionEncoder:
    """transformers-backed adapter; attention access depends on the model."""

    def __init__(self, checkpoint: str):
        try:
            from transformers import AutoImageProcessor, AutoModel
        except ImportError as exc:
            raise UnsupportedEncoderError(
                "hf: checkpoints need the transformers package (pip install transformers)"
            ) from exc
        name = checkpoint.removeprefix("hf:")
        self.checkpoint = checkpoint
        self.processor = AutoImageProcessor.from_pretrained(name)
        model = AutoModel.from_pretrained(name)
        # CLIP/SigLIP bundles carry text towers; keep the vision side.
        self.model = getattr(model, "vision_model", model).eval()
        config = self.model.config
        self.image_size = int(getattr(config, "image_size"))
        patch = int(getattr(config, "patch_size"))
        side = self.image_size // patch
        self.grid = (side, side)
        self.seq_len = side * side + 1
        self.dim = int(getattr(config, "hidden_size"))

    @torch.no_grad()
    def _run(self, frames: np.ndarray, need_attention: bool):
        images = [np.asarray(f * 255.0, dtype=np.uint8) for f in frames]
        inputs = self.processor(images=images, return_tensors="pt")
        return self.model(**inputs, output_attentions=need_attention)

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        outputs = self._run(frames, need_attention=False)
        pooled = getattr(outputs, "pooler_output", None)
        if pooled is None:
            pooled = outputs.last_hidden_state[:, 0]
        return pooled.numpy().astype(np.float32)

    def attention_maps(self, frames: np.ndarray) -> np.ndarray:
        outputs = self._run(frames, need_attention=True)
        attentions = getattr(outputs, "attentions", None)
        if not attentions:
            raise UnsupportedEncoderError(
                f"{self.checkpoint}: model does not expose attention weights"
            )
        last = attentions[-1].numpy().astype(np.float32)
        if last.shape[-1] != self.seq_len:
            raise UnsupportedEncoderError(
                f"{self.checkpoint}: sequence length {last.shape[-1]} does not match "
                f"the {self.grid[0]}x{self.grid[1]} patch grid plus [CLS]"
            )
        return last


_TOY_RE = re.compile(r"toy-vit(?::(\d+))?$")


def build_vision_encoder(checkpoint: str):
    m = _TOY_RE.fullmatch(checkpoint)
    if m:
        return ToyViT(checkpoint, seed=int(m.group(1) or 0))
    if checkpoint.startswith("hf:"):
        return HfVisionEncoder(checkpoint)
    raise UnsupportedEncoderError(
        f"unknown encoder checkpoint {checkpoint!r}; expected 'toy-vit[:seed]' or 'hf:<name>'"
    )
