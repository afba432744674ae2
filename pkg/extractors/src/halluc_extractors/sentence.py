"""Sentence encoders for the description-score cache.

``hash-ngram[:dim]`` is the offline baseline: a hashed bag of word tokens
and character trigrams, with the final (head) word weighted up since scene
phrases put the informative noun last ("in a swimming pool"). It is
deterministic, needs no weights, and ranks lexically overlapping phrases
the way the description score expects. ``hf:<name>`` wraps a pretrained
sentence encoder (CLS pooling) when transformers and the checkpoint are
available.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .jobs import UnsupportedEncoderError

_WORD_RE = re.compile(r"[\w']+")

HEAD_WORD_WEIGHT = 3.0
CHAR_GRAM_WEIGHT = 0.3


class HashNgramSentenceEncoder:
    def __init__(self, checkpoint: str, dim: int = 256):
        self.checkpoint = checkpoint
        self.dim = dim

    def _slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "little") % self.dim
        sign = 1.0 if digest[4] & 1 else -1.0
        return index, sign

    def encode(self, sentence: str) -> np.ndarray:
        words = _WORD_RE.findall(sentence.casefold())
        if not words:
            raise ValueError("cannot embed an empty sentence")
        vec = np.zeros(self.dim, dtype=np.float64)
        for position, word in enumerate(words):
            weight = HEAD_WORD_WEIGHT if position == len(words) - 1 else 1.0
            index, sign = self._slot("w:" + word)
            vec[index] += sign * weight
            for start in range(len(word) - 2):
                index, sign = self._slot("g:" + word[start:start + 3])
                vec[index] += sign * CHAR_GRAM_WEIGHT
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError(f"degenerate embedding for {sentence!r}")
        return vec / norm


class HfSentenceEncoder:
    """Pretrained sentence encoder with [CLS] pooling."""

    def __init__(self, checkpoint: str):
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise UnsupportedEncoderError(
                "hf: sentence checkpoints need torch and transformers"
            ) from exc
        name = checkpoint.removeprefix("hf:")
        self.checkpoint = checkpoint
        self.tokenizer = AutoTokenizer.from_pretrained(name)
        self.model = AutoModel.from_pretrained(name).eval()

    def encode(self, sentence: str) -> np.ndarray:
        import torch

        if not sentence.strip():
            raise ValueError("cannot embed an empty sentence")
        with torch.no_grad():
            inputs = self.tokenizer(sentence, return_tensors="pt", truncation=True)
            hidden = self.model(**inputs).last_hidden_state[0, 0].numpy()
        norm = float(np.linalg.norm(hidden))
        if norm == 0.0:
            raise ValueError(f"degenerate embedding for {sentence!r}")
        return (hidden / norm).astype(np.float64)


_HASH_RE = re.compile(r"hash-ngram(?::(\d+))?$")


def build_sentence_encoder(checkpoint: str):
    m = _HASH_RE.fullmatch(checkpoint)
    if m:
        return HashNgramSentenceEncoder(checkpoint, dim=int(m.group(1) or 256))
    if checkpoint.startswith("hf:"):
        return HfSentenceEncoder(checkpoint)
    raise UnsupportedEncoderError(
        f"unknown sentence checkpoint {checkpoint!r}; expected 'hash-ngram[:dim]' or 'hf:<name>'"
    )
