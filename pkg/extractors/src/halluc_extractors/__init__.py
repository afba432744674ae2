"""Encoder adapters exporting embeddings, attention maps, and sentence
caches in the hallucbench store formats."""

from .encoders import ToyViT, build_vision_encoder
from .export import build_desc_cache, extract_attention, extract_frame_embeddings
from .jobs import ExtractJob, JobError, UnsupportedEncoderError
from .sentence import HashNgramSentenceEncoder, build_sentence_encoder

__version__ = "0.1.0"
