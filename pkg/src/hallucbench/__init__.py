"""Toolkit for video-hallucination benchmarking on serialized tensors.

Mines adversarial clip pairs from encoder embeddings, renders the four
question formats, scores free-text model responses, and reweights visual
feature grids by self-attention saliency. Model inference happens out of
process; this package only moves tensors and text.
"""

from .dino_heal import HealConfig, heal
from .pair_miner import (
    CandidatePair,
    ClipRecord,
    MinerConfig,
    SthSpec,
    TshEntry,
    assemble_sth,
    assemble_tsh,
    cosine,
    filter_identical_actions,
    mine_pairs,
    pool_video,
)
from .question_gen import QAItem, gen_binary, gen_mcq, gen_sorting, gen_sth
from .scorer import (
    ConfusionCounts,
    DescConfig,
    ModelResponse,
    ScoreReport,
    mcc,
    parse_binary,
    parse_mcq,
    parse_sorting,
    parse_sth,
    score_cls,
    score_desc,
    score_desc_one,
    score_overall,
    score_run,
)
from .tensor_store import (
    AttentionTensor,
    EmbeddingMatrix,
    FeatureGrid,
    TensorFile,
    read_tensor,
    validate_attention,
    write_tensor,
)

__version__ = "0.1.0"
