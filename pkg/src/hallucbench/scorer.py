"""Free-text response parsing and the benchmark metric calculus.

Parsers are total: every string maps to an answer or to ``None``
(unparsed); they never raise. Unparsed answers score as incorrect, and as
predicted-No for scene-change classification, with separate tallies so a
non-compliant model is auditable.

Metrics: plain accuracy for the action/ordering tasks, plus a pair-strict
variant that credits a video pair only when every question about it is
right. Scene transitions combine a squared-remapped Matthews coefficient
with a sigmoid-remapped embedding similarity of the predicted scene
descriptions, mixed by a configurable weight.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .pair_miner import cosine, normalize_label
from .question_gen import (
    KIND_BINARY,
    KIND_MCQ,
    KIND_OPEN_STH,
    KIND_SORTING,
    QAItem,
)
from .tensor_store import read_tensor

DESC_POLICY_NOTE = "no-change ground truths are excluded from the description score"


class EmptyTaskError(ValueError):
    """A metric was requested over zero items."""


class IncompleteGroupError(ValueError):
    """A grouped metric is missing one of its member responses."""


class JoinError(ValueError):
    """Responses reference question ids absent from the manifest."""


class EmbeddingProviderError(RuntimeError):
    """The sentence-embedding provider could not embed a string."""


@dataclass(frozen=True)
class ModelResponse:
    qa_id: str
    raw_text: str


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts, subscripts (actual, predicted)."""

    n11: int
    n10: int
    n01: int
    n00: int

    def __post_init__(self) -> None:
        if min(self.n11, self.n10, self.n01, self.n00) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00


@dataclass(frozen=True)
class DescConfig:
    thr_low: float = 0.5
    alpha: float = 0.6

    def __post_init__(self) -> None:
        if not (0.0 <= self.thr_low < 1.0):
            raise ValueError(f"thr_low must lie in [0, 1), got {self.thr_low}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


class EmbeddingProvider(Protocol):
    """Deterministic sentence -> unit-norm vector mapping."""

    def __call__(self, sentence: str) -> np.ndarray: ...


class CachedEmbeddingProvider:
    """Exact-string lookup into a prebuilt sentence-embedding cache.

    The on-disk form is a JSON index {"sentences": [...], "tensor": path}
    next to an N x D ``.vhtn`` matrix, one row per sentence.
    """

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self._vectors: dict[str, np.ndarray] = {}
        for sentence, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            norm = float(np.linalg.norm(arr))
            if norm == 0.0:
                raise EmbeddingProviderError(f"zero vector cached for {sentence!r}")
            self._vectors[sentence] = arr / norm

    @classmethod
    def load(cls, index_path) -> "CachedEmbeddingProvider":
        import json
        from pathlib import Path

        index_path = Path(index_path)
        index = json.loads(index_path.read_text(encoding="utf-8"))
        matrix = read_tensor(index_path.parent / index["tensor"]).values
        sentences = index["sentences"]
        if matrix.ndim != 2 or matrix.shape[0] != len(sentences):
            raise EmbeddingProviderError(
                f"{index_path}: tensor shape {matrix.shape} does not index "
                f"{len(sentences)} sentences"
            )
        return cls({s: matrix[i] for i, s in enumerate(sentences)})

    def __call__(self, sentence: str) -> np.ndarray:
        try:
            return self._vectors[sentence]
        except KeyError:
            raise EmbeddingProviderError(f"no cached embedding for {sentence!r}") from None


# ---------------------------------------------------------------------------
# parsers

_WORD_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_LEADING_TOKEN = re.compile(r"[^\w]*([A-Za-z]+)")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n")
_MCQ_LETTER = re.compile(r"(?<![A-Za-z0-9])([A-D])(?![A-Za-z0-9])")
_STH_CHANGE = re.compile(r"scene\s*changes?\s*[:\-]?\s*[\"']?\s*(yes|no)\b", re.IGNORECASE)
_STH_LOCATIONS = re.compile(r"\bfrom\s+(.+?)\s+to\s+([^.\n!?]+)", re.IGNORECASE | re.DOTALL)
_SORT_COMPACT = re.compile(r"(?<![A-Za-z0-9])(AB|BA)(?![A-Za-z0-9])", re.IGNORECASE)
_SORT_LABEL = re.compile(r"action\s*[:.\-]?\s*([AB])(?![A-Za-z0-9])", re.IGNORECASE)
_SORT_BARE = re.compile(r"(?<![A-Za-z0-9])([AB])(?![A-Za-z0-9])")
_SORT_KEYWORD = re.compile(r"\b(before|after|followed\s+by)\b", re.IGNORECASE)
_SORT_ONLY_ONE = re.compile(
    r"\b(?:only|just)\b[^.!?\n]{0,60}?\bone\s+(?:action|of\b)", re.IGNORECASE
)


def parse_binary(raw_text: str) -> str | None:
    """Extract a Yes/No answer; ``None`` when no decision is recoverable.

    A leading yes/no token is authoritative. Otherwise the first standalone
    yes/no word wins, unless the first sentence contains both (treated as
    contradictory).
    """
    text = raw_text.strip()
    if not text:
        return None
    lead = _LEADING_TOKEN.match(text)
    if lead and lead.group(1).lower() in ("yes", "no"):
        return lead.group(1).lower().capitalize()
    first_sentence = _SENTENCE_SPLIT.split(text, maxsplit=1)[0]
    first_hits = {m.lower() for m in _WORD_YES_NO.findall(first_sentence)}
    if first_hits >= {"yes", "no"}:
        return None
    hit = _WORD_YES_NO.search(text)
    return hit.group(1).lower().capitalize() if hit else None


def parse_mcq(raw_text: str, choices: Sequence[str]) -> str | None:
    """Extract a choice letter A-D; ``None`` when ambiguous or absent.

    Uppercase standalone letters count anywhere; a lowercase letter counts
    only when it is the entire response (so article 'a' never matches).
    Several distinct letters are contradictory. With no letter at all, a
    response equal to a choice text (after normalization) selects it.
    """
    if len(choices) != 4:
        raise ValueError(f"mcq items carry exactly 4 choices, got {len(choices)}")
    text = raw_text.strip()
    if not text:
        return None
    bare = text.strip(" \t\r\n.()[]{}'\":!?")
    if len(bare) == 1 and bare.upper() in "ABCD":
        return bare.upper()
    letters = {m for m in _MCQ_LETTER.findall(text)}
    if len(letters) == 1:
        return letters.pop()
    if len(letters) > 1:
        return None
    normalized = normalize_label(text.strip(" \t\r\n.'\"!?"))
    for letter, choice in zip("ABCD", choices):
        if normalized == normalize_label(choice):
            return letter
    return None


def _sorting_mentions(raw_text: str, action_a: str | None, action_b: str | None) -> list[tuple[int, str]]:
    mentions: dict[int, str] = {}
    for m in _SORT_LABEL.finditer(raw_text):
        mentions[m.start(1)] = m.group(1).upper()
    for m in _SORT_BARE.finditer(raw_text):
        mentions.setdefault(m.start(1), m.group(1))
    lowered = raw_text.lower()
    for label, action in (("A", action_a), ("B", action_b)):
        if not action:
            continue
        needle = normalize_label(action)
        start = 0
        while True:
            pos = lowered.find(needle, start)
            if pos < 0:
                break
            mentions.setdefault(pos, label)
            start = pos + 1
    return sorted(mentions.items())


def parse_sorting(
    raw_text: str, action_a: str | None = None, action_b: str | None = None
) -> str | None:
    """Extract an action ordering: 'AB', 'BA', 'OnlyA', 'OnlyB', or ``None``.

    Recognizes the compact two-letter form, '<X> before <Y>' / '<X> after
    <Y>' / '<X> followed by <Y>' phrasing over the A/B labels or the bound
    action strings, and single-action responses.
    """
    text = raw_text.strip()
    if not text:
        return None
    compact = {m.upper() for m in _SORT_COMPACT.findall(text)}
    if len(compact) == 1:
        return compact.pop()

    mentions = _sorting_mentions(text, action_a, action_b)
    for kw in _SORT_KEYWORD.finditer(text):
        preceding = [label for pos, label in mentions if pos < kw.start()]
        following = [label for pos, label in mentions if pos >= kw.end()]
        if not preceding or not following:
            continue
        x, y = preceding[-1], following[0]
        if x == y:
            continue
        if kw.group(1).lower() == "after":
            x, y = y, x
        return f"{x}{y}"

    distinct = {label for _, label in mentions}
    if len(distinct) == 1:
        only = distinct.pop()
        return f"Only{only}"
    if _SORT_ONLY_ONE.search(text) and mentions:
        return f"Only{mentions[-1][1]}"
    return None


def _clean_scene(fragment: str) -> str:
    scene = fragment.strip().strip("\"'").rstrip(" \t.,;:!?").strip("\"'")
    if re.fullmatch(r"\[[^\]]*\]", scene):
        return ""
    return scene


def parse_sth(raw_text: str) -> tuple[str | None, str | None, str | None]:
    """Extract (scene-change answer, scene_from, scene_to).

    The change answer needs an explicit 'Scene change: Yes/No' (punctuation
    and case tolerant). Scenes come from a following 'from X to Y'; echoed
    template placeholders like '[location1]' become empty strings.
    """
    m = _STH_CHANGE.search(raw_text)
    if not m:
        return None, None, None
    change = m.group(1).lower().capitalize()
    if change == "No":
        return "No", None, None
    tail = raw_text[m.end():]
    loc = _STH_LOCATIONS.search(tail) or _STH_LOCATIONS.search(raw_text)
    if not loc:
        return "Yes", None, None
    return "Yes", _clean_scene(loc.group(1)), _clean_scene(loc.group(2))


# ---------------------------------------------------------------------------
# metrics

def accuracy(n_correct: int, n_total: int) -> float:
    if n_total <= 0:
        raise EmptyTaskError("accuracy over zero items is undefined")
    return n_correct / n_total


def binary_item_correct(group: Sequence[tuple[str, str | None]]) -> bool:
    """One (pair, action) question group: [(ground_truth, parsed), ...].

    Correct only when the video containing the action got Yes and the
    other video got No; an unparsed answer can never be correct.
    """
    if len(group) != 2:
        raise IncompleteGroupError(f"binary group needs exactly 2 members, got {len(group)}")
    truths = sorted(truth for truth, _ in group)
    if truths != ["No", "Yes"]:
        raise IncompleteGroupError(f"binary group needs one Yes and one No truth, got {truths}")
    return all(parsed == truth for truth, parsed in group)


def pair_strict_correct(action_groups: Sequence[Sequence[tuple[str, str | None]]]) -> bool:
    """A pair is credited only when both of its action groups are correct."""
    if len(action_groups) != 2:
        raise IncompleteGroupError(
            f"pair-strict scoring needs both action groups, got {len(action_groups)}"
        )
    return all(binary_item_correct(group) for group in action_groups)


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    if counts.total == 0:
        raise EmptyTaskError("MCC over zero items is undefined")
    n11, n10, n01, n00 = counts.n11, counts.n10, counts.n01, counts.n00
    marginals = (n11 + n01, n11 + n10, n00 + n01, n00 + n10)
    if 0 in marginals:
        return 0.0
    denominator = math.sqrt(math.prod(marginals))
    return (n11 * n00 - n01 * n10) / denominator


def score_cls(mcc_value: float) -> float:
    """Remap MCC from [-1, 1] onto [0, 1], squaring to punish chance-level."""
    if not (-1.0 <= mcc_value <= 1.0):
        raise ValueError(f"MCC must lie in [-1, 1], got {mcc_value}")
    return ((mcc_value + 1.0) / 2.0) ** 2


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def desc_score_from_similarity(similarity: float, cfg: DescConfig = DescConfig()) -> float:
    """Scene-description credit for one cosine similarity value."""
    if similarity <= cfg.thr_low:
        return 0.0
    return (_sigmoid(similarity) - _sigmoid(cfg.thr_low)) / (
        _sigmoid(1.0) - _sigmoid(cfg.thr_low)
    )


def score_desc_one(
    pred_scene: str | None,
    true_scene: str,
    provider: EmbeddingProvider,
    cfg: DescConfig = DescConfig(),
) -> float:
    """Credit one predicted scene against its ground truth."""
    if not true_scene:
        raise ValueError("ground-truth scene must be nonempty")
    if not pred_scene:
        return 0.0
    similarity = cosine(provider(pred_scene), provider(true_scene))
    return desc_score_from_similarity(similarity, cfg)


def score_desc(
    pred_from: str | None,
    pred_to: str | None,
    truth_from: str,
    truth_to: str,
    provider: EmbeddingProvider,
    cfg: DescConfig = DescConfig(),
) -> float:
    """Mean credit over the 'from' and 'to' scene descriptions."""
    s_from = score_desc_one(pred_from, truth_from, provider, cfg)
    s_to = score_desc_one(pred_to, truth_to, provider, cfg)
    return (s_from + s_to) / 2.0


def score_overall(cls_score: float, desc_score: float, alpha: float) -> float:
    """Weighted mix of classification and description credit."""
    for name, value in (("cls", cls_score), ("desc", desc_score), ("alpha", alpha)):
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return alpha * cls_score + (1.0 - alpha) * desc_score


# ---------------------------------------------------------------------------
# run-level aggregation

@dataclass(frozen=True)
class ScoreReport:
    """Per-task metric bundle for one scored response set."""

    ach_binary_acc: float | None
    ach_binary_pair_acc: float | None
    ach_mcq_acc: float | None
    ach_mcq_pair_acc: float | None
    tsh_acc: float | None
    sth_mcc: float | None
    sth_score_cls: float | None
    sth_score_desc: float | None
    sth_score_overall: float | None
    unparsed: Mapping[str, int]
    thr_low: float
    alpha: float
    tsh_single_action: int = 0
    desc_flagged: int = 0
    missing_responses: int = 0
    notes: tuple[str, ...] = (DESC_POLICY_NOTE,)
    audit: tuple[dict, ...] = ()

    def metrics_dict(self) -> dict:
        return {
            "ach_binary_acc": self.ach_binary_acc,
            "ach_binary_pair_acc": self.ach_binary_pair_acc,
            "ach_mcq_acc": self.ach_mcq_acc,
            "ach_mcq_pair_acc": self.ach_mcq_pair_acc,
            "tsh_acc": self.tsh_acc,
            "sth_mcc": self.sth_mcc,
            "sth_score_cls": self.sth_score_cls,
            "sth_score_desc": self.sth_score_desc,
            "sth_score_overall": self.sth_score_overall,
        }


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def score_run(
    manifest: Sequence[QAItem],
    responses: Sequence[ModelResponse],
    provider: EmbeddingProvider | None = None,
    cfg: DescConfig = DescConfig(),
) -> ScoreReport:
    """Parse and score one response set against a question manifest.

    Manifest items without a response are scored as unparsed and tallied
    in ``missing_responses``. Provider failures flag the item and zero its
    description credit instead of aborting the run.
    """
    by_id = {item.qa_id: item for item in manifest}
    if len(by_id) != len(manifest):
        raise ValueError("duplicate qa_id in manifest")
    resp_by_id: dict[str, ModelResponse] = {}
    for resp in responses:
        if resp.qa_id in resp_by_id:
            raise ValueError(f"duplicate response for qa_id {resp.qa_id}")
        resp_by_id[resp.qa_id] = resp
    orphans = sorted(set(resp_by_id) - set(by_id))
    if orphans:
        raise JoinError(f"responses reference unknown qa_ids: {', '.join(orphans)}")

    unparsed = {KIND_BINARY: 0, KIND_MCQ: 0, KIND_SORTING: 0, KIND_OPEN_STH: 0}
    missing = 0
    audit: list[dict] = []

    binary_groups: dict[tuple[str, str], list[tuple[str, str | None]]] = {}
    mcq_items: dict[str, list[bool]] = {}
    mcq_correct = 0
    mcq_total = 0
    tsh_correct = 0
    tsh_total = 0
    tsh_single = 0
    sth_counts = {"n11": 0, "n10": 0, "n01": 0, "n00": 0}
    sth_total = 0
    desc_scores: list[float] = []
    desc_flagged = 0

    for item in sorted(manifest, key=lambda i: i.qa_id):
        resp = resp_by_id.get(item.qa_id)
        raw = resp.raw_text if resp is not None else ""
        flags: list[str] = []
        if resp is None:
            missing += 1
            flags.append("missing_response")
        record: dict = {"qa_id": item.qa_id, "kind": item.kind}

        if item.kind == KIND_BINARY:
            parsed = parse_binary(raw)
            if parsed is None:
                unparsed[KIND_BINARY] += 1
            key = (item.pair_id, item.action or "")
            binary_groups.setdefault(key, []).append((str(item.ground_truth), parsed))
            record.update(parsed=parsed, correct=parsed == item.ground_truth)
        elif item.kind == KIND_MCQ:
            parsed = parse_mcq(raw, item.choices or ())
            if parsed is None:
                unparsed[KIND_MCQ] += 1
            correct = parsed == item.ground_truth
            mcq_total += 1
            mcq_correct += int(correct)
            mcq_items.setdefault(item.pair_id, []).append(correct)
            record.update(parsed=parsed, correct=correct)
        elif item.kind == KIND_SORTING:
            action_a, action_b = _sorting_actions_from_prompt(item.prompt)
            parsed = parse_sorting(raw, action_a, action_b)
            if parsed is None:
                unparsed[KIND_SORTING] += 1
            elif parsed.startswith("Only"):
                tsh_single += 1
            correct = parsed == item.ground_truth
            tsh_total += 1
            tsh_correct += int(correct)
            record.update(parsed=parsed, correct=correct)
        elif item.kind == KIND_OPEN_STH:
            change, pred_from, pred_to = parse_sth(raw)
            if change is None:
                unparsed[KIND_OPEN_STH] += 1
                flags.append("unparsed_as_no")
            predicted_yes = change == "Yes"
            truth = item.ground_truth
            actual_yes = truth["change"] == "Yes"
            sth_total += 1
            key = f"n{int(actual_yes)}{int(predicted_yes)}"
            sth_counts[key] += 1
            record.update(parsed={"change": change, "scene_from": pred_from, "scene_to": pred_to},
                          correct=predicted_yes == actual_yes)
            if actual_yes:
                item_desc = []
                for pred, true in ((pred_from, truth["scene_from"]), (pred_to, truth["scene_to"])):
                    try:
                        if provider is None and pred:
                            raise EmbeddingProviderError("no embedding provider configured")
                        item_desc.append(score_desc_one(pred, true, provider, cfg))
                    except EmbeddingProviderError as exc:
                        desc_flagged += 1
                        flags.append(f"desc_provider_error: {exc}")
                        item_desc.append(0.0)
                desc = _mean(item_desc)
                desc_scores.append(desc)
                record["score_desc"] = desc
        else:
            raise ValueError(f"unknown question kind {item.kind!r}")

        if flags:
            record["flags"] = flags
        audit.append(record)

    binary_acc = binary_pair_acc = None
    if binary_groups:
        group_results = {key: binary_item_correct(group) for key, group in binary_groups.items()}
        binary_acc = accuracy(sum(group_results.values()), len(group_results))
        pairs: dict[str, list[bool]] = {}
        for (pair_id, _), ok in group_results.items():
            pairs.setdefault(pair_id, []).append(ok)
        for pair_id, oks in pairs.items():
            if len(oks) != 2:
                raise IncompleteGroupError(
                    f"pair {pair_id}: expected 2 action groups, got {len(oks)}"
                )
        binary_pair_acc = accuracy(
            sum(all(oks) for oks in pairs.values()), len(pairs)
        )

    mcq_acc = mcq_pair_acc = None
    if mcq_total:
        mcq_acc = accuracy(mcq_correct, mcq_total)
        for pair_id, oks in mcq_items.items():
            if len(oks) != 2:
                raise IncompleteGroupError(
                    f"pair {pair_id}: expected 2 mcq items, got {len(oks)}"
                )
        mcq_pair_acc = accuracy(
            sum(all(oks) for oks in mcq_items.values()), len(mcq_items)
        )

    tsh_acc = accuracy(tsh_correct, tsh_total) if tsh_total else None

    sth_mcc = sth_cls = sth_desc = sth_overall = None
    if sth_total:
        counts = ConfusionCounts(
            n11=sth_counts["n11"], n10=sth_counts["n10"],
            n01=sth_counts["n01"], n00=sth_counts["n00"],
        )
        sth_mcc = mcc(counts)
        sth_cls = score_cls(sth_mcc)
        if desc_scores:
            sth_desc = _mean(desc_scores)
            sth_overall = score_overall(sth_cls, sth_desc, cfg.alpha)

    return ScoreReport(
        ach_binary_acc=binary_acc,
        ach_binary_pair_acc=binary_pair_acc,
        ach_mcq_acc=mcq_acc,
        ach_mcq_pair_acc=mcq_pair_acc,
        tsh_acc=tsh_acc,
        sth_mcc=sth_mcc,
        sth_score_cls=sth_cls,
        sth_score_desc=sth_desc,
        sth_score_overall=sth_overall,
        unparsed=unparsed,
        thr_low=cfg.thr_low,
        alpha=cfg.alpha,
        tsh_single_action=tsh_single,
        desc_flagged=desc_flagged,
        missing_responses=missing,
        audit=tuple(audit),
    )


_SORT_PROMPT_ACTIONS = re.compile(r"Action A\. (.+)\nAction B\. (.+)\n")


def _sorting_actions_from_prompt(prompt: str) -> tuple[str | None, str | None]:
    m = _SORT_PROMPT_ACTIONS.search(prompt)
    return (m.group(1), m.group(2)) if m else (None, None)
