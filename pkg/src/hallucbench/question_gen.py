"""Deterministic rendering of the four benchmark question formats.

Each generator is a pure function of (validated pair data, seed); the
per-pair RNG is derived from string seeds so a manifest regenerates
byte-identically regardless of pair processing order.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .pair_miner import CandidatePair, ClipRecord, SthSpec, TshEntry, normalize_label

BINARY_TEMPLATES = (
    "Is the prominent action in the video {action}?",
    "Does the video primarily feature {action}?",
    "Is the key action shown in the video {action}?",
    "Is the primary action in the video {action}?",
)
BINARY_SUFFIX = "Only answer with 'No' or 'Yes'."

MCQ_TEMPLATES = (
    "What is the prominent action in the video?",
    "What is the key action shown in the video?",
    "What is the primary action in the video?",
    "What is the predominant action captured in the video?",
)
MCQ_BODY = (
    '"Question": "{stem}" Please select the correct answer (one or more options), '
    "only return the choice letter (i.e., A, B, C, D) of your answer(s).\n\n"
    '"Choices":\n"A": "{a}"\n"B": "{b}"\n"C": "{c}"\n"D": "{d}"'
)
MCQ_LETTERS = ("A", "B", "C", "D")

SORTING_TEMPLATE = (
    "Below are two actions in the video:\n"
    "Action A. {action_a}\n"
    "Action B. {action_b}\n\n"
    "Sort these two actions in the order they occur in the video, and return "
    "which action happen before which one. For example, 'Action A before Action B' "
    "or 'Action B before Action A'. If you only detect one action of these two "
    "in the video, return that action."
)

STH_PROMPT = (
    "A scene change is defined as a significant transition in the overall "
    "environment or location within the video. This means a change from one "
    "distinct setting to another, such as moving from a kitchen to a living room, "
    "or from indoors to outdoors. Watch the given video and determine if a scene "
    "change occurs. If there is a scene change, respond in the format: "
    "'Scene change: Yes, Locations: from [location] to [location2].' "
    "If no change occurs, respond: 'Scene change: No, Locations: None'."
)

KIND_BINARY = "binary"
KIND_MCQ = "mcq"
KIND_SORTING = "sorting"
KIND_OPEN_STH = "open_sth"


class InvalidPairError(ValueError):
    """Pair content does not support the requested question format."""


class InvalidSpecError(ValueError):
    """A scene-transition spec is internally inconsistent."""


class DistractorCollisionError(ValueError):
    """A distractor duplicates one of the existing options."""


@dataclass(frozen=True)
class QAItem:
    """One benchmark question with its ground truth and provenance."""

    qa_id: str
    kind: str
    video_ref: tuple[str, ...]
    prompt: str
    ground_truth: str | dict
    pair_id: str
    choices: tuple[str, ...] | None = None
    action: str | None = None
    template_index: int | None = None

    def to_record(self) -> dict:
        ref: str | list[str] = self.video_ref[0] if len(self.video_ref) == 1 else list(self.video_ref)
        return {
            "qa_id": self.qa_id,
            "kind": self.kind,
            "video_ref": ref,
            "prompt": self.prompt,
            "ground_truth": self.ground_truth,
            "pair_id": self.pair_id,
            "choices": list(self.choices) if self.choices is not None else None,
            "action": self.action,
            "template_index": self.template_index,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "QAItem":
        ref = rec["video_ref"]
        video_ref = (ref,) if isinstance(ref, str) else tuple(ref)
        choices = rec.get("choices")
        return cls(
            qa_id=rec["qa_id"],
            kind=rec["kind"],
            video_ref=video_ref,
            prompt=rec["prompt"],
            ground_truth=rec["ground_truth"],
            pair_id=rec["pair_id"],
            choices=tuple(choices) if choices is not None else None,
            action=rec.get("action"),
            template_index=rec.get("template_index"),
        )


class DistractorProvider(Protocol):
    """Supplies two plausible-but-wrong action options for an MCQ."""

    def distractors(
        self, correct_action: str, adversarial_action: str, scene_caption: str, seed: int
    ) -> tuple[str, str]: ...


@dataclass(frozen=True)
class CorpusDistractorProvider:
    """Offline fallback: seeded sampling of action labels from other pairs."""

    action_pool: tuple[str, ...]

    @classmethod
    def from_actions(cls, actions: Sequence[str]) -> "CorpusDistractorProvider":
        seen: dict[str, str] = {}
        for action in actions:
            seen.setdefault(normalize_label(action), action)
        return cls(action_pool=tuple(seen[key] for key in sorted(seen)))

    def distractors(
        self, correct_action: str, adversarial_action: str, scene_caption: str, seed: int
    ) -> tuple[str, str]:
        taken = {normalize_label(correct_action), normalize_label(adversarial_action)}
        candidates = [a for a in self.action_pool if normalize_label(a) not in taken]
        if len(candidates) < 2:
            raise DistractorCollisionError(
                f"action pool has only {len(candidates)} usable distractor(s); need 2"
            )
        rng = random.Random(f"distractors:{seed}:{correct_action}:{adversarial_action}")
        picked = rng.sample(candidates, 2)
        return picked[0], picked[1]


def _qa_id(pair_id: str, kind: str, video_ref: tuple[str, ...], action: str | None,
           template_index: int | None) -> str:
    key = "|".join([pair_id, kind, *video_ref, action or "", str(template_index)])
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def _pair_actions(pair: CandidatePair, clips: Mapping[str, ClipRecord]) -> tuple[ClipRecord, ClipRecord]:
    a, b = clips[pair.clip_a], clips[pair.clip_b]
    if normalize_label(a.action) == normalize_label(b.action):
        raise InvalidPairError(
            f"pair {pair.pair_id}: identical actions {a.action!r} / {b.action!r}"
        )
    return a, b


def gen_binary(pair: CandidatePair, clips: Mapping[str, ClipRecord], seed: int) -> list[QAItem]:
    """Four yes/no items: each pair action asked against each pair video."""
    clip_a, clip_b = _pair_actions(pair, clips)
    rng = random.Random(f"{seed}:{pair.pair_id}:binary")
    items = []
    for owner, other in ((clip_a, clip_b), (clip_b, clip_a)):
        template_index = rng.randrange(len(BINARY_TEMPLATES))
        stem = BINARY_TEMPLATES[template_index].format(action=owner.action)
        prompt = f"{stem}\n{BINARY_SUFFIX}"
        for video, truth in ((owner, "Yes"), (other, "No")):
            items.append(
                QAItem(
                    qa_id=_qa_id(pair.pair_id, KIND_BINARY, (video.clip_id,), owner.action,
                                 template_index),
                    kind=KIND_BINARY,
                    video_ref=(video.clip_id,),
                    prompt=prompt,
                    ground_truth=truth,
                    pair_id=pair.pair_id,
                    action=owner.action,
                    template_index=template_index,
                )
            )
    return items


def gen_mcq(
    pair: CandidatePair,
    clips: Mapping[str, ClipRecord],
    provider: DistractorProvider,
    seed: int,
) -> list[QAItem]:
    """Two four-option items, one per video; the other video's action is
    always an option, letter order shuffled by seed."""
    clip_a, clip_b = _pair_actions(pair, clips)
    rng = random.Random(f"{seed}:{pair.pair_id}:mcq")
    items = []
    for owner, other in ((clip_a, clip_b), (clip_b, clip_a)):
        provider_seed = rng.getrandbits(32)
        d1, d2 = provider.distractors(owner.action, other.action, owner.caption, provider_seed)
        options = [owner.action, other.action, d1, d2]
        normalized = [normalize_label(o) for o in options]
        if len(set(normalized)) != 4:
            raise DistractorCollisionError(
                f"pair {pair.pair_id}: distractors collide with existing options: {options}"
            )
        rng.shuffle(options)
        correct_letter = MCQ_LETTERS[options.index(owner.action)]
        template_index = rng.randrange(len(MCQ_TEMPLATES))
        prompt = MCQ_BODY.format(
            stem=MCQ_TEMPLATES[template_index],
            a=options[0], b=options[1], c=options[2], d=options[3],
        )
        items.append(
            QAItem(
                qa_id=_qa_id(pair.pair_id, KIND_MCQ, (owner.clip_id,), owner.action,
                             template_index),
                kind=KIND_MCQ,
                video_ref=(owner.clip_id,),
                prompt=prompt,
                ground_truth=correct_letter,
                pair_id=pair.pair_id,
                choices=tuple(options),
                action=owner.action,
                template_index=template_index,
            )
        )
    return items


def gen_sorting(entry: TshEntry, seed: int) -> QAItem:
    """One sorting item; the A/B labels are bound to the two actions in a
    seed-randomized order so ground truth is 'AB' or 'BA'."""
    first_action, second_action = entry.actions
    rng = random.Random(f"{seed}:{entry.pair_id}:sorting")
    first_is_a = rng.random() < 0.5
    if first_is_a:
        action_a, action_b, truth = first_action, second_action, "AB"
    else:
        action_a, action_b, truth = second_action, first_action, "BA"
    prompt = SORTING_TEMPLATE.format(action_a=action_a, action_b=action_b)
    return QAItem(
        qa_id=_qa_id(entry.pair_id, KIND_SORTING, entry.clip_sequence, None, None),
        kind=KIND_SORTING,
        video_ref=entry.clip_sequence,
        prompt=prompt,
        ground_truth=truth,
        pair_id=entry.pair_id,
    )


def gen_sth(spec: SthSpec) -> QAItem:
    """One open-ended scene-transition item for a concatenation spec."""
    if spec.change and not (spec.scene_from and spec.scene_to):
        raise InvalidSpecError(f"spec {spec.spec_id}: change=Yes needs both scene labels")
    truth: dict = {"change": "Yes" if spec.change else "No"}
    if spec.change:
        truth["scene_from"] = spec.scene_from
        truth["scene_to"] = spec.scene_to
    return QAItem(
        qa_id=_qa_id(spec.spec_id, KIND_OPEN_STH, spec.clip_sequence, None, None),
        kind=KIND_OPEN_STH,
        video_ref=spec.clip_sequence,
        prompt=STH_PROMPT,
        ground_truth=truth,
        pair_id=spec.pair_id or spec.spec_id,
    )
