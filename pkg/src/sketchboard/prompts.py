"""Structured prompt model: recognition, composition, story enhancement,
and decomposition of a motion prompt into per-stage generation assets.

Text-generation and image-description calls go through a provider object
(anything exposing ``generate_text`` / ``describe_image``); this module owns
the instructions, validation, sanitization, and retry policy around them.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

#: Hallucinated-effect terms scrubbed from generated motion text.
DEFAULT_BANNED_TERMS = (
    "dust",
    "smoke",
    "debris",
    "explosion",
    "particle effects",
    "weather effects",
    "falling leaves",
)

#: Stable-appearance boilerplate used when a provider omits the positive component.
DEFAULT_POSITIVE = (
    "same character design, same face, same outfit, stable body proportions, "
    "stable scene structure, fixed camera, consistent framing, temporally "
    "coherent rendering"
)

#: Style-consistency boilerplate used when a provider omits the style component.
DEFAULT_STYLE = (
    "clean outlines, stable colors, low flicker, temporally stable character "
    "appearance, stable background, consistent 2D animation rendering"
)

DEFAULT_FACE = "the character keeps a natural, consistent facial expression"
DEFAULT_BODY = "the character moves smoothly between poses without distortion"

DYNAMIC_COMPONENTS = ("positive", "action", "face", "body", "style")

RECOGNITION_QUERIES = {
    "subject": "Describe the main character: identity, appearance, and clothing.",
    "style": "Describe the animation and rendering style of this image.",
    "scene": "Describe the background, environment, and camera composition.",
    "action": "Describe the current pose, motion, or emotion of the subject.",
}


class PromptError(ValueError):
    """Invalid prompt inputs or a provider response that never conformed."""


def _word_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class RecognitionResult:
    """Four-way visual recognition: subject, style, scene, action."""

    subject: str
    style: str
    scene: str
    action: str


@dataclass(frozen=True)
class AppearancePrompt:
    text: str
    word_count: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "word_count", _word_count(self.text))


@dataclass(frozen=True)
class MotionPrompt:
    text: str
    enhanced: bool = False
    word_count: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "word_count", _word_count(self.text))


@dataclass(frozen=True)
class ConversionPrompt:
    """Discrete action-state description for one derivative keyframe."""

    stage: int
    text: str

    def __post_init__(self) -> None:
        if self.stage < 1:
            raise PromptError("stage ordinal must be >= 1")
        if not self.text.strip():
            raise PromptError("conversion text must be non-empty")


@dataclass(frozen=True)
class StructuredDynamicPrompt:
    """Five-component clip-synthesis prompt."""

    positive: str
    action: str
    face: str
    body: str
    style: str

    def __post_init__(self) -> None:
        for name in DYNAMIC_COMPONENTS:
            if not getattr(self, name).strip():
                raise PromptError(f"dynamic component {name!r} must be non-empty")

    def joined(self) -> str:
        """Single-string form used for text embedding and logging."""
        return ". ".join(
            getattr(self, name) for name in DYNAMIC_COMPONENTS
        )


@dataclass(frozen=True)
class SanitizePolicy:
    banned_terms: tuple[str, ...] = DEFAULT_BANNED_TERMS
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise PromptError("max_retries must be >= 0")
        object.__setattr__(
            self, "banned_terms", tuple(t.lower() for t in self.banned_terms)
        )


@dataclass(frozen=True)
class StageAsset:
    stage: int
    conversion: ConversionPrompt
    dynamic: StructuredDynamicPrompt
    filled: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.stage != self.conversion.stage:
            raise PromptError("asset stage must match conversion stage")


def compose_prompts(
    r: RecognitionResult, composition_hint: str = ""
) -> tuple[AppearancePrompt, MotionPrompt]:
    """Compose appearance and motion prompts from recognition output.

    Appearance joins subject, style, scene, and the composition hint; motion
    joins subject, scene, and action. Empty parts are skipped and the
    remainder comma-joined.
    """
    parts = [r.subject.strip(), r.style.strip(), r.scene.strip(), r.action.strip()]
    if not any(parts):
        raise PromptError("empty recognition")
    subject, style, scene, action = parts
    hint = composition_hint.strip()
    appearance = ", ".join(p for p in (subject, style, scene, hint) if p)
    motion = ", ".join(p for p in (subject, scene, action) if p)
    return AppearancePrompt(text=appearance), MotionPrompt(text=motion)


def recognize_keyframe(frame, provider) -> RecognitionResult:
    """Issue the four recognition sub-queries through a vision provider."""
    answers = {
        name: provider.describe_image(frame, query)
        for name, query in RECOGNITION_QUERIES.items()
    }
    return RecognitionResult(**answers)


def sanitize(text: str, policy: SanitizePolicy) -> tuple[bool, list[str]]:
    """Case-insensitive banned-term scan.

    Returns (clean, violations) where violations lists each matched term once
    in policy order.
    """
    lowered = text.lower()
    violations = [term for term in policy.banned_terms if term in lowered]
    return (not violations, violations)


def scrub(text: str, policy: SanitizePolicy) -> str:
    """Delete banned terms and collapse the surrounding whitespace."""
    out = text
    for term in policy.banned_terms:
        out = re.sub(re.escape(term), "", out, flags=re.IGNORECASE)
    out = re.sub(r"\s{2,}", " ", out)
    out = re.sub(r"\s+([,.;])", r"\1", out)
    return out.strip()


def _enhance_instruction(policy: SanitizePolicy) -> str:
    return (
        "Expand the following motion description into a richer local action "
        "narrative. Stay within the same shot, the same subject, and the same "
        "scene. Do not introduce new characters, unrelated objects, or scene "
        "changes. Never mention any of these terms: "
        + ", ".join(policy.banned_terms)
        + "."
    )


def enhance_story(
    m: MotionPrompt, provider, policy: SanitizePolicy | None = None
) -> MotionPrompt:
    """Constrained story enhancement with banned-word auditing and retries.

    Each failed audit appends the violation list to the instruction and
    retries, up to ``policy.max_retries`` extra attempts. When every attempt
    is dirty the original prompt is returned unchanged with ``enhanced``
    False; provider transport failures propagate.
    """
    policy = policy or SanitizePolicy()
    instruction = _enhance_instruction(policy)
    for attempt in range(policy.max_retries + 1):
        out = provider.generate_text(instruction, m.text)
        clean, violations = sanitize(out, policy)
        if clean:
            return MotionPrompt(text=out, enhanced=True)
        instruction = (
            _enhance_instruction(policy)
            + " The previous attempt contained banned terms: "
            + ", ".join(violations)
            + "."
        )
    logger.warning(
        "story enhancement exhausted %d attempts; keeping original prompt",
        policy.max_retries + 1,
    )
    return MotionPrompt(text=m.text, enhanced=False)


def _stage_instruction(n_stages: int) -> str:
    return (
        f"Generate exactly {n_stages} sequential keyframes with temporally "
        "continuous actions while preserving the same character identity and "
        "scene structure. Respond with a JSON object "
        '{"stages": [{"stage": <1-based ordinal>, "conversion": <discrete '
        'action state>, "positive": ..., "action": ..., "face": ..., '
        '"body": ..., "style": ...}]} and nothing else.'
    )


def _parse_stage_payload(raw: str, n_stages: int) -> list[dict]:
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise PromptError(f"unparseable stage response: {exc}") from exc
    stages = payload.get("stages") if isinstance(payload, dict) else None
    if not isinstance(stages, list):
        raise PromptError("stage response missing 'stages' list")
    if len(stages) != n_stages:
        raise PromptError(f"expected {n_stages} stages, got {len(stages)}")
    by_stage: dict[int, dict] = {}
    for entry in stages:
        if not isinstance(entry, dict) or "stage" not in entry:
            raise PromptError("stage entry missing 'stage' ordinal")
        by_stage[int(entry["stage"])] = entry
    if sorted(by_stage) != list(range(1, n_stages + 1)):
        raise PromptError(f"stage ordinals not contiguous 1..{n_stages}")
    return [by_stage[i] for i in range(1, n_stages + 1)]


def decompose_stages(
    m: MotionPrompt,
    n_stages: int,
    provider,
    policy: SanitizePolicy | None = None,
) -> list[StageAsset]:
    """Decompose a motion prompt into per-stage conversion + dynamic prompts.

    The provider must answer with the stage JSON described in the
    instruction. Unparseable or miscounted responses are retried with the
    error appended; missing dynamic components are filled from module
    defaults and flagged. All text fields are scrubbed through the policy.
    """
    if n_stages < 1:
        raise PromptError("n_stages must be >= 1")
    policy = policy or SanitizePolicy()
    instruction = _stage_instruction(n_stages)
    last_error: PromptError | None = None
    entries: list[dict] | None = None
    for attempt in range(policy.max_retries + 1):
        raw = provider.generate_text(instruction, m.text, n_stages=n_stages,
                                     format="stage_assets")
        try:
            entries = _parse_stage_payload(raw, n_stages)
            break
        except PromptError as exc:
            last_error = exc
            instruction = _stage_instruction(n_stages) + f" Previous error: {exc}."
    if entries is None:
        raise PromptError(f"stage decomposition failed after retries: {last_error}")

    defaults = {
        "positive": DEFAULT_POSITIVE,
        "action": m.text,
        "face": DEFAULT_FACE,
        "body": DEFAULT_BODY,
        "style": DEFAULT_STYLE,
    }
    assets: list[StageAsset] = []
    for i, entry in enumerate(entries, start=1):
        conversion_text = scrub(str(entry.get("conversion", "")), policy)
        if not conversion_text:
            raise PromptError(f"stage {i} has no conversion text")
        filled: list[str] = []
        components: dict[str, str] = {}
        for name in DYNAMIC_COMPONENTS:
            value = scrub(str(entry.get(name, "") or ""), policy)
            if not value:
                value = defaults[name]
                filled.append(name)
            components[name] = value
        assets.append(
            StageAsset(
                stage=i,
                conversion=ConversionPrompt(stage=i, text=conversion_text),
                dynamic=StructuredDynamicPrompt(**components),
                filled=tuple(filled),
            )
        )
    return assets


def stage_assets_to_dict(assets: list[StageAsset]) -> dict:
    return {
        "stages": [
            {
                "stage": a.stage,
                "conversion": a.conversion.text,
                **{name: getattr(a.dynamic, name) for name in DYNAMIC_COMPONENTS},
                "filled": list(a.filled),
            }
            for a in assets
        ]
    }


def stage_assets_from_dict(payload: dict) -> list[StageAsset]:
    assets = []
    for entry in payload["stages"]:
        assets.append(
            StageAsset(
                stage=int(entry["stage"]),
                conversion=ConversionPrompt(
                    stage=int(entry["stage"]), text=entry["conversion"]
                ),
                dynamic=StructuredDynamicPrompt(
                    **{name: entry[name] for name in DYNAMIC_COMPONENTS}
                ),
                filled=tuple(entry.get("filled", ())),
            )
        )
    return assets


def save_stage_assets(assets: list[StageAsset], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(stage_assets_to_dict(assets), indent=2), encoding="utf-8"
    )


def load_stage_assets(path: str | Path) -> list[StageAsset]:
    return stage_assets_from_dict(
        json.loads(Path(path).read_text(encoding="utf-8"))
    )
