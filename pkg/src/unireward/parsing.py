"""Extraction of verifiable payloads from raw model responses."""

from __future__ import annotations

import json
from dataclasses import dataclass

TAG_THINK_OPEN = "<think>"
TAG_THINK_CLOSE = "</think>"
TAG_ANSWER_OPEN = "<answer>"
TAG_ANSWER_CLOSE = "</answer>"

FORMAT_TAGS = (TAG_THINK_OPEN, TAG_THINK_CLOSE, TAG_ANSWER_OPEN, TAG_ANSWER_CLOSE)

# Placeholder literals a model can emit even though no visual features back
# them; configurable via the `parsing.spurious_tokens` config key.
DEFAULT_SPURIOUS_TOKENS = frozenset(
    {"<|image_pad|>", "<|video_pad|>", "<|vision_start|>", "<|vision_end|>"}
)

_BOXED_MARKER = "\\boxed{"


@dataclass(frozen=True)
class TagCensus:
    """Occurrence counts of the four response-format tags."""

    think_open: int
    think_close: int
    answer_open: int
    answer_close: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.think_open, self.think_close, self.answer_open, self.answer_close)


@dataclass
class DetBox:
    """One labeled box in corner form [x1, y1, x2, y2], x1<=x2 and y1<=y2.

    `reordered` marks boxes whose corners arrived inverted and were
    normalized instead of rejected (keeps the reward signal smooth)."""

    label: str
    bbox: tuple[float, float, float, float]
    reordered: bool = False

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.bbox
        return max(x2 - x1, 0.0) * max(y2 - y1, 0.0)


class ParseError(ValueError):
    """Detection payload could not be parsed; carries a best-effort
    character position (or element index for structural errors)."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"parse error at {position}: {reason}")


def extract_boxed(text: str) -> str | None:
    """Content of the last balanced ``\\boxed{...}`` group, or None.

    Nested braces are respected by depth counting; unbalanced groups are
    skipped. Models often restate their answer, so the final statement
    wins.
    """
    best = None
    start = text.find(_BOXED_MARKER)
    while start != -1:
        i = start + len(_BOXED_MARKER)
        depth = 1
        j = i
        while j < len(text) and depth > 0:
            ch = text[j]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            j += 1
        if depth == 0:
            best = text[i : j - 1]
        start = text.find(_BOXED_MARKER, start + 1)
    return best


def census_tags(text: str) -> TagCensus:
    """Exact (overlap-free) substring counts of the four format tags."""
    return TagCensus(
        think_open=text.count(TAG_THINK_OPEN),
        think_close=text.count(TAG_THINK_CLOSE),
        answer_open=text.count(TAG_ANSWER_OPEN),
        answer_close=text.count(TAG_ANSWER_CLOSE),
    )


def extract_answer_block(text: str) -> str | None:
    """Content between the first ``<answer>`` and the next ``</answer>``.

    Returns None when the tags are absent or out of order; an empty block
    yields "" (distinct from None).
    """
    start = text.find(TAG_ANSWER_OPEN)
    if start == -1:
        return None
    body = start + len(TAG_ANSWER_OPEN)
    end = text.find(TAG_ANSWER_CLOSE, body)
    if end == -1:
        return None
    return text[body:end]


def _rewrite_single_quotes(text: str) -> str:
    # Models prompted with single-quoted examples answer in kind; rewrite
    # quote delimiters outside escapes so json.loads can take it.
    out: list[str] = []
    i = 0
    n = len(text)
    in_double = False
    in_single = False
    while i < n:
        ch = text[i]
        if in_double:
            if ch == "\\" and i + 1 < n:
                out.append(text[i : i + 2])
                i += 2
                continue
            out.append(ch)
            if ch == '"':
                in_double = False
            i += 1
        elif in_single:
            if ch == "\\" and i + 1 < n:
                nxt = text[i + 1]
                if nxt == "'":
                    out.append("'")
                else:
                    out.append(text[i : i + 2])
                i += 2
                continue
            if ch == "'":
                out.append('"')
                in_single = False
            elif ch == '"':
                out.append('\\"')
            else:
                out.append(ch)
            i += 1
        else:
            if ch == '"':
                in_double = True
                out.append(ch)
            elif ch == "'":
                in_single = True
                out.append('"')
            else:
                out.append(ch)
            i += 1
    return "".join(out)


def _as_number(value) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    return float(value)


def parse_detections(text: str) -> list[DetBox]:
    """Parse a detection answer block into boxes.

    Accepts strict JSON and the single-quoted variant. Every element must
    carry ``bbox_2d`` (4 numbers) and ``label`` (text); extra keys are
    ignored. Inverted corners are normalized and flagged rather than
    rejected. Raises ParseError; never anything else.
    """
    stripped = text.strip()
    if not stripped:
        raise ParseError(0, "empty answer block")
    try:
        payload = json.loads(stripped)
    except json.JSONDecodeError:
        try:
            payload = json.loads(_rewrite_single_quotes(stripped))
        except json.JSONDecodeError as err:
            raise ParseError(err.pos, err.msg) from None
    if not isinstance(payload, list):
        raise ParseError(0, "expected a JSON list of detections")
    boxes: list[DetBox] = []
    for idx, element in enumerate(payload):
        if not isinstance(element, dict):
            raise ParseError(idx, f"detection {idx} is not an object")
        if "bbox_2d" not in element:
            raise ParseError(idx, f"detection {idx} missing bbox_2d")
        if "label" not in element:
            raise ParseError(idx, f"detection {idx} missing label")
        raw = element["bbox_2d"]
        if not isinstance(raw, list) or len(raw) != 4:
            raise ParseError(idx, f"detection {idx} bbox_2d must be 4 numbers")
        coords = [_as_number(v) for v in raw]
        if any(c is None for c in coords):
            raise ParseError(idx, f"detection {idx} bbox_2d must be 4 numbers")
        label = element["label"]
        if not isinstance(label, str):
            raise ParseError(idx, f"detection {idx} label must be text")
        x1, y1, x2, y2 = coords  # type: ignore[misc]
        nx1, nx2 = min(x1, x2), max(x1, x2)
        ny1, ny2 = min(y1, y2), max(y1, y2)
        boxes.append(
            DetBox(
                label=label,
                bbox=(nx1, ny1, nx2, ny2),
                reordered=(nx1, ny1, nx2, ny2) != (x1, y1, x2, y2),
            )
        )
    return boxes


def strip_spurious_tokens(
    token_texts: list[str], blocklist: frozenset[str] | set[str] = DEFAULT_SPURIOUS_TOKENS
) -> tuple[list[str], int]:
    """Drop blocklisted special tokens, preserving the order of the rest.

    Returns (kept, removed_count). Idempotent: a second pass removes
    nothing.
    """
    if not blocklist:
        raise ValueError("blocklist must be non-empty")
    kept = [t for t in token_texts if t not in blocklist]
    return kept, len(token_texts) - len(kept)
