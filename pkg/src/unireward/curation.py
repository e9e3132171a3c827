"""Two-stage data curation: rule-based filters, then difficulty filters.

Stage one drops samples that invite reward hacking or cannot be verified
cleanly (option-style questions, symbol-laden or overlong answers,
oversized or overcrowded boxes, non-English text). Stage two drops
samples a base model already solves, or never solves, using externally
supplied difficulty scores; no model is rolled out here.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np
import yaml

from .parsing import DetBox, ParseError, parse_detections
from .schema import Sample, dump_sample, read_dataset

logger = logging.getLogger(__name__)

REASONING_FAMILIES = ("reasoning", "math", "puzzle", "science", "chart")
FORBIDDEN_ANSWER_CHARS = "=[]();"
MAX_ANSWER_LEN = 20
MAX_BOXES_PER_CATEGORY = 10
MAX_RELATIVE_BOX_AREA = 0.5
SINGLE_MULTI_RATIO = (1, 2)

_OPTION_LINE_RE = re.compile(r"^\s*[A-E][.)]\s+\S", re.MULTILINE)
_SINGLE_LETTER_RE = re.compile(r"^[A-Ea-e]$")


class MissingScore(KeyError):
    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"no difficulty score for sample {sample_id!r}")


@dataclass(frozen=True)
class Keep:
    pass


@dataclass(frozen=True)
class Drop:
    rule_id: str


Decision = Keep | Drop

KEEP = Keep()


@dataclass
class DifficultyScores:
    """Externally computed per-sample scores: pass_at_8 for samples graded
    by answer matching, cumulative_iou_reward (16 rollouts at IoU 0.5) for
    detection/grounding."""

    scores: dict[str, dict[str, float]]

    @classmethod
    def load(cls, path) -> "DifficultyScores":
        with open(path, encoding="utf-8") as fh:
            return cls(scores=json.load(fh))

    def pass_at_8(self, sample_id: str) -> float:
        entry = self.scores.get(sample_id)
        if entry is None or "pass_at_8" not in entry:
            raise MissingScore(sample_id)
        return float(entry["pass_at_8"])

    def cumulative_iou(self, sample_id: str) -> float:
        entry = self.scores.get(sample_id)
        if entry is None or "cumulative_iou_reward" not in entry:
            raise MissingScore(sample_id)
        return float(entry["cumulative_iou_reward"])


@dataclass
class CurationConfig:
    seed: int = 0
    out_dir: Path = Path("curated")
    report_path: Path | None = None
    inputs: list[Path] = field(default_factory=list)
    scores_path: Path | None = None
    # data_source -> family (reasoning|detection|grounding|counting|ocr);
    # sources not listed fall back to the sample's ability tag
    task_family: dict[str, str] = field(default_factory=dict)
    repeat: dict[str, int] = field(default_factory=dict)
    max_label_words: int = 6
    english_ascii_ratio: float = 0.9
    single_multi_ratio: tuple[int, int] = SINGLE_MULTI_RATIO

    @classmethod
    def load(cls, path) -> "CurationConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        cfg = cls()
        cfg.seed = int(raw.get("seed", cfg.seed))
        if "out_dir" in raw:
            cfg.out_dir = Path(raw["out_dir"])
        if "report" in raw:
            cfg.report_path = Path(raw["report"])
        cfg.inputs = [Path(p) for p in raw.get("inputs", [])]
        if raw.get("scores"):
            cfg.scores_path = Path(raw["scores"])
        cfg.task_family = dict(raw.get("task_family", {}))
        cfg.repeat = {k: int(v) for k, v in raw.get("repeat", {}).items()}
        cfg.max_label_words = int(raw.get("max_label_words", cfg.max_label_words))
        cfg.english_ascii_ratio = float(raw.get("english_ascii_ratio", cfg.english_ascii_ratio))
        if "single_multi_ratio" in raw:
            a, b = raw["single_multi_ratio"]
            cfg.single_multi_ratio = (int(a), int(b))
        return cfg


@dataclass
class CurationReport:
    """Per-source accounting; input == kept + all drops, always."""

    sources: dict[str, dict] = field(default_factory=dict)

    def _entry(self, source: str) -> dict:
        return self.sources.setdefault(
            source, {"input": 0, "kept": 0, "dropped_rule": {}, "dropped_difficulty": 0}
        )

    def saw(self, source: str) -> None:
        self._entry(source)["input"] += 1

    def kept(self, source: str) -> None:
        self._entry(source)["kept"] += 1

    def dropped_rule(self, source: str, rule_id: str) -> None:
        drops = self._entry(source)["dropped_rule"]
        drops[rule_id] = drops.get(rule_id, 0) + 1

    def dropped_difficulty(self, source: str) -> None:
        self._entry(source)["dropped_difficulty"] += 1

    def reconciles(self) -> bool:
        for entry in self.sources.values():
            dropped = sum(entry["dropped_rule"].values()) + entry["dropped_difficulty"]
            if entry["input"] != entry["kept"] + dropped:
                return False
        return True

    def rule_counts(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for entry in self.sources.values():
            for rule, n in entry["dropped_rule"].items():
                totals[rule] = totals.get(rule, 0) + n
        return totals

    def to_dict(self) -> dict:
        return {"sources": {k: self.sources[k] for k in sorted(self.sources)}}


def family_for(sample: Sample, config: CurationConfig) -> str:
    family = config.task_family.get(sample.data_source, sample.ability)
    if family in REASONING_FAMILIES:
        return "reasoning"
    return family


def _is_english(text: str, min_ascii_ratio: float) -> bool:
    if not text:
        return True
    ascii_count = sum(1 for c in text if ord(c) < 128)
    return ascii_count / len(text) >= min_ascii_ratio


def _prompt_text(sample: Sample) -> str:
    return "\n".join(m.content for m in sample.prompt)


# --- stage one: rule filters -------------------------------------------------

def rule_filter_reasoning(sample: Sample) -> Decision:
    """Option-style questions, symbol-laden answers, and overlong answers
    are all hackable or mismatch-prone; drop them. Rules apply in a fixed
    order (mcq, symbol, length) and the first hit names the drop."""
    gold = sample.reward_model.ground_truth.strip()
    if (
        _SINGLE_LETTER_RE.match(gold)
        or gold.lower() in ("true", "false")
        or _OPTION_LINE_RE.search(_prompt_text(sample))
    ):
        return Drop("mcq_filter")
    if any(c in gold for c in FORBIDDEN_ANSWER_CHARS):
        return Drop("symbol_filter")
    if len(gold) > MAX_ANSWER_LEN:
        return Drop("length_filter")
    return KEEP


def _relative_boxes(sample: Sample) -> list[DetBox] | None:
    """Ground-truth boxes in relative coordinates, or None when they
    cannot be parsed/normalized. Absolute inputs need image_width and
    image_height in verifier_parm; otherwise boxes are taken as relative
    already."""
    try:
        boxes = parse_detections(sample.reward_model.ground_truth)
    except ParseError:
        return None
    parm = sample.reward_model.verifier_parm
    width = parm.get("image_width")
    height = parm.get("image_height")
    if width and height:
        scaled = []
        for b in boxes:
            x1, y1, x2, y2 = b.bbox
            scaled.append(
                DetBox(
                    label=b.label,
                    bbox=(x1 / width, y1 / height, x2 / width, y2 / height),
                    reordered=b.reordered,
                )
            )
        boxes = scaled
    tolerance = 1e-6
    for b in boxes:
        if any(not -tolerance <= c <= 1 + tolerance for c in b.bbox):
            return None
    return boxes


def _category_counts(boxes: list[DetBox]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for b in boxes:
        key = b.label.lower()
        counts[key] = counts.get(key, 0) + 1
    return counts


def is_single_box(sample: Sample) -> bool:
    """Single-box samples carry exactly one box per category."""
    boxes = _relative_boxes(sample)
    if boxes is None:
        return False
    return all(n == 1 for n in _category_counts(boxes).values())


def rule_filter_detection(sample: Sample) -> Decision:
    boxes = _relative_boxes(sample)
    if boxes is None:
        try:
            parse_detections(sample.reward_model.ground_truth)
        except ParseError:
            return Drop("gt_parse")
        return Drop("coord_range")
    if any(n > MAX_BOXES_PER_CATEGORY for n in _category_counts(boxes).values()):
        return Drop("box_count")
    if any(b.area > MAX_RELATIVE_BOX_AREA for b in boxes):
        return Drop("box_area")
    return KEEP


def rule_filter_grounding(sample: Sample, max_label_words: int = 6) -> Decision:
    boxes = _relative_boxes(sample)
    if boxes is None:
        try:
            parse_detections(sample.reward_model.ground_truth)
        except ParseError:
            return Drop("gt_parse")
        return Drop("coord_range")
    if any(b.area > MAX_RELATIVE_BOX_AREA for b in boxes):
        return Drop("box_area")
    if any(len(b.label.split()) > max_label_words for b in boxes):
        return Drop("label_complexity")
    return KEEP


def rule_filter_counting(sample: Sample, min_ascii_ratio: float = 0.9) -> Decision:
    text = _prompt_text(sample) + "\n" + sample.reward_model.ground_truth
    if not _is_english(text, min_ascii_ratio):
        return Drop("non_english")
    return KEEP


def rule_filter_ocr(sample: Sample, min_ascii_ratio: float = 0.9) -> Decision:
    from .verifiers.math import normalize_answer

    text = _prompt_text(sample) + "\n" + sample.reward_model.ground_truth
    if not _is_english(text, min_ascii_ratio):
        return Drop("non_english")
    normalized = normalize_answer(sample.reward_model.ground_truth)
    if normalized.kind == "text" and not normalized.text_value:
        return Drop("unverifiable")
    return KEEP


def apply_rule_filter(sample: Sample, config: CurationConfig) -> Decision:
    family = family_for(sample, config)
    if family == "detection":
        return rule_filter_detection(sample)
    if family == "grounding":
        return rule_filter_grounding(sample, config.max_label_words)
    if family == "counting":
        return rule_filter_counting(sample, config.english_ascii_ratio)
    if family == "ocr":
        return rule_filter_ocr(sample, config.english_ascii_ratio)
    return rule_filter_reasoning(sample)


# --- global balancing passes -------------------------------------------------

def enforce_single_multi_ratio(
    samples: list[Sample], ratio: tuple[int, int] = SINGLE_MULTI_RATIO, seed: int = 0
) -> tuple[list[Sample], list[Sample]]:
    """Downsample the over-represented side until |single| : |multi| is at
    most ratio (1:2 by default), rounding down; never upsamples. Returns
    (kept, dropped); kept preserves input order."""
    single_idx = [i for i, s in enumerate(samples) if is_single_box(s)]
    multi_idx = [i for i in range(len(samples)) if i not in set(single_idx)]
    a, b = ratio
    if not single_idx:
        if multi_idx:
            logger.warning("single:multi balancing skipped, no single-box samples present")
        return list(samples), []
    rng = np.random.default_rng(seed)
    drop: set[int] = set()
    if len(single_idx) * b > len(multi_idx) * a:
        target = (len(multi_idx) * a) // b
        excess = len(single_idx) - target
        drop = set(rng.choice(len(single_idx), size=excess, replace=False).tolist())
        drop = {single_idx[i] for i in drop}
    elif len(multi_idx) * a > len(single_idx) * b:
        target = (len(single_idx) * b) // a
        excess = len(multi_idx) - target
        drop = set(rng.choice(len(multi_idx), size=excess, replace=False).tolist())
        drop = {multi_idx[i] for i in drop}
    kept = [s for i, s in enumerate(samples) if i not in drop]
    dropped = [s for i, s in enumerate(samples) if i in drop]
    return kept, dropped


def balance_categories(
    samples: list[Sample], seed: int = 0
) -> tuple[list[Sample], list[Sample]]:
    """Cap each answer category at the median category count (long-tail
    control for counting data). Returns (kept, dropped)."""
    by_category: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_category.setdefault(s.reward_model.ground_truth.strip().lower(), []).append(i)
    if len(by_category) < 2:
        return list(samples), []
    counts = sorted(len(v) for v in by_category.values())
    cap = max(1, int(np.median(counts)))
    rng = np.random.default_rng(seed)
    drop: set[int] = set()
    for indices in by_category.values():
        if len(indices) > cap:
            excess = len(indices) - cap
            chosen = rng.choice(len(indices), size=excess, replace=False).tolist()
            drop.update(indices[i] for i in chosen)
    kept = [s for i, s in enumerate(samples) if i not in drop]
    dropped = [s for i, s in enumerate(samples) if i in drop]
    return kept, dropped


# --- stage two: difficulty filter ---------------------------------------------

PASS_AT_8_MAX = 1.0  # strictly below: solved-every-time samples teach nothing
CUMULATIVE_IOU_BAND = (2.0, 10.0)  # inclusive


def difficulty_filter(sample: Sample, scores: DifficultyScores, family: str) -> Decision:
    if family in ("detection", "grounding"):
        value = scores.cumulative_iou(sample.id)
        lo, hi = CUMULATIVE_IOU_BAND
        if not lo <= value <= hi:
            return Drop("out_of_band")
        return KEEP
    value = scores.pass_at_8(sample.id)
    if value >= PASS_AT_8_MAX:
        return Drop("too_easy")
    return KEEP


# --- pipeline ------------------------------------------------------------------

def _with_id_suffix(sample: Sample, suffix: str) -> Sample:
    import copy

    clone = copy.deepcopy(sample)
    clone.extra_info.id = clone.extra_info.id + suffix
    return clone


def run_pipeline(config: CurationConfig) -> tuple[Path, CurationReport]:
    """Run both stages and write the curated dataset plus a JSON report.

    Deterministic for a fixed seed: reruns are byte-identical. Repeat
    factors apply after filtering; duplicate copies get `~k` id suffixes
    so the output keeps ids unique.
    """
    report = CurationReport()
    scores = DifficultyScores.load(config.scores_path) if config.scores_path else None

    survivors: list[Sample] = []
    for path in config.inputs:
        for sample in read_dataset(path):
            report.saw(sample.data_source)
            decision = apply_rule_filter(sample, config)
            if isinstance(decision, Drop):
                report.dropped_rule(sample.data_source, decision.rule_id)
                continue
            survivors.append(sample)

    detection_pool = [s for s in survivors if family_for(s, config) == "detection"]
    counting_pool = [s for s in survivors if family_for(s, config) == "counting"]

    _, detection_dropped = enforce_single_multi_ratio(
        detection_pool, config.single_multi_ratio, config.seed
    )
    for s in detection_dropped:
        report.dropped_rule(s.data_source, "ratio_balance")
    _, counting_dropped = balance_categories(counting_pool, config.seed)
    for s in counting_dropped:
        report.dropped_rule(s.data_source, "category_balance")

    balance_drops = {id(s) for s in detection_dropped} | {id(s) for s in counting_dropped}
    balanced = [s for s in survivors if id(s) not in balance_drops]

    curated: list[Sample] = []
    for sample in balanced:
        family = family_for(sample, config)
        if scores is not None:
            decision = difficulty_filter(sample, scores, family)
            if isinstance(decision, Drop):
                report.dropped_difficulty(sample.data_source)
                continue
        report.kept(sample.data_source)
        curated.append(sample)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = config.out_dir / "curated.jsonl"
    with open(out_path, "w", encoding="utf-8") as fh:
        for sample in curated:
            repeats = config.repeat.get(sample.data_source, 1)
            fh.write(dump_sample(sample) + "\n")
            for k in range(2, repeats + 1):
                fh.write(dump_sample(_with_id_suffix(sample, f"~{k}")) + "\n")

    report_path = config.report_path or (config.out_dir / "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_path, report
