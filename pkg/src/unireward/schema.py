"""Unified sample records: the schema every other module consumes.

A dataset is a UTF-8 text file with one JSON object per line. Each record
carries its own reward configuration (component weights plus the verifier
routing key), so reward behavior is controlled per sample instead of per
task. ``docs/sample-schema.json`` is the normative definition of the
record layout.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

# Canonical task tags; arbitrary strings are accepted with a warning.
ABILITY_TAGS = (
    "math",
    "puzzle",
    "science",
    "chart",
    "detection",
    "grounding",
    "counting",
    "ocr",
)

_SCALAR_TYPES = (str, int, float, bool, type(None))


class SchemaError(ValueError):
    """Base class for record validation failures."""

    kind = "schema"

    def __init__(self, name: str, message: str | None = None):
        self.name = name
        super().__init__(message or f"{self.kind}: {name}")


class MissingField(SchemaError):
    kind = "missing_field"


class BadType(SchemaError):
    """Wrong type, or a value violating a field invariant."""

    kind = "bad_type"


@dataclass
class PromptMessage:
    role: str
    content: str
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass
class RewardSpec:
    """Per-sample reward configuration: component weights and routing key."""

    answer: str
    ground_truth: str
    accuracy_ratio: float
    format_ratio: float
    verifier: str
    verifier_parm: dict[str, Any] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass
class ExtraInfo:
    id: str
    image_path: str
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass
class Sample:
    """One training record. Image references are opaque strings; nothing
    here ever decodes pixels."""

    data_source: str
    images: list[str]
    prompt: list[PromptMessage]
    ability: str
    reward_model: RewardSpec
    extra_info: ExtraInfo
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.extra_info.id


@dataclass
class ValidationReport:
    """Outcome of scanning a dataset file."""

    total: int = 0
    invalid: int = 0
    # data_source -> violation kind -> count
    violations: dict[str, dict[str, int]] = field(default_factory=dict)
    invalid_ids: list[str] = field(default_factory=list)
    # data_source -> count of non-fatal warnings (unknown ability tags)
    warnings: dict[str, int] = field(default_factory=dict)

    def add_violation(self, source: str, kind: str, record_id: str) -> None:
        self.invalid += 1
        per_source = self.violations.setdefault(source, {})
        per_source[kind] = per_source.get(kind, 0) + 1
        self.invalid_ids.append(record_id)


def _require(record: dict, name: str, path: str = "") -> Any:
    if name not in record:
        raise MissingField(path + name)
    return record[name]


def _as_str(value: Any, name: str, allow_empty: bool = True) -> str:
    if not isinstance(value, str):
        raise BadType(name, f"bad_type: {name} must be a string")
    if not allow_empty and not value:
        raise BadType(name, f"bad_type: {name} must be non-empty")
    return value


def _as_ratio(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadType(name, f"bad_type: {name} must be a number")
    value = float(value)
    if value < 0:
        raise BadType(name, f"bad_type: {name} must be >= 0")
    return value


def _check_parm_value(value: Any, name: str, depth: int) -> None:
    # scalars, lists of scalars, and one nesting level of maps
    if isinstance(value, _SCALAR_TYPES):
        return
    if isinstance(value, list):
        if all(isinstance(v, _SCALAR_TYPES) for v in value):
            return
        raise BadType(name, f"bad_type: {name} list entries must be scalars")
    if isinstance(value, dict):
        if depth >= 1:
            raise BadType(name, f"bad_type: {name} nests maps too deeply")
        for k, v in value.items():
            if not isinstance(k, str):
                raise BadType(name, f"bad_type: {name} map keys must be strings")
            _check_parm_value(v, f"{name}.{k}", depth + 1)
        return
    raise BadType(name, f"bad_type: {name} has unsupported value type")


def _split_extras(record: dict, known: tuple[str, ...]) -> dict[str, Any]:
    return {k: v for k, v in record.items() if k not in known}


def _parse_message(value: Any, name: str) -> PromptMessage:
    if not isinstance(value, dict):
        raise BadType(name, f"bad_type: {name} must be a map")
    role = _as_str(_require(value, "role", name + "."), name + ".role")
    if role not in ROLES:
        raise BadType(name + ".role", f"bad_type: {name}.role must be one of {ROLES}")
    content = _as_str(_require(value, "content", name + "."), name + ".content", allow_empty=False)
    return PromptMessage(role=role, content=content, extras=_split_extras(value, ("role", "content")))


def parse_sample(record: Any) -> Sample:
    """Validate a decoded record and build a Sample.

    Unknown keys (at the record root, inside ``reward_model`` /
    ``extra_info``, and inside prompt messages) are preserved in extras
    bags so serialization round-trips. An off-list ``ability`` is accepted
    with a logged warning; verifier names are not checked here, routing
    validates them later.

    Raises MissingField or BadType.
    """
    if not isinstance(record, dict):
        raise BadType("record", "bad_type: record must be a map")

    data_source = _as_str(_require(record, "data_source"), "data_source", allow_empty=False)

    images_raw = _require(record, "images")
    if not isinstance(images_raw, list):
        raise BadType("images", "bad_type: images must be a list")
    images = [_as_str(v, f"images[{i}]") for i, v in enumerate(images_raw)]

    prompt_raw = _require(record, "prompt")
    if not isinstance(prompt_raw, list) or not prompt_raw:
        raise BadType("prompt", "bad_type: prompt must be a non-empty list")
    prompt = [_parse_message(m, f"prompt[{i}]") for i, m in enumerate(prompt_raw)]

    ability = _as_str(_require(record, "ability"), "ability")
    if ability not in ABILITY_TAGS:
        logger.warning("unrecognized ability tag %r (known: %s)", ability, ", ".join(ABILITY_TAGS))

    rm_raw = _require(record, "reward_model")
    if not isinstance(rm_raw, dict):
        raise BadType("reward_model", "bad_type: reward_model must be a map")
    parm = rm_raw.get("verifier_parm", {})
    if parm is None:
        parm = {}
    if not isinstance(parm, dict):
        raise BadType("reward_model.verifier_parm", "bad_type: verifier_parm must be a map")
    for key, value in parm.items():
        if not isinstance(key, str):
            raise BadType("reward_model.verifier_parm", "bad_type: verifier_parm keys must be strings")
        _check_parm_value(value, f"reward_model.verifier_parm.{key}", 0)
    reward_model = RewardSpec(
        answer=_as_str(_require(rm_raw, "answer", "reward_model."), "reward_model.answer"),
        ground_truth=_as_str(_require(rm_raw, "ground_truth", "reward_model."), "reward_model.ground_truth"),
        accuracy_ratio=_as_ratio(_require(rm_raw, "accuracy_ratio", "reward_model."), "reward_model.accuracy_ratio"),
        format_ratio=_as_ratio(_require(rm_raw, "format_ratio", "reward_model."), "reward_model.format_ratio"),
        verifier=_as_str(_require(rm_raw, "verifier", "reward_model."), "reward_model.verifier", allow_empty=False),
        verifier_parm=parm,
        extras=_split_extras(
            rm_raw,
            ("answer", "ground_truth", "accuracy_ratio", "format_ratio", "verifier", "verifier_parm"),
        ),
    )
    if reward_model.accuracy_ratio + reward_model.format_ratio <= 0:
        raise BadType(
            "reward_model",
            "bad_type: reward_model requires accuracy_ratio + format_ratio > 0",
        )

    ei_raw = _require(record, "extra_info")
    if not isinstance(ei_raw, dict):
        raise BadType("extra_info", "bad_type: extra_info must be a map")
    extra_info = ExtraInfo(
        id=_as_str(_require(ei_raw, "id", "extra_info."), "extra_info.id"),
        image_path=_as_str(_require(ei_raw, "image_path", "extra_info."), "extra_info.image_path"),
        extras=_split_extras(ei_raw, ("id", "image_path")),
    )

    return Sample(
        data_source=data_source,
        images=images,
        prompt=prompt,
        ability=ability,
        reward_model=reward_model,
        extra_info=extra_info,
        extras=_split_extras(
            record,
            ("data_source", "images", "prompt", "ability", "reward_model", "extra_info"),
        ),
    )


def serialize_sample(sample: Sample) -> dict[str, Any]:
    """Inverse of parse_sample: a plain record that re-parses equal.

    Known keys come first in schema order, extras follow in sorted key
    order, so repeated serialization is byte-stable.
    """
    rm = sample.reward_model
    record: dict[str, Any] = {
        "data_source": sample.data_source,
        "images": list(sample.images),
        "prompt": [
            {"content": m.content, "role": m.role, **{k: m.extras[k] for k in sorted(m.extras)}}
            for m in sample.prompt
        ],
        "ability": sample.ability,
        "reward_model": {
            "answer": rm.answer,
            "ground_truth": rm.ground_truth,
            "accuracy_ratio": rm.accuracy_ratio,
            "format_ratio": rm.format_ratio,
            "verifier": rm.verifier,
            "verifier_parm": dict(rm.verifier_parm),
            **{k: rm.extras[k] for k in sorted(rm.extras)},
        },
        "extra_info": {
            "id": sample.extra_info.id,
            "image_path": sample.extra_info.image_path,
            **{k: sample.extra_info.extras[k] for k in sorted(sample.extra_info.extras)},
        },
    }
    for key in sorted(sample.extras):
        record[key] = sample.extras[key]
    return record


def dump_sample(sample: Sample) -> str:
    return json.dumps(serialize_sample(sample), ensure_ascii=False)


def read_dataset(path) -> Iterable[Sample]:
    """Yield parsed samples from a line-delimited JSON file; raises on the
    first invalid record (use validate_dataset for forgiving scans)."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield parse_sample(json.loads(line))


def write_dataset(samples: Iterable[Sample], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(dump_sample(sample) + "\n")
            n += 1
    return n


def validate_dataset(path) -> ValidationReport:
    """Scan a dataset file and report every violation without raising.

    Violation kinds are "<error>:<field>" (e.g. "missing_field:reward_model"),
    plus "duplicate_id" and "unparseable" for records that fail JSON
    decoding. Records whose data_source cannot be read are bucketed under
    "<unknown>". IO failures (unreadable path) propagate as OSError.
    """
    report = ValidationReport()
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            report.total += 1
            source = "<unknown>"
            record_id = f"line:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                report.add_violation(source, "unparseable", record_id)
                continue
            if isinstance(record, dict):
                if isinstance(record.get("data_source"), str) and record["data_source"]:
                    source = record["data_source"]
                ei = record.get("extra_info")
                if isinstance(ei, dict) and isinstance(ei.get("id"), str):
                    record_id = ei["id"]
            try:
                sample = parse_sample(record)
            except SchemaError as err:
                report.add_violation(source, f"{err.kind}:{err.name}", record_id)
                continue
            except Exception:  # fuzz inputs must never crash the scan
                report.add_violation(source, "unparseable", record_id)
                continue
            if sample.ability not in ABILITY_TAGS:
                report.warnings[source] = report.warnings.get(source, 0) + 1
            if sample.id in seen_ids:
                report.add_violation(source, "duplicate_id", sample.id)
                continue
            seen_ids.add(sample.id)
    return report
