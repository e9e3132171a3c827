"""Wire protocol for the reward service.

POST /v1/verify carries a RewardRequest and returns a RewardResponse,
both JSON with the exact field names below (normative schema in
docs/wire-schema.json). Requests are serialized canonically (sorted keys,
compact separators) so independently written clients produce identical
bytes for identical payloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .verifiers.base import RewardBreakdown, VerifyItem


class MalformedRequest(ValueError):
    """Protocol-level rejection of a whole batch. Per-item problems never
    raise this; they surface as per-item errors in the response."""


@dataclass
class RewardRequest:
    batch_id: str
    training_progress: float
    items: list[VerifyItem]

    def to_dict(self) -> dict[str, Any]:
        return {
            "batch_id": self.batch_id,
            "training_progress": self.training_progress,
            "items": [
                {
                    "id": it.id,
                    "data_source": it.data_source,
                    "ability": it.ability,
                    "verifier": it.verifier,
                    "verifier_parm": it.verifier_parm,
                    "response": it.response,
                    "answer": it.answer,
                    "ground_truth": it.ground_truth,
                    "accuracy_ratio": it.accuracy_ratio,
                    "format_ratio": it.format_ratio,
                }
                for it in self.items
            ],
        }

    @classmethod
    def from_dict(cls, payload: Any) -> "RewardRequest":
        if not isinstance(payload, dict):
            raise MalformedRequest("request body must be a JSON object")
        batch_id = payload.get("batch_id")
        if not isinstance(batch_id, str) or not batch_id:
            raise MalformedRequest("batch_id must be a non-empty string")
        progress = payload.get("training_progress")
        if isinstance(progress, bool) or not isinstance(progress, (int, float)):
            raise MalformedRequest("training_progress must be a number")
        progress = float(progress)
        if not 0.0 <= progress <= 1.0:
            raise MalformedRequest("training_progress must lie in [0, 1]")
        raw_items = payload.get("items")
        if not isinstance(raw_items, list) or not raw_items:
            raise MalformedRequest("items must be a non-empty list")
        items = []
        seen = set()
        for i, raw in enumerate(raw_items):
            if not isinstance(raw, dict):
                raise MalformedRequest(f"items[{i}] must be an object")
            try:
                item = VerifyItem(
                    id=str(raw["id"]),
                    data_source=str(raw.get("data_source", "")),
                    ability=str(raw.get("ability", "")),
                    verifier=str(raw["verifier"]),
                    verifier_parm=dict(raw.get("verifier_parm") or {}),
                    response=str(raw["response"]),
                    answer=str(raw.get("answer", "")),
                    ground_truth=str(raw["ground_truth"]),
                    accuracy_ratio=float(raw["accuracy_ratio"]),
                    format_ratio=float(raw["format_ratio"]),
                )
            except (KeyError, TypeError, ValueError) as err:
                raise MalformedRequest(f"items[{i}] is malformed: {err}") from None
            if item.id in seen:
                raise MalformedRequest(f"duplicate item id {item.id!r}")
            seen.add(item.id)
            items.append(item)
        return cls(batch_id=batch_id, training_progress=progress, items=items)


@dataclass
class ItemResult:
    id: str
    combined: float
    accuracy: float
    format: float
    aux_metrics: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    @classmethod
    def from_breakdown(cls, item_id: str, breakdown: RewardBreakdown) -> "ItemResult":
        return cls(
            id=item_id,
            combined=breakdown.combined,
            accuracy=breakdown.accuracy,
            format=breakdown.format,
            aux_metrics=dict(breakdown.aux_metrics),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "combined": self.combined,
            "accuracy": self.accuracy,
            "format": self.format,
            "aux_metrics": self.aux_metrics,
            "error": self.error,
        }


@dataclass
class RewardResponse:
    batch_id: str
    results: list[ItemResult]

    def to_dict(self) -> dict[str, Any]:
        return {
            "batch_id": self.batch_id,
            "results": [r.to_dict() for r in self.results],
        }

    def by_id(self) -> dict[str, ItemResult]:
        return {r.id: r for r in self.results}

    @classmethod
    def from_dict(cls, payload: Any) -> "RewardResponse":
        if not isinstance(payload, dict):
            raise ValueError("response body must be a JSON object")
        results = [
            ItemResult(
                id=str(raw["id"]),
                combined=float(raw["combined"]),
                accuracy=float(raw["accuracy"]),
                format=float(raw["format"]),
                aux_metrics={str(k): float(v) for k, v in (raw.get("aux_metrics") or {}).items()},
                error=raw.get("error"),
            )
            for raw in payload.get("results", [])
        ]
        return cls(batch_id=str(payload.get("batch_id", "")), results=results)


def canonical_json(payload: Any) -> str:
    """Deterministic JSON: sorted keys, compact separators, raw UTF-8."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
