"""Deterministic 100-sample curation fixture with 17 planted rule
violations and known difficulty scores.

Layout: 50 reasoning (math), 30 detection, 20 grounding.

Planted rule violations (17):
  reasoning: 3 mcq_filter, 3 symbol_filter, 2 length_filter  -> 8
  detection: 3 box_count, 2 box_area                          -> 5
  grounding: 2 box_area, 2 label_complexity                   -> 4

Difficulty drops on top: 5 reasoning samples at pass@8 == 1.0 and
2 grounding samples with out-of-band cumulative IoU.
"""

from __future__ import annotations

import json

from conftest import make_detection_record, make_record

PLANTED = {
    "mcq_filter": 3,
    "symbol_filter": 3,
    "length_filter": 2,
    "box_count": 3,
    "box_area": 4,  # 2 detection + 2 grounding
    "label_complexity": 2,
}
PLANTED_TOTAL = 17

TOO_EASY_MATH = ("m-020", "m-021", "m-022", "m-023", "m-024")
OUT_OF_BAND_GROUND = ("g-010", "g-011")

TASK_FAMILY = {
    "synthetic_math": "reasoning",
    "synthetic_det": "detection",
    "synthetic_ground": "grounding",
}

VALID_GOLDS = ["7", "12", "0.5", "1/2", "3.14", "42", "100", "paris", "blue", "8"]


def _box(label, x1, y1, x2, y2):
    return {"bbox_2d": [x1, y1, x2, y2], "label": label}


def _detection_record(record_id, boxes, parm=None):
    record = make_detection_record(
        record_id=record_id,
        data_source="synthetic_det",
        ability="detection",
        verifier_parm=parm,
    )
    record["reward_model"]["ground_truth"] = json.dumps(boxes)
    return record


def _grounding_record(record_id, boxes):
    record = make_detection_record(
        record_id=record_id,
        data_source="synthetic_ground",
        ability="grounding",
    )
    record["reward_model"]["ground_truth"] = json.dumps(boxes)
    return record


def build_records():
    records = []

    # --- reasoning: m-000 .. m-049 (violations on m-000..m-007)
    records.append(make_record(record_id="m-000", ground_truth="B"))
    records.append(make_record(record_id="m-001", ground_truth="true"))
    records.append(
        make_record(
            record_id="m-002",
            ground_truth="4",
            prompt_content="Pick one:\nA. 3\nB. 4\nC. 5",
        )
    )
    records.append(make_record(record_id="m-003", ground_truth="x=5"))
    records.append(make_record(record_id="m-004", ground_truth="f(2)"))
    records.append(make_record(record_id="m-005", ground_truth="a;b"))
    records.append(make_record(record_id="m-006", ground_truth="twenty one characters"))
    records.append(make_record(record_id="m-007", ground_truth="a very long answer indeed"))
    for i in range(8, 50):
        records.append(
            make_record(record_id=f"m-{i:03d}", ground_truth=VALID_GOLDS[i % len(VALID_GOLDS)])
        )

    # --- detection: d-000 .. d-029 (violations on d-000..d-004)
    for i in range(3):
        crowded = [_box("cat", 0.05 + 0.01 * j, 0.05, 0.1 + 0.01 * j, 0.1) for j in range(11)]
        records.append(_detection_record(f"d-{i:03d}", crowded))
    records.append(_detection_record("d-003", [_box("dog", 0.1, 0.1, 0.9, 0.9)]))
    records.append(_detection_record("d-004", [_box("cat", 0.0, 0.0, 0.8, 0.7)]))
    # 12 valid single-box samples (d-005 .. d-016); 5 use absolute coords
    for i in range(5, 17):
        if i < 10:
            records.append(
                _detection_record(
                    f"d-{i:03d}",
                    [_box("cat", 64, 48, 192, 144)],
                    parm={"image_width": 640, "image_height": 480},
                )
            )
        else:
            records.append(_detection_record(f"d-{i:03d}", [_box("dog", 0.2, 0.2, 0.4, 0.45)]))
    # 13 valid multi-box samples (d-017 .. d-029)
    for i in range(17, 30):
        boxes = [
            _box("cup", 0.1, 0.1, 0.25, 0.3),
            _box("cup", 0.5, 0.5, 0.68, 0.72),
        ]
        records.append(_detection_record(f"d-{i:03d}", boxes))

    # --- grounding: g-000 .. g-019 (violations on g-000..g-003)
    records.append(_grounding_record("g-000", [_box("red car", 0.1, 0.1, 0.95, 0.8)]))
    records.append(_grounding_record("g-001", [_box("red car", 0.0, 0.2, 0.9, 0.9)]))
    records.append(
        _grounding_record(
            "g-002", [_box("the small red car parked near the fence", 0.1, 0.1, 0.3, 0.3)]
        )
    )
    records.append(
        _grounding_record(
            "g-003", [_box("a dusty bicycle leaning on the old wall", 0.4, 0.4, 0.6, 0.6)]
        )
    )
    for i in range(4, 20):
        records.append(_grounding_record(f"g-{i:03d}", [_box("red car", 0.3, 0.3, 0.5, 0.55)]))

    assert len(records) == 100
    return records


def build_scores():
    scores = {}
    for i in range(50):
        record_id = f"m-{i:03d}"
        scores[record_id] = {"pass_at_8": 1.0 if record_id in TOO_EASY_MATH else 0.25 + (i % 4) * 0.125}
    for i in range(30):
        # in-band values, touching both inclusive endpoints
        value = {5: 2.0, 6: 10.0}.get(i, 3.0 + (i % 7))
        scores[f"d-{i:03d}"] = {"cumulative_iou_reward": value}
    for i in range(20):
        record_id = f"g-{i:03d}"
        if record_id == "g-010":
            value = 1.5
        elif record_id == "g-011":
            value = 11.0
        else:
            value = 4.0 + (i % 6)
        scores[record_id] = {"cumulative_iou_reward": value}
    return scores


def write_fixture(directory):
    """Write dataset + scores, return (dataset_path, scores_path)."""
    dataset = directory / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        for record in build_records():
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    scores = directory / "scores.json"
    scores.write_text(json.dumps(build_scores(), indent=1), encoding="utf-8")
    return dataset, scores
