from __future__ import annotations

import json
import random

import pytest

from unireward import _kernels
from unireward.schema import Sample, parse_sample


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # pay any JIT compile cost once, up front
    _kernels.warmup()


def make_record(
    record_id="s-1",
    data_source="synthetic_math",
    ability="math",
    verifier="math",
    ground_truth="7",
    answer="",
    accuracy_ratio=1.0,
    format_ratio=0.0,
    verifier_parm=None,
    prompt_content="What is 3 + 4?",
    images=None,
) -> dict:
    return {
        "data_source": data_source,
        "images": images if images is not None else [],
        "prompt": [{"content": prompt_content, "role": "user"}],
        "ability": ability,
        "reward_model": {
            "answer": answer,
            "ground_truth": ground_truth,
            "accuracy_ratio": accuracy_ratio,
            "format_ratio": format_ratio,
            "verifier": verifier,
            "verifier_parm": verifier_parm or {},
        },
        "extra_info": {"id": record_id, "image_path": ""},
    }


def make_sample(**kwargs) -> Sample:
    return parse_sample(make_record(**kwargs))


def make_detection_record(
    record_id="d-1",
    data_source="synthetic_det",
    ability="detection",
    boxes=(("cat", (0.1, 0.1, 0.4, 0.4)),),
    accuracy_ratio=0.9,
    format_ratio=0.1,
    verifier_parm=None,
) -> dict:
    gt = json.dumps([{"bbox_2d": list(b), "label": label} for label, b in boxes])
    return make_record(
        record_id=record_id,
        data_source=data_source,
        ability=ability,
        verifier="detection",
        ground_truth=gt,
        accuracy_ratio=accuracy_ratio,
        format_ratio=format_ratio,
        verifier_parm=verifier_parm,
        prompt_content="Find every listed object in the image.",
        images=["img/0001.jpg"],
    )


def make_detection_sample(**kwargs) -> Sample:
    return parse_sample(make_detection_record(**kwargs))


def write_sim_dataset(path, n_detection=3, n_math=0):
    """Small curated-style dataset for harness runs: detection targets are
    mid-sized boxes so jittered predictions land in the 0.85..0.99 IoU
    band, where schedule choice matters."""
    boxes = [
        (("cat", (0.20, 0.20, 0.55, 0.60)),),
        (("dog", (0.10, 0.30, 0.45, 0.75)), ("dog", (0.55, 0.15, 0.9, 0.5))),
        (("cup", (0.35, 0.25, 0.7, 0.65)),),
    ]
    records = []
    for i in range(n_detection):
        records.append(
            make_detection_record(
                record_id=f"sim-d-{i}",
                boxes=boxes[i % len(boxes)],
                accuracy_ratio=1.0,
                format_ratio=0.0,
            )
        )
    for i in range(n_math):
        records.append(make_record(record_id=f"sim-m-{i}", ground_truth=str(7 + i)))
    import json as _json

    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_json.dumps(record, ensure_ascii=False) + "\n")
    return path


def random_valid_record(rng: random.Random, record_id: str) -> dict:
    """Arbitrary schema-valid record, with extras sprinkled at every level
    that must survive a round-trip."""
    roles = ["system", "user", "assistant"]
    abilities = ["math", "puzzle", "science", "chart", "detection", "grounding", "counting", "ocr"]
    prompt = [
        {
            "content": "".join(rng.choice("abc {}\\<>'\"\n") for _ in range(rng.randint(1, 30))) or "x",
            "role": rng.choice(roles),
        }
        for _ in range(rng.randint(1, 3))
    ]
    if rng.random() < 0.3:
        prompt[0]["loss_mask"] = rng.randint(0, 1)
    parm_options = [
        {},
        {"iou_thresholds": [0.5, 0.75]},
        {"category": "cat"},
        {"nested": {"bounds": [0.1, 1.0], "note": "x"}},
        {"flag": True, "weight": 1.5, "tags": ["a", "b"], "empty": None},
    ]
    record = {
        "data_source": rng.choice(["src_a", "src_b", "src_c"]),
        "images": [f"img/{rng.randint(0, 99):04d}.jpg" for _ in range(rng.randint(0, 2))],
        "prompt": prompt,
        "ability": rng.choice(abilities),
        "reward_model": {
            "answer": rng.choice(["", "42", "blue"]),
            "ground_truth": rng.choice(["7", "1/2", "42%", "paris", "0.125"]),
            "accuracy_ratio": rng.choice([0.5, 0.9, 1.0, 2]),
            "format_ratio": rng.choice([0.0, 0.1, 0.25]),
            "verifier": rng.choice(["math", "detection", "custom"]),
            "verifier_parm": rng.choice(parm_options),
        },
        "extra_info": {"id": record_id, "image_path": rng.choice(["", "img/1.jpg"])},
    }
    if rng.random() < 0.4:
        record["weight"] = rng.random()
        record["notes"] = {"curated": True}
    if rng.random() < 0.3:
        record["reward_model"]["reward_scale"] = 2
    if rng.random() < 0.3:
        record["extra_info"]["split"] = "train"
    return record
