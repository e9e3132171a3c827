"""Regenerate the golden wire fixture under docs/golden/.

The fixture pins the client-server contract for independently written
SDKs: batch_input.json is the shared input, request.json holds the exact
canonical bytes a conforming client must produce for it, response.json
the recorded server reply. Numeric values in the request are chosen
non-integral so canonical float formatting agrees across languages.

Run from the repo root: python scripts/record_golden.py
"""

from __future__ import annotations

import json
from pathlib import Path

from unireward.client import build_request
from unireward.schema import parse_sample, serialize_sample
from unireward.server import InProcessServer, RewardEngine
from unireward.wire import canonical_json

import httpx

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "docs" / "golden"

DETECTION_GT = '[{"bbox_2d": [0.1, 0.2, 0.45, 0.6], "label": "cat"}, {"bbox_2d": [0.55, 0.15, 0.9, 0.5], "label": "dog"}]'

SAMPLES = [
    {
        "data_source": "golden_math",
        "images": [],
        "prompt": [{"content": "What is 12 / 4?", "role": "user"}],
        "ability": "math",
        "reward_model": {
            "answer": "",
            "ground_truth": "3",
            "accuracy_ratio": 0.9,
            "format_ratio": 0.1,
            "verifier": "math",
            "verifier_parm": {},
        },
        "extra_info": {"id": "gold-m-0", "image_path": ""},
    },
    {
        "data_source": "golden_math",
        "images": [],
        "prompt": [{"content": "Half of one?", "role": "user"}],
        "ability": "math",
        "reward_model": {
            "answer": "",
            "ground_truth": "1/2",
            "accuracy_ratio": 0.9,
            "format_ratio": 0.1,
            "verifier": "math",
            "verifier_parm": {},
        },
        "extra_info": {"id": "gold-m-1", "image_path": ""},
    },
    {
        "data_source": "golden_det",
        "images": ["img/gold-0.jpg"],
        "prompt": [{"content": "Detect the listed categories.", "role": "user"}],
        "ability": "detection",
        "reward_model": {
            "answer": "",
            "ground_truth": DETECTION_GT,
            "accuracy_ratio": 0.9,
            "format_ratio": 0.1,
            "verifier": "detection",
            "verifier_parm": {"iou_thresholds": [0.5, 0.75]},
        },
        "extra_info": {"id": "gold-d-0", "image_path": "img/gold-0.jpg"},
    },
    {
        "data_source": "golden_det",
        "images": ["img/gold-1.jpg"],
        "prompt": [{"content": "Detect the listed categories.", "role": "user"}],
        "ability": "grounding",
        "reward_model": {
            "answer": "",
            "ground_truth": '[{"bbox_2d": [0.2, 0.3, 0.6, 0.7], "label": "red car"}]',
            "accuracy_ratio": 0.9,
            "format_ratio": 0.1,
            "verifier": "detection",
            "verifier_parm": {},
        },
        "extra_info": {"id": "gold-g-0", "image_path": "img/gold-1.jpg"},
    },
]

RESPONSES = [
    "<think>twelve over four</think><answer>\\boxed{3}</answer>",
    "plain guess: \\boxed{0.25}",
    "<think>two animals</think><answer>[{'bbox_2d': [0.1, 0.2, 0.45, 0.6],'label': 'cat'},"
    "{'bbox_2d': [0.55, 0.15, 0.9, 0.5],'label': 'dog'}]</answer>",
    "<think>one car</think><answer>[{'bbox_2d': [0.21, 0.3, 0.6, 0.7],'label': 'red car'}]</answer>",
]

BATCH_ID = "golden-batch-1"
PROGRESS = 0.5


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    samples = [parse_sample(record) for record in SAMPLES]

    batch_input = {
        "batch_id": BATCH_ID,
        "training_progress": PROGRESS,
        "samples": [serialize_sample(s) for s in samples],
        "responses": RESPONSES,
    }
    (GOLDEN_DIR / "batch_input.json").write_text(
        json.dumps(batch_input, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    request = build_request(BATCH_ID, PROGRESS, samples, RESPONSES)
    request_bytes = canonical_json(request.to_dict())
    (GOLDEN_DIR / "request.json").write_text(request_bytes, encoding="utf-8")

    with InProcessServer(RewardEngine()) as server:
        reply = httpx.post(
            server.url + "/v1/verify",
            content=request_bytes.encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        reply.raise_for_status()
    (GOLDEN_DIR / "response.json").write_text(
        canonical_json(reply.json()), encoding="utf-8"
    )
    print(f"golden fixture written to {GOLDEN_DIR}")


if __name__ == "__main__":
    main()
