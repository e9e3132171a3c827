from __future__ import annotations

import json
import threading

import numpy as np
import pytest

from unireward.metrics import (
    DEFAULT_REFLECTION_WORDS,
    LengthMismatch,
    MetricsMonitor,
    MonitorConfig,
    ReflectionConfig,
)
from unireward.verifiers.base import RewardBreakdown

from conftest import make_sample
from oracles import recompute_source_metrics


def breakdown(accuracy=1.0, fmt=0.0, aux=None, acc_ratio=1.0, fmt_ratio=0.0):
    return RewardBreakdown.combine(accuracy, fmt, acc_ratio, fmt_ratio, aux or {})


def random_event(rng, i, sources=("src_a", "src_b", "src_c")):
    source = str(rng.choice(sources))
    accuracy = float(rng.choice([0.0, 0.0, 1.0, rng.uniform(0, 1)]))
    fmt = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
    aux = {}
    if rng.random() < 0.5:
        aux = {f"iou@{t:.2f}": float(rng.uniform(0, 1)) for t in (0.5, 0.75, 0.95, 0.99)}
        aux["sample_map"] = float(rng.uniform(0, 1))
    words = ["plain answer", "let me verify this", "wait, re-check the sum", "done"]
    response = str(rng.choice(words)) + " " + "x" * int(rng.integers(0, 30))
    if rng.random() < 0.05:
        response = "y" * 64  # exactly max_len: truncated
    return {
        "source": source,
        "response": response,
        "accuracy": accuracy,
        "format": fmt,
        "combined": accuracy * 0.9 + fmt * 0.1,
        "aux": aux,
        "length": len(response),
        "max_len": 64,
    }


def feed(monitor, events, batch_size=16):
    for start in range(0, len(events), batch_size):
        chunk = events[start : start + batch_size]
        samples = [make_sample(record_id=f"m-{start+i}", data_source=e["source"]) for i, e in enumerate(chunk)]
        responses = [e["response"] for e in chunk]
        breakdowns = [
            RewardBreakdown(
                accuracy=e["accuracy"], format=e["format"], combined=e["combined"], aux_metrics=e["aux"]
            )
            for e in chunk
        ]
        monitor.record_batch(samples, responses, breakdowns, max_len=64)


def assert_snapshot_matches_oracle(monitor, events):
    expected = recompute_source_metrics(events, DEFAULT_REFLECTION_WORDS)
    snapshot = monitor.snapshot()
    assert set(snapshot) == set(expected)
    for source, want in expected.items():
        got = snapshot[source].to_dict()
        for key, value in want.items():
            if isinstance(value, float):
                assert got[key] == pytest.approx(value, abs=1e-9), (source, key)
            elif isinstance(value, dict):
                assert got[key].keys() == value.keys()
                for t in value:
                    assert got[key][t] == pytest.approx(value[t], abs=1e-9)
            else:
                assert got[key] == value, (source, key)


class TestRecordBatch:
    def test_mean_split_by_correctness(self):
        monitor = MetricsMonitor()
        samples = [make_sample(record_id="a", data_source="s"), make_sample(record_id="b", data_source="s")]
        responses = ["x" * 10, "y" * 20]
        monitor.record_batch(samples, responses, [breakdown(1.0), breakdown(0.0)], max_len=100)
        metrics = monitor.snapshot()["s"]
        assert metrics.reward_mean == pytest.approx(0.5)
        assert metrics.length_mean == pytest.approx(15)
        assert metrics.length_mean_correct == pytest.approx(10)
        assert metrics.length_mean_incorrect == pytest.approx(20)

    def test_reflection_contributions(self):
        monitor = MetricsMonitor()
        samples = [make_sample(record_id="a", data_source="s")]
        monitor.record_batch(samples, ["I will let me verify the result"], [breakdown(1.0)], max_len=99)
        metrics = monitor.snapshot()["s"]
        assert metrics.reflection_ratio == 1.0
        assert metrics.reflection_correct_ratio == 1.0

    def test_empty_batch_is_noop(self):
        monitor = MetricsMonitor()
        monitor.record_batch([], [], [], max_len=10)
        assert monitor.snapshot() == {}

    def test_truncation_flag_requires_exact_length(self):
        monitor = MetricsMonitor()
        samples = [make_sample(record_id=str(i), data_source="s") for i in range(3)]
        monitor.record_batch(samples, ["x" * 5, "x" * 4, "x" * 5], [breakdown()] * 3, max_len=5)
        assert monitor.snapshot()["s"].truncation_rate == pytest.approx(2 / 3)

    def test_length_mismatch(self):
        monitor = MetricsMonitor()
        with pytest.raises(LengthMismatch):
            monitor.record_batch([make_sample()], [], [], max_len=5)
        with pytest.raises(LengthMismatch):
            monitor.record_batch([make_sample()], ["x"], [breakdown()], max_len=5, lengths=[1, 2])

    def test_explicit_token_lengths(self):
        monitor = MetricsMonitor(MonitorConfig(length_unit="tokens"))
        samples = [make_sample(record_id="a", data_source="s")]
        monitor.record_batch(samples, ["whatever text"], [breakdown()], max_len=2, lengths=[2])
        metrics = monitor.snapshot()["s"]
        assert metrics.length_mean == 2
        assert metrics.truncation_rate == 1.0

    def test_no_reflection_yields_null_not_nan(self):
        monitor = MetricsMonitor()
        monitor.record_batch([make_sample(record_id="a", data_source="s")], ["plain"], [breakdown()], max_len=9)
        assert monitor.snapshot()["s"].reflection_correct_ratio is None


class TestSnapshotReplay:
    def test_snapshot_equals_offline_recomputation(self):
        rng = np.random.default_rng(101)
        events = [random_event(rng, i) for i in range(600)]
        monitor = MetricsMonitor()
        feed(monitor, events)
        assert_snapshot_matches_oracle(monitor, events)

    def test_before_any_batch(self):
        assert MetricsMonitor().snapshot() == {}

    def test_source_isolation(self):
        rng = np.random.default_rng(33)
        events = [random_event(rng, i, sources=("only_a", "only_b")) for i in range(200)]
        monitor = MetricsMonitor()
        feed(monitor, events)
        only_a = [e for e in events if e["source"] == "only_a"]
        expected = recompute_source_metrics(only_a, DEFAULT_REFLECTION_WORDS)
        assert monitor.snapshot()["only_a"].count == expected["only_a"]["count"]
        assert monitor.snapshot()["only_a"].reward_mean == pytest.approx(
            expected["only_a"]["reward_mean"], abs=1e-9
        )

    def test_concurrent_recording_is_exact(self):
        rng = np.random.default_rng(71)
        chunks = [[random_event(rng, i) for i in range(100)] for _ in range(8)]
        monitor = MetricsMonitor()
        threads = [threading.Thread(target=feed, args=(monitor, chunk)) for chunk in chunks]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        flattened = [e for chunk in chunks for e in chunk]
        assert_snapshot_matches_oracle(monitor, flattened)

    def test_length_mean_between_split_means(self):
        rng = np.random.default_rng(5)
        events = [random_event(rng, i) for i in range(300)]
        monitor = MetricsMonitor()
        feed(monitor, events)
        for metrics in monitor.snapshot().values():
            if metrics.length_mean_correct is not None and metrics.length_mean_incorrect is not None:
                low = min(metrics.length_mean_correct, metrics.length_mean_incorrect)
                high = max(metrics.length_mean_correct, metrics.length_mean_incorrect)
                assert low - 1e-9 <= metrics.length_mean <= high + 1e-9


class TestExportJsonl:
    def test_rows_parse_back_with_stable_keys(self, tmp_path):
        rng = np.random.default_rng(17)
        events = [random_event(rng, i) for i in range(64)]
        monitor = MetricsMonitor()
        feed(monitor, events)
        path = tmp_path / "metrics.jsonl"
        monitor.export_jsonl(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        assert header["kind"] == "header"
        assert header["length_unit"] == "chars"
        key_orders = {tuple(json.loads(line)) for line in lines[1:]}
        assert len(key_orders) == 1  # identical key order on every row
        rows = [json.loads(line) for line in lines[1:]]
        assert all(row["count"] >= 1 for row in rows)
        assert {row["step"] for row in rows} == set(range(1, 5))

    def test_empty_export_is_header_only(self, tmp_path):
        path = tmp_path / "m.jsonl"
        MetricsMonitor().export_jsonl(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["kind"] == "header"

    def test_export_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(23)
        events = [random_event(rng, i) for i in range(50)]
        monitor = MetricsMonitor()
        feed(monitor, events)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        monitor.export_jsonl(a)
        monitor.export_jsonl(b)
        assert a.read_bytes() == b.read_bytes()


class TestReflectionConfig:
    def test_default_list_shape(self):
        config = ReflectionConfig()
        assert len(config.words) == 15
        for required in ("re-check", "re-think", "verify"):
            assert required in config.words

    def test_case_insensitive_search(self):
        config = ReflectionConfig()
        assert config.contains_reflection("LET ME VERIFY this")
        assert not config.contains_reflection("plain answer")
