from __future__ import annotations

import pytest

from unireward.curation import (
    CurationConfig,
    Drop,
    Keep,
    MissingScore,
    DifficultyScores,
    balance_categories,
    difficulty_filter,
    enforce_single_multi_ratio,
    is_single_box,
    rule_filter_counting,
    rule_filter_detection,
    rule_filter_grounding,
    rule_filter_ocr,
    rule_filter_reasoning,
    run_pipeline,
)
from unireward.schema import read_dataset

from conftest import make_detection_sample, make_sample
from curation_fixture import PLANTED, PLANTED_TOTAL, TASK_FAMILY, write_fixture


def detection_sample_with(boxes, parm=None, **kwargs):
    return make_detection_sample(boxes=boxes, verifier_parm=parm, **kwargs)


class TestRuleFilterReasoning:
    @pytest.mark.parametrize(
        "gold, rule",
        [
            ("x=5", "symbol_filter"),
            ("[1, 2]", "symbol_filter"),
            ("f(x)", "symbol_filter"),
            ("a;b", "symbol_filter"),
            ("B", "mcq_filter"),
            ("e", "mcq_filter"),
            ("true", "mcq_filter"),
            ("False", "mcq_filter"),
            ("this answer is way too long to keep", "length_filter"),
        ],
    )
    def test_drops(self, gold, rule):
        decision = rule_filter_reasoning(make_sample(ground_truth=gold))
        assert decision == Drop(rule)

    def test_option_lines_in_prompt(self):
        sample = make_sample(ground_truth="4", prompt_content="Choose:\nA. 3\nB. 4")
        assert rule_filter_reasoning(sample) == Drop("mcq_filter")

    @pytest.mark.parametrize("gold", ["7", "1/2", "paris", "0.125", "exactly twenty chars"])
    def test_keeps(self, gold):
        assert isinstance(rule_filter_reasoning(make_sample(ground_truth=gold)), Keep)

    def test_symbol_beats_length_in_fixed_order(self):
        gold = "x=5 and then some more characters"
        assert rule_filter_reasoning(make_sample(ground_truth=gold)) == Drop("symbol_filter")


class TestRuleFilterDetection:
    def test_box_count(self):
        boxes = tuple(("cat", (0.01 * i, 0.0, 0.01 * i + 0.005, 0.01)) for i in range(11))
        assert rule_filter_detection(detection_sample_with(boxes)) == Drop("box_count")

    def test_box_area(self):
        sample = detection_sample_with((("cat", (0.1, 0.1, 0.9, 0.9)),))
        assert rule_filter_detection(sample) == Drop("box_area")

    def test_keep_small_scene(self):
        sample = detection_sample_with((("cat", (0.1, 0.1, 0.3, 0.3)), ("dog", (0.5, 0.5, 0.7, 0.7))))
        assert isinstance(rule_filter_detection(sample), Keep)

    def test_absolute_coordinates_converted(self):
        sample = detection_sample_with(
            (("cat", (64, 48, 192, 144)),), parm={"image_width": 640, "image_height": 480}
        )
        assert isinstance(rule_filter_detection(sample), Keep)

    def test_absolute_without_dims_dropped(self):
        sample = detection_sample_with((("cat", (64, 48, 192, 144)),))
        assert rule_filter_detection(sample) == Drop("coord_range")

    def test_unparseable_ground_truth(self):
        sample = make_sample(verifier="detection", ability="detection", ground_truth="oops")
        assert rule_filter_detection(sample) == Drop("gt_parse")

    def test_area_exactly_half_kept(self):
        sample = detection_sample_with((("cat", (0.0, 0.0, 1.0, 0.5)),))
        assert isinstance(rule_filter_detection(sample), Keep)


class TestRuleFilterGrounding:
    def test_complex_phrase_label(self):
        sample = detection_sample_with(
            (("the small red car parked near the fence", (0.1, 0.1, 0.3, 0.3)),),
        )
        assert rule_filter_grounding(sample) == Drop("label_complexity")

    def test_six_word_label_kept(self):
        sample = detection_sample_with((("small red car near the fence", (0.1, 0.1, 0.3, 0.3)),))
        assert isinstance(rule_filter_grounding(sample), Keep)

    def test_oversized_box(self):
        sample = detection_sample_with((("car", (0.0, 0.0, 0.9, 0.9)),))
        assert rule_filter_grounding(sample) == Drop("box_area")


class TestRuleFilterCountingOcr:
    def test_non_english_dropped(self):
        sample = make_sample(ability="counting", ground_truth="7", prompt_content="数一数图中有几只猫")
        assert rule_filter_counting(sample) == Drop("non_english")

    def test_english_kept(self):
        sample = make_sample(ability="counting", ground_truth="7", prompt_content="How many cats?")
        assert isinstance(rule_filter_counting(sample), Keep)

    def test_ocr_unverifiable_dropped(self):
        sample = make_sample(ability="ocr", ground_truth="$", prompt_content="Read the sign.")
        assert rule_filter_ocr(sample) == Drop("unverifiable")

    def test_ocr_word_kept(self):
        sample = make_sample(ability="ocr", ground_truth="EXIT", prompt_content="Read the sign.")
        assert isinstance(rule_filter_ocr(sample), Keep)


class TestBalancing:
    def _singles(self, n):
        return [
            detection_sample_with((("cat", (0.1, 0.1, 0.3, 0.3)),), record_id=f"s-{i}")
            for i in range(n)
        ]

    def _multis(self, n):
        return [
            detection_sample_with(
                (("cat", (0.1, 0.1, 0.3, 0.3)), ("cat", (0.5, 0.5, 0.7, 0.7))),
                record_id=f"mm-{i}",
            )
            for i in range(n)
        ]

    def test_downsamples_singles(self):
        kept, dropped = enforce_single_multi_ratio(self._singles(100) + self._multis(100), seed=1)
        singles = [s for s in kept if is_single_box(s)]
        multis = [s for s in kept if not is_single_box(s)]
        assert len(singles) == 50 and len(multis) == 100
        assert len(dropped) == 50

    def test_already_at_ratio_unchanged(self):
        samples = self._singles(10) + self._multis(20)
        kept, dropped = enforce_single_multi_ratio(samples, seed=1)
        assert kept == samples and dropped == []

    def test_no_singles_warns_and_keeps(self, caplog):
        with caplog.at_level("WARNING", logger="unireward.curation"):
            kept, dropped = enforce_single_multi_ratio(self._multis(4), seed=1)
        assert len(kept) == 4 and dropped == []
        assert any("single" in r.message for r in caplog.records)

    def test_downsamples_multis(self):
        kept, _ = enforce_single_multi_ratio(self._singles(10) + self._multis(50), seed=3)
        multis = [s for s in kept if not is_single_box(s)]
        assert len(multis) == 20

    def test_deterministic_under_seed(self):
        samples = self._singles(30) + self._multis(40)
        first = enforce_single_multi_ratio(samples, seed=9)
        second = enforce_single_multi_ratio(samples, seed=9)
        assert [s.id for s in first[0]] == [s.id for s in second[0]]

    def test_category_cap_at_median(self):
        samples = (
            [make_sample(record_id=f"a{i}", ability="counting", ground_truth="1") for i in range(9)]
            + [make_sample(record_id=f"b{i}", ability="counting", ground_truth="2") for i in range(3)]
            + [make_sample(record_id=f"c{i}", ability="counting", ground_truth="3") for i in range(3)]
        )
        kept, dropped = balance_categories(samples, seed=0)
        ones = [s for s in kept if s.reward_model.ground_truth == "1"]
        assert len(ones) == 3  # capped at the median category count
        assert len(dropped) == 6


class TestDifficultyFilter:
    def _scores(self, mapping):
        return DifficultyScores(scores=mapping)

    def test_pass_at_8_boundaries(self):
        scores = self._scores({"a": {"pass_at_8": 1.0}, "b": {"pass_at_8": 0.0}, "c": {"pass_at_8": 0.99}})
        assert difficulty_filter(make_sample(record_id="a"), scores, "reasoning") == Drop("too_easy")
        assert isinstance(difficulty_filter(make_sample(record_id="b"), scores, "reasoning"), Keep)
        assert isinstance(difficulty_filter(make_sample(record_id="c"), scores, "reasoning"), Keep)

    def test_cumulative_band_inclusive(self):
        scores = self._scores(
            {
                "lo": {"cumulative_iou_reward": 2.0},
                "hi": {"cumulative_iou_reward": 10.0},
                "under": {"cumulative_iou_reward": 1.5},
                "over": {"cumulative_iou_reward": 10.5},
            }
        )
        for record_id, keep in (("lo", True), ("hi", True), ("under", False), ("over", False)):
            sample = make_detection_sample(record_id=record_id)
            decision = difficulty_filter(sample, scores, "detection")
            assert isinstance(decision, Keep) == keep

    def test_missing_score(self):
        with pytest.raises(MissingScore):
            difficulty_filter(make_sample(record_id="ghost"), self._scores({}), "reasoning")


class TestPipeline:
    @pytest.fixture()
    def fixture_paths(self, tmp_path):
        dataset, scores = write_fixture(tmp_path)
        config = CurationConfig(
            seed=1234,
            out_dir=tmp_path / "out",
            inputs=[dataset],
            scores_path=scores,
            task_family=dict(TASK_FAMILY),
        )
        return config

    def test_planted_violations_exactly(self, fixture_paths):
        _, report = run_pipeline(fixture_paths)
        counts = report.rule_counts()
        for rule, expected in PLANTED.items():
            assert counts.get(rule, 0) == expected, rule
        planted_sum = sum(v for k, v in counts.items() if k != "ratio_balance")
        assert planted_sum == PLANTED_TOTAL
        assert report.reconciles()

    def test_ratio_enforced_within_one(self, fixture_paths):
        out_path, _ = run_pipeline(fixture_paths)
        curated = list(read_dataset(out_path))
        detection = [s for s in curated if s.data_source == "synthetic_det"]
        singles = sum(1 for s in detection if is_single_box(s))
        multis = len(detection) - singles
        assert abs(2 * singles - multis) <= 2  # |single - multi/2| <= 1 sample

    def test_difficulty_drops(self, fixture_paths):
        _, report = run_pipeline(fixture_paths)
        assert report.sources["synthetic_math"]["dropped_difficulty"] == 5
        assert report.sources["synthetic_ground"]["dropped_difficulty"] == 2
        assert report.sources["synthetic_det"]["dropped_difficulty"] == 0

    def test_rerun_is_byte_identical(self, tmp_path):
        dataset, scores = write_fixture(tmp_path)
        outputs = []
        for run in ("one", "two"):
            config = CurationConfig(
                seed=77,
                out_dir=tmp_path / run,
                inputs=[dataset],
                scores_path=scores,
                task_family=dict(TASK_FAMILY),
            )
            out_path, _ = run_pipeline(config)
            outputs.append(out_path.read_bytes())
            outputs.append((config.out_dir / "report.json").read_bytes())
        assert outputs[0] == outputs[2]
        assert outputs[1] == outputs[3]

    def test_empty_input(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        config = CurationConfig(seed=1, out_dir=tmp_path / "out", inputs=[empty])
        out_path, report = run_pipeline(config)
        assert out_path.read_text(encoding="utf-8") == ""
        assert report.sources == {}

    def test_repeat_factor_suffixes_ids(self, tmp_path):
        dataset, scores = write_fixture(tmp_path)
        config = CurationConfig(
            seed=5,
            out_dir=tmp_path / "out",
            inputs=[dataset],
            scores_path=scores,
            task_family=dict(TASK_FAMILY),
            repeat={"synthetic_ground": 2},
        )
        out_path, report = run_pipeline(config)
        curated = list(read_dataset(out_path))
        ground = [s for s in curated if s.data_source == "synthetic_ground"]
        kept = report.sources["synthetic_ground"]["kept"]
        assert len(ground) == 2 * kept
        ids = [s.id for s in ground]
        assert len(set(ids)) == len(ids)  # repeats stay unique via ~k suffix

    def test_validates_after_curation(self, fixture_paths):
        from unireward.schema import validate_dataset

        out_path, _ = run_pipeline(fixture_paths)
        report = validate_dataset(out_path)
        assert report.invalid == 0
