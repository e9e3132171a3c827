"""Desk-scale closed loop over the whole engine.

A seeded mock policy of controllable quality stands in for a real model:
prompts are built from the instruction pool, rollouts go through the
reward client/server, group advantages and the token objective come from
the GRPO math, and everything lands in the source-level monitor. The
mock "learns" by a scalar skill bump, which is enough to validate reward
plumbing and curriculum dynamics, not optimization claims.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .client import ClientConfig, RewardClient, build_request
from .grpo import ClipConfig, TokenBatch, batch_objective, group_advantages
from .metrics import MetricsMonitor
from .parsing import DetBox
from .schedule import ThresholdSchedule
from .schema import Sample, read_dataset
from .server import InProcessServer, RewardEngine
from .verifiers.base import RewardBreakdown
from .verifiers.detection import parse_ground_truth

# Ten phrasings per group; one of each is appended to math-routed prompts.
THINK_PROMPTS = (
    "Let's think step by step.",
    "Let's reason through this carefully, one step at a time.",
    "Think it through stage by stage before answering.",
    "Work through the problem methodically, step by step.",
    "Break the problem into small steps and solve each one.",
    "Take this one step at a time and show your reasoning.",
    "Reason about the problem in small, careful steps.",
    "Walk through the solution step by step.",
    "Proceed step by step, checking each deduction.",
    "Solve it incrementally, explaining every step.",
)

BOXED_PROMPTS = (
    "Place the answer in \\boxed{}.",
    "Put your final answer inside \\boxed{}.",
    "Write the final result within \\boxed{}.",
    "Enclose the final answer in \\boxed{}.",
    "Give the final answer wrapped in \\boxed{}.",
    "Report the answer inside \\boxed{}.",
    "Your last line must contain the answer in \\boxed{}.",
    "Finish with the answer enclosed in \\boxed{}.",
    "State the final answer using \\boxed{}.",
    "Present the conclusion inside \\boxed{}.",
)

DETECTION_QUERY_TEMPLATE = (
    "Please detect all instances of the following category within the image:\n"
    "{LABEL}. \n\n"
    "Let's think step by step and output the final answer in <answer> and </answer> tags.\n"
    "For example:\n"
    "Your detailed reasoning process here.\n"
    "<answer>\n"
    "[{'bbox_2d': [x1,y1,x2,y2],'label': label_name}]\n"
    "</answer>"
)


@dataclass(frozen=True)
class PromptPool:
    group_a: tuple[str, ...] = THINK_PROMPTS
    group_b: tuple[str, ...] = BOXED_PROMPTS


def build_prompt(sample: Sample, pool: PromptPool, rng: np.random.Generator) -> str:
    """Final prompt text for one sample.

    Math-routed samples get the base instruction plus one uniformly
    chosen sentence from each pool group (prompt-variance control);
    detection/grounding samples get the fixed query template with the
    category substituted.
    """
    base = sample.prompt[-1].content
    verifier = sample.reward_model.verifier
    if verifier == "math":
        a = pool.group_a[int(rng.integers(len(pool.group_a)))]
        b = pool.group_b[int(rng.integers(len(pool.group_b)))]
        return f"{base}\n{a} {b}"
    if verifier == "detection":
        label = sample.reward_model.verifier_parm.get("category")
        if not label:
            gts = parse_ground_truth(sample.reward_model.ground_truth)
            label = ", ".join(sorted({g.label for g in gts})) or "object"
        return DETECTION_QUERY_TEMPLATE.replace("{LABEL}", str(label))
    return base


@dataclass
class MockPolicy:
    """Deterministic-under-seed response generator.

    skill in [0, 1] per task tag controls correctness; noise sets the
    detection box jitter scale and the chance of wrong math answers;
    learning_rate_sim bumps skill whenever the advantage-weighted reward
    signal of a step is positive.
    """

    skill: dict[str, float] = field(default_factory=dict)
    noise: float = 0.08
    learning_rate_sim: float = 0.0
    default_skill: float = 0.5

    def skill_for(self, ability: str) -> float:
        return min(1.0, max(0.0, self.skill.get(ability, self.default_skill)))

    def bump(self, ability: str, amount: float) -> None:
        self.skill[ability] = min(1.0, self.skill_for(ability) + amount)

    def respond(self, sample: Sample, prompt: str, rng: np.random.Generator) -> str:
        # A real policy conditions on the prompt; the mock conditions on
        # the sample's ground truth and only keeps the prompt for shape.
        del prompt
        if sample.reward_model.verifier == "detection":
            return self._respond_detection(sample, rng)
        return self._respond_math(sample, rng)

    def _respond_math(self, sample: Sample, rng: np.random.Generator) -> str:
        skill = self.skill_for(sample.ability)
        gold = sample.reward_model.ground_truth
        correct = rng.random() < skill  # skill 1.0 is always correct: random() < 1
        reflected = rng.random() < 0.3
        filler = "Working through the problem. " * int(rng.integers(1, 4))
        body = filler + ("Let me verify the result. " if reflected else "")
        answer = gold if correct else self._wrong_answer(gold, rng)
        return f"<think>{body}</think><answer>The answer is \\boxed{{{answer}}}.</answer>"

    @staticmethod
    def _wrong_answer(gold: str, rng: np.random.Generator) -> str:
        try:
            return str(int(gold) + int(rng.integers(1, 5)))
        except ValueError:
            return gold + "x"

    def _respond_detection(self, sample: Sample, rng: np.random.Generator) -> str:
        skill = self.skill_for(sample.ability)
        jitter = self.noise * (1.0 - skill)
        gts = parse_ground_truth(sample.reward_model.ground_truth)
        predicted: list[DetBox] = []
        for gt in gts:
            x1, y1, x2, y2 = gt.bbox
            w, h = x2 - x1, y2 - y1
            dx1, dy1, dx2, dy2 = rng.uniform(-jitter, jitter, size=4)
            predicted.append(
                DetBox(label=gt.label, bbox=(x1 + dx1 * w, y1 + dy1 * h, x2 + dx2 * w, y2 + dy2 * h))
            )
        body = ",".join(
            "{'bbox_2d': [%.4f,%.4f,%.4f,%.4f],'label': '%s'}" % (*b.bbox, b.label)
            for b in predicted
        )
        return f"<think>Scanning the image for targets.</think><answer>\n[{body}]\n</answer>"


@dataclass
class SimConfig:
    dataset: Path
    out_dir: Path = Path("sim-out")
    steps: int = 20
    group_size: int = 8
    prompts_per_step: int = 2
    max_response_len: int = 2048
    seed: int = 7
    schedule: str = "dynamic"  # dynamic | fixed:<eps>
    freeze_learning: bool = False
    policy: MockPolicy = field(default_factory=MockPolicy)
    clip: ClipConfig = field(default_factory=ClipConfig)
    reuse_factor: int = 1  # minibatch reuse knob; dynamics claims stop at 1
    schedules_to_compare: tuple[str, ...] = ("fixed:0.5", "fixed:0.99", "dynamic")

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        policy_raw = raw.get("policy", {})
        policy = MockPolicy(
            skill=dict(policy_raw.get("skill", {})),
            noise=float(policy_raw.get("noise", 0.08)),
            learning_rate_sim=float(policy_raw.get("learning_rate_sim", 0.0)),
            default_skill=float(policy_raw.get("default_skill", 0.5)),
        )
        cfg = cls(dataset=Path(raw["dataset"]), policy=policy)
        cfg.out_dir = Path(raw.get("out_dir", cfg.out_dir))
        cfg.steps = int(raw.get("steps", cfg.steps))
        cfg.group_size = int(raw.get("group_size", cfg.group_size))
        cfg.prompts_per_step = int(raw.get("prompts_per_step", cfg.prompts_per_step))
        cfg.max_response_len = int(raw.get("max_response_len", cfg.max_response_len))
        cfg.seed = int(raw.get("seed", cfg.seed))
        cfg.schedule = str(raw.get("schedule", cfg.schedule))
        cfg.freeze_learning = bool(raw.get("freeze_learning", cfg.freeze_learning))
        cfg.reuse_factor = int(raw.get("reuse_factor", cfg.reuse_factor))
        if "schedules_to_compare" in raw:
            cfg.schedules_to_compare = tuple(raw["schedules_to_compare"])
        return cfg


def schedule_from_name(name: str) -> ThresholdSchedule:
    if name == "dynamic":
        return ThresholdSchedule.default()
    if name.startswith("fixed:"):
        return ThresholdSchedule.fixed(float(name.split(":", 1)[1]))
    raise ValueError(f"unknown schedule {name!r}")


def _schedule_parm(schedule: ThresholdSchedule) -> dict:
    return {
        "schedule_bounds": [bound for bound, _ in schedule.stages],
        "schedule_epsilons": [eps for _, eps in schedule.stages],
    }


@dataclass
class StepRecord:
    step: int
    progress: float
    mean_reward: float
    mean_accuracy: float
    mean_format: float
    objective: float
    skill: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "progress": self.progress,
                "mean_reward": self.mean_reward,
                "mean_accuracy": self.mean_accuracy,
                "mean_format": self.mean_format,
                "objective": self.objective,
                "skill": {k: self.skill[k] for k in sorted(self.skill)},
            },
            ensure_ascii=False,
        )


@dataclass
class StepBatch:
    """One step's raw events, kept so the monitor can replay them."""

    samples: list[Sample]
    responses: list[str]
    breakdowns: list[RewardBreakdown]


def _run_loop(
    config: SimConfig,
    samples: list[Sample],
    send,  # (RewardRequest) -> RewardResponse
) -> list[tuple[StepRecord, StepBatch]]:
    pool = PromptPool()
    policy = MockPolicy(
        skill=dict(config.policy.skill),
        noise=config.policy.noise,
        learning_rate_sim=config.policy.learning_rate_sim,
        default_skill=config.policy.default_skill,
    )
    schedule = schedule_from_name(config.schedule)
    parm_override = _schedule_parm(schedule)
    root = np.random.SeedSequence(config.seed)
    step_seeds = root.spawn(config.steps)
    out: list[tuple[StepRecord, StepBatch]] = []

    for step in range(1, config.steps + 1):
        rng = np.random.default_rng(step_seeds[step - 1])
        progress = step / config.steps
        chosen_idx = rng.choice(len(samples), size=min(config.prompts_per_step, len(samples)), replace=False)
        batch_samples: list[Sample] = []
        batch_responses: list[str] = []
        group_slices: list[tuple[int, int]] = []
        for idx in sorted(chosen_idx.tolist()):
            sample = samples[idx]
            prompt = build_prompt(sample, pool, rng)
            start = len(batch_samples)
            for _ in range(config.group_size):
                batch_samples.append(sample)
                batch_responses.append(policy.respond(sample, prompt, rng))
            group_slices.append((start, len(batch_samples)))

        request = build_request(f"step-{step}", progress, batch_samples, batch_responses)
        for item in request.items:
            if item.verifier == "detection":
                item.verifier_parm = {**item.verifier_parm, **parm_override}
        # group members share a sample id; make wire ids unique per rollout
        for i, item in enumerate(request.items):
            item.id = f"{item.id}#{i}"
        response = send(request)
        by_id = response.by_id()
        results = [by_id[f"{s.id}#{i}"] for i, s in enumerate(batch_samples)]
        for r in results:
            if r.error:
                raise RuntimeError(f"reward service failed item {r.id}: {r.error}")

        breakdowns = [
            RewardBreakdown(
                accuracy=r.accuracy, format=r.format, combined=r.combined, aux_metrics=r.aux_metrics
            )
            for r in results
        ]

        advantages_all: list[float] = [0.0] * len(results)
        signal = 0.0
        for start, end in group_slices:
            rewards = [results[i].combined for i in range(start, end)]
            advantages = group_advantages(rewards, config.clip.std_floor)
            signal += float(np.dot(advantages, rewards))
            for offset, i in enumerate(range(start, end)):
                advantages_all[i] = float(advantages[offset])
        token_counts = [max(1, len(r.split())) for r in batch_responses]
        # each reuse pass replays the batch with fresh importance ratios,
        # standing in for extra backward passes over the same rollouts
        passes = []
        for _ in range(max(1, config.reuse_factor)):
            ratios_all = [np.exp(rng.normal(0.0, 0.03, size=t)) for t in token_counts]
            passes.append(
                batch_objective(TokenBatch(ratios=ratios_all, advantages=advantages_all), config.clip)
            )
        objective = float(np.mean(passes))

        if not config.freeze_learning and policy.learning_rate_sim > 0 and signal > 0:
            for ability in sorted({s.ability for s in batch_samples}):
                policy.bump(ability, policy.learning_rate_sim)

        record = StepRecord(
            step=step,
            progress=progress,
            mean_reward=float(np.mean([r.combined for r in results])),
            mean_accuracy=float(np.mean([r.accuracy for r in results])),
            mean_format=float(np.mean([r.format for r in results])),
            objective=objective,
            skill={k: policy.skill_for(k) for k in sorted({s.ability for s in batch_samples})},
        )
        out.append((record, StepBatch(batch_samples, batch_responses, breakdowns)))
    return out


def run_simulation(config: SimConfig, server_url: str | None = None) -> Path:
    """Run the loop and write trajectory + per-source metrics JSONL.

    With server_url unset, an in-process server is started so the network
    hop is still exercised. Deterministic for a fixed seed and config.
    """
    samples = list(read_dataset(config.dataset))
    if not samples:
        raise ValueError(f"dataset {config.dataset} is empty")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    monitor = MetricsMonitor()

    if server_url is None:
        with InProcessServer(RewardEngine()) as server:
            with RewardClient(ClientConfig(endpoints=[server.url])) as client:
                steps = _run_loop(config, samples, client.send_request)
    else:
        with RewardClient(ClientConfig(endpoints=[server_url])) as client:
            steps = _run_loop(config, samples, client.send_request)

    trajectory_path = config.out_dir / "trajectory.jsonl"
    with open(trajectory_path, "w", encoding="utf-8") as fh:
        for record, batch in steps:
            fh.write(record.to_json() + "\n")
            monitor.record_batch(batch.samples, batch.responses, batch.breakdowns, config.max_response_len)
    monitor.export_jsonl(config.out_dir / "metrics.jsonl")
    return trajectory_path


def compare_schedules(config: SimConfig) -> tuple[Path, Path]:
    """Paired-seed runs across threshold schedules.

    Each schedule sees identical seeds; with learning frozen the response
    sets are literally identical, so reward differences isolate the
    threshold rule. Writes a JSON report and a per-step CSV of accuracy
    curves; returns (report_path, csv_path).
    """
    samples = list(read_dataset(config.dataset))
    if not samples:
        raise ValueError(f"dataset {config.dataset} is empty")
    config.out_dir.mkdir(parents=True, exist_ok=True)

    curves: dict[str, list[StepRecord]] = {}
    with InProcessServer(RewardEngine()) as server:
        with RewardClient(ClientConfig(endpoints=[server.url])) as client:
            for name in config.schedules_to_compare:
                variant = replace(config, schedule=name)
                curves[name] = [record for record, _ in _run_loop(variant, samples, client.send_request)]

    csv_path = config.out_dir / "schedule-curves.csv"
    names = list(config.schedules_to_compare)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "progress"] + [f"accuracy[{n}]" for n in names] + [f"reward[{n}]" for n in names])
        for i in range(config.steps):
            row = [curves[names[0]][i].step, curves[names[0]][i].progress]
            row += [curves[n][i].mean_accuracy for n in names]
            row += [curves[n][i].mean_reward for n in names]
            writer.writerow(row)

    report = {
        name: {
            "mean_accuracy": float(np.mean([r.mean_accuracy for r in records])),
            "mean_reward": float(np.mean([r.mean_reward for r in records])),
        }
        for name, records in curves.items()
    }
    report_path = config.out_dir / "schedule-report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report_path, csv_path
