"""Top-level task executor: track a reference trajectory keypoint by keypoint.

Observes the tracked point, identifies the local models (or adopts
transferred ones), then drives through each keypoint with one MPC control
per step until the keypoint is inside the reach tolerance. After every
executed control the manipulation error (distance to the nearest waypoint
of the active segment) is evaluated; exceeding the update threshold
triggers an adapt-mode identification that appends density-guided actions
and refits the models. A just-fired update blocks the trigger for one
control step so a momentarily far-off plant cannot cause an update loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .formats import ParseError, fmt_float, fmt_floats, header_line, parse_header
from .identify import Dataset, ExplorationConfig, ExploratoryAction, ManipulationModels, self_identify
from .mpc import (
    IntermediateTrajectory,
    MpcConfig,
    interpolate,
    nearest_waypoint,
    plan_step,
    write_rollout_dump,
)

DEFAULT_MAX_STEPS = 2000
COINCIDENT_TOLERANCE = 1e-9


@dataclass
class ReferenceTrajectory:
    """Keypoints the tracked point must reach in order."""

    keypoints: np.ndarray  # (T, 3), mm
    name: str = "custom"

    def __post_init__(self):
        self.keypoints = np.atleast_2d(np.asarray(self.keypoints, dtype=float))
        if self.keypoints.shape[0] < 1 or self.keypoints.shape[1] != 3:
            raise ValueError("keypoints must be a (T, 3) array with T >= 1")
        gaps = np.linalg.norm(np.diff(self.keypoints, axis=0), axis=1)
        if np.any(gaps <= COINCIDENT_TOLERANCE):
            raise ValueError("consecutive keypoints must not coincide")


@dataclass
class LoopConfig:
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    reach_tolerance: float = 1.0  # mm, keypoint arrival
    update_threshold: float = 2.0  # mm, model-update trigger
    max_steps: int = DEFAULT_MAX_STEPS
    seed: int = 0

    def __post_init__(self):
        if self.reach_tolerance <= 0:
            raise ValueError("reach_tolerance must be positive")
        if self.update_threshold <= self.reach_tolerance:
            raise ValueError("update_threshold must exceed reach_tolerance")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class StepRecord:
    step: int
    control: np.ndarray
    observed: np.ndarray  # tracked point right after the control
    error: float  # distance to nearest waypoint of the active segment
    updated: bool  # an adapt-mode identification fired at this step


@dataclass
class TaskResult:
    executed_trajectory: list[StepRecord]
    adapting_action_count: int
    initial_action_count: int
    mean_manipulation_error: float
    completed: bool
    steps_used: int
    initial_actions: list[ExploratoryAction] = field(default_factory=list)
    adapt_actions: list[tuple[int, list[ExploratoryAction]]] = field(default_factory=list)
    dataset: Dataset | None = field(default=None, repr=False)
    models: ManipulationModels | None = field(default=None, repr=False)


def manipulation_error(z: np.ndarray, traj: IntermediateTrajectory) -> float:
    """Distance from z to the nearest waypoint of the active segment."""
    j = nearest_waypoint(traj, z)
    return float(np.linalg.norm(np.asarray(z, dtype=float) - traj.waypoints[j]))


def run_task(
    plant,
    reference: ReferenceTrajectory,
    config: LoopConfig,
    initial_models: tuple[ManipulationModels, Dataset] | None = None,
    rollout_dump=None,
) -> TaskResult:
    """Execute one full tracking task and return its log and metrics.

    The first observed position is prepended to the keypoint sequence, so
    the first segment starts where the object actually is. When
    initial_models (a fitted model pair plus its dataset) is given, the
    initial exploratory actions are skipped and only adapt-mode updates add
    data. Pass an open file as rollout_dump to record every simulated
    rollout per step.
    """
    explore_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x657870]))
    mpc_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x6D7063]))

    z = plant.observe()
    keypoints = np.vstack([z[None, :], reference.keypoints])

    if initial_models is not None:
        models, dataset = initial_models
        initial_log: list[ExploratoryAction] = []
    else:
        if config.exploration.initial_actions < 2:
            raise ValueError("initial identification needs at least 2 exploratory actions")
        dataset = Dataset(control_dim=config.exploration.control_dim)
        models, dataset, initial_log = self_identify(
            plant, config.exploration, dataset, mode="initial", rng=explore_rng
        )
        z = plant.observe()

    records: list[StepRecord] = []
    adapt_log: list[tuple[int, list[ExploratoryAction]]] = []
    steps_used = 0
    completed = True
    update_blocked = False
    dump_header_written = False

    for i in range(1, len(keypoints)):
        x_prev, x_next = keypoints[i - 1], keypoints[i]
        segment = interpolate(x_prev, x_next, config.mpc.waypoint_spacing)
        while float(np.linalg.norm(x_next - z)) > config.reach_tolerance:
            if steps_used >= config.max_steps:
                completed = False
                break
            plan = plan_step(models, z, x_prev, x_next, config.mpc, mpc_rng)
            if rollout_dump is not None:
                write_rollout_dump(
                    rollout_dump, steps_used, plan.rollouts, header=not dump_header_written
                )
                dump_header_written = True
            if plan.at_segment_end:
                # Past the final waypoint but outside the reach tolerance:
                # fall back to a greedy inverse step toward the keypoint.
                u = models.inverse.predict_mean(x_next - z)
            else:
                u = plan.control
            z = plant.execute(u)
            steps_used += 1
            z_after = z
            eps = manipulation_error(z_after, segment)
            updated = False
            if eps > config.update_threshold and not update_blocked:
                models, dataset, actions = self_identify(
                    plant, config.exploration, dataset, mode="adapt", rng=explore_rng
                )
                adapt_log.append((steps_used - 1, actions))
                z = plant.observe()
                updated = True
            update_blocked = updated
            records.append(
                StepRecord(
                    step=steps_used - 1,
                    control=np.asarray(u, dtype=float),
                    observed=np.asarray(z_after, dtype=float),
                    error=eps,
                    updated=updated,
                )
            )
        if not completed:
            break

    errors = [r.error for r in records]
    return TaskResult(
        executed_trajectory=records,
        adapting_action_count=sum(len(a) for _, a in adapt_log),
        initial_action_count=len(initial_log),
        mean_manipulation_error=float(np.mean(errors)) if errors else 0.0,
        completed=completed,
        steps_used=steps_used,
        initial_actions=initial_log,
        adapt_actions=adapt_log,
        dataset=dataset,
        models=models,
    )


def trace_metrics(result: TaskResult) -> dict:
    """Aggregate a task result into a flat summary record."""
    errors = [r.error for r in result.executed_trajectory]
    return {
        "mean_error": float(np.mean(errors)) if errors else 0.0,
        "max_error": float(np.max(errors)) if errors else 0.0,
        "adapting_actions": result.adapting_action_count,
        "exploratory_actions": result.initial_action_count + result.adapting_action_count,
        "steps": result.steps_used,
        "completed": result.completed,
    }


def write_task_log(result: TaskResult, path) -> None:
    """One record per control step plus a trailing summary line."""
    records = result.executed_trajectory
    control_dim = len(records[0].control) if records else 0
    lines = [
        header_line("task-log", control_dim=control_dim, steps=result.steps_used),
        "# columns: step control.. observed.. error update",
    ]
    for r in records:
        lines.append(
            f"{r.step} {fmt_floats(r.control)} {fmt_floats(r.observed)} "
            f"{fmt_float(r.error)} {int(r.updated)}"
        )
    m = trace_metrics(result)
    lines.append(
        "# summary "
        f"mean_error={fmt_float(m['mean_error'])} "
        f"max_error={fmt_float(m['max_error'])} "
        f"adapting_actions={result.adapting_action_count} "
        f"initial_actions={result.initial_action_count} "
        f"steps={result.steps_used} "
        f"completed={int(result.completed)}"
    )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_task_log(path) -> tuple[list[StepRecord], dict[str, str]]:
    """Parse a task log back into step records and the summary fields."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty task log", 1)
    fields = parse_header(lines[0], "task-log")
    control_dim = int(fields["control_dim"])
    records: list[StepRecord] = []
    summary: dict[str, str] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("# summary"):
            for token in line.split()[2:]:
                key, _, value = token.partition("=")
                summary[key] = value
            continue
        if line.startswith("#"):
            continue
        tokens = line.split()
        expected = 1 + control_dim + 3 + 1 + 1
        if len(tokens) != expected:
            raise ParseError(f"expected {expected} fields, got {len(tokens)}", lineno)
        try:
            step = int(tokens[0])
            values = [float(t) for t in tokens[1:-1]]
            updated = bool(int(tokens[-1]))
        except ValueError:
            raise ParseError(f"malformed record {line!r}", lineno) from None
        records.append(
            StepRecord(
                step=step,
                control=np.array(values[:control_dim]),
                observed=np.array(values[control_dim : control_dim + 3]),
                error=values[control_dim + 3],
                updated=updated,
            )
        )
    return records, summary
