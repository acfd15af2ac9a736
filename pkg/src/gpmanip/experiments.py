"""Seeded experiment sweeps: grids of tracking runs with report files.

Each experiment executes repetitions x sweep_values x trajectories x presets
seeded runs and writes one summary row per run plus per-sweep-value
aggregate rows. Every run gets its own plant instance and random stream, so
runs are independent and reproducible individually.

Seed derivation (stable across versions): the run seed is

    seed_base XOR first-8-bytes(sha256("<value>|<trajectory>|<preset>|<rep>"))

masked to 63 bits, where <value> is the sweep value formatted as written in
the summary row ("single"/"transfer" for the non-sweep kinds).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .formats import ParseError, fmt_float, header_line, parse_header
from .identify import Dataset, transfer_models
from .loop import LoopConfig, TaskResult, run_task, trace_metrics, write_task_log
from .plant import Plant, PlantPreset, get_preset
from .trajectories import make_trajectory

KINDS = ("single", "initial_actions_sweep", "sigma_sweep", "transfer")

_COLUMNS = (
    "kind",
    "value",
    "trajectory",
    "preset",
    "repetition",
    "role",
    "seed",
    "status",
    "completed",
    "mean_error",
    "max_error",
    "adapting_actions",
    "initial_actions",
    "steps",
    "log",
)


@dataclass
class ExperimentSpec:
    kind: str
    trajectories: list[str]
    presets: list[str]  # for transfer: source first, then targets
    repetitions: int = 5
    sweep_values: list = field(default_factory=list)
    seed_base: int = 0
    output_path: str = "out"
    scale: float = 16.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.kind in ("initial_actions_sweep", "sigma_sweep") and not self.sweep_values:
            raise ValueError(f"{self.kind} needs non-empty sweep_values")
        if not self.trajectories:
            raise ValueError("at least one trajectory is required")
        if not self.presets:
            raise ValueError("at least one preset is required")
        if self.kind == "transfer" and len(self.presets) < 2:
            raise ValueError("transfer needs a source preset and at least one target")


@dataclass
class RunRow:
    kind: str
    value: str
    trajectory: str
    preset: str
    repetition: int
    role: str  # "run" | "source" | "target"
    seed: int
    status: str  # "ok" | "failed"
    completed: bool
    mean_error: float
    max_error: float
    adapting_actions: int
    initial_actions: int
    steps: int
    log: str


@dataclass
class ExperimentReport:
    rows: list[RunRow]
    failures: int
    summary_path: Path
    aggregate_path: Path


def derive_seed(seed_base: int, value: str, trajectory: str, preset: str, repetition: int) -> int:
    key = f"{value}|{trajectory}|{preset}|{repetition}".encode()
    digest = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
    return (seed_base ^ digest) & ((1 << 63) - 1)


def _custom_presets_lookup(custom: dict[str, PlantPreset] | None, name: str) -> PlantPreset:
    if custom and name in custom:
        return custom[name]
    return get_preset(name)


def _run_one(
    spec: ExperimentSpec,
    value: str,
    traj_name: str,
    preset_name: str,
    rep: int,
    config: LoopConfig,
    out_dir: Path,
    role: str = "run",
    initial_models=None,
    custom_presets: dict[str, PlantPreset] | None = None,
) -> tuple[RunRow, TaskResult | None]:
    log_rel = f"logs/run_{value}_{traj_name}_{preset_name}_{rep}.log"
    try:
        preset = _custom_presets_lookup(custom_presets, preset_name)
        plant = Plant(preset, config.seed)
        reference = make_trajectory(traj_name, scale=spec.scale)
        result = run_task(plant, reference, config, initial_models=initial_models)
        write_task_log(result, out_dir / log_rel)
        metrics = trace_metrics(result)
        row = RunRow(
            kind=spec.kind,
            value=value,
            trajectory=traj_name,
            preset=preset_name,
            repetition=rep,
            role=role,
            seed=config.seed,
            status="ok",
            completed=result.completed,
            mean_error=metrics["mean_error"],
            max_error=metrics["max_error"],
            adapting_actions=result.adapting_action_count,
            initial_actions=result.initial_action_count,
            steps=result.steps_used,
            log=log_rel,
        )
        return row, result
    except Exception:
        row = RunRow(
            kind=spec.kind,
            value=value,
            trajectory=traj_name,
            preset=preset_name,
            repetition=rep,
            role=role,
            seed=config.seed,
            status="failed",
            completed=False,
            mean_error=float("nan"),
            max_error=float("nan"),
            adapting_actions=0,
            initial_actions=0,
            steps=0,
            log="",
        )
        return row, None


def _config_for_value(spec: ExperimentSpec, base: LoopConfig, value) -> tuple[str, LoopConfig]:
    if spec.kind == "initial_actions_sweep":
        total = int(value)
        randoms = min(base.exploration.random_actions, total)
        exploration = replace(
            base.exploration, random_actions=randoms, extra_actions=total - randoms
        )
        return str(total), replace(base, exploration=exploration)
    if spec.kind == "sigma_sweep":
        mpc = replace(base.mpc, optimization_scale=float(value))
        return fmt_float(value), replace(base, mpc=mpc)
    return spec.kind, base


def run_experiment(
    spec: ExperimentSpec,
    base: LoopConfig,
    custom_presets: dict[str, PlantPreset] | None = None,
) -> ExperimentReport:
    """Execute the full run grid and write summary/aggregate report files."""
    out_dir = Path(spec.output_path)
    (out_dir / "logs").mkdir(parents=True, exist_ok=True)
    rows: list[RunRow] = []

    if spec.kind == "transfer":
        rows = _run_transfer(spec, base, out_dir, custom_presets)
    else:
        values = spec.sweep_values if spec.kind.endswith("_sweep") else [None]
        for value in values:
            value_str, config_v = _config_for_value(spec, base, value)
            for traj_name in spec.trajectories:
                for preset_name in spec.presets:
                    for rep in range(spec.repetitions):
                        seed = derive_seed(spec.seed_base, value_str, traj_name, preset_name, rep)
                        config = replace(config_v, seed=seed)
                        row, _ = _run_one(
                            spec, value_str, traj_name, preset_name, rep, config, out_dir,
                            custom_presets=custom_presets,
                        )
                        rows.append(row)

    failures = sum(1 for r in rows if r.status == "failed")
    summary_path = _write_summary(spec, rows, out_dir)
    aggregate_path = _write_aggregate(spec, rows, out_dir)
    return ExperimentReport(
        rows=rows, failures=failures, summary_path=summary_path, aggregate_path=aggregate_path
    )


def _run_transfer(
    spec: ExperimentSpec,
    base: LoopConfig,
    out_dir: Path,
    custom_presets: dict[str, PlantPreset] | None,
) -> list[RunRow]:
    """Source runs gather and save a dataset; target runs start from it."""
    (out_dir / "datasets").mkdir(exist_ok=True)
    source, targets = spec.presets[0], spec.presets[1:]
    rows: list[RunRow] = []
    for traj_name in spec.trajectories:
        for rep in range(spec.repetitions):
            seed = derive_seed(spec.seed_base, "transfer", traj_name, source, rep)
            row, result = _run_one(
                spec, "transfer", traj_name, source, rep, replace(base, seed=seed), out_dir,
                role="source", custom_presets=custom_presets,
            )
            rows.append(row)
            dataset_path = out_dir / "datasets" / f"dataset_{traj_name}_{rep}.txt"
            have_source = False
            if result is not None and result.dataset is not None:
                # Snapshot of the dataset right after initial identification:
                # initial actions are the first entries, adapt points follow.
                snapshot = Dataset(control_dim=result.dataset.control_dim)
                for u, dz in result.dataset.pairs[: result.initial_action_count]:
                    snapshot.append(u, dz)
                snapshot.save(dataset_path)
                have_source = True
            for target in targets:
                seed_t = derive_seed(spec.seed_base, "transfer", traj_name, target, rep)
                config_t = replace(base, seed=seed_t)
                if have_source:
                    loaded = Dataset.load(dataset_path)
                    init = transfer_models(loaded, config_t.exploration)
                    row_t, _ = _run_one(
                        spec, "transfer", traj_name, target, rep, config_t, out_dir,
                        role="target", initial_models=init, custom_presets=custom_presets,
                    )
                else:
                    row_t = RunRow(
                        kind=spec.kind, value="transfer", trajectory=traj_name, preset=target,
                        repetition=rep, role="target", seed=seed_t, status="failed",
                        completed=False, mean_error=float("nan"), max_error=float("nan"),
                        adapting_actions=0, initial_actions=0, steps=0, log="",
                    )
                rows.append(row_t)
    return rows


def _row_line(row: RunRow) -> str:
    return ",".join(
        [
            row.kind,
            row.value,
            row.trajectory,
            row.preset,
            str(row.repetition),
            row.role,
            str(row.seed),
            row.status,
            str(int(row.completed)),
            fmt_float(row.mean_error),
            fmt_float(row.max_error),
            str(row.adapting_actions),
            str(row.initial_actions),
            str(row.steps),
            row.log,
        ]
    )


def _write_summary(spec: ExperimentSpec, rows: list[RunRow], out_dir: Path) -> Path:
    path = out_dir / "summary.csv"
    ordered = sorted(rows, key=lambda r: (r.value, r.trajectory, r.preset, r.repetition, r.role))
    lines = [
        header_line("experiment", kind=spec.kind, repetitions=spec.repetitions),
        ",".join(_COLUMNS),
    ]
    lines += [_row_line(r) for r in ordered]
    path.write_text("\n".join(lines) + "\n")
    return path


def _aggregate_values(rows: list[RunRow]) -> list[str]:
    seen: list[str] = []
    for r in rows:
        if r.value not in seen:
            seen.append(r.value)
    return seen


def _write_aggregate(spec: ExperimentSpec, rows: list[RunRow], out_dir: Path) -> Path:
    path = out_dir / "aggregate.csv"
    lines = [
        header_line("experiment-aggregate", kind=spec.kind),
        "value,runs,completed,mean_error_mean,mean_error_min,mean_error_max,"
        "adapting_mean,adapting_min,adapting_max",
    ]
    for value in _aggregate_values(rows):
        ok = [r for r in rows if r.value == value and r.status == "ok"]
        total = sum(1 for r in rows if r.value == value)
        if ok:
            errs = np.array([r.mean_error for r in ok])
            adapt = np.array([r.adapting_actions for r in ok], dtype=float)
            lines.append(
                f"{value},{total},{sum(r.completed for r in ok)},"
                f"{fmt_float(errs.mean())},{fmt_float(errs.min())},{fmt_float(errs.max())},"
                f"{fmt_float(adapt.mean())},{fmt_float(adapt.min())},{fmt_float(adapt.max())}"
            )
        else:
            lines.append(f"{value},{total},0,nan,nan,nan,nan,nan,nan")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_summary(path) -> list[dict[str, str]]:
    """Parse a summary.csv back into row dicts (ParseError carries the line)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty report", 1)
    parse_header(lines[0], "experiment")
    if len(lines) < 2:
        raise ParseError("missing column header", 2)
    columns = lines[1].split(",")
    if columns != list(_COLUMNS):
        raise ParseError(f"unexpected columns {lines[1]!r}", 2)
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, got {len(parts)}", lineno)
        rows.append(dict(zip(columns, parts)))
    return rows


def emit_plotdata(summary_path, output_path) -> Path:
    """Per-sweep-value plot table: value, mean error, error spread, mean adapting."""
    rows = read_summary(summary_path)
    lines = [header_line("plotdata"), "value,mean_error,error_spread,mean_adapting_actions"]
    values: list[str] = []
    for r in rows:
        if r["value"] not in values:
            values.append(r["value"])
    for value in values:
        ok = [r for r in rows if r["value"] == value and r["status"] == "ok"]
        if not ok:
            lines.append(f"{value},nan,nan,nan")
            continue
        errs = np.array([float(r["mean_error"]) for r in ok])
        adapt = np.array([float(r["adapting_actions"]) for r in ok])
        lines.append(
            f"{value},{fmt_float(errs.mean())},{fmt_float(errs.std())},{fmt_float(adapt.mean())}"
        )
    output_path = Path(output_path)
    output_path.write_text("\n".join(lines) + "\n")
    return output_path
