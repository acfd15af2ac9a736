"""Exploratory-action data acquisition and local model identification.

Maintains the (control, motion) training dataset, generates random and
density-guided exploratory controls, executes them against a plant, and fits
the local model pair: forward (control -> motion) and inverse (motion ->
control), both regressed from the same dataset with domain and codomain
swapped. The two models are learned independently; composing them does not
return the identity and nothing here assumes it does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gp
from .formats import ParseError, fmt_floats, header_line, parse_header

MOTION_DIM = 3
DEFAULT_LENGTH_SCALE_FACTOR = 0.5


class DegenerateDatasetError(ValueError):
    """Every motion sample is duplicated; density-guided selection is undefined."""


@dataclass
class ExplorationConfig:
    """Counts and range of exploratory actions.

    random_actions are drawn uniformly from [-exploration_range,
    exploration_range] per component; extra_actions are density-guided
    midpoints appended during initial identification; adapt_actions is the
    per-update count of density-guided actions.
    """

    random_actions: int = 5
    extra_actions: int = 15
    adapt_actions: int = 3
    exploration_range: float = 1.0
    control_dim: int = 2

    def __post_init__(self):
        if min(self.random_actions, self.extra_actions, self.adapt_actions) < 0:
            raise ValueError("action counts must be non-negative")
        if self.exploration_range < 0:
            raise ValueError("exploration_range must be non-negative")
        if self.control_dim < 1:
            raise ValueError("control_dim must be positive")

    @property
    def initial_actions(self) -> int:
        return self.random_actions + self.extra_actions


class Dataset:
    """Ordered (control, motion) pairs; optionally FIFO-capped at `capacity`."""

    def __init__(self, control_dim: int | None = None, capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive when set")
        self.control_dim = control_dim
        self.capacity = capacity
        self.pairs: list[tuple[np.ndarray, np.ndarray]] = []

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def append(self, control: np.ndarray, motion: np.ndarray) -> None:
        control = np.asarray(control, dtype=float)
        motion = np.asarray(motion, dtype=float)
        if self.control_dim is None:
            if control.ndim != 1 or control.size == 0:
                raise ValueError("control must be a non-empty vector")
            self.control_dim = control.shape[0]
        if control.shape != (self.control_dim,):
            raise ValueError(f"control must have dimension {self.control_dim}, got {control.shape}")
        if motion.shape != (MOTION_DIM,):
            raise ValueError(f"motion must have dimension {MOTION_DIM}, got {motion.shape}")
        if not (np.isfinite(control).all() and np.isfinite(motion).all()):
            raise ValueError("control and motion must be finite")
        self.pairs.append((control.copy(), motion.copy()))
        if self.capacity is not None and len(self.pairs) > self.capacity:
            del self.pairs[0]

    def controls(self) -> np.ndarray:
        return np.array([u for u, _ in self.pairs], dtype=float)

    def motions(self) -> np.ndarray:
        return np.array([dz for _, dz in self.pairs], dtype=float)

    def copy(self) -> "Dataset":
        out = Dataset(control_dim=self.control_dim, capacity=self.capacity)
        out.pairs = [(u.copy(), dz.copy()) for u, dz in self.pairs]
        return out

    def save(self, path) -> None:
        """Write as line-oriented text; floats round-trip bitwise."""
        if self.control_dim is None:
            raise ValueError("cannot save a dataset with no pairs and no declared control_dim")
        lines = [header_line("dataset", control_dim=self.control_dim, pairs=len(self.pairs))]
        for u, dz in self.pairs:
            lines.append(fmt_floats(u) + " " + fmt_floats(dz))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise ParseError("empty dataset file", 1)
        fields = parse_header(lines[0], "dataset")
        try:
            control_dim = int(fields["control_dim"])
            declared = int(fields["pairs"])
        except (KeyError, ValueError):
            raise ParseError("header must carry integer control_dim and pairs", 1) from None
        out = cls(control_dim=control_dim)
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                values = [float(tok) for tok in line.split()]
            except ValueError:
                raise ParseError(f"non-numeric record {line!r}", lineno) from None
            if len(values) != control_dim + MOTION_DIM:
                raise ParseError(
                    f"expected {control_dim + MOTION_DIM} values, got {len(values)}", lineno
                )
            out.append(values[:control_dim], values[control_dim:])
        if len(out) != declared:
            raise ParseError(f"header declares {declared} pairs, file holds {len(out)}")
        return out


@dataclass
class ManipulationModels:
    """The identified local model pair over one dataset."""

    forward: gp.GPModel  # control -> motion
    inverse: gp.GPModel  # motion -> control
    source_dataset_size: int


@dataclass
class ExploratoryAction:
    kind: str  # "random" | "selected"
    control: np.ndarray
    motion: np.ndarray


def random_control(config: ExplorationConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw per component from [-exploration_range, exploration_range]."""
    r = config.exploration_range
    return rng.uniform(-r, r, size=config.control_dim)


def _nearest_neighbor_distances(motions: np.ndarray) -> np.ndarray:
    diffs = motions[:, None, :] - motions[None, :, :]
    dists = np.sqrt(np.sum(diffs**2, axis=-1))
    np.fill_diagonal(dists, np.inf)
    return dists.min(axis=1)


def local_density(dataset: Dataset, i: int) -> float:
    """Reciprocal distance from motion i to its nearest neighbor in motion space.

    Duplicated motions give +inf; the selector skips exact duplicates.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("local density needs at least 2 data points")
    if not 0 <= i < n:
        raise ValueError(f"index {i} out of range for dataset of size {n}")
    nn = _nearest_neighbor_distances(dataset.motions())[i]
    if nn == 0.0:
        return np.inf
    return float(1.0 / nn)


def select_exploratory_control(dataset: Dataset) -> np.ndarray:
    """Midpoint of the controls of the lowest-density point and its nearest neighbor.

    Ties in either argmin break toward the lowest index. Raises
    DegenerateDatasetError when every motion is duplicated (all densities
    infinite), in which case callers fall back to a random control.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("selection needs at least 2 data points")
    motions = dataset.motions()
    nn = _nearest_neighbor_distances(motions)
    if np.all(nn == 0.0):
        raise DegenerateDatasetError("all motions duplicated; no lowest-density point")
    with np.errstate(divide="ignore"):
        densities = 1.0 / nn
    p = int(np.argmin(densities))
    dists = np.sqrt(np.sum((motions - motions[p]) ** 2, axis=1))
    dists[p] = np.inf
    p_nn = int(np.argmin(dists))
    controls = dataset.controls()
    return 0.5 * (controls[p] + controls[p_nn])


def default_kernel(exploration_range: float) -> gp.KernelParams:
    """Fixed default: length scale of half the exploration range, jitter 1e-6."""
    return gp.KernelParams(length_scale=DEFAULT_LENGTH_SCALE_FACTOR * exploration_range)


def fit_manipulation_models(
    dataset: Dataset,
    exploration_range: float | None = None,
    forward_kernel: gp.KernelParams | None = None,
    inverse_kernel: gp.KernelParams | None = None,
) -> ManipulationModels:
    """Fit the forward and inverse models from the same dataset."""
    if len(dataset) == 0:
        raise ValueError("cannot fit models from an empty dataset")
    if forward_kernel is None or inverse_kernel is None:
        if exploration_range is None or exploration_range <= 0:
            raise ValueError("default kernels need a positive exploration_range")
        shared = default_kernel(exploration_range)
        forward_kernel = forward_kernel or shared
        inverse_kernel = inverse_kernel or shared
    controls = dataset.controls()
    motions = dataset.motions()
    forward = gp.fit(controls, motions, forward_kernel)
    inverse = gp.fit(motions, controls, inverse_kernel)
    return ManipulationModels(forward=forward, inverse=inverse, source_dataset_size=len(dataset))


def self_identify(
    plant,
    config: ExplorationConfig,
    dataset: Dataset,
    mode: str = "initial",
    rng: np.random.Generator | None = None,
    forward_kernel: gp.KernelParams | None = None,
    inverse_kernel: gp.KernelParams | None = None,
) -> tuple[ManipulationModels, Dataset, list[ExploratoryAction]]:
    """Gather exploratory data on the plant and fit the model pair.

    Initial mode executes random_actions uniform draws then extra_actions
    density-guided midpoints; adapt mode executes adapt_actions density-
    guided midpoints only (no random draws) on an existing dataset of at
    least 2 points. The density-guided selection is recomputed after every
    insertion, never batched. The dataset is mutated in place and returned
    together with the ordered action log.
    """
    if mode not in ("initial", "adapt"):
        raise ValueError(f"mode must be 'initial' or 'adapt', got {mode!r}")
    if rng is None:
        rng = np.random.default_rng()
    if mode == "initial":
        n_random, n_selected = config.random_actions, config.extra_actions
        if n_selected > 0 and len(dataset) + n_random < 2:
            raise ValueError("density-guided selection needs at least 2 prior data points")
    else:
        n_random, n_selected = 0, config.adapt_actions
        if len(dataset) < 2:
            raise ValueError("adapt mode needs a dataset of at least 2 points")

    actions: list[ExploratoryAction] = []
    z_prev = plant.observe()
    for _ in range(n_random):
        u = random_control(config, rng)
        z = plant.execute(u)
        motion = z - z_prev
        z_prev = z
        dataset.append(u, motion)
        actions.append(ExploratoryAction("random", u, motion))
    for _ in range(n_selected):
        try:
            u = select_exploratory_control(dataset)
            kind = "selected"
        except DegenerateDatasetError:
            u = random_control(config, rng)
            kind = "random"
        z = plant.execute(u)
        motion = z - z_prev
        z_prev = z
        dataset.append(u, motion)
        actions.append(ExploratoryAction(kind, u, motion))

    models = fit_manipulation_models(
        dataset,
        exploration_range=config.exploration_range,
        forward_kernel=forward_kernel,
        inverse_kernel=inverse_kernel,
    )
    return models, dataset, actions


def transfer_models(
    saved: Dataset,
    config: ExplorationConfig,
    forward_kernel: gp.KernelParams | None = None,
    inverse_kernel: gp.KernelParams | None = None,
) -> tuple[ManipulationModels, Dataset]:
    """Initialize the model pair from a dataset gathered on another setup.

    The dataset is fitted unchanged; the receiving control loop then skips
    its initial exploratory actions.
    """
    if len(saved) == 0:
        raise ValueError("cannot transfer from an empty dataset")
    if saved.control_dim != config.control_dim:
        raise ValueError(
            f"saved dataset has control_dim {saved.control_dim}, config expects {config.control_dim}"
        )
    models = fit_manipulation_models(
        saved,
        exploration_range=config.exploration_range,
        forward_kernel=forward_kernel,
        inverse_kernel=inverse_kernel,
    )
    return models, saved
