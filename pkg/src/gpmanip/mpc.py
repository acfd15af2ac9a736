"""Random-shooting model predictive control along interpolated waypoints.

One control per time step: simulate Q stochastic rollouts through the
identified model pair along the current intermediate trajectory and return
the first control of the rollout with the smallest accumulated distance to
the waypoints. Rollouts are mutually independent given the (immutable)
models; each owns a seed-derived random substream so results do not depend
on evaluation order.

Rollout recursion from the nearest waypoint index j at state z_0 = z_t,
for k = 0 .. L-1 with L = min(horizon, waypoints after j):

    u_k     = inverse(w[j+k+1] - z_k) + xi_k,   xi_k ~ N(0, scale * I)
    z_{k+1} = forward(u_k) + z_k

and cost = sum_{k=0..L} ||z_k - w[j+k]||. The control targets the waypoint
one past the one the state is scored against, so the zero-noise greedy case
makes progress instead of re-aiming at the waypoint it already sits on; the
k = 0 cost term is constant across rollouts and kept for a complete sum.
The optimization scale is a variance: xi has standard deviation sqrt(scale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import fmt_float, header_line

DEFAULT_WAYPOINT_SPACING = 0.5


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 5  # max prediction steps per rollout
    num_rollouts: int = 50
    optimization_scale: float = 0.1  # variance of the control perturbation
    waypoint_spacing: float = DEFAULT_WAYPOINT_SPACING  # mm between waypoints

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.num_rollouts < 1:
            raise ValueError("num_rollouts must be at least 1")
        if self.optimization_scale < 0:
            raise ValueError("optimization_scale must be non-negative")
        if self.waypoint_spacing <= 0:
            raise ValueError("waypoint_spacing must be positive")


@dataclass
class IntermediateTrajectory:
    """Linearly interpolated waypoints between two consecutive keypoints."""

    waypoints: np.ndarray  # (M, 3)
    endpoints: tuple[np.ndarray, np.ndarray]

    def __len__(self) -> int:
        return len(self.waypoints)


@dataclass
class Rollout:
    predicted_controls: np.ndarray  # (L, C)
    predicted_states: np.ndarray  # (L + 1, 3), starts at z_t
    cost: float


@dataclass
class StepPlan:
    """Everything one MPC step computed; `control` is what gets executed."""

    control: np.ndarray
    nearest_index: int
    horizon: int
    best_index: int
    rollouts: list[Rollout]
    trajectory: IntermediateTrajectory

    @property
    def at_segment_end(self) -> bool:
        """Nearest waypoint is the segment's last; there is nothing to roll out."""
        return self.horizon == 0


def interpolate(x_prev: np.ndarray, x_next: np.ndarray, spacing: float) -> IntermediateTrajectory:
    """Equally spaced waypoints from x_prev to x_next, spacing at most `spacing`."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    x_prev = np.asarray(x_prev, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    dist = float(np.linalg.norm(x_next - x_prev))
    m = max(2, int(np.ceil(dist / spacing)) + 1)
    steps = np.linspace(0.0, 1.0, m)[:, None]
    waypoints = x_prev[None, :] * (1.0 - steps) + x_next[None, :] * steps
    waypoints[0] = x_prev
    waypoints[-1] = x_next
    return IntermediateTrajectory(waypoints=waypoints, endpoints=(x_prev, x_next))


def nearest_waypoint(traj: IntermediateTrajectory, z: np.ndarray) -> int:
    """Index of the waypoint closest to z; exact ties break toward the larger index."""
    dists = np.linalg.norm(traj.waypoints - np.asarray(z, dtype=float), axis=1)
    return len(dists) - 1 - int(np.argmin(dists[::-1]))


def _prediction_steps(config: MpcConfig, traj: IntermediateTrajectory, j: int) -> int:
    return min(config.horizon, len(traj) - 1 - j)


def rollout(
    models,
    traj: IntermediateTrajectory,
    j: int,
    z_t: np.ndarray,
    steps: int,
    optimization_scale: float,
    rng: np.random.Generator,
) -> Rollout:
    """Simulate one stochastic rollout of `steps` predicted controls.

    The (steps x C) noise block is drawn up front (it does not depend on the
    propagated state), so a rollout is a pure function of its substream.
    """
    z_t = np.asarray(z_t, dtype=float)
    w = traj.waypoints
    c_dim = models.inverse.output_dim
    noise = np.sqrt(optimization_scale) * rng.standard_normal((steps, c_dim))
    controls = np.empty((steps, c_dim))
    states = np.empty((steps + 1, 3))
    states[0] = z_t
    cost = float(np.linalg.norm(z_t - w[j]))
    z = z_t
    for k in range(steps):
        u = models.inverse.predict_mean(w[j + k + 1] - z) + noise[k]
        z = models.forward.predict_mean(u) + z
        controls[k] = u
        states[k + 1] = z
        cost += float(np.linalg.norm(z - w[j + k + 1]))
    return Rollout(predicted_controls=controls, predicted_states=states, cost=cost)


def simulate_rollouts(
    models,
    traj: IntermediateTrajectory,
    j: int,
    z_t: np.ndarray,
    config: MpcConfig,
    rng: np.random.Generator,
) -> list[Rollout]:
    """Simulate all Q rollouts in lockstep (batched model evaluation).

    Equivalent to Q independent `rollout` calls on the Q substreams spawned
    from `rng`, which is what a concurrent evaluation would do.
    """
    z_t = np.asarray(z_t, dtype=float)
    w = traj.waypoints
    q_n = config.num_rollouts
    steps = _prediction_steps(config, traj, j)
    c_dim = models.inverse.output_dim
    substreams = rng.spawn(q_n)
    if steps == 0:
        base = float(np.linalg.norm(z_t - w[j]))
        empty = np.empty((0, c_dim))
        return [
            Rollout(predicted_controls=empty.copy(), predicted_states=z_t[None, :].copy(), cost=base)
            for _ in range(q_n)
        ]
    sd = np.sqrt(config.optimization_scale)
    noise = np.stack([sd * sub.standard_normal((steps, c_dim)) for sub in substreams])
    controls = np.empty((q_n, steps, c_dim))
    states = np.empty((q_n, steps + 1, 3))
    states[:, 0] = z_t
    costs = np.full(q_n, np.linalg.norm(z_t - w[j]))
    z = np.broadcast_to(z_t, (q_n, 3)).copy()
    for k in range(steps):
        u = models.inverse.predict_mean_batch(w[j + k + 1][None, :] - z) + noise[:, k, :]
        z = models.forward.predict_mean_batch(u) + z
        controls[:, k, :] = u
        states[:, k + 1, :] = z
        costs += np.linalg.norm(z - w[j + k + 1], axis=1)
    return [
        Rollout(predicted_controls=controls[q], predicted_states=states[q], cost=float(costs[q]))
        for q in range(q_n)
    ]


def plan_step(
    models,
    z_t: np.ndarray,
    x_prev: np.ndarray,
    x_next: np.ndarray,
    config: MpcConfig,
    rng: np.random.Generator,
) -> StepPlan:
    """Full MPC step: interpolate, roll out, select the cheapest rollout.

    When the nearest waypoint is already the segment's last (nothing to roll
    out), the plan carries the zero control and flags `at_segment_end`; the
    caller's reach-tolerance check governs keypoint advancement.
    """
    traj = interpolate(x_prev, x_next, config.waypoint_spacing)
    j = nearest_waypoint(traj, z_t)
    steps = _prediction_steps(config, traj, j)
    rollouts = simulate_rollouts(models, traj, j, z_t, config, rng)
    best = int(np.argmin([r.cost for r in rollouts]))
    if steps == 0:
        control = np.zeros(models.inverse.output_dim)
    else:
        control = rollouts[best].predicted_controls[0].copy()
    return StepPlan(
        control=control,
        nearest_index=j,
        horizon=steps,
        best_index=best,
        rollouts=rollouts,
        trajectory=traj,
    )


def mpc_step(
    models,
    z_t: np.ndarray,
    x_prev: np.ndarray,
    x_next: np.ndarray,
    config: MpcConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """The control to execute now (first control of the cheapest rollout)."""
    return plan_step(models, z_t, x_prev, x_next, config, rng).control


def write_rollout_dump(fh, step_index: int, rollouts: list[Rollout], header: bool = False) -> None:
    """Append one step's rollouts as text records: step, q, cost, states."""
    if header:
        fh.write(header_line("mpc-rollouts") + "\n")
    for q, r in enumerate(rollouts):
        states = ";".join(",".join(fmt_float(v) for v in s) for s in r.predicted_states)
        fh.write(f"{step_index} {q} {fmt_float(r.cost)} {states}\n")
