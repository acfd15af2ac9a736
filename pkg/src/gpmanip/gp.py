"""RBF-kernel Gaussian process mean regression.

Fits exact GP posterior-mean predictors between control space and motion
space. Each output dimension is regressed independently against a shared
isotropic squared-exponential kernel, so one Cholesky factorization of the
Gram matrix serves all outputs. Predictions revert to the zero vector far
from the training data (zero-mean prior: small controls produce small
motions, so zero is the physically sensible prior).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

DEFAULT_JITTER = 1e-6
JITTER_ESCALATION = 10.0
MAX_JITTER_RETRIES = 3


class IllConditionedDataError(RuntimeError):
    """Gram matrix stayed numerically indefinite after jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the squared-exponential kernel.

    length_scale is in input-space distance units, noise_jitter is added to
    the Gram diagonal (output-variance units).
    """

    length_scale: float
    noise_jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        if not self.length_scale > 0.0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if self.noise_jitter < 0.0:
            raise ValueError(f"noise_jitter must be non-negative, got {self.noise_jitter}")


def rbf_kernel(x_p: np.ndarray, x_q: np.ndarray, params: KernelParams) -> float:
    """Evaluate exp(-||x_p - x_q||^2 / (2 * length_scale^2)).

    Symmetric in its arguments, in (0, 1], equal to 1 iff x_p == x_q.
    """
    x_p = np.asarray(x_p, dtype=float)
    x_q = np.asarray(x_q, dtype=float)
    if x_p.shape != x_q.shape:
        raise ValueError(f"dimension mismatch: {x_p.shape} vs {x_q.shape}")
    sq = float(np.sum((x_p - x_q) ** 2))
    return float(np.exp(-sq / (2.0 * params.length_scale**2)))


def _gram(inputs: np.ndarray, params: KernelParams) -> np.ndarray:
    sq = np.sum((inputs[:, None, :] - inputs[None, :, :]) ** 2, axis=-1)
    return np.exp(-sq / (2.0 * params.length_scale**2))


def _cross(queries: np.ndarray, inputs: np.ndarray, params: KernelParams) -> np.ndarray:
    sq = np.sum((queries[:, None, :] - inputs[None, :, :]) ** 2, axis=-1)
    return np.exp(-sq / (2.0 * params.length_scale**2))


@dataclass
class GPModel:
    """A fitted GP mean predictor.

    dual_weights equals (K + jitter*I)^-1 @ targets for the Gram matrix K of
    the training inputs. params reflects the jitter actually applied, which
    may exceed the requested one if the factorization needed escalation.
    """

    inputs: np.ndarray  # (n, D_in)
    targets: np.ndarray  # (n, D_out)
    params: KernelParams
    dual_weights: np.ndarray = field(repr=False)  # (n, D_out)

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def predict_mean(self, x: np.ndarray) -> np.ndarray:
        """Posterior mean at a single query point, shape (D_out,)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected query of shape ({self.input_dim},), got {x.shape}")
        return self.predict_mean_batch(x[None, :])[0]

    def predict_mean_batch(self, queries: np.ndarray) -> np.ndarray:
        """Posterior mean at m query points: (m, D_in) -> (m, D_out)."""
        queries = np.asarray(queries, dtype=float)
        if queries.ndim != 2 or queries.shape[1] != self.input_dim:
            raise ValueError(
                f"expected queries of shape (m, {self.input_dim}), got {queries.shape}"
            )
        return _cross(queries, self.inputs, self.params) @ self.dual_weights


def _as_sample_matrix(data: np.ndarray) -> np.ndarray:
    """Coerce to (n_samples, dim); a 1-D array means n scalar samples."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ValueError(f"expected (n, dim) samples, got shape {data.shape}")
    return data


def fit(
    inputs: np.ndarray,
    targets: np.ndarray,
    params: KernelParams,
    max_retries: int = MAX_JITTER_RETRIES,
) -> GPModel:
    """Fit the GP mean predictor k(x,.)^T (K + jitter*I)^-1 Y.

    The symmetric positive-definite factorization retries with the jitter
    escalated x10 up to max_retries times; duplicated exploratory controls
    must not crash a run. If every attempt fails (e.g. a singular Gram with
    zero jitter), raises IllConditionedDataError.
    """
    inputs = _as_sample_matrix(inputs)
    targets = _as_sample_matrix(targets)
    if inputs.size == 0 or targets.size == 0:
        raise ValueError("fit requires at least one training pair")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError(
            f"inputs and targets disagree on sample count: {inputs.shape[0]} vs {targets.shape[0]}"
        )
    if not (np.isfinite(inputs).all() and np.isfinite(targets).all()):
        raise ValueError("training data must be finite")

    gram = _gram(inputs, params)
    eye = np.eye(len(inputs))
    jitter = params.noise_jitter
    for attempt in range(max_retries + 1):
        try:
            factor = cho_factor(gram + jitter * eye, lower=True)
        except np.linalg.LinAlgError:
            jitter *= JITTER_ESCALATION
            continue
        dual = cho_solve(factor, targets)
        used = params if attempt == 0 else KernelParams(params.length_scale, jitter)
        return GPModel(inputs=inputs, targets=targets, params=used, dual_weights=dual)
    raise IllConditionedDataError(
        f"Gram matrix not positive definite after {max_retries} jitter escalations "
        f"(final jitter {jitter / JITTER_ESCALATION:g})"
    )


def predict_mean(model: GPModel, x: np.ndarray) -> np.ndarray:
    """Function-call form of GPModel.predict_mean."""
    return model.predict_mean(x)
