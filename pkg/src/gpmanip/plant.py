"""Synthetic ground-truth hand-object plant.

Maps executed controls to tracked-point motions through a hidden, drifting,
nonlinear state. The controller never sees the hidden state or the preset
maps, only noisy position observations. Presets emulate different
object/grasp setups; `preset-4` is the near-linear default used in sweeps
and `drifting` is the high-drift regime that forces online model updates.

Dynamics of one executed control u:

    scale   = 1 + MODULATION_DEPTH * tanh(P @ (hidden - hidden_ref))
    dz      = (base_jacobian * scale) @ u
              + nonlinearity_gain * q(u) + process noise
    hidden += drift_rate * tanh(W @ u)
    pom    += dz          (third component clamped to 0 when planar)

where P, W and the quadratic forms behind q are fixed smooth maps derived
deterministically from the preset name, and q(0) = 0. The modulation is
anchored at the reset configuration, so a preset with drift_rate = 0 is
exactly affine in its preset maps. Each quadratic form has unit spectral
norm, so ||dz - J u|| <= nonlinearity_gain * sqrt(3) * ||u||^2.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .formats import ParseError, fmt_float, fmt_floats, header_line, parse_header

MODULATION_DEPTH = 0.35
HIDDEN_RESET_SCALE = 0.1
DEFAULT_NOISE_STD = 0.05


@dataclass(frozen=True)
class PlantPreset:
    """Parameters of one object/grasp analogue."""

    name: str
    base_jacobian: tuple[tuple[float, ...], ...]  # 3 rows x control_dim, mm per control unit
    nonlinearity_gain: float
    drift_rate: float
    noise_std: float = DEFAULT_NOISE_STD
    planar: bool = True
    control_dim: int = 2
    hidden_dim: int = 4

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        jac = np.asarray(self.base_jacobian, dtype=float)
        if jac.shape != (3, self.control_dim):
            raise ValueError(f"base_jacobian must be 3x{self.control_dim}, got {jac.shape}")
        if np.linalg.matrix_rank(jac) < self.control_dim:
            raise ValueError("base_jacobian must have full column rank")

    @property
    def jacobian(self) -> np.ndarray:
        return np.asarray(self.base_jacobian, dtype=float)


@dataclass
class PlantState:
    hidden: np.ndarray  # (hidden_dim,)
    pom: np.ndarray  # (3,) tracked-point position, mm
    step_count: int = 0
    hidden_ref: np.ndarray = field(default=None, repr=False)  # reset configuration

    def __post_init__(self):
        if self.hidden_ref is None:
            self.hidden_ref = self.hidden.copy()


def _preset_seed(preset: PlantPreset) -> int:
    key = f"{preset.name}|{preset.control_dim}|{preset.hidden_dim}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


class _DerivedMaps:
    """Fixed smooth maps behind one preset, derived from a stable name hash."""

    def __init__(self, preset: PlantPreset):
        rng = np.random.default_rng(_preset_seed(preset))
        c, n = preset.control_dim, preset.hidden_dim
        self.modulation = rng.standard_normal((3, c, n)) / np.sqrt(n)
        self.drift_map = rng.standard_normal((n, c)) / np.sqrt(c)
        quads = []
        for _ in range(3):
            raw = rng.standard_normal((c, c))
            sym = 0.5 * (raw + raw.T)
            quads.append(sym / np.abs(np.linalg.eigvalsh(sym)).max())
        self.quadratics = np.stack(quads)  # (3, c, c), each unit spectral norm

    def jacobian(self, preset: PlantPreset, state: PlantState) -> np.ndarray:
        offset = state.hidden - state.hidden_ref
        scale = 1.0 + MODULATION_DEPTH * np.tanh(self.modulation @ offset)
        return preset.jacobian * scale

    def quadratic(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("icd,c,d->i", self.quadratics, u, u)


def reset(preset: PlantPreset, seed: int) -> PlantState:
    """Draw the initial hidden configuration; tracked point starts at the origin."""
    rng = np.random.default_rng(seed)
    hidden = HIDDEN_RESET_SCALE * rng.standard_normal(preset.hidden_dim)
    return PlantState(hidden=hidden, pom=np.zeros(3))


def step(
    preset: PlantPreset,
    state: PlantState,
    u: np.ndarray,
    rng: np.random.Generator,
    _maps: _DerivedMaps | None = None,
) -> tuple[PlantState, np.ndarray]:
    """Execute one control; returns the new state and the observed position."""
    u = np.asarray(u, dtype=float)
    if u.shape != (preset.control_dim,):
        raise ValueError(f"control must have dimension {preset.control_dim}, got {u.shape}")
    if not np.isfinite(u).all():
        raise ValueError("control must be finite")
    maps = _maps if _maps is not None else _DerivedMaps(preset)

    dz = maps.jacobian(preset, state) @ u
    dz = dz + preset.nonlinearity_gain * maps.quadratic(u)
    if preset.noise_std > 0:
        dz = dz + preset.noise_std * rng.standard_normal(3)
    hidden = state.hidden + preset.drift_rate * np.tanh(maps.drift_map @ u)
    pom = state.pom + dz
    if preset.planar:
        pom[2] = 0.0
    new_state = PlantState(
        hidden=hidden, pom=pom, step_count=state.step_count + 1, hidden_ref=state.hidden_ref
    )
    return new_state, _observe(preset, new_state, rng)


def _observe(preset: PlantPreset, state: PlantState, rng: np.random.Generator) -> np.ndarray:
    z = state.pom.copy()
    if preset.noise_std > 0:
        z = z + preset.noise_std * rng.standard_normal(3)
    if preset.planar:
        z[2] = 0.0
    return z


class Plant:
    """Stateful convenience wrapper: one instance per run, strictly sequential."""

    # Noise stream tag: keeps the plant's draws disjoint from any controller
    # stream derived from the same seed.
    _STREAM_TAG = 0x706C74

    def __init__(self, preset: PlantPreset, seed: int):
        self.preset = preset
        self._maps = _DerivedMaps(preset)
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, self._STREAM_TAG]))
        self._state = reset(preset, seed)

    @property
    def control_dim(self) -> int:
        return self.preset.control_dim

    @property
    def executions(self) -> int:
        return self._state.step_count

    def execute(self, u: np.ndarray) -> np.ndarray:
        """Apply one control and return the observed position after it."""
        self._state, z = step(self.preset, self._state, u, self._rng, _maps=self._maps)
        return z

    def observe(self) -> np.ndarray:
        """Current observed position (fresh observation noise each call)."""
        return _observe(self.preset, self._state, self._rng)

    def debug_state(self) -> PlantState:
        """Test-only accessor: ground truth hidden from the controller."""
        return self._state

    def debug_maps(self) -> _DerivedMaps:
        """Test-only accessor to the fixed preset maps."""
        return self._maps


PRESETS: dict[str, PlantPreset] = {
    "preset-1": PlantPreset(
        name="preset-1",
        base_jacobian=((0.95, 0.32), (-0.28, 0.88), (0.0, 0.0)),
        nonlinearity_gain=0.08,
        drift_rate=0.001,
    ),
    "preset-2": PlantPreset(
        name="preset-2",
        base_jacobian=((1.20, 0.05), (0.12, 1.10), (0.0, 0.0)),
        nonlinearity_gain=0.12,
        drift_rate=0.002,
    ),
    "preset-3": PlantPreset(
        name="preset-3",
        base_jacobian=((0.85, -0.20), (0.25, 1.00), (0.0, 0.0)),
        nonlinearity_gain=0.10,
        drift_rate=0.001,
    ),
    "preset-4": PlantPreset(
        name="preset-4",
        base_jacobian=((1.05, 0.15), (-0.10, 0.95), (0.0, 0.0)),
        nonlinearity_gain=0.03,
        drift_rate=0.0005,
    ),
    "preset-5": PlantPreset(
        name="preset-5",
        base_jacobian=((1.15, 0.30), (-0.35, 0.80), (0.0, 0.0)),
        nonlinearity_gain=0.15,
        drift_rate=0.002,
    ),
    "drifting": PlantPreset(
        name="drifting",
        base_jacobian=((1.00, 0.20), (-0.15, 0.90), (0.0, 0.0)),
        nonlinearity_gain=0.08,
        drift_rate=0.02,
    ),
}


def get_preset(name: str) -> PlantPreset:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown plant preset {name!r} (known: {known})") from None


def write_preset(preset: PlantPreset, path) -> None:
    lines = [header_line("plant-preset")]
    lines.append(f"name {preset.name}")
    lines.append(f"control_dim {preset.control_dim}")
    lines.append(f"hidden_dim {preset.hidden_dim}")
    for row in preset.jacobian:
        lines.append("jacobian " + fmt_floats(row))
    lines.append(f"nonlinearity_gain {fmt_float(preset.nonlinearity_gain)}")
    lines.append(f"drift_rate {fmt_float(preset.drift_rate)}")
    lines.append(f"noise_std {fmt_float(preset.noise_std)}")
    lines.append(f"planar {int(preset.planar)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_preset(path) -> PlantPreset:
    """Read a preset definition (name, matrix rows, scalars, flags)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty preset file", 1)
    parse_header(lines[0], "plant-preset")
    fields: dict[str, str] = {}
    jac_rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise ParseError(f"expected 'key value', got {line!r}", lineno)
        if key == "jacobian":
            try:
                jac_rows.append([float(tok) for tok in value.split()])
            except ValueError:
                raise ParseError(f"bad jacobian row {value!r}", lineno) from None
        else:
            fields[key] = value
    try:
        return PlantPreset(
            name=fields["name"],
            base_jacobian=tuple(tuple(row) for row in jac_rows),
            nonlinearity_gain=float(fields["nonlinearity_gain"]),
            drift_rate=float(fields["drift_rate"]),
            noise_std=float(fields.get("noise_std", DEFAULT_NOISE_STD)),
            planar=bool(int(fields.get("planar", "1"))),
            control_dim=int(fields.get("control_dim", "2")),
            hidden_dim=int(fields.get("hidden_dim", "4")),
        )
    except KeyError as exc:
        raise ParseError(f"missing preset field {exc.args[0]!r}") from None
