"""Data pipeline between simulation and regression.

Measurement noise is expressed as a percentage of each variable's max-abs
value: the signal is scaled to unit max-abs, perturbed there, and scaled
back, so a "1% noise floor" means normalised-domain perturbations of
N(0, 0.005^2) whose 95th percentile sits near 1% of the signal range.
Derivatives are always recomputed from the (noisy) states by second-order
finite differences, never perturbed directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import DegenerateScaleError, TrajectoryFormatError

NOISE_FAMILIES = ("gaussian_floor", "uniform")

# normalised-domain std per percent of noise level
GAUSSIAN_FLOOR_STD = 0.005
# normalised-domain half-width per percent, for the uniform family
UNIFORM_HALF_WIDTH = 0.01


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level (percent of per-variable max-abs), family, and seed."""

    level_percent: float
    family: str = "gaussian_floor"
    seed: int = 0

    def __post_init__(self):
        if self.level_percent < 0:
            raise ValueError("noise level must be non-negative")
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")


@dataclass(frozen=True)
class ScalingRecord:
    """Per-variable max-abs factors that were divided out of a trajectory."""

    scales: tuple[float, ...]
    applied: bool = True


def _max_abs(states: np.ndarray) -> np.ndarray:
    return np.abs(states).max(axis=0)


def normalize(traj: Trajectory) -> tuple[Trajectory, ScalingRecord]:
    """Scale each state column to unit max-abs; no mean centring.

    Scales come from the trajectory being normalised, so for noisy data
    they depend on the specific realisation. Derivatives, when present,
    are divided by the same per-variable factors.
    """
    scales = _max_abs(traj.states)
    if np.any(scales == 0):
        i = int(np.argmin(scales))
        raise DegenerateScaleError(f"state column {i} is identically zero")
    out = traj.copy()
    out.states = traj.states / scales
    if traj.derivs is not None:
        out.derivs = traj.derivs / scales
    out.scales = scales.copy()
    return out, ScalingRecord(scales=tuple(float(s) for s in scales))


def denormalize(traj: Trajectory, record: ScalingRecord) -> Trajectory:
    """Invert :func:`normalize`."""
    scales = np.asarray(record.scales)
    out = traj.copy()
    out.states = traj.states * scales
    if traj.derivs is not None:
        out.derivs = traj.derivs * scales
    out.scales = None
    return out


def add_noise(traj: Trajectory, spec: NoiseSpec) -> Trajectory:
    """Perturb states in the normalised domain, then restore raw scale.

    The realisation is fully determined by ``spec.seed``. A zero level
    returns an identical copy.
    """
    out = traj.copy()
    out.derivs = None
    if spec.level_percent == 0:
        return out
    scales = _max_abs(traj.states)
    rng = np.random.default_rng(spec.seed)
    shape = traj.states.shape
    if spec.family == "gaussian_floor":
        eps = rng.normal(0.0, GAUSSIAN_FLOOR_STD * spec.level_percent, size=shape)
    else:
        half = UNIFORM_HALF_WIDTH * spec.level_percent
        eps = rng.uniform(-half, half, size=shape)
    out.states = traj.states + eps * scales
    return out


def differentiate(traj: Trajectory) -> Trajectory:
    """Second-order finite differences on the equidistant grid.

    Interior rows use central differences; the two endpoints use the
    one-sided three-point formulas of the same order, keeping the sample
    count unchanged.
    """
    b = traj.n_samples
    if b < 3:
        raise ValueError(f"differentiation needs at least 3 samples, got {b}")
    x = traj.states
    dt = traj.dt
    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
    d[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * dt)
    out = traj.copy()
    out.derivs = d
    return out


def load_trajectory_csv(path) -> Trajectory:
    """Read a ``t,x0,...`` CSV written by the trajectory exporter.

    Validates the schema: rectangular rows, finite values, and a strictly
    increasing time grid whose step varies by less than 1e-6 relative.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not cols or cols[0] != "t" or len(cols) < 2:
            raise TrajectoryFormatError(f"{path}: header must be 't,x0,...', got {header!r}")
        width = len(cols)
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != width:
                raise TrajectoryFormatError(
                    f"{path}: row {lineno} has {len(parts)} fields, expected {width}"
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise TrajectoryFormatError(f"{path}: row {lineno} has a non-numeric field") from None
            for j, v in enumerate(vals):
                if not np.isfinite(v):
                    raise TrajectoryFormatError(
                        f"{path}: non-finite value at row {lineno}, column {cols[j]}"
                    )
            rows.append(vals)
    if len(rows) < 2:
        raise TrajectoryFormatError(f"{path}: need at least 2 samples")
    data = np.array(rows)
    times = data[:, 0]
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise TrajectoryFormatError(f"{path}: time column is not strictly increasing")
    dt = steps[0]
    if np.any(np.abs(steps - dt) > 1e-6 * abs(dt)):
        raise TrajectoryFormatError(f"{path}: time grid is not equidistant")
    return Trajectory(times=times, states=data[:, 1:])
