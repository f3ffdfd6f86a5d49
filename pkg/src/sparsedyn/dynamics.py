"""Benchmark ODE systems and trajectory generation.

Each built-in system carries its governing right-hand side together with
the exact term/coefficient structure, so recovered sparse models can be
checked against ground truth under any polynomial library.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DivergenceError, LibraryMismatchError
from .library import DesignMatrix, TermDescriptor, term_index

# exponents -> coefficient, one dict per state equation
TermMap = tuple[dict[tuple[int, ...], float], ...]


@dataclass(frozen=True)
class OdeSystem:
    """A dynamical system with known sparse structure.

    ``true_terms[j]`` maps monomial exponents to the coefficient of that
    monomial in the equation for state j. Forcing inputs, when present,
    are not part of the term structure: the ground truth describes the
    autonomous dynamics on the measured window.
    """

    name: str
    dim: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    true_terms: TermMap

    def coefficient_matrix(self, library: DesignMatrix | list[TermDescriptor]) -> np.ndarray:
        """Ground-truth coefficients laid out on the given library's columns."""
        terms = library.terms if isinstance(library, DesignMatrix) else library
        xi = np.zeros((len(terms), self.dim))
        for j, eq in enumerate(self.true_terms):
            for exps, coeff in eq.items():
                idx = term_index(terms, exps)
                if idx is None:
                    raise LibraryMismatchError(
                        f"{self.name}: true term with exponents {exps} is not in the library"
                    )
                xi[idx, j] = coeff
        return xi

    def support_matrix(self, library: DesignMatrix | list[TermDescriptor]) -> np.ndarray:
        return self.coefficient_matrix(library) != 0.0

    def n_active_terms(self) -> int:
        return sum(len(eq) for eq in self.true_terms)


@dataclass(frozen=True)
class SimulationSpec:
    """Integration setup: initial state, sampling grid, and solver control.

    ``measure_from`` delays the recorded window; the system is integrated
    from t=0 but only [measure_from, measure_from + duration] is sampled.
    Used for systems that are kicked by a transient excitation and then
    measured once the input has switched off.
    """

    initial_state: tuple[float, ...]
    sample_rate: float  # Hz
    duration: float  # seconds
    rtol: float = 1e-12
    atol: float = 1e-12
    method: str = "rk45"  # "rk45" (explicit adaptive) or "stiff" (implicit adaptive)
    measure_from: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("sample_rate and duration must be positive")
        if self.sample_rate * self.duration < 1:
            raise ValueError("grid must contain at least 2 samples")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("rk45", "stiff"):
            raise ValueError(f"unknown integrator {self.method!r}")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration)) + 1


@dataclass
class Trajectory:
    """Sampled run: equidistant times, states, and optional derivatives.

    ``scales`` records per-variable max-abs factors when the trajectory
    has been normalised.
    """

    times: np.ndarray  # (b,)
    states: np.ndarray  # (b, n)
    derivs: np.ndarray | None = None
    scales: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def copy(self) -> "Trajectory":
        return Trajectory(
            times=self.times.copy(),
            states=self.states.copy(),
            derivs=None if self.derivs is None else self.derivs.copy(),
            scales=None if self.scales is None else self.scales.copy(),
        )


# ---------------------------------------------------------------------------
# Built-in systems


def _lorenz_rhs(t, s):
    x, y, z = s
    return np.array([-10.0 * x + 10.0 * y, 28.0 * x - y - x * z, -8.0 / 3.0 * z + x * y])


def lorenz_system() -> OdeSystem:
    """Chaotic three-state convection model; 7 active terms."""
    return OdeSystem(
        name="lorenz",
        dim=3,
        rhs=_lorenz_rhs,
        true_terms=(
            {(1, 0, 0): -10.0, (0, 1, 0): 10.0},
            {(1, 0, 0): 28.0, (0, 1, 0): -1.0, (1, 0, 1): -1.0},
            {(0, 0, 1): -8.0 / 3.0, (1, 1, 0): 1.0},
        ),
    )


BEARING_EXCITATION_AMPLITUDE = 0.5  # N/kg
BEARING_EXCITATION_WIDTH = 200e-6  # seconds


def _bearing_rhs(t, s):
    disp, vel = s
    force = BEARING_EXCITATION_AMPLITUDE if t < BEARING_EXCITATION_WIDTH else 0.0
    return np.array([vel, -1.0e6 * disp - 2.0e3 * vel + force])


def bearing_system() -> OdeSystem:
    """Stiff mass-spring-damper struck by a 200 us step input.

    The displacement response is orders of magnitude smaller than the
    velocity response, so identification requires normalised data. The
    ground-truth structure is the autonomous post-excitation model.
    """
    return OdeSystem(
        name="bearing",
        dim=2,
        rhs=_bearing_rhs,
        true_terms=(
            {(0, 1): 1.0},
            {(1, 0): -1.0e6, (0, 1): -2.0e3},
        ),
    )


def _bias_rhs(t, s, k1, k2):
    x, v = s
    return np.array([v, -10.0 * v - k1 * x - k2 * x**3])


def bias_oscillator(k1: float, k2: float) -> OdeSystem:
    """Damped oscillator with competing linear and cubic stiffness."""
    if k1 < 0 or k2 < 0:
        raise ValueError("stiffness coefficients must be non-negative")
    eq1: dict[tuple[int, ...], float] = {(0, 1): -10.0}
    if k1 != 0:
        eq1[(1, 0)] = -k1
    if k2 != 0:
        eq1[(3, 0)] = -k2
    return OdeSystem(
        name="bias_oscillator",
        dim=2,
        rhs=partial(_bias_rhs, k1=k1, k2=k2),
        true_terms=({(0, 1): 1.0}, eq1),
    )


def _rossler_rhs(t, s, a, b, c):
    x, y, z = s
    return np.array([-y - z, x + a * y, b + z * (x - c)])


def _vanderpol_rhs(t, s, mu):
    x, y = s
    return np.array([y, mu * (1.0 - x**2) * y - x])


def _duffing_rhs(t, s, delta, alpha, beta):
    x, y = s
    return np.array([y, -delta * y - alpha * x - beta * x**3])


def canonical_system(name: str, params) -> OdeSystem:
    """Rossler / van der Pol / Duffing with caller-supplied parameters.

    Parameters are not baked in; experiment configs declare them, and the
    term structure keeps only nonzero coefficients.
    """
    params = tuple(float(p) for p in params)
    if name == "rossler":
        if len(params) != 3:
            raise ValueError("rossler takes params (a, b, c)")
        a, b, c = params
        eqs: list[dict[tuple[int, ...], float]] = [
            {(0, 1, 0): -1.0, (0, 0, 1): -1.0},
            {(1, 0, 0): 1.0, (0, 1, 0): a},
            {(0, 0, 0): b, (1, 0, 1): 1.0, (0, 0, 1): -c},
        ]
        rhs = partial(_rossler_rhs, a=a, b=b, c=c)
        dim = 3
    elif name == "vanderpol":
        if len(params) != 1:
            raise ValueError("vanderpol takes params (mu,)")
        (mu,) = params
        eqs = [{(0, 1): 1.0}, {(1, 0): -1.0, (0, 1): mu, (2, 1): -mu}]
        rhs = partial(_vanderpol_rhs, mu=mu)
        dim = 2
    elif name == "duffing":
        if len(params) != 3:
            raise ValueError("duffing takes params (delta, alpha, beta)")
        delta, alpha, beta = params
        eqs = [{(0, 1): 1.0}, {(0, 1): -delta, (1, 0): -alpha, (3, 0): -beta}]
        rhs = partial(_duffing_rhs, delta=delta, alpha=alpha, beta=beta)
        dim = 2
    else:
        raise ValueError(f"unknown canonical system {name!r}")
    eqs = [{e: c for e, c in eq.items() if c != 0.0} for eq in eqs]
    return OdeSystem(name=name, dim=dim, rhs=rhs, true_terms=tuple(eqs))


_SCIPY_METHOD = {"rk45": "RK45", "stiff": "Radau"}


def simulate(system: OdeSystem, spec: SimulationSpec) -> Trajectory:
    """Integrate the system and sample it on the equidistant grid.

    Both endpoints are included: b = rate * duration + 1. Derivatives are
    left unset; the preprocessing stage fills them in. When
    ``measure_from`` is positive the run is split there so a forcing
    switch-off at the window boundary does not stall the step controller.
    """
    method = _SCIPY_METHOD[spec.method]
    state = np.asarray(spec.initial_state, dtype=float)
    if state.shape != (system.dim,):
        raise ValueError(f"initial state must have {system.dim} entries")

    if spec.measure_from > 0:
        lead = solve_ivp(
            system.rhs, (0.0, spec.measure_from), state,
            method=method, rtol=spec.rtol, atol=spec.atol,
        )
        if not lead.success:
            raise DivergenceError(f"{system.name}: integrator failed at t={lead.t[-1]:.6g}")
        state = lead.y[:, -1]

    times = spec.measure_from + np.arange(spec.n_samples) / spec.sample_rate
    sol = solve_ivp(
        system.rhs, (times[0], times[-1]), state,
        method=method, t_eval=times, rtol=spec.rtol, atol=spec.atol,
    )
    if not sol.success:
        reached = sol.t[-1] if sol.t.size else times[0]
        raise DivergenceError(f"{system.name}: integrator failed at t={reached:.6g}")
    return Trajectory(times=times.copy(), states=sol.y.T.copy())


def exact_derivatives(system: OdeSystem, traj: Trajectory) -> Trajectory:
    """Fill derivatives by evaluating the governing equations at each sample."""
    derivs = np.empty_like(traj.states)
    for i, (t, row) in enumerate(zip(traj.times, traj.states)):
        derivs[i] = system.rhs(t, row)
    out = traj.copy()
    out.derivs = derivs
    return out


# Integration setups for the built-in benchmark systems.
DEFAULT_SIMULATIONS: dict[str, SimulationSpec] = {
    "lorenz": SimulationSpec((0.0, 1.0, 20.0), 100.0, 10.0, 1e-12, 1e-12, "rk45"),
    "rossler": SimulationSpec((14.0, 8.0, 0.0), 1000.0, 10.0, 1e-12, 1e-12, "rk45"),
    "vanderpol": SimulationSpec((2.0, 0.0), 100.0, 30.0, 1e-3, 1e-6, "stiff"),
    "duffing": SimulationSpec((1.0, 0.0), 100.0, 10.0, 1e-3, 1e-6, "stiff"),
    "bearing": SimulationSpec(
        (0.0, 0.0), 1e6, 5e-6, 1e-12, 1e-12, "rk45",
        measure_from=BEARING_EXCITATION_WIDTH,
    ),
    "bias_oscillator": SimulationSpec((0.15, 9.89), 100.0, 5.0, 1e-12, 1e-12, "rk45"),
}


def default_simulation_spec(system_name: str) -> SimulationSpec:
    try:
        return DEFAULT_SIMULATIONS[system_name]
    except KeyError:
        raise KeyError(f"no default simulation setup for system {system_name!r}") from None


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``t,x0,...,x{n-1}`` rows at full double precision."""
    n = traj.dim
    header = "t," + ",".join(f"x{i}" for i in range(n))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for t, row in zip(traj.times, traj.states):
            fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
