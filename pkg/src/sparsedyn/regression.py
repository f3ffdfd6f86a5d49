"""Sparse regressors for dynamics identification.

All methods share the same linear-algebra core: ridge solutions of the
normal equations by a direct dense solver. They differ in how candidate
terms are eliminated:

* ``stlsq``  — iterative pruning by coefficient magnitude.
* ``esindy`` — bootstrap bagging of ``stlsq``; terms are kept by their
  inclusion probability across bags.
* ``stcv``   — iterative pruning by the coefficient-presence statistic
  CP = sqrt(m) * mean / std, computed from the closed-form posterior of a
  Gaussian linear model. CP is dimensionless, which makes the selection
  insensitive to per-variable data scaling; thresholds on it are ramped
  over a fixed number of annealing steps.
* ``stcv_stlsq`` — conservative ``stcv`` with a strong ridge penalty used
  to pre-sparsify the library, followed by ``stlsq`` on the survivors.

Every regressor refits the final coefficients by a ridge solve on the
terminal support, so reported values always satisfy the normal equations
of the selected submodel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficiencyError
from .library import DesignMatrix, TermDescriptor

CP_MAX = 1e15
NOISE_VAR_FLOOR = 1e-30


# ---------------------------------------------------------------------------
# Linear-algebra core


def _values(theta) -> np.ndarray:
    return theta.values if isinstance(theta, DesignMatrix) else np.asarray(theta, dtype=float)


def _as_targets(xdot) -> np.ndarray:
    xdot = np.asarray(xdot, dtype=float)
    return xdot[:, None] if xdot.ndim == 1 else xdot


def ridge_solve(theta, y: np.ndarray, gamma: float) -> np.ndarray:
    """Solve (T'T + gamma*I) xi = T'y by direct factorisation.

    gamma = 0 is allowed when the normal equations are nonsingular;
    otherwise a RankDeficiencyError advises using a positive penalty.
    """
    A = _values(theta)
    if A.ndim != 2 or A.shape[1] < 1:
        raise ValueError("theta must be a (b, k) matrix with k >= 1")
    if gamma < 0:
        raise ValueError("ridge penalty must be non-negative")
    G = A.T @ A
    if gamma:
        G = G + gamma * np.eye(G.shape[0])
    try:
        return np.linalg.solve(G, A.T @ y)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError(
            "normal equations are singular; use a ridge penalty gamma > 0"
        ) from None


# ---------------------------------------------------------------------------
# Models and posterior statistics


@dataclass
class CoefficientModel:
    """Sparse coefficient matrix with its support and provenance.

    ``xi`` is (q, n): column j holds the coefficients of the equation for
    state j on the library's q terms. Entries off ``support`` are exactly
    zero. ``presence`` optionally carries the last-evaluated CP value per
    coefficient (zero off support).
    """

    xi: np.ndarray
    support: np.ndarray
    library_terms: list[TermDescriptor]
    fit_meta: dict = field(default_factory=dict)
    presence: np.ndarray | None = None

    @property
    def n_active(self) -> int:
        return int(self.support.sum())

    def to_dict(self) -> dict:
        out = {
            "terms": [t.label for t in self.library_terms],
            "exponents": [list(t.exponents) for t in self.library_terms],
            "coefficients": [self.xi[:, j].tolist() for j in range(self.xi.shape[1])],
            "support": [self.support[:, j].astype(int).tolist() for j in range(self.support.shape[1])],
            "fit_meta": self.fit_meta,
        }
        if self.presence is not None:
            out["presence"] = [self.presence[:, j].tolist() for j in range(self.presence.shape[1])]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientModel":
        terms = [
            TermDescriptor(exponents=tuple(e), label=lbl)
            for e, lbl in zip(d["exponents"], d["terms"])
        ]
        xi = np.array(d["coefficients"], dtype=float).T
        support = np.array(d["support"], dtype=bool).T
        presence = None
        if "presence" in d:
            presence = np.array(d["presence"], dtype=float).T
        return cls(xi=xi, support=support, library_terms=terms,
                   fit_meta=d.get("fit_meta", {}), presence=presence)

    def equations_text(self, decimals: int = 2) -> str:
        """Human-readable listing, one line per state equation."""
        lines = []
        for j in range(self.xi.shape[1]):
            parts = []
            for i in np.flatnonzero(self.support[:, j]):
                label = self.library_terms[i].label
                coeff = f"{self.xi[i, j]:+.{decimals}f}"
                parts.append(coeff if label == "1" else f"{coeff} {label}")
            lines.append(f"dx{j}/dt = " + (" ".join(parts) if parts else "0"))
        return "\n".join(lines)


@dataclass
class PosteriorStats:
    """Closed-form posterior summary for one equation's active terms."""

    mean: np.ndarray
    std: np.ndarray
    cp: np.ndarray
    m: int
    noise_var: float


def _cp_values(mean: np.ndarray, std: np.ndarray, m: int) -> np.ndarray:
    root_m = np.sqrt(m)
    cp = np.empty_like(mean)
    ok = std > 0
    with np.errstate(over="ignore"):
        cp[ok] = root_m * mean[ok] / std[ok]
    cp[~ok] = np.sign(mean[~ok]) * CP_MAX
    return np.clip(cp, -CP_MAX, CP_MAX)


def coefficient_presence(stats: PosteriorStats) -> np.ndarray:
    """CP = sqrt(m) * mean / std, saturated at +-CP_MAX where std vanishes.

    The sqrt(m) factor removes the sample-size dependence, so CP values
    are comparable across data lengths. A vanishing std (an exact fit)
    saturates CP at sign(mean) * CP_MAX: perfectly consistent terms are
    retained by any finite threshold.
    """
    return _cp_values(stats.mean, stats.std, stats.m)


def blr_posterior(theta, y: np.ndarray, gamma: float, active_mask: np.ndarray) -> PosteriorStats:
    """Gaussian posterior of one equation's coefficients on the active terms.

    With a zero-mean isotropic prior of precision proportional to gamma,
    the posterior mean coincides with the ridge estimate and the
    covariance is sigma^2 (T'T + gamma*I)^-1, with sigma^2 estimated as
    RSS over the residual degrees of freedom, max(m - k, 1). An exact fit
    drives sigma^2 to a tiny floor rather than zero.
    """
    A = _values(theta)[:, np.asarray(active_mask, dtype=bool)]
    m, k = A.shape
    if k < 1:
        raise ValueError("active mask selects no terms")
    mean = ridge_solve(A, y, gamma)
    resid = y - A @ mean
    rss = float(resid @ resid)
    noise_var = max(rss / max(m - k, 1), NOISE_VAR_FLOOR)
    G = A.T @ A + gamma * np.eye(k)
    try:
        cov = noise_var * np.linalg.inv(G)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError(
            "normal equations are singular; use a ridge penalty gamma > 0"
        ) from None
    std = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return PosteriorStats(mean=mean, std=std, cp=_cp_values(mean, std, m), m=m, noise_var=noise_var)


# ---------------------------------------------------------------------------
# STLSQ


def _stlsq_single(A: np.ndarray, y: np.ndarray, lam: np.ndarray, gamma: float,
                  active: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude-thresholded ridge iteration for one equation.

    ``lam`` is a per-column threshold vector (all equal for plain use).
    Elimination is strict (|xi| < lam), so a zero threshold never prunes.
    Returns (active mask over all q columns, coefficients on the active
    columns); the coefficients are empty when the support empties.
    """
    active = active.copy()
    while active.any():
        idx = np.flatnonzero(active)
        xi_active = ridge_solve(A[:, idx], y, gamma)
        keep = ~(np.abs(xi_active) < lam[idx])
        if keep.all():
            return active, xi_active
        active[idx[~keep]] = False
    return active, np.empty(0)


def stlsq(theta: DesignMatrix, xdot, lam: float, gamma: float = 1e-16,
          initial_mask: np.ndarray | None = None) -> CoefficientModel:
    """Sequentially thresholded least squares.

    Per equation: ridge-solve on the active columns, zero out coefficients
    whose magnitude falls below ``lam``, and repeat until the support is
    stable. The returned coefficients are the ridge refit on the terminal
    support. An equation whose support empties is reported empty.
    """
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    A = theta.values
    targets = _as_targets(xdot)
    q = A.shape[1]
    n = targets.shape[1]
    lam_vec = np.full(q, float(lam))
    xi = np.zeros((q, n))
    support = np.zeros((q, n), dtype=bool)
    for j in range(n):
        start = np.ones(q, dtype=bool) if initial_mask is None else initial_mask[:, j].astype(bool)
        active, xi_active = _stlsq_single(A, targets[:, j], lam_vec, gamma, start)
        support[:, j] = active
        xi[active, j] = xi_active
    meta = {"regressor": "stlsq", "lambda": lam, "gamma": gamma}
    return CoefficientModel(xi=xi, support=support, library_terms=list(theta.terms), fit_meta=meta)


# ---------------------------------------------------------------------------
# Preconditioning


@dataclass(frozen=True)
class PreconditionRecord:
    mode: str
    column_scales: tuple[float, ...]


def precondition(theta: DesignMatrix, xdot, mode: str = "identity"):
    """Optional column equilibration ahead of the iterative regressors.

    ``identity`` passes data through untouched. ``equilibrate`` rescales
    each library column to unit max-abs; callers must map coefficients and
    magnitude thresholds back through the recorded column scales.
    """
    if mode == "identity":
        record = PreconditionRecord("identity", tuple([1.0] * theta.n_terms))
        return theta, xdot, record
    if mode != "equilibrate":
        raise ValueError(f"unknown preconditioning mode {mode!r}")
    scales = np.abs(theta.values).max(axis=0)
    scales[scales == 0] = 1.0
    eq = DesignMatrix(values=theta.values / scales, terms=theta.terms, source_dims=theta.source_dims)
    return eq, xdot, PreconditionRecord("equilibrate", tuple(float(s) for s in scales))


# ---------------------------------------------------------------------------
# STCV


@dataclass(frozen=True)
class StcvSchedule:
    """Annealing schedule: ridge penalty and CP threshold over n_steps.

    Both ramps are linear. The initial fit uses ``ridge_initial`` and the
    initial CP threshold; step k then uses the k-th ramp value, ending at
    the final values. ``stlsq_lambda`` is the near-zero magnitude
    threshold of the inner fits; CP thresholding is the actual sparsifier.
    """

    ridge_initial: float
    ridge_final: float
    cp_initial: float
    cp_final: float
    n_steps: int = 10
    stlsq_lambda: float = 0.01

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if min(self.ridge_initial, self.ridge_final) < 0:
            raise ValueError("ridge penalties must be non-negative")
        if min(self.cp_initial, self.cp_final) < 0:
            raise ValueError("CP thresholds must be non-negative")
        if self.stlsq_lambda < 0:
            raise ValueError("stlsq_lambda must be non-negative")

    def ramp(self, k: int) -> tuple[float, float]:
        """Ridge penalty and CP threshold at step k in 1..n_steps."""
        f = k / self.n_steps
        gamma = self.ridge_initial + (self.ridge_final - self.ridge_initial) * f
        cp_thr = self.cp_initial + (self.cp_final - self.cp_initial) * f
        return gamma, cp_thr


def _cp_eliminate(A, y, gamma, active, cp_threshold):
    """Drop active terms whose |CP| falls below the threshold (strict)."""
    stats = blr_posterior(A, y, gamma, active)
    idx = np.flatnonzero(active)
    out = active.copy()
    out[idx[np.abs(stats.cp) < cp_threshold]] = False
    return out


def _stcv_single(A: np.ndarray, y: np.ndarray, schedule: StcvSchedule,
                 lam_vec: np.ndarray) -> np.ndarray:
    """CP-thresholded refinement for one equation; returns the active mask.

    The support only ever shrinks, so each inner loop terminates in at
    most q passes; an emptied support halts the schedule early.
    """
    q = A.shape[1]
    active, _ = _stlsq_single(A, y, lam_vec, schedule.ridge_initial, np.ones(q, dtype=bool))
    if active.any() and schedule.cp_initial > 0:
        active = _cp_eliminate(A, y, schedule.ridge_initial, active, schedule.cp_initial)

    for k in range(1, schedule.n_steps + 1):
        if not active.any():
            break
        gamma_k, cp_k = schedule.ramp(k)
        while active.any():
            prev = active
            active, _ = _stlsq_single(A, y, lam_vec, gamma_k, active)
            if not active.any():
                break
            if cp_k > 0:
                active = _cp_eliminate(A, y, gamma_k, active, cp_k)
            if (active == prev).all():
                break
    return active


def stcv(theta: DesignMatrix, xdot, schedule: StcvSchedule,
         precondition_mode: str = "identity") -> CoefficientModel:
    """Sequential thresholding of the coefficient-of-variation statistic.

    Because CP is invariant to rescaling of the library columns, the
    selection is unaffected by per-variable normalisation of the data.
    The ridge penalty here stabilises the variance estimates rather than
    enforcing sparsity; it is ramped across the schedule's steps while the
    CP threshold tightens. Supports evolve independently per equation.
    """
    theta_p, xdot_p, record = precondition(theta, xdot, precondition_mode)
    A = theta_p.values
    col_scales = np.asarray(record.column_scales)
    # magnitude thresholds act on coefficients in the original column scaling
    lam_vec = schedule.stlsq_lambda * col_scales
    targets = _as_targets(xdot_p)
    q = A.shape[1]
    n = targets.shape[1]
    xi = np.zeros((q, n))
    support = np.zeros((q, n), dtype=bool)
    presence = np.zeros((q, n))
    for j in range(n):
        active = _stcv_single(A, targets[:, j], schedule, lam_vec)
        support[:, j] = active
        if active.any():
            stats = blr_posterior(A, targets[:, j], schedule.ridge_final, active)
            xi[active, j] = stats.mean
            presence[active, j] = stats.cp
    xi = xi / col_scales[:, None]
    meta = {
        "regressor": "stcv",
        "ridge_initial": schedule.ridge_initial,
        "ridge_final": schedule.ridge_final,
        "cp_initial": schedule.cp_initial,
        "cp_final": schedule.cp_final,
        "n_steps": schedule.n_steps,
        "stlsq_lambda": schedule.stlsq_lambda,
        "precondition": record.mode,
        "blr_scope": "active-columns",
    }
    return CoefficientModel(xi=xi, support=support, library_terms=list(theta.terms),
                            fit_meta=meta, presence=presence)


def stcv_stlsq(theta: DesignMatrix, xdot, schedule: StcvSchedule,
               stlsq_lambda_final: float, gamma_final: float = 1e-16) -> CoefficientModel:
    """Two-stage cascade: conservative CP selection, then magnitude pruning.

    Stage 1 runs ``stcv`` with the (strong-ridge) schedule; its support
    seeds stage 2's ``stlsq``. If stage 1 empties the library the empty
    model is returned directly.
    """
    stage1 = stcv(theta, xdot, schedule)
    meta = {
        "regressor": "stcv-stlsq",
        "stage1": stage1.fit_meta,
        "stlsq_lambda_final": stlsq_lambda_final,
        "gamma_final": gamma_final,
    }
    if stage1.n_active == 0:
        stage1.fit_meta = meta
        return stage1
    model = stlsq(theta, xdot, stlsq_lambda_final, gamma_final, initial_mask=stage1.support)
    model.fit_meta = meta
    return model


# ---------------------------------------------------------------------------
# E-SINDy (data bagging)


@dataclass(frozen=True)
class EsindySpec:
    """Bagging setup: bootstrap-resampled fits plus an inclusion threshold.

    Each bag resamples the b data rows with replacement (about 63.2%
    unique rows per bag). ``bootstrap=False`` replaces every bag with the
    identity sample, which reduces the ensemble to its inner ``stlsq``.
    """

    n_bags: int = 100
    inclusion_threshold: float = 0.9
    stlsq_lambda: float = 0.1
    gamma: float = 1e-16
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_bags < 1:
            raise ValueError("n_bags must be >= 1")
        if not 0.0 <= self.inclusion_threshold <= 1.0:
            raise ValueError("inclusion_threshold must lie in [0, 1]")


def esindy_inclusion(theta: DesignMatrix, xdot, spec: EsindySpec):
    """Inclusion probability of each coefficient across the bags.

    Returns (probabilities (q, n), bag-median coefficients (q, n)). Bag
    row indices derive deterministically from the spec seed, one child
    seed per bag, so results do not depend on evaluation order.
    """
    A = theta.values
    targets = _as_targets(xdot)
    b, q = A.shape
    n = targets.shape[1]
    counts = np.zeros((q, n))
    bag_xi = np.zeros((spec.n_bags, q, n))
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_bags)
    for i in range(spec.n_bags):
        if spec.bootstrap:
            rows = np.random.default_rng(seeds[i]).integers(0, b, size=b)
        else:
            rows = np.arange(b)
        sub = DesignMatrix(values=A[rows], terms=theta.terms, source_dims=theta.source_dims)
        model = stlsq(sub, targets[rows], spec.stlsq_lambda, spec.gamma)
        counts += model.support
        bag_xi[i] = model.xi
    return counts / spec.n_bags, np.median(bag_xi, axis=0)


def esindy_from_inclusion(theta: DesignMatrix, xdot, spec: EsindySpec,
                          inclusion: np.ndarray, bag_median: np.ndarray | None = None) -> CoefficientModel:
    """Threshold the inclusion probabilities and refit on the full data.

    A term is retained when its probability reaches the threshold and is
    nonzero, so a zero threshold keeps exactly the union of bag supports.
    """
    A = theta.values
    targets = _as_targets(xdot)
    q, n = inclusion.shape
    support = (inclusion >= spec.inclusion_threshold) & (inclusion > 0)
    xi = np.zeros((q, n))
    for j in range(n):
        active = support[:, j]
        if active.any():
            xi[active, j] = ridge_solve(A[:, active], targets[:, j], spec.gamma)
    meta = {
        "regressor": "esindy",
        "n_bags": spec.n_bags,
        "inclusion_threshold": spec.inclusion_threshold,
        "stlsq_lambda": spec.stlsq_lambda,
        "gamma": spec.gamma,
        "seed": spec.seed,
        "bootstrap": spec.bootstrap,
        "inclusion_probability": inclusion.tolist(),
    }
    if bag_median is not None:
        meta["bag_median_xi"] = bag_median.tolist()
    return CoefficientModel(xi=xi, support=support, library_terms=list(theta.terms), fit_meta=meta)


def esindy(theta: DesignMatrix, xdot, spec: EsindySpec) -> CoefficientModel:
    """Data-bagging ensemble with inclusion-probability term selection."""
    inclusion, bag_median = esindy_inclusion(theta, xdot, spec)
    return esindy_from_inclusion(theta, xdot, spec, inclusion, bag_median)
