"""Polynomial candidate-term libraries.

Builds the design matrix of monomial features evaluated on state data.
Columns are ordered by total degree, then lexicographically on the
exponent vectors (highest power of the first variable first), so the
column layout is deterministic and support masks are stable across runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataQualityError


@dataclass(frozen=True)
class TermDescriptor:
    """One monomial: exponent of each state variable plus a display label."""

    exponents: tuple[int, ...]
    label: str

    @property
    def degree(self) -> int:
        return sum(self.exponents)


@dataclass
class DesignMatrix:
    """Candidate-function matrix: one column per monomial, one row per sample."""

    values: np.ndarray  # (b, q)
    terms: list[TermDescriptor]
    source_dims: int

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.terms]


def term_label(exponents) -> str:
    """Label like ``x0^2*x1``; the empty product is labelled ``1``."""
    parts = []
    for i, e in enumerate(exponents):
        if e == 0:
            continue
        parts.append(f"x{i}" if e == 1 else f"x{i}^{e}")
    return "*".join(parts) if parts else "1"


def enumerate_terms(n_vars: int, max_degree: int, include_constant: bool = True) -> list[TermDescriptor]:
    """All monomials of total degree <= max_degree in the canonical order."""
    if n_vars < 1 or max_degree < 1:
        raise ValueError("need n_vars >= 1 and max_degree >= 1")
    terms = []
    start = 0 if include_constant else 1
    for degree in range(start, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), degree):
            exps = [0] * n_vars
            for i in combo:
                exps[i] += 1
            exps = tuple(exps)
            terms.append(TermDescriptor(exponents=exps, label=term_label(exps)))
    return terms


def build_polynomial_library(states: np.ndarray, max_degree: int, include_constant: bool = True) -> DesignMatrix:
    """Evaluate every monomial of degree <= max_degree on the state rows.

    Raises DataQualityError if the states contain non-finite entries.
    """
    X = np.asarray(states, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"states must be a (b, n) matrix with b,n >= 1, got shape {X.shape}")
    if not np.isfinite(X).all():
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataQualityError(f"non-finite state value at row {bad[0]}, column {bad[1]}")

    b, n = X.shape
    terms = enumerate_terms(n, max_degree, include_constant)
    values = np.ones((b, len(terms)))
    for j, term in enumerate(terms):
        for i, e in enumerate(term.exponents):
            if e:
                values[:, j] *= X[:, i] ** e
    return DesignMatrix(values=values, terms=terms, source_dims=n)


def term_index(library: DesignMatrix | list[TermDescriptor], exponents) -> int | None:
    """Column index of the monomial with the given exponents, or None if absent."""
    terms = library.terms if isinstance(library, DesignMatrix) else library
    key = tuple(int(e) for e in exponents)
    for j, term in enumerate(terms):
        if term.exponents == key:
            return j
    return None
