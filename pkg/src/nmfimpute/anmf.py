"""Additive NMF: ``X ~ sum_i W_i H_i`` with every factor nonnegative.

Two fitting schemes are provided. :func:`multi_stage_factorize` runs plain
NMF on X and then on each successive (clamped) residue.
:func:`joint_factorize` sweeps multiplicative updates over all terms
against the shared reconstruction:

    H_j <- H_j * (W_j^T X) / (W_j^T S + eps)
    W_j <- W_j * (X H_j^T) / (S H_j^T + eps),   S = sum_i W_i H_i

Term indices are zero-based.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericFailure
from .matrix import as_nonneg, clamp_nonneg, frobenius_error
from .nmf import (
    ConvergenceTrace,
    Factorization,
    SolverConfig,
    factorize,
    init_factors,
    iterate,
)


class Scheme(str, enum.Enum):
    MULTI_STAGE = "multi-stage"
    JOINT = "joint"


@dataclass(frozen=True)
class AdditiveFactorization:
    terms: tuple[Factorization, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise DimensionError("an additive factorization needs at least one term")
        d, N = self.terms[0].W.shape[0], self.terms[0].H.shape[1]
        for i, t in enumerate(self.terms):
            if t.W.shape[0] != d or t.H.shape[1] != N:
                raise DimensionError(
                    f"term {i} has shape {t.W.shape} x {t.H.shape}, expected d={d}, N={N}")

    @property
    def k(self) -> int:
        return len(self.terms)

    @property
    def shape(self) -> tuple[int, int]:
        return self.terms[0].W.shape[0], self.terms[0].H.shape[1]

    @property
    def dictionaries(self) -> list[np.ndarray]:
        return [t.W for t in self.terms]


def _sum_products(Ws, Hs) -> np.ndarray:
    S = Ws[0] @ Hs[0]
    for W, H in zip(Ws[1:], Hs[1:]):
        S = S + W @ H
    return S


def additive_reconstruct(F: AdditiveFactorization) -> np.ndarray:
    return _sum_products([t.W for t in F.terms], [t.H for t in F.terms])


def _check_term(X, F: AdditiveFactorization, j: int):
    if not 0 <= j < F.k:
        raise IndexError(f"term index {j} out of range for k={F.k}")
    if X.shape != F.shape:
        raise DimensionError(f"X {X.shape} does not match factorization shape {F.shape}")


def _term_update_h(X, Ws, Hs, j, eps):
    S = _sum_products(Ws, Hs)
    return Hs[j] * (Ws[j].T @ X) / (Ws[j].T @ S + eps)


def _term_update_w(X, Ws, Hs, j, eps):
    S = _sum_products(Ws, Hs)
    return Ws[j] * (X @ Hs[j].T) / (S @ Hs[j].T + eps)


def joint_update_term_h(X, F: AdditiveFactorization, j: int, epsilon: float = 1e-12) -> np.ndarray:
    """Updated ``H_j``; the other terms are read, never modified."""
    X = np.asarray(X, dtype=np.float64)
    _check_term(X, F, j)
    return _term_update_h(X, F.dictionaries, [t.H for t in F.terms], j, epsilon)


def joint_update_term_w(X, F: AdditiveFactorization, j: int, epsilon: float = 1e-12) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_term(X, F, j)
    return _term_update_w(X, F.dictionaries, [t.H for t in F.terms], j, epsilon)


def gradient_term_h(X, F: AdditiveFactorization, j: int) -> np.ndarray:
    """Derivative of ``0.5 * ||X - sum_i W_i H_i||^2`` with respect to ``H_j``."""
    X = np.asarray(X, dtype=np.float64)
    _check_term(X, F, j)
    return -F.terms[j].W.T @ (X - additive_reconstruct(F))


def _check_problem(X, r, k):
    X = as_nonneg(X, "X")
    if r < 1:
        raise DimensionError(f"rank must be >= 1, got {r}")
    if k < 1:
        raise DimensionError(f"term count must be >= 1, got {k}")
    return X


def joint_factorize(X, r: int, k: int, config: SolverConfig | None = None):
    """Fit all ``k`` terms together; one trace entry per sweep.

    Term ``i`` is initialized from stream ``i`` of ``config.seed``, so
    ``k=1`` reproduces :func:`nmfimpute.nmf.factorize` exactly.
    """
    config = config or SolverConfig()
    X = _check_problem(X, r, k)
    d, N = X.shape
    inits = [init_factors(d, r, N, config, stream=i) for i in range(k)]
    Ws = [f.W for f in inits]
    Hs = [f.H for f in inits]
    eps = config.epsilon

    def sweep():
        for j in range(k):
            Hs[j] = _term_update_h(X, Ws, Hs, j, eps)
            Ws[j] = _term_update_w(X, Ws, Hs, j, eps)
        return frobenius_error(X, _sum_products(Ws, Hs))

    trace = iterate(sweep, frobenius_error(X, _sum_products(Ws, Hs)), config)
    terms = tuple(Factorization(W, H) for W, H in zip(Ws, Hs))
    return AdditiveFactorization(terms), trace


def stage_residue(X, F: AdditiveFactorization, stage: int) -> np.ndarray:
    """The clamped residue that stage ``stage`` of the multi-stage scheme fits."""
    X = np.asarray(X, dtype=np.float64)
    if stage == 0:
        return X
    done = F.terms[:stage]
    return clamp_nonneg(X - _sum_products([t.W for t in done], [t.H for t in done]))


def multi_stage_factorize(X, r: int, k: int, config: SolverConfig | None = None):
    """Factorize X, then the residue left by all previous stages, ``k`` times.

    Residues are clamped at zero before each stage because the
    multiplicative updates need a nonnegative target.

    Returns
    -------
    (AdditiveFactorization, list[ConvergenceTrace])
        One trace per stage; each is measured against that stage's clamped
        residue.
    """
    config = config or SolverConfig()
    X = _check_problem(X, r, k)
    terms: list[Factorization] = []
    traces: list[ConvergenceTrace] = []
    for i in range(k):
        target = X if i == 0 else stage_residue(X, AdditiveFactorization(terms), i)
        try:
            f, trace = factorize(target, r, config, stream=i)
        except (NumericFailure, DimensionError) as exc:
            raise type(exc)(f"stage {i}: {exc}") from exc
        terms.append(f)
        traces.append(trace)
    return AdditiveFactorization(terms), traces
