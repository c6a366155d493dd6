"""Rank-r NMF with Lee-Seung multiplicative updates for the squared error.

Each iteration updates H, then W:

    H <- H * (W^T X) / (W^T (W H) + eps)
    W <- W * (X H^T) / ((W H) H^T + eps)

The denominators are formed from the reconstruction ``W @ H`` rather than
from the Gram matrices so that the additive scheme with a single term
performs bit-identical arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError, NumericFailure
from .matrix import as_nonneg, frobenius_error

# Stream tags keep the independent random draws of the package apart.
INIT_STREAM = 0
IMPUTE_STREAM = 1
MASK_STREAM = 2
SPLIT_STREAM = 3
SUBSTITUTE_STREAM = 4


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator keyed by ``seed`` and a stream path."""
    return np.random.default_rng([int(seed), *map(int, stream)])


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget, stopping threshold and initialization settings.

    ``rel_tol`` bounds the relative change of the objective between
    consecutive iterations; ``epsilon`` is added to every update
    denominator.
    """

    max_iters: int = 50000
    rel_tol: float = 1e-5
    epsilon: float = 1e-12
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be an integer >= 1, got {self.max_iters!r}")
        if not self.rel_tol > 0:
            raise ConfigError(f"rel_tol must be > 0, got {self.rel_tol!r}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon!r}")
        if not self.init_scale > 0:
            raise ConfigError(f"init_scale must be > 0, got {self.init_scale!r}")


@dataclass
class ConvergenceTrace:
    objective_values: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations_run(self) -> int:
        return len(self.objective_values)

    @property
    def final(self) -> float:
        return self.objective_values[-1]


@dataclass(frozen=True)
class Factorization:
    W: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 2 or self.H.ndim != 2 or self.W.shape[1] != self.H.shape[0]:
            raise DimensionError(f"W {self.W.shape} and H {self.H.shape} do not share a rank")

    @property
    def rank(self) -> int:
        return self.W.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.W @ self.H


def uniform_positive(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    """Draws on ``(0, scale]``; ``1 - U[0,1)`` never hits zero."""
    return scale * (1.0 - rng.random(shape))


def init_factors(d: int, r: int, N: int, config: SolverConfig, stream: int = 0) -> Factorization:
    """Seeded strictly positive initial factors, W drawn before H."""
    for name, v in (("d", d), ("r", r), ("N", N)):
        if v < 1:
            raise DimensionError(f"{name} must be >= 1, got {v}")
    rng = make_rng(config.seed, INIT_STREAM, stream)
    W = uniform_positive(rng, (d, r), config.init_scale)
    H = uniform_positive(rng, (r, N), config.init_scale)
    return Factorization(W, H)


def _check_shapes(X, W, H):
    if X.shape[0] != W.shape[0] or W.shape[1] != H.shape[0] or H.shape[1] != X.shape[1]:
        raise DimensionError(f"X {X.shape}, W {W.shape}, H {H.shape} do not conform")


def update_h(X, W, H, epsilon: float = 1e-12) -> np.ndarray:
    _check_shapes(X, W, H)
    return H * (W.T @ X) / (W.T @ (W @ H) + epsilon)


def update_w(X, W, H, epsilon: float = 1e-12) -> np.ndarray:
    _check_shapes(X, W, H)
    return W * (X @ H.T) / ((W @ H) @ H.T + epsilon)


def gradient_h(X, W, H) -> np.ndarray:
    """Derivative of ``0.5 * ||X - W H||^2`` with respect to H."""
    _check_shapes(X, W, H)
    return -W.T @ (X - W @ H)


def relative_change(prev: float, cur: float) -> float:
    if prev == cur:
        return 0.0
    if prev <= 0.0:
        return math.inf
    return abs(prev - cur) / prev


def iterate(step: Callable[[], float], initial: float, config: SolverConfig) -> ConvergenceTrace:
    """Drive ``step`` until the objective settles or the budget runs out.

    ``step`` performs one full iteration and returns the new objective.
    """
    trace = ConvergenceTrace()
    prev = initial
    for _ in range(config.max_iters):
        obj = step()
        if not math.isfinite(obj):
            raise NumericFailure(
                f"objective became {obj} after {trace.iterations_run + 1} iterations; "
                f"check epsilon={config.epsilon}")
        trace.objective_values.append(obj)
        if relative_change(prev, obj) < config.rel_tol:
            trace.converged = True
            break
        prev = obj
    return trace


def factorize(X, r: int, config: SolverConfig | None = None, stream: int = 0):
    """Fit ``X ~ W H`` with ``r`` components.

    Returns
    -------
    (Factorization, ConvergenceTrace)
        The objective is recorded after every H-then-W iteration.
    """
    config = config or SolverConfig()
    X = as_nonneg(X, "X")
    if r < 1:
        raise DimensionError(f"rank must be >= 1, got {r}")
    f = init_factors(X.shape[0], r, X.shape[1], config, stream)
    W, H = f.W, f.H
    eps = config.epsilon

    def step():
        nonlocal W, H
        H = update_h(X, W, H, eps)
        W = update_w(X, W, H, eps)
        return frobenius_error(X, W @ H)

    trace = iterate(step, frobenius_error(X, W @ H), config)
    return Factorization(W, H), trace


def fit_h_fixed_w(X, W, config: SolverConfig | None = None, stream: int = 0):
    """Fit only the coefficients H for a frozen dictionary ``W``."""
    config = config or SolverConfig()
    X = as_nonneg(X, "X")
    W = as_nonneg(W, "W")
    if X.shape[0] != W.shape[0]:
        raise DimensionError(f"X {X.shape} and W {W.shape} differ in row count")
    rng = make_rng(config.seed, INIT_STREAM, stream)
    H = uniform_positive(rng, (W.shape[1], X.shape[1]), config.init_scale)
    eps = config.epsilon

    def step():
        nonlocal H
        H = update_h(X, W, H, eps)
        return frobenius_error(X, W @ H)

    trace = iterate(step, frobenius_error(X, W @ H), config)
    return H, trace
