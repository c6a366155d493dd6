"""Fill missing attributes of a point from a trained nonnegative dictionary.

The coefficients ``h`` are fitted on the observed rows only,

    h <- h * (Wo^T xo) / (Wo^T Wo h + eps),

and the missing entries are read off the full reconstruction ``W h``.
The h-iteration never reads the missing block, so assigning it once after
convergence gives the same output as reassigning it every iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anmf import AdditiveFactorization
from .errors import DimensionError, MaskError
from .matrix import as_mask, as_nonneg, partition_rows
from .nmf import (
    IMPUTE_STREAM,
    ConvergenceTrace,
    SolverConfig,
    iterate,
    make_rng,
    uniform_positive,
)


@dataclass(frozen=True)
class MaskedVector:
    """A data point with some attributes missing.

    Entries at missing positions are placeholders and are never read.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise DimensionError(f"values must be 1-D, got shape {v.shape}")
        m = as_mask(self.mask, v.shape[0])
        obs = v[m]
        if not np.all(np.isfinite(obs)) or np.any(obs < 0):
            raise ValueError("observed values must be finite and nonnegative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_nan(cls, values) -> "MaskedVector":
        """Build from a vector that marks missing entries with NaN."""
        v = np.asarray(values, dtype=np.float64)
        mask = ~np.isnan(v)
        return cls(np.where(mask, v, 0.0), mask)


@dataclass
class ImputationResult:
    completed: np.ndarray
    h: list[np.ndarray]
    trace: ConvergenceTrace


def _prepare(x: MaskedVector, d: int) -> np.ndarray:
    if x.d != d:
        raise DimensionError(f"point has {x.d} attributes, dictionary has {d} rows")
    if not x.mask.any():
        raise MaskError("every attribute is missing; nothing to fit against")
    return x.values[x.mask]


def _init_h(r: int, config: SolverConfig, point: int, term: int) -> np.ndarray:
    rng = make_rng(config.seed, IMPUTE_STREAM, point, term)
    return uniform_positive(rng, r, config.init_scale)


def masked_objective(x: MaskedVector, W, h, x_missing_estimate) -> float:
    """``0.5 * (||x_mis - W_mis h||^2 + ||x_obs - W_obs h||^2)``."""
    W = np.asarray(W, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64).reshape(-1, 1)
    if W.shape != (x.d, h.shape[0]):
        raise DimensionError(f"W {W.shape} does not fit d={x.d}, r={h.shape[0]}")
    part = partition_rows(W, x.mask)
    est = np.asarray(x_missing_estimate, dtype=np.float64).reshape(-1, 1)
    if est.shape[0] != len(part.missing_index):
        raise DimensionError(
            f"{est.shape[0]} missing estimates for {len(part.missing_index)} missing attributes")
    obs = x.values[part.observed_index].reshape(-1, 1)
    missing_block = est - part.missing_rows @ h
    observed_block = obs - part.observed_rows @ h
    return 0.5 * (float(np.sum(missing_block * missing_block))
                  + float(np.sum(observed_block * observed_block)))


def _fit(x: MaskedVector, Ws: list[np.ndarray], config: SolverConfig, point: int):
    """Sweep the coefficient updates of every term against the observed rows."""
    xo = _prepare(x, Ws[0].shape[0])
    Wo = [np.ascontiguousarray(W[x.mask]) for W in Ws]
    WoT = [np.ascontiguousarray(W.T) for W in Wo]
    numer = [Wt @ xo for Wt in WoT]
    hs = [_init_h(W.shape[1], config, point, i) for i, W in enumerate(Ws)]
    eps = config.epsilon
    k = len(hs)

    def fitted():
        S = Wo[0] @ hs[0]
        for j in range(1, k):
            S = S + Wo[j] @ hs[j]
        return S

    S = fitted()

    def objective():
        # The missing block sits at its stationary value W_mis h, where its
        # contribution is exactly zero; only the observed residual remains.
        r = xo - S
        return 0.5 * float(r @ r)

    def sweep():
        nonlocal S
        for j in range(k):
            hs[j] = hs[j] * numer[j] / (WoT[j] @ S + eps)
            S = fitted()
        return objective()

    trace = iterate(sweep, objective(), config)
    return [h.reshape(-1, 1) for h in hs], trace


def fit_h_masked(x: MaskedVector, W, config: SolverConfig | None = None, point: int = 0):
    """Coefficients for ``x`` using only the observed rows of ``W``.

    Returns ``(h, trace)`` with ``h`` of shape ``(r, 1)``. An all-zero
    observed block is valid; ``h`` then decays towards zero.
    """
    config = config or SolverConfig()
    W = as_nonneg(W, "W")
    hs, trace = _fit(x, [W], config, point)
    return hs[0], trace


def _complete(x: MaskedVector, Ws, hs) -> np.ndarray:
    full = Ws[0] @ hs[0]
    for W, h in zip(Ws[1:], hs[1:]):
        full = full + W @ h
    return np.where(x.mask, x.values, full[:, 0])


def impute_point(x: MaskedVector, W, config: SolverConfig | None = None,
                 point: int = 0) -> ImputationResult:
    """Fill the missing entries of ``x`` from ``W h``; observed entries pass through.

    ``point`` selects the seed stream of the initial ``h``, keeping batch
    results independent of processing order.
    """
    config = config or SolverConfig()
    W = as_nonneg(W, "W")
    hs, trace = _fit(x, [W], config, point)
    return ImputationResult(_complete(x, [W], hs), hs, trace)


def impute_point_additive(x: MaskedVector, F: AdditiveFactorization,
                          config: SolverConfig | None = None, point: int = 0) -> ImputationResult:
    """Additive variant: one coefficient vector per term, swept in term order."""
    config = config or SolverConfig()
    Ws = [as_nonneg(W, f"W_{i}") for i, W in enumerate(F.dictionaries)]
    hs, trace = _fit(x, Ws, config, point)
    return ImputationResult(_complete(x, Ws, hs), hs, trace)


@dataclass
class BatchImputation:
    completed: np.ndarray
    """``d x n`` matrix, one column per point; NaN columns for failed points."""
    results: list[ImputationResult | None]
    errors: dict[int, Exception]

    @property
    def traces(self) -> list[ConvergenceTrace | None]:
        return [r.trace if r is not None else None for r in self.results]


def impute_matrix(points, dictionary, config: SolverConfig | None = None,
                  fail_fast: bool = False) -> BatchImputation:
    """Impute every point independently against its own row partition.

    ``dictionary`` is either a single ``W`` or an
    :class:`AdditiveFactorization`. Per-point failures are collected by
    index unless ``fail_fast`` is set.
    """
    config = config or SolverConfig()
    points = list(points)
    if isinstance(dictionary, AdditiveFactorization):
        d = dictionary.shape[0]
        def solve(x, j):
            return impute_point_additive(x, dictionary, config, point=j)
    else:
        W = as_nonneg(dictionary, "W")
        d = W.shape[0]
        def solve(x, j):
            return impute_point(x, W, config, point=j)

    out = np.full((d, len(points)), np.nan)
    results: list[ImputationResult | None] = []
    errors: dict[int, Exception] = {}
    for j, x in enumerate(points):
        try:
            res = solve(x, j)
        except (MaskError, DimensionError) as exc:
            if fail_fast:
                raise type(exc)(f"point {j}: {exc}") from exc
            errors[j] = exc
            results.append(None)
            continue
        out[:, j] = res.completed
        results.append(res)
    return BatchImputation(out, results, errors)
