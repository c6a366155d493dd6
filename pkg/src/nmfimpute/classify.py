"""k-NN classification and the missing-attribute benchmark protocol.

Per seed: split, min-max scale on the training side, corrupt the test
points with random masks, complete them per condition, classify, score.
The NMF condition learns a dictionary on the training features, imputes
the test points through it and classifies against the training
reconstruction.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .anmf import Scheme, additive_reconstruct, joint_factorize, multi_stage_factorize
from .datasets import (
    Dataset,
    SplitSpec,
    Substitution,
    apply_normalizer,
    fit_normalizer,
    generate_mask,
    split,
    substitute,
)
from .errors import ConfigError, DimensionError
from .imputation import MaskedVector, impute_matrix
from .nmf import MASK_STREAM, SPLIT_STREAM, SUBSTITUTE_STREAM, SolverConfig, factorize, make_rng


class KnnModel:
    """Euclidean k-nearest-neighbor majority vote.

    Distance ties go to the lower training index; vote ties go to the tied
    label whose member is nearest.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.k = k

    def fit(self, features, labels) -> "KnnModel":
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training set is empty")
        if y.shape[0] != X.shape[0]:
            raise DimensionError(f"{y.shape[0]} labels for {X.shape[0]} training points")
        if self.k > X.shape[0]:
            raise ConfigError(f"k={self.k} exceeds the {X.shape[0]} training points")
        self.train_features = X
        self.train_labels = y
        return self

    def predict_one(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.train_features.shape[1],):
            raise DimensionError(f"query has shape {x.shape}, expected ({self.train_features.shape[1]},)")
        diff = self.train_features - x
        dist = np.einsum("ij,ij->i", diff, diff)
        nearest = np.argsort(dist, kind="stable")[: self.k]
        votes: dict = {}
        for i in nearest:
            lab = self.train_labels[i]
            votes[lab] = votes.get(lab, 0) + 1
        top = max(votes.values())
        # dict preserves insertion order, i.e. nearest-first
        return next(lab for lab, c in votes.items() if c == top)

    def predict(self, X):
        return np.array([self.predict_one(x) for x in np.asarray(X, dtype=np.float64)])


def knn_fit(train: Dataset, k: int = 5) -> KnnModel:
    return KnnModel(k).fit(train.features, train.labels)


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise DimensionError(f"{p.shape[0]} predictions for {y.shape[0]} labels")
    if p.size == 0:
        raise ValueError("cannot score an empty prediction set")
    return 100.0 * np.count_nonzero(p == y) / p.size


class Condition(str, enum.Enum):
    BASELINE = "baseline"
    ZERO = "zero"
    MEAN = "mean"
    RANDOM = "random"
    NMF = "nmf"


@dataclass
class ExperimentReport:
    dataset: str
    condition: str
    missing_fraction: float
    seeds: list[int]
    per_seed: list[float]

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.per_seed))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "condition": self.condition,
            "missing_fraction": self.missing_fraction,
            "accuracy": self.accuracy,
            "seeds": list(self.seeds),
            "per_seed": list(self.per_seed),
        }


@dataclass
class ExperimentSettings:
    rank: int | None = None  # defaults to 2 * d
    terms: int = 1
    scheme: Scheme = Scheme.JOINT
    knn_k: int = 5
    train_fraction: float = 0.8
    solver: SolverConfig = field(default_factory=SolverConfig)
    # training representation for the non-NMF conditions: "raw" or "reconstructed"
    substitution_reference: str = "raw"
    nmf_reference: str = "reconstructed"

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        for ref in (self.substitution_reference, self.nmf_reference):
            if ref not in ("raw", "reconstructed"):
                raise ConfigError(f"reference must be 'raw' or 'reconstructed', got {ref!r}")
        if self.terms < 1:
            raise ConfigError(f"terms must be >= 1, got {self.terms}")
        if self.rank is not None and self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")


class _SeedRun:
    """Everything one seed shares across conditions and thresholds."""

    def __init__(self, ds: Dataset, seed: int, settings: ExperimentSettings):
        self.seed = seed
        self.settings = settings
        train, test = split(ds, SplitSpec(settings.train_fraction, seed), make_rng(seed, SPLIT_STREAM))
        stats = fit_normalizer(train)
        self.train, _ = apply_normalizer(stats, train)
        self.test, self.clamped = apply_normalizer(stats, test)
        self.means = self.train.features.mean(axis=0)
        self._dictionary = None
        self._reconstruction = None
        self._masks: dict[float, list[np.ndarray]] = {}

    @property
    def solver(self) -> SolverConfig:
        s = self.settings.solver
        return SolverConfig(s.max_iters, s.rel_tol, s.epsilon, self.seed, s.init_scale)

    def _fit_dictionary(self):
        st = self.settings
        X = self.train.features.T  # d x N orientation
        r = st.rank or 2 * X.shape[0]
        if st.terms == 1:
            f, _ = factorize(X, r, self.solver)
            self._dictionary, self._reconstruction = f.W, f.reconstruct().T
        else:
            fit = joint_factorize if st.scheme is Scheme.JOINT else multi_stage_factorize
            F, _ = fit(X, r, st.terms, self.solver)
            self._dictionary, self._reconstruction = F, additive_reconstruct(F).T

    @property
    def dictionary(self):
        if self._dictionary is None:
            self._fit_dictionary()
        return self._dictionary

    @property
    def reconstruction(self) -> np.ndarray:
        if self._reconstruction is None:
            self._fit_dictionary()
        return self._reconstruction

    def masks(self, t: float) -> list[np.ndarray]:
        # one uniform stream per seed: masks for larger t contain those for smaller t
        if t not in self._masks:
            rng = make_rng(self.seed, MASK_STREAM)
            self._masks[t] = [generate_mask(self.test.d, t, rng) for _ in range(len(self.test))]
        return self._masks[t]

    def _reference(self, which: str) -> np.ndarray:
        return self.train.features if which == "raw" else self.reconstruction

    def test_features(self, condition: Condition, t: float) -> np.ndarray:
        X = self.test.features
        if condition is Condition.BASELINE:
            return X
        masks = self.masks(t)
        if condition is Condition.NMF:
            points = [MaskedVector(np.where(m, x, 0.0), m) for x, m in zip(X, masks)]
            batch = impute_matrix(points, self.dictionary, self.solver, fail_fast=True)
            return batch.completed.T
        rng = make_rng(self.seed, SUBSTITUTE_STREAM)
        return np.array([substitute(x, m, Substitution(condition.value), self.means, rng)
                         for x, m in zip(X, masks)])

    def score(self, condition: Condition, t: float) -> float:
        which = (self.settings.nmf_reference if condition is Condition.NMF
                 else self.settings.substitution_reference)
        model = KnnModel(self.settings.knn_k).fit(self._reference(which), self.train.labels)
        return accuracy(model.predict(self.test_features(condition, t)), self.test.labels)


def run_grid(ds: Dataset, conditions: Iterable, thresholds: Sequence[float],
             seeds: Sequence[int], settings: ExperimentSettings | None = None) -> list[ExperimentReport]:
    """One report per (condition, threshold), in the order given.

    Training-side work (split, scaling, dictionary) runs once per seed.
    """
    settings = settings or ExperimentSettings()
    conditions = [Condition(c) for c in conditions]
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("at least one seed is required")
    scores = {(c, t): [] for c in conditions for t in thresholds}
    for seed in seeds:
        run = _SeedRun(ds, seed, settings)
        for c in conditions:
            for t in thresholds:
                try:
                    scores[(c, t)].append(run.score(c, t))
                except (ValueError, ArithmeticError) as exc:
                    raise type(exc)(f"{c.value} at t={t}, seed {seed}: {exc}") from exc
    return [ExperimentReport(ds.name, c.value, float(t), seeds, scores[(c, t)])
            for c in conditions for t in thresholds]


def run_condition(ds: Dataset, condition, t: float, seeds: Sequence[int],
                  settings: ExperimentSettings | None = None) -> ExperimentReport:
    return run_grid(ds, [condition], [t], seeds, settings)[0]
