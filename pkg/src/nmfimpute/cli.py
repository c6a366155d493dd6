"""Command line entry point: ``factorize``, ``impute`` and ``experiment``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then flags; later sources win. Everything is validated before any
output is written.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 factorization stopped at ``max_iters`` without converging.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .anmf import AdditiveFactorization, Scheme, joint_factorize, multi_stage_factorize
from .classify import Condition, ExperimentSettings, run_grid
from .datasets import load_csv
from .errors import ConfigError, DataError
from .imputation import MaskedVector, impute_matrix
from .nmf import Factorization, SolverConfig, factorize

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 1, 2, 3


@dataclass
class RunConfig:
    input: str | None = None
    out: str | None = None
    factors: str | None = None
    rank: int | None = None
    terms: int = 1
    scheme: str = "joint"
    max_iters: int = 50000
    rel_tol: float = 1e-5
    epsilon: float = 1e-12
    seed: int = 0
    init_scale: float = 1.0
    # experiment
    label_column: int = -1
    delimiter: str = ","
    header: bool = False
    threshold: list[float] = field(default_factory=lambda: [0.3])
    seeds: list[int] = field(default_factory=lambda: [0])
    conditions: list[str] = field(default_factory=lambda: ["zero", "mean", "random", "nmf"])
    train_fraction: float = 0.8
    knn_k: int = 5
    substitution_reference: str = "raw"

    def solver(self) -> SolverConfig:
        return SolverConfig(self.max_iters, self.rel_tol, self.epsilon, self.seed, self.init_scale)

    def validate(self, command: str):
        if self.input is None:
            raise ConfigError("--input is required")
        if self.out is None:
            raise ConfigError("--out is required")
        self.solver()
        try:
            Scheme(self.scheme)
        except ValueError:
            raise ConfigError(f"scheme must be 'joint' or 'multi-stage', got {self.scheme!r}") from None
        if self.terms < 1:
            raise ConfigError(f"terms must be >= 1, got {self.terms}")
        if self.rank is not None and self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if command == "factorize" and self.rank is None:
            raise ConfigError("--rank is required for factorize")
        if command == "impute" and self.factors is None:
            raise ConfigError("--factors is required for impute")
        if command == "experiment":
            if not self.seeds:
                raise ConfigError("at least one seed is required")
            for t in self.threshold:
                if not 0 <= t <= 1:
                    raise ConfigError(f"threshold must lie in [0, 1], got {t}")
            if not 0 < self.train_fraction < 1:
                raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
            if self.knn_k < 1:
                raise ConfigError(f"knn_k must be >= 1, got {self.knn_k}")
            for c in self.conditions:
                try:
                    Condition(c)
                except ValueError:
                    raise ConfigError(f"unknown condition {c!r}") from None
            if self.substitution_reference not in ("raw", "reconstructed"):
                raise ConfigError("substitution_reference must be 'raw' or 'reconstructed'")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_list(text, conv):
    if isinstance(text, list):
        return [conv(v) for v in text]
    return [conv(v) for v in str(text).split(",") if v.strip()]


def _parse_seeds(text) -> list[int]:
    """``"0,3,5"`` or ``"0-9"`` (inclusive range) or a JSON list."""
    if isinstance(text, list):
        return [int(v) for v in text]
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep and lo:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


_CONVERTERS = {
    "threshold": lambda v: _parse_list(v, float),
    "seeds": _parse_seeds,
    "conditions": lambda v: _parse_list(v, str),
}


def _coerce(name: str, value):
    if name in _CONVERTERS:
        return _CONVERTERS[name](value)
    kind = _FIELDS[name].type
    if value is None:
        return None
    if "bool" in kind:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if "int" in kind:
        if isinstance(value, bool) or float(value) != int(float(value)):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(float(value))
    if "float" in kind:
        return float(value)
    return str(value)


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(raw) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(raw)
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# CSV helpers

def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_matrix(path, allow_missing: bool = False):
    """Numeric CSV to an array; empty cells become NaN when allowed.

    A first row with a non-numeric, non-empty cell is taken as a header.
    Returns ``(array, header_or_None)``.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    header = None
    if rows and any(c.strip() and not _is_number(c) for c in rows[0]):
        header, rows = rows[0], rows[1:]
    if not rows:
        raise DataError(f"{path}: no numeric rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                if not allow_missing:
                    raise DataError(f"{path}: row {i + 1}, column {j + 1} is empty")
                out[i, j] = math.nan
                continue
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i + 1}, column {j + 1}: cannot parse {cell!r}") from None
    return out, header


def write_matrix(path: Path, M, header=None):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in np.asarray(M):
            w.writerow(["" if math.isnan(v) else fmt(v) for v in row])


def _write_rows(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _factor_files(F) -> dict[str, np.ndarray]:
    if isinstance(F, Factorization):
        return {"W.csv": F.W, "H.csv": F.H}
    return {name: M for i, t in enumerate(F.terms, 1)
            for name, M in ((f"W_{i}.csv", t.W), (f"H_{i}.csv", t.H))}


def load_dictionary(directory):
    """``W.csv`` alone, or ``W_1.csv .. W_k.csv`` as an additive dictionary."""
    d = Path(directory)
    if (d / "W.csv").exists():
        return read_matrix(d / "W.csv")[0]
    terms = []
    i = 1
    while (d / f"W_{i}.csv").exists():
        W = read_matrix(d / f"W_{i}.csv")[0]
        terms.append(Factorization(W, np.zeros((W.shape[1], 1))))
        i += 1
    if not terms:
        raise DataError(f"no W.csv or W_1.csv under {d}")
    return AdditiveFactorization(terms)


# Commands

def cmd_factorize(cfg: RunConfig) -> int:
    X, _ = read_matrix(cfg.input)
    if np.any(X < 0):
        raise DataError(f"{cfg.input}: factorization input must be nonnegative")
    solver = cfg.solver()
    if cfg.terms == 1:
        F, trace = factorize(X, cfg.rank, solver)
        rows = [(i, fmt(v)) for i, v in enumerate(trace.objective_values, 1)]
        trace_header, converged = ("iteration", "objective"), trace.converged
    elif Scheme(cfg.scheme) is Scheme.JOINT:
        F, trace = joint_factorize(X, cfg.rank, cfg.terms, solver)
        rows = [(i, fmt(v)) for i, v in enumerate(trace.objective_values, 1)]
        trace_header, converged = ("iteration", "objective"), trace.converged
    else:
        F, traces = multi_stage_factorize(X, cfg.rank, cfg.terms, solver)
        rows = [(s, i, fmt(v)) for s, tr in enumerate(traces, 1)
                for i, v in enumerate(tr.objective_values, 1)]
        trace_header, converged = ("stage", "iteration", "objective"), all(t.converged for t in traces)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, M in _factor_files(F).items():
        write_matrix(out / name, M)
    _write_rows(out / "trace.csv", trace_header, rows)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_impute(cfg: RunConfig) -> int:
    dictionary = load_dictionary(cfg.factors)
    M, header = read_matrix(cfg.input, allow_missing=True)
    d = dictionary.shape[0]
    if M.shape[1] != d:
        raise DataError(f"{cfg.input} has {M.shape[1]} columns, dictionary has {d} rows")
    observed = ~np.isnan(M)
    if np.any(M[observed] < 0):
        raise DataError(f"{cfg.input}: observed values must be nonnegative")
    points = [MaskedVector(np.where(m, row, 0.0), m) for row, m in zip(M, observed)]
    batch = impute_matrix(points, dictionary, cfg.solver())
    completed = batch.completed.T.copy()
    for i in batch.errors:
        completed[i] = M[i]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "completed.csv", completed, header)
    if batch.errors:
        _write_rows(out / "errors.csv", ("row", "message"),
                    [(i + 1, str(e)) for i, e in sorted(batch.errors.items())])
        for i, e in sorted(batch.errors.items()):
            print(f"row {i + 1}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_experiment(cfg: RunConfig) -> int:
    ds = load_csv(cfg.input, cfg.label_column, cfg.delimiter, cfg.header)
    settings = ExperimentSettings(
        rank=cfg.rank, terms=cfg.terms, scheme=Scheme(cfg.scheme), knn_k=cfg.knn_k,
        train_fraction=cfg.train_fraction, solver=cfg.solver(),
        substitution_reference=cfg.substitution_reference)
    reports = run_grid(ds, cfg.conditions, cfg.threshold, cfg.seeds, settings)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "report.csv",
                ("dataset", "condition", "missing_fraction", "accuracy", "per_seed"),
                [(r.dataset, r.condition, fmt(r.missing_fraction), fmt(r.accuracy),
                  ";".join(fmt(a) for a in r.per_seed)) for r in reports])
    payload = {"config": dataclasses.asdict(cfg) | {"out": None},
               "reports": [r.to_dict() for r in reports]}
    with (out / "report.json").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


COMMANDS = {"factorize": cmd_factorize, "impute": cmd_impute, "experiment": cmd_experiment}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmfimpute", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with settings; flags override it")
        p.add_argument("--input", help="input CSV")
        p.add_argument("--out", help="output directory")
        p.add_argument("--rank", type=int)
        p.add_argument("--terms", type=int, help="number of additive terms k")
        p.add_argument("--scheme", choices=[s.value for s in Scheme])
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--rel-tol", dest="rel_tol", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--seed", type=int, help="solver seed")
        p.add_argument("--init-scale", dest="init_scale", type=float)
        if name == "impute":
            p.add_argument("--factors", help="directory holding W.csv or W_1.csv..W_k.csv")
        if name == "experiment":
            p.add_argument("--label-column", dest="label_column", type=int)
            p.add_argument("--delimiter")
            p.add_argument("--header", action="store_true", default=None)
            p.add_argument("--threshold", help="comma-separated missing fractions")
            p.add_argument("--seeds", help="e.g. 0,1,2 or 0-9")
            p.add_argument("--conditions", help="comma-separated: baseline,zero,mean,random,nmf")
            p.add_argument("--train-fraction", dest="train_fraction", type=float)
            p.add_argument("--knn-k", dest="knn_k", type=int)
            p.add_argument("--reference", dest="substitution_reference",
                           choices=["raw", "reconstructed"],
                           help="training representation for the non-NMF conditions")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        cfg.validate(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
