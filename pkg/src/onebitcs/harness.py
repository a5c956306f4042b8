"""Seeded Monte-Carlo experiments: sweeps over M and noise, a-tuning, ranking,
scatter collection, and the CSV formats they read and write.

Pairing: one instance (x, phi, noise) is drawn per (M, sigma2, trial) from
``derive_seed(base_seed, M, sigma2, trial)`` and every algorithm is run on it.
Records are always kept in (M, sigma2, trial, algorithm) order, whatever the
worker count, and cell means are numpy reductions over trials in index order,
so serial and parallel runs agree bit for bit.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateError, IncompleteSweepError, InvalidParameterError
from .metrics import trial_metrics
from .objectives import SoftParams
from .signal_model import derive_seed, make_instance
from .solvers import Algorithm, HardK, SoftLambda, SolverConfig, reconstruct

REFERENCE_LABELS = ("BIHT-L1", "BIHT-L2", "SCR-1", "SCR-2", "SCR-4")
DEFAULT_TRIALS = 200
DEFAULT_M_VALUES = (16, 32, 64, 96, 128, 160, 192, 256, 320)
DEFAULT_A = 1.0

TRIAL_COLUMNS = ("label", "M", "sigma2", "trial", "seed", "angular_error",
                 "hamming_error", "iterations", "flagged")
AGGREGATE_COLUMNS = ("label", "M", "sigma2", "mean_ang", "std_ang", "mean_ham",
                     "std_ham", "count")
PLOT_COLUMNS = ("label", "x", "mean", "stderr")


@dataclass(frozen=True)
class LabeledConfig:
    label: str
    config: SolverConfig


def reference_algorithms(k: int, a_values: Mapping[str, float] | None = None,
                         default_a: float = DEFAULT_A, **solver_kw) -> list[LabeledConfig]:
    """BIHT-L1, BIHT-L2, SCR-1, SCR-2, SCR-4, numbered (1)-(5) in that order.

    ``a_values`` maps SCR labels to their steepness; missing labels get
    ``default_a``.  Extra keywords (``max_iters`` ...) go to every config.
    """
    a_values = dict(a_values or {})
    sparsity = HardK(int(k))
    out = [
        LabeledConfig("BIHT-L1", SolverConfig(Algorithm.BIHT_L1, sparsity, **solver_kw)),
        LabeledConfig("BIHT-L2", SolverConfig(Algorithm.BIHT_L2, sparsity, **solver_kw)),
    ]
    for p in (1, 2, 4):
        label = f"SCR-{p}"
        soft = SoftParams(a_values.get(label, default_a), p)
        out.append(LabeledConfig(label, SolverConfig(Algorithm.SCR, sparsity, soft=soft, **solver_kw)))
    return out


def reference_number(label: str) -> str:
    if label in REFERENCE_LABELS:
        return f"({REFERENCE_LABELS.index(label) + 1})"
    return label


@dataclass(frozen=True)
class ExperimentSpec:
    algorithms: tuple[LabeledConfig, ...]
    m_values: tuple[int, ...] = (160,)
    noise_values: tuple[float, ...] = (0.0,)
    n: int = 128
    k: int = 16
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "noise_values", tuple(float(s) for s in self.noise_values))
        if not self.algorithms:
            raise InvalidParameterError("experiment needs at least one algorithm")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise InvalidParameterError(f"duplicate algorithm labels: {labels}")
        if int(self.trials) < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {self.trials}")
        if not self.m_values or min(self.m_values) < 1:
            raise InvalidParameterError(f"m_values must be non-empty and >= 1: {self.m_values}")
        if not self.noise_values or not all(s >= 0 and math.isfinite(s) for s in self.noise_values):
            raise InvalidParameterError(f"noise_values must be non-empty and >= 0: {self.noise_values}")
        if not 1 <= int(self.k) <= int(self.n):
            raise InvalidParameterError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


@dataclass(frozen=True)
class TrialRecord:
    label: str
    m: int
    sigma2: float
    trial: int
    seed: int
    angular_error: float
    hamming_error: float
    iterations: int
    flagged: bool
    support_precision: float = math.nan
    support_recall: float = math.nan
    estimate_norm: float = math.nan
    nonzeros: int = -1


@dataclass(frozen=True)
class CellStats:
    label: str
    m: int
    sigma2: float
    mean_ang: float
    std_ang: float
    mean_ham: float
    std_ham: float
    count: int
    excluded: int = 0

    def mean(self, metric: str) -> float:
        return self.mean_ang if _metric(metric) == "angular" else self.mean_ham

    def stderr(self, metric: str) -> float:
        std = self.std_ang if _metric(metric) == "angular" else self.std_ham
        return std / math.sqrt(self.count) if self.count else math.nan


@dataclass
class SweepResult:
    cells: dict[tuple[str, int, float], CellStats]
    records: list[TrialRecord] = field(default_factory=list)
    spec: ExperimentSpec | None = None

    @property
    def labels(self) -> list[str]:
        seen: dict[str, None] = {}
        for label, _, _ in self.cells:
            seen.setdefault(label)
        return list(seen)

    @property
    def m_values(self) -> list[int]:
        return sorted({m for _, m, _ in self.cells})

    @property
    def noise_values(self) -> list[float]:
        return sorted({s for _, _, s in self.cells})

    def cell(self, label: str, m: int, sigma2: float) -> CellStats:
        try:
            return self.cells[(label, int(m), float(sigma2))]
        except KeyError:
            raise IncompleteSweepError(f"no cell for {label!r} at M={m}, sigma2={sigma2}") from None


def trial_seed(base_seed: int, m: int, sigma2: float, trial: int) -> int:
    return derive_seed(int(base_seed), int(m), float(sigma2), int(trial))


def _record(label, m, sigma2, trial, seed, inst, config) -> TrialRecord:
    try:
        result = reconstruct(inst.y, inst.phi, config)
    except DegenerateError:
        return TrialRecord(label, m, sigma2, trial, seed, math.nan, math.nan, 0, True)
    est = result.estimate
    tm = trial_metrics(est, inst.x, inst.phi, inst.y)
    return TrialRecord(
        label, m, sigma2, trial, seed,
        angular_error=tm.angular_error,
        hamming_error=tm.hamming_error,
        iterations=result.iterations_run,
        flagged=False,
        support_precision=tm.support_precision,
        support_recall=tm.support_recall,
        estimate_norm=float(np.linalg.norm(est)),
        nonzeros=int(np.count_nonzero(est)),
    )


def run_trial(n: int, k: int, m: int, sigma2: float, config: SolverConfig,
              seed: int, label: str = "") -> TrialRecord:
    """Draw the instance for ``seed``, reconstruct it, score it.

    A degenerate solver abort becomes a flagged record with NaN metrics.
    """
    inst = make_instance(n, k, m, sigma2, seed)
    return _record(label, int(m), float(sigma2), -1, int(seed), inst, config)


def _paired_trial(job) -> list[TrialRecord]:
    n, k, m, sigma2, trial, seed, algorithms = job
    inst = make_instance(n, k, m, sigma2, seed)
    return [_record(a.label, m, sigma2, trial, seed, inst, a.config) for a in algorithms]


def _jobs(spec: ExperimentSpec):
    for m in spec.m_values:
        for sigma2 in spec.noise_values:
            for t in range(spec.trials):
                seed = trial_seed(spec.base_seed, m, sigma2, t)
                yield (spec.n, spec.k, m, sigma2, t, seed, spec.algorithms)


def _execute(spec: ExperimentSpec, jobs: int) -> list[TrialRecord]:
    work = list(_jobs(spec))
    if jobs <= 1 or len(work) <= 1:
        batches = map(_paired_trial, work)
        return [r for batch in batches for r in batch]
    chunk = max(1, len(work) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map() yields in submission order
        return [r for batch in pool.map(_paired_trial, work, chunksize=chunk) for r in batch]


def aggregate(records: Sequence[TrialRecord]) -> dict[tuple[str, int, float], CellStats]:
    """Per-(label, M, sigma2) mean / sample std over unflagged trials.

    Flagged trials are excluded from the statistics and counted separately.
    """
    groups: dict[tuple[str, int, float], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.label, r.m, r.sigma2), []).append(r)
    cells = {}
    for key, rows in groups.items():
        rows = sorted(rows, key=lambda r: r.trial)
        good = [r for r in rows if not r.flagged]
        ang = np.array([r.angular_error for r in good])
        ham = np.array([r.hamming_error for r in good])
        count = len(good)
        ddof = 1 if count > 1 else 0
        cells[key] = CellStats(
            label=key[0], m=key[1], sigma2=key[2],
            mean_ang=float(ang.mean()) if count else math.nan,
            std_ang=float(ang.std(ddof=ddof)) if count else math.nan,
            mean_ham=float(ham.mean()) if count else math.nan,
            std_ham=float(ham.std(ddof=ddof)) if count else math.nan,
            count=count,
            excluded=len(rows) - count,
        )
    return cells


def run_grid(spec: ExperimentSpec, jobs: int = 1) -> SweepResult:
    records = _execute(spec, int(jobs))
    return SweepResult(cells=aggregate(records), records=records, spec=spec)


def sweep_measurements(spec: ExperimentSpec, jobs: int = 1) -> SweepResult:
    """Grid over ``spec.m_values`` x algorithms at the single noise level."""
    if len(spec.noise_values) != 1:
        raise InvalidParameterError("measurement sweep runs at exactly one noise level")
    return run_grid(spec, jobs)


def sweep_noise(spec: ExperimentSpec, jobs: int = 1) -> SweepResult:
    """Grid over ``spec.noise_values`` x algorithms at the single M."""
    if len(spec.m_values) != 1:
        raise InvalidParameterError("noise sweep runs at exactly one measurement count")
    return run_grid(spec, jobs)


def tune_a(spec: ExperimentSpec, p: int, a_grid: Iterable[float], jobs: int = 1,
           template: SolverConfig | None = None) -> tuple[float, list[tuple[float, float]]]:
    """Pick the steepness minimising mean angular error for SCR-p.

    Runs the paired protocol at the experiment's single (M, sigma2) for every ``a``;
    ties resolve to the smallest ``a``.  ``template`` supplies the non-``a``
    knobs (step size, iteration cap); ``spec.algorithms`` is ignored.
    Returns ``(best_a, [(a, mean_angular_error), ...])`` in grid order.

    If the optimum lands on an end of the grid, widen the grid and rerun.
    """
    grid = [float(a) for a in a_grid]
    if not grid or min(grid) <= 0:
        raise InvalidParameterError(f"a_grid must be non-empty and positive: {grid}")
    if len(spec.m_values) != 1 or len(spec.noise_values) != 1:
        raise InvalidParameterError("tune_a needs exactly one M and one noise level")
    if template is None:
        template = SolverConfig(Algorithm.SCR, HardK(spec.k), soft=SoftParams(1.0, p))
    algos = [
        LabeledConfig(f"a={a!r}", replace(template, algorithm=Algorithm.SCR, soft=SoftParams(a, p)))
        for a in grid
    ]
    result = run_grid(replace(spec, algorithms=tuple(algos)), jobs)
    m, sigma2 = spec.m_values[0], spec.noise_values[0]
    curve = [(a, result.cell(algo.label, m, sigma2).mean_ang) for a, algo in zip(grid, algos)]
    best_a, best_err = None, math.inf
    for a, err in sorted(curve):
        if err < best_err:
            best_a, best_err = a, err
    return best_a, curve


def _metric(metric: str) -> str:
    metric = metric.lower()
    if metric in ("angular", "ang", "angular_error"):
        return "angular"
    if metric in ("hamming", "ham", "hamming_error"):
        return "hamming"
    raise InvalidParameterError(f"unknown metric {metric!r}; use 'angular' or 'hamming'")


@dataclass(frozen=True)
class RankEntry:
    label: str
    mean: float
    stderr: float


@dataclass(frozen=True)
class RankReport:
    metric: str
    m: int
    sigma2: float
    entries: tuple[RankEntry, ...]
    tied: tuple[tuple[bool, ...], ...]  # pairwise, in ranked order

    def chain(self) -> str:
        """Render e.g. ``(3)≈(4)≈(5)>(2)>(1)`` from adjacent tie flags."""
        parts = [reference_number(self.entries[0].label)]
        for i in range(1, len(self.entries)):
            parts.append("≈" if self.tied[i - 1][i] else ">")
            parts.append(reference_number(self.entries[i].label))
        return "".join(parts)

    @property
    def order(self) -> list[str]:
        return [e.label for e in self.entries]


def rank_algorithms(sweep: SweepResult, metric: str, regime: str | float,
                    m: int | None = None, margin: float = 1.0,
                    required: Sequence[str] = REFERENCE_LABELS) -> RankReport:
    """Sort algorithms by mean error (ascending) in one regime.

    ``regime`` is ``"high-snr"`` (smallest sigma2 in the sweep), ``"low-snr"``
    (largest) or an explicit sigma2.  Two algorithms are flagged as tied when
    their means differ by less than ``margin`` pooled standard errors,
    ``sqrt(se_1**2 + se_2**2)``.
    """
    metric = _metric(metric)
    labels = sweep.labels
    missing = [r for r in required if r not in labels]
    if missing:
        raise IncompleteSweepError(f"sweep lacks algorithms {missing}")
    if len(labels) < 2:
        raise IncompleteSweepError("ranking needs at least two algorithms")
    if m is None:
        if len(sweep.m_values) != 1:
            raise InvalidParameterError(f"sweep has several M values {sweep.m_values}; pass m")
        m = sweep.m_values[0]
    if isinstance(regime, str):
        if regime == "high-snr":
            sigma2 = sweep.noise_values[0]
        elif regime == "low-snr":
            sigma2 = sweep.noise_values[-1]
        else:
            raise InvalidParameterError(f"unknown regime {regime!r}; use high-snr or low-snr")
    else:
        sigma2 = float(regime)
    entries = [
        RankEntry(lbl, sweep.cell(lbl, m, sigma2).mean(metric), sweep.cell(lbl, m, sigma2).stderr(metric))
        for lbl in labels
    ]
    # stable on ties: original label order
    entries.sort(key=lambda e: e.mean)
    tied = tuple(
        tuple(
            i != j and abs(a.mean - b.mean) < margin * math.hypot(a.stderr, b.stderr)
            for j, b in enumerate(entries)
        )
        for i, a in enumerate(entries)
    )
    return RankReport(metric=metric, m=int(m), sigma2=float(sigma2), entries=tuple(entries), tied=tied)


def collect_scatter(spec: ExperimentSpec, jobs: int = 1) -> list[tuple[float, float, str]]:
    """Every trial's (hamming_error, angular_error, label) at the experiment's one M."""
    if len(spec.m_values) != 1:
        raise InvalidParameterError("scatter collection needs exactly one M")
    return [(r.hamming_error, r.angular_error, r.label) for r in _execute(spec, int(jobs))]


def mean_distance_to_origin(points: Iterable[tuple[float, float, str]], label: str) -> float:
    d = [math.hypot(h, a) for h, a, lbl in points if lbl == label and not math.isnan(h)]
    return float(np.mean(d)) if d else math.nan


# ---------------------------------------------------------------- CSV / config

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_trials_csv(records: Iterable[TrialRecord], path) -> None:
    write_rows(path, TRIAL_COLUMNS, (
        (r.label, r.m, r.sigma2, r.trial, r.seed, r.angular_error, r.hamming_error,
         r.iterations, r.flagged)
        for r in records
    ))


def _ordered_cells(cells: Mapping, order: Sequence[str]) -> list[CellStats]:
    rank = {lbl: i for i, lbl in enumerate(order)}
    return sorted(cells.values(), key=lambda c: (rank.get(c.label, len(rank)), c.label, c.m, c.sigma2))


def write_aggregate_csv(sweep: SweepResult, path) -> None:
    order = [a.label for a in sweep.spec.algorithms] if sweep.spec else sweep.labels
    write_rows(path, AGGREGATE_COLUMNS, (
        (c.label, c.m, c.sigma2, c.mean_ang, c.std_ang, c.mean_ham, c.std_ham, c.count)
        for c in _ordered_cells(sweep.cells, order)
    ))


def read_aggregate_csv(path) -> SweepResult:
    cells = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != AGGREGATE_COLUMNS:
            raise ConfigError(f"{path}: expected columns {','.join(AGGREGATE_COLUMNS)}")
        for row in reader:
            c = CellStats(
                label=row["label"], m=int(row["M"]), sigma2=float(row["sigma2"]),
                mean_ang=float(row["mean_ang"]), std_ang=float(row["std_ang"]),
                mean_ham=float(row["mean_ham"]), std_ham=float(row["std_ham"]),
                count=int(row["count"]),
            )
            cells[(c.label, c.m, c.sigma2)] = c
    return SweepResult(cells=cells)


def plot_rows(sweep: SweepResult, metric: str, axis: str) -> list[tuple[str, float, float, float]]:
    """Long-format (label, x, mean, stderr) rows; ``axis`` is ``"M"`` or ``"sigma2"``."""
    order = [a.label for a in sweep.spec.algorithms] if sweep.spec else sweep.labels
    rows = []
    for c in _ordered_cells(sweep.cells, order):
        x = float(c.m) if axis == "M" else c.sigma2
        rows.append((c.label, x, c.mean(metric), c.stderr(metric)))
    return rows


def write_plot_csv(rows, path) -> None:
    write_rows(path, PLOT_COLUMNS, rows)


def _config_from_dict(d: Mapping, k: int) -> LabeledConfig:
    try:
        label = str(d["label"])
        algorithm = Algorithm(d["algorithm"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad algorithm entry {dict(d)}: {exc}") from None
    sparsity = SoftLambda(float(d["lam"])) if d.get("lam") is not None else HardK(int(d.get("k", k)))
    soft = None
    if algorithm is Algorithm.SCR:
        if "p" not in d:
            raise ConfigError(f"SCR entry {label!r} needs an order p")
        soft = SoftParams(d.get("a", DEFAULT_A), d["p"])
    kw = {key: d[key] for key in ("step_size", "max_iters", "stall_tolerance") if d.get(key) is not None}
    return LabeledConfig(label, SolverConfig(algorithm, sparsity, soft=soft, **kw))


_SPEC_KEYS = {"n", "k", "m_values", "noise_values", "trials", "base_seed", "algorithms", "a_values"}


def spec_from_dict(d: Mapping) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from a parsed JSON config.

    ``algorithms`` is either the string ``"reference"`` (the five-algorithm
    set, with optional ``a_values``) or a list of entries with keys ``label``,
    ``algorithm`` and optionally ``a``, ``p``, ``k``, ``lam``, ``step_size``,
    ``max_iters``, ``stall_tolerance``.
    """
    unknown = set(d) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    k = int(d.get("k", 16))
    algos = d.get("algorithms", "reference")
    if algos == "reference":
        algorithms = reference_algorithms(k, d.get("a_values"))
    elif isinstance(algos, list):
        algorithms = [_config_from_dict(a, k) for a in algos]
    else:
        raise ConfigError("'algorithms' must be \"reference\" or a list")
    try:
        return ExperimentSpec(
            algorithms=tuple(algorithms),
            m_values=tuple(d.get("m_values", (160,))),
            noise_values=tuple(d.get("noise_values", (0.0,))),
            n=int(d.get("n", 128)),
            k=k,
            trials=int(d.get("trials", DEFAULT_TRIALS)),
            base_seed=int(d.get("base_seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise ConfigError(str(exc)) from None


def load_spec(path) -> ExperimentSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return spec_from_dict(data)


def load_a_values(path) -> dict[str, float]:
    """Read a tuned-a cache written by ``tune-a`` (``{"a": {"SCR-2": 3.0, ...}}``)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return {str(k): float(v) for k, v in data["a"].items()}
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"{path}: not a tuned-a file ({exc})") from None
