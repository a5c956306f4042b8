"""``onebitcs`` command-line front end.

Errors are reported on stderr as a single line ``onebitcs-error: <kind>: <msg>``
with exit status 1; usage errors exit with status 2.  The default output
directory is taken from ``$ONEBITCS_OUTPUT_DIR`` (falling back to ``.``).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .errors import ConfigError, InvalidParameterError, OneBitCSError
from .metrics import angular_error, hamming_error
from .objectives import SoftParams
from .signal_model import Instance, make_instance
from .solvers import (
    DEFAULT_MAX_ITERS,
    DEFAULT_STALL_TOLERANCE,
    Algorithm,
    HardK,
    SoftLambda,
    SolverConfig,
    reconstruct,
)

OUTPUT_ENV = "ONEBITCS_OUTPUT_DIR"
STEP_HELP = "step size tau (default: 2/M for biht-l1, 1/M for biht-l2, 2/(a*p*M) for scr)"


def parse_values(text: str, cast=float) -> list:
    """``start:stop:step`` (stop inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise InvalidParameterError(f"bad range {text!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise InvalidParameterError(f"bad range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [cast(round(start + i * step, 12)) for i in range(count)]
    try:
        values = [cast(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InvalidParameterError(f"bad value list {text!r}") from None
    if not values:
        raise InvalidParameterError("empty value list")
    return values


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUTPUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver_kw(args) -> dict:
    return {"max_iters": args.max_iters, "stall_tolerance": args.stall_tol}


def _experiment_spec(args, m_values, noise_values) -> harness.ExperimentSpec:
    if args.config:
        spec = harness.load_spec(args.config)
        # explicit flags on the command line win over the file
        if args.trials is not None:
            spec = replace(spec, trials=args.trials)
        if args.seed is not None:
            spec = replace(spec, base_seed=args.seed)
        return spec
    a_values = harness.load_a_values(args.a_config) if args.a_config else {}
    algos = harness.reference_algorithms(args.k, a_values, default_a=args.a, **_solver_kw(args))
    return harness.ExperimentSpec(
        algorithms=tuple(algos),
        m_values=tuple(m_values),
        noise_values=tuple(noise_values),
        n=args.n,
        k=args.k,
        trials=args.trials if args.trials is not None else harness.DEFAULT_TRIALS,
        base_seed=args.seed if args.seed is not None else 0,
    )


def _write_sweep(result, out: Path, prefix: str, axis: str) -> list[Path]:
    paths = [out / f"{prefix}_trials.csv", out / f"{prefix}_aggregate.csv",
             out / f"{prefix}_plot_angular.csv", out / f"{prefix}_plot_hamming.csv"]
    harness.write_trials_csv(result.records, paths[0])
    harness.write_aggregate_csv(result, paths[1])
    harness.write_plot_csv(harness.plot_rows(result, "angular", axis), paths[2])
    harness.write_plot_csv(harness.plot_rows(result, "hamming", axis), paths[3])
    return paths


def _report_flagged(result) -> None:
    excluded = sum(c.excluded for c in result.cells.values())
    if excluded:
        print(f"flagged trials: {excluded}", file=sys.stderr)


def cmd_gen(args) -> int:
    inst = make_instance(args.n, args.k, args.m, args.sigma2, args.seed)
    inst.save(args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_solve(args) -> int:
    inst = Instance.load(args.instance)
    sparsity = SoftLambda(args.lam) if args.lam is not None else HardK(args.k or inst.k)
    soft = SoftParams(args.a, args.p) if args.algorithm == Algorithm.SCR.value else None
    config = SolverConfig(Algorithm(args.algorithm), sparsity, soft=soft, step_size=args.tau,
                          **_solver_kw(args))
    result = reconstruct(inst.y, inst.phi, config)
    out = Path(args.out) if args.out else _out_dir(args) / "estimate.csv"
    harness.write_rows(out, ("index", "value"), enumerate(float(v) for v in result.estimate))
    print(
        f"angular_error={angular_error(result.estimate, inst.x)!r} "
        f"hamming_error={hamming_error(result.estimate, inst.phi, inst.y)!r} "
        f"iterations={result.iterations_run} stalled={int(result.converged_by_stall)}"
    )
    return 0


def cmd_sweep_m(args) -> int:
    spec = _experiment_spec(args, parse_values(args.m_values, int), [args.sigma2])
    result = harness.sweep_measurements(spec, jobs=args.jobs)
    for p in _write_sweep(result, _out_dir(args), "sweep_m", "M"):
        print(f"wrote {p}")
    _report_flagged(result)
    return 0


def cmd_sweep_noise(args) -> int:
    spec = _experiment_spec(args, [args.m], parse_values(args.sigma2))
    result = harness.sweep_noise(spec, jobs=args.jobs)
    for p in _write_sweep(result, _out_dir(args), "sweep_noise", "sigma2"):
        print(f"wrote {p}")
    _report_flagged(result)
    return 0


def cmd_tune_a(args) -> int:
    grid = parse_values(args.a_grid)
    spec = harness.ExperimentSpec(
        algorithms=tuple(harness.reference_algorithms(args.k)),
        m_values=(args.m,), noise_values=(args.sigma2,), n=args.n, k=args.k,
        trials=args.trials if args.trials is not None else harness.DEFAULT_TRIALS,
        base_seed=args.seed if args.seed is not None else 0,
    )
    template = SolverConfig(Algorithm.SCR, HardK(args.k), soft=SoftParams(1.0, 1), **_solver_kw(args))
    best, curves = {}, {}
    for p in parse_values(args.p, int):
        a, curve = harness.tune_a(spec, p, grid, jobs=args.jobs, template=template)
        best[f"SCR-{p}"] = a
        curves[f"SCR-{p}"] = [[x, err] for x, err in curve]
        edge = " (grid endpoint: widen the grid)" if a in (min(grid), max(grid)) else ""
        print(f"SCR-{p}: best a={a!r}{edge}")
    doc = {"m": args.m, "sigma2": args.sigma2, "n": args.n, "k": args.k,
           "trials": spec.trials, "seed": spec.base_seed, "a": best, "curves": curves}
    out = Path(args.out) if args.out else _out_dir(args) / "tuned_a.json"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


def cmd_rank(args) -> int:
    sweep = harness.read_aggregate_csv(args.input)
    regime = args.regime
    if regime not in ("high-snr", "low-snr"):
        try:
            regime = float(regime)
        except ValueError:
            raise InvalidParameterError(f"regime must be high-snr, low-snr or a sigma2 value") from None
    report = harness.rank_algorithms(sweep, args.metric, regime, m=args.m, margin=args.margin,
                                     required=() if args.any_labels else harness.REFERENCE_LABELS)
    print(f"metric={report.metric} M={report.m} sigma2={report.sigma2!r}")
    for i, e in enumerate(report.entries, 1):
        print(f"{i}. {harness.reference_number(e.label)} {e.label}: mean={e.mean:.6f} stderr={e.stderr:.6f}")
    print(f"rank: {report.chain()}")
    if args.out:
        n = len(report.entries)
        harness.write_rows(args.out, ("rank", "label", "number", "mean", "stderr", "tied_with_next"), (
            (i + 1, e.label, harness.reference_number(e.label), e.mean, e.stderr,
             bool(i + 1 < n and report.tied[i][i + 1]))
            for i, e in enumerate(report.entries)
        ))
    return 0


def cmd_scatter(args) -> int:
    spec = _experiment_spec(args, [args.m], [args.sigma2])
    if len(spec.noise_values) != 1:
        raise ConfigError("scatter runs at a single noise level")
    sigma2 = spec.noise_values[0]
    records = harness.run_grid(spec, jobs=args.jobs).records
    out = _out_dir(args)
    path = out / "scatter.csv"
    harness.write_rows(path, ("label", "trial", "seed", "hamming_error", "angular_error"), (
        (r.label, r.trial, r.seed, r.hamming_error, r.angular_error) for r in records
    ))
    points = [(r.hamming_error, r.angular_error, r.label) for r in records]
    rows = []
    for algo in spec.algorithms:
        mine = [r for r in records if r.label == algo.label and not r.flagged]
        ham = np.array([r.hamming_error for r in mine])
        ang = np.array([r.angular_error for r in mine])
        se = float(ang.std(ddof=1) / np.sqrt(ang.size)) if ang.size > 1 else 0.0
        rows.append((algo.label, float(ham.mean()), float(ang.mean()), se))
        print(f"{algo.label}: mean distance to origin "
              f"{harness.mean_distance_to_origin(points, algo.label):.6f} (sigma2={sigma2!r})")
    harness.write_plot_csv(rows, out / "scatter_plot.csv")
    print(f"wrote {path}")
    print(f"wrote {out / 'scatter_plot.csv'}")
    return 0


def _add_solver_flags(p) -> None:
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS, help="iteration cap l_max")
    p.add_argument("--stall-tol", type=float, default=DEFAULT_STALL_TOLERANCE,
                   help="stop when ||x_l - x_{l-1}|| <= this")


def _add_experiment_flags(p) -> None:
    p.add_argument("--n", type=int, default=128, help="signal length N")
    p.add_argument("--k", type=int, default=16, help="sparsity K")
    p.add_argument("--trials", type=int, default=None,
                   help=f"paired trials per cell (default: {harness.DEFAULT_TRIALS})")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--a", type=float, default=harness.DEFAULT_A,
                   help="steepness a for SCR-1/2/4 when no --a-config entry exists")
    p.add_argument("--a-config", help="tuned-a JSON written by tune-a")
    p.add_argument("--config", help="JSON experiment spec (replaces the flags above)")
    p.add_argument("--out-dir", help=f"output directory (default: ${OUTPUT_ENV} or .)")
    _add_solver_flags(p)


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Append ``(default: ...)`` unless the help text already names its default."""

    def _get_help_string(self, action):
        text = action.help or ""
        if "default" in text or action.default is None:
            return text
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = argparse.ArgumentParser(prog="onebitcs", description=__doc__.splitlines()[0],
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate and save one instance", formatter_class=fmt)
    p.add_argument("--n", type=int, default=128, help="signal length N")
    p.add_argument("--k", type=int, default=16, help="sparsity K")
    p.add_argument("--m", type=int, default=160, help="measurement count M")
    p.add_argument("--sigma2", type=float, default=0.0, help="noise variance sigma^2")
    p.add_argument("--seed", type=int, default=0, help="instance seed")
    p.add_argument("--out", required=True, help="instance .npz path")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="reconstruct a saved instance", formatter_class=fmt)
    p.add_argument("--instance", required=True, help="instance .npz written by gen")
    p.add_argument("--algorithm", choices=[a.value for a in Algorithm], default="scr",
                   help="reconstruction algorithm")
    p.add_argument("--a", type=float, default=harness.DEFAULT_A, help="SCR steepness a")
    p.add_argument("--p", type=int, default=2, help="SCR order p")
    p.add_argument("--k", type=int, default=None, help="hard sparsity K (default: instance K)")
    p.add_argument("--lam", type=float, default=None, help="soft-threshold lambda (replaces --k)")
    p.add_argument("--tau", type=float, default=None, help=STEP_HELP)
    p.add_argument("--out", help="estimate CSV path (default: <out-dir>/estimate.csv)")
    p.add_argument("--out-dir", help=f"output directory (default: ${OUTPUT_ENV} or .)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep-m", help="sweep the measurement count", formatter_class=fmt)
    p.add_argument("--m-values", default=",".join(str(m) for m in harness.DEFAULT_M_VALUES),
                   help="measurement counts: start:stop:step or comma list")
    p.add_argument("--sigma2", type=float, default=0.0, help="noise variance sigma^2")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep_m)

    p = sub.add_parser("sweep-noise", help="sweep the noise variance", formatter_class=fmt)
    p.add_argument("--m", type=int, default=160, help="measurement count M")
    p.add_argument("--sigma2", default="0:5:0.5", help="start:stop:step or comma list")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep_noise)

    p = sub.add_parser("tune-a", help="grid-search a for SCR-p", formatter_class=fmt)
    p.add_argument("--p", default="1,2,4", help="orders to tune")
    p.add_argument("--a-grid", default="0.25,0.5,1,1.5,2,3,4,6,8,12,16,25", help="candidate a values")
    p.add_argument("--m", type=int, default=160, help="measurement count M")
    p.add_argument("--sigma2", type=float, default=0.0, help="noise variance sigma^2")
    p.add_argument("--out", help="tuned-a JSON path (default: <out-dir>/tuned_a.json)")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_tune_a)

    p = sub.add_parser("rank", help="rank algorithms from an aggregate CSV", formatter_class=fmt)
    p.add_argument("--input", required=True, help="aggregate CSV from a sweep")
    p.add_argument("--metric", choices=["angular", "hamming"], default="angular")
    p.add_argument("--regime", default="low-snr", help="high-snr, low-snr, or a sigma2 value")
    p.add_argument("--m", type=int, default=None, help="M to rank at (needed if the sweep has several)")
    p.add_argument("--margin", type=float, default=1.0, help="tie margin in pooled standard errors")
    p.add_argument("--any-labels", action="store_true",
                   help="do not require the five reference algorithms")
    p.add_argument("--out", help="optional rank CSV")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("scatter", help="per-trial (hamming, angular) points", formatter_class=fmt)
    p.add_argument("--m", type=int, default=160, help="measurement count M")
    p.add_argument("--sigma2", type=float, default=5.0, help="noise variance sigma^2")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_scatter)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OneBitCSError as exc:
        print(f"onebitcs-error: {exc.kind}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"onebitcs-error: io: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
