"""Command-line interface: create, insert, predict, synth, bench, eval.

Data goes to stdout, diagnostics and errors to stderr; the exit status is 0
exactly when the command succeeded.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import kernels
from .errors import PagecastError
from .incremental import HyperParams, create_model
from .ingestion import TimeSeriesBatch, aggregate, load_csv, write_csv
from .metrics import ExperimentGrid, nrmse_pooled, wbc
from .persistence import load_model, save_model
from .query import predict_point, predict_range
from .synth import corrupt, gen_lrf, gen_synthetic_I, gen_synthetic_II, gen_synthetic_III


def _hyper_params(args) -> HyperParams:
    return HyperParams(
        T0=args.T0, Tprime=args.Tprime, gamma=args.gamma,
        L=args.L, k1=args.k1, k2=args.k2, coeff_window=args.coeff_window)


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--T0", type=int, default=100,
                   help="minimum observations before training (default 100)")
    p.add_argument("--Tprime", type=int, default=2_500_000,
                   help="sub-model span in observations (default 2.5e6)")
    p.add_argument("--gamma", type=float, default=0.5,
                   help="retrain growth factor in (0,1] (default 0.5)")
    p.add_argument("--L", type=int, default=None,
                   help="fixed Page-matrix window (default: data-driven)")
    p.add_argument("--k1", type=int, default=None,
                   help="fixed mean-model rank (default: data-driven)")
    p.add_argument("--k2", type=int, default=None,
                   help="fixed variance-model rank (default: data-driven)")
    p.add_argument("--coeff-window", dest="coeff_window", type=int, default=10,
                   help="sub-models averaged for forecasting (default 10)")


def _emit_table(rows: list[dict], fmt: str) -> None:
    if not rows:
        return
    headers = list(rows[0].keys())
    if fmt == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(headers)
        for row in rows:
            writer.writerow([row[h] for h in headers])
        return
    widths = {h: max(len(h), max(len(str(r[h])) for r in rows)) for h in headers}
    print("  ".join(h.ljust(widths[h]) for h in headers))
    print("  ".join("-" * widths[h] for h in headers))
    for row in rows:
        print("  ".join(str(row[h]).ljust(widths[h]) for h in headers))


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


# --- create / insert -----------------------------------------------------------


def cmd_create(args) -> int:
    if os.path.exists(args.model) and not args.overwrite:
        print(f"error: {args.model} exists (use --overwrite)", file=sys.stderr)
        return 1
    value_cols = args.value_cols.split(",") if args.value_cols else None
    batch = load_csv(args.input, args.time_col, value_cols, tick=args.tick)
    if args.aggregate > 1:
        batch = aggregate(batch, args.aggregate, args.agg_fn)
    start = time.perf_counter()
    model = create_model(batch, _hyper_params(args))
    save_model(model, args.model)
    elapsed = time.perf_counter() - start
    total = batch.n_series * batch.n_steps
    print(f"trained {batch.n_series} series x {batch.n_steps} steps "
          f"({total} observations) in {elapsed:.3f} s "
          f"({1e6 * elapsed / max(total, 1):.2f} us/record)", file=sys.stderr)
    retrains = sum(len(sm.retrain_history) for sm in model.submodels)
    print(f"sub-models: {len(model.submodels)}, full retrains: {retrains}",
          file=sys.stderr)
    for sm in model.submodels:
        if sm.retrain_history:
            print(f"  sub-model {sm.index}: retrained at observation counts "
                  f"{sm.retrain_history}", file=sys.stderr)
    if model.in_fallback:
        print("warning: fewer observations than --T0; model is in "
              "fallback mode (predicts the running mean)", file=sys.stderr)
    return 0


def cmd_insert(args) -> int:
    model = load_model(args.model)
    value_cols = args.value_cols.split(",") if args.value_cols else model.names
    batch = load_csv(args.input, args.time_col, value_cols, tick=args.tick)
    if list(batch.names) != list(model.names):
        print(f"error: columns {batch.names} do not match model series "
              f"{model.names}", file=sys.stderr)
        return 1
    start = time.perf_counter()
    for step in range(batch.n_steps):
        model.insert(batch.values[:, step], batch.observed[:, step])
    save_model(model, args.model)
    elapsed = time.perf_counter() - start
    print(f"inserted {batch.n_steps} steps in {elapsed:.3f} s", file=sys.stderr)
    return 0


# --- predict -----------------------------------------------------------------


def cmd_predict(args) -> int:
    if (args.t is None) == (args.range is None):
        print("error: exactly one of --t / --range is required", file=sys.stderr)
        return 1
    model = load_model(args.model)
    with_uq = not args.no_uq
    if args.t is not None:
        results = [predict_point(model, args.series, args.t, args.confidence,
                                 args.interval, with_uq)]
    else:
        try:
            lo, hi = (int(x) for x in args.range.split(":"))
        except ValueError:
            print(f"error: bad range {args.range!r}, expected A:B", file=sys.stderr)
            return 1
        results = predict_range(model, args.series, lo, hi, args.confidence,
                                args.interval, with_uq)
    rows = []
    for r in results:
        row = {"t": r.t, "series": r.series, "mean": _fmt(r.mean)}
        if with_uq:
            row.update(variance=_fmt(r.variance), lo=_fmt(r.lo), hi=_fmt(r.hi))
        row["kind"] = r.kind
        rows.append(row)
    _emit_table(rows, args.format)
    return 0


# --- synth ---------------------------------------------------------------------


def _write_truth(truth, out_dir: str, tag: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    base = truth.observations
    write_csv(base, os.path.join(out_dir, f"{tag}_obs.csv"))
    ones = np.ones_like(truth.latent_mean, dtype=bool)
    write_csv(TimeSeriesBatch(base.names, truth.latent_mean, ones,
                              base.t0, base.step),
              os.path.join(out_dir, f"{tag}_mean.csv"))
    write_csv(TimeSeriesBatch(base.names, truth.latent_var, ones,
                              base.t0, base.step),
              os.path.join(out_dir, f"{tag}_var.csv"))


def cmd_synth(args) -> int:
    if args.preset == "synth1":
        truth = gen_synthetic_I(args.n, args.m, args.T, args.r, args.seed,
                                preset=args.variant)
        if args.sigma > 0 or args.p_obs < 1.0:
            truth = corrupt(truth, args.sigma, args.p_obs, args.seed)
        _write_truth(truth, args.out, "synth1")
    elif args.preset == "synth2":
        for (noise, dyn), truth in gen_synthetic_II(args.seed, args.T).items():
            _write_truth(truth, args.out, f"synth2_{noise}_{dyn}")
    elif args.preset == "synth3":
        for noise, truth in gen_synthetic_III(args.T, args.seed).items():
            _write_truth(truth, args.out, f"synth3_{noise}")
    else:
        truth = gen_lrf(args.K, args.R_max, args.n, args.T, args.seed)
        _write_truth(truth, args.out, "lrf")
    print(f"wrote {args.preset} data to {args.out}", file=sys.stderr)
    return 0


# --- bench ---------------------------------------------------------------------


def _bench_one(batch, truth_mean, hp, n_queries: int, seed: int) -> dict:
    start = time.perf_counter()
    model = create_model(batch, hp)
    train_s = time.perf_counter() - start
    total = batch.n_series * batch.n_steps

    rng = np.random.default_rng(seed)
    ts = rng.integers(1, batch.n_steps + 1, size=n_queries)
    series = rng.integers(0, batch.n_series, size=n_queries)
    predict_point(model, 0, 1)  # warm the jitted kernels
    predict_point(model, 0, batch.n_steps + 1)
    lat = np.empty(n_queries)
    for i in range(n_queries):
        q0 = time.perf_counter()
        predict_point(model, int(series[i]), int(ts[i]))
        lat[i] = time.perf_counter() - q0

    row = {
        "train_s": round(train_s, 4),
        "us_per_obs": round(1e6 * train_s / total, 3),
        "p50_ms": round(1e3 * float(np.percentile(lat, 50)), 4),
        "p99_ms": round(1e3 * float(np.percentile(lat, 99)), 4),
    }
    if truth_mean is not None:
        preds = np.array([
            predict_point(model, int(s), int(t)).mean
            for s, t in zip(series, ts)])
        truth = truth_mean[series, ts - 1]
        if truth.std() > 0:
            err = (preds - truth) / truth.std()
            row["nrmse"] = round(float(np.sqrt(np.mean(err ** 2))), 4)
    return row


def cmd_bench(args) -> int:
    rows = []
    if args.compare_kernels:
        rows.extend(_bench_kernels(args))
        _emit_table(rows, args.format)
        return 0

    if args.input is not None:
        batch = load_csv(args.input, args.time_col)
        if batch.n_series * batch.n_steps < args.T0:
            print("warning: input smaller than --T0; model stays in "
                  "fallback mode", file=sys.stderr)
        row = {"input": os.path.basename(args.input)}
        row.update(_bench_one(batch, None, _hyper_params(args),
                              args.queries, args.seed))
        _emit_table([row], args.format)
        return 0

    def make_truth(n_series, steps):
        t = gen_synthetic_I(1, n_series, steps, 4, args.seed, preset="scaling")
        return corrupt(t, sigma=args.sigma, seed=args.seed)

    if args.vary_N:
        for n_series in (int(x) for x in args.vary_N.split(",")):
            truth = make_truth(n_series, args.steps)
            row = {"N": n_series}
            row.update(_bench_one(truth.observations, truth.latent_mean,
                                  _hyper_params(args), args.queries, args.seed))
            rows.append(row)
    elif args.vary_Tprime:
        for tprime in (int(float(x)) for x in args.vary_Tprime.split(",")):
            truth = make_truth(args.N, args.steps)
            hp = _hyper_params(args)
            hp = HyperParams(T0=hp.T0, Tprime=tprime, gamma=hp.gamma, L=hp.L,
                             k1=hp.k1, k2=hp.k2, coeff_window=hp.coeff_window)
            row = {"Tprime": tprime}
            row.update(_bench_one(truth.observations, truth.latent_mean, hp,
                                  args.queries, args.seed))
            rows.append(row)
    else:
        for size in (int(float(x)) for x in args.sizes.split(",")):
            steps = max(size // args.N, 10)
            truth = make_truth(args.N, steps)
            row = {"total_obs": args.N * steps}
            row.update(_bench_one(truth.observations, truth.latent_mean,
                                  _hyper_params(args), args.queries, args.seed))
            rows.append(row)
    _emit_table(rows, args.format)
    return 0


def _bench_kernels(args) -> list[dict]:
    """Time the numba kernels against their numpy fallbacks."""
    rng = np.random.default_rng(args.seed)
    rows = []
    beta = rng.normal(size=64)
    beta /= np.abs(beta).sum() * 1.01
    seed_win = rng.normal(size=64)
    steps = 20000
    variants = [("numpy", kernels.ar_recurrence_numpy)]
    if kernels.NUMBA_ENABLED:
        kernels.ar_recurrence_numba(seed_win, beta, 4)  # warm the JIT
        variants.append(("numba", kernels.ar_recurrence_numba))
    for name, fn in variants:
        t0 = time.perf_counter()
        for _ in range(args.repeat):
            fn(seed_win, beta, steps)
        dt = (time.perf_counter() - t0) / args.repeat
        rows.append({"kernel": "ar_recurrence", "impl": name,
                     "ms": round(1e3 * dt, 4)})

    U = rng.normal(size=(100, 12))
    s = np.abs(rng.normal(size=12))
    V = rng.normal(size=(5000, 12))
    rr = rng.integers(0, 100, size=10000)
    cc = rng.integers(0, 5000, size=10000)
    variants = [("numpy", kernels.reconstruct_points_numpy)]
    if kernels.NUMBA_ENABLED:
        kernels.reconstruct_points_numba(U, s, V, rr[:4], cc[:4])
        variants.append(("numba", kernels.reconstruct_points_numba))
    for name, fn in variants:
        t0 = time.perf_counter()
        for _ in range(args.repeat):
            fn(U, s, V, rr, cc)
        dt = (time.perf_counter() - t0) / args.repeat
        rows.append({"kernel": "reconstruct_points", "impl": name,
                     "ms": round(1e3 * dt, 4)})
    return rows


# --- eval ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    with open(args.manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"algorithm", "experiment", "pred", "truth"}
        if not needed <= set(reader.fieldnames or ()):
            print(f"error: manifest needs columns {sorted(needed)}",
                  file=sys.stderr)
            return 1
        entries = list(reader)
    if not entries:
        print("error: empty manifest", file=sys.stderr)
        return 1

    algorithms = sorted({e["algorithm"] for e in entries})
    experiments = sorted({e["experiment"] for e in entries})
    errors = np.full((len(algorithms), len(experiments)), np.nan)
    base = os.path.dirname(os.path.abspath(args.manifest))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    for e in entries:
        pred = load_csv(resolve(e["pred"]), args.time_col)
        truth = load_csv(resolve(e["truth"]), args.time_col)
        score = nrmse_pooled(pred.zero_filled(), truth.zero_filled())
        errors[algorithms.index(e["algorithm"]),
               experiments.index(e["experiment"])] = score

    grid = ExperimentGrid(algorithms, experiments, errors)
    scores = wbc(grid)
    rows = []
    for i, a in enumerate(algorithms):
        row = {"algorithm": a, "wbc": round(scores[a], 4),
               "mean_nrmse": round(float(errors[i].mean()), 4)}
        for j, x in enumerate(experiments):
            row[x] = round(float(errors[i, j]), 4)
        rows.append(row)
    _emit_table(rows, args.format)
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagecast",
        description="incremental low-rank time series prediction engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("create", help="train a model from a CSV and persist it")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, help="model directory to write")
    p.add_argument("--time-col", default="t")
    p.add_argument("--value-cols", default=None,
                   help="comma-separated subset (default: all non-time columns)")
    p.add_argument("--tick", type=float, default=None,
                   help="bucket irregular timestamps onto this grid spacing")
    p.add_argument("--aggregate", type=int, default=1,
                   help="aggregate this many ticks per output step")
    p.add_argument("--agg-fn", default="mean",
                   choices=("mean", "min", "max", "sum", "last"))
    p.add_argument("--overwrite", action="store_true")
    _add_hyper_flags(p)
    p.set_defaults(fn=cmd_create)

    p = sub.add_parser("insert", help="append new rows to a persisted model")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--time-col", default="t")
    p.add_argument("--value-cols", default=None)
    p.add_argument("--tick", type=float, default=None)
    p.set_defaults(fn=cmd_insert)

    p = sub.add_parser("predict", help="point or range predictions")
    p.add_argument("--model", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--range", default=None, help="A:B inclusive")
    p.add_argument("--confidence", type=float, default=95.0)
    p.add_argument("--interval", default="gaussian",
                   choices=("gaussian", "chebyshev"))
    p.add_argument("--no-uq", action="store_true",
                   help="skip variance estimation and intervals")
    p.add_argument("--format", default="table", choices=("csv", "table"))
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("synth", help="write synthetic benchmark data as CSV")
    p.add_argument("--preset", required=True,
                   choices=("synth1", "synth2", "synth3", "lrf"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--R-max", dest="R_max", type=int, default=2)
    p.add_argument("--variant", default="default", choices=("default", "scaling"))
    p.add_argument("--sigma", type=float, default=0.0,
                   help="additive noise std for synth1")
    p.add_argument("--p-obs", dest="p_obs", type=float, default=1.0,
                   help="fraction of entries kept observed for synth1")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("bench", help="train/query benchmarks")
    p.add_argument("--preset", default="synth1", choices=("synth1", "synthI"),
                   help="synthetic data family (harmonic-mixture tensor)")
    p.add_argument("--input", default=None,
                   help="benchmark on a CSV instead of synthetic data")
    p.add_argument("--time-col", default="t")
    p.add_argument("--sizes", default="1e4,1e5",
                   help="comma-separated total observation counts")
    p.add_argument("--vary-N", dest="vary_N", default=None,
                   help="comma-separated series counts")
    p.add_argument("--vary-Tprime", dest="vary_Tprime", default=None,
                   help="comma-separated sub-model spans")
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--compare-kernels", action="store_true",
                   help="time numba kernels against the numpy fallbacks")
    p.add_argument("--format", default="table", choices=("csv", "table"))
    _add_hyper_flags(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("eval", help="score prediction/truth CSV pairs")
    p.add_argument("--manifest", required=True,
                   help="CSV with columns algorithm,experiment,pred,truth")
    p.add_argument("--time-col", default="t")
    p.add_argument("--format", default="table", choices=("csv", "table"))
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "synth" and args.T is None:
        args.T = {"synth1": 15000, "synth2": 15000,
                  "synth3": 100000, "lrf": 2000}[args.preset]
    try:
        return args.fn(args)
    except PagecastError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
