"""Command-line interface.

Subcommands: ``simulate`` (write a synthetic event file), ``analyze`` (ACF
curves and slope fits for an event file), ``shuffle-test`` (the four-way
surrogate comparison), ``predict`` (closed-form step ACF, asymptotic
exponents and Laplace-inverted moments).  Every run writes a manifest
echoing the fully resolved configuration; all randomness descends from the
single --seed, so reruns are byte-identical for any worker count.

Exit codes: 0 success, 2 domain/validation error, 64 usage error,
70 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .distributions import IncrementModel, RepetitionDistribution, WaitingTimeModel
from .estimators import (
    FitRangeError,
    curve_report,
    fit_slope,
    log_bin_edges,
    session_scatter_stderr,
    step_acf_waiting,
    time_acf,
)
from .series import read_event_csv, write_event_csv
from .simulate import SimConfig, default_workers, ensemble_moments, simulate_series
from .tickdata import (
    SessionRules,
    SurrogateKind,
    build_seasonal_profile,
    ingest_ticks,
    join_sessions,
    make_surrogate,
    stationarize,
)
from .theory import (
    ExpansionCoefficients,
    asymptotic_moment_exponents,
    invert_laplace,
    laplace_moments,
    step_acf_asymptotic_slope,
    step_acf_exact,
)

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_USAGE = 64
EXIT_NUMERIC = 70


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _parse_psi(spec: str) -> WaitingTimeModel:
    parts = spec.split(":")
    kind = parts[0]
    if kind == "exp":
        return WaitingTimeModel.exponential(float(parts[1]))
    if kind == "logn":
        return WaitingTimeModel.lognormal(float(parts[1]), float(parts[2]))
    if kind == "emp":
        vals = np.loadtxt(parts[1], ndmin=1)
        return WaitingTimeModel.empirical(vals)
    raise ValueError(f"unknown waiting-time spec '{spec}' (exp:RATE, logn:MU:SIGMA, emp:PATH)")


def _parse_h(spec: str) -> IncrementModel:
    parts = spec.split(":")
    kind = parts[0]
    if kind == "gauss":
        return IncrementModel.gaussian(float(parts[1]), float(parts[2]))
    if kind == "halfgauss":
        return IncrementModel.gaussian(float(parts[1]), float(parts[2]), half_rectified=True)
    if kind == "twopoint":
        return IncrementModel.two_point(float(parts[1]))
    if kind == "halftwopoint":
        return IncrementModel.two_point(float(parts[1]), half_rectified=True)
    if kind == "emp":
        vals = np.loadtxt(parts[1], ndmin=1)
        return IncrementModel.empirical(vals)
    raise ValueError(
        f"unknown increment spec '{spec}' "
        "(gauss:MU:SIGMA, halfgauss:MU:SIGMA, twopoint:A, halftwopoint:A, emp:PATH)"
    )


def _parse_range(spec: str) -> tuple[float, float]:
    lo, hi = spec.split(":")
    return float(lo), float(hi)


def _load_config_file(path) -> dict:
    text = open(path).read()
    try:
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("config JSON must be an object")
        return obj
    except json.JSONDecodeError:
        out = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
        return out


def _resolve(args, defaults: dict) -> dict:
    """Flags win over config-file entries, which win over defaults."""
    cfg_file = _load_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, default in defaults.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            resolved[key] = flag_val
        elif key in cfg_file:
            val = cfg_file[key]
            if default is not None and not isinstance(val, type(default)):
                val = type(default)(val)
            resolved[key] = val
        else:
            resolved[key] = default
    return resolved


def _write_manifest(outdir, command, resolved) -> None:
    manifest = {
        "package": "repwalk",
        "version": __version__,
        "command": command,
        "config": resolved,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_curve_csv(path, curve, header_meta=None):
    se = curve.stderr
    with open(path, "w") as fh:
        for k, v in (header_meta or {}).items():
            fh.write(f"# {k}={v}\n")
        fh.write("lag,value,pair_count,stderr\n")
        for i in range(len(curve.lags)):
            v = curve.values[i]
            s = se[i] if se is not None else float("nan")
            fh.write(
                f"{curve.lags[i]:.17g},"
                f"{v if np.isfinite(v) else float('nan'):.17g},"
                f"{int(curve.pair_counts[i])},"
                f"{s if np.isfinite(s) else float('nan'):.17g}\n"
            )


def _fit_or_none(curve, lo, hi, bootstrap, seed):
    """Fit the slope, shrinking the upper end once if the tail goes
    non-positive (shuffled surrogates routinely destroy the tail)."""
    try:
        return fit_slope(curve, lo, hi, bootstrap=bootstrap, seed=seed), None
    except FitRangeError:
        lags = np.asarray(curve.lags, dtype=np.float64)
        vals = np.asarray(curve.values, dtype=np.float64)
        bad = (lags >= lo) & (lags <= hi) & np.isfinite(vals) & (vals <= 0)
        if bad.any():
            hi2 = lags[bad].min() * 0.999
            try:
                return fit_slope(curve, lo, hi2, bootstrap=bootstrap, seed=seed), None
            except (FitRangeError, ValueError) as exc:
                return None, str(exc)
        return None, "too few usable points"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

_SIM_DEFAULTS = dict(
    rho=None,
    n_events=100_000,
    n_trajectories=1,
    psi="exp:1.0",
    h="gauss:0:1",
    seed=0,
    fresh_start=False,
    out=".",
)


def cmd_simulate(args) -> int:
    resolved = _resolve(args, _SIM_DEFAULTS)
    if resolved["rho"] is None:
        raise SystemExit(EXIT_USAGE)
    rho = float(resolved["rho"])
    if rho <= 2.0:
        raise ValueError(f"non-ergodic regime: rho={rho} must exceed 2")
    cfg = SimConfig(
        repetition=RepetitionDistribution(rho),
        waiting=_parse_psi(resolved["psi"]),
        increment=_parse_h(resolved["h"]),
        n_events=int(float(resolved["n_events"])),
        n_trajectories=int(float(resolved["n_trajectories"])),
        seed=int(resolved["seed"]),
        stationary_start=not resolved["fresh_start"],
    )
    resolved["n_events"] = cfg.n_events
    resolved["n_trajectories"] = cfg.n_trajectories
    outdir = resolved["out"]
    os.makedirs(outdir, exist_ok=True)
    series = simulate_series(cfg)
    write_event_csv(series, os.path.join(outdir, "events.csv"))
    _write_manifest(outdir, "simulate", resolved)
    print(f"wrote {len(series)} events in {series.n_sessions} session(s) to {outdir}")
    return EXIT_OK


_ANALYZE_DEFAULTS = dict(
    input=None,
    stationarize=False,
    join=False,
    bin_width=300.0,
    max_step_lag=1000,
    grid_dt=None,
    time_min=None,
    time_max=None,
    per_decade=12,
    fit_step="10:1000",
    fit_time="10:1000",
    bootstrap=0,
    seed=0,
    out=".",
)


def _load_series(resolved):
    path = resolved["input"]
    if path is None:
        raise ValueError("--input is required")
    series = read_event_csv(path)
    if resolved["stationarize"]:
        profile = build_seasonal_profile(series, float(resolved["bin_width"]))
        series = stationarize(series, profile)
    if resolved["join"]:
        series = join_sessions(series)
    return series


def _time_edges(series, resolved):
    grid_dt = resolved["grid_dt"]
    if grid_dt is None:
        grid_dt = float(series.waiting_times().mean())
    grid_dt = float(grid_dt)
    lo = float(resolved["time_min"]) if resolved["time_min"] is not None else grid_dt
    hi = (
        float(resolved["time_max"])
        if resolved["time_max"] is not None
        else 2000.0 * grid_dt
    )
    return grid_dt, log_bin_edges(max(lo, grid_dt), hi, int(resolved["per_decade"]))


def cmd_analyze(args) -> int:
    resolved = _resolve(args, _ANALYZE_DEFAULTS)
    series = _load_series(resolved)
    outdir = resolved["out"]
    os.makedirs(outdir, exist_ok=True)

    max_lag = int(float(resolved["max_step_lag"]))
    step_curve = step_acf_waiting(series, max_lag)
    if series.n_sessions >= 2:
        step_curve.stderr = session_scatter_stderr(step_curve)
    grid_dt, edges = _time_edges(series, resolved)
    time_curve = time_acf(series, edges, grid_dt)
    if series.n_sessions >= 2:
        time_curve.stderr = session_scatter_stderr(time_curve)

    boot = int(resolved["bootstrap"])
    seed = int(resolved["seed"])
    step_lo, step_hi = _parse_range(resolved["fit_step"])
    time_lo, time_hi = _parse_range(resolved["fit_time"])
    step_fit, step_err = _fit_or_none(step_curve, step_lo, step_hi, boot, seed)
    time_fit, time_err = _fit_or_none(time_curve, time_lo, time_hi, boot, seed)

    _write_curve_csv(os.path.join(outdir, "step_acf.csv"), step_curve)
    _write_curve_csv(
        os.path.join(outdir, "time_acf.csv"),
        time_curve,
        {"grid_dt": f"{grid_dt:.17g}"},
    )
    fits = {
        "n_events": len(series),
        "n_sessions": series.n_sessions,
        "stationarized": series.stationarized,
        "step": curve_report(step_curve, step_fit) if step_fit else {"error": step_err},
        "time": curve_report(time_curve, time_fit) if time_fit else {"error": time_err},
    }
    with open(os.path.join(outdir, "fits.json"), "w") as fh:
        json.dump(fits, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(outdir, "analyze", resolved)
    if step_fit:
        print(f"step ACF slope {step_fit.slope:+.4f} +- {step_fit.stderr:.4f}")
    if time_fit:
        print(f"time ACF slope {time_fit.slope:+.4f} +- {time_fit.stderr:.4f}")
    return EXIT_OK


_SHUFFLE_DEFAULTS = dict(
    input=None,
    stationarize=False,
    join=False,
    bin_width=300.0,
    grid_dt=None,
    time_min=None,
    time_max=None,
    per_decade=12,
    fit_time="10:1000",
    bootstrap=100,
    seed=0,
    out=".",
)

_SURROGATE_FILES = {
    SurrogateKind.ORIGINAL: "time_acf_original.csv",
    SurrogateKind.SHUFFLE_DT: "time_acf_dt.csv",
    SurrogateKind.SHUFFLE_DX: "time_acf_dx.csv",
    SurrogateKind.SHUFFLE_BOTH: "time_acf_both.csv",
}


def cmd_shuffle_test(args) -> int:
    resolved = _resolve(args, _SHUFFLE_DEFAULTS)
    series = _load_series(resolved)
    outdir = resolved["out"]
    os.makedirs(outdir, exist_ok=True)
    grid_dt, edges = _time_edges(series, resolved)
    lo, hi = _parse_range(resolved["fit_time"])
    boot = int(resolved["bootstrap"])
    seed = int(resolved["seed"])

    report = {"grid_dt": grid_dt, "fit_range": [lo, hi], "slopes": {}}
    for kind, fname in _SURROGATE_FILES.items():
        surrogate = make_surrogate(series, kind, seed)
        curve = time_acf(surrogate, edges, grid_dt)
        if surrogate.n_sessions >= 2:
            curve.stderr = session_scatter_stderr(curve)
        fit, err = _fit_or_none(curve, lo, hi, boot, seed)
        _write_curve_csv(os.path.join(outdir, fname), curve, {"surrogate": kind.value})
        report["slopes"][kind.value] = (
            {
                "slope": fit.slope,
                "stderr": fit.stderr,
                "stderr_ols": fit.stderr_ols,
                "range": list(fit.fit_range),
                "n_points": fit.n_points,
            }
            if fit
            else {"error": err}
        )
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(outdir, "shuffle-test", resolved)
    for kind in _SURROGATE_FILES:
        entry = report["slopes"][kind.value]
        if "slope" in entry:
            print(f"{kind.value:12s} slope {entry['slope']:+.4f} +- {entry['stderr']:.4f}")
        else:
            print(f"{kind.value:12s} no fit: {entry['error']}")
    return EXIT_OK


_PREDICT_DEFAULTS = dict(
    rho=None,
    psi="exp:1.0",
    h="gauss:1:1",
    lag_max=100_000,
    per_decade=12,
    t_grid="10:100:7",
    s_grid="0.01:10:13",
    order=12,
    out=".",
)


def cmd_predict(args) -> int:
    resolved = _resolve(args, _PREDICT_DEFAULTS)
    rho = float(resolved["rho"])
    if rho <= 2.0:
        raise ValueError(f"non-ergodic regime: rho={rho} must exceed 2")
    rep = RepetitionDistribution(rho)
    waiting = _parse_psi(resolved["psi"])
    increment = _parse_h(resolved["h"])
    outdir = resolved["out"]
    os.makedirs(outdir, exist_ok=True)

    # exact step ACF on a log lag grid
    lags = np.unique(
        np.round(
            np.geomspace(1, float(resolved["lag_max"]), int(resolved["per_decade"]) * 6)
        ).astype(np.int64)
    )
    corr = step_acf_exact(rep, lags)
    exps = asymptotic_moment_exponents(rho, mu1_zero=(increment.mean == 0.0))
    with open(os.path.join(outdir, "analytic_step_acf.csv"), "w") as fh:
        fh.write(f"# asymptotic_slope={step_acf_asymptotic_slope(rep):.17g}\n")
        fh.write(f"# m1_powerlaw_exp={exps['m1_powerlaw_exp']:.17g}\n")
        fh.write(f"# variance_powerlaw_exp={exps['variance_powerlaw_exp']:.17g}\n")
        fh.write(f"# acf_exp={exps['acf_exp']:.17g}\n")
        fh.write("lag,corr\n")
        for n, c in zip(lags, corr):
            fh.write(f"{n},{c:.17g}\n")

    # Laplace-domain moments on the s grid
    s_lo, s_hi, s_n = resolved["s_grid"].split(":")
    s_grid = np.geomspace(float(s_lo), float(s_hi), int(s_n))
    warned = False
    lm = None
    try:
        lm = laplace_moments(s_grid, waiting, increment, rep)
        with open(os.path.join(outdir, "laplace_check.csv"), "w") as fh:
            fh.write(f"# ratio_c10_over_c01={ExpansionCoefficients(rho, waiting.mean_dt).ratio_c10_over_c01:.17g}\n")
            fh.write("s,m1_tilde,m2_tilde,truncation_error_bound\n")
            for i, s in enumerate(lm.s_grid):
                fh.write(
                    f"{s:.17g},{lm.m1_tilde[i]:.17g},{lm.m2_tilde[i]:.17g},"
                    f"{lm.truncation_error[i]:.3g}\n"
                )
    except RuntimeError as exc:
        warned = True
        print(f"warning: laplace grid evaluation failed: {exc}", file=sys.stderr)

    if lm is not None:
        t_lo, t_hi, t_n = resolved["t_grid"].split(":")
        t_grid = np.geomspace(float(t_lo), float(t_hi), int(t_n))
        curves = invert_laplace(lm, t_grid, order=int(resolved["order"]))
        with open(os.path.join(outdir, "moments.csv"), "w") as fh:
            fh.write("t,m1,m2,m1_error_estimate,m2_error_estimate,reliable\n")
            for i, t in enumerate(curves.t_grid):
                fh.write(
                    f"{t:.17g},{curves.m1[i]:.17g},{curves.m2[i]:.17g},"
                    f"{curves.m1_error_estimate[i]:.3g},"
                    f"{curves.m2_error_estimate[i]:.3g},"
                    f"{int(curves.reliable[i])}\n"
                )
        if not np.all(curves.reliable):
            warned = True
            print(
                "warning: some inversion points flagged unreliable "
                "(order sensitivity above threshold)",
                file=sys.stderr,
            )
    _write_manifest(outdir, "predict", resolved)
    print(f"asymptotic step-ACF slope: {step_acf_asymptotic_slope(rep):+.4g}"
          + (" (with warnings)" if warned else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="repwalk", description=__doc__)
    p.add_argument("--version", action="version", version=f"repwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic event file")
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--n-events", dest="n_events")
    sp.add_argument("--n-trajectories", dest="n_trajectories")
    sp.add_argument("--psi")
    sp.add_argument("--h", dest="h")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fresh-start", dest="fresh_start", action="store_const", const=True)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    ap = sub.add_parser("analyze", help="ACF curves and slope fits for an event file")
    ap.add_argument("--input", required=True)
    ap.add_argument("--stationarize", action="store_const", const=True)
    ap.add_argument("--join", action="store_const", const=True)
    ap.add_argument("--bin-width", dest="bin_width", type=float)
    ap.add_argument("--max-step-lag", dest="max_step_lag")
    ap.add_argument("--grid-dt", dest="grid_dt", type=float)
    ap.add_argument("--time-min", dest="time_min", type=float)
    ap.add_argument("--time-max", dest="time_max", type=float)
    ap.add_argument("--per-decade", dest="per_decade", type=int)
    ap.add_argument("--fit-step", dest="fit_step")
    ap.add_argument("--fit-time", dest="fit_time")
    ap.add_argument("--bootstrap", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--config")
    ap.add_argument("--out")
    ap.set_defaults(func=cmd_analyze)

    hp = sub.add_parser("shuffle-test", help="four-way surrogate comparison")
    hp.add_argument("--input", required=True)
    hp.add_argument("--stationarize", action="store_const", const=True)
    hp.add_argument("--join", action="store_const", const=True)
    hp.add_argument("--bin-width", dest="bin_width", type=float)
    hp.add_argument("--grid-dt", dest="grid_dt", type=float)
    hp.add_argument("--time-min", dest="time_min", type=float)
    hp.add_argument("--time-max", dest="time_max", type=float)
    hp.add_argument("--per-decade", dest="per_decade", type=int)
    hp.add_argument("--fit-time", dest="fit_time")
    hp.add_argument("--bootstrap", type=int)
    hp.add_argument("--seed", type=int)
    hp.add_argument("--workers", type=int, default=None)
    hp.add_argument("--config")
    hp.add_argument("--out")
    hp.set_defaults(func=cmd_shuffle_test)

    pp = sub.add_parser("predict", help="closed-form and Laplace-domain predictions")
    pp.add_argument("--rho", type=float, required=True)
    pp.add_argument("--psi")
    pp.add_argument("--h", dest="h")
    pp.add_argument("--lag-max", dest="lag_max")
    pp.add_argument("--per-decade", dest="per_decade", type=int)
    pp.add_argument("--t-grid", dest="t_grid")
    pp.add_argument("--s-grid", dest="s_grid")
    pp.add_argument("--order", type=int)
    pp.add_argument("--config")
    pp.add_argument("--out")
    pp.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
