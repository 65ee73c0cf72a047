"""Command-line front end: simulate | envelope | denoise | study | selftest.

Exit codes: 0 success, 2 input error, 3 non-coalescence, 4 internal invariant
violation.  Every command writes ``config_echo.txt`` with all effective
settings (derived constants included), so an artifact directory is enough to
reproduce its contents.  Worker processes never change outputs: each draw is
seeded from (seed, draw index) alone.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import io
from .cftp import ConsistencyError, InvalidModelError, NonCoalescenceError, run_cftp
from .denoise import HyperParams, denoise
from .spatial import MultiscaleParams, multiscale_model
from .study import FUNCTIONS, StudyConfig, format_table, parse_cells, run_simulation_study, table_rows, worker_count
from .summary import (
    InsufficientDataError,
    calibrate_T,
    default_r_grid,
    draw_seeds,
    envelope,
    estimate_L,
    estimate_T,
    transform_T,
)
from .svg import line_svg, scatter_svg

EXIT_OK, EXIT_INPUT, EXIT_NONCOALESCENCE, EXIT_INVARIANT = 0, 2, 3, 4

# ---------------------------------------------------------------------------
# config handling

_MODEL_KEYS = {
    "lam", "lambda", "gamma1", "gamma2", "gamma3", "log10_gamma1", "log10_gamma2", "log10_gamma3",
    "r1", "r2", "r3", "window", "h", "length_scale", "T0", "max_doublings", "seed", "replicates",
    "t_calibration_sims", "n_r", "r_max", "sims",
}
_STUDY_KEYS = {
    "n", "replicates", "tau", "lam", "lambda", "gamma", "draws", "cells", "seed",
    "occupancy_log_excess", "direct_log_excess", "T0", "max_doublings",
}


def _num(cfg, key, default=None, cast=float):
    if key not in cfg:
        if default is None:
            raise io.InputError(f"config is missing '{key}'")
        return default
    try:
        return cast(cfg[key])
    except ValueError:
        raise io.InputError(f"config value {key} = {cfg[key]!r} is not a number") from None


def _check_keys(cfg, allowed):
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise io.InputError(f"unknown config keys: {', '.join(unknown)}")


def _log10_gamma(cfg, i, default=None):
    lg, g = f"log10_gamma{i}", f"gamma{i}"
    if lg in cfg and g in cfg:
        raise io.InputError(f"give either {lg} or {g}, not both")
    if lg in cfg:
        return _num(cfg, lg)
    if g in cfg:
        v = _num(cfg, g)
        if not v > 0:
            raise io.InputError(f"{g} must be positive")
        return math.log10(v)
    if default is None:
        raise io.InputError(f"config needs {lg} or {g}")
    return default


def model_from_config(cfg):
    """(model, resolved settings) from a flat spatial-model config."""
    _check_keys(cfg, _MODEL_KEYS)
    lam = _num(cfg, "lam") if "lam" in cfg else _num(cfg, "lambda")
    extra = []
    if "r3" in cfg or "gamma3" in cfg or "log10_gamma3" in cfg:
        extra.append((_log10_gamma(cfg, 3), _num(cfg, "r3")))
    params = MultiscaleParams(lam, _log10_gamma(cfg, 1), _log10_gamma(cfg, 2), _num(cfg, "r1"), _num(cfg, "r2"), extra)
    window = io.parse_window(cfg.get("window", "0 0 1 1"))
    scale = _num(cfg, "length_scale", 1.0)
    h = _num(cfg, "h") if "h" in cfg else None
    model = multiscale_model(params, window, h=h, length_scale=scale)
    fields = [f.field for f in model.factors[1:]]
    resolved = {
        "lam": params.lam,
        "log10_gamma1": params.log10_gamma1,
        "log10_gamma2": params.log10_gamma2,
        "r1": params.r1,
        "r2": params.r2,
        "window": window,
        "length_scale": scale,
        "grid_h": [f.h for f in fields],
        "log_dominating_rate": model.space._log_rate,
        "dominating_rate": model.space.rate,
        "log_lower_keep_probability": float(model.log_lower_init(np.zeros((1, 2)))[0]),
        "T0": _num(cfg, "T0", 1.0),
        "max_doublings": _num(cfg, "max_doublings", 30, int),
    }
    if extra:
        resolved.update(log10_gamma3=extra[0][0], r3=extra[0][1])
    return model, resolved


def _cftp_kw(resolved):
    return {"T0": resolved["T0"], "max_doublings": resolved["max_doublings"]}


def _workers(args):
    return args.workers if args.workers else worker_count()


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(workers, len(jobs))) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


# ---------------------------------------------------------------------------
# simulate


def _simulate_one(job):
    model, seed, kw = job
    try:
        res = run_cftp(model, seed, **kw)
    except NonCoalescenceError as exc:
        return None, exc.horizon, -1, f"noncoalesced upper={exc.upper_size} lower={exc.lower_size}"
    return res.config.pattern(model.window).points, res.horizon, res.doublings, "ok"


def cmd_simulate(args):
    cfg = io.read_config(args.config)
    model, resolved = model_from_config(cfg)
    seed = args.seed if args.seed is not None else _num(cfg, "seed", 0, int)
    k = args.replicates if args.replicates is not None else _num(cfg, "replicates", 1, int)
    if k < 1:
        raise io.InputError("replicates must be >= 1")
    out = io.ensure_dir(args.out)
    seeds = draw_seeds(seed, k)
    results = _map(_simulate_one, [(model, s, _cftp_kw(resolved)) for s in seeds], _workers(args))
    rows, failed = [], 0
    for i, (pts, horizon, doublings, status) in enumerate(results):
        if pts is None:
            failed += 1
            print(f"replicate {i}: {status} at T={horizon:g}", file=sys.stderr)
            n = -1
        else:
            io.write_pattern(out / f"pattern_{i:03d}.csv", pts)
            if args.svg:
                scatter_svg(out / f"pattern_{i:03d}.svg", pts, model.window, f"replicate {i} ({len(pts)} points)")
            n = len(pts)
        rows.append((i, seeds[i], n, horizon, doublings, status))
    cols = list(zip(*rows))
    io.write_columns(out / "runs.csv", ["replicate", "seed", "n_points", "horizon", "doublings", "status"], cols)
    io.write_config_echo(out / "config_echo.txt", dict(resolved, command="simulate", seed=seed, replicates=k))
    ok = [r[2] for r in rows if r[2] >= 0]
    if ok:
        print(f"{len(ok)} pattern(s) written to {out}; mean points {np.mean(ok):.2f}")
    return EXIT_NONCOALESCENCE if failed else EXIT_OK


# ---------------------------------------------------------------------------
# envelope


def _transformed_T(pattern, r, calibration):
    return transform_T(estimate_T(pattern, r), calibration)


def _plot_envelope(path, env, data, label):
    line_svg(path, [
        (env.r, data.values, "solid", "black", "data"),
        (env.r, env.mean, "dashed", "black", "mean"),
        (env.r, env.lo, "dotted", "black", f"envelope ({env.n})"),
        (env.r, env.hi, "dotted", "black", ""),
    ], xlabel="r", ylabel=label)


def cmd_envelope(args):
    cfg = io.read_config(args.config)
    model, resolved = model_from_config(cfg)
    window = resolved["window"]
    data = io.read_pattern(args.data, window)
    seed = args.seed if args.seed is not None else _num(cfg, "seed", 0, int)
    sims = args.sims if args.sims is not None else _num(cfg, "sims", 19, int)
    r_max = _num(cfg, "r_max", default_r_grid(window, 2)[-1])
    r = np.linspace(0.0, r_max, _num(cfg, "n_r", 512, int))
    stats = {"both": ["L", "T"], "l": ["L"], "t": ["T"]}[args.stat.lower()]
    out = io.ensure_dir(args.out)
    workers = _workers(args)
    echo = dict(resolved, command="envelope", seed=seed, sims=sims, r_max=r_max, n_r=len(r),
                data_points=len(data), data_file=str(args.data))
    for stat in stats:
        if stat == "L":
            fn, label = estimate_L, "L(r)"
        else:
            intensity = len(data) / data.area
            c = calibrate_T(intensity, window, n_sims=_num(cfg, "t_calibration_sims", 200, int), seed=seed)
            echo.update(t_calibration=c, t_calibration_intensity=intensity)
            fn, label = partial(_transformed_T, calibration=c), "transformed T(r)"
        env = envelope(model, fn, n_sims=sims, seed=seed, r=r, window=window, workers=workers, **_cftp_kw(resolved))
        obs = fn(data, r)
        io.write_envelope(out / f"envelope_{stat}.csv", env)
        io.write_summary(out / f"data_{stat}.csv", obs)
        _plot_envelope(out / f"envelope_{stat}.svg", env, obs, label)
        inside = float(env.contains(obs.values).mean())
        echo[f"data_inside_fraction_{stat}"] = inside
        print(f"{stat}: data curve inside the {sims}-simulation envelope at {100 * inside:.1f}% of r values")
    io.write_config_echo(out / "config_echo.txt", echo)
    return EXIT_OK


# ---------------------------------------------------------------------------
# denoise


def cmd_denoise(args):
    y = io.read_signal(args.signal)
    n = y.size
    if n < 2 or n & (n - 1):
        raise io.InputError(f"signal length must be a power of two, got {n}")
    try:
        hyper = HyperParams(args.sigma, args.tau, args.lam, args.gamma, args.draws,
                            args.occupancy_excess, args.direct_excess)
    except ValueError as exc:
        raise io.InputError(str(exc)) from None
    res = denoise(y, hyper, args.wavelet, seed=args.seed, T0=args.T0, max_doublings=args.max_doublings)
    out = io.ensure_dir(args.out)
    io.write_signal(out / "estimate.csv", res.estimate, "estimate")
    io.write_columns(out / "draws.csv", ["draw", "horizon"], [np.arange(len(res.horizons)), res.horizons])
    t = np.arange(1, n + 1) / n
    series = [(t, y, "dotted", "grey", "noisy"), (t, res.estimate, "solid", "black", "estimate")]
    echo = dict(
        command="denoise", signal_file=str(args.signal), n=n, sigma=hyper.sigma, tau=hyper.tau, lam=hyper.lam,
        gamma=hyper.gamma, draws=hyper.draws, wavelet=args.wavelet, seed=args.seed,
        occupancy_log_excess=hyper.occupancy_log_excess, direct_log_excess=hyper.direct_log_excess,
        T0=args.T0, max_doublings=args.max_doublings,
        mean_horizon=float(np.mean(res.horizons)), max_horizon=float(np.max(res.horizons)),
        zero_coefficients=int(np.sum(res.coefficients.flat() == 0)),
        **{f"tier_{k}": v for k, v in res.tier_counts.items()},
    )
    if args.truth:
        f = io.read_signal(args.truth)
        if f.size != n:
            raise io.InputError("truth and signal differ in length")
        series.insert(1, (t, f, "dashed", "blue", "true"))
        echo["mse"] = float(np.mean((res.estimate - f) ** 2))
        echo["truth_file"] = str(args.truth)
    line_svg(out / "estimate.svg", series, xlabel="t", ylabel="signal")
    io.write_config_echo(out / "config_echo.txt", echo)
    print(f"estimate written to {out / 'estimate.csv'} (tiers {res.tier_counts})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# study


def study_config(cfg, cells=None, replicates=None):
    _check_keys(cfg, _STUDY_KEYS)
    sc = StudyConfig(
        n=_num(cfg, "n", 256, int),
        replicates=replicates if replicates is not None else _num(cfg, "replicates", 25, int),
        tau=_num(cfg, "tau", 1.0),
        lam=_num(cfg, "lam", _num(cfg, "lambda", 0.05)),
        gamma=_num(cfg, "gamma", 3.0),
        draws=_num(cfg, "draws", 25, int),
        occupancy_log_excess=_num(cfg, "occupancy_log_excess", 4.0),
        direct_log_excess=_num(cfg, "direct_log_excess", 20.0),
    )
    try:
        sc.cells = parse_cells(cells if cells is not None else cfg.get("cells", "all"))
    except ValueError as exc:
        raise io.InputError(str(exc)) from None
    if sc.replicates < 1 or sc.n < 2 or sc.n & (sc.n - 1):
        raise io.InputError("need replicates >= 1 and n a power of two")
    return sc


def cmd_study(args):
    cfg = io.read_config(args.config)
    sc = study_config(cfg, args.cells, args.replicates)
    seed = args.seed if args.seed is not None else _num(cfg, "seed", 0, int)
    results = run_simulation_study(sc, seed=seed, workers=_workers(args))
    out = io.ensure_dir(args.out)
    rows = table_rows(results)
    header = ["rsnr", "method"] + [h for f in FUNCTIONS for h in (f, f"{f}_se")]
    cols = list(zip(*rows))
    io.write_columns(out / "study.csv", header, cols)
    text = format_table(results)
    (out / "study.txt").write_text(text + "\n")
    per = [(c.name, c.rsnr, i, c.mse[i], c.baseline_mse[i], c.horizons[i, 0], c.horizons[i, 1])
           for c in results for i in range(c.mse.size)]
    io.write_columns(out / "replicates.csv",
                     ["function", "rsnr", "replicate", "mse", "universal_mse", "mean_horizon", "max_horizon"],
                     list(zip(*per)))
    echo = dict(command="study", seed=seed, n=sc.n, replicates=sc.replicates, tau=sc.tau, lam=sc.lam,
                gamma=sc.gamma, draws=sc.draws, occupancy_log_excess=sc.occupancy_log_excess,
                direct_log_excess=sc.direct_log_excess,
                cells=",".join(f"{f}:{r:g}" for f, r in sc.cells))
    io.write_config_echo(out / "config_echo.txt", echo)
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest


def cmd_selftest(args):
    from .oracles import selftest

    ok = True
    for name, passed, detail in selftest(n_draws=args.draws, seed=args.seed):
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_INVARIANT


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="perfectsim", description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $PERFECTSIM_WORKERS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="exact draws from a multiscale area-interaction model")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--replicates", type=int)
    s.add_argument("--out", default="simulate_out")
    s.add_argument("--svg", action="store_true", help="also write a scatter plot per pattern")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("envelope", help="L / transformed-T envelopes of the model against a data pattern")
    e.add_argument("--data", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--sims", type=int)
    e.add_argument("--stat", default="both", choices=["L", "T", "both", "l", "t"])
    e.add_argument("--seed", type=int)
    e.add_argument("--out", default="envelope_out")
    e.set_defaults(func=cmd_envelope)

    d = sub.add_parser("denoise", help="posterior-median wavelet estimate of a noisy signal")
    d.add_argument("--signal", required=True)
    d.add_argument("--sigma", type=float, required=True)
    d.add_argument("--tau", type=float, default=1.0)
    d.add_argument("--lambda", dest="lam", type=float, default=0.05)
    d.add_argument("--gamma", type=float, default=3.0)
    d.add_argument("--draws", type=int, default=25)
    d.add_argument("--wavelet", default="la10", choices=["haar", "la10"])
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--truth", help="optional true signal for the overlay plot and MSE")
    d.add_argument("--occupancy-excess", type=float, default=4.0,
                   help="log(lambda_dom / lambda) above which a site is assumed occupied")
    d.add_argument("--direct-excess", type=float, default=20.0,
                   help="log(lambda_dom / lambda) above which d is drawn from N(dhat, sigma^2)")
    d.add_argument("--T0", type=float, default=1.0)
    d.add_argument("--max-doublings", type=int, default=30)
    d.add_argument("--out", default="denoise_out")
    d.set_defaults(func=cmd_denoise)

    t = sub.add_parser("study", help="AMSE simulation study on the four standard test functions")
    t.add_argument("--config", required=True)
    t.add_argument("--cells", help='e.g. "all", "rsnr=10+7" or "blocks:10,heavisine:3"')
    t.add_argument("--replicates", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", default="study_out")
    t.set_defaults(func=cmd_study)

    c = sub.add_parser("selftest", help="oracle-equivalence and invariant checks")
    c.add_argument("--draws", type=int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonCoalescenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCOALESCENCE
    except (ConsistencyError, AssertionError) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (io.InputError, InvalidModelError, InsufficientDataError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
