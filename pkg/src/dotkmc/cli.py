"""Command-line entry point: every experiment is a subcommand.

Outputs are plain CSV files with fixed headers plus a ``manifest.json``
echoing the resolved configuration, seed and package version, so a run can
be reproduced byte-for-byte from its output directory alone.

Option precedence: command-line flag, then DOTKMC_* environment variable,
then config file, then built-in baseline defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_grid_axes
from .excitation import NonResonant, PulseSchedule, Resonant, run_trajectory
from .kinetics import CLASS_ORDER, ExcitonClass, RateParams
from .observables import (
    AccumulatorSet,
    batch_standard_error,
    decay_histogram,
    emission_probability,
    g2_correlate,
)
from .reference import (
    analytic_decay_curve,
    bright_dark_propagator,
    _bright_dark_matrix,
    ctmc_emission_probability,
    fit_exponentials,
)
from .rng import point_seed
from .sweep import GridSpec, run_sweep

ENV_PREFIX = "DOTKMC_"


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _write_csv(path: str, header: tuple[str, ...], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir: str, command: str, config: RunConfig) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config.echo(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def _resolve_config(args) -> RunConfig:
    path = args.config or _env("CONFIG")
    config = load_config(path) if path else RunConfig()
    seed = args.seed if args.seed is not None else _env("SEED")
    if seed is not None:
        config.seed = int(seed)
        if config.seed < 0:
            raise ConfigError("seed must be >= 0")
    out = args.out or _env("OUT")
    if out is not None:
        config.out_dir = out
    workers = args.workers if args.workers is not None else _env("WORKERS")
    if workers is not None:
        config.workers = int(workers)
        if config.workers < 1:
            raise ConfigError("workers must be >= 1")
    cycles = args.cycles if args.cycles is not None else _env("CYCLES")
    if cycles is not None:
        n = int(cycles)
        if n < 1:
            raise ConfigError("cycles must be >= 1")
        config.n_cycles = n
        config.cycles_per_point = n
    return config


def _run_accumulator(config: RunConfig, **acc_kwargs) -> AccumulatorSet:
    params = config.rate_params()
    schedule = PulseSchedule(config.period_t, config.n_cycles, config.scheme())
    acc = AccumulatorSet(config.period_t, **acc_kwargs)
    run_trajectory(params, schedule, config.seed, acc, n_levels=config.n_levels)
    return acc


def cmd_decay(config: RunConfig, analytic: bool) -> int:
    os.makedirs(config.out_dir, exist_ok=True)
    acc = _run_accumulator(
        config,
        decay_bin=config.decay_bin,
        collect_decay=True,
        collect_blink=False,
    )
    p_in = config.p_in if config.scheme_name == "nonresonant" else None
    if p_in is not None and p_in <= 0.0:
        p_in = None  # per-cycle normalization; per-pair is undefined at zero power
    centers, normalized = decay_histogram(acc, p_in)
    _write_csv(
        os.path.join(config.out_dir, "decay.csv"),
        ("t_ns", "counts", "normalized"),
        zip(centers.tolist(), acc.decay_hist.tolist(), normalized.tolist()),
    )
    if analytic:
        bright0, dark0 = (1.0, 0.0) if config.scheme_name == "resonant" else (0.5, 0.5)
        curve = analytic_decay_curve(config.rate_params(), centers, bright0, dark0)
        _write_csv(
            os.path.join(config.out_dir, "decay_analytic.csv"),
            ("t_ns", "normalized"),
            zip(centers.tolist(), curve.tolist()),
        )
    _write_manifest(config.out_dir, "decay", config)
    if not np.any(acc.decay_hist > 0):
        print(
            "decay: histogram is empty (no exciton photons); fit refused",
            file=sys.stderr,
        )
        return 1
    fit = fit_exponentials(centers, acc.decay_hist.astype(float), order=2)
    _write_csv(
        os.path.join(config.out_dir, "decay_fit.csv"),
        ("a_fast", "gamma_fast_per_ns", "a_slow", "gamma_slow_per_ns", "residual"),
        [
            (
                fit.amplitudes[0],
                fit.rates[0],
                fit.amplitudes[1],
                fit.rates[1],
                fit.residual,
            )
        ],
    )
    print(
        f"decay: {int(acc.decay_hist.sum())} exciton photons, "
        f"gamma_fast={fit.rates[0]:.4g}/ns gamma_slow={fit.rates[1]:.4g}/ns"
    )
    return 0


def cmd_g2(config: RunConfig) -> int:
    os.makedirs(config.out_dir, exist_ok=True)
    span = config.period_t * config.n_cycles
    max_lag = config.g2_max_lag
    if not max_lag < span:
        max_lag = max(
            config.g2_delta_t,
            (int(span / config.g2_delta_t) - 1) * config.g2_delta_t,
        )
        print(
            f"g2: max_lag clipped to {max_lag} ns (trajectory span {span} ns)",
            file=sys.stderr,
        )
    acc = _run_accumulator(
        config,
        collect_decay=False,
        collect_blink=False,
        g2_delta_t=config.g2_delta_t,
        g2_max_lag=max_lag,
    )
    tau, raw = g2_correlate(acc, config.g2_delta_t, max_lag, "raw")
    if np.any(raw > 0):
        _, normalized = g2_correlate(acc, config.g2_delta_t, max_lag, "plateau")
    else:
        normalized = np.zeros_like(raw)
        print("g2: no coincidences; normalized column left at zero", file=sys.stderr)
    _write_csv(
        os.path.join(config.out_dir, "g2.csv"),
        ("tau_ns", "raw", "normalized"),
        zip(tau.tolist(), raw.tolist(), normalized.tolist()),
    )
    _write_manifest(config.out_dir, "g2", config)
    center = int(np.argmin(np.abs(tau)))
    print(f"g2: g2(0) normalized = {normalized[center]:.4g}")
    return 0


def cmd_blink(config: RunConfig) -> int:
    os.makedirs(config.out_dir, exist_ok=True)
    acc = _run_accumulator(config, collect_decay=False, collect_blink=True)
    lengths = sorted(acc.blink_hist)
    _write_csv(
        os.path.join(config.out_dir, "blink.csv"),
        ("run_length_periods", "count"),
        ((k, acc.blink_hist[k]) for k in lengths),
    )
    fit_header = (
        "order",
        "a_fast",
        "gamma_fast_per_period",
        "a_slow",
        "gamma_slow_per_period",
        "residual",
    )
    fit_path = os.path.join(config.out_dir, "blink_fit.csv")
    _write_manifest(config.out_dir, "blink", config)
    x = np.array(lengths, dtype=float)
    y = np.array([acc.blink_hist[k] for k in lengths], dtype=float)
    if len(x) < 4:
        _write_csv(fit_path, fit_header, [])
        print(
            f"blink: {len(x)} distinct run lengths; too few for a fit",
            file=sys.stderr,
        )
        return 0
    fit1 = fit_exponentials(x, y, order=1)
    fit2 = fit_exponentials(x, y, order=2)
    improvement = 1.0 - fit2.residual / fit1.residual if fit1.residual > 0 else 0.0
    _write_csv(
        fit_path,
        fit_header,
        [
            (1, fit1.amplitudes[0], fit1.rates[0], "", "", fit1.residual),
            (
                2,
                fit2.amplitudes[0],
                fit2.rates[0],
                fit2.amplitudes[1],
                fit2.rates[1],
                fit2.residual,
            ),
        ],
    )
    print(
        f"blink: {int(y.sum())} dark runs, order-2 residual improvement "
        f"{improvement:.1%}"
    )
    return 0


def _grid_spec(config: RunConfig, axes: dict) -> GridSpec:
    return GridSpec(
        axes=axes,
        base_params=config.rate_params(),
        scheme=config.scheme(),
        period_t=config.period_t,
        cycles_per_point=config.cycles_per_point,
        seed_base=config.seed,
        n_levels=config.n_levels,
        burn_in=config.burn_in,
    )


def cmd_sweep(config: RunConfig, grid_path: str | None, resume: bool) -> int:
    axes = dict(config.grid_axes)
    if grid_path is not None:
        import configparser

        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(grid_path) as fh:
                parser.read_string(fh.read(), source=grid_path)
        except OSError as exc:
            raise ConfigError(f"cannot read grid file {grid_path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        axes.update(parse_grid_axes(parser))
    if not axes:
        raise ConfigError("sweep needs a [grid] section (in the config or --grid file)")
    os.makedirs(config.out_dir, exist_ok=True)
    spec = _grid_spec(config, axes)
    out_path = os.path.join(config.out_dir, "sweep.csv")
    run_sweep(
        spec, workers=config.workers, out_path=out_path, resume=resume, progress=True
    )
    _write_manifest(config.out_dir, "sweep", config)
    print(f"sweep: {spec.n_points} points -> {out_path}")
    return 0


def cmd_saturation(config: RunConfig) -> int:
    axes = {"p_in": config.grid_axes.get("p_in")}
    if axes["p_in"] is None:
        axes["p_in"] = tuple(float(v) for v in np.logspace(-2, 1, 13))
    os.makedirs(config.out_dir, exist_ok=True)
    spec = GridSpec(
        axes=axes,
        base_params=config.rate_params(),
        scheme=NonResonant(0.0),
        period_t=config.period_t,
        cycles_per_point=config.cycles_per_point,
        seed_base=config.seed,
        n_levels=config.n_levels,
        burn_in=config.burn_in,
    )
    out_path = os.path.join(config.out_dir, "saturation.csv")
    result = run_sweep(spec, workers=config.workers, out_path=out_path, progress=True)
    _write_manifest(config.out_dir, "saturation", config)
    x = result.p_out("X")
    print(
        f"saturation: max P_out_X = {max(x):.4g} at "
        f"P_in = {axes['p_in'][int(np.argmax(x))]:.4g}"
    )
    return 0


def cmd_validate(config: RunConfig) -> int:
    os.makedirs(config.out_dir, exist_ok=True)
    _write_manifest(config.out_dir, "validate", config)
    cycles = config.cycles_per_point
    failures = 0

    # exact period-map oracle vs sampler, one level, both schemes; the MC
    # error bar comes from batch means because blinking correlates cycles
    worst = 0.0
    index = 0
    batch = max(200, cycles // 100)
    for gamma_nr in (0.01, 0.1, 1.0):
        for gamma_sf in (0.001, 0.01, 0.1):
            for scheme in (Resonant("up"), NonResonant(0.1)):
                params = RateParams(1.0, gamma_nr, gamma_sf, 1.0)
                exact = ctmc_emission_probability(params, scheme, config.period_t, 1)[
                    ExcitonClass.X
                ]
                acc = AccumulatorSet(
                    config.period_t,
                    collect_decay=False,
                    collect_blink=False,
                    batch_cycles=batch,
                )
                run_trajectory(
                    params,
                    PulseSchedule(config.period_t, cycles, scheme),
                    point_seed(config.seed, index),
                    acc,
                    n_levels=1,
                    burn_in=config.burn_in,
                )
                mc = emission_probability(acc, ExcitonClass.X)
                sigma = max(batch_standard_error(acc), 1e-12)
                worst = max(worst, abs(mc - exact) / sigma)
                index += 1
    ok = worst <= 3.0
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] oracle agreement: worst |MC-exact| = {worst:.2f} sigma")

    # analytic two-state solution: derivative residual and decoupled limit
    params = config.rate_params()
    m = _bright_dark_matrix(params)
    h = 1e-5
    residual = 0.0
    for t in (1.0, 5.0, 10.0):
        fd = (bright_dark_propagator(params, t + h) - bright_dark_propagator(params, t - h)) / (2 * h)
        residual = max(residual, float(np.abs(fd - m @ bright_dark_propagator(params, t)).max()))
    decoupled = RateParams(params.gamma_r, params.gamma_nr, 0.0, params.purcell)
    rb = bright_dark_propagator(decoupled, 3.0)[0, 0]
    expected = np.exp(-(decoupled.gamma_r * decoupled.purcell + 2 * decoupled.gamma_nr) * 3.0)
    analytic_err = abs(rb - expected) / expected
    ok = residual < 1e-9 and analytic_err < 1e-12
    failures += not ok
    print(
        f"[{'PASS' if ok else 'FAIL'}] analytic solution: ODE residual {residual:.2e}, "
        f"decoupled-limit error {analytic_err:.2e}"
    )

    # reported error bars vs observed spread over independent seeds
    params = config.rate_params()
    scheme = NonResonant(0.1)
    estimates = []
    stderrs = []
    for k in range(20):
        acc = AccumulatorSet(config.period_t, collect_decay=False, collect_blink=False)
        run_trajectory(
            params,
            PulseSchedule(config.period_t, cycles, scheme),
            point_seed(config.seed, 10_000 + k),
            acc,
            n_levels=config.n_levels,
            burn_in=config.burn_in,
        )
        p = emission_probability(acc, ExcitonClass.X)
        estimates.append(p)
        stderrs.append(np.sqrt(p * (1 - p) / cycles))
    spread = float(np.std(estimates, ddof=1))
    reported = float(np.mean(stderrs))
    ratio = spread / reported if reported > 0 else np.inf
    ok = 1.0 / 1.5 <= ratio <= 1.5
    failures += not ok
    print(
        f"[{'PASS' if ok else 'FAIL'}] error bars: observed/reported spread = {ratio:.3f}"
    )

    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dotkmc",
        description="Stochastic simulator of a pulsed single quantum-dot emitter",
    )
    parser.add_argument("--config", help="run configuration file (INI sections)")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel workers for sweeps")
    parser.add_argument(
        "--cycles", type=int, help="override cycle count (trajectories and sweeps)"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decay", help="time-in-period histogram of the exciton line")
    p.add_argument(
        "--analytic",
        action="store_true",
        help="also write the closed-form bright/dark overlay",
    )
    sub.add_parser("g2", help="two-detector coincidence correlation")
    sub.add_parser("blink", help="dark-run length histogram and fits")
    p = sub.add_parser("sweep", help="parameter-grid sweep")
    p.add_argument("--grid", help="file with a [grid] section of axis values")
    p.add_argument("--resume", action="store_true", help="continue an interrupted sweep")
    sub.add_parser("saturation", help="brightness vs pump power scan")
    sub.add_parser("validate", help="oracle and calibration self-checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        if args.command == "decay":
            return cmd_decay(config, args.analytic)
        if args.command == "g2":
            return cmd_g2(config)
        if args.command == "blink":
            return cmd_blink(config)
        if args.command == "sweep":
            return cmd_sweep(config, args.grid, args.resume)
        if args.command == "saturation":
            return cmd_saturation(config)
        if args.command == "validate":
            return cmd_validate(config)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
