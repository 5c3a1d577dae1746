"""Command-line front end: curves, sweeps, cumulants, oracle comparisons.

Commands write CSV only (fixed column contracts, 17 significant digits,
no timestamps), so identical inputs produce byte-identical outputs.  Exit
codes: 0 success, 2 configuration problem, 3 instability or solver
failure, 4 empty bias domain, 5 oracle resource refusal.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ftcheck, ldf, networks
from .errors import (ConfigError, ConvergenceError, DomainBoundaryError,
                     DomainEmptyError, GaussLdtError, InvalidNetworkError,
                     NoStationaryStateError, OracleResourceError)
from .fock_oracle import auto_truncate, build_biased_generator, leading_theta
from .ldf import ThetaEvaluator, theta_curve_from_evaluator, write_theta_csv
from .model import (BathSpec, CountingSpec, NetworkSpec, load_config,
                    thermal_bath, validate)
from .phasespace import assemble_bias, build_system, dump_matrices

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_DOMAIN = 4
EXIT_ORACLE = 5

FT_SWEEP_COLUMNS = ["param_value", "s_min", "s_candidate", "sym", "holds", "analytic"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return "nan"
    return str(value)


def _write_csv(fh, header, rows) -> None:
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(v) for v in row) + "\n")


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("GAUSSLDT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError(f"GAUSSLDT_THREADS must be an integer, got {env!r}")


def _parallel_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _load_network(args) -> tuple[NetworkSpec, CountingSpec]:
    if not args.config:
        raise ConfigError("this command needs --config (or a preset)")
    network, counting = load_config(args.config)
    if args.bath:
        counting = CountingSpec(bath=args.bath)
    if counting is None:
        raise ConfigError("config carries no counting.bath and --bath was not given")
    report = validate(network)
    if not report.ok:
        raise InvalidNetworkError("invalid network:\n" + report.summary(), report)
    network.bath(counting.bath)  # fail early on a dangling label
    return network, counting


def _bias_scale(network: NetworkSpec, counting: CountingSpec) -> float:
    b = network.bath(counting.bath)
    if b.gamma_up > 0 and b.gamma_down > b.gamma_up:
        return math.log(b.gamma_down / b.gamma_up)
    return 1.0


def _parse_s_grid(args, network=None, counting=None) -> tuple[float, float, int]:
    if args.s_grid:
        parts = args.s_grid.split(":")
        if len(parts) != 3:
            raise ConfigError("--s-grid expects lo:hi:n")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad --s-grid value: {exc}") from exc
        return lo, hi, n
    lo, hi, n = args.s_min, args.s_max, args.s_steps
    if lo is None or hi is None:
        if network is None:
            raise ConfigError("give --s-min/--s-max or --s-grid")
        scale = _bias_scale(network, counting)
        lo = -1.5 * scale if lo is None else lo
        hi = 1.5 * scale if hi is None else hi
    return lo, hi, n


# ---------------------------------------------------------------------------
# theta
# ---------------------------------------------------------------------------

def _pointwise_curve(ev: ThetaEvaluator, values) -> ldf.ThetaCurve:
    """Tiny grids skip domain bisection but keep the same CSV shape."""
    theta = np.full(len(values), np.nan)
    ok = np.zeros(len(values), dtype=bool)
    margin = np.full(len(values), np.nan)
    for k, s in enumerate(values):
        val = ev.try_theta(s)
        if val is not None:
            theta[k] = val
            margin[k] = ev.covariance(s).closed_loop_margin
            ok[k] = True
    if not ok.any():
        raise DomainEmptyError("no solvable bias value in the requested grid")
    return ldf.ThetaCurve(s_grid=np.asarray(values, dtype=float), theta=theta,
                          solvable=ok, closed_loop_margin=margin,
                          domain=(-math.inf, math.inf),
                          reference_bath=ev.bath.label)


def _curve_for(network, counting, lo, hi, n) -> ldf.ThetaCurve:
    ev = ThetaEvaluator(network, counting)
    if n < 3:
        values = [lo] if n <= 1 or hi == lo else list(np.linspace(lo, hi, n))
        return _pointwise_curve(ev, values)
    return theta_curve_from_evaluator(ev, lo, hi, n)


def cmd_theta(args) -> int:
    if args.preset:
        return _run_theta_preset(args)
    network, counting = _load_network(args)
    lo, hi, n = _parse_s_grid(args, network, counting)
    curve = _curve_for(network, counting, lo, hi, n)
    if args.dump_matrices:
        system = build_system(network)
        dump_matrices(args.dump_matrices, system,
                      assemble_bias(network, counting, 1.0))
    with _open_out(args.out) as fh:
        write_theta_csv(curve, fh)
    return EXIT_OK


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

FIG1_T1 = (0.5, 1.0, 5.0)
FIG2_T1 = tuple(round(0.5 * k, 1) for k in range(1, 11))
FIG4_G = (0.1, 1.0, 10.0, 100.0)
FIG6_GAMMA = (0.1, 0.5, 1.0, 2.0, 10.0)

PRESET_KINDS = {
    "fig1": "theta", "fig2": "ft-sweep", "fig3": "ft-sweep",
    "fig4": "theta", "fig5": "ft-sweep", "fig6": "ft-sweep",
}


def _run_theta_preset(args) -> int:
    name = args.preset
    if PRESET_KINDS.get(name) != "theta":
        raise ConfigError(f"preset {name!r} is not a theta preset")
    with _open_out(args.out) as fh:
        first = True
        if name == "fig1":
            for t1 in FIG1_T1:
                net = networks.rw_chain(n=10, g=0.1, gamma=0.1, t1=t1, tn=t1 + 1.0)
                s_c = 1.0 / t1
                curve = _curve_for(net, networks.COUNT_BATH1, -1.5 * s_c, 1.5 * s_c, 201)
                _write_preset_curve(fh, curve, {"T1": t1}, first)
                first = False
        else:  # fig4
            for g in FIG4_G:
                net = networks.xx_pair(g=g, gamma=0.1, t1=10.0, t2=11.0)
                curve = _curve_for(net, networks.COUNT_BATH1, -0.15, 0.15, 201)
                _write_preset_curve(fh, curve, {"g": g}, first)
                first = False
    return EXIT_OK


def _write_preset_curve(fh, curve, extra, with_header) -> None:
    header = list(extra) + ["s", "theta", "solvable", "closed_loop_margin"]
    if with_header:
        fh.write(",".join(header) + "\n")
    prefix = [_fmt(v) for v in extra.values()]
    for s, th, ok, mg in curve.csv_rows():
        fh.write(",".join(prefix + [_fmt(s), _fmt(th), _fmt(ok), _fmt(mg)]) + "\n")


def _ft_row(param_value, report: ftcheck.FtReport | None, extra=()):
    if report is None:
        return [param_value, float("nan"), float("nan"), float("nan"),
                False, None, *extra]
    return [param_value, report.s_min, report.s_candidate, report.sym_value,
            report.holds, report.analytic_prediction, *extra]


def _preset_ft_jobs(name, threshold):
    """(param_value, extra_columns, callable) triples for one preset."""
    jobs = []
    if name == "fig2":
        for t1 in FIG2_T1:
            net = networks.rw_chain(n=10, g=0.1, gamma=0.1, t1=t1, tn=t1 + 1.0)
            for counting in (networks.COUNT_BATH1, networks.COUNT_BATH2):
                jobs.append((t1, (counting.bath,),
                             _ft_job(net, counting, threshold)))
    elif name == "fig3":
        for t1 in FIG2_T1:
            net = networks.opo_chain(n=2, g=0.1, gamma=0.1, t1=t1, tn=t1 + 1.0)
            for counting in (networks.COUNT_BATH1, networks.COUNT_BATH2):
                jobs.append((t1, (counting.bath,),
                             _ft_job(net, counting, threshold)))
    elif name == "fig5":
        for g in FIG4_G:
            for t1 in FIG2_T1:
                net = networks.xx_pair(g=g, gamma=0.1, t1=t1, t2=t1 + 1.0)
                jobs.append((t1, (g, "bath1"),
                             _ft_job(net, networks.COUNT_BATH1, threshold)))
    elif name == "fig6":
        for gamma in FIG6_GAMMA:
            net = networks.xx_pair(g=0.2, gamma=gamma, t1=10.0, t2=11.0)
            jobs.append((gamma, ("bath1",),
                         _ft_job(net, networks.COUNT_BATH1, threshold)))
    else:
        raise ConfigError(f"preset {name!r} is not an ft-sweep preset")
    extra_header = {"fig2": ["bath"], "fig3": ["bath"],
                    "fig5": ["g", "bath"], "fig6": ["bath"]}[name]
    return jobs, extra_header


def _ft_job(network, counting, threshold):
    def run():
        try:
            return ftcheck.ft_report(network, counting, threshold=threshold)
        except GaussLdtError:
            return None
    return run


def _sweep_config_jobs(args, threshold):
    network, counting = _load_network(args)
    values = _parse_sweep_grid(args.sweep_grid)
    jobs = []
    for v in values:
        net = _apply_sweep(network, counting, args.sweep, v, args.delta_t)
        jobs.append((v, (counting.bath,), _ft_job(net, counting, threshold)))
    return jobs, ["bath"]


def _parse_sweep_grid(spec: str):
    if not spec:
        raise ConfigError("--sweep-grid is required with --sweep")
    try:
        if "," in spec:
            return [float(x) for x in spec.split(",") if x]
        head, *rest = spec.split(":")
        if head == "log":
            lo, hi, n = float(rest[0]), float(rest[1]), int(rest[2])
            return list(np.geomspace(lo, hi, n))
        lo, hi, n = float(head), float(rest[0]), int(rest[1])
        return list(np.linspace(lo, hi, n))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad --sweep-grid {spec!r}: use lo:hi:n, log:lo:hi:n "
                          f"or v1,v2,...") from exc


def _bath_coupling(b: BathSpec) -> float:
    gamma = 2.0 * (b.gamma_down - b.gamma_up)
    if gamma <= 0:
        raise ConfigError(
            f"bath {b.label!r} has gamma_down <= gamma_up; its coupling "
            f"strength is not derivable for sweeping")
    return gamma


def _rescale_bath(b: BathSpec, gamma_new: float) -> BathSpec:
    factor = gamma_new / _bath_coupling(b)
    return BathSpec(oscillator=b.oscillator, gamma_down=b.gamma_down * factor,
                    gamma_up=b.gamma_up * factor, label=b.label, lam=b.lam,
                    temperature=b.temperature)


def _retemper_bath(b: BathSpec, omega: float, t_new: float) -> BathSpec:
    return thermal_bath(b.oscillator, _bath_coupling(b), t_new, omega, b.label)


def _apply_sweep(network: NetworkSpec, counting: CountingSpec, param: str,
                 value: float, delta_t: float | None) -> NetworkSpec:
    """Generic sweep transformations for config-driven networks.

    T1 re-thermalizes the reference bath at the swept temperature (and the
    remaining baths at T1 + delta_t when --delta-t is given); gamma rescales
    every bath's rate pair, preserving its occupation; g overwrites every
    coupling strength as written (derived frequency shifts or squeezing
    terms in the config are left alone).
    """
    if param == "T1":
        baths = []
        for b in network.baths:
            omega = network.oscillators[b.oscillator].omega
            if b.label == counting.bath:
                baths.append(_retemper_bath(b, omega, value))
            elif delta_t is not None:
                baths.append(_retemper_bath(b, omega, value + delta_t))
            else:
                baths.append(b)
        return NetworkSpec(network.oscillators, network.couplings, tuple(baths))
    if param == "gamma":
        baths = tuple(_rescale_bath(b, value) for b in network.baths)
        return NetworkSpec(network.oscillators, network.couplings, baths)
    if param == "g":
        coups = tuple(type(c)(i=c.i, j=c.j, kind=c.kind, g=value)
                      for c in network.couplings)
        return NetworkSpec(network.oscillators, coups, network.baths)
    raise ConfigError(f"unknown sweep parameter {param!r} (use T1, g or gamma)")


def cmd_ft_sweep(args) -> int:
    threshold = args.threshold
    if args.preset:
        jobs, extra_header = _preset_ft_jobs(args.preset, threshold)
    else:
        if not args.sweep:
            raise ConfigError("ft-sweep needs --preset or --sweep/--sweep-grid")
        jobs, extra_header = _sweep_config_jobs(args, threshold)
    threads = _thread_count(args)
    results = _parallel_map(lambda job: job[2](), jobs, threads)
    with _open_out(args.out) as fh:
        rows = [_ft_row(param, rep, extra)
                for (param, extra, _), rep in zip(jobs, results)]
        _write_csv(fh, FT_SWEEP_COLUMNS + extra_header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# cumulants / oracle / validate
# ---------------------------------------------------------------------------

def cmd_cumulants(args) -> int:
    network, counting = _load_network(args)
    result = ldf.cumulants(network, counting, n_max=args.n_max, h=args.h)
    with _open_out(args.out) as fh:
        _write_csv(fh, ["n", "kappa"],
                   [[k + 1, v] for k, v in enumerate(result.kappa)])
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    network, counting = _load_network(args)
    ev = ThetaEvaluator(network, counting)
    lo, hi, n_domain = _parse_s_grid(args, network, counting)
    curve = theta_curve_from_evaluator(ev, lo, hi, max(n_domain, 41))
    d_lo, d_hi = curve.domain
    d_lo = lo if not math.isfinite(d_lo) else d_lo
    d_hi = hi if not math.isfinite(d_hi) else d_hi
    pad = (1.0 - args.domain_fraction) / 2.0 * (d_hi - d_lo)
    grid = np.linspace(d_lo + pad, d_hi - pad, args.points)

    def compare(s):
        gauss = ev.theta(float(s))
        if args.n_max:
            fock = leading_theta(build_biased_generator(network, counting,
                                                        float(s), args.n_max))
            used = args.n_max
        else:
            fock, used = auto_truncate(network, counting, float(s), tol=args.tol)
        return [float(s), gauss, fock, abs(gauss - fock), used]

    rows = _parallel_map(compare, list(grid), _thread_count(args))
    with _open_out(args.out) as fh:
        _write_csv(fh, ["s", "theta_gauss", "theta_fock", "abs_diff", "n_max"], rows)
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.config:
        raise ConfigError("validate needs --config")
    network, counting = load_config(args.config)
    report = validate(network)
    print(report.summary())
    if report.ok and counting is not None:
        try:
            network.bath(counting.bath)
        except KeyError as exc:
            print(f"violation[counting-bath]: {exc}")
            return EXIT_CONFIG
    return EXIT_OK if report.ok else EXIT_CONFIG


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common(p, grid=True):
    p.add_argument("--config", help="network configuration file (JSON)")
    p.add_argument("--bath", help="override the counting reference bath label")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--threads", type=int,
                   help="worker threads (default: GAUSSLDT_THREADS or 1)")
    if grid:
        p.add_argument("--s-min", type=float, default=None)
        p.add_argument("--s-max", type=float, default=None)
        p.add_argument("--s-steps", type=int, default=201)
        p.add_argument("--s-grid", help="shorthand lo:hi:n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussldt",
        description="Counting statistics and fluctuation-theorem diagnostics "
                    "for damped harmonic-oscillator networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theta", help="sample the large-deviation function")
    _add_common(p)
    p.add_argument("--preset", choices=["fig1", "fig4"],
                   help="built-in parameter set (ignores --config)")
    p.add_argument("--dump-matrices", metavar="DIR",
                   help="write assembled operators as Matrix Market files")
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("ft-sweep", help="fluctuation-theorem reports on a sweep")
    _add_common(p, grid=False)
    p.add_argument("--preset", choices=["fig2", "fig3", "fig5", "fig6"])
    p.add_argument("--sweep", choices=["T1", "g", "gamma"])
    p.add_argument("--sweep-grid", help="lo:hi:n, log:lo:hi:n or v1,v2,...")
    p.add_argument("--delta-t", type=float, default=None,
                   help="with --sweep T1: keep the other baths at T1 + delta")
    p.add_argument("--threshold", type=float, default=ftcheck.DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_ft_sweep)

    p = sub.add_parser("cumulants", help="counting cumulants at s = 0")
    _add_common(p, grid=False)
    p.add_argument("--n-max", type=int, default=2)
    p.add_argument("--h", type=float, default=1e-3)
    p.set_defaults(func=cmd_cumulants)

    p = sub.add_parser("oracle-compare",
                       help="phase-space theta against the Fock-space oracle")
    _add_common(p)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--tol", type=float, default=1e-8,
                   help="auto-truncation tolerance")
    p.add_argument("--n-max", type=int, default=None,
                   help="fixed truncation instead of auto")
    p.add_argument("--domain-fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("validate", help="check a network configuration")
    p.add_argument("--config")
    p.add_argument("--bath")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidNetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoStationaryStateError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (DomainEmptyError, DomainBoundaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OracleResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
