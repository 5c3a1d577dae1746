"""Large-deviation function of the counting process and its cumulants.

For an undriven network the scaled cumulant generating function of the
net exchange with the reference bath reduces to a trace over the
stationary biased covariance,

    theta(s) = (f+(s) * (sxx_rr + syy_rr) - 2 f-(s)) / 2,

where (sxx_rr + syy_rr) is the quadrature variance sum of the oscillator
holding the reference bath.  With a drive the time-averaged quadratic of
the biased first moment is added.  theta is evaluated pointwise, on grids
(with continuation seeding and branch-point bisection), and differentiated
at s = 0 to produce the counting cumulants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceError, DomainBoundaryError, DomainEmptyError,
                     InvalidNetworkError)
from .model import CountingSpec, NetworkSpec, validate
from .phasespace import (BiasMatrices, assemble_bias, assemble_drift,
                         assemble_noise, bias_functions, build_system)
from .solver import (BiasedCovariance, integrate_first_moment,
                     solve_riccati_stationary)

BRANCH_POINT_TOL = 1e-6


class ThetaEvaluator:
    """Pointwise theta evaluation with caching and continuation seeding.

    Successful solves are cached per bias value; a new solve is seeded with
    the covariance of the nearest previously solved point so the Newton
    fallback can track the stabilizing branch where the direct method
    struggles.
    """

    def __init__(self, network: NetworkSpec, counting: CountingSpec):
        report = validate(network)
        if not report.ok:
            raise InvalidNetworkError("invalid network:\n" + report.summary(), report)
        try:
            self.bath = network.bath(counting.bath)
        except KeyError as exc:
            raise InvalidNetworkError(str(exc)) from exc
        self.network = network
        self.counting = counting
        self.drift = assemble_drift(network)
        self.noise = assemble_noise(network)
        self._cache: dict[float, BiasedCovariance] = {}

    @property
    def reference_oscillator(self) -> int:
        return self.bath.oscillator

    def bias(self, s: float) -> BiasMatrices:
        return assemble_bias(self.network, self.counting, s)

    def _seed(self, s: float) -> np.ndarray | None:
        if not self._cache:
            return None
        nearest = min(self._cache, key=lambda t: abs(t - s))
        return self._cache[nearest].sigma

    def covariance(self, s: float) -> BiasedCovariance:
        cov = self._cache.get(s)
        if cov is None:
            b = self.bias(s)
            cov = solve_riccati_stationary(self.drift, self.noise, b.f_plus,
                                           b.f_minus, s=s, seed=self._seed(s))
            self._cache[s] = cov
        return cov

    def theta(self, s: float) -> float:
        """theta at one bias value; DomainBoundaryError past a branch point."""
        cov = self.covariance(s)
        fp, fm = bias_functions(self.bath, s)
        r = self.reference_oscillator
        block = cov.sigma[2 * r, 2 * r] + cov.sigma[2 * r + 1, 2 * r + 1]
        return 0.5 * fp * block - fm

    def try_theta(self, s: float) -> float | None:
        try:
            return self.theta(s)
        except (DomainBoundaryError, ConvergenceError):
            return None

    def solvable(self, s: float) -> bool:
        return self.try_theta(s) is not None


@dataclass
class ThetaCurve:
    """Sampled large-deviation function with branch-point estimates.

    ``theta`` holds NaN at unsolvable grid points; ``domain`` is the pair
    of bisected branch-point estimates, with -inf/+inf meaning that no
    boundary was bracketed inside the sampled window.
    """

    s_grid: np.ndarray
    theta: np.ndarray
    solvable: np.ndarray
    closed_loop_margin: np.ndarray
    domain: tuple[float, float]
    reference_bath: str

    def csv_rows(self):
        for s, th, ok, mg in zip(self.s_grid, self.theta, self.solvable,
                                 self.closed_loop_margin):
            yield s, th, bool(ok), mg


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_theta_csv(curve: ThetaCurve, fh, extra: dict | None = None) -> None:
    """Emit the curve in the documented column contract.

    ``extra`` prepends constant-valued columns (for preset sweeps); the
    core columns and their order stay fixed.
    """
    extra = extra or {}
    header = list(extra) + ["s", "theta", "solvable", "closed_loop_margin"]
    fh.write(",".join(header) + "\n")
    prefix = [_format_float(v) if isinstance(v, float) else str(v)
              for v in extra.values()]
    for s, th, ok, mg in curve.csv_rows():
        row = prefix + [_format_float(s), _format_float(th), str(int(ok)),
                        _format_float(mg)]
        fh.write(",".join(row) + "\n")


def _bisect_branch(ev: ThetaEvaluator, s_good: float, s_bad: float,
                   tol: float = BRANCH_POINT_TOL) -> float:
    """Refine a solvable/unsolvable bracket down to ``tol`` in s."""
    while abs(s_bad - s_good) > tol:
        mid = 0.5 * (s_good + s_bad)
        if ev.solvable(mid):
            s_good = mid
        else:
            s_bad = mid
    return 0.5 * (s_good + s_bad)


def theta_curve_from_evaluator(ev: ThetaEvaluator, s_lo: float, s_hi: float,
                               n_points: int) -> ThetaCurve:
    if n_points < 3:
        raise ValueError("n_points must be at least 3")
    if not s_hi > s_lo:
        raise ValueError("need s_hi > s_lo")
    grid = np.linspace(s_lo, s_hi, n_points)
    theta = np.full(n_points, np.nan)
    margin = np.full(n_points, np.nan)
    ok = np.zeros(n_points, dtype=bool)

    # walk outward from the point nearest the unbiased value so each solve
    # can be seeded by its inner neighbour
    start = int(np.argmin(np.abs(grid)))
    order = list(range(start, n_points)) + list(range(start - 1, -1, -1))
    for idx in order:
        val = ev.try_theta(grid[idx])
        if val is not None:
            theta[idx] = val
            margin[idx] = ev.covariance(grid[idx]).closed_loop_margin
            ok[idx] = True

    if not ok.any():
        raise DomainEmptyError(
            f"no solvable bias value in [{s_lo}, {s_hi}] for bath {ev.bath.label!r}")

    solved = np.flatnonzero(ok)
    # the stabilizing branch lives on one interval; track the island that
    # contains the point nearest s = 0
    islands = np.split(solved, np.flatnonzero(np.diff(solved) > 1) + 1)
    anchor = solved[np.argmin(np.abs(grid[solved]))]
    island = next(isl for isl in islands if anchor in isl)

    lo_idx, hi_idx = island[0], island[-1]
    lo = -math.inf if lo_idx == 0 else _bisect_branch(ev, grid[lo_idx], grid[lo_idx - 1])
    hi = math.inf if hi_idx == n_points - 1 else _bisect_branch(ev, grid[hi_idx],
                                                                grid[hi_idx + 1])
    return ThetaCurve(s_grid=grid, theta=theta, solvable=ok,
                      closed_loop_margin=margin, domain=(lo, hi),
                      reference_bath=ev.bath.label)


def theta_curve(network: NetworkSpec, counting: CountingSpec, s_lo: float,
                s_hi: float, n_points: int) -> ThetaCurve:
    """Evaluate theta on a grid, marking branch points and failures."""
    return theta_curve_from_evaluator(ThetaEvaluator(network, counting),
                                      s_lo, s_hi, n_points)


def theta_stationary(network: NetworkSpec, counting: CountingSpec, s: float) -> float:
    """theta of an undriven network at one bias value."""
    if network.has_drive():
        raise ValueError("network carries a drive: use theta_driven")
    return ThetaEvaluator(network, counting).theta(s)


def theta_driven(network: NetworkSpec, counting: CountingSpec, s: float,
                 horizon: float | None = None) -> float:
    """theta including the drive contribution from the biased first moment.

    Without a drive this equals theta_stationary.  With a drive the
    covariance term is evaluated at the stationary biased covariance and
    the first-moment quadratic is time averaged until its window means
    agree to 1e-8 relative, doubling the horizon a few times before giving
    up (the raised ConvergenceError then carries the partial estimate).
    """
    ev = ThetaEvaluator(network, counting)
    cov = ev.covariance(s)
    stat_term = ev.theta(s)
    if not network.has_drive():
        return stat_term
    system = build_system(network)
    bias = ev.bias(s)
    attempts = 1 if horizon is not None else 6
    h = horizon
    last_exc = None
    for _ in range(attempts):
        try:
            path = integrate_first_moment(system, bias, cov.sigma, horizon=h)
            return stat_term + path.quadratic_average
        except ConvergenceError as exc:
            last_exc = exc
            if h is None:
                h = 2.0 * float(exc.partial.times[-1])
            else:
                h *= 2.0
    partial = last_exc.partial
    raise ConvergenceError(
        "driven theta window average did not settle; partial value "
        f"{stat_term + partial.quadratic_average:.12e}",
        partial=stat_term + partial.quadratic_average)


@dataclass(frozen=True)
class CumulantSet:
    """Scaled cumulants (per unit time) of the counting process."""

    kappa: tuple[float, ...]
    h: float
    levels: int

    def __getitem__(self, n: int) -> float:
        """1-based access: cumulants[1] is the mean flow rate."""
        if n < 1 or n > len(self.kappa):
            raise IndexError(f"cumulant order {n} not computed")
        return self.kappa[n - 1]


_STENCILS = {
    # order -> (offsets in units of h, weights, power of h in denominator)
    1: ((1, -1), (0.5, -0.5), 1),
    2: ((1, 0, -1), (1.0, -2.0, 1.0), 2),
    3: ((2, 1, -1, -2), (0.5, -1.0, 1.0, -0.5), 3),
    4: ((2, 1, 0, -1, -2), (1.0, -4.0, 6.0, -4.0, 1.0), 4),
}


def _richardson(values: list[float]) -> float:
    """Limit h -> 0 of central differences sampled at h_j = h * 2^j.

    ``values`` is ordered from the largest step to the smallest; the error
    expansion only contains even powers of h, so each sweep gains two
    orders with the classical (4^k T_fine - T_coarse) / (4^k - 1) update.
    """
    t = list(values)
    n = len(t)
    for k in range(1, n):
        fac = 4.0 ** k
        t = [(fac * t[i + 1] - t[i]) / (fac - 1.0) for i in range(n - k)]
    return t[0]


def cumulants(network: NetworkSpec, counting: CountingSpec, n_max: int = 2,
              h: float = 1e-3) -> CumulantSet:
    """First n_max scaled cumulants from theta derivatives at s = 0.

    Central finite differences with step doubling and Richardson
    extrapolation; n_max is capped at 4.  The whole stencil must fit inside
    the solvable domain around 0.
    """
    if not (1 <= n_max <= 4):
        raise ValueError("n_max must be between 1 and 4")
    if h <= 0:
        raise ValueError("h must be positive")
    ev = ThetaEvaluator(network, counting)
    levels = n_max + 1
    reach = max(off for n in range(1, n_max + 1) for off in _STENCILS[n][0])
    extent = reach * h * 2.0 ** (levels - 1)
    for probe in (-extent, extent):
        if not ev.solvable(probe):
            raise DomainEmptyError(
                f"domain too narrow around 0 for the cumulant stencil "
                f"(needs +/-{extent:.3g})")

    cache: dict[float, float] = {}

    def th(s: float) -> float:
        if s not in cache:
            cache[s] = ev.theta(s)
        return cache[s]

    kappas = []
    for n in range(1, n_max + 1):
        offsets, weights, power = _STENCILS[n]
        diffs = []
        for j in reversed(range(levels)):
            hj = h * 2.0 ** j
            diffs.append(sum(w * th(off * hj) for off, w in zip(offsets, weights))
                         / hj ** power)
        deriv = _richardson(diffs)
        kappas.append((-1.0) ** n * deriv)
    return CumulantSet(kappa=tuple(kappas), h=h, levels=levels)
