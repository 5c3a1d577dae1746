"""Local fluctuation-theorem detection from the large-deviation function.

A local fluctuation theorem for the exchange with one bath is equivalent
to a reflection symmetry theta(s) = theta(s_r - s).  The detector locates
the minimum s_min of theta, proposes the candidate affinity s_r = 2*s_min,
and quantifies the symmetry through

    Sym = | theta(2*s_min) / theta(s_min) |,

which vanishes for a perfectly symmetric curve because theta(s_r) then
equals theta(0) = 0.  For a handful of network templates the affinity is
also known in closed form from the bath rates alone and is reported next
to the numerical candidate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import (DegenerateCurveError, DomainBoundaryError,
                     NoStationaryStateError)
from .ldf import ThetaCurve, ThetaEvaluator, theta_curve_from_evaluator
from .model import CountingSpec, NetworkSpec
from .phasespace import stability_margin

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-2
SMIN_TOL = 1e-8
FLAT_TOL = 1e-10


@dataclass(frozen=True)
class MinimumSearch:
    """Location of the theta minimum with its quality flags."""

    s_min: float
    theta_min: float
    at_boundary: bool
    degenerate: bool


def _golden_section(f, a, b, tol):
    """Standard golden-section shrink of a unimodal bracket [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _polish_minimum(ev: ThetaEvaluator, s0: float, width: float) -> float:
    """Sharpen s_min by solving theta'(s) = 0.

    Function values alone cannot place a quadratic minimum better than the
    square root of the solver noise, which is not enough for the symmetry
    diagnostics; the root of the Richardson-extrapolated central derivative
    localizes it a few orders of magnitude tighter.
    """
    delta = 2e-3

    def deriv(s):
        d1 = (ev.theta(s + delta) - ev.theta(s - delta)) / (2.0 * delta)
        d2 = (ev.theta(s + delta / 2) - ev.theta(s - delta / 2)) / delta
        return (4.0 * d2 - d1) / 3.0

    for w in (width, 10.0 * width):
        lo, hi = s0 - w, s0 + w
        try:
            dlo, dhi = deriv(lo), deriv(hi)
            if dlo == 0.0:
                return lo
            if dhi == 0.0:
                return hi
            if dlo * dhi > 0:
                continue
            return float(scipy.optimize.brentq(deriv, lo, hi, xtol=1e-12, rtol=1e-15))
        except (DomainBoundaryError, ValueError):
            return s0
    return s0


def find_smin(curve: ThetaCurve, evaluator: ThetaEvaluator | None = None,
              tol: float = SMIN_TOL, flat_tol: float = FLAT_TOL) -> MinimumSearch:
    """Minimum of theta over the resolved part of a sampled curve.

    The coarse-grid minimum is refined by golden section (and a derivative
    polish) when an evaluator is supplied; a minimum sitting on the edge of
    the resolved domain is flagged instead of refined, and a flat curve is
    flagged degenerate.
    """
    idx = np.flatnonzero(curve.solvable)
    if idx.size == 0:
        raise DomainBoundaryError("curve has no resolved points")
    values = curve.theta[idx]
    spread = float(np.max(values) - np.min(values))
    if spread < flat_tol:
        k = idx[np.argmin(values)]
        return MinimumSearch(s_min=float(curve.s_grid[k]),
                             theta_min=float(curve.theta[k]),
                             at_boundary=False, degenerate=True)

    k_loc = int(np.argmin(values))
    k = idx[k_loc]
    at_boundary = (k_loc == 0 or k_loc == idx.size - 1
                   or idx[k_loc - 1] != k - 1 or idx[k_loc + 1] != k + 1)
    s_best = float(curve.s_grid[k])
    th_best = float(curve.theta[k])
    if at_boundary or evaluator is None:
        return MinimumSearch(s_min=s_best, theta_min=th_best,
                             at_boundary=at_boundary, degenerate=False)

    a, b = float(curve.s_grid[k - 1]), float(curve.s_grid[k + 1])
    s_ref = _golden_section(evaluator.theta, a, b, tol)
    s_ref = _polish_minimum(evaluator, s_ref, max(1000.0 * tol, 1e-5))
    return MinimumSearch(s_min=s_ref, theta_min=float(evaluator.theta(s_ref)),
                         at_boundary=False, degenerate=False)


def sym_criterion(evaluator: ThetaEvaluator, s_min: float,
                  flat_tol: float = FLAT_TOL) -> float:
    """|theta(2 s_min) / theta(s_min)|; small means symmetric.

    Raises DegenerateCurveError when theta(s_min) vanishes and
    DomainBoundaryError when 2 s_min falls outside the solvable domain.
    """
    theta_min = evaluator.theta(s_min)
    if abs(theta_min) < flat_tol:
        raise DegenerateCurveError(
            f"theta(s_min) = {theta_min:.3e} is indistinguishable from zero")
    return abs(evaluator.theta(2.0 * s_min) / theta_min)


@dataclass(frozen=True)
class AnalyticSymPoint:
    """Closed-form affinity prediction for a recognized network template."""

    value: float
    template: str


def _two_bath_rates(network: NetworkSpec, reference_label: str):
    ref = network.bath(reference_label)
    others = [b for b in network.baths if b.label != reference_label]
    return ref, others


def analytic_sympoint(network: NetworkSpec,
                      counting: CountingSpec) -> AnalyticSymPoint | None:
    """Rate-only affinity formula where the topology supports one.

    Recognized templates: a single oscillator with several baths; a network
    coupled purely through excitation-conserving links with two baths on
    distinct oscillators; a two-mode-squeezing pair with two baths.  For
    anything else (or degenerate rates) nothing is predicted.
    """
    ref, others = _two_bath_rates(network, counting.bath)
    kinds = {c.kind for c in network.couplings}

    if network.n == 1 and len(others) >= 1:
        up_sum = sum(b.gamma_up for b in others)
        down_sum = sum(b.gamma_down for b in others)
        if ref.gamma_up <= 0 or up_sum <= 0 or down_sum <= 0:
            log.info("analytic affinity undefined: vanishing rate sums")
            return None
        value = math.log((ref.gamma_down / ref.gamma_up) * (up_sum / down_sum))
        return AnalyticSymPoint(value=value, template="single-oscillator")

    if len(others) == 1 and others[0].oscillator != ref.oscillator and kinds:
        other = others[0]
        if kinds == {"rw"}:
            if ref.gamma_up <= 0 or other.gamma_down <= 0 or other.gamma_up <= 0:
                log.info("analytic affinity undefined: vanishing rates")
                return None
            value = math.log((ref.gamma_down / ref.gamma_up)
                             * (other.gamma_up / other.gamma_down))
            return AnalyticSymPoint(value=value, template="rw-network")
        if kinds == {"opo"} and network.n == 2 and len(network.couplings) == 1:
            if ref.gamma_up <= 0 or other.gamma_up <= 0:
                log.info("analytic affinity undefined: vanishing rates")
                return None
            value = math.log((ref.gamma_down / ref.gamma_up)
                             * (other.gamma_down / other.gamma_up))
            return AnalyticSymPoint(value=value, template="opo-pair")
    return None


@dataclass(frozen=True)
class FtReport:
    """Verdict on a local fluctuation theorem for one reference bath."""

    reference_bath: str
    s_min: float
    s_candidate: float
    theta_min: float
    sym_value: float
    holds: bool
    threshold: float
    degenerate: bool
    boundary_minimum: bool
    symmetry_defect: float
    analytic_prediction: float | None = None
    analytic_template: str | None = None

    @property
    def verdict(self) -> str:
        if self.degenerate:
            return "degenerate"
        return "ft" if self.holds else "no-ft"


def _default_grid(ev: ThetaEvaluator,
                  analytic: AnalyticSymPoint | None) -> tuple[float, float]:
    """Window [-1.5, 1.5] times the natural bias scale of the problem.

    The scale is the reference bath's log rate ratio (1/T for a thermal
    bath), stretched when a closed-form affinity is known to lie further
    out so the minimum stays interior to the window.
    """
    b = ev.bath
    scale = 1.0
    if b.gamma_up > 0 and b.gamma_down > b.gamma_up:
        scale = math.log(b.gamma_down / b.gamma_up)
    if analytic is not None:
        scale = max(scale, abs(analytic.value))
    return -1.5 * scale, 1.5 * scale


def _symmetry_defect(ev: ThetaEvaluator, curve: ThetaCurve, s_min: float) -> float:
    """max |theta(s) - theta(2 s_min - s)| over the mirrorable grid points."""
    lo, hi = curve.domain
    defect = 0.0
    for s, th, ok in zip(curve.s_grid, curve.theta, curve.solvable):
        if not ok:
            continue
        mirror = 2.0 * s_min - s
        if not (lo < mirror < hi):
            continue
        val = ev.try_theta(mirror)
        if val is not None:
            defect = max(defect, abs(th - val))
    return defect


def ft_report(network: NetworkSpec, counting: CountingSpec,
              threshold: float = DEFAULT_THRESHOLD,
              s_lo: float | None = None, s_hi: float | None = None,
              n_points: int = 201) -> FtReport:
    """Full fluctuation-theorem diagnostic for one network and bath.

    Builds the curve, locates s_min, evaluates the point criterion and the
    advisory full-curve symmetry defect, and attaches the closed-form
    affinity when the topology is recognized.  The point criterion decides
    ``holds``; a flat curve yields the ``degenerate`` verdict.
    """
    ev = ThetaEvaluator(network, counting)
    margin = stability_margin(ev.drift)
    if margin >= 0:
        raise NoStationaryStateError(
            f"network is not stable (drift margin {margin:.3e})")
    analytic = analytic_sympoint(network, counting)
    if s_lo is None or s_hi is None:
        g_lo, g_hi = _default_grid(ev, analytic)
        s_lo = g_lo if s_lo is None else s_lo
        s_hi = g_hi if s_hi is None else s_hi
    curve = theta_curve_from_evaluator(ev, s_lo, s_hi, n_points)

    found = find_smin(curve, ev)
    s_candidate = 2.0 * found.s_min
    if found.degenerate:
        return FtReport(reference_bath=curve.reference_bath, s_min=found.s_min,
                        s_candidate=s_candidate, theta_min=found.theta_min,
                        sym_value=float("nan"), holds=False, threshold=threshold,
                        degenerate=True, boundary_minimum=found.at_boundary,
                        symmetry_defect=0.0,
                        analytic_prediction=analytic.value if analytic else None,
                        analytic_template=analytic.template if analytic else None)

    try:
        sym = sym_criterion(ev, found.s_min)
    except (DegenerateCurveError, DomainBoundaryError):
        sym = float("nan")
    holds = (not found.at_boundary) and math.isfinite(sym) and sym < threshold
    defect = _symmetry_defect(ev, curve, found.s_min)
    return FtReport(reference_bath=curve.reference_bath, s_min=found.s_min,
                    s_candidate=s_candidate, theta_min=found.theta_min,
                    sym_value=sym, holds=holds, threshold=threshold,
                    degenerate=False, boundary_minimum=found.at_boundary,
                    symmetry_defect=defect,
                    analytic_prediction=analytic.value if analytic else None,
                    analytic_template=analytic.template if analytic else None)
