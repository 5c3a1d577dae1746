"""Canonical network builders used by the presets and the test suite.

Bath labels follow a fixed convention: ``bath1`` sits on the first
oscillator (the cold side and default counting reference), ``bath2`` on
the other end.
"""

from __future__ import annotations

from .model import (CountingSpec, CouplingSpec, NetworkSpec, OscillatorSpec,
                    thermal_bath)

COUNT_BATH1 = CountingSpec(bath="bath1")
COUNT_BATH2 = CountingSpec(bath="bath2")


def single_oscillator_two_baths(gamma: float = 0.1, t1: float = 0.5,
                                t2: float = 1.5, omega: float = 1.0) -> NetworkSpec:
    """One mode exchanging quanta with two thermal baths."""
    return NetworkSpec(
        oscillators=(OscillatorSpec(omega=omega),),
        baths=(thermal_bath(0, gamma, t1, omega, "bath1"),
               thermal_bath(0, gamma, t2, omega, "bath2")))


def single_oscillator_one_bath(gamma: float = 0.1, t: float = 0.0,
                               omega: float = 1.0) -> NetworkSpec:
    return NetworkSpec(
        oscillators=(OscillatorSpec(omega=omega),),
        baths=(thermal_bath(0, gamma, t, omega, "bath1"),))


def _end_bath_chain(n: int, kind: str, g: float, gamma: float, t1: float,
                    tn: float, omega: float) -> NetworkSpec:
    oscillators = tuple(OscillatorSpec(omega=omega) for _ in range(n))
    couplings = tuple(CouplingSpec(i=i, j=i + 1, kind=kind, g=g)
                      for i in range(n - 1))
    baths = (thermal_bath(0, gamma, t1, omega, "bath1"),
             thermal_bath(n - 1, gamma, tn, omega, "bath2"))
    return NetworkSpec(oscillators=oscillators, couplings=couplings, baths=baths)


def rw_chain(n: int = 10, g: float = 0.1, gamma: float = 0.1, t1: float = 0.5,
             tn: float = 1.5, omega: float = 1.0) -> NetworkSpec:
    """Chain with excitation-conserving couplings, thermal baths at the ends."""
    return _end_bath_chain(n, "rw", g, gamma, t1, tn, omega)


def opo_chain(n: int = 2, g: float = 0.1, gamma: float = 0.1, t1: float = 0.5,
              tn: float = 1.5, omega: float = 1.0) -> NetworkSpec:
    """Chain with two-mode-squeezing couplings, thermal baths at the ends.

    Odd chains of this kind have no stationary state; the pair (n = 2) is
    the workhorse instance.
    """
    return _end_bath_chain(n, "opo", g, gamma, t1, tn, omega)


def xx_pair(g: float = 0.1, gamma: float = 0.1, t1: float = 10.0,
            t2: float = 11.0, omega: float = 1.0) -> NetworkSpec:
    """Two modes coupled through the squared relative displacement.

    The interaction (g/2) * (x1 - x2)^2 expands into a frequency shift
    omega -> omega + g and a single-mode squeezing rate g/2 on each
    oscillator, plus a position-position cross coupling of strength -g.
    """
    osc = OscillatorSpec(omega=omega + g, upsilon=complex(g / 2.0, 0.0))
    return NetworkSpec(
        oscillators=(osc, osc),
        couplings=(CouplingSpec(i=0, j=1, kind="xx", g=-g),),
        baths=(thermal_bath(0, gamma, t1, omega, "bath1"),
               thermal_bath(1, gamma, t2, omega, "bath2")))
