"""Independent closed-form references used by the tests.

Everything here is derived from scratch (scalar algebra, no package
matrices) so agreement with the library is a genuine cross-check, not a
tautology.
"""

from __future__ import annotations

import math

import scipy.optimize


def bose_occupation(temperature: float, omega: float = 1.0) -> float:
    if temperature == 0:
        return 0.0
    return 1.0 / math.expm1(omega / temperature)


def thermal_pair(gamma: float, temperature: float, omega: float = 1.0):
    n = bose_occupation(temperature, omega)
    return (n + 1.0) * gamma / 2.0, n * gamma / 2.0


class SingleModeTwoBaths:
    """Scalar reduction of the biased covariance problem for one mode.

    With isotropic thermal noise the biased covariance stays proportional
    to the identity, sigma(s) * I2.  Writing gt/gbt for the summed
    emission/absorption rates and (fp, fm) for the counting weights of the
    reference bath, the stationary condition collapses to the quadratic

        fp * sigma^2 - 2*(gt - gbt + fm)*sigma + fp + 2*(gt + gbt) = 0,

    whose stabilizing root is (a - sqrt(disc))/fp with a = gt - gbt + fm
    and disc = a^2 - fp*(fp + 2*(gt + gbt)).  The large-deviation function
    is then fp*sigma - fm = (gt - gbt) - sqrt(disc), which also covers the
    fp = 0 points by continuity.  Branch points are the roots of disc.
    """

    def __init__(self, gamma=0.1, t1=0.5, t2=1.5, omega=1.0):
        self.gd1, self.gu1 = thermal_pair(gamma, t1, omega)
        self.gd2, self.gu2 = thermal_pair(gamma, t2, omega)
        self.gt = self.gd1 + self.gd2
        self.gbt = self.gu1 + self.gu2

    def weights(self, s: float):
        fp = self.gd1 * math.expm1(-s) + self.gu1 * math.expm1(s)
        fm = self.gd1 * math.expm1(-s) - self.gu1 * math.expm1(s)
        return fp, fm

    def discriminant(self, s: float) -> float:
        fp, fm = self.weights(s)
        a = self.gt - self.gbt + fm
        return a * a - fp * (fp + 2.0 * (self.gt + self.gbt))

    def sigma(self, s: float) -> float:
        fp, fm = self.weights(s)
        a = self.gt - self.gbt + fm
        disc = self.discriminant(s)
        if disc < 0:
            raise ValueError(f"s={s} is outside the solvable domain")
        if fp == 0.0:
            return (fp + 2.0 * (self.gt + self.gbt)) / (2.0 * a)
        return (a - math.sqrt(disc)) / fp

    def theta(self, s: float) -> float:
        disc = self.discriminant(s)
        if disc < 0:
            raise ValueError(f"s={s} is outside the solvable domain")
        return (self.gt - self.gbt) - math.sqrt(disc)

    def branch_points(self, span=20.0) -> tuple[float, float]:
        """Roots of the discriminant bracketing s = 0, via scalar brentq."""

        def locate(direction):
            step = 0.05 * direction
            s_in = 0.0
            while True:
                s_out = s_in + step
                if abs(s_out) > span:
                    raise ValueError("no branch point within span")
                if self.discriminant(s_out) < 0:
                    lo, hi = sorted((s_in, s_out))
                    return scipy.optimize.brentq(self.discriminant, lo, hi,
                                                 xtol=1e-12, rtol=1e-15)
                s_in = s_out

        return locate(-1.0), locate(+1.0)

    def affinity(self) -> float:
        return math.log((self.gd1 / self.gu1) * (self.gu2 / self.gd2))
