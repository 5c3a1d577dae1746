"""Assembly of the quadrature-space generator for a harmonic network.

The state of N oscillators is tracked through a symmetrically ordered
generating function over 2N conjugate fields ordered (p1, q1, ..., pN, qN),
one (p, q) pair per mode.  Its evolution is fixed by four real matrices and
one vector on that space:

* drift ``A``: local frequency/damping/squeezing blocks plus the coupling
  blocks, placed symmetrically;
* noise ``D``: block diagonal, one 2x2 block per oscillator from the summed
  bath rates;
* drive ``d(t)``: (0, w1*d1(t), 0, w2*d2(t), ...);
* bias pair ``F+``/``F-``: scalar multiples of the identity on the 2x2
  block of the oscillator holding the reference bath, zero elsewhere.

Quadrature convention: x = a + a', y = i(a - a'), so the vacuum variance is
1 and a thermal state has variance 2*nbar + 1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.io
import scipy.linalg

from .errors import InvalidNetworkError
from .model import BathSpec, CountingSpec, NetworkSpec, validate


def coupling_block(kind: str, g: float) -> np.ndarray:
    """2x2 drift contribution of one bilinear coupling of strength g."""
    if kind == "xx":
        return np.array([[0.0, 0.0], [2.0 * g, 0.0]])
    if kind == "rw":
        return np.array([[0.0, -g], [g, 0.0]])
    if kind == "opo":
        return np.array([[0.0, g], [g, 0.0]])
    raise ValueError(f"unknown coupling kind {kind!r}")


def _checked(network: NetworkSpec) -> NetworkSpec:
    report = validate(network)
    if not report.ok:
        raise InvalidNetworkError("invalid network:\n" + report.summary(), report)
    return network


def assemble_drift(network: NetworkSpec) -> np.ndarray:
    """Drift matrix A, including the symmetric coupling placement."""
    _checked(network)
    n = network.n
    a = np.zeros((2 * n, 2 * n))
    agg = network.aggregate_rates()
    for i, osc in enumerate(network.oscillators):
        gd, gu, _ = agg[i]
        ur, ui = osc.upsilon.real, osc.upsilon.imag
        k = 2 * i
        a[k:k + 2, k:k + 2] = [[-2.0 * ui - gd + gu, -osc.omega + 2.0 * ur],
                               [osc.omega + 2.0 * ur, 2.0 * ui - gd + gu]]
    for c in network.couplings:
        blk = coupling_block(c.kind, c.g)
        bi, bj = 2 * c.i, 2 * c.j
        a[bi:bi + 2, bj:bj + 2] = blk
        a[bj:bj + 2, bi:bi + 2] = blk
    return a


def assemble_noise(network: NetworkSpec) -> np.ndarray:
    """Noise matrix D: block diagonal over the summed per-oscillator rates."""
    _checked(network)
    n = network.n
    d = np.zeros((2 * n, 2 * n))
    for i, (gd, gu, lam) in enumerate(network.aggregate_rates()):
        k = 2 * i
        lr, li = lam.real, lam.imag
        d[k:k + 2, k:k + 2] = [[-gd - gu + 2.0 * lr, -2.0 * li],
                               [-2.0 * li, -gd - gu - 2.0 * lr]]
    return d


def bias_functions(bath: BathSpec, s: float) -> tuple[float, float]:
    """Counting weights (f_plus, f_minus) of one bath at bias s.

    f_plus/minus = gamma_down*(e^-s - 1) +/- gamma_up*(e^s - 1), built from
    the bath's own rates, never from the oscillator aggregate.
    """
    em = np.expm1(-s)
    ep = np.expm1(s)
    return (bath.gamma_down * em + bath.gamma_up * ep,
            bath.gamma_down * em - bath.gamma_up * ep)


@dataclass(frozen=True)
class BiasMatrices:
    """Bias pair (F+, F-) for one bias value s.

    Both matrices are scalar multiples of the identity on the reference
    oscillator's 2x2 block and zero elsewhere.
    """

    f_plus: np.ndarray
    f_minus: np.ndarray
    s: float
    reference_oscillator: int

    @property
    def is_zero(self) -> bool:
        return self.s == 0.0


def assemble_bias(network: NetworkSpec, counting: CountingSpec, s: float) -> BiasMatrices:
    """Bias matrices for the counting process on the reference bath."""
    _checked(network)
    try:
        bath = network.bath(counting.bath)
    except KeyError as exc:
        raise InvalidNetworkError(str(exc)) from exc
    fp, fm = bias_functions(bath, s)
    n2 = 2 * network.n
    f_plus = np.zeros((n2, n2))
    f_minus = np.zeros((n2, n2))
    k = 2 * bath.oscillator
    f_plus[k, k] = f_plus[k + 1, k + 1] = fp
    f_minus[k, k] = f_minus[k + 1, k + 1] = fm
    return BiasMatrices(f_plus=f_plus, f_minus=f_minus, s=s,
                        reference_oscillator=bath.oscillator)


@dataclass(frozen=True)
class DriveHarmonic:
    """One cosine component of the drive vector: dc*cos(wt) + ds*sin(wt)."""

    frequency: float
    dc: np.ndarray
    ds: np.ndarray


@dataclass(frozen=True)
class DriveComponents:
    """Drive vector split as d(t) = constant + sum of harmonics."""

    constant: np.ndarray
    harmonics: tuple[DriveHarmonic, ...]

    def __call__(self, t: float) -> np.ndarray:
        d = self.constant.copy()
        for h in self.harmonics:
            d += h.dc * np.cos(h.frequency * t) + h.ds * np.sin(h.frequency * t)
        return d

    @property
    def is_zero(self) -> bool:
        return not self.harmonics and not np.any(self.constant)


def drive_components(network: NetworkSpec) -> DriveComponents:
    """Drive vector (0, w1*d1(t), ..., 0, wN*dN(t)) in harmonic form."""
    n2 = 2 * network.n
    constant = np.zeros(n2)
    by_freq: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for i, osc in enumerate(network.oscillators):
        dr = osc.drive
        if dr is None or dr.amplitude == 0.0:
            continue
        slot = 2 * i + 1
        weight = osc.omega * dr.amplitude
        if dr.kind == "constant":
            constant[slot] += weight
        else:
            dc, ds = by_freq.setdefault(dr.frequency, (np.zeros(n2), np.zeros(n2)))
            # amplitude*cos(wt + phase) = cos(phase)*cos(wt) - sin(phase)*sin(wt)
            dc[slot] += weight * np.cos(dr.phase)
            ds[slot] -= weight * np.sin(dr.phase)
    harmonics = tuple(DriveHarmonic(frequency=f, dc=dc, ds=ds)
                      for f, (dc, ds) in sorted(by_freq.items()))
    return DriveComponents(constant=constant, harmonics=harmonics)


@dataclass(frozen=True)
class PhaseSpaceSystem:
    """Assembled generator data on the 2N-dimensional quadrature space."""

    n: int
    drift: np.ndarray
    noise: np.ndarray
    drive: DriveComponents

    @property
    def dim(self) -> int:
        return 2 * self.n


def build_system(network: NetworkSpec) -> PhaseSpaceSystem:
    """Validate the network and assemble drift, noise and drive."""
    _checked(network)
    return PhaseSpaceSystem(n=network.n,
                            drift=assemble_drift(network),
                            noise=assemble_noise(network),
                            drive=drive_components(network))


def stability_margin(a: np.ndarray) -> float:
    """Largest real part over the eigenvalues of a drift matrix.

    The network has a stationary state iff the margin is strictly negative.
    """
    return float(np.max(scipy.linalg.eigvals(a).real))


def dump_matrices(directory, system: PhaseSpaceSystem,
                  bias: BiasMatrices | None = None) -> list[str]:
    """Write the assembled operators as Matrix Market files for debugging."""
    os.makedirs(directory, exist_ok=True)
    written = []

    def put(name, mat):
        path = os.path.join(directory, name + ".mtx")
        scipy.io.mmwrite(path, np.asarray(mat))
        written.append(path)

    put("drift", system.drift)
    put("noise", system.noise)
    if bias is not None:
        put("bias_plus", bias.f_plus)
        put("bias_minus", bias.f_minus)
    return written
