"""Declarative description of a damped harmonic-oscillator network.

A network is a set of harmonic oscillators (each with an optional bounded
drive and an optional single-mode squeezing rate), bilinear couplings
between pairs of oscillators, and dissipative channels: every bath attaches
to one oscillator with an emission rate ``gamma_down`` (system to bath), an
absorption rate ``gamma_up`` (bath to system) and an optional complex
squeezed-reservoir rate.  Several baths may share one oscillator; they are
kept as first-class entities because the counting process singles out one
bath and biases only its own rates.

Units: hbar = k_B = 1 throughout.  Frequencies and rates are expressed in
units of a global reference frequency, temperatures in units of that
frequency (hbar*omega/k_B).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ConfigError

COUPLING_KINDS = ("xx", "rw", "opo")
DRIVE_KINDS = ("constant", "sinusoidal")


@dataclass(frozen=True)
class DriveSpec:
    """Bounded time-dependent force acting on one oscillator.

    ``constant`` realizes d(t) = amplitude; ``sinusoidal`` realizes
    d(t) = amplitude * cos(frequency * t + phase).  Either way
    |d(t)| <= amplitude.
    """

    kind: str
    amplitude: float
    frequency: float = 0.0
    phase: float = 0.0

    def value(self, t: float) -> float:
        if self.kind == "constant":
            return self.amplitude
        return self.amplitude * math.cos(self.frequency * t + self.phase)


@dataclass(frozen=True)
class OscillatorSpec:
    """Single mode: angular frequency, optional drive, squeezing rate."""

    omega: float
    drive: DriveSpec | None = None
    upsilon: complex = 0j


@dataclass(frozen=True)
class CouplingSpec:
    """Bilinear coupling between oscillators i and j (i != j).

    kind is one of ``xx`` (position-position), ``rw`` (excitation
    conserving) or ``opo`` (two-mode squeezing); g is the strength and is
    symmetric under i <-> j by construction.
    """

    i: int
    j: int
    kind: str
    g: float

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass(frozen=True)
class BathSpec:
    """One dissipative channel attached to one oscillator.

    ``lam`` is the complex squeezed-reservoir rate; its conjugate partner
    is fixed to lam* so the dissipator stays Hermiticity preserving.
    ``temperature`` is recorded when the rates come from the thermal
    shorthand; it is informational (the rates are authoritative).
    """

    oscillator: int
    gamma_down: float
    gamma_up: float
    label: str
    lam: complex = 0j
    temperature: float | None = None


@dataclass(frozen=True)
class NetworkSpec:
    """Full problem instance: oscillators, couplings and baths."""

    oscillators: tuple[OscillatorSpec, ...]
    couplings: tuple[CouplingSpec, ...] = ()
    baths: tuple[BathSpec, ...] = ()

    @property
    def n(self) -> int:
        return len(self.oscillators)

    def bath(self, label: str) -> BathSpec:
        for b in self.baths:
            if b.label == label:
                return b
        raise KeyError(f"no bath labelled {label!r}")

    def baths_on(self, oscillator: int) -> tuple[BathSpec, ...]:
        return tuple(b for b in self.baths if b.oscillator == oscillator)

    def aggregate_rates(self) -> list[tuple[float, float, complex]]:
        """Per-oscillator (gamma_down, gamma_up, lam) summed over baths.

        The matrix assemblers consume these sums; biasing always uses the
        reference bath's own rates instead.
        """
        agg = [(0.0, 0.0, 0j) for _ in self.oscillators]
        for b in self.baths:
            gd, gu, lm = agg[b.oscillator]
            agg[b.oscillator] = (gd + b.gamma_down, gu + b.gamma_up, lm + b.lam)
        return agg

    def has_drive(self) -> bool:
        return any(o.drive is not None and o.drive.amplitude != 0.0 for o in self.oscillators)


@dataclass(frozen=True)
class CountingSpec:
    """Selects the reference bath whose net quantum exchange is counted.

    Sign convention: the counted number is positive when quanta are emitted
    into the reference bath.
    """

    bath: str


def thermal_rates(gamma: float, temperature: float, omega: float) -> tuple[float, float]:
    """Emission/absorption rates of a thermal bath coupled at strength gamma.

    Returns ((nbar + 1) * gamma / 2, nbar * gamma / 2) with the Bose
    occupation nbar = 1 / (exp(omega / T) - 1); T = 0 gives (gamma / 2, 0).
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        nbar = 0.0
    else:
        nbar = 1.0 / math.expm1(omega / temperature)
    return (nbar + 1.0) * gamma / 2.0, nbar * gamma / 2.0


def thermal_bath(oscillator: int, gamma: float, temperature: float, omega: float,
                 label: str) -> BathSpec:
    """Convenience constructor: BathSpec from the (gamma, T) shorthand."""
    gd, gu = thermal_rates(gamma, temperature, omega)
    return BathSpec(oscillator=oscillator, gamma_down=gd, gamma_up=gu,
                    label=label, temperature=temperature)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str


@dataclass
class ValidationReport:
    """Outcome of structural validation; never raised, always returned."""

    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)
    aggregates: list[tuple[float, float, complex]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = []
        for v in self.violations:
            lines.append(f"violation[{v.code}]: {v.detail}")
        for w in self.warnings:
            lines.append(f"warning[{w.code}]: {w.detail}")
        if not lines:
            lines.append("network valid")
        return "\n".join(lines)


def validate(network: NetworkSpec) -> ValidationReport:
    """Structural checks on a network; returns every violation found."""
    report = ValidationReport()
    n = network.n

    def bad(code, detail):
        report.violations.append(Violation(code, detail))

    if n < 1:
        bad("empty-network", "network needs at least one oscillator")
        return report

    for k, osc in enumerate(network.oscillators):
        if not (osc.omega > 0):
            bad("nonpositive-frequency", f"oscillator {k}: omega = {osc.omega}")
        if not math.isfinite(abs(osc.upsilon)):
            bad("nonfinite-squeezing", f"oscillator {k}: upsilon = {osc.upsilon}")
        d = osc.drive
        if d is not None:
            if d.kind not in DRIVE_KINDS:
                bad("unknown-drive-kind", f"oscillator {k}: kind = {d.kind!r}")
            if d.amplitude < 0:
                bad("negative-drive-amplitude", f"oscillator {k}: amplitude = {d.amplitude}")

    seen_pairs = set()
    for c in network.couplings:
        if c.kind not in COUPLING_KINDS:
            bad("unknown-coupling-kind", f"coupling {c.i}-{c.j}: kind = {c.kind!r}")
        if c.i == c.j:
            bad("self-coupling", f"coupling attaches oscillator {c.i} to itself")
            continue
        if not (0 <= c.i < n and 0 <= c.j < n):
            bad("coupling-index-range", f"coupling {c.i}-{c.j} outside 0..{n - 1}")
            continue
        if c.pair in seen_pairs:
            bad("duplicate-coupling", f"more than one coupling on pair {c.pair}")
        seen_pairs.add(c.pair)

    seen_labels = set()
    for b in network.baths:
        if not (0 <= b.oscillator < n):
            bad("bath-index-range", f"bath {b.label!r} on oscillator {b.oscillator}")
        if b.gamma_down < 0 or b.gamma_up < 0:
            bad("negative-rate", f"bath {b.label!r}: rates ({b.gamma_down}, {b.gamma_up})")
        if b.gamma_down + b.gamma_up <= 0:
            bad("dead-bath", f"bath {b.label!r}: gamma_down + gamma_up must be > 0")
        if b.label in seen_labels:
            bad("duplicate-bath-label", f"label {b.label!r} used twice")
        seen_labels.add(b.label)

    if report.ok:
        report.aggregates = network.aggregate_rates()
        bathless = [i for i in range(n) if not network.baths_on(i)]
        for i in bathless:
            report.warnings.append(
                Violation("bathless-oscillator", f"oscillator {i} has no bath attached"))
    return report


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------
#
# Top-level keys: oscillators[], couplings[], baths[], counting.bath.
# Oscillator indices are 0-based.  Complex scalars are written as a plain
# number (purely real) or a two-element [re, im] list.  A bath is given
# either raw rates {gamma_down, gamma_up} or the thermal shorthand
# {gamma, T}.  Unknown keys are rejected everywhere.

def _require_keys(d: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _as_complex(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected number or [re, im], got {v!r}")


def _as_real(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _drive_from_dict(d: dict, where: str) -> DriveSpec:
    _require_keys(d, {"kind", "amplitude", "frequency", "phase"}, {"kind", "amplitude"}, where)
    kind = d["kind"]
    if kind not in DRIVE_KINDS:
        raise ConfigError(f"{where}: drive kind must be one of {DRIVE_KINDS}, got {kind!r}")
    if kind == "constant" and ("frequency" in d or "phase" in d):
        raise ConfigError(f"{where}: constant drive takes no frequency/phase")
    return DriveSpec(kind=kind,
                     amplitude=_as_real(d["amplitude"], where),
                     frequency=_as_real(d.get("frequency", 0.0), where),
                     phase=_as_real(d.get("phase", 0.0), where))


def _oscillator_from_dict(d: dict, where: str) -> OscillatorSpec:
    _require_keys(d, {"omega", "drive", "upsilon"}, {"omega"}, where)
    drive = _drive_from_dict(d["drive"], where + ".drive") if "drive" in d else None
    return OscillatorSpec(omega=_as_real(d["omega"], where),
                          drive=drive,
                          upsilon=_as_complex(d.get("upsilon", 0.0), where))


def _coupling_from_dict(d: dict, where: str) -> CouplingSpec:
    _require_keys(d, {"i", "j", "kind", "g"}, {"i", "j", "kind", "g"}, where)
    if not isinstance(d["i"], int) or not isinstance(d["j"], int):
        raise ConfigError(f"{where}: oscillator indices must be integers")
    return CouplingSpec(i=d["i"], j=d["j"], kind=d["kind"], g=_as_real(d["g"], where))


def _bath_from_dict(d: dict, oscillators: tuple[OscillatorSpec, ...], where: str) -> BathSpec:
    allowed = {"oscillator", "label", "gamma_down", "gamma_up", "gamma", "T", "lambda"}
    _require_keys(d, allowed, {"oscillator", "label"}, where)
    if not isinstance(d["oscillator"], int):
        raise ConfigError(f"{where}: oscillator index must be an integer")
    idx = d["oscillator"]
    lam = _as_complex(d.get("lambda", 0.0), where)
    thermal = "gamma" in d or "T" in d
    raw = "gamma_down" in d or "gamma_up" in d
    if thermal and raw:
        raise ConfigError(f"{where}: give either raw rates or the (gamma, T) shorthand")
    if thermal:
        if "gamma" not in d or "T" not in d:
            raise ConfigError(f"{where}: thermal shorthand needs both gamma and T")
        if not (0 <= idx < len(oscillators)):
            raise ConfigError(f"{where}: oscillator index {idx} out of range")
        gd, gu = thermal_rates(_as_real(d["gamma"], where), _as_real(d["T"], where),
                               oscillators[idx].omega)
        return BathSpec(oscillator=idx, gamma_down=gd, gamma_up=gu,
                        label=str(d["label"]), lam=lam, temperature=_as_real(d["T"], where))
    if not raw:
        raise ConfigError(f"{where}: bath needs rates (gamma_down/gamma_up or gamma/T)")
    return BathSpec(oscillator=idx,
                    gamma_down=_as_real(d.get("gamma_down", 0.0), where),
                    gamma_up=_as_real(d.get("gamma_up", 0.0), where),
                    label=str(d["label"]), lam=lam)


def network_from_dict(doc: dict) -> tuple[NetworkSpec, CountingSpec | None]:
    """Build (NetworkSpec, CountingSpec) from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    _require_keys(doc, {"oscillators", "couplings", "baths", "counting"}, {"oscillators"},
                  "config")
    oscs = tuple(_oscillator_from_dict(o, f"oscillators[{k}]")
                 for k, o in enumerate(doc["oscillators"]))
    coups = tuple(_coupling_from_dict(c, f"couplings[{k}]")
                  for k, c in enumerate(doc.get("couplings", [])))
    baths = tuple(_bath_from_dict(b, oscs, f"baths[{k}]")
                  for k, b in enumerate(doc.get("baths", [])))
    counting = None
    if "counting" in doc:
        _require_keys(doc["counting"], {"bath"}, {"bath"}, "counting")
        counting = CountingSpec(bath=str(doc["counting"]["bath"]))
    return NetworkSpec(oscillators=oscs, couplings=coups, baths=baths), counting


def load_config(path) -> tuple[NetworkSpec, CountingSpec | None]:
    """Read a network configuration file (JSON)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return network_from_dict(doc)
