"""Independent cross-check of theta on a truncated Fock space.

The biased master-equation generator is materialized as a sparse
superoperator on the vectorized density matrix of one or two modes, each
truncated at ``n_max`` quanta.  The large-deviation function is then the
real part of the generator's dominant eigenvalue.  Everything here is
built directly from ladder operators and the network description; none of
the phase-space machinery is reused, so agreement between the two routes
validates both.

All operator products are formed from the truncated ladder operators
themselves, which keeps the unbiased generator exactly trace preserving on
the truncated space.  The oracle is a verification tool: it refuses more
than two modes, drives, and dimensions past its caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError, OracleResourceError
from .model import CountingSpec, NetworkSpec, validate
from .errors import InvalidNetworkError

MAX_MODES = 2
MAX_LIOUVILLE_DIM = 70_000
TRUNCATION_CAP = {1: 128, 2: 14}
DENSE_EIG_DIM = 600


def _ladder(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim)), 1, format="csr")


def _mode_operators(n_modes: int, dim: int) -> list[sp.csr_matrix]:
    a = _ladder(dim)
    eye = sp.identity(dim, format="csr")
    if n_modes == 1:
        return [a]
    return [sp.kron(a, eye, format="csr"), sp.kron(eye, a, format="csr")]


def _spre(op) -> sp.csr_matrix:
    return sp.kron(sp.identity(op.shape[0], format="csr"), op, format="csr")


def _spost(op) -> sp.csr_matrix:
    return sp.kron(op.T, sp.identity(op.shape[0], format="csr"), format="csr")


def _sandwich(left, right) -> sp.csr_matrix:
    """Superoperator of rho -> left . rho . right (column stacking)."""
    return sp.kron(right.T, left, format="csr")


@dataclass
class TruncatedGenerator:
    """Sparse biased generator acting on vectorized density matrices."""

    n_max: int
    hilbert_dim: int
    dim: int
    s: float
    generator: sp.csr_matrix

    def trace_defect(self) -> float:
        """Largest entry of the trace functional applied to the generator.

        Zero (to roundoff) at s = 0: the unbiased dynamics preserves the
        trace, so the vectorized identity is a left null vector.
        """
        eye = np.eye(self.hilbert_dim, dtype=complex).reshape(-1, order="F")
        return float(np.max(np.abs(eye @ self.generator)))


def _dims_or_refuse(n_modes: int, n_max: int) -> tuple[int, int]:
    hdim = (n_max + 1) ** n_modes
    ldim = hdim * hdim
    if ldim > MAX_LIOUVILLE_DIM:
        nnz_guess = ldim * (10 + 14 * n_modes)
        mem_mb = nnz_guess * 20 / 1e6
        raise OracleResourceError(
            f"truncation n_max={n_max} for {n_modes} mode(s) needs a "
            f"{ldim}x{ldim} superoperator (approx {mem_mb:.0f} MB); "
            f"cap is {MAX_LIOUVILLE_DIM} rows")
    return hdim, ldim


def build_biased_generator(network: NetworkSpec, counting: CountingSpec,
                           s: float, n_max: int) -> TruncatedGenerator:
    """Assemble the biased Lindblad superoperator on the truncated space.

    The reference bath's jump terms acquire the counting weights
    2*gamma_down*(e^-s - 1) and 2*gamma_up*(e^s - 1) on top of the unbiased
    dissipator; all other channels enter unbiased.
    """
    report = validate(network)
    if not report.ok:
        raise InvalidNetworkError("invalid network:\n" + report.summary(), report)
    if network.n > MAX_MODES:
        raise OracleResourceError(
            f"oracle supports at most {MAX_MODES} modes, got {network.n}")
    if n_max < 2:
        raise ValueError(f"n_max must be at least 2, got {n_max}")
    if network.has_drive():
        raise ConfigError("the Fock-space oracle does not support driven networks")
    try:
        ref = network.bath(counting.bath)
    except KeyError as exc:
        raise InvalidNetworkError(str(exc)) from exc

    hdim, ldim = _dims_or_refuse(network.n, n_max)
    mode_dim = n_max + 1
    ops = _mode_operators(network.n, mode_dim)

    ham = sp.csr_matrix((hdim, hdim), dtype=complex)
    for i, osc in enumerate(network.oscillators):
        a = ops[i]
        ham = ham + osc.omega * (a.getH() @ a)
        if osc.upsilon != 0:
            ham = ham + osc.upsilon * (a @ a) + np.conj(osc.upsilon) * (a.getH() @ a.getH())
    for c in network.couplings:
        ai, aj = ops[c.i], ops[c.j]
        if c.kind == "xx":
            xi = ai + ai.getH()
            xj = aj + aj.getH()
            ham = ham + c.g * (xi @ xj)
        elif c.kind == "rw":
            ham = ham + c.g * (ai @ aj.getH() + ai.getH() @ aj)
        else:  # opo
            ham = ham + c.g * (ai.getH() @ aj.getH() + ai @ aj)

    gen = -1j * (_spre(ham) - _spost(ham))
    for b in network.baths:
        a = ops[b.oscillator]
        ad = a.getH()
        n_op = ad @ a
        anti_n = _spre(n_op) + _spost(n_op)
        n_flip = a @ ad
        anti_flip = _spre(n_flip) + _spost(n_flip)
        gen = gen + b.gamma_down * (2.0 * _sandwich(a, ad) - anti_n)
        gen = gen + b.gamma_up * (2.0 * _sandwich(ad, a) - anti_flip)
        if b.lam != 0:
            sq = a @ a
            sqd = ad @ ad
            gen = gen + np.conj(b.lam) * (2.0 * _sandwich(a, a)
                                          - _spre(sq) - _spost(sq))
            gen = gen + b.lam * (2.0 * _sandwich(ad, ad)
                                 - _spre(sqd) - _spost(sqd))

    a_r = ops[ref.oscillator]
    gen = gen + 2.0 * ref.gamma_down * np.expm1(-s) * _sandwich(a_r, a_r.getH())
    gen = gen + 2.0 * ref.gamma_up * np.expm1(s) * _sandwich(a_r.getH(), a_r)

    return TruncatedGenerator(n_max=n_max, hilbert_dim=hdim, dim=ldim, s=s,
                              generator=gen.tocsr())


def _polish_leading(w: sp.csr_matrix, lam_hat: float, offset: float = 1e-5,
                    iterations: int = 3) -> tuple[float, float]:
    """Refine the dominant eigenvalue by shift-inverted two-sided iteration.

    The generator is strongly nonnormal, so Arnoldi Ritz values can be off
    by orders of magnitude more than their residuals suggest.  Inverse
    iteration with a shift just right of the estimate converges to the
    dominant right AND left eigenvectors (one factorization serves both via
    adjoint solves); the two-sided Rayleigh quotient is then accurate to
    second order in the residuals.  Returns (eigenvalue, residual norm).
    """
    dim = w.shape[0]
    sigma = lam_hat + offset
    shifted = (w - sigma * sp.identity(dim, dtype=complex, format="csr")).tocsc()
    lu = spla.splu(shifted)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    u = v.conj().copy()
    for _ in range(iterations):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
        u = lu.solve(u, trans="H")
        u /= np.linalg.norm(u)
    wv = w @ v
    lam = complex(u.conj() @ wv) / complex(u.conj() @ v)
    resid = float(np.linalg.norm(wv - lam * v))
    return float(lam.real), resid


def leading_theta(gen: TruncatedGenerator, tol: float = 1e-9) -> float:
    """Real part of the generator's eigenvalue with largest real part.

    Small problems go through a dense eigensolve; larger ones locate the
    right edge of the spectrum with Arnoldi iteration and then polish the
    dominant eigenvalue by shift-inverted two-sided iteration, which the
    nonnormality of the generator makes mandatory for tight tolerances.
    """
    w = gen.generator
    if gen.dim <= DENSE_EIG_DIM:
        lam = scipy.linalg.eigvals(w.toarray())
        return float(np.max(lam.real))

    v0 = np.eye(gen.hilbert_dim, dtype=complex).reshape(-1, order="F")
    v0 /= np.linalg.norm(v0)
    lam_hat = None
    last_exc = None
    for ncv in (80, 160):
        if ncv >= gen.dim:
            break
        try:
            lam = spla.eigs(w, k=4, which="LR", ncv=ncv, tol=tol,
                            maxiter=3000, v0=v0, return_eigenvectors=False)
            lam_hat = float(np.max(lam.real))
            break
        except spla.ArpackNoConvergence as exc:
            last_exc = exc
            if len(exc.eigenvalues):
                lam_hat = float(np.max(exc.eigenvalues.real))
                break
    if lam_hat is None:
        raise ConvergenceError(
            f"Arnoldi iteration found no eigenvalue estimate on dim {gen.dim}"
            + (f": {last_exc}" if last_exc else ""), partial=None)

    scale = float(np.max(np.abs(w.diagonal()))) or 1.0
    lam, resid = _polish_leading(w, lam_hat)
    if resid > 1e-8 * scale:
        raise ConvergenceError(
            f"dominant eigenvalue residual {resid:.3e} above 1e-8*{scale:.3e} "
            f"on dim {gen.dim}", partial=lam)
    return lam


def auto_truncate(network: NetworkSpec, counting: CountingSpec, s: float,
                  tol: float = 1e-8, start: int = 8) -> tuple[float, int]:
    """Increase the truncation until successive theta estimates agree.

    Doubles n_max starting from ``start`` (clamped to the per-mode caps:
    128 for one mode, 14 for a pair) and returns (theta, n_max_used) once
    |theta(2n) - theta(n)| < tol.  Hitting the cap without convergence is
    an explicit refusal, with the last estimates in the message.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cap = TRUNCATION_CAP.get(network.n)
    if cap is None:
        raise OracleResourceError(
            f"oracle supports at most {MAX_MODES} modes, got {network.n}")
    n = min(start, cap)
    theta_prev = leading_theta(build_biased_generator(network, counting, s, n))
    while n < cap:
        n_next = min(2 * n, cap)
        theta_next = leading_theta(build_biased_generator(network, counting, s, n_next))
        if abs(theta_next - theta_prev) < tol:
            return theta_next, n_next
        n, theta_prev = n_next, theta_next
    raise OracleResourceError(
        f"truncation cap n_max={cap} reached without convergence at s={s}: "
        f"last estimate {theta_prev:.10e}")
