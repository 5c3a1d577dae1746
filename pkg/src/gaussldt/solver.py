"""Stationary and transient solvers for the biased covariance and mean.

The biased covariance obeys a matrix Riccati flow

    dSigma/dt = M.Sigma + Sigma.M^T + Sigma.F+.Sigma + F+ - 2D,
    M = A - F-,

whose stationary point is an algebraic Riccati equation.  The physically
meaningful root is the stabilizing branch: the one that makes the
closed-loop matrix A - F- + F+.Sigma Hurwitz and deforms continuously into
the unbiased (Lyapunov) solution.  The primary method extracts that branch
from the stable invariant subspace of the 4N x 4N block matrix

    H = [[M^T,      F+],
         [2D - F+,  -M ]]

via an ordered real Schur factorization; the fallback is a Newton iteration
(one Lyapunov solve per step) seeded by continuation from a nearby bias
value.  Loss of the spectral dichotomy of H (eigenvalues pinching the
imaginary axis) marks a branch point of the large-deviation function and is
reported as DomainBoundaryError, never silently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainBoundaryError, NoStationaryStateError
from .phasespace import BiasMatrices, PhaseSpaceSystem, stability_margin

# Residual acceptance: |lhs|_max < RESIDUAL_RTOL * max(1, |D|_max).
RESIDUAL_RTOL = 1e-10
# Symmetry defect tolerated on accepted covariances.
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BiasedCovariance:
    """Stationary biased covariance plus its stabilizing certificate."""

    sigma: np.ndarray
    closed_loop_margin: float
    s: float

    @property
    def block_trace(self) -> np.ndarray:
        """Per-oscillator x/y variance sums (trace of each diagonal block)."""
        d = np.diag(self.sigma)
        return d[0::2] + d[1::2]


def riccati_residual(a, d, f_plus, f_minus, sigma) -> np.ndarray:
    """Left-hand side of the stationary equation at a candidate solution."""
    m = a - f_minus
    return m @ sigma + sigma @ m.T + sigma @ f_plus @ sigma + f_plus - 2.0 * d


def closed_loop_matrix(a, f_plus, f_minus, sigma) -> np.ndarray:
    """Matrix governing the biased first moment: A - F- + F+.Sigma."""
    return a - f_minus + f_plus @ sigma


def solve_lyapunov(a: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Unique symmetric solution of A.Sigma + Sigma.A^T = 2D for Hurwitz A."""
    margin = stability_margin(a)
    if margin >= 0:
        raise NoStationaryStateError(
            f"drift matrix is not Hurwitz (margin {margin:.3e}); no stationary state")
    sigma = scipy.linalg.solve_continuous_lyapunov(a, 2.0 * d)
    sigma = 0.5 * (sigma + sigma.T)
    res = np.max(np.abs(a @ sigma + sigma @ a.T - 2.0 * d))
    tol = RESIDUAL_RTOL * max(1.0, np.max(np.abs(d)))
    if res > tol:
        raise NoStationaryStateError(
            f"Lyapunov residual {res:.3e} exceeds {tol:.3e}; drift nearly singular")
    return sigma


def _schur_stable_subspace(h: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis [U1; U2] of the n-dimensional stable invariant subspace of h."""
    try:
        t, z, sdim = scipy.linalg.schur(h, output="real", sort=lambda re, im: re < 0)
    except scipy.linalg.LinAlgError as exc:
        raise DomainBoundaryError(f"Schur reordering failed: {exc}") from exc
    if sdim != n:
        raise DomainBoundaryError(
            f"spectral dichotomy failed: {sdim} stable eigenvalues, expected {n}")
    u = z[:, :n]
    return u[:n, :], u[n:, :]


def _riccati_schur(m, f_plus, c) -> np.ndarray:
    """Stabilizing root via the stable invariant subspace of the block matrix."""
    n = m.shape[0]
    h = np.block([[m.T, f_plus], [-c, -m]])
    u1, u2 = _schur_stable_subspace(h, n)
    try:
        sigma = scipy.linalg.solve(u1.T, u2.T).T
    except scipy.linalg.LinAlgError as exc:
        raise DomainBoundaryError(f"stable subspace is not a graph: {exc}") from exc
    return 0.5 * (sigma + sigma.T)


def _riccati_newton(m, f_plus, c, seed, max_iter=60, tol=None) -> np.ndarray:
    """Kleinman iteration: one Lyapunov solve per step, quadratic near root."""
    if tol is None:
        tol = RESIDUAL_RTOL * max(1.0, 0.5 * np.max(np.abs(c - f_plus)))
    sigma = 0.5 * (seed + seed.T)
    for _ in range(max_iter):
        closed = m + sigma @ f_plus
        if np.max(scipy.linalg.eigvals(closed).real) >= 0:
            raise DomainBoundaryError("Newton iterate lost the stabilizing property")
        rhs = -c + sigma @ f_plus @ sigma
        try:
            with warnings.catch_warnings():
                # right at a branch point the closed loop is near singular;
                # the residual/certificate gates decide, not the warning
                warnings.filterwarnings(
                    "ignore", message="Input \"a\" has an eigenvalue pair")
                sigma_next = scipy.linalg.solve_continuous_lyapunov(closed, rhs)
        except scipy.linalg.LinAlgError as exc:
            raise DomainBoundaryError(f"Lyapunov step failed: {exc}") from exc
        sigma_next = 0.5 * (sigma_next + sigma_next.T)
        step = np.max(np.abs(sigma_next - sigma))
        sigma = sigma_next
        res = np.max(np.abs(m @ sigma + sigma @ m.T + sigma @ f_plus @ sigma + c))
        if res < tol and step < math.sqrt(tol):
            return sigma
    raise ConvergenceError(f"Newton iteration stalled above tolerance {tol:.3e}",
                           partial=sigma)


def solve_riccati_stationary(a, d, f_plus, f_minus, *, s=float("nan"),
                             seed=None, method="auto") -> BiasedCovariance:
    """Stabilizing stationary solution of the biased covariance equation.

    ``seed`` is an optional starting covariance for the Newton fallback,
    normally the solution at a nearby bias value (continuation).  ``method``
    can force "schur" or "newton"; "auto" tries Schur first and falls back
    to Newton when a seed is available.

    Raises DomainBoundaryError when no stabilizing solution exists, which
    marks a branch point of the large-deviation function.
    """
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    f_plus = np.asarray(f_plus, dtype=float)
    f_minus = np.asarray(f_minus, dtype=float)
    m = a - f_minus
    c = f_plus - 2.0 * d

    if method not in ("auto", "schur", "newton"):
        raise ValueError(f"unknown method {method!r}")
    if method == "newton" and seed is None:
        raise ValueError("newton method needs a seed covariance")

    res_tol = RESIDUAL_RTOL * max(1.0, np.max(np.abs(d)))
    sigma = None
    schur_error = None
    if method in ("auto", "schur"):
        try:
            sigma = _riccati_schur(m, f_plus, c)
            res = np.max(np.abs(m @ sigma + sigma @ m.T + sigma @ f_plus @ sigma + c))
            if res > res_tol:
                # near a branch point the subspace extraction loses digits;
                # a short Newton polish restores them or fails honestly
                sigma = _riccati_newton(m, f_plus, c, sigma, max_iter=8)
        except (DomainBoundaryError, ConvergenceError) as exc:
            if method == "schur":
                raise DomainBoundaryError(str(exc)) from exc
            schur_error = exc
            sigma = None
    if sigma is None and method in ("auto", "newton") and seed is not None:
        try:
            sigma = _riccati_newton(m, f_plus, c, seed)
        except ConvergenceError as exc:
            raise DomainBoundaryError(str(exc)) from exc
    if sigma is None:
        if schur_error is not None:
            raise DomainBoundaryError(str(schur_error)) from schur_error
        raise DomainBoundaryError("no stabilizing solution found")

    return _certify(a, d, f_plus, f_minus, sigma, s)


def _certify(a, d, f_plus, f_minus, sigma, s) -> BiasedCovariance:
    """Accept a candidate only with small residual and a Hurwitz closed loop."""
    sym_defect = np.max(np.abs(sigma - sigma.T))
    if sym_defect > SYMMETRY_TOL:
        raise DomainBoundaryError(f"covariance symmetry defect {sym_defect:.3e}")
    res = np.max(np.abs(riccati_residual(a, d, f_plus, f_minus, sigma)))
    tol = RESIDUAL_RTOL * max(1.0, np.max(np.abs(d)))
    if res > tol:
        raise DomainBoundaryError(
            f"stationary residual {res:.3e} exceeds {tol:.3e}")
    margin = float(np.max(scipy.linalg.eigvals(
        closed_loop_matrix(a, f_plus, f_minus, sigma)).real))
    if margin >= 0:
        raise DomainBoundaryError(
            f"stabilizing certificate violated: closed-loop margin {margin:.3e}")
    return BiasedCovariance(sigma=sigma, closed_loop_margin=margin, s=s)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a covariance; physical states have nu >= 1."""
    n = sigma.shape[0] // 2
    omega = np.zeros_like(sigma)
    for i in range(n):
        omega[2 * i, 2 * i + 1] = 1.0
        omega[2 * i + 1, 2 * i] = -1.0
    lam = scipy.linalg.eigvals(omega @ sigma)
    nu = np.sort(np.abs(lam.imag))
    return nu[1::2]


# ---------------------------------------------------------------------------
# Transient flows
# ---------------------------------------------------------------------------

@dataclass
class CovariancePath:
    """Sampled covariance flow; ``diverged`` marks a norm overflow."""

    times: np.ndarray
    sigmas: np.ndarray
    diverged: bool

    @property
    def final(self) -> np.ndarray:
        return self.sigmas[-1]


def integrate_covariance(system: PhaseSpaceSystem, bias: BiasMatrices,
                         sigma0: np.ndarray, t_max: float, dt: float,
                         max_samples: int = 512,
                         overflow: float = 1e12) -> CovariancePath:
    """Fixed-step RK4 integration of the covariance flow.

    The flow preserves symmetry exactly; the numerical iterate is
    re-projected onto symmetric matrices after every step to keep roundoff
    from accumulating.  Norm overflow stops the integration and flags
    divergence instead of raising.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = system.drift - bias.f_minus
    f_plus = bias.f_plus
    c = f_plus - 2.0 * system.noise

    def rhs(sig):
        return m @ sig + sig @ m.T + sig @ f_plus @ sig + c

    steps = max(1, int(math.ceil(t_max / dt)))
    stride = max(1, steps // max_samples)
    sigma = 0.5 * (sigma0 + sigma0.T)
    times = [0.0]
    samples = [sigma.copy()]
    diverged = False
    t = 0.0
    for k in range(steps):
        h = min(dt, t_max - t)
        k1 = rhs(sigma)
        k2 = rhs(sigma + 0.5 * h * k1)
        k3 = rhs(sigma + 0.5 * h * k2)
        k4 = rhs(sigma + h * k3)
        sigma = sigma + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        sigma = 0.5 * (sigma + sigma.T)
        t += h
        if not np.all(np.isfinite(sigma)) or np.max(np.abs(sigma)) > overflow:
            diverged = True
            times.append(t)
            samples.append(sigma.copy())
            break
        if (k + 1) % stride == 0 or k == steps - 1:
            times.append(t)
            samples.append(sigma.copy())
    return CovariancePath(times=np.array(times), sigmas=np.array(samples),
                          diverged=diverged)


@dataclass
class FirstMomentPath:
    """First-moment trajectory and the time average entering theta.

    ``time_average_quadratic`` is the running mean of x^T.F+.x on the
    sampled grid; ``quadratic_average`` is half the converged trailing
    window mean, i.e. the drive contribution to the large-deviation
    function.  For a purely constant drive the exact fixed point and its
    closed-form average are attached as well.
    """

    times: np.ndarray
    x: np.ndarray
    time_average_quadratic: np.ndarray
    quadratic_average: float
    converged: bool
    windows_used: int
    fixed_point: np.ndarray | None = None
    closed_form_average: float | None = None


def _augmented_generator(loop: np.ndarray, drive) -> tuple[np.ndarray, np.ndarray]:
    """Autonomous extension of dx/dt = loop.x + d(t) for exact stepping."""
    n2 = loop.shape[0]
    extra = 1 + 2 * len(drive.harmonics)
    g = np.zeros((n2 + extra, n2 + extra))
    y0 = np.zeros(n2 + extra)
    g[:n2, :n2] = loop
    g[:n2, n2] = drive.constant
    y0[n2] = 1.0
    col = n2 + 1
    for h in drive.harmonics:
        g[:n2, col] = h.dc
        g[:n2, col + 1] = h.ds
        g[col, col + 1] = -h.frequency
        g[col + 1, col] = h.frequency
        y0[col] = 1.0
        col += 2
    return g, y0


def integrate_first_moment(system: PhaseSpaceSystem, bias: BiasMatrices,
                           sigma_tilde: np.ndarray, x0: np.ndarray | None = None,
                           horizon: float | None = None, window: float | None = None,
                           steps_per_window: int = 256,
                           rel_tol: float = 1e-8,
                           max_samples: int = 2048) -> FirstMomentPath:
    """Integrate the biased first moment and average its bias quadratic.

    The closed-loop matrix uses the stationary biased covariance, so the
    system is linear with a constant-plus-sinusoidal inhomogeneity and is
    propagated exactly through the exponential of an augmented generator.
    Window means of x^T.F+.x are formed with the trapezoid rule over one
    window per iteration (one drive period when a sinusoidal component is
    present); successive windows must agree to ``rel_tol`` relative.
    """
    loop = closed_loop_matrix(system.drift, bias.f_plus, bias.f_minus, sigma_tilde)
    margin = float(np.max(scipy.linalg.eigvals(loop).real))
    if margin >= 0:
        raise NoStationaryStateError(
            f"biased first-moment matrix unstable (margin {margin:.3e})")
    drive = system.drive
    n2 = system.dim
    f_plus = bias.f_plus

    periods = [2.0 * math.pi / h.frequency for h in drive.harmonics if h.frequency > 0]
    if window is None:
        window = max(periods) if periods else 1.0 / abs(margin)
    if horizon is None:
        horizon = (50.0 * max(periods)) if periods else 20.0 / abs(margin)
        horizon = max(horizon, 4.0 * window)

    fixed_point = None
    closed_form = None
    if not drive.harmonics:
        fixed_point = -scipy.linalg.solve(loop, drive.constant)
        closed_form = 0.5 * float(fixed_point @ f_plus @ fixed_point)

    x = np.zeros(n2) if x0 is None else np.asarray(x0, dtype=float).copy()
    if drive.is_zero and not np.any(x):
        # nothing drives the mean: it stays at the origin
        return FirstMomentPath(times=np.zeros(1), x=np.zeros((1, n2)),
                               time_average_quadratic=np.zeros(1),
                               quadratic_average=0.0, converged=True, windows_used=0,
                               fixed_point=fixed_point, closed_form_average=closed_form)

    g, y_template = _augmented_generator(loop, drive)
    h_step = window / steps_per_window
    step = scipy.linalg.expm(g * h_step)

    y = y_template.copy()
    y[:n2] = x
    quad = float(x @ f_plus @ x)

    max_windows = max(1, int(math.ceil(horizon / window)))
    total_steps = max_windows * steps_per_window
    stride = max(1, total_steps // max_samples)

    times = [0.0]
    xs = [x.copy()]
    running = [quad]
    integral = 0.0
    t = 0.0
    prev_mean = None
    converged = False
    windows = 0
    mean = 0.0
    biased = np.max(np.abs(f_plus)) > 0.0

    if not biased:
        # F+ = 0 kills the quadratic identically; still expose the path
        prev_mean = 0.0

    k_global = 0
    for w in range(max_windows):
        window_integral = 0.0
        for k in range(steps_per_window):
            quad_prev = quad
            y = step @ y
            x = y[:n2]
            quad = float(x @ f_plus @ x)
            window_integral += 0.5 * h_step * (quad_prev + quad)
            t += h_step
            k_global += 1
            if k_global % stride == 0:
                integral_here = integral + window_integral
                times.append(t)
                xs.append(x.copy())
                running.append(integral_here / t)
        integral += window_integral
        windows = w + 1
        mean = window_integral / window
        if not biased:
            mean = 0.0
            converged = True
            break
        if prev_mean is not None:
            scale = max(abs(mean), abs(prev_mean), 1e-300)
            if abs(mean - prev_mean) <= rel_tol * scale:
                converged = True
                break
        prev_mean = mean

    path = FirstMomentPath(times=np.array(times), x=np.array(xs),
                           time_average_quadratic=np.array(running),
                           quadratic_average=0.5 * mean, converged=converged,
                           windows_used=windows, fixed_point=fixed_point,
                           closed_form_average=closed_form)
    if not converged:
        raise ConvergenceError(
            f"window average not settled after {windows} windows "
            f"(last mean {0.5 * mean:.6e})", partial=path)
    return path
