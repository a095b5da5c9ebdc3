"""Replica-symmetric order-parameter equations for ridge-penalized Cox regression.

In the proportional-hazards model with association vector scaled so risk
scores stay O(1), a Gaussian ridge prior of strength eta, and dimension
ratio zeta = p/N held fixed as both grow, the joint behaviour of the MAP
estimate is captured by seven coupled scalar saddle-point equations in
the order parameters

    u_tilde  fluctuation scale of the estimator around its mean,
    v        overfitting noise width of the inferred associations,
    w        signal-aligned component (w / S_tilde is the bias slope kappa),
    f_tilde, g_tilde   conjugate parameters coupling to the spectrum of A,
    q, rho   amplitude and exponent of the inferred cumulative-hazard
             distortion Lambda(t) = k * Lambda0(t)**rho, with
             q = k * u_tilde^2 * exp(u_tilde^2).

Three of the equations are spectral averages over the eigenvalue
distribution of the covariate correlation matrix; the other four are
double integrals of Lambert-W expressions over a Gaussian and an
exponential measure, evaluated here by fixed-order quadrature.  This
module evaluates the residuals, solves the system by damped Newton with
continuation in zeta (plus a Gauss-Seidel fallback), handles the eta -> 0
and zeta -> inf limit systems, computes the overfitting measure E, and
inverts the theory to find the ridge strength giving unbiased recovery
(kappa = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    CalibrationError,
    InvalidSolutionError,
    ParameterError,
    PhaseBoundaryError,
    SolverError,
)
from .special import EULER_GAMMA, QuadratureRule, gauss_hermite, gauss_laguerre, lambert_w0_from_log
from .spectrum import Spectrum, spectral_moment

DEFAULT_HERMITE_ORDER = 40
DEFAULT_LAGUERRE_ORDER = 80


@dataclass(frozen=True)
class ModelParams:
    """Inputs of the asymptotic theory.

    zeta is the covariate-to-sample ratio p/N, eta the ridge prior
    strength (prior density ~ exp(-p * eta * |beta|^2)), S the true
    association strength (S^2 = ||beta0||^2 / p) and spectrum the
    eigenvalue distribution of the covariate correlation matrix.
    """

    zeta: float
    eta: float
    S: float
    spectrum: Spectrum

    def __post_init__(self):
        if not self.zeta > 0.0:
            raise ParameterError(f"zeta must be positive, got {self.zeta}")
        if not self.S > 0.0:
            raise ParameterError(f"S must be positive, got {self.S}")
        if self.eta < 0.0:
            raise ParameterError(f"eta must be nonnegative, got {self.eta}")
        if self.eta == 0.0 and self.zeta >= 1.0:
            raise PhaseBoundaryError(
                "eta = 0 (maximum likelihood) is only defined for zeta < 1; "
                "the unregularized problem has a phase transition at zeta = 1"
            )

    @property
    def s_tilde(self) -> float:
        """Spectrum-weighted signal strength S * sqrt(<a>)."""
        return self.S * math.sqrt(self.spectrum.mean)


@dataclass(frozen=True)
class OrderParams:
    """A point in order-parameter space (not necessarily a solution).

    Solutions returned by the solvers carry the overfitting measure E,
    the final residual norm and convergence flags; ``asymptotic`` marks
    values filled in from the small-zeta expansion instead of a solve.
    """

    u_tilde: float
    v: float
    w: float
    f_tilde: float
    g_tilde: float
    q: float
    rho: float
    s_tilde: float
    E: float | None = None
    residual_norm: float | None = None
    converged: bool = False
    asymptotic: bool = False

    def __post_init__(self):
        if not (self.u_tilde > 0.0 and self.g_tilde > 0.0 and self.q > 0.0 and self.rho > 0.0):
            raise InvalidSolutionError("u_tilde, g_tilde, q and rho must be positive")
        if self.f_tilde > 0.0:
            raise InvalidSolutionError("f_tilde must be nonpositive")
        if self.v < 0.0:
            raise InvalidSolutionError("v must be nonnegative")

    @property
    def k(self) -> float:
        """Hazard-distortion amplitude, recovered from q."""
        u2 = self.u_tilde**2
        return self.q * math.exp(-u2) / u2

    @property
    def kappa(self) -> float:
        """Bias slope of the inferred-vs-true association cloud."""
        return self.w / self.s_tilde

    @property
    def sigma(self) -> float:
        """Width of the combined Gaussian field in the saddle-point integrals."""
        return math.hypot(self.w - self.rho * self.s_tilde, self.v)


class QuadPair(NamedTuple):
    gaussian: QuadratureRule
    exponential: QuadratureRule


def default_quadrature(hermite_order: int = DEFAULT_HERMITE_ORDER,
                       laguerre_order: int = DEFAULT_LAGUERRE_ORDER) -> QuadPair:
    return QuadPair(gauss_hermite(hermite_order), gauss_laguerre(laguerre_order))


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 200
    hermite_order: int = DEFAULT_HERMITE_ORDER
    laguerre_order: int = DEFAULT_LAGUERRE_ORDER
    min_damping: float = 1e-4
    fd_step: float = 1e-6
    continuation_start: float = 0.05
    continuation_ratio: float = 1.35

    def quadrature(self) -> QuadPair:
        return default_quadrature(self.hermite_order, self.laguerre_order)


def _w_integrals(q, sigma, rho, u2, quad, need_j2=True, need_j3=True):
    """The four double integrals over W(q e^{sigma z} x^rho).

    Returns (J0, J1, J2, J3) with
        J0 = <W>,  J1 = <W/(1+W)>,  J2 = <(W - u2)^2>,  J3 = <W log x>,
    the outer average over the standard normal measure in z and the inner
    over the unit exponential measure in x.
    """
    gauss, expo = quad
    ln_x = np.log(expo.nodes)
    ln_arg = math.log(q) + sigma * gauss.nodes[:, None] + rho * ln_x[None, :]
    W = lambert_w0_from_log(ln_arg)
    wh = gauss.weights
    wl = expo.weights
    J0 = float(wh @ W @ wl)
    J1 = float(wh @ (W / (1.0 + W)) @ wl)
    J2 = float(wh @ ((W - u2) ** 2) @ wl) if need_j2 else 0.0
    J3 = float(wh @ W @ (wl * ln_x)) if need_j3 else 0.0
    return J0, J1, J2, J3


def _residual_vector(u2, v, w, f_tilde, g_tilde, q, rho, mp: ModelParams, quad: QuadPair):
    zeta, eta = mp.zeta, mp.eta
    spec = mp.spectrum
    s_tilde = mp.s_tilde
    a_mean = spec.mean
    sigma = math.hypot(w - rho * s_tilde, v)

    J0, J1, J2, J3 = _w_integrals(q, sigma, rho, u2, quad)
    m11 = spectral_moment(spec, 1, 1, eta, g_tilde)
    m21 = spectral_moment(spec, 2, 1, eta, g_tilde)
    m22 = spectral_moment(spec, 2, 2, eta, g_tilde)
    m32 = spectral_moment(spec, 3, 2, eta, g_tilde)

    return np.array([
        zeta * f_tilde * u2 * u2 + J2,
        zeta * g_tilde * u2 - J1,
        w - g_tilde * rho * mp.S * m21 / math.sqrt(a_mean),
        u2 - m11,
        v * v - w * w * (a_mean * m32 / (m21 * m21) - 1.0) + f_tilde * m22,
        u2 - J0,
        u2 / rho - J3 + zeta * g_tilde * u2 * s_tilde * (w - rho * s_tilde) - u2 * EULER_GAMMA,
    ])


def rs_residuals(op: OrderParams, mp: ModelParams, quad: QuadPair | None = None) -> np.ndarray:
    """Residuals (left minus right side) of the seven saddle-point equations."""
    if quad is None:
        quad = default_quadrature()
    return _residual_vector(
        op.u_tilde**2, op.v, op.w, op.f_tilde, op.g_tilde, op.q, op.rho, mp, quad
    )


def small_zeta_init(mp: ModelParams) -> OrderParams:
    """Leading small-zeta expansion of the solution.

    For zeta -> 0 inference is asymptotically exact: the slope and the
    hazard distortion approach 1 while the noise and fluctuation scales
    vanish like sqrt(zeta), giving
    u2 = v^2 = zeta, w = S<a>^(1/2), g = 1/zeta, f = -1/zeta, rho = 1 and
    q = zeta e^zeta (from k = 1).
    """
    z = mp.zeta
    return OrderParams(
        u_tilde=math.sqrt(z),
        v=math.sqrt(z),
        w=mp.s_tilde,
        f_tilde=-1.0 / z,
        g_tilde=1.0 / z,
        q=z * math.exp(z),
        rho=1.0,
        s_tilde=mp.s_tilde,
        asymptotic=True,
    )


# --- generic damped-Newton machinery on transformed unknowns ---------------


def _fd_jacobian(fn, y, r0, step):
    n = y.size
    J = np.empty((r0.size, n))
    for j in range(n):
        h = step * max(1.0, abs(y[j]))
        yj = y.copy()
        yj[j] += h
        J[:, j] = (fn(yj) - r0) / h
    return J


def _damped_newton(fn: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, opts: SolveOptions):
    """Newton iteration with step halving; returns (y, residual_norm, converged)."""
    y = y0.copy()
    r = fn(y)
    norm = float(np.max(np.abs(r)))
    if not np.isfinite(norm):
        return y, norm, False
    for _ in range(opts.max_iter):
        if norm < opts.tol:
            return y, norm, True
        J = _fd_jacobian(fn, y, r, opts.fd_step)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(J, -r, rcond=None)[0]
        if not np.all(np.isfinite(delta)):
            return y, norm, False
        lam = 1.0
        accepted = False
        while lam >= opts.min_damping:
            y_try = y + lam * delta
            r_try = fn(y_try)
            norm_try = float(np.max(np.abs(r_try)))
            if np.isfinite(norm_try) and norm_try < norm:
                y, r, norm = y_try, r_try, norm_try
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return y, norm, False
    return y, norm, norm < opts.tol


# --- full seven-equation solve ---------------------------------------------


def _y_from_op(op: OrderParams) -> np.ndarray:
    return np.array([
        math.log(op.u_tilde**2),
        op.v,
        op.w,
        math.log(max(-op.f_tilde, 1e-300)),
        math.log(op.g_tilde),
        math.log(op.q),
        math.log(op.rho),
    ])


def _op_from_y(y: np.ndarray, mp: ModelParams, **extra) -> OrderParams:
    return OrderParams(
        u_tilde=math.sqrt(math.exp(y[0])),
        v=abs(y[1]),
        w=y[2],
        f_tilde=-math.exp(y[3]),
        g_tilde=math.exp(y[4]),
        q=math.exp(y[5]),
        rho=math.exp(y[6]),
        s_tilde=mp.s_tilde,
        **extra,
    )


def _full_residual_fn(mp: ModelParams, quad: QuadPair):
    def fn(y):
        # Unknowns are (log u2, v, w, log(-f), log g, log q, log rho) so the
        # sign constraints hold with no clipping.
        u2 = math.exp(y[0])
        return _residual_vector(
            u2, y[1], y[2], -math.exp(y[3]), math.exp(y[4]), math.exp(y[5]), math.exp(y[6]),
            mp, quad,
        )
    return fn


def _solve_q_for_j0(target_u2, sigma, rho, q0, quad, tol=1e-12, max_iter=80):
    """1-d Newton in log q for <W> = u2; dJ0/dlog q = <W/(1+W)> > 0."""
    lq = math.log(q0)
    for _ in range(max_iter):
        J0, J1, _, _ = _w_integrals(math.exp(lq), sigma, rho, target_u2, quad,
                                    need_j2=False, need_j3=False)
        diff = J0 - target_u2
        if abs(diff) < tol * max(1.0, target_u2):
            break
        lq -= diff / max(J1, 1e-300)
    return math.exp(lq)


def _gauss_seidel_sweeps(y, mp: ModelParams, quad: QuadPair, sweeps=40, relax=0.5):
    """Fixed-point fallback cycling the equations in dependency order 4,3,6,2,1,5,7."""
    zeta, eta = mp.zeta, mp.eta
    spec = mp.spectrum
    s_tilde = mp.s_tilde
    a_mean = spec.mean
    u2 = math.exp(y[0])
    v, w = abs(y[1]), y[2]
    f_tilde, g_tilde, q, rho = -math.exp(y[3]), math.exp(y[4]), math.exp(y[5]), math.exp(y[6])
    for _ in range(sweeps):
        u2 = spectral_moment(spec, 1, 1, eta, g_tilde)
        w = g_tilde * rho * mp.S * spectral_moment(spec, 2, 1, eta, g_tilde) / math.sqrt(a_mean)
        sigma = math.hypot(w - rho * s_tilde, v)
        q = _solve_q_for_j0(u2, sigma, rho, q, quad)
        J0, J1, J2, J3 = _w_integrals(q, sigma, rho, u2, quad)
        g_new = J1 / (zeta * u2)
        g_tilde = g_tilde ** (1 - relax) * g_new**relax
        f_tilde = -J2 / (zeta * u2 * u2)
        m21 = spectral_moment(spec, 2, 1, eta, g_tilde)
        m22 = spectral_moment(spec, 2, 2, eta, g_tilde)
        m32 = spectral_moment(spec, 3, 2, eta, g_tilde)
        v2 = w * w * (a_mean * m32 / (m21 * m21) - 1.0) - f_tilde * m22
        v = math.sqrt(max(v2, 1e-300))
        denom = J3 - zeta * g_tilde * u2 * s_tilde * (w - rho * s_tilde) + u2 * EULER_GAMMA
        if denom > 0.0:
            rho_new = u2 / denom
            rho = rho ** (1 - relax) * rho_new**relax
    return np.array([
        math.log(u2), v, w, math.log(max(-f_tilde, 1e-300)),
        math.log(g_tilde), math.log(q), math.log(rho),
    ])


def _newton_with_fallback(fn, y0, mp, quad, opts):
    y, norm, ok = _damped_newton(fn, y0, opts)
    rounds = 0
    while not ok and rounds < 2:
        # Newton stalled: relax toward the fixed point, then retry.
        y = _gauss_seidel_sweeps(y, mp, quad, sweeps=40)
        y, norm, ok = _damped_newton(fn, y, opts)
        rounds += 1
    return y, norm, ok


def _zeta_ladder(start: float, target: float, ratio: float) -> list[float]:
    if target <= start:
        return [target]
    n = max(1, math.ceil(math.log(target / start) / math.log(ratio)))
    return list(np.geomspace(start, target, n + 1))


def rs_solve(mp: ModelParams, init: OrderParams | None = None,
             opts: SolveOptions | None = None) -> OrderParams:
    """Solve the seven saddle-point equations for the given model parameters.

    Without an initial point the solver continues geometrically in zeta
    from the small-zeta expansion; with one it warm-starts directly.
    Raises :class:`SolverError` (carrying the last residual norm) on
    failure to reach the tolerance.
    """
    opts = opts or SolveOptions()
    quad = opts.quadrature()

    if init is not None:
        y0 = _y_from_op(init)
        fn = _full_residual_fn(mp, quad)
        y, norm, ok = _newton_with_fallback(fn, y0, mp, quad, opts)
        if not ok:
            raise SolverError(
                f"saddle-point solve failed at zeta={mp.zeta}, eta={mp.eta} "
                f"(residual {norm:.3e})", residual_norm=norm)
        return _finalize(y, mp, norm)

    if mp.zeta <= opts.continuation_start:
        fn = _full_residual_fn(mp, quad)
        y0 = _y_from_op(small_zeta_init(mp))
        y, norm, ok = _newton_with_fallback(fn, y0, mp, quad, opts)
        if ok:
            return _finalize(y, mp, norm)
        # Deep in the asymptotic regime the expansion itself is the best
        # available description; report it flagged as such.
        asym = small_zeta_init(mp)
        return replace(asym, residual_norm=norm, converged=False, asymptotic=True)

    ladder = _zeta_ladder(opts.continuation_start, mp.zeta, opts.continuation_ratio)
    mp_step = replace(mp, zeta=ladder[0])
    y = _y_from_op(small_zeta_init(mp_step))
    fn = _full_residual_fn(mp_step, quad)
    y, norm, ok = _newton_with_fallback(fn, y, mp_step, quad, opts)
    if not ok:
        raise SolverError(
            f"continuation failed at starting zeta={ladder[0]} (residual {norm:.3e})",
            residual_norm=norm)
    pending = ladder[1:]
    while pending:
        z = pending[0]
        mp_try = replace(mp, zeta=z)
        fn = _full_residual_fn(mp_try, quad)
        y_new, norm, ok = _newton_with_fallback(fn, y, mp_try, quad, opts)
        if ok:
            y = y_new
            mp_step = mp_try
            pending.pop(0)
            continue
        # Halve the continuation step; give up below a minimal increment.
        z_mid = math.sqrt(mp_step.zeta * z)
        if z_mid / mp_step.zeta < 1.0005:
            raise SolverError(
                f"continuation stalled near zeta={z} (residual {norm:.3e})",
                residual_norm=norm)
        pending.insert(0, z_mid)
    return _finalize(y, mp, norm)


def _finalize(y: np.ndarray, mp: ModelParams, norm: float) -> OrderParams:
    op = _op_from_y(y, mp, residual_norm=norm, converged=True)
    return replace(op, E=overfit_measure(op, mp))


class SweepPoint(NamedTuple):
    zeta: float
    params: OrderParams
    error: str | None


def rs_sweep(mp_template: ModelParams, zeta_grid: Sequence[float],
             opts: SolveOptions | None = None, chain: bool = True) -> list[SweepPoint]:
    """Solve along an increasing zeta grid, warm-starting each point.

    With ``chain=False`` each point is solved independently (safe to
    parallelize externally, at the cost of re-running continuation).
    Failed points are recorded and the sweep continues.
    """
    grid = [float(z) for z in zeta_grid]
    if any(z <= 0.0 for z in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("zeta grid must be positive and strictly increasing")
    opts = opts or SolveOptions()
    out: list[SweepPoint] = []
    warm: OrderParams | None = None
    for z in grid:
        mp = replace(mp_template, zeta=z)
        try:
            op = rs_solve(mp, init=warm if chain else None, opts=opts)
            out.append(SweepPoint(z, op, None))
            if chain:
                warm = op
        except (SolverError, ParameterError) as exc:
            out.append(SweepPoint(z, small_zeta_init(mp), str(exc)))
            # keep the previous warm start for the next grid point
    return out


# --- limit regimes ----------------------------------------------------------


def ml_limit_solve(zeta: float, S: float, spectrum: Spectrum,
                   opts: SolveOptions | None = None) -> OrderParams:
    """Solve the eta -> 0 (maximum likelihood) limit system for zeta < 1.

    At eta = 0 three equations collapse analytically: w = rho*S*<a>^(1/2),
    g = 1/u2 and f = -v^2/u2^2, leaving four equations in (v, rho, u2, q).
    """
    if not 0.0 < zeta < 1.0:
        raise PhaseBoundaryError(
            f"the maximum-likelihood limit requires 0 < zeta < 1 (got {zeta}); "
            "v and w diverge at the zeta = 1 phase transition")
    if S <= 0.0:
        raise ParameterError("S must be positive")
    opts = opts or SolveOptions()
    quad = opts.quadrature()
    s_tilde = S * math.sqrt(spectrum.mean)

    def residual_fn(zeta_step):
        def fn(y):
            u2 = math.exp(y[0])
            v = y[1]
            q = math.exp(y[2])
            rho = math.exp(y[3])
            J0, J1, J2, J3 = _w_integrals(q, abs(v), rho, u2, quad)
            return np.array([
                zeta_step * v * v - J2,
                zeta_step - J1,
                u2 - J0,
                u2 / rho - J3 - u2 * EULER_GAMMA,
            ])
        return fn

    def init_y(z):
        return np.array([math.log(z), math.sqrt(z), math.log(z * math.exp(z)), 0.0])

    start = min(opts.continuation_start, zeta)
    ladder = _zeta_ladder(start, zeta, opts.continuation_ratio)
    y = init_y(ladder[0])
    norm = math.inf
    for z in ladder:
        y, norm, ok = _damped_newton(residual_fn(z), y, opts)
        if not ok:
            raise SolverError(
                f"ML-limit continuation failed at zeta={z} (residual {norm:.3e})",
                residual_norm=norm)
    u2 = math.exp(y[0])
    v = abs(y[1])
    q = math.exp(y[2])
    rho = math.exp(y[3])
    op = OrderParams(
        u_tilde=math.sqrt(u2), v=v, w=rho * s_tilde,
        f_tilde=-v * v / (u2 * u2), g_tilde=1.0 / u2, q=q, rho=rho,
        s_tilde=s_tilde, residual_norm=norm, converged=True,
    )
    mp = ModelParams(zeta=zeta, eta=0.0, S=S, spectrum=spectrum)
    return replace(op, E=overfit_measure(op, mp))


class LargeZetaSolution(NamedTuple):
    Q: float
    q: float
    rho: float


def large_zeta_solve(eta: float, S: float, spectrum: Spectrum,
                     opts: SolveOptions | None = None) -> LargeZetaSolution:
    """Fixed point of the zeta -> inf limit system.

    As zeta grows with eta > 0 the inferred associations vanish
    (v, w -> 0), u2 -> <a>/(2 eta), and the surviving unknowns are
    Q = lim zeta * g * u2 together with (q, rho), solved from three
    coupled equations with sigma = rho * S * <a>^(1/2).
    """
    if eta <= 0.0:
        raise ParameterError("the large-zeta limit requires eta > 0")
    if S <= 0.0:
        raise ParameterError("S must be positive")
    opts = opts or SolveOptions()
    quad = opts.quadrature()
    a_mean = spectrum.mean
    u2 = a_mean / (2.0 * eta)
    s2a = S * S * a_mean

    def fn(y):
        Q = math.exp(y[0])
        q = math.exp(y[1])
        rho = math.exp(y[2])
        sigma = rho * S * math.sqrt(a_mean)
        J0, J1, _, J3 = _w_integrals(q, sigma, rho, u2, quad, need_j2=False)
        return np.array([
            Q - J1,
            u2 - J0,
            u2 / rho - J3 - Q * s2a * rho - u2 * EULER_GAMMA,
        ])

    last_norm = math.inf
    for rho0 in (1.0, 0.5, 0.25, 2.0):
        sigma0 = rho0 * S * math.sqrt(a_mean)
        q0 = _solve_q_for_j0(u2, sigma0, rho0, max(u2, 1e-3), quad)
        _, J1, _, _ = _w_integrals(q0, sigma0, rho0, u2, quad, need_j2=False, need_j3=False)
        y0 = np.array([math.log(max(J1, 1e-12)), math.log(q0), math.log(rho0)])
        y, norm, ok = _damped_newton(fn, y0, opts)
        last_norm = min(last_norm, norm)
        if ok:
            return LargeZetaSolution(math.exp(y[0]), math.exp(y[1]), math.exp(y[2]))
    raise SolverError(
        f"large-zeta fixed point did not converge (best residual {last_norm:.3e})",
        residual_norm=last_norm)


# --- overfitting measure and calibration ------------------------------------


def overfit_measure(op: OrderParams, mp: ModelParams) -> float:
    """Overfitting measure E: 0 for perfect recovery, negative when overfitted.

    E is the penalized KL-divergence gap between the inferred and the true
    model; within the hazard-distortion ansatz it reduces to spectral
    averages plus the distortion parameters (k, rho).
    """
    k = op.k
    if k <= 0.0 or op.rho <= 0.0:
        raise InvalidSolutionError("overfit measure needs positive k and rho")
    eta, zeta = mp.eta, mp.zeta
    spec = mp.spectrum
    m21 = spectral_moment(spec, 2, 1, eta, op.g_tilde)
    m22 = spectral_moment(spec, 2, 2, eta, op.g_tilde)
    m12 = spectral_moment(spec, 1, 2, eta, op.g_tilde)
    bracket = op.w**2 * spec.mean * m22 / (m21 * m21) - op.f_tilde * m12
    return (
        eta * zeta * bracket
        - math.log(k)
        - math.log(op.rho)
        + (op.rho - 1.0) * EULER_GAMMA
        - zeta * eta * mp.S**2
    )


@dataclass(frozen=True)
class CalibrationResult:
    zeta: float
    eta_star: float
    lam: float  # equivalent external-package penalty, lam = 2 * eta * zeta
    kappa: float
    params: OrderParams


def calibrate_eta(zeta: float, S: float, spectrum: Spectrum, tol: float = 1e-6,
                  opts: SolveOptions | None = None, eta0: float = 0.1) -> CalibrationResult:
    """Find the ridge strength eta* giving unbiased recovery (kappa = 1).

    Secant/bisection search in log(eta) with warm-started inner solves.
    Below zeta = 0.05 the saddle-point system is not solved numerically,
    so calibration is refused there.
    """
    if zeta < 0.05:
        raise ParameterError("calibration supported for zeta >= 0.05")
    if tol <= 0.0:
        raise ParameterError("tol must be positive")
    opts = opts or SolveOptions()

    cache: dict[float, OrderParams] = {}

    def solve_at(eta: float, warm: OrderParams | None) -> OrderParams:
        mp = ModelParams(zeta=zeta, eta=eta, S=S, spectrum=spectrum)
        if warm is not None:
            try:
                op = rs_solve(mp, init=warm, opts=opts)
            except SolverError:
                op = rs_solve(mp, opts=opts)
        else:
            op = rs_solve(mp, opts=opts)
        cache[eta] = op
        return op

    def excess(eta: float, warm: OrderParams | None) -> float:
        return solve_at(eta, warm).kappa - 1.0

    # Bracket the root of kappa(eta) - 1, expanding geometrically.
    lo = hi = eta0
    f0 = excess(eta0, None)
    if f0 > 0.0:
        f_lo, f_hi = f0, f0
        for _ in range(60):
            lo, hi = hi, hi * 2.0
            f_lo = f_hi
            f_hi = excess(hi, cache[lo])
            if f_hi <= 0.0:
                break
        else:
            raise CalibrationError(
                f"could not bracket kappa=1 above eta={eta0} (kappa-1 stayed {f_hi:+.3e})")
    else:
        f_lo, f_hi = f0, f0
        for _ in range(60):
            hi, lo = lo, lo / 2.0
            f_hi = f_lo
            f_lo = excess(lo, cache[hi])
            if f_lo >= 0.0:
                break
        else:
            raise CalibrationError(
                f"could not bracket kappa=1 below eta={eta0} (kappa-1 stayed {f_lo:+.3e})")

    # Regula falsi in log eta, with bisection safeguarding.
    x_lo, x_hi = math.log(lo), math.log(hi)
    warm = cache[lo]
    for _ in range(100):
        if abs(f_lo) < tol:
            eta_star = math.exp(x_lo)
            break
        if abs(f_hi) < tol:
            eta_star = math.exp(x_hi)
            break
        x_new = x_hi - f_hi * (x_hi - x_lo) / (f_hi - f_lo)
        if not (x_lo < x_new < x_hi):
            x_new = 0.5 * (x_lo + x_hi)
        f_new = excess(math.exp(x_new), warm)
        warm = cache[math.exp(x_new)]
        if abs(f_new) < tol:
            eta_star = math.exp(x_new)
            break
        if f_new > 0.0:
            x_lo, f_lo = x_new, f_new
        else:
            x_hi, f_hi = x_new, f_new
    else:
        raise CalibrationError(
            f"calibration did not reach |kappa-1| < {tol} "
            f"(bracket kappa-1 in [{f_hi:+.3e}, {f_lo:+.3e}])")

    op = cache[eta_star]
    return CalibrationResult(zeta=zeta, eta_star=eta_star, lam=2.0 * eta_star * zeta,
                             kappa=op.kappa, params=op)


# --- serialization and conventions ------------------------------------------

ORDER_PARAMS_CSV_HEADER = (
    "zeta,eta,S,spectrum,u_tilde,v,w,f_tilde,g_tilde,q,rho,k,kappa,sigma,E,"
    "residual_norm,converged"
)


def order_params_csv_row(op: OrderParams, mp: ModelParams) -> str:
    fields = [
        repr(mp.zeta), repr(mp.eta), repr(mp.S), mp.spectrum.label,
        repr(op.u_tilde), repr(op.v), repr(op.w), repr(op.f_tilde),
        repr(op.g_tilde), repr(op.q), repr(op.rho), repr(op.k),
        repr(op.kappa), repr(op.sigma),
        repr(op.E) if op.E is not None else "",
        repr(op.residual_norm) if op.residual_norm is not None else "",
        "true" if op.converged else "false",
    ]
    return ",".join(fields)


#: Reference (zeta, eta, lambda) calibration triples pinning the conversion
#: between the prior strength used here and the external-package ridge
#: penalty, lambda = 2 * eta * zeta.
PENALTY_CONVERSION_REFERENCE = (
    (0.110, 0.165, 0.036),
    (0.552, 0.100, 0.110),
    (1.055, 0.062, 0.131),
    (2.001, 0.031, 0.124),
)


def verify_penalty_convention(tol: float = 6e-4) -> None:
    """Assert lambda = 2*eta*zeta against the reference calibration rows.

    The reference lambdas are quoted to three decimals, so the check
    allows half-ulp-of-print rounding.
    """
    for zeta, eta, lam in PENALTY_CONVERSION_REFERENCE:
        got = 2.0 * eta * zeta
        if abs(got - lam) > tol:
            raise AssertionError(
                f"penalty conversion mismatch at zeta={zeta}: 2*eta*zeta={got:.6f} vs {lam}")


verify_penalty_convention()
