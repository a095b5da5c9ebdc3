"""Special functions and fixed-order quadrature rules.

Every integral in the saddle-point equations is an expectation under one
of two measures:

    Dz = (2*pi)**(-1/2) * exp(-z**2/2) dz        (standard normal, on R)
    e**(-x) dx                                   (unit exponential, on (0, inf))

the latter arising from the substitution s = exp(-x) that maps
``int_0^1 ds f(log(1/s))`` onto ``int_0^inf e^(-x) f(x) dx``.

The normal-measure rule is classical Gauss-Hermite, generated at startup
from the symmetric Jacobi matrix of the orthonormal probabilists' Hermite
polynomials: eigenvalues seed the nodes, a few Newton sweeps on the
three-term recurrence polish them to machine precision, and weights come
from the Christoffel function.  The exponential-measure rule uses
double-exponential (tanh-sinh) node grading in the variable s = e^{-x}:
the saddle-point integrands carry fractional-power and logarithmic
endpoint behaviour in x, for which Gaussian node placement converges only
algebraically while the graded rule reaches double precision by n ~ 50.
No tables are embedded, so any order up to the cap is available.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, ParameterError

MAX_QUADRATURE_ORDER = 256

#: Euler's constant, double precision.
EULER_GAMMA = 0.57721566490153286


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for one of the two integration measures.

    ``kind`` is ``"gaussian-measure"`` (standard normal) or
    ``"exponential-measure"`` (unit exponential on the positive axis).
    Both measures are normalized, so weights sum to one.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.kind not in ("gaussian-measure", "exponential-measure"):
            raise ParameterError(f"unknown quadrature kind: {self.kind!r}")
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ParameterError("nodes and weights must be 1-d arrays of equal length")
        if not np.all(weights > 0.0):
            raise ParameterError("quadrature weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ParameterError("quadrature weights must sum to 1 within 1e-12")
        if not np.all(np.diff(nodes) > 0.0):
            raise ParameterError("quadrature nodes must be strictly increasing")

    @property
    def order(self) -> int:
        return self.nodes.size

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of ``values`` sampled at the nodes."""
        return float(np.dot(self.weights, values))


def lambert_w0(x):
    """Principal branch of Lambert's W on nonnegative arguments.

    Solves ``w * exp(w) = x`` for ``w >= 0``.  Accepts scalars or arrays;
    relative accuracy is ~1e-15.  Negative input raises :class:`DomainError`.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("lambert_w0 requires x >= 0")
    with np.errstate(divide="ignore"):
        out = lambert_w0_from_log(np.log(arr))
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def lambert_w0_from_log(log_x):
    """``W(exp(log_x))`` without forming ``exp(log_x)``.

    The saddle-point integrands need W at arguments like
    ``q * exp(sigma*z) * x**rho`` whose logarithm is cheap and safe while
    the argument itself can overflow; this entry point takes the logarithm
    directly.  ``log_x = -inf`` maps to 0.
    """
    L = np.asarray(log_x, dtype=float)
    scalar = L.ndim == 0
    L = np.atleast_1d(L)
    w = np.empty_like(L)

    # For tiny arguments W(x) = x to machine precision.
    small = L < -36.8
    w[small] = np.exp(L[small])

    big = ~small
    if np.any(big):
        Lb = L[big]
        # Initial guess: leading asymptote for large arguments, softplus
        # (which matches W(e^L) ~ e^L as L -> -inf) otherwise.
        wb = np.where(Lb > 1.0, Lb - np.log(np.maximum(Lb, 1.0)), np.logaddexp(0.0, Lb))
        # Halley iteration on f(w) = w + log(w) - L, the log form of
        # w*e^w = e^L; converges cubically and never overflows.
        for _ in range(50):
            f = wb + np.log(wb) - Lb
            fp = (wb + 1.0) / wb
            step = 2.0 * f * fp / (2.0 * fp * fp + f / (wb * wb))
            wb = np.maximum(wb - step, 1e-300)
            if np.all(np.abs(step) <= 1e-16 * (1.0 + np.abs(wb))):
                break
        w[big] = wb

    return w[0] if scalar else w


def _recurrence_pass(x, diag, offdiag):
    """One pass of the orthonormal three-term recurrence at the points ``x``.

    Evaluates ``b_n * p_n`` and its derivative together with ``p_{n-1}``,
    rescaling per point whenever values grow large; returns the scaled
    values plus the accumulated log-scale so callers can undo it.
    """
    n = diag.size
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    d_prev = np.zeros_like(x)
    d = np.zeros_like(x)
    log_scale = np.zeros_like(x)
    for k in range(n):
        b_next = offdiag[k] if k < n - 1 else 1.0
        p_next = ((x - diag[k]) * p - (offdiag[k - 1] * p_prev if k > 0 else 0.0)) / b_next
        d_next = ((x - diag[k]) * d + p - (offdiag[k - 1] * d_prev if k > 0 else 0.0)) / b_next
        p_prev, p = p, p_next
        d_prev, d = d, d_next
        big = np.maximum(np.abs(p), np.abs(d)) > 1e100
        if np.any(big):
            scale = np.where(big, 1e-100, 1.0)
            p = p * scale
            p_prev = p_prev * scale
            d = d * scale
            d_prev = d_prev * scale
            log_scale = log_scale - np.log(scale)
    return p, d, p_prev, log_scale


def _gauss_rule(diag, offdiag, kind):
    x = eigh_tridiagonal(diag, offdiag, eigvals_only=True)
    # Newton polish of the eigenvalue nodes on the recurrence itself.
    for _ in range(4):
        p, d, _, _ = _recurrence_pass(x, diag, offdiag)
        step = p / d
        x = x - step
        if np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(x))):
            break
    # Weights from the Christoffel-Darboux identity at the roots:
    # sum_{k<n} p_k(x)^2 = b_n p_n'(x) p_{n-1}(x), whose inverse is the
    # Gauss weight.  Computed in log space so extreme-node weights far
    # below 1 survive; floored at the smallest normal double to stay
    # positive at the order cap.
    _, d, p_prev, log_scale = _recurrence_pass(x, diag, offdiag)
    log_w = -(np.log(np.abs(d)) + np.log(np.abs(p_prev)) + 2.0 * log_scale)
    weights = np.maximum(np.exp(log_w), np.finfo(float).tiny)
    return QuadratureRule(nodes=x, weights=weights, kind=kind)


def _check_order(n):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ParameterError("quadrature order must be an integer")
    if n < 1 or n > MAX_QUADRATURE_ORDER:
        raise ParameterError(
            f"quadrature order must be in [1, {MAX_QUADRATURE_ORDER}], got {n}"
        )


@lru_cache(maxsize=64)
def gauss_hermite(n: int) -> QuadratureRule:
    """Rule of order ``n`` for the standard normal measure Dz.

    Exact for polynomials up to degree 2n-1.
    """
    _check_order(n)
    if n == 1:
        return QuadratureRule(nodes=np.zeros(1), weights=np.ones(1), kind="gaussian-measure")
    # Orthonormal probabilists' Hermite: x p_k = sqrt(k+1) p_{k+1} + sqrt(k) p_{k-1}
    diag = np.zeros(n)
    offdiag = np.sqrt(np.arange(1.0, n))
    return _gauss_rule(diag, offdiag, "gaussian-measure")


#: Half-width of the tanh-sinh sweep; sized so the innermost node in
#: s = e^{-x} stays a positive double (v <= ~346) at the order cap.
_DE_SPAN = 6.09


@lru_cache(maxsize=64)
def gauss_laguerre(n: int) -> QuadratureRule:
    """Rule of order ``n`` for the unit exponential measure e^{-x} dx.

    Realizes ``int_0^1 ds f(log(1/s))``.  Nodes are double-exponentially
    graded (tanh-sinh in s = e^{-x}) instead of classically Gaussian:
    the integrands this rule serves behave like x^rho and x^rho * log(x)
    near x = 0, where Gaussian placement converges only as a power of n
    while the graded rule integrates moments, fractional powers and
    logarithmic factors to double precision for n >= ~50.
    """
    _check_order(n)
    if n == 1:
        return QuadratureRule(nodes=np.ones(1), weights=np.ones(1), kind="exponential-measure")
    k = np.arange(n) - (n - 1) / 2.0
    h = 2.0 * _DE_SPAN / (n - 1)
    hk = h * k
    v = 0.5 * np.pi * np.sinh(hk)
    # s = (1 + tanh v)/2 = 1/(1 + e^{-2v}), so x = -log s = logaddexp(0, -2v),
    # stable at both endpoints where s itself would round to 0 or 1.
    x = np.logaddexp(0.0, -2.0 * v)
    log_cosh_v = np.abs(v) + np.log1p(np.exp(-2.0 * np.abs(v))) - np.log(2.0)
    log_w = (
        np.log(h)
        + np.log(0.5 * np.pi)
        + np.log(np.cosh(hk))
        - np.log(2.0)
        - 2.0 * log_cosh_v
    )
    weights = np.maximum(np.exp(log_w), np.finfo(float).tiny)
    weights = weights / weights.sum()  # measure is normalized; pins sum(w)=1 at low orders
    order = np.argsort(x)
    return QuadratureRule(nodes=x[order], weights=weights[order], kind="exponential-measure")
