"""Eigenvalue spectra of the covariate correlation matrix.

The asymptotic theory sees the population correlation matrix A only
through its eigenvalue distribution.  Every matrix family used here has
an atomic spectrum in the large-p limit, so a spectrum is a finite list
of (eigenvalue, weight) atoms and all spectral averages are finite sums

    <a^j / (2*eta + g*a)^k> = sum_m  w_m * a_m^j / (2*eta + g*a_m)^k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, SingularDenominatorError

_NORMALIZE_TOL = 1e-6
_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """Discrete eigenvalue distribution: positive atoms with unit total weight."""

    eigenvalues: np.ndarray
    weights: np.ndarray
    label: str = "explicit"
    note: str = ""

    def __post_init__(self):
        eig = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if eig.shape != wts.shape or eig.ndim != 1 or eig.size == 0:
            raise ParameterError("spectrum needs matching 1-d eigenvalue/weight lists")
        if not np.all(np.isfinite(eig)) or not np.all(np.isfinite(wts)):
            raise ParameterError("spectrum atoms must be finite")
        if np.any(eig <= 0.0):
            raise ParameterError("correlation-matrix eigenvalues must be positive")
        if np.any(wts <= 0.0):
            raise ParameterError("spectrum weights must be positive")
        total = wts.sum()
        if abs(total - 1.0) > _NORMALIZE_TOL:
            raise ParameterError(f"spectrum weights sum to {total}, too far from 1 to renormalize")
        if abs(total - 1.0) > _SUM_TOL:
            wts = wts / total
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "weights", wts)

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.eigenvalues.tolist(), self.weights.tolist()))

    @property
    def mean(self) -> float:
        """First spectral moment <a>."""
        return float(np.dot(self.weights, self.eigenvalues))


def identity_spectrum() -> Spectrum:
    return Spectrum(np.array([1.0]), np.array([1.0]), label="identity")


def pairwise_spectrum(eps: float) -> Spectrum:
    """Two-atom spectrum of pairwise-correlated covariates.

    Covariates correlated in ordered pairs with strength eps give a block
    diagonal correlation matrix whose eigenvalues are 1+eps and 1-eps with
    equal weight; eps must stay below 1 for positive definiteness.
    """
    if not 0.0 <= eps < 1.0:
        raise ParameterError(f"pairwise correlation needs 0 <= eps < 1, got {eps}")
    if eps == 0.0:
        return Spectrum(np.array([1.0]), np.array([1.0]), label="pairwise:0")
    return Spectrum(
        np.array([1.0 - eps, 1.0 + eps]),
        np.array([0.5, 0.5]),
        label=f"pairwise:{eps:g}",
    )


def rank_one_spectrum(eps: float) -> Spectrum:
    """Large-p spectrum of the uniform off-diagonal (rank-one) correlation family.

    A = I + (eps/sqrt(p))(J - I) has bulk eigenvalue 1 - eps/sqrt(p) with
    weight (p-1)/p and a single outlier 1 + (p-1) eps/sqrt(p) whose weight
    1/p vanishes as p grows, so the limiting spectrum is the identity one
    for every eps.
    """
    if eps < 0.0:
        raise ParameterError(f"rank-one correlation strength must be >= 0, got {eps}")
    return Spectrum(
        np.array([1.0]),
        np.array([1.0]),
        label=f"rank1:{eps:g}",
        note="rank-one outlier eigenvalue 1+(p-1)*eps/sqrt(p) carries vanishing weight 1/p",
    )


def explicit_spectrum(atoms) -> Spectrum:
    """Spectrum from an iterable of (eigenvalue, weight) pairs."""
    arr = np.asarray(list(atoms), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParameterError("explicit spectrum needs (eigenvalue, weight) pairs")
    return Spectrum(arr[:, 0], arr[:, 1], label="explicit")


def make_spectrum(model: str, eps: float | None = None, atoms=None) -> Spectrum:
    """Build a spectrum from a correlation-model name.

    ``model`` is one of ``identity``, ``pairwise`` (needs ``eps``),
    ``uniform_rank_one``/``rank1`` (needs ``eps``) or ``explicit``
    (needs ``atoms``).
    """
    if model == "identity":
        return identity_spectrum()
    if model == "pairwise":
        if eps is None:
            raise ParameterError("pairwise spectrum needs eps")
        return pairwise_spectrum(eps)
    if model in ("uniform_rank_one", "rank1"):
        if eps is None:
            raise ParameterError("rank-one spectrum needs eps")
        return rank_one_spectrum(eps)
    if model == "explicit":
        if atoms is None:
            raise ParameterError("explicit spectrum needs atoms")
        return explicit_spectrum(atoms)
    raise ParameterError(f"unknown spectrum model {model!r}")


def spectrum_from_json(source) -> Spectrum:
    """Load an explicit spectrum from a JSON array of [eigenvalue, weight] pairs.

    ``source`` may be a path or an already-parsed list.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            data = json.load(fh)
    else:
        data = source
    if not isinstance(data, list):
        raise ParameterError("spectrum JSON must be an array of [eigenvalue, weight] pairs")
    return explicit_spectrum(data)


def spectrum_to_json(spectrum: Spectrum, path) -> None:
    with open(path, "w") as fh:
        json.dump([[a, w] for a, w in spectrum.atoms], fh)


def spectral_moment(spectrum: Spectrum, j: int, k: int, eta: float = 0.0, g_tilde: float = 0.0) -> float:
    """Finite-sum spectral average ``<a^j / (2*eta + g_tilde*a)^k>``.

    For k >= 1 the denominator must be positive on every atom, which only
    fails when eta and g_tilde vanish together.
    """
    if j < 0 or k < 0:
        raise ParameterError("spectral_moment needs j >= 0 and k >= 0")
    if eta < 0.0 or g_tilde < 0.0:
        raise ParameterError("spectral_moment needs eta >= 0 and g_tilde >= 0")
    a = spectrum.eigenvalues
    num = spectrum.weights * a**j
    if k == 0:
        return float(num.sum())
    denom = 2.0 * eta + g_tilde * a
    if np.any(denom <= 0.0):
        raise SingularDenominatorError(
            "spectral average with k >= 1 requires 2*eta + g_tilde*a > 0 on every atom"
        )
    return float((num / denom**k).sum())
