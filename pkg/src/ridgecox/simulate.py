"""Synthetic time-to-event cohorts from the proportional-hazards model.

Cohorts are drawn in the theory's scaling: associations beta0 have O(1)
components with ||beta0||^2 / p = S^2 held exactly, risk scores are
r_i = beta0 . z_i / sqrt(p), and event times follow a constant baseline
hazard lambda0 via inverse-transform sampling,

    t_i = -log(U_i) * exp(-r_i) / lambda0,   U_i ~ uniform(0, 1).

Covariate rows are i.i.d. with zero mean, unit variance and population
correlation matrix fixed by the correlation model; four marginal
distributions with matched first two moments are supported.  All
randomness flows from one 64-bit seed through per-replicate spawned
streams, so replicates are reproducible and independent of execution
order.  No censoring: every subject is an event.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError

logger = logging.getLogger(__name__)

COVARIATE_DISTS = ("gaussian", "rademacher", "uniform", "student_t")
CORRELATION_MODELS = ("identity", "pairwise", "rank_one")


@dataclass(frozen=True)
class CohortConfig:
    p: int
    N: int
    S: float = 1.0
    covariate_dist: str = "gaussian"
    t_dof: float = 5.0
    correlation: str = "identity"
    corr_eps: float = 0.0
    lambda0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.N < 1:
            raise ParameterError("p and N must be positive integers")
        if self.S <= 0.0:
            raise ParameterError("S must be positive")
        if self.lambda0 <= 0.0:
            raise ParameterError("lambda0 must be positive")
        if self.covariate_dist not in COVARIATE_DISTS:
            raise ParameterError(f"unknown covariate distribution {self.covariate_dist!r}")
        if self.covariate_dist == "student_t" and self.t_dof <= 2.0:
            raise ParameterError("student_t needs dof > 2 for a finite variance")
        if self.correlation not in CORRELATION_MODELS:
            raise ParameterError(f"unknown correlation model {self.correlation!r}")
        if self.correlation == "pairwise":
            if self.p % 2 != 0:
                raise ParameterError("pairwise correlation needs even p")
            if not 0.0 <= self.corr_eps < 1.0:
                raise ParameterError("pairwise correlation needs 0 <= eps < 1")
        if self.correlation == "rank_one":
            if self.corr_eps < 0.0 or 1.0 - self.corr_eps / math.sqrt(self.p) <= 0.0:
                raise ParameterError("rank-one correlation needs 0 <= eps < sqrt(p)")

    @property
    def zeta(self) -> float:
        return self.p / self.N


@dataclass(frozen=True)
class Cohort:
    Z: np.ndarray          # N x p covariates
    beta0: np.ndarray      # true associations, p-vector
    times: np.ndarray      # event times, N-vector
    config: CohortConfig

    @property
    def risk_scores(self) -> np.ndarray:
        return self.Z @ self.beta0 / math.sqrt(self.config.p)


def draw_associations(p: int, S: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian association vector rescaled so that ||beta0||^2 / p = S^2 exactly."""
    if p < 1 or S <= 0.0:
        raise ParameterError("draw_associations needs p >= 1 and S > 0")
    beta = rng.standard_normal(p)
    norm = np.linalg.norm(beta)
    if norm == 0.0:  # probability zero, but keep the rescale well-defined
        beta = np.ones(p)
        norm = math.sqrt(p)
    return beta * (S * math.sqrt(p) / norm)


def _draw_iid(N: int, p: int, dist: str, t_dof: float, rng: np.random.Generator) -> np.ndarray:
    if dist == "gaussian":
        return rng.standard_normal((N, p))
    if dist == "rademacher":
        return rng.integers(0, 2, size=(N, p)).astype(float) * 2.0 - 1.0
    if dist == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(N, p))
    if dist == "student_t":
        return rng.standard_t(t_dof, size=(N, p)) / math.sqrt(t_dof / (t_dof - 2.0))
    raise ParameterError(f"unknown covariate distribution {dist!r}")


def draw_covariates(N: int, p: int, correlation: str, corr_eps: float,
                    covariate_dist: str, rng: np.random.Generator,
                    t_dof: float = 5.0) -> np.ndarray:
    """I.i.d. rows with zero mean, unit variance and the requested correlation.

    pairwise: columns couple in ordered pairs, z_{2k} = y_{2k} and
    z_{2k+1} = eps*y_{2k} + sqrt(1-eps^2)*y_{2k+1}, giving correlation eps
    inside each pair and zero across pairs.  rank_one: every off-diagonal
    correlation equals eps/sqrt(p).
    """
    y = _draw_iid(N, p, covariate_dist, t_dof, rng)
    if correlation == "identity":
        return y
    if correlation == "pairwise":
        if p % 2 != 0:
            raise ParameterError("pairwise correlation needs even p")
        if not 0.0 <= corr_eps < 1.0:
            raise ParameterError("pairwise correlation needs 0 <= eps < 1")
        z = y.copy()
        z[:, 1::2] = corr_eps * y[:, 0::2] + math.sqrt(1.0 - corr_eps**2) * y[:, 1::2]
        return z
    if correlation == "rank_one":
        c = corr_eps / math.sqrt(p)
        if 1.0 - c <= 0.0:
            raise ParameterError("rank-one correlation needs eps < sqrt(p)")
        row_mean = y.mean(axis=1, keepdims=True)
        return math.sqrt(1.0 - c) * y + (math.sqrt(1.0 + c * (p - 1)) - math.sqrt(1.0 - c)) * row_mean
    raise ParameterError(f"unknown correlation model {correlation!r}")


def correlation_action(correlation: str, corr_eps: float, vec: np.ndarray) -> np.ndarray:
    """Apply the population correlation matrix A to a p-vector in closed form."""
    v = np.asarray(vec, dtype=float)
    p = v.shape[-1]
    if correlation == "identity":
        return v.copy()
    if correlation == "pairwise":
        out = v.copy()
        out[..., 0::2] += corr_eps * v[..., 1::2]
        out[..., 1::2] += corr_eps * v[..., 0::2]
        return out
    if correlation == "rank_one":
        c = corr_eps / math.sqrt(p)
        return (1.0 - c) * v + c * v.sum(axis=-1, keepdims=True) * np.ones_like(v)
    raise ParameterError(f"unknown correlation model {correlation!r}")


def generate_times(beta0: np.ndarray, Z: np.ndarray, lambda0: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Event times by inverse-transform sampling of the constant-hazard model."""
    beta0 = np.asarray(beta0, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != beta0.shape[0]:
        raise ParameterError("Z must be N x p with p matching beta0")
    if lambda0 <= 0.0:
        raise ParameterError("lambda0 must be positive")
    r = Z @ beta0 / math.sqrt(beta0.shape[0])
    u = rng.random(Z.shape[0])
    u[u == 0.0] = np.finfo(float).tiny  # keep the uniform draw in the open interval
    times = -np.log(u) * np.exp(-r) / lambda0
    return _break_ties(times)


def _break_ties(times: np.ndarray) -> np.ndarray:
    """Nudge exact duplicates apart by one ulp (continuous times make them measure zero)."""
    unique, counts = np.unique(times, return_counts=True)
    dupes = unique[counts > 1]
    if dupes.size:
        logger.warning("breaking %d tied event times by one ulp", int(counts[counts > 1].sum()))
        for value in dupes:
            idx = np.flatnonzero(times == value)[1:]
            for j, i in enumerate(idx, start=1):
                times[i] = np.nextafter(times[i] + 0.0, np.inf) if j % 2 else np.nextafter(times[i], 0.0)
        return _break_ties(times)
    return times


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate, stable under execution order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


def make_cohort(config: CohortConfig, replicate: int = 0) -> Cohort:
    """Draw one cohort; fixed draw order (covariates, associations, times)."""
    rng = replicate_rng(config.seed, replicate)
    Z = draw_covariates(config.N, config.p, config.correlation, config.corr_eps,
                        config.covariate_dist, rng, config.t_dof)
    beta0 = draw_associations(config.p, config.S, rng)
    times = generate_times(beta0, Z, config.lambda0, rng)
    return Cohort(Z=Z, beta0=beta0, times=times, config=config)


def theory_spectrum(config: CohortConfig):
    """Large-p eigenvalue spectrum of the cohort's population correlation matrix."""
    from .spectrum import identity_spectrum, pairwise_spectrum, rank_one_spectrum

    if config.correlation == "identity":
        return identity_spectrum()
    if config.correlation == "pairwise":
        return pairwise_spectrum(config.corr_eps)
    return rank_one_spectrum(config.corr_eps)


# --- cohort serialization ----------------------------------------------------


def save_cohort(cohort: Cohort, csv_path) -> None:
    """Write subjects (time, z_1..z_p) to CSV plus a JSON sidecar with config and beta0."""
    csv_path = Path(csv_path)
    p = cohort.config.p
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"z{j+1}" for j in range(p)])
        for i in range(cohort.config.N):
            writer.writerow([repr(float(cohort.times[i]))]
                            + [repr(float(v)) for v in cohort.Z[i]])
    sidecar = {
        "config": asdict(cohort.config),
        "beta0": [float(b) for b in cohort.beta0],
        "seed": cohort.config.seed,
    }
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_cohort(csv_path) -> Cohort:
    csv_path = Path(csv_path)
    with open(csv_path.with_suffix(".json")) as fh:
        sidecar = json.load(fh)
    config = CohortConfig(**sidecar["config"])
    beta0 = np.asarray(sidecar["beta0"], dtype=float)
    data = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    times = data[:, 0].copy()
    Z = data[:, 1:].copy()
    if Z.shape != (config.N, config.p):
        raise ParameterError("cohort CSV does not match its sidecar dimensions")
    return Cohort(Z=Z, beta0=beta0, times=times, config=config)
