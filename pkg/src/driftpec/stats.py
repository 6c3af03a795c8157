"""Dirichlet models for fluctuating channel coefficients and the distances
used to score drift and output accuracy.

All Gamma-function arithmetic runs in log space; 16-dimensional products of
Gamma values overflow doubles well before the concentrations of interest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateSeries, DimMismatch, InvalidInput


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector of a Dirichlet distribution (all entries > 0)."""

    eta: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.eta, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise InvalidInput(f"concentration must be a vector of length >= 2, got {v.shape}")
        if not np.isfinite(v).all() or v.min() <= 0:
            raise InvalidInput("concentration entries must be positive and finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "eta", v)

    @property
    def dim(self) -> int:
        return self.eta.size

    @property
    def mean(self) -> np.ndarray:
        return self.eta / self.eta.sum()

    @property
    def mode(self) -> np.ndarray:
        """Interior mode (eta_i - 1) / (sum eta - dim); defined for eta > 1."""
        shifted = self.eta - 1.0
        total = shifted.sum()
        if shifted.min() < 0 or total <= 0:
            raise InvalidInput("mode requires every concentration entry above 1")
        return shifted / total


def _as_eta(eta) -> np.ndarray:
    return eta.eta if isinstance(eta, DirichletParams) else np.asarray(eta, dtype=float)


def _check_simplex(x: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.min() < -1e-12 or abs(x.sum() - 1.0) > atol:
        raise InvalidInput("vector is not on the probability simplex")
    return np.clip(x, 0.0, None)


def dirichlet_logpdf(x, eta) -> float:
    """Log density of Dirichlet(eta) on the open simplex.

    Boundary points (any x_i = 0) return the -inf sentinel rather than
    raising: the MAP optimizer treats such iterates as rejected steps.
    """
    e = _as_eta(eta)
    x = _check_simplex(getattr(x, "x", x))
    if x.shape != e.shape:
        raise DimMismatch(f"dimension mismatch: x {x.shape} vs eta {e.shape}")
    if (x == 0).any():
        return -np.inf
    norm = gammaln(e.sum()) - gammaln(e).sum()
    return float(norm + ((e - 1.0) * np.log(x)).sum())


def dirichlet_sample(eta, rng: np.random.Generator) -> np.ndarray:
    """One draw from Dirichlet(eta) (normalized independent Gamma variates)."""
    e = _as_eta(eta)
    sample = rng.dirichlet(e)
    return sample / sample.sum()


def bhattacharyya_dirichlet(eta, eta_prime) -> float:
    """Closed-form Bhattacharyya coefficient between two Dirichlet laws.

    BC = sqrt(Gamma(S) Gamma(S')) / prod sqrt(Gamma(eta_i) Gamma(eta'_i))
         * prod Gamma((eta_i + eta'_i)/2) / Gamma((S + S')/2),
    evaluated entirely through log-Gamma.
    """
    a = _as_eta(eta)
    b = _as_eta(eta_prime)
    if a.shape != b.shape:
        raise DimMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    log_bc = (0.5 * (gammaln(a.sum()) + gammaln(b.sum()))
              - 0.5 * (gammaln(a) + gammaln(b)).sum()
              + gammaln((a + b) / 2.0).sum()
              - gammaln((a.sum() + b.sum()) / 2.0))
    return float(np.exp(min(log_bc, 0.0)))


def hellinger_dirichlet(eta, eta_prime) -> float:
    """sqrt(1 - BC); zero iff the two concentration vectors coincide."""
    return float(np.sqrt(max(0.0, 1.0 - bhattacharyya_dirichlet(eta, eta_prime))))


def hellinger_discrete(p: np.ndarray, q: np.ndarray) -> float:
    """Hellinger distance sqrt(1 - sum_i sqrt(p_i q_i)) between histograms."""
    p = _check_simplex(p)
    q = _check_simplex(q)
    if p.shape != q.shape:
        raise DimMismatch(f"dimension mismatch: {p.shape} vs {q.shape}")
    overlap = np.sqrt(p * q).sum()
    return float(np.sqrt(max(0.0, 1.0 - min(overlap, 1.0))))


def spatial_correlation(series_a: np.ndarray, series_b: np.ndarray) -> float:
    """Pearson correlation between coefficient samples at two qubit sites."""
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimMismatch(f"series shapes differ: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise InvalidInput("need at least two samples per series")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da @ da) * (db @ db))
    if denom == 0.0:
        raise DegenerateSeries("at least one series has zero variance")
    return float(np.clip((da @ db) / denom, -1.0, 1.0))
