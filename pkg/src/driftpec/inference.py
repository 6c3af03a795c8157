"""Bayesian recovery of Pauli-channel coefficients from measurement counts.

The probability of each measured outcome is linear in the channel
coefficients, so the whole posterior works off one precomputed response
matrix: p(x) = A x, with one column per Pauli conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimMismatch, InvalidInput
from .quantum import (
    DensityMatrix,
    PauliChannel,
    pauli_matrix,
    pauli_label,
    pauli_product_index,
)
from .stats import DirichletParams

MODEL_KINDS = ("plain-noisy", "old-pec-mixture")


@dataclass(frozen=True)
class ShotRecord:
    """Counts of measured bitstrings over L shots."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size < 2:
            raise InvalidInput(f"counts must be a vector, got shape {c.shape}")
        if np.any(c < 0) or not np.allclose(c, np.round(c)):
            raise InvalidInput("counts must be nonnegative integers")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class CalibrationModel:
    """Forward model tying channel coefficients to measured outcome rates.

    ``plain-noisy`` measures the noisy gate directly. ``old-pec-mixture``
    measures the circuits sampled by a previously deployed error-cancelling
    run: the raw bitstream it produces is the sign-free convex mixture of the
    Pauli-conjugated basis circuits, weighted by that run's sampling
    distribution p_old(w) (the signs and the overhead factor are classical
    post-processing and never reach the detector).
    """

    gate: np.ndarray
    rho_test: DensityMatrix
    kind: str = "old-pec-mixture"
    theta_old: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.gate, dtype=complex)
        if g.shape != (self.rho_test.dim, self.rho_test.dim):
            raise DimMismatch(f"gate shape {g.shape} does not match state dim {self.rho_test.dim}")
        if np.abs(g @ g.conj().T - np.eye(g.shape[0])).max() > 1e-10:
            raise InvalidInput("gate is not unitary to 1e-10")
        if self.kind not in MODEL_KINDS:
            raise InvalidInput(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        theta = self.theta_old
        if theta is not None:
            theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
            if theta.shape != (4**self.n_qubits,):
                raise DimMismatch(f"theta_old must have {4**self.n_qubits} entries")
        elif self.kind == "old-pec-mixture":
            raise InvalidInput("old-pec-mixture model needs theta_old")
        g.setflags(write=False)
        object.__setattr__(self, "gate", g)
        object.__setattr__(self, "theta_old", theta)

    @property
    def n_qubits(self) -> int:
        return self.rho_test.n_qubits

    @cached_property
    def response_matrix(self) -> np.ndarray:
        """A with p(x) = A x: column j is the outcome distribution when the
        noise is the pure conjugation by Pauli j."""
        n = self.n_qubits
        npauli = 4**n
        base = self.gate @ self.rho_test.matrix @ self.gate.conj().T
        plain = np.empty((2**n, npauli))
        for k in range(npauli):
            pk = pauli_matrix(pauli_label(k, n))
            plain[:, k] = np.clip(np.diag(pk @ base @ pk.conj().T).real, 0.0, None)
        if self.kind == "plain-noisy":
            return plain
        weights = np.abs(self.theta_old)
        weights = weights / weights.sum()
        mixed = np.zeros_like(plain)
        for w, pw in enumerate(weights):
            if pw == 0:
                continue
            for j in range(npauli):
                mixed[:, j] += pw * plain[:, pauli_product_index(j, w, n)]
        return mixed


def predicted_probs(x: PauliChannel | np.ndarray, model: CalibrationModel) -> np.ndarray:
    """Outcome distribution the model assigns to channel coefficients x."""
    v = np.asarray(getattr(x, "x", x), dtype=float)
    A = model.response_matrix
    if v.shape != (A.shape[1],):
        raise DimMismatch(f"expected {A.shape[1]} coefficients, got {v.shape}")
    return A @ v


def simulate_shots(p: np.ndarray, shots: int, rng: np.random.Generator) -> ShotRecord:
    """Multinomial draw of `shots` outcomes from a histogram."""
    if shots < 1:
        raise InvalidInput(f"need at least one shot, got {shots}")
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    total = p.sum()
    if not np.isfinite(total) or total <= 0:
        raise InvalidInput("histogram has no positive mass")
    return ShotRecord(counts=rng.multinomial(shots, p / total))


def _log_terms(values: np.ndarray, weights: np.ndarray) -> float:
    """sum_i weights_i * log(values_i), with -inf when a positive weight sits
    on a zero value."""
    active = weights != 0
    if np.any(values[active] <= 0):
        return -np.inf
    out = np.zeros_like(values)
    out[active] = weights[active] * np.log(values[active])
    return float(out.sum())


def log_likelihood(x, record: ShotRecord, model: CalibrationModel) -> float:
    """Multinomial log likelihood sum_i C_i log p_i(x) (independent runs)."""
    p = predicted_probs(x, model)
    if p.shape != record.counts.shape:
        raise DimMismatch(f"record has {record.counts.size} outcomes, model {p.size}")
    return _log_terms(p, record.counts.astype(float))


def log_posterior(x, record: ShotRecord, model: CalibrationModel, eta) -> float:
    """Log likelihood plus the Dirichlet prior terms sum_j (eta_j - 1) log x_j,
    dropping everything independent of x."""
    e = eta.eta if isinstance(eta, DirichletParams) else np.asarray(eta, dtype=float)
    v = np.asarray(getattr(x, "x", x), dtype=float)
    if e.shape != v.shape:
        raise DimMismatch(f"prior dimension {e.shape} vs coefficients {v.shape}")
    ll = log_likelihood(x, record, model)
    return ll + _log_terms(v, e - 1.0)


def map_objective(z: np.ndarray, record: ShotRecord, model: CalibrationModel,
                  eta) -> tuple[float, np.ndarray]:
    """Log posterior and its analytic gradient at x = softmax(z).

    The gradient chains the linear response (d p / d x = A) through the
    softmax Jacobian diag(x) - x x^T.
    """
    e = eta.eta if isinstance(eta, DirichletParams) else np.asarray(eta, dtype=float)
    A = model.response_matrix
    counts = record.counts.astype(float)
    z = np.asarray(z, dtype=float)
    ez = np.exp(z - z.max())
    x = ez / ez.sum()
    p = A @ x
    value = _log_terms(p, counts) + _log_terms(x, e - 1.0)
    if not np.isfinite(value):
        return -np.inf, np.zeros_like(x)
    # denominator floors keep the gradient finite on extreme ridge excursions
    safe_p = np.maximum(p, 1e-200)
    safe_x = np.maximum(x, 1e-200)
    gx = A.T @ (counts / safe_p) + (e - 1.0) / safe_x
    gz = x * gx - (x @ gx) * x
    return value, gz


@dataclass(frozen=True)
class MapOptions:
    """Knobs for the simplex ascent."""

    max_iterations: int = 5000
    tolerance: float = 1e-9
    restarts: int = 4
    seed: int | Sequence[int] = 0


@dataclass(frozen=True)
class MapEstimate:
    x_hat: PauliChannel
    log_posterior_value: float
    iterations: int
    converged: bool
    restart: int = 0


_MAX_STEP = 1e3


def _ascend(z0: np.ndarray, record: ShotRecord, model: CalibrationModel, eta,
            options: MapOptions) -> tuple[float, np.ndarray, int, bool]:
    value, grad = map_objective(z0, record, model, eta)
    if not np.isfinite(value):
        return -np.inf, z0, 0, False
    z = z0 - z0.max()
    step = min(1.0, 1.0 / max(1.0, np.abs(grad).max()))
    iterations = 0
    converged = False
    while iterations < options.max_iterations:
        iterations += 1
        if np.abs(grad).max() < 1e-12:
            converged = True
            break
        # backtrack until the step improves, then extend by doubling while
        # the improvement keeps growing (plain ascent along the gradient)
        trial = step
        found = None
        while trial > 1e-18:
            v_new, g_new = map_objective(z + trial * grad, record, model, eta)
            if v_new > value:
                found = (trial, v_new, g_new)
                break
            trial *= 0.5
        if found is None:
            converged = True
            break
        while found[0] < _MAX_STEP:
            wider = found[0] * 2.0
            v_new, g_new = map_objective(z + wider * grad, record, model, eta)
            if v_new <= found[1]:
                break
            found = (wider, v_new, g_new)
        step_taken, v_new, g_new = found
        gain = v_new - value
        z = z + step_taken * grad
        z -= z.max()
        value, grad = v_new, g_new
        step = min(step_taken, _MAX_STEP)
        if gain < options.tolerance:
            converged = True
            break
    return value, z, iterations, converged


def map_estimate(record: ShotRecord, model: CalibrationModel, eta,
                 options: MapOptions = MapOptions()) -> MapEstimate:
    """Maximum-a-posteriori channel coefficients on the simplex.

    Parameterizes x = softmax(z) so iterates stay interior, and runs gradient
    ascent with a backtracking line search. Restart 0 starts at the prior
    mode; later restarts start at draws from the prior, each with its own
    stream derived from (seed, restart index). The best restart wins, ties
    resolved toward the lowest index. Non-convergence is reported through the
    flag, never raised.
    """
    e = eta.eta if isinstance(eta, DirichletParams) else np.asarray(eta, dtype=float)
    if e.shape != (model.response_matrix.shape[1],):
        raise DimMismatch("prior dimension does not match the model")
    seed = options.seed if isinstance(options.seed, Sequence) else (options.seed,)
    shifted = np.clip(e - 1.0, 0.0, None)
    if shifted.sum() > 0:
        mode = shifted / shifted.sum()
    else:
        mode = np.full_like(e, 1.0 / e.size)
    best: tuple | None = None
    for restart in range(max(options.restarts, 1)):
        if restart == 0:
            x0 = np.maximum(mode, 1e-12)
        else:
            rng = np.random.default_rng([*seed, restart])
            x0 = np.maximum(rng.dirichlet(e), 1e-12)
        value, z, iterations, converged = _ascend(np.log(x0), record, model, eta, options)
        if best is None or value > best[0]:
            best = (value, z, iterations, converged, restart)
    value, z, iterations, converged, restart = best
    ez = np.exp(z - z.max())
    x = ez / ez.sum()
    return MapEstimate(x_hat=PauliChannel.from_vector(x), log_posterior_value=value,
                       iterations=iterations, converged=converged, restart=restart)


def roll_prior(x_hat: PauliChannel | np.ndarray, kappa: float) -> DirichletParams:
    """Concentration-weighted rollover prior: eta = kappa * x_hat + 1.

    The returned prior's mode equals x_hat exactly and every entry exceeds 1,
    so the next MAP problem is anchored at the previous estimate and stays
    interior.
    """
    if kappa <= 0:
        raise InvalidInput(f"concentration must be positive, got {kappa}")
    v = np.asarray(getattr(x_hat, "x", x_hat), dtype=float)
    return DirichletParams(eta=kappa * v + 1.0)
