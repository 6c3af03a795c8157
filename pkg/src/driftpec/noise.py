"""Damping noise from decoherence times.

Builds amplitude/phase damping (APD) composites from (t, T1, T2), twirls them
into Pauli channels, assembles separable multi-qubit channels, and walks
channel parameters along a drifting schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InfeasibleTimes,
    InvalidChannel,
    InvalidInput,
    InvalidParam,
    InvalidPeriod,
    InvalidTime,
)
from .quantum import KrausChannel, PauliChannel, commutation_signs, ptm_of_channel


def _check_positive_time(value: float, name: str) -> float:
    v = float(value)
    if not math.isfinite(v) or v <= 0:
        raise InvalidTime(f"{name} must be a positive finite time, got {value}")
    return v


@dataclass(frozen=True)
class DecoherenceTimes:
    """Relaxation and dephasing times for one qubit, in microseconds."""

    t1: float
    t2: float
    t_phi: float | None = None

    def __post_init__(self):
        _check_positive_time(self.t1, "T1")
        _check_positive_time(self.t2, "T2")

    def require_physical(self) -> "DecoherenceTimes":
        """Enforce the Bloch-Redfield feasibility bound T2 <= 2*T1."""
        if self.t2 > 2 * self.t1:
            raise InfeasibleTimes(
                f"T2 = {self.t2} exceeds 2*T1 = {2 * self.t1}; "
                "pass allow_unphysical to accept raw calibration feeds")
        return self


def decay_probability(t: float, t1: float) -> float:
    """Excited-state decay probability 1 - exp(-t/T1)."""
    if t < 0 or not math.isfinite(float(t)):
        raise InvalidTime(f"t must be nonnegative and finite, got {t}")
    _check_positive_time(t1, "T1")
    return 1.0 - math.exp(-t / t1)


def tphi_from_bloch_redfield(t1: float, t2: float) -> float:
    """Pure dephasing time from 1/T_phi = 1/T2 - 1/(2*T1).

    Returns +inf at the T2 = 2*T1 boundary; T2 beyond it has no physical
    T_phi and raises (real calibration feeds do produce such pairs, so the
    error is a dedicated type callers can switch on).
    """
    _check_positive_time(t1, "T1")
    _check_positive_time(t2, "T2")
    if t2 > 2 * t1:
        raise InfeasibleTimes(f"T2 = {t2} exceeds 2*T1 = {2 * t1}")
    inv = 1.0 / t2 - 1.0 / (2.0 * t1)
    return math.inf if inv == 0 else 1.0 / inv


@dataclass(frozen=True)
class APDParams:
    """Amplitude (gamma) and phase (lam) damping strengths at gate time t."""

    gamma: float
    lam: float
    t: float = 0.0

    def __post_init__(self):
        for name, v in (("gamma", self.gamma), ("lam", self.lam)):
            if not 0.0 <= v <= 1.0:
                raise InvalidParam(f"{name} must lie in [0, 1], got {v}")
        if self.t < 0:
            raise InvalidTime(f"t must be nonnegative, got {self.t}")

    @classmethod
    def from_times(cls, t: float, t1: float, t2: float) -> "APDParams":
        return cls(gamma=decay_probability(t, t1), lam=decay_probability(t, t2), t=t)


def _damping_kraus(gamma: float, coherence: float) -> KrausChannel:
    """Three-operator damping composite with population decay ``gamma`` and
    off-diagonal survival factor ``coherence``."""
    residual = 1.0 - gamma - coherence**2
    if residual < -1e-12:
        raise InvalidParam(
            f"coherence {coherence} too large for decay {gamma} (not a CP map)")
    e0 = np.array([[1, 0], [0, coherence]], dtype=complex)
    e1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    e2 = np.array([[0, 0], [0, math.sqrt(max(residual, 0.0))]], dtype=complex)
    return KrausChannel(kraus_ops=(e0, e1, e2))


def apd_channel(params: APDParams) -> KrausChannel:
    """Phase damping composed after amplitude damping.

    Kraus set: E0 = diag(1, sqrt((1-gamma)(1-lam))), E1 = sqrt(gamma)|0><1|,
    E2 = sqrt((1-gamma)lam)|1><1|.
    """
    coherence = math.sqrt((1.0 - params.gamma) * (1.0 - params.lam))
    return _damping_kraus(params.gamma, coherence)


def apd_channel_from_times(t: float, t1: float, t2: float,
                           match_twirl: bool = True) -> KrausChannel:
    """Damping composite for gate time t on a qubit with times (T1, T2).

    By default the off-diagonal survival factor is the mean of the T1 and T2
    decay envelopes, (exp(-t/T1) + exp(-t/T2)) / 2, which makes the exact
    Pauli twirl of the channel land on :func:`twirled_apd_coeffs`; the two
    agree only to first order in the damping strengths when the dephasing
    parameter is instead taken directly as 1 - exp(-t/T2)
    (``match_twirl=False``). Requires T2 <= 2*T1 so the composite stays
    completely positive.
    """
    gamma = decay_probability(t, t1)
    if match_twirl:
        if t2 > 2 * t1:
            raise InfeasibleTimes(f"T2 = {t2} exceeds 2*T1 = {2 * t1}")
        coherence = 0.5 * (math.exp(-t / t1) + math.exp(-t / t2))
        return _damping_kraus(gamma, coherence)
    return apd_channel(APDParams.from_times(t, t1, t2))


def pauli_twirl(channel: KrausChannel) -> PauliChannel:
    """Average a channel over Pauli conjugations.

    The twirl keeps the diagonal of the PTM and discards the rest, so the
    coefficients solve x = W^{-1} f with f the PTM diagonal. Fixes Pauli
    channels and preserves average channel fidelity.
    """
    if not isinstance(channel, KrausChannel):
        raise InvalidChannel("pauli_twirl expects a Kraus channel")
    n = channel.n_qubits
    f = np.diag(ptm_of_channel(channel).matrix)
    x = commutation_signs(n) @ f / 4**n
    if x.min() < -1e-10:
        raise InvalidChannel(f"twirl produced coefficient {x.min():.3e} < 0")
    x = np.clip(x, 0.0, None)
    return PauliChannel(n=n, x=x / x.sum())


@dataclass(frozen=True)
class SingleQubitTwirled:
    """Single-qubit twirled damping coefficients (c0, c1, c2, c3) with
    c1 = c2 by construction."""

    c0: float
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        if self.c1 != self.c2:
            raise InvalidParam("twirled damping requires c1 == c2")
        for c in (self.c0, self.c1, self.c3):
            if not -1e-12 <= c <= 1.0 + 1e-12:
                raise InvalidParam(f"coefficient {c} outside [0, 1]")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2, self.c3])


def twirled_apd_coeffs(t: float, t1: float, t2: float) -> SingleQubitTwirled:
    """Closed-form twirled damping coefficients.

    c1 = c2 = (1 - exp(-t/T1)) / 4,  c3 = (1 - exp(-t/T2)) / 4,
    c0 = 1 - c1 - c2 - c3. The X and Y error weights track relaxation, the Z
    weight tracks dephasing; they are not equal to each other.
    """
    c1 = 0.25 * decay_probability(t, t1)
    c3 = 0.25 * decay_probability(t, t2)
    return SingleQubitTwirled(c0=1.0 - 2 * c1 - c3, c1=c1, c2=c1, c3=c3)


def separable_product(per_qubit: Sequence[SingleQubitTwirled | np.ndarray]) -> PauliChannel:
    """Kronecker product of per-qubit coefficient 4-vectors, qubit 0 most
    significant."""
    if len(per_qubit) == 0:
        raise InvalidInput("separable_product needs at least one qubit")
    if len(per_qubit) > 4:
        raise InvalidInput("dense simulation is capped at 4 qubits")
    x = np.array([1.0])
    for c in per_qubit:
        v = c.vector if isinstance(c, SingleQubitTwirled) else np.asarray(c, dtype=float)
        if v.shape != (4,):
            raise InvalidInput(f"per-qubit coefficients must be 4-vectors, got {v.shape}")
        x = np.kron(x, v)
    return PauliChannel(n=len(per_qubit), x=x / x.sum())


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-period mean decoherence times for each qubit plus the gate time.

    ``t1_means`` and ``t2_means`` have shape (periods, n_qubits), in
    microseconds. Built either from endpoint pairs (linear interpolation
    across periods) or from an explicit per-period table (CSV ingestion).
    """

    t1_means: np.ndarray
    t2_means: np.ndarray
    gate_time: float
    allow_unphysical: bool = False

    def __post_init__(self):
        t1 = np.atleast_2d(np.asarray(self.t1_means, dtype=float))
        t2 = np.atleast_2d(np.asarray(self.t2_means, dtype=float))
        if t1.shape != t2.shape or t1.shape[0] < 1 or t1.shape[1] < 1:
            raise InvalidInput(f"inconsistent schedule shapes {t1.shape} vs {t2.shape}")
        if not (np.isfinite(t1).all() and np.isfinite(t2).all()):
            raise InvalidTime("schedule times must be finite")
        if t1.min() <= 0 or t2.min() <= 0:
            raise InvalidTime("schedule times must be positive")
        _check_positive_time(self.gate_time, "gate time")
        # Feasibility (T2 <= 2*T1) is checked per period consumed, not here:
        # a drifting schedule may interpolate through periods nobody runs.
        t1.setflags(write=False)
        t2.setflags(write=False)
        object.__setattr__(self, "t1_means", t1)
        object.__setattr__(self, "t2_means", t2)

    @classmethod
    def from_endpoints(cls, t1_spans: Sequence[tuple[float, float]],
                       t2_spans: Sequence[tuple[float, float]],
                       periods: int, gate_time: float,
                       allow_unphysical: bool = False) -> "NoiseSchedule":
        """Linear-in-period interpolation: mean(p) = start + p*(end-start)/(P-1)."""
        if periods < 1:
            raise InvalidInput(f"need at least one period, got {periods}")
        if len(t1_spans) != len(t2_spans) or not t1_spans:
            raise InvalidInput("one (start, end) pair per qubit for both T1 and T2")
        steps = np.arange(periods) / max(periods - 1, 1)
        t1 = np.stack([s + steps * (e - s) for s, e in t1_spans], axis=1)
        t2 = np.stack([s + steps * (e - s) for s, e in t2_spans], axis=1)
        return cls(t1_means=t1, t2_means=t2, gate_time=gate_time,
                   allow_unphysical=allow_unphysical)

    @property
    def periods(self) -> int:
        return self.t1_means.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.t1_means.shape[1]

    def times_at(self, period: int) -> list[DecoherenceTimes]:
        if not 0 <= period < self.periods:
            raise InvalidPeriod(f"period {period} outside [0, {self.periods})")
        times = [DecoherenceTimes(t1=float(self.t1_means[period, q]),
                                  t2=float(self.t2_means[period, q]))
                 for q in range(self.n_qubits)]
        if not self.allow_unphysical:
            for dt in times:
                dt.require_physical()
        return times


def schedule_channel(schedule: NoiseSchedule,
                     period: int) -> tuple[PauliChannel, list[DecoherenceTimes]]:
    """Mean Pauli channel at a schedule period.

    Per-qubit means feed the closed-form twirled coefficients at the gate
    time; the multi-qubit channel is their separable product.
    """
    times = schedule.times_at(period)
    coeffs = [twirled_apd_coeffs(schedule.gate_time, dt.t1, dt.t2) for dt in times]
    return separable_product(coeffs), times
