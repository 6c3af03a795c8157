"""Quasi-probability cancellation of Pauli noise around an ideal gate.

The ideal gate G is expanded over the implementable noisy basis
G_j = E_x . P_j . G (Pauli conjugation after the gate, then the noise). For a
Pauli channel both the noise and the conjugations are diagonal in the Pauli
transfer picture, so the expansion coefficients solve a sign-matrix system
rather than a dense superoperator one: theta = W (1/f) / 4^n, with f the
channel's transfer eigenvalues and W the commutation-sign matrix.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHistogram, DimMismatch, InvalidInput, NonInvertibleChannel
from .quantum import (
    DensityMatrix,
    PTM,
    PauliChannel,
    apply_channel,
    commutation_signs,
    measure_probs,
    pauli_label,
    pauli_matrix,
    ptm_of_unitary,
)

INVERTIBILITY_FLOOR = 1e-6


@dataclass(frozen=True)
class QuasiProb:
    """Signed expansion of an ideal gate over its noisy basis.

    theta sums to one; the sampling distribution is |theta|/Theta with
    overhead Theta = sum |theta| >= 1. Carries the gate and the hypothesis
    channel so a run can rebuild the basis circuits.
    """

    theta: np.ndarray
    gate: np.ndarray
    x_hyp: PauliChannel

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        g = np.asarray(self.gate, dtype=complex)
        if th.shape != (4**self.x_hyp.n,):
            raise DimMismatch(f"theta must have {4**self.x_hyp.n} entries, got {th.shape}")
        if abs(th.sum() - 1.0) > 1e-9:
            raise InvalidInput(f"theta sums to {th.sum():.12f}; reconstruction is not trace preserving")
        th.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "gate", g)

    @property
    def theta_norm(self) -> float:
        """The sampling overhead Theta (estimator noise grows as Theta^2)."""
        return float(np.abs(self.theta).sum())

    @property
    def sampling_probs(self) -> np.ndarray:
        return np.abs(self.theta) / self.theta_norm

    @property
    def signs(self) -> np.ndarray:
        s = np.sign(self.theta)
        s[s == 0] = 1.0
        return s


@dataclass(frozen=True)
class NoisyBasis:
    """The implementable basis around (x_hyp, G), kept in transfer form."""

    gate: np.ndarray
    x_hyp: PauliChannel
    transfer_eigs: np.ndarray
    signs: np.ndarray

    def basis_ptm(self, j: int) -> PTM:
        """Dense PTM of E_x . P_j . G (built on demand; the decomposition
        itself never needs it)."""
        n = self.x_hyp.n
        noise = np.diag(self.transfer_eigs)
        conj = np.diag(self.signs[j])
        return PTM(matrix=noise @ conj @ ptm_of_unitary(self.gate).matrix)


def noisy_basis(x_hyp: PauliChannel, gate: np.ndarray) -> NoisyBasis:
    W = commutation_signs(x_hyp.n)
    return NoisyBasis(gate=np.asarray(gate, dtype=complex), x_hyp=x_hyp,
                      transfer_eigs=x_hyp.ptm_diagonal(), signs=W)


def quasiprob_decompose(x_hyp: PauliChannel, gate: np.ndarray) -> QuasiProb:
    """Expansion coefficients of the ideal gate over the noisy basis.

    Solves sum_j theta_j W_jb f_b = 1 for every b, i.e. theta = W (1/f) / 4^n
    since W^2 = 4^n I. Channels with a transfer eigenvalue at or below the
    invertibility floor cannot be cancelled and are rejected.
    """
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2**x_hyp.n, 2**x_hyp.n):
        raise DimMismatch(f"gate shape {gate.shape} does not match {x_hyp.n} qubits")
    f = x_hyp.ptm_diagonal()
    if np.abs(f).min() <= INVERTIBILITY_FLOOR:
        raise NonInvertibleChannel(
            f"transfer eigenvalue {np.abs(f).min():.2e} at or below {INVERTIBILITY_FLOOR}")
    W = commutation_signs(x_hyp.n)
    theta = (W @ (1.0 / f)) / 4**x_hyp.n
    residual = np.abs(W.T @ theta * f - 1.0).max()
    if residual > 1e-9:
        raise NonInvertibleChannel(f"reconstruction residual {residual:.2e}")
    return QuasiProb(theta=theta, gate=gate, x_hyp=x_hyp)


def sample_basis_index(q: QuasiProb, rng: np.random.Generator) -> tuple[int, float, float]:
    """Draw one basis index w ~ |theta_w|/Theta with its weight attached."""
    w = int(rng.choice(q.theta.size, p=q.sampling_probs))
    return w, float(q.signs[w]), q.theta_norm


def clip_renormalize(quasi_histogram: np.ndarray) -> np.ndarray:
    """Project a signed histogram to the simplex: clip negatives, renormalize."""
    v = np.asarray(quasi_histogram, dtype=float)
    clipped = np.clip(v, 0.0, None)
    total = clipped.sum()
    if total <= 0:
        raise DegenerateHistogram("no positive mass after clipping")
    return clipped / total


@dataclass(frozen=True)
class MitigatedResult:
    """Output of one mitigated run.

    ``quasi_histogram`` is the signed estimator output (entries may leave
    [0, 1]); ``clipped_histogram`` is its simplex projection, which distance
    metrics consume. Standard errors are per outcome.
    """

    quasi_histogram: np.ndarray
    clipped_histogram: np.ndarray
    n_circuits: int
    shots_per_circuit: int
    standard_errors: np.ndarray


def basis_outcome_probs(q: QuasiProb, x_true: PauliChannel,
                        rho_test: DensityMatrix) -> np.ndarray:
    """Exact outcome distributions of every basis circuit executed under the
    true channel; row w is measure(E_x_true(P_w(G rho G†)))."""
    if x_true.n != q.x_hyp.n:
        raise DimMismatch("hypothesis and executed channel disagree on qubit count")
    n = x_true.n
    base = q.gate @ rho_test.matrix @ q.gate.conj().T
    rows = np.empty((4**n, 2**n))
    for w in range(4**n):
        pw = pauli_matrix(pauli_label(w, n))
        conjugated = DensityMatrix.from_matrix(pw @ base @ pw.conj().T,
                                               eig_floor=rho_test.eig_floor)
        rows[w] = measure_probs(apply_channel(x_true, conjugated))
    return rows


def _apportion(n: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder allocation of n slots proportional to weights, with
    at least one slot per positive weight."""
    active = weights > 0
    if n < int(active.sum()):
        raise InvalidInput(
            f"{n} circuits cannot cover {int(active.sum())} basis terms; "
            "raise n_circuits or use iid allocation")
    raw = n * weights
    counts = np.floor(raw).astype(int)
    counts[active & (counts == 0)] = 1
    remainder = raw - np.floor(raw)
    order = np.argsort(-remainder)
    while counts.sum() < n:
        for j in order:
            if counts.sum() == n:
                break
            if active[j]:
                counts[j] += 1
    while counts.sum() > n:
        j = int(np.argmax(counts))
        counts[j] -= 1
    return counts


def pec_run(q: QuasiProb, x_true: PauliChannel, rho_test: DensityMatrix,
            n_circuits: int, shots_per_circuit: int, rng: np.random.Generator,
            allocation: str = "stratified", workers: int = 1) -> MitigatedResult:
    """Execute a mitigated run of the decomposed gate under the true channel.

    Each sampled circuit w runs ``shots_per_circuit`` shots of the basis
    circuit E_x_true . P_w . G on the test state; its empirical histogram is
    weighted by Theta sgn(theta_w) and the weighted mean over circuits is the
    signed estimator. With ``x_true == x_hyp`` the estimator is unbiased for
    the ideal histogram.

    ``stratified`` (default) fixes the number of circuits per basis index by
    largest-remainder apportionment of the sampling distribution, which keeps
    the estimator exactly unbiased while removing the between-circuit
    sampling noise; ``iid`` draws every circuit index independently. Each
    basis index consumes its own child stream of ``rng`` and contributions
    are combined in index order, so results are identical for every worker
    count.
    """
    if n_circuits < 1 or shots_per_circuit < 1:
        raise InvalidInput("n_circuits and shots_per_circuit must be at least 1")
    if allocation not in ("stratified", "iid"):
        raise InvalidInput(f"unknown allocation {allocation!r}")
    if workers < 1:
        raise InvalidInput(f"workers must be at least 1, got {workers}")
    probs = basis_outcome_probs(q, x_true, rho_test)
    n_basis, n_outcomes = probs.shape
    p_w = q.sampling_probs
    streams = rng.spawn(n_basis)

    if allocation == "stratified":
        counts_per = _apportion(n_circuits, p_w)
    else:
        draws = rng.choice(n_basis, size=n_circuits, p=p_w)
        counts_per = np.bincount(draws, minlength=n_basis)

    def run_stratum(w: int):
        if counts_per[w] == 0:
            return None
        shots = streams[w].multinomial(shots_per_circuit, probs[w], size=counts_per[w])
        hists = shots / shots_per_circuit
        return hists.mean(axis=0), (hists**2).mean(axis=0)

    if workers == 1:
        per_stratum = [run_stratum(w) for w in range(n_basis)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_stratum = list(pool.map(run_stratum, range(n_basis)))

    quasi = np.zeros(n_outcomes)
    variance = np.zeros(n_outcomes)
    if allocation == "stratified":
        for w, stats in enumerate(per_stratum):
            if stats is None:
                continue
            mean_hist, _ = stats
            # weighting by theta_w keeps the estimator unbiased for any
            # allocation; only the variance depends on the apportionment
            quasi += q.theta[w] * mean_hist
            variance += q.theta[w]**2 * mean_hist * (1 - mean_hist) / (
                shots_per_circuit * counts_per[w])
        se = np.sqrt(variance)
    else:
        theta_norm = q.theta_norm
        signs = q.signs
        acc = np.zeros(n_outcomes)
        acc_sq = np.zeros(n_outcomes)
        for w, stats in enumerate(per_stratum):
            if stats is None:
                continue
            mean_hist, mean_sq = stats
            acc += theta_norm * signs[w] * counts_per[w] * mean_hist
            acc_sq += theta_norm**2 * counts_per[w] * mean_sq
        quasi = acc / n_circuits
        variance = np.clip(acc_sq / n_circuits - quasi**2, 0.0, None)
        se = np.sqrt(variance / n_circuits)

    return MitigatedResult(
        quasi_histogram=quasi,
        clipped_histogram=clip_renormalize(quasi),
        n_circuits=n_circuits,
        shots_per_circuit=shots_per_circuit,
        standard_errors=se,
    )
