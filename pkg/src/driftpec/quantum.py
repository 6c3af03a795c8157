"""Dense n-qubit linear algebra: Pauli operators, density matrices, channels
in Kraus and Pauli-transfer-matrix (PTM) form, and computational-basis
measurement.

Index convention: a Pauli string is read left to right with the leftmost
character on qubit 0 (the most significant tensor factor), and maps to the
integer sum_k 4^(n-1-k) * code(label_k) with code I=0, X=1, Y=2, Z=3. Every
length-4^n coefficient vector in the package uses this order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimMismatch, InvalidChannel, InvalidInput, InvalidLabel

PAULI_AXES = "IXYZ"

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Structural checks use 1e-10, aggregate (trace-like) checks 1e-9.
HERMITIAN_ATOL = 1e-10
CPTP_ATOL = 1e-10
TRACE_ATOL = 1e-9
SIMPLEX_ATOL = 1e-9
EIGVAL_FLOOR = -1e-9

_W_1Q = np.array(
    [[1, 1, 1, 1],
     [1, 1, -1, -1],
     [1, -1, 1, -1],
     [1, -1, -1, 1]], dtype=float)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def pauli_labels(n: int) -> list[str]:
    """All 4^n Pauli strings on n qubits in index order."""
    if n < 1:
        raise InvalidInput(f"need at least one qubit, got n={n}")
    labels = [""]
    for _ in range(n):
        labels = [s + a for s in labels for a in PAULI_AXES]
    return labels


def pauli_index(label: str) -> int:
    """Integer index of a Pauli string under the package-wide convention."""
    idx = 0
    for ch in label:
        idx = 4 * idx + PAULI_AXES.index(ch)
    return idx


def pauli_label(index: int, n: int) -> str:
    """Inverse of :func:`pauli_index`."""
    if not 0 <= index < 4**n:
        raise InvalidInput(f"Pauli index {index} out of range for n={n}")
    chars = []
    for _ in range(n):
        index, code = divmod(index, 4)
        chars.append(PAULI_AXES[code])
    return "".join(reversed(chars))


def pauli_product_index(i: int, j: int, n: int) -> int:
    """Index of the Pauli string P_i P_j up to phase.

    The single-qubit codes multiply like the Klein four-group, which is XOR
    on the 2-bit codes, so the product index is a digit-wise XOR in base 4.
    """
    out = 0
    for k in reversed(range(n)):
        a = (i // 4**k) % 4
        b = (j // 4**k) % 4
        out = 4 * out + (a ^ b)
    return out


@lru_cache(maxsize=None)
def _pauli_matrix_cached(label: str) -> np.ndarray:
    m = np.array([[1]], dtype=complex)
    for ch in label:
        m = np.kron(m, _PAULI_1Q[ch])
    return _readonly(m)


def pauli_matrix(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string (read-only, cached)."""
    if not label or any(ch not in PAULI_AXES for ch in label):
        raise InvalidLabel(f"invalid Pauli label {label!r}")
    return _pauli_matrix_cached(label)


@dataclass(frozen=True)
class PauliOperator:
    """A Pauli string together with its dense matrix."""

    label: str
    matrix: np.ndarray

    @property
    def n_qubits(self) -> int:
        return len(self.label)

    @property
    def index(self) -> int:
        return pauli_index(self.label)


def pauli_operator(label: str) -> PauliOperator:
    """Build a :class:`PauliOperator`, validating the label."""
    return PauliOperator(label=label, matrix=pauli_matrix(label))


@lru_cache(maxsize=8)
def commutation_signs(n: int) -> np.ndarray:
    """The 4^n x 4^n matrix with entry (a, b) = +1 if P_a and P_b commute,
    -1 otherwise. Symmetric, and squares to 4^n times the identity."""
    W = np.array([[1.0]])
    for _ in range(n):
        W = np.kron(W, _W_1Q)
    return _readonly(W)


def _n_qubits_of_dim(dim: int, what: str) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim or n < 1:
        raise InvalidInput(f"{what} dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class DensityMatrix:
    """Validated quantum state: Hermitian, unit trace, PSD to tolerance.

    Construct through :meth:`from_matrix`, which divides by the trace and
    records the factor (printed matrices are often rounded and land slightly
    off unit trace). The eigenvalue floor travels with the instance: rounded
    published states can be ingested with a wider floor, and channels
    propagate it, since a CPTP map never deepens the most negative
    eigenvalue.
    """

    matrix: np.ndarray
    normalization: float = 1.0
    eig_floor: float = EIGVAL_FLOOR

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInput(f"density matrix must be square, got {m.shape}")
        _n_qubits_of_dim(m.shape[0], "state")
        if np.abs(m - m.conj().T).max() > HERMITIAN_ATOL:
            raise InvalidInput("density matrix is not Hermitian to 1e-10")
        if abs(np.trace(m).real - 1.0) > TRACE_ATOL or abs(np.trace(m).imag) > TRACE_ATOL:
            raise InvalidInput("density matrix trace differs from 1 beyond 1e-9")
        low = np.linalg.eigvalsh(m).min()
        if low < self.eig_floor:
            raise InvalidInput(
                f"density matrix eigenvalue {low:.3e} below floor {self.eig_floor:.1e}")
        object.__setattr__(self, "matrix", _readonly(m))

    @classmethod
    def from_matrix(cls, raw: np.ndarray, repair_psd: bool = False,
                    eig_floor: float = EIGVAL_FLOOR) -> "DensityMatrix":
        """Ingest a raw matrix: normalize the trace, optionally repair PSD.

        With ``repair_psd`` the spectrum is clipped at zero and the state
        renormalized; the default is to reject states with an eigenvalue
        below ``eig_floor``.
        """
        m = np.asarray(raw, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInput(f"density matrix must be square, got {m.shape}")
        tr = np.trace(m).real
        if tr <= 0:
            raise InvalidInput(f"density matrix trace {tr} is not positive")
        m = m / tr
        if repair_psd:
            vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
            vals = np.clip(vals, 0.0, None)
            m = (vecs * vals) @ vecs.conj().T
            m = m / np.trace(m).real
            eig_floor = EIGVAL_FLOOR
        return cls(matrix=m, normalization=tr, eig_floor=eig_floor)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits_of_dim(self.dim, "state")


@dataclass(frozen=True)
class KrausChannel:
    """A channel given by Kraus operators; completeness checked to 1e-10."""

    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise InvalidChannel("empty Kraus set")
        dim = ops[0].shape[0]
        for k in ops:
            if k.shape != (dim, dim):
                raise InvalidChannel("Kraus operators must share one square shape")
        _n_qubits_of_dim(dim, "channel")
        acc = sum(k.conj().T @ k for k in ops)
        if np.abs(acc - np.eye(dim)).max() > CPTP_ATOL:
            raise InvalidChannel("Kraus completeness sum differs from identity beyond 1e-10")
        object.__setattr__(self, "kraus_ops", tuple(_readonly(k) for k in ops))

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits_of_dim(self.dim, "channel")


@dataclass(frozen=True)
class PauliChannel:
    """Probabilistic mixture of Pauli conjugations: length-4^n vector on the
    simplex, indexed in the package-wide Pauli order."""

    n: int
    x: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.x, dtype=float)
        if v.shape != (4**self.n,):
            raise DimMismatch(f"expected {4**self.n} coefficients, got shape {v.shape}")
        if v.min() < -1e-12:
            raise InvalidInput(f"negative Pauli coefficient {v.min():.3e}")
        if abs(v.sum() - 1.0) > SIMPLEX_ATOL:
            raise InvalidInput(f"Pauli coefficients sum to {v.sum():.12f}, not 1")
        object.__setattr__(self, "x", _readonly(np.clip(v, 0.0, None)))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "PauliChannel":
        x = np.asarray(x, dtype=float)
        nq = int(round(np.log(x.size) / np.log(4)))
        if x.size < 4 or 4**nq != x.size:
            raise DimMismatch(f"coefficient count {x.size} is not a power of four")
        return cls(n=nq, x=x)

    def to_kraus(self) -> KrausChannel:
        ops = [np.sqrt(xi) * pauli_matrix(pauli_label(i, self.n))
               for i, xi in enumerate(self.x) if xi > 0]
        return KrausChannel(kraus_ops=tuple(ops))

    def ptm_diagonal(self) -> np.ndarray:
        """Transfer eigenvalues f_b = sum_a x_a W_ab (the channel is diagonal
        in the Pauli basis)."""
        return commutation_signs(self.n) @ self.x


@dataclass(frozen=True)
class PTM:
    """Pauli transfer matrix: entry (a, b) = Tr[P_a E(P_b)] / 2^n."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInput(f"PTM must be square, got {m.shape}")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def apply_channel(channel: KrausChannel | PauliChannel, rho: DensityMatrix) -> DensityMatrix:
    """Apply a channel: rho' = sum_k E_k rho E_k†."""
    kraus = channel.to_kraus() if isinstance(channel, PauliChannel) else channel
    if kraus.dim != rho.dim:
        raise DimMismatch(f"channel dim {kraus.dim} != state dim {rho.dim}")
    m = rho.matrix
    out = np.zeros_like(m)
    for k in kraus.kraus_ops:
        out += k @ m @ k.conj().T
    return DensityMatrix.from_matrix(out, eig_floor=rho.eig_floor)


def evolve_matrix(channel: KrausChannel | PauliChannel, m: np.ndarray) -> np.ndarray:
    """Channel action on an arbitrary matrix (no state validation); used to
    build transfer matrices from basis elements."""
    kraus = channel.to_kraus() if isinstance(channel, PauliChannel) else channel
    out = np.zeros_like(m, dtype=complex)
    for k in kraus.kraus_ops:
        out += k @ m @ k.conj().T
    return out


def ptm_of_channel(channel: KrausChannel | PauliChannel) -> PTM:
    """PTM of a channel.

    A Pauli channel is diagonal here, with diagonal f_b = sum_a x_a W_ab
    where W holds the commutation signs; a Kraus channel is evaluated entry
    by entry as Tr[P_a E(P_b)] / 2^n.
    """
    if isinstance(channel, PauliChannel):
        return PTM(matrix=np.diag(channel.ptm_diagonal()))
    n = channel.n_qubits
    labels = pauli_labels(n)
    dim = channel.dim
    mat = np.empty((4**n, 4**n))
    images = [evolve_matrix(channel, pauli_matrix(lb)) for lb in labels]
    for a, la in enumerate(labels):
        pa = pauli_matrix(la)
        for b in range(4**n):
            mat[a, b] = np.trace(pa @ images[b]).real / dim
    return PTM(matrix=mat)


def ptm_of_unitary(u: np.ndarray) -> PTM:
    """PTM of the conjugation rho -> U rho U†."""
    u = np.asarray(u, dtype=complex)
    return ptm_of_channel(KrausChannel(kraus_ops=(u,)))


def measure_probs(rho: DensityMatrix) -> np.ndarray:
    """Computational-basis outcome probabilities p_s = Tr[|s><s| rho]."""
    p = np.diag(rho.matrix).real.copy()
    if p.min() < rho.eig_floor:
        raise InvalidInput(f"diagonal entry {p.min():.3e} below the state's PSD floor")
    p[p < 0] = 0.0
    return p
