"""Channel algebra in the Liouville (superoperator) representation.

Operators live on a Hilbert space H = H1 (+) H2, where H1 is the code
(computational) subspace and H2 an optional leakage subspace.  Channels are
stored as Kraus-operator lists; their Liouville matrices are derived on
demand in the canonical matrix-unit basis |i><j| with row-major (i, j)
ordering, so that a density operator vectorizes to ``rho.reshape(-1)`` and a
unitary U acts as kron(U, U.conj()).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

#: Global default tolerance for positivity / orthonormality / equality checks.
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SpaceSpec:
    """Dimensions of the code subspace H1, leakage subspace H2 and H = H1 (+) H2."""

    d1: int
    d2: int = 0

    def __post_init__(self):
        if self.d1 < 1:
            raise ValueError(f"code dimension must be >= 1, got {self.d1}")
        if self.d2 < 0:
            raise ValueError(f"leakage dimension must be >= 0, got {self.d2}")

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def code_projector(self) -> np.ndarray:
        """Projector onto H1 as a d x d matrix."""
        p = np.zeros((self.d, self.d), dtype=complex)
        p[: self.d1, : self.d1] = np.eye(self.d1)
        return p

    @property
    def leak_projector(self) -> np.ndarray:
        """Projector onto H2 as a d x d matrix (zero when d2 = 0)."""
        p = np.zeros((self.d, self.d), dtype=complex)
        p[self.d1 :, self.d1 :] = np.eye(self.d2)
        return p


class OperatorBasis:
    """A trace-orthonormal basis {A_i} for the d x d operator space.

    Orthonormality Tr[A_i^dag A_j] = delta_ij is checked at construction.
    """

    def __init__(self, elements, label: str, tol: float = DEFAULT_TOL):
        elements = tuple(np.asarray(a, dtype=complex) for a in elements)
        d = elements[0].shape[0]
        if len(elements) != d * d or any(a.shape != (d, d) for a in elements):
            raise ValueError("basis must contain d^2 elements of shape (d, d)")
        gram = OperatorBasis._gram(elements)
        if np.max(np.abs(gram - np.eye(d * d))) > tol:
            raise ValueError(f"basis {label!r} is not trace-orthonormal within {tol}")
        self.elements = elements
        self.label = label
        self.dim = d

    @staticmethod
    def _gram(elements) -> np.ndarray:
        n = len(elements)
        g = np.empty((n, n), dtype=complex)
        for i, a in enumerate(elements):
            for j, b in enumerate(elements):
                g[i, j] = np.trace(a.conj().T @ b)
        return g

    def gram_matrix(self) -> np.ndarray:
        """Matrix of overlaps Tr[A_i^dag A_j]; the identity for a valid basis."""
        return self._gram(self.elements)

    def __len__(self) -> int:
        return len(self.elements)


def elementary_basis(space: SpaceSpec) -> OperatorBasis:
    """The d^2 matrix units |i><j| in row-major order of (i, j)."""
    d = space.d
    elements = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            elements.append(e)
    return OperatorBasis(elements, label=f"elementary-{d}")


def normalized_pauli_basis() -> OperatorBasis:
    """The single-qubit basis {I, X, Y, Z} / sqrt(2)."""
    s = 1.0 / np.sqrt(2.0)
    i2 = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.array([[1, 0], [0, -1]], dtype=complex)
    return OperatorBasis([s * i2, s * x, s * y, s * z], label="pauli-normalized")


def vec(op: np.ndarray) -> np.ndarray:
    """Row-major vectorization; coordinates of op in the elementary basis."""
    return np.asarray(op, dtype=complex).reshape(-1)


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=complex).reshape(d, d)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, (a kron b)[i*rB+k, j*cB+l] = a[i,j] b[k,l]."""
    return np.kron(np.asarray(a), np.asarray(b))


def direct_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Block-diagonal [[a, 0], [0, b]] of two square matrices."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
        raise ValueError("direct_sum requires square blocks")
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n + m, n + m), dtype=complex)
    out[:n, :n] = a
    out[n:, n:] = b
    return out


class Channel:
    """A completely positive map stored as a list of d x d Kraus operators.

    The Kraus list is ground truth; the Liouville matrix (elementary basis)
    is derived lazily and cached.  Values are immutable after construction.
    """

    def __init__(self, space: SpaceSpec, kraus):
        kraus = tuple(np.asarray(k, dtype=complex) for k in kraus)
        if not kraus:
            raise ValueError("channel needs at least one Kraus operator")
        d = space.d
        if any(k.shape != (d, d) for k in kraus):
            raise ValueError(f"Kraus operators must be {d} x {d} for this space")
        self.space = space
        self.kraus = kraus
        self._liouville: np.ndarray | None = None

    @classmethod
    def identity(cls, space: SpaceSpec) -> "Channel":
        return cls(space, [np.eye(space.d, dtype=complex)])

    @classmethod
    def unitary(cls, space: SpaceSpec, u: np.ndarray) -> "Channel":
        return cls(space, [u])

    @classmethod
    def from_liouville(
        cls, space: SpaceSpec, matrix: np.ndarray, cutoff: float = 1e-12
    ) -> "Channel":
        """Recover a Kraus list from an elementary-basis Liouville matrix.

        Eigendecomposes the Choi matrix; eigenvalues below ``cutoff`` are
        dropped, so the input must be completely positive up to that scale.
        """
        d = space.d
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (d * d, d * d):
            raise ValueError(f"Liouville matrix must be {d*d} x {d*d}")
        choi = liouville_to_choi(matrix, d)
        herm_err = np.max(np.abs(choi - choi.conj().T))
        if herm_err > 1e-8:
            raise ValueError(f"Choi matrix not Hermitian (deviation {herm_err:.3e})")
        w, v = np.linalg.eigh((choi + choi.conj().T) / 2.0)
        if w.min() < -1e-8:
            raise ValueError(f"map is not CP (Choi eigenvalue {w.min():.3e})")
        kraus = []
        for lam, col in zip(w, v.T):
            if lam > cutoff:
                # Choi index (i, a) holds K[a, i]: unvec then transpose.
                kraus.append(np.sqrt(lam) * col.reshape(d, d).T)
        if not kraus:
            kraus = [np.zeros((d, d), dtype=complex)]
        return cls(space, kraus)

    @property
    def liouville(self) -> np.ndarray:
        """The d^2 x d^2 matrix sum_k kron(K_k, K_k.conj()), cached."""
        if self._liouville is None:
            d2 = self.space.d ** 2
            acc = np.zeros((d2, d2), dtype=complex)
            for k in self.kraus:
                acc += np.kron(k, k.conj())
            self._liouville = acc
        return self._liouville

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """sum_k K_k rho K_k^dag."""
        rho = np.asarray(rho, dtype=complex)
        out = np.zeros_like(rho)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return out

    def kraus_sum(self) -> np.ndarray:
        """sum_k K_k^dag K_k; equals the identity iff trace-preserving."""
        acc = np.zeros((self.space.d, self.space.d), dtype=complex)
        for k in self.kraus:
            acc += k.conj().T @ k
        return acc


def compose(after: Channel, before: Channel) -> Channel:
    """The channel applying ``before`` then ``after``; Kraus products compose."""
    if after.space != before.space:
        raise ValueError("channels act on different spaces")
    return Channel(after.space, [a @ b for a in after.kraus for b in before.kraus])


def mix(channels, weights=None) -> Channel:
    """Convex mixture sum_i w_i E_i, as the Kraus union scaled by sqrt(w_i)."""
    channels = list(channels)
    space = channels[0].space
    if any(ch.space != space for ch in channels):
        raise ValueError("channels act on different spaces")
    if weights is None:
        weights = [1.0 / len(channels)] * len(channels)
    kraus = []
    for w, ch in zip(weights, channels):
        kraus.extend(np.sqrt(w) * k for k in ch.kraus)
    return Channel(space, kraus)


def to_liouville(ch: Channel, basis: OperatorBasis | None = None) -> np.ndarray:
    """Liouville matrix of ``ch`` with entries Tr[A_i^dag E(A_j)].

    With no basis this is the cached canonical (matrix-unit) form; any other
    trace-orthonormal basis is reached by the unitary change of frame
    T[i, :] = vec(A_i).conj(), which is the identity for matrix units.
    """
    lio = ch.liouville
    if basis is None:
        return lio.copy()
    if basis.dim != ch.space.d:
        raise ValueError("basis dimension does not match channel space")
    t = np.array([vec(a).conj() for a in basis.elements])
    return t @ lio @ t.conj().T


@dataclass(frozen=True)
class VectorizedOperator:
    """Coordinates of a state (column) or measurement effect (row) in a basis."""

    kind: str  # "state-column" | "effect-row"
    coords: np.ndarray
    basis_label: str


def vectorize(
    op: np.ndarray, kind: str, basis: OperatorBasis
) -> VectorizedOperator:
    """Coordinates Tr[A_i^dag rho] for states, Tr[M^dag A_i] for effects."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (basis.dim, basis.dim):
        raise ValueError("operator dimension does not match basis")
    if kind == "state-column":
        coords = np.array([np.trace(a.conj().T @ op) for a in basis.elements])
    elif kind == "effect-row":
        coords = np.array([np.trace(op.conj().T @ a) for a in basis.elements])
    else:
        raise ValueError(f"unknown vectorization kind {kind!r}")
    return VectorizedOperator(kind=kind, coords=coords, basis_label=basis.label)


def born_probability(effect: VectorizedOperator, state: VectorizedOperator) -> complex:
    """(M|rho) = sum_i effect_i state_i = Tr[M^dag rho]."""
    if effect.kind != "effect-row" or state.kind != "state-column":
        raise ValueError("born_probability needs an effect row and a state column")
    if effect.basis_label != state.basis_label:
        raise ValueError("effect and state are expressed in different bases")
    return complex(np.dot(effect.coords, state.coords))


def survival_rate(rho: np.ndarray, ch: Channel) -> float:
    """Tr[P_H1 E(rho)] / Tr[rho], the probability of remaining detectable in H1."""
    rho = np.asarray(rho, dtype=complex)
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("survival rate needs an input with positive trace")
    p1 = ch.space.code_projector
    return float(np.trace(p1 @ ch.apply(rho)).real / tr)


def incoherent_survival(ch: Channel) -> float:
    """Tr[E(I/d)]; the average probability of not being lost from H entirely."""
    d = ch.space.d
    return float(np.trace(ch.apply(np.eye(d) / d)).real)


def subspace_transfer_matrix(ch: Channel) -> np.ndarray:
    """The 2 x 2 block of the twirled channel on span{P_H1, P_H2}.

    Entry (a, b) is (A_a| E |A_b) for the normalized projector vectors
    A_1 = P_H1 / sqrt(d1), A_2 = P_H2 / sqrt(d2).  Its eigenvalues drive the
    double-exponential decay of the coherent-leakage protocol.
    """
    space = ch.space
    if space.d2 < 1:
        raise ValueError("transfer matrix needs a leakage subspace (d2 >= 1)")
    d1, d2 = space.d1, space.d2
    p1, p2 = space.code_projector, space.leak_projector
    e_p1, e_p2 = ch.apply(p1), ch.apply(p2)
    s = np.empty((2, 2), dtype=complex)
    s[0, 0] = np.trace(p1 @ e_p1) / d1
    s[1, 1] = np.trace(p2 @ e_p2) / d2
    s[0, 1] = np.trace(p1 @ e_p2) / np.sqrt(d1 * d2)
    s[1, 0] = np.trace(p2 @ e_p1) / np.sqrt(d1 * d2)
    if np.max(np.abs(s.imag)) < DEFAULT_TOL:
        return s.real.astype(float)
    return s


def decay_eigenvalues(block: np.ndarray):
    """Eigenvalues (plus, minus) of a 2 x 2 block.

    plus/minus = tr/2 +/- sqrt((s11 - s22)^2 + 4 s12 s21) / 2; their sum is
    exactly the trace.  Real values are returned as floats.
    """
    block = np.asarray(block)
    s11, s22 = block[0, 0], block[1, 1]
    half_tr = (s11 + s22) / 2.0
    half_gap = np.sqrt(complex((s11 - s22) ** 2 + 4.0 * block[0, 1] * block[1, 0])) / 2.0
    plus, minus = half_tr + half_gap, half_tr - half_gap
    if abs(plus.imag) < DEFAULT_TOL and abs(minus.imag) < DEFAULT_TOL:
        return float(plus.real), float(minus.real)
    return complex(plus), complex(minus)


def coherent_survival(ch: Channel) -> float:
    """Tr[P_H1 E(P_H1/d1)] + Tr[P_H2 E(P_H2/d2)]; equals 2 for the identity."""
    s = subspace_transfer_matrix(ch)
    return float(np.real(s[0, 0] + s[1, 1]))


def leakage_rates(ch: Channel):
    """(incoherent, coherent) leakage rates.

    Incoherent: 1 - Tr[E(I/d)].  Coherent: Tr[E(I/d)] minus the coherent
    survival rate; only defined with a leakage subspace (None when d2 = 0).
    Note the verbatim definitions give -1 for the identity channel, since an
    ideal channel has coherent survival 2.
    """
    s_inc = incoherent_survival(ch)
    l_coh = s_inc - coherent_survival(ch) if ch.space.d2 >= 1 else None
    return 1.0 - s_inc, l_coh


def choi_matrix(ch: Channel) -> np.ndarray:
    """Choi = sum_ij |i><j| (x) E(|i><j|), built from the Liouville matrix."""
    return liouville_to_choi(ch.liouville, ch.space.d)


def liouville_to_choi(lio: np.ndarray, d: int) -> np.ndarray:
    """Reshuffle Choi[(i,a),(j,b)] = L[(a,b),(i,j)]."""
    return (
        np.asarray(lio, dtype=complex)
        .reshape(d, d, d, d)
        .transpose(2, 0, 3, 1)
        .reshape(d * d, d * d)
    )


@dataclass(frozen=True)
class ChannelDiagnostics:
    is_cp: bool
    is_trace_nonincreasing: bool
    is_trace_preserving: bool
    choi_eigenvalue_min: float
    kraus_sum_eigenvalue_max: float
    trace_preserving_deviation: float


def cp_tp_diagnostics(ch: Channel, tol: float = DEFAULT_TOL) -> ChannelDiagnostics:
    """Check complete positivity, trace-nonincrease and trace preservation."""
    choi = choi_matrix(ch)
    choi_min = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2.0).min())
    ks = ch.kraus_sum()
    ks_eigs = np.linalg.eigvalsh((ks + ks.conj().T) / 2.0)
    tp_dev = float(np.max(np.abs(ks - np.eye(ch.space.d))))
    return ChannelDiagnostics(
        is_cp=choi_min >= -tol,
        is_trace_nonincreasing=float(ks_eigs.max()) <= 1.0 + tol,
        is_trace_preserving=tp_dev <= tol,
        choi_eigenvalue_min=choi_min,
        kraus_sum_eigenvalue_max=float(ks_eigs.max()),
        trace_preserving_deviation=tp_dev,
    )


# ---------------------------------------------------------------------------
# JSON serialization: {d1, d2, kraus: [[[re, im], ...row-major...], ...]}
# ---------------------------------------------------------------------------


def matrix_to_pairs(m: np.ndarray) -> list:
    """Row-major list of [re, im] pairs."""
    return [[float(z.real), float(z.imag)] for z in np.asarray(m, dtype=complex).reshape(-1)]


def matrix_from_pairs(pairs, d: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in pairs])
    if flat.size != d * d:
        raise ValueError(f"expected {d*d} entries, got {flat.size}")
    return flat.reshape(d, d)


def channel_to_dict(ch: Channel) -> dict:
    return {
        "d1": ch.space.d1,
        "d2": ch.space.d2,
        "kraus": [matrix_to_pairs(k) for k in ch.kraus],
    }


def channel_from_dict(doc: dict) -> Channel:
    space = SpaceSpec(d1=int(doc["d1"]), d2=int(doc.get("d2", 0)))
    kraus = [matrix_from_pairs(p, space.d) for p in doc["kraus"]]
    return Channel(space, kraus)


def channel_to_json(ch: Channel) -> str:
    return json.dumps(channel_to_dict(ch))


def channel_from_json(text: str) -> Channel:
    return channel_from_dict(json.loads(text))
