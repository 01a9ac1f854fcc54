"""Gate groups, twirl projectors and gate-dependence diagnostics.

Two named groups are provided: the single-qubit Paulis (for incoherent
leakage, no leakage subspace) and the signed shelving group {P (+) +-1} on a
qutrit (for coherent leakage).  Arbitrary groups of the form {v (+) +-w} can
be assembled from any pair of unitary 1-designs on the two subspaces.
"""

from __future__ import annotations

import json

import numpy as np

from .liouville import (
    DEFAULT_TOL,
    Channel,
    SpaceSpec,
    direct_sum,
    matrix_from_pairs,
    matrix_to_pairs,
    mix,
    vec,
)

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, PAULI_X, PAULI_Y, PAULI_Z)


class GateSet:
    """A finite set of unitaries on H whose averaged action is a group average.

    Construction verifies unitarity and the projector property of the
    averaged conjugation action, which is what sequence averaging relies on.
    """

    def __init__(self, space: SpaceSpec, gates, label: str, validate: bool = True):
        gates = tuple(np.asarray(g, dtype=complex) for g in gates)
        d = space.d
        if not gates:
            raise ValueError("gate set must be nonempty")
        if any(g.shape != (d, d) for g in gates):
            raise ValueError(f"gates must be {d} x {d} for this space")
        self.space = space
        self.gates = gates
        self.label = label
        self._liouvilles: tuple[np.ndarray, ...] | None = None
        if validate:
            self._check_unitary()
            self._check_group_structure()

    def _check_unitary(self, tol: float = DEFAULT_TOL):
        d = self.space.d
        for idx, g in enumerate(self.gates):
            if np.max(np.abs(g @ g.conj().T - np.eye(d))) > tol:
                raise ValueError(f"gate {idx} of {self.label!r} is not unitary")

    def _check_group_structure(self, tol: float = 1e-7):
        # Group structure is verified through the averaged action: the twirl
        # must be idempotent and absorb every member from both sides.  Block
        # sets like {P (+) +-1} close only up to subspace-relative phases
        # ((X (+) -1)(Y (+) -1) = iZ (+) 1), which a literal matrix-closure
        # test would reject but the averaged action cancels.
        avg = np.zeros_like(self.gate_liouvilles[0])
        for g_lio in self.gate_liouvilles:
            avg += g_lio
        avg /= len(self.gates)
        dev = np.max(np.abs(avg @ avg - avg))
        for g_lio in self.gate_liouvilles:
            dev = max(dev, np.max(np.abs(avg @ g_lio - avg)))
            dev = max(dev, np.max(np.abs(g_lio @ avg - avg)))
        if dev > tol:
            raise ValueError(
                f"gate set {self.label!r} does not average like a group "
                f"(deviation {dev:.3e})"
            )

    @property
    def gate_liouvilles(self) -> tuple[np.ndarray, ...]:
        """kron(g, g.conj()) per gate, cached; phase-invariant."""
        if self._liouvilles is None:
            self._liouvilles = tuple(np.kron(g, g.conj()) for g in self.gates)
        return self._liouvilles

    def __len__(self) -> int:
        return len(self.gates)


def pauli_gateset() -> GateSet:
    """{I, X, Y, Z} on a qubit with no leakage subspace."""
    return GateSet(SpaceSpec(d1=2, d2=0), PAULIS, label="pauli")


def shelving_gateset() -> GateSet:
    """{P (+) +1, P (+) -1 : P = I, X, Y, Z} on a qutrit (d1=2, d2=1)."""
    return signed_design_gateset(
        code_gates=PAULIS, leak_gates=[np.eye(1)], label="shelving"
    )


def signed_design_gateset(code_gates, leak_gates, label: str) -> GateSet:
    """All v (+) mu*w for v, w in the given 1-designs and mu = +-1.

    The two input sets must be unitary 1-designs on the code and leakage
    subspaces for the resulting twirl to have the two-projector form.
    """
    code_gates = [np.asarray(v, dtype=complex) for v in code_gates]
    leak_gates = [np.asarray(w, dtype=complex) for w in leak_gates]
    d1 = code_gates[0].shape[0]
    d2 = leak_gates[0].shape[0]
    gates = []
    for v in code_gates:
        for w in leak_gates:
            for mu in (1.0, -1.0):
                gates.append(direct_sum(v, mu * w))
    return GateSet(SpaceSpec(d1=d1, d2=d2), gates, label=label)


class TwirlProjector:
    """The averaged conjugation action of a gate set, in Liouville form."""

    def __init__(self, matrix: np.ndarray, predicted_rank: int):
        self.matrix = matrix
        self.predicted_rank = predicted_rank

    def rank(self, tol: float = 0.5) -> int:
        """Numeric rank; a projector has singular values 0 or 1."""
        return int(np.sum(np.linalg.svd(self.matrix, compute_uv=False) > tol))


def twirl(gs: GateSet) -> TwirlProjector:
    """Average of kron(g, g.conj()) over the set; idempotent for a group."""
    acc = np.zeros_like(gs.gate_liouvilles[0])
    for g_lio in gs.gate_liouvilles:
        acc += g_lio
    predicted = 1 if gs.space.d2 == 0 else 2
    return TwirlProjector(acc / len(gs), predicted_rank=predicted)


def predicted_twirl_matrix(space: SpaceSpec) -> np.ndarray:
    """Closed form of the twirl for a 1-design structure on the space.

    Without leakage: the rank-1 projector onto the vectorized normalized
    identity.  With leakage: the sum of projectors onto the vectorized
    normalized subspace projectors P_H1/sqrt(d1) and P_H2/sqrt(d2).
    """
    if space.d2 == 0:
        v = vec(np.eye(space.d) / np.sqrt(space.d))
        return np.outer(v, v.conj())
    v1 = vec(space.code_projector / np.sqrt(space.d1))
    v2 = vec(space.leak_projector / np.sqrt(space.d2))
    return np.outer(v1, v1.conj()) + np.outer(v2, v2.conj())


def verify_1design(gs: GateSet, tol: float = DEFAULT_TOL) -> bool:
    """True iff the set's twirl equals the closed form for its declared structure."""
    expected = predicted_twirl_matrix(gs.space)
    return bool(np.max(np.abs(twirl(gs).matrix - expected)) <= tol)


class NoiseAssignment:
    """Per-gate error channels for a gate set.

    Either a fixed tuple of channels (one per gate index) or a stochastic
    sampler drawing a fresh channel at every application.
    """

    def __init__(self, space: SpaceSpec, channels=None, sampler=None):
        if (channels is None) == (sampler is None):
            raise ValueError("provide exactly one of channels or sampler")
        if channels is not None:
            channels = tuple(channels)
            if any(ch.space != space for ch in channels):
                raise ValueError("noise channels act on a different space")
        self.space = space
        self.channels = channels
        self.sampler = sampler

    @classmethod
    def uniform(cls, channel: Channel, n_gates: int) -> "NoiseAssignment":
        """The same fixed channel on every gate."""
        return cls(channel.space, channels=[channel] * n_gates)

    @property
    def stochastic(self) -> bool:
        return self.sampler is not None

    def channel_for(self, index: int, rng: np.random.Generator | None = None) -> Channel:
        if self.stochastic:
            if rng is None:
                raise ValueError("stochastic noise needs a random generator")
            return self.sampler.sample(rng)
        return self.channels[index]


def average_noise(na: NoiseAssignment) -> Channel:
    """The uniform mixture of the per-gate channels.

    The Kraus list is the union of member lists scaled by 1/sqrt(n), so the
    Liouville matrix is the arithmetic mean of the members'.
    """
    if na.stochastic:
        raise ValueError(
            "stochastic noise has no fixed average; use a Monte Carlo "
            "average with a declared sample count instead"
        )
    return mix(na.channels)


def gate_dependence_epsilon(gs: GateSet, na: NoiseAssignment) -> float:
    """Proxy upper bound on the worst-case size of gate-dependent noise variation.

    Builds Delta = avg_g [g_lio @ E_g] - twirl @ E_avg in Liouville form and
    returns d * sigma_max(Delta).  This bounds the diamond norm of Delta from
    above but is not the exact value (that would need an SDP); it suffices to
    confirm the O(m * epsilon) remainder is negligible.
    """
    if na.stochastic:
        raise ValueError("gate-dependence is undefined for re-sampled noise")
    if len(na.channels) != len(gs):
        raise ValueError("noise assignment does not match the gate count")
    d2 = gs.space.d ** 2
    delta = np.zeros((d2, d2), dtype=complex)
    for g_lio, ch in zip(gs.gate_liouvilles, na.channels):
        delta += g_lio @ ch.liouville
    delta /= len(gs)
    delta -= twirl(gs).matrix @ average_noise(na).liouville
    sigma_max = float(np.linalg.svd(delta, compute_uv=False)[0])
    return gs.space.d * sigma_max


# ---------------------------------------------------------------------------
# Lookup by id / JSON loading
# ---------------------------------------------------------------------------

_NAMED_GATESETS = {
    "pauli": pauli_gateset,
    "shelving": shelving_gateset,
}


def gateset_by_id(name: str) -> GateSet:
    """Resolve "pauli" or "shelving", or load a custom set from a JSON file."""
    if name in _NAMED_GATESETS:
        return _NAMED_GATESETS[name]()
    if name.endswith(".json"):
        with open(name, "r", encoding="utf-8") as fh:
            return gateset_from_dict(json.load(fh))
    raise ValueError(f"unknown gate set {name!r}")


def gateset_to_dict(gs: GateSet) -> dict:
    return {
        "d1": gs.space.d1,
        "d2": gs.space.d2,
        "label": gs.label,
        "gates": [matrix_to_pairs(g) for g in gs.gates],
    }


def gateset_from_dict(doc: dict) -> GateSet:
    space = SpaceSpec(d1=int(doc["d1"]), d2=int(doc.get("d2", 0)))
    gates = [matrix_from_pairs(p, space.d) for p in doc["gates"]]
    return GateSet(space, gates, label=str(doc.get("label", "custom")))
