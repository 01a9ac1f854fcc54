"""Leakage noise models and reproducible random sampling.

Two models are implemented.  "filter" weakly absorbs the component of a
qubit state orthogonal to a random Bloch direction (incoherent loss from the
full space).  "shelving" composes imperfect shelving/unshelving pulses on a
qutrit with small coherent errors on the code space (coherent leakage into
the auxiliary level); every application draws fresh pulse-angle and
code-rotation errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gatesets import GateSet, NoiseAssignment, PAULI_X, PAULI_Y, PAULI_Z
from .liouville import Channel, SpaceSpec, direct_sum

QUTRIT = SpaceSpec(d1=2, d2=1)

_BIT_GENERATORS = {
    "pcg64": np.random.PCG64,
    "philox": np.random.Philox,
}


@dataclass(frozen=True)
class RandomStream:
    """Specification of a deterministic random stream.

    The same (seed, algorithm, key) triple always yields the same deviate
    sequence, across runs and platforms.  ``child`` derives independent
    sub-streams for workers or per-sequence use.
    """

    seed: int
    algorithm: str = "pcg64"
    key: tuple = ()

    def __post_init__(self):
        if self.algorithm not in _BIT_GENERATORS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; "
                f"choose from {sorted(_BIT_GENERATORS)}"
            )

    def generator(self) -> np.random.Generator:
        """A fresh stateful generator positioned at the start of the stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(_BIT_GENERATORS[self.algorithm](seq))

    def child(self, *key: int) -> "RandomStream":
        return RandomStream(self.seed, self.algorithm, self.key + tuple(key))


def as_generator(rng) -> np.random.Generator:
    """Accept a RandomStream, a Generator, or a plain integer seed."""
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# Filter (incoherent) model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterParams:
    """Strength p and Bloch direction of a weakly filtering channel."""

    p: float
    bloch: tuple

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"filter strength must be in [0, 1], got {self.p}")
        r = np.asarray(self.bloch, dtype=float)
        if r.shape != (3,) or abs(np.linalg.norm(r) - 1.0) > 1e-6:
            raise ValueError("bloch must be a unit 3-vector")
        object.__setattr__(self, "bloch", tuple(float(x) for x in r))


def filter_channel(fp: FilterParams) -> Channel:
    """rho -> (p/4)(I + r.sigma) rho (I + r.sigma) + (1 - p) rho.

    Kraus operators {sqrt(p) (I + r.sigma)/2, sqrt(1-p) I}; trace-decreasing
    for p > 0 (the component orthogonal to the +r state is absorbed).
    """
    rx, ry, rz = fp.bloch
    proj = (np.eye(2, dtype=complex) + rx * PAULI_X + ry * PAULI_Y + rz * PAULI_Z) / 2.0
    kraus = [np.sqrt(fp.p) * proj, np.sqrt(1.0 - fp.p) * np.eye(2, dtype=complex)]
    return Channel(SpaceSpec(d1=2, d2=0), kraus)


def sample_filter_params(rng, p_max: float = 0.05) -> FilterParams:
    """p uniform on [0, p_max], direction uniform on the unit sphere."""
    gen = as_generator(rng)
    p = float(gen.uniform(0.0, p_max))
    v = gen.normal(size=3)
    while np.linalg.norm(v) < 1e-12:
        v = gen.normal(size=3)
    v = v / np.linalg.norm(v)
    return FilterParams(p=p, bloch=tuple(v))


def sample_filter_assignment(rng, n_gates: int = 4):
    """n independent filter channels; returns (assignment, params)."""
    gen = as_generator(rng)
    params = tuple(sample_filter_params(gen) for _ in range(n_gates))
    channels = [filter_channel(fp) for fp in params]
    return NoiseAssignment(SpaceSpec(d1=2, d2=0), channels=channels), params


def sample_filter_model(rng, n_gates: int = 4) -> NoiseAssignment:
    """Gate-dependent filter noise for a qubit 1-design, one draw per gate."""
    assignment, _ = sample_filter_assignment(rng, n_gates)
    return assignment


# ---------------------------------------------------------------------------
# Shelving (coherent) model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShelvingParams:
    """Code-rotation angle phi (fixed) and pulse-angle spread sigma_gamma."""

    phi: float = 0.01
    sigma_gamma: float = 0.06

    def __post_init__(self):
        if self.sigma_gamma < 0:
            raise ValueError("sigma_gamma must be nonnegative")


def shelving_pulse(gamma: float) -> np.ndarray:
    """The imperfect shelving unitary 1 (+) [[i sin g, cos g], [cos g, i sin g]].

    gamma = 0 gives the ideal pulse 1 (+) X swapping the upper two levels.
    """
    s, c = np.sin(gamma), np.cos(gamma)
    block = np.array([[1j * s, c], [c, 1j * s]], dtype=complex)
    return direct_sum(np.eye(1), block)


def code_rotation(phi: float, u: np.ndarray) -> np.ndarray:
    """exp(i phi U X U^dag) on the code space, direct-summed with 1.

    U X U^dag is an involution, so the exponential reduces to the closed form
    cos(phi) I + i sin(phi) U X U^dag.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or np.max(np.abs(u @ u.conj().T - np.eye(2))) > 1e-9:
        raise ValueError("code_rotation needs a 2 x 2 unitary")
    axis = u @ PAULI_X @ u.conj().T
    rot = np.cos(phi) * np.eye(2, dtype=complex) + 1j * np.sin(phi) * axis
    return direct_sum(rot, np.eye(1))


def haar_unitary(dim: int, rng) -> np.ndarray:
    """A Haar-random unitary via QR of a complex Ginibre matrix.

    The R-factor diagonal is rotated to be real-positive, which makes the
    factorization unique and the distribution left-invariant.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    gen = as_generator(rng)
    z = (gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def sample_coherent_noise(sp: ShelvingParams, rng) -> Channel:
    """One draw of the composite shelving-noise unitary on the qutrit.

    Applies a code rotation, an imperfect shelving pulse, another code
    rotation, and an imperfect unshelving pulse; all four error variables are
    drawn independently.  The result is unitary, hence trace-preserving on
    the combined space, but trace-decreasing when restricted to the code
    space for generic pulse angles.
    """
    gen = as_generator(rng)
    gamma1, gamma2 = gen.normal(0.0, sp.sigma_gamma, size=2)
    u1 = haar_unitary(2, gen)
    u2 = haar_unitary(2, gen)
    composite = (
        shelving_pulse(gamma2)
        @ code_rotation(sp.phi, u2)
        @ shelving_pulse(gamma1)
        @ code_rotation(sp.phi, u1)
    )
    return Channel.unitary(QUTRIT, composite)


class ShelvingNoiseSampler:
    """Draws a fresh shelving-noise channel per gate application."""

    def __init__(self, params: ShelvingParams):
        self.params = params
        self.space = QUTRIT

    def sample(self, rng) -> Channel:
        return sample_coherent_noise(self.params, rng)


def _haar_batch(dim: int, n: int, gen: np.random.Generator) -> np.ndarray:
    z = (gen.normal(size=(n, dim, dim)) + 1j * gen.normal(size=(n, dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def _batch_coherent_liouville_sum(
    sp: ShelvingParams, n: int, gen: np.random.Generator
) -> np.ndarray:
    """Sum of n sampled shelving-noise Liouville matrices (9 x 9)."""
    gammas = gen.normal(0.0, sp.sigma_gamma, size=(n, 2))
    u1 = _haar_batch(2, n, gen)
    u2 = _haar_batch(2, n, gen)

    def pulses(g: np.ndarray) -> np.ndarray:
        v = np.zeros((n, 3, 3), dtype=complex)
        v[:, 0, 0] = 1.0
        v[:, 1, 1] = v[:, 2, 2] = 1j * np.sin(g)
        v[:, 1, 2] = v[:, 2, 1] = np.cos(g)
        return v

    def rotations(u: np.ndarray) -> np.ndarray:
        axis = u @ PAULI_X @ np.conj(np.transpose(u, (0, 2, 1)))
        du = np.zeros((n, 3, 3), dtype=complex)
        du[:, :2, :2] = np.cos(sp.phi) * np.eye(2) + 1j * np.sin(sp.phi) * axis
        du[:, 2, 2] = 1.0
        return du

    m = pulses(gammas[:, 1]) @ rotations(u2) @ pulses(gammas[:, 0]) @ rotations(u1)
    return np.einsum("bij,bkl->ikjl", m, m.conj()).reshape(9, 9)


def averaged_coherent_channel(
    sp: ShelvingParams, n_samples: int, rng, batch_size: int = 50_000
) -> Channel:
    """Monte Carlo average of the shelving-noise channel over its parameters.

    The Liouville matrix is the mean over n_samples independent draws; the
    returned channel serves as the theory oracle for the coherent survival
    rate.  Sampling is batched and fully determined by the stream.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    gen = as_generator(rng)
    total = np.zeros((9, 9), dtype=complex)
    remaining = n_samples
    while remaining > 0:
        b = min(batch_size, remaining)
        total += _batch_coherent_liouville_sum(sp, b, gen)
        remaining -= b
    return Channel.from_liouville(QUTRIT, total / n_samples)


# ---------------------------------------------------------------------------
# Noise model lookup by id
# ---------------------------------------------------------------------------

#: Derivation tag for model-parameter sampling within a root stream.
PARAMS_KEY = 0


def build_noise_model(
    spec: dict | None, gateset: GateSet, stream: RandomStream
) -> NoiseAssignment | None:
    """Construct the noise assignment described by a config mapping.

    Supported ids: "none" (or null spec) for noiseless operation, "filter"
    with params {"seed": int} or {"gates": [{"p": float, "r": [x, y, z]}]},
    and "shelving" with params {"phi": float, "sigma_gamma": float}.  An
    explicit "seed" in params overrides the stream used for parameter draws.
    """
    if spec is None:
        return None
    model_id = spec.get("id")
    params = dict(spec.get("params") or {})
    if model_id in (None, "none"):
        return None
    if model_id == "filter":
        if "gates" in params:
            fps = [
                FilterParams(p=float(g["p"]), bloch=tuple(float(x) for x in g["r"]))
                for g in params["gates"]
            ]
            if len(fps) != len(gateset):
                raise ValueError("filter params must list one entry per gate")
            channels = [filter_channel(fp) for fp in fps]
            return NoiseAssignment(gateset.space, channels=channels)
        if "seed" in params:
            stream = RandomStream(int(params["seed"]))
        assignment, _ = sample_filter_assignment(
            stream.child(PARAMS_KEY), n_gates=len(gateset)
        )
        if assignment.space != gateset.space:
            raise ValueError("filter noise applies to qubit gate sets only")
        return assignment
    if model_id == "shelving":
        sp = ShelvingParams(
            phi=float(params.get("phi", 0.01)),
            sigma_gamma=float(params.get("sigma_gamma", 0.06)),
        )
        if gateset.space != QUTRIT:
            raise ValueError("shelving noise acts on the qutrit space (d1=2, d2=1)")
        return NoiseAssignment(QUTRIT, sampler=ShelvingNoiseSampler(sp))
    raise ValueError(f"unknown noise model {model_id!r}")
