"""The randomized benchmarking engine.

Random gate sequences are sampled uniformly, executed exactly in the
Liouville representation (noise channel first, ideal gate second at every
step, no inverse gate before measurement), and aggregated per sequence
length into a decay dataset.  A brute-force enumeration over all sequences
of a given length serves as an independent oracle for the fitted decay
models.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gatesets import GateSet, NoiseAssignment, gateset_by_id
from .liouville import (
    DEFAULT_TOL,
    Channel,
    SpaceSpec,
    channel_from_dict,
    channel_to_dict,
    decay_eigenvalues,
    incoherent_survival,
    matrix_from_pairs,
    matrix_to_pairs,
    subspace_transfer_matrix,
    vec,
)
from .noise import RandomStream, as_generator, build_noise_model

#: Guard on the number of sequences a brute-force enumeration may visit.
BRUTE_FORCE_LIMIT = 10_000_000

# Sub-stream tags: sequence/shot draws vs. per-step noise draws.
_SEQ_KEY = 0
_NOISE_KEY = 1


class ConfigError(ValueError):
    """Raised when an experiment configuration is malformed."""


@dataclass(frozen=True)
class SpamSpec:
    """State preparation and measurement: initial state, effect, optional channels."""

    rho: np.ndarray
    effect: np.ndarray
    prep: Channel | None = None
    meas: Channel | None = None

    @classmethod
    def ideal(cls, space: SpaceSpec) -> "SpamSpec":
        """rho = |0><0| and effect = P_H1, with no SPAM channels."""
        rho = np.zeros((space.d, space.d), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho=rho, effect=space.code_projector)

    def state_vector(self) -> np.ndarray:
        v = vec(self.rho)
        if self.prep is not None:
            v = self.prep.liouville @ v
        return v

    def effect_vector(self) -> np.ndarray:
        v = vec(self.effect).conj()
        if self.meas is not None:
            v = v @ self.meas.liouville
        return v


def spam_from_dict(doc: dict | None, space: SpaceSpec) -> SpamSpec:
    if doc is None:
        return SpamSpec.ideal(space)
    ideal = SpamSpec.ideal(space)
    rho = matrix_from_pairs(doc["rho"], space.d) if "rho" in doc else ideal.rho
    eff = matrix_from_pairs(doc["effect"], space.d) if "effect" in doc else ideal.effect
    prep = channel_from_dict(doc["prep"]) if doc.get("prep") else None
    meas = channel_from_dict(doc["meas"]) if doc.get("meas") else None
    for ch in (prep, meas):
        if ch is not None and ch.space != space:
            raise ConfigError("SPAM channel acts on the wrong space")
    return SpamSpec(rho=rho, effect=eff, prep=prep, meas=meas)


def spam_to_dict(spam: SpamSpec) -> dict:
    doc = {
        "rho": matrix_to_pairs(spam.rho),
        "effect": matrix_to_pairs(spam.effect),
    }
    if spam.prep is not None:
        doc["prep"] = channel_to_dict(spam.prep)
    if spam.meas is not None:
        doc["meas"] = channel_to_dict(spam.meas)
    return doc


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one benchmarking run."""

    gateset: str
    noise: dict | None
    m_list: tuple
    n_sequences: int
    seed: int
    shots: int | None = None
    spam: dict | None = None

    def __post_init__(self):
        if not self.m_list or any(int(m) < 1 for m in self.m_list):
            raise ConfigError("m_list must be nonempty with all lengths >= 1")
        object.__setattr__(self, "m_list", tuple(int(m) for m in self.m_list))
        if self.n_sequences < 1:
            raise ConfigError("n_sequences must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1 when given")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return cls(
                gateset=str(doc["gateset"]),
                noise=doc.get("noise"),
                m_list=tuple(doc["m_list"]),
                n_sequences=int(doc["n_sequences"]),
                seed=int(doc["seed"]),
                shots=None if doc.get("shots") is None else int(doc["shots"]),
                spam=doc.get("spam"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad experiment config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "gateset": self.gateset,
            "noise": self.noise,
            "m_list": list(self.m_list),
            "n_sequences": self.n_sequences,
            "shots": self.shots,
            "seed": self.seed,
            "spam": self.spam,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SequenceRecord:
    """One executed sequence: length, gate indices (0-based), probability."""

    m: int
    indices: tuple
    probability: float

    def __post_init__(self):
        if len(self.indices) != self.m:
            raise ValueError("index list length must equal the sequence length")
        if not -DEFAULT_TOL <= self.probability <= 1.0 + DEFAULT_TOL:
            raise ValueError(f"probability {self.probability} outside [0, 1]")


@dataclass(frozen=True)
class DecayPoint:
    m: int
    mean: float
    sem: float
    n: int


@dataclass
class DecayDataset:
    """Per-sequence-length survival statistics plus run provenance."""

    points: tuple
    provenance: dict = field(default_factory=dict)

    @property
    def ms(self) -> np.ndarray:
        return np.array([p.m for p in self.points], dtype=float)

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.points], dtype=float)

    @property
    def sems(self) -> np.ndarray:
        return np.array([p.sem for p in self.points], dtype=float)

    @property
    def counts(self) -> np.ndarray:
        return np.array([p.n for p in self.points], dtype=int)

    @classmethod
    def from_arrays(cls, ms, means, sems=None, counts=None, provenance=None):
        ms = list(ms)
        sems = [0.0] * len(ms) if sems is None else list(sems)
        counts = [1] * len(ms) if counts is None else list(counts)
        points = tuple(
            DecayPoint(m=int(m), mean=float(mu), sem=float(s), n=int(n))
            for m, mu, s, n in zip(ms, means, sems, counts)
        )
        return cls(points=points, provenance=provenance or {})

    def to_csv(self, path: str):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "mean", "sem", "n"])
            for p in self.points:
                writer.writerow([p.m, repr(p.mean), repr(p.sem), p.n])

    @classmethod
    def from_csv(cls, path: str) -> "DecayDataset":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        points = tuple(
            DecayPoint(
                m=int(r["m"]), mean=float(r["mean"]), sem=float(r["sem"]), n=int(r["n"])
            )
            for r in rows
        )
        return cls(points=points)

    def to_json(self, path: str):
        doc = {
            "dataset": [
                {"m": p.m, "mean": p.mean, "sem": p.sem, "n": p.n} for p in self.points
            ],
            "provenance": self.provenance,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "DecayDataset":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        points = tuple(
            DecayPoint(m=int(r["m"]), mean=float(r["mean"]), sem=float(r["sem"]), n=int(r["n"]))
            for r in doc["dataset"]
        )
        return cls(points=points, provenance=doc.get("provenance", {}))


# ---------------------------------------------------------------------------
# Sequence execution
# ---------------------------------------------------------------------------


def sample_sequence(m: int, n_gates: int, rng) -> tuple:
    """m independent gate indices, uniform on {0, ..., n_gates - 1}."""
    if m < 1 or n_gates < 1:
        raise ValueError("sequence length and gate count must be >= 1")
    gen = as_generator(rng)
    return tuple(int(i) for i in gen.integers(0, n_gates, size=m))


def run_sequence(
    indices,
    gateset: GateSet,
    noise: NoiseAssignment | None,
    spam: SpamSpec | None = None,
    rng=None,
) -> float:
    """Exact survival probability of one gate sequence.

    Each step applies the error channel for the sampled gate and then the
    ideal gate; stochastic noise draws a fresh channel per step from ``rng``.
    The probability is the Born pairing of the (possibly SPAM-corrupted)
    effect row with the evolved state column.
    """
    if noise is not None and noise.space != gateset.space:
        raise ValueError("noise assignment acts on a different space")
    if spam is None:
        spam = SpamSpec.ideal(gateset.space)
    gate_lios = gateset.gate_liouvilles
    state = spam.state_vector()
    for idx in indices:
        if not 0 <= idx < len(gateset):
            raise ValueError(f"gate index {idx} out of range")
        if noise is not None:
            state = noise.channel_for(idx, rng).liouville @ state
        state = gate_lios[idx] @ state
    return float(np.real(spam.effect_vector() @ state))


def shot_estimate(p: float, shots: int, rng) -> float:
    """Finite-sampling estimate of a probability: successes / shots."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not -DEFAULT_TOL <= p <= 1.0 + DEFAULT_TOL:
        raise ValueError(f"probability {p} outside [0, 1]")
    gen = as_generator(rng)
    return float(gen.binomial(shots, min(max(p, 0.0), 1.0))) / shots


def _experiment_components(cfg: ExperimentConfig):
    gs = gateset_by_id(cfg.gateset)
    noise_root = _noise_root(cfg)
    noise = build_noise_model(cfg.noise, gs, noise_root)
    spam = spam_from_dict(cfg.spam, gs.space)
    return gs, noise, spam, noise_root


def _noise_root(cfg: ExperimentConfig) -> RandomStream:
    params = (cfg.noise or {}).get("params") or {}
    if "seed" in params:
        return RandomStream(int(params["seed"]))
    return RandomStream(cfg.seed)


def _single_probability(cfg, gs, noise, spam, noise_root, m: int, j: int) -> float:
    gen = RandomStream(cfg.seed).child(m, j, _SEQ_KEY).generator()
    indices = sample_sequence(m, len(gs), gen)
    noise_gen = None
    if noise is not None and noise.stochastic:
        noise_gen = noise_root.child(m, j, _NOISE_KEY).generator()
    p = run_sequence(indices, gs, noise, spam, rng=noise_gen)
    if cfg.shots is not None:
        p = shot_estimate(p, cfg.shots, gen)
    return SequenceRecord(m=m, indices=indices, probability=p).probability


def _sequence_block(cfg_dict: dict, m: int, j_start: int, j_stop: int):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    gs, noise, spam, noise_root = _experiment_components(cfg)
    return [
        _single_probability(cfg, gs, noise, spam, noise_root, m, j)
        for j in range(j_start, j_stop)
    ]


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> DecayDataset:
    """Run the full protocol described by ``cfg``.

    Sequence j at length m draws from a stream derived from (seed, m, j), so
    results are reproducible under partial re-runs and parallel execution.
    """
    if jobs > 1:
        probabilities = _run_parallel(cfg, jobs)
    else:
        gs, noise, spam, noise_root = _experiment_components(cfg)
        probabilities = {
            m: [
                _single_probability(cfg, gs, noise, spam, noise_root, m, j)
                for j in range(cfg.n_sequences)
            ]
            for m in cfg.m_list
        }
    points = []
    for m in cfg.m_list:
        ps = np.array(probabilities[m], dtype=float)
        sem = float(ps.std(ddof=1) / np.sqrt(len(ps))) if len(ps) > 1 else 0.0
        points.append(DecayPoint(m=m, mean=float(ps.mean()), sem=sem, n=len(ps)))
    from . import __version__

    provenance = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "tool_version": __version__,
    }
    return DecayDataset(points=tuple(points), provenance=provenance)


def _run_parallel(cfg: ExperimentConfig, jobs: int) -> dict:
    cfg_dict = cfg.to_dict()
    chunk = max(1, -(-cfg.n_sequences // jobs))
    tasks = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for m in cfg.m_list:
            for start in range(0, cfg.n_sequences, chunk):
                stop = min(start + chunk, cfg.n_sequences)
                tasks.append((m, pool.submit(_sequence_block, cfg_dict, m, start, stop)))
        probabilities: dict = {m: [] for m in cfg.m_list}
        for m, fut in tasks:  # submission order preserves (m, j) order
            probabilities[m].extend(fut.result())
    return probabilities


# ---------------------------------------------------------------------------
# Exact oracle and closed-form predictions
# ---------------------------------------------------------------------------


def brute_force_expectation(
    m: int,
    gateset: GateSet,
    noise: NoiseAssignment | None,
    spam: SpamSpec | None = None,
) -> float:
    """Exact sequence-averaged probability by enumerating all |G|^m sequences."""
    if noise is not None and noise.stochastic:
        raise ValueError("brute force needs a deterministic noise assignment")
    a = len(gateset)
    if a ** m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{a}^{m} sequences exceed the enumeration guard")
    if spam is None:
        spam = SpamSpec.ideal(gateset.space)
    steps = []
    for idx, g_lio in enumerate(gateset.gate_liouvilles):
        if noise is None:
            steps.append(g_lio)
        else:
            steps.append(g_lio @ noise.channels[idx].liouville)
    effect = spam.effect_vector()
    state0 = spam.state_vector()
    total = 0.0
    for seq in itertools.product(range(a), repeat=m):
        state = state0
        for idx in seq:
            state = steps[idx] @ state
        total += float(np.real(effect @ state))
    return total / a ** m


def decay_parameters(
    gateset: GateSet, channel: Channel, spam: SpamSpec | None = None
) -> dict:
    """Closed-form decay constants for gate-independent noise.

    Without a leakage subspace the expectation is amplitude * decay^(m-1)
    with the decay equal to the incoherent survival rate.  With one, it is
    amp_plus * decay_plus^(m-1) + amp_minus * decay_minus^(m-1) with the
    decays the eigenvalues of the subspace transfer matrix and amplitudes
    fixed by SPAM and the eigenvector frame.
    """
    space = gateset.space
    if channel.space != space:
        raise ValueError("channel acts on a different space")
    if spam is None:
        spam = SpamSpec.ideal(space)
    effect = spam.effect_vector()
    state1 = channel.liouville @ spam.state_vector()
    if space.d2 == 0:
        a1 = vec(np.eye(space.d) / np.sqrt(space.d))
        amplitude = float(np.real((effect @ a1) * (a1.conj() @ state1)))
        return {"amplitude": amplitude, "decay": incoherent_survival(channel)}
    a1 = vec(space.code_projector / np.sqrt(space.d1))
    a2 = vec(space.leak_projector / np.sqrt(space.d2))
    e = np.array([effect @ a1, effect @ a2])
    r = np.array([a1.conj() @ state1, a2.conj() @ state1])
    s = subspace_transfer_matrix(channel)
    lam_plus, lam_minus = decay_eigenvalues(s)
    evals, evecs = np.linalg.eig(s)
    order = [int(np.argmin(np.abs(evals - lam_plus)))]
    order.append(1 - order[0])
    evals = evals[order]
    evecs = evecs[:, order]
    left = e @ evecs
    right = np.linalg.solve(evecs, r)
    return {
        "amp_plus": float(np.real(left[0] * right[0])),
        "amp_minus": float(np.real(left[1] * right[1])),
        "decay_plus": lam_plus,
        "decay_minus": lam_minus,
    }


def predicted_expectation(
    m: int, gateset: GateSet, channel: Channel, spam: SpamSpec | None = None
) -> float:
    """Evaluate the closed-form decay model at sequence length m."""
    params = decay_parameters(gateset, channel, spam)
    if "amplitude" in params:
        return params["amplitude"] * params["decay"] ** (m - 1)
    return (
        params["amp_plus"] * params["decay_plus"] ** (m - 1)
        + params["amp_minus"] * params["decay_minus"] ** (m - 1)
    )
