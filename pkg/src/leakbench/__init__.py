"""Randomized-benchmarking toolkit for incoherent and coherent leakage errors."""

__version__ = "0.1.0"

from .fitting import (
    DecayModel,
    FitNonConvergence,
    FitResult,
    fit,
    goodness,
    init_double_exp,
    init_single_exp,
    model_by_name,
)
from .gatesets import (
    GateSet,
    NoiseAssignment,
    TwirlProjector,
    average_noise,
    gate_dependence_epsilon,
    gateset_by_id,
    pauli_gateset,
    shelving_gateset,
    signed_design_gateset,
    twirl,
    verify_1design,
)
from .liouville import (
    DEFAULT_TOL,
    Channel,
    ChannelDiagnostics,
    OperatorBasis,
    SpaceSpec,
    VectorizedOperator,
    born_probability,
    channel_from_json,
    channel_to_json,
    choi_matrix,
    coherent_survival,
    compose,
    cp_tp_diagnostics,
    decay_eigenvalues,
    direct_sum,
    elementary_basis,
    incoherent_survival,
    kron,
    leakage_rates,
    subspace_transfer_matrix,
    survival_rate,
    to_liouville,
    vectorize,
)
from .noise import (
    FilterParams,
    RandomStream,
    ShelvingParams,
    averaged_coherent_channel,
    code_rotation,
    filter_channel,
    haar_unitary,
    sample_coherent_noise,
    sample_filter_model,
    shelving_pulse,
)
from .protocol import (
    ConfigError,
    DecayDataset,
    DecayPoint,
    ExperimentConfig,
    SequenceRecord,
    SpamSpec,
    brute_force_expectation,
    decay_parameters,
    predicted_expectation,
    run_experiment,
    run_sequence,
    sample_sequence,
    shot_estimate,
)
