"""Probabilistic error cancellation under drifting Pauli noise.

Simulates two-qubit damping noise whose decoherence times degrade over time,
tracks the resulting Pauli channel with Bayesian MAP updates from measurement
counts, and cancels it with quasi-probability sampling. Accuracy is scored by
Hellinger distance to the ideal output histogram.
"""

from .errors import (
    ConfigError,
    DegenerateHistogram,
    DegenerateSeries,
    DimMismatch,
    DriftPecError,
    IncompleteGrid,
    InfeasibleTimes,
    InvalidChannel,
    InvalidInput,
    InvalidLabel,
    InvalidParam,
    InvalidPeriod,
    InvalidTime,
    NonInvertibleChannel,
)
from .experiment import (
    ExperimentConfig,
    PeriodReport,
    config_from_mapping,
    config_from_yaml,
    default_schedule,
    default_test_state,
    emit_reports,
    ideal_histogram,
    ingest_t1t2_csv,
    run_experiment,
)
from .inference import (
    CalibrationModel,
    MapEstimate,
    MapOptions,
    ShotRecord,
    log_likelihood,
    log_posterior,
    map_estimate,
    map_objective,
    predicted_probs,
    roll_prior,
    simulate_shots,
)
from .noise import (
    APDParams,
    DecoherenceTimes,
    NoiseSchedule,
    SingleQubitTwirled,
    apd_channel,
    apd_channel_from_times,
    decay_probability,
    pauli_twirl,
    schedule_channel,
    separable_product,
    tphi_from_bloch_redfield,
    twirled_apd_coeffs,
)
from .pec import (
    MitigatedResult,
    NoisyBasis,
    QuasiProb,
    clip_renormalize,
    noisy_basis,
    pec_run,
    quasiprob_decompose,
    sample_basis_index,
)
from .quantum import (
    DensityMatrix,
    KrausChannel,
    PTM,
    PauliChannel,
    PauliOperator,
    apply_channel,
    commutation_signs,
    measure_probs,
    pauli_index,
    pauli_label,
    pauli_labels,
    pauli_matrix,
    pauli_operator,
    ptm_of_channel,
    ptm_of_unitary,
)
from .stats import (
    DirichletParams,
    bhattacharyya_dirichlet,
    dirichlet_logpdf,
    dirichlet_sample,
    hellinger_dirichlet,
    hellinger_discrete,
    spatial_correlation,
)

__version__ = "0.1.0"
