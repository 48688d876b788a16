"""Weak-measurement Bell-test simulator, binary-data auditor, and
sequential-readout predictor.

Modules:
  qubits     exact few-qubit states, channels, entanglement
  streams    counter-based random streams for reproducible parallel runs
  trials     the weak+projective trial protocol, estimators, exact oracle
  audit      the binary bound and the binary+unbiased-noise rejection test
  prediction sequential ancilla readout and the after-protocol Bell check
  records    CSV/JSON persistence and run manifests
  cli        command-line harness
"""

from ._version import __version__
from .audit import (
    CONSISTENT,
    DEFAULT_THRESHOLD_SIGMAS,
    INCONCLUSIVE,
    REJECT,
    AuditVerdict,
    BinaryTuple,
    EnumerationReport,
    HiddenVariableConfig,
    chsh_bound_check,
    decomposition_test,
    exhaustive_verify,
    hidden_variable_config,
    hidden_variable_exact_chsh,
    hidden_variable_records,
    per_trial_term,
)
from .cli import SweepSpec, main, parse_invocation, run_sweep
from .prediction import (
    AccuracyEstimate,
    PredictionRecord,
    PredictionTable,
    SequentialReadoutParams,
    exact_post_protocol_chsh,
    post_coupling_state,
    post_protocol_chsh,
    predict,
    prediction_accuracy,
    prediction_batch,
    prediction_settings,
    run_prediction_experiment,
    sequential_weak_sequence,
)
from .qubits import (
    NO_NOISE,
    DegenerateBranchError,
    KrausPair,
    NoiseModel,
    QuantumState,
    apply_readout_noise,
    bloch_observable,
    check_strength,
    concurrence,
    coupling_unitary,
    nonselective_weak,
    partial_trace,
    projective_measure,
    rescale,
    weak_kraus,
    weak_measure,
)
from .records import (
    PREDICTION_HEADER,
    SWEEP_HEADER,
    TRIAL_HEADER,
    RunManifest,
    SweepRow,
    emit_manifest,
    emit_predictions,
    emit_records,
    emit_sweep,
    read_manifest,
    read_predictions,
    read_records,
    read_sweep,
)
from .trials import (
    ChshReport,
    CorrelatorEstimate,
    Settings,
    TrialRecord,
    TrialTable,
    branch_distribution,
    chsh_combine,
    chsh_curve,
    coupled_state,
    default_settings,
    entanglement_curve,
    estimate_chsh,
    estimate_correlator,
    exact_chsh,
    exact_correlator,
    exact_mean,
    prepare_bell,
    run_trial,
    simulate_trials,
)

__all__ = [
    "__version__",
    "AccuracyEstimate",
    "AuditVerdict",
    "BinaryTuple",
    "ChshReport",
    "CONSISTENT",
    "CorrelatorEstimate",
    "DEFAULT_THRESHOLD_SIGMAS",
    "DegenerateBranchError",
    "EnumerationReport",
    "HiddenVariableConfig",
    "INCONCLUSIVE",
    "KrausPair",
    "NO_NOISE",
    "NoiseModel",
    "PREDICTION_HEADER",
    "PredictionRecord",
    "PredictionTable",
    "QuantumState",
    "REJECT",
    "RunManifest",
    "SWEEP_HEADER",
    "SequentialReadoutParams",
    "Settings",
    "SweepRow",
    "SweepSpec",
    "TRIAL_HEADER",
    "TrialRecord",
    "TrialTable",
    "apply_readout_noise",
    "bloch_observable",
    "branch_distribution",
    "check_strength",
    "chsh_bound_check",
    "chsh_combine",
    "chsh_curve",
    "concurrence",
    "coupled_state",
    "coupling_unitary",
    "decomposition_test",
    "default_settings",
    "emit_manifest",
    "emit_predictions",
    "emit_records",
    "emit_sweep",
    "entanglement_curve",
    "estimate_chsh",
    "estimate_correlator",
    "exact_chsh",
    "exact_correlator",
    "exact_mean",
    "exact_post_protocol_chsh",
    "exhaustive_verify",
    "hidden_variable_config",
    "hidden_variable_exact_chsh",
    "hidden_variable_records",
    "main",
    "nonselective_weak",
    "parse_invocation",
    "partial_trace",
    "per_trial_term",
    "post_coupling_state",
    "post_protocol_chsh",
    "predict",
    "prediction_accuracy",
    "prediction_batch",
    "prediction_settings",
    "prepare_bell",
    "projective_measure",
    "read_manifest",
    "read_predictions",
    "read_records",
    "read_sweep",
    "rescale",
    "run_prediction_experiment",
    "run_sweep",
    "run_trial",
    "sequential_weak_sequence",
    "simulate_trials",
    "weak_kraus",
    "weak_measure",
]
