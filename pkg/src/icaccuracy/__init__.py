"""Time-dependent AUC, Brier score and EPCE under interval censoring and competing risks."""

__version__ = "0.1.0"

from .core import (
    EvaluationWindow,
    EventKind,
    RiskSet,
    Scenario,
    SubjectRecord,
    build_risk_set,
    classify_scenario,
    validate_record,
)
from .errors import (
    ICAccuracyError,
    RecordError,
    MismatchedEndpoint,
    NonMonotoneTimes,
    NegativeTime,
    InvalidWindow,
    EmptyRiskSet,
    OutOfSupport,
    NoCaseMass,
    NoControlMass,
    NoAbsoluteCases,
    NoAbsoluteControls,
    NotAbsoluteCase,
    ZeroSurvival,
    AllContributionsDegenerate,
    RootNotBracketed,
    MissingTruth,
    ConfigError,
)
from .metrics import (
    MetricsReport,
    PredictedRisk,
    RocCurve,
    brier_ipcw,
    brier_model,
    epce_model,
    epce_reference,
    evaluate,
    naive_metrics,
    reference_metrics,
    roc_and_auc,
    sensitivity_ipcw,
    sensitivity_model,
    specificity_ipcw,
    specificity_model,
    weighted_roc,
    window_risks,
)
from .predictor import (
    APPENDIX_PARAMETERS,
    ConstantHazardPredictor,
    JointModel,
    JointModelPredictor,
    ModelParameters,
    ProfileBatch,
    QuadraturePredictor,
    SubjectProfile,
    bs_log_baseline,
    cif_progression,
    cif_treatment,
    cumulative_hazard,
    hazard,
    longitudinal_mean,
    overall_survival,
)
from .quadrature import GK15, QuadratureRule
from .simulator import (
    BiopsySchedule,
    SimulationConfig,
    TrueOutcome,
    event_proportions,
    generate_biopsy_times,
    generate_dataset,
    sample_event_times,
    simulate_psa_series,
)
from .weights import (
    CensoringSurvival,
    WeightPair,
    ipcw_case_weight,
    ipcw_control_weight,
    km_censoring_survival,
    model_case_weight,
    model_control_weight,
    model_weights,
)
