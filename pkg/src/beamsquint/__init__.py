"""Wideband IRS-aided OFDM channel simulation and estimation under beam squint."""

from .baseline import BaselineEstimate, baseline_estimate, build_baseline_dictionary
from .channel import (
    CascadedPath,
    HopPath,
    ReflectionSchedule,
    channel_response,
    channel_response_matrix,
    compose_cascade,
    generate_reflection_schedule,
    read_paths_csv,
    received_symbol,
    steering_vector,
    write_paths_csv,
)
from .config import SystemConfig
from .correlation import (
    CorrelationTrace,
    correlation,
    false_angle,
    find_peaks,
    fold_no_squint,
    scan,
)
from .pilots import (
    CrossEntropyParams,
    PilotSet,
    coherence_objective,
    cross_entropy_design,
    random_feasible_pilots,
    span_constraint_satisfied,
)
from .simulate import (
    ExperimentConfig,
    MetricsRow,
    generate_scenario,
    load_experiment_config,
    nmse,
    run_experiment,
    synthesize_observations,
)
from .tsomp import (
    AngleSupport,
    AngularDictionary,
    BlockMeasurement,
    ChannelEstimate,
    DelayGainEstimate,
    EstimationError,
    build_angular_dictionary,
    build_delay_dictionary,
    build_measurement,
    deinterleave,
    estimate,
    interleave,
    ls_refine,
    stage1_angle_recovery,
    stage2_delay_gain,
)

__version__ = "0.1.0"
