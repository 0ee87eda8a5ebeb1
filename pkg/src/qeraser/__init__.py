"""Delayed-choice quantum eraser simulation suite.

Closed-form biphoton detection statistics for the three canonical
double-slit / idler-routing configurations, a seeded Monte Carlo engine
producing timestamped event logs with delayed (even two-phase) beam-splitter
choices, and a coincidence-analysis layer that extracts gated interference
patterns and verifies that the ungated signal record never depends on the
choice.
"""
from .apparatus import ApparatusConfig, IdlerDetector, SlitLabel, to_dimensionless, to_physical
from .amplitudes import (
    DegenerateConditioningError,
    DomainError,
    conditional_density,
    detector_probability,
    idler_transfer,
    joint_density,
    marginal_density_d0,
    normalization_constant,
    normalized_marginal,
    sinc,
    slit_amplitude,
    symmetric_grid,
    transfer_matrix,
)
from .sampling import (
    ImpossibleEventError,
    SamplerConstructionError,
    SamplerTable,
    build_sampler,
    detector_one_probability,
    marginal_sampler,
    sample_idler,
    sample_signal,
)
from .engine import (
    ALWAYS_IN,
    ALWAYS_OUT,
    DEFERRED,
    BiphotonEvent,
    DelayedChoicePolicy,
    EventLog,
    PerEvent,
    PolicyDeferredError,
    RunConfig,
    run_experiment,
    run_idler_phase,
    run_signal_phase,
)
from .analysis import (
    BinningMismatchError,
    CoincidenceWindow,
    ComparisonReport,
    FringeFit,
    GatedHistogram,
    LowStatisticsError,
    MatchedPairs,
    UnresolvedLogError,
    fit_fringes,
    fringe_visibility,
    gate_coincidences,
    goodness_of_fit_chi2,
    histogram,
    no_signaling_test,
    phase_shift_estimate,
    sum_rule_check,
    two_sample_chi2,
)
from .eventlog import (
    CheckpointError,
    LogFormatError,
    read_event_log,
    serialize_event_log,
    signal_column_text,
    write_event_log,
)

__version__ = "0.1.0"
