"""Continuous-time random walk with repeated waiting times.

Simulation of the repetition-block waiting process and the walk built on it,
closed-form and Laplace-domain predictions, ACF estimators for irregular
event series, and a tick-data pipeline (stationarization, session joining,
shuffling surrogates).
"""

__version__ = "0.1.0"

from .distributions import (
    FixedRepetition,
    IncrementModel,
    NonErgodicRhoError,
    RepetitionDistribution,
    WaitingTimeModel,
)
from .estimators import (
    AcfCurve,
    FitRangeError,
    SlopeFit,
    ZeroVarianceError,
    fit_slope,
    log_bin_edges,
    session_scatter_stderr,
    step_acf,
    step_acf_waiting,
    time_acf,
    time_acf_abs,
)
from .series import EventSeries, read_event_csv, write_event_csv
from .simulate import (
    HorizonError,
    MomentTable,
    SimConfig,
    ensemble_moments,
    generate_trajectory,
    generate_waiting_sequence,
    simulate_series,
    value_at,
)
from .tickdata import (
    SeasonalProfile,
    SessionRules,
    SurrogateKind,
    build_seasonal_profile,
    ingest_ticks,
    join_sessions,
    make_surrogate,
    stationarize,
)
from .theory import (
    ExpansionCoefficients,
    LaplaceMoment,
    MomentCurves,
    SingularDenominatorError,
    TimePropagatorQuery,
    TruncationError,
    asymptotic_moment_exponents,
    gaver_stehfest,
    invert_laplace,
    laplace_moments,
    propagator_bin_mass,
    repetition_laplace_sum,
    step_acf_asymptote,
    step_acf_asymptotic_slope,
    step_acf_exact,
)
from .zmath import generalized_harmonic, zeta_tail, zeta_value
