"""Kinetic Monte Carlo simulator of a pulsed single quantum-dot emitter."""

from .kinetics import (
    Event,
    EventKind,
    ExcitonClass,
    QDState,
    RateParams,
    RateVector,
    apply_event,
    classify_emission,
    step_ssa,
    total_rates,
)
from .excitation import (
    NonResonant,
    PulseSchedule,
    Resonant,
    advance_cycles,
    inject_nonresonant,
    inject_resonant,
    run_trajectory,
)
from .observables import (
    AccumulatorSet,
    PhotonRecord,
    blink_runs,
    decay_histogram,
    emission_probability,
    g2_correlate,
)
from .rng import make_rng, point_seed

__version__ = "0.1.0"

from .reference import (  # noqa: E402  (version string is used by sweep manifests)
    BiExponential,
    CtmcModel,
    ExpFit,
    analytic_bright_dark,
    analytic_decay_curve,
    bright_dark_propagator,
    build_ctmc,
    ctmc_emission_probability,
    fit_exponentials,
)
from .sweep import (  # noqa: E402
    GridSpec,
    SweepResult,
    repetition_scan,
    run_sweep,
    saturation_scan,
)

__all__ = [
    "Event",
    "EventKind",
    "ExcitonClass",
    "QDState",
    "RateParams",
    "RateVector",
    "apply_event",
    "classify_emission",
    "step_ssa",
    "total_rates",
    "NonResonant",
    "PulseSchedule",
    "Resonant",
    "advance_cycles",
    "inject_nonresonant",
    "inject_resonant",
    "run_trajectory",
    "AccumulatorSet",
    "PhotonRecord",
    "blink_runs",
    "decay_histogram",
    "emission_probability",
    "g2_correlate",
    "make_rng",
    "point_seed",
    "BiExponential",
    "CtmcModel",
    "ExpFit",
    "analytic_bright_dark",
    "analytic_decay_curve",
    "bright_dark_propagator",
    "build_ctmc",
    "ctmc_emission_probability",
    "fit_exponentials",
    "GridSpec",
    "SweepResult",
    "repetition_scan",
    "run_sweep",
    "saturation_scan",
    "__version__",
]
