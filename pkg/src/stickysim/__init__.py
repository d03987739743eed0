"""stickysim: sticky couplings of diffusions at desk scale.

Simulates interpolated reflection/synchronous couplings of diffusions with
different drifts together with the one-dimensional sticky radial SDE that
dominates their distance, computes the explicit contraction constants,
invariant measures and total-variation bounds of that theory, and checks the
bounds against exact formulas and Monte Carlo estimates.
"""

__version__ = "0.1.0"

from .bounds import (CouplingBound, LyapunovKit, MomentBounds,
                     StickyInvariantMeasure, alpha_closed_form,
                     coupling_upper_bound, ctilde_inverse_bound,
                     effective_radii, lyapunov_kit, mkv_bound_curve,
                     modified_upper_bound, moment_bounds, radial_drift,
                     sticky_invariant_measure, time_dependent_bounds)
from .engine import (BACKEND, RNG_ALGORITHM, CouplingEnsemble, SimConfig,
                     StickyEnsemble, rng_stream, simulate_delta_coupling,
                     simulate_mean_field, simulate_sticky_1d)
from .model import (DriftPair, DriftSpec, KappaSpec, LKRProfile, PLTable,
                    TimeDependentRadialDrift, builtin_models, validate_model)

__all__ = [
    "BACKEND", "RNG_ALGORITHM", "CouplingBound", "CouplingEnsemble",
    "DriftPair", "DriftSpec", "KappaSpec", "LKRProfile", "LyapunovKit",
    "MomentBounds", "PLTable", "SimConfig", "StickyEnsemble",
    "StickyInvariantMeasure", "TimeDependentRadialDrift",
    "alpha_closed_form", "builtin_models", "coupling_upper_bound",
    "ctilde_inverse_bound", "effective_radii", "lyapunov_kit",
    "mkv_bound_curve", "modified_upper_bound", "moment_bounds",
    "radial_drift", "rng_stream", "simulate_delta_coupling",
    "simulate_mean_field", "simulate_sticky_1d", "sticky_invariant_measure",
    "time_dependent_bounds", "validate_model",
]
