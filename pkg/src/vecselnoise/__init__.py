"""Steady states and photocurrent noise spectra of two coupled VECSELs with a shared gain region."""

from .model import (
    ConfigError,
    DerivedRates,
    HierarchyWarning,
    ModelParams,
    NumericalError,
    ParameterError,
    ValidityReport,
    check_hierarchy,
    check_validity,
    derive_rates,
    load_config,
    parse_config_text,
)
from .steadystate import (
    RefinementError,
    SteadyState,
    closed_form_steady,
    collective_rhs,
    refine_steady,
    threshold,
)
from .fluctuation import (
    BACKEND,
    FluctuationSystem,
    SingularResolventError,
    SpectrumSweep,
    UnstableDriftError,
    build_diffusion,
    build_drift,
    build_system,
    spectrum_at,
    sweep,
)

__version__ = "0.1.0"
