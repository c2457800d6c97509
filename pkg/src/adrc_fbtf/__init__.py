"""Minimum-footprint discrete-time linear ADRC: design, runtime, cost audit, simulation."""
from .cost import OpCount, audit, audit_formula
from .design import (
    CoefficientOverflowError,
    DesignError,
    DesignSpec,
    EsoDesign,
    FbtfCoefficients,
    SingularSystemError,
    controller_gains,
    eso_design,
    eso_matrices,
    fbtf_synthesize,
    observer_gain,
    closed_form_coefficients,
    zoh_discretize,
)
from .runtime import FbtfController, Limiter, NotInitializedError, SsController
from .sim import Scenario, SimTrace, settling_time, simulate

__version__ = "0.1.0"
