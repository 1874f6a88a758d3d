"""Energy-optimal transmission strategies for two-way relaying over fading channels."""

from .errors import (
    BracketError,
    ConfigurationError,
    InfeasibleError,
    MonotonicityError,
    NumericalError,
    SolverError,
    TwrnError,
)
from .fading import ChannelSample, Distribution, FadingSpec, SampleSet, expect, sample_channels
from .solvers import (
    RateRequirement,
    SolverConfig,
    Strategy,
    StrategySolution,
    select_optimal,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "ChannelSample",
    "ConfigurationError",
    "Distribution",
    "FadingSpec",
    "InfeasibleError",
    "MonotonicityError",
    "NumericalError",
    "RateRequirement",
    "SampleSet",
    "SolverConfig",
    "SolverError",
    "Strategy",
    "StrategySolution",
    "TwrnError",
    "expect",
    "sample_channels",
    "select_optimal",
    "solve",
]
