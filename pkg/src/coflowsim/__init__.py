"""coflowsim: discrete-event simulation of coflow scheduling on a big-switch fabric."""

from .config import DEFAULT_BANDWIDTH, MB, PilotPolicy, SchedulerParams, SimConfig
from .fabric import EventLog, SimState, SimulationError, run_simulation
from .traces import (CoflowSpec, FlowSpec, Trace, TraceError, filter_low_skew, filter_thin,
                     gen_mantri_like, load_trace, parse_trace, replicate_trace, serialize_trace)

__all__ = [
    "MB", "DEFAULT_BANDWIDTH", "PilotPolicy", "SchedulerParams", "SimConfig",
    "EventLog", "SimState", "SimulationError", "run_simulation",
    "FlowSpec", "CoflowSpec", "Trace", "TraceError",
    "parse_trace", "serialize_trace", "load_trace",
    "gen_mantri_like", "filter_low_skew", "filter_thin", "replicate_trace",
]

__version__ = "0.1.0"
