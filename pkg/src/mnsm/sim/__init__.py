"""Deterministic simulation of the manager under virtual time.

Scenario scripts drive the aggregation core with scripted node behaviors
and controller commands on an integer-tick virtual clock; every run yields
a replayable trace.  An independent, deliberately naive oracle recomputes
expected aggregate sequences so the two implementations can be compared
over exhaustively enumerated report interleavings.
"""

from mnsm.sim.oracle import (
    EnumerationResult,
    ExplosionGuardExceeded,
    enumerate_interleavings,
    oracle_aggregate,
)
from mnsm.sim.scenario import (
    ReplayMismatch,
    Scenario,
    Trace,
    TraceRecord,
    replay_trace,
    run_scenario,
)

__all__ = [
    "EnumerationResult",
    "ExplosionGuardExceeded",
    "enumerate_interleavings",
    "oracle_aggregate",
    "ReplayMismatch",
    "Scenario",
    "Trace",
    "TraceRecord",
    "replay_trace",
    "run_scenario",
]
