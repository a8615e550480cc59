"""Generic multi-node state monitoring.

One manager aggregates the states of many identical node daemons into a
single coherent state, enforces that all nodes follow the same state
trajectory within a configurable time, supervises per-node managed
processes, and reports a single resultant state (or ERROR) upward to a
controller.  The manager has no built-in knowledge of the daemons' state
machine beyond the two names READY and ERROR.
"""

__version__ = "0.1.0"

READY = "READY"
ERROR = "ERROR"
