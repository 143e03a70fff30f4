"""Fair assemblies for federations of grassroots communities.

A discrete-time simulator: communities form a DAG, each community keeps an
assembly of at most ``n`` people, and a greedy protocol keeps seats fair
while members rotate after fixed terms.
"""

from .checks import check_convergence, check_pfr, fairness_report, oracle_recompute
from .engine import Engine, EngineConfig, RunLog, run_trace
from .errors import InternalError, ScenarioError, TraceError
from .graph import FederationGraph, validate
from .metrics import MetricsLedger
from .scenario import ScenarioSpec, generate
from .trace import parse_trace, read_trace

__all__ = [
    "Engine",
    "EngineConfig",
    "FederationGraph",
    "InternalError",
    "MetricsLedger",
    "RunLog",
    "ScenarioError",
    "ScenarioSpec",
    "TraceError",
    "check_convergence",
    "check_pfr",
    "fairness_report",
    "generate",
    "oracle_recompute",
    "parse_trace",
    "read_trace",
    "run_trace",
    "validate",
]
