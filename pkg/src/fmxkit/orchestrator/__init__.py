"""Master-service orchestration simulator."""

from .config import (Batch, BatchKind, CommandSpec, MasterConfig, Mode,
                     PlanWarning, Protection, ServiceSpec, StartupPlan,
                     config_from_dict, load_config, plan_startup,
                     reference_config, reference_config_bytes)
from .fuzz import FuzzResult, fuzz_lifecycle
from .sim import (LIFECYCLE, RPC_HANDLERS, Action, CommandScript, EventLog,
                  Orchestrator, ScriptedExecutor, ServiceRuntime,
                  ServiceScript, SimClock, StartupReport, State, is_legal)

__all__ = [
    "Batch", "BatchKind", "CommandSpec", "MasterConfig", "Mode", "PlanWarning",
    "Protection", "ServiceSpec", "StartupPlan", "config_from_dict", "load_config",
    "plan_startup", "reference_config", "reference_config_bytes",
    "FuzzResult", "fuzz_lifecycle",
    "LIFECYCLE", "RPC_HANDLERS", "Action", "CommandScript", "EventLog",
    "Orchestrator", "ScriptedExecutor", "ServiceRuntime", "ServiceScript",
    "SimClock", "StartupReport", "State", "is_legal",
]
