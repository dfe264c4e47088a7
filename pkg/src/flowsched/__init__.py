"""Flow scheduling on capacitated bipartite switches: LP bounds, rounding, online policies, simulation."""
from .core import (
    FlowRequest,
    Instance,
    InstanceError,
    IntegralSchedule,
    PortId,
    SwitchSpec,
    response_metrics,
    validate_schedule,
)

__all__ = [
    "FlowRequest",
    "Instance",
    "InstanceError",
    "IntegralSchedule",
    "PortId",
    "SwitchSpec",
    "response_metrics",
    "validate_schedule",
]
__version__ = "0.1.0"
