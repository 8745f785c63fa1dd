"""Exact engine for online fair division with LIKE-family mechanisms."""
from .core import (
    Agent,
    AllocationState,
    Instance,
    InstanceError,
    Outcome,
    format_rational,
    load_instance,
    parse_rational,
    truthful_bids,
    validate_instance,
)
from .mechanisms import MechanismKind, RoundDistribution, feasible_agents, round_distribution

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AllocationState",
    "Instance",
    "InstanceError",
    "MechanismKind",
    "Outcome",
    "RoundDistribution",
    "feasible_agents",
    "format_rational",
    "load_instance",
    "parse_rational",
    "round_distribution",
    "truthful_bids",
    "validate_instance",
]
