"""Packet-level dragonfly network simulator."""

from ._core import (
    ConfigError,
    DragonflyParams,
    SimulationError,
    Topology,
    TopologyError,
    build_dragonfly,
    canonical_config,
    max_system,
    run_congestion,
    run_series,
    run_sweep,
    validate_config,
)

__all__ = [
    "ConfigError",
    "DragonflyParams",
    "SimulationError",
    "Topology",
    "TopologyError",
    "build_dragonfly",
    "canonical_config",
    "max_system",
    "run_congestion",
    "run_series",
    "run_sweep",
    "validate_config",
]
