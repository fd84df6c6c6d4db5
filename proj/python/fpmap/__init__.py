"""Python bindings for the fpmap toolkit."""

from ._core import (
    ContractViolation,
    FpmapError,
    Query,
    RadioMap,
    Scenario,
    Simulation,
    Trace,
    Trajectory,
    build_radio_map,
    config_keys,
    default_config_json,
    detect_steps,
    evaluate,
    knn_localize,
    load_radio_map,
    load_scenario,
    load_trace,
    position_errors,
    segment_belief,
    to_positive,
    track,
)

__all__ = [
    "ContractViolation",
    "FpmapError",
    "Query",
    "RadioMap",
    "Scenario",
    "Simulation",
    "Trace",
    "Trajectory",
    "build_radio_map",
    "config_keys",
    "default_config_json",
    "detect_steps",
    "evaluate",
    "knn_localize",
    "load_radio_map",
    "load_scenario",
    "load_trace",
    "position_errors",
    "segment_belief",
    "to_positive",
    "track",
]
