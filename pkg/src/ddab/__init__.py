"""Dynamic defender-attacker Blotto (dDAB) path guarding on graphs.

A turn-based game engine, a guaranteed defense policy built on platoons
with a limited sensing horizon, and desk-scale exhaustive verifiers that
bracket the resource bound from both sides.
"""

from ddab.graph import (
    Environment,
    EnvironmentError_,
    Graph,
    InputError,
    PathSpec,
    UnknownNodeError,
    VisibilityRegion,
    distance,
    load_environment,
    path_distance,
    validate_environment,
    visibility_region,
)
from ddab.policy import required_assets

__all__ = [
    "Environment",
    "EnvironmentError_",
    "Graph",
    "InputError",
    "PathSpec",
    "UnknownNodeError",
    "VisibilityRegion",
    "distance",
    "load_environment",
    "path_distance",
    "required_assets",
    "validate_environment",
    "visibility_region",
]
