"""Exact scheduling of periodic provider-client meetings."""

from .instance import (
    CohortSpec,
    Diagnostic,
    InstanceError,
    ProblemInstance,
    StudentId,
    load_instance,
    parse_instance,
    precheck,
    serialize_instance,
    tile_availability,
)
from .schedule import Placement, Schedule

__version__ = "0.1.0"
