"""Extremal candidate trajectories: enumeration, solving, exact planner."""

from .events import (
    CASE_IDS,
    ExtremalEvent,
    SceneIndex,
    Support,
    enumerate_articulated,
    enumerate_row,
    enumerate_unarticulated,
    index_scene,
    support_to_dict,
)
from .solvers import CandidateSolution, UnsupportedCase, solve_event
from .planner import PlanOutcome, plan_exact

__all__ = [
    "CASE_IDS",
    "CandidateSolution",
    "ExtremalEvent",
    "PlanOutcome",
    "SceneIndex",
    "Support",
    "UnsupportedCase",
    "enumerate_articulated",
    "enumerate_row",
    "enumerate_unarticulated",
    "index_scene",
    "plan_exact",
    "solve_event",
    "support_to_dict",
]
