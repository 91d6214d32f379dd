"""Steady Navier-Stokes cavity solvers with coarse-data nudging."""

from ._cdanse import (
    ObservationSet,
    Problem,
    compute_reference,
    contraction_rate,
    estimate_K1,
    locate_observation_vertices,
    make_observations,
    norms,
    observation_set_from_json,
    solve,
    theory_report,
)

__all__ = [
    "ObservationSet",
    "Problem",
    "compute_reference",
    "contraction_rate",
    "estimate_K1",
    "locate_observation_vertices",
    "make_observations",
    "norms",
    "observation_set_from_json",
    "solve",
    "theory_report",
]
