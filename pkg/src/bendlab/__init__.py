"""Virtual three-point-bend laboratory for interleaved CFRP laminates.

Units throughout: mm, N, MPa, s, tonne (so 1 MPa * mm^2 = 1 N and density
is carried in tonne/mm^3). Material tables are entered in their customary
units (GPa, g/cm^3) and converted at construction.
"""

__version__ = "0.1.0"

from bendlab.materials import (
    EngineeringConstants,
    PlyStrengths,
    CohesiveProperties,
    BpFilmProperties,
    preset,
    stiffness_from_engineering,
)
from bendlab.mesh import LaminateSpec, build_mesh
from bendlab.solver import SolverConfig, SimulationResult, stable_dt, energy_audit
from bendlab.bend import LoadCurve, flexural_stress, flexural_strain, three_point_bend, summarize

__all__ = [
    "EngineeringConstants",
    "PlyStrengths",
    "CohesiveProperties",
    "BpFilmProperties",
    "preset",
    "stiffness_from_engineering",
    "LaminateSpec",
    "build_mesh",
    "SolverConfig",
    "SimulationResult",
    "stable_dt",
    "energy_audit",
    "LoadCurve",
    "flexural_stress",
    "flexural_strain",
    "three_point_bend",
    "summarize",
]
