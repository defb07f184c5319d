"""Numerical toolkit for Reeb dynamics on star-shaped domains in R^4.

Modules:
    geometry      -- symplectic/Liouville forms, star-shaped domain families
    sp2           -- Sp(2) arcs, rotation numbers, positive paths
    reeb          -- Reeb flow integration, closed-orbit search, invariants
    section       -- disk-like surfaces of section and return maps
    diskmaps      -- area-preserving disk maps, lifts, actions, Calabi
    strips        -- generating functions on the strip, positivity pipeline
    planar        -- planar generating functions for C^1-small maps
    construction  -- domains built from time-dependent Hamiltonians
    capacities    -- action spectra, capacity bounds, certificates
    cli           -- command-line entry point
"""
from .geometry import (
    Ball,
    Ellipsoid,
    ModelRegion,
    RadialPerturbation,
    StarShapedDomain,
    domain_classify,
    domain_from_spec,
    domain_volume,
    eval_liouville,
    eval_symplectic,
    load_domain,
)
from .reeb import (
    ReebOrbit,
    find_closed_orbits,
    integrate_flow,
    monodromy_arc,
    orbit_invariants,
    reeb_vector,
    validate_orbit,
    write_orbits_csv,
)
from .sp2 import (
    Sp2Arc,
    classify_monodromy,
    eigenvalue_lift,
    positive_path_check,
    rotation_arc,
    rotation_number_of_arc,
    winding_limit,
)
from .diskmaps import (
    DiskMapLift,
    TimeDepHamiltonianDisk,
    action_of_lift,
    banded_hamiltonian,
    calabi,
    compose_lifts,
    fixed_points_with_actions,
    flow_from_hamiltonian,
    inverse_lift,
    positive_banded_hamiltonian,
    quadratic_hamiltonian,
    sample_hamiltonian,
    standard_area_form,
    standard_primitive,
)
from .strips import (
    AreaDensityF,
    GenFunW,
    StripMap,
    check_genfun_conditions,
    genfun_critical_points,
    genfun_from_stripmap,
    lift_to_strip,
    positive_hamiltonian_pipeline,
    strip_fixed_points,
    stripmap_from_genfun,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "Ellipsoid",
    "ModelRegion",
    "RadialPerturbation",
    "StarShapedDomain",
    "domain_classify",
    "domain_from_spec",
    "domain_volume",
    "eval_liouville",
    "eval_symplectic",
    "load_domain",
    "ReebOrbit",
    "find_closed_orbits",
    "integrate_flow",
    "monodromy_arc",
    "orbit_invariants",
    "reeb_vector",
    "validate_orbit",
    "write_orbits_csv",
    "Sp2Arc",
    "classify_monodromy",
    "eigenvalue_lift",
    "positive_path_check",
    "rotation_arc",
    "rotation_number_of_arc",
    "winding_limit",
    "DiskMapLift",
    "TimeDepHamiltonianDisk",
    "action_of_lift",
    "banded_hamiltonian",
    "calabi",
    "compose_lifts",
    "fixed_points_with_actions",
    "flow_from_hamiltonian",
    "inverse_lift",
    "positive_banded_hamiltonian",
    "quadratic_hamiltonian",
    "sample_hamiltonian",
    "standard_area_form",
    "standard_primitive",
    "AreaDensityF",
    "GenFunW",
    "StripMap",
    "check_genfun_conditions",
    "genfun_critical_points",
    "genfun_from_stripmap",
    "lift_to_strip",
    "positive_hamiltonian_pipeline",
    "strip_fixed_points",
    "stripmap_from_genfun",
    "__version__",
]
