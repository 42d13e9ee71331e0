"""Exact lot-type design by column-and-row generation."""

from lotdesign.model import (
    Instance,
    InstanceValidationError,
    LotType,
    LotTypeParams,
    ValidationReport,
    best_multiplicity,
    complete_ilp_dimensions,
    cost,
    count_applicable_lot_types,
    enumerate_applicable_lot_types,
    instance_to_dict,
    lot_size,
    make_instance,
    top_n_lot_types,
    validate_instance,
)
from lotdesign.subsolver import Assignment, assign_optimal, brute_force_oracle, solve_restricted
from lotdesign.controller import SolverConfig, SolveReport, solve, verify_certificate
from lotdesign.generate import generate, generate_preset

__all__ = [
    "Assignment",
    "Instance",
    "InstanceValidationError",
    "LotType",
    "LotTypeParams",
    "SolveReport",
    "SolverConfig",
    "ValidationReport",
    "assign_optimal",
    "best_multiplicity",
    "brute_force_oracle",
    "complete_ilp_dimensions",
    "cost",
    "count_applicable_lot_types",
    "enumerate_applicable_lot_types",
    "generate",
    "generate_preset",
    "instance_to_dict",
    "lot_size",
    "make_instance",
    "solve",
    "solve_restricted",
    "top_n_lot_types",
    "validate_instance",
    "verify_certificate",
]
