"""Reduced Cauchy problem: evolution, constraints, propagation identities, reassembly."""
from .state import (CauchyState, ConstraintResiduals, Derivatives, EvolutionConfig,
                    constraint_residuals, evolution_rhs)
from .evolve import NumericalAbort, Trajectory, evolve, fourier_filter, rk4_step
from .propagation import (CANDIDATE_B, CANDIDATE_A, CalibrationReport, PropagationVariant,
                          calibrate_identities, candidate_variants, propagation_residuals,
                          propagation_terms, random_violating_state)
from .io import read_state, write_state
from .spacetime import assemble_spacetime, reduction_equivalence, spacetime_lambda_stats

__all__ = [
    "CauchyState",
    "ConstraintResiduals",
    "Derivatives",
    "EvolutionConfig",
    "constraint_residuals",
    "evolution_rhs",
    "NumericalAbort",
    "Trajectory",
    "evolve",
    "fourier_filter",
    "rk4_step",
    "CANDIDATE_B",
    "CANDIDATE_A",
    "CalibrationReport",
    "PropagationVariant",
    "calibrate_identities",
    "candidate_variants",
    "propagation_residuals",
    "propagation_terms",
    "random_violating_state",
    "assemble_spacetime",
    "reduction_equivalence",
    "spacetime_lambda_stats",
    "read_state",
    "write_state",
]
