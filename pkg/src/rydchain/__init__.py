"""Driven-dissipative Rydberg chain with single-body and collective decay:
mean-field phase structure and exact short-chain master-equation solutions."""

__version__ = "0.1.0"

from .model import (
    DDGeometry,
    DecayMatrix,
    InteractionMatrices,
    ModelParams,
    build_decay_matrix,
    build_interaction_matrices,
    dd_coupling,
    magic_angle,
)
from .meanfield import (
    BipartiteState,
    CriticalPoint,
    FixedPoint,
    SpinLattice,
    Trajectory,
    bipartite_fixed_points,
    bipartite_rhs,
    critical_omega,
    critical_omega_asymptotic,
    integrate,
    mf_rhs,
    uniform_analytic,
    uniform_branch_omega,
    uniform_fixed_points,
    uniform_rhs,
)
from .stability import StabilityReport, classify, jacobian

__all__ = [
    "__version__",
    "ModelParams",
    "InteractionMatrices",
    "DecayMatrix",
    "DDGeometry",
    "build_interaction_matrices",
    "build_decay_matrix",
    "dd_coupling",
    "magic_angle",
    "SpinLattice",
    "BipartiteState",
    "FixedPoint",
    "Trajectory",
    "CriticalPoint",
    "mf_rhs",
    "uniform_rhs",
    "bipartite_rhs",
    "uniform_fixed_points",
    "uniform_analytic",
    "bipartite_fixed_points",
    "integrate",
    "critical_omega",
    "critical_omega_asymptotic",
    "uniform_branch_omega",
    "StabilityReport",
    "jacobian",
    "classify",
]
