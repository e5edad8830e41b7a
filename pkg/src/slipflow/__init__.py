"""slipflow: a numerical laboratory for power-law incompressible flow with
Navier slip boundary conditions on a truncated half-space.

The package covers the constitutive layer (potentials, stresses, structural
bound certification), the discrete half-space geometry (mirror reflection,
Leray projection, Korn ratios, difference quotients), the slip-condition
Stokes eigenbasis, a monotone implicit Galerkin solver with a per-step
energy ledger, and the experiment drivers that test uniqueness, reflection
symmetry, interior regularity and spatial decay.
"""

from .constitutive import (
    ConstitutiveCertificate,
    PPotential,
    PowerLaw,
    certify_bounds,
    potential,
    stress,
    stress_hessian,
)
from .domain import (
    Grid,
    PressureField,
    VelocityField,
    divergence,
    korn_ratio,
    leray_project,
    lp_norm,
    reflect,
    reflect_pressure,
    restrict,
    shell_maxima,
    slip_trace_residual,
    sym_gradient_field,
)
from .solver import EnergyLedger, SimConfig, SimState, simulate
from .stokes import StokesBasis, assemble_stokes, divfree_subspace, solve_eigen
from .tensors import SymTensor, inner, norm, symmetrize

__version__ = "0.1.0"

__all__ = [
    "ConstitutiveCertificate",
    "EnergyLedger",
    "Grid",
    "PPotential",
    "PowerLaw",
    "PressureField",
    "SimConfig",
    "SimState",
    "StokesBasis",
    "SymTensor",
    "VelocityField",
    "assemble_stokes",
    "certify_bounds",
    "divergence",
    "divfree_subspace",
    "inner",
    "korn_ratio",
    "leray_project",
    "lp_norm",
    "norm",
    "potential",
    "reflect",
    "reflect_pressure",
    "restrict",
    "shell_maxima",
    "simulate",
    "slip_trace_residual",
    "solve_eigen",
    "stress",
    "stress_hessian",
    "sym_gradient_field",
    "symmetrize",
]
