"""
Matrix Lorenz - classical, spin (LLG) and Lie-algebra-valued Lorenz systems

Integrates the Lorenz equations with x, y, z promoted to Hermitian matrices
expanded in a Lie algebra basis, measures Lyapunov exponents and quantum
fluctuation observables, and maps the classical system onto spin dynamics.
"""

__version__ = "0.1.0"

from .core.algebra import AlgebraBasis, StructureTensors, named_basis, named_tensors, validate_basis
from .core.analysis import (
    EnsembleSpec,
    LyapunovEstimate,
    PhaseDiagram,
    block_lyapunov,
    detect_rcrit,
    ensemble_average,
    largest_lyapunov,
    observables,
    sweep_r,
)
from .core.dynamics import LLGParams, LorenzParams, MatrixLorenzState, llg_rhs, llg_to_lorenz, lorenz_rhs
from .core.errors import MatrixLorenzError
from .core.integrator import IntegrationSpec, Trajectory, integrate, rk8_step
from .core.systems import SYSTEMS, build_system
