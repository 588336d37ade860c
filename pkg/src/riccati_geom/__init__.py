"""Verification and geometric analysis of generalized Riccati equations for
singular LQ optimal control, with cost-preserving stabilization.

The package is organized around a :class:`~riccati_geom.popov.PopovTriple`
holding the problem data.  ``cgcare`` verifies candidate solutions and solves
the equation by reduction, ``geometry`` computes the output-nulling and
reachability subspaces that structure the solution set, ``hamiltonian``
exposes the doubled-system pencil and its invariant zeros, ``stabilize``
builds the extra feedback that reassigns the free spectrum without changing
the cost, and ``sim`` certifies costs by simulation and quadrature.
"""

__version__ = "0.1.0"

from .exceptions import (
    InputError,
    NoStabilizingSolutionError,
    NumericalError,
    PoleError,
    RiccatiGeomError,
    SolvabilityError,
    UnsupportedInstanceError,
)
from .linalg import (
    DEFAULT_SEED,
    DEFAULT_TOL,
    Subspace,
    eig,
    expm,
    pinv,
    rank_factor,
    solve_sylvester,
    subspace_ops,
)
from .popov import (
    InputSplit,
    OutputFactorization,
    PopovTriple,
    check_popov,
    factor_popov,
    input_split,
    popov_function,
)
from .cgcare import (
    CandidateSolution,
    DerivedMatrices,
    derived_matrices,
    gcare_residual,
    normal_rank_popov,
    solve_reduced,
    spectral_factor_sample,
    verify_cgcare,
)
from .geometry import (
    OutputNullingCertificate,
    check_kernel_output_nulling,
    friend_of,
    largest_output_nulling,
    r0x,
    reachability_on,
    reachable_subspace,
)
from .hamiltonian import (
    HamiltonianSystem,
    PencilDecomposition,
    build_hamiltonian,
    hamiltonian_pencil,
    invariant_zeros,
    pencil_decompose,
    rosenbrock_rank,
)
from .stabilize import (
    StabilizationResult,
    place_poles,
    stabilizing_gain,
    verify_stabilization,
    xi_omega,
)
from .sim import SimulationResult, cost, optimal_cost_check, simulate

__all__ = [
    "__version__",
    "RiccatiGeomError",
    "InputError",
    "PoleError",
    "NumericalError",
    "SolvabilityError",
    "NoStabilizingSolutionError",
    "UnsupportedInstanceError",
    "DEFAULT_TOL",
    "DEFAULT_SEED",
    "Subspace",
    "rank_factor",
    "pinv",
    "eig",
    "solve_sylvester",
    "expm",
    "subspace_ops",
    "PopovTriple",
    "InputSplit",
    "OutputFactorization",
    "check_popov",
    "factor_popov",
    "popov_function",
    "input_split",
    "CandidateSolution",
    "DerivedMatrices",
    "derived_matrices",
    "gcare_residual",
    "verify_cgcare",
    "spectral_factor_sample",
    "normal_rank_popov",
    "solve_reduced",
    "OutputNullingCertificate",
    "reachable_subspace",
    "largest_output_nulling",
    "friend_of",
    "reachability_on",
    "r0x",
    "check_kernel_output_nulling",
    "HamiltonianSystem",
    "PencilDecomposition",
    "build_hamiltonian",
    "rosenbrock_rank",
    "hamiltonian_pencil",
    "pencil_decompose",
    "invariant_zeros",
    "xi_omega",
    "place_poles",
    "stabilizing_gain",
    "verify_stabilization",
    "StabilizationResult",
    "SimulationResult",
    "simulate",
    "cost",
    "optimal_cost_check",
]
