"""Geometric control subspaces for output quadruples (A, B, C, D).

Implements the reachable subspace, the largest output-nulling subspace with a
certifying friend, the reachability subspace contained in it, and the checks
that tie these objects to kernels of Riccati solutions: for a verified X the
subspace reachable through ker R is contained in ker C_X, annihilated by X,
independent of the particular solution, and equals the reachability subspace
on ker X.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cgcare, linalg
from .exceptions import InputError, NumericalError
from .linalg import (
    Subspace,
    as_matrix,
    krylov_reachable,
    orth,
    pinv,
    rank_factor,
    resolve_tol,
    spectral_norm,
    subspace_intersection,
)
from .popov import PopovTriple, factor_popov, input_split

__all__ = [
    "OutputNullingCertificate",
    "reachable_subspace",
    "largest_output_nulling",
    "output_nulling_iterates",
    "friend_of",
    "reachability_on",
    "r0x",
    "check_kernel_output_nulling",
    "KernelReport",
]


@dataclass(frozen=True)
class OutputNullingCertificate:
    """A subspace V together with a friend F and the restriction of A + BF to V.

    (A + B F) V is contained in V, (C + D F) V = 0, and the restriction Xi
    satisfies (A + B F) basis(V) = basis(V) Xi.
    """

    V: Subspace
    friend_F: np.ndarray
    Xi: np.ndarray


def _check_quadruple(A, B, C, D):
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n or D.shape != (p, m):
        raise InputError(
            f"inconsistent quadruple shapes A{A.shape} B{B.shape} C{C.shape} D{D.shape}"
        )
    return A, B, C, D


def reachable_subspace(A, Bcols, tol=None) -> Subspace:
    """Smallest A-invariant subspace containing the column span of Bcols."""
    return krylov_reachable(A, Bcols, tol)


def output_nulling_iterates(A, B, C, D, tol=None):
    """Decreasing subspace iterates of the output-nulling recursion.

    V_0 is the full space and V_{k+1} = {x : [A; C] x in (V_k + {0}) + im[B; D]};
    the sequence is monotone and stationary within n steps.
    """
    tol = resolve_tol(tol)
    A, B, C, D = _check_quadruple(A, B, C, D)
    n = A.shape[0]
    p = C.shape[0]
    stacked = np.vstack([A, C])
    BD = np.vstack([B, D])
    iterates = [Subspace.full(n)]
    for _ in range(n + 1):
        Vk = iterates[-1]
        lifted = np.vstack([Vk.basis, np.zeros((p, Vk.dim))])
        W = orth(np.hstack([lifted, BD]), tol, ambient_dim=n + p)
        Wperp = W.complement()
        if Wperp.dim == 0:
            V_next = Subspace.full(n)
        else:
            V_next = rank_factor(Wperp.basis.T @ stacked, tol).null_space
        iterates.append(V_next)
        if V_next.dim == Vk.dim:
            break
    return iterates


def friend_of(A, B, C, D, V: Subspace, tol=None):
    """A feedback F with (A + B F) V inside V and (C + D F) V = 0.

    Solved in least squares from [A; C] basis(V) = [basis(V); 0] Xi + [B; D] Omega,
    then F = -Omega basis(V)^T (zero on the orthogonal complement of V).
    Raises when V is not output-nulling, reporting the defect.
    """
    tol = resolve_tol(tol)
    A, B, C, D = _check_quadruple(A, B, C, D)
    n, m, p = A.shape[0], B.shape[1], C.shape[0]
    if V.ambient_dim != n:
        raise InputError("subspace ambient dimension does not match the state dimension")
    if V.dim == 0:
        return np.zeros((m, n))
    Vb = V.basis
    M = np.block([[Vb, B], [np.zeros((p, V.dim)), D]])
    N = np.vstack([A @ Vb, C @ Vb])
    sol = pinv(M, tol) @ N
    scale = 1.0 + spectral_norm(N)
    defect = spectral_norm(M @ sol - N)
    if defect > tol * scale * n:
        raise InputError(
            f"subspace is not output-nulling (defect {defect:.3g} at scale {scale:.3g})"
        )
    Omega = sol[V.dim :, :]
    return -Omega @ Vb.T


def _restriction(A_cl, V: Subspace):
    return V.basis.T @ A_cl @ V.basis


def largest_output_nulling(A, B, C, D, tol=None) -> OutputNullingCertificate:
    """The largest output-nulling subspace, certified by a friend."""
    tol = resolve_tol(tol)
    iterates = output_nulling_iterates(A, B, C, D, tol)
    V = iterates[-1]
    A, B, C, D = _check_quadruple(A, B, C, D)
    if V.dim == 0:
        F = np.zeros((B.shape[1], A.shape[0]))
        return OutputNullingCertificate(V=V, friend_F=F, Xi=np.zeros((0, 0)))
    F = friend_of(A, B, C, D, V, tol)
    return OutputNullingCertificate(V=V, friend_F=F, Xi=_restriction(A + B @ F, V))


def reachability_on(A, B, C, D, V: Subspace, tol=None, friend=None) -> Subspace:
    """Smallest (A + B F)-invariant subspace containing V intersected with B ker D.

    F is any friend of V (computed when not supplied); the result does not
    depend on that choice, which the tests exercise explicitly.
    """
    tol = resolve_tol(tol)
    A, B, C, D = _check_quadruple(A, B, C, D)
    if friend is None:
        friend = friend_of(A, B, C, D, V, tol)
    ker_D = rank_factor(D, tol).null_space
    B_kerD = orth(B @ ker_D.basis, tol, ambient_dim=A.shape[0])
    seed = subspace_intersection(V, B_kerD, tol)
    return krylov_reachable(A + B @ friend, seed.basis, tol)


def r0x(sigma: PopovTriple, X, tol=None) -> Subspace:
    """Reachable subspace of the closed loop driven through ker R.

    Computed from the pair (A_X, B G) and recomputed from (A - B R^+ S^T, B G);
    the two must agree, which makes the call self-checking.  The result is the
    same for every verified solution X.
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    split = input_split(sigma, tol)
    BG = sigma.B @ split.G
    via_closed_loop = krylov_reachable(dm.A_X, BG, tol)
    F = sigma.A - sigma.B @ pinv(sigma.R, tol) @ sigma.S.T
    via_open_loop = krylov_reachable(F, BG, tol)
    if not via_closed_loop.equals(via_open_loop, tol * 10):
        raise NumericalError(
            "closed-loop and open-loop computations of the kernel-reachable "
            "subspace disagree"
        )
    return via_closed_loop


@dataclass(frozen=True)
class KernelReport:
    is_output_nulling: bool
    friend_is_minus_kx: bool
    invariance_defect: float
    nulling_defect: float
    kernel_dim: int
    warnings: list = field(default_factory=list)


def check_kernel_output_nulling(sigma: PopovTriple, X, tol=None) -> KernelReport:
    """Check that ker X is closed-loop invariant and output-nulled.

    Only the equation residual is required of X (the kernel constraint is
    not needed for this property).  The report flags kernels whose dimension
    is decided by eigenvalues sitting close to the rank tolerance.
    """
    tol = resolve_tol(tol)
    cand = cgcare.verify_cgcare(sigma, X, tol)
    if not cand.solves_gcare:
        raise InputError(
            f"X does not solve the equation (residual {cand.residual_norm:.3g})"
        )
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    kerX = rank_factor(cand.X, tol).null_space
    scale = 1.0 + spectral_norm(dm.A_X)
    if kerX.dim == 0:
        inv_defect = 0.0
        null_defect = 0.0
    else:
        K = kerX.basis
        inv_defect = spectral_norm((np.eye(sigma.n) - K @ K.T) @ dm.A_X @ K)
        null_defect = spectral_norm(dm.C_X @ K)
    warnings = []
    lam = np.abs(np.linalg.eigvalsh(cand.X))
    cut = tol * sigma.n * max(1.0, float(lam.max()) if lam.size else 1.0)
    near = lam[(lam > cut) & (lam < 100 * cut)]
    if near.size:
        warnings.append(
            "kernel dimension is tolerance-sensitive: eigenvalues of X near the "
            f"rank cut ({', '.join(f'{v:.3g}' for v in near)})"
        )
    ok_inv = inv_defect <= tol * scale * sigma.n
    ok_null = null_defect <= tol * scale * sigma.n
    is_output_nulling = ok_inv and ok_null
    if not is_output_nulling and kerX.dim > 0:
        # an arbitrary friend could still certify the kernel
        fact = factor_popov(sigma, tol)
        try:
            friend_of(sigma.A, sigma.B, fact.C, fact.D, kerX, tol)
            is_output_nulling = True
        except InputError:
            pass
    return KernelReport(
        is_output_nulling=is_output_nulling,
        friend_is_minus_kx=ok_inv and ok_null,
        invariance_defect=inv_defect,
        nulling_defect=null_defect,
        kernel_dim=kerX.dim,
        warnings=warnings,
    )
