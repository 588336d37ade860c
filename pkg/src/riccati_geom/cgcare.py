"""Generalized Riccati equation with a pseudo-inverted input weight.

The equation verified here is

    X A + A^T X - (S + X B) R^+ (S^T + B^T X) + Q = 0

together with the kernel constraint ker R <= ker(S + X B).  The module
computes the residual and constraint defect of a candidate X, derives the
closed-loop matrices, samples the square spectral factor W(s), estimates the
normal rank of the spectral density, and solves the equation best-effort by
reducing it to a regular Riccati problem on the quotient modulo the subspace
reachable through ker R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import linalg
from .exceptions import (
    InputError,
    NoStabilizingSolutionError,
    NumericalError,
    UnsupportedInstanceError,
)
from .linalg import (
    as_matrix,
    eig,
    krylov_reachable,
    pinv,
    resolve_seed,
    resolve_tol,
    sample_points_avoiding,
    spectral_norm,
    sym_sqrt_psd,
)
from .popov import PopovTriple, factor_popov, input_split, popov_function

__all__ = [
    "CandidateSolution",
    "DerivedMatrices",
    "derived_matrices",
    "gcare_residual",
    "verify_cgcare",
    "spectral_factor_sample",
    "normal_rank_popov",
    "solve_reduced",
]

STATUS_UNCHECKED = "unchecked"
STATUS_GCARE_ONLY = "gcare_only"
STATUS_CGCARE = "cgcare"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class CandidateSolution:
    """A symmetric candidate X with its verification outcome."""

    X: np.ndarray
    verified: str = STATUS_UNCHECKED
    residual_norm: float = float("nan")
    constraint_defect: float = float("nan")

    @property
    def is_cgcare(self):
        return self.verified == STATUS_CGCARE

    @property
    def solves_gcare(self):
        return self.verified in (STATUS_GCARE_ONLY, STATUS_CGCARE)


@dataclass(frozen=True)
class DerivedMatrices:
    """Closed-loop data associated with a pair (problem, X)."""

    Q_X: np.ndarray
    S_X: np.ndarray
    K_X: np.ndarray
    A_X: np.ndarray
    C_X: np.ndarray
    Q0X: np.ndarray
    Pi_X: np.ndarray


def _check_symmetric_x(sigma, X, tol):
    X = as_matrix(X, "X")
    if X.shape != (sigma.n, sigma.n):
        raise InputError(f"X must be {sigma.n}x{sigma.n}, got {X.shape}")
    if spectral_norm(X - X.T) > tol * max(1.0, spectral_norm(X)):
        raise InputError("X must be symmetric")
    return 0.5 * (X + X.T)


def derived_matrices(sigma: PopovTriple, X, tol=None) -> DerivedMatrices:
    """Shifted weights, gain and closed-loop matrices for a symmetric X.

    Q_X = Q + A^T X + X A,  S_X = S + X B,  K_X = R^+ S_X^T,  A_X = A - B K_X,
    C_X = C - D K_X for the canonical factorization (C, D) of the weight, and
    Q0X = Q - S R^+ S^T + X B R^+ B^T X.
    """
    tol = resolve_tol(tol)
    X = _check_symmetric_x(sigma, X, tol)
    Rp = pinv(sigma.R, tol)
    Q_X = sigma.Q + sigma.A.T @ X + X @ sigma.A
    S_X = sigma.S + X @ sigma.B
    K_X = Rp @ S_X.T
    A_X = sigma.A - sigma.B @ K_X
    fact = factor_popov(sigma, tol)
    C_X = fact.C - fact.D @ K_X
    Q0X = sigma.Q - sigma.S @ Rp @ sigma.S.T + X @ sigma.B @ Rp @ sigma.B.T @ X
    Pi_X = np.block([[Q_X, S_X], [S_X.T, sigma.R]])
    return DerivedMatrices(Q_X=Q_X, S_X=S_X, K_X=K_X, A_X=A_X, C_X=C_X, Q0X=Q0X, Pi_X=Pi_X)


def gcare_residual(sigma: PopovTriple, X, tol=None):
    """Residual X A + A^T X - (S + X B) R^+ (S^T + B^T X) + Q, as written."""
    tol = resolve_tol(tol)
    X = _check_symmetric_x(sigma, X, tol)
    S_X = sigma.S + X @ sigma.B
    return X @ sigma.A + sigma.A.T @ X - S_X @ pinv(sigma.R, tol) @ S_X.T + sigma.Q


def verify_cgcare(sigma: PopovTriple, X, tol=None) -> CandidateSolution:
    """Check a candidate against the equation and the kernel constraint.

    The constraint defect is the norm of (S + X B) G with G the orthogonal
    projector onto ker R.  Both defects are accepted relative to the combined
    scale 1 + |X| |A| + |Pi|.
    """
    tol = resolve_tol(tol)
    X = _check_symmetric_x(sigma, X, tol)
    residual = gcare_residual(sigma, X, tol)
    split = input_split(sigma, tol)
    constraint = (sigma.S + X @ sigma.B) @ split.G
    res_norm = spectral_norm(residual)
    con_norm = spectral_norm(constraint)
    scale = 1.0 + spectral_norm(X) * spectral_norm(sigma.A) + spectral_norm(sigma.Pi)
    res_ok = res_norm <= tol * scale
    con_ok = con_norm <= tol * scale
    if res_ok and con_ok:
        status = STATUS_CGCARE
    elif res_ok:
        status = STATUS_GCARE_ONLY
    else:
        status = STATUS_FAILED
    return CandidateSolution(
        X=X, verified=status, residual_norm=res_norm, constraint_defect=con_norm
    )


def require_cgcare(sigma: PopovTriple, X, tol=None) -> CandidateSolution:
    """Verify X and raise when it is not a solution of the constrained equation."""
    cand = verify_cgcare(sigma, X, tol)
    if not cand.is_cgcare:
        raise InputError(
            "X does not solve the constrained equation "
            f"(status={cand.verified}, residual={cand.residual_norm:.3g}, "
            f"constraint={cand.constraint_defect:.3g})"
        )
    return cand


def spectral_factor_sample(sigma: PopovTriple, X, s, tol=None):
    """Sample the square spectral factor W(s) = R^{1/2} R^+ S_X^T (sI-A)^{-1} B + R^{1/2}.

    For a verified X the identity W^T(-s) W(s) = Phi(s) holds at every sample
    point away from the poles (plain transpose; the coefficients are real).
    """
    tol = resolve_tol(tol)
    cand = require_cgcare(sigma, X, tol)
    s = complex(s)
    eigs_A = np.linalg.eigvals(sigma.A)
    from .popov import _check_not_pole

    _check_not_pole(s, eigs_A, tol, "the spectral factor")
    dm = derived_matrices(sigma, cand.X, tol)
    R_half = sym_sqrt_psd(sigma.R, tol)
    resolvent_B = np.linalg.solve(s * np.eye(sigma.n) - sigma.A, sigma.B.astype(complex))
    return R_half @ pinv(sigma.R, tol) @ dm.S_X.T @ resolvent_B + R_half


def normal_rank_popov(sigma: PopovTriple, X, tol=None, seed=None, samples=5):
    """Normal rank of the spectral density, estimated by seeded sampling.

    The maximum rank of Phi over the sample points must equal rank R for a
    verified solution; a mismatch is reported as an internal inconsistency.
    """
    tol = resolve_tol(tol)
    require_cgcare(sigma, X, tol)
    eigs_A = np.linalg.eigvals(sigma.A)
    points = sample_points_avoiding(
        np.concatenate([eigs_A, -eigs_A]), samples, seed=resolve_seed(seed)
    )
    rank_phi = 0
    for s in points:
        phi = popov_function(sigma, s, tol=tol)
        rank_phi = max(rank_phi, linalg.numerical_rank(phi, tol))
    rank_r = linalg.numerical_rank(sigma.R, tol)
    if rank_phi != rank_r:
        raise NumericalError(
            f"normal rank of the spectral density ({rank_phi}) does not match rank R ({rank_r})"
        )
    return rank_phi


# ---------------------------------------------------------------------------
# Reduction-based solver
# ---------------------------------------------------------------------------


def _match_targets_to_spectrum(targets, spectrum, tol):
    """Greedily match each target to the nearest spectrum point; return them."""
    targets = np.asarray(targets, dtype=complex).ravel()
    available = list(spectrum)
    chosen = []
    for t in targets:
        gaps = [abs(t - lam) for lam in available]
        i = int(np.argmin(gaps))
        chosen.append(available.pop(i))
    return np.array(chosen), np.array(available)


def _solve_care_selected(A, B, Q, S, R, targets, tol):
    """Regular Riccati solve by invariant-subspace selection.

    With ``targets=None`` the stable invariant subspace of the associated
    doubled matrix is selected (the classical stabilizing solution); otherwise
    the invariant subspace whose eigenvalues best match ``targets`` is used.
    """
    nn = A.shape[0]
    if nn == 0:
        return np.zeros((0, 0))
    Rinv = np.linalg.inv(R)
    F0 = A - B @ Rinv @ S.T
    G0 = B @ Rinv @ B.T
    Q0 = Q - S @ Rinv @ S.T
    ham = np.block([[F0, -G0], [-Q0, -F0.T]])
    ham_eigs = np.linalg.eigvals(ham)
    rho = 1.0 + float(np.max(np.abs(ham_eigs)))

    if targets is None:
        on_axis = ham_eigs[np.abs(ham_eigs.real) <= tol * rho]
        if on_axis.size:
            raise NoStabilizingSolutionError(
                "imaginary-axis eigenvalues obstruct the stabilizing solve: "
                + ", ".join(f"{z:.6g}" for z in np.sort_complex(on_axis)),
                eigenvalues=np.sort_complex(on_axis),
            )
        sort = "lhp"
    else:
        targets = np.asarray(targets, dtype=complex).ravel()
        if targets.size != nn:
            raise InputError(f"expected {nn} target eigenvalues, got {targets.size}")
        if not linalg.conjugate_closed(targets, 1e-6):
            raise InputError("target spectrum must be closed under conjugation")
        chosen, rest = _match_targets_to_spectrum(targets, ham_eigs, tol)

        def sort(re, im):
            z = complex(re, im)
            d_in = np.min(np.abs(chosen - z)) if chosen.size else np.inf
            d_out = np.min(np.abs(rest - z)) if rest.size else np.inf
            return d_in <= d_out

    T, Z, sdim = sla.schur(ham, output="real", sort=sort)
    if sdim != nn:
        raise UnsupportedInstanceError(
            f"invariant-subspace selection picked {sdim} eigenvalues instead of {nn}"
        )
    U1 = Z[:nn, :nn]
    U2 = Z[nn:, :nn]
    svals = np.linalg.svd(U1, compute_uv=False)
    if svals[-1] <= tol * max(1.0, svals[0]):
        raise UnsupportedInstanceError(
            "the selected invariant subspace is not the graph of a symmetric matrix"
        )
    X = np.linalg.solve(U1.T, U2.T).T
    return 0.5 * (X + X.T)


def solve_reduced(sigma: PopovTriple, targets=None, tol=None) -> CandidateSolution:
    """Best-effort solver: quotient out the subspace reachable through ker R.

    The subspace reachable by the pair (A - B R^+ S^T, B G) carries no cost and
    supports no solution mass, so candidates have the form X = diag(0, X22) in
    a basis adapted to it.  X22 is obtained from a regular Riccati equation on
    the quotient with inputs restricted to the range of R (a Lyapunov equation
    when R = 0).  By default the stable invariant subspace is selected; an
    explicit ``targets`` spectrum (of quotient size) selects a different
    invariant subspace and hence a different solution branch.

    The embedded candidate is verified before being returned; instances the
    reduction cannot certify raise :class:`UnsupportedInstanceError`.
    """
    tol = resolve_tol(tol)
    split = input_split(sigma, tol)
    F = sigma.A - sigma.B @ pinv(sigma.R, tol) @ sigma.S.T
    reach = krylov_reachable(F, split.B2, tol)
    r = reach.dim
    P = reach.basis
    Pc = reach.complement().basis
    H = np.hstack([P, Pc])

    A22 = Pc.T @ sigma.A @ Pc
    Q22 = Pc.T @ sigma.Q @ Pc
    B2red = Pc.T @ sigma.B @ split.T1
    S2red = Pc.T @ sigma.S @ split.T1
    R0blk = split.T1.T @ sigma.R @ split.T1

    if split.m1 == 0:
        # no regular input direction: the quotient equation is linear
        lam = np.linalg.eigvals(A22)
        gaps = np.abs(lam[:, None] + lam[None, :])
        if lam.size and gaps.min() <= tol * (1.0 + float(np.max(np.abs(lam)))):
            i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
            raise NoStabilizingSolutionError(
                f"quotient spectrum is mirrored near {lam[i]:.6g}; "
                "the quotient Lyapunov equation is singular",
                eigenvalues=np.sort_complex(np.array([lam[i], lam[j]])),
            )
        if targets is not None:
            raise InputError("targets cannot be honored when R = 0: the solution is unique")
        X22 = sla.solve_continuous_lyapunov(A22.T, -Q22) if A22.shape[0] else np.zeros((0, 0))
        X22 = 0.5 * (X22 + X22.T)
    else:
        svals = np.linalg.svd(R0blk, compute_uv=False)
        if svals[-1] <= tol * max(R0blk.shape) * svals[0]:
            raise UnsupportedInstanceError(
                "the restriction of R to its range is numerically singular"
            )
        X22 = _solve_care_selected(A22, B2red, Q22, S2red, R0blk, targets, tol)

    n = sigma.n
    X_tilde = np.zeros((n, n))
    X_tilde[r:, r:] = X22
    X = H @ X_tilde @ H.T
    X = 0.5 * (X + X.T)
    cand = verify_cgcare(sigma, X, tol)
    if not cand.is_cgcare:
        raise UnsupportedInstanceError(
            "the reduced solve produced a candidate that fails verification "
            f"(status={cand.verified}, residual={cand.residual_norm:.3g}, "
            f"constraint={cand.constraint_defect:.3g}); "
            "this instance is outside the scope of the reduction"
        )
    return cand


def quotient_spectrum(sigma: PopovTriple, X, tol=None):
    """Eigenvalues induced by the closed loop on the quotient modulo the
    subspace reachable through ker R (the part every solution shares)."""
    tol = resolve_tol(tol)
    cand = require_cgcare(sigma, X, tol)
    dm = derived_matrices(sigma, cand.X, tol)
    split = input_split(sigma, tol)
    reach = krylov_reachable(dm.A_X, split.B2, tol)
    Pc = reach.complement().basis
    return eig(Pc.T @ dm.A_X @ Pc)
