"""Problem data for the singular LQ setting.

A :class:`PopovTriple` packages the plant (A, B) together with the symmetric
cost weight blocks (Q, S, R).  This module validates positivity of the stacked
weight matrix through its Schur complements, factors it into an output pair
(C, D), splits the input space along the range/kernel of R, and evaluates the
associated rational spectral-density function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import InputError, PoleError
from .linalg import Subspace, as_matrix, pinv, rank_factor, resolve_tol, spectral_norm

__all__ = [
    "PopovTriple",
    "InputSplit",
    "OutputFactorization",
    "PopovReport",
    "check_popov",
    "factor_popov",
    "popov_function",
    "input_split",
]


@dataclass(frozen=True)
class PopovTriple:
    """Immutable problem data (A, B, Q, S, R) with Q and R symmetric."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        Q = as_matrix(self.Q, "Q")
        S = as_matrix(self.S, "S")
        R = as_matrix(self.R, "R")
        n = A.shape[0]
        if A.shape != (n, n):
            raise InputError(f"A must be square, got {A.shape}")
        m = B.shape[1]
        if B.shape != (n, m):
            raise InputError(f"B must be {n}x{m}, got {B.shape}")
        if Q.shape != (n, n):
            raise InputError(f"Q must be {n}x{n}, got {Q.shape}")
        if S.shape != (n, m):
            raise InputError(f"S must be {n}x{m}, got {S.shape}")
        if R.shape != (m, m):
            raise InputError(f"R must be {m}x{m}, got {R.shape}")
        for name, M in (("Q", Q), ("R", R)):
            scale = max(1.0, spectral_norm(M))
            if spectral_norm(M - M.T) > linalg.DEFAULT_TOL * scale:
                raise InputError(f"{name} must be symmetric")
        # store exact symmetrizations and freeze everything
        Q = 0.5 * (Q + Q.T)
        R = 0.5 * (R + R.T)
        for name, M in (("A", A), ("B", B), ("Q", Q), ("S", S), ("R", R)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def Pi(self):
        """The stacked symmetric weight matrix [[Q, S], [S^T, R]]."""
        return np.block([[self.Q, self.S], [self.S.T, self.R]])


@dataclass(frozen=True)
class InputSplit:
    """Input-space split along im(R) and ker(R).

    G is the orthogonal projector onto ker R; the orthonormal blocks T1, T2
    span im R and ker R, and B1 = B T1, B2 = B T2.
    """

    G: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    m1: int
    m2: int

    @property
    def T(self):
        return np.hstack([self.T1, self.T2])


@dataclass(frozen=True)
class OutputFactorization:
    """Minimal output pair with Q = C^T C, S = C^T D, R = D^T D."""

    C: np.ndarray
    D: np.ndarray

    @property
    def p(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class PopovReport:
    psd: bool
    ker_r_in_ker_s: bool
    schur_primal_psd: bool
    ker_q_in_ker_st: bool
    schur_dual_psd: bool
    identities: bool
    defects: dict = field(default_factory=dict)

    @property
    def passed(self):
        return (
            self.psd
            and self.ker_r_in_ker_s
            and self.schur_primal_psd
            and self.ker_q_in_ker_st
            and self.schur_dual_psd
            and self.identities
        )


def _min_eig_defect(M):
    """How far a symmetric matrix is from being positive semidefinite."""
    if M.shape[0] == 0:
        return 0.0
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    return max(0.0, -float(lam[0]))


def _kernel_defect(M, K, tol):
    """Norm of M restricted to the kernel of K."""
    null = rank_factor(K, tol).null_space
    if null.dim == 0:
        return 0.0
    return spectral_norm(M @ null.basis)


def check_popov(sigma: PopovTriple, tol=None) -> PopovReport:
    """Evaluate both Schur-complement characterizations of Pi >= 0.

    The primal triple is (R >= 0, ker R in ker S, Q - S R^+ S^T >= 0), the dual
    one swaps the roles of Q and R.  The report also checks the absorbing
    identities S R^+ R = S and S^T Q^+ Q = S^T that follow from positivity.
    """
    tol = resolve_tol(tol)
    Q, S, R = sigma.Q, sigma.S, sigma.R
    pi_scale = max(1.0, spectral_norm(sigma.Pi))
    s_scale = max(1.0, spectral_norm(S))

    defects = {}
    defects["psd"] = _min_eig_defect(sigma.Pi)
    defects["ker_r_in_ker_s"] = _kernel_defect(S, R, tol)
    defects["schur_primal_psd"] = _min_eig_defect(Q - S @ pinv(R, tol) @ S.T)
    defects["ker_q_in_ker_st"] = _kernel_defect(S.T, Q, tol)
    defects["schur_dual_psd"] = _min_eig_defect(R - S.T @ pinv(Q, tol) @ S)
    defects["identity_srr"] = spectral_norm(S @ pinv(R, tol) @ R - S)
    defects["identity_stqq"] = spectral_norm(S.T @ pinv(Q, tol) @ Q - S.T)

    return PopovReport(
        psd=defects["psd"] <= tol * pi_scale,
        ker_r_in_ker_s=defects["ker_r_in_ker_s"] <= tol * s_scale,
        schur_primal_psd=defects["schur_primal_psd"] <= tol * pi_scale,
        ker_q_in_ker_st=defects["ker_q_in_ker_st"] <= tol * s_scale,
        schur_dual_psd=defects["schur_dual_psd"] <= tol * pi_scale,
        identities=(
            defects["identity_srr"] <= tol * s_scale
            and defects["identity_stqq"] <= tol * s_scale
        ),
        defects=defects,
    )


def factor_popov(sigma: PopovTriple, tol=None) -> OutputFactorization:
    """Minimal factorization Pi = [C D]^T [C D] via symmetric eigendecomposition.

    Rows are scaled by the square roots of the kept eigenvalues, so the number
    of output rows equals the numerical rank of Pi.  Negative eigenvalues
    inside the tolerance band are clamped to zero; anything below raises.
    """
    tol = resolve_tol(tol)
    Pi = sigma.Pi
    lam, V = np.linalg.eigh(0.5 * (Pi + Pi.T))
    lam_max = max(float(lam[-1]), 0.0)
    band = tol * max(lam_max, 1.0)
    if lam[0] < -band:
        raise InputError(
            f"Pi is indefinite (min eigenvalue {lam[0]:.3g}); cannot factor"
        )
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    V = V[:, order]
    keep = lam > band
    rows = (V[:, keep] * np.sqrt(lam[keep])).T
    # deterministic sign: make the largest-magnitude entry of each row positive
    for i in range(rows.shape[0]):
        j = int(np.argmax(np.abs(rows[i])))
        if rows[i, j] < 0:
            rows[i] = -rows[i]
    n = sigma.n
    return OutputFactorization(C=rows[:, :n], D=rows[:, n:])


def _resolvent_columns(A, B, s):
    return np.linalg.solve(s * np.eye(A.shape[0]) - A, B.astype(complex))


def _check_not_pole(s, eigenvalues, tol, what):
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    if eigenvalues.size == 0:
        return
    rho = 1.0 + float(np.max(np.abs(eigenvalues)))
    if np.min(np.abs(eigenvalues - s)) <= tol * rho:
        raise PoleError(f"sample point {s} is (numerically) a pole of {what}")


def popov_function(sigma: PopovTriple, s, X=None, tol=None):
    """Spectral density Phi(s), an m x m complex matrix.

    Phi(s) = [B^T (-sI - A^T)^{-1}  I] Pi [(sI - A)^{-1} B ; I].  When a
    symmetric X is supplied the same value is computed through the shifted
    weight matrix built from Q + A^T X + X A and S + X B; the result is
    X-independent, which the tests exercise as an identity.
    """
    tol = resolve_tol(tol)
    s = complex(s)
    eigs_A = np.linalg.eigvals(sigma.A)
    _check_not_pole(s, np.concatenate([eigs_A, -eigs_A]), tol, "the spectral density")
    right = np.vstack([_resolvent_columns(sigma.A, sigma.B, s), np.eye(sigma.m)])
    # B^T (-sI - A^T)^{-1} = ((-sI - A)^{-1} B)^T  (plain transpose, real data)
    left_cols = np.linalg.solve(-s * np.eye(sigma.n) - sigma.A, sigma.B.astype(complex))
    left = np.hstack([left_cols.T, np.eye(sigma.m)])
    if X is None:
        weight = sigma.Pi
    else:
        X = as_matrix(X, "X")
        if X.shape != (sigma.n, sigma.n):
            raise InputError(f"X must be {sigma.n}x{sigma.n}")
        if spectral_norm(X - X.T) > tol * max(1.0, spectral_norm(X)):
            raise InputError("X must be symmetric")
        Q_X = sigma.Q + sigma.A.T @ X + X @ sigma.A
        S_X = sigma.S + X @ sigma.B
        weight = np.block([[Q_X, S_X], [S_X.T, sigma.R]])
    return left @ weight @ right


def input_split(sigma: PopovTriple, tol=None) -> InputSplit:
    """Split the input space along im(R) and ker(R).

    T1 and T2 are orthonormal bases of the range and kernel of the symmetric
    positive-semidefinite R; G = T2 T2^T is the orthogonal projector onto
    ker R and coincides with I - R^+ R.
    """
    tol = resolve_tol(tol)
    R = sigma.R
    lam, V = np.linalg.eigh(R)
    lam_max = max(float(lam[-1]) if lam.size else 0.0, 0.0)
    band = tol * max(lam_max, 1.0)
    if lam.size and lam[0] < -band:
        raise InputError(f"R must be positive semidefinite (min eigenvalue {lam[0]:.3g})")
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    V = V[:, order]
    m1 = int(np.sum(lam > band))
    T1 = V[:, :m1].copy()
    T2 = V[:, m1:].copy()
    # deterministic sign convention per column
    for T in (T1, T2):
        for j in range(T.shape[1]):
            i = int(np.argmax(np.abs(T[:, j])))
            if T[i, j] < 0:
                T[:, j] = -T[:, j]
    G = T2 @ T2.T
    return InputSplit(
        G=G,
        T1=T1,
        T2=T2,
        B1=sigma.B @ T1,
        B2=sigma.B @ T2,
        m1=m1,
        m2=sigma.m - m1,
    )


def kernel_of_r(sigma: PopovTriple, tol=None) -> Subspace:
    """Orthonormal basis of ker R as a Subspace (convenience wrapper)."""
    return Subspace(input_split(sigma, tol).T2)
