"""Doubled state/costate system, its system-matrix pencil and invariant zeros.

The doubled system stacks the state with the costate; its invariant zeros are
the points where the Rosenbrock system matrix drops below normal rank.  For a
verified solution X the pencil is equivalent (by feedback, a unimodular state
transform and an output injection, none of which move zeros) to a block pencil
from which the zeros can be read off: they are the eigenvalues of the
closed-loop map induced on the quotient modulo the subspace reachable through
ker R, together with their mirror images, and the pencil carries an eigenvalue
at infinity of multiplicity rank R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cgcare, linalg
from .exceptions import InputError, NumericalError
from .linalg import (
    as_matrix,
    eig,
    krylov_reachable,
    numerical_rank,
    resolve_seed,
    resolve_tol,
    sample_points_avoiding,
)
from .popov import PopovTriple, input_split

__all__ = [
    "HamiltonianSystem",
    "PencilDecomposition",
    "ChangeOfBasis",
    "build_hamiltonian",
    "rosenbrock_rank",
    "hamiltonian_pencil",
    "pencil_decompose",
    "invariant_zeros",
]


@dataclass(frozen=True)
class HamiltonianSystem:
    """Quadruple of the doubled system (state stacked with costate)."""

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Dhat: np.ndarray

    def as_quadruple(self):
        return self.Ahat, self.Bhat, self.Chat, self.Dhat


def build_hamiltonian(sigma: PopovTriple) -> HamiltonianSystem:
    """Assemble the doubled system [[A, 0], [-Q, -A^T]] with input [B; -S],
    output map [S^T  B^T] and feedthrough R."""
    n = sigma.n
    Ahat = np.block([[sigma.A, np.zeros((n, n))], [-sigma.Q, -sigma.A.T]])
    Bhat = np.vstack([sigma.B, -sigma.S])
    Chat = np.hstack([sigma.S.T, sigma.B.T])
    return HamiltonianSystem(Ahat=Ahat, Bhat=Bhat, Chat=Chat, Dhat=sigma.R.copy())


def rosenbrock_rank(quad, s, tol=None):
    """Rank of the system matrix [[A - sI, B], [C, D]] at the point s."""
    tol = resolve_tol(tol)
    if isinstance(quad, HamiltonianSystem):
        A, B, C, D = quad.as_quadruple()
    else:
        A, B, C, D = quad
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    n = A.shape[0]
    s = complex(s)
    top = np.hstack([A - s * np.eye(n), B.astype(complex)])
    bottom = np.hstack([C.astype(complex), D.astype(complex)])
    return numerical_rank(np.vstack([top, bottom]), tol)


def hamiltonian_pencil(sigma: PopovTriple, X, s, tol=None):
    """Evaluate the equivalent block pencil of the doubled system at s.

    [[A_X - sI, 0, B], [0, -(A_X^T + sI), 0], [0, B^T, R]]; its rank at any
    point equals the Rosenbrock rank of the doubled system there.
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    n, m = sigma.n, sigma.m
    s = complex(s)
    P = np.zeros((2 * n + m, 2 * n + m), dtype=complex)
    P[:n, :n] = dm.A_X - s * np.eye(n)
    P[:n, 2 * n :] = sigma.B
    P[n : 2 * n, n : 2 * n] = -(dm.A_X.T + s * np.eye(n))
    P[2 * n :, n : 2 * n] = sigma.B.T
    P[2 * n :, 2 * n :] = sigma.R
    return P


@dataclass(frozen=True)
class ChangeOfBasis:
    """Bookkeeping for the transforms that expose the pencil block structure.

    T is the orthogonal input split (range of R first), H the orthogonal state
    basis adapted to the kernel-reachable subspace; row_order/col_order are the
    permutations that reorder the transformed pencil into staircase form.
    """

    T: np.ndarray
    H: np.ndarray
    row_order: np.ndarray
    col_order: np.ndarray


@dataclass(frozen=True)
class PencilDecomposition:
    r: int
    m1: int
    A_X11: np.ndarray
    A_X12: np.ndarray
    Gamma_X: np.ndarray
    B21: np.ndarray
    B11: np.ndarray
    B12: np.ndarray
    R0block: np.ndarray
    normal_rank: int
    finite_zeros: np.ndarray
    infinite_multiplicity: int
    change_of_basis: ChangeOfBasis

    def transformed_pencil(self, sigma: PopovTriple, X, s, tol=None):
        """The staircase form of the pencil at s (orthogonal transforms plus
        the recorded permutations applied to hamiltonian_pencil)."""
        cb = self.change_of_basis
        n = cb.H.shape[0]
        W = np.zeros((2 * n + cb.T.shape[0],) * 2)
        W[:n, :n] = cb.H
        W[n : 2 * n, n : 2 * n] = cb.H
        W[2 * n :, 2 * n :] = cb.T
        P = hamiltonian_pencil(sigma, X, s, tol)
        Pt = W.T @ P @ W
        return Pt[np.ix_(cb.row_order, cb.col_order)]


def pencil_decompose(sigma: PopovTriple, X, tol=None) -> PencilDecomposition:
    """Block decomposition of the pencil for a verified solution X.

    Stages: orthogonal input split (R0block = restriction of R to its range,
    nonsingular), reachability staircase of (A_X, B2), then the block
    reordering.  Normal rank is 2n + rank R; the finite zeros are the
    eigenvalues of the quotient block together with their mirror images, and
    the eigenvalue at infinity has multiplicity rank R.
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    split = input_split(sigma, tol)
    n, m = sigma.n, sigma.m
    m1, m2 = split.m1, split.m2

    reach = krylov_reachable(dm.A_X, split.B2, tol)
    r = reach.dim
    H1 = reach.basis
    H2 = reach.complement().basis
    H = np.hstack([H1, H2])

    A11 = H1.T @ dm.A_X @ H1
    A12 = H1.T @ dm.A_X @ H2
    gamma = H2.T @ dm.A_X @ H2
    lower = linalg.spectral_norm(H2.T @ dm.A_X @ H1)
    if lower > tol * (1.0 + linalg.spectral_norm(dm.A_X)) * n:
        raise NumericalError("staircase transform left a nonzero lower block")
    B21 = H1.T @ split.B2
    B11 = H1.T @ split.B1
    B12 = H2.T @ split.B1
    R0block = split.T1.T @ sigma.R @ split.T1

    if r and krylov_reachable(A11, B21, tol).dim != r:
        raise NumericalError("the staircase pair is not reachable")

    gamma_eigs = eig(gamma)
    finite_zeros = np.sort_complex(np.concatenate([gamma_eigs, -gamma_eigs]))

    # state/costate/input coordinates in the transformed pencil
    x1 = np.arange(0, r)
    x2 = np.arange(r, n)
    l1 = np.arange(n, n + r)
    l2 = np.arange(n + r, 2 * n)
    u1 = np.arange(2 * n, 2 * n + m1)
    u2 = np.arange(2 * n + m1, 2 * n + m)
    row_order = np.concatenate([x1, l1, u2, x2, l2, u1])
    col_order = np.concatenate([x1, u2, l1, x2, l2, u1])

    return PencilDecomposition(
        r=r,
        m1=m1,
        A_X11=A11,
        A_X12=A12,
        Gamma_X=gamma,
        B21=B21,
        B11=B11,
        B12=B12,
        R0block=R0block,
        normal_rank=2 * n + m1,
        finite_zeros=finite_zeros,
        infinite_multiplicity=m1,
        change_of_basis=ChangeOfBasis(T=split.T, H=H, row_order=row_order, col_order=col_order),
    )


def _pencil_rank(sigma, X, s, tol):
    P = hamiltonian_pencil(sigma, X, s, tol)
    return numerical_rank(P, tol)


def invariant_zeros(sigma: PopovTriple, X, tol=None, seed=None, cross_check=True):
    """Invariant zeros of the doubled system, for a verified solution X.

    Computed from the quotient-block eigenvalues (cheap and well conditioned);
    a rank-scan layer then confirms every zero as a genuine, isolated rank
    drop of the pencil and checks seeded generic points at normal rank.
    """
    tol = resolve_tol(tol)
    dec = pencil_decompose(sigma, X, tol)
    zeros = dec.finite_zeros
    if not cross_check:
        return zeros
    for z in zeros:
        if _pencil_rank(sigma, X, z, tol) >= dec.normal_rank:
            raise NumericalError(f"no rank drop at the computed zero {z:.6g}")
        # a genuine drop is isolated: nudging the point restores normal rank
        delta = np.sqrt(tol) * (1.0 + abs(z))
        for offset in (delta, -delta):
            if _pencil_rank(sigma, X, z + offset, tol) != dec.normal_rank:
                raise NumericalError(
                    f"rank drop at {z:.6g} does not vanish under perturbation; "
                    "conditioning artifact suspected"
                )
    spectrum = np.concatenate([zeros, np.linalg.eigvals(sigma.A)]) if zeros.size else np.linalg.eigvals(sigma.A)
    points = sample_points_avoiding(
        np.concatenate([spectrum, -spectrum]), 5, seed=resolve_seed(seed)
    )
    for s in points:
        if _pencil_rank(sigma, X, s, tol) != dec.normal_rank:
            raise NumericalError(f"generic point {s:.6g} is not at normal rank")
    return zeros
