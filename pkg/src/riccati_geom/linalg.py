"""Dense matrix kernel: rank decisions, pseudo-inverse, eigenvalues,
Sylvester/Lyapunov solves, matrix exponential and orthonormal-subspace
arithmetic.

All routines work on plain numpy arrays and are pure functions; the heavy
factorizations are delegated to LAPACK through numpy/scipy.  A single global
tolerance ``DEFAULT_TOL`` drives every rank decision (relative to the largest
singular value, scaled by the larger matrix dimension) and can be overridden
per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import InputError, SolvabilityError

__all__ = [
    "DEFAULT_TOL",
    "DEFAULT_SEED",
    "Subspace",
    "RankFactorization",
    "as_matrix",
    "rank_factor",
    "pinv",
    "eig",
    "solve_sylvester",
    "expm",
    "orth",
    "subspace_ops",
    "subspace_sum",
    "subspace_intersection",
    "krylov_reachable",
    "sym_sqrt_psd",
    "sample_points_avoiding",
    "spectra_match",
    "conjugate_closed",
]

DEFAULT_TOL = 1e-8

# fixed seed for every randomized sampling routine ("R1CC" as big-endian bytes)
DEFAULT_SEED = int.from_bytes(b"R1CC", "big")


def resolve_tol(tol=None):
    return DEFAULT_TOL if tol is None else float(tol)


def resolve_seed(seed=None):
    return DEFAULT_SEED if seed is None else int(seed)


def as_matrix(M, name="matrix", allow_complex=False):
    """Coerce to a 2-d float (or complex) array and reject non-finite entries."""
    A = np.asarray(M)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got ndim={A.ndim}")
    if np.iscomplexobj(A):
        if not allow_complex:
            raise InputError(f"{name} must be real")
        A = A.astype(complex)
    else:
        A = A.astype(float)
    if A.size and not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    return A


def spectral_norm(M):
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def _rank_cut(singular_values, shape, tol):
    if len(singular_values) == 0:
        return 0.0
    return tol * max(shape) * float(singular_values[0])


def _fix_signs(basis):
    """Deterministic orientation: largest-magnitude entry of each column > 0."""
    B = np.array(basis)
    for j in range(B.shape[1]):
        col = B[:, j]
        if col.size == 0:
            continue
        i = int(np.argmax(np.abs(col)))
        if np.real(col[i]) < 0:
            B[:, j] = -col
    return B


@dataclass(frozen=True)
class Subspace:
    """A linear subspace carried as an orthonormal basis matrix.

    ``basis`` has shape (ambient_dim, dim) with orthonormal columns; the zero
    subspace is represented by a matrix with zero columns.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise InputError("subspace basis must be a 2-d array")
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T

    def complement(self):
        """Orthonormal basis of the orthogonal complement, as a Subspace."""
        U, _, _ = np.linalg.svd(np.eye(self.ambient_dim) - self.projector())
        return Subspace(_fix_signs(U[:, : self.ambient_dim - self.dim]))

    def contains(self, other, tol=None):
        tol = resolve_tol(tol)
        other_basis = other.basis if isinstance(other, Subspace) else np.asarray(other, float)
        if other_basis.shape[0] != self.ambient_dim:
            raise InputError("ambient dimensions differ")
        if other_basis.shape[1] == 0:
            return True
        defect = other_basis - self.basis @ (self.basis.T @ other_basis)
        return spectral_norm(defect) <= tol * max(1.0, spectral_norm(other_basis)) * self.ambient_dim

    def equals(self, other, tol=None):
        return self.dim == other.dim and self.contains(other, tol) and other.contains(self, tol)

    @staticmethod
    def zero(ambient_dim):
        return Subspace(np.zeros((ambient_dim, 0)))

    @staticmethod
    def full(ambient_dim):
        return Subspace(np.eye(ambient_dim))


@dataclass(frozen=True)
class RankFactorization:
    rank: int
    col_space: Subspace
    null_space: Subspace
    left_null_space: Subspace


def rank_factor(M, tol=None):
    """Rank-revealing SVD factorization.

    Returns the numerical rank together with orthonormal bases of the column
    space, the null space and the left null space.  Singular values below
    ``tol * max(shape) * sigma_max`` count as zero.
    """
    tol = resolve_tol(tol)
    A = as_matrix(M)
    if 0 in A.shape:
        rows, cols = A.shape
        return RankFactorization(
            0,
            Subspace(np.zeros((rows, 0))),
            Subspace(np.eye(cols)),
            Subspace(np.eye(rows)),
        )
    U, s, Vh = np.linalg.svd(A, full_matrices=True)
    cut = _rank_cut(s, A.shape, tol)
    rank = int(np.sum(s > cut))
    V = Vh.T
    return RankFactorization(
        rank,
        Subspace(_fix_signs(U[:, :rank])),
        Subspace(_fix_signs(V[:, rank:])),
        Subspace(_fix_signs(U[:, rank:])),
    )


def numerical_rank(M, tol=None):
    A = np.asarray(M)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    cut = _rank_cut(s, A.shape, resolve_tol(tol))
    return int(np.sum(s > cut))


def pinv(M, tol=None):
    """Moore-Penrose pseudo-inverse with the package-wide rank cut."""
    tol = resolve_tol(tol)
    A = as_matrix(M, allow_complex=True)
    if 0 in A.shape:
        return np.zeros((A.shape[1], A.shape[0]))
    return np.linalg.pinv(A, rcond=tol * max(A.shape))


def eig(M, vectors=False):
    """Eigenvalues of a square matrix, canonically sorted (real, then imag).

    With ``vectors=True`` returns ``(values, right_eigenvectors)`` where the
    columns of the eigenvector matrix follow the sorted order.
    """
    A = as_matrix(M, allow_complex=True)
    if A.shape[0] != A.shape[1]:
        raise InputError(f"eig needs a square matrix, got {A.shape}")
    if A.shape[0] == 0:
        vals = np.zeros(0, dtype=complex)
        return (vals, np.zeros((0, 0), dtype=complex)) if vectors else vals
    if vectors:
        vals, vecs = np.linalg.eig(A)
        order = np.lexsort((vals.imag, vals.real))
        return vals[order], vecs[:, order]
    vals = np.linalg.eigvals(A)
    return np.sort_complex(vals)


def solve_sylvester(A, B, C, tol=None):
    """Solve A X + X B + C = 0 (Bartels-Stewart via real Schur forms).

    Raises :class:`SolvabilityError` when the spectra of A and -B overlap,
    naming the (nearly) common eigenvalue.
    """
    tol = resolve_tol(tol)
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    n, m = A.shape[0], B.shape[0]
    if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
        raise InputError(
            f"incompatible shapes A{A.shape}, B{B.shape}, C{C.shape} for A X + X B + C = 0"
        )
    ea = np.linalg.eigvals(A)
    eb = np.linalg.eigvals(B)
    gaps = np.abs(ea[:, None] + eb[None, :])
    scale = spectral_norm(A) + spectral_norm(B) + 1.0
    i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
    if gaps[i, j] <= tol * scale:
        raise SolvabilityError(
            f"sigma(A) and sigma(-B) overlap near {ea[i]:.6g}: the Sylvester operator is singular"
        )
    return sla.solve_sylvester(A, B, -C)


def expm(M):
    """Matrix exponential (scaling-and-squaring with backward-error control)."""
    A = as_matrix(M, allow_complex=True)
    if A.shape[0] != A.shape[1]:
        raise InputError(f"expm needs a square matrix, got {A.shape}")
    return sla.expm(A)


def orth(columns, tol=None, ambient_dim=None):
    """Orthonormal basis of the span of the given columns, as a Subspace."""
    A = np.asarray(columns, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.shape[1] == 0 or A.size == 0:
        if ambient_dim is None:
            ambient_dim = A.shape[0]
        return Subspace.zero(ambient_dim)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    cut = _rank_cut(s, A.shape, resolve_tol(tol))
    return Subspace(_fix_signs(U[:, : int(np.sum(s > cut))]))


def subspace_sum(U, V, tol=None):
    if U.ambient_dim != V.ambient_dim:
        raise InputError("ambient dimensions differ")
    return orth(np.hstack([U.basis, V.basis]), tol, ambient_dim=U.ambient_dim)


def subspace_intersection(U, V, tol=None):
    """Intersection via the null space of [U | -V]."""
    if U.ambient_dim != V.ambient_dim:
        raise InputError("ambient dimensions differ")
    if U.dim == 0 or V.dim == 0:
        return Subspace.zero(U.ambient_dim)
    stacked = np.hstack([U.basis, -V.basis])
    null = rank_factor(stacked, tol).null_space
    if null.dim == 0:
        return Subspace.zero(U.ambient_dim)
    return orth(U.basis @ null.basis[: U.dim, :], tol, ambient_dim=U.ambient_dim)


def subspace_ops(U, V, tol=None):
    """Sum, intersection, containment and equality of two subspaces."""
    tol = resolve_tol(tol)
    if U.ambient_dim != V.ambient_dim:
        raise InputError("ambient dimensions differ")
    contains = U.contains(V, tol)
    return {
        "sum": subspace_sum(U, V, tol),
        "intersection": subspace_intersection(U, V, tol),
        "contains": contains,
        "equal": contains and V.contains(U, tol) and U.dim == V.dim,
    }


def krylov_reachable(A, Bcols, tol=None):
    """Smallest A-invariant subspace containing the column span of Bcols.

    Fixpoint of V <- im(Bcols) + A V; stationary within n steps.
    """
    tol = resolve_tol(tol)
    A = as_matrix(A, "A")
    B = np.asarray(Bcols, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise InputError(f"incompatible shapes A{A.shape}, B{B.shape}")
    V = orth(B, tol, ambient_dim=n)
    for _ in range(n):
        if V.dim in (0, n):
            break
        W = orth(np.hstack([V.basis, A @ V.basis]), tol, ambient_dim=n)
        if W.dim == V.dim:
            break
        V = W
    return V


def sym_sqrt_psd(M, tol=None):
    """Symmetric square root of a positive-semidefinite matrix.

    Eigenvalues in [-tol*lam_max, 0) are clamped to zero; anything more
    negative is rejected.
    """
    tol = resolve_tol(tol)
    A = as_matrix(M, "matrix")
    if A.shape[0] != A.shape[1]:
        raise InputError("square matrix required")
    if A.shape[0] == 0:
        return A.copy()
    S = 0.5 * (A + A.T)
    lam, V = np.linalg.eigh(S)
    lam_max = max(float(lam[-1]), 0.0)
    band = tol * max(lam_max, 1.0)
    if lam[0] < -band:
        raise InputError(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.T


def sample_points_avoiding(spectrum, count, seed=None, rng=None):
    """Deterministic complex sample points keeping clear of a given spectrum.

    Points are drawn on an annulus of radius ~1.5*(1 + spectral radius), far
    enough from every listed eigenvalue that resolvents stay well conditioned.
    """
    if rng is None:
        rng = np.random.default_rng(resolve_seed(seed))
    spectrum = np.asarray(spectrum, dtype=complex).ravel()
    rho = 1.0 + (float(np.max(np.abs(spectrum))) if spectrum.size else 0.0)
    points = []
    guard = 0.25 * rho
    for _ in range(1000):
        if len(points) == count:
            break
        radius = rho * rng.uniform(1.2, 1.8)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        s = radius * np.exp(1j * angle)
        if spectrum.size and np.min(np.abs(spectrum - s)) < guard:
            continue
        points.append(s)
    if len(points) < count:
        raise SolvabilityError("could not find sample points away from the spectrum")
    return np.array(points)


def spectra_match(got, expected, tol=1e-8):
    """Multiset comparison of two spectra by greedy nearest matching."""
    a = sorted(np.asarray(got, dtype=complex).ravel(), key=lambda z: (z.real, z.imag))
    b = sorted(np.asarray(expected, dtype=complex).ravel(), key=lambda z: (z.real, z.imag))
    if len(a) != len(b):
        return False
    scale = 1.0 + max((abs(z) for z in b), default=0.0)
    remaining = list(b)
    for z in a:
        gaps = [abs(z - w) for w in remaining]
        i = int(np.argmin(gaps))
        if gaps[i] > tol * scale:
            return False
        remaining.pop(i)
    return True


def conjugate_closed(values, tol=1e-8):
    """True when the multiset of complex values equals its own conjugate."""
    vals = np.asarray(values, dtype=complex).ravel()
    return spectra_match(vals, np.conj(vals), tol)
