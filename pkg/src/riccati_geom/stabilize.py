"""Cost-preserving stabilization through the solution-independent subspace.

For a verified solution X, the subspace reachable through ker R is
output-nulling for the closed loop, so its spectrum can be reassigned by an
extra feedback term without touching the cost.  This module solves the
defining linear equation for the restriction/input pair, parameterizes the
solution set through the kernel of the coefficient block, places the free
eigenvalues, and returns the extra gain L = -Omega pinv(basis) whose columns
vanish on the orthogonal complement of the subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cgcare, geometry, sim
from .exceptions import InputError, NumericalError
from .linalg import (
    as_matrix,
    conjugate_closed,
    eig,
    krylov_reachable,
    pinv,
    rank_factor,
    resolve_seed,
    resolve_tol,
    spectra_match,
    spectral_norm,
)
from .popov import PopovTriple, factor_popov

__all__ = [
    "XiOmega",
    "StabilizationResult",
    "StabilizationReport",
    "xi_omega",
    "place_poles",
    "stabilizing_gain",
    "verify_stabilization",
]


@dataclass(frozen=True)
class XiOmega:
    """Particular solution and kernel parameterization of the restriction equation.

    [A_X; C_X] basis = [basis; 0] Xi + [B; D] Omega is solved by the
    pseudo-inverse; [H1; H2] spans the kernel of the coefficient block, so
    (Xi_hat + H1 K, Omega_hat + H2 K) ranges over all solutions.
    """

    Xi_hat: np.ndarray
    Omega_hat: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    basis: np.ndarray
    trivial: bool = False


@dataclass(frozen=True)
class StabilizationResult:
    Xi_hat: np.ndarray
    Omega_hat: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    K: np.ndarray
    Xi: np.ndarray
    Omega: np.ndarray
    L: np.ndarray
    assigned: np.ndarray
    untouched: np.ndarray
    basis: np.ndarray
    closed_loop_spectrum: np.ndarray
    hurwitz: bool


def xi_omega(sigma: PopovTriple, X, tol=None) -> XiOmega:
    """Solve the restriction equation on the solution-independent subspace.

    Returns the pseudo-inverse particular solution together with an
    orthonormal kernel basis.  A zero subspace yields the trivial signal
    (nothing to stabilize) rather than an error.
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    fact = factor_popov(sigma, tol)
    reach = geometry.r0x(sigma, cand.X, tol)
    r = reach.dim
    n, m, p = sigma.n, sigma.m, fact.p
    if r == 0:
        return XiOmega(
            Xi_hat=np.zeros((0, 0)),
            Omega_hat=np.zeros((m, 0)),
            H1=np.zeros((0, 0)),
            H2=np.zeros((m, 0)),
            basis=reach.basis,
            trivial=True,
        )
    P = reach.basis
    M = np.block([[P, sigma.B], [np.zeros((p, r)), fact.D]])
    N = np.vstack([dm.A_X @ P, dm.C_X @ P])
    sol = pinv(M, tol) @ N
    defect = spectral_norm(M @ sol - N)
    if defect > tol * (1.0 + spectral_norm(N)) * n:
        raise NumericalError(
            f"the restriction equation is inconsistent (defect {defect:.3g})"
        )
    kernel = rank_factor(M, tol).null_space.basis
    return XiOmega(
        Xi_hat=sol[:r, :],
        Omega_hat=sol[r:, :],
        H1=kernel[:r, :],
        H2=kernel[r:, :],
        basis=P,
        trivial=False,
    )


def _rescale_kernel(H1, H2, tol):
    """Rescale each kernel column by its smallest significant entry.

    Keeps small-integer kernel directions (as they appear in worked examples)
    exactly, without changing the parameterized solution set.
    """
    stacked = np.vstack([H1, H2])
    out = stacked.copy()
    for j in range(stacked.shape[1]):
        col = stacked[:, j]
        mags = np.abs(col)
        top = mags.max()
        if top <= tol:
            continue
        significant = np.flatnonzero(mags >= 0.05 * top)
        min_mag = mags[significant].min()
        ties = significant[np.isclose(mags[significant], min_mag, rtol=1e-9, atol=0.0)]
        pick = int(ties[-1])
        out[:, j] = col / col[pick]
    r = H1.shape[0]
    return out[:r, :], out[r:, :]


def _ctrb(F, b):
    cols = [b]
    for _ in range(F.shape[0] - 1):
        cols.append(F @ cols[-1])
    return np.hstack(cols)


def _ackermann_gain(F, b, targets):
    """Single-input gain k with sigma(F + b k) = targets (may be ill conditioned)."""
    r = F.shape[0]
    C = _ctrb(F, b)
    svals = np.linalg.svd(C, compute_uv=False)
    if svals[-1] <= 1e-12 * max(1.0, svals[0]):
        raise NumericalError("single-input reduction is uncontrollable")
    coeffs = np.poly(np.asarray(targets, dtype=complex))
    if np.max(np.abs(coeffs.imag)) > 1e-9 * max(1.0, np.max(np.abs(coeffs))):
        raise InputError("target spectrum must be closed under conjugation")
    coeffs = coeffs.real
    pF = np.zeros_like(F)
    for c in coeffs:
        pF = pF @ F + c * np.eye(r)
    e_last = np.zeros(r)
    e_last[-1] = 1.0
    k_classic = np.linalg.solve(C.T, e_last) @ pF
    return -k_classic.reshape(1, r)


def place_poles(Xi_hat, H1, targets, tol=None, seed=None, retries=5):
    """Gain K with sigma(Xi_hat + H1 K) equal to the target spectrum.

    Multi-input placement is reduced to a single input through a seeded random
    input combination (with a random preliminary feedback to break
    derogatory structure), assigned in the single-input normal form, and
    validated by a direct eigensolve; failed attempts are retried with fresh
    seeds.
    """
    tol = resolve_tol(tol)
    Xi_hat = as_matrix(Xi_hat, "Xi_hat") if np.asarray(Xi_hat).size else np.zeros((0, 0))
    H1 = as_matrix(H1, "H1") if np.asarray(H1).size else np.zeros((Xi_hat.shape[0], 0))
    r = Xi_hat.shape[0]
    k = H1.shape[1]
    targets = np.asarray(targets, dtype=complex).ravel()
    if targets.size != r:
        raise InputError(f"expected {r} target eigenvalues, got {targets.size}")
    if not conjugate_closed(targets, 1e-6):
        raise InputError("target spectrum must be closed under conjugation")
    if r == 0:
        return np.zeros((k, 0))
    if krylov_reachable(Xi_hat, H1, tol).dim != r:
        raise InputError("the pair (Xi_hat, H1) is not reachable; placement impossible")
    scale = 1.0 + float(np.max(np.abs(targets)))
    rng = np.random.default_rng(resolve_seed(seed))
    for attempt in range(retries + 1):
        if attempt == 0:
            K0 = np.zeros((k, r))
            w = np.ones(k)
        else:
            K0 = rng.standard_normal((k, r))
            w = rng.standard_normal(k)
        F = Xi_hat + H1 @ K0
        b = (H1 @ w).reshape(r, 1)
        try:
            k_row = _ackermann_gain(F, b, targets)
        except NumericalError:
            continue
        K = K0 + np.outer(w, k_row)
        achieved = eig(Xi_hat + H1 @ K)
        if spectra_match(achieved, targets, 1e-6 * scale):
            return K
    raise NumericalError(
        f"pole placement failed after {retries + 1} attempts; the pair is too ill conditioned"
    )


def stabilizing_gain(sigma: PopovTriple, X, targets=None, tol=None, seed=None) -> StabilizationResult:
    """Extra gain L that reassigns the free closed-loop spectrum at no cost.

    Composes the restriction-equation solve with pole placement (default
    targets -1, -2, ..., -r), then L = -Omega pinv(basis).  Only the
    eigenvalues of the closed loop restricted to the solution-independent
    subspace move; the quotient spectrum is untouched.  The result records
    whether the final closed loop is Hurwitz (it need not be when the
    untouched part is unstable).
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    xo = xi_omega(sigma, cand.X, tol)
    n, m = sigma.n, sigma.m
    r = xo.Xi_hat.shape[0]
    if xo.trivial:
        L = np.zeros((m, n))
        spectrum = eig(dm.A_X)
        return StabilizationResult(
            Xi_hat=xo.Xi_hat,
            Omega_hat=xo.Omega_hat,
            H1=xo.H1,
            H2=xo.H2,
            K=np.zeros((0, 0)),
            Xi=xo.Xi_hat,
            Omega=xo.Omega_hat,
            L=L,
            assigned=np.zeros(0, dtype=complex),
            untouched=spectrum,
            basis=xo.basis,
            closed_loop_spectrum=spectrum,
            hurwitz=bool(spectrum.size == 0 or np.max(spectrum.real) < 0),
        )
    if targets is None:
        targets = -np.arange(1.0, r + 1.0)
    targets = np.asarray(targets, dtype=complex).ravel()
    H1, H2 = _rescale_kernel(xo.H1, xo.H2, tol)
    K = place_poles(xo.Xi_hat, H1, targets, tol=tol, seed=seed)
    Xi = xo.Xi_hat + H1 @ K
    Omega = xo.Omega_hat + H2 @ K
    P = xo.basis
    L = -Omega @ pinv(P, tol)
    A_new = dm.A_X + sigma.B @ L
    Pc = rank_factor(P, tol).left_null_space.basis
    untouched = eig(Pc.T @ dm.A_X @ Pc)
    spectrum = eig(A_new)
    return StabilizationResult(
        Xi_hat=xo.Xi_hat,
        Omega_hat=xo.Omega_hat,
        H1=H1,
        H2=H2,
        K=K,
        Xi=Xi,
        Omega=Omega,
        L=L,
        assigned=eig(Xi),
        untouched=untouched,
        basis=P,
        closed_loop_spectrum=spectrum,
        hurwitz=bool(spectrum.size == 0 or np.max(spectrum.real) < 0),
    )


@dataclass(frozen=True)
class StabilizationReport:
    invariant_ok: bool
    output_nulling_ok: bool
    quotient_ok: bool
    cost_ok: bool
    defects: dict = field(default_factory=dict)
    cost_pairs: list = field(default_factory=list)

    @property
    def passed(self):
        return self.invariant_ok and self.output_nulling_ok and self.quotient_ok and self.cost_ok


def verify_stabilization(
    sigma: PopovTriple, X, result: StabilizationResult, tol=None, num_x0=3, seed=None
) -> StabilizationReport:
    """Check the cost-invariance guarantees of a stabilization result.

    (a) the subspace stays invariant under the modified loop, (b) it is
    annihilated by the closed-loop output map, (c) the quotient spectrum is
    unchanged, and (d) sampled initial states give (numerically) the same cost
    before and after the extra gain.
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    P = result.basis
    n = sigma.n
    scale = 1.0 + spectral_norm(dm.A_X)
    A_new = dm.A_X + sigma.B @ result.L

    if P.shape[1] == 0:
        inv_defect = 0.0
        null_defect = 0.0
        Pc = np.eye(n)
    else:
        Pc = rank_factor(P, tol).left_null_space.basis
        inv_defect = spectral_norm(Pc.T @ A_new @ P)
        null_defect = spectral_norm(dm.C_X @ P)
    quotient_before = eig(Pc.T @ dm.A_X @ Pc)
    quotient_after = eig(Pc.T @ A_new @ Pc)
    quotient_ok = spectra_match(quotient_after, quotient_before, 1e-6)

    rng = np.random.default_rng(resolve_seed(seed))
    cost_pairs = []
    cost_ok = True
    for _ in range(num_x0):
        x0 = rng.standard_normal(n)
        before = sim.cost(sigma, dm.K_X, x0, tol)
        after = sim.cost(sigma, dm.K_X - result.L, x0, tol)
        if before.finite and after.finite:
            ok = abs(before.J - after.J) <= 1e-6 * (1.0 + before.J) + 2.0 * (
                before.tail_bound + after.tail_bound
            )
        else:
            ok = not before.finite and not after.finite
        cost_pairs.append({"x0": x0, "before": before, "after": after, "ok": bool(ok)})
        cost_ok = cost_ok and ok

    return StabilizationReport(
        invariant_ok=inv_defect <= tol * scale * n,
        output_nulling_ok=null_defect <= tol * scale * n,
        quotient_ok=quotient_ok,
        cost_ok=bool(cost_ok),
        defects={"invariance": inv_defect, "output_nulling": null_defect},
        cost_pairs=cost_pairs,
    )
