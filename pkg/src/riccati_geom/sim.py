"""Closed-loop trajectories and infinite-horizon quadratic cost.

Trajectories are propagated exactly through the matrix exponential.  The cost
of a static feedback u = -K x is computed from a Lyapunov equation whenever
the closed loop is strictly stable; otherwise it falls back to adaptive
quadrature on geometrically growing panels with a certified tail bound, which
also covers marginally stable loops whose cost integrand still decays (the
non-decaying modes being annihilated by the weight).  A divergent integral is
reported as an infinite-cost value, never as an exception.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import cgcare
from .exceptions import InputError
from .linalg import as_matrix, expm, resolve_tol, spectral_norm
from .popov import PopovTriple

__all__ = ["SimulationResult", "CostResult", "simulate", "cost", "optimal_cost_check"]

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(24)
_PANEL_CAP = 2**20


@dataclass(frozen=True)
class SimulationResult:
    """Sampled closed-loop trajectory, optionally annotated with a cost."""

    times: np.ndarray
    states: np.ndarray
    cost: float | None = None
    cost_method: str | None = None
    tail_bound: float | None = None


@dataclass(frozen=True)
class CostResult:
    J: float
    method: str
    tail_bound: float

    @property
    def finite(self):
        return np.isfinite(self.J)


def simulate(A_cl, x0, horizon, steps) -> SimulationResult:
    """Propagate x(t) = exp(A_cl t) x0 on an equispaced grid (no stepper error)."""
    A_cl = as_matrix(A_cl, "A_cl")
    n = A_cl.shape[0]
    if A_cl.shape != (n, n):
        raise InputError("A_cl must be square")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != n:
        raise InputError(f"x0 must have {n} entries")
    steps = int(steps)
    if steps < 2:
        raise InputError("steps must be at least 2")
    times = np.linspace(0.0, float(horizon), steps)
    states = np.empty((steps, n))
    for i, t in enumerate(times):
        states[i] = expm(A_cl * t) @ x0
    return SimulationResult(times=times, states=states)


def _integrand_factory(A_cl, Q_cl, x0):
    def f(t):
        x = expm(A_cl * t) @ x0
        return float(x @ Q_cl @ x)

    return f


def _panel_integral(f, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * sum(w * f(mid + half * t) for t, w in zip(_GAUSS_NODES, _GAUSS_WEIGHTS))


def _quadrature_cost(A_cl, Q_cl, x0):
    """Composite quadrature on panels [0,h], [h,2h], [2h,4h], ...

    The horizon keeps doubling until the last panel is negligible against the
    accumulated value; the tail bound extrapolates the panel contributions
    geometrically.  Persistent growth of the running total signals a divergent
    integral.
    """
    f = _integrand_factory(A_cl, Q_cl, x0)
    h = 1.0 / (1.0 + spectral_norm(A_cl))
    scale0 = 1.0 + spectral_norm(Q_cl) * (1.0 + float(x0 @ x0))
    total = 0.0
    contributions = []
    left = 0.0
    right = h
    for k in range(_PANEL_CAP):
        if not np.isfinite(right):
            return float("inf"), float("inf")
        c = _panel_integral(f, left, right)
        if not np.isfinite(c):
            return float("inf"), float("inf")
        total += c
        contributions.append(c)
        if total > 1e15 * scale0:
            return float("inf"), float("inf")
        if k >= 3 and all(
            ci <= 1e-10 * max(total, 1e-30) + 1e-300 for ci in contributions[-2:]
        ):
            prev, last = contributions[-2], contributions[-1]
            if prev > 0 and last > 0 and last < prev:
                q = min(last / prev, 0.99)
                tail = last * q / (1.0 - q)
            else:
                tail = last
            return max(total, 0.0), tail
        left, right = right, 2.0 * right
    return float("inf"), float("inf")


def cost(sigma: PopovTriple, K, x0, tol=None) -> CostResult:
    """Infinite-horizon cost of the feedback u = -K x from the initial state x0.

    With A_cl = A - B K and Q_cl = Q - S K - K^T S^T + K^T R K the value is
    x0^T P x0 from A_cl^T P + P A_cl + Q_cl = 0 when A_cl is strictly stable
    (method "lyapunov", zero tail), and the panel quadrature otherwise.
    """
    tol = resolve_tol(tol)
    K = as_matrix(K, "K")
    if K.shape != (sigma.m, sigma.n):
        raise InputError(f"K must be {sigma.m}x{sigma.n}, got {K.shape}")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sigma.n:
        raise InputError(f"x0 must have {sigma.n} entries")
    A_cl = sigma.A - sigma.B @ K
    Q_cl = sigma.Q - sigma.S @ K - K.T @ sigma.S.T + K.T @ sigma.R @ K
    Q_cl = 0.5 * (Q_cl + Q_cl.T)
    lam = np.linalg.eigvals(A_cl)
    rho = 1.0 + float(np.max(np.abs(lam))) if lam.size else 1.0
    if lam.size and float(np.max(lam.real)) < -tol * rho:
        P = sla.solve_continuous_lyapunov(A_cl.T, -Q_cl)
        J = float(x0 @ P @ x0)
        return CostResult(J=max(J, 0.0), method="lyapunov", tail_bound=0.0)
    J, tail = _quadrature_cost(A_cl, Q_cl, x0)
    return CostResult(J=J, method="quadrature", tail_bound=tail)


@dataclass(frozen=True)
class OptimalCostReport:
    feedback_cost: CostResult
    quadratic_value: float
    relative_gap: float
    value_certified: bool
    matches: bool
    note: str


def optimal_cost_check(sigma: PopovTriple, X, x0, tol=None) -> OptimalCostReport:
    """Compare the cost of u = -K_X x against the quadratic form x0^T X x0.

    When X is not positive semidefinite the quadratic form is not a certified
    value function (the cost is nonnegative while the form may not be), so the
    report only flags the discrepancy instead of asserting equality.
    """
    tol = resolve_tol(tol)
    cand = cgcare.require_cgcare(sigma, X, tol)
    dm = cgcare.derived_matrices(sigma, cand.X, tol)
    x0 = np.asarray(x0, dtype=float).ravel()
    result = cost(sigma, dm.K_X, x0, tol)
    value = float(x0 @ cand.X @ x0)
    lam_min = float(np.min(np.linalg.eigvalsh(cand.X)))
    certified = lam_min >= -tol * max(1.0, spectral_norm(cand.X))
    if result.finite:
        gap = abs(result.J - value) / (1.0 + abs(value))
    else:
        gap = float("inf")
    matches = np.isfinite(gap) and gap <= max(1e-6, 2.0 * result.tail_bound)
    if certified:
        note = "" if matches else "cost and quadratic form disagree"
    else:
        note = "candidate not value-function certified (X has negative eigenvalues)"
    return OptimalCostReport(
        feedback_cost=result,
        quadratic_value=value,
        relative_gap=gap,
        value_certified=certified,
        matches=matches,
        note=note,
    )
