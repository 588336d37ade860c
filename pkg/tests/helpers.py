"""Shared test utilities: worked fixtures, seeded instance generators and
independent oracles (Kronecker-vectorized Sylvester, scipy Riccati solves)."""

from __future__ import annotations

import json
import zlib
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from riccati_geom import PopovTriple, verify_cgcare
from riccati_geom.linalg import DEFAULT_SEED

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name):
    return FIXTURES / f"{name}.json"


def _num(v):
    return float(Fraction(v)) if isinstance(v, str) else float(v)


def load_fixture_triple(name):
    doc = json.loads(fixture_path(name).read_text())
    mats = {k: np.array([[_num(v) for v in row] for row in doc[k]]) for k in "ABQSR"}
    candidates = {
        entry.get("label", f"X{i}"): np.array(
            [[_num(v) for v in row] for row in entry["X"]]
        )
        for i, entry in enumerate(doc.get("candidates", []))
    }
    sigma = PopovTriple(A=mats["A"], B=mats["B"], Q=mats["Q"], S=mats["S"], R=mats["R"])
    return sigma, candidates


def example1():
    return load_fixture_triple("example1")


def example2():
    return load_fixture_triple("example2")


def example3():
    return load_fixture_triple("example3")


def remark_example():
    return load_fixture_triple("remark")


def example2_family(t):
    """The one-parameter family of equation solutions for the second fixture."""
    return np.array([[9.0 * t / 16.0 + 1.0, 3.0 * t / 4.0], [3.0 * t / 4.0, t]])


def gcare_only_instance():
    """Hand-built instance with a solution of the equation that violates the
    kernel constraint (alongside the constrained solution)."""
    x22 = 2.0 * np.sqrt(2.0) - 2.0
    A = np.array([[1.0, x22], [0.0, -2.0]])
    B = np.array([[1.0, 1.0], [1.0, 0.0]])
    C = np.array([[0.0, 2.0], [0.0, 0.0]])
    D = np.array([[0.0, 0.0], [1.0, 0.0]])
    sigma = PopovTriple(A=A, B=B, Q=C.T @ C, S=C.T @ D, R=D.T @ D)
    x_constrained = np.diag([0.0, x22])
    x_gcare_only = np.diag([2.0, x22])
    return sigma, x_constrained, x_gcare_only


def rng_for(test_name, seed=DEFAULT_SEED):
    """Independent deterministic stream per test."""
    return np.random.default_rng([seed, zlib.crc32(test_name.encode())])


def random_orthogonal(rng, n):
    if n == 0:
        return np.zeros((0, 0))
    M = rng.standard_normal((n, n))
    Qf, Rf = np.linalg.qr(M)
    return Qf * np.sign(np.diag(Rf))


def sylvester_kron_oracle(A, B, C):
    """Solve A X + X B + C = 0 by Kronecker vectorization (column-major vec)."""
    n, m = A.shape[0], B.shape[0]
    op = np.kron(np.eye(m), A) + np.kron(B.T, np.eye(n))
    x = np.linalg.solve(op, -C.flatten(order="F"))
    return x.reshape((n, m), order="F")


def random_psd_triple(rng, n=3, m=2, p=3, rank_deficient_r=True):
    """Random problem data with a positive-semidefinite weight (from an output
    pair), optionally with singular R."""
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m))
    if rank_deficient_r and m > 1:
        D[:, rng.integers(0, m)] = 0.0
    return PopovTriple(A=A, B=B, Q=C.T @ C, S=C.T @ D, R=D.T @ D)


def _min_mirror_gap(values):
    vals = np.concatenate([values, -values])
    gaps = [
        abs(vals[i] - vals[j])
        for i in range(len(vals))
        for j in range(i + 1, len(vals))
    ]
    return min(gaps) if gaps else np.inf


def random_verified_instance(rng, n=None, r=None, m1=None, m2=None, max_draws=60):
    """Seeded problem with a known constrained solution, built in an adapted
    basis and scrambled by orthogonal state/input transforms.

    The reachable-through-ker-R block carries no cost; the quotient block is a
    regular Riccati problem solved independently through scipy, which keeps
    the construction decoupled from the package's own solver.  Returns
    (sigma, X) with X already verified.
    """
    for _ in range(max_draws):
        n_ = int(rng.integers(3, 6)) if n is None else n
        r_ = int(rng.integers(1, n_ - 1)) if r is None else r
        m1_ = int(rng.integers(0, 3)) if m1 is None else m1
        m2_ = int(rng.integers(1, 3)) if m2 is None else m2
        q = n_ - r_
        p_ = m1_ + 2

        A11 = rng.standard_normal((r_, r_))
        Btop2 = rng.standard_normal((r_, m2_))
        ctrb = np.hstack([np.linalg.matrix_power(A11, k) @ Btop2 for k in range(r_)])
        if np.linalg.matrix_rank(ctrb) != r_:
            continue
        A12 = rng.standard_normal((r_, q))
        A22 = rng.standard_normal((q, q))
        Btop1 = rng.standard_normal((r_, m1_))
        Bbot1 = rng.standard_normal((q, m1_))
        C2 = rng.standard_normal((p_, q))
        D1 = rng.standard_normal((p_, m1_))
        if m1_ and np.linalg.matrix_rank(D1) != m1_:
            continue
        Q22 = C2.T @ C2
        S21 = C2.T @ D1
        R0 = D1.T @ D1
        try:
            if m1_ == 0:
                lam = np.linalg.eigvals(A22)
                if np.min(np.abs(lam[:, None] + lam[None, :])) < 1e-3:
                    continue
                X22 = sla.solve_continuous_lyapunov(A22.T, -Q22)
            else:
                X22 = sla.solve_continuous_are(A22, Bbot1, Q22, R0, s=S21)
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            continue
        X22 = 0.5 * (X22 + X22.T)
        if not np.all(np.isfinite(X22)) or np.linalg.norm(X22) > 1e3:
            continue
        closed = A22 - Bbot1 @ np.linalg.pinv(R0) @ (S21.T + Bbot1.T @ X22)
        if _min_mirror_gap(np.linalg.eigvals(closed)) < 1e-3:
            continue

        A_t = np.block([[A11, A12], [np.zeros((q, r_)), A22]])
        B_t = np.block([[Btop1, Btop2], [Bbot1, np.zeros((q, m2_))]])
        C_t = np.hstack([np.zeros((p_, r_)), C2])
        D_t = np.hstack([D1, np.zeros((p_, m2_))])
        X_t = np.zeros((n_, n_))
        X_t[r_:, r_:] = X22

        T = random_orthogonal(rng, n_)
        U = random_orthogonal(rng, m1_ + m2_)
        sigma = PopovTriple(
            A=T @ A_t @ T.T,
            B=T @ B_t @ U.T,
            Q=T @ (C_t.T @ C_t) @ T.T,
            S=T @ (C_t.T @ D_t) @ U.T,
            R=U @ (D_t.T @ D_t) @ U.T,
        )
        X = T @ X_t @ T.T
        X = 0.5 * (X + X.T)
        cand = verify_cgcare(sigma, X)
        if not cand.is_cgcare:
            continue
        return sigma, cand.X
    raise RuntimeError("instance generator exhausted its draw budget")


def random_regular_instance(rng, n=4, m=2, max_draws=60):
    """Random stabilizable problem with nonsingular R and its scipy solution."""
    for _ in range(max_draws):
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((n + 1, n))
        D = rng.standard_normal((n + 1, m))
        R = D.T @ D
        if np.linalg.matrix_rank(R) != m or np.linalg.cond(R) > 1e4:
            continue
        sigma = PopovTriple(A=A, B=B, Q=C.T @ C, S=C.T @ D, R=R)
        try:
            X = sla.solve_continuous_are(A, B, sigma.Q, R, s=sigma.S)
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            continue
        X = 0.5 * (X + X.T)
        if not np.all(np.isfinite(X)) or np.linalg.norm(X) > 1e4:
            continue
        return sigma, X
    raise RuntimeError("regular instance generator exhausted its draw budget")
