"""File-driven command line front end.

Problems are JSON documents holding the plant and weight matrices (entries may
be numbers or exact rational strings such as "33/4"), optional labelled
candidate solutions, initial states and target spectra.  Commands:

    riccati-geom check     problem.json
    riccati-geom verify    problem.json
    riccati-geom zeros     problem.json --candidate X
    riccati-geom stabilize problem.json --candidate X [--targets -2,-3]
    riccati-geom simulate  problem.json --candidate X --x0 1,0 [--with-l]

Reports are emitted as human-readable text or machine-readable JSON
(``--format json``); identical inputs produce byte-identical JSON.  Exit
codes: 0 all requested checks passed, 1 a check failed, 2 input error,
3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__, cgcare, geometry, hamiltonian, linalg, popov, sim, stabilize
from .exceptions import InputError, NumericalError, RiccatiGeomError
from .linalg import DEFAULT_SEED, DEFAULT_TOL
from .popov import PopovTriple

__all__ = ["ProblemFile", "Report", "load_problem", "run_command", "main"]

ENV_TOL = "RICCATI_GEOM_TOL"


# ---------------------------------------------------------------------------
# Problem files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemFile:
    sigma: PopovTriple
    candidates: dict
    x0: list
    targets: list | None
    tol: float | None
    seed: int | None

    def candidate(self, label):
        if label is None:
            if len(self.candidates) == 1:
                return next(iter(self.candidates.items()))
            raise InputError(
                "a candidate label is required when the file defines "
                f"{len(self.candidates)} candidates"
            )
        if label not in self.candidates:
            known = ", ".join(sorted(self.candidates)) or "none"
            raise InputError(f"unknown candidate label '{label}' (known: {known})")
        return label, self.candidates[label]


def _parse_entry(value, where):
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse entry '{value}' at {where}: {exc}") from exc
    raise InputError(f"entry at {where} must be a number or rational string, got {type(value).__name__}")


def _parse_matrix(rows, name, shape=None):
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise InputError(f"{name} must be an array of rows")
    data = [[_parse_entry(v, f"{name}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(rows)]
    widths = {len(r) for r in data}
    if len(widths) > 1:
        raise InputError(f"{name} has ragged rows")
    M = np.array(data, dtype=float) if data else np.zeros((0, 0))
    if shape is not None and M.shape != shape:
        raise InputError(f"{name} must have shape {shape}, got {M.shape}")
    return M


def parse_complex(text):
    """Parse 'a+bi' style complex scalars ('-3', '1+2i', '0.5-1.5i')."""
    cleaned = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(cleaned)
    except ValueError as exc:
        raise InputError(f"cannot parse complex value '{text}'") from exc


def load_problem(path) -> ProblemFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read problem file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InputError("problem file must hold a JSON object")
    for key in ("A", "B", "Q", "S", "R"):
        if key not in doc:
            raise InputError(f"problem file is missing matrix '{key}'")
    A = _parse_matrix(doc["A"], "A")
    n = A.shape[0]
    B = _parse_matrix(doc["B"], "B")
    m = B.shape[1] if B.size else len(doc["B"][0]) if doc["B"] else 0
    if "n" in doc and int(doc["n"]) != n:
        raise InputError(f"declared n={doc['n']} but A is {A.shape}")
    if "m" in doc and int(doc["m"]) != m:
        raise InputError(f"declared m={doc['m']} but B is {B.shape}")
    Q = _parse_matrix(doc["Q"], "Q", (n, n))
    S = _parse_matrix(doc["S"], "S", (n, m))
    R = _parse_matrix(doc["R"], "R", (m, m))
    sigma = PopovTriple(A=A, B=B, Q=Q, S=S, R=R)

    candidates = {}
    for i, entry in enumerate(doc.get("candidates", [])):
        if not isinstance(entry, dict) or "X" not in entry:
            raise InputError(f"candidates[{i}] must be an object with an 'X' matrix")
        label = str(entry.get("label", f"X{i}"))
        if label in candidates:
            raise InputError(f"duplicate candidate label '{label}'")
        candidates[label] = _parse_matrix(entry["X"], f"candidates[{i}].X", (n, n))

    x0 = [np.array([_parse_entry(v, f"x0[{i}]") for v in vec], dtype=float) for i, vec in enumerate(doc.get("x0", []))]
    for i, vec in enumerate(x0):
        if vec.size != n:
            raise InputError(f"x0[{i}] must have {n} entries")
    targets = [parse_complex(t) for t in doc["targets"]] if "targets" in doc else None
    tol = float(doc["tol"]) if "tol" in doc else None
    seed = int(doc["seed"]) if "seed" in doc else None
    return ProblemFile(sigma=sigma, candidates=candidates, x0=x0, targets=targets, tol=tol, seed=seed)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Report:
    command: str
    checks: list = field(default_factory=list)
    objects: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add_check(self, name, passed, defect, detail=""):
        self.checks.append(
            {"name": name, "passed": bool(passed), "defect": float(defect), "detail": detail}
        )

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def to_payload(self):
        return _jsonify(
            {
                "command": self.command,
                "passed": self.passed,
                "checks": self.checks,
                "objects": self.objects,
                "provenance": self.provenance,
            }
        )

    def to_json(self):
        return json.dumps(self.to_payload(), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"command: {self.command}"]
        for key, value in sorted(self.provenance.items()):
            lines.append(f"  {key}: {value}")
        for c in self.checks:
            mark = "PASS" if c["passed"] else "FAIL"
            detail = f"  [{c['detail']}]" if c["detail"] else ""
            lines.append(f"{mark}  {c['name']}  (defect={c['defect']:.3e}){detail}")
        for name, obj in self.objects.items():
            lines.append(f"{name}: {_tojson_text(obj)}")
        lines.append("result: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _round_float(x):
    if x != x:  # nan
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [_jsonify(v) for v in obj.tolist()]
        return _jsonify(obj.tolist())
    if isinstance(obj, complex):
        return {"re": _round_float(obj.real), "im": _round_float(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round_float(float(obj))
    return obj


def _tojson_text(obj):
    return json.dumps(_jsonify(obj), sort_keys=True)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _provenance(tol, seed):
    return {"tol": tol, "seed": seed, "version": __version__}


def cmd_check(problem: ProblemFile, tol, seed) -> Report:
    report = Report(command="check", provenance=_provenance(tol, seed))
    pr = popov.check_popov(problem.sigma, tol)
    for name in (
        "psd",
        "ker_r_in_ker_s",
        "schur_primal_psd",
        "ker_q_in_ker_st",
        "schur_dual_psd",
    ):
        report.add_check(name, getattr(pr, name), pr.defects[name])
    report.add_check(
        "identities",
        pr.identities,
        max(pr.defects["identity_srr"], pr.defects["identity_stqq"]),
    )
    return report


def cmd_verify(problem: ProblemFile, tol, seed) -> Report:
    report = Report(command="verify", provenance=_provenance(tol, seed))
    sigma = problem.sigma
    if not problem.candidates:
        raise InputError("verify requires at least one candidate in the problem file")
    bases = {}
    for label, X in problem.candidates.items():
        cand = cgcare.verify_cgcare(sigma, X, tol)
        report.add_check(
            f"{label}: equation residual",
            cand.verified != cgcare.STATUS_FAILED,
            cand.residual_norm,
        )
        report.add_check(
            f"{label}: kernel constraint",
            cand.is_cgcare,
            cand.constraint_defect,
            detail=f"status={cand.verified}",
        )
        report.objects[f"{label}.status"] = cand.verified
        if cand.solves_gcare:
            kr = geometry.check_kernel_output_nulling(sigma, cand.X, tol)
            report.add_check(
                f"{label}: ker X closed-loop invariant and output-nulled",
                kr.is_output_nulling,
                max(kr.invariance_defect, kr.nulling_defect),
            )
        if cand.is_cgcare:
            reach = geometry.r0x(sigma, cand.X, tol)
            bases[label] = reach
            dm = cgcare.derived_matrices(sigma, cand.X, tol)
            x_defect = linalg.spectral_norm(cand.X @ reach.basis)
            report.add_check(f"{label}: X annihilates the shared subspace", x_defect <= tol * 10, x_defect)
            rstar = geometry.reachability_on(
                sigma.A,
                sigma.B,
                *_cd(sigma, tol),
                linalg.rank_factor(cand.X, tol).null_space,
                tol,
            )
            report.add_check(
                f"{label}: reachability subspace on ker X matches",
                rstar.equals(reach, tol * 10),
                0.0 if rstar.equals(reach, tol * 10) else 1.0,
            )
            report.objects[f"{label}.r0_basis"] = reach.basis
            report.objects[f"{label}.closed_loop_spectrum"] = linalg.eig(dm.A_X)
    labels = sorted(bases)
    for a, b in zip(labels, labels[1:]):
        equal = bases[a].equals(bases[b], tol * 10)
        report.add_check(
            f"shared subspace equal across {a} and {b}", equal, 0.0 if equal else 1.0
        )
    return report


def _cd(sigma, tol):
    fact = popov.factor_popov(sigma, tol)
    return fact.C, fact.D


def cmd_zeros(problem: ProblemFile, label, tol, seed) -> Report:
    report = Report(command="zeros", provenance=_provenance(tol, seed))
    sigma = problem.sigma
    label, X = problem.candidate(label)
    report.provenance["candidate"] = label
    dec = hamiltonian.pencil_decompose(sigma, X, tol)
    zeros = hamiltonian.invariant_zeros(sigma, X, tol, seed=seed)
    report.objects["finite_zeros"] = zeros
    report.objects["normal_rank"] = dec.normal_rank
    report.objects["r"] = dec.r
    report.objects["m1"] = dec.m1
    report.objects["infinite_multiplicity"] = dec.infinite_multiplicity
    report.objects["quotient_block_spectrum"] = linalg.eig(dec.Gamma_X)
    report.add_check("zero set mirrored across the imaginary axis",
                     linalg.spectra_match(zeros, -zeros, 1e-8), 0.0)

    ham = hamiltonian.build_hamiltonian(sigma)
    table = []
    points = [complex(z) for z in zeros]
    eigs_ax = linalg.eig(cgcare.derived_matrices(sigma, X, tol).A_X)
    points.extend(complex(z) for z in eigs_ax)
    points.extend(complex(z) for z in -eigs_ax)
    grid = linalg.sample_points_avoiding(
        np.concatenate([zeros, eigs_ax, -eigs_ax]) if zeros.size else np.concatenate([eigs_ax, -eigs_ax]),
        4,
        seed=seed,
    )
    points.extend(complex(z) for z in grid)
    seen = set()
    for s in points:
        key = (round(s.real, 9), round(s.imag, 9))
        if key in seen:
            continue
        seen.add(key)
        rank_rosen = hamiltonian.rosenbrock_rank(ham, s, tol)
        rank_pencil = linalg.numerical_rank(hamiltonian.hamiltonian_pencil(sigma, X, s, tol), tol)
        table.append(
            {
                "s": complex(s),
                "rosenbrock_rank": rank_rosen,
                "pencil_rank": rank_pencil,
                "drop": rank_pencil < dec.normal_rank,
            }
        )
        report.add_check(
            f"pencil and system-matrix ranks agree at s={s:.6g}",
            rank_rosen == rank_pencil,
            abs(rank_rosen - rank_pencil),
        )
    report.objects["rank_table"] = table
    return report


def cmd_stabilize(problem: ProblemFile, label, targets, tol, seed) -> Report:
    report = Report(command="stabilize", provenance=_provenance(tol, seed))
    sigma = problem.sigma
    label, X = problem.candidate(label)
    report.provenance["candidate"] = label
    if targets is None:
        targets = problem.targets
    result = stabilize.stabilizing_gain(sigma, X, targets=targets, tol=tol, seed=seed)
    ver = stabilize.verify_stabilization(sigma, X, result, tol=tol, seed=seed)
    report.objects["L"] = result.L
    report.objects["K"] = result.K
    report.objects["assigned"] = result.assigned
    report.objects["untouched"] = result.untouched
    report.objects["closed_loop_spectrum"] = result.closed_loop_spectrum
    report.objects["hurwitz"] = result.hurwitz
    report.add_check("subspace invariant under modified loop", ver.invariant_ok, ver.defects["invariance"])
    report.add_check("subspace output-nulled", ver.output_nulling_ok, ver.defects["output_nulling"])
    report.add_check("quotient spectrum untouched", ver.quotient_ok, 0.0 if ver.quotient_ok else 1.0)
    report.add_check("cost unchanged on sampled initial states", ver.cost_ok, 0.0 if ver.cost_ok else 1.0)
    return report


def cmd_simulate(problem: ProblemFile, label, x0, horizon, steps, with_l, targets, tol, seed) -> Report:
    report = Report(command="simulate", provenance=_provenance(tol, seed))
    sigma = problem.sigma
    label, X = problem.candidate(label)
    report.provenance["candidate"] = label
    if x0 is None:
        if not problem.x0:
            raise InputError("simulate requires an initial state (--x0 or file x0)")
        x0 = problem.x0[0]
    dm = cgcare.derived_matrices(sigma, X, tol)
    traj = sim.simulate(dm.A_X, x0, horizon, steps)
    report.objects["times"] = traj.times
    report.objects["states"] = traj.states
    c = sim.cost(sigma, dm.K_X, x0, tol)
    report.objects["cost"] = {"J": c.J, "method": c.method, "tail_bound": c.tail_bound}
    check = sim.optimal_cost_check(sigma, X, x0, tol)
    report.objects["quadratic_value"] = check.quadratic_value
    report.objects["value_certified"] = check.value_certified
    if check.note:
        report.objects["note"] = check.note
    report.add_check(
        "cost matches quadratic form" if check.value_certified else "cost reported (uncertified value)",
        check.matches if check.value_certified else True,
        check.relative_gap if np.isfinite(check.relative_gap) else 1.0,
    )
    if with_l:
        result = stabilize.stabilizing_gain(sigma, X, targets=targets, tol=tol, seed=seed)
        c_after = sim.cost(sigma, dm.K_X - result.L, x0, tol)
        report.objects["cost_with_gain"] = {
            "J": c_after.J,
            "method": c_after.method,
            "tail_bound": c_after.tail_bound,
        }
        if c.finite and c_after.finite:
            same = abs(c.J - c_after.J) <= 1e-6 * (1.0 + c.J) + 2.0 * (c.tail_bound + c_after.tail_bound)
            defect = abs(c.J - c_after.J)
        else:
            same = c.finite == c_after.finite
            defect = 0.0 if same else 1.0
        report.add_check("extra gain leaves the cost unchanged", same, defect)
    return report


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="riccati-geom",
        description="Verify and analyze solutions of the constrained generalized "
        "Riccati equation for singular LQ problems.",
    )
    parser.add_argument("command", choices=["check", "verify", "zeros", "stabilize", "simulate"])
    parser.add_argument("problem", help="path to the problem JSON file")
    parser.add_argument("--candidate", help="label of the candidate solution to analyze")
    parser.add_argument("--targets", help="comma-separated target eigenvalues, e.g. '-2,-3' or '1+2i,1-2i'")
    parser.add_argument("--x0", help="comma-separated initial state")
    parser.add_argument("--horizon", type=float, default=5.0, help="simulation horizon (seconds)")
    parser.add_argument("--steps", type=int, default=21, help="number of trajectory samples")
    parser.add_argument("--with-l", action="store_true", help="simulate: also apply the extra stabilizing gain")
    parser.add_argument("--tol", type=float, default=None, help=f"rank/acceptance tolerance (default {DEFAULT_TOL} or ${ENV_TOL})")
    parser.add_argument("--seed", type=int, default=None, help="seed for sampled points (default fixed)")
    parser.add_argument("--format", choices=["text", "json"], default="text")
    return parser


def run_command(args) -> Report:
    problem = load_problem(args.problem)
    if args.tol is not None:
        tol = args.tol
    elif os.environ.get(ENV_TOL):
        try:
            tol = float(os.environ[ENV_TOL])
        except ValueError as exc:
            raise InputError(f"cannot parse ${ENV_TOL}: {exc}") from exc
    elif problem.tol is not None:
        tol = problem.tol
    else:
        tol = DEFAULT_TOL
    seed = args.seed if args.seed is not None else (problem.seed if problem.seed is not None else DEFAULT_SEED)
    targets = [parse_complex(t) for t in args.targets.split(",")] if args.targets else None
    x0 = np.array([float(Fraction(v)) for v in args.x0.split(",")], dtype=float) if args.x0 else None

    if args.command == "check":
        return cmd_check(problem, tol, seed)
    if args.command == "verify":
        return cmd_verify(problem, tol, seed)
    if args.command == "zeros":
        return cmd_zeros(problem, args.candidate, tol, seed)
    if args.command == "stabilize":
        return cmd_stabilize(problem, args.candidate, targets, tol, seed)
    if args.command == "simulate":
        return cmd_simulate(
            problem, args.candidate, x0, args.horizon, args.steps, args.with_l, targets, tol, seed
        )
    raise InputError(f"unknown command {args.command}")  # pragma: no cover


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        report = run_command(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except RiccatiGeomError as exc:  # pragma: no cover
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(report.to_json() if args.format == "json" else report.to_text())
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
