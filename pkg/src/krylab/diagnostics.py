"""Structural solvability diagnostics: Krylov reducibility, the Krylov
intersection, growth classes of the datum, distance traces and verdicts.

Every verdict is tolerance-qualified. A finite window can only witness
closure statements approximately, so reports carry the thresholds and
margins they were decided with.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import InvalidInput
from .hilbert import (DenseOperator, as_vector, frame_from_columns, orthogonal_complement,
                      principal_angles)
from .krylov import KrylovBasis

Outcome = Literal["krylov_solvable", "not_krylov_solvable", "inconclusive"]
Tri = Literal["yes", "no", "inconclusive"]

DEFAULT_ANGLE_TOL = 1e-8
DEFAULT_DISTANCE_TOL = 1e-8


def provenance(op: DenseOperator, g, window: int | None = None) -> str:
    """Short fingerprint of (A, g, window) attached to every report."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(op.matrix).tobytes())
    h.update(np.ascontiguousarray(as_vector(g, op.dim)).tobytes())
    h.update(repr(window).encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class ReducibilityReport:
    off_block_K_to_perp: float
    off_block_perp_to_K: float
    n_used: int
    at_grade: bool
    op_norm: float
    provenance: str = ""


@dataclass(frozen=True)
class IntersectionReport:
    principal_angles: tuple[float, ...]
    est_dim: int
    angle_tol: float
    margin: float
    n_used: int
    at_grade: bool
    note: str = ""
    provenance: str = ""


@dataclass(frozen=True)
class VectorClassReport:
    norms: tuple[float, ...]
    bounded_verdict: Tri
    B_g: float
    analytic_verdict: Tri
    C_g: float
    qa_partial_sums: tuple[float, ...]
    qa_verdict: Literal["diverging", "converging", "inconclusive"]
    qa_slope: float
    truncated_at: int | None = None


@dataclass(frozen=True)
class SolvabilityVerdict:
    outcome: Outcome
    chain: tuple[str, ...]
    tolerances: dict
    window_guard: str = "not_applicable"
    margin: float | None = None
    provenance: str = ""

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "chain": list(self.chain),
            "tolerances": dict(self.tolerances),
            "window_guard": self.window_guard,
            "margin": self.margin,
            "provenance": self.provenance,
        }


def _krylov_frame(basis: KrylovBasis) -> tuple[np.ndarray, int]:
    return basis.vectors[:, :basis.size], basis.size


def reducibility(op: DenseOperator, basis: KrylovBasis, prov: str = "") -> ReducibilityReport:
    """Off-diagonal blocks of A in the splitting K (+) K^perp.

    ``off_block_K_to_perp`` = |P_perp A P_K| (failure of A K in K),
    ``off_block_perp_to_K`` = |P_K A P_perp| (failure of A K^perp in K^perp).
    """
    V, n = _krylov_frame(basis)
    A = op.matrix
    AV = A @ V
    k_to_perp = float(np.linalg.norm(AV - V @ (V.conj().T @ AV), 2))
    VhA = V.conj().T @ A
    perp_to_k = float(np.linalg.norm(VhA - (VhA @ V) @ V.conj().T, 2))
    return ReducibilityReport(k_to_perp, perp_to_k, n, basis.grade is not None, op.norm, prov)


def krylov_intersection(op: DenseOperator, basis: KrylovBasis,
                        angle_tol: float = DEFAULT_ANGLE_TOL, prov: str = "") -> IntersectionReport:
    """Estimate dim(K cap A(K^perp)) from principal angles."""
    if angle_tol <= 0:
        raise InvalidInput("angle_tol must be positive")
    kframe = basis.frame()
    perp = orthogonal_complement(kframe)
    at_grade = basis.grade is not None
    if perp.dim == 0:
        return IntersectionReport((), 0, angle_tol, math.pi / 2, basis.size, at_grade,
                                  "Krylov space fills the window; complement is empty", prov)
    image = frame_from_columns(op.matrix @ perp.basis)
    if image.dim == 0:
        return IntersectionReport((), 0, angle_tol, math.pi / 2, basis.size, at_grade,
                                  "A annihilates the complement", prov)
    angles = principal_angles(kframe, image)
    accepted = angles[angles < angle_tol]
    rejected = angles[angles >= angle_tol]
    hi = float(accepted.max()) if accepted.size else 0.0
    lo = float(rejected.min()) if rejected.size else math.pi / 2
    return IntersectionReport(tuple(float(a) for a in angles), int(accepted.size), angle_tol,
                              lo - hi, basis.size, at_grade, "", prov)


def _loglog_slope(n: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log(y) against log(n)."""
    return float(np.polyfit(np.log(n), np.log(y), 1)[0])


def _tail(n: np.ndarray) -> slice:
    return slice(len(n) // 2, len(n))


def classify_norms(norms: Sequence[float], truncated_at: int | None = None) -> VectorClassReport:
    """Growth-class heuristics for a finite sequence |A^n g|, n = 0..n_max.

    Bounded and analytic verdicts fit the log-log slope of the n-th roots
    (of |A^n g| and |A^n g|/n! respectively) over the last half: slope
    <= 0.1 gives ``yes``, >= 0.3 gives ``no``. Quasi-analyticity compares
    the increments a_n = |A^n g|^(-1/n) with the harmonic series: the slope
    of log(n a_n) >= -0.1 gives ``diverging``, <= -0.3 ``converging``.
    """
    arr = np.asarray(norms, dtype=float)
    if arr.size < 5:
        raise InvalidInput("need norms for n = 0..n_max with n_max >= 4")
    if np.any(arr < 0):
        raise InvalidInput("norms must be nonnegative")
    n = np.arange(1, arr.size)
    vals = arr[1:]
    zero = np.nonzero(vals == 0)[0]
    if zero.size:
        # A^n g = 0: nilpotent on g, every class holds trivially
        m = int(zero[0])
        head = vals[:m]
        roots = head ** (1.0 / n[:m]) if m else np.zeros(0)
        b_g = float(roots.max()) if m else 0.0
        lf = np.array([math.lgamma(k + 1) for k in n[:m]])
        c_g = float(np.exp((np.log(head) - lf) / n[:m]).max()) if m else 0.0
        incr = head ** (-1.0 / n[:m]) if m else np.zeros(0)
        sums = tuple(float(s) for s in np.cumsum(incr))
        return VectorClassReport(tuple(float(x) for x in arr), "yes", b_g, "yes", c_g, sums,
                                 "diverging", float("inf"), truncated_at)
    logs = np.log(vals)
    roots = np.exp(logs / n)
    lf = np.array([math.lgamma(k + 1) for k in n])
    aroots = np.exp((logs - lf) / n)
    incr = np.exp(-logs / n)
    tail = _tail(n)
    if len(n[tail]) < 3:
        return VectorClassReport(tuple(float(x) for x in arr), "inconclusive", float(roots.max()),
                                 "inconclusive", float(aroots.max()),
                                 tuple(float(s) for s in np.cumsum(incr)), "inconclusive",
                                 float("nan"), truncated_at)

    def from_slope(slope: float) -> Tri:
        if slope <= 0.1:
            return "yes"
        if slope >= 0.3:
            return "no"
        return "inconclusive"

    b_slope = _loglog_slope(n[tail], roots[tail])
    a_slope = _loglog_slope(n[tail], aroots[tail])
    q_slope = _loglog_slope(n[tail], n[tail] * incr[tail])
    if q_slope >= -0.1:
        qa = "diverging"
    elif q_slope <= -0.3:
        qa = "converging"
    else:
        qa = "inconclusive"
    return VectorClassReport(
        norms=tuple(float(x) for x in arr),
        bounded_verdict=from_slope(b_slope),
        B_g=float(roots.max()),
        analytic_verdict=from_slope(a_slope),
        C_g=float(aroots.max()),
        qa_partial_sums=tuple(float(s) for s in np.cumsum(incr)),
        qa_verdict=qa,
        qa_slope=q_slope,
        truncated_at=truncated_at,
    )


def vector_class(op: DenseOperator, g, n_max: int) -> VectorClassReport:
    """Compute |A^n g| for n = 0..n_max and classify the growth."""
    if n_max < 4:
        raise InvalidInput("n_max must be at least 4")
    x = np.array(as_vector(g, op.dim), dtype=complex)
    norms = [float(np.linalg.norm(x))]
    truncated = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_max + 1):
            x = op.matrix @ x
            nx = float(np.linalg.norm(x))
            if not np.isfinite(nx):
                truncated = k
                break
            norms.append(nx)
    if len(norms) < 5:
        raise InvalidInput("sequence overflowed before n = 4")
    report = classify_norms(norms, truncated)
    if truncated is not None:
        return VectorClassReport(report.norms, "inconclusive", report.B_g, "inconclusive",
                                 report.C_g, report.qa_partial_sums, "inconclusive",
                                 report.qa_slope, truncated)
    return report


def solution_distance_trace(f_star, basis: KrylovBasis) -> list[float]:
    """Entry n-1 is |f* - P_{K_n} f*|, n = 1..size."""
    f = np.array(as_vector(f_star, basis.ambient_dim), dtype=complex)
    out = []
    r = f.copy()
    V = basis.vectors
    for j in range(basis.size):
        v = V[:, j]
        r = r - (v.conj() @ r) * v
        out.append(float(np.linalg.norm(r)))
    # final sweep against the whole frame removes accumulated rounding
    Vn = V[:, :basis.size]
    r2 = r - Vn @ (Vn.conj().T @ r)
    out[-1] = min(out[-1], float(np.linalg.norm(r2)))
    return out


def verdict(*, reducibility_report: ReducibilityReport | None = None,
            intersection_report: IntersectionReport | None = None,
            distance_trace: Sequence[float] | None = None,
            solution_norm: float | None = None,
            op: DenseOperator | None = None,
            window_guard: str = "not_applicable",
            distance_tol: float = DEFAULT_DISTANCE_TOL,
            reduced_tol: float = 1e-10) -> SolvabilityVerdict:
    """Combine diagnostics into a tolerance-qualified solvability verdict."""
    provs = {r.provenance for r in (reducibility_report, intersection_report)
             if r is not None and r.provenance}
    if len(provs) > 1:
        raise InvalidInput("reports come from different (A, g, window) triples")
    prov = provs.pop() if provs else ""
    inter = intersection_report
    red = reducibility_report
    tols = {"distance_tol": distance_tol, "reduced_tol": reduced_tol}
    if inter is not None:
        tols["angle_tol"] = inter.angle_tol
    chain: list[str] = []
    margin = inter.margin if inter is not None else None

    def done(outcome: Outcome) -> SolvabilityVerdict:
        return SolvabilityVerdict(outcome, tuple(chain), tols, window_guard, margin, prov)

    if window_guard == "violated":
        chain.append("window guard violated: outer-region mass above 1e-8")
        return done("inconclusive")

    invertible = op is not None and op.has("invertible_known")
    at_grade = bool((inter is not None and inter.at_grade) or (red is not None and red.at_grade))
    margin_ok = inter is not None and inter.margin >= 10 * inter.angle_tol
    reduced = red is not None and red.off_block_perp_to_K <= reduced_tol * max(red.op_norm, 1.0)

    structural: Outcome | None = None
    if not at_grade:
        chain.append("grade not reached: structural criteria untrusted at this window")
    elif reduced:
        chain.append("A is K(A,g)-reduced => Krylov solution exists")
        structural = "krylov_solvable"
        if inter is not None and inter.est_dim == 0 and margin_ok:
            chain.append("trivial Krylov intersection (implied by reducibility)")
            if invertible:
                chain.append("A invertible: trivial intersection <=> solution in closure of K")
    elif inter is not None and not margin_ok:
        chain.append("intersection margin below 10x angle_tol")
    elif inter is not None and inter.est_dim == 0:
        chain.append("trivial Krylov intersection => Krylov solution exists")
        if invertible:
            chain.append("A invertible: trivial intersection <=> solution in closure of K")
        structural = "krylov_solvable"
    elif inter is not None and invertible:
        chain.append("A invertible and intersection nontrivial => solution not in closure of K")
        structural = "not_krylov_solvable"

    witnessed: Outcome | None = None
    if distance_trace is not None and len(distance_trace):
        scale = max(solution_norm or 1.0, 1e-300)
        final = float(distance_trace[-1])
        if final <= distance_tol * max(1.0, scale):
            chain.append(f"solution within {final:.2e} of K_n: Krylov solution witnessed")
            witnessed = "krylov_solvable"
        elif min(distance_trace) >= (1 - 1e-10) * scale and inter is not None and inter.est_dim >= 1:
            chain.append("solution orthogonal to every computed K_n")
            chain.append(f"Krylov intersection nontrivial (est_dim={inter.est_dim})")
            if margin_ok:
                witnessed = "not_krylov_solvable"
            else:
                chain.append("intersection margin below 10x angle_tol")

    if structural and witnessed and structural != witnessed:
        chain.append("structural criterion and distance witness disagree")
        return done("inconclusive")
    outcome = structural or witnessed
    if outcome is None:
        return done("inconclusive")
    if outcome == "krylov_solvable" and reduced and op is not None and op.has("normal"):
        chain.append("normal and K(A,g)-reduced: Krylov solution unique and of minimal norm")
    return done(outcome)
