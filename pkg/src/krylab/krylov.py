"""Krylov subspaces, truncated problems and CG/GMRES with full traces."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidInput, NotPositive, TruncationSingular
from .hilbert import DenseOperator, Frame, as_vector

Scheme = Literal["galerkin", "gmres", "cg"]
SCHEMES = ("galerkin", "gmres", "cg")
DEFAULT_BREAKDOWN_TOL = 1e-12


@dataclass(frozen=True)
class KrylovBasis:
    """Arnoldi data for K_n(A, g), n = 1..size.

    ``vectors`` holds ``size`` orthonormal columns, plus one trailing column
    (the next Arnoldi direction) when no breakdown occurred. ``hessenberg``
    has shape (size + 1, size) and satisfies
    ``A @ vectors[:, :n] == vectors[:, :n+1] @ hessenberg[:n+1, :n]``;
    at breakdown its last row holds the (tiny) residual norm.
    """

    vectors: np.ndarray
    hessenberg: np.ndarray
    size: int
    grade: int | None
    breakdown_tol: float
    op_norm: float
    g_norm: float

    def frame(self, n: int | None = None) -> Frame:
        n = self.size if n is None else n
        if not 0 <= n <= self.size:
            raise InvalidInput(f"n={n} exceeds the built basis size {self.size}")
        return Frame(self.vectors[:, :n])

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def frames(self) -> list[Frame]:
        return [self.frame(n) for n in range(1, self.size + 1)]


def _orthogonalize(w: np.ndarray, V: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Two passes of classical Gram-Schmidt against the columns of V."""
    for _ in range(2):
        c = V.conj().T @ w
        w = w - V @ c
        h += c
    return w


def krylov_basis(op: DenseOperator, g, n_max: int,
                 breakdown_tol: float = DEFAULT_BREAKDOWN_TOL) -> KrylovBasis:
    """Arnoldi recursion with one reorthogonalization pass.

    Stops at the grade m as soon as the new direction's residual is at most
    ``breakdown_tol * |A|``.
    """
    g = as_vector(g, op.dim)
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0:
        raise InvalidInput("datum g must be nonzero")
    if n_max < 1:
        raise InvalidInput("n_max must be at least 1")
    if breakdown_tol <= 0:
        raise InvalidInput("breakdown_tol must be positive")
    N = op.dim
    n_max = min(n_max, N)
    A = op.matrix
    a_norm = op.norm
    thresh = breakdown_tol * max(a_norm, np.finfo(float).tiny)
    V = np.zeros((N, n_max + 1), dtype=complex)
    H = np.zeros((n_max + 1, n_max), dtype=complex)
    V[:, 0] = g / g_norm
    grade = None
    size = n_max
    for j in range(n_max):
        h = np.zeros(j + 1, dtype=complex)
        w = _orthogonalize(A @ V[:, j], V[:, :j + 1], h)
        H[:j + 1, j] = h
        beta = float(np.linalg.norm(w))
        H[j + 1, j] = beta
        if beta <= thresh or j + 1 == N:
            grade = j + 1 if beta <= thresh else None
            size = j + 1
            if grade is None:
                # space exhausted: residual must vanish up to rounding
                grade = N
            break
        V[:, j + 1] = w / beta
    keep = size if grade is not None else size + 1
    vectors = V[:, :keep].copy()
    hess = H[:size + 1, :size].copy()
    vectors.setflags(write=False)
    hess.setflags(write=False)
    return KrylovBasis(vectors, hess, size, grade, breakdown_tol, a_norm, g_norm)


def grade(basis: KrylovBasis) -> int | None:
    return basis.grade


def invariance_defect(op: DenseOperator, basis: KrylovBasis) -> float:
    """|A V - P_K A V| for the largest frame; ~0 iff K is A-invariant."""
    V = basis.vectors[:, :basis.size]
    AV = op.matrix @ V
    return float(np.linalg.norm(AV - V @ (V.conj().T @ AV), 2))


def solve_truncated(op: DenseOperator, g, basis: KrylovBasis, scheme: Scheme, n: int) -> np.ndarray:
    """Solve the n-truncated problem and return f_n in K_n(A, g).

    ``galerkin`` and ``cg`` use the trial space K_n (Q_n = P_n) and solve
    the n x n compression; ``gmres`` uses the trial space A K_n, which is
    the least-squares problem over K_n.
    """
    g = as_vector(g, op.dim)
    if scheme not in SCHEMES:
        raise InvalidInput(f"unknown scheme {scheme!r}")
    if scheme == "cg" and not op.has("self_adjoint", "positive"):
        raise InvalidInput("cg needs an operator flagged self_adjoint and positive")
    if not 1 <= n <= basis.size:
        raise InvalidInput(f"n={n} outside 1..{basis.size}")
    V = basis.vectors[:, :n]
    rhs = np.zeros(n + 1, dtype=complex)
    rhs[0] = basis.g_norm
    if scheme == "gmres":
        y, *_ = np.linalg.lstsq(basis.hessenberg[:n + 1, :n], rhs, rcond=None)
        return V @ y
    Hn = basis.hessenberg[:n, :n]
    s = np.linalg.svd(Hn, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1e-300):
        raise TruncationSingular(f"compressed matrix singular at n={n}", n=n)
    y = np.linalg.solve(Hn, rhs[:n])
    return V @ y


@dataclass
class IterationTrace:
    """Per-iteration record; entry i belongs to iterate f_{i+1}."""

    residual: list[float] = field(default_factory=list)
    approximant_norm: list[float] = field(default_factory=list)
    distance: list[float] | None = None
    wall_time: list[float] = field(default_factory=list)
    converged: bool = False

    def record(self, residual, approx_norm, distance, elapsed):
        self.residual.append(float(residual))
        self.approximant_norm.append(float(approx_norm))
        if distance is not None:
            if self.distance is None:
                self.distance = []
            self.distance.append(float(distance))
        self.wall_time.append(float(elapsed))

    def __len__(self):
        return len(self.residual)

    def rows(self) -> list[dict]:
        out = []
        for i in range(len(self)):
            out.append({
                "n": i + 1,
                "residual": self.residual[i],
                "distance": None if self.distance is None else self.distance[i],
                "approximant_norm": self.approximant_norm[i],
            })
        return out


def _reference(ref, dim):
    return None if ref is None else as_vector(ref, dim)


def run_cg(op: DenseOperator, g, max_iter: int, res_tol: float = 1e-12,
           reference=None) -> tuple[np.ndarray, IterationTrace]:
    """Conjugate gradients from the zero vector.

    For a positive semidefinite operator and consistent data the iterates
    stay in ran A, so the limit is the minimal-norm solution.
    """
    if not op.has("self_adjoint", "positive"):
        raise InvalidInput("cg needs an operator flagged self_adjoint and positive")
    g = as_vector(g, op.dim)
    ref = _reference(reference, op.dim)
    A = op.matrix
    x = np.zeros(op.dim, dtype=complex)
    r = np.array(g, dtype=complex)
    p = r.copy()
    rr = float(np.vdot(r, r).real)
    g_norm = np.sqrt(rr)
    trace = IterationTrace()
    if g_norm == 0:
        trace.converged = True
        return x, trace
    t0 = time.perf_counter()
    for _ in range(max_iter):
        Ap = A @ p
        curv = float(np.vdot(p, Ap).real)
        pp = float(np.vdot(p, p).real)
        if curv < -1e-12 * pp:
            raise NotPositive(f"negative curvature <p, Ap> = {curv:.3e}")
        if curv <= 0:
            break
        alpha = rr / curv
        x = x + alpha * p
        r = r - alpha * Ap
        res = float(np.linalg.norm(g - A @ x))
        dist = None if ref is None else float(np.linalg.norm(x - ref))
        trace.record(res, np.linalg.norm(x), dist, time.perf_counter() - t0)
        if res <= res_tol * g_norm:
            trace.converged = True
            break
        rr_new = float(np.vdot(r, r).real)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, trace


def run_gmres(op: DenseOperator, g, max_iter: int, res_tol: float = 1e-12,
              reference=None, breakdown_tol: float = DEFAULT_BREAKDOWN_TOL
              ) -> tuple[np.ndarray, IterationTrace]:
    """GMRES from zero: Arnoldi with reorthogonalization plus Givens updates.

    Stagnation is not an error; it shows up as a flat residual trace.
    """
    g = as_vector(g, op.dim)
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0:
        raise InvalidInput("datum g must be nonzero")
    ref = _reference(reference, op.dim)
    A = op.matrix
    N = op.dim
    m = min(max_iter, N)
    thresh = breakdown_tol * max(op.norm, np.finfo(float).tiny)
    V = np.zeros((N, m + 1), dtype=complex)
    R = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m, dtype=complex)
    sn = np.zeros(m, dtype=complex)
    s = np.zeros(m + 1, dtype=complex)
    s[0] = g_norm
    V[:, 0] = g / g_norm
    x = np.zeros(N, dtype=complex)
    trace = IterationTrace()
    t0 = time.perf_counter()
    for j in range(m):
        h = np.zeros(j + 1, dtype=complex)
        w = _orthogonalize(A @ V[:, j], V[:, :j + 1], h)
        beta = float(np.linalg.norm(w))
        col = np.zeros(j + 2, dtype=complex)
        col[:j + 1] = h
        col[j + 1] = beta
        for i in range(j):
            a, b = col[i], col[i + 1]
            col[i] = np.conj(cs[i]) * a + np.conj(sn[i]) * b
            col[i + 1] = -sn[i] * a + cs[i] * b
        a, b = col[j], col[j + 1]
        rho = np.hypot(abs(a), abs(b))
        if rho == 0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j], sn[j] = a / rho, b / rho
        col[j] = rho
        col[j + 1] = 0.0
        s[j + 1] = -sn[j] * s[j]
        s[j] = np.conj(cs[j]) * s[j]
        R[:j + 1, j] = col[:j + 1]
        Rj = R[:j + 1, :j + 1]
        diag = np.abs(np.diag(Rj))
        if diag.min() > 1e-14 * max(diag.max(), 1e-300):
            y = solve_triangular(Rj, s[:j + 1])
        else:
            y, *_ = np.linalg.lstsq(Rj, s[:j + 1], rcond=None)
        x = V[:, :j + 1] @ y
        res = float(np.linalg.norm(g - A @ x))
        dist = None if ref is None else float(np.linalg.norm(x - ref))
        trace.record(res, np.linalg.norm(x), dist, time.perf_counter() - t0)
        if res <= res_tol * g_norm:
            trace.converged = True
            break
        if beta <= thresh:
            break
        V[:, j + 1] = w / beta
    return x, trace
