"""Finite-dimensional complex Hilbert space primitives.

Vectors are plain 1-D complex ``numpy`` arrays; :func:`as_vector` is the
single entry point that validates them. Subspaces are carried by
:class:`Frame` (an orthonormal basis stored column-wise) and operators by
:class:`DenseOperator` (a square matrix plus verified structure flags).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInput, NoSolution, SingularOperator

DEFAULT_TOL = 1e-8
FLAG_TOL = 1e-12
COND_LIMIT = 1e12

FLAGS = frozenset({"self_adjoint", "skew_adjoint", "normal", "positive", "invertible_known"})


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite, 1-D complex array (copied, read-only)."""
    v = np.array(x, dtype=complex).reshape(-1)
    if v.size == 0:
        raise InvalidInput("vector must have at least one entry")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("vector has non-finite entries")
    if dim is not None and v.size != dim:
        raise InvalidInput(f"dimension mismatch: expected {dim}, got {v.size}")
    v.setflags(write=False)
    return v


def basis_vector(dim: int, index: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    e.setflags(write=False)
    return e


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of a subspace of C^N, one column per basis vector."""

    basis: np.ndarray
    ortho_tol: float = 1e-10

    def __post_init__(self):
        b = np.array(self.basis, dtype=complex)
        if b.ndim != 2:
            raise InvalidInput("frame basis must be a 2-D array")
        n, k = b.shape
        if n == 0:
            raise InvalidInput("ambient dimension must be positive")
        if k > n:
            raise InvalidInput("frame has more columns than the ambient dimension")
        if self.ortho_tol < 0:
            raise InvalidInput("ortho_tol must be nonnegative")
        if k:
            defect = np.linalg.norm(b.conj().T @ b - np.eye(k), 2)
            if defect > self.ortho_tol:
                raise InvalidInput(f"columns are not orthonormal (defect {defect:.3e})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def empty(cls, ambient_dim: int) -> "Frame":
        return cls(np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def full(cls, ambient_dim: int) -> "Frame":
        return cls(np.eye(ambient_dim, dtype=complex))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def columns(self) -> list[np.ndarray]:
        return [self.basis[:, j] for j in range(self.dim)]

    def gram_defect(self) -> float:
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.basis.conj().T @ self.basis - np.eye(self.dim), 2))


def _check_flags(matrix: np.ndarray, flags: frozenset) -> None:
    scale = max(1.0, float(np.linalg.norm(matrix, 2)))
    tol = FLAG_TOL * scale
    adj = matrix.conj().T
    if "self_adjoint" in flags and np.linalg.norm(matrix - adj, 2) > tol:
        raise InvalidInput("operator flagged self_adjoint is not self-adjoint")
    if "skew_adjoint" in flags and np.linalg.norm(matrix + adj, 2) > tol:
        raise InvalidInput("operator flagged skew_adjoint is not skew-adjoint")
    if "normal" in flags and np.linalg.norm(matrix @ adj - adj @ matrix, 2) > tol * scale:
        raise InvalidInput("operator flagged normal is not normal")
    if "positive" in flags:
        herm = (matrix + adj) / 2
        if np.linalg.norm(matrix - adj, 2) > tol or np.linalg.eigvalsh(herm)[0] < -tol:
            raise InvalidInput("operator flagged positive is not positive semidefinite")
    if "invertible_known" in flags:
        s = np.linalg.svd(matrix, compute_uv=False)
        if s[-1] == 0 or s[0] / s[-1] > COND_LIMIT:
            raise InvalidInput("operator flagged invertible_known is numerically singular")


def detect_flags(matrix: np.ndarray) -> frozenset:
    """Infer every structure flag that holds to the construction tolerance."""
    matrix = np.asarray(matrix, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(matrix, 2)))
    tol = FLAG_TOL * scale
    adj = matrix.conj().T
    flags = set()
    if np.linalg.norm(matrix - adj, 2) <= tol:
        flags |= {"self_adjoint", "normal"}
        if np.linalg.eigvalsh((matrix + adj) / 2)[0] >= -tol:
            flags.add("positive")
    if np.linalg.norm(matrix + adj, 2) <= tol:
        flags |= {"skew_adjoint", "normal"}
    if np.linalg.norm(matrix @ adj - adj @ matrix, 2) <= tol * scale:
        flags.add("normal")
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[-1] > 0 and s[0] / s[-1] <= COND_LIMIT:
        flags.add("invertible_known")
    return frozenset(flags)


@dataclass(frozen=True)
class DenseOperator:
    """Square complex matrix with structure flags verified at construction.

    ``flags=None`` detects every flag that holds; an explicit set is checked
    and rejected with :class:`InvalidInput` if any flag fails.
    """

    matrix: np.ndarray
    flags: frozenset | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvalidInput("operator matrix must be square and nonempty")
        if not np.all(np.isfinite(m)):
            raise InvalidInput("operator matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.flags is None:
            flags = detect_flags(m)
        else:
            flags = frozenset(self.flags)
            unknown = flags - FLAGS
            if unknown:
                raise InvalidInput(f"unknown operator flags: {sorted(unknown)}")
            if "self_adjoint" in flags or "skew_adjoint" in flags:
                flags |= {"normal"}
            _check_flags(m, flags)
        object.__setattr__(self, "flags", flags)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=complex)

    def apply_adjoint(self, x) -> np.ndarray:
        return self.matrix.conj().T @ np.asarray(x, dtype=complex)

    def adjoint(self) -> "DenseOperator":
        return DenseOperator(self.matrix.conj().T, name=f"{self.name}*" if self.name else "")

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def has(self, *flags: str) -> bool:
        return all(f in self.flags for f in flags)


def _stack(vectors: Sequence) -> np.ndarray:
    if len(vectors) == 0:
        raise InvalidInput("orthonormalize needs at least one vector")
    vs = [np.asarray(v, dtype=complex).reshape(-1) for v in vectors]
    dim = vs[0].size
    if any(v.size != dim for v in vs):
        raise InvalidInput("all vectors must share the same dimension")
    return np.stack(vs, axis=1)


def orthonormalize(vectors: Iterable, tol: float = DEFAULT_TOL) -> Frame:
    """Modified Gram-Schmidt with one full reorthogonalization pass.

    A vector is dropped when its residual after projection has norm at most
    ``tol * max_input_norm``.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    cols = _stack(list(vectors))
    n = cols.shape[0]
    scale = max(np.linalg.norm(cols, axis=0).max(), 0.0)
    kept: list[np.ndarray] = []
    if scale == 0:
        return Frame.empty(n)
    for j in range(cols.shape[1]):
        w = cols[:, j].copy()
        for _ in range(2):
            for q in kept:
                w -= (q.conj() @ w) * q
        nw = np.linalg.norm(w)
        if nw > tol * scale and len(kept) < n:
            kept.append(w / nw)
    if not kept:
        return Frame.empty(n)
    return Frame(np.stack(kept, axis=1))


def frame_from_columns(matrix, tol: float = DEFAULT_TOL) -> Frame:
    """Orthonormalize the columns of a 2-D array."""
    m = np.asarray(matrix, dtype=complex)
    if m.shape[1] == 0:
        return Frame.empty(m.shape[0])
    return orthonormalize(list(m.T), tol)


def project(frame: Frame, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the span of ``frame``."""
    v = as_vector(v, frame.ambient_dim)
    b = frame.basis
    return b @ (b.conj().T @ v)


def distance_to_span(frame: Frame, v) -> float:
    v = as_vector(v, frame.ambient_dim)
    if frame.dim == 0:
        return float(np.linalg.norm(v))
    r = v - project(frame, v)
    # second pass removes the rounding left by the first
    r = r - frame.basis @ (frame.basis.conj().T @ r)
    return float(np.linalg.norm(r))


def _same_ambient(u: Frame, v: Frame) -> None:
    if u.ambient_dim != v.ambient_dim:
        raise InvalidInput("frames live in different ambient spaces")


def principal_angles(u: Frame, v: Frame) -> np.ndarray:
    """Principal angles between two subspaces, ascending, in [0, pi/2].

    Cosines come from the SVD of the cross-Gram matrix; angles whose cosine
    exceeds 1/sqrt(2) are recomputed from the sines for accuracy near zero.
    """
    _same_ambient(u, v)
    if u.dim == 0 or v.dim == 0:
        return np.zeros(0)
    a, b = (u.basis, v.basis) if u.dim >= v.dim else (v.basis, u.basis)
    cross = a.conj().T @ b
    cos = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)
    sin = np.linalg.svd(b - a @ cross, compute_uv=False)[::-1]
    sin = np.clip(sin, 0.0, 1.0)
    angles = np.where(cos**2 > 0.5, np.arcsin(sin), np.arccos(cos))
    return np.sort(angles)


def subspace_intersection(u: Frame, v: Frame, angle_tol: float = DEFAULT_TOL) -> Frame:
    """Frame for the principal directions of ``v`` within ``angle_tol`` of ``u``."""
    _same_ambient(u, v)
    if angle_tol <= 0:
        raise InvalidInput("angle_tol must be positive")
    if u.dim == 0 or v.dim == 0:
        return Frame.empty(u.ambient_dim)
    b = v.basis
    resid = b - u.basis @ (u.basis.conj().T @ b)
    _, s, zh = np.linalg.svd(resid, full_matrices=False)
    keep = s < np.sin(angle_tol)
    if not np.any(keep):
        return Frame.empty(u.ambient_dim)
    vecs = b @ zh.conj().T[:, keep]
    return frame_from_columns(vecs)


def orthogonal_complement(u: Frame) -> Frame:
    n = u.ambient_dim
    if u.dim == 0:
        return Frame.full(n)
    if u.dim == n:
        return Frame.empty(n)
    q, _ = np.linalg.qr(u.basis, mode="complete")
    comp = q[:, u.dim:]
    # one projection sweep keeps the complement orthogonal to working precision
    comp = comp - u.basis @ (u.basis.conj().T @ comp)
    q2, _ = np.linalg.qr(comp)
    return Frame(q2)


def condition_number(op: DenseOperator) -> float:
    s = np.linalg.svd(op.matrix, compute_uv=False)
    return float("inf") if s[-1] == 0 else float(s[0] / s[-1])


def dense_solve(op: DenseOperator, b) -> np.ndarray:
    """Direct LU solve; refuses operators with condition number above 1e12."""
    b = as_vector(b, op.dim)
    if condition_number(op) > COND_LIMIT:
        raise SingularOperator("operator is singular to working tolerance")
    return np.linalg.solve(op.matrix, b)


def min_norm_solve(op: DenseOperator, b, range_tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimal-norm solution via the SVD pseudoinverse.

    Raises :class:`NoSolution` when ``b`` lies farther than
    ``range_tol * max(1, |b|)`` from the range of the operator.
    """
    b = as_vector(b, op.dim)
    u, s, vh = np.linalg.svd(op.matrix)
    cutoff = max(s[0], 1.0) * op.dim * np.finfo(float).eps * 10 if s.size else 0.0
    r = int(np.sum(s > cutoff))
    ur = u[:, :r]
    coeffs = ur.conj().T @ b
    outside = np.linalg.norm(b - ur @ coeffs)
    if outside > range_tol * max(1.0, float(np.linalg.norm(b))):
        raise NoSolution(f"datum is {outside:.3e} away from the range")
    return vh[:r].conj().T @ (coeffs / s[:r])
