"""Weak gap between subspaces, measured in a weighted l2 norm.

The norm ``|x|_w = sqrt(sum_k w_k |<e_k, x>|^2)`` with ``w_k = 2^-(k+1)``
against a declared reference basis metrizes the weak topology on bounded
sets. For a fixed ``u`` the inner infimum over the unit ball of ``V`` is a
norm-constrained weighted least-squares problem solved exactly through its
secular equation. The outer supremum over the unit ball of ``U`` is
attained on the sphere (the inner infimum is convex in ``u``); it is exact
when ``dim U <= 1`` and otherwise estimated by multi-start ascent, which
always yields a certified lower bound with a stored witness.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

from .errors import InvalidInput
from .hilbert import DenseOperator, Frame, as_vector
from .krylov import KrylovBasis, krylov_basis

Kind = Literal["exact_small_case", "certified_lower_bound", "heuristic"]
Direction = Literal["U_to_V", "V_to_U", "symmetric"]

_KIND_RANK = {"exact_small_case": 0, "certified_lower_bound": 1, "heuristic": 2}


@dataclass(frozen=True)
class WeakNormWeights:
    """Weights w_k = 2^-(k+1) attached to array positions in ``order``.

    ``order[k]`` is the array position of the k-th reference basis vector,
    so the weights are nonincreasing along the reference enumeration.
    """

    order: tuple[int, ...]
    basis_id: str = "canonical"

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise InvalidInput("order must be a permutation of 0..N-1")

    @classmethod
    def canonical(cls, dim: int) -> "WeakNormWeights":
        return cls(tuple(range(dim)), "canonical")

    @classmethod
    def center_out(cls, N: int) -> "WeakNormWeights":
        """Enumeration e_0, e_1, e_-1, e_2, e_-2, ... of a window -N..N."""
        order = [N]
        for k in range(1, N + 1):
            order += [N + k, N - k]
        return cls(tuple(order), f"center_out[N={N}]")

    @property
    def dim(self) -> int:
        return len(self.order)

    @property
    def weights(self) -> np.ndarray:
        return 2.0 ** -(np.arange(self.dim) + 1.0)

    def per_position(self) -> np.ndarray:
        out = np.empty(self.dim)
        out[list(self.order)] = self.weights
        return out


def weak_norm(x, w: WeakNormWeights) -> float:
    x = as_vector(x, w.dim)
    return float(np.sqrt(np.sum(w.per_position() * np.abs(x) ** 2)))


@dataclass(frozen=True)
class GapEstimate:
    value: float
    kind: Kind
    samples_used: int
    direction: Direction
    witness: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "kind": self.kind, "samples_used": self.samples_used,
                "direction": self.direction}


class _BallDistance:
    """inf over |b| <= 1 of |W^1/2 (u - V b)|, via the secular equation."""

    def __init__(self, V: Frame, w: WeakNormWeights):
        self.sqrt_w = np.sqrt(w.per_position())
        M = self.sqrt_w[:, None] * V.basis
        self.Z, self.s, self.Yh = np.linalg.svd(M, full_matrices=False)
        self.dim = V.dim

    def __call__(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        y = self.sqrt_w * u
        if self.dim == 0:
            return float(np.linalg.norm(y)), y
        beta = self.Z.conj().T @ y
        perp = y - self.Z @ beta
        perp2 = float(np.vdot(perp, perp).real)
        s2 = self.s ** 2
        mag2 = np.abs(beta) ** 2
        lam = self._multiplier(s2, mag2)
        fit = lam / (s2 + lam)
        value = float(np.sqrt(perp2 + np.sum(mag2 * fit ** 2)))
        b = self.Yh.conj().T @ (self.s / (s2 + lam) * beta)
        resid = y - self.Z @ (self.s * (self.Yh @ b))
        return value, resid

    @staticmethod
    def _multiplier(s2: np.ndarray, mag2: np.ndarray) -> float:
        def bnorm(lam):
            return float(np.sqrt(np.sum(s2 * mag2 / (s2 + lam) ** 2)))

        if bnorm(0.0) <= 1.0:
            return 0.0
        lo, hi = 0.0, float(np.sqrt(np.sum(s2 * mag2)))
        lam = lo
        # Newton on 1/|b(lam)| - 1, which is nearly linear in lam
        for _ in range(100):
            nb = bnorm(lam)
            phi = 1.0 / nb - 1.0
            if abs(nb - 1.0) <= 1e-15:
                break
            if phi < 0:
                lo = lam
            else:
                hi = lam
            dphi = np.sum(s2 * mag2 / (s2 + lam) ** 3) / nb ** 3
            step = lam - phi / dphi
            lam = step if lo < step < hi else 0.5 * (lo + hi)
            if hi - lo <= 1e-16 * max(hi, 1e-300):
                break
        return lam


def _starts(p: int, count: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=2 * p, scramble=True, seed=seed)
    pts = sampler.random(count)
    gauss = normal_dist.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    a = gauss[:, :p] + 1j * gauss[:, p:]
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def dw_directed(U: Frame, V: Frame, w: WeakNormWeights, *, starts: int = 64, seed: int = 0,
                max_iter: int = 500, rel_tol: float = 1e-13,
                direction: Direction = "U_to_V") -> GapEstimate:
    """sup over the unit ball of U of the weak distance to the unit ball of V."""
    if U.ambient_dim != V.ambient_dim or U.ambient_dim != w.dim:
        raise InvalidInput("frames and weights must share the ambient dimension")
    dist = _BallDistance(V, w)
    p = U.dim
    if p == 0:
        return GapEstimate(0.0, "exact_small_case", 0, direction, np.zeros(U.ambient_dim, complex))
    if p == 1:
        u = U.basis[:, 0]
        value, _ = dist(u)
        return GapEstimate(value, "exact_small_case", 1, direction, u.copy())
    P = dist.sqrt_w[:, None] * U.basis
    if V.dim == 0:
        # no competitor: largest weighted norm on the sphere of U
        evals, evecs = np.linalg.eigh(P.conj().T @ P)
        u = U.basis @ evecs[:, -1]
        return GapEstimate(float(np.sqrt(max(evals[-1], 0.0))), "exact_small_case", 1,
                           direction, u)
    candidates = np.vstack([_starts(p, starts, seed), np.eye(p, dtype=complex)])
    best_val, best_a = -1.0, None
    for a in candidates:
        val, resid = dist(U.basis @ a)
        for _ in range(max_iter):
            grad = P.conj().T @ resid
            gn = np.linalg.norm(grad)
            if gn == 0:
                break
            a_new = grad / gn
            new_val, new_resid = dist(U.basis @ a_new)
            if new_val <= val * (1 + rel_tol):
                if new_val > val:
                    a, val, resid = a_new, new_val, new_resid
                break
            a, val, resid = a_new, new_val, new_resid
        if val > best_val:
            best_val, best_a = val, a
    witness = U.basis @ best_a
    return GapEstimate(float(best_val), "certified_lower_bound", len(candidates), direction, witness)


def gap_witness_value(witness, V: Frame, w: WeakNormWeights) -> float:
    """Recompute inf over the unit ball of V of |witness - v|_w."""
    return _BallDistance(V, w)(as_vector(witness, V.ambient_dim))[0]


def combine(a: GapEstimate, b: GapEstimate) -> GapEstimate:
    kind = max(a.kind, b.kind, key=_KIND_RANK.__getitem__)
    top = a if a.value >= b.value else b
    return GapEstimate(max(a.value, b.value), kind, a.samples_used + b.samples_used,
                       "symmetric", top.witness)


def dw_hat(U: Frame, V: Frame, w: WeakNormWeights, **opts) -> GapEstimate:
    """Symmetrized weak gap: the larger of the two directed gaps."""
    forward = dw_directed(U, V, w, direction="U_to_V", **opts)
    backward = dw_directed(V, U, w, direction="V_to_U", **opts)
    return combine(forward, backward)


def inner_approx_trace(op: DenseOperator, g, basis: KrylovBasis, w: WeakNormWeights,
                       **opts) -> list[GapEstimate]:
    """Entry N-1 is the symmetrized gap between K_N and the largest frame."""
    full = basis.frame()
    return [dw_hat(basis.frame(n), full, w, **opts) for n in range(1, basis.size + 1)]


@dataclass(frozen=True)
class ContinuityEntry:
    datum_distance: float
    limit_to_perturbed: GapEstimate
    perturbed_to_limit: GapEstimate
    symmetric: GapEstimate


def datum_continuity_check(op: DenseOperator, g, perturbed: Sequence, w: WeakNormWeights,
                           n_full: int | None = None, **opts) -> list[ContinuityEntry]:
    """Compare the Krylov space of g with those of perturbed data g_n.

    ``limit_to_perturbed`` is d_w(K(A,g), K(A,g_n)), the direction expected
    to shrink whenever g_n -> g; the symmetric gap shrinks only under extra
    hypotheses such as g_n in the closure of K(A,g).
    """
    g = as_vector(g, op.dim)
    data = [as_vector(x, op.dim) for x in perturbed]
    dists = [float(np.linalg.norm(x - g)) for x in data]
    if len(dists) >= 2 and not dists[-1] < dists[0]:
        raise InvalidInput("perturbed data do not approach g")
    n_full = op.dim if n_full is None else n_full
    limit = krylov_basis(op, g, n_full).frame()
    out = []
    for x, d in zip(data, dists):
        k = krylov_basis(op, x, n_full).frame()
        fwd = dw_directed(limit, k, w, direction="U_to_V", **opts)
        bwd = dw_directed(k, limit, w, direction="V_to_U", **opts)
        out.append(ContinuityEntry(d, fwd, bwd, combine(fwd, bwd)))
    return out
