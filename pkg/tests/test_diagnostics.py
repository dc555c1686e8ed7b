import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_unitary, random_vector
from krylab import diagnostics as dg
from krylab.errors import InvalidInput
from krylab.gallery import ShiftSpec, build_compact_normal, build_shift, shift_noncyclic_datum
from krylab.hilbert import DenseOperator, dense_solve
from krylab.krylov import krylov_basis


def full_report(op, g, n, f_star=None, window=None):
    b = krylov_basis(op, g, n)
    prov = dg.provenance(op, g, window)
    red = dg.reducibility(op, b, prov)
    inter = dg.krylov_intersection(op, b, prov=prov)
    trace = None if f_star is None else dg.solution_distance_trace(f_star, b)
    v = dg.verdict(reducibility_report=red, intersection_report=inter, distance_trace=trace,
                   solution_norm=None if f_star is None else float(np.linalg.norm(f_star)),
                   op=op)
    return b, red, inter, trace, v


def shift_case(N=5, n=5):
    spec = ShiftSpec(N)
    return spec, build_shift(spec), shift_noncyclic_datum(spec, 0)


def test_reducibility_examples():
    op = DenseOperator(np.diag([1.0, 1.0, 2.0]))
    _, red, inter, _, _ = full_report(op, np.array([1.0, 0, 1]), 3)
    assert red.off_block_K_to_perp <= 1e-12 and red.off_block_perp_to_K <= 1e-12
    assert inter.est_dim == 0
    spec, r, g = shift_case()
    _, red, inter, _, _ = full_report(r, g, 5)
    assert red.off_block_perp_to_K >= 1 - 1e-10
    assert inter.est_dim >= 1
    eye = DenseOperator(np.eye(3))
    _, red, inter, _, _ = full_report(eye, np.ones(3), 3)
    assert max(red.off_block_K_to_perp, red.off_block_perp_to_K) <= 1e-15 and inter.est_dim == 0


def test_shift_intersection_contains_e0():
    spec, r, g = shift_case()
    b = krylov_basis(r, g, 5)
    inter = dg.krylov_intersection(r, b)
    assert inter.est_dim == 1 and inter.margin >= 10 * inter.angle_tol


def test_empty_complement_note():
    op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
    inter = dg.krylov_intersection(op, krylov_basis(op, np.ones(3), 3))
    assert inter.est_dim == 0 and inter.note


def test_vector_class_bounded():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 6))
    a *= 2 / np.linalg.norm(a, 2)
    g = random_vector(rng, 6)
    rep = dg.vector_class(DenseOperator(a), g / np.linalg.norm(g), 20)
    assert rep.bounded_verdict == "yes" and rep.B_g <= 2 + 1e-12


def test_quasi_analytic_synthetic_sequences():
    fact = [math.factorial(k) for k in range(0, 41)]
    rep = dg.classify_norms([float(x) for x in fact])
    assert rep.qa_verdict == "diverging"
    cubed = [float(x) ** 3 for x in fact]
    rep = dg.classify_norms(cubed)
    assert rep.qa_verdict == "converging"
    assert np.all(np.diff(rep.qa_partial_sums) >= 0)


def test_vector_class_nilpotent():
    from krylab.gallery import jordan_block
    rep = dg.vector_class(jordan_block(3), np.eye(3)[0], 6)
    assert rep.bounded_verdict == "yes" and rep.qa_verdict == "diverging"


def test_vector_class_overflow_inconclusive():
    rep = dg.vector_class(DenseOperator(np.diag([1e30, 1.0])), [1, 1], 12)
    assert rep.truncated_at is not None and rep.bounded_verdict == "inconclusive"


def test_vector_class_needs_four_terms():
    with pytest.raises(InvalidInput):
        dg.vector_class(DenseOperator(np.eye(2)), [1, 0], 3)


def test_distance_trace_examples():
    spec, r, g = shift_case()
    b = krylov_basis(r, g, 5)
    tr = dg.solution_distance_trace(shift_noncyclic_datum(spec, -1), b)
    assert np.allclose(tr, 1, atol=1e-14)
    op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
    f = dense_solve(op, np.ones(3))
    tr = dg.solution_distance_trace(f, krylov_basis(op, np.ones(3), 3))
    assert tr[2] <= 1e-10
    g = np.array([1.0, 2j, 3])
    assert dg.solution_distance_trace(g, krylov_basis(op, g, 3))[0] <= 1e-14


def test_verdict_examples():
    op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
    g = np.ones(3)
    *_, v = full_report(op, g, 3, dense_solve(op, g))
    assert v.outcome == "krylov_solvable"
    assert any("invertible" in line for line in v.chain)
    assert "distance_tol" in v.tolerances and v.window_guard == "not_applicable"

    spec, r, g = shift_case()
    *_, v = full_report(r, g, 5, shift_noncyclic_datum(spec, -1), window=5)
    assert v.outcome == "not_krylov_solvable"

    cn = build_compact_normal([1, 0.5, 0.25])
    *_, v = full_report(cn, np.ones(3), 3, dense_solve(cn, np.ones(3)))
    assert v.outcome == "krylov_solvable"
    assert any("minimal norm" in line for line in v.chain)


def test_verdict_guard_forces_inconclusive():
    op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
    b = krylov_basis(op, np.ones(3), 3)
    v = dg.verdict(reducibility_report=dg.reducibility(op, b), op=op, window_guard="violated")
    assert v.outcome == "inconclusive"


def test_verdict_provenance_mismatch():
    op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
    b = krylov_basis(op, np.ones(3), 3)
    red = dg.reducibility(op, b, dg.provenance(op, np.ones(3)))
    inter = dg.krylov_intersection(op, b, prov=dg.provenance(op, np.arange(3)))
    with pytest.raises(InvalidInput):
        dg.verdict(reducibility_report=red, intersection_report=inter)


seeds = st.integers(0, 2**32 - 1)


def separated_hermitian(rng, n, k):
    q = random_unitary(rng, n)
    lam = rng.uniform(-4, 4, n)
    lam[:k] = np.linspace(-4, 4, k) + rng.uniform(-0.2, 0.2, k)
    a = (q * lam) @ q.conj().T
    return DenseOperator((a + a.conj().T) / 2), q[:, :k] @ random_vector(rng, k)


@given(seeds, st.integers(4, 16), st.integers(1, 4))
def test_self_adjoint_always_reduced(seed, n, k):
    rng = np.random.default_rng(seed)
    op, g = separated_hermitian(rng, n, min(k, n))
    b = krylov_basis(op, g, n)
    red = dg.reducibility(op, b)
    assert b.grade is not None
    assert red.off_block_perp_to_K <= 1e-10 * op.norm
    inter = dg.krylov_intersection(op, b)
    assert inter.est_dim == 0


@given(seeds, st.integers(3, 12))
def test_distance_trace_nonincreasing_and_scale_invariant(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) + 2 * np.sqrt(n) * np.eye(n)
    op = DenseOperator(a)
    g = random_vector(rng, n)
    f = dense_solve(op, g)
    tr = dg.solution_distance_trace(f, krylov_basis(op, g, n))
    assert np.all(np.diff(tr) <= 1e-12 * np.linalg.norm(f))
    c = complex(rng.standard_normal(), rng.standard_normal())
    *_, v1 = full_report(op, g, n, f)
    *_, v2 = full_report(op, c * g, n, c * f)
    assert v1.outcome == v2.outcome
