import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import e, random_unitary, random_vector
from krylab.errors import InvalidInput, NotPositive, TruncationSingular
from krylab.gallery import ShiftSpec, build_shift, jordan_block, shift_noncyclic_datum
from krylab.hilbert import DenseOperator, dense_solve, distance_to_span, principal_angles
from krylab.krylov import (grade, invariance_defect, krylov_basis, run_cg, run_gmres,
                           solve_truncated)


def test_identity_has_grade_one():
    g = np.array([1, 2j, 3])
    b = krylov_basis(DenseOperator(np.eye(3)), g, 3)
    assert grade(b) == 1 and b.size == 1
    assert distance_to_span(b.frame(), g) < 1e-14


def test_distinct_eigenvalues_fill_space():
    b = krylov_basis(DenseOperator(np.diag([1.0, 2.0, 3.0])), np.ones(3), 3)
    assert grade(b) == 3 and b.frame().dim == 3


def test_zero_fill_shift_spans_canonical_vectors():
    spec = ShiftSpec(5)
    r = build_shift(spec)
    b = krylov_basis(r, shift_noncyclic_datum(spec, 0), 5)
    for n in range(1, 6):
        f = b.frame(n)
        for k in range(n):
            assert distance_to_span(f, shift_noncyclic_datum(spec, k)) < 1e-14
        assert f.dim == n


def test_zero_datum_rejected():
    with pytest.raises(InvalidInput):
        krylov_basis(DenseOperator(np.eye(2)), np.zeros(2), 2)


def test_grade_examples():
    assert grade(krylov_basis(jordan_block(4), e(4, 0), 4)) == 4
    assert grade(krylov_basis(DenseOperator(np.diag([1.0, 1.0, 2.0])), [1, 0, 1], 3)) == 2


def test_solve_truncated_examples():
    g = np.array([1.0, 2.0])
    op = DenseOperator(np.eye(2))
    assert np.allclose(solve_truncated(op, g, krylov_basis(op, g, 2), "galerkin", 1), g)
    swap = DenseOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
    b = krylov_basis(swap, [1, 0], 2)
    assert np.allclose(solve_truncated(swap, [1, 0], b, "gmres", 2), dense_solve(swap, [1, 0]))
    d = DenseOperator(np.diag([1.0, 2.0]))
    b = krylov_basis(d, [1, 1], 2)
    assert np.allclose(solve_truncated(d, [1, 1], b, "galerkin", 2), dense_solve(d, [1, 1]))


def test_galerkin_singular_reported():
    swap = DenseOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
    b = krylov_basis(swap, [1, 0], 2)
    with pytest.raises(TruncationSingular) as info:
        solve_truncated(swap, [1, 0], b, "galerkin", 1)
    assert info.value.n == 1


def test_cg_scheme_requires_flags():
    swap = DenseOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
    b = krylov_basis(swap, [1, 0], 2)
    with pytest.raises(InvalidInput):
        solve_truncated(swap, [1, 0], b, "cg", 2)
    with pytest.raises(InvalidInput):
        run_cg(swap, [1, 0], 4)


def test_cg_examples():
    x, tr = run_cg(DenseOperator(np.diag([1.0, 2.0, 0.0])), [1, 2, 0], 10)
    assert np.allclose(x, [1, 1, 0], atol=1e-12)
    x, tr = run_cg(DenseOperator(np.eye(3)), [1, 2, 3], 10)
    assert len(tr) == 1 and np.allclose(x, [1, 2, 3])
    x, tr = run_cg(DenseOperator(np.diag([1.0, 2.0, 3.0])), np.ones(3), 10)
    assert len(tr) <= 3 and np.allclose(x, [1, 1 / 2, 1 / 3], atol=1e-12)


def test_cg_negative_curvature():
    op = DenseOperator(np.diag([1.0, -1.0]), flags={"self_adjoint", "normal"})
    object.__setattr__(op, "flags", frozenset({"self_adjoint", "normal", "positive"}))
    with pytest.raises(NotPositive):
        run_cg(op, [0, 1], 4)


def test_gmres_examples():
    x, tr = run_gmres(DenseOperator(np.eye(3)), [1, 2, 3], 5)
    assert len(tr) == 1 and tr.converged
    spec = ShiftSpec(5)
    r = build_shift(spec)
    x, tr = run_gmres(r, shift_noncyclic_datum(spec, 0), 6)
    assert np.allclose(tr.residual, 1, atol=1e-12)
    spec = ShiftSpec(2, "cyclic")
    r = build_shift(spec)
    x, tr = run_gmres(r, shift_noncyclic_datum(spec, 0), 10)
    assert len(tr) == 5 and tr.converged
    assert np.allclose(x, shift_noncyclic_datum(spec, -1), atol=1e-12)


def test_trace_rows_layout():
    _, tr = run_gmres(DenseOperator(np.diag([1.0, 2.0])), [1, 1], 2, reference=[1, 0.5])
    rows = tr.rows()
    assert [r["n"] for r in rows] == [1, 2]
    assert set(rows[0]) == {"n", "residual", "distance", "approximant_norm"}
    assert rows[-1]["distance"] < 1e-12
    assert len(tr.wall_time) == len(tr.residual)


def random_op(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return DenseOperator(a), random_vector(rng, n)


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 12)


@given(seeds, dims)
def test_arnoldi_relation_and_nesting(seed, n):
    op, g = random_op(seed, n)
    b = krylov_basis(op, g, n)
    V = b.vectors
    m = b.size
    cols = min(V.shape[1], m + 1)
    lhs = op.matrix @ V[:, :m]
    rhs = V[:, :cols] @ b.hessenberg[:cols, :m]
    assert np.linalg.norm(lhs - rhs, axis=0).max() <= 1e-10 * op.norm
    for k in range(1, m):
        assert principal_angles(b.frame(k), b.frame(k + 1)).max() <= 1e-10


@given(seeds, dims)
def test_grade_invariance(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    q = random_unitary(rng, n)
    lam = np.linspace(-3, 3, n) + 0.1 * rng.uniform(-1, 1, n)
    op = DenseOperator((q * lam) @ q.conj().T)
    g = q[:, :k] @ random_vector(rng, k)
    b = krylov_basis(op, g, n)
    assert b.grade is not None
    assert invariance_defect(op, b) <= 10 * b.breakdown_tol * op.norm


@given(seeds, dims, st.sampled_from(["galerkin", "gmres"]))
def test_truncated_solution_in_krylov_space(seed, n, scheme):
    op, g = random_op(seed, n)
    b = krylov_basis(op, g, n)
    for k in range(1, b.size + 1):
        try:
            f = solve_truncated(op, g, b, scheme, k)
        except TruncationSingular:
            continue
        assert distance_to_span(b.frame(k), f) <= 1e-10 * max(np.linalg.norm(f), 1e-300)


@given(seeds, dims)
def test_gmres_monotone_and_finite_termination(seed, n):
    op, g = random_op(seed, n)
    _, tr = run_gmres(op, g, n, res_tol=1e-14)
    res = np.array(tr.residual)
    assert np.all(np.diff(res) <= 1e-12 * np.linalg.norm(g))
    assert res[-1] <= 1e-8 * np.linalg.norm(g)


@given(seeds, dims)
def test_cg_error_energy_decreasing(seed, n):
    rng = np.random.default_rng(seed)
    q = random_unitary(rng, n)
    lam = rng.uniform(0.5, 10, n)
    a = (q * lam) @ q.conj().T
    op = DenseOperator((a + a.conj().T) / 2)
    g = random_vector(rng, n)
    f = dense_solve(op, g)
    x = np.zeros(n, complex)
    energies = []
    _, tr = run_cg(op, g, 2 * n, res_tol=1e-14, reference=f)
    # recover iterates' A-norm errors through a second pass of the same recursion
    r = g.copy()
    p = r.copy()
    rr = np.vdot(r, r).real
    for _ in range(len(tr)):
        ap = op.matrix @ p
        alpha = rr / np.vdot(p, ap).real
        x = x + alpha * p
        r = r - alpha * ap
        err = x - f
        energies.append(np.sqrt(abs(np.vdot(err, op.matrix @ err))))
        rr_new = np.vdot(r, r).real
        p = r + rr_new / rr * p
        rr = rr_new
    en = np.array(energies)
    assert np.all(np.diff(en) < 1e-12 * np.linalg.norm(g)) or len(en) == 1
    assert tr.distance[-1] <= 1e-8 * np.linalg.norm(f)
