import json
from importlib import resources

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drrbdo.conic import (
    MAX_ITERATIONS,
    OPTIMAL,
    ConeProgram,
    ConeSpec,
    factor_spd,
    min_eigenvalue,
    smat,
    solve,
    svec,
)
from drrbdo.conic.cones import BlockScaling, ConeBlock
from drrbdo.conic.linalg import check_symmetric, svec_side
from drrbdo.errors import StructuralError

from .conftest import planted_program, random_blocks

SQ2 = np.sqrt(2.0)


def sym(rng, d):
    A = rng.standard_normal((d, d))
    return A + A.T


# -------------------------------------------------------------- trivial programs

def test_lp_bound_active():
    sol = solve(ConeProgram([1.0], [[-1.0]], [-1.0], [("nonneg", 1)]))
    assert sol.status == OPTIMAL
    assert sol.y[0] == pytest.approx(1.0, abs=1e-7)


def test_soc_norm():
    # (t, 3, 4) in Q3
    G = np.array([[-1.0], [0.0], [0.0]])
    sol = solve(ConeProgram([1.0], G, [0.0, 3.0, 4.0], [("soc", 3)]))
    assert sol.optimal
    assert sol.y[0] == pytest.approx(5.0, abs=1e-7)


def test_psd_eigenvalue():
    # [[t, 1], [1, t]] PSD: svec = (t, sqrt2, t)
    G = -np.array([[1.0], [0.0], [1.0]])
    sol = solve(ConeProgram([1.0], G, [0.0, SQ2, 0.0], [("psd", 2)]))
    assert sol.optimal
    assert sol.y[0] == pytest.approx(1.0, abs=1e-7)


def test_variance_identity_example():
    from drrbdo.robust.reformulation import variance_program

    prog, _ = variance_program(np.array([1.0, 0.0]), np.eye(2), 2.0)
    sol = solve(prog)
    assert sol.optimal
    assert sol.primal_objective == pytest.approx(2.0, abs=1e-7)


def test_dimension_mismatch_rejected_before_iterating():
    with pytest.raises(StructuralError):
        solve(ConeProgram([1.0, 2.0], [[1.0]], [1.0], [("nonneg", 1)]))
    with pytest.raises(StructuralError):
        solve(ConeProgram([1.0], [[1.0], [2.0]], [1.0, 2.0], [("nonneg", 1)]))


def test_bad_cone_spec():
    with pytest.raises(StructuralError):
        ConeBlock("exp", 3)
    with pytest.raises(StructuralError):
        ConeBlock("soc", 0)


def test_cone_sizes():
    spec = ConeSpec([("nonneg", 3), ("soc", 4), ("psd", 3)])
    assert spec.size == 3 + 4 + 6
    assert spec.degree == 3 + 1 + 3


def test_infeasible_lp_reported():
    # x >= 1 and x <= 0
    sol = solve(ConeProgram([1.0], [[-1.0], [1.0]], [-1.0, 0.0], [("nonneg", 2)]))
    assert sol.status != OPTIMAL


def test_unbounded_lp_reported():
    # min -x s.t. x >= 0
    sol = solve(ConeProgram([-1.0], [[-1.0]], [0.0], [("nonneg", 1)]))
    assert sol.status != OPTIMAL


def test_iteration_cap_gives_max_iterations():
    rng = np.random.default_rng(1)
    prog, _ = planted_program(rng, random_blocks(rng), 3)
    sol = solve(prog, max_iter=2)
    assert sol.status == MAX_ITERATIONS
    assert sol.iterations == 2


def test_json_dump_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    prog, _ = planted_program(rng, random_blocks(rng), 3)
    path = tmp_path / "prog.json"
    prog.dump(path)
    doc = json.loads(path.read_text())
    schema = json.loads(resources.files("drrbdo.schemas").joinpath("cone_program.schema.json").read_text())
    jsonschema.validate(doc, schema)
    back = ConeProgram.from_json(doc)
    assert np.array_equal(back.G, prog.G) and np.array_equal(back.h, prog.h)
    assert back.cones == prog.cones


# -------------------------------------------------------------- svec / smat

def test_svec_examples():
    assert np.allclose(svec(np.eye(2)), [1.0, 0.0, 1.0])
    assert np.allclose(svec(np.array([[0.0, 1.0], [1.0, 0.0]])), [0.0, SQ2, 0.0])


def test_svec_column_major_lower():
    M = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    assert np.allclose(svec(M), [1.0, 2 * SQ2, 3 * SQ2, 4.0, 5 * SQ2, 6.0])


def test_svec_rejects_asymmetric():
    with pytest.raises(StructuralError):
        svec(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_smat_examples():
    assert np.allclose(smat([1.0, 0.0, 1.0]), np.eye(2))
    assert np.allclose(smat([0.0, SQ2, 0.0]), [[0.0, 1.0], [1.0, 0.0]])


def test_smat_rejects_non_triangular_length():
    with pytest.raises(StructuralError):
        smat(np.ones(4))
    with pytest.raises(StructuralError):
        svec_side(5)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_svec_isometry(d, seed):
    rng = np.random.default_rng(seed)
    A, B = sym(rng, d), sym(rng, d)
    lhs = svec(A) @ svec(B)
    assert abs(lhs - np.sum(A * B)) <= 1e-12 * np.linalg.norm(A) * np.linalg.norm(B)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_smat_round_trip(d, seed):
    rng = np.random.default_rng(seed)
    M = sym(rng, d)
    assert np.allclose(smat(svec(M)), M, rtol=0, atol=1e-14 * np.abs(M).max())


# -------------------------------------------------------------- factorization / eigenvalues

def test_factor_spd_examples():
    L, ok = factor_spd(np.eye(3))
    assert ok and np.allclose(L, np.eye(3))
    L, ok = factor_spd(np.array([[4.0, 2.0], [2.0, 5.0]]))
    assert ok and np.allclose(L, [[2.0, 0.0], [1.0, 2.0]])
    _, ok = factor_spd(np.array([[2.0, 3.0], [3.0, 2.0]]))
    assert not ok


def test_factor_spd_rejects_asymmetric():
    with pytest.raises(StructuralError):
        factor_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(StructuralError):
        check_symmetric(np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(d=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_factor_spd_reconstructs(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    M = A @ A.T + 0.1 * np.eye(d)
    L, ok = factor_spd(M)
    assert ok
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ L.T - M) <= 1e-10 * np.linalg.norm(M)


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.eye(2)) == pytest.approx(1.0)
    assert min_eigenvalue(np.array([[2.0, 3.0], [3.0, 2.0]])) == pytest.approx(-1.0)


@settings(max_examples=80, deadline=None)
@given(d=st.integers(1, 6), seed=st.integers(0, 2**32 - 1), shift=st.floats(-2.0, 2.0))
def test_min_eigenvalue_matches_factorization(d, seed, shift):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    M = A @ A.T + shift * np.eye(d)
    lam = min_eigenvalue(M)
    # margins keep the test away from the pivot tolerance
    tr = abs(np.trace(M)) + 1.0
    if abs(lam) < 1e-6 * tr:
        return
    ok = factor_spd(M + 1e-12 * tr * np.eye(d))[1]
    assert (lam >= 0) == ok


# -------------------------------------------------------------- random battery

BATTERY = 60


@pytest.fixture(scope="module")
def battery():
    rng = np.random.default_rng(20240611)
    out = []
    for _ in range(BATTERY):
        prog, opt = planted_program(rng, random_blocks(rng), int(rng.integers(1, 6)))
        out.append((prog, opt, solve(prog)))
    return out


def test_planted_optimum_recovered(battery):
    for prog, opt, sol in battery:
        assert sol.status == OPTIMAL, sol.message
        assert abs(sol.primal_objective - opt) <= 1e-7 * max(1.0, abs(opt))


def test_residuals_within_tolerance(battery):
    tol = 1e-8
    for _, _, sol in battery:
        assert sol.primal_residual <= tol and sol.dual_residual <= tol and sol.gap <= tol


def test_self_duality(battery):
    tol = 1e-8
    for prog, _, sol in battery:
        assert prog.cones.contains(sol.z, tol)
        assert prog.cones.contains(sol.s, tol)
        for (b, _), zb in zip(prog.cones, sol.duals):
            if b.kind == "psd":
                M = smat(zb)
                assert min_eigenvalue(M) >= -tol * max(1.0, np.linalg.norm(M))


def test_weak_duality_along_trajectory(battery):
    # every logged iterate keeps s, z interior, so s.z >= 0; once residuals
    # are at tolerance, pcost - dcost agrees with s.z
    tol = 1e-8
    for _, _, sol in battery:
        for row in sol.trajectory:
            assert row["gap"] >= 0.0
            if row["pres"] <= tol and row["dres"] <= tol:
                assert row["pcost"] - row["dcost"] >= -tol * (1.0 + abs(row["pcost"]))


def test_deterministic():
    rng = np.random.default_rng(5)
    prog, _ = planted_program(rng, random_blocks(rng), 4)
    a, b = solve(prog), solve(prog)
    assert np.array_equal(a.y, b.y) and a.iterations == b.iterations


# -------------------------------------------------------------- scaling

@pytest.mark.parametrize("kind,dim", [("nonneg", 4), ("soc", 5), ("psd", 4)])
def test_nt_scaling_maps_s_and_z_to_lambda(kind, dim):
    rng = np.random.default_rng(11)
    b = ConeBlock(kind, dim)

    def interior():
        if kind == "nonneg":
            return rng.random(dim) + 0.1
        if kind == "soc":
            u = rng.standard_normal(dim - 1)
            return np.r_[np.linalg.norm(u) + rng.random() + 0.1, u]
        A = rng.standard_normal((dim, dim))
        return svec(A @ A.T + 0.1 * np.eye(dim))

    s, z = interior(), interior()
    sc = BlockScaling(b, s, z)
    # lambda = W z = W^{-T} s
    assert np.allclose(sc.w(z), sc.lam, atol=1e-10)
    assert np.allclose(sc.winvt(s), sc.lam, atol=1e-10)
    v = rng.standard_normal(b.size)
    assert np.allclose(sc.winv(sc.w(v)), v, atol=1e-9)
    assert np.allclose(sc.wt(sc.winvt(v)), v, atol=1e-9)
