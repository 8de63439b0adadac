import math

import numpy as np
import pytest
from oracles import dot_scc, grid_min, sample_psi

from coposhier.matrices import DiagScaling, MatrixError, PsiParams, SymMatrix, horn, identity, scale, t_psi
from coposhier.zeros import (
    CLAIM_LABEL,
    EMPTY,
    FINITE,
    INFINITE,
    NonCopositive,
    SimplexZero,
    ZeroError,
    check_cqc,
    check_scc,
    check_sosc,
    enumerate_zeros,
    opt_dmd_report,
    scaled_zero,
    scc_closed_form,
    t_psi_minimizers,
)

PI10 = (math.pi / 10,) * 5
T_SUPPORTS = {(0, 1, 2), (0, 1, 4), (1, 2, 3), (2, 3, 4), (0, 3, 4)}


def by_support(zeros):
    return {z.support: z for z in zeros}


def assert_matches_formulas(psi):
    zs = enumerate_zeros(t_psi(psi))
    assert zs.kind == FINITE
    assert len(zs) == 5
    found = by_support(zs.zeros)
    assert set(found) == T_SUPPORTS
    for v in t_psi_minimizers(psi):
        np.testing.assert_allclose(found[v.support].vector(), v.vector(), atol=1e-8)


def test_horn_is_infinite():
    zs = enumerate_zeros(horn())
    assert zs.kind == INFINITE
    assert (0, 2, 3) in zs.infinite_supports
    assert sorted(zs.infinite_supports) == [(0, 1, 3), (0, 2, 3), (0, 2, 4), (1, 2, 4), (1, 3, 4)]
    w = zs.witness
    assert np.all(w >= 0) and w.sum() == pytest.approx(1.0)
    assert abs(w @ horn().array @ w) <= 1e-10


def test_horn_family_are_zeros():
    h = horn().array
    for t in np.linspace(0.05, 0.95, 7):
        u = np.array([0.5, 0, t / 2, (1 - t) / 2, 0])
        assert abs(u @ h @ u) <= 1e-14


def test_tpsi_default_five_zeros():
    assert_matches_formulas(PI10)


def test_identity_empty():
    assert enumerate_zeros(identity(4)).kind == EMPTY


def test_minimizer_formulas_are_zeros():
    m = t_psi(PI10).array
    vs = t_psi_minimizers(PI10)
    assert len(vs) == 5
    for v in vs:
        u = v.vector()
        assert abs(u @ m @ u) <= 1e-10
        assert sum(v.coords) == pytest.approx(1.0, abs=1e-12)
    v1 = vs[0].vector()
    p = math.pi / 10
    raw = np.array([math.sin(p), math.sin(2 * p), math.sin(p), 0, 0])
    np.testing.assert_allclose(v1, raw / raw.sum(), atol=1e-15)


def test_minimizers_reject_bad_psi():
    with pytest.raises(MatrixError):
        t_psi_minimizers((1.0, 1.0, 1.0, 1.0, 1.0))


def test_scc_sosc_cqc_at_tpsi():
    m = t_psi(PI10)
    for z in enumerate_zeros(m).zeros:
        g = m.array @ z.vector()
        assert np.all(np.abs(g[list(z.support)]) <= 1e-9)
        assert check_scc(m, z)
        assert check_sosc(m, z)
        assert check_cqc(z)


def test_horn_conditions_at_u_half():
    # H u = (0, 1/2, 0, 0, 1/2): strictly positive off the support, so SCC holds
    # here; the failing condition at this non-isolated zero is SOSC.
    m = horn()
    z = SimplexZero.from_vector([0.5, 0, 0.25, 0.25, 0])
    np.testing.assert_allclose(m.array @ z.vector(), [0, 0.5, 0, 0, 0.5], atol=1e-15)
    assert check_scc(m, z)
    assert not check_sosc(m, z)
    assert check_cqc(z)


def test_sosc_single_support():
    m = SymMatrix.from_array([[0, 1], [1, 1]])
    z = SimplexZero.from_vector([1, 0])
    assert check_sosc(m, z)
    assert check_scc(m, z)
    zs = enumerate_zeros(m)
    assert zs.kind == FINITE and [z.support for z in zs.zeros] == [(0,)]


def test_cqc_extremes():
    assert check_cqc(SimplexZero(4, (0, 1, 2, 3), (1, 1, 1, 1)))
    assert check_cqc(SimplexZero(4, (2,), (1,)))


def test_not_a_zero_raises():
    m = t_psi(PI10)
    z = SimplexZero.from_vector([1, 1, 1, 1, 1])
    with pytest.raises(ZeroError):
        check_scc(m, z)
    with pytest.raises(ZeroError):
        check_sosc(m, z)


def test_non_copositive():
    m = SymMatrix.from_array([[1, -2], [-2, 1]])
    with pytest.raises(NonCopositive) as info:
        enumerate_zeros(m)
    x = info.value.witness
    assert np.all(x >= 0)
    assert x @ m.array @ x < -1e-8


def test_enumeration_cap():
    with pytest.raises(MatrixError):
        enumerate_zeros(identity(13))


def test_simplex_zero_validation():
    with pytest.raises(ZeroError):
        SimplexZero(3, (0, 0), (0.5, 0.5))
    with pytest.raises(ZeroError):
        SimplexZero(3, (0, 1), (1.0, 0.0))
    with pytest.raises(ZeroError):
        SimplexZero.from_vector([-1, 2])
    z = SimplexZero(3, (0, 2), (2.0, 2.0))
    assert z.coords == (0.5, 0.5)
    assert z.to_dict() == {"support": [1, 3], "coords": [0.5, 0.5]}


def test_scc_closed_form_value():
    p = math.pi / 10
    expected = math.sin(p) * (math.cos(2 * p) + math.cos(3 * p))
    assert scc_closed_form(PI10) == pytest.approx(expected, abs=1e-15)
    assert scc_closed_form(PI10) == pytest.approx(0.4316, abs=1e-4)
    assert abs(scc_closed_form(PI10) - dot_scc(PI10)) <= 1e-10


def test_scc_closed_form_grid():
    # 10^4 points of Psi: positive and equal to the direct dot product
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10_000):
        psi = sample_psi(rng, margin=1e-3)
        v = scc_closed_form(psi)
        assert v > 0
        worst = max(worst, abs(v - dot_scc(psi)))
    assert worst <= 1e-10


def test_scaled_zero():
    z = t_psi_minimizers(PI10)[0]
    assert scaled_zero(z, (1, 1, 1, 1, 1)) == z
    d = (1.0, 2.0, 0.5, 3.0, 1.5)
    zd = scaled_zero(z, d)
    u = zd.vector()
    m = scale(t_psi(PI10), d).array
    assert abs(u @ m @ u) <= 1e-10
    back = scaled_zero(zd, tuple(1 / v for v in d))
    np.testing.assert_allclose(back.vector(), z.vector(), atol=1e-14)
    with pytest.raises(ZeroError):
        scaled_zero(z, (1, 2))


def test_scaling_invariance():
    rng = np.random.default_rng(3)
    base = t_psi(PI10)
    zs = enumerate_zeros(base)
    for _ in range(10):
        d = DiagScaling(tuple(float(v) for v in rng.uniform(0.3, 3.0, 5)))
        md = scale(base, d)
        zd = enumerate_zeros(md)
        assert zd.kind == FINITE and len(zd) == len(zs)
        for z in zs.zeros:
            assert check_scc(md, scaled_zero(z, d)) == check_scc(base, z)


def test_support_uniqueness_and_consistency():
    rng = np.random.default_rng(11)
    for _ in range(20):
        psi = sample_psi(rng)
        m = t_psi(psi)
        zs = enumerate_zeros(m)
        supports = [z.support for z in zs.zeros]
        assert len(supports) == len(set(supports))
        for z in zs.zeros:
            u = z.vector()
            assert u @ m.array @ u <= 1e-10
            assert abs(u.sum() - 1) <= 1e-12


def test_random_psi_sweep():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        psi = sample_psi(rng)
        assert_matches_formulas(psi)
        assert opt_dmd_report(t_psi(psi)).overall


def test_grid_oracle_agrees_on_minimum():
    # the simplex minimum of a matrix with zeros is 0; a grid cannot go below it
    val, _ = grid_min(t_psi(PI10).array, denom=30)
    assert val >= -1e-12
    assert val <= 0.05


def test_opt_dmd_reports():
    rep = opt_dmd_report(t_psi(PI10))
    assert rep.overall and not rep.interior
    assert rep.claim == CLAIM_LABEL
    assert len(rep.per_zero) == 5
    assert all(p["cqc"] and p["scc"] and p["sosc"] for p in rep.per_zero)
    h = opt_dmd_report(horn())
    assert not h.overall and h.zero_set.kind == INFINITE and h.claim is None
    i = opt_dmd_report(identity(3))
    assert i.overall and i.interior
    d = rep.to_dict()
    assert d["zero_set"]["kind"] == FINITE
    assert h.to_dict()["zero_set"]["infinite_supports"][1] == [1, 3, 4]


def test_psi_params_boundary():
    with pytest.raises(MatrixError):
        PsiParams((0.0, 0.5, 0.5, 0.5, 0.5))
    with pytest.raises(MatrixError):
        PsiParams((math.pi / 5,) * 5)
