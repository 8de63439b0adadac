import numpy as np
import pytest
from oracles import chain_suite, grid_min, psd_plus_nonneg

from coposhier.matrices import SymMatrix, horn, identity, permute, scale, t_psi
from coposhier.sdp import SolverOptions
from coposhier.sos.cones import ConeId
from coposhier.sos.membership import (
    LevelTooLarge,
    MembershipOptions,
    Verdict,
    check_membership,
    find_min_level,
    lasserre_bound,
)

F, I, U = Verdict.FEASIBLE, Verdict.INFEASIBLE, Verdict.UNKNOWN
M3 = SymMatrix.from_array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])


def verdict(m, fam, r, **kw):
    return check_membership(m, ConeId(fam, r), MembershipOptions(**kw) if kw else None).verdict


def test_horn_k0_infeasible_with_margin():
    res = check_membership(horn(), ConeId("K", 0))
    assert res.verdict == I
    assert res.margin >= 1e-6
    assert res.witness


def test_horn_k1_feasible():
    assert verdict(horn(), "K", 1) == F


@pytest.mark.parametrize("r", [2, 3, 5])
def test_horn_lasd_infeasible(r):
    assert verdict(horn(), "LASD", r) == I


@pytest.mark.parametrize("r", [2, 3, 5])
def test_m3_obstruction(r):
    assert verdict(M3, "LASD", r) == I


def test_m3_is_copositive_and_psd_plus_nonneg():
    assert verdict(M3, "K", 0) == F


def test_two_by_two_copositive_lasd3():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b = rng.uniform(0.1, 2.0, 2)
        c = -np.sqrt(a * b) * rng.uniform(0, 1)
        assert verdict(SymMatrix.from_array([[a, c], [c, b]]), "LASD", 3) == F


def test_parity_lasd3_lasd4():
    for _, m in chain_suite(seed=1, count=8):
        v3, v4 = verdict(m, "LASD", 3), verdict(m, "LASD", 4)
        if U not in (v3, v4):
            assert v3 == v4


def test_q_k_agreement_low_levels():
    for _, m in chain_suite(seed=2, count=6):
        for r in (0, 1):
            vq, vk = verdict(m, "Q", r), verdict(m, "K", r)
            if U not in (vq, vk):
                assert vq == vk


def test_chain_small_suite():
    for _, m in chain_suite(seed=3, count=6):
        for r in (2, 3):
            v = {fam: verdict(m, fam, lvl) for fam, lvl in (("LASD", r), ("K", r - 2), ("LASP", r), ("LASS", 2 * r))}
            if v["LASD"] == F and v["K"] != U:
                assert v["K"] == F
            decided = [x for k, x in v.items() if k != "LASD" and x != U]
            assert len(set(decided)) <= 1


def test_permutation_invariance():
    rng = np.random.default_rng(9)
    cases = [(horn(), 0), (horn(), 1)] + [(m, 0) for _, m in chain_suite(seed=4, count=4)]
    for m, r in cases:
        base = verdict(m, "K", r)
        perm = [int(i) for i in rng.permutation(m.n)]
        assert verdict(permute(m, perm), "K", r) == base


def test_monotone_in_level():
    for _, m in chain_suite(seed=5, count=6):
        for fam, rs in (("K", (0, 1, 2)), ("LASD", (2, 3, 4, 5))):
            seen_feasible = False
            for r in rs:
                v = verdict(m, fam, r)
                if seen_feasible:
                    assert v != I
                seen_feasible = seen_feasible or v == F


def test_k0_against_alternating_projections():
    rng = np.random.default_rng(13)
    decided = 0
    for _ in range(12):
        a = rng.uniform(-1, 1, (4, 4))
        a = (a + a.T) / 2 + np.diag(rng.uniform(0.2, 1.5, 4))
        a = np.round(a, 6)
        found, dist = psd_plus_nonneg(a)
        v = verdict(SymMatrix.from_array(a), "K", 0)
        if found:
            assert v == F
            decided += 1
        elif dist > 1e-3:
            assert v == I
            decided += 1
    assert decided >= 8


def test_find_min_level():
    out = find_min_level(horn(), "K", 3)
    assert out.level == 1
    assert [r for r, _ in out.per_level] == [0, 1]
    assert find_min_level(identity(4), "K", 3).level == 0
    none = find_min_level(horn(), "LASD", 3)
    assert none.level is None and len(none.per_level) == 2


def test_find_min_level_scaled_tpsi():
    m = scale(t_psi((np.pi / 10,) * 5), (1, 2, 1, 1, 1))
    out = find_min_level(m, "LASD", 6)
    assert out.level is not None and out.level <= 6


def test_bound_identity_against_grid():
    val, _ = grid_min(identity(2).array, denom=60)
    out = lasserre_bound(identity(2), 2)
    assert abs(out.value - val) <= 1e-6
    assert abs(out.value - 0.5) <= 1e-6


def test_bound_against_grid_random():
    # the bound never exceeds the true minimum, which the grid overestimates
    rng = np.random.default_rng(17)
    for _ in range(3):
        a = rng.uniform(-1, 2, (3, 3))
        a = (a + a.T) / 2
        gv, _ = grid_min(a, denom=60)
        out = lasserre_bound(SymMatrix.from_array(a), 3)
        assert out.value <= gv + 1e-7


def test_bound_horn():
    for r in (2, 3):
        assert lasserre_bound(horn(), r).value <= -1e-6


def test_bound_monotone():
    for m in (horn(), identity(3), t_psi((np.pi / 10,) * 5)):
        vals = [lasserre_bound(m, r).value for r in (1, 2, 3)]
        assert all(a <= b + 1e-7 for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= grid_min(m.array, denom=20)[0] + 1e-7


def test_level_too_large():
    with pytest.raises(LevelTooLarge):
        check_membership(horn(), ConeId("K", 4))
    with pytest.raises(LevelTooLarge):
        check_membership(horn(), ConeId("K", 1), MembershipOptions(max_block_dim=20))


def test_iteration_cap_gives_unknown():
    opts = MembershipOptions(solver=SolverOptions(max_iters=2))
    res = check_membership(horn(), ConeId("K", 1), opts)
    assert res.verdict == U
    assert "reason" in res.diagnostics


def test_deterministic():
    a = check_membership(horn(), ConeId("LASD", 3))
    b = check_membership(horn(), ConeId("LASD", 3))
    assert a.to_dict() == b.to_dict()


def test_result_dict():
    d = check_membership(horn(), ConeId("K", 1)).to_dict()
    assert d["verdict"] == "feasible" and d["cone"] == "K(1)"
    assert d["residual"] <= 1e-7


def test_bound_minus_infinity_is_certified():
    # order 2 admits no identity for these matrices; early rays must still end in -inf
    m = SymMatrix.from_array([[2.181157, -0.852464, -2.034248], [-0.852464, 0.876725, 1.996518], [-2.034248, 1.996518, 4.045116]])
    out = lasserre_bound(m, 2)
    assert out.value == float("-inf") and out.certificate is None
    assert out.diagnostics["witness_violation"] <= 1e-8
    assert lasserre_bound(m, 3).value <= grid_min(m.array, denom=40)[0] + 1e-7
    hd = scale(horn(), (1.0, 1.5, 0.7, 1.2, 0.9))
    assert lasserre_bound(hd, 2).value == float("-inf")
