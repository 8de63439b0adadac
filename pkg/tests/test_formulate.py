from math import comb

import numpy as np
import pytest

from coposhier.matrices import SymMatrix, horn, identity
from coposhier.poly import Polynomial, quad_form
from coposhier.sos.cones import ConeError, ConeId, levels
from coposhier.sos.formulate import formulate, formulate_bound, membership_target


def sizes(cone):
    p = formulate(horn(), cone)
    return [b.dim for b in p.blocks], p.n_constraints


@pytest.mark.parametrize(
    "cone,dims,rows",
    [
        (ConeId("K", 0), [15], 70),
        (ConeId("K", 1), [35], 210),
        (ConeId("K", 2), [70], 495),
        (ConeId("LASD", 2), [5] + [1] * 5, 15),
        (ConeId("LASD", 3), [5] * 5, 35),
        (ConeId("LASD", 4), [15] + [5] * 5, 70),
        (ConeId("LASP", 3), [5] * 5 + [1] * 10, 35),
        (ConeId("LASS", 4), [15], 70),
        (ConeId("LASS", 6), [35], 210),
        (ConeId("Q", 1), [5] * 5 + [1] * 35, 35),
    ],
)
def test_horn_block_sizes(cone, dims, rows):
    assert sizes(cone) == (dims, rows)


def test_bound_sizes():
    p = formulate_bound(horn(), 3)
    assert [b.dim for b in p.blocks] == [5] * 6
    assert p.n_constraints == comb(4 + 3, 3)
    # every Gram basis avoids the eliminated last variable
    assert all(e[-1] == 0 for b in p.blocks for e in b.basis)


@pytest.mark.parametrize("cone", [ConeId("K", 1), ConeId("LASD", 3), ConeId("LASD", 4), ConeId("Q", 2), ConeId("LASP", 4)])
def test_rows_are_monomials_of_target_degree(cone):
    p = formulate(horn(), cone)
    deg = p.target.degree()
    assert p.n_constraints == comb(5 + deg - 1, deg)
    assert all(sum(e) == deg for e in p.rows)


def test_lasd_and_lasp_targets_agree():
    m = horn()
    for r in (2, 3, 4):
        assert membership_target(m, ConeId("LASD", r)) == membership_target(m, ConeId("LASP", r))


def test_lass_matches_k():
    m = horn()
    assert membership_target(m, ConeId("LASS", 6)) == membership_target(m, ConeId("K", 1))


def test_identity_gram_reproduces_target():
    # K(0) of the identity: sum x_i^4 is the Gram form of diag over squares
    m = identity(3)
    p = formulate(m, ConeId("K", 0))
    blk = p.blocks[0]
    g = np.array([[1.0 if e == f and max(e) == 2 else 0.0 for f in blk.basis] for e in blk.basis])
    assert blk.polynomial(g) == p.target


def test_lowered_sdp_shapes():
    p = formulate(horn(), ConeId("LASD", 2))
    sdp = p.lower()
    assert sdp.block_dims == [5]
    assert sdp.n_lp == 5
    assert len(sdp.b) == 15
    assert sdp.feasibility


def test_bound_lowering_has_objective():
    p = formulate_bound(identity(2), 2)
    sdp = p.lower()
    assert not sdp.feasibility
    assert sdp.c_lp[-1] == 1.0


@pytest.mark.parametrize("fam,r", [("K", -1), ("LASD", 1), ("LASP", 0), ("LASS", 5), ("LASS", 2), ("Q", -2), ("XYZ", 1)])
def test_invalid_levels(fam, r):
    with pytest.raises(ConeError):
        ConeId(fam, r)


def test_bound_order_must_be_positive():
    with pytest.raises(ConeError):
        formulate_bound(horn(), 0)


def test_formulate_rejects_bound_cone():
    with pytest.raises(ConeError):
        formulate(horn(), ConeId("BOUND", 2))


def test_parse_and_levels():
    assert ConeId.parse("K(2)") == ConeId("K", 2)
    assert ConeId.parse(" lasd ( 3 ) ").family == "LASD"
    with pytest.raises(ConeError):
        ConeId.parse("K2")
    assert levels("LASD", 5) == [2, 3, 4, 5]
    assert levels("LASS", 8) == [4, 6, 8]
    assert levels("K", 2) == [0, 1, 2]


def test_exact_system_matches_lowering():
    p = formulate(horn(), ConeId("LASD", 3))
    variables, rows, rhs = p.exact_system()
    assert len(rows) == p.n_constraints
    assert len(variables) == 5 * 15
    target = p.target
    for e, c in zip(p.rows, rhs):
        assert c == target.terms.get(e, 0)


def test_target_is_scaled_in_lowering():
    m = SymMatrix.from_array(4 * np.array([[1.0, -1.0], [-1.0, 1.0]]))
    p = formulate(m, ConeId("LASD", 3))
    sdp = p.lower(target_scale=4.0)
    assert np.max(np.abs(sdp.b)) == pytest.approx(1.0)
    assert quad_form(m).max_abs_coeff() == 8
    assert isinstance(p.target, Polynomial)
