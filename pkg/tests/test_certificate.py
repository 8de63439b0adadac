import json
from fractions import Fraction

import numpy as np
import pytest

from coposhier.matrices import SymMatrix, horn, identity
from coposhier.sos.certificate import Certificate, CertificateError, verify_certificate
from coposhier.sos.cones import ConeId
from coposhier.sos.formulate import formulate
from coposhier.sos.membership import MembershipOptions, Verdict, check_membership, lasserre_bound

F = Fraction


def two_by_two_lasd3():
    """Exact LASD(3) certificate of [[1,-1],[-1,1]]: (x1+x2)(x1-x2)^2 = x1 (x1-x2)^2 + x2 (x1-x2)^2."""
    m = SymMatrix.from_array([[1, -1], [-1, 1]])
    cone = ConeId("LASD", 3)
    prob = formulate(m, cone)
    g = [[F(1), F(-1)], [F(-1), F(1)]]
    assert prob.blocks[0].basis == ((1, 0), (0, 1))
    return m, Certificate(cone=cone, blocks=prob.blocks, grams=[g, [row[:] for row in g]], matrix=m, exact=True)


def test_hand_built_certificate_is_exact():
    m, cert = two_by_two_lasd3()
    res, eig = verify_certificate(cert, m)
    assert res == 0.0
    assert eig == pytest.approx(0.0, abs=1e-12)


def test_corrupted_gram_is_detected():
    m, cert = two_by_two_lasd3()
    cert.grams[0][0][0] = F(2)
    res, _ = verify_certificate(cert, m)
    assert res > 0.5


def test_json_round_trip_exact():
    m, cert = two_by_two_lasd3()
    cert.residual, cert.min_eig = verify_certificate(cert, m)
    back = Certificate.from_json(cert.to_json())
    assert back.cone == cert.cone
    assert back.grams == cert.grams
    assert all(isinstance(v, Fraction) for row in back.grams[0] for v in row)
    assert back.exact
    assert verify_certificate(back, m)[0] == 0.0


def test_horn_k1_certificate():
    res = check_membership(horn(), ConeId("K", 1))
    assert res.verdict == Verdict.FEASIBLE
    cert = res.certificate
    assert cert.residual <= 1e-7
    assert cert.min_eig >= -1e-8
    again = Certificate.from_dict(json.loads(cert.to_json()))
    r2, e2 = verify_certificate(again, horn())
    assert r2 == pytest.approx(cert.residual, abs=1e-12)
    assert e2 == pytest.approx(cert.min_eig, abs=1e-12)


def test_structure_mismatch():
    m, cert = two_by_two_lasd3()
    cert.cone = ConeId("LASD", 5)
    with pytest.raises(CertificateError):
        verify_certificate(cert, m)


def test_wrong_gram_shape():
    m, cert = two_by_two_lasd3()
    cert.grams[0] = [[F(1)]]
    with pytest.raises(CertificateError):
        verify_certificate(cert, m)


def test_matrix_size_mismatch():
    _, cert = two_by_two_lasd3()
    with pytest.raises(CertificateError):
        verify_certificate(cert, identity(3))


def test_malformed_json():
    with pytest.raises(CertificateError):
        Certificate.from_dict({"cone": "K(1)"})
    with pytest.raises(CertificateError):
        Certificate.from_dict({"cone": "bogus", "blocks": []})


def test_bound_certificate_verifies():
    out = lasserre_bound(identity(2), 2)
    cert = out.certificate
    assert out.value == pytest.approx(0.5, abs=1e-6)
    assert cert.residual <= 1e-7
    assert cert.min_eig >= -1e-8
    back = Certificate.from_json(cert.to_json())
    res, _ = verify_certificate(back, identity(2))
    assert res <= 1e-7


def test_bound_certificate_needs_value():
    out = lasserre_bound(identity(2), 2)
    cert = out.certificate
    cert.value = None
    with pytest.raises(CertificateError):
        verify_certificate(cert, identity(2))


def test_rational_option_gives_exact_certificate():
    res = check_membership(horn(), ConeId("K", 1), MembershipOptions(rational=True))
    assert res.verdict == Verdict.FEASIBLE
    assert res.exactly_verified
    assert res.certificate.residual == 0.0
    grams = res.certificate.grams
    assert all(isinstance(v, Fraction) for g in grams for row in g for v in row)
    assert np.min(np.linalg.eigvalsh(res.certificate.gram_arrays()[0])) >= -1e-12
