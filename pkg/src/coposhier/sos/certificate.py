"""Certificates: Gram data witnessing a membership identity or a bound."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..matrices import SymMatrix
from ..poly import Polynomial, quad_form
from .cones import BOUND, ConeError, ConeId
from .formulate import GramBlock, formulate, formulate_bound, membership_target


class CertificateError(ValueError):
    pass


@dataclass
class Certificate:
    cone: ConeId
    blocks: list[GramBlock]
    grams: list  # per block: list of rows (floats or Fractions)
    residual: float = float("nan")
    min_eig: float = float("nan")
    exact: bool = False
    value: object = None  # bound value lambda, bound certificates only
    multiplier_q: Polynomial | None = None  # ideal multiplier, bound certificates only
    matrix: SymMatrix | None = None
    extra: dict = field(default_factory=dict)

    def gram_arrays(self) -> list[np.ndarray]:
        return [np.array([[float(v) for v in row] for row in g], dtype=float) for g in self.grams]

    def to_dict(self) -> dict:
        def enc(v):
            return str(v) if isinstance(v, Fraction) else float(v)

        return {
            "cone": str(self.cone),
            "blocks": [
                {
                    "label": blk.label,
                    "basis": [list(e) for e in blk.basis],
                    "multiplier": blk.multiplier.to_json_terms(),
                    "gram": [[enc(v) for v in row] for row in g],
                }
                for blk, g in zip(self.blocks, self.grams)
            ],
            "multipliers": {} if self.multiplier_q is None else {"q": self.multiplier_q.to_json_terms()},
            "value": None if self.value is None else enc(self.value),
            "residual": float(self.residual),
            "min_eig": float(self.min_eig),
            "exact": bool(self.exact),
            "matrix": None if self.matrix is None else self.matrix.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Certificate":
        try:
            cone = ConeId.parse(data["cone"])
            matrix = SymMatrix.from_dict(data["matrix"]) if data.get("matrix") else None
            blocks, grams = [], []
            for b in data["blocks"]:
                basis = tuple(tuple(int(k) for k in e) for e in b["basis"])
                nvars = len(basis[0]) if basis else (matrix.n if matrix else 0)
                mult = Polynomial.from_json_terms(nvars, b["multiplier"])
                blocks.append(GramBlock(b["label"], basis, mult))
                grams.append([[_dec(v) for v in row] for row in b["gram"]])
            q = None
            mults = data.get("multipliers") or {}
            if "q" in mults:
                q = Polynomial.from_json_terms(blocks[0].multiplier.nvars, mults["q"])
            value = data.get("value")
            return cls(
                cone=cone,
                blocks=blocks,
                grams=grams,
                residual=float(data.get("residual", float("nan"))),
                min_eig=float(data.get("min_eig", float("nan"))),
                exact=bool(data.get("exact", False)),
                value=None if value is None else _dec(value),
                multiplier_q=q,
                matrix=matrix,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CertificateError(f"malformed certificate: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))


def _dec(v):
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


def _expected_blocks(cert: Certificate, m: SymMatrix) -> list[GramBlock]:
    if cert.cone.family == BOUND:
        return formulate_bound(m, cert.cone.r).blocks
    return formulate(m, cert.cone).blocks


def certificate_polynomials(cert: Certificate, m: SymMatrix) -> tuple[Polynomial, Polynomial]:
    """Both sides of the certified identity, expanded independently of the SDP data."""
    expected = _expected_blocks(cert, m)
    if len(expected) != len(cert.blocks) or len(cert.grams) != len(cert.blocks):
        raise CertificateError(f"{cert.cone} needs {len(expected)} blocks, certificate has {len(cert.blocks)}")
    for want, got, g in zip(expected, cert.blocks, cert.grams):
        if want.basis != got.basis or want.multiplier != got.multiplier:
            raise CertificateError(f"block {got.label!r} does not match the structure of {cert.cone}")
        if len(g) != got.dim or any(len(row) != got.dim for row in g):
            raise CertificateError(f"gram of block {got.label!r} must be {got.dim}x{got.dim}")
    n = m.n
    rhs = Polynomial.zero(n)
    for blk, g in zip(cert.blocks, cert.grams):
        rhs = rhs + blk.polynomial(g)
    if cert.cone.family == BOUND:
        if cert.value is None:
            raise CertificateError("bound certificate lacks its value")
        lhs = quad_form(m) - Polynomial.constant(n, cert.value)
        if cert.multiplier_q is not None:
            rhs = rhs + cert.multiplier_q * (Polynomial.linear_sum(n) - 1)
    else:
        lhs = membership_target(m, cert.cone)
    return lhs, rhs


def gram_min_eig(grams) -> float:
    eigs = []
    for g in grams:
        a = np.array([[float(v) for v in row] for row in g], dtype=float)
        eigs.append(float(np.linalg.eigvalsh((a + a.T) / 2)[0]) if a.size else 0.0)
    return min(eigs) if eigs else 0.0


def verify_certificate(cert: Certificate, m: SymMatrix) -> tuple[float, float]:
    """Return ``(residual, min_eig)`` of ``cert`` for matrix ``m``.

    The residual is the largest absolute coefficient of lhs - rhs; it is an
    exact 0 when every ingredient is rational and the identity holds.
    """
    if cert.cone.family != BOUND and m.n != (cert.blocks[0].multiplier.nvars if cert.blocks else m.n):
        raise CertificateError("matrix size does not match certificate")
    try:
        lhs, rhs = certificate_polynomials(cert, m)
    except ConeError as exc:
        raise CertificateError(str(exc)) from exc
    diff = lhs - rhs
    if diff.is_zero():
        residual = 0.0
    else:
        residual = diff.max_abs_coeff()
    return float(residual), gram_min_eig(cert.grams)
