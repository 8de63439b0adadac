"""Coefficient-matching formulations of cone membership and simplex bounds.

Every membership test is written homogeneously, as an identity

    target(x) = sum_k  multiplier_k(x) * m_k(x)^T G_k m_k(x)

with G_k psd (1x1 blocks are plain nonnegative scalars).  The targets are

    K(r)     (sum x_i^2)^r   (x o x)^T M (x o x)
    LASS(s)  (sum x_i^2)^(s/2-2) (x o x)^T M (x o x)
    LASD(r)  (sum x_i)^(r-2) x^T M x
    LASP(r)  (sum x_i)^(r-2) x^T M x
    Q(r)     (sum x_i)^r     x^T M x

The Lasserre bound is the one formulation that works modulo the ideal
generated by ``sum x - 1``; it is matched on normal forms (the last
variable eliminated), which makes the ideal multiplier implicit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..matrices import MatrixError, SymMatrix
from ..poly import (
    Exponent,
    Polynomial,
    add_exponents,
    gram_polynomial,
    grlex_key,
    monomials_of_degree,
    monomials_up_to_degree,
    mul_simplex_power,
    quad_form,
    reduce_mod_simplex_ideal,
    squared_vars_form,
)
from ..sdp import SdpProblem
from .cones import BOUND, LAS_PREORDERING, LAS_SIMPLEX, LAS_SPHERE, K, Q, ConeError, ConeId


@dataclass(frozen=True)
class GramBlock:
    """One term ``multiplier * m(x)^T G m(x)`` of a certificate."""

    label: str
    basis: tuple[Exponent, ...]
    multiplier: Polynomial

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def is_scalar(self) -> bool:
        return len(self.basis) == 1

    def polynomial(self, gram) -> Polynomial:
        return self.multiplier * gram_polynomial(self.basis, gram, self.multiplier.nvars)


@dataclass(frozen=True)
class ScalarVar:
    """A nonnegative scalar unknown entering the identity as ``value * poly``."""

    label: str
    poly: Polynomial


@dataclass
class SosProblem:
    cone: ConeId
    nvars: int
    target: Polynomial
    blocks: list[GramBlock]
    scalars: list[ScalarVar] = field(default_factory=list)
    modulo_simplex: bool = False
    objective: dict[str, float] = field(default_factory=dict)
    rows: tuple[Exponent, ...] = ()
    anchor: object = 0

    def __post_init__(self):
        if not self.rows:
            self.rows = self._collect_rows()

    def _reduce(self, p: Polynomial) -> Polynomial:
        return reduce_mod_simplex_ideal(p) if self.modulo_simplex else p

    def block_pair_terms(self, blk: GramBlock):
        """Yield ``(a, b, exponent, coeff)``: the coefficient of X[a, b] (a <= b) on each monomial."""
        for a in range(blk.dim):
            for b in range(a, blk.dim):
                mono = Polynomial.monomial(add_exponents(blk.basis[a], blk.basis[b]))
                p = self._reduce(blk.multiplier * mono)
                w = 1 if a == b else 2
                for e, c in p.terms.items():
                    yield a, b, e, c * w

    def _collect_rows(self) -> tuple[Exponent, ...]:
        seen = set(self._reduce(self.target).terms)
        for blk in self.blocks:
            for _, _, e, _ in self.block_pair_terms(blk):
                seen.add(e)
        for sv in self.scalars:
            seen.update(self._reduce(sv.poly).terms)
        return tuple(sorted(seen, key=grlex_key))

    @property
    def n_constraints(self) -> int:
        return len(self.rows)

    @property
    def psd_blocks(self) -> list[GramBlock]:
        return [b for b in self.blocks if not b.is_scalar]

    @property
    def scalar_blocks(self) -> list[GramBlock]:
        return [b for b in self.blocks if b.is_scalar]

    def lower(self, target_scale: float = 1.0, feasibility: bool | None = None) -> SdpProblem:
        """Build the SDP; the right-hand side is the target divided by ``target_scale``.

        LP columns: scalar (1x1) blocks in order, then ``scalars``.  Problems
        without an objective become max-margin feasibility problems; passing
        ``feasibility=True`` forces that form and ignores the objective.
        """
        row_of = {e: k for k, e in enumerate(self.rows)}
        m = len(self.rows)
        b = np.zeros(m)
        for e, c in self._reduce(self.target).terms.items():
            b[row_of[e]] = float(c) / target_scale
        psd = self.psd_blocks
        entries = []
        for blk in psd:
            ent = [(row_of[e], a, bb, float(c)) for a, bb, e, c in self.block_pair_terms(blk)]
            entries.append(ent)
        lp_entries = []
        col = 0
        for blk in self.scalar_blocks:
            for _, _, e, c in self.block_pair_terms(blk):
                lp_entries.append((row_of[e], col, float(c)))
            col += 1
        c_lp = []
        for sv in self.scalars:
            for e, c in self._reduce(sv.poly).terms.items():
                lp_entries.append((row_of[e], col, float(c)))
            col += 1
        if feasibility is None:
            feasibility = not self.objective
        if not feasibility:
            c_lp = [0.0] * len(self.scalar_blocks) + [float(self.objective.get(sv.label, 0.0)) for sv in self.scalars]
            c_blocks = [np.zeros((blk.dim, blk.dim)) for blk in psd]
        else:
            c_lp = None
            c_blocks = None
        return SdpProblem(
            block_dims=[blk.dim for blk in psd],
            b=b,
            entries=entries,
            n_lp=col,
            lp_entries=lp_entries,
            c_blocks=c_blocks,
            c_lp=None if c_lp is None else np.asarray(c_lp),
            feasibility=feasibility,
        )

    def exact_system(self):
        """Exact sparse data ``(rows, cols)`` for the rational post-pass.

        Returns a list of variables ``(kind, block_index, a, b)`` and a list of
        dict rows mapping variable index to exact coefficient, plus exact rhs.
        """
        row_of = {e: k for k, e in enumerate(self.rows)}
        variables = []
        rows: list[dict[int, object]] = [dict() for _ in self.rows]
        for k, blk in enumerate(self.blocks):
            index = {}
            for a, bb, e, c in self.block_pair_terms(blk):
                if (a, bb) not in index:
                    index[(a, bb)] = len(variables)
                    variables.append(("gram", k, a, bb))
                v = index[(a, bb)]
                rows[row_of[e]][v] = rows[row_of[e]].get(v, 0) + c
        rhs = [0] * len(self.rows)
        for e, c in self._reduce(self.target).terms.items():
            rhs[row_of[e]] = c
        return variables, rows, rhs


# ---------------------------------------------------------------------------


def _check(m: SymMatrix, cone: ConeId):
    if not isinstance(cone, ConeId):
        raise ConeError("cone must be a ConeId")
    if m.n < 1:
        raise MatrixError("empty matrix")


def _blocks_times(multiplier: Polynomial, label: str, degree: int, n: int) -> GramBlock:
    return GramBlock(label, monomials_of_degree(n, degree), multiplier)


def membership_target(m: SymMatrix, cone: ConeId) -> Polynomial:
    """Left-hand side of the homogeneous identity for ``cone``."""
    n = m.n
    if cone.family in (K, LAS_SPHERE):
        r = cone.r if cone.family == K else cone.r // 2 - 2
        base = squared_vars_form(m)
        if r == 0:
            return base
        return Polynomial.squares_sum(n) ** r * base
    if cone.family in (LAS_SIMPLEX, LAS_PREORDERING):
        return mul_simplex_power(quad_form(m), cone.r - 2)
    if cone.family == Q:
        return mul_simplex_power(quad_form(m), cone.r)
    raise ConeError(f"no homogeneous target for {cone}")


def _subset_label(s) -> str:
    return "S{" + ",".join(str(i + 1) for i in s) + "}"


def formulate(m: SymMatrix, cone: ConeId) -> SosProblem:
    """Lower membership of ``m`` in ``cone`` to a coefficient-matching problem."""
    _check(m, cone)
    if cone.family == BOUND:
        raise ConeError("use formulate_bound for Lasserre bounds")
    n = m.n
    one = Polynomial.constant(n, 1)
    target = membership_target(m, cone)
    blocks: list[GramBlock] = []
    r = cone.r
    if cone.family in (K, LAS_SPHERE):
        deg = (r if cone.family == K else r // 2 - 2) + 2
        blocks.append(_blocks_times(one, "sigma", deg, n))
    elif cone.family == LAS_SIMPLEX:
        if r % 2:
            for i in range(n):
                blocks.append(_blocks_times(Polynomial.variable(n, i), f"sigma_{i + 1}", (r - 1) // 2, n))
        else:
            blocks.append(_blocks_times(one, "sigma_0", r // 2, n))
            lin = Polynomial.linear_sum(n)
            for i in range(n):
                blocks.append(_blocks_times(lin * Polynomial.variable(n, i), f"sigma_{i + 1}", (r - 2) // 2, n))
    elif cone.family == LAS_PREORDERING:
        for size in range(r % 2, min(r, n) + 1, 2):
            for s in itertools.combinations(range(n), size):
                e = tuple(1 if i in s else 0 for i in range(n))
                blocks.append(_blocks_times(Polynomial.monomial(e), _subset_label(s), (r - size) // 2, n))
    elif cone.family == Q:
        for beta in monomials_of_degree(n, r):
            blocks.append(GramBlock(f"sigma_{_exp_label(beta)}", monomials_of_degree(n, 1), Polynomial.monomial(beta)))
        for beta in monomials_of_degree(n, r + 2):
            blocks.append(GramBlock(f"c_{_exp_label(beta)}", monomials_of_degree(n, 0), Polynomial.monomial(beta)))
    else:
        raise ConeError(f"unsupported cone {cone}")
    return SosProblem(cone=cone, nvars=n, target=target, blocks=blocks)


def _exp_label(e: Exponent) -> str:
    return "".join(str(k) for k in e)


def formulate_bound(m: SymMatrix, r: int) -> SosProblem:
    """Lasserre bound of order ``r`` for min x^T M x over the standard simplex.

    The bound is ``L - t`` with ``L = min_i M_ii`` and ``t >= 0`` minimised,
    subject to ``x^T M x - (L - t) = sigma_0 + sum_i x_i sigma_i`` modulo
    ``sum x - 1``.  Gram bases use the first n-1 variables only, which loses
    nothing since every polynomial is congruent to one free of ``x_n``.
    """
    if not isinstance(r, int) or r < 1:
        raise ConeError("bound order must be an integer >= 1")
    n = m.n
    if n < 1:
        raise MatrixError("empty matrix")
    low = min(m.entries[i][i] for i in range(n))
    target = quad_form(m) - Polynomial.constant(n, low)

    def reduced_basis(d: int):
        return tuple(e for e in monomials_up_to_degree(n, d) if e[-1] == 0)

    blocks = [GramBlock("sigma_0", reduced_basis(r // 2), Polynomial.constant(n, 1))]
    for i in range(n):
        blocks.append(GramBlock(f"sigma_{i + 1}", reduced_basis((r - 1) // 2), Polynomial.variable(n, i)))
    scalars = [ScalarVar("t", Polynomial.constant(n, -1))]
    return SosProblem(
        cone=ConeId(BOUND, r),
        nvars=n,
        target=target,
        blocks=blocks,
        scalars=scalars,
        modulo_simplex=True,
        objective={"t": 1.0},
        anchor=low,
    )


def target_scale(p: SosProblem) -> float:
    s = p.target.max_abs_coeff()
    return s if s > 0 else 1.0

