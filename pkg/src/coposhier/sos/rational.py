"""Rounding of floating Gram matrices to an exactly verified rational certificate."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .formulate import SosProblem

# exact projection through a dense rational solve is limited to this many rows
MAX_EXACT_ROWS = 600


@dataclass
class RationalOutcome:
    grams: list | None
    exact: bool
    reason: str = ""


def exact_psd(g: list[list[Fraction]]) -> bool:
    """Exact PSD test by symmetric elimination (LDL^T with zero-pivot handling)."""
    a = [list(row) for row in g]
    n = len(a)
    for k in range(n):
        d = a[k][k]
        if d < 0:
            return False
        if d == 0:
            if any(a[k][j] != 0 for j in range(k + 1, n)):
                return False
            continue
        for i in range(k + 1, n):
            if a[i][k] == 0:
                continue
            f = a[i][k] / d
            for j in range(k + 1, n):
                a[i][j] -= f * a[k][j]
    return True


def _solve_normal(rows, rhs_res, nvar):
    """Minimum-norm exact solution dv of A dv = r, or None if inconsistent."""
    m = len(rows)
    # Gram matrix A A^T
    cols: dict[int, list[tuple[int, Fraction]]] = {}
    for i, row in enumerate(rows):
        for v, c in row.items():
            cols.setdefault(v, []).append((i, Fraction(c)))
    aat: dict[tuple[int, int], Fraction] = {}
    for entries in cols.values():
        for i, ci in entries:
            for j, cj in entries:
                aat[(i, j)] = aat.get((i, j), 0) + ci * cj
    diagonal = all(i == j for (i, j), c in aat.items() if c != 0)
    if diagonal:
        z = []
        for i in range(m):
            d = aat.get((i, i), 0)
            if d == 0:
                if rhs_res[i] != 0:
                    return None
                z.append(Fraction(0))
            else:
                z.append(rhs_res[i] / d)
    else:
        if m > MAX_EXACT_ROWS:
            raise ValueError(f"exact projection limited to {MAX_EXACT_ROWS} constraints")
        mat = [[QQ(0)] * (m + 1) for _ in range(m)]
        for (i, j), c in aat.items():
            mat[i][j] = QQ(c.numerator, c.denominator)
        for i in range(m):
            mat[i][m] = QQ(rhs_res[i].numerator, rhs_res[i].denominator)
        red, pivots = DomainMatrix(mat, (m, m + 1), QQ).rref()
        if m in pivots:
            return None
        dense = red.to_Matrix()
        z = [Fraction(0)] * m
        for k, pc in enumerate(pivots):
            val = dense[k, m]
            z[pc] = Fraction(int(val.p), int(val.q))
    dv = [Fraction(0)] * nvar
    for v, entries in cols.items():
        dv[v] = sum((c * z[i] for i, c in entries), Fraction(0))
    return dv


def rationalize(prob: SosProblem, grams, max_denominator: int = 10**4) -> RationalOutcome:
    """Round ``grams`` (one per block of ``prob``) and project onto the exact identity."""
    variables, rows, rhs = prob.exact_system()
    v0 = []
    for _, k, a, b in variables:
        v0.append(Fraction(float(grams[k][a][b])).limit_denominator(max_denominator))
    res = []
    for row, r in zip(rows, rhs):
        acc = Fraction(r)
        for v, c in row.items():
            acc -= c * v0[v]
        res.append(acc)
    try:
        dv = _solve_normal(rows, res, len(variables))
    except ValueError as exc:
        return RationalOutcome(None, False, str(exc))
    if dv is None:
        return RationalOutcome(None, False, "rounded system is inconsistent")
    vals = [x + d for x, d in zip(v0, dv)]
    out = [[[Fraction(0)] * blk.dim for _ in range(blk.dim)] for blk in prob.blocks]
    for (_, k, a, b), x in zip(variables, vals):
        out[k][a][b] = x
        out[k][b][a] = x
    for g in out:
        if not exact_psd(g):
            return RationalOutcome(out, False, "rounded gram matrix is not positive semidefinite")
    return RationalOutcome(out, True)
