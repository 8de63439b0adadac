"""Zeros of x^T M x on the standard simplex and the optimality conditions at them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .matrices import DiagScaling, MatrixError, PsiParams, SymMatrix

PSD_TOL = 1e-9
KERNEL_TOL = 1e-9
POSITIVE_TOL = 1e-8
ZERO_RESIDUAL_TOL = 1e-10
NEGATIVE_VALUE_TOL = 1e-8
SCC_TOL = 1e-8
SUPPORT_GRADIENT_TOL = 1e-9
SOSC_TOL = 1e-9
MAX_ENUMERATION_DIM = 12

FINITE = "Finite"
INFINITE = "Infinite"
EMPTY = "Empty"

CLAIM_LABEL = "CQC, SCC and SOSC hold at every zero: every positive diagonal scaling DMD is certified at some LAS_simplex level"


class ZeroError(ValueError):
    pass


class NonCopositive(ZeroError):
    def __init__(self, witness: np.ndarray, value: float):
        super().__init__(f"matrix is not copositive: x^T M x = {value:.3e} at a nonnegative x")
        self.witness = witness
        self.value = value


@dataclass(frozen=True)
class SimplexZero:
    """A point of the standard simplex stored by its support (0-based) and positive coordinates."""

    n: int
    support: tuple[int, ...]
    coords: tuple[float, ...]

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        coords = tuple(float(c) for c in self.coords)
        if len(support) != len(coords) or not support:
            raise ZeroError("support and coordinates must be nonempty and of equal length")
        if list(support) != sorted(set(support)) or support[0] < 0 or support[-1] >= self.n:
            raise ZeroError("support must be strictly increasing indices in range")
        if min(coords) <= 0:
            raise ZeroError("coordinates must be strictly positive")
        total = sum(coords)
        if abs(total - 1.0) > 1e-12:
            coords = tuple(c / total for c in coords)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_vector(cls, u) -> "SimplexZero":
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise ZeroError("a simplex point has nonnegative entries")
        s = float(u.sum())
        if s <= 0:
            raise ZeroError("zero vector is not a simplex point")
        u = u / s
        support = tuple(int(i) for i in np.flatnonzero(u > 0))
        return cls(len(u), support, tuple(float(u[i]) for i in support))

    def vector(self) -> np.ndarray:
        u = np.zeros(self.n)
        u[list(self.support)] = self.coords
        return u

    def to_dict(self) -> dict:
        return {"support": [i + 1 for i in self.support], "coords": list(self.coords)}


@dataclass
class ZeroSet:
    kind: str
    zeros: list[SimplexZero] = field(default_factory=list)
    infinite_supports: list[tuple[int, ...]] = field(default_factory=list)
    witness: np.ndarray | None = None  # a positive kernel vector on the first infinite support

    def __len__(self) -> int:
        return len(self.zeros)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "zeros": [z.to_dict() for z in self.zeros]}
        if self.kind == INFINITE:
            out["infinite_supports"] = [[i + 1 for i in s] for s in self.infinite_supports]
            out["witness"] = None if self.witness is None else [float(v) for v in self.witness]
        return out


def _positive_in_span(basis: np.ndarray) -> np.ndarray | None:
    """A vector with all entries >= 1 in the column span of ``basis``, if one exists."""
    k = basis.shape[1]
    res = linprog(
        c=np.zeros(k),
        A_ub=-basis,
        b_ub=-np.ones(basis.shape[0]),
        bounds=[(None, None)] * k,
        method="highs",
    )
    if res.status != 0:
        return None
    return basis @ res.x


def _positive_vector(vecs: np.ndarray) -> np.ndarray | None:
    """Strictly positive vector in span(vecs) (columns), normalised to sum 1."""
    if vecs.shape[1] == 1:
        v = vecs[:, 0]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        if np.all(v > POSITIVE_TOL):
            return v / v.sum()
        return None
    v = _positive_in_span(vecs)
    return None if v is None else v / v.sum()


def enumerate_zeros(m: SymMatrix) -> ZeroSet:
    """All zeros of x^T M x on the simplex, or an infinite-family witness.

    A zero with support exactly S exists iff M[S] is psd and its kernel holds a
    strictly positive vector; a kernel of dimension >= 2 with such a vector
    yields infinitely many zeros.
    """
    n = m.n
    if n > MAX_ENUMERATION_DIM:
        raise MatrixError(f"support enumeration is capped at n = {MAX_ENUMERATION_DIM}")
    a = m.array
    zeros: list[SimplexZero] = []
    infinite: list[tuple[int, ...]] = []
    witness = None
    for size in range(1, n + 1):
        for s in itertools.combinations(range(n), size):
            sub = a[np.ix_(s, s)]
            tol_scale = 1.0 + np.linalg.norm(sub, 2)
            evals, evecs = np.linalg.eigh(sub)
            if evals[0] < -PSD_TOL * tol_scale:
                _check_negative_direction(a, s, evals, evecs, tol_scale)
                continue
            ker = evecs[:, evals <= KERNEL_TOL * tol_scale]
            if ker.shape[1] == 0:
                continue
            v = _positive_vector(ker)
            if v is None:
                continue
            if ker.shape[1] >= 2:
                infinite.append(s)
                if witness is None:
                    witness = np.zeros(n)
                    witness[list(s)] = v
                continue
            u = np.zeros(n)
            u[list(s)] = v
            if u @ a @ u > ZERO_RESIDUAL_TOL:
                continue
            zeros.append(SimplexZero(n, s, tuple(v)))
    if infinite:
        return ZeroSet(INFINITE, zeros, infinite, witness)
    if zeros:
        return ZeroSet(FINITE, zeros)
    return ZeroSet(EMPTY)


def _check_negative_direction(a, s, evals, evecs, tol_scale):
    """Raise NonCopositive if a negative eigenspace of M[S] contains a positive vector."""
    neg = evals < -PSD_TOL * tol_scale
    vals = evals[neg]
    # group numerically equal eigenvalues into eigenspaces
    start = 0
    while start < len(vals):
        stop = start + 1
        while stop < len(vals) and vals[stop] - vals[start] <= KERNEL_TOL * tol_scale:
            stop += 1
        v = _positive_vector(evecs[:, start:stop])
        if v is not None:
            x = np.zeros(a.shape[0])
            x[list(s)] = v
            value = float(x @ a @ x)
            if value < -NEGATIVE_VALUE_TOL:
                raise NonCopositive(x, value)
        start = stop


# ---------------------------------------------------------------------------


def t_psi_minimizers(psi) -> list[SimplexZero]:
    """The five zeros of T(psi) on the simplex, from their closed-form sine expressions."""
    if not isinstance(psi, PsiParams):
        psi = PsiParams(tuple(psi))
    p1, p2, p3, p4, p5 = psi.psi
    sn = math.sin
    us = [
        (sn(p5), sn(p4 + p5), sn(p4), 0.0, 0.0),
        (sn(p3 + p4), sn(p3), 0.0, 0.0, sn(p4)),
        (0.0, sn(p1), sn(p1 + p5), sn(p5), 0.0),
        (0.0, 0.0, sn(p2), sn(p1 + p2), sn(p1)),
        (sn(p2), 0.0, 0.0, sn(p3), sn(p2 + p3)),
    ]
    return [SimplexZero.from_vector(u) for u in us]


def scc_closed_form(psi) -> float:
    """sin(psi5) * (cos(psi2 + psi3) + cos(psi1 + psi4 + psi5)), the off-support gradient at u_1."""
    if not isinstance(psi, PsiParams):
        psi = PsiParams(tuple(psi))
    p1, p2, p3, p4, p5 = psi.psi
    return math.sin(p5) * (math.cos(p2 + p3) + math.cos(p1 + p4 + p5))


def _require_zero(m: SymMatrix, z: SimplexZero) -> np.ndarray:
    if z.n != m.n:
        raise ZeroError("zero and matrix dimensions differ")
    u = z.vector()
    value = float(u @ m.array @ u)
    if abs(value) > ZERO_RESIDUAL_TOL:
        raise ZeroError(f"point is not a zero of the matrix (u^T M u = {value:.3e})")
    return u


def check_scc(m: SymMatrix, z: SimplexZero, tol: float = SCC_TOL) -> bool:
    """Strict complementarity: (Mu)_i > tol off the support of the zero u."""
    u = _require_zero(m, z)
    g = m.array @ u
    on = np.abs(g[list(z.support)])
    if on.size and on.max() > SUPPORT_GRADIENT_TOL:
        raise ZeroError(f"gradient does not vanish on the support (max {on.max():.3e})")
    off = [i for i in range(m.n) if i not in z.support]
    return all(g[i] > tol for i in off)


def check_sosc(m: SymMatrix, z: SimplexZero, tol: float = SOSC_TOL) -> bool:
    """Second-order sufficiency: M[S] positive definite on {a : sum a = 0}."""
    _require_zero(m, z)
    k = len(z.support)
    if k == 1:
        return True
    q = sla.null_space(np.ones((1, k)))
    sub = m.principal(z.support)
    red = q.T @ sub @ q
    return bool(np.linalg.eigvalsh((red + red.T) / 2)[0] > tol)


def check_cqc(z: SimplexZero) -> bool:
    """Linear independence of the active constraint gradients e and e_i (i off the support)."""
    n = z.n
    off = [i for i in range(n) if i not in z.support]
    cols = [np.ones(n)] + [np.eye(n)[i] for i in off]
    return int(np.linalg.matrix_rank(np.column_stack(cols))) == 1 + len(off)


def scaled_zero(z: SimplexZero, d: DiagScaling) -> SimplexZero:
    """The zero of DMD matching the zero z of M: D^{-1} u normalised to the simplex."""
    if not isinstance(d, DiagScaling):
        d = DiagScaling(tuple(d))
    if d.n != z.n:
        raise ZeroError("scaling and zero dimensions differ")
    u = z.vector() / np.array([float(v) for v in d.d])
    return SimplexZero.from_vector(u)


@dataclass
class OptReport:
    zero_set: ZeroSet
    per_zero: list[dict]
    overall: bool
    interior: bool
    claim: str | None

    def to_dict(self) -> dict:
        return {
            "zero_set": self.zero_set.to_dict(),
            "per_zero": self.per_zero,
            "overall": self.overall,
            "interior": self.interior,
            "claim": self.claim,
        }


def opt_dmd_report(m: SymMatrix) -> OptReport:
    """Check CQC, SCC and SOSC at every zero of x^T M x on the simplex."""
    zs = enumerate_zeros(m)
    if zs.kind == EMPTY:
        return OptReport(zs, [], True, True, CLAIM_LABEL)
    if zs.kind == INFINITE:
        return OptReport(zs, [], False, False, None)
    per_zero = []
    for z in zs.zeros:
        flags = {"cqc": check_cqc(z), "scc": check_scc(m, z), "sosc": check_sosc(m, z)}
        per_zero.append({**z.to_dict(), **flags})
    overall = all(p["cqc"] and p["scc"] and p["sosc"] for p in per_zero)
    return OptReport(zs, per_zero, overall, False, CLAIM_LABEL if overall else None)
