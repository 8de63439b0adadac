"""Matrix families used throughout the package.

Every constructor returns an immutable :class:`SymMatrix`.  Matrices built from
rational data (Horn, graph matrices, rational diagonal scalings) are stored
exactly as :class:`fractions.Fraction`; anything touched by a transcendental
function (``T(psi)``) is stored in binary64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

RATIONAL = "rational"
FLOAT = "float"

# T(psi) is only defined on the open set Psi; stay this far away from its boundary.
PSI_BOUNDARY_MARGIN = 1e-6

# Cap for the exhaustive stability-number search.
MAX_BRUTE_FORCE_VERTICES = 20


class MatrixError(ValueError):
    """Raised on malformed matrix input or invalid construction parameters."""


def _is_exact(value) -> bool:
    return isinstance(value, Rational) and not isinstance(value, bool)


def _as_exact(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix with an explicit scalar mode.

    ``entries`` is a tuple of rows.  In ``rational`` mode every entry is a
    ``Fraction`` and symmetry is checked exactly; in ``float`` mode entries are
    Python floats and the lower triangle is mirrored from the upper one.
    """

    entries: tuple[tuple, ...]
    mode: str = FLOAT
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        n = len(rows)
        if n < 1:
            raise MatrixError("matrix dimension must be at least 1")
        if any(len(r) != n for r in rows):
            raise MatrixError("matrix must be square")
        if self.mode == RATIONAL:
            rows = tuple(tuple(_as_exact(v) for v in r) for r in rows)
            for i in range(n):
                for j in range(i):
                    if rows[i][j] != rows[j][i]:
                        raise MatrixError(f"matrix is not symmetric at ({i}, {j})")
        elif self.mode == FLOAT:
            upper = [[float(rows[min(i, j)][max(i, j)]) for j in range(n)] for i in range(n)]
            for i in range(n):
                for j in range(i):
                    a, b = float(rows[i][j]), float(rows[j][i])
                    if abs(a - b) > 1e-12 * max(1.0, abs(a), abs(b)):
                        raise MatrixError(f"matrix is not symmetric at ({i}, {j})")
            rows = tuple(tuple(r) for r in upper)
        else:
            raise MatrixError(f"unknown scalar mode {self.mode!r}")
        object.__setattr__(self, "entries", rows)
        arr = np.array([[float(v) for v in r] for r in rows], dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "_array", arr)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        """Read-only float view of the entries."""
        return self._array

    @property
    def is_exact(self) -> bool:
        return self.mode == RATIONAL

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def principal(self, idx: Sequence[int]) -> np.ndarray:
        idx = list(idx)
        return self._array[np.ix_(idx, idx)]

    def to_float(self) -> "SymMatrix":
        if self.mode == FLOAT:
            return self
        return SymMatrix(tuple(tuple(float(v) for v in r) for r in self.entries), FLOAT)

    @classmethod
    def from_array(cls, a, mode: str | None = None) -> "SymMatrix":
        rows = [list(r) for r in (a.tolist() if isinstance(a, np.ndarray) else a)]
        if mode is None:
            mode = RATIONAL if all(_is_exact(v) for r in rows for v in r) else FLOAT
        return cls(tuple(tuple(r) for r in rows), mode)

    # JSON: {"n": .., "entries": [[..], ..], "mode": ..}; rationals as strings.
    def to_dict(self) -> dict:
        if self.mode == RATIONAL:
            entries = [[str(v) for v in r] for r in self.entries]
        else:
            entries = [[float(v) for v in r] for r in self.entries]
        return {"n": self.n, "entries": entries, "mode": self.mode}

    @classmethod
    def from_dict(cls, data: dict) -> "SymMatrix":
        try:
            n = int(data["n"])
            entries = data["entries"]
            mode = data.get("mode", FLOAT)
        except (KeyError, TypeError, ValueError) as exc:
            raise MatrixError(f"malformed matrix object: {exc}") from exc
        if entries and not isinstance(entries[0], list):
            if len(entries) != n * n:
                raise MatrixError("flat entry list must have n*n elements")
            entries = [entries[i * n:(i + 1) * n] for i in range(n)]
        if len(entries) != n:
            raise MatrixError(f"expected {n} rows, got {len(entries)}")
        try:
            if mode == RATIONAL:
                rows = [[Fraction(str(v)) for v in r] for r in entries]
            else:
                rows = [[float(v) for v in r] for r in entries]
        except (ValueError, ZeroDivisionError) as exc:
            raise MatrixError(f"bad matrix entry: {exc}") from exc
        return cls(tuple(tuple(r) for r in rows), mode)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SymMatrix":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MatrixError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class PsiParams:
    """Angles psi of the 5x5 matrices T(psi), restricted to the open set Psi."""

    psi: tuple[float, ...]

    def __post_init__(self):
        psi = tuple(float(v) for v in self.psi)
        if len(psi) != 5:
            raise MatrixError("psi must have exactly 5 angles")
        if any(not math.isfinite(v) for v in psi):
            raise MatrixError("psi angles must be finite")
        if min(psi) <= PSI_BOUNDARY_MARGIN:
            raise MatrixError("psi angles must be positive (and not within 1e-6 of 0)")
        if sum(psi) >= math.pi - PSI_BOUNDARY_MARGIN:
            raise MatrixError("sum of psi angles must be below pi (with 1e-6 margin)")
        object.__setattr__(self, "psi", psi)

    def __iter__(self):
        return iter(self.psi)


@dataclass(frozen=True)
class DiagScaling:
    d: tuple

    def __post_init__(self):
        d = tuple(self.d)
        if not d:
            raise MatrixError("scaling vector must be nonempty")
        if any(not (float(v) > 0) for v in d):
            raise MatrixError("diagonal scaling entries must be positive")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return len(self.d)

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(v) for v in self.d)

    def inverse(self) -> "DiagScaling":
        if self.is_exact:
            return DiagScaling(tuple(1 / Fraction(v) for v in self.d))
        return DiagScaling(tuple(1.0 / float(v) for v in self.d))


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``."""

    n: int
    edges: frozenset
    alpha: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise MatrixError("graph needs at least one vertex")
        norm = set()
        for e in self.edges:
            u, v = tuple(e)
            if u == v:
                raise MatrixError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise MatrixError(f"edge ({u}, {v}) out of range")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, alpha: int | None = None) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges), alpha)

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)])

    def adjacency(self) -> list[list[int]]:
        a = [[0] * self.n for _ in range(self.n)]
        for u, v in self.edges:
            a[u][v] = a[v][u] = 1
        return a


def stability_number(g: Graph) -> int:
    """Size of a maximum independent set, by branch and bound."""
    if g.n > MAX_BRUTE_FORCE_VERTICES:
        raise MatrixError(
            f"stability number search capped at {MAX_BRUTE_FORCE_VERTICES} vertices; pass alpha explicitly"
        )
    nbr = [0] * g.n
    for u, v in g.edges:
        nbr[u] |= 1 << v
        nbr[v] |= 1 << u
    best = 0

    def search(cand: int, size: int):
        nonlocal best
        if size + bin(cand).count("1") <= best:
            return
        if not cand:
            best = size
            return
        v = cand.bit_length() - 1
        # either v is in the set (drop its neighbours) or it is not
        search(cand & ~(1 << v) & ~nbr[v], size + 1)
        search(cand & ~(1 << v), size)

    search((1 << g.n) - 1, 0)
    return best


def horn() -> SymMatrix:
    """The 5x5 Horn matrix."""
    rows = (
        (1, 1, -1, -1, 1),
        (1, 1, 1, -1, -1),
        (-1, 1, 1, 1, -1),
        (-1, -1, 1, 1, 1),
        (1, -1, -1, 1, 1),
    )
    return SymMatrix(rows, RATIONAL)


def t_psi(psi) -> SymMatrix:
    """The extreme copositive 5x5 matrix T(psi) for psi in the open set Psi."""
    if not isinstance(psi, PsiParams):
        psi = PsiParams(tuple(psi))
    p1, p2, p3, p4, p5 = psi.psi
    c = math.cos
    rows = (
        (1.0, -c(p4), c(p4 + p5), c(p2 + p3), -c(p3)),
        (-c(p4), 1.0, -c(p5), c(p5 + p1), c(p3 + p4)),
        (c(p4 + p5), -c(p5), 1.0, -c(p1), c(p1 + p2)),
        (c(p2 + p3), c(p5 + p1), -c(p1), 1.0, -c(p2)),
        (-c(p3), c(p3 + p4), c(p1 + p2), -c(p2), 1.0),
    )
    return SymMatrix(rows, FLOAT)


def graph_matrix(g: Graph) -> SymMatrix:
    """alpha(G) * (A_G + I) - J, exact."""
    alpha = g.alpha if g.alpha is not None else stability_number(g)
    a = g.adjacency()
    rows = tuple(
        tuple(alpha * (a[i][j] + (1 if i == j else 0)) - 1 for j in range(g.n)) for i in range(g.n)
    )
    return SymMatrix(rows, RATIONAL)


def identity(n: int) -> SymMatrix:
    return SymMatrix(tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n)), RATIONAL)


def scale(m: SymMatrix, d) -> SymMatrix:
    """Positive diagonal scaling D M D."""
    if not isinstance(d, DiagScaling):
        d = DiagScaling(tuple(d))
    if d.n != m.n:
        raise MatrixError(f"scaling has length {d.n}, matrix has dimension {m.n}")
    if m.is_exact and d.is_exact:
        dv = [Fraction(v) for v in d.d]
        rows = tuple(tuple(m.entries[i][j] * dv[i] * dv[j] for j in range(m.n)) for i in range(m.n))
        return SymMatrix(rows, RATIONAL)
    dv = [float(v) for v in d.d]
    rows = tuple(
        tuple(float(m.entries[i][j]) * dv[i] * dv[j] for j in range(m.n)) for i in range(m.n)
    )
    return SymMatrix(rows, FLOAT)


def _check_perm(perm: Sequence[int], n: int) -> list[int]:
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise MatrixError(f"{perm} is not a permutation of 0..{n - 1}")
    return perm


def permute(m: SymMatrix, perm: Sequence[int]) -> SymMatrix:
    """P^T M P with ``result[i][j] = m[perm[i]][perm[j]]``."""
    perm = _check_perm(perm, m.n)
    rows = tuple(tuple(m.entries[perm[i]][perm[j]] for j in range(m.n)) for i in range(m.n))
    return SymMatrix(rows, m.mode)


def inverse_permutation(perm: Sequence[int]) -> list[int]:
    perm = _check_perm(perm, len(perm))
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return inv


# Under the vertex order 0-1-2-3-4-0 the 5-cycle's graph matrix is the Horn matrix itself.
C5_TO_HORN_PERMUTATION = (0, 1, 2, 3, 4)
