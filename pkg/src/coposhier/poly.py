"""Sparse multivariate polynomials and the simplex-ideal toolkit.

Polynomials are immutable maps from exponent tuples to coefficients.  Exact
coefficients (``int``/``Fraction``) stay exact; any float coefficient switches
the term to binary64 and relative pruning at 1e-14 kicks in.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from functools import lru_cache
from math import comb
from numbers import Rational
from typing import Iterable, Iterator, Mapping

Exponent = tuple[int, ...]

FLOAT_PRUNE_REL = 1e-14
FLOAT_CONGRUENCE_TOL = 1e-9


class PolynomialError(ValueError):
    pass


def _exact(c) -> bool:
    return isinstance(c, Rational) and not isinstance(c, bool)


def _normalize(c):
    if isinstance(c, bool):
        return int(c)
    if isinstance(c, int) or isinstance(c, Fraction):
        return c
    if _exact(c):
        return Fraction(c)
    return float(c)


def grlex_key(e: Exponent):
    """Sort key: increasing total degree, then decreasing lex within a degree."""
    return (sum(e), tuple(-v for v in e))


@lru_cache(maxsize=None)
def monomials_of_degree(n: int, d: int) -> tuple[Exponent, ...]:
    """All exponents of total degree ``d`` in ``n`` variables, in grlex order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), d):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    out.sort(key=grlex_key)
    return tuple(out)


@lru_cache(maxsize=None)
def monomials_up_to_degree(n: int, d: int) -> tuple[Exponent, ...]:
    return tuple(e for k in range(d + 1) for e in monomials_of_degree(n, k))


def count_monomials(n: int, d: int) -> int:
    return comb(n + d - 1, d)


def add_exponents(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def unit(n: int, i: int) -> Exponent:
    return tuple(1 if j == i else 0 for j in range(n))


class Polynomial:
    """Sparse polynomial in ``nvars`` variables.

    No stored coefficient is zero.  Treat instances as values: arithmetic
    always returns a new object.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, object] | Iterable = ()):
        if nvars < 0:
            raise PolynomialError("nvars must be nonnegative")
        self.nvars = nvars
        acc: dict[Exponent, object] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for e, c in items:
            e = tuple(int(v) for v in e)
            if len(e) != nvars or any(v < 0 for v in e):
                raise PolynomialError(f"bad exponent {e} for {nvars} variables")
            c = _normalize(c)
            acc[e] = acc[e] + c if e in acc else c
        self._terms = _prune(acc)

    @classmethod
    def _raw(cls, nvars: int, terms: dict) -> "Polynomial":
        p = cls.__new__(cls)
        p.nvars = nvars
        p._terms = _prune(terms)
        return p

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls._raw(nvars, {})

    @classmethod
    def constant(cls, nvars: int, c=1) -> "Polynomial":
        return cls._raw(nvars, {(0,) * nvars: _normalize(c)})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        return cls._raw(nvars, {unit(nvars, i): 1})

    @classmethod
    def monomial(cls, e: Exponent, c=1) -> "Polynomial":
        return cls._raw(len(e), {tuple(e): _normalize(c)})

    @classmethod
    def linear_sum(cls, nvars: int) -> "Polynomial":
        """x_1 + ... + x_n."""
        return cls._raw(nvars, {unit(nvars, i): 1 for i in range(nvars)})

    @classmethod
    def squares_sum(cls, nvars: int) -> "Polynomial":
        """x_1^2 + ... + x_n^2."""
        return cls._raw(nvars, {tuple(2 * v for v in unit(nvars, i)): 1 for i in range(nvars)})

    # -- inspection --------------------------------------------------------
    @property
    def terms(self) -> dict[Exponent, object]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[Exponent, object]]:
        """Terms in grlex order."""
        for e in sorted(self._terms, key=grlex_key):
            yield e, self._terms[e]

    def coeff(self, e: Exponent):
        return self._terms.get(tuple(e), 0)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def is_homogeneous(self, d: int | None = None) -> bool:
        degs = {sum(e) for e in self._terms}
        if not degs:
            return True
        return len(degs) == 1 and (d is None or degs == {d})

    @property
    def is_exact(self) -> bool:
        return all(_exact(c) for c in self._terms.values())

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self._terms.values()), default=0.0)

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if isinstance(other, (int, float, Fraction)):
            return self == Polynomial.constant(self.nvars, other)
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self.to_text()!r})"

    # -- arithmetic --------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise PolynomialError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        acc = dict(self._terms)
        for e, c in other._terms.items():
            acc[e] = acc[e] + c if e in acc else c
        return Polynomial._raw(self.nvars, acc)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = _normalize(other)
            return Polynomial._raw(self.nvars, {e: v * c for e, v in self._terms.items()})
        other = self._coerce(other)
        acc: dict[Exponent, object] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = add_exponents(e1, e2)
                v = c1 * c2
                acc[e] = acc[e] + v if e in acc else v
        return Polynomial._raw(self.nvars, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise PolynomialError("negative powers are not polynomials")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __call__(self, point) -> object:
        return self.evaluate(point)

    def evaluate(self, point):
        if len(point) != self.nvars:
            raise PolynomialError("point has wrong length")
        total = 0
        for e, c in self._terms.items():
            t = c
            for x, k in zip(point, e):
                if k:
                    t = t * x**k
            total = total + t
        return total

    def compose_squares(self) -> "Polynomial":
        """p(x_1^2, ..., x_n^2)."""
        return Polynomial._raw(self.nvars, {tuple(2 * v for v in e): c for e, c in self._terms.items()})

    def drop_variable(self, i: int) -> "Polynomial":
        """Reinterpret a polynomial that does not involve ``x_i`` in ``nvars-1`` variables."""
        out = {}
        for e, c in self._terms.items():
            if e[i]:
                raise PolynomialError(f"polynomial depends on x{i + 1}")
            out[e[:i] + e[i + 1:]] = c
        return Polynomial._raw(self.nvars - 1, out)

    # -- serialisation -----------------------------------------------------
    def to_text(self) -> str:
        """Human-readable form ``c * x1^a1 ... xn^an + ...`` (highest grlex first)."""
        if not self._terms:
            return "0"
        parts = []
        for e, c in reversed(list(self.items())):
            neg = float(c) < 0
            mag = -c if neg else c
            body = " ".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}" for i, k in enumerate(e) if k
            )
            cs = _fmt_coeff(mag)
            term = f"{cs} * {body}" if body else cs
            parts.append(("- " if neg else "+ ") + term)
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    @classmethod
    def from_text(cls, text: str, nvars: int) -> "Polynomial":
        src = text.strip()
        if not src:
            raise PolynomialError("empty polynomial text")
        if src[0] not in "+-":
            src = "+" + src
        pieces = re.findall(r"[+-](?:[^+-]|(?<=\d[eE])[+-])+", src)
        if "".join(pieces) != src:
            raise PolynomialError(f"cannot parse polynomial {text!r}")
        acc: dict[Exponent, object] = {}
        for piece in pieces:
            sign = -1 if piece[0] == "-" else 1
            coeff: object = 1
            e = [0] * nvars
            body = piece[1:].strip()
            if not body or body.startswith("*") or body.endswith("*") or "**" in body.replace(" ", ""):
                raise PolynomialError(f"cannot parse term {piece!r}")
            for factor in re.split(r"[\s*]+", body):
                m = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
                if m:
                    i = int(m.group(1)) - 1
                    if not 0 <= i < nvars:
                        raise PolynomialError(f"variable x{i + 1} out of range")
                    e[i] += int(m.group(2) or 1)
                else:
                    coeff = coeff * _parse_coeff(factor)
            key = tuple(e)
            v = sign * coeff
            acc[key] = acc[key] + v if key in acc else v
        return cls(nvars, acc)

    def to_json_terms(self) -> list:
        """Term list ``[[exponents, coeff], ...]``; exact coefficients as strings."""
        return [[list(e), str(c) if _exact(c) else float(c)] for e, c in self.items()]

    @classmethod
    def from_json_terms(cls, nvars: int, terms: list) -> "Polynomial":
        acc = []
        for e, c in terms:
            acc.append((tuple(e), Fraction(c) if isinstance(c, str) else c))
        return cls(nvars, acc)


def _fmt_coeff(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    if isinstance(c, int):
        return str(c)
    return repr(float(c))


def _parse_coeff(tok: str):
    if re.fullmatch(r"\d+(/\d+)?", tok):
        return Fraction(tok)
    try:
        return float(tok)
    except ValueError as exc:
        raise PolynomialError(f"bad coefficient {tok!r}") from exc


def _prune(terms: dict) -> dict:
    out = {e: c for e, c in terms.items() if c != 0}
    if any(isinstance(c, float) for c in out.values()):
        cutoff = FLOAT_PRUNE_REL * max(abs(float(c)) for c in out.values())
        out = {e: c for e, c in out.items() if not (isinstance(c, float) and abs(c) <= cutoff)}
    return out


# ---------------------------------------------------------------------------
# Quadratic forms and the simplex ideal


def quad_form(m) -> Polynomial:
    """x^T M x for a SymMatrix ``m``."""
    n = m.n
    acc: dict[Exponent, object] = {}
    for i in range(n):
        for j in range(n):
            c = m.entries[i][j]
            if c == 0:
                continue
            e = add_exponents(unit(n, i), unit(n, j))
            acc[e] = acc[e] + c if e in acc else c
    return Polynomial(n, acc)


def squared_vars_form(m) -> Polynomial:
    """(x o x)^T M (x o x), homogeneous of degree 4."""
    return quad_form(m).compose_squares()


@lru_cache(maxsize=256)
def _simplex_power(n: int, r: int) -> Polynomial:
    return Polynomial.linear_sum(n) ** r


def simplex_power(n: int, r: int) -> Polynomial:
    """(x_1 + ... + x_n)^r."""
    if r < 0:
        raise PolynomialError("power must be nonnegative")
    return _simplex_power(n, r)


def mul_simplex_power(p: Polynomial, r: int) -> Polynomial:
    """(sum_i x_i)^r * p."""
    if r < 0:
        raise PolynomialError("power must be nonnegative")
    if r == 0:
        return p
    return simplex_power(p.nvars, r) * p


def homogenize_tilde(g: Polynomial, target_deg: int) -> Polynomial:
    """Multiply each term x^b of ``g`` by (sum x)^(target_deg - |b|).

    Equals (sum x)^target_deg * g(x / sum x), a homogeneous polynomial that
    agrees with ``g`` on the hyperplane sum x = 1.
    """
    if target_deg < g.degree():
        raise PolynomialError(f"target degree {target_deg} below degree {g.degree()}")
    n = g.nvars
    out = Polynomial.zero(n)
    by_degree: dict[int, dict] = {}
    for e, c in g.terms.items():
        by_degree.setdefault(sum(e), {})[e] = c
    for k, part in by_degree.items():
        out = out + mul_simplex_power(Polynomial(n, part), target_deg - k)
    return out


@lru_cache(maxsize=None)
def _reduced_monomial(e: Exponent) -> tuple:
    """Normal form of x^e modulo (sum x - 1) by x_n := 1 - sum_{i<n} x_i."""
    n = len(e)
    k = e[-1]
    if k == 0:
        return ((e, 1),)
    head = e[:-1] + (0,)
    rest = {(0,) * n: 1}
    for i in range(n - 1):
        rest[unit(n, i)] = -1
    sub = Polynomial._raw(n, rest) ** k
    return tuple((add_exponents(head, f), c) for f, c in sub.terms.items())


def reduce_mod_simplex_ideal(p: Polynomial) -> Polynomial:
    """Canonical representative of ``p`` modulo the ideal generated by sum x - 1.

    The last variable is eliminated, so the result never involves ``x_n``.
    """
    if p.nvars < 1:
        raise PolynomialError("need at least one variable")
    acc: dict[Exponent, object] = {}
    for e, c in p.terms.items():
        for f, v in _reduced_monomial(e):
            t = c * v
            acc[f] = acc[f] + t if f in acc else t
    return Polynomial._raw(p.nvars, acc)


def divide_by_simplex_generator(p: Polynomial) -> tuple[Polynomial, Polynomial]:
    """Return ``(q, rem)`` with ``p = q * (sum x - 1) + rem`` and ``rem`` free of x_n."""
    n = p.nvars
    if n < 1:
        raise PolynomialError("need at least one variable")
    # generator = x_n + a, with a = sum_{i<n} x_i - 1; divide as a polynomial in x_n
    a = Polynomial.linear_sum(n) - Polynomial.variable(n, n - 1) - 1
    by_power: dict[int, dict] = {}
    for e, c in p.terms.items():
        by_power.setdefault(e[-1], {})[e[:-1] + (0,)] = c
    if not by_power:
        return Polynomial.zero(n), Polynomial.zero(n)
    top = max(by_power)
    coeffs = [Polynomial(n, by_power.get(k, {})) for k in range(top + 1)]
    xn = Polynomial.variable(n, n - 1)
    quotient = [Polynomial.zero(n)] * max(top, 1)
    # synthetic division by (x_n + a): c_k -> q_{k-1}, c_{k-1} -= a q_{k-1}
    for k in range(top, 0, -1):
        qk = coeffs[k]
        quotient[k - 1] = qk
        coeffs[k - 1] = coeffs[k - 1] - a * qk
    q = Polynomial.zero(n)
    for k, qk in enumerate(quotient):
        if not qk.is_zero():
            q = q + qk * xn**k
    return q, coeffs[0]


def congruent_mod_ideal(p: Polynomial, q: Polynomial, tol: float = FLOAT_CONGRUENCE_TOL) -> bool:
    """Whether ``p - q`` lies in the simplex ideal (exactly, or to ``tol`` for floats)."""
    if p.nvars != q.nvars:
        raise PolynomialError("variable count mismatch")
    r = reduce_mod_simplex_ideal(p - q)
    if r.is_exact:
        return r.is_zero()
    return r.max_abs_coeff() <= tol


def gram_polynomial(basis, gram, nvars: int) -> Polynomial:
    """m(x)^T G m(x) for a monomial basis ``m`` and square ``gram``."""
    acc: dict[Exponent, object] = {}
    k = len(basis)
    for a in range(k):
        for b in range(k):
            c = gram[a][b]
            if c == 0:
                continue
            c = _normalize(c)
            e = add_exponents(basis[a], basis[b])
            acc[e] = acc[e] + c if e in acc else c
    return Polynomial(nvars, acc)
