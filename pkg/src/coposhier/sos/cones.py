"""Cone identifiers and level sequences for the copositive inner approximations."""

from __future__ import annotations

import re
from dataclasses import dataclass


class ConeError(ValueError):
    pass


K = "K"
LAS_SIMPLEX = "LASD"
LAS_PREORDERING = "LASP"
LAS_SPHERE = "LASS"
Q = "Q"
BOUND = "BOUND"

FAMILIES = (K, LAS_SIMPLEX, LAS_PREORDERING, LAS_SPHERE, Q)

_ALIASES = {
    "K": K,
    "Q": Q,
    "LASD": LAS_SIMPLEX,
    "LAS_SIMPLEX": LAS_SIMPLEX,
    "LASP": LAS_PREORDERING,
    "LAS_PREORDERING": LAS_PREORDERING,
    "LASS": LAS_SPHERE,
    "LAS_SPHERE": LAS_SPHERE,
    "BOUND": BOUND,
}


def family_from_name(name: str) -> str:
    key = name.strip().upper()
    if key not in _ALIASES or _ALIASES[key] == BOUND:
        raise ConeError(f"unknown cone family {name!r}; expected one of {', '.join(FAMILIES)}")
    return _ALIASES[key]


def min_level(family: str) -> int:
    return {K: 0, Q: 0, LAS_SIMPLEX: 2, LAS_PREORDERING: 2, LAS_SPHERE: 4, BOUND: 1}[family]


def level_step(family: str) -> int:
    return 2 if family == LAS_SPHERE else 1


def levels(family: str, r_max: int) -> list[int]:
    """Admissible levels of ``family`` up to and including ``r_max``."""
    return list(range(min_level(family), r_max + 1, level_step(family)))


@dataclass(frozen=True)
class ConeId:
    family: str
    r: int

    def __post_init__(self):
        if self.family not in FAMILIES and self.family != BOUND:
            raise ConeError(f"unknown cone family {self.family!r}")
        if not isinstance(self.r, int) or isinstance(self.r, bool):
            raise ConeError("level must be an integer")
        lo = min_level(self.family)
        if self.r < lo:
            raise ConeError(f"{self.family} requires r >= {lo}, got {self.r}")
        if self.family == LAS_SPHERE and self.r % 2:
            raise ConeError(f"LASS requires an even level, got {self.r}")

    def __str__(self) -> str:
        return f"{self.family}({self.r})"

    @classmethod
    def parse(cls, text: str) -> "ConeId":
        mt = re.fullmatch(r"\s*([A-Za-z_]+)\s*\(\s*(-?\d+)\s*\)\s*", text)
        if not mt:
            raise ConeError(f"cannot parse cone {text!r}; expected e.g. K(1)")
        name = mt.group(1).upper()
        if name not in _ALIASES:
            raise ConeError(f"unknown cone family {mt.group(1)!r}")
        return cls(_ALIASES[name], int(mt.group(2)))
