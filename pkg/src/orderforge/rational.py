"""Exact rational scalars and the two infinities used as order sentinels.

Scalars are gmpy2.mpq values (fractions.Fraction when gmpy2 is missing);
both are hash-compatible, so they can mix freely in dictionaries.  The
infinities are plain float sentinels: they compare correctly against
rationals but must never enter arithmetic.  Use ``is_finite`` before doing
arithmetic on a value that may be infinite.
"""

from __future__ import annotations

import math
from fractions import Fraction

try:
    from gmpy2 import mpq as _mpq

    _HAVE_GMPY = True
except ImportError:  # pragma: no cover
    _mpq = Fraction
    _HAVE_GMPY = False

Rat = _mpq

NEG_INF = float("-inf")
POS_INF = float("inf")


def rat(value, den=None):
    """Build an exact rational from ints, strings like ``"3/4"``, or rationals."""
    if den is not None:
        return _mpq(value, den)
    if isinstance(value, float):
        raise TypeError("refusing to build an exact rational from a float")
    if isinstance(value, str):
        return _mpq(value.strip())
    return _mpq(value)


def is_finite(x) -> bool:
    return not isinstance(x, float)


def ext_max(values):
    """Max of rationals and infinity sentinels; -inf for an empty iterable."""
    best = NEG_INF
    for v in values:
        if v > best:
            best = v
    return best


def ext_min(values):
    best = POS_INF
    for v in values:
        if v < best:
            best = v
    return best


def rat_to_obj(x):
    """JSON form of a rational or infinity: {"n": str, "d": str} or "+inf"/"-inf"."""
    if isinstance(x, float):
        if x == POS_INF:
            return "+inf"
        if x == NEG_INF:
            return "-inf"
        raise TypeError(f"not an exact value: {x!r}")
    f = rat(x)
    return {"n": str(f.numerator), "d": str(f.denominator)}


def rat_from_obj(obj):
    if obj == "+inf":
        return POS_INF
    if obj == "-inf":
        return NEG_INF
    return _mpq(int(obj["n"]), int(obj["d"]))


def format_rat(x) -> str:
    if isinstance(x, float):
        if x == POS_INF:
            return "+inf"
        if x == NEG_INF:
            return "-inf"
        raise TypeError(f"not an exact value: {x!r}")
    f = rat(x)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def parse_rat(text: str):
    text = text.strip()
    if text in ("+inf", "inf"):
        return POS_INF
    if text == "-inf":
        return NEG_INF
    return rat(text)


def lcm_rat(a, b):
    """Least positive T with T/a and T/b both integers (a, b > 0)."""
    a, b = rat(a), rat(b)
    num = math.lcm(int(a.numerator) * int(b.denominator), int(b.numerator) * int(a.denominator))
    return rat(num, int(a.denominator) * int(b.denominator))


class Interval:
    """Order interval with optionally infinite endpoints, closed where finite."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def ray_below(cls, hi):
        return cls(NEG_INF, hi)

    @classmethod
    def whole_line(cls):
        return cls(NEG_INF, POS_INF)

    def __contains__(self, x):
        return self.lo <= x <= self.hi

    def __repr__(self):
        return f"Interval({format_rat(self.lo)}, {format_rat(self.hi)})"

    def __eq__(self, other):
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def to_obj(self):
        return {"lo": rat_to_obj(self.lo), "hi": rat_to_obj(self.hi)}

    @classmethod
    def from_obj(cls, obj):
        return cls(rat_from_obj(obj["lo"]), rat_from_obj(obj["hi"]))
