"""Exact orientation-preserving homeomorphisms of the line.

Carriers are piecewise-linear maps over rationals, optionally commuting with
a rational translation beyond a threshold on either side (periodic tails).
On top of the carriers sits a small expression DAG (compose, inverse, glue,
interpolated extension, mirror, ray contraction, seeded square root) whose
nodes all evaluate exactly at rational points and know how to flatten
themselves to a finite PL map on a compact window.
"""

from __future__ import annotations

import bisect
import math

from .errors import (
    AccumulationError,
    ArgumentError,
    DomainError,
    InternalCheckError,
    NotIncreasingError,
    SeedResolutionError,
    UnsupportedFormError,
)
from .rational import (
    NEG_INF,
    POS_INF,
    Interval,
    Rat,
    format_rat,
    is_finite,
    lcm_rat,
    rat,
    rat_from_obj,
    rat_to_obj,
)

SQRT_ITERATION_CAP = 10**6
TRANSPORT_ITERATION_CAP = 10**6

AFFINE = "affine"
PERIODIC = "periodic"


def _tail_to_obj(tail):
    if tail[0] == AFFINE:
        return {"kind": AFFINE, "slope": rat_to_obj(tail[1])}
    return {"kind": PERIODIC, "period": rat_to_obj(tail[1])}


def _tail_from_obj(obj):
    if obj["kind"] == AFFINE:
        return (AFFINE, rat_from_obj(obj["slope"]))
    return (PERIODIC, rat_from_obj(obj["period"]))


class Homeo:
    """A strictly increasing bijection between two intervals of the line.

    Subclasses implement ``_eval`` / ``_inverse_eval`` and one of
    ``breakpoints_in`` or ``flatten_window``.  Composite nodes memoize
    evaluations; caches are not synchronized, confine each object to one
    thread of control (or clone per thread).
    """

    kind = "abstract"

    def __init__(self):
        self._memo = {}
        self._inv_memo = {}

    # -- evaluation -------------------------------------------------------

    def eval(self, x):
        x = rat(x)
        hit = self._memo.get(x)
        if hit is None:
            hit = self._eval(x)
            self._memo[x] = hit
        return hit

    def inverse_eval(self, y):
        y = rat(y)
        hit = self._inv_memo.get(y)
        if hit is None:
            hit = self._inverse_eval(y)
            self._inv_memo[y] = hit
        return hit

    __call__ = eval

    def _eval(self, x):
        raise NotImplementedError

    def _inverse_eval(self, y):
        raise NotImplementedError

    # -- structure --------------------------------------------------------

    def inverse(self):
        return Inverse(self)

    def breakpoints_in(self, a, b):
        """Slope-change points of this map within [a, b], sorted."""
        raise NotImplementedError

    def flatten_window(self, a, b):
        """Finite PL map equal to this one pointwise on [a, b]."""
        pts = set(self.breakpoints_in(a, b))
        pts.add(a)
        pts.add(b)
        xs = sorted(pts)
        ys = [self.eval(x) for x in xs]
        pm = _pl_from_nodes(xs, ys)
        _verify_flatten(self, pm, xs)
        return pm

    def global_form(self):
        """The whole map as one PiecewiseMap; UnsupportedFormError if infinite."""
        raise UnsupportedFormError(f"{self.kind} node has no finite global form")

    # -- serialization ----------------------------------------------------

    def to_obj(self):
        raise NotImplementedError

    @staticmethod
    def from_obj(obj):
        kind = obj["kind"]
        cls = NODE_REGISTRY.get(kind)
        if cls is None:
            raise ArgumentError(f"unknown expression node kind {kind!r}")
        return cls._from_obj(obj)

    def __repr__(self):
        return f"<{type(self).__name__}>"


def _pl_from_nodes(xs, ys):
    """PL through the given nodes, edge segments extended as affine rays."""
    if len(xs) == 1:
        return PiecewiseMap(xs, ys)
    ls = (ys[1] - ys[0]) / (xs[1] - xs[0])
    rs = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    return PiecewiseMap(xs, ys, left=(AFFINE, ls), right=(AFFINE, rs))


def _verify_flatten(f, pm, xs):
    # contract check: f must really be affine between consecutive nodes
    for i in range(len(xs) - 1):
        mid = (xs[i] + xs[i + 1]) / 2
        if f.eval(mid) != pm.eval(mid):
            raise InternalCheckError(
                f"flatten of {f.kind} missed a breakpoint in "
                f"[{format_rat(xs[i])}, {format_rat(xs[i + 1])}]"
            )


class PiecewiseMap(Homeo):
    """Strictly increasing PL map with affine or translation-periodic tails.

    ``xs``/``ys`` are the node coordinates.  A tail is either
    ``("affine", slope)`` beyond the edge node, or ``("periodic", T)``
    meaning f(x +/- T) = f(x) +/- T beyond the edge; a periodic tail
    requires an anchor node one period inside (enforced here) so the
    pattern is part of the node list.
    """

    kind = "pl"

    def __init__(self, xs, ys, left=(AFFINE, rat(1)), right=(AFFINE, rat(1))):
        super().__init__()
        xs = tuple(rat(x) for x in xs)
        ys = tuple(rat(y) for y in ys)
        if not xs or len(xs) != len(ys):
            raise ArgumentError("node lists must be nonempty and aligned")
        for i in range(len(xs) - 1):
            if not (xs[i] < xs[i + 1] and ys[i] < ys[i + 1]):
                raise NotIncreasingError(
                    f"nodes must increase strictly: ({xs[i]},{ys[i]}) vs ({xs[i + 1]},{ys[i + 1]})"
                )
        left = (left[0], rat(left[1]))
        right = (right[0], rat(right[1]))
        for side, tail in (("left", left), ("right", right)):
            if tail[0] == AFFINE:
                if tail[1] <= 0:
                    raise NotIncreasingError(f"{side} slope must be positive")
            elif tail[0] == PERIODIC:
                if tail[1] <= 0:
                    raise ArgumentError(f"{side} period must be positive")
            else:
                raise ArgumentError(f"unknown tail kind {tail[0]!r}")
        self.xs = xs
        self.ys = ys
        self.left = left
        self.right = right
        self._xlist = list(xs)
        self._ylist = list(ys)
        if right[0] == PERIODIC:
            T = right[1]
            anchor = xs[-1] - T
            i = self._node_index(anchor)
            if i is None or ys[i] != ys[-1] - T:
                raise ArgumentError("right-periodic map needs an anchor node one period in")
        if left[0] == PERIODIC:
            T = left[1]
            anchor = xs[0] + T
            i = self._node_index(anchor)
            if i is None or ys[i] != ys[0] + T:
                raise ArgumentError("left-periodic map needs an anchor node one period in")

    def _node_index(self, x):
        i = bisect.bisect_left(self._xlist, x)
        if i < len(self.xs) and self.xs[i] == x:
            return i
        return None

    # -- evaluation -------------------------------------------------------

    def eval(self, x):  # atoms skip memoization, bisect is cheap
        return self._eval(rat(x))

    def inverse_eval(self, y):
        return self._inverse_eval(rat(y))

    def _eval(self, x):
        if x < self.xs[0]:
            if self.left[0] == AFFINE:
                return self.ys[0] + self.left[1] * (x - self.xs[0])
            T = self.left[1]
            k = -((x - self.xs[0]) // T)  # smallest k with x + kT >= xs[0]
            return self._eval(x + k * T) - k * T
        if x > self.xs[-1]:
            if self.right[0] == AFFINE:
                return self.ys[-1] + self.right[1] * (x - self.xs[-1])
            T = self.right[1]
            k = -((self.xs[-1] - x) // T)
            return self._eval(x - k * T) + k * T
        i = bisect.bisect_left(self._xlist, x)
        if self.xs[i] == x:
            return self.ys[i]
        x0, x1 = self.xs[i - 1], self.xs[i]
        y0, y1 = self.ys[i - 1], self.ys[i]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def _inverse_eval(self, y):
        if y < self.ys[0]:
            if self.left[0] == AFFINE:
                return self.xs[0] + (y - self.ys[0]) / self.left[1]
            T = self.left[1]
            k = -((y - self.ys[0]) // T)
            return self._inverse_eval(y + k * T) - k * T
        if y > self.ys[-1]:
            if self.right[0] == AFFINE:
                return self.xs[-1] + (y - self.ys[-1]) / self.right[1]
            T = self.right[1]
            k = -((self.ys[-1] - y) // T)
            return self._inverse_eval(y - k * T) + k * T
        i = bisect.bisect_left(self._ylist, y)
        if self.ys[i] == y:
            return self.xs[i]
        x0, x1 = self.xs[i - 1], self.xs[i]
        y0, y1 = self.ys[i - 1], self.ys[i]
        return x0 + (x1 - x0) * (y - y0) / (y1 - y0)

    # -- structure --------------------------------------------------------

    def inverse(self):
        def inv_tail(t):
            return t if t[0] == PERIODIC else (AFFINE, 1 / t[1])

        return PiecewiseMap(self.ys, self.xs, left=inv_tail(self.left), right=inv_tail(self.right))

    def mirror(self):
        """The map x -> -f(-x) (conjugate by the point reflection)."""
        xs = tuple(-x for x in reversed(self.xs))
        ys = tuple(-y for y in reversed(self.ys))
        return PiecewiseMap(xs, ys, left=self.right, right=self.left)

    def breakpoints_in(self, a, b):
        pts = [x for x in self.xs if a <= x <= b]
        if self.left[0] == PERIODIC and a < self.xs[0]:
            T = self.left[1]
            pattern = [x for x in self.xs if x <= self.xs[0] + T]
            k = 1
            while self.xs[0] - k * T + T > a:
                for x in pattern:
                    s = x - k * T
                    if a <= s <= b and s < self.xs[0]:
                        pts.append(s)
                k += 1
        if self.right[0] == PERIODIC and b > self.xs[-1]:
            T = self.right[1]
            pattern = [x for x in self.xs if x >= self.xs[-1] - T]
            k = 1
            while self.xs[-1] + k * T - T < b:
                for x in pattern:
                    s = x + k * T
                    if a <= s <= b and s > self.xs[-1]:
                        pts.append(s)
                k += 1
        return sorted(set(pts))

    def global_form(self):
        return self

    def with_node_at(self, x):
        """Same map with an explicit node at x (inserted by interpolation)."""
        x = rat(x)
        if self._node_index(x) is not None:
            return self
        xs, ys = list(self.xs), list(self.ys)
        i = bisect.bisect_left(xs, x)
        xs.insert(i, x)
        ys.insert(i, self._eval(x))
        return PiecewiseMap(xs, ys, left=self.left, right=self.right)

    def pushed_anchor_above(self, threshold):
        """Right-periodic variant whose pattern window lies above ``threshold``."""
        if self.right[0] != PERIODIC:
            return self
        T = self.right[1]
        pm = self
        while pm.xs[-1] - T < threshold:
            pattern = [(x, y) for x, y in zip(pm.xs, pm.ys) if x > pm.xs[-1] - T]
            xs = list(pm.xs) + [x + T for x, _ in pattern]
            ys = list(pm.ys) + [y + T for _, y in pattern]
            pm = PiecewiseMap(xs, ys, left=pm.left, right=pm.right)
        return pm

    def pushed_anchor_below(self, threshold):
        if self.left[0] != PERIODIC:
            return self
        T = self.left[1]
        pm = self
        while pm.xs[0] + T > threshold:
            pattern = [(x, y) for x, y in zip(pm.xs, pm.ys) if x < pm.xs[0] + T]
            xs = [x - T for x, _ in pattern] + list(pm.xs)
            ys = [y - T for _, y in pattern] + list(pm.ys)
            pm = PiecewiseMap(xs, ys, left=pm.left, right=pm.right)
        return pm

    def compose(self, other):
        """Exact composition self(other(x)) as a PiecewiseMap."""
        f, g = self, other

        def combine_right():
            fi, gi = f.right, g.right
            if gi[0] == AFFINE and fi[0] == AFFINE:
                return (AFFINE, fi[1] * gi[1])
            if gi[0] == AFFINE and fi[0] == PERIODIC:
                if gi[1] != 1:
                    raise UnsupportedFormError("periodic after non-unit affine tail")
                return (PERIODIC, fi[1])
            if gi[0] == PERIODIC and fi[0] == AFFINE:
                if fi[1] != 1:
                    raise UnsupportedFormError("non-unit affine after periodic tail")
                return (PERIODIC, gi[1])
            return (PERIODIC, lcm_rat(fi[1], gi[1]))

        def combine_left():
            fi, gi = f.left, g.left
            if gi[0] == AFFINE and fi[0] == AFFINE:
                return (AFFINE, fi[1] * gi[1])
            if gi[0] == AFFINE and fi[0] == PERIODIC:
                if gi[1] != 1:
                    raise UnsupportedFormError("periodic after non-unit affine tail")
                return (PERIODIC, fi[1])
            if gi[0] == PERIODIC and fi[0] == AFFINE:
                if fi[1] != 1:
                    raise UnsupportedFormError("non-unit affine after periodic tail")
                return (PERIODIC, gi[1])
            return (PERIODIC, lcm_rat(fi[1], gi[1]))

        right = combine_right()
        left = combine_left()

        b0 = max(g.xs[-1], g.inverse_eval(f.xs[-1]))
        a0 = min(g.xs[0], g.inverse_eval(f.xs[0]))
        hi = b0 + right[1] if right[0] == PERIODIC else b0
        lo = a0 - left[1] if left[0] == PERIODIC else a0

        pts = set(g.breakpoints_in(lo, hi))
        for t in f.breakpoints_in(g.eval(lo), g.eval(hi)):
            pts.add(g.inverse_eval(t))
        pts.add(lo)
        pts.add(hi)
        if right[0] == PERIODIC:
            pts.add(hi - right[1])
        if left[0] == PERIODIC:
            pts.add(lo + left[1])
        xs = sorted(pts)
        ys = [f.eval(g.eval(x)) for x in xs]
        pm = PiecewiseMap(xs, ys, left=left, right=right)
        for i in range(len(xs) - 1):
            mid = (xs[i] + xs[i + 1]) / 2
            if f.eval(g.eval(mid)) != pm.eval(mid):
                raise InternalCheckError("PL composition missed a breakpoint")
        return pm

    # -- fixed-point analysis ---------------------------------------------

    def max_fix_below(self, p):
        """Largest fixed point strictly smaller than p, or -inf."""
        v = self.mirror().min_fix_above(-rat(p))
        return NEG_INF if v == POS_INF else -v

    def first_nonfix_above(self, x):
        """Sup of the fixed stretch containing x (requires f(x) == x); may be +inf."""
        x = rat(x)
        if self.eval(x) != x:
            raise ArgumentError("first_nonfix_above requires a fixed starting point")
        if self.right[0] == PERIODIC:
            probe_hi = max(self.xs[-1], x) + self.right[1]
        else:
            probe_hi = max(self.xs[-1], x) + 1
        part = sign_partition_from_pl(self, x, probe_hi)
        first = part.pieces[0]
        if first.label != "fix":
            raise InternalCheckError("sign partition lost the fixed starting point")
        if first.hi < probe_hi:
            return first.hi
        # fixed all the way to the probe edge; decide from the tail structure
        if self.right[0] == PERIODIC:
            return POS_INF  # displacement is periodic and vanished on a full period
        s = self.right[1]
        if s == 1 and self.ys[-1] == self.xs[-1]:
            return POS_INF
        return probe_hi if probe_hi > self.xs[-1] else self.xs[-1]

    def min_fix_above(self, p):
        """Smallest fixed point strictly greater than p, or +inf.

        Requires p itself not fixed when fixed points accumulate at p.
        """
        p = rat(p)
        top = max(self.xs[-1], p)
        if p < top:
            part = sign_partition_from_pl(self, p, top)
            for piece in part.pieces:
                if piece.label == "fix" and piece.hi > p:
                    return piece.lo if piece.lo > p else p_next_in_fix(piece, p)
        if self.right[0] == AFFINE:
            s = self.right[1]
            x1, y1 = self.xs[-1], self.ys[-1]
            if s == 1:
                return POS_INF if y1 != x1 else max(x1, p) if x1 > p else POS_INF
            x_star = x1 + (x1 - y1) / (s - 1)
            if x_star >= x1 and x_star > p:
                return x_star
            return POS_INF
        T = self.right[1]
        # displacement f(x)-x is T-periodic beyond xs[-1]-T; find zeros in one period
        base = self.xs[-1]
        zeros = []
        part = sign_partition_from_pl(self, base - T, base)
        for piece in part.pieces:
            if piece.label == "fix":
                zeros.append(piece.lo)
        if not zeros:
            return POS_INF
        k = 0
        while True:
            for z in zeros:
                cand = z + k * T
                if cand > p and cand > base - T:
                    return cand
            k += 1

    def to_obj(self):
        return {
            "kind": self.kind,
            "xs": [rat_to_obj(x) for x in self.xs],
            "ys": [rat_to_obj(y) for y in self.ys],
            "left": _tail_to_obj(self.left),
            "right": _tail_to_obj(self.right),
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(
            [rat_from_obj(x) for x in obj["xs"]],
            [rat_from_obj(y) for y in obj["ys"]],
            left=_tail_from_obj(obj["left"]),
            right=_tail_from_obj(obj["right"]),
        )

    def __repr__(self):
        nodes = ", ".join(f"{format_rat(x)}->{format_rat(y)}" for x, y in zip(self.xs, self.ys))
        return f"PiecewiseMap({nodes})"


def p_next_in_fix(piece, p):
    # fix piece [lo, hi] with lo <= p < hi: the fixed set is a closed interval,
    # so there is no minimum strictly above p; the caller must not ask for one.
    raise ArgumentError(
        f"fixed points accumulate at p={format_rat(p)} (p lies inside a fixed interval)"
    )


def identity_map():
    return PiecewiseMap([rat(0)], [rat(0)])


def translation(c):
    c = rat(c)
    return PiecewiseMap([rat(0)], [c])


def affine_map(a, b):
    a, b = rat(a), rat(b)
    if a <= 0:
        raise NotIncreasingError("affine slope must be positive")
    return PiecewiseMap([rat(0)], [b], left=(AFFINE, a), right=(AFFINE, a))


def pl_through(pairs, left_slope=1, right_slope=1):
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    return PiecewiseMap(xs, ys, left=(AFFINE, rat(left_slope)), right=(AFFINE, rat(right_slope)))


# ---------------------------------------------------------------------------
# sign partition
# ---------------------------------------------------------------------------


class SignPiece:
    """One maximal interval of a sign partition; singletons have lo == hi."""

    __slots__ = ("label", "lo", "hi", "lo_closed", "hi_closed")

    def __init__(self, label, lo, hi, lo_closed, hi_closed):
        self.label = label
        self.lo = lo
        self.hi = hi
        self.lo_closed = lo_closed
        self.hi_closed = hi_closed

    def __repr__(self):
        lb = "[" if self.lo_closed else "("
        rb = "]" if self.hi_closed else ")"
        return f"{self.label}{lb}{format_rat(self.lo)}, {format_rat(self.hi)}{rb}"

    def __eq__(self, other):
        return (
            isinstance(other, SignPiece)
            and (self.label, self.lo, self.hi, self.lo_closed, self.hi_closed)
            == (other.label, other.lo, other.hi, other.lo_closed, other.hi_closed)
        )

    def to_obj(self):
        return {
            "label": self.label,
            "lo": rat_to_obj(self.lo),
            "hi": rat_to_obj(self.hi),
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }


class SignPartition:
    """Partition of a window into maximal fix / inc / decr intervals."""

    def __init__(self, a, b, pieces):
        self.a = a
        self.b = b
        self.pieces = pieces

    def labels(self):
        return [p.label for p in self.pieces]

    def fix_points(self):
        """All isolated fixed points plus endpoints of fixed intervals."""
        out = []
        for p in self.pieces:
            if p.label == "fix":
                out.append(p.lo)
                if p.hi != p.lo:
                    out.append(p.hi)
        return out

    def has_fix(self):
        return any(p.label == "fix" for p in self.pieces)

    def __repr__(self):
        return "SignPartition(" + ", ".join(map(repr, self.pieces)) + ")"

    def to_obj(self):
        return {
            "window": [rat_to_obj(self.a), rat_to_obj(self.b)],
            "pieces": [p.to_obj() for p in self.pieces],
        }


def sign_partition_from_pl(pm, a, b):
    """Exact sign partition of pm(x) - x on [a, b]."""
    a, b = rat(a), rat(b)
    if a >= b:
        raise ArgumentError("window must have a < b")
    xs = pm.breakpoints_in(a, b)
    grid = sorted({a, b, *xs})
    # refine with the zero of pm(x)-x on each segment where the sign flips
    events = []  # (lo, hi, label) atoms, endpoints shared
    for i in range(len(grid) - 1):
        x0, x1 = grid[i], grid[i + 1]
        u = pm.eval(x0) - x0
        v = pm.eval(x1) - x1
        if u == 0 and v == 0:
            events.append(("fix", x0, x1))
            continue
        if u == 0:
            events.append(("fix", x0, x0))
            events.append(("inc" if v > 0 else "decr", x0, x1))
            continue
        if v == 0:
            events.append(("inc" if u > 0 else "decr", x0, x1))
            events.append(("fix", x1, x1))
            continue
        if (u > 0) == (v > 0):
            events.append(("inc" if u > 0 else "decr", x0, x1))
            continue
        z = x0 + u * (x1 - x0) / (u - v)
        events.append(("inc" if u > 0 else "decr", x0, z))
        events.append(("fix", z, z))
        events.append(("inc" if v > 0 else "decr", z, x1))
    # merge adjacent atoms with equal labels
    merged = []
    for label, lo, hi in events:
        if merged and merged[-1][0] == label:
            merged[-1][2] = hi
        else:
            merged.append([label, lo, hi])
    pieces = []
    for idx, (label, lo, hi) in enumerate(merged):
        if label == "fix":
            lo_closed = hi_closed = True
        else:
            lo_closed = idx == 0
            hi_closed = idx == len(merged) - 1
        pieces.append(SignPiece(label, lo, hi, lo_closed, hi_closed))
    return SignPartition(a, b, pieces)


# ---------------------------------------------------------------------------
# expression nodes
# ---------------------------------------------------------------------------


class Compose(Homeo):
    """factors[0] o factors[1] o ... (the last factor is applied first)."""

    kind = "compose"

    def __init__(self, factors):
        super().__init__()
        flat = []
        for f in factors:
            if isinstance(f, Compose):
                flat.extend(f.factors)
            else:
                flat.append(f)
        if not flat:
            raise ArgumentError("empty composition")
        self.factors = tuple(flat)

    def _eval(self, x):
        for f in reversed(self.factors):
            x = f.eval(x)
        return x

    def _inverse_eval(self, y):
        for f in self.factors:
            y = f.inverse_eval(y)
        return y

    def breakpoints_in(self, a, b):
        pts = set()
        prefix = []  # factors already applied, innermost first
        lo, hi = a, b
        for f in reversed(self.factors):
            for t in f.breakpoints_in(lo, hi):
                for g in reversed(prefix):
                    t = g.inverse_eval(t)
                if a <= t <= b:
                    pts.add(t)
            lo, hi = f.eval(lo), f.eval(hi)
            prefix.append(f)
        return sorted(pts)

    def flatten_window(self, a, b):
        pm = None
        lo, hi = a, b
        for f in reversed(self.factors):
            piece = f.flatten_window(lo, hi)
            pm = piece if pm is None else piece.compose(pm)
            lo, hi = f.eval(lo), f.eval(hi)
        return pm

    def global_form(self):
        pm = None
        for f in reversed(self.factors):
            g = f.global_form()
            pm = g if pm is None else g.compose(pm)
        return pm

    def to_obj(self):
        return {"kind": self.kind, "factors": [f.to_obj() for f in self.factors]}

    @classmethod
    def _from_obj(cls, obj):
        return cls([Homeo.from_obj(o) for o in obj["factors"]])


class Inverse(Homeo):
    kind = "inverse"

    def __init__(self, inner):
        super().__init__()
        self.inner = inner

    def _eval(self, x):
        return self.inner.inverse_eval(x)

    def _inverse_eval(self, y):
        return self.inner.eval(y)

    def inverse(self):
        return self.inner

    def breakpoints_in(self, a, b):
        lo = self.inner.inverse_eval(a)
        hi = self.inner.inverse_eval(b)
        return sorted(self.inner.eval(t) for t in self.inner.breakpoints_in(lo, hi))

    def flatten_window(self, a, b):
        lo = self.inner.inverse_eval(a)
        hi = self.inner.inverse_eval(b)
        return self.inner.flatten_window(lo, hi).inverse()

    def global_form(self):
        return self.inner.global_form().inverse()

    def to_obj(self):
        return {"kind": self.kind, "inner": self.inner.to_obj()}

    @classmethod
    def _from_obj(cls, obj):
        return cls(Homeo.from_obj(obj["inner"]))


class Glue(Homeo):
    """Piecewise definition: pieces[i] rules on [cuts[i-1], cuts[i]].

    Adjacent pieces must agree at the cut points; this is checked at
    construction time, which makes the glued map continuous and monotone.
    """

    kind = "glue"

    def __init__(self, cuts, pieces):
        super().__init__()
        cuts = tuple(rat(c) for c in cuts)
        if len(pieces) != len(cuts) + 1:
            raise ArgumentError("need exactly one more piece than cuts")
        for i in range(len(cuts) - 1):
            if cuts[i] >= cuts[i + 1]:
                raise ArgumentError("cuts must increase strictly")
        for i, c in enumerate(cuts):
            lo_val = pieces[i].eval(c)
            hi_val = pieces[i + 1].eval(c)
            if lo_val != hi_val:
                raise ArgumentError(
                    f"pieces disagree at cut {format_rat(c)}: "
                    f"{format_rat(lo_val)} vs {format_rat(hi_val)}"
                )
        self.cuts = cuts
        self.pieces = tuple(pieces)
        self._cut_vals = [pieces[i].eval(c) for i, c in enumerate(cuts)]

    def _piece_at(self, x):
        i = bisect.bisect_left(list(self.cuts), x)
        return self.pieces[i]

    def _eval(self, x):
        return self._piece_at(x).eval(x)

    def _inverse_eval(self, y):
        i = bisect.bisect_left(self._cut_vals, y)
        return self.pieces[i].inverse_eval(y)

    def breakpoints_in(self, a, b):
        pts = {c for c in self.cuts if a <= c <= b}
        bounds = [a, *[c for c in self.cuts if a < c < b], b]
        idx = bisect.bisect_left(list(self.cuts), a)
        for i in range(len(bounds) - 1):
            piece = self.pieces[idx + i]
            pts.update(piece.breakpoints_in(bounds[i], bounds[i + 1]))
        return sorted(pts)

    def flatten_window(self, a, b):
        bounds = [a, *[c for c in self.cuts if a < c < b], b]
        idx = bisect.bisect_left(list(self.cuts), a)
        xs, ys = [], []
        for i in range(len(bounds) - 1):
            piece = self.pieces[idx + i].flatten_window(bounds[i], bounds[i + 1])
            for x, y in zip(piece.xs, piece.ys):
                if bounds[i] <= x <= bounds[i + 1] and (not xs or x > xs[-1]):
                    xs.append(x)
                    ys.append(y)
        return _pl_from_nodes(xs, ys)

    def global_form(self):
        forms = [p.global_form() for p in self.pieces]
        lo_form = forms[0].pushed_anchor_below(self.cuts[0])
        hi_form = forms[-1].pushed_anchor_above(self.cuts[-1])
        xs = [x for x in lo_form.xs if x < self.cuts[0]]
        ys = [lo_form.eval(x) for x in xs]
        left = lo_form.left
        if not xs:  # keep at least the tail anchored at the first cut
            pass
        mid_lo = self.cuts[0]
        mid_hi = self.cuts[-1]
        if mid_lo < mid_hi:
            mid = self.flatten_window(mid_lo, mid_hi)
            for x, y in zip(mid.xs, mid.ys):
                if not xs or x > xs[-1]:
                    xs.append(x)
                    ys.append(y)
        else:
            xs.append(mid_lo)
            ys.append(self.eval(mid_lo))
        for x in hi_form.xs:
            if x > self.cuts[-1]:
                xs.append(x)
                ys.append(hi_form.eval(x))
        right = hi_form.right
        if left[0] == AFFINE and not any(x < self.cuts[0] for x in xs):
            left = (AFFINE, _edge_slope(lo_form, self.cuts[0], side="left"))
        if right[0] == AFFINE and not any(x > self.cuts[-1] for x in xs):
            right = (AFFINE, _edge_slope(hi_form, self.cuts[-1], side="right"))
        return PiecewiseMap(xs, ys, left=left, right=right)

    def to_obj(self):
        return {
            "kind": self.kind,
            "cuts": [rat_to_obj(c) for c in self.cuts],
            "pieces": [p.to_obj() for p in self.pieces],
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(
            [rat_from_obj(c) for c in obj["cuts"]],
            [Homeo.from_obj(o) for o in obj["pieces"]],
        )


def _edge_slope(pm, at, side):
    if side == "left":
        lo = min(at - 1, pm.xs[0] - 1)
        w = pm.flatten_window(lo, at)
        return (w.ys[1] - w.ys[0]) / (w.xs[1] - w.xs[0]) if len(w.xs) > 1 else rat(1)
    hi = max(at + 1, pm.xs[-1] + 1)
    w = pm.flatten_window(at, hi)
    return (w.ys[-1] - w.ys[-2]) / (w.xs[-1] - w.xs[-2]) if len(w.xs) > 1 else rat(1)


class Mirror(Homeo):
    """x -> -inner(-x); used to reduce descending cases to ascending ones."""

    kind = "mirror"

    def __init__(self, inner):
        super().__init__()
        self.inner = inner

    def _eval(self, x):
        return -self.inner.eval(-x)

    def _inverse_eval(self, y):
        return -self.inner.inverse_eval(-y)

    def breakpoints_in(self, a, b):
        return sorted(-t for t in self.inner.breakpoints_in(-b, -a))

    def flatten_window(self, a, b):
        return self.inner.flatten_window(-b, -a).mirror()

    def global_form(self):
        return self.inner.global_form().mirror()

    def to_obj(self):
        return {"kind": self.kind, "inner": self.inner.to_obj()}

    @classmethod
    def _from_obj(cls, obj):
        return cls(Homeo.from_obj(obj["inner"]))


class DomainGuard(Homeo):
    """Wrapper that rejects evaluations outside a declared interval."""

    kind = "guard"

    def __init__(self, inner, lo=NEG_INF, hi=POS_INF):
        super().__init__()
        self.inner = inner
        self.lo = lo
        self.hi = hi

    def _eval(self, x):
        if not (self.lo <= x <= self.hi):
            raise DomainError(
                f"evaluation at {format_rat(x)} outside declared domain "
                f"[{format_rat(self.lo)}, {format_rat(self.hi)}]"
            )
        return self.inner.eval(x)

    def _inverse_eval(self, y):
        x = self.inner.inverse_eval(y)
        if not (self.lo <= x <= self.hi):
            raise DomainError(f"inverse value {format_rat(x)} outside declared domain")
        return x

    def breakpoints_in(self, a, b):
        if a < self.lo or b > self.hi:
            raise DomainError("window exceeds declared domain")
        return self.inner.breakpoints_in(a, b)

    def flatten_window(self, a, b):
        if a < self.lo or b > self.hi:
            raise DomainError("window exceeds declared domain")
        return self.inner.flatten_window(a, b)

    def to_obj(self):
        return {
            "kind": self.kind,
            "inner": self.inner.to_obj(),
            "lo": rat_to_obj(self.lo),
            "hi": rat_to_obj(self.hi),
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(Homeo.from_obj(obj["inner"]), rat_from_obj(obj["lo"]), rat_from_obj(obj["hi"]))


class Pin(Homeo):
    """Inner map with finitely many pinned boundary values.

    Used where a map defined on an open interval extends continuously to an
    endpoint the inner expression cannot evaluate (conjugators squeeze whole
    rays into the endpoint, so the PL structure accumulates there and
    windows containing a pin refuse to flatten).
    """

    kind = "pin"

    def __init__(self, inner, pins):
        super().__init__()
        self.inner = inner
        self.pins = {rat(x): rat(y) for x, y in (pins.items() if isinstance(pins, dict) else pins)}

    def _eval(self, x):
        if x in self.pins:
            return self.pins[x]
        return self.inner.eval(x)

    def _inverse_eval(self, y):
        for x, v in self.pins.items():
            if v == y:
                return x
        return self.inner.inverse_eval(y)

    def breakpoints_in(self, a, b):
        for p in self.pins:
            if a <= p <= b:
                raise AccumulationError(
                    f"breakpoints accumulate at the pinned endpoint {format_rat(p)}", point=p
                )
        return self.inner.breakpoints_in(a, b)

    def flatten_window(self, a, b):
        for p in self.pins:
            if a <= p <= b:
                raise AccumulationError(
                    f"breakpoints accumulate at the pinned endpoint {format_rat(p)}", point=p
                )
        return self.inner.flatten_window(a, b)

    def to_obj(self):
        return {
            "kind": self.kind,
            "inner": self.inner.to_obj(),
            "pins": [[rat_to_obj(x), rat_to_obj(y)] for x, y in sorted(self.pins.items())],
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(
            Homeo.from_obj(obj["inner"]),
            [(rat_from_obj(x), rat_from_obj(y)) for x, y in obj["pins"]],
        )


class RayContraction(Homeo):
    """Identity below ``freeze``; above it, a dyadic staircase onto [freeze, target).

    [freeze+k, freeze+k+1] maps affinely onto
    [target - h/2^k, target - h/2^(k+1)] with h = target - freeze, so the
    whole line is squashed into (-inf, target) while keeping every value
    rational.  Breakpoints of the inverse accumulate at ``target``.
    """

    kind = "raycontract"

    def __init__(self, freeze, target):
        super().__init__()
        freeze, target = rat(freeze), rat(target)
        if target <= freeze:
            raise ArgumentError("target must exceed freeze point")
        self.freeze = freeze
        self.target = target
        self.h = target - freeze

    def _eval(self, x):
        if x <= self.freeze:
            return x
        k = int(math.floor(x - self.freeze))
        t = x - self.freeze - k  # in [0, 1)
        scale = rat(1, 2**k)
        return self.target - self.h * scale * (1 - t / 2)

    def _inverse_eval(self, y):
        if y <= self.freeze:
            return y
        if y >= self.target:
            raise DomainError(
                f"{format_rat(y)} is outside the image ray (-inf, {format_rat(self.target)})"
            )
        r = self.h / (self.target - y)  # >= 1
        k = r.numerator.bit_length() - r.denominator.bit_length()
        if k > 0 and rat(2**k) > r:
            k -= 1
        # now 2^k <= r < 2^(k+1)
        scale = rat(1, 2**k)
        t = 2 * (1 - (self.target - y) / (self.h * scale))
        return self.freeze + k + t

    def breakpoints_in(self, a, b):
        if not is_finite(b):
            raise AccumulationError("unbounded window over a contraction", point=POS_INF)
        pts = []
        if a <= self.freeze <= b:
            pts.append(self.freeze)
        k = 0
        while self.freeze + k <= b:
            if self.freeze + k >= a and k > 0:
                pts.append(self.freeze + k)
            k += 1
        return pts

    def to_obj(self):
        return {
            "kind": self.kind,
            "freeze": rat_to_obj(self.freeze),
            "target": rat_to_obj(self.target),
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(rat_from_obj(obj["freeze"]), rat_from_obj(obj["target"]))


class InterpExtend(Homeo):
    """A base map kept on (-inf, cutoff], finitely many prescribed pairs above,
    affine interpolation in between, and a declared tail beyond the last pair.

    tail is ("affine1",) for a slope-1 ray or ("periodic", T) for
    f(x+T) = f(x)+T beyond the last pair (the pairs must then contain the
    anchor pair one period in).
    """

    kind = "interp"

    def __init__(self, base, cutoff, pairs, tail=("affine1",)):
        super().__init__()
        cutoff = rat(cutoff)
        pairs = tuple((rat(x), rat(y)) for x, y in pairs)
        if not pairs:
            raise ArgumentError("need at least one prescribed pair")
        base_val = base.eval(cutoff)
        prev = (cutoff, base_val)
        for x, y in pairs:
            if not (x > prev[0] and y > prev[1]):
                raise NotIncreasingError(
                    f"prescribed data not increasing past ({format_rat(prev[0])},"
                    f"{format_rat(prev[1])}): ({format_rat(x)},{format_rat(y)})"
                )
            prev = (x, y)
        if tail[0] == PERIODIC:
            T = rat(tail[1])
            anchor = pairs[-1][0] - T
            if anchor <= cutoff:
                raise ArgumentError("periodic pattern must live above the cutoff")
            match = [p for p in pairs if p[0] == anchor]
            if not match or match[0][1] != pairs[-1][1] - T:
                raise ArgumentError("periodic tail needs its anchor pair one period in")
            tail = (PERIODIC, T)
        elif tail[0] != "affine1":
            raise ArgumentError(f"unknown tail rule {tail[0]!r}")
        self.base = base
        self.cutoff = cutoff
        self.pairs = pairs
        self.tail = tail
        self._px = [p[0] for p in pairs]
        self._py = [p[1] for p in pairs]
        self._base_val = base_val

    def _eval(self, x):
        if x <= self.cutoff:
            return self.base.eval(x)
        if x > self._px[-1]:
            if self.tail[0] == "affine1":
                return self._py[-1] + (x - self._px[-1])
            T = self.tail[1]
            k = -((self._px[-1] - x) // T)
            return self._eval(x - k * T) + k * T
        i = bisect.bisect_left(self._px, x)
        if self._px[i] == x:
            return self._py[i]
        x0, y0 = (self.cutoff, self._base_val) if i == 0 else (self._px[i - 1], self._py[i - 1])
        x1, y1 = self._px[i], self._py[i]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def _inverse_eval(self, y):
        if y <= self._base_val:
            return self.base.inverse_eval(y)
        if y > self._py[-1]:
            if self.tail[0] == "affine1":
                return self._px[-1] + (y - self._py[-1])
            T = self.tail[1]
            k = -((self._py[-1] - y) // T)
            return self._inverse_eval(y - k * T) + k * T
        i = bisect.bisect_left(self._py, y)
        if self._py[i] == y:
            return self._px[i]
        x0, y0 = (self.cutoff, self._base_val) if i == 0 else (self._px[i - 1], self._py[i - 1])
        x1, y1 = self._px[i], self._py[i]
        return x0 + (x1 - x0) * (y - y0) / (y1 - y0)

    def breakpoints_in(self, a, b):
        pts = set()
        if a <= self.cutoff:
            pts.update(self.base.breakpoints_in(a, min(b, self.cutoff)))
            if self.cutoff <= b:
                pts.add(self.cutoff)
        for x in self._px:
            if a <= x <= b:
                pts.add(x)
        if self.tail[0] == PERIODIC and b > self._px[-1]:
            T = self.tail[1]
            pattern = [x for x in self._px if x > self._px[-1] - T]
            k = 1
            while self._px[-1] + (k - 1) * T < b:
                for x in pattern:
                    s = x + k * T
                    if a <= s <= b:
                        pts.add(s)
                k += 1
        return sorted(pts)

    def global_form(self):
        base_form = self.base.global_form().pushed_anchor_below(self.cutoff)
        xs = [x for x in base_form.xs if x < self.cutoff]
        ys = [base_form.eval(x) for x in xs]
        xs.append(self.cutoff)
        ys.append(self._base_val)
        for x, y in self.pairs:
            xs.append(x)
            ys.append(y)
        right = (AFFINE, rat(1)) if self.tail[0] == "affine1" else (PERIODIC, self.tail[1])
        left = base_form.left
        return PiecewiseMap(xs, ys, left=left, right=right)

    def to_obj(self):
        return {
            "kind": self.kind,
            "base": self.base.to_obj(),
            "cutoff": rat_to_obj(self.cutoff),
            "pairs": [[rat_to_obj(x), rat_to_obj(y)] for x, y in self.pairs],
            "tail": {"kind": self.tail[0]}
            if self.tail[0] == "affine1"
            else {"kind": PERIODIC, "period": rat_to_obj(self.tail[1])},
        }

    @classmethod
    def _from_obj(cls, obj):
        tail = obj["tail"]
        tail_t = ("affine1",) if tail["kind"] == "affine1" else (PERIODIC, rat_from_obj(tail["period"]))
        return cls(
            Homeo.from_obj(obj["base"]),
            rat_from_obj(obj["cutoff"]),
            [(rat_from_obj(x), rat_from_obj(y)) for x, y in obj["pairs"]],
            tail=tail_t,
        )


# ---------------------------------------------------------------------------
# seeded functional square root
# ---------------------------------------------------------------------------


class _Seed:
    """Fundamental-domain seed for one component of non-fixed points.

    For an ascending component the seed covers [anchor, image] with the
    first half affine; descending components are the mirror image.
    """

    __slots__ = ("anchor", "image", "mid", "direction")

    def __init__(self, anchor, image):
        self.anchor = anchor
        self.image = image
        self.mid = (anchor + image) / 2
        self.direction = 1 if image > anchor else -1

    @property
    def lo(self):
        return min(self.anchor, self.image)

    @property
    def hi(self):
        return max(self.anchor, self.image)

    def covers(self, x):
        return self.lo <= x <= self.hi

    def to_obj(self):
        return {"anchor": rat_to_obj(self.anchor), "image": rat_to_obj(self.image)}

    @classmethod
    def from_obj(cls, obj):
        return cls(rat_from_obj(obj["anchor"]), rat_from_obj(obj["image"]))


class SqrtSeeded(Homeo):
    """phi with phi(phi(x)) = base(x), built by fundamental-domain seeding.

    The first query in a component of non-fixed points registers a seed
    interval [x0, base(x0)] with phi affine on its first half; later
    queries transport through base-iterates into a registered seed.
    Component membership is decided by iteration reachability, with an
    exact separation certificate (a fixed point of the base found by
    window flattening) allowing fresh seeds in provably new components.
    Discovered fixed points of the base are recorded; windows containing
    them refuse to flatten, since seed domains accumulate there.
    """

    kind = "sqrt"

    def __init__(self, base, agree=None, seeds=(), fixed=()):
        super().__init__()
        self.base = base
        if agree is not None:
            phi0, q = agree
            q = rat(q)
            if base.eval(q) != q:
                raise ArgumentError("agreement point must be fixed by the base map")
            if phi0.eval(q) != q:
                raise ArgumentError("agreement map must fix the agreement point")
            agree = (phi0, q)
        self.agree = agree
        self.seeds = list(seeds)
        self.fixed = sorted(set(rat(f) for f in fixed))

    def _record_fixed(self, x):
        i = bisect.bisect_left(self.fixed, x)
        if i == len(self.fixed) or self.fixed[i] != x:
            self.fixed.insert(i, x)

    def _seed_eval(self, seed, x):
        a, b, m = seed.anchor, seed.image, seed.mid
        if seed.direction == 1:
            if x <= m:  # affine [a, m] -> [m, b]
                return m + (x - a) * (b - m) / (m - a)
            # second half: phi = base o affine^{-1}
            pre = a + (x - m) * (m - a) / (b - m)
            return self.base.eval(pre)
        if x >= m:  # affine [m, a] -> [b, m]
            return b + (x - m) * (m - b) / (a - m)
        pre = m + (x - b) * (a - m) / (m - b)
        return self.base.eval(pre)

    def _step_up(self, x, direction):
        return self.base.eval(x) if direction == 1 else self.base.inverse_eval(x)

    def _step_down(self, x, direction):
        return self.base.inverse_eval(x) if direction == 1 else self.base.eval(x)

    def _separated(self, x, seed):
        """True if a known or computable fixed point lies between x and the seed."""
        lo = min(x, seed.lo)
        hi = max(x, seed.hi)
        for f in self.fixed:
            if lo < f < hi:
                return True
        try:
            part = classify_window(self.base, lo, hi)
        except (AccumulationError, UnsupportedFormError, DomainError):
            return None  # unknown
        for f in part.fix_points():
            if lo < f < hi:
                self._record_fixed(f)
                return True
        return False

    def _pos_up(self, x, direction):
        """The base-step that moves points up within a component."""
        return self.base.eval(x) if direction == 1 else self.base.inverse_eval(x)

    def _pos_down(self, x, direction):
        return self.base.inverse_eval(x) if direction == 1 else self.base.eval(x)

    def _resolve(self, x, direction):
        """(seed, level) with pos_down^level(x) in [lo, hi) of the seed.

        Returns None when x provably lies in a component with no seed yet.
        """
        for seed in self.seeds:
            if seed.direction == direction and seed.lo <= x < seed.hi:
                return seed, 0
        candidates = sorted(
            (s for s in self.seeds if s.direction == direction),
            key=lambda s: (abs(s.lo - x) if s.lo > x else abs(x - s.hi)),
        )
        blocked = False
        for seed in candidates:
            sep = self._separated(x, seed)
            if sep is True:
                continue
            if sep is None:
                blocked = True
            above = seed.lo > x  # the seed lies above x
            y = x
            k = 0
            overshot = False
            while k < SQRT_ITERATION_CAP:
                if seed.lo <= y < seed.hi:
                    return seed, (k if not above else -k)
                if (above and y >= seed.hi) or (not above and y < seed.lo):
                    overshot = True
                    break
                y = self._pos_up(y, direction) if above else self._pos_down(y, direction)
                k += 1
            if not overshot and k >= SQRT_ITERATION_CAP:
                raise SeedResolutionError(
                    f"square-root query at {format_rat(x)} exceeded the iteration cap"
                )
        if blocked:
            raise SeedResolutionError(
                f"cannot certify the component of {format_rat(x)}; refusing a second seed"
            )
        return None

    def _transport(self, seed, level, x):
        y = x
        for _ in range(abs(level)):
            y = self._pos_down(y, seed.direction) if level > 0 else self._pos_up(y, seed.direction)
        val = self._seed_eval(seed, y)
        for _ in range(abs(level)):
            val = self._pos_up(val, seed.direction) if level > 0 else self._pos_down(val, seed.direction)
        return val

    def _eval(self, x):
        if self.agree is not None and x <= self.agree[1]:
            return self.agree[0].eval(x)
        bx = self.base.eval(x)
        if bx == x:
            self._record_fixed(x)
            return x
        direction = 1 if bx > x else -1
        hit = self._resolve(x, direction)
        if hit is None:
            seed = _Seed(x, bx)
            self.seeds.append(seed)
            return seed.mid
        return self._transport(hit[0], hit[1], x)

    def _inverse_eval(self, y):
        # phi^{-1} = base^{-1} o phi (phi commutes with its square)
        return self.base.inverse_eval(self.eval(y))

    def breakpoints_in(self, a, b):
        return list(self.flatten_window(a, b).xs)

    def flatten_window(self, a, b):
        if self.agree is not None and b <= self.agree[1]:
            return self.agree[0].flatten_window(a, b)
        part = classify_window(self.base, a, b)
        if part.labels() == ["fix"]:
            return _pl_from_nodes([a, b], [a, b])
        if part.has_fix():
            f = part.fix_points()[0]
            self._record_fixed(f)
            raise AccumulationError(
                f"square-root breakpoints accumulate at {format_rat(f)}", point=f
            )
        if self.agree is not None and a <= self.agree[1]:
            raise AccumulationError(
                "window crosses the agreement point of a seeded square root",
                point=self.agree[1],
            )
        # no fixed point inside [a, b]: one component, phi is finitely PL here
        self.eval(a)
        bx = self.base.eval(a)
        direction = 1 if bx > a else -1
        seed_a = self._resolve(a, direction)
        seed_b = self._resolve(b, direction) if b != a else seed_a
        if seed_a is None or seed_b is None or seed_a[0] is not seed_b[0]:
            raise InternalCheckError("window unexpectedly spans two square-root components")
        seed = seed_a[0]
        la, lb = seed_a[1], seed_b[1]
        xs, ys = [], []
        # walk the levels from la to lb, flattening each chunk structurally
        lo_level = self._level_floor(seed, la)
        for level in range(la, lb + 1):
            hi_level = self._pos_up(lo_level, seed.direction)
            clo, chi = max(a, lo_level), min(b, hi_level)
            if clo < chi:
                piece = self._chunk_flatten(seed, level, clo, chi)
                for x, y in zip(piece.xs, piece.ys):
                    if clo <= x <= chi and (not xs or x > xs[-1]):
                        xs.append(x)
                        ys.append(y)
            lo_level = hi_level
        if not xs or xs[0] != a:
            xs.insert(0, a)
            ys.insert(0, self.eval(a))
        if xs[-1] != b:
            xs.append(b)
            ys.append(self.eval(b))
        pm = _pl_from_nodes(xs, ys)
        _verify_flatten(self, pm, xs)
        return pm

    def _level_floor(self, seed, level):
        """Lower endpoint of the level-th fundamental domain."""
        y = seed.lo
        for _ in range(abs(level)):
            y = self._pos_up(y, seed.direction) if level > 0 else self._pos_down(y, seed.direction)
        return y

    def _chunk_flatten(self, seed, level, lo, hi):
        pm = None
        wlo, whi = lo, hi
        for _ in range(abs(level)):
            step = self._pos_step_flatten(seed.direction, wlo, whi, down=level > 0)
            pm = step if pm is None else step.compose(pm)
            wlo, whi = step.eval(wlo), step.eval(whi)
        s = self._seed_flatten(seed, wlo, whi)
        pm = s if pm is None else s.compose(pm)
        wlo, whi = s.eval(wlo), s.eval(whi)
        for _ in range(abs(level)):
            step = self._pos_step_flatten(seed.direction, wlo, whi, down=level < 0)
            pm = step.compose(pm)
            wlo, whi = step.eval(wlo), step.eval(whi)
        return pm

    def _pos_step_flatten(self, direction, lo, hi, down):
        apply_base = (direction == 1) != down
        if apply_base:
            return self.base.flatten_window(lo, hi)
        blo = self.base.inverse_eval(lo)
        bhi = self.base.inverse_eval(hi)
        return self.base.flatten_window(blo, bhi).inverse()

    def _seed_flatten(self, seed, lo, hi):
        """PL form of the seed map on [lo, hi] inside the seed domain."""
        a, b, m = seed.anchor, seed.image, seed.mid
        pts = {lo, hi}
        if lo < m < hi:
            pts.add(m)
        if seed.direction == 1:
            half_lo, half_hi = max(lo, m), hi
            if half_lo < half_hi:
                pre_lo = a + (half_lo - m) * (m - a) / (b - m)
                pre_hi = a + (half_hi - m) * (m - a) / (b - m)
                for t in self.base.breakpoints_in(pre_lo, pre_hi):
                    pts.add(m + (t - a) * (b - m) / (m - a))
        else:
            half_lo, half_hi = lo, min(hi, m)
            if half_lo < half_hi:
                pre_lo = m + (half_lo - b) * (a - m) / (m - b)
                pre_hi = m + (half_hi - b) * (a - m) / (m - b)
                for t in self.base.breakpoints_in(min(pre_lo, pre_hi), max(pre_lo, pre_hi)):
                    pts.add(b + (t - m) * (m - b) / (a - m))
        xs = sorted(pts)
        ys = [self._seed_eval(seed, x) for x in xs]
        return _pl_from_nodes(xs, ys)

    def to_obj(self):
        return {
            "kind": self.kind,
            "base": self.base.to_obj(),
            "agree": None
            if self.agree is None
            else {"phi0": self.agree[0].to_obj(), "q": rat_to_obj(self.agree[1])},
            "seeds": [s.to_obj() for s in self.seeds],
            "fixed": [rat_to_obj(f) for f in self.fixed],
        }

    @classmethod
    def _from_obj(cls, obj):
        agree = None
        if obj["agree"] is not None:
            agree = (Homeo.from_obj(obj["agree"]["phi0"]), rat_from_obj(obj["agree"]["q"]))
        return cls(
            Homeo.from_obj(obj["base"]),
            agree=agree,
            seeds=[_Seed.from_obj(o) for o in obj["seeds"]],
            fixed=[rat_from_obj(f) for f in obj["fixed"]],
        )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def eval_at(f: Homeo, x) -> Rat:
    """Exact value f(x)."""
    return f.eval(rat(x))


def flatten_on_window(f: Homeo, a, b) -> PiecewiseMap:
    """Finite PL map equal to f pointwise on [a, b]."""
    a, b = rat(a), rat(b)
    if a >= b:
        raise ArgumentError("window must satisfy a < b")
    return f.flatten_window(a, b)


def classify_window(f: Homeo, a, b) -> SignPartition:
    """Exact fix / inc / decr partition of [a, b]."""
    pm = flatten_on_window(f, rat(a), rat(b))
    return sign_partition_from_pl(pm, rat(a), rat(b))


def fast_form(f: Homeo) -> Homeo:
    """The finite global PL form when one exists, else the expression itself.

    Evaluating a flattened atom is a bisect; use this for maps applied many
    times inside transport loops.
    """
    try:
        return f.global_form()
    except (UnsupportedFormError, AccumulationError, DomainError):
        return f


def functional_sqrt(h: Homeo, agree=None) -> Homeo:
    """A compositional square root of h, optionally extending a given ray root.

    ``agree`` is a pair (phi0, q) with q fixed by h and phi0 a square root
    of h on (-inf, q]; the result then coincides with phi0 there.
    """
    return SqrtSeeded(h, agree=agree)


NODE_REGISTRY = {
    cls.kind: cls
    for cls in (
        PiecewiseMap,
        Compose,
        Inverse,
        Glue,
        Mirror,
        DomainGuard,
        RayContraction,
        InterpExtend,
        SqrtSeeded,
    )
}


def register_node(cls):
    """Let other modules add their expression node kinds (transport, ladder)."""
    NODE_REGISTRY[cls.kind] = cls
    return cls
