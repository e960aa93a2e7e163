"""Partial solutions of X g1 X g2 X g3 = id and their one-step extensions.

A partial solution lives on a ray (-inf, p]; the horizon is the right edge
of the domain of the threefold composition.  One extension step either
inverts the composition past the horizon (strict-maximum case, locally
unique) or takes a seeded square root (tie case).  Extensions repeat until
a target is passed.
"""

from __future__ import annotations

from .errors import (
    ArgumentError,
    DegenerateError,
    DomainError,
    InternalCheckError,
    StepCapError,
)
from .homeo import Compose, DomainGuard, Glue, Homeo, Inverse, SqrtSeeded
from .rational import POS_INF, format_rat, is_finite, rat, rat_to_obj

TAGS = ("E", "E'", "E''")


class EquationTriple:
    """The ordered coefficient maps of X g1 X g2 X g3 = id."""

    def __init__(self, g1: Homeo, g2: Homeo, g3: Homeo, tag="E"):
        self.g1, self.g2, self.g3 = g1, g2, g3
        if tag not in TAGS:
            raise ArgumentError(f"permutation tag must be one of {TAGS}")
        self.tag = tag

    @property
    def gs(self):
        return (self.g1, self.g2, self.g3)

    def rotated(self, shift):
        """Cyclic permutation: shift 1 puts g3 first (tag E'), shift 2 puts g2 first."""
        shift %= 3
        if shift == 0:
            return self
        if shift == 1:
            return EquationTriple(self.g3, self.g1, self.g2, tag="E'")
        return EquationTriple(self.g2, self.g3, self.g1, tag="E''")

    def to_obj(self):
        return {
            "g1": self.g1.to_obj(),
            "g2": self.g2.to_obj(),
            "g3": self.g3.to_obj(),
            "tag": self.tag,
        }

    @classmethod
    def from_obj(cls, obj):
        return cls(
            Homeo.from_obj(obj["g1"]),
            Homeo.from_obj(obj["g2"]),
            Homeo.from_obj(obj["g3"]),
            tag=obj.get("tag", "E"),
        )


def horizon(E: EquationTriple, h: Homeo, p):
    """Right edge of the domain of h g1 h g2 h g3 for h defined on (-inf, p]."""
    if p == POS_INF:
        return POS_INF
    p = rat(p)
    hp = h.eval(p)
    g1, g2, g3 = E.gs
    cands = [g3.inverse_eval(p)]
    u = g2.inverse_eval(p)
    if u <= hp:
        cands.append(g3.inverse_eval(h.inverse_eval(u)))
    u = g1.inverse_eval(p)
    if u <= hp:
        v = g2.inverse_eval(h.inverse_eval(u))
        if v <= hp:
            cands.append(g3.inverse_eval(h.inverse_eval(v)))
    return min(cands)


class CycleSequence:
    """(a1, b1, a2, b2, a3, b3, a1): one loop of the composition at a point."""

    def __init__(self, values):
        if len(values) != 7:
            raise ArgumentError("a cycle has seven entries")
        if values[0] != values[6]:
            raise InternalCheckError("cycle did not close; not a partial solution here")
        self.values = tuple(values)

    @property
    def bs(self):
        return (self.values[1], self.values[3], self.values[5])

    @property
    def d_x(self):
        return max(self.bs)

    def to_obj(self):
        return {"values": [rat_to_obj(v) for v in self.values], "d_x": rat_to_obj(self.d_x)}

    def __repr__(self):
        return "Cycle(" + ", ".join(format_rat(v) for v in self.values) + ")"


def cycle_sequence(E: EquationTriple, h: Homeo, x, e_h=None) -> CycleSequence:
    x = rat(x)
    if e_h is not None and x > e_h:
        raise DomainError(f"{format_rat(x)} lies beyond the horizon {format_rat(e_h)}")
    g1, g2, g3 = E.gs
    a1 = x
    b1 = g3.eval(a1)
    a2 = h.eval(b1)
    b2 = g2.eval(a2)
    a3 = h.eval(b2)
    b3 = g1.eval(a3)
    close = h.eval(b3)
    return CycleSequence((a1, b1, a2, b2, a3, b3, close))


class PartialSolution:
    """h on (-inf, p] with h g1 h g2 h g3 = id on the composition domain.

    The defining identity is verified exactly at construction on a
    deterministic sample ladder approaching the horizon.
    """

    def __init__(self, triple: EquationTriple, h: Homeo, p, samples=12, _guarded=False):
        self.triple = triple
        self.p = p if p == POS_INF else rat(p)
        if _guarded or p == POS_INF:
            self.h = h
        else:
            self.h = DomainGuard(h, hi=self.p)
        self.hp = POS_INF if p == POS_INF else self.h.eval(self.p)
        if is_finite(self.p) and not is_finite(self.hp):
            raise InternalCheckError("finite edge with infinite value")
        self.e_h = horizon(triple, self.h, self.p)
        self._check_identity(samples)

    def _check_identity(self, samples):
        if samples <= 0:
            return
        top = self.e_h if is_finite(self.e_h) else rat(8)
        lo = top - 8
        pts = [lo + (top - lo) * rat(k, samples) for k in range(samples)]
        pts.append(top - rat(1, 997))
        for x in pts:
            if x >= self.e_h:
                continue
            cyc = cycle_sequence(self.triple, self.h, x)  # closure asserted inside
            if cyc.values[0] != x:
                raise InternalCheckError("identity check failed")

    def domain_samples(self, count, span=8):
        top = self.e_h if is_finite(self.e_h) else rat(span)
        lo = top - span
        out = []
        for k in range(count):
            x = lo + (top - lo) * rat(k, count)
            if x < self.e_h:
                out.append(x)
        return out

    def retagged(self, shift):
        """The same solution under a cyclic permutation of the equation."""
        return PartialSolution(self.triple.rotated(shift), self.h, self.p,
                               samples=0, _guarded=True)

    def to_obj(self):
        return {
            "triple": self.triple.to_obj(),
            "h": self.h.to_obj(),
            "p": rat_to_obj(self.p),
            "hp": rat_to_obj(self.hp),
            "e_h": rat_to_obj(self.e_h),
        }


class ExtensionStep:
    def __init__(self, solution, case, unique, rotation):
        self.solution = solution
        self.case = case
        self.unique = unique
        self.rotation = rotation


def extend_once(ps: PartialSolution, samples=12) -> ExtensionStep:
    """Extend a partial solution past its edge; the tie case takes a square root."""
    E, h, p = ps.triple, ps.h, ps.p
    if p == POS_INF:
        raise ArgumentError("the solution is already global")
    e0 = ps.e_h
    vals = [g.eval(e0) for g in E.gs]
    if vals[0] == vals[1] == vals[2]:
        raise DegenerateError(
            f"all three coefficient maps agree at the horizon {format_rat(e0)}"
        )
    chosen = None
    for shift in (0, 1, 2):
        R = E.rotated(shift)
        eR = horizon(R, h, p)
        cyc = cycle_sequence(R, h, eR)
        b1, b2, b3 = cyc.bs
        if b3 > b1 and b3 > b2:
            chosen = (shift, R, eR, cyc, "A")
            break
        if b3 == b2 and b3 > b1:
            chosen = (shift, R, eR, cyc, "B")
            break
    if chosen is None:
        raise DegenerateError("no cyclic permutation exposes an extension pattern")
    shift, R, eR, cyc, case = chosen
    if cyc.d_x != p:
        raise InternalCheckError("the largest landmark at the horizon is not the edge")
    g1, g2, g3 = R.gs

    if case == "A":
        psi = Compose([g1, h, g2, h, g3])
        x_max = g3.inverse_eval(p)
        u = g2.inverse_eval(p)
        if u <= ps.hp:
            x_max = min(x_max, g3.inverse_eval(h.inverse_eval(u)))
        p2 = psi.eval(x_max)
        if p2 <= p:
            raise InternalCheckError("strict-maximum extension failed to advance")
        h2 = Glue([p], [h, Inverse(psi)])
        sol = PartialSolution(ps.triple, h2, p2, samples=samples)
        unique = True
    else:
        a1 = eR
        phi0 = Compose([h, g1])
        if phi0.eval(a1) != a1:
            raise InternalCheckError("tie case does not fix the horizon")
        psi = Compose([Inverse(g1), g2, h, g3])
        base = Inverse(psi)
        if base.eval(a1) != a1:
            raise InternalCheckError("square-root base does not fix the horizon")
        phi = SqrtSeeded(base, agree=(phi0, a1))
        d_psi = g3.inverse_eval(p)
        cap = min(psi.eval(d_psi), d_psi, a1 + 2)
        if cap <= a1:
            raise InternalCheckError("no room above the horizon for the root step")
        x_star = (a1 + cap) / 2
        h2 = Compose([phi, Inverse(g1)])
        p2 = g1.eval(x_star)
        if p2 <= p:
            raise InternalCheckError("root extension failed to advance")
        sol = PartialSolution(ps.triple, h2, p2, samples=samples)
        unique = False
    if sol.e_h <= ps.e_h:
        raise InternalCheckError("the horizon did not move forward")
    return ExtensionStep(sol, case, unique, shift)


def extend_until(ps: PartialSolution, target, max_steps=64, samples=8, guard_pair=None):
    """Extend repeatedly until the edge passes the target.

    ``guard_pair`` optionally names indices (i, j) whose maps must differ at
    every step's horizon (checked exactly); a transcript of (case, edge,
    horizon) triples is returned alongside the final solution.
    """
    target = rat(target) if is_finite(target) else target
    transcript = []
    cur = ps
    for step in range(max_steps):
        if cur.p == POS_INF or cur.p >= target:
            return cur, transcript
        if guard_pair is not None:
            i, j = guard_pair
            gi, gj = cur.triple.gs[i - 1], cur.triple.gs[j - 1]
            if gi.eval(cur.e_h) == gj.eval(cur.e_h):
                raise DegenerateError(
                    f"guard pair ({i},{j}) collides at the horizon {format_rat(cur.e_h)}"
                )
        try:
            step_out = extend_once(cur, samples=samples)
        except DegenerateError as err:
            err.transcript = transcript
            raise
        cur = step_out.solution
        transcript.append(
            {
                "step": step,
                "case": step_out.case,
                "rotation": step_out.rotation,
                "edge": rat_to_obj(cur.p),
                "horizon": rat_to_obj(cur.e_h),
            }
        )
    raise StepCapError(
        f"extension did not reach {format_rat(target)} within {max_steps} steps",
        transcript=transcript,
    )
