"""Weak conjugations, their promotion to genuine conjugations, and ray collapse.

A weak conjugation matches the fixed and ascending sets of two maps; it is
promoted to a true conjugation by equivariant transport of a seed chosen per
component of non-fixed points.  Where the component meets the interval on
which the weak conjugation is strong, the seed is the weak conjugation
itself (so the promoted map agrees with it there); elsewhere an affine
monotone seed is used.
"""

from __future__ import annotations


from .errors import (
    AccumulationError,
    ArgumentError,
    DomainError,
    InternalCheckError,
    NotWeakConjError,
    StrongnessError,
    UnsupportedFormError,
)
from .homeo import (
    Compose,
    Glue,
    Homeo,
    Inverse,
    Pin,
    RayContraction,
    TRANSPORT_ITERATION_CAP,
    _pl_from_nodes,
    _verify_flatten,
    classify_window,
    fast_form,
    identity_map,
    register_node,
)
from .rational import NEG_INF, POS_INF, Interval, format_rat, is_finite, rat, rat_from_obj, rat_to_obj


class GlobalFixOracle:
    """Fixed-point structure of a map read off its finite global form."""

    kind = "global"

    def __init__(self, target: Homeo):
        self.target = target
        self._form = target.global_form()

    def is_fixed(self, x):
        return self._form.eval(x) == x

    def max_fix_below(self, x):
        return self._form.max_fix_below(x)

    def min_fix_above(self, x):
        return self._form.min_fix_above(x)

    def fixed_stretch_end(self, x):
        return self._form.first_nonfix_above(x)

    def to_obj(self):
        return {"kind": self.kind, "target": self.target.to_obj()}

    @classmethod
    def _from_obj(cls, obj):
        return cls(Homeo.from_obj(obj["target"]))


class ConjugatedFixOracle:
    """Fix structure of conj o target o conj^{-1} on (-inf, top], top fixed.

    Avoids flattening the conjugated map (whose breakpoints accumulate at
    ``top``): fixed points are the conjugator images of the core map's
    fixed points, plus ``top`` itself.
    """

    kind = "conjugated"

    def __init__(self, core: Homeo, conj: Homeo, top):
        self.core = core
        self.conj = conj
        self.top = rat(top)
        self._form = core.global_form()

    def is_fixed(self, x):
        if x == self.top:
            return True
        if x > self.top:
            raise DomainError("query above the collapsed ray")
        return self._form.eval(self.conj.inverse_eval(x)) == self.conj.inverse_eval(x)

    def max_fix_below(self, x):
        if x > self.top:
            return self.top
        f = self._form.max_fix_below(self.conj.inverse_eval(x))
        return f if not is_finite(f) else self.conj.eval(f)

    def min_fix_above(self, x):
        if x >= self.top:
            return POS_INF
        f = self._form.min_fix_above(self.conj.inverse_eval(x))
        if not is_finite(f):
            return self.top
        return min(self.conj.eval(f), self.top)

    def fixed_stretch_end(self, x):
        if x >= self.top:
            return POS_INF
        e = self._form.first_nonfix_above(self.conj.inverse_eval(x))
        return POS_INF if not is_finite(e) else self.conj.eval(e)

    def to_obj(self):
        return {
            "kind": self.kind,
            "core": self.core.to_obj(),
            "conj": self.conj.to_obj(),
            "top": rat_to_obj(self.top),
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(Homeo.from_obj(obj["core"]), Homeo.from_obj(obj["conj"]), rat_from_obj(obj["top"]))


_ORACLES = {GlobalFixOracle.kind: GlobalFixOracle, ConjugatedFixOracle.kind: ConjugatedFixOracle}


def check_weak_conjugation(psi, phi1, phi2, window, samples=24):
    """Raise NotWeakConjError if psi fails the fix/inc correspondence on the window."""
    a, b = rat(window[0]), rat(window[1])
    part1 = classify_window(phi1, a, b)
    part2 = classify_window(phi2, psi.eval(a), psi.eval(b))
    if part1.labels() != part2.labels():
        raise NotWeakConjError(
            f"sign patterns differ on the window: {part1.labels()} vs {part2.labels()}"
        )
    for f in part1.fix_points():
        img = psi.eval(f)
        if phi2.eval(img) != img:
            raise NotWeakConjError(
                f"fixed point {format_rat(f)} maps to non-fixed {format_rat(img)}"
            )
    for g in part2.fix_points():
        pre = psi.inverse_eval(g)
        if phi1.eval(pre) != pre:
            raise NotWeakConjError(
                f"fixed point {format_rat(g)} pulls back to non-fixed {format_rat(pre)}"
            )


def check_strong_on(psi, phi1, phi2, interval, samples=24):
    """Raise StrongnessError if psi phi1 != phi2 psi at sample points of the interval."""
    lo, hi = interval.lo, interval.hi
    if lo > hi:
        return
    pts = _sample_points(lo, hi, samples)
    for x in pts:
        if psi.eval(phi1.eval(x)) != phi2.eval(psi.eval(x)):
            raise StrongnessError(
                f"conjugation identity fails at {format_rat(x)} inside the strong interval"
            )


def _sample_points(lo, hi, n):
    if not is_finite(lo) and not is_finite(hi):
        lo, hi = rat(-8), rat(8)
    elif not is_finite(lo):
        lo = hi - 8
    elif not is_finite(hi):
        hi = lo + 8
    if lo == hi:
        return [lo]
    return [lo + (hi - lo) * rat(k, n - 1) for k in range(n)]


@register_node
class Transport(Homeo):
    """Promotion of a weak conjugation to a genuine conjugation.

    Equals psi on the fixed set of phi1 and on every component of non-fixed
    points meeting the strong interval; on other components it transports an
    affine seed equivariantly, so the identity
    ``transport o phi1 == phi2 o transport`` holds exactly everywhere.
    """

    kind = "transport"

    def __init__(self, psi, phi1, phi2, strong: Interval, oracle=None):
        super().__init__()
        self.psi = psi
        self.phi1 = phi1
        self.phi2 = phi2
        self.strong = strong
        self.oracle = oracle if oracle is not None else GlobalFixOracle(phi1)
        self._seeds = {}  # component lower endpoint -> seed record
        self._phi1_fast = fast_form(phi1)
        self._phi2_fast = fast_form(phi2)

    # -- component and seed machinery ---------------------------------------

    def _component(self, x):
        lo = self.oracle.max_fix_below(x)
        hi = self.oracle.min_fix_above(x)
        return (lo, hi)

    def _seed_for(self, comp):
        seed = self._seeds.get(comp)
        if seed is not None:
            return seed
        lo, hi = comp
        p = self.strong.hi
        if p == POS_INF or (is_finite(hi) and hi <= p):
            seed = ("psi",)  # whole component inside the strong interval
        elif lo < p:
            seed = ("psi_domain", p)  # strong interval reaches into the component
        else:
            if is_finite(lo) and is_finite(hi):
                u = (lo + hi) / 2
            elif is_finite(lo):
                u = lo + 1
            elif is_finite(hi):
                u = hi - 1
            else:
                u = rat(0)
            v = self.phi1.eval(u)
            u2 = self.psi.eval(u)
            v2 = self.phi2.eval(u2)
            if (v > u) != (v2 > u2):
                raise NotWeakConjError(
                    "component directions disagree between the conjugated maps"
                )
            seed = ("affine", u, v, u2, v2)
        self._seeds[comp] = seed
        return seed

    def _seed_domain(self, seed):
        """Half-open fundamental domain [d_lo, d_hi) of the seed."""
        if seed[0] == "psi_domain":
            u = seed[1]
            w = _pos_down(self._phi1_fast, u)  # one step down keeps the domain inside I
            if w == u:
                raise InternalCheckError("degenerate fundamental domain")
            return (w, u)
        if seed[0] == "affine":
            _, u, v, _, _ = seed
            return (min(u, v), max(u, v))
        raise InternalCheckError("psi seeds have no domain")

    def _seed_apply(self, seed, x):
        if seed[0] == "psi_domain":
            return self.psi.eval(x)
        _, u, v, u2, v2 = seed
        lo, hi = min(u, v), max(u, v)
        lo2, hi2 = min(u2, v2), max(u2, v2)
        return lo2 + (x - lo) * (hi2 - lo2) / (hi - lo)

    def _seed_unapply(self, seed, y):
        if seed[0] == "psi_domain":
            return self.psi.inverse_eval(y)
        _, u, v, u2, v2 = seed
        lo, hi = min(u, v), max(u, v)
        lo2, hi2 = min(u2, v2), max(u2, v2)
        return lo + (y - lo2) * (hi - lo) / (hi2 - lo2)

    def _eval(self, x):
        if self.oracle.is_fixed(x):
            return self.psi.eval(x)
        comp = self._component(x)
        seed = self._seed_for(comp)
        if seed[0] == "psi":
            return self.psi.eval(x)
        dlo, dhi = self._seed_domain(seed)
        y = x
        k = 0
        above = x >= dhi
        while not dlo <= y < dhi:
            if k >= TRANSPORT_ITERATION_CAP:
                raise InternalCheckError("transport exceeded its iteration cap")
            y = _pos_down(self._phi1_fast, y) if above else _pos_up(self._phi1_fast, y)
            k += 1
        val = self._seed_apply(seed, y)
        for _ in range(k):
            val = _pos_up(self._phi2_fast, val) if above else _pos_down(self._phi2_fast, val)
        return val

    def _inverse_eval(self, y):
        # psi maps each component onto its partner, so locate via psi^{-1}
        x0 = self.psi.inverse_eval(y)
        if self.oracle.is_fixed(x0):
            return x0
        comp = self._component(x0)
        seed = self._seed_for(comp)
        if seed[0] == "psi":
            return x0
        dlo, dhi = self._seed_domain(seed)
        tlo = self._seed_apply(seed, dlo)
        thi = self._seed_apply(seed, dhi)
        z = y
        k = 0
        above = y >= thi
        while not tlo <= z < thi:
            if k >= TRANSPORT_ITERATION_CAP:
                raise InternalCheckError("inverse transport exceeded its iteration cap")
            z = _pos_down(self._phi2_fast, z) if above else _pos_up(self._phi2_fast, z)
            k += 1
        val = self._seed_unapply(seed, z)
        for _ in range(k):
            val = _pos_up(self._phi1_fast, val) if above else _pos_down(self._phi1_fast, val)
        return val

    # -- flatten ------------------------------------------------------------

    def breakpoints_in(self, a, b):
        return list(self.flatten_window(a, b).xs)

    def flatten_window(self, a, b):
        xs, ys = [], []
        cur = a
        guard = 0
        while cur < b:
            guard += 1
            if guard > TRANSPORT_ITERATION_CAP:
                raise InternalCheckError("transport flatten failed to advance")
            if self.oracle.is_fixed(cur):
                end = self.oracle.fixed_stretch_end(cur)
                stop = min(b, end) if is_finite(end) else b
                if stop > cur:
                    piece = self.psi.flatten_window(cur, stop)
                    _merge_nodes(xs, ys, piece, cur, stop)
                    cur = stop
                    continue
                comp = (cur, self.oracle.min_fix_above(cur))
            else:
                comp = self._component(cur)
            seed = self._seed_for(comp)
            if seed[0] == "psi":
                stop = min(b, comp[1]) if is_finite(comp[1]) else b
                piece = self.psi.flatten_window(cur, stop)
                _merge_nodes(xs, ys, piece, cur, stop)
                cur = stop
                continue
            if self.oracle.is_fixed(cur):
                # transported component starting exactly at cur: its seed
                # domains accumulate at cur from above
                raise AccumulationError(
                    f"transport breakpoints accumulate at {format_rat(cur)}", point=cur
                )
            if is_finite(comp[1]) and comp[1] <= b:
                raise AccumulationError(
                    f"transport breakpoints accumulate at {format_rat(comp[1])}",
                    point=comp[1],
                )
            piece = self._flatten_in_component(comp, seed, cur, b)
            _merge_nodes(xs, ys, piece, cur, b)
            cur = b
        if not xs or xs[0] != a:
            xs.insert(0, a)
            ys.insert(0, self.eval(a))
        if xs[-1] != b:
            xs.append(b)
            ys.append(self.eval(b))
        pm = _pl_from_nodes(xs, ys)
        _verify_flatten(self, pm, xs)
        return pm

    def _flatten_in_component(self, comp, seed, a, b):
        dlo, dhi = self._seed_domain(seed)
        la = _level_of(self._phi1_fast, dlo, dhi, a)
        lb = _level_of(self._phi1_fast, dlo, dhi, b)
        xs, ys = [], []
        lo_level = dlo
        for _ in range(abs(la)):
            lo_level = _pos_up(self._phi1_fast, lo_level) if la > 0 else _pos_down(self._phi1_fast, lo_level)
        for level in range(la, lb + 1):
            hi_level = _pos_up(self._phi1_fast, lo_level)
            clo, chi = max(a, lo_level), min(b, hi_level)
            if clo < chi:
                piece = self._chunk_flatten(seed, level, clo, chi)
                _merge_nodes(xs, ys, piece, clo, chi)
            lo_level = hi_level
        if not xs:
            raise InternalCheckError("component flatten produced no nodes")
        return _pl_from_nodes(xs, ys)

    def _chunk_flatten(self, seed, level, lo, hi):
        pm = None
        wlo, whi = lo, hi
        for _ in range(abs(level)):
            step = _pos_step_flatten(self._phi1_fast, wlo, whi, down=level > 0)
            pm = step if pm is None else step.compose(pm)
            wlo, whi = step.eval(wlo), step.eval(whi)
        s = self._seed_flatten(seed, wlo, whi)
        pm = s if pm is None else s.compose(pm)
        wlo, whi = s.eval(wlo), s.eval(whi)
        for _ in range(abs(level)):
            step = _pos_step_flatten(self._phi2_fast, wlo, whi, down=level < 0)
            pm = step.compose(pm)
            wlo, whi = step.eval(wlo), step.eval(whi)
        return pm

    def _seed_flatten(self, seed, lo, hi):
        if seed[0] == "psi_domain":
            return self.psi.flatten_window(lo, hi)
        xs = [lo, hi]
        ys = [self._seed_apply(seed, lo), self._seed_apply(seed, hi)]
        return _pl_from_nodes(xs, ys)

    def to_obj(self):
        return {
            "kind": self.kind,
            "psi": self.psi.to_obj(),
            "phi1": self.phi1.to_obj(),
            "phi2": self.phi2.to_obj(),
            "strong": self.strong.to_obj(),
            "oracle": self.oracle.to_obj(),
        }

    @classmethod
    def _from_obj(cls, obj):
        oracle_obj = obj["oracle"]
        oracle = _ORACLES[oracle_obj["kind"]]._from_obj(oracle_obj)
        return cls(
            Homeo.from_obj(obj["psi"]),
            Homeo.from_obj(obj["phi1"]),
            Homeo.from_obj(obj["phi2"]),
            Interval.from_obj(obj["strong"]),
            oracle=oracle,
        )


def _pos_up(f, x):
    v = f.eval(x)
    return v if v > x else f.inverse_eval(x)


def _pos_down(f, x):
    v = f.eval(x)
    return v if v < x else f.inverse_eval(x)


def _pos_step_flatten(f, lo, hi, down):
    up_is_forward = f.eval(lo) > lo
    apply_forward = up_is_forward != down
    if apply_forward:
        return f.flatten_window(lo, hi)
    blo = f.inverse_eval(lo)
    bhi = f.inverse_eval(hi)
    return f.flatten_window(blo, bhi).inverse()


def _level_of(phi1, dlo, dhi, x):
    """Signed number of phi1 position-steps from the seed domain to x."""
    if dlo <= x < dhi:
        return 0
    level = 0
    y = x
    k = 0
    while k < TRANSPORT_ITERATION_CAP:
        if dlo <= y < dhi:
            return level
        if y >= dhi:
            y = _pos_down(phi1, y)
            level += 1
        else:
            y = _pos_up(phi1, y)
            level -= 1
        k += 1
    raise InternalCheckError("level search exceeded the iteration cap")


def _merge_nodes(xs, ys, piece, lo, hi):
    for x, y in zip(piece.xs, piece.ys):
        if lo <= x <= hi and (not xs or x > xs[-1]):
            xs.append(x)
            ys.append(y)


def promote_weak_conjugation(psi, phi1, phi2, strong: Interval, *,
                             check_window=None, oracle=None, samples=24) -> Transport:
    """Upgrade a weak conjugation to an exact one, keeping it where it is strong.

    ``strong`` is the interval on which psi already intertwines phi1 and
    phi2 (may be empty: Interval(0, 0) with a point is fine, use
    Interval(NEG_INF, NEG_INF)-style rays for nothing).  ``check_window``
    bounds the weak-conjugation verification; pass None to skip the window
    check when the caller already certified it.
    """
    if check_window is not None:
        check_weak_conjugation(psi, phi1, phi2, check_window, samples=samples)
    if strong.lo <= strong.hi and is_finite(strong.hi):
        check_strong_on(psi, phi1, phi2, strong, samples=samples)
    elif not is_finite(strong.hi) and strong.hi == POS_INF:
        pass
    return Transport(psi, phi1, phi2, strong, oracle=oracle)


def empty_interval():
    """A strong interval containing nothing above any point of interest."""
    return Interval(NEG_INF, NEG_INF)


def collapse_to_ray(rep, q, freeze_up_to):
    """Conjugate a representation into the ray below q by a map frozen below a point.

    Returns (collapsed representation, conjugator).  The conjugator is the
    identity on (-inf, freeze_up_to] and squashes the rest of the line into
    (freeze_up_to, q); every conjugated generator fixes q and everything
    above it.
    """
    from .words import Representation

    q, freeze = rat(q), rat(freeze_up_to)
    if freeze >= q:
        raise ArgumentError("freeze point must lie strictly below the target endpoint")
    psi = RayContraction(freeze, q)

    def conj(g):
        core = Compose([psi, g, Inverse(psi)])
        return Glue([q], [Pin(core, {q: q}), identity_map()])

    gens = [conj(g) for g in rep.gens]
    extras = {name: conj(g) for name, g in rep.extras.items()}
    return Representation(rep.n, gens, extras=extras), psi
