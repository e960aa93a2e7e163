"""Realizing a prescribed homeomorphism as the image of a word.

Given a nonempty reduced word w and a target map g, builds a representation
with rho(w) = g exactly: the fixed set of g is globally fixed, and on each
component of non-fixed points a model representation with integer-ladder
trajectories is conjugated onto the component.  Descending components are
handled through the point reflection; generators absent from w act as the
identity.
"""

from __future__ import annotations

import math

from .errors import (
    ArgumentError,
    InternalCheckError,
    NotIncreasingError,
    UnsupportedFormError,
)
from .homeo import (
    Compose,
    Glue,
    Homeo,
    Inverse,
    Mirror,
    PERIODIC,
    PiecewiseMap,
    Pin,
    TRANSPORT_ITERATION_CAP,
    _pl_from_nodes,
    _verify_flatten,
    fast_form,
    identity_map,
    register_node,
    sign_partition_from_pl,
)
from .rational import NEG_INF, POS_INF, format_rat, is_finite, rat, rat_from_obj, rat_to_obj
from .words import Representation, Word, cyclic_reduce


class WordMapProblem:
    def __init__(self, w: Word, g: Homeo, n=None, interval=None):
        if not w:
            raise ArgumentError("the word must be nonempty")
        self.w = w
        self.g = g
        self.n = n if n is not None else max(w.generators())
        if max(w.generators()) > self.n:
            raise ArgumentError("word uses a generator beyond n")
        self.interval = interval  # (lo, hi) with infinities, or None for the line


def build_model(core: Word, n: int) -> Representation:
    """The integer-ladder model: every length-m block of integers is a trajectory.

    Prescriptions step by one integer, so each generator in the word becomes
    a map commuting with translation by m on the whole line.
    """
    m = len(core)
    table = {i: {} for i in core.generators()}
    for r in (-1, 0, 1, 2):
        base = m * r
        for j, (i, e) in enumerate(core.letters, start=1):
            if e == 1:
                src, dst = base + j - 1, base + j
            else:
                src, dst = base + j, base + j - 1
            prev = table[i].get(src)
            if prev is not None and prev != dst:
                raise InternalCheckError("model prescriptions conflict; word not reduced?")
            table[i][src] = dst
    gens = []
    for i in range(1, n + 1):
        pres = table.get(i)
        if not pres:
            gens.append(identity_map())
            continue
        xs = sorted(x for x in pres if -m <= x <= 2 * m)
        ys = [pres[x] + 0 for x in xs]
        for a, b in zip(ys, ys[1:]):
            if a >= b:
                raise InternalCheckError("model prescriptions are not increasing")
        gens.append(
            PiecewiseMap(
                [rat(x) for x in xs],
                [rat(y) for y in ys],
                left=(PERIODIC, rat(m)),
                right=(PERIODIC, rat(m)),
            )
        )
    return Representation(n, gens)


@register_node
class ModelConjugator(Homeo):
    """Conjugator from the model line onto one ascending component of the target.

    Transports the affine seed [0, m] -> [anchor, g(anchor)] equivariantly:
    conj o model_w == g o conj holds exactly, so conjugated generators
    solve the word map on the component.
    """

    kind = "modelconj"

    def __init__(self, model_w: Homeo, target: Homeo, m: int, anchor):
        super().__init__()
        self.model_w = model_w
        self.target = target
        self.m = int(m)
        self.anchor = rat(anchor)
        self._orbit = {0: self.anchor}  # k -> g^k(anchor)
        self._mw = fast_form(model_w)
        self._tg = fast_form(target)
        self._levels = {}  # k -> exact PL of the conjugator on [k m, (k+1) m]

    def _orbit_point(self, k):
        got = self._orbit.get(k)
        if got is not None:
            return got
        ks = sorted(self._orbit)
        while ks[-1] < k:
            self._orbit[ks[-1] + 1] = self._tg.eval(self._orbit[ks[-1]])
            ks.append(ks[-1] + 1)
        while ks[0] > k:
            self._orbit[ks[0] - 1] = self._tg.inverse_eval(self._orbit[ks[0]])
            ks.insert(0, ks[0] - 1)
        return self._orbit[k]

    def _level_pl(self, k):
        """Exact PL of the conjugator on [k m, (k+1) m], built incrementally."""
        pl = self._levels.get(k)
        if pl is not None:
            return pl
        m = rat(self.m)
        if k == 0:
            pl = _pl_from_nodes([rat(0), m], [self._orbit_point(0), self._orbit_point(1)])
        elif k > 0:
            prev = self._level_pl(k - 1)
            step_in = self._mw.flatten_window((k - 1) * m, k * m).inverse()
            mid = step_in if prev is None else prev.compose(step_in)
            img_lo, img_hi = mid.eval(k * m), mid.eval((k + 1) * m)
            step_out = self._tg.flatten_window(img_lo, img_hi)
            pl = step_out.compose(mid)
        else:
            prev = self._level_pl(k + 1)
            step_in = self._mw.flatten_window(k * m, (k + 1) * m)
            mid = prev.compose(step_in)
            img_lo, img_hi = mid.eval(k * m), mid.eval((k + 1) * m)
            step_out = self._tg.flatten_window(
                self._tg.inverse_eval(img_lo), self._tg.inverse_eval(img_hi)
            ).inverse()
            pl = step_out.compose(mid)
        self._levels[k] = pl
        return pl

    def _eval(self, x):
        return self._level_pl(int(math.floor(x / self.m))).eval(x)

    def _inverse_eval(self, v):
        # bracket v inside the cached anchor orbit, doubling outward, then bisect
        lo_k = min(self._orbit)
        hi_k = max(self._orbit)
        step = 1
        while v < self._orbit_point(lo_k):
            lo_k -= step
            step *= 2
            if step > TRANSPORT_ITERATION_CAP:
                raise InternalCheckError("conjugator orbit search exceeded its cap")
        step = 1
        while v >= self._orbit_point(hi_k):
            hi_k += step
            step *= 2
            if step > TRANSPORT_ITERATION_CAP:
                raise InternalCheckError("conjugator orbit search exceeded its cap")
        while hi_k - lo_k > 1:
            mid = (hi_k + lo_k) // 2
            if v >= self._orbit_point(mid):
                lo_k = mid
            else:
                hi_k = mid
        return self._level_pl(lo_k).inverse_eval(v)

    def breakpoints_in(self, a, b):
        return list(self.flatten_window(a, b).xs)

    def flatten_window(self, a, b):
        ka = int(math.floor(a / self.m))
        kb = int(math.floor(b / self.m))
        xs, ys = [], []
        for k in range(ka, kb + 1):
            clo = max(a, rat(k * self.m))
            chi = min(b, rat((k + 1) * self.m))
            if clo >= chi:
                continue
            pm = self._level_pl(k)
            for x, y in zip(pm.xs, pm.ys):
                if clo <= x <= chi and (not xs or x > xs[-1]):
                    xs.append(x)
                    ys.append(y)
        if not xs or xs[0] != a:
            xs.insert(0, a)
            ys.insert(0, self.eval(a))
        if xs[-1] != b:
            xs.append(b)
            ys.append(self.eval(b))
        out = _pl_from_nodes(xs, ys)
        _verify_flatten(self, out, xs)
        return out

    def to_obj(self):
        return {
            "kind": self.kind,
            "model_w": self.model_w.to_obj(),
            "target": self.target.to_obj(),
            "m": self.m,
            "anchor": rat_to_obj(self.anchor),
        }

    @classmethod
    def _from_obj(cls, obj):
        return cls(
            Homeo.from_obj(obj["model_w"]),
            Homeo.from_obj(obj["target"]),
            obj["m"],
            rat_from_obj(obj["anchor"]),
        )


def fix_structure(pm: PiecewiseMap, lo=NEG_INF, hi=POS_INF):
    """Maximal ('fix'|'inc'|'decr', a, b) pieces of pm on (lo, hi), ends may be infinite.

    Requires finitely many pieces: periodic tails whose displacement vanishes
    somewhere are rejected.
    """
    pad_l = pm.left[1] if pm.left[0] == PERIODIC else rat(1)
    pad_r = pm.right[1] if pm.right[0] == PERIODIC else rat(1)
    A = pm.xs[0] - pad_l
    B = pm.xs[-1] + pad_r
    if pm.left[0] == "affine" and pm.left[1] != 1:
        s = pm.left[1]
        z = pm.xs[0] + (pm.xs[0] - pm.ys[0]) / (s - 1)
        if z < A:
            A = z - 1
    if pm.right[0] == "affine" and pm.right[1] != 1:
        s = pm.right[1]
        z = pm.xs[-1] + (pm.xs[-1] - pm.ys[-1]) / (s - 1)
        if z > B:
            B = z + 1
    if is_finite(lo):
        A = min(A, lo - 1)
    if is_finite(hi):
        B = max(B, hi + 1)
    part = sign_partition_from_pl(pm, A, B)

    def ray_label(side):
        if side == "left":
            tail, edge = pm.left, A
            probe = A - (tail[1] if tail[0] == PERIODIC else 1)
        else:
            tail, edge = pm.right, B
            probe = B + (tail[1] if tail[0] == PERIODIC else 1)
        if tail[0] == PERIODIC:
            win = sign_partition_from_pl(pm, min(edge, probe), max(edge, probe))
            labels = set(win.labels())
            if labels == {"fix"}:
                return "fix"
            if "fix" in labels:
                raise UnsupportedFormError("periodic tail has infinitely many fixed components")
            return win.pieces[0].label
        d = pm.eval(probe) - probe
        if d == 0:
            return "fix"
        return "inc" if d > 0 else "decr"

    pieces = [(ray_label("left"), NEG_INF, A)]
    pieces += [(p.label, p.lo, p.hi) for p in part.pieces]
    pieces += [(ray_label("right"), B, POS_INF)]
    merged = []
    for label, a, b in pieces:
        if merged and merged[-1][0] == label:
            merged[-1][2] = b
        else:
            merged.append([label, a, b])
    out = []
    for label, a, b in merged:
        a2, b2 = max(a, lo), min(b, hi)
        if a2 > b2 or (a2 == b2 and not (label == "fix" and lo < a2 < hi)):
            continue
        out.append((label, a2, b2))
    return out


def solve_word_map(prob: WordMapProblem, *, check_samples=12) -> Representation:
    """A representation whose word map sends it exactly onto the target."""
    w, g, n = prob.w, prob.g, prob.n
    lo, hi = prob.interval if prob.interval is not None else (NEG_INF, POS_INF)
    for end in (lo, hi):
        if is_finite(end) and g.eval(end) != end:
            raise ArgumentError("the target must map the restriction interval onto itself")
    core, conj = cyclic_reduce(w)
    m = len(core)

    if prob.interval is not None and is_finite(lo) and is_finite(hi):
        form = g.flatten_window(lo, hi)
    else:
        form = g.global_form()
    pieces = fix_structure(form, lo, hi)
    for label, a, b in pieces:
        if label != "fix" and a >= b:
            raise InternalCheckError("degenerate non-fixed component")

    def component_gens(a, b, direction):
        """Generator maps on the ascending/descending component (a, b)."""
        if direction == "decr":
            inner = component_gens(-b if is_finite(b) else NEG_INF,
                                   -a if is_finite(a) else POS_INF,
                                   "inc_of_mirror")
            return [Mirror(e) for e in inner]
        if direction == "inc_of_mirror":
            target = Mirror(g)
            a_, b_ = a, b
        else:
            target = g
            a_, b_ = a, b
        if is_finite(a_) and is_finite(b_):
            anchor = (a_ + b_) / 2
        elif is_finite(a_):
            anchor = a_ + 1
        elif is_finite(b_):
            anchor = b_ - 1
        else:
            anchor = rat(0)
        model = build_model(core, n)
        model_w = model.word_expr(core)
        conjugator = ModelConjugator(model_w, target, m, anchor)
        out = []
        for i in range(1, n + 1):
            if i not in set(core.generators()):
                out.append(identity_map())
                continue
            e = Compose([conjugator, model.gens[i - 1], Inverse(conjugator)])
            pins = {}
            if is_finite(a_):
                pins[a_] = a_
            if is_finite(b_):
                pins[b_] = b_
            out.append(Pin(e, pins) if pins else e)
        return out

    # assemble each generator as a glue over the component decomposition;
    # isolated fixed points are just shared boundaries of their neighbours
    kept = []
    for label, a, b in pieces:
        if label == "fix" and a == b:
            continue
        if label == "fix":
            kept.append((a, b, [identity_map()] * n))
        else:
            kept.append((a, b, component_gens(a, b, label)))
    if not kept:
        kept.append((lo, hi, [identity_map()] * n))
    cuts = [b for (_, b, _) in kept[:-1]]
    sigma_gens = []
    for i in range(n):
        if len(kept) == 1:
            sigma_gens.append(kept[0][2][i])
        else:
            sigma_gens.append(Glue(cuts, [piece[2][i] for piece in kept]))
    sigma = Representation(n, sigma_gens)

    if conj:
        final_gens = [
            sigma.word_expr(conj * Word.gen(i + 1) * conj.inverse()) for i in range(n)
        ]
        rho = Representation(n, final_gens)
    else:
        rho = sigma

    _spot_check(rho, w, g, pieces, check_samples)
    return rho


def _spot_check(rho, w, g, pieces, count):
    if count <= 0:
        return
    for label, a, b in pieces:
        lo = a if is_finite(a) else (b - 4 if is_finite(b) else rat(-2))
        hi = b if is_finite(b) else (a + 4 if is_finite(a) else rat(2))
        if lo >= hi:
            continue
        for k in range(1, count + 1):
            x = lo + (hi - lo) * rat(k, count + 1)
            if rho.act(w, x) != g.eval(x):
                raise InternalCheckError(
                    f"word map failed at {format_rat(x)} on piece ({label})"
                )
