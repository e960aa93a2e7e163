"""Perturbing a free-group action to create a stabilizer on a chosen orbit.

The perturbed generators agree with the originals below their freeze
thresholds (the largest marks of the word and the protected trajectories),
follow the original trajectory of the moved point for as long as that stays
inside the frozen region, then jump above every protected value and march
upward by unit steps forever.  One extra prescribed edge on the second
block closes a loop in the trajectory graph, which yields a short word
fixing a point on the orbit.  Everything is exact.
"""

from __future__ import annotations

from .errors import ArgumentError, HypothesisError, InternalCheckError
from .homeo import Homeo, InterpExtend
from .rational import NEG_INF, POS_INF, ext_max, format_rat, is_finite, rat, rat_to_obj
from .words import Representation, Trajectory, Word, marks


class PerturbationInput:
    def __init__(self, rho: Representation, p, w: Word, constraints=()):
        if not w:
            raise ArgumentError("the moved word must be nonempty")
        if not w.is_cyclically_reduced():
            raise ArgumentError("the moved word must be cyclically reduced")
        self.rho = rho
        self.p = rat(p)
        self.w = w
        self.constraints = [(v, rat(q)) for v, q in constraints]
        if rho.act(w, self.p) == self.p:
            raise ArgumentError("the word must move the base point")


class PerturbationReport:
    """Perturbed representation plus the exact witnesses and freeze data."""

    def __init__(self, rho2, stab_word, orbit_word, fixed_point, freeze, case,
                 ceiling, swapped, w_eff, p_eff, i0, sequences, period, touched):
        self.rho2 = rho2
        self.stab_word = stab_word
        self.orbit_word = orbit_word
        self.fixed_point = fixed_point
        self.freeze = freeze  # lemma thresholds, -inf allowed
        self.case = case
        self.ceiling = ceiling
        self.swapped = swapped  # orientation note: ran on (w^-1, w(p))
        self.w_eff = w_eff
        self.p_eff = p_eff
        self.i0 = i0
        self.sequences = sequences
        self.period = period
        self.touched = touched  # generator indices actually modified

    def to_obj(self):
        return {
            "rho2": self.rho2.to_obj(),
            "stab_word": self.stab_word.render(),
            "orbit_word": self.orbit_word.render(),
            "fixed_point": rat_to_obj(self.fixed_point),
            "freeze": [rat_to_obj(m) if is_finite(m) else "-inf" for m in self.freeze],
            "case": self.case,
            "ceiling": rat_to_obj(self.ceiling),
            "orientation_swapped": self.swapped,
            "w_effective": self.w_eff.render(),
            "p_effective": rat_to_obj(self.p_eff),
            "i0": self.i0,
            "sequences": [[rat_to_obj(s) for s in seq] for seq in self.sequences],
            "tail_period": self.period,
            "touched": sorted(self.touched),
        }


def _constraint_data(rho, constraints, n):
    trajs = [Trajectory.of(rho, v, q) for v, q in constraints]
    dij = {i: [] for i in range(1, n + 1)}
    for S in trajs:
        for i in range(1, n + 1):
            dij[i].append(marks(S, i)[1])
    return trajs, dij


def check_increasing_hypothesis(inp: PerturbationInput):
    """A generator index whose word mark dominates all constraint marks, or None.

    When the base point sits above every protected trajectory the first
    letter of the word works; otherwise all indices are searched directly.
    """
    rho, w, p = inp.rho, inp.w, inp.p
    n = rho.n
    S = Trajectory.of(rho, w, p)
    trajs, dij = _constraint_data(rho, inp.constraints, n)
    d = {i: marks(S, i)[1] for i in range(1, n + 1)}
    top = ext_max(pt for T in trajs for pt in T.points)
    if p >= top:
        i0 = w.letters[0][0]
        if d[i0] < ext_max(dij[i0]):
            raise InternalCheckError("first-letter rule failed above all constraints")
        return i0
    for i in w.generators():
        if d[i] >= ext_max(dij[i]):
            return i
    return None


def _match_commutator_power(w: Word):
    """(y1, y2, u) with w = (y2^-1 y1^-1 y2 y1)^u over two distinct generators."""
    m = len(w)
    if m % 4 != 0 or m == 0:
        return None
    u = m // 4
    block = w.letters[:4]
    y1, y2 = block[0], block[1]
    if y1[0] == y2[0]:
        return None
    if block[2] != (y1[0], -y1[1]) or block[3] != (y2[0], -y2[1]):
        return None
    if w.letters != tuple(block) * u:
        return None
    return y1, y2, u


class _Prescriptions:
    """Per-generator exact input -> output table with conflict detection."""

    def __init__(self, n):
        self.table = {i: {} for i in range(1, n + 1)}

    def add(self, i, src, dst, what):
        prev = self.table[i].get(src)
        if prev is not None and prev != dst:
            raise InternalCheckError(
                f"conflicting prescriptions for generator {i} at {format_rat(src)} ({what})"
            )
        self.table[i][src] = dst

    def would_conflict(self, i, src, dst):
        prev = self.table[i].get(src)
        if prev is not None and prev != dst:
            return True
        for s, t in self.table[i].items():
            if t == dst and s != src:
                return True
            # monotonicity with the new pair
            if (s < src and t >= dst) or (s > src and t <= dst):
                return True
        return False


def perturb_with_stabilizer(inp: PerturbationInput) -> PerturbationReport:
    rho = inp.rho
    n = rho.n
    w, p = inp.w, inp.p
    swapped = False
    wp = rho.act(w, p)
    if wp < p:
        w, p = w.inverse(), wp
        swapped = True
    eff = PerturbationInput(rho, p, w, inp.constraints)
    i0 = check_increasing_hypothesis(eff)
    if i0 is None:
        raise HypothesisError("no generator index dominates the constraint marks")

    m = len(w)
    S0 = Trajectory.of(rho, w, p)
    trajs, dij = _constraint_data(rho, inp.constraints, n)
    d = {i: marks(S0, i)[1] for i in range(1, n + 1)}
    freeze = [max(d[i], ext_max(dij[i])) for i in range(1, n + 1)]
    ceiling = ext_max(
        [pt for pt in S0.points] + [pt for T in trajs for pt in T.points]
    )

    # first block: follow the original trajectory while it stays frozen
    s1 = [rho.act(w, p)]
    l = m
    for j, (i, e) in enumerate(w.letters, start=1):
        mi = freeze[i - 1]
        if not is_finite(mi):
            ok = False
        elif e == 1:
            ok = s1[-1] <= mi
        else:
            ok = s1[-1] <= rho.gens[i - 1].eval(mi)
        if not ok:
            l = j - 1
            break
        s1.append(rho.act_letter((i, e), s1[-1]))
    if l >= m:
        raise InternalCheckError("the first block never left the frozen region")
    s1.append(ceiling + 1)
    while len(s1) < m + 1:
        s1.append(s1[-1] + 1)

    # later blocks
    combo = _match_commutator_power(w)
    case = "A" if combo else "B"
    if case == "A":
        _, _, upow = combo
        r_pure = 4 if upow == 1 else 3
    else:
        r_pure = 2
    r_build = r_pure + 2
    seqs = [s1]
    for r in range(2, r_build + 1):
        start = seqs[-1][-1]
        seq = [start]
        if case == "A" and r == 2:
            for off in (3, 4, 1, 2):
                seq.append(start + off)
            for j in range(5, m + 1):
                seq.append(start + j)
        elif case == "A" and r == 3 and combo[2] == 1:
            seq.append(start + 3)
            while len(seq) < m + 1:
                seq.append(seq[-1] + 1)
        else:
            while len(seq) < m + 1:
                seq.append(seq[-1] + 1)
        seqs.append(seq)

    pres = _Prescriptions(n)
    for seq in seqs:
        for j, (i, e) in enumerate(w.letters, start=1):
            if e == 1:
                pres.add(i, seq[j - 1], seq[j], "trajectory edge")
            else:
                pres.add(i, seq[j], seq[j - 1], "trajectory edge")

    # the stabilizing extra edge on the second block
    s2 = seqs[1]
    if case == "A":
        y1, y2 = combo[0], combo[1]
        h, tau = y2
        if tau == 1:
            pres.add(h, s2[3], s2[0], "stabilizer edge")
        else:
            pres.add(h, s2[0], s2[3], "stabilizer edge")
        z = Word([y1, y2, (y1[0], -y1[1]), y2], already_reduced=True)
        fixed_point = s2[0]
        orbit_word = w ** 2
    else:
        found = None
        in_w = set(w.generators())
        candidates = sorted(range(1, n + 1), key=lambda i: (i not in in_w, i))
        for j1 in range(m):
            a_next = w.letters[j1]  # a_{j1+1}
            a_prev = w.letters[(j1 - 1) % m]  # a_{j1}
            a_nn = w.letters[(j1 + 1) % m]  # a_{j1+2}
            for i1 in candidates:
                if a_next[0] == i1:
                    continue
                if a_prev[0] == i1 and a_nn[0] == i1 and a_prev[1] == -a_nn[1]:
                    continue
                reverse = (a_prev == (i1, -1)) or (a_nn == (i1, -1))
                if reverse:
                    src, dst = s2[j1 + 1], s2[j1]
                    zi = (i1, 1)
                else:
                    src, dst = s2[j1], s2[j1 + 1]
                    zi = (i1, -1)
                if pres.would_conflict(i1, src, dst):
                    continue
                found = (j1, i1, src, dst, zi, a_next)
                break
            if found:
                break
        if found is None:
            raise HypothesisError(
                "no admissible stabilizer edge exists (a second generator is needed)"
            )
        j1, i1, src, dst, zi, a_next = found
        pres.add(i1, src, dst, "stabilizer edge")
        z = Word([a_next, zi], already_reduced=True)
        fixed_point = s2[j1]
        orbit_word = w.prefix(j1) * (w ** 2)

    # assemble the perturbed generators
    tail_anchor = seqs[r_pure][0]  # start of the second fully periodic block
    new_gens = []
    touched = []
    for i in range(1, n + 1):
        entries = sorted(pres.table[i].items())
        if not entries:
            new_gens.append(rho.gens[i - 1])
            continue
        touched.append(i)
        base = rho.gens[i - 1]
        mi = freeze[i - 1]
        kept = []
        for src, dst in entries:
            if is_finite(mi) and src <= mi:
                want = base.eval(src)
                if want != dst:
                    raise InternalCheckError(
                        f"frozen-region prescription disagrees with the base map at {format_rat(src)}"
                    )
                continue
            kept.append((src, dst))
        if not kept:
            new_gens.append(rho.gens[i - 1])
            touched.pop()
            continue
        if is_finite(mi):
            cutoff = mi
        else:
            first_in, first_out = kept[0]
            cutoff = min(first_in, base.inverse_eval(first_out)) - 1
        periodic = i in set(w.generators())
        if periodic:
            pairs = [pair for pair in kept if pair[0] <= tail_anchor + m]
            dropped = [pair for pair in kept if pair[0] > tail_anchor + m]
            lookup = dict(pairs)
            for src, dst in dropped:
                if lookup.get(src - m) != dst - m:
                    raise InternalCheckError("tail is not periodic with the expected period")
            # the constructor needs the anchor pair exactly one period in
            last_in = pairs[-1][0]
            if (last_in - m) not in lookup or lookup[last_in - m] != pairs[-1][1] - m:
                raise InternalCheckError("missing periodic anchor pair")
            gen = InterpExtend(base, cutoff, pairs, tail=("periodic", rat(m)))
        else:
            gen = InterpExtend(base, cutoff, kept, tail=("affine1",))
        new_gens.append(gen)
    rho2 = Representation(n, new_gens, extras=dict(rho.extras))

    report = PerturbationReport(
        rho2=rho2,
        stab_word=z,
        orbit_word=orbit_word,
        fixed_point=fixed_point,
        freeze=freeze,
        case=case,
        ceiling=ceiling,
        swapped=swapped,
        w_eff=w,
        p_eff=p,
        i0=i0,
        sequences=seqs,
        period=m,
        touched=touched,
    )
    _verify(report, rho, inp)
    return report


def _verify(report, rho, inp):
    rho2 = report.rho2
    w, p = report.w_eff, report.p_eff
    if rho2.act(w, p) != report.sequences[0][0]:
        raise InternalCheckError("the moved point left its original first image")
    for seq in report.sequences:
        T = Trajectory.of(rho2, w, seq[0])
        if list(T.points) != list(seq):
            raise InternalCheckError("a constructed block is not a perturbed trajectory")
    F = rho2.act(report.orbit_word, p)
    if F != report.fixed_point:
        raise InternalCheckError("orbit word misses the designated fixed point")
    if rho2.act(report.stab_word, F) != F:
        raise InternalCheckError("stabilizer word does not fix its point")
    for v, q in inp.constraints:
        if Trajectory.of(rho2, v, q) != Trajectory.of(rho, v, q):
            raise InternalCheckError("a protected trajectory moved")
