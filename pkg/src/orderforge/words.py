"""Reduced words in a free group, their trajectories, and trajectory graphs.

A word stores its letters in application order: ``letters[0]`` acts first.
The string form follows the usual right-to-left convention, so
``"x2^-1 x1^-1 x2 x1"`` applies x1 first.  Generator indices are 1-based;
a representation may register extra generators (a stable letter or an
amalgamated-factor generator) under names like ``"t"``, which get indices
above n.
"""

from __future__ import annotations


from .errors import ArgumentError
from .homeo import Compose, Homeo, Inverse, identity_map
from .rational import NEG_INF, Rat, format_rat, rat, rat_to_obj


def _inv_letter(letter):
    return (letter[0], -letter[1])


def reduce_letters(letters):
    out = []
    for let in letters:
        if out and out[-1] == _inv_letter(let):
            out.pop()
        else:
            out.append(tuple(let))
    return out


class Word:
    """A freely reduced word; empty means the identity."""

    __slots__ = ("letters",)

    def __init__(self, letters=(), already_reduced=False):
        letters = [tuple(l) for l in letters]
        for i, e in letters:
            if not (isinstance(i, int) and i >= 1 and e in (1, -1)):
                raise ArgumentError(f"bad letter {(i, e)!r}")
        self.letters = tuple(letters if already_reduced else reduce_letters(letters))

    # -- constructors -------------------------------------------------------

    @classmethod
    def parse(cls, text, names=None):
        """Parse from written form (leftmost token applied last).

        ``names`` maps extra generator names to indices, e.g. {"t": 3}.
        """
        tokens = text.replace("*", " ").split()
        letters = []
        for tok in reversed(tokens):
            exp = 1
            if "^" in tok:
                tok, pw = tok.split("^", 1)
                exp = int(pw)
            if names and tok in names:
                idx = names[tok]
            elif tok.startswith("x"):
                idx = int(tok[1:])
            else:
                raise ArgumentError(f"unknown generator token {tok!r}")
            if exp == 0:
                continue
            sign = 1 if exp > 0 else -1
            letters.extend([(idx, sign)] * abs(exp))
        return cls(letters)

    @classmethod
    def gen(cls, i, exp=1):
        sign = 1 if exp > 0 else -1
        return cls([(i, sign)] * abs(exp))

    # -- basic algebra -------------------------------------------------------

    def __len__(self):
        return len(self.letters)

    def __bool__(self):
        return bool(self.letters)

    def __eq__(self, other):
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def __mul__(self, other):
        """self * other in written order: other acts first."""
        return Word(other.letters + self.letters)

    def inverse(self):
        return Word([_inv_letter(l) for l in reversed(self.letters)], already_reduced=True)

    def __pow__(self, k):
        if k == 0:
            return Word()
        base = self if k > 0 else self.inverse()
        out = base
        for _ in range(abs(k) - 1):
            out = out * base
        return out

    def prefix(self, j):
        """w_j = a_j ... a_1 (the first j letters applied)."""
        return Word(self.letters[:j], already_reduced=True)

    def generators(self):
        return sorted({i for i, _ in self.letters})

    def is_cyclically_reduced(self):
        if len(self.letters) < 2:
            return True
        return self.letters[0] != _inv_letter(self.letters[-1])

    def render(self, names=None):
        if not self.letters:
            return "e"
        toks = []
        for i, e in reversed(self.letters):
            name = names.get(i) if names else None
            if name is None:
                name = f"x{i}"
            toks.append(name if e == 1 else f"{name}^-1")
        return " ".join(toks)

    def __repr__(self):
        return f"Word({self.render()!r})"


def cyclic_reduce(w: Word):
    """(core, conjugator c) with w = c^-1 * core * c in written order."""
    letters = list(w.letters)
    conj = []
    i, j = 0, len(letters) - 1
    while i < j and letters[i] == _inv_letter(letters[j]):
        conj.append(letters[i])
        i += 1
        j -= 1
    core = Word(letters[i : j + 1], already_reduced=True)
    return core, Word(conj, already_reduced=True)


class Representation:
    """One homeomorphism per free generator, plus optional named extras."""

    def __init__(self, n, gens, extras=None):
        if len(gens) != n:
            raise ArgumentError("need exactly n generator maps")
        self.n = n
        self.gens = list(gens)
        self.extras = dict(extras or {})
        self._extra_index = {name: n + 1 + k for k, name in enumerate(self.extras)}

    @classmethod
    def trivial(cls, n):
        return cls(n, [identity_map() for _ in range(n)])

    @property
    def names(self):
        return {idx: name for name, idx in self._extra_index.items()}

    def parse_word(self, text):
        return Word.parse(text, names=self._extra_index)

    def index_of(self, name):
        return self._extra_index[name]

    def gen_by_index(self, i) -> Homeo:
        if 1 <= i <= self.n:
            return self.gens[i - 1]
        for name, idx in self._extra_index.items():
            if idx == i:
                return self.extras[name]
        raise ArgumentError(f"no generator with index {i}")

    def act_letter(self, letter, x):
        g = self.gen_by_index(letter[0])
        return g.eval(x) if letter[1] == 1 else g.inverse_eval(x)

    def act(self, w: Word, x):
        x = rat(x)
        for letter in w.letters:
            x = self.act_letter(letter, x)
        return x

    def word_expr(self, w: Word) -> Homeo:
        if not w.letters:
            return identity_map()
        factors = []
        for i, e in reversed(w.letters):
            g = self.gen_by_index(i)
            factors.append(g if e == 1 else Inverse(g))
        return factors[0] if len(factors) == 1 else Compose(factors)

    def replaced(self, index, new_gen):
        gens = list(self.gens)
        extras = dict(self.extras)
        if 1 <= index <= self.n:
            gens[index - 1] = new_gen
        else:
            name = self.names[index]
            extras[name] = new_gen
        return Representation(self.n, gens, extras=extras)

    def to_obj(self):
        return {
            "n": self.n,
            "gens": [g.to_obj() for g in self.gens],
            "extras": {name: g.to_obj() for name, g in self.extras.items()},
        }

    @classmethod
    def from_obj(cls, obj):
        return cls(
            obj["n"],
            [Homeo.from_obj(g) for g in obj["gens"]],
            extras={name: Homeo.from_obj(g) for name, g in obj.get("extras", {}).items()},
        )


class Trajectory:
    """The point sequence of x under the prefixes of a word."""

    def __init__(self, word: Word, points):
        points = tuple(rat(p) for p in points)
        if len(points) != len(word.letters) + 1:
            raise ArgumentError("trajectory needs one point per prefix")
        self.word = word
        self.points = points

    @classmethod
    def of(cls, rep: Representation, w: Word, x):
        pts = [rat(x)]
        for letter in w.letters:
            pts.append(rep.act_letter(letter, pts[-1]))
        return cls(w, pts)

    def edges(self):
        """(src, dst, generator index) per letter, oriented by the exponent."""
        out = []
        for j, (i, e) in enumerate(self.word.letters):
            a, b = self.points[j], self.points[j + 1]
            out.append((a, b, i) if e == 1 else ((b, a, i)))
        return out

    def reversed(self):
        return Trajectory(self.word.inverse(), tuple(reversed(self.points)))

    def to_obj(self):
        return {
            "word": self.word.render(),
            "points": [rat_to_obj(p) for p in self.points],
        }

    def __eq__(self, other):
        return (
            isinstance(other, Trajectory)
            and self.word == other.word
            and self.points == other.points
        )

    def __repr__(self):
        pts = ", ".join(format_rat(p) for p in self.points)
        return f"Trajectory({self.word.render()}: {pts})"


def marks(S: Trajectory, i: int):
    """(mark set, largest mark) of generator i along the trajectory.

    The mark set collects the points where generator i is applied forward,
    or arrived at backward; the largest mark is the frontier below which
    the generator must stay frozen under any trajectory-preserving change.
    """
    D = set()
    letters = S.word.letters
    for j, let in enumerate(letters):
        if let == (i, 1):
            D.add(S.points[j])
        if let == (i, -1):
            D.add(S.points[j + 1])
    d = max(D) if D else NEG_INF
    return D, d


def all_marks(S: Trajectory, n: int):
    return {i: marks(S, i) for i in range(1, n + 1)}


def export_graph(S: Trajectory, names=None) -> str:
    """Deterministic DOT digraph of the trajectory (equal values merge)."""
    verts = sorted(set(S.points))
    lines = ["digraph trajectory {", "  rankdir=LR;"]
    for v in verts:
        lines.append(f'  "{format_rat(v)}" [shape=circle];')
    for a, b, i in S.edges():
        name = (names or {}).get(i) or f"x{i}"
        lines.append(f'  "{format_rat(a)}" -> "{format_rat(b)}" [label="{name}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
