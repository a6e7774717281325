"""Encodings of PCP and two-counter machine halting as model-checking instances.

Both encodings produce existential two-variable sentences, so the
bounded witness search can demonstrate positive instances.

Proposition names: ``hash`` stands for the end-of-word marker, ``p1..pn``
mark the index of the current word, ``q1``/``q2`` the side of the
instance.  Machine transitions are ``d0, d1, ...`` and the counter
propositions are ``c1, c2, beg1, beg2``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .kripke import FairKripke
from .syntax import (
    And, Atom, Context, Formula, HyperSentence, Next, Not, Prop, Until,
    always, conj, eventually, iff, implies,
)

HASH = "hash"
_IDENT = re.compile(r"[a-zA-Z_][a-zA-Z0-9_']*")


class InstanceError(ValueError):
    pass


# -- PCP ---------------------------------------------------------------------

@dataclass(frozen=True)
class PcpInstance:
    """Two lists of nonempty words; a word is a tuple of symbol names."""

    top: tuple[tuple[str, ...], ...]
    bottom: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.top or len(self.top) != len(self.bottom):
            raise InstanceError("need two nonempty word lists of equal length")
        for w in self.top + self.bottom:
            if not w:
                raise InstanceError("words must be nonempty")
        reserved = self.reserved()
        for a in self.alphabet:
            if not _IDENT.fullmatch(a) or a in reserved:
                raise InstanceError(f"symbol {a!r} is not usable as a proposition")

    @classmethod
    def from_strings(cls, pairs) -> "PcpInstance":
        """``[("ab", "a"), ...]`` with one-character symbols."""
        pairs = list(pairs)
        return cls(tuple(tuple(t) for t, _ in pairs), tuple(tuple(b) for _, b in pairs))

    @property
    def n(self) -> int:
        return len(self.top)

    @property
    def alphabet(self) -> tuple[str, ...]:
        return tuple(sorted({a for w in self.top + self.bottom for a in w}))

    def reserved(self) -> set[str]:
        return {HASH, "q1", "q2"} | {f"p{i}" for i in range(1, self.n + 1)}

    def words(self, side: int) -> tuple[tuple[str, ...], ...]:
        return self.top if side == 1 else self.bottom


def pcp_normalize(inst: PcpInstance) -> PcpInstance:
    """Double every symbol when some word is shorter than two."""
    if all(len(w) >= 2 for w in inst.top + inst.bottom):
        return inst

    def double(w):
        return tuple(a for a in w for _ in range(2))

    return PcpInstance(tuple(map(double, inst.top)), tuple(map(double, inst.bottom)))


def pcp_aps(inst: PcpInstance) -> tuple[str, ...]:
    return inst.alphabet + (HASH,) + tuple(f"p{i}" for i in range(1, inst.n + 1)) + ("q1", "q2")


def pcp_kripke(inst: PcpInstance) -> FairKripke:
    """Generates the words of either side symbol by symbol, then ``{hash}`` forever.

    State ``w{i}_{l}_{h}`` emits symbol ``h`` of word ``i`` on side ``l``.
    """
    if any(len(w) < 2 for w in inst.top + inst.bottom):
        raise InstanceError("normalize the instance first")

    def name(i, side, h):
        return f"w{i}_{side}_{h}"

    states = ["s0", "sf"]
    edges = {("sf", "sf")}
    label = {"s0": {HASH}, "sf": {HASH}}
    for side in (1, 2):
        words = inst.words(side)
        for i, w in enumerate(words, 1):
            for h, a in enumerate(w):
                s = name(i, side, h)
                states.append(s)
                label[s] = {a, f"p{i}", f"q{side}"} | ({HASH} if h == len(w) - 1 else set())
                if h < len(w) - 1:
                    edges.add((s, name(i, side, h + 1)))
                else:
                    edges.add((s, "sf"))
                    edges.update((s, name(j, side, 0)) for j in range(1, inst.n + 1))
            edges.add(("s0", name(i, side, 0)))
    return FairKripke(pcp_aps(inst), tuple(states), frozenset({"s0"}), frozenset(edges),
                      label, frozenset(states))


def pcp_sentence(inst: PcpInstance) -> HyperSentence:
    x1, x2 = "x1", "x2"
    gamma = frozenset(Prop(p) for p in (HASH, *(f"p{i}" for i in range(1, inst.n + 1))))

    def same(p):
        return iff(Atom(p, x1), Atom(p, x2))

    parts = [
        eventually(always(And(Atom(HASH, x1), Atom(HASH, x2)))),
        always(And(Not(Atom("q2", x1)), Not(Atom("q1", x2)))),
        *(always(same(a)) for a in inst.alphabet),
        *(always(same(p.name), gamma) for p in sorted(gamma, key=lambda p: p.name)),
    ]
    return HyperSentence((("exists", x1), ("exists", x2)), conj(parts))


def parse_pcp_pairs(items) -> PcpInstance:
    """Parse ``top:bottom`` strings with one-character symbols."""
    pairs = []
    for item in items:
        top, sep, bottom = item.partition(":")
        if not sep:
            raise InstanceError(f"expected top:bottom, got {item!r}")
        pairs.append((top.strip(), bottom.strip()))
    return PcpInstance.from_strings(pairs)


# -- two-counter machines --------------------------------------------------------

OPS = ("inc", "dec", "zero")


@dataclass(frozen=True)
class MinskyMachine:
    """Transitions are ``(source, op, counter, target)``."""

    locations: tuple[str, ...]
    init: str
    halt: str
    transitions: tuple[tuple[str, str, int, str], ...]

    def __post_init__(self):
        known = set(self.locations)
        if self.init not in known or self.halt not in known:
            raise InstanceError("initial and halting locations must be declared")
        if self.init == self.halt:
            raise InstanceError("initial and halting locations must differ")
        for src, op, c, dst in self.transitions:
            if src not in known or dst not in known:
                raise InstanceError(f"transition {src}->{dst} uses an unknown location")
            if op not in OPS or c not in (1, 2):
                raise InstanceError(f"bad instruction ({op}, {c})")
            if src == self.halt:
                raise InstanceError("no transition may leave the halting location")

    def prop(self, i: int) -> str:
        return f"d{i}"


def minsky_aps(M: MinskyMachine) -> tuple[str, ...]:
    return tuple(M.prop(i) for i in range(len(M.transitions))) + ("c1", "c2", "beg1", "beg2")


def minsky_kripke(M: MinskyMachine) -> FairKripke:
    """Generates computation codes: per transition ``{d}{d,beg1}{d,c1}^h{d,beg2}{d,c2}^h'``.

    Codes of a zero test on counter ``c`` have no ``c`` units and codes of
    a decrement have at least one, so every block describes a transition
    that is enabled.  States carry the transition of the current block,
    the counter being written and whether this is the first block (whose
    counters are zero).
    Blocks chain when the target of one transition is the source of the
    next; a block whose transition enters the halting location continues
    with the empty label forever.  States without infinite continuation
    are removed.
    """
    ts = M.transitions
    succ: dict[str, list[str]] = {}
    label: dict[str, set] = {}
    initial = []

    def add(s, lab, nxt):
        label[s] = lab
        succ[s] = nxt

    def block_exits(i):
        _, _, _, dst = ts[i]
        if dst == M.halt:
            return ["end"]
        return [f"h{j}" for j, t in enumerate(ts) if t[0] == dst]

    for i, (src, op, c, _) in enumerate(ts):
        d = M.prop(i)
        exits = block_exits(i)
        units = {k: not (op == "zero" and c == k) for k in (1, 2)}
        skip = {k: not (op == "dec" and c == k) for k in (1, 2)}
        add(f"h{i}", {d}, [f"b{i}_1"])
        add(f"b{i}_1", {d, "beg1"},
            ([f"u{i}_1"] if units[1] else []) + ([f"b{i}_2"] if skip[1] else []))
        if units[1]:
            add(f"u{i}_1", {d, "c1"}, [f"u{i}_1", f"b{i}_2"])
        add(f"b{i}_2", {d, "beg2"},
            ([f"u{i}_2"] if units[2] else []) + (exits if skip[2] else []))
        if units[2]:
            add(f"u{i}_2", {d, "c2"}, [f"u{i}_2"] + exits)
        if src == M.init and op != "dec":
            add(f"ih{i}", {d}, [f"ib{i}_1"])
            add(f"ib{i}_1", {d, "beg1"}, [f"ib{i}_2"])
            add(f"ib{i}_2", {d, "beg2"}, exits)
            initial.append(f"ih{i}")
    add("end", set(), ["end"])

    alive = _live(succ)
    states = [s for s in succ if s in alive]
    inits = frozenset(s for s in initial if s in alive)
    if not inits:
        states = [s for s in states if s == "end"] or ["end"]
    edges = frozenset((s, t) for s in states for t in succ[s] if t in states)
    return FairKripke(minsky_aps(M), tuple(states), inits, edges,
                      {s: frozenset(label[s]) for s in states}, frozenset(states))


def _live(succ: dict) -> set:
    """States with an infinite path."""
    alive = set(succ)
    changed = True
    while changed:
        changed = False
        for s in list(alive):
            if not any(t in alive for t in succ[s]):
                alive.discard(s)
                changed = True
    return alive


def minsky_sentence(M: MinskyMachine) -> HyperSentence:
    x1, x2 = "x1", "x2"
    aps = minsky_aps(M)
    copy = always(conj(iff(Atom(p, x1), Atom(p, x2)) for p in aps))
    empty = eventually(conj(Not(Atom(p, x1)) for p in aps))
    checks = []
    for i, (_, op, counter, dst) in enumerate(M.transitions):
        if dst == M.halt:
            continue
        d = M.prop(i)
        for c in (1, 2):
            beg = f"beg{c}"
            step = _counter_step(op, counter, c, x1, x2)
            inner = Context(frozenset({x1, x2}), step)
            move = Context(frozenset({x2}), Next(Until(
                Not(Atom(beg, x2)), And(Atom(beg, x2), inner))))
            checks.append(implies(And(Atom(d, x1), Atom(beg, x1)), move))
    good = always(conj(checks))
    return HyperSentence((("exists", x1), ("exists", x2)), conj([copy, empty, good]))


def _counter_step(op: str, counter: int, c: int, x1: str, x2: str) -> Formula:
    """Equality, increment or decrement of counter ``c`` between adjacent blocks."""
    u = f"c{c}"
    both = And(Atom(u, x1), Atom(u, x2))
    if c != counter or op == "zero":
        goal: Formula = And(Not(Atom(u, x1)), Not(Atom(u, x2)))
    elif op == "inc":
        goal = conj([Not(Atom(u, x1)), Atom(u, x2), Next(Not(Atom(u, x2)))])
    else:
        goal = conj([Atom(u, x1), Not(Atom(u, x2)), Next(Not(Atom(u, x1)))])
    return Next(Until(both, goal))


def parse_minsky(text: str) -> MinskyMachine:
    """Lines ``init q``, ``halt q`` and ``trans src op counter dst``; ``#`` comments."""
    init = halt = None
    trans = []
    locs: dict[str, None] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        head = words[0]
        if head in ("init", "halt") and len(words) == 2:
            locs.setdefault(words[1])
            if head == "init":
                init = words[1]
            else:
                halt = words[1]
        elif head == "trans" and len(words) == 5:
            src, op, c, dst = words[1:]
            if c not in ("1", "2"):
                raise InstanceError(f"line {ln}: counter must be 1 or 2")
            locs.setdefault(src)
            locs.setdefault(dst)
            trans.append((src, op, int(c), dst))
        else:
            raise InstanceError(f"line {ln}: cannot parse {raw.strip()!r}")
    if init is None or halt is None:
        raise InstanceError("missing init or halt line")
    return MinskyMachine(tuple(locs), init, halt, tuple(trans))


def format_minsky(M: MinskyMachine) -> str:
    lines = [f"init {M.init}", f"halt {M.halt}"]
    lines += [f"trans {s} {op} {c} {d}" for s, op, c, d in M.transitions]
    return "\n".join(lines) + "\n"
