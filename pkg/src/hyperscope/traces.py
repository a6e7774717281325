"""Lasso traces, LTL evaluation on lassos, stutter factorizations, and the
direct semantic evaluators for stuttering and context hyper formulas.

Positions on a lasso are reduced to position classes: class ``c`` is the
stem index ``c`` when ``c < len(stem)`` and loop residue ``c - len(stem)``
otherwise.  Everything position-dependent is tabulated over classes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .syntax import (
    And, Atom, Context, Formula, Next, Not, Or, Prop, Release, Top, Until,
)

Letter = frozenset


def _primitive_period(seq: tuple) -> tuple:
    n = len(seq)
    for p in range(1, n + 1):
        if n % p == 0 and seq[:p] * (n // p) == seq:
            return seq[:p]
    return seq


@dataclass(frozen=True)
class Lasso:
    """The infinite trace ``stem · loop^ω``."""

    stem: tuple
    loop: tuple

    def __post_init__(self):
        if not self.loop:
            raise ValueError("a lasso needs a nonempty loop")
        object.__setattr__(self, "stem", tuple(frozenset(a) for a in self.stem))
        object.__setattr__(self, "loop", tuple(frozenset(a) for a in self.loop))

    @property
    def n_classes(self) -> int:
        return len(self.stem) + len(self.loop)

    def cls(self, i: int) -> int:
        s = len(self.stem)
        return i if i < s else s + (i - s) % len(self.loop)

    def next_cls(self, c: int) -> int:
        return c + 1 if c + 1 < self.n_classes else len(self.stem)

    def letter(self, i: int) -> frozenset:
        return self.at_cls(self.cls(i))

    def at_cls(self, c: int) -> frozenset:
        s = len(self.stem)
        return self.stem[c] if c < s else self.loop[c - s]

    def suffix(self, i: int) -> "Lasso":
        s = len(self.stem)
        if i < s:
            return Lasso(self.stem[i:], self.loop)
        r = (i - s) % len(self.loop)
        return Lasso((), self.loop[r:] + self.loop[:r])

    def canonical(self) -> "Lasso":
        loop = _primitive_period(self.loop)
        stem = list(self.stem)
        while stem and stem[-1] == loop[-1]:
            stem.pop()
            loop = (loop[-1],) + loop[:-1]
        return Lasso(tuple(stem), loop)

    def props(self) -> set[str]:
        return set().union(*self.stem, *self.loop)

    def __str__(self) -> str:
        return format_lasso(self)


def format_letter(a: Iterable[str]) -> str:
    return "{" + " ".join(sorted(a)) + "}"


def format_lasso(w: Lasso) -> str:
    stem = " ".join(format_letter(a) for a in w.stem)
    loop = " ".join(format_letter(a) for a in w.loop)
    return f"{stem} | {loop}".strip() if stem else f"| {loop}"


_LETTER_RE = re.compile(r"\{([^{}]*)\}")


def parse_lasso(text: str) -> Lasso:
    """Parse ``{p q} {} | {p}``: letters before ``|`` form the stem."""
    if text.count("|") != 1:
        raise ValueError(f"lasso needs exactly one '|': {text!r}")
    head, tail = text.split("|")

    def letters(part: str) -> tuple:
        leftover = _LETTER_RE.sub("", part).strip()
        if leftover:
            raise ValueError(f"unexpected text in lasso: {leftover!r}")
        return tuple(frozenset(m.group(1).split()) for m in _LETTER_RE.finditer(part))

    loop = letters(tail)
    if not loop:
        raise ValueError("lasso loop is empty")
    return Lasso(letters(head), loop)


def parse_assignment(text: str) -> dict[str, Lasso]:
    """Lines ``x = <lasso>``; ``#`` starts a comment."""
    out: dict[str, Lasso] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, rest = line.partition("=")
        name = name.strip()
        if not sep or not re.fullmatch(r"[a-zA-Z_][a-zA-Z0-9_']*", name):
            raise ValueError(f"line {n}: expected 'var = lasso'")
        if name in out:
            raise ValueError(f"line {n}: variable {name!r} assigned twice")
        out[name] = parse_lasso(rest)
    return out


@dataclass(frozen=True)
class PointedLasso:
    trace: Lasso
    pos: int = 0


# -- LTL on lassos ------------------------------------------------------------

def ltl_table(theta: Formula, w: Lasso) -> dict[Formula, list[bool]]:
    """Truth of every subformula of ``theta`` at every position class."""
    n = w.n_classes
    nxt = [w.next_cls(c) for c in range(n)]
    letters = [w.at_cls(c) for c in range(n)]
    table: dict[Formula, list[bool]] = {}

    def visit(f: Formula) -> list[bool]:
        if f in table:
            return table[f]
        if isinstance(f, Top):
            val = [True] * n
        elif isinstance(f, Prop):
            val = [f.name in a for a in letters]
        elif isinstance(f, Not):
            val = [not b for b in visit(f.arg)]
        elif isinstance(f, And):
            l, r = visit(f.left), visit(f.right)
            val = [a and b for a, b in zip(l, r)]
        elif isinstance(f, Or):
            l, r = visit(f.left), visit(f.right)
            val = [a or b for a, b in zip(l, r)]
        elif isinstance(f, Next):
            a = visit(f.arg)
            val = [a[nxt[c]] for c in range(n)]
        elif isinstance(f, (Until, Release)):
            l, r = visit(f.left), visit(f.right)
            least = isinstance(f, Until)
            val = [not least] * n
            changed = True
            while changed:
                changed = False
                for c in reversed(range(n)):
                    if least:
                        v = r[c] or (l[c] and val[nxt[c]])
                    else:
                        v = r[c] and (l[c] or val[nxt[c]])
                    if v != val[c]:
                        val[c] = v
                        changed = True
        else:
            raise TypeError(f"not an LTL formula: {f!r}")
        table[f] = val
        return val

    visit(theta)
    return table


def ltl_eval(theta: Formula, w: Lasso, i: int = 0) -> bool:
    return ltl_table(theta, w)[theta][w.cls(i)]


# -- stutter factorization ----------------------------------------------------

def _gamma_vectors(gamma: frozenset, w: Lasso) -> list[tuple]:
    formulas = sorted(gamma, key=str)
    tables = [ltl_table(t, w)[t] for t in formulas]
    return [tuple(t[c] for t in tables) for c in range(w.n_classes)]


@dataclass(frozen=True)
class Factorization:
    """Segment starts of the stutter factorization of a lasso.

    ``breakpoints`` lists the starts up to position ``len(stem)``.  Either
    ``last_start`` is the start of the final infinite segment, or
    ``cycle`` lists the starts in ``(len(stem), len(stem) + len(loop)]``,
    which repeat with period ``len(loop)``.
    """

    breakpoints: tuple[int, ...]
    last_start: int | None
    cycle: tuple[int, ...] = ()
    period: int = 0

    def starts(self, limit: int) -> Iterator[int]:
        for b in self.breakpoints:
            if b < limit:
                yield b
        if self.last_start is not None:
            return
        k = 0
        while True:
            for b in self.cycle:
                pos = b + k * self.period
                if pos >= limit:
                    return
                yield pos
            k += 1


def stutter_factorize(gamma: frozenset, w: Lasso) -> Factorization:
    s, period = len(w.stem), len(w.loop)
    if not gamma:
        return Factorization(tuple(range(s + 1)), None, tuple(range(s + 1, s + period + 1)), period)
    vec = _gamma_vectors(gamma, w)
    at = lambda i: vec[w.cls(i)]
    bps = [0] + [j for j in range(1, s + period + 1) if at(j) != at(j - 1)]
    head = tuple(b for b in bps if b <= s)
    cyc = tuple(b for b in bps if b > s)
    if not cyc:
        return Factorization(head, head[-1])
    return Factorization(head, None, cyc, period)


def stfr(gamma: frozenset, w: Lasso) -> Lasso:
    """The trace of first letters of the stutter-factorization segments."""
    if not gamma:
        return w.canonical()
    fac = stutter_factorize(gamma, w)
    if fac.last_start is not None:
        rest = w.suffix(fac.last_start)
        firsts = tuple(w.letter(b) for b in fac.breakpoints if b < fac.last_start)
        return Lasso(firsts + rest.stem, rest.loop).canonical()
    return Lasso(
        tuple(w.letter(b) for b in fac.breakpoints),
        tuple(w.letter(b) for b in fac.cycle),
    ).canonical()


def successor_table(gamma: frozenset, w: Lasso) -> list[tuple[int, int]]:
    """For each class ``c``: (distance to the stutter successor, its class)."""
    n = w.n_classes
    if not gamma:
        return [(1, w.next_cls(c)) for c in range(n)]
    vec = _gamma_vectors(gamma, w)
    out = []
    for c in range(n):
        cur, dist = c, 0
        found = None
        # a change, if any, shows up within one pass over all classes
        for _ in range(n + 1):
            nxt = w.next_cls(cur)
            dist += 1
            if vec[nxt] != vec[cur]:
                found = (dist, nxt)
                break
            cur = nxt
        out.append(found or (1, w.next_cls(c)))
    return out


def succ_gamma(gamma: frozenset, pt: PointedLasso) -> PointedLasso:
    dist, _ = successor_table(gamma, pt.trace)[pt.trace.cls(pt.pos)]
    return PointedLasso(pt.trace, pt.pos + dist)


# -- hyper evaluators ---------------------------------------------------------

def _normalize(assignment: Mapping) -> dict[str, PointedLasso]:
    out = {}
    for x, v in assignment.items():
        if isinstance(v, Lasso):
            v = PointedLasso(v, 0)
        elif isinstance(v, tuple):
            v = PointedLasso(*v)
        out[x] = v
    return out


class _Evaluator:
    def __init__(self, assignment: Mapping):
        pts = _normalize(assignment)
        self.names = sorted(pts)
        self.index = {x: k for k, x in enumerate(self.names)}
        self.traces = [pts[x].trace for x in self.names]
        self.start = tuple(w.cls(pts[x].pos) for x, w in zip(self.names, self.traces))
        self.memo: dict = {}
        self.succ_memo: dict = {}

    def comp(self, var: str) -> int:
        try:
            return self.index[var]
        except KeyError:
            raise KeyError(f"trace variable {var!r} is not bound") from None

    def atom(self, f: Atom, vec: tuple) -> bool:
        k = self.comp(f.var)
        return f.prop in self.traces[k].at_cls(vec[k])


class _StutterEvaluator(_Evaluator):
    def succ(self, gamma: frozenset, vec: tuple) -> tuple:
        tables = self.succ_memo.get(gamma)
        if tables is None:
            tables = [successor_table(gamma, w) for w in self.traces]
            self.succ_memo[gamma] = tables
        return tuple(t[c][1] for t, c in zip(tables, vec))

    def eval(self, f: Formula, vec: tuple) -> bool:
        key = (f, vec)
        if key in self.memo:
            return self.memo[key]
        if isinstance(f, Top):
            val = True
        elif isinstance(f, Atom):
            val = self.atom(f, vec)
        elif isinstance(f, Not):
            val = not self.eval(f.arg, vec)
        elif isinstance(f, And):
            val = self.eval(f.left, vec) and self.eval(f.right, vec)
        elif isinstance(f, Or):
            val = self.eval(f.left, vec) or self.eval(f.right, vec)
        elif isinstance(f, Next):
            val = self.eval(f.arg, self.succ(f.gamma, vec))
        elif isinstance(f, (Until, Release)):
            val = self.fixpoint(f, vec, lambda v: self.succ(f.gamma, v))
        else:
            raise TypeError(f"unexpected node in a stuttering body: {f!r}")
        self.memo[key] = val
        return val

    def fixpoint(self, f, vec, step) -> bool:
        until = isinstance(f, Until)
        seen = set()
        while vec not in seen:
            seen.add(vec)
            if until:
                if self.eval(f.right, vec):
                    return True
                if not self.eval(f.left, vec):
                    return False
            else:
                if not self.eval(f.right, vec):
                    return False
                if self.eval(f.left, vec):
                    return True
            vec = step(vec)
        return not until


class _ContextEvaluator(_Evaluator):
    def advance(self, ctx: frozenset, vec: tuple) -> tuple:
        return tuple(
            w.next_cls(c) if x in ctx else c
            for x, w, c in zip(self.names, self.traces, vec)
        )

    def eval(self, f: Formula, vec: tuple, ctx: frozenset) -> bool:
        key = (f, vec, ctx)
        if key in self.memo:
            return self.memo[key]
        if isinstance(f, Top):
            val = True
        elif isinstance(f, Atom):
            val = self.atom(f, vec)
        elif isinstance(f, Not):
            val = not self.eval(f.arg, vec, ctx)
        elif isinstance(f, And):
            val = self.eval(f.left, vec, ctx) and self.eval(f.right, vec, ctx)
        elif isinstance(f, Or):
            val = self.eval(f.left, vec, ctx) or self.eval(f.right, vec, ctx)
        elif isinstance(f, Next):
            val = self.eval(f.arg, self.advance(ctx, vec), ctx)
        elif isinstance(f, Context):
            val = self.eval(f.arg, vec, f.vars)
        elif isinstance(f, (Until, Release)):
            until = isinstance(f, Until)
            seen = set()
            cur = vec
            val = not until
            while cur not in seen:
                seen.add(cur)
                if until:
                    if self.eval(f.right, cur, ctx):
                        val = True
                        break
                    if not self.eval(f.left, cur, ctx):
                        val = False
                        break
                else:
                    if not self.eval(f.right, cur, ctx):
                        val = False
                        break
                    if self.eval(f.left, cur, ctx):
                        val = True
                        break
                cur = self.advance(ctx, cur)
        else:
            raise TypeError(f"unexpected node in a context body: {f!r}")
        self.memo[key] = val
        return val


def eval_s_qf(psi: Formula, assignment: Mapping) -> bool:
    """Satisfaction of a stuttering (or plain) body under an assignment.

    ``assignment`` maps variables to ``PointedLasso``, ``(lasso, pos)`` or a
    bare ``Lasso`` (position 0).
    """
    ev = _StutterEvaluator(assignment)
    return ev.eval(psi, ev.start)


def eval_c_qf(psi: Formula, assignment: Mapping, context: Iterable[str] | None = None) -> bool:
    """Satisfaction of a context body; the default context is every bound variable."""
    ev = _ContextEvaluator(assignment)
    ctx = frozenset(ev.names if context is None else context)
    if not ctx:
        raise ValueError("the context must be nonempty")
    return ev.eval(psi, ev.start, ctx)


# -- lasso enumeration --------------------------------------------------------

def enumerate_lassos(K, fair: bool = True, max_stem: int = 3, max_loop: int = 2) -> Iterator[Lasso]:
    """Distinct traces of path lassos ``ρ·σ^ω`` of ``K``, shortest first."""
    if max_loop < 1:
        raise ValueError("max_loop must be at least 1")
    seen: set[Lasso] = set()
    succ = K.successors
    for total in range(1, max_stem + max_loop + 1):
        stack = [(s,) for s in K.initial]
        while stack:
            path = stack.pop()
            if len(path) < total:
                stack.extend(path + (t,) for t in reversed(succ[path[-1]]))
                continue
            last = path[-1]
            for loop_len in range(1, min(max_loop, total) + 1):
                stem_len = total - loop_len
                if stem_len > max_stem:
                    continue
                head = path[stem_len]
                if head not in succ[last]:
                    continue
                loop = path[stem_len:]
                if fair and not any(s in K.fair for s in loop):
                    continue
                w = Lasso(
                    tuple(K.label[s] for s in path[:stem_len]),
                    tuple(K.label[s] for s in loop),
                ).canonical()
                if w not in seen:
                    seen.add(w)
                    yield w


def align(lassos: Iterable[Lasso]) -> tuple[int, int]:
    """Common stem and loop lengths for reading lassos synchronously."""
    ws = list(lassos)
    stem = max((len(w.stem) for w in ws), default=0)
    loop = math.lcm(*(len(w.loop) for w in ws)) if ws else 1
    return stem, loop
