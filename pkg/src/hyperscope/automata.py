"""Büchi automata over (tuples of) letters, and their constructions.

Letters are ints.  For an alphabet with propositions ``props`` and arity
``n``, bit ``i * len(props) + k`` is proposition ``k`` of component ``i``.
Explicit transitions are labelled with cubes ``(mask, val)``: a letter
``a`` matches when ``a & mask == val``.

Every automaton exposes ``initial``, ``edges(q)``, ``post(q, letter)`` and
``is_accepting(q)``.  Most constructions are lazy: states are discovered
on demand by whoever explores them (emptiness, membership, ``explore``).
"""

from __future__ import annotations

import hashlib
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .syntax import (
    And, Atom, Context, Formula, Next, Not, Or, Prop, Release, Top, Until,
    show, walk,
)
from .traces import Lasso, align


class StateLimitExceeded(RuntimeError):
    """Raised when an exploration visits more states than allowed."""

    def __init__(self, limit: int, what: str = "automaton"):
        super().__init__(f"{what} exceeded the state limit of {limit}")
        self.limit = limit


# -- alphabets ----------------------------------------------------------------

@dataclass(frozen=True)
class Alphabet:
    props: tuple[str, ...]
    arity: int = 1

    @property
    def width(self) -> int:
        return len(self.props)

    @property
    def nbits(self) -> int:
        return self.width * self.arity

    @property
    def full_mask(self) -> int:
        return (1 << self.nbits) - 1

    @property
    def component_mask(self) -> int:
        return (1 << self.width) - 1

    def bit(self, prop: str, comp: int = 0) -> int | None:
        try:
            return comp * self.width + self.props.index(prop)
        except ValueError:
            return None

    def encode(self, letter: Iterable[str], comp: int = 0) -> int:
        out = 0
        for p in letter:
            b = self.bit(p, comp)
            if b is not None:
                out |= 1 << b
        return out

    def encode_tuple(self, letters: Sequence[Iterable[str]]) -> int:
        if len(letters) != self.arity:
            raise ValueError(f"expected {self.arity} components, got {len(letters)}")
        return sum(self.encode(a, i) for i, a in enumerate(letters))

    def component(self, letter: int, comp: int) -> int:
        return (letter >> (comp * self.width)) & self.component_mask

    def decode(self, letter: int) -> tuple[frozenset, ...]:
        return tuple(
            frozenset(p for k, p in enumerate(self.props) if letter >> (i * self.width + k) & 1)
            for i in range(self.arity)
        )

    def insert(self, letter: int, comp: int, value: int) -> int:
        """Widen a letter of arity ``n - 1`` by placing ``value`` at ``comp``."""
        cut = comp * self.width
        low = letter & ((1 << cut) - 1)
        high = letter >> cut
        return low | (value << cut) | (high << (cut + self.width))

    def remove(self, letter: int, comp: int) -> int:
        cut = comp * self.width
        low = letter & ((1 << cut) - 1)
        return low | ((letter >> (cut + self.width)) << cut)

    def all_letters(self) -> range:
        return range(1 << self.nbits)

    def with_arity(self, arity: int) -> "Alphabet":
        return Alphabet(self.props, arity)


def cube_meet(m1: int, v1: int, m2: int, v2: int) -> tuple[int, int] | None:
    if (v1 ^ v2) & m1 & m2:
        return None
    return m1 | m2, v1 | v2


# -- automaton protocol -------------------------------------------------------

class Nba:
    """A nondeterministic Büchi automaton (abstract protocol)."""

    alphabet: Alphabet
    initial: tuple

    def edges(self, q) -> Iterable[tuple[int, int, Hashable]]:
        raise NotImplementedError

    def post(self, q, letter: int) -> Iterable:
        return [t for m, v, t in self.edges(q) if letter & m == v]

    def is_accepting(self, q) -> bool:
        raise NotImplementedError


class ExplicitNba(Nba):
    def __init__(self, alphabet: Alphabet, initial: Iterable, delta: dict, accepting: Iterable):
        self.alphabet = alphabet
        self.initial = tuple(initial)
        self.delta = {q: tuple(es) for q, es in delta.items()}
        self.accepting = frozenset(accepting)

    @property
    def states(self) -> set:
        out = set(self.initial) | set(self.delta)
        for es in self.delta.values():
            out.update(t for _, _, t in es)
        return out

    def edges(self, q):
        return self.delta.get(q, ())

    def is_accepting(self, q) -> bool:
        return q in self.accepting


class LazyNba(Nba):
    """An NBA given by functions, with memoized edges."""

    def __init__(self, alphabet: Alphabet, initial: Iterable, edges: Callable, accepting: Callable):
        self.alphabet = alphabet
        self.initial = tuple(initial)
        self._edges = edges
        self._accepting = accepting
        self._cache: dict = {}

    def edges(self, q):
        out = self._cache.get(q)
        if out is None:
            out = self._cache[q] = tuple(self._edges(q))
        return out

    def is_accepting(self, q) -> bool:
        return self._accepting(q)


class LetterNba(Nba):
    """An NBA defined by a successor function over an explicit letter domain."""

    def __init__(self, alphabet: Alphabet, letters: Iterable[int], initial: Iterable,
                 post: Callable, accepting: Callable):
        self.alphabet = alphabet
        self.letters = tuple(letters)
        self.initial = tuple(initial)
        self._post = post
        self._accepting = accepting
        self._cache: dict = {}

    def post(self, q, letter: int):
        key = (q, letter)
        out = self._cache.get(key)
        if out is None:
            out = self._cache[key] = tuple(dict.fromkeys(self._post(q, letter)))
        return out

    def edges(self, q):
        full = self.alphabet.full_mask
        return [(full, a, t) for a in self.letters for t in self.post(q, a)]

    def is_accepting(self, q) -> bool:
        return self._accepting(q)


def explore(a: Nba, max_states: int | None = None) -> ExplicitNba:
    """Materialize the reachable part of an automaton."""
    delta: dict = {}
    queue = deque(dict.fromkeys(a.initial))
    seen = set(queue)
    while queue:
        q = queue.popleft()
        es = tuple(a.edges(q))
        delta[q] = es
        for _, _, t in es:
            if t not in seen:
                seen.add(t)
                if max_states is not None and len(seen) > max_states:
                    raise StateLimitExceeded(max_states)
                queue.append(t)
    return ExplicitNba(a.alphabet, a.initial, delta, {q for q in seen if a.is_accepting(q)})


def relabel(a: ExplicitNba) -> ExplicitNba:
    """Rename states to consecutive ints in breadth-first order."""
    order: dict = {}
    queue = deque()
    for q in a.initial:
        if q not in order:
            order[q] = len(order)
            queue.append(q)
    while queue:
        q = queue.popleft()
        for _, _, t in a.edges(q):
            if t not in order:
                order[t] = len(order)
                queue.append(t)
    delta = {order[q]: [(m, v, order[t]) for m, v, t in a.edges(q)] for q in order}
    return ExplicitNba(a.alphabet, [order[q] for q in a.initial], delta,
                       {order[q] for q in a.accepting if q in order})


# -- graph search -------------------------------------------------------------

def _sccs(nodes: Iterable, succ: Callable) -> Iterator[list]:
    """Tarjan's algorithm, iterative; yields SCCs in reverse topological order."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                yield comp


def _bfs_path(sources: Iterable, target: Callable, adj: dict, allowed=None):
    """Shortest labelled path from a source to a node satisfying ``target``."""
    parent: dict = {}
    queue = deque()
    for s in sources:
        if s not in parent:
            parent[s] = None
            queue.append(s)
    while queue:
        v = queue.popleft()
        if target(v):
            labels = []
            while parent[v] is not None:
                label, u = parent[v]
                labels.append(label)
                v = u
            return labels[::-1]
        for label, w in adj.get(v, ()):
            if allowed is not None and w not in allowed:
                continue
            if w not in parent:
                parent[w] = (label, v)
                queue.append(w)
    return None


def find_lasso(initial: Iterable, successors: Callable, accepting: Callable,
               max_states: int | None = None):
    """Search for a reachable accepting cycle.

    ``successors(v)`` yields ``(label, w)`` pairs.  Returns the label
    sequences ``(stem, loop)`` of a lasso through an accepting node, or None.
    """
    initial = list(dict.fromkeys(initial))
    adj: dict = {}

    def succ(v):
        out = adj.get(v)
        if out is None:
            out = adj[v] = list(successors(v))
            if max_states is not None and len(adj) > max_states:
                raise StateLimitExceeded(max_states)
        return [w for _, w in out]

    for comp in _sccs(initial, succ):
        members = set(comp)
        good = [v for v in comp if accepting(v)]
        if not good:
            continue
        if len(comp) == 1:
            v = comp[0]
            if not any(w == v for _, w in adj[v]):
                continue
        pivot = good[0]
        stem = _bfs_path(initial, lambda v: v == pivot, adj)
        loop = None
        for label, w in adj[pivot]:
            if w in members:
                rest = _bfs_path([w], lambda v: v == pivot, adj, members)
                if rest is not None and (loop is None or len(rest) + 1 < len(loop)):
                    loop = [label] + rest
        return stem, loop
    return None


@dataclass(frozen=True)
class Witness:
    """A lasso word accepted by an automaton, as letter ints."""

    alphabet: Alphabet
    stem: tuple[int, ...]
    loop: tuple[int, ...]

    def lassos(self) -> tuple[Lasso, ...]:
        stems = [self.alphabet.decode(a) for a in self.stem]
        loops = [self.alphabet.decode(a) for a in self.loop]
        return tuple(
            Lasso(tuple(s[i] for s in stems), tuple(l[i] for l in loops)).canonical()
            for i in range(self.alphabet.arity)
        )


def is_empty(a: Nba, max_states: int | None = None) -> Witness | None:
    """None when the language is empty, otherwise an accepted lasso word."""
    found = find_lasso(
        a.initial,
        lambda q: [(v, t) for _, v, t in a.edges(q)],
        a.is_accepting,
        max_states,
    )
    if found is None:
        return None
    return Witness(a.alphabet, tuple(found[0]), tuple(found[1]))


def lasso_letters(alphabet: Alphabet, word) -> tuple[list[int], list[int]]:
    """Synchronous letter ints for a lasso or a tuple of lassos."""
    ws = (word,) if isinstance(word, Lasso) else tuple(word)
    if len(ws) != alphabet.arity:
        raise ValueError(f"expected {alphabet.arity} traces, got {len(ws)}")
    stem, loop = align(ws)
    letters = [
        alphabet.encode_tuple([w.letter(i) for w in ws]) for i in range(stem + loop)
    ]
    return letters[:stem], letters[stem:]


def lasso_member(a: Nba, word, max_states: int | None = None) -> bool:
    stem, loop = lasso_letters(a.alphabet, word)
    letters = stem + loop
    s, n = len(stem), len(letters)

    def successors(node):
        q, i = node
        j = i + 1 if i + 1 < n else s
        return [(None, (t, j)) for t in a.post(q, letters[i])]

    init = [(q, 0) for q in a.initial]
    return find_lasso(init, successors, lambda v: a.is_accepting(v[0]), max_states) is not None


def trim(a: Nba, max_states: int | None = None) -> ExplicitNba:
    """Reachable states that can still reach an accepting cycle."""
    e = explore(a, max_states)
    succ = {q: [t for _, _, t in es] for q, es in e.delta.items()}
    live: set = set()
    good_comps = []
    for comp in _sccs(e.delta, lambda q: succ[q]):
        cyclic = len(comp) > 1 or comp[0] in succ[comp[0]]
        if cyclic and any(q in e.accepting for q in comp):
            good_comps.append(comp)
    pred: dict = {q: [] for q in e.delta}
    for q, ts in succ.items():
        for t in ts:
            pred[t].append(q)
    queue = deque(q for comp in good_comps for q in comp)
    live.update(queue)
    while queue:
        q = queue.popleft()
        for p in pred[q]:
            if p not in live:
                live.add(p)
                queue.append(p)
    delta = {q: [(m, v, t) for m, v, t in es if t in live] for q, es in e.delta.items() if q in live}
    return ExplicitNba(a.alphabet, [q for q in e.initial if q in live], delta,
                       e.accepting & live)


def dump_nba(a: Nba, max_states: int | None = 100_000) -> str:
    """Deterministic text listing of the reachable part."""
    e = relabel(explore(a, max_states))
    al = e.alphabet

    def cube(m, v):
        if m == 0:
            return "true"
        parts = []
        for i in range(al.arity):
            for k, p in enumerate(al.props):
                b = i * al.width + k
                if m >> b & 1:
                    name = p if al.arity == 1 else f"{p}[{i}]"
                    parts.append(name if v >> b & 1 else "!" + name)
        return " & ".join(parts)

    lines = [
        f"nba props={','.join(al.props)} arity={al.arity} states={len(e.delta)}",
        "init " + " ".join(str(q) for q in sorted(e.initial)),
        "accepting " + " ".join(str(q) for q in sorted(e.accepting)),
    ]
    for q in sorted(e.delta):
        for m, v, t in sorted(e.delta[q], key=lambda x: (x[2], x[0], x[1])):
            lines.append(f"{q} -> {t} : {cube(m, v)}")
    return "\n".join(lines) + "\n"


def to_dot(a: Nba, max_states: int | None = 10_000) -> str:
    e = relabel(explore(a, max_states))
    out = ["digraph nba {", "  rankdir=LR;"]
    for q in sorted(e.delta):
        shape = "doublecircle" if q in e.accepting else "circle"
        out.append(f'  {q} [shape={shape}];')
    for q in e.initial:
        out.append(f'  init{q} [shape=point]; init{q} -> {q};')
    for q in sorted(e.delta):
        for m, v, t in e.delta[q]:
            out.append(f'  {q} -> {t} [label="{m:x}/{v:x}"];')
    out.append("}")
    return "\n".join(out) + "\n"


# -- LTL to automata ------------------------------------------------------------

def core_form(f: Formula) -> Formula:
    """Rewrite into true, leaves, not, and, next and until."""
    if isinstance(f, (Top, Prop, Atom)):
        return f
    if isinstance(f, Not):
        inner = core_form(f.arg)
        return inner.arg if isinstance(inner, Not) else Not(inner)
    if isinstance(f, And):
        return And(core_form(f.left), core_form(f.right))
    if isinstance(f, Or):
        return _cnot(And(_cnot(core_form(f.left)), _cnot(core_form(f.right))))
    if isinstance(f, Context):
        raise ValueError("context modalities have no synchronous automaton")
    if f.gamma:
        raise ValueError("subscripted modalities have no synchronous automaton")
    if isinstance(f, Next):
        return Next(core_form(f.arg))
    if isinstance(f, Until):
        return Until(core_form(f.left), core_form(f.right))
    if isinstance(f, Release):
        return _cnot(Until(_cnot(core_form(f.left)), _cnot(core_form(f.right))))
    raise TypeError(f"not a formula: {f!r}")


def _cnot(f: Formula) -> Formula:
    return f.arg if isinstance(f, Not) else Not(f)


@dataclass
class Gnba:
    """Generalized Büchi automaton with source-labelled transitions."""

    alphabet: Alphabet
    initial: tuple
    succ: dict
    label: dict
    acceptance: list

    @property
    def states(self):
        return list(self.succ)


def _closure_order(roots: Iterable[Formula]) -> list[Formula]:
    order: list[Formula] = []
    seen: set = set()

    def visit(f):
        if f in seen:
            return
        seen.add(f)
        for c in (f.arg,) if isinstance(f, (Not, Next)) else (
            (f.left, f.right) if isinstance(f, (And, Until)) else ()
        ):
            visit(c)
        order.append(f)

    for r in roots:
        visit(r)
    return order


def tableau(roots: Sequence[Formula], alphabet: Alphabet, bit_of: Callable,
            initial: Formula | None = None, labels: Sequence[tuple[Formula, int]] = ()) -> Gnba:
    """Atom construction over the closure of ``roots`` (core-form formulas).

    ``bit_of`` maps a leaf to its letter bit (None: the leaf is always
    false).  ``labels`` adds extra letter bits set exactly when a closure
    formula holds.  Initial atoms satisfy ``initial`` (all atoms if None).
    """
    roots = list(roots) + ([initial] if initial is not None else []) + [f for f, _ in labels]
    order = _closure_order(roots)
    elementary = [f for f in order if isinstance(f, (Prop, Atom, Next, Until))]
    pos = {f: k for k, f in enumerate(elementary)}
    leaves = [f for f in elementary if isinstance(f, (Prop, Atom))]
    nexts = [f for f in elementary if isinstance(f, Next)]
    untils = [f for f in elementary if isinstance(f, Until)]
    leaf_bits = [bit_of(f) for f in leaves]
    if len(elementary) > 22:
        raise StateLimitExceeded(1 << 22, "tableau")

    def evaluate(atom: int) -> dict:
        val: dict = {}
        for f in order:
            if isinstance(f, Top):
                val[f] = True
            elif f in pos:
                val[f] = bool(atom >> pos[f] & 1)
            elif isinstance(f, Not):
                val[f] = not val[f.arg]
            elif isinstance(f, And):
                val[f] = val[f.left] and val[f.right]
        return val

    atoms: dict[int, dict] = {}
    for atom in range(1 << len(elementary)):
        if any(b is None and atom >> pos[l] & 1 for l, b in zip(leaves, leaf_bits)):
            continue
        val = evaluate(atom)
        ok = True
        for u in untils:
            if val[u.right] and not val[u]:
                ok = False
            elif not val[u.left] and not val[u.right] and val[u]:
                ok = False
        if ok:
            atoms[atom] = val

    by_next: dict = {}
    for atom, val in atoms.items():
        by_next.setdefault(tuple(val[g.arg] for g in nexts), []).append(atom)

    succ: dict = {}
    label: dict = {}
    for atom, val in atoms.items():
        want = tuple(val[g] for g in nexts)
        pending = [(u, val[u]) for u in untils if val[u.left] and not val[u.right]]
        succ[atom] = tuple(
            t for t in by_next.get(want, ())
            if all(atoms[t][u] == v for u, v in pending)
        )
        mask = value = 0
        for l, b in zip(leaves, leaf_bits):
            if b is not None:
                mask |= 1 << b
                if val[l]:
                    value |= 1 << b
        for f, b in labels:
            mask |= 1 << b
            if val[f]:
                value |= 1 << b
        label[atom] = (mask, value)

    init = tuple(a for a, v in atoms.items() if initial is None or v[initial])
    acceptance = [frozenset(a for a, v in atoms.items() if not v[u] or v[u.right]) for u in untils]
    return Gnba(alphabet, init, succ, label, acceptance)


def degeneralize(g: Gnba) -> ExplicitNba:
    """Counter construction; with no acceptance sets every state accepts."""
    k = len(g.acceptance)
    delta: dict = {}
    queue = deque((q, 0) for q in g.initial)
    seen = set(queue)
    while queue:
        q, i = queue.popleft()
        j = (i + 1) % k if k and q in g.acceptance[i] else i
        m, v = g.label[q]
        es = []
        for t in g.succ[q]:
            es.append((m, v, (t, j)))
            if (t, j) not in seen:
                seen.add((t, j))
                queue.append((t, j))
        delta[(q, i)] = es
    accepting = {s for s in seen if not k or (s[1] == 0 and s[0] in g.acceptance[0])}
    return ExplicitNba(g.alphabet, [(q, 0) for q in g.initial], delta, accepting)


def ltl_to_gnba(theta: Formula, props: Sequence[str] | None = None) -> Gnba:
    """GNBA for an LTL formula over ``props`` (default: its own propositions)."""
    if props is None:
        props = sorted({g.name for g in walk(theta) if isinstance(g, Prop)})
    alphabet = Alphabet(tuple(props))
    core = core_form(theta)
    return tableau([core], alphabet, lambda leaf: alphabet.bit(leaf.name), initial=core)


def ltl_to_nba(theta: Formula, props: Sequence[str] | None = None) -> LazyNba:
    if props is None:
        props = sorted({g.name for g in walk(theta) if isinstance(g, Prop)})
    alphabet = Alphabet(tuple(props))
    return expansion_nba(theta, alphabet, lambda leaf: alphabet.bit(leaf.name))


def _nnf_ltl(f: Formula) -> Formula:
    if isinstance(f, Not):
        g = f.arg
        if isinstance(g, (Top, Prop, Atom)):
            return f
        if isinstance(g, Not):
            return _nnf_ltl(g.arg)
        if isinstance(g, And):
            return Or(_nnf_ltl(Not(g.left)), _nnf_ltl(Not(g.right)))
        if isinstance(g, Or):
            return And(_nnf_ltl(Not(g.left)), _nnf_ltl(Not(g.right)))
        if isinstance(g, Next):
            return Next(_nnf_ltl(Not(g.arg)))
        if isinstance(g, Until):
            return Release(_nnf_ltl(Not(g.left)), _nnf_ltl(Not(g.right)))
        if isinstance(g, Release):
            return Until(_nnf_ltl(Not(g.left)), _nnf_ltl(Not(g.right)))
    elif isinstance(f, (Top, Prop, Atom)):
        return f
    elif isinstance(f, (And, Or)):
        return type(f)(_nnf_ltl(f.left), _nnf_ltl(f.right))
    elif isinstance(f, Next) and not f.gamma:
        return Next(_nnf_ltl(f.arg))
    elif isinstance(f, (Until, Release)) and not f.gamma:
        return type(f)(_nnf_ltl(f.left), _nnf_ltl(f.right))
    if isinstance(f, Context) or isinstance(f, (Next, Until, Release)):
        raise ValueError("only plain temporal operators have a synchronous automaton")
    raise TypeError(f"not a formula: {f!r}")


def expansion_nba(theta: Formula, alphabet: Alphabet, bit_of: Callable) -> LazyNba:
    """On-the-fly tableau: states are sets of obligations for the current position.

    Each state expands into cubes of literals plus obligations for the next
    position.  An expansion is bad for an until when it postpones it; the
    generalized condition is degeneralized with a counter, and a state
    ``(obligations, i, done)`` is accepting when the step into it finished
    a round.
    """
    root = _nnf_ltl(theta)
    untils = sorted({g for g in walk(root) if isinstance(g, Until)}, key=show)
    k = len(untils)
    memo: dict = {}

    def expand(goals: frozenset) -> list:
        out = memo.get(goals)
        if out is not None:
            return out
        results: dict = {}  # ordered set of expansions

        def go(todo, mask, val, nxt, postponed, done):
            while todo:
                f = todo.pop()
                if f in done:
                    continue
                done = done | {f}
                if isinstance(f, Top):
                    continue
                if isinstance(f, Not) and isinstance(f.arg, Top):
                    return
                if isinstance(f, (Prop, Atom)) or isinstance(f, Not):
                    leaf = f.arg if isinstance(f, Not) else f
                    b = bit_of(leaf)
                    want = not isinstance(f, Not)
                    if b is None:
                        if want:
                            return
                        continue
                    if mask >> b & 1:
                        if bool(val >> b & 1) != want:
                            return
                        continue
                    mask |= 1 << b
                    if want:
                        val |= 1 << b
                    continue
                if isinstance(f, And):
                    todo = todo + [f.left, f.right]
                elif isinstance(f, Next):
                    nxt = nxt | {f.arg}
                elif isinstance(f, Or):
                    go(todo + [f.left], mask, val, nxt, postponed, done)
                    todo = todo + [f.right]
                elif isinstance(f, Until):
                    go(todo + [f.right], mask, val, nxt, postponed, done)
                    todo = todo + [f.left]
                    nxt = nxt | {f}
                    postponed = postponed | {f}
                elif isinstance(f, Release):
                    go(todo + [f.left, f.right], mask, val, nxt, postponed, done)
                    todo = todo + [f.right]
                    nxt = nxt | {f}
            results[(mask, val, frozenset(nxt), frozenset(postponed))] = None

        go(list(goals), 0, 0, frozenset(), frozenset(), frozenset())
        out = memo[goals] = list(results)
        return out

    def edges(state):
        goals, i, _ = state
        for mask, val, nxt, post in expand(goals):
            if k == 0:
                yield mask, val, (nxt, 0, True)
                continue
            j = i
            while j < k and untils[j] not in post:
                j += 1
            yield mask, val, ((nxt, 0, True) if j == k else (nxt, j, False))

    return LazyNba(alphabet, [(frozenset({root}), 0, False)], edges, lambda s: s[2])


def at_name(theta: Formula) -> str:
    """Stable fresh proposition name standing for the truth of ``theta``."""
    if isinstance(theta, Prop):
        return theta.name
    digest = hashlib.sha1(show(theta).encode()).hexdigest()[:8]
    return f"__at_{digest}"


def a_gamma(gamma: Iterable[Formula], ap: Sequence[str]) -> tuple[ExplicitNba, dict[Formula, str]]:
    """NBA annotating every trace over ``ap`` with the truth of each formula in ``gamma``.

    Returns the automaton over ``ap`` plus one fresh proposition per
    non-propositional formula, and the map from formula to its proposition.
    """
    gamma = sorted(set(gamma), key=show)
    if not gamma:
        raise ValueError("the subscript set must be nonempty")
    names = {theta: at_name(theta) for theta in gamma}
    extra = sorted({n for t, n in names.items() if not isinstance(t, Prop)} - set(ap))
    alphabet = Alphabet(tuple(ap) + tuple(extra))
    props = [Prop(p) for p in ap]
    labels = [(core_form(t), alphabet.bit(names[t])) for t in gamma if not isinstance(t, Prop)]
    g = tableau(props + [core_form(t) for t in gamma], alphabet,
                lambda leaf: alphabet.bit(leaf.name), labels=labels)
    return degeneralize(g), names


# -- products -------------------------------------------------------------------

def _flag_step(flag: int, left_acc: bool, right_acc: bool) -> int:
    if flag == 0 and left_acc:
        return 1
    if flag == 1 and right_acc:
        return 0
    return flag


def intersect(a: Nba, b: Nba) -> Nba:
    if a.alphabet != b.alphabet:
        raise ValueError("intersect needs equal alphabets")

    def edges(state):
        qa, qb, flag = state
        nf = _flag_step(flag, a.is_accepting(qa), b.is_accepting(qb))
        for m1, v1, t1 in a.edges(qa):
            for m2, v2, t2 in b.edges(qb):
                c = cube_meet(m1, v1, m2, v2)
                if c is not None:
                    yield c[0], c[1], (t1, t2, nf)

    init = [(p, q, 0) for p in a.initial for q in b.initial]
    return LazyNba(a.alphabet, init, edges,
                   lambda s: s[2] == 1 and b.is_accepting(s[1]))


def project(a: Nba, drop: int, restrict_to: Nba) -> Nba:
    """Existentially quantify component ``drop`` over words of ``restrict_to``."""
    al = a.alphabet
    if al.arity < 2:
        raise ValueError("projection needs arity at least 2")
    if restrict_to.alphabet != Alphabet(al.props, 1):
        raise ValueError("restrict_to must read single letters over the same propositions")
    if not 0 <= drop < al.arity:
        raise ValueError(f"component {drop} out of range")
    out_alpha = al.with_arity(al.arity - 1)
    shift = drop * al.width

    def edges(state):
        qa, qr, flag = state
        nf = _flag_step(flag, a.is_accepting(qa), restrict_to.is_accepting(qr))
        for m1, v1, t1 in a.edges(qa):
            for m2, v2, t2 in restrict_to.edges(qr):
                c = cube_meet(m1, v1, m2 << shift, v2 << shift)
                if c is not None:
                    yield al.remove(c[0], drop), al.remove(c[1], drop), (t1, t2, nf)

    init = [(p, q, 0) for p in a.initial for q in restrict_to.initial]
    return LazyNba(out_alpha, init, edges,
                   lambda s: s[2] == 1 and restrict_to.is_accepting(s[1]))


def restrict(a: Nba, comp: int, restrict_to: Nba) -> Nba:
    """Keep the words of ``a`` whose component ``comp`` is a word of ``restrict_to``."""
    al = a.alphabet
    if restrict_to.alphabet != Alphabet(al.props, 1):
        raise ValueError("restrict_to must read single letters over the same propositions")
    if not 0 <= comp < al.arity:
        raise ValueError(f"component {comp} out of range")
    shift = comp * al.width

    def edges(state):
        qa, qr, flag = state
        nf = _flag_step(flag, a.is_accepting(qa), restrict_to.is_accepting(qr))
        for m1, v1, t1 in a.edges(qa):
            for m2, v2, t2 in restrict_to.edges(qr):
                c = cube_meet(m1, v1, m2 << shift, v2 << shift)
                if c is not None:
                    yield c[0], c[1], (t1, t2, nf)

    init = [(p, q, 0) for p in a.initial for q in restrict_to.initial]
    return LazyNba(al, init, edges,
                   lambda s: s[2] == 1 and restrict_to.is_accepting(s[1]))


def universal(alphabet: Alphabet) -> ExplicitNba:
    return ExplicitNba(alphabet, [0], {0: [(0, 0, 0)]}, [0])


def empty_nba(alphabet: Alphabet) -> ExplicitNba:
    return ExplicitNba(alphabet, [], {}, [])


# -- complementation ---------------------------------------------------------------

def _post_set(a: Nba, states: Iterable, letter: int) -> frozenset:
    out = set()
    for q in states:
        out.update(a.post(q, letter))
    return frozenset(out)


def complement_nba(a: Nba, letters: Iterable[int] | None = None) -> LetterNba:
    """Rank-based complement (level rankings bounded by ``2|Q|``).

    States are ``(ranking, obligations)``; ``ranking`` is a sorted tuple of
    (state, rank) pairs and accepting states of ``a`` get even ranks only.
    The result reads the given letter domain (all letters by default) and
    accepts exactly the words over it that ``a`` rejects.
    """
    letters = tuple(a.alphabet.all_letters() if letters is None else letters)
    e = explore(a)
    top = 2 * max(1, len(e.states))
    init_rank = tuple(sorted(((q, top) for q in set(a.initial)), key=repr))

    def post(state, letter):
        ranking, obligations = state
        bound: dict = {}
        for q, r in ranking:
            for t in a.post(q, letter):
                bound[t] = min(bound.get(t, r), r)
        targets = sorted(bound, key=repr)
        choices = [
            [r for r in range(bound[t] + 1) if r % 2 == 0 or not a.is_accepting(t)]
            for t in targets
        ]
        for ranks in itertools.product(*choices):
            new = dict(zip(targets, ranks))
            even = {t for t, r in new.items() if r % 2 == 0}
            if obligations:
                o2 = _post_set(a, obligations, letter) & even
            else:
                o2 = even
            yield tuple((t, new[t]) for t in targets), frozenset(o2)

    return LetterNba(a.alphabet, letters, [(init_rank, frozenset())], post,
                     lambda s: not s[1])


# Safra trees: nodes are (name, label, children) with children ordered
# oldest first.  Names are compacted after every step.

def _safra_step(a: Nba, tree, letter: int, fresh_base: int):
    if tree is None:
        return None, None
    counter = itertools.count(fresh_base)

    def advance(node):
        name, label, kids = node
        label = _post_set(a, label, letter)
        kids = [advance(k) for k in kids]
        acc = frozenset(q for q in label if a.is_accepting(q))
        if acc:
            kids.append([next(counter), acc, []])
        return [name, label, kids]

    root = advance(tree)
    events: list[int] = []

    def merge(node, banned):
        node[1] = node[1] - banned
        seen = set(banned)
        for k in node[2]:
            merge(k, frozenset(seen))
            seen |= k[1]

    merge(root, frozenset())

    def names(node):
        yield node[0]
        for k in node[2]:
            yield from names(k)

    def prune(node):
        alive = []
        for k in node[2]:
            if k[1]:
                prune(k)
                alive.append(k)
            else:
                events.extend(2 * n - 1 for n in names(k))
        node[2] = alive
        if node[2] and frozenset().union(*(k[1] for k in node[2])) == node[1]:
            for k in node[2]:
                events.extend(2 * n - 1 for n in names(k))
            node[2] = []
            events.append(2 * node[0])

    if not root[1]:
        events.extend(2 * n - 1 for n in names(root))
        return None, min(events)
    prune(root)
    order = sorted(names(root))
    rename = {n: i + 1 for i, n in enumerate(order)}

    def freeze(node):
        return (rename[node[0]], node[1], tuple(freeze(k) for k in node[2]))

    return freeze(root), (min(events) if events else None)


class SafraDpa:
    """Deterministic parity automaton (min-even acceptance) equivalent to ``a``."""

    def __init__(self, a: Nba):
        self.nba = a
        self.alphabet = a.alphabet
        init = frozenset(a.initial)
        self.initial = (1, init, ()) if init else None
        self._cache: dict = {}
        self.neutral: int | None = None

    def set_bound(self, n_states: int) -> None:
        self.neutral = 4 * max(1, n_states) + 1

    def step(self, tree, letter: int):
        key = (tree, letter)
        out = self._cache.get(key)
        if out is None:
            fresh = 1 + max(self._names(tree), default=0)
            nxt, pri = _safra_step(self.nba, tree, letter, fresh)
            out = self._cache[key] = (nxt, pri)
        return out

    @staticmethod
    def _names(tree):
        if tree is None:
            return
        stack = [tree]
        while stack:
            n = stack.pop()
            yield n[0]
            stack.extend(n[2])


def dpa_accepts(dpa: SafraDpa, letters: Sequence[int], loop_start: int) -> bool:
    """Run the parity automaton on a lasso word of letter ints."""
    seen: dict = {}
    history: list = []
    tree, i = dpa.initial, 0
    n = len(letters)
    while (tree, i) not in seen:
        seen[(tree, i)] = len(history)
        nxt, pri = dpa.step(tree, letters[i])
        history.append(pri)
        tree, i = nxt, (i + 1 if i + 1 < n else loop_start)
    cycle = [p for p in history[seen[(tree, i)]:] if p is not None]
    return bool(cycle) and min(cycle) % 2 == 0


def complement_safra(a: Nba, letters: Iterable[int] | None = None) -> LetterNba:
    """Complement through determinization into a parity automaton.

    The NBA waits, then guesses an odd priority ``p`` that must be the
    least priority seen infinitely often.
    """
    letters = tuple(a.alphabet.all_letters() if letters is None else letters)
    dpa = SafraDpa(a)
    n_states = len(explore(a).states)
    dpa.set_bound(n_states)
    odd = range(1, dpa.neutral + 1, 2)

    def level(pri):
        return dpa.neutral if pri is None else pri

    def post(state, letter):
        if state[0] == "wait":
            nxt, _ = dpa.step(state[1], letter)
            yield ("wait", nxt)
            for p in odd:
                yield ("commit", nxt, p, False)
        else:
            _, tree, p, _ = state
            nxt, pri = dpa.step(tree, letter)
            lv = level(pri)
            if lv >= p:
                yield ("commit", nxt, p, lv == p)

    return LetterNba(a.alphabet, letters, [("wait", dpa.initial)], post,
                     lambda s: s[0] == "commit" and s[3])


# -- alternating automata --------------------------------------------------------------

# A positive Boolean formula is stored as its set of minimal models.
Pbf = frozenset
PTRUE: Pbf = frozenset({frozenset()})
PFALSE: Pbf = frozenset()


def _minimize(models: Iterable[frozenset]) -> Pbf:
    ms = sorted(set(models), key=len)
    out: list[frozenset] = []
    for m in ms:
        if not any(k <= m for k in out):
            out.append(m)
    return frozenset(out)


def patom(x) -> Pbf:
    return frozenset({frozenset({x})})


def por(*fs: Pbf) -> Pbf:
    return _minimize(m for f in fs for m in f)


def pand(*fs: Pbf) -> Pbf:
    acc = PTRUE
    for f in fs:
        acc = _minimize(m | k for m in acc for k in f)
        if not acc:
            return PFALSE
    return acc


def psubst(f: Pbf, fn: Callable[[object], Pbf]) -> Pbf:
    return por(*(pand(*(fn(x) for x in m)) for m in f))


class Aba:
    """Alternating Büchi automaton over a finite letter domain."""

    def __init__(self, alphabet: Alphabet, letters: Iterable[int], initial,
                 delta: Callable, accepting: Callable):
        self.alphabet = alphabet
        self.letters = tuple(letters)
        self.initial = initial
        self._delta = delta
        self._accepting = accepting
        self._cache: dict = {}

    def delta(self, q, letter: int) -> Pbf:
        key = (q, letter)
        out = self._cache.get(key)
        if out is None:
            out = self._cache[key] = self._delta(q, letter)
        return out

    def is_accepting(self, q) -> bool:
        return self._accepting(q)


def mh_dealternate(aba: Aba) -> LetterNba:
    """Miyano-Hayashi breakpoint construction: states ``(S, O)``."""

    def post(state, letter):
        current, owing = state
        choices = {(frozenset(), frozenset())}
        for q in current:
            models = aba.delta(q, letter)
            if not models:
                return
            owes = q in owing
            choices = {
                (s | m, o | m if owes else o) for s, o in choices for m in models
            }
        for s, o in choices:
            base = o if owing else s
            yield s, frozenset(q for q in base if not aba.is_accepting(q))

    return LetterNba(aba.alphabet, aba.letters, [(frozenset({aba.initial}), frozenset())],
                     post, lambda s: not s[1])


@dataclass
class NAawa:
    """Asynchronous alternating automaton over ``arity`` words.

    ``delta(q, letter)`` returns a Pbf over ``(state, direction)`` pairs,
    directions ``0 .. arity - 1``; ``letter`` is the tuple letter at the
    current positions.
    """

    alphabet: Alphabet
    initial: Hashable
    delta_fn: Callable
    accepting_fn: Callable
    states_hint: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def arity(self) -> int:
        return self.alphabet.arity

    def delta(self, q, letter: int) -> Pbf:
        key = (q, letter)
        out = self._cache.get(key)
        if out is None:
            out = self._cache[key] = self.delta_fn(q, letter)
        return out

    def is_accepting(self, q) -> bool:
        return self.accepting_fn(q)


def _check_arity(A: NAawa, lassos) -> tuple[Lasso, ...]:
    ws = tuple(lassos)
    if len(ws) != A.arity:
        raise ValueError(f"automaton reads {A.arity} traces, got {len(ws)}")
    return ws


def configuration_aba(A: NAawa, lassos) -> Aba:
    """One-letter alternating automaton over configurations ``(q, class vector)``."""
    ws = _check_arity(A, lassos)
    al = A.alphabet

    def delta(config, _letter):
        q, vec = config
        letter = al.encode_tuple([w.at_cls(c) for w, c in zip(ws, vec)])

        def move(atom):
            q2, d = atom
            v2 = vec[:d] + (ws[d].next_cls(vec[d]),) + vec[d + 1:]
            return patom((q2, v2))

        return psubst(A.delta(q, letter), move)

    start = (A.initial, tuple(0 for _ in ws))
    return Aba(Alphabet((), 1), [0], start, delta, lambda c: A.is_accepting(c[0]))


def solve_buchi_game(aba: Aba, max_states: int | None = None) -> bool:
    """Decide acceptance of a one-letter alternating automaton as a Büchi game.

    The existential player picks a minimal model, the universal player a
    state in it; an empty model is a win and no model a loss for the
    existential player.
    """
    WIN, LOSE = ("win",), ("lose",)
    succ: dict = {}
    owner: dict = {}
    good: set = {WIN}
    queue = deque([aba.initial])
    seen = {aba.initial}
    succ[WIN], succ[LOSE] = [WIN], [LOSE]
    owner[WIN] = owner[LOSE] = 0
    while queue:
        c = queue.popleft()
        owner[c] = 0
        if aba.is_accepting(c):
            good.add(c)
        models = aba.delta(c, 0)
        if not models:
            succ[c] = [LOSE]
            continue
        succ[c] = []
        for m in models:
            node = ("model", m)
            succ[c].append(node)
            if node in succ:
                continue
            owner[node] = 1
            succ[node] = list(m) if m else [WIN]
            for t in m:
                if t not in seen:
                    seen.add(t)
                    if max_states is not None and len(seen) > max_states:
                        raise StateLimitExceeded(max_states)
                    queue.append(t)
    arena = set(succ)
    pred: dict = {v: [] for v in arena}
    for v, ws in succ.items():
        for w in ws:
            pred[w].append(v)

    def attractor(player: int, target: set, within: set) -> set:
        attr = set(target)
        count = {v: sum(1 for w in succ[v] if w in within) for v in within}
        queue = deque(attr)
        while queue:
            w = queue.popleft()
            for v in pred[w]:
                if v not in within or v in attr:
                    continue
                if owner[v] == player:
                    attr.add(v)
                    queue.append(v)
                else:
                    count[v] -= 1
                    if count[v] == 0:
                        attr.add(v)
                        queue.append(v)
        return attr

    while True:
        reach = attractor(0, good & arena, arena)
        trap = arena - reach
        if not trap:
            break
        arena -= attractor(1, trap, arena)
        if aba.initial not in arena:
            return False
    return aba.initial in arena


def aawa_accepts_lasso(A: NAawa, lassos, method: str = "game",
                       max_states: int | None = None) -> bool:
    """Whether the alternating asynchronous automaton accepts the lasso tuple."""
    aba = configuration_aba(A, lassos)
    if method == "game":
        return solve_buchi_game(aba, max_states)
    if method != "mh":
        raise ValueError(f"unknown method {method!r}")
    return is_empty(mh_dealternate(aba), max_states) is not None


def max_offset(A: NAawa, lassos, limit: int, max_states: int = 200_000) -> int:
    """Largest spread ``max p - min p`` over reachable run configurations.

    Stops early (returning a value above ``limit``) once the spread exceeds it.
    """
    ws = _check_arity(A, lassos)
    al = A.alphabet
    start = (A.initial, tuple(0 for _ in ws), tuple(0 for _ in ws))
    seen = {start}
    queue = deque([start])
    worst = 0
    while queue:
        q, off, vec = queue.popleft()
        letter = al.encode_tuple([w.at_cls(c) for w, c in zip(ws, vec)])
        for model in A.delta(q, letter):
            for q2, d in model:
                o2 = list(off)
                o2[d] += 1
                low = min(o2)
                o2 = tuple(o - low for o in o2)
                worst = max(worst, max(o2))
                if worst > limit:
                    return worst
                v2 = vec[:d] + (ws[d].next_cls(vec[d]),) + vec[d + 1:]
                node = (q2, o2, v2)
                if node not in seen:
                    seen.add(node)
                    if len(seen) > max_states:
                        raise StateLimitExceeded(max_states)
                    queue.append(node)
    return worst


def _show_state(q) -> str:
    if isinstance(q, Formula):
        return show(q)
    if isinstance(q, (tuple, list)):
        return "(" + ", ".join(_show_state(x) for x in q) + ")"
    if isinstance(q, frozenset):
        return "{" + ", ".join(sorted(_show_state(x) for x in q)) + "}"
    return str(q)


def dump_aawa(A: NAawa, window: int | None = None, max_states: int = 10_000) -> str:
    """Deterministic listing of the states reachable from the initial one.

    Each line gives a transition as a disjunction of conjunctions of
    ``state@direction`` pairs; letters with a false transition are omitted.
    """
    al = A.alphabet
    index = {A.initial: 0}
    order = [A.initial]
    rows = []
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for letter in range(1 << al.nbits):
            f = A.delta(q, letter)
            if not f:
                continue
            for model in f:
                for q2, _ in model:
                    if q2 not in index:
                        if len(order) >= max_states:
                            raise StateLimitExceeded(max_states)
                        index[q2] = len(order)
                        order.append(q2)
            rows.append((index[q], letter, f))

    def letter_text(a):
        comps = al.decode(a)
        return " ".join("{" + " ".join(sorted(c)) + "}" for c in comps)

    def pbf_text(f):
        if f == PTRUE:
            return "true"
        models = sorted(sorted((index[q], d) for q, d in m) for m in f)
        terms = [" & ".join(f"{q}@{d}" for q, d in m) for m in models]
        return " | ".join(f"({t})" if len(terms) > 1 and " & " in t else t for t in terms)

    head = f"aawa props={','.join(al.props)} arity={al.arity} states={len(order)}"
    if window is not None:
        head += f" k={window}"
    lines = [head, "init 0",
             " ".join(["accepting"] + [str(index[q]) for q in order if A.is_accepting(q)])]
    lines += [f"state {index[q]} = {_show_state(q)}" for q in order]
    lines += [f"{src} : {letter_text(a)} -> {pbf_text(f)}" for src, a, f in rows]
    return "\n".join(lines) + "\n"


def window_aba(A: NAawa, k: int, letters: Iterable[int] | None = None) -> Aba:
    """Synchronous alternating automaton for a ``k``-synchronous ``A``.

    A state ``(q, lags, buffers, seen)`` stands for ``q`` at positions
    ``t - lags[j]`` while the head is at ``t``; ``buffers[j]`` holds the
    component-``j`` letters from that position up to ``t - 1``.  Reading
    the letter at ``t`` fires every micro-step that has its letters, until
    each branch waits for position ``t + 1``; a lag above ``k`` kills the
    branch.  ``seen`` records whether the fired steps met an accepting state.
    """
    al = A.alphabet
    n = al.arity
    letters = tuple(al.all_letters() if letters is None else letters)

    def delta(state, letter):
        q, lags, bufs, _ = state
        avail = [bufs[j] + (al.component(letter, j),) for j in range(n)]
        memo: dict = {}

        def fire(q, rel, seen):
            key = (q, rel, seen)
            if key in memo:
                return memo[key]
            tuple_letter = 0
            for j in range(n):
                tuple_letter |= avail[j][lags[j] + rel[j]] << (j * al.width)
            seen2 = seen or A.is_accepting(q)

            def move(atom):
                q2, d = atom
                rel2 = rel[:d] + (rel[d] + 1,) + rel[d + 1:]
                if rel2[d] < 1:
                    return fire(q2, rel2, seen2)
                lags2 = tuple(1 - r for r in rel2)
                if max(lags2) > k:
                    return PFALSE
                bufs2 = tuple(
                    avail[j][lags[j] + rel2[j]:] if rel2[j] < 1 else ()
                    for j in range(n)
                )
                return patom((q2, lags2, bufs2, seen2))

            out = memo[key] = psubst(A.delta(q, tuple_letter), move)
            return out

        return fire(q, tuple(-l for l in lags), False)

    init = (A.initial, (0,) * n, ((),) * n, False)
    return Aba(al, letters, init, delta, lambda s: s[3])
