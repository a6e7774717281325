"""Fair Kripke structures and the structure-level reductions built on them."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Mapping

from .automata import Alphabet, ExplicitNba, _sccs, a_gamma
from .syntax import (
    Atom, Formula, HyperSentence, Next, Not, Or, Prop, always, conj, disj,
    eventually, has_context, has_subscripts, iff, implies, map_formula,
)


class KripkeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FairKripke:
    """States, initial states, a total edge relation, labels and fair states."""

    aps: tuple[str, ...]
    states: tuple[Hashable, ...]
    initial: frozenset
    edges: frozenset
    label: Mapping[Hashable, frozenset]
    fair: frozenset

    def __post_init__(self):
        known = set(self.states)
        if len(known) != len(self.states):
            raise KripkeError("duplicate state names")
        if not self.states:
            raise KripkeError("a Kripke structure needs at least one state")
        for s, t in self.edges:
            if s not in known or t not in known:
                raise KripkeError(f"edge {s}->{t} mentions an unknown state")
        for group, what in ((self.initial, "initial"), (self.fair, "fair")):
            bad = set(group) - known
            if bad:
                raise KripkeError(f"unknown {what} state(s): {sorted(map(str, bad))}")
        labels = {s: frozenset(self.label.get(s, ())) for s in self.states}
        for s, lab in labels.items():
            extra = lab - set(self.aps)
            if extra:
                raise KripkeError(f"label of {s} uses undeclared propositions {sorted(extra)}")
        object.__setattr__(self, "label", labels)
        sinks = [s for s in self.states if not self.successors[s]]
        if sinks:
            raise KripkeError(f"edge relation is not total: no successor for {sinks[0]}")

    @cached_property
    def successors(self) -> dict:
        out: dict = {s: [] for s in self.states}
        for s, t in sorted(self.edges, key=lambda e: (str(e[0]), str(e[1]))):
            out[s].append(t)
        return out

    def with_fair(self, fair: Iterable) -> "FairKripke":
        return FairKripke(self.aps, self.states, self.initial, self.edges, self.label, frozenset(fair))

    def with_aps(self, aps: Iterable[str]) -> "FairKripke":
        return FairKripke(tuple(aps), self.states, self.initial, self.edges, self.label, self.fair)


# -- file format --------------------------------------------------------------

_IDENT = r"[a-zA-Z_][a-zA-Z0-9_']*"


def parse_kripke(text: str) -> FairKripke:
    """Parse the ``aps: ...; states: ...;`` statement format."""
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    statements = []
    line = 1
    for chunk in body.split(";"):
        statements.append((line, chunk.strip()))
        line += chunk.count("\n")
    if statements and statements[-1][1]:
        raise KripkeError(f"line {statements[-1][0]}: missing ';'")
    aps = states = init = edges = fair = None
    labels: dict = {}
    for ln, st in statements:
        if not st:
            continue
        m = re.fullmatch(rf"label\s+({_IDENT})\s*\{{([^}}]*)\}}", st)
        if m:
            name = m.group(1)
            if name in labels:
                raise KripkeError(f"line {ln}: duplicate label for {name}")
            labels[name] = frozenset(_idents(m.group(2).replace(",", " "), ln))
            continue
        key, sep, rest = st.partition(":")
        key = key.strip()
        if not sep or key not in ("aps", "states", "init", "fair", "edges"):
            raise KripkeError(f"line {ln}: unknown statement {st.split()[0]!r}")
        if key == "edges":
            if edges is not None:
                raise KripkeError(f"line {ln}: duplicate edges section")
            edges = set()
            for item in rest.split(","):
                item = item.strip()
                if not item:
                    continue
                em = re.fullmatch(rf"({_IDENT})\s*->\s*({_IDENT})", item)
                if not em:
                    raise KripkeError(f"line {ln}: bad edge {item!r}")
                edges.add((em.group(1), em.group(2)))
            continue
        values = _idents(rest, ln)
        if {"aps": aps, "states": states, "init": init, "fair": fair}[key] is not None:
            raise KripkeError(f"line {ln}: duplicate {key} section")
        if key == "aps":
            aps = values
        elif key == "states":
            states = values
        elif key == "init":
            init = values
        else:
            fair = values
    if states is None or not states:
        raise KripkeError("missing or empty states section")
    unknown = set(labels) - set(states)
    if unknown:
        raise KripkeError(f"label for unknown state {sorted(unknown)[0]}")
    if aps is None:
        aps = sorted(set().union(*labels.values())) if labels else []
    return FairKripke(
        tuple(aps), tuple(states), frozenset(init or ()), frozenset(edges or ()),
        labels, frozenset(states if fair is None else fair),
    )


def _idents(text: str, ln: int) -> list[str]:
    out = text.split()
    for x in out:
        if not re.fullmatch(_IDENT, x):
            raise KripkeError(f"line {ln}: bad identifier {x!r}")
    return out


def format_kripke(K: FairKripke) -> str:
    """Write a structure in the file format; non-identifier states are renamed."""
    names = {s: (s if isinstance(s, str) and re.fullmatch(_IDENT, s) else f"s{i}")
             for i, s in enumerate(K.states)}
    if len(set(names.values())) != len(names):
        names = {s: f"s{i}" for i, s in enumerate(K.states)}
    lines = [
        "aps: " + " ".join(K.aps) + ";",
        "states: " + " ".join(names[s] for s in K.states) + ";",
        "init: " + " ".join(names[s] for s in K.states if s in K.initial) + ";",
        "fair: " + " ".join(names[s] for s in K.states if s in K.fair) + ";",
    ]
    for s in K.states:
        if K.label[s]:
            lines.append(f"label {names[s]} {{{' '.join(sorted(K.label[s]))}}};")
    lines.append("edges: " + ", ".join(
        f"{names[s]}->{names[t]}" for s in K.states for t in K.successors[s]) + ";")
    return "\n".join(lines) + "\n"


# -- automata views -------------------------------------------------------------

def traces_nba(K: FairKripke, alphabet: Alphabet | None = None) -> ExplicitNba:
    """Source-labelled NBA whose language is the set of fair traces."""
    al = alphabet or Alphabet(K.aps)
    full = al.full_mask
    delta = {s: [(full, al.encode(K.label[s]), t) for t in K.successors[s]] for s in K.states}
    return ExplicitNba(al, sorted(K.initial, key=str), delta, K.fair)


def gamma_extension(K: FairKripke, gamma: Iterable[Formula]) -> tuple[FairKripke, dict]:
    """Product of ``(K, F)`` with the annotation automaton of ``gamma``.

    Returns the extended structure over ``AP_Γ`` and the map from each
    formula of ``gamma`` to its proposition.  States ``(s, B, q, flag)``
    with no infinite continuation are dropped so the result stays total.
    """
    gamma = frozenset(gamma)
    if not gamma:
        raise ValueError("the subscript set must be nonempty")
    A, names = a_gamma(gamma, K.aps)
    al = A.alphabet
    ap_mask = (1 << len(K.aps)) - 1

    def letter_of(q):
        es = A.edges(q)
        return es[0][1] if es else None

    def valid(s, q):
        b = letter_of(q)
        return b is not None and b & ap_mask == al.encode(K.label[s])

    init = [(s, letter_of(q), q, 1) for s in sorted(K.initial, key=str) for q in A.initial if valid(s, q)]
    succ: dict = {}
    queue = deque(init)
    seen = set(init)
    while queue:
        node = queue.popleft()
        s, b, q, flag = node
        if flag == 1:
            nflag = 2 if s in K.fair else 1
        else:
            nflag = 1 if A.is_accepting(q) else 2
        out = []
        for t in K.successors[s]:
            for _, _, q2 in A.edges(q):
                if valid(t, q2):
                    nxt = (t, letter_of(q2), q2, nflag)
                    out.append(nxt)
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
        succ[node] = out
    alive = _drop_dead_ends(succ)
    states = tuple(sorted(alive, key=repr))
    edges = frozenset((u, v) for u in alive for v in succ[u] if v in alive)
    label = {u: A.alphabet.decode(u[1])[0] for u in alive}
    fair = frozenset(u for u in alive if u[3] == 2 and A.is_accepting(u[2]))
    if not states:
        return _empty_structure(al.props), names
    KG = FairKripke(al.props, states, frozenset(u for u in init if u in alive), edges, label, fair)
    return KG, names


def _drop_dead_ends(succ: dict) -> set:
    alive = set(succ)
    pred: dict = {u: [] for u in succ}
    count = {}
    for u, vs in succ.items():
        count[u] = len(vs)
        for v in vs:
            pred[v].append(u)
    queue = deque(u for u in succ if count[u] == 0)
    while queue:
        u = queue.popleft()
        if u not in alive:
            continue
        alive.discard(u)
        for p in pred[u]:
            count[p] -= 1
            if count[p] == 0:
                queue.append(p)
    return alive


def _empty_structure(aps) -> FairKripke:
    """A structure with no initial state (and hence no traces)."""
    return FairKripke(tuple(aps), ("dead",), frozenset(), frozenset({("dead", "dead")}), {}, frozenset())


@dataclass(frozen=True)
class ClosurePairs:
    r_plain: frozenset
    r_fair: frozenset


def _check_propositional(gamma) -> frozenset[str]:
    out = set()
    for g in gamma:
        if isinstance(g, Prop):
            out.add(g.name)
        elif isinstance(g, str):
            out.add(g)
        else:
            raise ValueError(f"subscript {g} is not a proposition")
    return frozenset(out)


def closure_pairs(K: FairKripke, gamma, method: str = "source") -> ClosurePairs:
    """Pairs of states that start adjacent stutter segments along some path.

    ``method="source"`` runs one search per source state; ``"class"``
    condenses each Γ-valuation class once and propagates reachable exits
    along its component DAG.
    """
    props = _check_propositional(gamma)
    val = {s: K.label[s] & props for s in K.states}
    if method == "class":
        return _closure_by_class(K, val)
    if method != "source":
        raise ValueError(f"unknown method {method!r}")
    plain, fair = set(), set()
    for q in K.states:
        start = (q, q in K.fair)
        seen = {start}
        queue = deque([start])
        while queue:
            v, f = queue.popleft()
            for w in K.successors[v]:
                if val[w] != val[q]:
                    plain.add((q, w))
                    if f or w in K.fair:
                        fair.add((q, w))
                    continue
                node = (w, f or w in K.fair)
                if node not in seen:
                    seen.add(node)
                    queue.append(node)
    return ClosurePairs(frozenset(plain), frozenset(fair))


def _closure_by_class(K: FairKripke, val: dict) -> ClosurePairs:
    def inside(v):
        return [w for w in K.successors[v] if val[w] == val[v]]

    exits = {v: frozenset(w for w in K.successors[v] if val[w] != val[v]) for v in K.states}
    reach: dict = {}       # exits reachable inside the class
    fair_reach: dict = {}  # exits reachable through a fair state of the class
    for comp in _sccs(K.states, inside):
        below = {w for v in comp for w in inside(v)} - set(comp)
        out = set().union(*(exits[v] for v in comp), *(reach[w] for w in below))
        if any(v in K.fair for v in comp):
            fout = out
        else:
            fout = set().union(*(fair_reach[w] for w in below))
        for v in comp:
            reach[v], fair_reach[v] = out, fout
    plain = {(q, w) for q in K.states for w in reach[q]}
    fair = {(q, w) for q, w in plain if w in K.fair or w in fair_reach[q]}
    return ClosurePairs(frozenset(plain), frozenset(fair))


def fresh_acc(aps: Iterable[str]) -> str:
    name = "acc"
    taken = set(aps)
    while name in taken:
        name += "'"
    return name


def stutter_quotient(K: FairKripke, gamma) -> tuple[FairKripke, str]:
    """The structure whose ``θ̂``-traces project to the stutter traces of ``(K, F)``.

    Returns the structure (all states fair) and the name used for ``acc``.
    """
    _check_propositional(gamma)
    acc = fresh_acc(K.aps)
    pairs = closure_pairs(K, gamma)
    edges = set()
    for s, t in set(K.edges) | pairs.r_plain:
        for flag in (0, 1):
            edges.add(((s, flag), (t, int(t in K.fair))))
    for s, t in pairs.r_fair:
        for flag in (0, 1):
            edges.add(((s, flag), (t, 1)))
    states = tuple((s, flag) for s in K.states for flag in (0, 1))
    label = {(s, flag): K.label[s] | ({acc} if flag else set()) for s, flag in states}
    return FairKripke(
        K.aps + (acc,), states, frozenset((s, 0) for s in K.initial),
        frozenset(edges), label, frozenset(states),
    ), acc


def theta_hat(gamma, acc: str = "acc") -> Formula:
    props = sorted(_check_propositional(gamma))
    if not props:
        raise ValueError("the subscript set must be nonempty")
    ps = [Prop(p) for p in props]
    flips = disj(iff(p, Not(Next(p))) for p in ps)
    frozen = conj(always(iff(p, Next(p))) for p in ps)
    return conj([always(eventually(Prop(acc))), always(Or(flips, frozen))])


def condition_sentence(theta: Formula, phi: HyperSentence) -> HyperSentence:
    """Restrict every quantifier to traces satisfying ``theta``.

    Guards are added innermost first: an existential variable ``x`` turns
    the body ``b`` into ``θ(x) ∧ b`` and a universal one into ``θ(x) → b``.
    """
    if has_context(phi.body) or has_subscripts(phi.body):
        raise ValueError("condition_sentence expects a plain sentence")
    body = phi.body
    for quant, var in reversed(phi.prefix):
        guard = _relativize(theta, var)
        body = conj([guard, body]) if quant == "exists" else implies(guard, body)
    return HyperSentence(phi.prefix, body)


def _relativize(theta: Formula, var: str) -> Formula:
    return map_formula(theta, lambda g: Atom(g.name, var) if isinstance(g, Prop) else g)
