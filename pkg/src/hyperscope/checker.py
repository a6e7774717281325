"""Model-checking engines and the dispatching front door.

Every engine reduces the sentence to a Büchi automaton over tuples of
letters (component ``i`` is the ``i``-th quantified variable) and then
eliminates quantifiers innermost first.  An existential quantifier is a
projection against the traces of the structure; a universal one is
handled through the complement, which is taken only when the polarity of
the current automaton has to switch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .automata import (
    Alphabet, Nba, StateLimitExceeded, _sccs, complement_safra, intersect,
    is_empty, mh_dealternate, project, restrict, window_aba,
)
from .kripke import (
    FairKripke, condition_sentence, gamma_extension, stutter_quotient,
    theta_hat, traces_nba,
)
from .syntax import (
    FALSE, TRUE, And, Atom, Formula, HyperSentence, Next, Not, Or, Prop,
    Release, Until, children, classify, conj, erase_subscripts, has_context,
    has_subscripts, is_temporal_free, map_formula, props_of, show, to_nnf,
    variables_of, walk,
)
from .traces import Lasso, eval_c_qf, eval_s_qf, ltl_eval
from .translations import c_qf_to_aawa, hyper_qf_to_nba, slt_to_ltl

ENGINES = ("auto", "hyperltl", "simple-s", "bounded-c", "bounded-search")


class FragmentError(ValueError):
    """The sentence is outside the fragment the engine decides."""


@dataclass
class Verdict:
    result: str
    witness: dict[str, Lasso] | None = None
    engine: str = ""
    stats: dict[str, int] = field(default_factory=dict)
    note: str = ""

    @property
    def holds(self) -> bool | None:
        return {"holds": True, "fails": False}.get(self.result)


@dataclass
class RewriteOutput:
    sentence: HyperSentence
    structure: FairKripke
    subscript_props: frozenset[str]
    names: dict[Formula, str]


class _Counted(Nba):
    """Pass-through automaton that remembers which states were expanded."""

    def __init__(self, inner: Nba):
        self.inner = inner
        self.alphabet = inner.alphabet
        self.initial = inner.initial
        self.seen: set = set()

    def edges(self, q):
        self.seen.add(q)
        return self.inner.edges(q)

    def post(self, q, letter):
        self.seen.add(q)
        return self.inner.post(q, letter)

    def is_accepting(self, q) -> bool:
        return self.inner.is_accepting(q)


class _Stages:
    def __init__(self):
        self.tracked: list[tuple[str, _Counted]] = []
        self.fixed: dict[str, int] = {}

    def track(self, name: str, a: Nba) -> Nba:
        c = _Counted(a)
        self.tracked.append((name, c))
        return c

    def report(self) -> dict[str, int]:
        out = dict(self.fixed)
        out.update((name, len(c.seen)) for name, c in self.tracked)
        return out


# -- plain quantifier elimination ------------------------------------------------

def _label_letters(K: FairKripke, al1: Alphabet) -> list[int]:
    return sorted({al1.encode(K.label[s]) for s in K.states})


def _tuple_letters(codes: Sequence[int], arity: int, width: int) -> list[int]:
    out = []
    for combo in itertools.product(codes, repeat=arity):
        v = 0
        for i, c in enumerate(combo):
            v |= c << (i * width)
        out.append(v)
    return out


def _strip(lassos: Sequence[Lasso], keep) -> list[Lasso]:
    keep = frozenset(keep)
    return [
        Lasso(tuple(a & keep for a in w.stem), tuple(a & keep for a in w.loop)).canonical()
        for w in lassos
    ]


def quantifier_eliminate(
    build: Callable[[bool], Nba],
    prefix: Sequence[tuple[str, str]],
    K: FairKripke,
    alphabet: Alphabet,
    max_states: int | None = None,
    stages: _Stages | None = None,
) -> tuple[bool, dict[str, Lasso] | None]:
    """Decide the prefix over ``L(K,F)``.

    ``build(positive)`` returns the automaton of the body (``positive``)
    or of its negation over ``alphabet`` with one component per variable
    of ``prefix``.  Returns the truth value and, when available, a
    witness for the leading variables.
    """
    n = len(prefix)
    if alphabet.arity != n:
        raise ValueError(f"prefix has {n} variables, automaton reads {alphabet.arity}")
    stages = stages or _Stages()
    al1 = alphabet.with_arity(1)
    k_nba = traces_nba(K, al1)
    codes = _label_letters(K, al1)
    quants = [q for q, _ in prefix]
    names = [v for _, v in prefix]

    if len(set(quants)) == 1:
        # Alternation-free: one emptiness check on the product with K^n.
        exists = quants[0] == "exists"
        a = stages.track("body", build(exists))
        for i in range(n):
            a = restrict(a, i, k_nba)
        found = is_empty(stages.track("product", a), max_states)
        witness = None
        if found is not None:
            witness = dict(zip(names, _strip(found.lassos(), K.aps)))
        if exists:
            return found is not None, witness
        return found is None, witness

    positive = quants[-1] == "exists"
    a = stages.track("body", build(positive))
    for j in range(n - 1, 0, -1):
        want = quants[j] == "exists"
        if want != positive:
            letters = _tuple_letters(codes, j + 1, alphabet.width)
            a = stages.track(f"complement@{names[j]}", complement_safra(a, letters))
            positive = want
        a = stages.track(f"project@{names[j]}", project(a, j, k_nba))
    want = quants[0] == "exists"
    if want != positive:
        a = stages.track(f"complement@{names[0]}", complement_safra(a, codes))
    found = is_empty(stages.track("final", intersect(a, k_nba)), max_states)
    witness = None
    if found is not None:
        witness = {names[0]: _strip(found.lassos(), K.aps)[0]}
    if want:
        return found is not None, witness
    return found is None, witness


def _props_for(K: FairKripke, body: Formula) -> tuple[str, ...]:
    return tuple(K.aps) + tuple(sorted(props_of(body) - set(K.aps)))


def _run(engine: str, K: FairKripke, sentence: HyperSentence,
         build: Callable[[bool, Alphabet], Nba], props, max_states) -> Verdict:
    if not sentence.prefix:
        raise FragmentError("a sentence needs at least one quantifier")
    Kp = K.with_aps(props) if tuple(props) != tuple(K.aps) else K
    al = Alphabet(tuple(props), len(sentence.prefix))
    stages = _Stages()
    ok, witness = quantifier_eliminate(
        lambda positive: build(positive, al), sentence.prefix, Kp, al, max_states, stages)
    leading = sentence.prefix[0][0]
    keep = witness if (ok == (leading == "exists")) else None
    return Verdict("holds" if ok else "fails", keep, engine, stages.report())


def mc_hyperltl(K: FairKripke, sentence: HyperSentence,
                max_states: int | None = None) -> Verdict:
    info = classify(sentence)
    if not info.is_hyperltl:
        raise FragmentError("the hyperltl engine needs a plain HyperLTL sentence")
    variables = sentence.variables
    props = _props_for(K, sentence.body)

    def build(positive, al):
        body = sentence.body if positive else Not(sentence.body)
        return hyper_qf_to_nba(body, variables, al.props)

    return _run("hyperltl", K, sentence, build, props, max_states)


# -- simple stuttering sentences -------------------------------------------------

def _uniform(f: Formula, gamma) -> bool:
    return all(g.gamma == gamma for g in walk(f) if isinstance(g, (Next, Until, Release)))


def synchronizing_rewrite(K: FairKripke, sentence: HyperSentence) -> RewriteOutput:
    """Rewrite a simple stuttering sentence into one with propositional subscripts.

    One-variable temporal parts become fresh atoms ``at(θ)[x]`` for their
    plain LTL equivalent ``θ``; parts uniform in the shared subscript set
    ``Γ'`` keep their shape with every formula of ``Γ'`` replaced by its
    proposition.  The structure is extended so that each fresh proposition
    tracks the truth of its formula.
    """
    info = classify(sentence)
    if not info.is_simple_s:
        raise FragmentError("the sentence is not in the simple stuttering fragment")
    shared = info.simple_gamma
    singles: dict[Formula, tuple[Formula, str]] = {}

    def split(f: Formula) -> Formula:
        if _uniform(f, shared):
            return f
        vs = variables_of(f)
        if len(vs) <= 1:
            if is_temporal_free(f):
                return f
            if not vs:
                return TRUE if ltl_eval(slt_to_ltl(f), Lasso((), (frozenset(),))) else FALSE
            theta = slt_to_ltl(f)
            singles[f] = (theta, vs[0])
            return f
        if isinstance(f, (Not, And, Or)):
            return type(f)(*(split(c) for c in children(f)))
        raise FragmentError(f"cannot split {show(f)} into simple parts")

    skeleton = split(sentence.body)
    gamma = frozenset(theta for theta, _ in singles.values()) | frozenset(shared)
    if not gamma:
        return RewriteOutput(sentence, K, frozenset(), {})
    KG, names = gamma_extension(K, gamma)
    sub = frozenset(Prop(names[t]) for t in shared)

    def rewrite(f: Formula) -> Formula:
        if f in singles:
            theta, var = singles[f]
            return Atom(names[theta], var)
        if _uniform(f, shared):
            return map_formula(f, lambda g: type(g)(*children(g), sub)
                               if isinstance(g, (Next, Until, Release)) else g)
        if isinstance(f, (Not, And, Or)):
            return type(f)(*(rewrite(c) for c in children(f)))
        return f

    body = rewrite(skeleton)
    return RewriteOutput(
        HyperSentence(sentence.prefix, body), KG,
        frozenset(p.name for p in sub), names,
    )


def mc_simple_s(K: FairKripke, sentence: HyperSentence,
                max_states: int | None = None) -> Verdict:
    rw = synchronizing_rewrite(K, sentence)
    plain = erase_subscripts(rw.sentence)
    if not rw.subscript_props:
        v = mc_hyperltl(rw.structure, plain, max_states)
    else:
        Khat, acc = stutter_quotient(rw.structure, rw.subscript_props)
        guarded = condition_sentence(theta_hat(rw.subscript_props, acc), plain)
        v = mc_hyperltl(Khat, guarded, max_states)
        v.stats = {"quotient-states": len(Khat.states), **v.stats}
    if v.witness:
        v.witness = dict(zip(v.witness, _strip(list(v.witness.values()), K.aps)))
    v.engine = "simple-s"
    return v


# -- bounded context sentences ---------------------------------------------------

def mc_bounded_c(K: FairKripke, sentence: HyperSentence,
                 max_states: int | None = None) -> Verdict:
    info = classify(sentence)
    if not info.is_bounded_c:
        raise FragmentError("the bounded-c engine needs a bounded context sentence")
    variables = sentence.variables
    props = _props_for(K, sentence.body)
    k = info.bound
    codes = None

    def build(positive, al):
        nonlocal codes
        body = sentence.body if positive else Not(sentence.body)
        A = c_qf_to_aawa(to_nnf(body), variables, al.props)
        if codes is None:
            al1 = al.with_arity(1)
            codes = _label_letters(K.with_aps(al.props), al1)
        letters = _tuple_letters(codes, al.arity, al.width)
        return mh_dealternate(window_aba(A, k, letters))

    v = _run("bounded-c", K, sentence, build, props, max_states)
    v.stats = {"window": k, **v.stats}
    return v


# -- semi-decision for existential sentences -------------------------------------

def _plain_conjuncts(body: Formula) -> tuple[list[Formula], list[Formula]]:
    parts: list[Formula] = []
    stack = [body]
    while stack:
        f = stack.pop()
        if isinstance(f, And):
            stack.extend([f.right, f.left])
        else:
            parts.append(f)
    plain = [f for f in parts if not has_context(f) and not has_subscripts(f)]
    rest = [f for f in parts if has_context(f) or has_subscripts(f)]
    return plain, rest


def bounded_witness_search(K: FairKripke, sentence: HyperSentence,
                           max_stem: int = 6, max_loop: int = 2,
                           max_states: int | None = None) -> Verdict:
    """Look for a witness tuple among bounded joint lassos of ``K``.

    Paths of the self-composition are explored together with the
    automaton of the plain conjuncts.  A first pass over this finite
    product keeps only nodes that can still reach a loop meeting every
    fairness set and the automaton's acceptance within the length budget.
    Every closed lasso of length at most ``max_stem + max_loop`` is then
    checked against the full body, shortest first.  Without a witness the
    answer is ``unknown``.
    """
    if not sentence.prefix:
        raise FragmentError("a sentence needs at least one quantifier")
    if any(q != "exists" for q, _ in sentence.prefix):
        raise FragmentError("bounded search needs an existential prefix")
    variables = sentence.variables
    n = len(variables)
    props = _props_for(K, sentence.body)
    al = Alphabet(props, n)
    plain, _ = _plain_conjuncts(sentence.body)
    guide = hyper_qf_to_nba(conj(plain), variables, props) if plain else None
    evaluate = eval_c_qf if has_context(sentence.body) else eval_s_qf
    stats = {"product": 0, "paths": 0, "candidates": 0}

    def moves(node):
        states, q = node
        code = al.encode_tuple([K.label[s] for s in states])
        nexts = [None] if guide is None else guide.post(q, code)
        for combo in itertools.product(*(K.successors[s] for s in states)):
            for q2 in nexts:
                yield (tuple(combo), q2)

    starts = [
        (states, q)
        for states in itertools.product(sorted(K.initial, key=str), repeat=n)
        for q in ([None] if guide is None else guide.initial)
    ]
    succ, dist = _live_distances(starts, moves, n, K.fair, guide, max_states)
    stats["product"] = len(succ)
    limit = max_stem + max_loop
    checked: set = set()

    def try_lasso(path, stem_len):
        loop = path[stem_len:]
        for i in range(n):
            if not any(node[0][i] in K.fair for node in loop):
                return None
        if guide is not None and not any(guide.is_accepting(node[1]) for node in loop):
            return None
        ws = tuple(
            Lasso(tuple(K.label[nd[0][i]] for nd in path[:stem_len]),
                  tuple(K.label[nd[0][i]] for nd in loop)).canonical()
            for i in range(n)
        )
        if ws in checked:
            return None
        checked.add(ws)
        stats["candidates"] += 1
        return ws if evaluate(sentence.body, dict(zip(variables, ws))) else None

    for total in range(1, limit + 1):
        stack = [[s] for s in starts if dist.get(s, limit + 1) < total]
        while stack:
            path = stack.pop()
            if len(path) < total:
                room = total - len(path) - 1
                stack.extend(path + [w] for w in succ[path[-1]] if dist.get(w, limit + 1) <= room)
                continue
            stats["paths"] += 1
            follow = set(succ[path[-1]])
            for loop_len in range(1, min(max_loop, total) + 1):
                stem_len = total - loop_len
                if stem_len > max_stem or path[stem_len] not in follow:
                    continue
                ws = try_lasso(path, stem_len)
                if ws is not None:
                    return Verdict("holds", dict(zip(variables, ws)), "bounded-search", stats)
    return Verdict("unknown", None, "bounded-search", stats,
                   note=f"no witness with stem <= {max_stem} and loop <= {max_loop}")


def _live_distances(starts, moves, n, fair, guide, max_states):
    """Successor lists of the reachable product and, for live nodes, the
    number of steps needed to enter a strongly connected part that can
    carry an accepting fair loop."""
    succ: dict = {}
    queue = list(dict.fromkeys(starts))
    for node in queue:
        if node in succ:
            continue
        succ[node] = list(dict.fromkeys(moves(node)))
        if max_states is not None and len(succ) > max_states:
            raise StateLimitExceeded(max_states, "search")
        queue.extend(w for w in succ[node] if w not in succ)
    good: set = set()
    for comp in _sccs(list(succ), lambda v: succ[v]):
        members = set(comp)
        if len(comp) == 1 and comp[0] not in succ[comp[0]]:
            continue
        if guide is not None and not any(guide.is_accepting(v[1]) for v in comp):
            continue
        if all(any(v[0][i] in fair for v in comp) for i in range(n)):
            good |= members
    pred: dict = {v: [] for v in succ}
    for v, ws in succ.items():
        for w in ws:
            pred[w].append(v)
    dist = {v: 0 for v in good}
    frontier = list(good)
    while frontier:
        nxt = []
        for w in frontier:
            for v in pred[w]:
                if v not in dist:
                    dist[v] = dist[w] + 1
                    nxt.append(v)
        frontier = nxt
    return succ, dist


# -- dispatch ------------------------------------------------------------------

def choose_engine(sentence: HyperSentence) -> str:
    info = classify(sentence)
    if info.is_hyperltl:
        return "hyperltl"
    if info.is_simple_s:
        return "simple-s"
    if info.is_bounded_c:
        return "bounded-c"
    if info.is_exists_only:
        return "bounded-search"
    raise FragmentError("undecidable fragment; use --engine bounded-search")


def mc(K: FairKripke, sentence: HyperSentence, engine: str = "auto",
       max_stem: int = 6, max_loop: int = 2, max_states: int | None = None) -> Verdict:
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    chosen = choose_engine(sentence) if engine == "auto" else engine
    if chosen == "hyperltl":
        return mc_hyperltl(K, sentence, max_states)
    if chosen == "simple-s":
        return mc_simple_s(K, sentence, max_states)
    if chosen == "bounded-c":
        return mc_bounded_c(K, sentence, max_states)
    return bounded_witness_search(K, sentence, max_stem, max_loop, max_states)
