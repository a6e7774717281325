"""Translations from formulas to formulas and automata.

* ``slt_to_ltl``: one-variable stuttering formulas to plain LTL.
* ``s_qf_to_aawa`` / ``c_qf_to_aawa``: quantifier-free stuttering and
  context bodies to asynchronous alternating automata.
* ``hyper_qf_to_nba``: plain bodies to Büchi automata over tuple letters.
"""

from __future__ import annotations

from typing import Sequence

from .automata import (
    PFALSE, PTRUE, Alphabet, Nba, NAawa, expansion_nba, ltl_to_nba, pand,
    patom, por,
)
from .syntax import (
    And, Atom, Context, Formula, Next, Not, Or, Prop, Release, Top,
    Until, always, conj, disj, iff, implies, show, to_nnf, variables_of,
    walk,
)


def _sorted_gamma(gamma) -> list[Formula]:
    return sorted(gamma, key=show)


def theta_gamma(gamma) -> Formula:
    """All formulas of ``gamma`` keep their truth value at the next position."""
    return conj(iff(xi, Next(xi)) for xi in _sorted_gamma(gamma))


def xi_gamma(gamma) -> Formula:
    """The first stutter segment is infinite or has length one."""
    if not gamma:
        raise ValueError("the subscript set must be nonempty")
    parts = _sorted_gamma(gamma)
    stays = conj(always(iff(xi, Next(xi))) for xi in parts)
    flips = disj(iff(xi, Not(Next(xi))) for xi in parts)
    return Or(stays, flips)


def slt_to_ltl(psi: Formula) -> Formula:
    """Equivalent LTL formula for a body over at most one trace variable."""
    if len(variables_of(psi)) > 1:
        raise ValueError("slt_to_ltl needs a body over at most one trace variable")
    memo: dict[Formula, Formula] = {}

    def f(g: Formula) -> Formula:
        if g in memo:
            return memo[g]
        if isinstance(g, (Top, Prop)):
            out = g
        elif isinstance(g, Atom):
            out = Prop(g.prop)
        elif isinstance(g, Not):
            out = Not(f(g.arg))
        elif isinstance(g, And):
            out = And(f(g.left), f(g.right))
        elif isinstance(g, Or):
            out = Or(f(g.left), f(g.right))
        elif isinstance(g, Context):
            raise ValueError("context modalities are not stuttering formulas")
        elif isinstance(g, Next):
            out = _next_gamma(g.gamma, f(g.arg))
        elif isinstance(g, Until):
            out = _until_gamma(g.gamma, f(g.left), f(g.right))
        elif isinstance(g, Release):
            # dual: a R b == !(!a U !b)
            out = Not(_until_gamma(g.gamma, Not(f(g.left)), Not(f(g.right))))
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = out
        return out

    return f(psi)


def _next_gamma(gamma, arg: Formula) -> Formula:
    if not gamma:
        return Next(arg)
    theta = theta_gamma(gamma)
    last = always(theta)
    return And(
        implies(last, Next(arg)),
        implies(Not(last), Until(theta, And(Not(theta), Next(arg)))),
    )


def _until_gamma(gamma, left: Formula, right: Formula) -> Formula:
    if not gamma:
        return Until(left, right)
    theta = theta_gamma(gamma)
    last = always(theta)
    # ``goal``: the current segment ends here and the successor either
    # satisfies ``right`` or opens the last segment, where steps are unit.
    goal = And(Not(theta), Next(Or(right, And(last, Until(left, right)))))
    step = implies(Not(theta), Next(left))
    return And(
        implies(last, Until(left, right)),
        implies(Not(last), Or(right, And(left, Until(step, goal)))),
    )


def _props(psi: Formula, extra=()) -> tuple[str, ...]:
    out = set()
    for g in walk(psi):
        if isinstance(g, Atom):
            out.add(g.prop)
        elif isinstance(g, Prop):
            out.add(g.name)
        if isinstance(g, (Next, Until, Release)):
            for theta in g.gamma:
                out |= {h.name for h in walk(theta) if isinstance(h, Prop)}
    return tuple(sorted(out | set(extra)))


def _directions(psi: Formula, variables: Sequence[str] | None) -> dict[str, int]:
    names = list(variables) if variables is not None else variables_of(psi)
    missing = set(variables_of(psi)) - set(names)
    if missing:
        raise ValueError(f"unbound trace variables: {sorted(missing)}")
    if not names:
        names = ["_"]
    return {x: i for i, x in enumerate(names)}


def _atom_holds(al: Alphabet, letter: int, prop: str, comp: int) -> bool:
    b = al.bit(prop, comp)
    return b is not None and bool(letter >> b & 1)


def s_qf_to_aawa(psi: Formula, variables: Sequence[str] | None = None,
                 props: Sequence[str] | None = None) -> NAawa:
    """Alternating asynchronous automaton for a stuttering body.

    States: ``("f", θ)`` for subformulas, ``("t", θ, i, Γ)`` while moving
    to the Γ-successor along direction ``i``, and ``("a", Γ, i, pol, q)``
    for copies of the automaton of ``ξ_Γ`` (``pol`` True) or its negation
    running along direction ``i``.
    """
    psi = to_nnf(psi)
    dirs = _directions(psi, variables)
    n = len(dirs)
    al = Alphabet(tuple(props) if props is not None else _props(psi), n)
    single = Alphabet(al.props, 1)
    aux: dict = {}

    def aux_nba(gamma, pol: bool) -> Nba:
        key = (gamma, pol)
        if key not in aux:
            xi = xi_gamma(gamma)
            aux[key] = ltl_to_nba(xi if pol else Not(xi), single.props)
        return aux[key]

    def aux_moves(gamma, i, pol, states, letter) -> frozenset:
        if not gamma:
            return PTRUE if pol else PFALSE
        nba = aux_nba(gamma, pol)
        own = al.component(letter, i)
        return por(*(
            patom((("a", gamma, i, pol, t), i))
            for q in states for m, v, t in nba.edges(q) if own & m == v
        ))

    def rho_phase(theta, i, gamma, letter):
        done = patom((("t", theta, i + 1, gamma), i)) if i + 1 < n else patom((("f", theta), i))
        stay = patom((("t", theta, i, gamma), i))
        start = aux_nba(gamma, True).initial if gamma else ()
        start_neg = aux_nba(gamma, False).initial if gamma else ()
        return por(
            pand(aux_moves(gamma, i, True, start, letter), done),
            pand(aux_moves(gamma, i, False, start_neg, letter), stay),
        )

    def rho(theta, letter):
        if isinstance(theta, Top):
            return PTRUE
        if isinstance(theta, Atom):
            return PTRUE if _atom_holds(al, letter, theta.prop, dirs[theta.var]) else PFALSE
        if isinstance(theta, Not):
            if isinstance(theta.arg, Top):
                return PFALSE
            a = theta.arg
            return PFALSE if _atom_holds(al, letter, a.prop, dirs[a.var]) else PTRUE
        if isinstance(theta, Or):
            return por(rho(theta.left, letter), rho(theta.right, letter))
        if isinstance(theta, And):
            return pand(rho(theta.left, letter), rho(theta.right, letter))
        if isinstance(theta, Next):
            return rho_phase(theta.arg, 0, theta.gamma, letter)
        if isinstance(theta, Until):
            return por(rho(theta.right, letter),
                       pand(rho(theta.left, letter), rho_phase(theta, 0, theta.gamma, letter)))
        if isinstance(theta, Release):
            return pand(rho(theta.right, letter),
                        por(rho(theta.left, letter), rho_phase(theta, 0, theta.gamma, letter)))
        raise ValueError(f"unexpected node in a stuttering body: {theta!r}")

    def delta(state, letter):
        kind = state[0]
        if kind == "f":
            return rho(state[1], letter)
        if kind == "t":
            _, theta, i, gamma = state
            return rho_phase(theta, i, gamma, letter)
        _, gamma, i, pol, q = state
        return aux_moves(gamma, i, pol, (q,), letter)

    def accepting(state):
        if state[0] == "f":
            return isinstance(state[1], Release)
        if state[0] == "a":
            return aux_nba(state[1], state[3]).is_accepting(state[4])
        return False

    return NAawa(al, ("f", psi), delta, accepting)


def c_qf_to_aawa(psi: Formula, variables: Sequence[str] | None = None,
                 props: Sequence[str] | None = None) -> NAawa:
    """Alternating asynchronous automaton for a context body.

    States are ``("c", θ, C, x)`` with ``C`` a sorted tuple of directions
    and ``x`` the direction of the last move within the current round.
    """
    psi = to_nnf(psi)
    dirs = _directions(psi, variables)
    n = len(dirs)
    al = Alphabet(tuple(props) if props is not None else _props(psi), n)
    everything = tuple(range(n))

    def context_dirs(ctx) -> tuple[int, ...]:
        return tuple(sorted(dirs[x] for x in ctx))

    def step(theta, ctx):
        first = ctx[0]
        return patom((("c", theta, ctx, first), first))

    def rho(theta, ctx, letter):
        if isinstance(theta, Top):
            return PTRUE
        if isinstance(theta, Atom):
            return PTRUE if _atom_holds(al, letter, theta.prop, dirs[theta.var]) else PFALSE
        if isinstance(theta, Not):
            if isinstance(theta.arg, Top):
                return PFALSE
            a = theta.arg
            return PFALSE if _atom_holds(al, letter, a.prop, dirs[a.var]) else PTRUE
        if isinstance(theta, Or):
            return por(rho(theta.left, ctx, letter), rho(theta.right, ctx, letter))
        if isinstance(theta, And):
            return pand(rho(theta.left, ctx, letter), rho(theta.right, ctx, letter))
        if isinstance(theta, Next):
            return step(theta.arg, ctx)
        if isinstance(theta, Until):
            return por(rho(theta.right, ctx, letter),
                       pand(rho(theta.left, ctx, letter), step(theta, ctx)))
        if isinstance(theta, Release):
            return pand(rho(theta.right, ctx, letter),
                        por(rho(theta.left, ctx, letter), step(theta, ctx)))
        if isinstance(theta, Context):
            return rho(theta.arg, context_dirs(theta.vars), letter)
        raise ValueError(f"unexpected node in a context body: {theta!r}")

    def delta(state, letter):
        _, theta, ctx, x = state
        if x != ctx[-1]:
            nxt = ctx[ctx.index(x) + 1]
            return patom((("c", theta, ctx, nxt), nxt))
        return rho(theta, ctx, letter)

    def accepting(state):
        _, theta, ctx, x = state
        return isinstance(theta, Release) and x == ctx[-1]

    return NAawa(al, ("c", psi, everything, everything[-1]), delta, accepting)


def hyper_qf_to_nba(psi: Formula, variables: Sequence[str] | None = None,
                    props: Sequence[str] | None = None) -> Nba:
    """NBA over tuple letters for a plain body; component ``i`` is ``variables[i]``."""
    for g in walk(psi):
        if isinstance(g, Context) or (isinstance(g, (Next, Until, Release)) and g.gamma):
            raise ValueError("hyper_qf_to_nba needs a plain body")
    dirs = _directions(psi, variables)
    al = Alphabet(tuple(props) if props is not None else _props(psi), len(dirs))

    def bit_of(leaf):
        if isinstance(leaf, Prop):
            raise ValueError(f"proposition {leaf.name!r} lacks a trace variable")
        return al.bit(leaf.prop, dirs[leaf.var])

    return expansion_nba(psi, al, bit_of)
