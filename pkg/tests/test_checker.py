import random

import pytest
from hypothesis import given, settings

import gen
import strategies as hs
from oracles import bounded_sentence_check, generates
from hyperscope.automata import StateLimitExceeded
from hyperscope.checker import (
    FragmentError, bounded_witness_search, choose_engine, mc, mc_bounded_c, mc_hyperltl,
    mc_simple_s, synchronizing_rewrite,
)
from hyperscope.kripke import FairKripke
from hyperscope.syntax import Atom, HyperSentence, Not, parse_sentence, walk
from hyperscope.traces import Lasso, eval_c_qf, eval_s_qf

P, E = frozenset("p"), frozenset()
ENGINES = (mc_hyperltl, mc_simple_s, mc_bounded_c)


def K_of(states, edges, label, init=("s0",), fair=None, aps=("p",)):
    return FairKripke(aps, tuple(states), frozenset(init), frozenset(edges), label,
                      frozenset(states if fair is None else fair))


SELF_P = K_of(["s0"], [("s0", "s0")], {"s0": P})
SELF_EMPTY = K_of(["s0"], [("s0", "s0")], {"s0": E})
P_OR_EMPTY = K_of(["s0", "a", "b"], [("s0", "a"), ("s0", "b"), ("a", "a"), ("b", "b")],
                  {"s0": P, "a": P, "b": E})

OD = parse_sentence("forall x. forall y. (li[x] <-> li[y]) -> G[{lo}] (lo[x] <-> lo[y])")
NI = parse_sentence("forall x. exists y. G pe[y] & G[{lo}] (lo[x] <-> lo[y])")


def od_structure(diverge):
    """Traces {li}{}{lo}^w and {li}{lo}^w; ``diverge`` adds {li}{}^w."""
    edges = [("s0", "a"), ("s0", "b"), ("a", "b"), ("b", "b")]
    if diverge:
        edges.append(("a", "a"))
    return K_of(["s0", "a", "b"], edges, {"s0": {"li"}, "a": set(), "b": {"lo"}},
                aps=("li", "lo"))


class TestExamples:
    @pytest.mark.parametrize("engine", ENGINES)
    def test_exists_globally(self, engine):
        v = engine(SELF_P, parse_sentence("exists x. G p[x]"))
        assert v.result == "holds" and v.witness == {"x": Lasso((), (P,))}

    @pytest.mark.parametrize("engine", ENGINES)
    def test_forall_globally_fails(self, engine):
        assert engine(P_OR_EMPTY, parse_sentence("forall x. G p[x]")).result == "fails"

    @pytest.mark.parametrize("engine", ENGINES)
    def test_diagonal(self, engine):
        s = parse_sentence("forall x. exists y. G (p[x] <-> p[y])")
        assert engine(P_OR_EMPTY, s).result == "holds"

    @pytest.mark.parametrize("engine", ENGINES)
    def test_no_initial_states(self, engine):
        K = K_of(["s0"], [("s0", "s0")], {"s0": P}, init=())
        assert engine(K, parse_sentence("forall x. G p[x] & !p[x]")).result == "holds"
        assert engine(K, parse_sentence("exists x. true")).result == "fails"

    def test_no_fair_cycle_behaves_like_no_traces(self):
        K = K_of(["s0", "s1"], [("s0", "s1"), ("s1", "s1")], {"s0": P}, fair=["s0"])
        assert mc(K, parse_sentence("exists x. true")).result == "fails"
        assert mc(K, parse_sentence("forall x. false")).result == "holds"


class TestSimpleStuttering:
    def test_rewrite_keeps_prefix(self):
        K = K_of(["s0"], [("s0", "s0")], {"s0": {"pe"}}, aps=("pe", "lo"))
        out = synchronizing_rewrite(K, NI)
        assert out.sentence.prefix == NI.prefix
        fresh = [g for g in walk(out.sentence.body)
                 if isinstance(g, Atom) and g.prop.startswith("__at_")]
        assert fresh and all(g.var == "y" for g in fresh)
        assert out.subscript_props == frozenset({"lo"})
        assert fresh[0].prop in out.structure.aps

    def test_rewrite_is_identity_without_subscripts(self):
        s = parse_sentence("forall x. exists y. p[x] <-> p[y]")
        out = synchronizing_rewrite(SELF_P, s)
        assert out.sentence == s and out.structure is SELF_P and not out.names

    def test_observational_determinism_holds(self):
        assert mc_simple_s(od_structure(False), OD).result == "holds"

    def test_observational_determinism_fails(self):
        assert mc_simple_s(od_structure(True), OD).result == "fails"

    @pytest.mark.parametrize("diverge", [False, True])
    def test_od_matches_bounded_oracle(self, diverge):
        K = od_structure(diverge)
        expected = bounded_sentence_check(K, OD, eval_s_qf)
        assert (mc_simple_s(K, OD).result == "holds") == expected

    def test_rejects_non_simple(self):
        s = parse_sentence("forall x. exists y. G[{p}] (p[x] <-> p[y]) & G[{q}] (q[x] <-> q[y])")
        with pytest.raises(FragmentError):
            mc_simple_s(SELF_P, s)


class TestBoundedContext:
    SHIFT = parse_sentence("forall x. exists y. <{y}> X <{x,y}> G (p[x] <-> p[y])")

    def test_shifted_traces(self):
        K = K_of(["s0", "s1"], [("s0", "s1"), ("s1", "s0")], {"s0": E, "s1": P},
                 init=("s0", "s1"))
        assert mc_bounded_c(K, self.SHIFT).result == "holds"

    def test_unshiftable_trace(self):
        K = K_of(["s0", "s1"], [("s0", "s1"), ("s1", "s1")], {"s0": P, "s1": E})
        assert mc_bounded_c(K, self.SHIFT).result == "fails"

    def test_lagging_next_on_empty_loop(self):
        v = mc_bounded_c(SELF_EMPTY, parse_sentence("exists x. <{x}> X X p[x]"))
        assert v.result == "fails"

    def test_rejects_unbounded(self):
        with pytest.raises(FragmentError):
            mc_bounded_c(SELF_P, parse_sentence("forall x. exists y. <{x}> F p[x]"))


class TestSearch:
    def test_unknown_without_witness(self):
        v = bounded_witness_search(SELF_EMPTY, parse_sentence("exists x. F p[x]"))
        assert v.result == "unknown" and v.witness is None

    def test_finds_context_witness(self):
        K = K_of(["s0", "s1"], [("s0", "s1"), ("s1", "s1")], {"s0": E, "s1": P})
        s = parse_sentence("exists x. exists y. <{y}> X (p[y] & !p[x])")
        v = bounded_witness_search(K, s)
        assert v.result == "holds"
        assert eval_c_qf(s.body, v.witness)

    def test_rejects_universal(self):
        with pytest.raises(FragmentError):
            bounded_witness_search(SELF_P, parse_sentence("forall x. p[x]"))


class TestDispatch:
    @pytest.mark.parametrize("text, engine", [
        ("forall x. exists y. G (p[x] <-> p[y])", "hyperltl"),
        ("forall x. exists y. G[{p}] (p[x] <-> p[y])", "simple-s"),
        ("forall x. exists y. <{x}> X p[x] & G q[y]", "bounded-c"),
        ("exists x. exists y. <{x}> F p[x]", "bounded-search"),
        ("forall x. exists y. F cA[x] -> (F cA[y] & X[{F cA}] "
         "((!rA[x] & !rA[y]) U[{F cA}] (rA[x] & !rA[y])))", "simple-s"),
    ])
    def test_choice(self, text, engine):
        assert choose_engine(parse_sentence(text)) == engine

    def test_undecidable(self):
        with pytest.raises(FragmentError):
            choose_engine(parse_sentence("forall x. forall y. <{x}> F p[y]"))

    def test_forced_mismatch(self):
        with pytest.raises(FragmentError):
            mc(SELF_P, parse_sentence("forall x. G[{p}] p[x]"), engine="hyperltl")
        with pytest.raises(ValueError):
            mc(SELF_P, parse_sentence("exists x. p[x]"), engine="magic")

    def test_state_limit(self):
        s = parse_sentence("forall x. exists y. G (p[x] <-> X p[y])")
        with pytest.raises(StateLimitExceeded):
            mc(P_OR_EMPTY, s, max_states=2)


class TestRouteEquivalence:
    def test_three_engines_agree(self):
        r = gen.rng(5)
        for _ in range(15):
            K = gen.kripke(r, r.randint(1, 4), ("p", "q"))
            s = gen.plain_sentence(r)
            verdicts = {f.__name__: f(K, s).result for f in ENGINES}
            assert len(set(verdicts.values())) == 1, (s, verdicts)

    @settings(max_examples=30)
    @given(hs.kripkes(max_states=3), hs.s_bodies(variables=("x",), gamma=None, max_leaves=4))
    def test_universal_duality(self, K, body):
        forall = HyperSentence((("forall", "x"),), body)
        exists = HyperSentence((("exists", "x"),), Not(body))
        assert mc(K, forall).holds == (not mc(K, exists).holds)

    @settings(max_examples=30)
    @given(hs.kripkes(max_states=3), hs.s_bodies(gamma=None, max_leaves=4))
    def test_existential_witnesses_replay(self, K, body):
        s = HyperSentence((("exists", "x"), ("exists", "y")), body)
        v = mc(K, s)
        if v.result == "holds":
            assert set(v.witness) == {"x", "y"}
            assert eval_s_qf(body, v.witness)
            assert all(generates(K, w) for w in v.witness.values())


def test_bounded_search_agrees_when_conclusive():
    r = random.Random(gen.SEED + 9)
    for _ in range(15):
        K = gen.kripke(r, r.randint(1, 3), ("p", "q"))
        s = HyperSentence((("exists", "x"), ("exists", "y")), gen.s_body_sized(r, ["x", "y"], 6))
        v = bounded_witness_search(K, s, max_stem=3, max_loop=2)
        if v.result == "holds":
            assert mc_hyperltl(K, s).result == "holds"
            assert eval_s_qf(s.body, v.witness)
