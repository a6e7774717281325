from pathlib import Path

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import gen
import strategies as hs
from oracles import gnba_member, nba_member_graph
from hyperscope.automata import (
    PFALSE, PTRUE, Aba, Alphabet, ExplicitNba, Gnba, NAawa, StateLimitExceeded,
    a_gamma, aawa_accepts_lasso, at_name, complement_nba, complement_safra,
    degeneralize, dump_aawa, dump_nba, empty_nba, explore, intersect, is_empty,
    lasso_member, ltl_to_gnba, ltl_to_nba, mh_dealternate, pand, patom, por,
    project, restrict, universal, window_aba,
)
from hyperscope.syntax import (
    EMPTY, Atom, HyperSentence, Prop, Until, always, classify, eventually, map_formula,
    parse_body, parse_ltl, size_of, to_nnf,
)
from hyperscope.traces import Lasso, eval_c_qf, ltl_eval
from hyperscope.translations import c_qf_to_aawa, s_qf_to_aawa

p, q = Prop("p"), Prop("q")
P, Q, E = frozenset("p"), frozenset("q"), frozenset()
PQ = ("p", "q")
GOLDEN = Path(__file__).parent / "golden"


def L(stem, loop):
    return Lasso(tuple(stem), tuple(loop))


@st.composite
def gnbas(draw):
    al = Alphabet(("p",))
    n = draw(st.integers(1, 3))
    qs = st.integers(0, n - 1)
    succ = {i: tuple(draw(st.frozensets(qs, max_size=2))) for i in range(n)}
    label = {i: draw(st.sampled_from(hs.CUBES)) for i in range(n)}
    acc = draw(st.lists(st.frozensets(qs), max_size=2))
    return Gnba(al, tuple(draw(st.frozensets(qs, min_size=1))), succ, label, acc)


class TestAlphabet:
    def test_encode_decode(self):
        al = Alphabet(PQ, 2)
        a = al.encode_tuple([{"p"}, {"q"}])
        assert a == 0b1001
        assert al.decode(a) == (P, Q)

    @given(st.integers(0, 15), st.integers(0, 2), st.integers(0, 3))
    def test_insert_then_remove(self, letter, comp, value):
        al = Alphabet(PQ, 3)
        wide = al.insert(letter, comp, value)
        assert al.component(wide, comp) == value
        assert al.remove(wide, comp) == letter


class TestLtlToNba:
    def test_examples(self):
        a = ltl_to_nba(Until(p, q), PQ)
        assert lasso_member(a, L([P, P], [Q]))
        assert not lasso_member(a, L([P], [E]))
        assert lasso_member(ltl_to_nba(always(eventually(p))), L([E], [E, P]))

    @given(hs.ltl(), hs.lassos())
    def test_expansion_route_matches_evaluator(self, theta, w):
        assert lasso_member(ltl_to_nba(theta, PQ), w) == ltl_eval(theta, w)

    @given(hs.ltl(max_leaves=4), hs.lassos())
    def test_tableau_route_matches_evaluator(self, theta, w):
        a = degeneralize(ltl_to_gnba(theta, PQ))
        assert lasso_member(a, w) == ltl_eval(theta, w)

    @given(hs.ltl(), hs.lassos())
    def test_membership_agrees_with_graph_oracle(self, theta, w):
        a = ltl_to_nba(theta, PQ)
        assert lasso_member(a, w) == nba_member_graph(a, w)


class TestDegeneralize:
    def test_no_sets_means_all_accepting(self):
        al = Alphabet(("p",))
        g = Gnba(al, (0,), {0: (0,)}, {0: (1, 1)}, [])
        a = degeneralize(g)
        assert a.accepting == {(0, 0)}
        assert lasso_member(a, L([], [P])) and not lasso_member(a, L([], [E]))

    def test_two_sets_need_both(self):
        al = Alphabet(("p",))
        g = Gnba(al, (0, 1), {0: (0, 1), 1: (0, 1)}, {0: (1, 1), 1: (1, 0)},
                 [frozenset({0}), frozenset({1})])
        a = degeneralize(g)
        assert lasso_member(a, L([], [P, E]))
        assert not lasso_member(a, L([P], [E]))
        assert not lasso_member(a, L([E], [P]))

    @given(gnbas(), hs.lassos(("p",)))
    def test_matches_generalized_oracle(self, g, w):
        assert lasso_member(degeneralize(g), w) == gnba_member(g, w)


class TestEmptiness:
    @given(hs.nbas())
    def test_witness_is_accepted(self, a):
        wit = is_empty(a)
        if wit is not None:
            (w,) = wit.lassos()
            assert lasso_member(a, w) and nba_member_graph(a, w)

    @given(hs.ltl())
    def test_empty_iff_unsatisfiable_on_short_lassos(self, theta):
        wit = is_empty(ltl_to_nba(theta, PQ))
        if wit is None:
            sample = [L(s, l) for s in ([], [P], [Q]) for l in ([E], [P], [P, Q], [Q, E])]
            assert not any(ltl_eval(theta, w) for w in sample)
        else:
            assert ltl_eval(theta, wit.lassos()[0])

    def test_state_limit(self):
        with pytest.raises(StateLimitExceeded):
            explore(ltl_to_nba(parse_ltl("G F p & G F q & (p U q)")), max_states=1)


class TestComplement:
    @given(hs.nbas(), hs.lassos(("p",)))
    def test_rank_based_is_total(self, a, w):
        assert lasso_member(complement_nba(a), w) != lasso_member(a, w)

    @given(hs.nbas(), hs.lassos(("p",)))
    def test_safra_is_total(self, a, w):
        assert lasso_member(complement_safra(a), w) != lasso_member(a, w)

    def test_complement_of_infinitely_many_p(self):
        a = ltl_to_nba(always(eventually(p)))
        c = complement_safra(a)
        assert lasso_member(c, L([P], [E])) and not lasso_member(c, L([], [P, E]))

    @given(hs.nbas())
    def test_intersection_with_complement_is_empty(self, a):
        assert is_empty(intersect(a, complement_safra(a))) is None


class TestProducts:
    def test_intersect(self):
        a = intersect(ltl_to_nba(always(eventually(p)), ["p"]),
                      ltl_to_nba(eventually(always(p)), ["p"]))
        assert lasso_member(a, L([], [P]))
        assert not lasso_member(a, L([], [P, E]))

    def test_intersect_with_universal_and_empty(self):
        a = ltl_to_nba(eventually(p), ["p"])
        al = Alphabet(("p",))
        assert lasso_member(intersect(a, universal(al)), L([E], [P]))
        assert is_empty(intersect(a, empty_nba(al))) is None

    def test_project_keeps_restricted_witnesses(self):
        al2 = Alphabet(("p",), 2)
        same = ExplicitNba(al2, [0], {0: [(0b11, 0b11, 0), (0b11, 0, 0)]}, [0])
        only_p = ltl_to_nba(always(p), ["p"])
        out = project(same, 1, only_p)
        assert lasso_member(out, L([], [P]))
        assert not lasso_member(out, L([P], [E]))

    def test_restrict(self):
        al2 = Alphabet(("p",), 2)
        out = restrict(universal(al2), 0, ltl_to_nba(always(p), ["p"]))
        assert lasso_member(out, (L([], [P]), L([], [E])))
        assert not lasso_member(out, (L([], [E]), L([], [P])))

    def test_project_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            project(universal(Alphabet(("p",))), 0, universal(Alphabet(("p",))))
        with pytest.raises(ValueError):
            project(universal(Alphabet(("p",), 2)), 0, universal(Alphabet(("q",))))


class TestAGamma:
    @given(hs.gammas(), hs.lassos())
    def test_annotation_is_truthful(self, gamma, w):
        assume(gamma)
        a, names = a_gamma(gamma, PQ)
        annotated = Lasso(
            *(tuple(l | {names[t] for t in gamma if ltl_eval(t, w, k0 + i)}
                    for i, l in enumerate(part))
              for part, k0 in ((w.stem, 0), (w.loop, len(w.stem))))
        )
        assert lasso_member(a, annotated)

    @given(hs.gammas(), hs.lassos(), st.integers(0, 4))
    def test_annotation_is_unique(self, gamma, w, flip):
        fresh = [t for t in gamma if not isinstance(t, Prop)]
        assume(fresh)
        a, names = a_gamma(gamma, PQ)
        theta = fresh[0]
        n = len(w.stem) + len(w.loop)
        k = flip % n

        def mark(i, letter):
            bits = {names[t] for t in fresh if ltl_eval(t, w, i)}
            if i == k:
                bits ^= {names[theta]}
            return letter | bits

        stem = tuple(mark(i, l) for i, l in enumerate(w.stem))
        loop = tuple(mark(len(w.stem) + i, l) for i, l in enumerate(w.loop))
        assert not lasso_member(a, Lasso(stem, loop))

    def test_names(self):
        assert at_name(p) == "p"
        assert at_name(eventually(p)).startswith("__at_")
        _, names = a_gamma({p}, PQ)
        assert names == {p: "p"}
        with pytest.raises(ValueError):
            a_gamma(set(), PQ)


def _or_aba(letters, branches):
    al = Alphabet(("p",))

    def delta(qs, letter):
        if qs == "init":
            return branches
        return PTRUE if al.decode(letter)[0] == frozenset(qs) else PFALSE

    return Aba(al, letters, "init", delta, lambda s: True)


class TestMiyanoHayashi:
    def test_pure_disjunction_is_nondeterminism(self):
        al = Alphabet(("p",))
        aba = _or_aba(al.all_letters(), por(patom(("p",)), patom(())))
        nba = mh_dealternate(aba)
        for w in [L([], [P]), L([E], [P]), L([P], [E])]:
            assert lasso_member(nba, w)

    def test_conjunction_of_contradictions_is_empty(self):
        al = Alphabet(("p",))
        aba = _or_aba(al.all_letters(), pand(patom(("p",)), patom(())))
        assert is_empty(mh_dealternate(aba)) is None

    def test_false_and_true(self):
        al = Alphabet(("p",))
        assert is_empty(mh_dealternate(_or_aba(al.all_letters(), PFALSE))) is None
        assert lasso_member(mh_dealternate(_or_aba(al.all_letters(), PTRUE)), L([], [E]))

    def test_rejecting_loop_blocks(self):
        al = Alphabet(("p",))
        aba = Aba(al, al.all_letters(), 0, lambda s, a: patom(0), lambda s: False)
        assert is_empty(mh_dealternate(aba)) is None


class TestAawaAcceptance:
    def test_game_and_breakpoint_agree(self):
        # the breakpoint route is exponential; cases over budget are counted
        r = gen.rng(3)
        over = 0
        for _ in range(200):
            gs = [gen.gamma_set(r, max_formulas=1, max_size=2), EMPTY]
            body = to_nnf(gen.s_body_sized(r, ["x", "y"], 5, gammas=gs))
            ws = (gen.lasso(r, max_stem=2, max_loop=2), gen.lasso(r, max_stem=2, max_loop=2))
            A = s_qf_to_aawa(body, ["x", "y"], PQ)
            try:
                mh = aawa_accepts_lasso(A, ws, "mh", max_states=20_000)
            except StateLimitExceeded:
                over += 1
                continue
            assert mh == aawa_accepts_lasso(A, ws, "game")
        assert over <= 10

    def test_unknown_method(self):
        A = c_qf_to_aawa(parse_body("p[x]"), ["x"], PQ)
        with pytest.raises(ValueError):
            aawa_accepts_lasso(A, (L([], [P]),), "magic")

    def test_arity_checked(self):
        A = c_qf_to_aawa(parse_body("p[x]"), ["x"], PQ)
        with pytest.raises(ValueError):
            aawa_accepts_lasso(A, (L([], [P]), L([], [P])))


def _window_member(body, variables, k, ws):
    A = c_qf_to_aawa(body, variables, PQ)
    return lasso_member(mh_dealternate(window_aba(A, k)), tuple(ws))


class TestWindow:
    @given(hs.ltl(max_leaves=4), hs.lassos())
    def test_one_trace_window_is_the_automaton(self, theta, w):
        body = map_formula(theta, lambda g: Atom(g.name, "x") if isinstance(g, Prop) else g)
        assert _window_member(body, ["x"], 1, [w]) == ltl_eval(theta, w)

    def test_lagging_context(self):
        body = parse_body("<{x}> X X p[x] & q[y]")
        k = size_of(body) + 1
        assert _window_member(body, ["x", "y"], k, [L([E, E], [P]), L([], [Q])])
        assert not _window_member(body, ["x", "y"], k, [L([E, E], [E]), L([], [Q])])
        assert not _window_member(body, ["x", "y"], k, [L([E, E], [P]), L([], [E])])

    def test_small_window_kills_lagging_branches(self):
        body = parse_body("<{x}> X X p[x]")
        assert not _window_member(body, ["x", "y"], 1, [L([E, E], [P]), L([], [Q])])

    @given(hs.c_bodies(max_leaves=4), hs.lassos(max_stem=2, max_loop=2),
           hs.lassos(max_stem=2, max_loop=2))
    def test_bounded_bodies_match_evaluator(self, body, u, v):
        info = classify(HyperSentence((("exists", "x"), ("exists", "y")), body))
        assume(info.is_bounded_c)
        got = _window_member(body, ["x", "y"], info.bound, [u, v])
        assert got == eval_c_qf(body, {"x": u, "y": v})


class TestDumps:
    def test_nba_dump_is_deterministic(self):
        f = parse_ltl("p U (q & X p)")
        assert dump_nba(ltl_to_nba(f, PQ)) == dump_nba(ltl_to_nba(f, PQ))

    def test_aawa_dump_golden(self):
        A = c_qf_to_aawa(parse_body("p[x] & X q[y]"), ["x", "y"], PQ)
        assert dump_aawa(A, window=3) == (GOLDEN / "aawa_next_across.txt").read_text()

    def test_aawa_dump_limit(self):
        A = NAawa(Alphabet(("p",)), 0, lambda s, a: patom((s + 1, 0)), lambda s: True)
        with pytest.raises(StateLimitExceeded):
            dump_aawa(A, max_states=5)
