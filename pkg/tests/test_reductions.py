import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import generates, minsky_halts, pcp_solution
from hyperscope.checker import bounded_witness_search
from hyperscope.syntax import alternation_depth, classify, context_depth
from hyperscope.traces import Lasso, eval_c_qf, eval_s_qf
from hyperscope.reductions import (
    InstanceError, MinskyMachine, PcpInstance, format_minsky, minsky_kripke,
    minsky_sentence, parse_minsky, parse_pcp_pairs, pcp_kripke, pcp_normalize,
    pcp_sentence,
)

E = frozenset()


def S(*props):
    return frozenset(props)


def pcp(*pairs):
    return pcp_normalize(PcpInstance.from_strings(pairs))


def machine(text):
    return parse_minsky(text)


ZERO_HALT = "init q0\nhalt h\ntrans q0 zero 1 h\n"
INC_DEC_HALT = "init q0\nhalt h\ntrans q0 inc 1 q1\ntrans q1 dec 1 h\n"
LOOPING = "init q0\nhalt h\ntrans q0 inc 1 q0\n"


def _search(inst_or_machine, kripke, sentence, **bounds):
    return bounded_witness_search(kripke(inst_or_machine), sentence(inst_or_machine), **bounds)


class TestPcp:
    def test_normalize_doubles_short_words(self):
        inst = pcp_normalize(PcpInstance.from_strings([("a", "ab")]))
        assert inst.top == (("a", "a"),) and inst.bottom == (("a", "a", "b", "b"),)
        long = PcpInstance.from_strings([("ab", "ba")])
        assert pcp_normalize(long) is long

    def test_word_trace(self):
        K = pcp_kripke(pcp(("aa", "aa")))
        w = Lasso((S("hash"), S("a", "p1", "q1"), S("a", "hash", "p1", "q1")), (S("hash"),))
        assert generates(K, w)
        assert not generates(K, Lasso((S("hash"), S("a", "p1", "q1")), (S("hash"),)))

    def test_unnormalized_rejected(self):
        with pytest.raises(InstanceError):
            pcp_kripke(PcpInstance.from_strings([("a", "a")]))

    def test_solvable_instance(self):
        inst = pcp(("aa", "aa"))
        assert pcp_solution(["aa"], ["aa"], 3) == (0,)
        v = _search(inst, pcp_kripke, pcp_sentence)
        assert v.result == "holds"
        assert eval_s_qf(pcp_sentence(inst).body, v.witness)

    def test_two_pair_instance(self):
        assert pcp_solution(["a", "ba"], ["ab", "a"], 4) == (0, 1)
        v = _search(parse_pcp_pairs(["a:ab", "ba:a"]), lambda i: pcp_kripke(pcp_normalize(i)),
                    lambda i: pcp_sentence(pcp_normalize(i)), max_stem=12)
        assert v.result == "holds"

    def test_unsolvable_instance(self):
        assert pcp_solution(["aa"], ["bb"], 6) is None
        assert _search(pcp(("aa", "bb")), pcp_kripke, pcp_sentence).result == "unknown"

    def test_classification(self):
        info = classify(pcp_sentence(pcp(("aa", "aa"))))
        assert info.is_exists_only
        assert not (info.is_hyperltl or info.is_simple_s or info.is_bounded_c)

    @pytest.mark.parametrize("pairs", [[], [("", "a")]])
    def test_bad_instances(self, pairs):
        with pytest.raises(InstanceError):
            PcpInstance.from_strings(pairs)

    def test_bad_symbols_and_syntax(self):
        with pytest.raises(InstanceError):
            PcpInstance((("hash",),), (("a",),))
        with pytest.raises(InstanceError):
            PcpInstance((("a",),), ())
        with pytest.raises(InstanceError):
            parse_pcp_pairs(["ab"])


class TestMinsky:
    def test_zero_test_then_halt(self):
        M = machine(ZERO_HALT)
        K = minsky_kripke(M)
        code = Lasso((S("d0"), S("d0", "beg1"), S("d0", "beg2")), (E,))
        assert generates(K, code)
        assert minsky_halts(M.transitions, M.init, M.halt, 5) == 1
        v = bounded_witness_search(K, minsky_sentence(M))
        assert v.result == "holds"
        assert eval_c_qf(minsky_sentence(M).body, v.witness)

    def test_increment_then_decrement(self):
        M = machine(INC_DEC_HALT)
        assert minsky_halts(M.transitions, M.init, M.halt, 5) == 2
        v = bounded_witness_search(minsky_kripke(M), minsky_sentence(M), max_stem=12)
        assert v.result == "holds"

    def test_decrement_of_zero_is_not_a_computation(self):
        M = machine("init q0\nhalt h\ntrans q0 dec 1 h\n")
        assert minsky_halts(M.transitions, M.init, M.halt, 5) is None
        K = minsky_kripke(M)
        assert not K.initial
        assert bounded_witness_search(K, minsky_sentence(M)).result == "unknown"

    def test_non_halting(self):
        M = machine(LOOPING)
        assert minsky_halts(M.transitions, M.init, M.halt, 40) is None
        v = bounded_witness_search(minsky_kripke(M), minsky_sentence(M), max_stem=10)
        assert v.result == "unknown"

    def test_classification(self):
        s = minsky_sentence(machine(INC_DEC_HALT))
        info = classify(s)
        assert info.is_exists_only and len(s.prefix) == 2
        assert alternation_depth(s) == 0 and context_depth(s.body) == 2
        assert not (info.is_simple_s or info.is_bounded_c)

    @given(st.lists(st.tuples(st.sampled_from(["a", "b", "h"]), st.sampled_from(["inc", "dec", "zero"]),
                              st.sampled_from([1, 2]), st.sampled_from(["a", "b", "h"])), max_size=4))
    def test_round_trip(self, trans):
        trans = [t for t in trans if t[0] != "h"]
        M = MinskyMachine(("a", "b", "h"), "a", "h", tuple(trans))
        back = parse_minsky(format_minsky(M))
        assert (back.init, back.halt, back.transitions) == (M.init, M.halt, M.transitions)

    @pytest.mark.parametrize("text", [
        "init q\nhalt q\n",
        "init q\nhalt h\ntrans h inc 1 q\n",
        "init q\nhalt h\ntrans q jump 1 h\n",
        "init q\nhalt h\ntrans q inc 3 h\n",
        "init q\ntrans q inc 1 h\n",
        "init q\nhalt h\nfoo\n",
    ])
    def test_bad_machines(self, text):
        with pytest.raises(InstanceError):
            parse_minsky(text)
