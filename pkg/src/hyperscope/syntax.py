"""Formula trees, the concrete grammar, normal forms and fragment checks.

One node family covers every logic handled by the package.  LTL formulas
use ``Prop`` leaves; quantifier-free hyper formulas use ``Atom`` leaves
(a proposition indexed by a trace variable).  Temporal nodes carry a
subscript set ``gamma`` (empty for the unrelativized operators) and
hyper formulas may also contain ``Context`` nodes.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from typing import Iterable, Iterator


class Formula:
    """Base class with structural equality and a cached hash."""

    __slots__ = ()

    def _key(self) -> tuple:
        return tuple(getattr(self, f.name) for f in dataclasses.fields(self))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented if not isinstance(other, Formula) else False
        if hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __hash__(self) -> int:
        cached = self.__dict__.get("_hash")
        if cached is None:
            cached = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_hash", cached)
        return cached

    def __repr__(self) -> str:
        return f"{type(self).__name__}({show(self)})"

    def __str__(self) -> str:
        return show(self)


GammaSet = frozenset
EMPTY: frozenset = frozenset()


@dataclass(frozen=True, eq=False, repr=False)
class Top(Formula):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class Prop(Formula):
    name: str


@dataclass(frozen=True, eq=False, repr=False)
class Atom(Formula):
    prop: str
    var: str


@dataclass(frozen=True, eq=False, repr=False)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, eq=False, repr=False)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False, repr=False)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False, repr=False)
class Next(Formula):
    arg: Formula
    gamma: frozenset = EMPTY


@dataclass(frozen=True, eq=False, repr=False)
class Until(Formula):
    left: Formula
    right: Formula
    gamma: frozenset = EMPTY


@dataclass(frozen=True, eq=False, repr=False)
class Release(Formula):
    left: Formula
    right: Formula
    gamma: frozenset = EMPTY


@dataclass(frozen=True, eq=False, repr=False)
class Context(Formula):
    vars: frozenset
    arg: Formula


TRUE = Top()
FALSE = Not(TRUE)
TEMPORAL = (Next, Until, Release)


# -- smart constructors -------------------------------------------------------

def neg(f: Formula) -> Formula:
    return f.arg if isinstance(f, Not) else Not(f)


def conj(parts: Iterable[Formula]) -> Formula:
    result = None
    for p in parts:
        result = p if result is None else And(result, p)
    return TRUE if result is None else result


def disj(parts: Iterable[Formula]) -> Formula:
    result = None
    for p in parts:
        result = p if result is None else Or(result, p)
    return FALSE if result is None else result


def implies(a: Formula, b: Formula) -> Formula:
    return Or(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return And(implies(a, b), implies(b, a))


def eventually(f: Formula, gamma: frozenset = EMPTY) -> Formula:
    return Until(TRUE, f, gamma)


def always(f: Formula, gamma: frozenset = EMPTY) -> Formula:
    return Release(FALSE, f, gamma)


# -- traversal ----------------------------------------------------------------

def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Not, Next, Context)):
        return (f.arg,)
    if isinstance(f, (And, Or, Until, Release)):
        return (f.left, f.right)
    return ()


def subformulas(f: Formula) -> set[Formula]:
    seen: set[Formula] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        stack.extend(children(g))
    return seen


def walk(f: Formula) -> Iterator[Formula]:
    """Pre-order, left to right."""
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def subscripts(f: Formula) -> list[frozenset]:
    """Distinct subscript sets of temporal nodes, in first-occurrence order."""
    out: list[frozenset] = []
    for g in walk(f):
        if isinstance(g, TEMPORAL) and g.gamma not in out:
            out.append(g.gamma)
    return out


def variables_of(f: Formula) -> list[str]:
    """Trace variables in first-occurrence order."""
    out: list[str] = []
    for g in walk(f):
        names: Iterable[str] = ()
        if isinstance(g, Atom):
            names = (g.var,)
        elif isinstance(g, Context):
            names = sorted(g.vars)
        for v in names:
            if v not in out:
                out.append(v)
    return out


def props_of(f: Formula) -> set[str]:
    """Propositions, including those inside subscripts."""
    out: set[str] = set()
    for g in walk(f):
        if isinstance(g, Prop):
            out.add(g.name)
        elif isinstance(g, Atom):
            out.add(g.prop)
        if isinstance(g, TEMPORAL):
            for theta in g.gamma:
                out |= props_of(theta)
    return out


def has_context(f: Formula) -> bool:
    return any(isinstance(g, Context) for g in walk(f))


def context_depth(f: Formula) -> int:
    """Nesting depth of context modalities."""
    inner = max((context_depth(g) for g in children(f)), default=0)
    return inner + 1 if isinstance(f, Context) else inner


def has_subscripts(f: Formula) -> bool:
    return any(isinstance(g, TEMPORAL) and g.gamma for g in walk(f))


def is_temporal_free(f: Formula) -> bool:
    return not any(isinstance(g, TEMPORAL + (Context,)) for g in walk(f))


def map_formula(f: Formula, fn) -> Formula:
    """Rebuild ``f`` bottom-up, applying ``fn`` to every rebuilt node."""
    if isinstance(f, (Not, Next, Context)):
        f = dataclasses.replace(f, arg=map_formula(f.arg, fn))
    elif isinstance(f, (And, Or, Until, Release)):
        f = dataclasses.replace(f, left=map_formula(f.left, fn), right=map_formula(f.right, fn))
    return fn(f)


# -- printing -----------------------------------------------------------------

def _show_gamma(gamma: frozenset) -> str:
    if not gamma:
        return ""
    return "[{" + ", ".join(sorted(show(t) for t in gamma)) + "}]"


def show(f: Formula) -> str:
    """Deterministic, fully parenthesized concrete syntax (re-parsable)."""
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Atom):
        return f"{f.prop}[{f.var}]"
    if isinstance(f, Not):
        if isinstance(f.arg, Top):
            return "false"
        return f"!{show(f.arg)}"
    if isinstance(f, And):
        return f"({show(f.left)} & {show(f.right)})"
    if isinstance(f, Or):
        return f"({show(f.left)} | {show(f.right)})"
    if isinstance(f, Next):
        return f"X{_show_gamma(f.gamma)} {show(f.arg)}"
    if isinstance(f, Until):
        if isinstance(f.left, Top):
            return f"F{_show_gamma(f.gamma)} {show(f.right)}"
        return f"({show(f.left)} U{_show_gamma(f.gamma)} {show(f.right)})"
    if isinstance(f, Release):
        if f.left == FALSE:
            return f"G{_show_gamma(f.gamma)} {show(f.right)}"
        return f"({show(f.left)} R{_show_gamma(f.gamma)} {show(f.right)})"
    if isinstance(f, Context):
        return "<{" + ",".join(sorted(f.vars)) + "}> " + show(f.arg)
    raise TypeError(f"not a formula: {f!r}")


# -- sentences ----------------------------------------------------------------

@dataclass(frozen=True)
class HyperSentence:
    prefix: tuple[tuple[str, str], ...]
    body: Formula

    @property
    def variables(self) -> list[str]:
        return [v for _, v in self.prefix]

    def __str__(self) -> str:
        return show_sentence(self)


def show_sentence(s: HyperSentence) -> str:
    head = " ".join(f"{q} {v}." for q, v in s.prefix)
    return f"{head} {show(s.body)}"


# -- parsing ------------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_']*)"
    r"|(?P<op><->|->|[!&|()\[\]{}<>,.])"
)
KEYWORDS = {"X", "F", "G", "U", "R", "true", "false", "forall", "exists"}


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
        elif kind == "op":
            tokens.append(Token(m.group(), m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, bound: set[str] | None = None):
        self.tokens = tokenize(text)
        self.i = 0
        self.bound = bound
        self.first_gsub: Token | None = None
        self.first_context: Token | None = None
        self.outer_subscripts = False

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def take(self, kind: str, text: str | None = None) -> Token:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        self.i += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def expect_end(self) -> None:
        if not self.at("eof"):
            raise self.error(f"unexpected {self.tok.text!r}")

    # precedence climbing: iff/implies < or < and < U/R < unary
    def formula(self, ltl: bool) -> Formula:
        left = self.disjunction(ltl)
        if self.at("->"):
            self.take("->")
            return implies(left, self.formula(ltl))
        if self.at("<->"):
            self.take("<->")
            return iff(left, self.formula(ltl))
        return left

    def disjunction(self, ltl: bool) -> Formula:
        f = self.conjunction(ltl)
        while self.at("|"):
            self.take("|")
            f = Or(f, self.conjunction(ltl))
        return f

    def conjunction(self, ltl: bool) -> Formula:
        f = self.binary_temporal(ltl)
        while self.at("&"):
            self.take("&")
            f = And(f, self.binary_temporal(ltl))
        return f

    def binary_temporal(self, ltl: bool) -> Formula:
        left = self.unary(ltl)
        if self.at("kw", "U") or self.at("kw", "R"):
            op = self.take("kw").text
            gamma = self.gsub(ltl)
            right = self.binary_temporal(ltl)
            return Until(left, right, gamma) if op == "U" else Release(left, right, gamma)
        return left

    def gsub(self, ltl: bool) -> frozenset:
        if not (self.at("[") and self.peek().kind == "{"):
            return EMPTY
        start = self.tok
        if ltl and not self.outer_subscripts:
            raise self.error("subscripts are not allowed inside subscripts")
        self.take("[")
        self.take("{")
        items: list[Formula] = []
        outer, self.outer_subscripts = self.outer_subscripts, False
        if not self.at("}"):
            items.append(self.formula(ltl=True))
            while self.at(","):
                self.take(",")
                items.append(self.formula(ltl=True))
        self.outer_subscripts = outer
        self.take("}")
        self.take("]")
        if self.first_gsub is None and items:
            self.first_gsub = start
        return frozenset(items)

    def unary(self, ltl: bool) -> Formula:
        tok = self.tok
        if tok.kind == "!":
            self.take("!")
            return Not(self.unary(ltl))
        if tok.kind == "kw" and tok.text in ("X", "F", "G"):
            self.take("kw")
            gamma = self.gsub(ltl)
            arg = self.unary(ltl)
            if tok.text == "X":
                return Next(arg, gamma)
            if tok.text == "F":
                return eventually(arg, gamma)
            return always(arg, gamma)
        if tok.kind == "<":
            if ltl:
                raise self.error("context modalities are not allowed in LTL formulas")
            self.take("<")
            self.take("{")
            names: list[str] = []
            if not self.at("}"):
                names.append(self.variable().text)
                while self.at(","):
                    self.take(",")
                    names.append(self.variable().text)
            self.take("}")
            self.take(">")
            if not names:
                raise self.error("empty context set", tok)
            if self.first_context is None:
                self.first_context = tok
            return Context(frozenset(names), self.unary(ltl))
        return self.primary(ltl)

    def variable(self) -> Token:
        tok = self.take("ident")
        if self.bound is not None and tok.text not in self.bound:
            raise self.error(f"unbound trace variable {tok.text!r}", tok)
        return tok

    def primary(self, ltl: bool) -> Formula:
        tok = self.tok
        if tok.kind == "kw" and tok.text == "true":
            self.take("kw")
            return TRUE
        if tok.kind == "kw" and tok.text == "false":
            self.take("kw")
            return FALSE
        if tok.kind == "(":
            self.take("(")
            f = self.formula(ltl)
            self.take(")")
            return f
        if tok.kind == "ident":
            self.take("ident")
            if ltl:
                return Prop(tok.text)
            self.take("[")
            var = self.variable()
            self.take("]")
            return Atom(tok.text, var.text)
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}")

    def check_mixed(self) -> None:
        if self.first_gsub is not None and self.first_context is not None:
            later = max(self.first_gsub, self.first_context, key=lambda t: (t.line, t.col))
            raise self.error("a body cannot mix subscripted modalities and contexts", later)


def parse_sentence(text: str) -> HyperSentence:
    p = _Parser(text, bound=set())
    prefix: list[tuple[str, str]] = []
    while p.at("kw", "forall") or p.at("kw", "exists"):
        q = p.take("kw").text
        tok = p.take("ident")
        if tok.text in p.bound:
            raise p.error(f"duplicate quantifier variable {tok.text!r}", tok)
        p.bound.add(tok.text)
        p.take(".")
        prefix.append((q, tok.text))
    if not prefix:
        raise p.error("expected a quantifier")
    body = p.formula(ltl=False)
    p.expect_end()
    p.check_mixed()
    return HyperSentence(tuple(prefix), body)


def parse_body(text: str) -> Formula:
    """Quantifier-free hyper formula with free trace variables."""
    p = _Parser(text)
    body = p.formula(ltl=False)
    p.expect_end()
    p.check_mixed()
    return body


def parse_ltl(text: str, subscripts: bool = False) -> Formula:
    """Propositional LTL; ``subscripts`` admits one level of ``[{...}]``."""
    p = _Parser(text)
    p.outer_subscripts = subscripts
    f = p.formula(ltl=True)
    p.expect_end()
    return f


# -- normal forms and measures ------------------------------------------------

def to_nnf(f: Formula) -> Formula:
    """Push negations down to leaves (``Not(Top)`` stays as the constant false)."""
    if isinstance(f, Not):
        return _negated_nnf(f.arg)
    if isinstance(f, (Top, Prop, Atom)):
        return f
    if isinstance(f, (Next, Context)):
        return dataclasses.replace(f, arg=to_nnf(f.arg))
    return dataclasses.replace(f, left=to_nnf(f.left), right=to_nnf(f.right))


def _negated_nnf(f: Formula) -> Formula:
    if isinstance(f, (Top, Prop, Atom)):
        return Not(f)
    if isinstance(f, Not):
        return to_nnf(f.arg)
    if isinstance(f, And):
        return Or(_negated_nnf(f.left), _negated_nnf(f.right))
    if isinstance(f, Or):
        return And(_negated_nnf(f.left), _negated_nnf(f.right))
    if isinstance(f, Next):
        return Next(_negated_nnf(f.arg), f.gamma)
    if isinstance(f, Until):
        return Release(_negated_nnf(f.left), _negated_nnf(f.right), f.gamma)
    if isinstance(f, Release):
        return Until(_negated_nnf(f.left), _negated_nnf(f.right), f.gamma)
    if isinstance(f, Context):
        return Context(f.vars, _negated_nnf(f.arg))
    raise TypeError(f"not a formula: {f!r}")


def is_nnf(f: Formula) -> bool:
    return all(
        not isinstance(g, Not) or isinstance(g.arg, (Top, Prop, Atom)) for g in walk(f)
    )


def size_of(f: Formula) -> int:
    """Distinct subformulas, plus distinct subformulas of subscript formulas."""
    gamma_subs: set[Formula] = set()
    for gamma in subscripts(f):
        for theta in gamma:
            gamma_subs |= subformulas(theta)
    return len(subformulas(f)) + len(gamma_subs)


def erase_subscripts_body(f: Formula) -> Formula:
    def strip(g: Formula) -> Formula:
        if isinstance(g, TEMPORAL) and g.gamma:
            return dataclasses.replace(g, gamma=EMPTY)
        return g
    return map_formula(f, strip)


def erase_subscripts(s: HyperSentence) -> HyperSentence:
    if has_context(s.body):
        raise ValueError("erase_subscripts expects a stuttering body")
    return HyperSentence(s.prefix, erase_subscripts_body(s.body))


def alternation_depth(s: HyperSentence) -> int:
    qs = [q for q, _ in s.prefix]
    return sum(1 for a, b in zip(qs, qs[1:]) if a != b)


# -- fragments ----------------------------------------------------------------

def _uniform(f: Formula, gamma: frozenset) -> bool:
    return all(g.gamma == gamma for g in walk(f) if isinstance(g, TEMPORAL))


def decompose_simple(
    f: Formula, gamma: frozenset, prefer_one_variable: bool = False
) -> list[tuple[str, Formula]] | None:
    """Split ``f`` into a Boolean skeleton over uniform and one-variable leaves.

    Returns the leaves tagged ``"uniform"`` or ``"single"``, or None when no
    such split exists for this subscript set.
    """
    one_var = len(variables_of(f)) <= 1
    uniform = _uniform(f, gamma)
    if one_var and prefer_one_variable and not is_temporal_free(f):
        return [("single", f)]
    if uniform:
        return [("uniform", f)]
    if one_var:
        return [("single", f)]
    if isinstance(f, (Not, And, Or)):
        leaves: list[tuple[str, Formula]] = []
        for c in children(f):
            part = decompose_simple(c, gamma, prefer_one_variable)
            if part is None:
                return None
            leaves.extend(part)
        return leaves
    return None


def simple_subscript(f: Formula) -> frozenset | None:
    """The uniform subscript witnessing simplicity, or None."""
    if has_context(f):
        return None
    candidates = subscripts(f) or [EMPTY]
    best = None
    for gamma in sorted(candidates, key=lambda g: (len(g), _show_gamma(g))):
        leaves = decompose_simple(f, gamma)
        if leaves is None:
            continue
        cost = sum(1 for tag, _ in leaves if tag == "single")
        if best is None or cost < best[0]:
            best = (cost, gamma)
    return None if best is None else best[1]


def is_bounded_body(f: Formula, variables: Iterable[str]) -> bool:
    """Until/release only under contexts that contain every variable."""
    everything = frozenset(variables) | frozenset(variables_of(f))

    def ok(g: Formula, global_ctx: bool) -> bool:
        if isinstance(g, (Until, Release)) and not global_ctx:
            return False
        if isinstance(g, Context):
            return ok(g.arg, g.vars >= everything)
        return all(ok(c, global_ctx) for c in children(g))

    return ok(f, True)


@dataclass(frozen=True)
class FragmentInfo:
    alternation_depth: int
    is_hyperltl: bool
    is_simple_s: bool
    simple_gamma: frozenset | None
    is_bounded_c: bool
    bound: int | None
    is_exists_only: bool


def classify(s: HyperSentence) -> FragmentInfo:
    body = s.body
    context = has_context(body)
    plain = not context and not has_subscripts(body)
    gamma = None if context else simple_subscript(body)
    bounded = not has_subscripts(body) and is_bounded_body(body, s.variables)
    return FragmentInfo(
        alternation_depth=alternation_depth(s),
        is_hyperltl=plain,
        is_simple_s=gamma is not None,
        simple_gamma=gamma,
        is_bounded_c=bounded,
        bound=size_of(body) + 1 if bounded else None,
        is_exists_only=all(q == "exists" for q, _ in s.prefix),
    )
