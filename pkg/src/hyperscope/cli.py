"""Command-line front end: ``hyperscope mc|translate|eval|gen``.

Exit codes: 0 holds/true, 1 fails/false, 3 unknown, 2 usage, parse,
fragment or resource errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .automata import StateLimitExceeded, dump_aawa, dump_nba, ltl_to_nba
from .checker import ENGINES, FragmentError, Verdict, choose_engine, mc
from .kripke import KripkeError, format_kripke, parse_kripke
from .reductions import (
    InstanceError, minsky_kripke, minsky_sentence, parse_minsky, parse_pcp_pairs,
    pcp_kripke, pcp_normalize, pcp_sentence,
)
from .syntax import (
    Atom, Formula, FragmentInfo, HyperSentence, ParseError, Prop, classify,
    erase_subscripts, erase_subscripts_body, has_context, has_subscripts,
    is_bounded_body, map_formula, parse_body, parse_ltl, parse_sentence, props_of,
    show, show_sentence, size_of, variables_of,
)
from .traces import eval_c_qf, eval_s_qf, format_lasso, parse_assignment
from .translations import c_qf_to_aawa, hyper_qf_to_nba, s_qf_to_aawa, slt_to_ltl

HOLDS, FAILS, USAGE, UNKNOWN = 0, 1, 2, 3
EXIT = {"holds": HOLDS, "fails": FAILS, "unknown": UNKNOWN}

INPUT_ERRORS = (ParseError, KripkeError, FragmentError, InstanceError,
                StateLimitExceeded, OSError, ValueError)


class Failure(click.ClickException):
    exit_code = USAGE

    def show(self, file=None):
        click.echo(f"error: {self.format_message()}", err=True)


def read_source(value: str) -> str:
    """Contents of ``value`` when it names a file, otherwise ``value`` itself."""
    path = Path(value)
    if path.is_file():
        return path.read_text()
    return value


def read_file(value: str) -> str:
    try:
        return Path(value).read_text()
    except OSError as e:
        raise Failure(f"cannot read {value}: {e.strerror or e}") from None


def strip_comments(text: str) -> str:
    return "\n".join(line.split("#", 1)[0] for line in text.splitlines()).strip()


def describe(info: FragmentInfo) -> list[str]:
    lines = [f"alternation depth {info.alternation_depth}"]
    if info.is_hyperltl:
        lines.append("plain HyperLTL body")
    if info.is_simple_s:
        gamma = ", ".join(sorted(show(g) for g in info.simple_gamma))
        lines.append(f"simple stuttering body, subscript {{{gamma}}}")
    if info.is_bounded_c:
        lines.append(f"bounded context body, window k={info.bound}")
    if info.is_exists_only:
        lines.append("existential prefix")
    return lines


def fragment_json(info: FragmentInfo) -> dict:
    gamma = None if info.simple_gamma is None else sorted(show(g) for g in info.simple_gamma)
    return {
        "alternation_depth": info.alternation_depth,
        "is_hyperltl": info.is_hyperltl,
        "is_simple_s": info.is_simple_s,
        "simple_gamma": gamma,
        "is_bounded_c": info.is_bounded_c,
        "bound": info.bound,
        "is_exists_only": info.is_exists_only,
    }


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Model checking of asynchronous hyperproperties on finite fair Kripke structures."""


# -- mc ----------------------------------------------------------------------

@main.command("mc")
@click.option("--kripke", "kripke_path", required=True, help="Kripke structure file.")
@click.option("--formula", "formula", required=True, help="Sentence file or inline sentence.")
@click.option("--engine", type=click.Choice(ENGINES), default="auto", show_default=True)
@click.option("--max-stem", type=click.IntRange(0), default=6, show_default=True,
              help="Stem bound of the bounded witness search.")
@click.option("--max-loop", type=click.IntRange(1), default=2, show_default=True,
              help="Loop bound of the bounded witness search.")
@click.option("--max-states", type=click.IntRange(1), default=None,
              help="Abort once an exploration visits this many states.")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON report.")
def cmd_mc(kripke_path, formula, engine, max_stem, max_loop, max_states, as_json):
    """Decide whether a structure satisfies a sentence."""
    bounds = {"max_stem": max_stem, "max_loop": max_loop, "max_states": max_states}
    try:
        K = parse_kripke(read_file(kripke_path))
        sentence = parse_sentence(strip_comments(read_source(formula)))
        info = classify(sentence)
        chosen = choose_engine(sentence) if engine == "auto" else engine
        verdict = mc(K, sentence, chosen, max_stem, max_loop, max_states)
    except Failure:
        raise
    except INPUT_ERRORS as e:
        if as_json:
            click.echo(json.dumps({"result": "error", "message": str(e)}, sort_keys=True))
        raise Failure(str(e)) from None

    if as_json:
        click.echo(json.dumps(report(verdict, info, bounds), indent=2, sort_keys=True))
    else:
        if engine == "auto":
            click.echo(f"engine: {verdict.engine} (auto: {'; '.join(describe(info))})")
        else:
            click.echo(f"engine: {verdict.engine}")
        click.echo(f"result: {verdict.result}")
        if verdict.witness:
            click.echo("witness:" if verdict.result == "holds" else "counterexample:")
            for var, w in verdict.witness.items():
                click.echo(f"  {var} = {format_lasso(w)}")
        if verdict.stats:
            click.echo("stats: " + " ".join(f"{k}={v}" for k, v in sorted(verdict.stats.items())))
        if verdict.result == "unknown":
            click.echo(f"bounds: max_stem={max_stem} max_loop={max_loop}")
        if verdict.note:
            click.echo(f"note: {verdict.note}")
    sys.exit(EXIT[verdict.result])


def report(verdict: Verdict, info: FragmentInfo, bounds: dict) -> dict:
    witness = None
    if verdict.witness:
        witness = {var: format_lasso(w) for var, w in verdict.witness.items()}
    return {
        "result": verdict.result,
        "engine": verdict.engine,
        "fragment": fragment_json(info),
        "witness": witness,
        "stats": dict(verdict.stats),
        "bounds": bounds,
        "note": verdict.note,
    }


# -- translate ---------------------------------------------------------------

def _one_variable(body: Formula) -> tuple[Formula, str | None]:
    """Drop the trace variable of a body over at most one variable."""
    names = variables_of(body)
    if len(names) > 1:
        raise FragmentError("expected a formula over at most one trace variable")
    var = next(iter(names), None)
    bare = map_formula(body, lambda f: Prop(f.prop) if isinstance(f, Atom) else f)
    return bare, var


def _parse_any(text: str) -> HyperSentence | Formula:
    text = strip_comments(text)
    head = text.split(None, 1)[0] if text else ""
    if head in ("forall", "exists"):
        return parse_sentence(text)
    return parse_body(text)


@main.command("translate")
@click.argument("what", type=click.Choice(["ltls-to-ltl", "erase", "to-aawa", "to-nba"]))
@click.option("--in", "source", required=True, help="Formula file or inline formula.")
@click.option("--max-states", type=click.IntRange(1), default=10_000, show_default=True)
def cmd_translate(what, source, max_states):
    """Print a translation of a formula.

    \b
    ltls-to-ltl  one-variable stuttering formula to plain LTL
    erase        drop every stuttering subscript
    to-aawa      alternating asynchronous automaton of a body
    to-nba       Büchi automaton of a plain body or LTL formula
    """
    try:
        text = strip_comments(read_source(source))
        click.echo(translate(what, text, max_states), nl=False)
    except Failure:
        raise
    except INPUT_ERRORS as e:
        raise Failure(str(e)) from None


def translate(what: str, text: str, max_states: int) -> str:
    if what == "ltls-to-ltl":
        try:
            f, var = parse_ltl(text, subscripts=True), None
        except ParseError:
            body = parse_body(text)
            if has_context(body):
                raise FragmentError("context modalities have no LTL translation") from None
            f, var = _one_variable(body)
        out = slt_to_ltl(f)
        if var is not None:
            out = map_formula(out, lambda g: Atom(g.name, var) if isinstance(g, Prop) else g)
        return show(out) + "\n"

    if what == "erase":
        parsed = _parse_any(text)
        if isinstance(parsed, HyperSentence):
            return show_sentence(erase_subscripts(parsed)) + "\n"
        return show(erase_subscripts_body(parsed)) + "\n"

    if what == "to-aawa":
        body = _parse_any(text)
        if isinstance(body, HyperSentence):
            variables, body = body.variables, body.body
        else:
            variables = variables_of(body)
        if not variables:
            raise FragmentError("the body has no trace variables")
        if has_context(body):
            A = c_qf_to_aawa(body, variables)
            window = size_of(body) + 1 if is_bounded_body(body, variables) else None
        else:
            A = s_qf_to_aawa(body, variables)
            window = None
        return dump_aawa(A, window, max_states)

    # to-nba
    try:
        f = parse_ltl(text)
    except ParseError:
        body = _parse_any(text)
        if isinstance(body, HyperSentence):
            body = body.body
        if has_context(body) or has_subscripts(body):
            raise FragmentError("to-nba needs a plain body; try to-aawa") from None
        return dump_nba(hyper_qf_to_nba(body, variables_of(body)), max_states)
    return dump_nba(ltl_to_nba(f, sorted(props_of(f))), max_states)


# -- eval --------------------------------------------------------------------

@main.command("eval")
@click.option("--formula", "formula", required=True, help="Body file or inline body.")
@click.option("--traces", "traces", required=True, help="Assignment file: lines `x = <lasso>`.")
def cmd_eval(formula, traces):
    """Evaluate a quantifier-free body on an assignment of lassos."""
    try:
        body = parse_body(strip_comments(read_source(formula)))
        assignment = parse_assignment(read_file(traces))
        missing = sorted(set(variables_of(body)) - set(assignment))
        if missing:
            raise Failure("unbound trace variables: " + ", ".join(missing))
        if not assignment:
            raise Failure("the assignment is empty")
        if has_context(body):
            value = eval_c_qf(body, assignment)
        else:
            value = eval_s_qf(body, assignment)
    except Failure:
        raise
    except INPUT_ERRORS as e:
        raise Failure(str(e)) from None
    click.echo("true" if value else "false")
    sys.exit(HOLDS if value else FAILS)


# -- gen ---------------------------------------------------------------------

@main.group("gen")
def cmd_gen():
    """Write a Kripke file and a sentence file for a reduction instance."""


def _write_pair(prefix: str, K, sentence: HyperSentence) -> None:
    kpath, fpath = Path(prefix + ".kripke"), Path(prefix + ".hyper")
    try:
        kpath.write_text(format_kripke(K))
        fpath.write_text(show_sentence(sentence) + "\n")
    except OSError as e:
        raise Failure(f"cannot write {prefix}.*: {e.strerror or e}") from None
    click.echo(f"wrote {kpath} ({len(K.states)} states) and {fpath}")


@cmd_gen.command("pcp")
@click.option("--words", "words", required=True, multiple=True,
              help="Pairs `top:bottom`, separated by spaces or commas; repeatable.")
@click.option("--prefix", default="pcp", show_default=True,
              help="Output files are PREFIX.kripke and PREFIX.hyper.")
def cmd_gen_pcp(words, prefix):
    """Correspondence-problem instance; the sentence holds iff it has a solution."""
    items = [w for chunk in words for w in chunk.replace(",", " ").split()]
    try:
        inst = pcp_normalize(parse_pcp_pairs(items))
        _write_pair(prefix, pcp_kripke(inst), pcp_sentence(inst))
    except InstanceError as e:
        raise Failure(str(e)) from None


@cmd_gen.command("minsky")
@click.option("--spec", "spec", required=True,
              help="Machine file: `init q`, `halt q`, `trans src inc|dec|zero 1|2 dst`.")
@click.option("--prefix", default="minsky", show_default=True,
              help="Output files are PREFIX.kripke and PREFIX.hyper.")
def cmd_gen_minsky(spec, prefix):
    """Two-counter machine; the sentence holds iff the machine halts."""
    try:
        M = parse_minsky(read_file(spec))
        _write_pair(prefix, minsky_kripke(M), minsky_sentence(M))
    except InstanceError as e:
        raise Failure(str(e)) from None


if __name__ == "__main__":
    main()
