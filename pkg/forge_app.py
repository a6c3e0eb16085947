"""
Command-line entry point for the small-cancellation forge.

Every subcommand runs one module operation, prints a human summary (or a
versioned JSON document with --json) and exits with

    0  trivial / certified / success
    1  negative verdict
    2  unknown or heuristic
    64 usage error
"""

import argparse
import json
import logging
import random
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from services.config_service import ConfigService
from services.dehn import (
    MEMBER,
    NONTRIVIAL,
    TRIVIAL,
    QuotientHandle,
    TrivialityVerdict,
    injectivity_certificate,
    is_trivial,
    normal_closure_member_oracle,
    eq_in_quotient,
)
from services.finite_groups import load_finite_group, small_groups
from services.norms import (
    BOUNDED,
    INFINITE,
    cl_bound,
    ell_alpha_bound,
    w_length_bound,
)
from services.relator_forge import (
    AbsorptionSpec,
    SclSpec,
    absorption_relator,
    exponent_floor,
    scl_relator,
    tune_absorption,
    tune_scl,
)
from services.reproduction import repro_remark18
from services.small_cancellation import (
    Presentation,
    load_presentation,
    parse_presentation,
    sc_report,
)
from services.tower import (
    CERTIFIED,
    FAILED,
    inject_goal,
    load_tower,
    new_tower,
    push_stage,
    save_tower,
    survive_goal,
    tower_status,
    eval_word,
)
from services.witness import (
    classify,
    extract_witnesses,
    format_sentence,
    holds_in_finite,
    normalized,
    parse_sentence,
    witness_truth,
)
from services.words import Alphabet, Word, ball, format_word, parse_word
from utils.exceptions import (
    EXIT_NEGATIVE,
    EXIT_OK,
    EXIT_UNKNOWN,
    ForgeError,
    InvalidInputError,
    InvalidSpecError,
)
from utils.log_capture import LogCapture, LogCaptureHandler
from utils.validators import (
    format_rational,
    parse_budget,
    parse_rational,
    validate_input_path,
)


SCHEMA = "forge/1"

VERDICT_EXIT_CODES = {TRIVIAL: EXIT_OK, NONTRIVIAL: EXIT_NEGATIVE}
NORM_EXIT_CODES = {BOUNDED: EXIT_OK, INFINITE: EXIT_NEGATIVE}


class ForgeArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors become ForgeError exit code 64."""

    def error(self, message):
        raise InvalidInputError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one run: configuration file values overridden by flags."""

    command: str
    inputs: tuple[str, ...]
    output: str
    seed: int
    lambda0: Fraction
    epsilon0: Fraction
    oracle_budget: tuple[int, int]
    norm_budget: tuple[int, int]
    tune_cap: int
    threads: int
    reference_limit: int
    neighbour_limit: int
    cnf_cap: int
    finite_budget: int
    log_level: str

    @property
    def piece_options(self) -> dict:
        return {"reference_limit": self.reference_limit, "neighbour_limit": self.neighbour_limit}

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": list(self.inputs),
            "output": self.output,
            "seed": self.seed,
            "lambda0": format_rational(self.lambda0),
            "epsilon0": format_rational(self.epsilon0),
            "oracle_budget": list(self.oracle_budget),
            "norm_budget": list(self.norm_budget),
            "tune_cap": self.tune_cap,
            "threads": self.threads,
            "reference_piece_limit": self.reference_limit,
            "neighbour_piece_limit": self.neighbour_limit,
            "cnf_cap": self.cnf_cap,
            "finite_budget": self.finite_budget,
            "log_level": self.log_level,
        }


def build_run_config(args: argparse.Namespace, config: dict) -> RunConfig:
    """
    Merge the loaded configuration with command-line flags.

    Raises:
        InvalidInputError: If a rational or budget flag is malformed
    """
    command = " ".join(part for part in (args.command, getattr(args, "action", None)) if part)
    inputs = tuple(str(getattr(args, name)) for name in ("presentation", "file", "source", "table")
                   if getattr(args, name, None))
    lambda0 = args.lambda0 if args.lambda0 is not None else config["lambda0"]
    epsilon0 = args.epsilon0 if args.epsilon0 is not None else config["epsilon0"]
    budget = getattr(args, "budget", None)
    log_level = "DEBUG" if args.verbose else config["log_level"]
    return RunConfig(
        command=command,
        inputs=inputs,
        output="json" if args.json else "human",
        seed=args.seed if args.seed is not None else config["seed"],
        lambda0=parse_rational(lambda0, open_unit_interval=True),
        epsilon0=parse_rational(epsilon0, open_unit_interval=True),
        oracle_budget=parse_budget(config["oracle_budget"]),
        norm_budget=parse_budget(budget if budget is not None else config["norm_budget"]),
        tune_cap=config["tune_cap"],
        threads=args.threads if args.threads is not None else config["threads"],
        reference_limit=config["reference_piece_limit"],
        neighbour_limit=config["neighbour_piece_limit"],
        cnf_cap=config["cnf_cap"],
        finite_budget=config["finite_budget"],
        log_level=log_level,
    )


# Input helpers

def _presentation(path: str) -> Presentation:
    return load_presentation(validate_input_path(path))


def _handle(presentation: Presentation, run: RunConfig) -> QuotientHandle:
    return QuotientHandle.build(presentation, run.lambda0, run.epsilon0, **run.piece_options)


def _ambient(args: argparse.Namespace) -> Presentation:
    if args.presentation:
        return _presentation(args.presentation)
    alphabet = Alphabet(tuple(args.gens.split())) if args.gens else Alphabet.standard(args.rank)
    return Presentation(alphabet, ())


def _read_sentence(args: argparse.Namespace):
    if args.file:
        text = validate_input_path(args.file).read_text(encoding="utf-8")
    else:
        text = args.sentence
    return parse_sentence(text)


def _load_quotient(path: str, stage: int | None, run: RunConfig) -> tuple[Alphabet, QuotientHandle | None, int | None]:
    """A tower stage (JSON tower file) or a presentation file; None stands for the free group."""
    file_path = validate_input_path(path)
    text = file_path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        tower = load_tower(file_path)
        k = tower.top.index if stage is None else stage
        return tower.alphabet, tower.stage(k).handle, k
    presentation = parse_presentation(text)
    if not presentation.relators:
        return presentation.alphabet, None, None
    return presentation.alphabet, _handle(presentation, run), None


def _constants(pairs: list[str] | None) -> dict[str, int]:
    values = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep or not name.startswith("$"):
            raise InvalidInputError(f"Constants are given as $name=element, got '{pair}'")
        try:
            values[name] = int(value)
        except ValueError:
            raise InvalidInputError(f"Constant value must be an element index, got '{value}'")
    return values


def _finite_group(args: argparse.Namespace):
    if args.table:
        return load_finite_group(validate_input_path(args.table))
    groups = {group.name: group for group in small_groups()}
    if args.group not in groups:
        raise InvalidInputError(f"Unknown group '{args.group}'. Known groups: {', '.join(groups)}")
    return groups[args.group]


def _verdict_payload(verdict: TrivialityVerdict, alphabet: Alphabet, with_trace: bool) -> dict:
    payload = {
        "status": verdict.status,
        "soundness": verdict.tag,
        "result": format_word(verdict.result, alphabet),
        "steps": len(verdict.trace),
    }
    if with_trace:
        payload["trace"] = [{
            "position": step.position,
            "length": step.length,
            "element": format_word(step.element, alphabet),
            "replacement": format_word(step.replacement, alphabet),
            "wraps": step.wraps,
        } for step in verdict.trace]
    return payload


def _verdict_lines(verdict: TrivialityVerdict, alphabet: Alphabet, with_trace: bool) -> list[str]:
    lines = [f"{verdict.status} ({verdict.tag}), {len(verdict.trace)} Dehn steps, "
             f"reduced word {format_word(verdict.result, alphabet)}"]
    if with_trace:
        for number, step in enumerate(verdict.trace, 1):
            kind = "wrap" if step.wraps else "step"
            lines.append(f"  {kind} {number}: at {step.position} replace {step.length} letters of "
                         f"{format_word(step.element, alphabet)} by {format_word(step.replacement, alphabet)}")
    return lines


def _verdict_exit(status: str) -> int:
    return VERDICT_EXIT_CODES.get(status, EXIT_UNKNOWN)


def _report_lines(report, alphabet: Alphabet) -> list[str]:
    lines = [
        f"delta={report.delta} T={report.t} lambda={format_rational(report.lam)} "
        f"epsilon={format_rational(report.epsilon)}",
        f"C'(1/6): {'yes' if report.cprime_sixth else 'no'}",
        f"strengthened (lambda <= {format_rational(report.lambda0)}, "
        f"epsilon <= {format_rational(report.epsilon0)}): {'yes' if report.strengthened else 'no'}",
        f"tight: {'yes' if report.tight else 'no'}",
    ]
    if report.cprime_lambda is not None:
        lines.append(f"per-relator C'(lambda): {format_rational(report.cprime_lambda)}")
    if report.witness_piece is not None:
        lines.append("longest piece: " + " / ".join(format_word(w, alphabet) for w in report.witness_piece))
    return lines


# Subcommands

def run_check_sc(args, run: RunConfig):
    presentation = _presentation(args.presentation)
    report = sc_report(presentation, run.lambda0, run.epsilon0, **run.piece_options)
    payload = {"report": report.to_dict(presentation.alphabet)}
    code = EXIT_OK if report.cprime_sixth else EXIT_NEGATIVE
    return code, payload, _report_lines(report, presentation.alphabet)


def run_dehn(args, run: RunConfig):
    presentation = _presentation(args.presentation)
    alphabet = presentation.alphabet
    word = parse_word(args.word, alphabet)
    verdict = is_trivial(word, _handle(presentation, run))
    code = _verdict_exit(verdict.status)
    payload = _verdict_payload(verdict, alphabet, args.trace)
    lines = _verdict_lines(verdict, alphabet, args.trace)
    if args.oracle:
        oracle = normal_closure_member_oracle(word, presentation, run.oracle_budget)
        payload["oracle"] = {"status": oracle.status, "budget": list(run.oracle_budget), "factors": [
            [format_word(g, alphabet), index, sign] for g, index, sign in oracle.factors]}
        lines.append(f"oracle (budget {run.oracle_budget[0]},{run.oracle_budget[1]}): {oracle.status}"
                     + (f" with {len(oracle.factors)} factors" if oracle.status == MEMBER else ""))
        # A found expression decides triviality even on heuristic presentations
        if oracle.status == MEMBER:
            code = EXIT_OK
    return code, payload, lines


def run_eq(args, run: RunConfig):
    presentation = _presentation(args.presentation)
    alphabet = presentation.alphabet
    verdict = eq_in_quotient(parse_word(args.lhs, alphabet), parse_word(args.rhs, alphabet),
                             _handle(presentation, run))
    equal = {TRIVIAL: "equal", NONTRIVIAL: "different"}.get(verdict.status, "unknown")
    lines = [f"{args.lhs} and {args.rhs} are {equal} in the quotient"]
    lines.extend(_verdict_lines(verdict, alphabet, args.trace))
    return _verdict_exit(verdict.status), _verdict_payload(verdict, alphabet, args.trace), lines


def _sample_ball(rank: int, radius: int, sample: int | None, seed: int) -> list[Word]:
    words = list(ball(rank, radius))
    if sample is not None and sample < len(words):
        words = random.Random(seed).sample(words, sample)
    return words


def run_inject(args, run: RunConfig):
    presentation = _presentation(args.presentation)
    alphabet = presentation.alphabet
    handle = _handle(presentation, run)
    words = _sample_ball(presentation.rank, args.radius, args.sample, run.seed)
    certificate = injectivity_certificate(words, handle, threads=run.threads)
    payload = {
        "certified": certificate.certified,
        "words": len(words),
        "pairs_checked": certificate.pairs_checked,
        "fast_path": certificate.fast_path,
        "failures": [[format_word(u, alphabet), format_word(v, alphabet)] for u, v in certificate.failures],
        "kernel_length_bound": None if handle.kernel_length_bound() is None
        else format_rational(handle.kernel_length_bound()),
    }
    lines = [f"injective on the ball of radius {args.radius}: {'yes' if certificate.certified else 'no'} "
             f"({certificate.pairs_checked} pairs, {certificate.fast_path} by length bound)"]
    lines.extend(f"  collision: {format_word(u, alphabet)} = {format_word(v, alphabet)}"
                 for u, v in certificate.failures)
    return (EXIT_OK if certificate.certified else EXIT_NEGATIVE), payload, lines


def _certificate_output(cert, alphabet: Alphabet):
    payload = cert.to_dict(alphabet)
    payload["attempts"] = len(cert.history)
    lines = [
        f"relator: {format_word(cert.relator, alphabet)} (length {len(cert.relator)})",
        f"consequence: {cert.consequence.describe(alphabet)}",
        f"identity holds in the free group: {'yes' if cert.identity_holds() else 'no'}",
    ]
    lines.extend(_report_lines(cert.report, alphabet))
    code = EXIT_OK if cert.report.strengthened else EXIT_NEGATIVE
    return code, payload, lines


def run_gen_absorb(args, run: RunConfig):
    ambient = _ambient(args)
    alphabet = ambient.alphabet
    gamma, x, y = (parse_word(text, alphabet) for text in (args.gamma, args.x, args.y))
    options = dict(run.piece_options)
    if args.p is not None and args.q is not None:
        spec = AbsorptionSpec(gamma=gamma, x=x, y=y, p=args.p, q=args.q)
        cert = absorption_relator(spec, ambient, run.lambda0, run.epsilon0, **options)
    else:
        floor = args.exponent_floor
        if floor is None:
            floor = exponent_floor(ambient.relators, y) if ambient.relators else 0
        cert = tune_absorption(gamma, x, y, ambient, run.lambda0, run.epsilon0, cap=run.tune_cap,
                               exponent_floor=floor, threads=run.threads, **options)
    return _certificate_output(cert, alphabet)


def _gamma1_bound(gamma1, alpha, run: RunConfig, handle=None, stage=None):
    """ℓ_α(γ₁) certificate: free search first, then the given tower stage."""
    cert = ell_alpha_bound(gamma1, alpha, None, run.norm_budget)
    if cert.status != BOUNDED and handle is not None:
        cert = ell_alpha_bound(gamma1, alpha, handle, run.norm_budget, stage)
    if cert.status != BOUNDED:
        raise InvalidSpecError(f"No certified bound on l_alpha(gamma1) within norm budget "
                               f"{run.norm_budget} (status '{cert.status}')")
    return cert


def run_gen_scl(args, run: RunConfig):
    ambient = _ambient(args)
    alphabet = ambient.alphabet
    gamma, gamma1, alpha = (parse_word(text, alphabet) for text in (args.gamma, args.gamma1, args.alpha))
    sigma = parse_rational(args.sigma, positive=True)
    gamma1_bound = _gamma1_bound(gamma1, alpha, run)
    options = dict(run.piece_options)
    if args.kappa and args.q is not None:
        spec = SclSpec(gamma=gamma, gamma1=gamma1, alpha=alpha, gamma1_bound=gamma1_bound,
                       kappas=tuple(parse_word(k, alphabet) for k in args.kappa), q=args.q, sigma=sigma)
        cert = scl_relator(spec, ambient, run.lambda0, run.epsilon0, **options)
    else:
        if not (args.x and args.y):
            raise InvalidInputError("Tuning needs --x and --y to build the conjugators (or give --kappa and --q)")
        x, y = parse_word(args.x, alphabet), parse_word(args.y, alphabet)
        floor = args.exponent_floor
        if floor is None:
            floor = exponent_floor(ambient.relators, y) if ambient.relators else 0
        cert = tune_scl(gamma, gamma1, alpha, gamma1_bound, sigma, x, y, ambient, run.lambda0, run.epsilon0,
                        count=args.count, cap=run.tune_cap, exponent_floor=floor, threads=run.threads,
                        **options)
    return _certificate_output(cert, alphabet)


def run_tower_init(args, run: RunConfig):
    alphabet = Alphabet(tuple(args.gens.split())) if args.gens else Alphabet.standard(args.rank)
    tower = new_tower(alphabet.rank, run.lambda0, run.epsilon0, alphabet=alphabet)
    save_tower(tower, args.file)
    lines = [f"tower over F({', '.join(alphabet.names)}) written to {args.file}"]
    return EXIT_OK, {"file": args.file, "alphabet": list(alphabet.names)}, lines


def _push_exit(goals) -> int:
    statuses = {goal.status for goal in goals}
    if FAILED in statuses:
        return EXIT_NEGATIVE
    if statuses - {CERTIFIED}:
        return EXIT_UNKNOWN
    return EXIT_OK


def run_tower_push(args, run: RunConfig):
    tower = load_tower(validate_input_path(args.file))
    alphabet = tower.alphabet
    options = dict(run.piece_options)
    ambient = tower.top.cumulative

    def parsed(text):
        return parse_word(text, alphabet)

    certificates = []
    if args.absorb or args.scl:
        if not (args.x and args.y):
            raise InvalidInputError("--absorb and --scl need --x and --y")
        x, y = parsed(args.x), parsed(args.y)
        floor = exponent_floor(ambient.relators, y) if ambient.relators else 0
        if args.absorb:
            certificates.append(tune_absorption(parsed(args.absorb), x, y, ambient, tower.lambda0,
                                                tower.epsilon0, cap=run.tune_cap, exponent_floor=floor,
                                                threads=run.threads, **options))
        if args.scl:
            if not (args.gamma1 and args.alpha and args.sigma):
                raise InvalidInputError("--scl needs --gamma1, --alpha and --sigma")
            gamma1, alpha = parsed(args.gamma1), parsed(args.alpha)
            gamma1_bound = _gamma1_bound(gamma1, alpha, run, tower.top.handle, tower.top.index)
            certificates.append(tune_scl(parsed(args.scl), gamma1, alpha, gamma1_bound,
                                         parse_rational(args.sigma, positive=True),
                                         x, y, ambient, tower.lambda0, tower.epsilon0, count=args.count,
                                         cap=run.tune_cap, exponent_floor=floor, threads=run.threads, **options))

    goals = []
    if args.inject_radius is not None:
        goals.append(inject_goal(_sample_ball(alphabet.rank, args.inject_radius, args.inject_sample, run.seed)))
    if args.survive:
        goals.append(survive_goal([parsed(text) for text in args.survive]))

    relators = [parsed(text) for text in args.relator or []]
    tower = push_stage(tower, certificates=certificates, goals=goals, relators=relators,
                       threads=run.threads, **options)
    save_tower(tower, args.file)

    stage = tower.top
    payload = {"stage": tower_status(tower)[-1],
               "certificates": [cert.to_dict(alphabet) for cert in stage.certificates]}
    lines = [f"stage {stage.index}: {len(stage.new_relators)} new relators, "
             f"{'sound' if stage.sound else 'heuristic'}, injectivity radius >= {stage.injectivity_radius_lb}"]
    for cert in stage.certificates:
        lines.append(f"  {cert.kind} relator of length {len(cert.relator)}: "
                     f"{'certified' if cert.certified else 'not certified'}")
    lines.extend(f"  goal {goal.kind}: {goal.status}" for goal in stage.goals)
    return _push_exit(stage.goals), payload, lines


def run_tower_eval(args, run: RunConfig):
    tower = load_tower(validate_input_path(args.file))
    k = tower.top.index if args.stage is None else args.stage
    verdict = eval_word(tower, parse_word(args.word, tower.alphabet), k)
    payload = _verdict_payload(verdict, tower.alphabet, args.trace)
    payload["stage"] = k
    lines = [f"stage {k}:"] + _verdict_lines(verdict, tower.alphabet, args.trace)
    return _verdict_exit(verdict.status), payload, lines


def run_tower_status(args, run: RunConfig):
    tower = load_tower(validate_input_path(args.file))
    rows = tower_status(tower)
    lines = []
    for row in rows:
        goals = ", ".join(f"{g['kind']}={g['status']}" for g in row["goals"]) or "no goals"
        lines.append(f"stage {row['stage']}: {row['relators']} relators, T={row['t']}, lambda={row['lambda']}, "
                     f"{'sound' if row['sound'] else 'heuristic'}, radius {row['injectivity_radius_lb']}; {goals}")
    lines.append(f"ledger: {len(tower.ledger.positive)} positive, {len(tower.ledger.negative)} negative")
    payload = {"stages": rows, "ledger": {"positive": len(tower.ledger.positive),
                                          "negative": len(tower.ledger.negative)}}
    return EXIT_OK, payload, lines


def run_witness_parse(args, run: RunConfig):
    sentence = _read_sentence(args)
    normal = normalized(sentence, run.cnf_cap)
    payload = {"sentence": format_sentence(sentence), "normalized": format_sentence(normal),
               "pattern": sentence.pattern(), "constants": list(sentence.constants)}
    return EXIT_OK, payload, [format_sentence(normal)]


def run_witness_classify(args, run: RunConfig):
    sentence = _read_sentence(args)
    result = classify(sentence)
    payload = {"pattern": sentence.pattern(), **result._asdict()}
    lines = [f"prefix {' '.join(sentence.pattern())}: positive={result.positive}, "
             f"one quantifier={result.one_quantifier}, existential-universal={result.exists_forall}"]
    return EXIT_OK, payload, lines


def run_witness_extract(args, run: RunConfig):
    sentence = _read_sentence(args)
    witnesses = extract_witnesses(sentence, run.cnf_cap)
    payload = {"witnesses": [w.to_dict() for w in witnesses]}
    lines = []
    for number, witness in enumerate(witnesses, 1):
        data = witness.to_dict()
        lines.append(f"witness {number}: G = <{', '.join(data['generators'])} | {', '.join(data['relators'])}>, "
                     f"H = <{', '.join(witness.existential + witness.constants)}>, "
                     f"V = {{{', '.join(data['values'])}}}")
    return EXIT_OK, payload, lines


def run_witness_check_finite(args, run: RunConfig):
    sentence = _read_sentence(args)
    group = _finite_group(args)
    constants = _constants(args.const)
    holds = holds_in_finite(sentence, group, constants, run.finite_budget)
    by_witness = witness_truth(sentence, group, constants, run.cnf_cap, run.finite_budget)
    payload = {"group": group.name, "order": group.order, "holds": holds, "witness_truth": by_witness,
               "agree": holds == by_witness}
    lines = [f"{format_sentence(sentence)} in {group.name}: {'true' if holds else 'false'} "
             f"(witness evaluation {'agrees' if holds == by_witness else 'DISAGREES'})"]
    if holds != by_witness:
        return EXIT_UNKNOWN, payload, lines
    return (EXIT_OK if holds else EXIT_NEGATIVE), payload, lines


def run_norm(args, run: RunConfig):
    alphabet, handle, stage = _load_quotient(args.source, args.stage, run)
    element = parse_word(args.element, alphabet)
    if args.action == "ell-alpha":
        if not args.alpha:
            raise InvalidInputError("ell-alpha needs --alpha")
        cert = ell_alpha_bound(element, parse_word(args.alpha, alphabet), handle, run.norm_budget, stage)
    elif args.action == "cl":
        cert = cl_bound(element, handle, run.norm_budget, stage)
    else:
        if not args.word:
            raise InvalidInputError("w-length needs --word")
        w = parse_word(args.word, Alphabet.standard(26))
        cert = w_length_bound(element, w, handle, run.norm_budget, stage)
    payload = cert.to_dict(alphabet)
    line = f"{args.action} of {args.element}: {cert.status}"
    if cert.bound is not None:
        line += f", bound {format_rational(cert.bound)}"
        line += f" via {' * '.join(format_word(f, alphabet) or '1' for f in cert.factors())}"
    return NORM_EXIT_CODES.get(cert.status, EXIT_UNKNOWN), payload, [line]


def run_repro_remark18(args, run: RunConfig):
    result = repro_remark18(args.n, run.lambda0, run.epsilon0)
    report = result.report
    lines = [
        f"relator (a2b2)^{2 * args.n + 1}: delta={report.delta} (quadratic scan {result.reference_delta}), "
        f"T={report.t}, lambda={format_rational(report.lam)}",
        f"C'(1/6): {'yes' if result.sound else 'no'}",
        f"hom x->a, y->b, z->(a2b2)^{args.n}: {'verified' if result.morphism_verified else 'NOT verified'}"
        f"{', surjective' if result.surjective else ''}",
        f"abelianization of <x,y,z | x2y2z2>: {result.source_abelianization.describe()}",
        f"abelianization of the quotient: {result.target_abelianization.describe()}",
    ]
    return (EXIT_OK if result.passed else EXIT_NEGATIVE), result.to_dict(), lines


# Argument parsing

def _common_options() -> argparse.ArgumentParser:
    common = ForgeArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Print a JSON document instead of text")
    common.add_argument("--report", metavar="PATH", help="Write a markdown run report")
    common.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    common.add_argument("--seed", type=int, help="Seed for sampled word sets")
    common.add_argument("--threads", type=int, help="Worker threads (overrides FORGE_THREADS)")
    common.add_argument("--config", metavar="PATH", help="Local configuration file")
    common.add_argument("--lambda", dest="lambda0", metavar="N/D", help="Target piece ratio")
    common.add_argument("--epsilon", dest="epsilon0", metavar="N/D", help="Target inverse relator length")
    return common


def _ambient_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--presentation", metavar="FILE", help="Relators already present")
    parser.add_argument("--gens", help="Generator names of the free group, e.g. 's t x y'")
    parser.add_argument("--rank", type=int, default=4, help="Rank of the free group (default: 4)")
    parser.add_argument("--exponent-floor", type=int, help="Lowest y exponent used while tuning")


def _sentence_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--sentence", help="Sentence text, e.g. 'A x E y (y^2 = 1)'")
    group.add_argument("--file", help="File containing the sentence")


def build_parser() -> ForgeArgumentParser:
    common = _common_options()
    parser = ForgeArgumentParser(prog="forge", description="Small-cancellation relator forge")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check-sc", parents=[common], help="Piece analysis of a presentation")
    check.add_argument("presentation")
    check.set_defaults(handler=run_check_sc)

    dehn = commands.add_parser("dehn", parents=[common], help="Dehn's algorithm on one word")
    dehn.add_argument("presentation")
    dehn.add_argument("--word", required=True)
    dehn.add_argument("--trace", action="store_true")
    dehn.add_argument("--oracle", action="store_true", help="Cross-check with the normal-closure search")
    dehn.set_defaults(handler=run_dehn)

    eq = commands.add_parser("eq", parents=[common], help="Equality of two words in the quotient")
    eq.add_argument("presentation")
    eq.add_argument("--lhs", required=True)
    eq.add_argument("--rhs", required=True)
    eq.add_argument("--trace", action="store_true")
    eq.set_defaults(handler=run_eq)

    inject = commands.add_parser("inject", parents=[common], help="Injectivity on a ball of the free group")
    inject.add_argument("presentation")
    inject.add_argument("--radius", type=int, required=True)
    inject.add_argument("--sample", type=int, help="Check a seeded sample of the ball")
    inject.set_defaults(handler=run_inject)

    absorb = commands.add_parser("gen-absorb", parents=[common], help="Absorption relator")
    absorb.add_argument("--gamma", required=True)
    absorb.add_argument("--x", required=True)
    absorb.add_argument("--y", required=True)
    absorb.add_argument("--p", type=int, help="Fixed first exponent (skips tuning with --q)")
    absorb.add_argument("--q", type=int, help="Fixed number of extra blocks (skips tuning with --p)")
    _ambient_options(absorb)
    absorb.set_defaults(handler=run_gen_absorb)

    scl = commands.add_parser("gen-scl", parents=[common], help="Norm-stabilization relator")
    scl.add_argument("--gamma", required=True)
    scl.add_argument("--gamma1", required=True)
    scl.add_argument("--alpha", required=True)
    scl.add_argument("--sigma", required=True, metavar="N/D")
    scl.add_argument("--kappa", action="append", help="Conjugator (repeatable, skips tuning with --q)")
    scl.add_argument("--q", type=int)
    scl.add_argument("--x", help="Conjugator family letter x (tuning)")
    scl.add_argument("--y", help="Conjugator family letter y (tuning)")
    scl.add_argument("--count", type=int, default=1, help="Number of conjugators when tuning")
    _ambient_options(scl)
    scl.set_defaults(handler=run_gen_scl)

    tower = commands.add_parser("tower", help="Relator towers")
    tower_actions = tower.add_subparsers(dest="action", required=True)
    init = tower_actions.add_parser("init", parents=[common], help="New tower over a free group")
    init.add_argument("file")
    init.add_argument("--rank", type=int, default=2)
    init.add_argument("--gens", help="Generator names, e.g. 's t x y'")
    init.set_defaults(handler=run_tower_init)

    push = tower_actions.add_parser("push", parents=[common], help="Push a stage")
    push.add_argument("file")
    push.add_argument("--relator", action="append", help="Extra relator (repeatable)")
    push.add_argument("--absorb", metavar="GAMMA", help="Tune and push an absorption relator for GAMMA")
    push.add_argument("--scl", metavar="GAMMA", help="Tune and push a stabilization relator for GAMMA")
    push.add_argument("--x")
    push.add_argument("--y")
    push.add_argument("--gamma1")
    push.add_argument("--alpha")
    push.add_argument("--sigma", metavar="N/D")
    push.add_argument("--count", type=int, default=1)
    push.add_argument("--survive", action="append", help="Word that must stay nontrivial (repeatable)")
    push.add_argument("--inject-radius", type=int, help="Injectivity goal on the ball of this radius")
    push.add_argument("--inject-sample", type=int, help="Seeded sample size of the ball")
    push.set_defaults(handler=run_tower_push)

    evaluate = tower_actions.add_parser("eval", parents=[common], help="Triviality of a word at a stage")
    evaluate.add_argument("file")
    evaluate.add_argument("--word", required=True)
    evaluate.add_argument("--stage", type=int)
    evaluate.add_argument("--trace", action="store_true")
    evaluate.set_defaults(handler=run_tower_eval)

    status = tower_actions.add_parser("status", parents=[common], help="Per-stage summary")
    status.add_argument("file")
    status.set_defaults(handler=run_tower_status)

    witness = commands.add_parser("witness", help="Sentences and witnesses")
    witness_actions = witness.add_subparsers(dest="action", required=True)
    for name, handler, help_text in (
        ("parse", run_witness_parse, "Parse and normalize a sentence"),
        ("classify", run_witness_classify, "Positivity and prefix class"),
        ("extract", run_witness_extract, "Abstract witnesses of an existential-universal sentence"),
    ):
        action = witness_actions.add_parser(name, parents=[common], help=help_text)
        _sentence_options(action)
        action.set_defaults(handler=handler)
    finite = witness_actions.add_parser("check-finite", parents=[common],
                                        help="Truth in a finite group, directly and through witnesses")
    _sentence_options(finite)
    group = finite.add_mutually_exclusive_group(required=True)
    group.add_argument("--group", help="Built-in group: Z1..Z6, Z2xZ2, S3")
    group.add_argument("--table", help="Multiplication table file")
    finite.add_argument("--const", action="append", metavar="$NAME=ELEMENT")
    finite.set_defaults(handler=run_witness_check_finite)

    norm = commands.add_parser("norm", help="Norm bounds with certificates")
    norm_actions = norm.add_subparsers(dest="action", required=True)
    for name in ("ell-alpha", "cl", "w-length"):
        action = norm_actions.add_parser(name, parents=[common])
        action.add_argument("source", help="Tower file or presentation file")
        action.add_argument("--element", required=True)
        action.add_argument("--alpha")
        action.add_argument("--word", help="Word in variables a, b, c, ...")
        action.add_argument("--budget", metavar="F,C")
        action.add_argument("--stage", type=int)
        action.set_defaults(handler=run_norm)

    repro = commands.add_parser("repro-remark18", parents=[common],
                                help="Epimorphism onto <a,b | (a2b2)^(2n+1)>")
    repro.add_argument("--n", type=int, default=2)
    repro.set_defaults(handler=run_repro_remark18)

    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(message)s")
    logging.getLogger().setLevel(level)


def _emit(run: RunConfig | None, command: str, code: int, payload: dict, lines: list[str]) -> None:
    if run is not None and run.output == "json":
        document = {"schema": SCHEMA, "command": command, "exit_code": code, "result": payload}
        print(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        for line in lines:
            print(line)


def main(argv: list[str] | None = None) -> int:
    """
    Run one forge command.

    Returns:
        Process exit code (0, 1, 2 or 64)
    """
    # Initialize log capture for this run
    log_capture = LogCapture()
    logger = logging.getLogger()
    log_handler = LogCaptureHandler(log_capture)
    log_handler.setLevel(logging.DEBUG)
    logger.addHandler(log_handler)

    args = None
    run = None
    try:
        # Step 1: Parse arguments
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as e:
            # --help and --version
            return int(e.code or 0)

        # Step 2: Load configuration and merge flags
        config = ConfigService(config_path=args.config).get_forge_config()
        run = build_run_config(args, config)
        _configure_logging(run.log_level)
        arguments = {key: value for key, value in vars(args).items() if key != "handler"}
        log_capture.set_run_data(arguments, run.to_dict())
        logging.info(f"forge {run.command} started")

        # Step 3: Run the subcommand
        code, payload, lines = args.handler(args, run)
        _emit(run, run.command, code, payload, lines)
        log_capture.set_verdict(code, lines[0] if lines else run.command)
        logging.info(f"forge {run.command} finished with exit code {code}")
        return code

    except ForgeError as e:
        logging.error(f"{type(e).__name__}: {e.message}")
        log_capture.set_error_info(e, {"error_type": type(e).__name__, "exit_code": e.exit_code})
        log_capture.set_verdict(e.exit_code, e.message)
        print(f"error: {e.message}", file=sys.stderr)
        if run is not None and run.output == "json":
            _emit(run, run.command, e.exit_code, {"error": type(e).__name__, "message": e.message}, [])
        return e.exit_code

    except Exception as e:
        logging.error(f"Unexpected error: {str(e)}", exc_info=True)
        log_capture.set_error_info(e, {"error_type": "UnexpectedError"})
        raise

    finally:
        logger.removeHandler(log_handler)
        if args is not None and getattr(args, "report", None):
            try:
                Path(args.report).write_text(log_capture.generate_markdown_report(), encoding="utf-8")
            except OSError as e:
                print(f"warning: could not write report {args.report}: {e}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
