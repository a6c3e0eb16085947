"""
Towers of small-cancellation quotients of a free group.

Stage 0 is the free group; each push adds relators (usually from relator
certificates), recomputes the joint report over the cumulative relator
set and evaluates the stage goals. Tower values are immutable: every
operation returns a new Tower.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from services.dehn import (
    NONTRIVIAL,
    TRIVIAL,
    DehnIndex,
    QuotientHandle,
    TrivialityVerdict,
    check_morphism,
    eq_in_quotient,
    injectivity_certificate,
    is_trivial,
)
from services.norms import replay_norm_certificate
from services.relator_forge import ABSORB, SCL, RelatorCertificate
from services.small_cancellation import (
    DEFAULT_NEIGHBOUR_LIMIT,
    DEFAULT_REFERENCE_LIMIT,
    Presentation,
    SCReport,
    joint_report,
    max_piece_involving,
    symmetrize,
)
from services.witness import AbstractWitness, RealizedWitness
from services.words import Alphabet, Word, commutator, cyclic_reduce, format_word, parse_word, substitute
from utils.exceptions import (
    DomainError,
    InvalidInputError,
    InvalidMorphismError,
    InvalidPoisonError,
    StageOutOfRangeError,
)
from utils.validators import TOWER_FORMAT, format_rational, parse_rational, validate_tower_payload


GOAL_ABSORB = "absorb"
GOAL_INJECT = "inject"
GOAL_SURVIVE = "survive"
GOAL_SCL_BOUND = "scl_bound"
GOAL_HOM_PRESERVE = "hom_preserve"

PENDING = "pending"
CERTIFIED = "certified"
FAILED = "failed"
HEURISTIC = "heuristic"

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class Goal:
    """
    A stage goal. `words` holds (γ, x, y) for absorb, U for inject, the
    words that must stay nontrivial for survive and (γ, α) for scl_bound.
    """

    kind: str
    words: tuple[Word, ...] = ()
    witness_id: str | None = None
    sigma: Fraction | None = None
    status: str = PENDING
    evidence: dict = field(default_factory=dict, compare=False)

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "kind": self.kind,
            "words": [format_word(w, alphabet) for w in self.words],
            "witness_id": self.witness_id,
            "sigma": None if self.sigma is None else format_rational(self.sigma),
            "status": self.status,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, data: dict, alphabet: Alphabet) -> "Goal":
        return cls(
            kind=data["kind"],
            words=tuple(parse_word(w, alphabet) for w in data["words"]),
            witness_id=data.get("witness_id"),
            sigma=None if data.get("sigma") is None else parse_rational(data["sigma"]),
            status=data.get("status", PENDING),
            evidence=data.get("evidence", {}),
        )


def absorb_goal(gamma: Word, x: Word, y: Word) -> Goal:
    return Goal(GOAL_ABSORB, (gamma, x, y))


def inject_goal(words: Sequence[Word]) -> Goal:
    return Goal(GOAL_INJECT, tuple(words))


def survive_goal(words: Sequence[Word]) -> Goal:
    return Goal(GOAL_SURVIVE, tuple(words))


def scl_goal(gamma: Word, alpha: Word, sigma: Fraction) -> Goal:
    return Goal(GOAL_SCL_BOUND, (gamma, alpha), sigma=Fraction(sigma))


def hom_goal(witness_id: str) -> Goal:
    return Goal(GOAL_HOM_PRESERVE, witness_id=witness_id)


@dataclass(frozen=True)
class Morphism:
    """Generator images of a presentation in a tower stage; relator images are Dehn-trivial there."""

    source: Presentation
    images: tuple[Word, ...]
    target: int

    def image_of(self, w: Word) -> Word:
        return substitute(w, self.images)


@dataclass(frozen=True)
class LedgerEntry:
    witness_id: str
    witness: RealizedWitness
    poison: Morphism | None = None


@dataclass(frozen=True)
class Ledger:
    positive: tuple[LedgerEntry, ...] = ()
    negative: tuple[LedgerEntry, ...] = ()
    satisfied: tuple[str, ...] = ()

    @property
    def poisons(self) -> dict[str, Morphism]:
        return {entry.witness_id: entry.poison for entry in self.negative}

    def next_id(self) -> str:
        return f"W{len(self.positive) + len(self.negative) + 1}"

    def entry(self, witness_id: str) -> LedgerEntry:
        for entry in self.positive + self.negative:
            if entry.witness_id == witness_id:
                return entry
        raise InvalidInputError(f"No ledger entry '{witness_id}'")


@dataclass(frozen=True)
class Stage:
    index: int
    new_relators: tuple[Word, ...]
    cumulative: Presentation
    report: SCReport | None
    goals: tuple[Goal, ...]
    certificates: tuple[RelatorCertificate, ...]
    injectivity_radius_lb: int | None
    heuristic: bool
    handle: QuotientHandle = field(compare=False, repr=False)

    @property
    def sound(self) -> bool:
        return not self.heuristic


@dataclass(frozen=True)
class Tower:
    alphabet: Alphabet
    stages: tuple[Stage, ...]
    ledger: Ledger = Ledger()
    lambda0: Fraction = Fraction(1, 6)
    epsilon0: Fraction = Fraction(1, 20)

    @property
    def top(self) -> Stage:
        return self.stages[-1]

    def stage(self, k: int) -> Stage:
        if not 0 <= k < len(self.stages):
            raise StageOutOfRangeError(f"Stage {k} does not exist; the tower has {len(self.stages)} stages")
        return self.stages[k]

    def certificates(self) -> list[RelatorCertificate]:
        return [cert for stage in self.stages for cert in stage.certificates]


def _handle(presentation: Presentation, report: SCReport | None) -> QuotientHandle:
    sound = report is None or report.cprime_sixth
    return QuotientHandle(presentation, report, sound, DehnIndex(presentation))


def new_tower(rank: int, lambda0: Fraction = Fraction(1, 6), epsilon0: Fraction = Fraction(1, 20),
              alphabet: Alphabet | None = None) -> Tower:
    """
    Tower with a single stage: the free group of the given rank.

    Raises:
        DomainError: If rank < 2
    """
    if rank < 2:
        raise DomainError(f"Towers need a free group of rank at least 2, got {rank}")
    alphabet = alphabet or Alphabet.standard(rank)
    if alphabet.rank != rank:
        raise InvalidInputError(f"Alphabet has {alphabet.rank} generators, expected {rank}")
    free = Presentation(alphabet, ())
    stage = Stage(index=0, new_relators=(), cumulative=free, report=None, goals=(), certificates=(),
                  injectivity_radius_lb=None, heuristic=False, handle=_handle(free, None))
    logging.info(f"New tower over F({', '.join(alphabet.names)})")
    return Tower(alphabet, (stage,), Ledger(), Fraction(lambda0), Fraction(epsilon0))


def _check_words(t: Tower, words: Sequence[Word]) -> None:
    for w in words:
        if w.max_generator() >= t.alphabet.rank:
            raise InvalidInputError("Word uses letters outside the tower alphabet")


def _injectivity_radius(cumulative: Presentation, new_relators: Sequence[Word], heuristic: bool,
                        **options) -> int:
    """(T - 3Δ) // 2 - 1 over the new relators, where Δ is their longest piece in the cumulative set."""
    if heuristic:
        return 0
    fresh = set(new_relators)
    indices = [i for i, r in enumerate(cumulative.relators) if r in fresh]
    S = symmetrize(cumulative)
    delta = max_piece_involving(S, indices, method=options.get("method", "auto"),
                                reference_limit=options.get("reference_limit", DEFAULT_REFERENCE_LIMIT)).delta
    shortest = min(len(r) for r in new_relators)
    return max(0, (shortest - 3 * delta) // 2 - 1)


def _find_certificate(certs: Sequence[RelatorCertificate], kind: str, goal: Goal) -> RelatorCertificate | None:
    for cert in reversed(list(certs)):
        if cert.kind != kind or cert.spec.gamma != goal.words[0]:
            continue
        if kind == ABSORB and (cert.spec.x, cert.spec.y) != tuple(goal.words[1:3]):
            continue
        if kind == SCL and len(goal.words) > 1 and cert.spec.alpha != goal.words[1]:
            continue
        return cert
    return None


def _identity_status(cert: RelatorCertificate, handle: QuotientHandle) -> tuple[str, TrivialityVerdict | None]:
    if not cert.identity_holds():
        return FAILED, None
    verdict = is_trivial(cert.consequence.identity_word(), handle)
    # the identity is a conjugate of a relator, so only Dehn's confirmation is in question
    return (CERTIFIED if verdict.status == TRIVIAL else HEURISTIC), verdict


def _evaluate_goal(goal: Goal, handle: QuotientHandle, certs: Sequence[RelatorCertificate],
                   ledger: Ledger, alphabet: Alphabet) -> Goal:
    if goal.kind in (GOAL_ABSORB, GOAL_SCL_BOUND):
        kind = ABSORB if goal.kind == GOAL_ABSORB else SCL
        cert = _find_certificate(certs, kind, goal)
        if cert is None:
            return replace(goal, status=FAILED, evidence={"reason": f"no {kind} certificate for this element"})
        status, verdict = _identity_status(cert, handle)
        evidence = {
            "relator": format_word(cert.relator, alphabet),
            "identity": cert.consequence.describe(alphabet),
            "dehn_steps": None if verdict is None else len(verdict.trace),
        }
        if kind == ABSORB:
            evidence["exhibited"] = format_word(cert.consequence.rhs, alphabet)
        else:
            length = cert.spec.gamma1_bound
            replayed = replay_norm_certificate(length, None if length.stage is None else handle)
            ratio = cert.spec.ratio()
            evidence["stable_bound"] = format_rational(ratio)
            evidence["gamma1_bound"] = length.to_dict(alphabet)
            evidence["gamma1_bound_replayed"] = replayed
            if not replayed or (goal.sigma is not None and ratio >= goal.sigma):
                status = FAILED
        return replace(goal, status=status, evidence=evidence)

    if goal.kind == GOAL_INJECT:
        if not handle.sound:
            found = [w for i, u in enumerate(goal.words) for w in goal.words[i + 1:]
                     if eq_in_quotient(u, w, handle).status == TRIVIAL]
            status = FAILED if found else HEURISTIC
            return replace(goal, status=status, evidence={"reason": "stage is not C'(1/6)",
                                                          "collisions": len(found)})
        certificate = injectivity_certificate(goal.words, handle)
        evidence = {
            "pairs_checked": certificate.pairs_checked,
            "fast_path": certificate.fast_path,
            "failures": [[format_word(u, alphabet), format_word(v, alphabet)] for u, v in certificate.failures],
        }
        return replace(goal, status=CERTIFIED if certificate.certified else FAILED, evidence=evidence)

    if goal.kind == GOAL_SURVIVE:
        verdicts = [is_trivial(w, handle) for w in goal.words]
        return replace(goal, status=_survival_status(verdicts),
                       evidence={"results": [v.status for v in verdicts]})

    if goal.kind == GOAL_HOM_PRESERVE:
        poison = ledger.poisons.get(goal.witness_id)
        if poison is None:
            return replace(goal, status=FAILED, evidence={"reason": "no poison recorded for this witness"})
        entry = ledger.entry(goal.witness_id)
        relator_verdicts = [is_trivial(poison.image_of(r), handle) for r in poison.source.relators]
        value_verdicts = [is_trivial(poison.image_of(v), handle) for v in entry.witness.abstract.values]
        status = _survival_status(value_verdicts)
        if status == CERTIFIED and any(v.status != TRIVIAL for v in relator_verdicts):
            status = HEURISTIC
        return replace(goal, status=status, evidence={"values": [v.status for v in value_verdicts]})

    raise InvalidInputError(f"Unknown goal kind '{goal.kind}'")


def _survival_status(verdicts: Sequence[TrivialityVerdict]) -> str:
    if any(v.status == TRIVIAL for v in verdicts):
        return FAILED
    if all(v.status == NONTRIVIAL for v in verdicts):
        return CERTIFIED
    return HEURISTIC


def _automatic_goals(certs: Sequence[RelatorCertificate], ledger: Ledger) -> list[Goal]:
    goals = []
    for cert in certs:
        spec = cert.spec
        if cert.kind == ABSORB:
            goals.append(absorb_goal(spec.gamma, spec.x, spec.y))
            goals.append(survive_goal([commutator(spec.x, spec.y)]))
        else:
            goals.append(scl_goal(spec.gamma, spec.alpha, spec.sigma))
    goals.extend(hom_goal(entry.witness_id) for entry in ledger.negative)
    return goals


def push_stage(t: Tower, certificates: Sequence[RelatorCertificate] = (), goals: Sequence[Goal] = (),
               relators: Sequence[Word] = (), threads: int = 1, method: str = "auto",
               reference_limit: int = DEFAULT_REFERENCE_LIMIT,
               neighbour_limit: int = DEFAULT_NEIGHBOUR_LIMIT) -> Tower:
    """
    Append a stage killing the certificates' relators and any extra relators.

    The previous stage's goals are carried up and re-evaluated. Besides
    them and the caller's goals, every absorption certificate gets an absorb
    goal and a survive goal for [x, y], every stabilization certificate an
    scl_bound goal, and every negative ledger entry a hom_preserve goal.
    Failed goals are recorded, not raised.

    Args:
        t: Tower to extend
        certificates: Relator certificates to push
        goals: Additional goals
        relators: Extra relators without certificates
        threads: Worker threads for goal evaluation

    Returns:
        Tower: The extended tower; pushed certificates carry the new stage
        index and are certified when their absorb/scl goal is
    """
    k = len(t.stages)
    previous = t.top
    new_words = [cert.relator for cert in certificates]
    for relator in relators:
        core = cyclic_reduce(relator).word
        if core.letters:
            new_words.append(core)
    _check_words(t, new_words)
    for goal in goals:
        _check_words(t, goal.words)
    new_words = [w for w in dict.fromkeys(new_words) if w not in set(previous.cumulative.relators)]

    options = {"method": method, "reference_limit": reference_limit, "neighbour_limit": neighbour_limit}
    if new_words:
        cumulative = previous.cumulative.with_relators(new_words)
        report = joint_report([previous.cumulative, Presentation(t.alphabet, tuple(new_words))],
                              t.lambda0, t.epsilon0, **options)
        heuristic = not report.cprime_sixth
        radius = _injectivity_radius(cumulative, new_words, heuristic, **options)
        handle = _handle(cumulative, report)
    else:
        cumulative, report, heuristic = previous.cumulative, previous.report, previous.heuristic
        radius, handle = previous.injectivity_radius_lb, previous.handle

    all_certs = t.certificates() + list(certificates)
    carried = [replace(goal, status=PENDING, evidence={}) for goal in previous.goals]
    goal_list = list(dict.fromkeys(carried + _automatic_goals(certificates, t.ledger) + list(goals)))

    def evaluate(goal):
        return _evaluate_goal(goal, handle, all_certs, t.ledger, t.alphabet)

    if threads > 1 and len(goal_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            evaluated = list(executor.map(evaluate, goal_list))
    else:
        evaluated = [evaluate(goal) for goal in goal_list]

    pushed = []
    for cert in certificates:
        kind = GOAL_ABSORB if cert.kind == ABSORB else GOAL_SCL_BOUND
        certified = any(g.kind == kind and g.status == CERTIFIED and g.words[0] == cert.spec.gamma
                        for g in evaluated)
        pushed.append(replace(cert, stage=k, certified=certified))

    stage = Stage(index=k, new_relators=tuple(new_words), cumulative=cumulative, report=report,
                  goals=tuple(evaluated), certificates=tuple(pushed), injectivity_radius_lb=radius,
                  heuristic=heuristic, handle=handle)
    statuses = ", ".join(f"{g.kind}={g.status}" for g in evaluated) or "no goals"
    logging.info(f"Pushed stage {k}: {len(new_words)} new relators, "
                 f"{'heuristic' if heuristic else 'sound'}, radius {radius}, {statuses}")
    return replace(t, stages=t.stages + (stage,))


def eval_word(t: Tower, w: Word, k: int) -> TrivialityVerdict:
    """Triviality of w in stage k."""
    stage = t.stage(k)
    _check_words(t, [w])
    return is_trivial(w, stage.handle)


def check_hom(G: Presentation, images: Sequence[Word], t: Tower, k: int) -> Morphism:
    """
    Morphism from G to stage k, if every relator of G maps to a Dehn-trivial word.

    Raises:
        InvalidMorphismError: Naming the first relator whose image is not trivial
    """
    stage = t.stage(k)
    check_morphism(G, images, stage.handle)
    return Morphism(G, tuple(images), k)


def ledger_update(t: Tower, witness: RealizedWitness, decision: str, poison: Morphism | None = None,
                  sentence: str | None = None) -> Tower:
    """
    Record a witness as positively realized or as poisoned.

    Raises:
        InvalidPoisonError: If a negative decision's poison is not a morphism
            of the witness group into the top stage extending iota, or kills
            a word of V
    """
    ledger = t.ledger
    witness_id = ledger.next_id()
    _check_words(t, witness.iota)
    if decision == POSITIVE:
        satisfied = ledger.satisfied + ((sentence,) if sentence else ())
        entry = LedgerEntry(witness_id, witness)
        new_ledger = replace(ledger, positive=ledger.positive + (entry,), satisfied=satisfied)
        logging.info(f"Ledger: {witness_id} positively realized")
        return replace(t, ledger=new_ledger)
    if decision != NEGATIVE:
        raise InvalidInputError(f"Ledger decision must be '{POSITIVE}' or '{NEGATIVE}', got '{decision}'")
    if poison is None:
        raise InvalidPoisonError("A negative ledger entry needs a poison morphism")

    top = t.top
    abstract = witness.abstract
    if poison.source != abstract.group:
        raise InvalidPoisonError("Poison is not defined on the witness group")
    if poison.target != top.index:
        raise InvalidPoisonError(f"Poison targets stage {poison.target}, the top stage is {top.index}")
    try:
        check_morphism(abstract.group, poison.images, top.handle)
    except (InvalidInputError, InvalidMorphismError) as e:
        raise InvalidPoisonError(f"Poison is not a morphism into stage {top.index}: {e}")
    for position, image in zip(abstract.j_map, witness.iota):
        if eq_in_quotient(poison.images[position], image, top.handle).status != TRIVIAL:
            raise InvalidPoisonError(
                f"Poison does not extend the realization on generator {abstract.group.alphabet.names[position]}"
            )
    for value in abstract.values:
        if is_trivial(poison.image_of(value), top.handle).status == TRIVIAL:
            raise InvalidPoisonError("Poison kills a word of V")

    entry = LedgerEntry(witness_id, witness, poison)
    logging.info(f"Ledger: {witness_id} poisoned at stage {top.index}")
    return replace(t, ledger=replace(ledger, negative=ledger.negative + (entry,)))


def tower_status(t: Tower) -> list[dict]:
    """Per-stage summary: relator counts, T, λ, soundness, radius and goal statuses."""
    rows = []
    for stage in t.stages:
        report = stage.report
        rows.append({
            "stage": stage.index,
            "relators": len(stage.cumulative.relators),
            "new_relators": len(stage.new_relators),
            "t": None if report is None else report.t,
            "lambda": None if report is None else format_rational(report.lam),
            "sound": stage.sound,
            "injectivity_radius_lb": stage.injectivity_radius_lb,
            "goals": [{"kind": g.kind, "status": g.status} for g in stage.goals],
        })
    return rows


def _stage_to_dict(stage: Stage, alphabet: Alphabet) -> dict:
    return {
        "index": stage.index,
        "new_relators": [format_word(r, alphabet) for r in stage.new_relators],
        "relators": [format_word(r, alphabet) for r in stage.cumulative.relators],
        "report": None if stage.report is None else stage.report.to_dict(alphabet),
        "goals": [g.to_dict(alphabet) for g in stage.goals],
        "certificates": [c.to_dict(alphabet) for c in stage.certificates],
        "injectivity_radius_lb": stage.injectivity_radius_lb,
        "heuristic": stage.heuristic,
    }


def _stage_from_dict(data: dict, alphabet: Alphabet) -> Stage:
    cumulative = Presentation(alphabet, tuple(parse_word(r, alphabet) for r in data["relators"]))
    report = None if data.get("report") is None else SCReport.from_dict(data["report"], alphabet)
    return Stage(
        index=data["index"],
        new_relators=tuple(parse_word(r, alphabet) for r in data["new_relators"]),
        cumulative=cumulative,
        report=report,
        goals=tuple(Goal.from_dict(g, alphabet) for g in data["goals"]),
        certificates=tuple(RelatorCertificate.from_dict(c, alphabet) for c in data["certificates"]),
        injectivity_radius_lb=data.get("injectivity_radius_lb"),
        heuristic=data["heuristic"],
        handle=_handle(cumulative, report),
    )


def _entry_to_dict(entry: LedgerEntry, alphabet: Alphabet) -> dict:
    poison = None
    if entry.poison is not None:
        poison = {
            "images": [format_word(w, alphabet) for w in entry.poison.images],
            "target": entry.poison.target,
        }
    return {
        "id": entry.witness_id,
        "witness": entry.witness.abstract.to_dict(),
        "iota": [format_word(w, alphabet) for w in entry.witness.iota],
        "poison": poison,
    }


def _entry_from_dict(data: dict, alphabet: Alphabet) -> LedgerEntry:
    abstract = AbstractWitness.from_dict(data["witness"])
    witness = RealizedWitness(abstract, tuple(parse_word(w, alphabet) for w in data["iota"]))
    poison = None
    if data.get("poison") is not None:
        poison = Morphism(
            source=abstract.group,
            images=tuple(parse_word(w, alphabet) for w in data["poison"]["images"]),
            target=data["poison"]["target"],
        )
    return LedgerEntry(data["id"], witness, poison)


def tower_to_dict(t: Tower) -> dict:
    return {
        "format": TOWER_FORMAT,
        "alphabet": list(t.alphabet.names),
        "lambda0": format_rational(t.lambda0),
        "epsilon0": format_rational(t.epsilon0),
        "stages": [_stage_to_dict(stage, t.alphabet) for stage in t.stages],
        "ledger": {
            "positive": [_entry_to_dict(e, t.alphabet) for e in t.ledger.positive],
            "negative": [_entry_to_dict(e, t.alphabet) for e in t.ledger.negative],
            "satisfied": list(t.ledger.satisfied),
        },
    }


def tower_from_dict(data: dict) -> Tower:
    """
    Rebuild a tower from its file payload. Reports are taken as stored;
    Dehn handles are rebuilt from the cumulative relators.

    Raises:
        InvalidInputError: If the payload does not describe a tower
    """
    validate_tower_payload(data)
    alphabet = Alphabet(tuple(data["alphabet"]))
    stages = tuple(_stage_from_dict(stage, alphabet) for stage in data["stages"])
    ledger_data = data["ledger"]
    ledger = Ledger(
        positive=tuple(_entry_from_dict(e, alphabet) for e in ledger_data.get("positive", [])),
        negative=tuple(_entry_from_dict(e, alphabet) for e in ledger_data.get("negative", [])),
        satisfied=tuple(ledger_data.get("satisfied", [])),
    )
    return Tower(alphabet, stages, ledger, parse_rational(data.get("lambda0", "1/6")),
                 parse_rational(data.get("epsilon0", "1/20")))


def save_tower(t: Tower, path: str | Path) -> None:
    text = json.dumps(tower_to_dict(t), indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding='utf-8')
    logging.info(f"Saved tower with {len(t.stages)} stages to {path}")


def load_tower(path: str | Path) -> Tower:
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as e:
        raise InvalidInputError(f"Cannot read tower file {path}: {e}")
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"Tower file {path} is not valid JSON: {e}")
    return tower_from_dict(data)
