"""
Tests for tower construction, stage goals, the witness ledger and tower
files.
"""

import json
from dataclasses import replace
from fractions import Fraction

import pytest

from services.dehn import NONTRIVIAL, TRIVIAL
from services.norms import ell_alpha_bound, stable_bound_from_cert
from services.relator_forge import SclSpec, exponent_floor, kappa_family, scl_relator, tune_absorption
from services.tower import (
    CERTIFIED,
    FAILED,
    GOAL_ABSORB,
    GOAL_HOM_PRESERVE,
    GOAL_INJECT,
    GOAL_SCL_BOUND,
    GOAL_SURVIVE,
    HEURISTIC,
    NEGATIVE,
    POSITIVE,
    Morphism,
    check_hom,
    eval_word,
    inject_goal,
    ledger_update,
    load_tower,
    new_tower,
    push_stage,
    save_tower,
    survive_goal,
    tower_from_dict,
    tower_status,
    tower_to_dict,
)
from services.witness import RealizedWitness, extract_witnesses, parse_sentence
from services.words import Alphabet, Word, ball, parse_word
from utils.exceptions import (
    DomainError,
    InvalidInputError,
    InvalidMorphismError,
    InvalidPoisonError,
    StageOutOfRangeError,
)


STXY = Alphabet(("s", "t", "x", "y"))
ABCD = Alphabet.standard(4)
LAMBDA0 = Fraction(1, 12)
EPSILON0 = Fraction(1, 50)


def w(text: str, alphabet: Alphabet = STXY) -> Word:
    return parse_word(text, alphabet)


def goal_of(stage, kind):
    return next(goal for goal in stage.goals if goal.kind == kind)


@pytest.fixture(scope="module")
def absorption_tower():
    """Two stages absorbing s and then t into <x, y>."""
    tower = new_tower(4, LAMBDA0, EPSILON0, alphabet=STXY)
    first = tune_absorption(w("s"), w("x"), w("y"), tower.top.cumulative, LAMBDA0, EPSILON0,
                            neighbour_limit=0)
    tower = push_stage(tower, [first], goals=[inject_goal(list(ball(4, 2)))], neighbour_limit=0)
    floor = exponent_floor(tower.top.cumulative.relators, w("y"))
    second = tune_absorption(w("t"), w("x"), w("y"), tower.top.cumulative, Fraction(1, 6), EPSILON0,
                             exponent_floor=floor, neighbour_limit=0)
    return push_stage(tower, [second], neighbour_limit=0)


@pytest.fixture
def surface_tower():
    tower = new_tower(4)
    return push_stage(tower, relators=[w("abABcdCD", ABCD)])


@pytest.fixture
def commuting_witness():
    [abstract] = extract_witnesses(parse_sentence("E y A x ( [x,y] = 1 )"))
    return RealizedWitness(abstract, (w("a", ABCD),))


def test_new_tower():
    tower = new_tower(3)
    assert len(tower.stages) == 1
    assert tower.top.cumulative.relators == ()
    assert tower.top.sound
    assert tower.alphabet.names == ("a", "b", "c")
    with pytest.raises(DomainError):
        new_tower(1)
    with pytest.raises(InvalidInputError):
        new_tower(2, alphabet=STXY)


def test_first_absorption_stage(absorption_tower):
    stage = absorption_tower.stage(1)
    assert stage.sound
    assert stage.report.strengthened
    assert stage.injectivity_radius_lb == 619
    assert goal_of(stage, GOAL_ABSORB).status == CERTIFIED
    assert goal_of(stage, GOAL_SURVIVE).status == CERTIFIED
    inject = goal_of(stage, GOAL_INJECT)
    assert inject.status == CERTIFIED
    assert inject.evidence["pairs_checked"] == 65 * 64 // 2
    [cert] = stage.certificates
    assert cert.stage == 1
    assert cert.certified


def test_second_absorption_stage(absorption_tower):
    stage = absorption_tower.top
    assert stage.index == 2
    assert len(stage.cumulative.relators) == 2
    assert stage.sound
    assert stage.report.t == 1531
    assert stage.injectivity_radius_lb == 476
    assert all(goal.status == CERTIFIED for goal in stage.goals)
    assert [cert.spec.gamma for cert in absorption_tower.certificates()] == [w("s"), w("t")]


def test_eval_word_across_stages(absorption_tower):
    relator = absorption_tower.stage(1).new_relators[0]
    assert eval_word(absorption_tower, relator, 0).status == NONTRIVIAL
    assert eval_word(absorption_tower, relator, 2).status == TRIVIAL
    assert eval_word(absorption_tower, w("xyXY"), 2).status == NONTRIVIAL
    with pytest.raises(StageOutOfRangeError):
        eval_word(absorption_tower, relator, 3)
    with pytest.raises(InvalidInputError):
        eval_word(absorption_tower, Word((5,)), 1)


def test_tower_status(absorption_tower):
    rows = tower_status(absorption_tower)
    assert [row["stage"] for row in rows] == [0, 1, 2]
    assert rows[0]["t"] is None
    assert rows[1]["t"] == 1618
    assert rows[1]["lambda"] == "63/809"
    assert rows[2]["relators"] == 2
    assert {goal["status"] for goal in rows[2]["goals"]} == {CERTIFIED}


def test_tower_file_round_trip(absorption_tower, tmp_path):
    path = tmp_path / "tower.json"
    save_tower(absorption_tower, path)
    loaded = load_tower(path)
    assert tower_status(loaded) == tower_status(absorption_tower)
    assert loaded.lambda0 == LAMBDA0
    assert [c.relator for c in loaded.certificates()] == [c.relator for c in absorption_tower.certificates()]
    relator = loaded.stage(1).new_relators[0]
    assert eval_word(loaded, relator, 1).status == TRIVIAL


def test_tower_file_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        load_tower(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding='utf-8')
    with pytest.raises(InvalidInputError):
        load_tower(broken)
    payload = tower_to_dict(new_tower(2))
    payload["format"] = "something-else"
    with pytest.raises(InvalidInputError):
        tower_from_dict(json.loads(json.dumps(payload)))


def test_scl_stage_is_heuristic_but_certified():
    tower = new_tower(4, alphabet=STXY)
    spec = SclSpec(gamma=w("st"), gamma1=w("s"), alpha=w("s"), gamma1_bound=ell_alpha_bound(w("s"), w("s"), None),
                   kappas=tuple(kappa_family(w("x"), w("y"), 1, 5)), q=11, sigma=Fraction(1, 10))
    cert = scl_relator(spec, tower.top.cumulative, neighbour_limit=0)
    tower = push_stage(tower, [cert])
    stage = tower.top
    assert stage.heuristic
    assert stage.injectivity_radius_lb == 0
    goal = goal_of(stage, GOAL_SCL_BOUND)
    assert goal.status == CERTIFIED
    assert goal.evidence["stable_bound"] == "1/11"
    [pushed] = stage.certificates
    assert stable_bound_from_cert(pushed).stable_bound == Fraction(1, 11)


def test_scl_goal_fails_when_the_gamma1_bound_does_not_replay():
    tower = new_tower(4, alphabet=STXY)
    bound = ell_alpha_bound(w("s"), w("s"), None)
    spec = SclSpec(gamma=w("st"), gamma1=w("s"), alpha=w("s"), gamma1_bound=bound,
                   kappas=tuple(kappa_family(w("x"), w("y"), 1, 5)), q=11, sigma=Fraction(1, 10))
    cert = scl_relator(spec, tower.top.cumulative, neighbour_limit=0)
    understated = replace(bound, bound=Fraction(1, 2))
    tampered = replace(cert, spec=replace(spec, gamma1_bound=understated))
    tower = push_stage(tower, [tampered])
    goal = goal_of(tower.top, GOAL_SCL_BOUND)
    assert goal.status == FAILED
    assert goal.evidence["gamma1_bound_replayed"] is False
    [pushed] = tower.top.certificates
    assert not pushed.certified


def test_empty_push_keeps_and_reevaluates_goals():
    tower = new_tower(4, alphabet=STXY)
    spec = SclSpec(gamma=w("st"), gamma1=w("s"), alpha=w("s"), gamma1_bound=ell_alpha_bound(w("s"), w("s"), None),
                   kappas=tuple(kappa_family(w("x"), w("y"), 1, 5)), q=11, sigma=Fraction(1, 10))
    tower = push_stage(tower, [scl_relator(spec, tower.top.cumulative, neighbour_limit=0)],
                       goals=[survive_goal([w("xyXY")])])
    before = [(goal.kind, goal.status) for goal in tower.top.goals]
    assert (GOAL_SCL_BOUND, CERTIFIED) in before

    again = push_stage(tower)
    assert again.top.index == 2
    assert again.top.cumulative == tower.top.cumulative
    assert [(goal.kind, goal.status) for goal in again.top.goals] == before


def test_inject_goal_on_heuristic_stage_is_not_certified():
    tower = new_tower(2)
    tower = push_stage(tower, relators=[w("a2b2", Alphabet.standard(2))],
                       goals=[inject_goal([w("a", Alphabet.standard(2)), w("B", Alphabet.standard(2))])])
    goal = goal_of(tower.top, GOAL_INJECT)
    assert tower.top.heuristic
    assert goal.status == HEURISTIC
    assert goal.evidence["collisions"] == 0


def test_survive_goal_fails_when_killed(surface_tower):
    tower = push_stage(surface_tower, goals=[survive_goal([w("abAB", ABCD)])], relators=[w("a", ABCD)])
    assert goal_of(tower.top, GOAL_SURVIVE).status == FAILED


def test_push_without_new_relators_keeps_the_quotient(surface_tower):
    tower = push_stage(surface_tower, relators=[w("abABcdCD", ABCD)])
    assert tower.top.new_relators == ()
    assert tower.top.cumulative == surface_tower.top.cumulative
    with pytest.raises(InvalidInputError):
        push_stage(surface_tower, goals=[survive_goal([Word((5,))])])


def test_check_hom(surface_tower, commuting_witness):
    group = commuting_witness.abstract.group
    [with_relator] = extract_witnesses(parse_sentence("E y A x ( [x,y] != 1 )"))
    target = with_relator.group
    assert check_hom(target, [w("a", ABCD), w("a2", ABCD)], surface_tower, 1).target == 1
    with pytest.raises(InvalidMorphismError):
        check_hom(target, [w("a", ABCD), w("b", ABCD)], surface_tower, 1)
    assert check_hom(group, [w("c", ABCD), w("d", ABCD)], surface_tower, 1).images == (w("c", ABCD), w("d", ABCD))


def test_ledger_positive_entry(surface_tower, commuting_witness):
    tower = ledger_update(surface_tower, commuting_witness, POSITIVE, sentence="E y A x ( [x,y] = 1 )")
    assert [e.witness_id for e in tower.ledger.positive] == ["W1"]
    assert tower.ledger.satisfied == ("E y A x ( [x,y] = 1 )",)
    with pytest.raises(InvalidInputError):
        ledger_update(surface_tower, commuting_witness, "maybe")


def test_ledger_poison_and_hom_preserve(surface_tower, commuting_witness):
    group = commuting_witness.abstract.group
    poison = Morphism(group, (w("b", ABCD), w("a", ABCD)), target=1)
    tower = ledger_update(surface_tower, commuting_witness, NEGATIVE, poison)
    assert list(tower.ledger.poisons) == ["W1"]

    kept = push_stage(tower)
    assert goal_of(kept.top, GOAL_HOM_PRESERVE).status == CERTIFIED
    killed = push_stage(tower, relators=[w("a", ABCD)])
    assert goal_of(killed.top, GOAL_HOM_PRESERVE).status == FAILED


def test_invalid_poisons(surface_tower, commuting_witness):
    group = commuting_witness.abstract.group
    with pytest.raises(InvalidPoisonError):
        ledger_update(surface_tower, commuting_witness, NEGATIVE)
    # kills [x, y]
    with pytest.raises(InvalidPoisonError):
        ledger_update(surface_tower, commuting_witness, NEGATIVE, Morphism(group, (w("a2", ABCD), w("a", ABCD)), 1))
    # y is sent to b instead of a
    with pytest.raises(InvalidPoisonError):
        ledger_update(surface_tower, commuting_witness, NEGATIVE, Morphism(group, (w("a", ABCD), w("b", ABCD)), 1))
    with pytest.raises(InvalidPoisonError):
        ledger_update(surface_tower, commuting_witness, NEGATIVE, Morphism(group, (w("b", ABCD), w("a", ABCD)), 0))


def test_ledger_survives_round_trip(surface_tower, commuting_witness):
    group = commuting_witness.abstract.group
    tower = ledger_update(surface_tower, commuting_witness, NEGATIVE, Morphism(group, (w("b", ABCD), w("a", ABCD)), 1))
    restored = tower_from_dict(json.loads(json.dumps(tower_to_dict(tower))))
    assert restored.ledger == tower.ledger
