"""
Tests for Dehn's algorithm, injectivity certificates and the
normal-closure oracle.
"""

import random
from fractions import Fraction

import pytest

from services.dehn import (
    MEMBER,
    NONTRIVIAL,
    NOT_FOUND,
    TRIVIAL,
    UNKNOWN,
    DehnStep,
    QuotientHandle,
    check_morphism,
    dehn_reduce,
    eq_in_quotient,
    expand_factors,
    injectivity_certificate,
    is_trivial,
    normal_closure_member_oracle,
    replay_trace,
)
from services.small_cancellation import Presentation
from services.words import Alphabet, Word, ball, cyclic_reduce, parse_word
from utils.exceptions import InvalidInputError, InvalidMorphismError, UnsoundPresentationError


ABCD = Alphabet.standard(4)
AB = Alphabet.standard(2)
XY = Alphabet(("x", "y"))


def handle_of(alphabet: Alphabet, *relators: str) -> QuotientHandle:
    return QuotientHandle.build(Presentation(alphabet, tuple(parse_word(r, alphabet) for r in relators)))


@pytest.fixture(scope="module")
def surface():
    return handle_of(ABCD, "abABcdCD")


def w(text: str, alphabet: Alphabet = ABCD) -> Word:
    return parse_word(text, alphabet)


def test_surface_handle_is_sound(surface):
    assert surface.sound
    assert surface.kernel_length_bound() == Fraction(5)


def test_free_group_handle():
    handle = QuotientHandle.build(Presentation(AB, ()))
    assert handle.sound
    assert handle.report is None
    assert is_trivial(w("ab", AB), handle).status == NONTRIVIAL


def test_generator_is_nontrivial(surface):
    verdict = is_trivial(w("a"), surface)
    assert verdict.status == NONTRIVIAL
    assert verdict.trace == ()
    assert verdict.tag == "sound"


def test_relator_and_its_rotations_are_trivial(surface):
    relator = w("abABcdCD")
    for shift in range(len(relator)):
        assert is_trivial(relator.rotate(shift), surface).status == TRIVIAL
    assert is_trivial(relator.inverse(), surface).status == TRIVIAL


def test_conjugated_product_of_relators_is_trivial(surface):
    relator = w("abABcdCD")
    word = relator.conjugate(w("ca")) * relator.inverse().conjugate(w("Db"))
    verdict = is_trivial(word, surface)
    assert verdict.status == TRIVIAL
    assert replay_trace(word, verdict.trace, surface) == Word()


def test_dehn_steps_shorten_the_word(surface):
    word = w("abABc") * w("dCD")
    result, trace = dehn_reduce(word, surface)
    assert result == Word()
    lengths = [len(word)]
    current = word
    for step in trace:
        current = replay_trace(current, [step])
        lengths.append(len(current))
    assert lengths == sorted(lengths, reverse=True)
    assert len(set(lengths)) == len(lengths)


def test_wrap_around_step(surface):
    # abABcdC only occurs across the end of the cyclic word
    word = w("cdCaabAB")
    verdict = is_trivial(word, surface)
    assert verdict.trace[0].wraps
    assert verdict.result == w("da")
    assert verdict.status == NONTRIVIAL
    assert replay_trace(word, verdict.trace, surface) == w("da")


def test_equality_in_quotient(surface):
    assert eq_in_quotient(w("abAB"), w("DCdc"), surface).status == TRIVIAL
    assert eq_in_quotient(w("ab"), w("ba"), surface).status == NONTRIVIAL


def test_unsound_handle_answers_unknown_for_irreducible_words():
    handle = handle_of(AB, "a2b2")
    assert not handle.sound
    assert is_trivial(w("a2b2", AB), handle).status == TRIVIAL
    verdict = is_trivial(w("ab", AB), handle)
    assert verdict.status == UNKNOWN
    assert verdict.tag == "heuristic"


def test_replay_rejects_tampered_step(surface):
    word = w("abABcdCD")
    verdict = is_trivial(word, surface)
    step = verdict.trace[0]
    forged = step._replace(replacement=w("a"))
    with pytest.raises(InvalidInputError):
        replay_trace(word, [forged])


def test_replay_rejects_foreign_element(surface):
    step = DehnStep(position=0, length=3, element=w("abcd"), replacement=w("D"), wraps=False)
    with pytest.raises(InvalidInputError):
        replay_trace(w("abc"), [step], surface)


def test_injectivity_on_small_ball(surface):
    certificate = injectivity_certificate(ball(4, 2), surface)
    assert certificate.certified
    assert certificate.failures == []
    # Differences of words of length <= 2 are shorter than the kernel bound 5
    assert certificate.fast_path == certificate.pairs_checked


def test_injectivity_reports_collisions():
    handle = handle_of(AB, "a")
    certificate = injectivity_certificate(ball(2, 1), handle)
    assert not certificate.certified
    assert (Word(), w("a", AB)) in certificate.failures


def test_injectivity_with_threads(surface):
    words = list(ball(4, 3))
    assert injectivity_certificate(words, surface, threads=4).certified


def test_injectivity_needs_sound_presentation():
    with pytest.raises(UnsoundPresentationError):
        injectivity_certificate([Word()], handle_of(AB, "a2b2"))


def test_oracle_finds_conjugate_of_relator():
    R = Presentation(ABCD, (w("abABcdCD"),))
    word = w("abABcdCD").conjugate(w("b"))
    result = normal_closure_member_oracle(word, R, (2, 1))
    assert result.status == MEMBER
    assert expand_factors(result.factors, R) == word


def test_oracle_is_inconclusive_on_generators():
    R = Presentation(ABCD, (w("abABcdCD"),))
    assert normal_closure_member_oracle(w("a"), R, (2, 2)) == (NOT_FOUND, [])


def test_oracle_identity_and_empty_presentation():
    R = Presentation(AB, ())
    assert normal_closure_member_oracle(Word(), R).status == MEMBER
    assert normal_closure_member_oracle(w("a", AB), R).status == NOT_FOUND


def test_check_morphism_accepts_commuting_images(surface):
    G = Presentation(XY, (parse_word("xyXY", XY),))
    verdicts = check_morphism(G, [w("a"), w("a2")], surface)
    assert [v.status for v in verdicts] == [TRIVIAL]


def test_check_morphism_names_failing_relator(surface):
    G = Presentation(XY, (parse_word("xyXY", XY),))
    with pytest.raises(InvalidMorphismError) as info:
        check_morphism(G, [w("a"), w("b")], surface)
    assert info.value.relator == parse_word("xyXY", XY)


def test_check_morphism_validates_images(surface):
    G = Presentation(XY, ())
    with pytest.raises(InvalidInputError):
        check_morphism(G, [w("a")], surface)


# Dehn against the oracle on random C'(1/6) presentations

def _distinct_pair_relator(rng: random.Random, rank: int, length: int, used: set) -> Word | None:
    """Cyclic word whose two-letter subwords (and their inverses) are all new."""
    choices = [g for i in range(1, rank + 1) for g in (i, -i)]
    letters = [rng.choice(choices)]
    taken = set(used)
    while len(letters) < length:
        options = [c for c in choices if c != -letters[-1] and (letters[-1], c) not in taken]
        if not options:
            return None
        letter = rng.choice(options)
        taken.update({(letters[-1], letter), (-letter, -letters[-1])})
        letters.append(letter)
    closing = (letters[-1], letters[0])
    if letters[0] == -letters[-1] or closing in taken:
        return None
    taken.update({closing, (-letters[0], -letters[-1])})
    used.clear()
    used.update(taken)
    return Word(tuple(letters))


def random_sound_presentation(rng: random.Random, alphabet: Alphabet) -> Presentation:
    while True:
        used: set = set()
        relators = []
        for _ in range(rng.randint(1, 2)):
            relator = _distinct_pair_relator(rng, alphabet.rank, rng.randint(7, 12), used)
            if relator is None:
                break
            relators.append(relator)
        else:
            R = Presentation(alphabet, tuple(relators))
            if QuotientHandle.build(R).sound:
                return R


def kernel_word(rng: random.Random, R: Presentation, conjugators: list[Word], max_factors: int = 2) -> Word:
    word = Word()
    for _ in range(rng.randint(1, max_factors)):
        relator = rng.choice(R.relators)
        word = word * (relator if rng.random() < 0.5 else relator.inverse()).conjugate(rng.choice(conjugators))
    return word


def random_word(rng: random.Random, rank: int, max_length: int) -> Word:
    letters = []
    for _ in range(rng.randint(1, max_length)):
        options = [g for i in range(1, rank + 1) for g in (i, -i) if not letters or g != -letters[-1]]
        letters.append(rng.choice(options))
    return Word(tuple(letters))


def run_agreement_battery(instances: int, budget: tuple[int, int], seed: int):
    """
    Dehn and the oracle on random sound presentations of rank 3.

    Kernel words are products of at most budget[0] conjugates with
    conjugators of length at most budget[1], so for them the oracle decides
    membership and Dehn must answer trivial exactly when the oracle finds
    the word.
    """
    rng = random.Random(seed)
    alphabet = Alphabet.standard(3)
    conjugators = list(ball(3, budget[1]))
    disagreements = []
    for _ in range(instances):
        R = random_sound_presentation(rng, alphabet)
        handle = QuotientHandle.build(R)
        bound = handle.kernel_length_bound()
        kernel = [kernel_word(rng, R, conjugators, budget[0]) for _ in range(2)]
        candidates = [(word, True) for word in kernel] + [(random_word(rng, 3, 8), False) for _ in range(2)]
        for word, decidable in candidates:
            verdict = is_trivial(word, handle)
            oracle = normal_closure_member_oracle(word, R, budget)
            if oracle.status == MEMBER and verdict.status != TRIVIAL:
                disagreements.append((R, word))
            if decidable and verdict.status == TRIVIAL and oracle.status != MEMBER:
                disagreements.append((R, word))
            if decidable:
                assert verdict.status == TRIVIAL
            if oracle.status == MEMBER:
                assert expand_factors(oracle.factors, R) == word
                if word.letters:
                    # Nontrivial kernel elements are long
                    assert len(word) > bound
    return disagreements


def test_dehn_agrees_with_oracle():
    assert run_agreement_battery(instances=20, budget=(2, 2), seed=3) == []


@pytest.mark.slow
def test_dehn_agrees_with_oracle_battery():
    assert run_agreement_battery(instances=200, budget=(3, 4), seed=2024) == []


def test_kernel_words_are_found_by_both():
    rng = random.Random(5)
    alphabet = Alphabet.standard(3)
    conjugators = list(ball(3, 1))
    for _ in range(10):
        R = random_sound_presentation(rng, alphabet)
        handle = QuotientHandle.build(R)
        word = kernel_word(rng, R, conjugators)
        assert is_trivial(word, handle).status == TRIVIAL
        assert normal_closure_member_oracle(word, R, (2, 1)).status == MEMBER


def test_cyclic_conjugates_agree(surface):
    rng = random.Random(9)
    for _ in range(50):
        word = random_word(rng, 4, 10)
        core = cyclic_reduce(word).word
        assert is_trivial(word, surface).status == is_trivial(core, surface).status
