"""
Tests for symmetrization and piece analysis.

The quadratic reference scan is the oracle for the suffix-rank scan.
"""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from services.small_cancellation import (
    Presentation,
    format_presentation,
    is_tight,
    joint_report,
    load_presentation,
    max_piece,
    max_piece_involving,
    parse_presentation,
    sc_report,
    symmetrize,
)
from services.words import Alphabet, Word, are_conjugate, parse_word
from tests.strategies import relator_sets
from utils.exceptions import DomainError, InvalidInputError


AB = Alphabet.standard(2)
ABCD = Alphabet.standard(4)


def presentation(alphabet: Alphabet, *texts: str) -> Presentation:
    return Presentation(alphabet, tuple(parse_word(t, alphabet) for t in texts))


def test_symmetrize_counts_rotations_and_inverses():
    S = symmetrize(presentation(AB, "ab"))
    assert len(S) == 4
    assert set(S.elements) == {parse_word(t, AB) for t in ("ab", "ba", "BA", "AB")}


def test_symmetrize_counts_period_of_proper_power():
    S = symmetrize(presentation(AB, "a2b2a2b2a2b2a2b2a2b2"))
    assert len(S) == 8


def test_symmetrize_skips_conjugate_relators():
    S = symmetrize(presentation(AB, "ab2", "b2a"))
    assert len(S) == 6


def test_symmetrized_elements_are_conjugate_to_relators():
    R = presentation(ABCD, "abABcdCD", "a2c3")
    S = symmetrize(R)
    for element in S.elements:
        relator = R.relators[S.origin[element][0]]
        assert are_conjugate(element, relator) or are_conjugate(element, relator.inverse())


def test_single_relator_without_pieces():
    report = sc_report(presentation(AB, "ab"))
    assert report.delta == 0
    assert report.lam == 0
    assert report.witness_piece is None


def test_surface_relator():
    report = sc_report(presentation(ABCD, "abABcdCD"))
    assert report.delta == 1
    assert report.t == 8
    assert report.lam == Fraction(1, 8)
    assert report.cprime_sixth
    assert report.tight


def test_power_relator_remark_example():
    report = sc_report(presentation(AB, "a2b2" * 5))
    assert report.delta == 1
    assert report.t == 20
    assert report.lam == Fraction(1, 20)
    assert report.cprime_sixth
    assert not report.tight


def test_small_power_is_not_sixth():
    report = sc_report(presentation(AB, "a2b2"))
    assert report.lam == Fraction(1, 4)
    assert not report.cprime_sixth


def test_witness_piece_is_common_prefix():
    report = sc_report(presentation(AB, "a3b3", "a3B3"))
    piece, first, second = report.witness_piece
    assert len(piece) == report.delta == 3
    assert first.letters[:3] == second.letters[:3] == piece.letters
    assert first != second


def test_strengthened_condition():
    R = presentation(ABCD, "abABcdCD")
    assert not sc_report(R, Fraction(1, 6), Fraction(1, 20)).strengthened
    assert sc_report(R, Fraction(1, 6), Fraction(1, 8)).strengthened


def test_per_relator_ratio():
    assert sc_report(presentation(ABCD, "abABcdCD")).cprime_lambda == Fraction(1, 8)
    assert sc_report(presentation(AB, "a2b2" * 5)).cprime_lambda == Fraction(1, 20)


def test_per_relator_ratio_skipped_beyond_limit():
    report = sc_report(presentation(ABCD, "abABcdCD"), neighbour_limit=4)
    assert report.cprime_lambda is None


def test_report_requires_relators():
    with pytest.raises(DomainError):
        sc_report(Presentation(AB, ()))


def test_report_rejects_thresholds_outside_unit_interval():
    with pytest.raises(InvalidInputError):
        sc_report(presentation(AB, "ab"), Fraction(1), Fraction(1, 20))


def test_tightness():
    assert not is_tight(presentation(AB, "ab", "ba"))
    assert not is_tight(presentation(AB, "ab", "BA"))
    assert is_tight(presentation(AB, "ab2", "a2b"))


def test_presentation_rejects_unreduced_relators():
    with pytest.raises(InvalidInputError):
        Presentation(AB, (parse_word("abA", AB),))
    with pytest.raises(InvalidInputError):
        Presentation(AB, (Word(),))


def test_presentation_from_words_cyclically_reduces():
    R = Presentation.from_words(AB, [parse_word("abA", AB), Word()])
    assert R.relators == (parse_word("b", AB),)


def test_joint_report_attributes_witness_to_stages():
    first = presentation(AB, "a3b3a2B2")
    second = presentation(AB, "a3b3A2B5")
    report = joint_report([first, second])
    assert report.delta >= 6
    assert report.attribution == (0, 1)


def test_joint_report_rejects_mixed_alphabets():
    with pytest.raises(InvalidInputError):
        joint_report([presentation(AB, "ab"), presentation(ABCD, "cd")])


def test_max_piece_involving_ignores_other_pairs():
    R = presentation(AB, "a5b", "a5B", "ab2ab3")
    S = symmetrize(R)
    assert max_piece(S).delta >= 5
    assert max_piece_involving(S, [2]).delta < 5


def test_unknown_method():
    with pytest.raises(InvalidInputError):
        max_piece(symmetrize(presentation(AB, "ab")), method="fast")


def test_parse_presentation_file_format():
    text = "# surface\ngens: a b c d\nrel: a b A B c d C D\n\nrel: abA  # conjugate of b\n"
    R = parse_presentation(text)
    assert R.alphabet == ABCD
    assert R.relators == (parse_word("abABcdCD", ABCD), parse_word("b", ABCD))


@pytest.mark.parametrize("text", ["rel: ab\n", "gens: a b\nfoo: ab\n", "gens: a b\nrel: ac\n",
                                  "gens: a b\ngens: a b\n", "gens: a b\nab\n"])
def test_parse_presentation_errors(text):
    with pytest.raises(InvalidInputError):
        parse_presentation(text)


def test_presentation_file_round_trip(tmp_path):
    R = presentation(ABCD, "abABcdCD", "a2c3")
    path = tmp_path / "surface.txt"
    path.write_text(format_presentation(R), encoding="utf-8")
    assert load_presentation(path) == R


def test_load_presentation_missing_file(tmp_path):
    with pytest.raises(InvalidInputError):
        load_presentation(tmp_path / "missing.txt")


# Reference scan as oracle for the suffix scan

@settings(max_examples=1000, deadline=None)
@given(relator_sets())
def test_suffix_scan_matches_reference(relators):
    S = symmetrize(Presentation(AB, tuple(relators)))
    reference = max_piece(S, method="reference")
    suffix = max_piece(S, method="suffix")
    assert suffix.delta == reference.delta
    if suffix.witness is not None:
        piece, first, second = suffix.witness
        assert first != second
        assert first.letters[:suffix.delta] == second.letters[:suffix.delta]


@settings(max_examples=300, deadline=None)
@given(relator_sets(max_relators=3))
def test_involving_scan_matches_reference(relators):
    S = symmetrize(Presentation(AB, tuple(relators)))
    indices = [len(S.presentation.relators) - 1]
    assert (max_piece_involving(S, indices, method="suffix").delta
            == max_piece_involving(S, indices, method="reference").delta)


@settings(max_examples=300, deadline=None)
@given(relator_sets())
def test_lambda_is_delta_over_shortest_relator(relators):
    R = Presentation(AB, tuple(relators))
    report = sc_report(R)
    assert report.lam == Fraction(report.delta, min(len(r) for r in R.relators))
    if report.cprime_lambda is not None:
        assert report.cprime_lambda >= 0


def _random_relator(rng: random.Random, rank: int, length: int) -> Word:
    choices = [g for i in range(1, rank + 1) for g in (i, -i)]
    letters = []
    while len(letters) < length:
        letter = rng.choice(choices)
        if letters and letters[-1] == -letter:
            continue
        if len(letters) == length - 1 and letter == -letters[0]:
            continue
        letters.append(letter)
    return Word(tuple(letters))


@pytest.mark.slow
def test_suffix_scan_agrees_on_medium_instance():
    rng = random.Random(7)
    alphabet = Alphabet.standard(3)
    relators = tuple(_random_relator(rng, 3, 300) for _ in range(5))
    S = symmetrize(Presentation(alphabet, relators))
    assert max_piece(S, method="suffix").delta == max_piece(S, method="reference").delta


@pytest.mark.slow
def test_suffix_scan_on_large_instance():
    rng = random.Random(11)
    alphabet = Alphabet.standard(3)
    long_power = Word(parse_word("a2b3c", alphabet).letters * 160_000)
    relators = (long_power,) + tuple(_random_relator(rng, 3, 1000) for _ in range(10))
    R = Presentation(alphabet, relators)
    report = sc_report(R, method="suffix", neighbour_limit=0)
    assert report.t == 1000
    assert report.delta >= 1
