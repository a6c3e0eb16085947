"""
Tests for the free-group word algebra.

Covers reduction, cyclic words, primitive roots, tree geometry, energies
and the word text syntax.
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.words import (
    Alphabet,
    Word,
    are_conjugate,
    ball,
    canonical_cyclic,
    commutator,
    cyclic_reduce,
    energy,
    exponent_sums,
    format_word,
    gcd_of,
    is_proper_power,
    parse_word,
    primitive_root,
    reduce,
    substitute,
    translation_length,
    tree_geometry,
)
from tests.strategies import cyclic_words, nontrivial_words, raw_letters, words
from utils.exceptions import DomainError, InvalidInputError, ParseError


AB = Alphabet.standard(2)
ABC = Alphabet.standard(3)


def w(text: str, alphabet: Alphabet = ABC) -> Word:
    return parse_word(text, alphabet)


def test_reduce_cancels_adjacent_inverses():
    assert reduce([(0, 1), (1, 1), (1, -1), (0, -1)]) == Word()
    assert reduce([1, 2, -2, 3]) == Word((1, 3))


def test_reduce_rejects_index_outside_alphabet():
    with pytest.raises(InvalidInputError):
        reduce([(2, 1)], rank=2)


def test_reduce_rejects_bad_sign():
    with pytest.raises(InvalidInputError):
        reduce([(0, 2)])


def test_word_constructor_rejects_unreduced_letters():
    with pytest.raises(InvalidInputError):
        Word((1, -1))
    with pytest.raises(InvalidInputError):
        Word((0,))


def test_inverse_and_product():
    u = w("ab3A2")
    assert u * u.inverse() == Word()
    assert (u * w("a")).letters == u.letters[:-1]


def test_power_and_negative_power():
    assert w("ab") ** 3 == w("ababab")
    assert w("ab") ** -2 == w("BABA")
    assert w("ab") ** 0 == Word()


def test_conjugate_is_g_w_g_inverse():
    assert w("b").conjugate(w("a")) == w("abA")


def test_cyclic_reduce_recovers_original():
    original = w("abcBA")
    cyclic = cyclic_reduce(original)
    assert cyclic.word == w("c")
    assert cyclic.conjugator == w("ab")
    assert cyclic.original() == original


def test_primitive_root_of_power():
    root = primitive_root(w("abab"))
    assert root.exponent == 2
    assert root.root.word == w("ab")


def test_primitive_root_of_conjugated_power():
    root = primitive_root(w("c") * w("ab") ** 3 * w("C"))
    assert root.exponent == 3
    assert root.root.original() == w("c") * w("ab") * w("C")


def test_primitive_root_of_identity_is_undefined():
    with pytest.raises(DomainError):
        primitive_root(Word())


def test_is_proper_power():
    assert is_proper_power(w("a2b2a2b2"))
    assert not is_proper_power(w("a2b2a2b3"))
    assert not is_proper_power(Word())


def test_conjugacy_by_rotation():
    assert are_conjugate(w("abc"), w("bca"))
    assert are_conjugate(w("abc"), w("Cabcc"))
    assert not are_conjugate(w("abc"), w("acb"))


def test_tree_geometry_of_generators():
    geometry = tree_geometry(w("ab"), w("ac"))
    assert geometry.distance == 2
    assert geometry.gromov_product == 1


def test_tree_geometry_at_basepoint():
    geometry = tree_geometry(w("ab"), w("ac"), basepoint=w("a"))
    assert geometry.gromov_product == 0


def test_translation_length_is_cyclic_length():
    assert translation_length(w("abcBA")) == (1, 1)
    assert translation_length(w("ab")) == (2, 2)


def test_ball_sizes():
    # 1 + 4 + 12 reduced words of length at most 2 in rank 2
    assert len(list(ball(2, 2))) == 17
    assert list(ball(2, 0)) == [Word()]


def test_energy_of_single_generator():
    report = energy([w("a")])
    assert report.linf == 1
    assert report.l1 == 1


def test_energy_of_conjugated_generator_is_minimized_off_identity():
    report = energy([w("baB")], rank=2)
    assert report.linf == 1
    assert report.minimizer == w("b")


def test_energy_of_empty_set():
    assert energy([]).linf == 0


def test_commutator_and_exponent_sums():
    c = commutator(w("a"), w("b"))
    assert c == w("abAB")
    assert exponent_sums(c, 2) == (0, 0)
    assert exponent_sums(w("a2b3A"), 2) == (1, 3)
    assert gcd_of([4, 6, 0]) == 2


def test_substitute_morphism():
    images = [w("b", AB), w("ab", AB)]
    assert substitute(w("aB", AB), images) == w("A", AB)


def test_substitute_rejects_missing_image():
    with pytest.raises(InvalidInputError):
        substitute(w("c"), [w("a")])


@pytest.mark.parametrize("text", ["ab3A2", "1", "a", "aBcA", "b2a10"])
def test_format_word_canonical_text(text):
    assert format_word(w(text), ABC) == text


def test_parse_word_ignores_whitespace_and_reduces():
    assert w("a b  B A c") == w("c")
    assert w(" a2 A ") == w("a")


def test_parse_word_zero_exponent_drops_the_letter():
    assert w("a0") == Word()
    assert w("ab0A") == Word()
    assert w("[g2]0a") == w("a")
    assert w("a10").letters == (1,) * 10


def test_parse_word_bracket_generators():
    alphabet = Alphabet.standard(30)
    word = parse_word("[g27][G3]2", alphabet)
    assert word.letters == (27, -3, -3)
    assert format_word(word, alphabet) == "[g27]C2"


def test_standard_alphabet_beyond_letters():
    alphabet = Alphabet.standard(27)
    assert alphabet.names[0] == "g1"
    assert format_word(Word((1, -27)), alphabet) == "[g1][G27]"


@pytest.mark.parametrize("text, position", [("", 0), ("a*b", 1), ("2a", 0), ("d", 0), ("[g9]", 0)])
def test_parse_word_errors(text, position):
    with pytest.raises(ParseError) as info:
        parse_word(text, ABC)
    assert info.value.position == position


def test_alphabet_rejects_duplicates():
    with pytest.raises(InvalidInputError):
        Alphabet(("a", "a"))


# Properties

@settings(max_examples=300)
@given(raw_letters())
def test_reduction_is_idempotent(letters):
    once = reduce(letters)
    assert reduce(once.letters) == once


@settings(max_examples=300)
@given(words(), words(), words())
def test_multiplication_is_associative(u, v, x):
    assert (u * v) * x == u * (v * x)


@settings(max_examples=300)
@given(words())
def test_inverse_is_involution(u):
    assert u.inverse().inverse() == u
    assert u * u.inverse() == Word()


@settings(max_examples=300)
@given(words(), words())
def test_inverse_of_product(u, v):
    assert (u * v).inverse() == v.inverse() * u.inverse()


@settings(max_examples=300)
@given(nontrivial_words())
def test_cyclic_reduction_invariants(u):
    cyclic = cyclic_reduce(u)
    assert cyclic.word.is_cyclically_reduced()
    assert cyclic.original() == u
    assert translation_length(u).norm == len(cyclic.word)


@settings(max_examples=300)
@given(nontrivial_words(max_size=8))
def test_primitive_root_power_is_conjugate(u):
    root = primitive_root(u)
    assert are_conjugate(root.root.word ** root.exponent, u)
    assert primitive_root(root.root.word).exponent == 1


@settings(max_examples=300)
@given(cyclic_words(), st.integers(min_value=0, max_value=20))
def test_rotations_share_canonical_form(u, shift):
    assert canonical_cyclic(u.rotate(shift)) == canonical_cyclic(u)


@settings(max_examples=300)
@given(words(), words())
def test_canonical_form_is_conjugation_invariant(u, g):
    assert canonical_cyclic(u.conjugate(g)) == canonical_cyclic(u)


@settings(max_examples=200)
@given(words(), words(), words())
def test_distance_is_a_tree_metric(u, v, x):
    assert tree_geometry(u, v).distance == tree_geometry(v, u).distance
    assert tree_geometry(u, x).distance <= tree_geometry(u, v).distance + tree_geometry(v, x).distance
    # Gromov product in a tree: (u|v) = (|u| + |v| - d(u, v)) / 2
    assert 2 * tree_geometry(u, v).gromov_product == len(u) + len(v) - tree_geometry(u, v).distance


@settings(max_examples=200)
@given(words())
def test_format_then_parse_is_identity(u):
    assert parse_word(format_word(u, ABC), ABC) == u
