"""
Tests for abelianizations and conjugation-invariant norm certificates.
"""

from dataclasses import replace
from fractions import Fraction

import pytest

from services.dehn import QuotientHandle
from services.norms import (
    BOUNDED,
    CL,
    ELL_ALPHA,
    INFINITE,
    STABLE_ELL_ALPHA,
    UNKNOWN,
    W_LENGTH,
    NormCertificate,
    abelianization,
    best_stable_bound,
    cl_bound,
    ell_alpha_bound,
    replay_norm_certificate,
    stable_bound_from_cert,
    stable_sequence,
    w_length_bound,
)
from services.relator_forge import AbsorptionSpec, SclSpec, absorption_relator, kappa_family, scl_relator
from services.small_cancellation import Presentation, parse_presentation
from services.words import Alphabet, Word, parse_word
from utils.exceptions import DomainError, InvalidInputError, UncertifiedCertificateError


AB = Alphabet.standard(2)
ABCD = Alphabet.standard(4)
XY = Alphabet(("x", "y"))
STXY = Alphabet(("s", "t", "x", "y"))
POWER = "gens: a b\nrel: a2b2a2b2a2b2a2b2a2b2\n"


def w(text: str, alphabet: Alphabet = AB) -> Word:
    return parse_word(text, alphabet)


@pytest.mark.parametrize("text, factors, free_rank, group", [
    ("gens: a b\nrel: a2b2a2b2a2b2a2b2a2b2\n", (10,), 1, "Z + Z/10"),
    ("gens: x y z\nrel: x2y2z2\n", (2,), 2, "Z^2 + Z/2"),
    ("gens: a b c d\nrel: abABcdCD\n", (), 4, "Z^4"),
    ("gens: a b\nrel: a3\nrel: b2\nrel: abAB\n", (1, 6), 0, "Z/6"),
])
def test_abelianization(text, factors, free_rank, group):
    data = abelianization(parse_presentation(text))
    assert data.invariant_factors == factors
    assert data.free_rank == free_rank
    assert data.describe() == group


def test_abelianization_membership():
    data = abelianization(parse_presentation(POWER))
    assert data.contains((10, 10))
    assert data.contains((0, 0))
    assert not data.contains((5, 5))
    assert data.contains_modulo((5, 5), [(1, 1)])
    with pytest.raises(InvalidInputError):
        data.contains((1, 2, 3))


def test_cl_of_commutator_in_free_group():
    cert = cl_bound(w("abAB"), None)
    assert cert.status == BOUNDED
    assert cert.norm_kind == CL
    assert cert.bound == 1
    assert replay_norm_certificate(cert, None)


def test_cl_of_squared_commutator():
    cert = cl_bound(w("abABabAB"), None)
    assert cert.status == BOUNDED
    assert cert.bound == 2
    assert cert.expression() == w("abABabAB")


def test_cl_infinite_from_abelianization():
    cert = cl_bound(w("a"), None)
    assert cert.status == INFINITE
    assert cert.bound is None
    assert replay_norm_certificate(cert, None)


def test_cl_torsion_element_is_not_infinite():
    handle = QuotientHandle.build(parse_presentation(POWER))
    cert = cl_bound(w("a2b2") ** 5, handle, budget=(1, 1))
    assert cert.status != INFINITE


def test_ell_alpha_free_group():
    cert = ell_alpha_bound(w("abaB"), w("a"), None)
    assert cert.status == BOUNDED
    assert cert.bound == 2
    assert cert.norm_kind == ELL_ALPHA
    assert replay_norm_certificate(cert, None)
    assert ell_alpha_bound(w("b"), w("a"), None).status == INFINITE


def test_ell_alpha_unknown_when_budget_exhausted():
    cert = ell_alpha_bound(w("abaB"), w("a"), None, budget=(1, 0))
    assert cert.status == UNKNOWN
    assert not replay_norm_certificate(cert, None)


def test_ell_alpha_uses_the_quotient():
    surface = QuotientHandle.build(parse_presentation("gens: a b c d\nrel: abABcdCD\n"))
    gamma = parse_word("abAB", ABCD)
    alpha = parse_word("dcDC", ABCD)
    cert = ell_alpha_bound(gamma, alpha, surface, budget=(1, 0))
    assert cert.status == BOUNDED
    assert cert.bound == 1
    assert replay_norm_certificate(cert, surface)
    assert not replay_norm_certificate(cert, None)


def test_replay_rejects_tampered_bound():
    cert = ell_alpha_bound(w("abaB"), w("a"), None)
    assert not replay_norm_certificate(replace(cert, bound=Fraction(1)), None)


def test_w_length_silly_word():
    cert = w_length_bound(w("ab"), w("x2y3", XY), None)
    assert cert.status == BOUNDED
    assert cert.bound == 1
    assert cert.norm_kind == W_LENGTH
    assert cert.expression() == w("ab")
    assert replay_norm_certificate(cert, None)


def test_w_length_squares():
    square = w("x2", XY)
    assert w_length_bound(w("a"), square, None).status == INFINITE
    assert w_length_bound(w("a2"), square, None).bound == 1
    two = w_length_bound(w("a2b2"), square, None)
    assert two.bound == 2
    assert replay_norm_certificate(two, None)


def test_w_length_commutator_word_is_infinite_on_abelian_image():
    cert = w_length_bound(w("a"), w("xyXY", XY), None)
    assert cert.status == INFINITE
    assert replay_norm_certificate(cert, None)


def test_certificate_power_and_round_trip():
    cert = cl_bound(w("abAB"), None)
    squared = cert.power(2)
    assert squared.element == w("abABabAB")
    assert squared.bound == 2
    assert replay_norm_certificate(squared, None)
    restored = NormCertificate.from_dict(squared.to_dict(AB), AB)
    assert restored == squared
    with pytest.raises(DomainError):
        cert.power(0)
    with pytest.raises(DomainError):
        cl_bound(w("a"), None).power(2)


@pytest.fixture(scope="module")
def scl_certificate():
    spec = SclSpec(gamma=parse_word("st", STXY), gamma1=parse_word("s", STXY), alpha=parse_word("s", STXY),
                   gamma1_bound=ell_alpha_bound(parse_word("s", STXY), parse_word("s", STXY), None),
                   kappas=tuple(kappa_family(parse_word("x", STXY), parse_word("y", STXY), 1, 5)),
                   q=11, sigma=Fraction(1, 10))
    return scl_relator(spec, Presentation(STXY, ()), neighbour_limit=0)


def test_stable_bound_needs_a_certified_certificate(scl_certificate):
    with pytest.raises(UncertifiedCertificateError):
        stable_bound_from_cert(scl_certificate)
    absorb = absorption_relator(AbsorptionSpec(parse_word("s", STXY), parse_word("x", STXY),
                                               parse_word("y", STXY), 2, 2), Presentation(STXY, ()))
    with pytest.raises(UncertifiedCertificateError):
        stable_bound_from_cert(replace(absorb, stage=1, certified=True))


def test_stable_bound_from_certificate(scl_certificate):
    cert = stable_bound_from_cert(replace(scl_certificate, stage=1, certified=True))
    assert cert.norm_kind == STABLE_ELL_ALPHA
    assert cert.bound == 1
    assert cert.exponent == 11
    assert cert.stable_bound == Fraction(1, 11)
    assert stable_sequence(cert, 3) == [Fraction(1, 11)] * 3

    handle = QuotientHandle.build(Presentation(STXY, (scl_certificate.relator,)))
    assert replay_norm_certificate(cert, handle)
    assert not replay_norm_certificate(cert, None)


def test_best_stable_bound(scl_certificate):
    cert = stable_bound_from_cert(replace(scl_certificate, stage=1, certified=True))
    weaker = replace(cert, exponent=5, stage=2)
    assert best_stable_bound([weaker, cert]) is cert
    with pytest.raises(DomainError):
        best_stable_bound([replace(cert, status=UNKNOWN)])
    with pytest.raises(DomainError):
        stable_sequence(cert, 0)
