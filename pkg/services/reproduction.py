"""
The one-relator example <a,b | (a²b²)^(2n+1)> and the epimorphism onto
it from <x,y,z | x²y²z²>.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction

from services.dehn import QuotientHandle, TrivialityVerdict, check_morphism
from services.norms import AbelianizationData, abelianization
from services.small_cancellation import Presentation, SCReport, max_piece, sc_report, symmetrize
from services.words import Alphabet, Word, format_word, parse_word
from utils.exceptions import DomainError, InvalidMorphismError


SOURCE_ALPHABET = Alphabet(("x", "y", "z"))
TARGET_ALPHABET = Alphabet(("a", "b"))


@dataclass(frozen=True)
class EpimorphismReport:
    n: int
    target: Presentation
    report: SCReport
    reference_delta: int
    sound: bool
    images: tuple[Word, ...]
    morphism_verified: bool
    verdicts: tuple[TrivialityVerdict, ...]
    surjective: bool
    source_abelianization: AbelianizationData
    target_abelianization: AbelianizationData

    @property
    def passed(self) -> bool:
        return self.morphism_verified and self.surjective and self.reference_delta == self.report.delta

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "relator": format_word(self.target.relators[0], TARGET_ALPHABET),
            "report": self.report.to_dict(TARGET_ALPHABET),
            "reference_delta": self.reference_delta,
            "sound": self.sound,
            "images": {name: format_word(image, TARGET_ALPHABET)
                       for name, image in zip(SOURCE_ALPHABET.names, self.images)},
            "morphism_verified": self.morphism_verified,
            "dehn_steps": [len(v.trace) for v in self.verdicts],
            "surjective": self.surjective,
            "source_abelianization": self.source_abelianization.to_dict(),
            "target_abelianization": self.target_abelianization.to_dict(),
            "passed": self.passed,
        }


def _covers_generators(images: tuple[Word, ...], rank: int) -> bool:
    """Every target generator is the image of a source generator, up to inversion."""
    singles = {abs(image.letters[0]) - 1 for image in images if len(image) == 1}
    return singles >= set(range(rank))


def repro_remark18(n: int, lambda0: Fraction = Fraction(1, 6), epsilon0: Fraction = Fraction(1, 20)) -> EpimorphismReport:
    """
    Analyse <a,b | (a²b²)^(2n+1)> and check x ↦ a, y ↦ b, z ↦ (a²b²)^n.

    The relator has one-letter pieces only, so Δ = 1 and T = 4(2n+1); the
    piece length is cross-checked by the quadratic scan. The image of
    x²y²z² is (a²b²)^(2n+1), which Dehn's algorithm reduces to the
    identity even when n = 0 and the presentation is not C'(1/6).

    Raises:
        DomainError: If n < 0
    """
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    base = parse_word("a2b2", TARGET_ALPHABET)
    target = Presentation(TARGET_ALPHABET, (base ** (2 * n + 1),))
    source = Presentation(SOURCE_ALPHABET, (parse_word("x2y2z2", SOURCE_ALPHABET),))

    report = sc_report(target, lambda0, epsilon0)
    reference_delta = max_piece(symmetrize(target), method="reference").delta
    handle = QuotientHandle.build(target, lambda0, epsilon0)

    images = (Word.generator(0), Word.generator(1), base ** n)
    try:
        verdicts = tuple(check_morphism(source, images, handle))
        verified = True
    except InvalidMorphismError:
        verdicts = ()
        verified = False

    result = EpimorphismReport(
        n=n,
        target=target,
        report=report,
        reference_delta=reference_delta,
        sound=handle.sound,
        images=images,
        morphism_verified=verified,
        verdicts=verdicts,
        surjective=_covers_generators(images, TARGET_ALPHABET.rank),
        source_abelianization=abelianization(source),
        target_abelianization=abelianization(target),
    )
    logging.info(f"Epimorphism check n={n}: delta={report.delta}, T={report.t}, lambda={report.lam}, "
                 f"sound={handle.sound}, verified={verified}")
    return result
