"""
Symmetrization and piece analysis of finite relator sets over a free group.

This module provides:
- Presentation (relator sets over an alphabet) and the presentation file format
- SymmetrizedSet: all cyclic conjugates of every relator and its inverse
- max_piece: longest common prefix of two distinct symmetrized elements,
  by quadratic scan for small sets and a suffix-rank scan for large ones
- sc_report / joint_report: exact C''(lambda) verdicts, the strengthened
  condition and tightness
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from services.words import (
    Alphabet,
    Word,
    canonical_cyclic,
    cyclic_reduce,
    format_word,
    is_proper_power,
    parse_word,
    primitive_root,
)
from utils.exceptions import DomainError, InvalidInputError
from utils.suffix_array import max_capped_common_prefix, suffix_ranks
from utils.validators import format_rational, parse_rational


DEFAULT_REFERENCE_LIMIT = 64
DEFAULT_NEIGHBOUR_LIMIT = 2_000_000


@dataclass(frozen=True)
class Presentation:
    """
    Generators and relators; doubles as a quotient handle's input and as a
    witness group.

    Relators are nontrivial, cyclically reduced and deduplicated (first
    occurrence kept).
    """

    alphabet: Alphabet
    relators: tuple[Word, ...] = ()

    def __post_init__(self):
        unique = []
        seen = set()
        for relator in self.relators:
            if not isinstance(relator, Word):
                raise InvalidInputError(f"Relator must be a Word, got {type(relator).__name__}")
            if not relator.letters:
                raise InvalidInputError("Relators must be nontrivial")
            if not relator.is_cyclically_reduced():
                raise InvalidInputError(
                    f"Relator {format_word(relator, self.alphabet)} is not cyclically reduced"
                )
            if relator.max_generator() >= self.alphabet.rank:
                raise InvalidInputError(
                    f"Relator uses generator index {relator.max_generator()} "
                    f"outside alphabet of rank {self.alphabet.rank}"
                )
            if relator not in seen:
                seen.add(relator)
                unique.append(relator)
        object.__setattr__(self, 'relators', tuple(unique))

    @classmethod
    def from_words(cls, alphabet: Alphabet, words: Iterable[Word]) -> "Presentation":
        """Cyclically reduce arbitrary words and drop trivial ones (same normal closure)."""
        relators = [cyclic_reduce(w).word for w in words]
        return cls(alphabet, tuple(r for r in relators if r.letters))

    @property
    def rank(self) -> int:
        return self.alphabet.rank

    def with_relators(self, extra: Iterable[Word]) -> "Presentation":
        return Presentation(self.alphabet, self.relators + tuple(extra))

    def min_length(self) -> int:
        return min((len(r) for r in self.relators), default=0)

    def total_length(self) -> int:
        return sum(len(r) for r in self.relators)


RelatorSet = Presentation


@dataclass(frozen=True)
class OrientedClass:
    """One relator or its inverse, with its primitive period."""

    relator_index: int
    inverted: bool
    letters: tuple[int, ...]
    period: int

    def rotation(self, shift: int) -> Word:
        return Word(self.letters[shift:] + self.letters[:shift])


@dataclass(frozen=True)
class SymmetrizedSet:
    """
    All distinct cyclic rotations of each relator and of each inverse.

    Elements are indexed in the order (relator index, inverted, rotation).
    A relator with primitive period p contributes p rotations per
    orientation; orientations whose rotations already occurred (conjugate or
    inverse-conjugate relators) contribute nothing new. Elements are only
    materialised on demand since large relators have long rotations.
    """

    presentation: Presentation
    classes: tuple[OrientedClass, ...]
    offsets: tuple[int, ...] = field(repr=False)

    def __len__(self) -> int:
        return self.offsets[-1]

    def locate(self, index: int) -> tuple[int, int]:
        """(class position, rotation) of the element with the given index."""
        if not 0 <= index < len(self):
            raise IndexError(f"Symmetrized element index {index} out of range")
        position = int(np.searchsorted(self.offsets, index, side='right')) - 1
        return position, index - self.offsets[position]

    def element(self, index: int) -> Word:
        position, rotation = self.locate(index)
        return self.classes[position].rotation(rotation)

    def origin_of(self, index: int) -> tuple[int, int, bool]:
        """(relator index, rotation, inverted flag) of an element."""
        position, rotation = self.locate(index)
        oriented = self.classes[position]
        return oriented.relator_index, rotation, oriented.inverted

    def element_length(self, index: int) -> int:
        position, _ = self.locate(index)
        return len(self.classes[position].letters)

    @cached_property
    def elements(self) -> tuple[Word, ...]:
        return tuple(self.element(i) for i in range(len(self)))

    @cached_property
    def origin(self) -> dict[Word, tuple[int, int, bool]]:
        return {self.element(i): self.origin_of(i) for i in range(len(self))}


class PieceWitness(NamedTuple):
    piece: Word
    first: Word
    second: Word


class PieceResult(NamedTuple):
    delta: int
    witness: PieceWitness | None
    pair: tuple[int, int] | None


@dataclass(frozen=True)
class SCReport:
    """Piece statistics and small-cancellation verdicts of a relator set."""

    delta: int
    t: int
    lam: Fraction
    epsilon: Fraction
    cprime_sixth: bool
    lambda0: Fraction
    epsilon0: Fraction
    strengthened: bool
    tight: bool
    witness_piece: PieceWitness | None
    relator_count: int
    cprime_lambda: Fraction | None = None
    attribution: tuple[int, int] | None = None

    def to_dict(self, alphabet: Alphabet) -> dict:
        witness = None
        if self.witness_piece is not None:
            witness = [format_word(w, alphabet) for w in self.witness_piece]
        return {
            "delta": self.delta,
            "t": self.t,
            "lambda": format_rational(self.lam),
            "epsilon": format_rational(self.epsilon),
            "cprime_sixth": self.cprime_sixth,
            "lambda0": format_rational(self.lambda0),
            "epsilon0": format_rational(self.epsilon0),
            "strengthened": self.strengthened,
            "tight": self.tight,
            "witness_piece": witness,
            "relator_count": self.relator_count,
            "cprime_lambda": None if self.cprime_lambda is None else format_rational(self.cprime_lambda),
            "attribution": None if self.attribution is None else list(self.attribution),
        }

    @classmethod
    def from_dict(cls, data: dict, alphabet: Alphabet) -> "SCReport":
        witness = None
        if data.get("witness_piece") is not None:
            witness = PieceWitness(*(parse_word(text, alphabet) for text in data["witness_piece"]))
        cprime_lambda = data.get("cprime_lambda")
        attribution = data.get("attribution")
        return cls(
            delta=data["delta"],
            t=data["t"],
            lam=parse_rational(data["lambda"]),
            epsilon=parse_rational(data["epsilon"]),
            cprime_sixth=data["cprime_sixth"],
            lambda0=parse_rational(data["lambda0"]),
            epsilon0=parse_rational(data["epsilon0"]),
            strengthened=data["strengthened"],
            tight=data["tight"],
            witness_piece=witness,
            relator_count=data["relator_count"],
            cprime_lambda=None if cprime_lambda is None else parse_rational(cprime_lambda),
            attribution=None if attribution is None else tuple(attribution),
        )


def parse_presentation(text: str) -> Presentation:
    """
    Parse the line-based presentation format.

    Example:
        # surface group of genus 2
        gens: a b c d
        rel: a b A B c d C D

    Relators are cyclically reduced on load and trivial ones dropped; the
    normal closure is unchanged.

    Raises:
        InvalidInputError: If the header is missing or a line is malformed
    """
    alphabet = None
    relator_texts = []
    for number, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(':')
        key = key.strip().lower()
        if not sep:
            raise InvalidInputError(f"Line {number}: expected 'gens:' or 'rel:'")
        if key == 'gens':
            if alphabet is not None:
                raise InvalidInputError(f"Line {number}: duplicate 'gens:' line")
            alphabet = Alphabet(tuple(value.split()))
        elif key == 'rel':
            relator_texts.append((number, value.strip()))
        else:
            raise InvalidInputError(f"Line {number}: unknown key '{key}'")

    if alphabet is None:
        raise InvalidInputError("Presentation is missing the 'gens:' line")

    words = []
    for number, relator_text in relator_texts:
        try:
            words.append(parse_word(relator_text, alphabet))
        except InvalidInputError as e:
            raise InvalidInputError(f"Line {number}: {e.message}")
        except Exception as e:
            message = getattr(e, 'message', str(e))
            raise InvalidInputError(f"Line {number}: {message}")
    return Presentation.from_words(alphabet, words)


def load_presentation(path: str | Path) -> Presentation:
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding='utf-8')
    except OSError as e:
        raise InvalidInputError(f"Cannot read presentation file {file_path}: {e}")
    presentation = parse_presentation(text)
    logging.info(f"Loaded presentation from {file_path}: rank {presentation.rank}, "
                 f"{len(presentation.relators)} relators")
    return presentation


def format_presentation(presentation: Presentation) -> str:
    lines = ["gens: " + " ".join(presentation.alphabet.names)]
    lines.extend(f"rel: {format_word(r, presentation.alphabet)}" for r in presentation.relators)
    return "\n".join(lines) + "\n"


def symmetrize(R: Presentation) -> SymmetrizedSet:
    """
    Symmetrized closure of a relator set.

    Raises:
        InvalidInputError: If a relator is not cyclically reduced
    """
    classes = []
    seen = set()
    for index, relator in enumerate(R.relators):
        if not relator.is_cyclically_reduced():
            raise InvalidInputError("Relators must be cyclically reduced before symmetrizing")
        period = len(primitive_root(relator).root.word)
        for inverted, oriented in ((False, relator), (True, relator.inverse())):
            key = canonical_cyclic(oriented)
            if key in seen:
                continue
            seen.add(key)
            classes.append(OrientedClass(index, inverted, oriented.letters, period))

    offsets = [0]
    for oriented in classes:
        offsets.append(offsets[-1] + oriented.period)
    return SymmetrizedSet(presentation=R, classes=tuple(classes), offsets=tuple(offsets))


def _common_prefix(u: Sequence[int], v: Sequence[int]) -> int:
    length = 0
    for a, b in zip(u, v):
        if a != b:
            break
        length += 1
    return length


def _involved_mask(S: SymmetrizedSet, relator_indices) -> list[bool] | None:
    if relator_indices is None:
        return None
    wanted = set(relator_indices)
    mask = []
    for oriented in S.classes:
        mask.extend([oriented.relator_index in wanted] * oriented.period)
    return mask


def _reference_scan(S: SymmetrizedSet, mask) -> tuple[int, int, int]:
    elements = S.elements
    best = (0, -1, -1)
    for i, j in combinations(range(len(elements)), 2):
        if mask is not None and not (mask[i] or mask[j]):
            continue
        length = _common_prefix(elements[i].letters, elements[j].letters)
        if best[1] < 0 or length > best[0]:
            best = (length, i, j)
    return best


class _SuffixIndex:
    """Concatenated extended class words with their suffix ranks."""

    def __init__(self, S: SymmetrizedSet):
        rank = S.presentation.rank
        chunks = []
        starts = []
        caps = []
        position = 0
        for number, oriented in enumerate(S.classes):
            letters = oriented.letters
            # Rotation j of the class is spelled by extended[j:j + L]
            extended = letters + letters[:oriented.period - 1]
            chunks.append(np.asarray(extended, dtype=np.int64))
            chunks.append(np.asarray([-(rank + 1 + number)], dtype=np.int64))
            starts.extend(range(position, position + oriented.period))
            caps.extend([len(letters)] * oriented.period)
            position += len(extended) + 1
        self.text = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.caps = np.asarray(caps, dtype=np.int64)
        self.ranks = suffix_ranks(self.text)

    def scan(self, mask=None) -> tuple[int, int, int]:
        return max_capped_common_prefix(self.text, self.starts, self.caps,
                                        involved=mask, ranks=self.ranks)


def _resolve_method(S: SymmetrizedSet, method: str, reference_limit: int) -> str:
    if method not in ("auto", "reference", "suffix"):
        raise InvalidInputError(f"Unknown piece scan method '{method}'")
    if method == "auto":
        return "reference" if len(S) <= reference_limit else "suffix"
    return method


def _piece_result(S: SymmetrizedSet, best: tuple[int, int, int]) -> PieceResult:
    delta, i, j = best
    if i < 0:
        return PieceResult(0, None, None)
    first, second = S.element(i), S.element(j)
    return PieceResult(delta, PieceWitness(Word(first.letters[:delta]), first, second), (i, j))


def max_piece(S: SymmetrizedSet, method: str = "auto",
              reference_limit: int = DEFAULT_REFERENCE_LIMIT) -> PieceResult:
    """
    Maximal piece length of a symmetrized set.

    A piece is a common prefix of two distinct symmetrized elements.

    Args:
        S: Symmetrized set
        method: "reference" (quadratic pairwise scan), "suffix" (suffix-rank
            scan over the extended class words) or "auto"
        reference_limit: Largest element count "auto" sends to the quadratic scan

    Returns:
        PieceResult(delta, witness, pair); with fewer than two elements
        delta is 0 and there is no witness
    """
    chosen = _resolve_method(S, method, reference_limit)
    if len(S) < 2:
        return PieceResult(0, None, None)
    if chosen == "reference":
        best = _reference_scan(S, None)
    else:
        best = _SuffixIndex(S).scan()
    result = _piece_result(S, best)
    logging.debug(f"max_piece ({chosen}) over {len(S)} elements: delta={result.delta}")
    return result


def max_piece_involving(S: SymmetrizedSet, relator_indices: Iterable[int], method: str = "auto",
                        reference_limit: int = DEFAULT_REFERENCE_LIMIT) -> PieceResult:
    """Maximal piece over pairs with at least one element from the given relators."""
    chosen = _resolve_method(S, method, reference_limit)
    if len(S) < 2:
        return PieceResult(0, None, None)
    mask = _involved_mask(S, relator_indices)
    if not any(mask):
        return PieceResult(0, None, None)
    if chosen == "reference":
        best = _reference_scan(S, mask)
    else:
        best = _SuffixIndex(S).scan(mask)
    return _piece_result(S, best)


def _per_relator_lambda(S: SymmetrizedSet, method: str, reference_limit: int) -> Fraction:
    relators = S.presentation.relators
    if len(S) < 2:
        return Fraction(0)
    chosen = _resolve_method(S, method, reference_limit)
    index = None if chosen == "reference" else _SuffixIndex(S)
    owners = {canonical_cyclic(Word(oriented.letters)): oriented.relator_index for oriented in S.classes}
    worst = Fraction(0)
    for number, relator in enumerate(relators):
        # A relator conjugate to an earlier one shares that relator's rotations
        owner = owners.get(canonical_cyclic(relator), number)
        mask = _involved_mask(S, [owner])
        best = _reference_scan(S, mask) if index is None else index.scan(mask)
        worst = max(worst, Fraction(best[0], len(relator)))
    return worst


def is_tight(R: Presentation) -> bool:
    """No relator is a proper power and no two relators are conjugate or inverse-conjugate."""
    seen = set()
    for relator in R.relators:
        if is_proper_power(relator):
            return False
        key = canonical_cyclic(relator)
        inverse_key = canonical_cyclic(relator.inverse())
        if key in seen or inverse_key in seen:
            return False
        seen.add(key)
    return True


def _check_thresholds(lambda0: Fraction, epsilon0: Fraction) -> tuple[Fraction, Fraction]:
    lambda0 = Fraction(lambda0)
    epsilon0 = Fraction(epsilon0)
    if not (0 < lambda0 < 1) or not (0 < epsilon0 < 1):
        raise InvalidInputError(
            f"lambda0 and epsilon0 must lie strictly between 0 and 1, got {lambda0} and {epsilon0}"
        )
    return lambda0, epsilon0


def sc_report(R: Presentation, lambda0: Fraction = Fraction(1, 6), epsilon0: Fraction = Fraction(1, 20),
              method: str = "auto", reference_limit: int = DEFAULT_REFERENCE_LIMIT,
              neighbour_limit: int = DEFAULT_NEIGHBOUR_LIMIT) -> SCReport:
    """
    Compute piece statistics and small-cancellation verdicts.

    Args:
        R: Relator set
        lambda0: Target piece ratio for the strengthened verdict
        epsilon0: Target inverse minimal length for the strengthened verdict
        method: Piece scan method (see max_piece)
        reference_limit: Element count up to which "auto" uses the quadratic scan
        neighbour_limit: Largest total relator length for which the
            per-relator ratio is computed

    Returns:
        SCReport with exact rational lambda = delta / t

    Raises:
        DomainError: If R has no relators
        InvalidInputError: If a threshold lies outside (0, 1)
    """
    report, _, _ = _analyse(R, lambda0, epsilon0, method, reference_limit, neighbour_limit)
    return report


def _analyse(R: Presentation, lambda0, epsilon0, method: str, reference_limit: int,
             neighbour_limit: int) -> tuple[SCReport, SymmetrizedSet, PieceResult]:
    lambda0, epsilon0 = _check_thresholds(lambda0, epsilon0)
    if not R.relators:
        raise DomainError("Small-cancellation report needs at least one relator")

    S = symmetrize(R)
    result = max_piece(S, method=method, reference_limit=reference_limit)
    t = R.min_length()
    lam = Fraction(result.delta, t)

    cprime_lambda = None
    if R.total_length() <= neighbour_limit:
        cprime_lambda = _per_relator_lambda(S, method, reference_limit)

    report = SCReport(
        delta=result.delta,
        t=t,
        lam=lam,
        epsilon=Fraction(1, t),
        cprime_sixth=lam < Fraction(1, 6),
        lambda0=lambda0,
        epsilon0=epsilon0,
        strengthened=result.delta <= lambda0 * t and t >= 1 / epsilon0,
        tight=is_tight(R),
        witness_piece=result.witness,
        relator_count=len(R.relators),
        cprime_lambda=cprime_lambda,
    )
    logging.info(f"SC report: {report.relator_count} relators, delta={report.delta}, T={report.t}, "
                 f"lambda={report.lam}, C'(1/6)={report.cprime_sixth}, tight={report.tight}")
    return report, S, result


def union_of(stages: Sequence[Presentation]) -> tuple[Presentation, list[int]]:
    """
    Union of relator sets over one alphabet, with the stage of each relator.

    Raises:
        DomainError: If no relator sets are given
        InvalidInputError: If the stages use different alphabets
    """
    if not stages:
        raise DomainError("Joint report needs at least one relator set")
    alphabet = stages[0].alphabet
    relators = []
    stage_of = []
    seen = set()
    for stage_index, stage in enumerate(stages):
        if stage.alphabet != alphabet:
            raise InvalidInputError(
                f"Relator set {stage_index} uses alphabet {list(stage.alphabet.names)}, "
                f"expected {list(alphabet.names)}"
            )
        for relator in stage.relators:
            if relator in seen:
                continue
            seen.add(relator)
            relators.append(relator)
            stage_of.append(stage_index)
    return Presentation(alphabet, tuple(relators)), stage_of


def joint_report(stages: Sequence[Presentation], lambda0: Fraction = Fraction(1, 6),
                 epsilon0: Fraction = Fraction(1, 20), method: str = "auto",
                 reference_limit: int = DEFAULT_REFERENCE_LIMIT,
                 neighbour_limit: int = DEFAULT_NEIGHBOUR_LIMIT) -> SCReport:
    """sc_report of the union, with the stages owning the witness piece's two elements."""
    union, stage_of = union_of(stages)
    report, S, result = _analyse(union, lambda0, epsilon0, method, reference_limit, neighbour_limit)
    if result.pair is None:
        return report
    first = S.origin_of(result.pair[0])[0]
    second = S.origin_of(result.pair[1])[0]
    return replace(report, attribution=(stage_of[first], stage_of[second]))
