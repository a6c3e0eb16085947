"""
Free-group word algebra and exact Cayley-tree geometry.

A letter is a signed integer: generator i (0-based) is stored as i + 1 and
its inverse as -(i + 1). Every Word is freely reduced; `reduce` is the only
entry point that accepts unreduced input.

This module provides:
- Word, CyclicWord and Alphabet value types
- Free and cyclic reduction, primitive roots, conjugacy of cyclic words
- Distances, Gromov products, translation lengths and energies in the
  Cayley tree of a free group
- The word text syntax ("ab3A2", "[g27]", "1")
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

from utils.exceptions import DomainError, InvalidInputError, ParseError


IDENTIFIER_PATTERN = re.compile(r'^\$?[A-Za-z_][A-Za-z0-9_]*$')

WORD_TOKEN_PATTERN = re.compile(r'\[([gG])(\d+)\]|([A-Za-z])|(\d+)|(\s+)')


@dataclass(frozen=True)
class Alphabet:
    """Ordered generator names of a free group."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise InvalidInputError("Alphabet must contain at least one generator")
        if len(set(self.names)) != len(self.names):
            raise InvalidInputError(f"Generator names must be distinct: {list(self.names)}")
        for name in self.names:
            if not IDENTIFIER_PATTERN.match(name):
                raise InvalidInputError(f"Invalid generator name: '{name}'")

    @classmethod
    def standard(cls, rank: int) -> "Alphabet":
        """Alphabet a, b, c, ... for rank up to 26, otherwise g1, ..., gN."""
        if rank < 1:
            raise InvalidInputError(f"Alphabet rank must be positive, got {rank}")
        if rank <= 26:
            return cls(tuple(chr(ord('a') + i) for i in range(rank)))
        return cls(tuple(f"g{i + 1}" for i in range(rank)))

    @property
    def rank(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"Unknown generator '{name}' for alphabet {list(self.names)}")


def _free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    stack: list[int] = []
    for letter in letters:
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def _concat(left: tuple[int, ...], right: tuple[int, ...]) -> tuple[int, ...]:
    # Both sides reduced: cancellation only happens at the seam
    i = 0
    limit = min(len(left), len(right))
    while i < limit and left[-1 - i] == -right[i]:
        i += 1
    return left[:len(left) - i] + right[i:]


@dataclass(frozen=True, order=True)
class Word:
    """A freely reduced word; the empty word is the identity."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        letters = self.letters
        for i in range(len(letters)):
            if letters[i] == 0:
                raise InvalidInputError("Letter 0 does not denote a generator")
            if i and letters[i] == -letters[i - 1]:
                raise InvalidInputError(f"Word is not freely reduced at position {i}")

    @classmethod
    def identity(cls) -> "Word":
        return cls(())

    @classmethod
    def generator(cls, index: int, sign: int = 1) -> "Word":
        return cls(((index + 1) * sign,))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __getitem__(self, item):
        return self.letters[item]

    def __mul__(self, other: "Word") -> "Word":
        return Word(_concat(self.letters, other.letters))

    def __pow__(self, exponent: int) -> "Word":
        base = self if exponent >= 0 else self.inverse()
        result = Word()
        for _ in range(abs(exponent)):
            result = result * base
        return result

    def inverse(self) -> "Word":
        return Word(tuple(-letter for letter in reversed(self.letters)))

    def conjugate(self, g: "Word") -> "Word":
        """Return g · self · g⁻¹."""
        return g * self * g.inverse()

    def pairs(self) -> tuple[tuple[int, int], ...]:
        """Letters as (generator index, sign) pairs."""
        return tuple((abs(letter) - 1, 1 if letter > 0 else -1) for letter in self.letters)

    def max_generator(self) -> int:
        """Largest generator index used, or -1 for the identity."""
        return max((abs(letter) - 1 for letter in self.letters), default=-1)

    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]

    def rotate(self, shift: int) -> "Word":
        """Cyclic rotation by `shift` letters; only valid on cyclically reduced words."""
        if not self.letters:
            return self
        shift %= len(self.letters)
        return Word(self.letters[shift:] + self.letters[:shift])


@dataclass(frozen=True)
class CyclicWord:
    """A cyclically reduced word and the conjugator recovering the original."""

    word: Word
    conjugator: Word

    def original(self) -> Word:
        return self.word.conjugate(self.conjugator)


class TreeGeometry(NamedTuple):
    distance: int
    gromov_product: int


class TranslationLength(NamedTuple):
    norm: int
    stable_norm: int


class PrimitiveRoot(NamedTuple):
    root: CyclicWord
    exponent: int


@dataclass(frozen=True)
class EnergyReport:
    """ℓ∞ and ℓ1 energies of a finite set of words acting on the Cayley tree."""

    linf: int
    l1: int
    minimizer: Word
    l1_minimizer: Word


def _letter_of(item, rank: int | None) -> int:
    if isinstance(item, int):
        letter = item
        if letter == 0:
            raise InvalidInputError("Letter 0 does not denote a generator")
        index = abs(letter) - 1
    else:
        index, sign = item
        if sign not in (1, -1):
            raise InvalidInputError(f"Letter sign must be +1 or -1, got {sign}")
        if index < 0:
            raise InvalidInputError(f"Generator index must be non-negative, got {index}")
        letter = (index + 1) * sign
    if rank is not None and index >= rank:
        raise InvalidInputError(f"Generator index {index} out of range for rank {rank}")
    return letter


def reduce(raw: Sequence, rank: int | None = None) -> Word:
    """
    Freely reduce a raw letter sequence.

    Args:
        raw: Letters as (generator index, sign) pairs or signed integers
        rank: Alphabet rank to validate indices against (optional)

    Returns:
        Word: The unique freely reduced form

    Raises:
        InvalidInputError: If a generator index is outside the alphabet
    """
    return Word(_free_reduce(_letter_of(item, rank) for item in raw))


def cyclic_reduce(w: Word) -> CyclicWord:
    """Strip matching first/last letters: w = conjugator · word · conjugator⁻¹."""
    letters = w.letters
    start, end = 0, len(letters)
    while end - start > 1 and letters[start] == -letters[end - 1]:
        start += 1
        end -= 1
    return CyclicWord(word=Word(letters[start:end]), conjugator=Word(letters[:start]))


def _smallest_period(letters: Sequence[int]) -> int:
    # KMP failure function; the period divides n or the word is primitive
    n = len(letters)
    failure = [0] * (n + 1)
    failure[0] = -1
    k = -1
    for i in range(n):
        while k >= 0 and letters[k] != letters[i]:
            k = failure[k]
        k += 1
        failure[i + 1] = k
    period = n - failure[n]
    return period if n % period == 0 else n


def primitive_root(w: Word) -> PrimitiveRoot:
    """
    Primitive root of a nontrivial word up to conjugacy.

    Returns the root of the cyclic reduction (carrying the cyclic-reduce
    conjugator) and the maximal exponent e with root^e conjugate to w.

    Raises:
        DomainError: If w is trivial
    """
    if not w.letters:
        raise DomainError("The identity has no primitive root")
    cyclic = cyclic_reduce(w)
    letters = cyclic.word.letters
    period = _smallest_period(letters)
    return PrimitiveRoot(
        root=CyclicWord(word=Word(letters[:period]), conjugator=cyclic.conjugator),
        exponent=len(letters) // period,
    )


def is_proper_power(w: Word) -> bool:
    return bool(w.letters) and primitive_root(w).exponent > 1


def least_rotation(letters: Sequence[int]) -> int:
    """Booth's algorithm: start index of the lexicographically least rotation."""
    doubled = list(letters) + list(letters)
    n = len(doubled)
    failure = [-1] * n
    k = 0
    for j in range(1, n):
        s = doubled[j]
        i = failure[j - k - 1]
        while i != -1 and s != doubled[k + i + 1]:
            if s < doubled[k + i + 1]:
                k = j - i - 1
            i = failure[i]
        if s != doubled[k + i + 1]:
            if s < doubled[k]:
                k = j
            failure[j - k] = -1
        else:
            failure[j - k] = i + 1
    return k


def canonical_cyclic(w: Word) -> tuple[int, ...]:
    """Canonical representative of the conjugacy class of w (least rotation)."""
    letters = cyclic_reduce(w).word.letters
    if not letters:
        return ()
    k = least_rotation(letters)
    return letters[k:] + letters[:k]


def are_conjugate(u: Word, v: Word) -> bool:
    return canonical_cyclic(u) == canonical_cyclic(v)


def tree_geometry(u: Word, v: Word, basepoint: Word | None = None) -> TreeGeometry:
    """
    Distance d(u, v) and Gromov product ⟨u, v⟩ at a basepoint of the Cayley tree.

    Args:
        u: First vertex
        v: Second vertex
        basepoint: Vertex the Gromov product is taken at (default: identity)

    Returns:
        TreeGeometry(distance, gromov_product)
    """
    base_inverse = (basepoint or Word()).inverse()
    distance = len(u.inverse() * v)
    left = (base_inverse * u).letters
    right = (base_inverse * v).letters
    common = 0
    for a, b in zip(left, right):
        if a != b:
            break
        common += 1
    return TreeGeometry(distance=distance, gromov_product=common)


def translation_length(w: Word) -> TranslationLength:
    """In a tree the translation length and the stable length coincide."""
    length = len(cyclic_reduce(w).word)
    return TranslationLength(norm=length, stable_norm=length)


def ball(rank: int, radius: int) -> Iterator[Word]:
    """All reduced words of length ≤ radius, by length then letter order."""
    alphabet_letters = [letter for i in range(1, rank + 1) for letter in (i, -i)]
    layer: list[tuple[int, ...]] = [()]
    yield Word()
    for _ in range(radius):
        next_layer = []
        for letters in layer:
            for letter in alphabet_letters:
                if letters and letters[-1] == -letter:
                    continue
                extended = letters + (letter,)
                next_layer.append(extended)
                yield Word(extended)
        layer = next_layer


def energy(U: Iterable[Word], rank: int | None = None) -> EnergyReport:
    """
    Exact ℓ∞ and ℓ1 energies of a finite set of words on the Cayley tree.

    The displacement of g at a vertex x is |x⁻¹ g x|. Both minima are attained
    in the ball of radius max |g| around the identity, because every axis meets
    that ball and displacement grows with the distance to the axis.

    Args:
        U: Finite set of words (empty set has energy 0)
        rank: Rank of the free group (default: inferred from U)

    Returns:
        EnergyReport with both energies and a minimizing vertex for each
    """
    words = sorted(set(U))
    if not words:
        return EnergyReport(linf=0, l1=0, minimizer=Word(), l1_minimizer=Word())

    if rank is None:
        rank = max(w.max_generator() for w in words) + 1
    rank = max(rank, 1)
    radius = max(len(w) for w in words)

    best_max: tuple[int, Word] | None = None
    best_sum: tuple[int, Word] | None = None
    for x in ball(rank, radius):
        x_inverse = x.inverse()
        displacements = [len(x_inverse * g * x) for g in words]
        top, total = max(displacements), sum(displacements)
        if best_max is None or top < best_max[0]:
            best_max = (top, x)
        if best_sum is None or total < best_sum[0]:
            best_sum = (total, x)

    logging.debug(f"Energy of {len(words)} words over ball of radius {radius}: "
                  f"linf={best_max[0]}, l1={best_sum[0]}")
    return EnergyReport(linf=best_max[0], l1=best_sum[0],
                        minimizer=best_max[1], l1_minimizer=best_sum[1])


def commutator(u: Word, v: Word) -> Word:
    """[u, v] = u v u⁻¹ v⁻¹."""
    return u * v * u.inverse() * v.inverse()


def substitute(w: Word, images: Sequence[Word]) -> Word:
    """Image of w under the morphism sending generator i to images[i]."""
    result = Word()
    for letter in w.letters:
        index = abs(letter) - 1
        if index >= len(images):
            raise InvalidInputError(f"No image given for generator index {index}")
        image = images[index]
        result = result * (image if letter > 0 else image.inverse())
    return result


def exponent_sums(w: Word, rank: int) -> tuple[int, ...]:
    """Image of w in the abelianization Z^rank of the free group."""
    sums = [0] * rank
    for letter in w.letters:
        sums[abs(letter) - 1] += 1 if letter > 0 else -1
    return tuple(sums)


def gcd_of(values: Iterable[int]) -> int:
    result = 0
    for value in values:
        result = math.gcd(result, value)
    return result


def _letter_text(letter: int, alphabet: Alphabet) -> str:
    index = abs(letter) - 1
    name = alphabet.names[index] if index < alphabet.rank else None
    if name is not None and len(name) == 1 and name.islower():
        return name if letter > 0 else name.upper()
    prefix = 'g' if letter > 0 else 'G'
    return f"[{prefix}{index + 1}]"


def format_word(w: Word, alphabet: Alphabet) -> str:
    """Canonical text of a word: runs collapse into decimal exponents."""
    if not w.letters:
        return "1"
    parts = []
    i = 0
    letters = w.letters
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        run = j - i
        text = _letter_text(letters[i], alphabet)
        parts.append(text if run == 1 else f"{text}{run}")
        i = j
    return "".join(parts)


def parse_word(text: str, alphabet: Alphabet) -> Word:
    """
    Parse the word text syntax.

    Lowercase letters are generators (looked up by name), uppercase letters
    their inverses, a decimal exponent may follow any letter (0 drops it),
    whitespace is ignored, "1" alone is the identity and [gK]/[GK] address
    the K-th generator (1-based).

    Examples:
        >>> format_word(parse_word("ab3A2", Alphabet.standard(2)), Alphabet.standard(2))
        'ab3A2'

    Raises:
        ParseError: If the text is malformed or names an unknown generator
    """
    stripped = "".join(text.split())
    if stripped == "1":
        return Word()
    if not stripped:
        raise ParseError("Empty word text (write 1 for the identity)", 0)

    raw: list[int] = []
    last_letter: int | None = None
    position = 0
    while position < len(text):
        match = WORD_TOKEN_PATTERN.match(text, position)
        if not match:
            raise ParseError(f"Unexpected character '{text[position]}'", position)
        bracket_case, bracket_index, letter, digits, space = match.groups()
        if space:
            pass
        elif digits is not None:
            if last_letter is None:
                raise ParseError("Exponent without a preceding generator", position)
            raw.pop()
            raw.extend([last_letter] * int(digits))
            last_letter = None
        elif letter is not None:
            name = letter.lower()
            if name not in alphabet.names:
                raise ParseError(f"Unknown generator '{letter}'", position)
            index = alphabet.names.index(name)
            last_letter = (index + 1) * (1 if letter.islower() else -1)
            raw.append(last_letter)
        else:
            index = int(bracket_index) - 1
            if index < 0 or index >= alphabet.rank:
                raise ParseError(f"Generator [{bracket_case}{bracket_index}] out of range", position)
            last_letter = (index + 1) * (1 if bracket_case == 'g' else -1)
            raw.append(last_letter)
        position = match.end()
    return reduce(raw)
