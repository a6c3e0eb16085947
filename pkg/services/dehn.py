"""
Word problem in small-cancellation quotients via Dehn's algorithm.

This module provides:
- QuotientHandle: a presentation with its SC report and soundness tag
- dehn_reduce / is_trivial / eq_in_quotient with replayable traces
- injectivity_certificate: kernel length bound (1 - 3 lambda) T plus Dehn
- normal_closure_member_oracle: brute-force search over products of
  conjugates, used to cross-check Dehn decisions
- check_morphism: relator images of a finitely presented group are trivial
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from services.small_cancellation import (
    DEFAULT_NEIGHBOUR_LIMIT,
    DEFAULT_REFERENCE_LIMIT,
    Presentation,
    SCReport,
    sc_report,
    symmetrize,
)
from services.words import (
    Alphabet,
    Word,
    ball,
    canonical_cyclic,
    cyclic_reduce,
    exponent_sums,
    format_word,
    reduce,
    substitute,
)
from utils.exceptions import InvalidInputError, InvalidMorphismError, UnsoundPresentationError


TRIVIAL = "trivial"
NONTRIVIAL = "nontrivial"
UNKNOWN = "unknown"

MEMBER = "member"
NOT_FOUND = "not-found"

# Letters are encoded as characters so that substring search runs in C
_CHAR_BASE = 0x100


def _encode(letters: Sequence[int], rank: int) -> str:
    return "".join(chr(_CHAR_BASE + rank + letter) for letter in letters)


@dataclass(frozen=True)
class _DehnClass:
    letters: tuple[int, ...]
    period: int
    doubled: str


class DehnIndex:
    """Oriented relator classes with their doubled cyclic words as strings."""

    def __init__(self, presentation: Presentation):
        self.rank = presentation.rank
        self.classes = []
        for oriented in symmetrize(presentation).classes:
            letters = oriented.letters
            doubled = _encode(letters + letters[:-1], self.rank)
            self.classes.append(_DehnClass(letters, oriented.period, doubled))
        self.keys = {canonical_cyclic(Word(c.letters)) for c in self.classes}

    def longest_match(self, text: str, start: int, stop: int) -> tuple[int, int, int] | None:
        """
        Longest subword text[start:start + d] (d ≤ stop - start) that is more
        than half of some symmetrized element.

        Returns:
            (d, class position, rotation) or None; ties go to the earlier class
        """
        best = None
        available = stop - start
        for position, relator_class in enumerate(self.classes):
            length = len(relator_class.letters)
            low = length // 2 + 1
            high = min(length, available)
            if low > high:
                continue
            found = relator_class.doubled.find(text[start:start + low])
            if found < 0:
                continue
            # Occurrence is monotone in d: binary search the longest match
            while low < high:
                middle = (low + high + 1) // 2
                candidate = relator_class.doubled.find(text[start:start + middle])
                if candidate >= 0:
                    low, found = middle, candidate
                else:
                    high = middle - 1
            if best is None or low > best[0]:
                best = (low, position, found % relator_class.period)
        return best


@dataclass(frozen=True)
class QuotientHandle:
    """A presentation of a quotient with its small-cancellation report."""

    presentation: Presentation
    report: SCReport | None
    sound: bool
    index: DehnIndex = field(repr=False, compare=False)

    @classmethod
    def build(cls, presentation: Presentation, lambda0: Fraction = Fraction(1, 6),
              epsilon0: Fraction = Fraction(1, 20), method: str = "auto",
              reference_limit: int = DEFAULT_REFERENCE_LIMIT,
              neighbour_limit: int = DEFAULT_NEIGHBOUR_LIMIT) -> "QuotientHandle":
        """Analyse a presentation; the free group (no relators) is sound."""
        if not presentation.relators:
            return cls(presentation, None, True, DehnIndex(presentation))
        report = sc_report(presentation, lambda0, epsilon0, method=method,
                           reference_limit=reference_limit, neighbour_limit=neighbour_limit)
        return cls(presentation, report, report.cprime_sixth, DehnIndex(presentation))

    @property
    def alphabet(self) -> Alphabet:
        return self.presentation.alphabet

    def kernel_length_bound(self) -> Fraction | None:
        """Every nontrivial kernel element is longer than (1 - 3 lambda) T."""
        if self.report is None:
            return None
        return (1 - 3 * self.report.lam) * self.report.t


class DehnStep(NamedTuple):
    position: int
    length: int
    element: Word
    replacement: Word
    wraps: bool


@dataclass(frozen=True)
class TrivialityVerdict:
    """Outcome of a Dehn decision; trace replays from the input word."""

    status: str
    trace: tuple[DehnStep, ...]
    soundness: bool
    result: Word

    @property
    def tag(self) -> str:
        return "sound" if self.soundness else "heuristic"


class InjectivityCertificate(NamedTuple):
    certified: bool
    failures: list[tuple[Word, Word]]
    pairs_checked: int
    fast_path: int


class OracleResult(NamedTuple):
    status: str
    factors: list[tuple[Word, int, int]]


def _apply_step(current: Word, step: DehnStep) -> Word:
    if step.wraps:
        core = cyclic_reduce(current).word
        rotated = core.rotate(step.position)
        matched = rotated.letters[:step.length]
        if matched != step.element.letters[:step.length]:
            raise InvalidInputError(f"Trace step at cyclic position {step.position} does not match its element")
        return reduce(step.replacement.letters + rotated.letters[step.length:])
    letters = current.letters
    matched = letters[step.position:step.position + step.length]
    if matched != step.element.letters[:step.length]:
        raise InvalidInputError(f"Trace step at position {step.position} does not match its element")
    return reduce(letters[:step.position] + step.replacement.letters + letters[step.position + step.length:])


def _find_step(current: Word, index: DehnIndex) -> DehnStep | None:
    letters = current.letters
    n = len(letters)
    text = _encode(letters, index.rank)
    for position in range(n):
        match = index.longest_match(text, position, n)
        if match is not None:
            return _make_step(index, match, position, wraps=False)

    # Subwords crossing the end of the cyclic core
    core = cyclic_reduce(current).word.letters
    m = len(core)
    if m < 2:
        return None
    core_text = _encode(core + core, index.rank)
    for position in range(1, m):
        match = index.longest_match(core_text, position, position + m)
        if match is not None and match[0] > m - position:
            return _make_step(index, match, position, wraps=True)
    return None


def _make_step(index: DehnIndex, match: tuple[int, int, int], position: int, wraps: bool) -> DehnStep:
    length, class_position, rotation = match
    relator_class = index.classes[class_position]
    letters = relator_class.letters
    element = Word(letters[rotation:] + letters[:rotation])
    replacement = Word(element.letters[length:]).inverse()
    return DehnStep(position, length, element, replacement, wraps)


def dehn_reduce(w: Word, Q: QuotientHandle) -> tuple[Word, tuple[DehnStep, ...]]:
    """
    Run Dehn's algorithm.

    Each step replaces a subword u that is more than half of a symmetrized
    element r = u v⁻¹ by v, at the leftmost position and with the longest
    match. Steps crossing the end of the cyclic word conjugate the word, so
    the result equals a conjugate of w in the quotient.

    Returns:
        (result, trace): length strictly decreases at every step
    """
    current = w
    trace = []
    while current.letters:
        step = _find_step(current, Q.index)
        if step is None:
            break
        current = _apply_step(current, step)
        trace.append(step)
    logging.debug(f"Dehn reduction: {len(w)} -> {len(current)} letters in {len(trace)} steps")
    return current, tuple(trace)


def replay_trace(w: Word, trace: Iterable[DehnStep], Q: QuotientHandle | None = None) -> Word:
    """
    Re-apply recorded Dehn steps.

    Args:
        w: Input word the trace was recorded from
        trace: Recorded steps
        Q: If given, every step's element must be a symmetrized relator of Q

    Returns:
        Word: The word after the last step

    Raises:
        InvalidInputError: If a step does not match the word or its element
    """
    current = w
    for step in trace:
        if step.replacement != Word(step.element.letters[step.length:]).inverse():
            raise InvalidInputError("Trace step replacement is not the complement of its element")
        if Q is not None and canonical_cyclic(step.element) not in Q.index.keys:
            raise InvalidInputError("Trace step uses a word outside the symmetrized relator set")
        current = _apply_step(current, step)
    return current


def is_trivial(w: Word, Q: QuotientHandle) -> TrivialityVerdict:
    """
    Decide triviality of w in the quotient.

    Sound handles answer trivial or nontrivial; unsound handles answer
    trivial only when Dehn reaches the identity, unknown otherwise.
    """
    result, trace = dehn_reduce(w, Q)
    if not result.letters:
        status = TRIVIAL
    elif Q.sound:
        status = NONTRIVIAL
    else:
        status = UNKNOWN
    return TrivialityVerdict(status=status, trace=trace, soundness=Q.sound, result=result)


def eq_in_quotient(u: Word, v: Word, Q: QuotientHandle) -> TrivialityVerdict:
    return is_trivial(u * v.inverse(), Q)


def injectivity_certificate(U: Iterable[Word], Q: QuotientHandle, threads: int = 1) -> InjectivityCertificate:
    """
    Certify that the quotient map is injective on U.

    Args:
        U: Finite set of words
        Q: Sound quotient handle
        threads: Worker threads for the Dehn decisions

    Returns:
        InjectivityCertificate listing every pair (u, v) with u = v in the quotient

    Raises:
        UnsoundPresentationError: If Q is not C'(1/6)
    """
    if not Q.sound:
        raise UnsoundPresentationError(
            "Injectivity certificates need a C'(1/6) presentation; "
            f"lambda = {Q.report.lam if Q.report else 0}"
        )
    words = list(dict.fromkeys(U))
    bound = Q.kernel_length_bound()
    pairs = [(words[i], words[j]) for i in range(len(words)) for j in range(i + 1, len(words))]

    fast = 0
    pending = []
    for u, v in pairs:
        difference = u * v.inverse()
        if bound is None or len(difference) < bound:
            fast += 1
        else:
            pending.append((u, v, difference))

    def decide(item):
        return is_trivial(item[2], Q).status

    if threads > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            statuses = list(executor.map(decide, pending))
    else:
        statuses = [decide(item) for item in pending]

    failures = [(u, v) for (u, v, _), status in zip(pending, statuses) if status == TRIVIAL]
    certified = not failures
    logging.info(f"Injectivity on {len(words)} words: {len(pairs)} pairs, {fast} by length bound, "
                 f"{len(failures)} failures")
    return InjectivityCertificate(certified, failures, len(pairs), fast)


def _signed_sum(vectors: Sequence[tuple[int, ...]]) -> tuple[int, ...]:
    return tuple(sum(column) for column in zip(*vectors))


def normal_closure_member_oracle(w: Word, R: Presentation, budget: tuple[int, int] = (3, 4)) -> OracleResult:
    """
    Search products of at most F conjugates g r^±1 g⁻¹ (|g| ≤ C) equal to w.

    Iterative deepening on the number of factors. Residual targets whose
    exponent-sum vector is not a sum of the remaining number of signed
    relator vectors are pruned, and the last factor is found by lookup.

    Args:
        w: Word to test
        R: Relator set
        budget: (max factors F, max conjugator length C)

    Returns:
        OracleResult: "member" with the factors (conjugator, relator index,
        sign) in product order, or "not-found" (inconclusive on its own)
    """
    max_factors, max_conjugator = budget
    if not w.letters:
        return OracleResult(MEMBER, [])
    if not R.relators or max_factors < 1:
        return OracleResult(NOT_FOUND, [])

    rank = R.rank
    conjugates: dict[Word, tuple[Word, int, int]] = {}
    for g in ball(rank, max_conjugator):
        for index, relator in enumerate(R.relators):
            for sign in (1, -1):
                conjugate = (relator if sign > 0 else relator.inverse()).conjugate(g)
                conjugates.setdefault(conjugate, (g, index, sign))
    vector_of = {c: exponent_sums(c, rank) for c in conjugates}

    base_vectors = set()
    for relator in R.relators:
        vector = exponent_sums(relator, rank)
        base_vectors.add(vector)
        base_vectors.add(tuple(-x for x in vector))
    reachable = [{tuple([0] * rank)}]
    for _ in range(max_factors):
        reachable.append({_signed_sum([a, b]) for a in reachable[-1] for b in base_vectors})

    ordered = sorted(conjugates, key=lambda c: (len(c), c.letters))

    def search(target: Word, vector: tuple[int, ...], remaining: int,
               chosen: list[Word]) -> list[Word] | None:
        if remaining == 1:
            return chosen + [target] if target in conjugates else None
        for factor in ordered:
            # residual vectors are checked before the residual word is built
            residual_vector = tuple(a - b for a, b in zip(vector, vector_of[factor]))
            if residual_vector not in reachable[remaining - 1]:
                continue
            found = search(factor.inverse() * target, residual_vector, remaining - 1, chosen + [factor])
            if found is not None:
                return found
        return None

    target_vector = exponent_sums(w, rank)
    for count in range(1, max_factors + 1):
        if target_vector not in reachable[count]:
            continue
        found = search(w, target_vector, count, [])
        if found is not None:
            logging.debug(f"Oracle: member with {count} factors")
            return OracleResult(MEMBER, [conjugates[c] for c in found])
    logging.debug(f"Oracle: not found within budget {budget} over {len(conjugates)} conjugates")
    return OracleResult(NOT_FOUND, [])


def expand_factors(factors: Sequence[tuple[Word, int, int]], R: Presentation) -> Word:
    """Multiply out oracle factors (conjugator, relator index, sign)."""
    result = Word()
    for g, index, sign in factors:
        relator = R.relators[index]
        result = result * (relator if sign > 0 else relator.inverse()).conjugate(g)
    return result


def check_morphism(G: Presentation, images: Sequence[Word], Q: QuotientHandle) -> list[TrivialityVerdict]:
    """
    Check that generator images define a morphism from G to the quotient.

    Args:
        G: Source presentation
        images: One word per generator of G, over Q's alphabet
        Q: Target quotient

    Returns:
        One trivial verdict per relator of G

    Raises:
        InvalidInputError: If the number of images does not match G's rank
        InvalidMorphismError: If some relator image is not Dehn-trivial
    """
    if len(images) != G.rank:
        raise InvalidInputError(f"Expected {G.rank} generator images, got {len(images)}")
    for image in images:
        if image.max_generator() >= Q.presentation.rank:
            raise InvalidInputError("Generator image uses letters outside the target alphabet")

    verdicts = []
    for relator in G.relators:
        verdict = is_trivial(substitute(relator, images), Q)
        if verdict.status != TRIVIAL:
            raise InvalidMorphismError(
                f"Relator {format_word(relator, G.alphabet)} maps to "
                f"{format_word(verdict.result, Q.alphabet)}, which is {verdict.status} in the target",
                relator=relator,
            )
        verdicts.append(verdict)
    logging.info(f"Morphism verified: {len(verdicts)} relator images trivial")
    return verdicts
