"""
Conjugation-invariant norm bounds in quotients of free groups.

Upper bounds are found by bounded search and always carry an expression
that replays in the quotient. The only "infinite" verdicts come from the
abelianization, computed with integer invariant factors (sympy).
"""

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import product
from typing import TYPE_CHECKING, Iterable, Sequence

from sympy import Matrix, ZZ
from sympy.matrices.normalforms import invariant_factors

from services.dehn import TRIVIAL, QuotientHandle, is_trivial
from services.small_cancellation import Presentation
from services.words import (
    Alphabet,
    Word,
    ball,
    commutator,
    exponent_sums,
    format_word,
    gcd_of,
    parse_word,
    substitute,
)
from utils.exceptions import DomainError, InvalidInputError, UncertifiedCertificateError
from utils.validators import format_rational, parse_rational

if TYPE_CHECKING:
    from services.relator_forge import RelatorCertificate


ELL_ALPHA = "ell_alpha"
STABLE_ELL_ALPHA = "stable_ell_alpha"
CL = "cl"
W_LENGTH = "w_length"

BOUNDED = "bounded"
INFINITE = "infinite"
UNKNOWN = "unknown"

DEFAULT_NORM_BUDGET = (2, 2)


def _lattice_invariants(rows: Sequence[Sequence[int]], rank: int) -> tuple[int, ...]:
    """Nonzero invariant factors of the row lattice, ascending."""
    rows = [list(row) for row in rows if any(row)]
    if not rows or rank == 0:
        return ()
    factors = invariant_factors(Matrix(rows), domain=ZZ)
    return tuple(sorted(abs(int(f)) for f in factors if f != 0))


@dataclass(frozen=True)
class AbelianizationData:
    """
    Integer data of Z^rank / (row lattice of the relator exponent matrix).

    invariant_factors lists the nonzero diagonal entries of the Smith form,
    each dividing the next; the group is Z^free_rank plus the cyclic groups
    of the factors larger than one.
    """

    matrix: tuple[tuple[int, ...], ...]
    invariant_factors: tuple[int, ...]
    free_rank: int
    rank: int

    @property
    def torsion(self) -> tuple[int, ...]:
        return tuple(f for f in self.invariant_factors if f > 1)

    def image(self, w: Word) -> tuple[int, ...]:
        return exponent_sums(w, self.rank)

    def _lattice_matches(self, extra: Iterable[Sequence[int]]) -> bool:
        extended = _lattice_invariants(list(self.matrix) + [list(v) for v in extra], self.rank)
        if len(extended) != len(self.invariant_factors):
            return False
        product_before = 1
        for f in self.invariant_factors:
            product_before *= f
        product_after = 1
        for f in extended:
            product_after *= f
        return product_before == product_after

    def contains(self, vector: Sequence[int]) -> bool:
        """
        Is the vector in the relator lattice?

        Adjoining a vector of the lattice changes neither its rank nor the
        product of its invariant factors; adjoining any other vector changes
        one of them.
        """
        if len(vector) != self.rank:
            raise InvalidInputError(f"Vector of length {len(vector)} for rank {self.rank}")
        if not any(vector):
            return True
        return self._lattice_matches([vector])

    def contains_modulo(self, vector: Sequence[int], extra: Sequence[Sequence[int]]) -> bool:
        """Is the vector in the lattice spanned by the relator rows and `extra`?"""
        base = AbelianizationData.of_rows(list(self.matrix) + [list(v) for v in extra], self.rank)
        return base.contains(vector)

    def describe(self) -> str:
        parts = []
        if self.free_rank:
            parts.append("Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        parts.extend(f"Z/{f}" for f in self.torsion)
        return " + ".join(parts) if parts else "0"

    def to_dict(self) -> dict:
        return {
            "invariant_factors": list(self.invariant_factors),
            "torsion": list(self.torsion),
            "free_rank": self.free_rank,
            "rank": self.rank,
            "group": self.describe(),
        }

    @classmethod
    def of_rows(cls, rows: Sequence[Sequence[int]], rank: int) -> "AbelianizationData":
        matrix = tuple(tuple(int(x) for x in row) for row in rows)
        factors = _lattice_invariants(matrix, rank)
        return cls(matrix=matrix, invariant_factors=factors, free_rank=rank - len(factors), rank=rank)


def abelianization(P: Presentation) -> AbelianizationData:
    """
    Abelianization of a presentation from the integer normal form of its
    exponent matrix.

    Example:
        <a,b | (a^2 b^2)^5> has exponent row (10, 10), invariant factor 10
        and free rank 1.
    """
    rows = [exponent_sums(relator, P.rank) for relator in P.relators]
    data = AbelianizationData.of_rows(rows, P.rank)
    logging.debug(f"Abelianization of {len(rows)} relators over rank {P.rank}: {data.describe()}")
    return data


@dataclass(frozen=True)
class NormCertificate:
    """
    A norm bound for `element` with the expression that proves it.

    The product of the factors built from `parts` equals element^exponent
    in the quotient of `stage` (freely when the stage has no relators).
    Each factor contributes `per_factor` to the bound, so for exponent 1
    the bound is a bound on the norm of the element and otherwise
    bound / exponent bounds its stable norm.
    """

    element: Word
    norm_kind: str
    status: str
    bound: Fraction | None = None
    parameter: Word | None = None
    parts: tuple[tuple[Word, ...], ...] = ()
    exponent: int = 1
    per_factor: Fraction = Fraction(1)
    stage: int | None = None

    @property
    def stable_bound(self) -> Fraction | None:
        if self.bound is None:
            return None
        return self.bound / self.exponent

    def factors(self) -> list[Word]:
        if self.norm_kind == CL:
            return [commutator(u, v) for u, v in self.parts]
        if self.norm_kind == W_LENGTH:
            return [substitute(self.parameter, images) for images in self.parts]
        return [base.conjugate(g) for g, base in self.parts]

    def expression(self) -> Word:
        result = Word()
        for factor in self.factors():
            result = result * factor
        return result

    def power(self, m: int) -> "NormCertificate":
        """Certificate for element^m from m copies of the expression."""
        if m < 1:
            raise DomainError(f"Certificate powers need m >= 1, got {m}")
        if self.status != BOUNDED:
            raise DomainError(f"Cannot take powers of a certificate with status {self.status}")
        return replace(self, element=self.element ** m, parts=self.parts * m, bound=self.bound * m)

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "element": format_word(self.element, alphabet),
            "norm_kind": self.norm_kind,
            "status": self.status,
            "bound": None if self.bound is None else format_rational(self.bound),
            "stable_bound": None if self.stable_bound is None else format_rational(self.stable_bound),
            "parameter": None if self.parameter is None else format_word(self.parameter, alphabet),
            "expression": [format_word(f, alphabet) for f in self.factors()],
            "parts": [[format_word(w, alphabet) for w in part] for part in self.parts],
            "exponent": self.exponent,
            "per_factor": format_rational(self.per_factor),
            "stage": "free" if self.stage is None else self.stage,
        }

    @classmethod
    def from_dict(cls, data: dict, alphabet: Alphabet) -> "NormCertificate":
        stage = data.get("stage")
        return cls(
            element=parse_word(data["element"], alphabet),
            norm_kind=data["norm_kind"],
            status=data["status"],
            bound=None if data.get("bound") is None else parse_rational(data["bound"]),
            parameter=None if data.get("parameter") is None else parse_word(data["parameter"], alphabet),
            parts=tuple(tuple(parse_word(w, alphabet) for w in part) for part in data.get("parts", [])),
            exponent=data.get("exponent", 1),
            per_factor=parse_rational(data.get("per_factor", "1")),
            stage=None if stage in (None, "free") else stage,
        )


def _equal_in(u: Word, v: Word, Q: QuotientHandle | None) -> bool:
    if u == v:
        return True
    if Q is None or not Q.presentation.relators:
        return False
    return is_trivial(u * v.inverse(), Q).status == TRIVIAL


def _search_products(target: Word, candidates: dict[Word, tuple[Word, ...]], max_factors: int,
                     Q: QuotientHandle | None) -> list[tuple[Word, ...]] | None:
    """
    Shortest product of candidate words equal to target, up to max_factors.

    For each factor count the free search runs first (last factor by
    lookup), then the in-quotient search tests every product with Dehn.
    """
    if _equal_in(target, Word(), Q):
        return []
    ordered = sorted(candidates, key=lambda c: (len(c), c.letters))
    in_quotient = Q is not None and bool(Q.presentation.relators)

    def free_search(residual: Word, remaining: int, chosen: list[Word]) -> list[Word] | None:
        if remaining == 1:
            return chosen + [residual] if residual in candidates else None
        for factor in ordered:
            found = free_search(factor.inverse() * residual, remaining - 1, chosen + [factor])
            if found is not None:
                return found
        return None

    for count in range(1, max_factors + 1):
        found = free_search(target, count, [])
        if found is None and in_quotient:
            for combination in product(ordered, repeat=count):
                value = Word()
                for factor in combination:
                    value = value * factor
                if _equal_in(value, target, Q):
                    found = list(combination)
                    break
        if found is not None:
            logging.debug(f"Norm search: {count} factors over {len(candidates)} candidates")
            return [candidates[factor] for factor in found]
    return None


def _quotient_rank(Q: QuotientHandle | None, *words: Word) -> int:
    if Q is not None:
        return Q.presentation.rank
    return max([w.max_generator() + 1 for w in words] + [1])


def _abelian_data(Q: QuotientHandle | None, rank: int) -> AbelianizationData:
    if Q is None:
        return AbelianizationData.of_rows([], rank)
    return abelianization(Q.presentation)


def ell_alpha_bound(gamma: Word, alpha: Word, Q: QuotientHandle | None,
                    budget: tuple[int, int] = DEFAULT_NORM_BUDGET, stage: int | None = None) -> NormCertificate:
    """
    Bound the word length of γ over the conjugates of α^±1.

    Args:
        gamma: Element to measure
        alpha: Generating element
        Q: Quotient (None for the free group)
        budget: (max factors, max conjugator length)
        stage: Tower stage the quotient belongs to, recorded on the certificate

    Returns:
        NormCertificate: bounded with the shortest expression found,
        infinite when the abelianization of γ is not a multiple of α's
        modulo relators, unknown when the search is exhausted
    """
    max_factors, max_conjugator = budget
    rank = _quotient_rank(Q, gamma, alpha)
    data = _abelian_data(Q, rank)
    if not data.contains_modulo(data.image(gamma), [data.image(alpha)]):
        logging.info("ell_alpha: abelianization obstruction, norm is infinite")
        return NormCertificate(gamma, ELL_ALPHA, INFINITE, parameter=alpha, stage=stage)

    candidates: dict[Word, tuple[Word, ...]] = {}
    for g in ball(rank, max_conjugator):
        for base in (alpha, alpha.inverse()):
            candidates.setdefault(base.conjugate(g), (g, base))
    found = _search_products(gamma, candidates, max_factors, Q)
    if found is None:
        logging.info(f"ell_alpha: no expression within budget {budget}")
        return NormCertificate(gamma, ELL_ALPHA, UNKNOWN, parameter=alpha, stage=stage)
    logging.info(f"ell_alpha: bound {len(found)}")
    return NormCertificate(gamma, ELL_ALPHA, BOUNDED, bound=Fraction(len(found)), parameter=alpha,
                           parts=tuple(found), stage=stage)


def cl_bound(gamma: Word, Q: QuotientHandle | None, budget: tuple[int, int] = DEFAULT_NORM_BUDGET,
             stage: int | None = None) -> NormCertificate:
    """Commutator length bound by search over products of [u, v] with |u|, |v| bounded."""
    max_factors, max_length = budget
    rank = _quotient_rank(Q, gamma)
    data = _abelian_data(Q, rank)
    if not data.contains(data.image(gamma)):
        logging.info("cl: element is nontrivial in the abelianization, commutator length is infinite")
        return NormCertificate(gamma, CL, INFINITE, stage=stage)

    words = list(ball(rank, max_length))
    candidates: dict[Word, tuple[Word, ...]] = {}
    for u in words:
        for v in words:
            value = commutator(u, v)
            if value.letters:
                candidates.setdefault(value, (u, v))
    found = _search_products(gamma, candidates, max_factors, Q)
    if found is None:
        logging.info(f"cl: no expression within budget {budget}")
        return NormCertificate(gamma, CL, UNKNOWN, stage=stage)
    logging.info(f"cl: bound {len(found)}")
    return NormCertificate(gamma, CL, BOUNDED, bound=Fraction(len(found)), parts=tuple(found), stage=stage)


def _bezout(values: Sequence[int]) -> tuple[int, ...]:
    """Integer coefficients a with sum(a_j * values_j) = gcd(values)."""
    coefficients = [0] * len(values)
    current = 0
    for index, value in enumerate(values):
        if value == 0:
            continue
        if current == 0:
            current = abs(value)
            coefficients[index] = 1 if value > 0 else -1
            continue
        # extended Euclid on (current, value)
        old_r, r = current, value
        old_s, s = 1, 0
        old_t, t = 0, 1
        while r:
            quotient = old_r // r
            old_r, r = r, old_r - quotient * r
            old_s, s = s, old_s - quotient * s
            old_t, t = t, old_t - quotient * t
        if old_r < 0:
            old_r, old_s, old_t = -old_r, -old_s, -old_t
        coefficients = [c * old_s for c in coefficients]
        coefficients[index] = old_t
        current = old_r
    return tuple(coefficients)


def w_length_bound(g: Word, w: Word, Q: QuotientHandle | None,
                   budget: tuple[int, int] = DEFAULT_NORM_BUDGET, stage: int | None = None) -> NormCertificate:
    """
    Bound the w-length of g: the fewest w-values whose product is g.

    A silly w (exponent sums with gcd 1) gives the one-factor expression
    w(g^a_1, ..., g^a_n) = g from Bezout coefficients. Otherwise substitutions
    of words of length at most C are searched, up to F factors. When every
    w-value abelianizes into d·Z^rank (d the gcd of w's exponent sums) and g
    does not, the w-length is infinite.
    """
    max_factors, max_length = budget
    n = w.max_generator() + 1
    rank = _quotient_rank(Q, g)
    if w.letters and n > 0:
        sums = exponent_sums(w, n)
        d = gcd_of(sums)
        if d == 1:
            images = tuple(g ** a for a in _bezout(sums))
            logging.info("w_length: silly word, bound 1")
            return NormCertificate(g, W_LENGTH, BOUNDED, bound=Fraction(1), parameter=w,
                                   parts=(images,), stage=stage)
        data = _abelian_data(Q, rank)
        scaled = [[d if i == j else 0 for j in range(rank)] for i in range(rank)] if d else []
        if not data.contains_modulo(data.image(g), scaled):
            logging.info(f"w_length: abelianization obstruction (exponent gcd {d}), w-length is infinite")
            return NormCertificate(g, W_LENGTH, INFINITE, parameter=w, stage=stage)

    candidates: dict[Word, tuple[Word, ...]] = {}
    if n > 0:
        words = list(ball(rank, max_length))
        for images in product(words, repeat=n):
            value = substitute(w, images)
            if value.letters:
                candidates.setdefault(value, tuple(images))
    found = _search_products(g, candidates, max_factors, Q)
    if found is None:
        logging.info(f"w_length: no expression within budget {budget}")
        return NormCertificate(g, W_LENGTH, UNKNOWN, parameter=w, stage=stage)
    logging.info(f"w_length: bound {len(found)}")
    return NormCertificate(g, W_LENGTH, BOUNDED, bound=Fraction(len(found)), parameter=w,
                           parts=tuple(found), stage=stage)


def stable_bound_from_cert(cert: "RelatorCertificate") -> NormCertificate:
    """
    Stable norm bound p·k·L/q for γ = γ₀^k from a pushed stabilization relator.

    The expression is k copies of ∏ κᵢ γ₁ κᵢ⁻¹, equal to γ^q in the stage
    that killed γ₀^(-q) ∏ κᵢ γ₁ κᵢ⁻¹.

    Raises:
        UncertifiedCertificateError: If the certificate is not an scl
            certificate pushed and certified at some stage, or its
            consequence identity does not hold
    """
    from services.relator_forge import SCL  # relator_forge imports this module
    if cert.kind != SCL:
        raise UncertifiedCertificateError(f"Expected a stabilization certificate, got '{cert.kind}'")
    if cert.stage is None or not cert.certified:
        raise UncertifiedCertificateError("Stabilization certificate has not been certified at a tower stage")
    if not cert.identity_holds():
        raise UncertifiedCertificateError("Stabilization certificate's consequence identity does not hold")

    spec = cert.spec
    parts = tuple((kappa, spec.gamma1) for kappa in spec.kappas) * spec.power
    per_factor = Fraction(spec.length_bound)
    bound = per_factor * len(parts)
    result = NormCertificate(
        element=spec.gamma,
        norm_kind=STABLE_ELL_ALPHA,
        status=BOUNDED,
        bound=bound,
        parameter=spec.alpha,
        parts=parts,
        exponent=spec.q,
        per_factor=per_factor,
        stage=cert.stage,
    )
    logging.info(f"Stable bound from stage {cert.stage}: {result.stable_bound}")
    return result


def best_stable_bound(certs: Sequence[NormCertificate]) -> NormCertificate:
    """The certificate with the smallest stable bound among several for one element."""
    bounded = [c for c in certs if c.status == BOUNDED]
    if not bounded:
        raise DomainError("No bounded certificate to choose from")
    element = bounded[0].element
    if any(c.element != element for c in bounded):
        raise InvalidInputError("Certificates bound different elements")
    return min(bounded, key=lambda c: (c.stable_bound, c.stage if c.stage is not None else -1))


def stable_sequence(cert: NormCertificate, m_max: int) -> list[Fraction]:
    """Bounds on ℓ(γ^(qm)) / (qm) for m = 1..m_max from concatenated expressions."""
    if m_max < 1:
        raise DomainError(f"m_max must be positive, got {m_max}")
    return [cert.power(m).bound / (cert.exponent * m) for m in range(1, m_max + 1)]


def replay_norm_certificate(cert: NormCertificate, Q: QuotientHandle | None) -> bool:
    """
    Re-check a certificate against a quotient.

    Bounded certificates replay their expression (each factor rebuilt from
    its parts) against element^exponent; infinite ones recheck the
    abelianization obstruction. Unknown certificates never replay.
    """
    if cert.status == UNKNOWN:
        return False
    measured = [cert.element, cert.parameter] if cert.norm_kind == ELL_ALPHA else [cert.element]
    rank = _quotient_rank(Q, *measured)
    if cert.status == INFINITE:
        data = _abelian_data(Q, rank)
        vector = data.image(cert.element)
        if cert.norm_kind == CL:
            return not data.contains(vector)
        if cert.norm_kind == ELL_ALPHA:
            return not data.contains_modulo(vector, [data.image(cert.parameter)])
        if cert.norm_kind == W_LENGTH:
            d = gcd_of(exponent_sums(cert.parameter, cert.parameter.max_generator() + 1))
            scaled = [[d if i == j else 0 for j in range(rank)] for i in range(rank)] if d else []
            return not data.contains_modulo(vector, scaled)
        return False

    if cert.norm_kind == ELL_ALPHA:
        allowed = {cert.parameter, cert.parameter.inverse()}
        if any(base not in allowed for _, base in cert.parts):
            return False
    if cert.bound != cert.per_factor * len(cert.parts):
        return False
    return _equal_in(cert.expression(), cert.element ** cert.exponent, Q)
