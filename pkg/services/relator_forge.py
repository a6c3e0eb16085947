"""
Explicit relator families with certified consequences.

This module provides:
- absorption_relator: w = γ · x y^p x y^(p+1) ⋯ x y^(p+q), forcing γ into ⟨x, y⟩
- scl_relator: w = γ^(-q) ∏ κᵢ γ₁ κᵢ⁻¹, bounding the stable ℓ_α norm of γ
- kappa_family: κᵢ = x y^(m+i) x
- tune / tune_absorption / tune_scl: doubling search until the joint
  small-cancellation report meets its targets
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

from services.norms import BOUNDED, ELL_ALPHA, NormCertificate, replay_norm_certificate
from services.small_cancellation import Presentation, SCReport, joint_report
from services.words import (
    Alphabet,
    Word,
    are_conjugate,
    commutator,
    cyclic_reduce,
    format_word,
    is_proper_power,
    parse_word,
    primitive_root,
)
from utils.exceptions import (
    DegenerateSpecError,
    InvalidInputError,
    InvalidSpecError,
    TuningFailedError,
)
from utils.validators import format_rational, parse_rational


ABSORB = "absorb"
SCL = "scl"

DEFAULT_TUNE_CAP = 10


@dataclass(frozen=True)
class AbsorptionSpec:
    gamma: Word
    x: Word
    y: Word
    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise InvalidSpecError(f"Exponents p and q must be positive, got p={self.p}, q={self.q}")
        if not self.gamma.letters:
            raise InvalidSpecError("The absorbed element must be nontrivial")
        if primitive_root(self.gamma).exponent != 1:
            raise InvalidSpecError("The absorbed element must be primitive")
        _check_free_pair(self.x, self.y)

    def tail(self) -> Word:
        """x y^p x y^(p+1) ⋯ x y^(p+q)."""
        result = Word()
        for i in range(self.q + 1):
            result = result * self.x * self.y ** (self.p + i)
        return result

    def expected_length(self) -> int:
        y_letters = sum(self.p + i for i in range(self.q + 1))
        return len(self.gamma) + (self.q + 1) * len(self.x) + len(self.y) * y_letters

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "kind": ABSORB,
            "gamma": format_word(self.gamma, alphabet),
            "x": format_word(self.x, alphabet),
            "y": format_word(self.y, alphabet),
            "p": self.p,
            "q": self.q,
        }


@dataclass(frozen=True)
class SclSpec:
    """
    Parameters of a norm-stabilization relator.

    `gamma1_bound` is an ℓ_α certificate for γ₁ whose bound is the L in
    p·L·k/q; p is the number of kappas. The constraint p·L·k/q < σ is
    checked after power reduction (γ = γ₀^k with γ₀ primitive).
    """

    gamma: Word
    gamma1: Word
    alpha: Word
    gamma1_bound: NormCertificate
    kappas: tuple[Word, ...]
    q: int
    sigma: Fraction

    def __post_init__(self):
        if self.q < 1:
            raise InvalidSpecError(f"q must be positive, got {self.q}")
        if self.sigma <= 0:
            raise InvalidSpecError(f"sigma must be positive, got {self.sigma}")
        if not self.gamma.letters or not self.gamma1.letters:
            raise InvalidSpecError("gamma and gamma1 must be nontrivial")
        if not self.kappas:
            raise InvalidSpecError("At least one kappa is required")
        if len(set(self.kappas)) != len(self.kappas):
            raise InvalidSpecError("kappas must be pairwise distinct")
        bound = self.gamma1_bound
        if (bound.norm_kind != ELL_ALPHA or bound.element != self.gamma1
                or bound.parameter != self.alpha or bound.exponent != 1):
            raise InvalidSpecError("The length certificate must bound l_alpha(gamma1) for this gamma1 and alpha")
        if bound.status != BOUNDED:
            raise InvalidSpecError(f"l_alpha(gamma1) has no certified bound (status '{bound.status}')")

    @property
    def length_bound(self) -> Fraction:
        return self.gamma1_bound.bound

    @property
    def p(self) -> int:
        return len(self.kappas)

    @property
    def power(self) -> int:
        return primitive_root(self.gamma).exponent

    def ratio(self) -> Fraction:
        """Stable bound p·L·k/q for γ."""
        return Fraction(self.p) * self.length_bound * self.power / self.q

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "kind": SCL,
            "gamma": format_word(self.gamma, alphabet),
            "gamma1": format_word(self.gamma1, alphabet),
            "alpha": format_word(self.alpha, alphabet),
            "gamma1_bound": self.gamma1_bound.to_dict(alphabet),
            "kappas": [format_word(k, alphabet) for k in self.kappas],
            "q": self.q,
            "sigma": format_rational(self.sigma),
        }


def spec_from_dict(data: dict, alphabet: Alphabet) -> AbsorptionSpec | SclSpec:
    if data["kind"] == ABSORB:
        return AbsorptionSpec(
            gamma=parse_word(data["gamma"], alphabet),
            x=parse_word(data["x"], alphabet),
            y=parse_word(data["y"], alphabet),
            p=data["p"],
            q=data["q"],
        )
    if data["kind"] == SCL:
        return SclSpec(
            gamma=parse_word(data["gamma"], alphabet),
            gamma1=parse_word(data["gamma1"], alphabet),
            alpha=parse_word(data["alpha"], alphabet),
            gamma1_bound=NormCertificate.from_dict(data["gamma1_bound"], alphabet),
            kappas=tuple(parse_word(k, alphabet) for k in data["kappas"]),
            q=data["q"],
            sigma=parse_rational(data["sigma"]),
        )
    raise InvalidInputError(f"Unknown relator spec kind '{data['kind']}'")


@dataclass(frozen=True)
class Consequence:
    """
    lhs = rhs holds in every quotient killing the relator.

    For absorption, lhs is γ and rhs the inverse tail. For scl, lhs is γ₀^q
    and rhs the product of conjugates of γ₁; `bound` is ℓ_ᾱ(γ̄₀^q) ≤ p·L and
    `stable_bound` is the resulting bound on the stable norm of γ.
    """

    kind: str
    lhs: Word
    rhs: Word
    bound: Fraction | None = None
    stable_bound: Fraction | None = None

    def identity_word(self) -> Word:
        return self.lhs * self.rhs.inverse()

    def describe(self, alphabet: Alphabet) -> str:
        lhs = format_word(self.lhs, alphabet)
        rhs = format_word(self.rhs, alphabet)
        if self.kind == ABSORB:
            return f"{lhs} = {rhs} lies in the image of <x, y>"
        return (f"{lhs} = {rhs}, so l_alpha <= {format_rational(self.bound)} and "
                f"stable l_alpha <= {format_rational(self.stable_bound)}")

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "kind": self.kind,
            "lhs": format_word(self.lhs, alphabet),
            "rhs": format_word(self.rhs, alphabet),
            "bound": None if self.bound is None else format_rational(self.bound),
            "stable_bound": None if self.stable_bound is None else format_rational(self.stable_bound),
        }

    @classmethod
    def from_dict(cls, data: dict, alphabet: Alphabet) -> "Consequence":
        return cls(
            kind=data["kind"],
            lhs=parse_word(data["lhs"], alphabet),
            rhs=parse_word(data["rhs"], alphabet),
            bound=None if data.get("bound") is None else parse_rational(data["bound"]),
            stable_bound=None if data.get("stable_bound") is None else parse_rational(data["stable_bound"]),
        )


class TuningAttempt(NamedTuple):
    parameters: dict
    report: SCReport | None
    success: bool


@dataclass(frozen=True)
class RelatorCertificate:
    """A relator with its spec, joint report and syntactic consequence."""

    relator: Word
    spec: AbsorptionSpec | SclSpec
    report: SCReport
    consequence: Consequence
    stage: int | None = None
    certified: bool = False
    history: tuple[TuningAttempt, ...] = ()

    @property
    def kind(self) -> str:
        return self.consequence.kind

    def identity_holds(self) -> bool:
        return consequence_identity_holds(self)

    def to_dict(self, alphabet: Alphabet) -> dict:
        return {
            "relator": format_word(self.relator, alphabet),
            "spec": self.spec.to_dict(alphabet),
            "report": self.report.to_dict(alphabet),
            "consequence": self.consequence.to_dict(alphabet),
            "stage": self.stage,
            "certified": self.certified,
        }

    @classmethod
    def from_dict(cls, data: dict, alphabet: Alphabet) -> "RelatorCertificate":
        return cls(
            relator=parse_word(data["relator"], alphabet),
            spec=spec_from_dict(data["spec"], alphabet),
            report=SCReport.from_dict(data["report"], alphabet),
            consequence=Consequence.from_dict(data["consequence"], alphabet),
            stage=data.get("stage"),
            certified=data.get("certified", False),
        )


def consequence_identity_holds(cert: RelatorCertificate) -> bool:
    """lhs · rhs⁻¹ is conjugate to the relator or its inverse (free-group identity)."""
    word = cert.consequence.identity_word()
    return are_conjugate(word, cert.relator) or are_conjugate(word, cert.relator.inverse())


def _check_free_pair(x: Word, y: Word) -> None:
    if not x.letters or not y.letters:
        raise InvalidSpecError("x and y must be nontrivial")
    if x == y or not commutator(x, y).letters:
        raise InvalidSpecError("x and y must generate a free subgroup of rank 2")


def _check_alphabet(words: Sequence[Word], ambient: Presentation) -> None:
    for word in words:
        if word.max_generator() >= ambient.rank:
            raise InvalidInputError("Relator spec uses letters outside the ambient alphabet")


def absorption_relator(spec: AbsorptionSpec, ambient: Presentation,
                       lambda0: Fraction = Fraction(1, 6), epsilon0: Fraction = Fraction(1, 20),
                       **options) -> RelatorCertificate:
    """
    Build the absorption relator γ x y^p x y^(p+1) ⋯ x y^(p+q).

    Args:
        spec: Absorption parameters
        ambient: Relators already present (joint report is computed against them)
        lambda0: Target piece ratio for the strengthened verdict
        epsilon0: Target inverse length for the strengthened verdict

    Returns:
        RelatorCertificate with consequence γ = (x y^p ⋯ x y^(p+q))⁻¹

    Raises:
        DegenerateSpecError: If γ cancels into the tail or the relator is a proper power
    """
    _check_alphabet([spec.gamma, spec.x, spec.y], ambient)
    tail = spec.tail()
    formula = spec.gamma * tail
    relator = cyclic_reduce(formula).word
    if len(relator) != spec.expected_length():
        raise DegenerateSpecError(
            f"Absorption relator collapses to length {len(relator)}, "
            f"expected {spec.expected_length()} (gamma cancels into the x/y tail)"
        )
    if is_proper_power(relator):
        raise DegenerateSpecError("Absorption relator is a proper power")

    report = joint_report([ambient, Presentation(ambient.alphabet, (relator,))],
                          lambda0, epsilon0, **options)
    consequence = Consequence(kind=ABSORB, lhs=spec.gamma, rhs=tail.inverse())
    logging.info(f"Absorption relator p={spec.p}, q={spec.q}: length {len(relator)}, "
                 f"joint delta={report.delta}, T={report.t}")
    return RelatorCertificate(relator=relator, spec=spec, report=report, consequence=consequence)


def scl_relator(spec: SclSpec, ambient: Presentation,
                lambda0: Fraction = Fraction(1, 6), epsilon0: Fraction = Fraction(1, 20),
                **options) -> RelatorCertificate:
    """
    Build the stabilization relator γ₀^(-q) ∏ κᵢ γ₁ κᵢ⁻¹ for γ = γ₀^k.

    A free-group certificate for ℓ_α(γ₁) is replayed here; one recorded at
    a tower stage is replayed when the scl_bound goal is evaluated.

    Raises:
        InvalidSpecError: If p·L·k/q ≥ σ or the free certificate for
            ℓ_α(γ₁) does not replay
        DegenerateSpecError: If the relator is trivial after reduction
    """
    _check_alphabet([spec.gamma, spec.gamma1, spec.alpha, *spec.kappas], ambient)
    ratio = spec.ratio()
    if ratio >= spec.sigma:
        raise InvalidSpecError(
            f"Ratio p*L*k/q = {ratio} must be below sigma = {spec.sigma}"
        )
    if spec.gamma1_bound.stage is None and not replay_norm_certificate(spec.gamma1_bound, None):
        raise InvalidSpecError("The l_alpha certificate for gamma1 does not replay in the free group")

    root = primitive_root(spec.gamma).root
    gamma0 = root.original()
    product_word = Word()
    for kappa in spec.kappas:
        product_word = product_word * spec.gamma1.conjugate(kappa)
    formula = gamma0 ** (-spec.q) * product_word
    relator = cyclic_reduce(formula).word
    if not relator.letters:
        raise DegenerateSpecError("Stabilization relator is trivial")

    report = joint_report([ambient, Presentation(ambient.alphabet, (relator,))],
                          lambda0, epsilon0, **options)
    consequence = Consequence(
        kind=SCL,
        lhs=gamma0 ** spec.q,
        rhs=product_word,
        bound=Fraction(spec.p) * spec.length_bound,
        stable_bound=ratio,
    )
    logging.info(f"Stabilization relator p={spec.p}, q={spec.q}, k={spec.power}: length {len(relator)}, "
                 f"stable bound {ratio} < {spec.sigma}")
    return RelatorCertificate(relator=relator, spec=spec, report=report, consequence=consequence)


def kappa_family(x: Word, y: Word, count: int, base_length: int) -> list[Word]:
    """κᵢ = x y^(m+i) x for i = 1..count."""
    if count < 1 or base_length < 1:
        raise InvalidSpecError("kappa count and base length must be positive")
    return [x * y ** (base_length + i) * x for i in range(1, count + 1)]


def exponent_floor(relators: Sequence[Word], y: Word) -> int:
    """One more than the longest power of y or y⁻¹ occurring in the cyclic relators."""
    if not y.letters:
        raise InvalidInputError("y must be nontrivial")
    longest = 0
    for relator in relators:
        cyclic = relator.letters + relator.letters
        for base in (y.letters, y.inverse().letters):
            k = longest + 1
            while len(base) * k <= len(relator) and _contains(cyclic, base * k):
                longest = k
                k += 1
    return longest + 1


def _contains(haystack: tuple[int, ...], needle: tuple[int, ...]) -> bool:
    n, m = len(haystack), len(needle)
    return any(haystack[i:i + m] == needle for i in range(n - m + 1))


def tune(candidates: Callable[[int], object], build: Callable[[object], RelatorCertificate],
         describe: Callable[[object], dict], cap: int = DEFAULT_TUNE_CAP,
         threads: int = 1) -> RelatorCertificate:
    """
    Doubling search over a parameter family.

    Step k (0-based, below `cap`) tries the spec `candidates(2**k)`; the
    first spec whose joint report meets the strengthened condition wins.
    Specs rejected as invalid or degenerate are recorded as failed attempts.
    Candidates may be evaluated in parallel batches of `threads`; the
    winner is still the first in parameter order.

    Raises:
        TuningFailedError: With the best report and the full history when
            the cap is reached
    """
    history: list[TuningAttempt] = []
    best: RelatorCertificate | None = None

    def attempt(spec):
        try:
            return build(spec)
        except (InvalidSpecError, DegenerateSpecError) as e:
            logging.info(f"Skipping {describe(spec)}: {e.message}")
            return None

    step = 0
    while step < cap:
        batch = list(range(step, min(cap, step + max(1, threads))))
        specs = [candidates(2 ** k) for k in batch]
        if len(specs) > 1:
            with ThreadPoolExecutor(max_workers=len(specs)) as executor:
                results = list(executor.map(attempt, specs))
        else:
            results = [attempt(specs[0])]
        for spec, cert in zip(specs, results):
            report = cert.report if cert else None
            success = bool(report and report.strengthened)
            history.append(TuningAttempt(describe(spec), report, success))
            if cert is not None and (best is None or cert.report.lam < best.report.lam):
                best = cert
            if success:
                logging.info(f"Tuning succeeded with {describe(spec)} after {len(history)} attempts")
                return replace(cert, history=tuple(history))
        step = batch[-1] + 1

    raise TuningFailedError(
        f"Tuning did not meet the targets within {cap} doublings",
        best_report=best.report if best else None,
        history=history,
    )


def tune_absorption(gamma: Word, x: Word, y: Word, ambient: Presentation,
                    lambda0: Fraction, epsilon0: Fraction, cap: int = DEFAULT_TUNE_CAP,
                    exponent_floor: int = 0, threads: int = 1, **options) -> RelatorCertificate:
    """
    Tune an absorption relator: step n uses p = floor + n, q = n.

    Args:
        exponent_floor: Lowest y exponent allowed, keeping y-runs disjoint
            from earlier stages
    """
    def candidates(n):
        return AbsorptionSpec(gamma=gamma, x=x, y=y, p=exponent_floor + n, q=n)

    def build(spec):
        return absorption_relator(spec, ambient, lambda0, epsilon0, **options)

    return tune(candidates, build, lambda s: {"p": s.p, "q": s.q}, cap=cap, threads=threads)


def tune_scl(gamma: Word, gamma1: Word, alpha: Word, gamma1_bound: NormCertificate, sigma: Fraction,
             x: Word, y: Word, ambient: Presentation, lambda0: Fraction, epsilon0: Fraction,
             count: int = 1, cap: int = DEFAULT_TUNE_CAP, exponent_floor: int = 0,
             threads: int = 1, **options) -> RelatorCertificate:
    """
    Tune a stabilization relator: step n uses q = n·q_min and κ base m = floor + n.

    q_min is the least q with p·L·k/q < σ, L being the bound of `gamma1_bound`.
    """
    if gamma1_bound.status != BOUNDED:
        raise InvalidSpecError(f"l_alpha(gamma1) has no certified bound (status '{gamma1_bound.status}')")
    power = primitive_root(gamma).exponent
    numerator = Fraction(count) * gamma1_bound.bound * power
    q_min = int(numerator / sigma) + 1

    def candidates(n):
        kappas = tuple(kappa_family(x, y, count, exponent_floor + n))
        return SclSpec(gamma=gamma, gamma1=gamma1, alpha=alpha, gamma1_bound=gamma1_bound,
                       kappas=kappas, q=q_min * n, sigma=Fraction(sigma))

    def build(spec):
        return scl_relator(spec, ambient, lambda0, epsilon0, **options)

    def describe(spec):
        return {"q": spec.q, "m": exponent_floor + spec.q // q_min}

    return tune(candidates, build, describe, cap=cap, threads=threads)
