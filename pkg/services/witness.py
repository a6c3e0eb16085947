"""
First-order group sentences, their normal forms and abstract witnesses.

Sentences are prenex: quantifier blocks followed by a conjunction of
parenthesised disjunctions of equations and inequations, e.g.

    E y A x ( [x,y] = 1 | x = 1 )

An existential-universal sentence in conjunctive form gives one abstract
witness per conjunct: the group presented by the conjunct's inequations,
the equation words as the distinguished set V, and the existential
variables as the subgroup H. Finite-group model checking evaluates
sentences and witnesses by exhaustive enumeration.
"""

import logging
import re
from dataclasses import dataclass
from itertools import product
from typing import NamedTuple, Sequence

from services.finite_groups import FiniteGroup
from services.small_cancellation import Presentation
from services.words import Alphabet, Word, commutator, exponent_sums, gcd_of
from utils.exceptions import (
    BudgetExceededError,
    DomainError,
    InvalidInputError,
    ParseError,
    UnsupportedPrefixError,
)


EXISTS = "E"
FORALL = "A"
QUANTIFIERS = (EXISTS, FORALL)

DEFAULT_CNF_CAP = 256
DEFAULT_FINITE_BUDGET = 10_000_000

TOKEN_PATTERN = re.compile(
    r'(?P<ne>!=)|(?P<sym>[()\[\],|&=*^])|(?P<int>-?\d+)'
    r'|(?P<const>\$[A-Za-z_][A-Za-z0-9_]*)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)'
)


# Terms

@dataclass(frozen=True)
class Symbol:
    name: str


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Commutator:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Power:
    base: "Term"
    exponent: int


@dataclass(frozen=True)
class Product:
    factors: tuple["Term", ...]


Term = Symbol | Identity | Commutator | Power | Product


# Formulas

@dataclass(frozen=True)
class Atom:
    lhs: Term
    rhs: Term
    equal: bool = True


@dataclass(frozen=True)
class Conjunction:
    parts: tuple["Formula", ...]


@dataclass(frozen=True)
class Disjunction:
    parts: tuple["Formula", ...]


Formula = Atom | Conjunction | Disjunction


@dataclass(frozen=True)
class Block:
    quantifier: str
    variables: tuple[str, ...]


@dataclass(frozen=True)
class Sentence:
    prefix: tuple[Block, ...]
    matrix: Formula

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(name for block in self.prefix for name in block.variables)

    @property
    def constants(self) -> tuple[str, ...]:
        names = []
        for atom in atoms_of(self.matrix):
            for term in (atom.lhs, atom.rhs):
                names.extend(name for name in symbols_of(term) if name.startswith('$'))
        return tuple(dict.fromkeys(names))

    def merged_prefix(self) -> tuple[Block, ...]:
        """Adjacent blocks with the same quantifier joined."""
        merged: list[Block] = []
        for block in self.prefix:
            if merged and merged[-1].quantifier == block.quantifier:
                merged[-1] = Block(block.quantifier, merged[-1].variables + block.variables)
            else:
                merged.append(block)
        return tuple(merged)

    def pattern(self) -> str:
        return "".join(block.quantifier for block in self.merged_prefix())


class Disjunct(NamedTuple):
    equations: tuple[Atom, ...]
    inequations: tuple[Atom, ...]


class Classification(NamedTuple):
    positive: bool
    one_quantifier: bool
    exists_forall: bool


def symbols_of(term: Term) -> list[str]:
    if isinstance(term, Symbol):
        return [term.name]
    if isinstance(term, Commutator):
        return symbols_of(term.left) + symbols_of(term.right)
    if isinstance(term, Power):
        return symbols_of(term.base)
    if isinstance(term, Product):
        return [name for factor in term.factors for name in symbols_of(factor)]
    return []


def atoms_of(formula: Formula) -> list[Atom]:
    if isinstance(formula, Atom):
        return [formula]
    return [atom for part in formula.parts for atom in atoms_of(part)]


# Parsing

class _Token(NamedTuple):
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    position = 0
    while position < len(text):
        if text[position].isspace():
            position += 1
            continue
        match = TOKEN_PATTERN.match(text, position)
        if match is None:
            raise ParseError(f"Unexpected character '{text[position]}'", position)
        tokens.append(_Token(match.lastgroup, match.group(), position))
        position = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _SentenceParser:
    """Recursive-descent parser over the token list; `bound` holds the names in scope."""

    def __init__(self, text: str, bound: set[str] | None = None):
        self.tokens = _tokenize(text)
        self.index = 0
        self.bound = set() if bound is None else set(bound)

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.advance()
        if token.text != text:
            found = token.text or "end of input"
            raise ParseError(f"Expected '{text}', found '{found}'", token.position)
        return token

    def sentence(self) -> Sentence:
        blocks = []
        while self.peek().kind == "ident" and self.peek().text in QUANTIFIERS:
            blocks.append(self.block())
        if not blocks:
            raise ParseError("Sentence must start with a quantifier block (E or A)", self.peek().position)
        matrix = self.matrix()
        end = self.peek()
        if end.kind != "end":
            raise ParseError(f"Unexpected '{end.text}' after the matrix", end.position)
        return Sentence(tuple(blocks), matrix)

    def block(self) -> Block:
        quantifier = self.advance()
        names = []
        while self.peek().kind == "ident" and self.peek().text not in QUANTIFIERS:
            token = self.advance()
            if token.text in self.bound:
                raise ParseError(f"Variable '{token.text}' is bound twice", token.position)
            self.bound.add(token.text)
            names.append(token.text)
        if not names:
            raise ParseError(f"Quantifier '{quantifier.text}' binds no variables", quantifier.position)
        return Block(quantifier.text, tuple(names))

    def matrix(self) -> Conjunction:
        clauses = [self.clause()]
        while self.peek().text == "&":
            self.advance()
            clauses.append(self.clause())
        return Conjunction(tuple(clauses))

    def clause(self) -> Disjunction:
        self.expect("(")
        atoms = [self.atom()]
        while self.peek().text == "|":
            self.advance()
            atoms.append(self.atom())
        self.expect(")")
        return Disjunction(tuple(atoms))

    def atom(self) -> Atom:
        lhs = self.word()
        relation = self.advance()
        if relation.text not in ("=", "!="):
            raise ParseError(f"Expected '=' or '!=', found '{relation.text or 'end of input'}'",
                             relation.position)
        rhs = self.word()
        return Atom(lhs, rhs, relation.text == "=")

    def starts_factor(self) -> bool:
        token = self.peek()
        if token.kind in ("ident", "const"):
            return True
        return token.text == "[" or (token.kind == "int" and token.text == "1")

    def word(self) -> Term:
        if not self.starts_factor():
            token = self.peek()
            raise ParseError(f"Expected a word, found '{token.text or 'end of input'}'", token.position)
        factors = [self.factor()]
        while True:
            if self.peek().text == "*":
                self.advance()
                if not self.starts_factor():
                    raise ParseError("Expected a factor after '*'", self.peek().position)
            elif not self.starts_factor():
                break
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def factor(self) -> Term:
        base = self.primary()
        if self.peek().text == "^":
            self.advance()
            token = self.advance()
            if token.kind != "int":
                raise ParseError("Expected an integer exponent after '^'", token.position)
            return Power(base, int(token.text))
        return base

    def primary(self) -> Term:
        token = self.advance()
        if token.kind == "ident":
            if token.text in QUANTIFIERS:
                raise ParseError("Quantifiers inside the matrix are not supported; write the sentence in prenex form",
                                 token.position)
            if token.text not in self.bound:
                raise ParseError(f"Unbound variable '{token.text}'", token.position)
            return Symbol(token.text)
        if token.kind == "const":
            return Symbol(token.text)
        if token.text == "[":
            left = self.word()
            self.expect(",")
            right = self.word()
            self.expect("]")
            return Commutator(left, right)
        if token.kind == "int":
            if token.text != "1":
                raise ParseError(f"Only '1' may appear as a literal, found '{token.text}'", token.position)
            return Identity()
        raise ParseError(f"Unexpected '{token.text or 'end of input'}'", token.position)


def parse_sentence(text: str) -> Sentence:
    """
    Parse a prenex sentence.

    Raises:
        ParseError: On malformed tokens, unbound or doubly bound variables,
            or quantifiers inside the matrix; the error carries the position
    """
    return _SentenceParser(text).sentence()


def parse_group_word(text: str, alphabet: Alphabet) -> Word:
    """Parse a product like "x*y^-2*[x,y]" over named generators."""
    parser = _SentenceParser(text, bound=set(alphabet.names))
    term = parser.word()
    end = parser.peek()
    if end.kind != "end":
        raise ParseError(f"Unexpected '{end.text}' after the word", end.position)
    index = {name: i for i, name in enumerate(alphabet.names)}
    for name in symbols_of(term):
        if name not in index:
            raise ParseError(f"Unknown generator '{name}'", 0)
    return term_word(term, index)


# Printing

def format_term(term: Term) -> str:
    if isinstance(term, Symbol):
        return term.name
    if isinstance(term, Identity):
        return "1"
    if isinstance(term, Commutator):
        return f"[{format_term(term.left)},{format_term(term.right)}]"
    if isinstance(term, Power):
        return f"{format_term(term.base)}^{term.exponent}"
    return "*".join(format_term(factor) for factor in term.factors)


def format_atom(atom: Atom) -> str:
    relation = "=" if atom.equal else "!="
    return f"{format_term(atom.lhs)} {relation} {format_term(atom.rhs)}"


def format_sentence(s: Sentence) -> str:
    prefix = " ".join(f"{block.quantifier} {' '.join(block.variables)}" for block in s.prefix)
    clauses = _as_clauses(s.matrix)
    matrix = " & ".join("( " + " | ".join(format_atom(atom) for atom in clause) + " )" for clause in clauses)
    return f"{prefix} {matrix}"


def format_group_word(w: Word, alphabet: Alphabet) -> str:
    """Print a word as a product of named generator powers ("1" for the identity)."""
    if not w.letters:
        return "1"
    parts = []
    run_letter, run_length = w.letters[0], 0
    for letter in w.letters + (0,):
        if letter == run_letter:
            run_length += 1
            continue
        name = alphabet.names[abs(run_letter) - 1]
        exponent = run_length if run_letter > 0 else -run_length
        parts.append(name if exponent == 1 else f"{name}^{exponent}")
        run_letter, run_length = letter, 1
    return "*".join(parts)


def _as_clauses(formula: Formula) -> tuple[tuple[Atom, ...], ...]:
    if isinstance(formula, Conjunction) and all(
            isinstance(part, Disjunction) and all(isinstance(a, Atom) for a in part.parts)
            for part in formula.parts):
        return tuple(tuple(part.parts) for part in formula.parts)
    return to_cnf(formula)


# Words

def term_word(term: Term, index: dict[str, int]) -> Word:
    """Evaluate a term in the free group on the names of `index`."""
    if isinstance(term, Symbol):
        return Word.generator(index[term.name])
    if isinstance(term, Identity):
        return Word()
    if isinstance(term, Commutator):
        return commutator(term_word(term.left, index), term_word(term.right, index))
    if isinstance(term, Power):
        return term_word(term.base, index) ** term.exponent
    result = Word()
    for factor in term.factors:
        result = result * term_word(factor, index)
    return result


def atom_word(atom: Atom, index: dict[str, int]) -> Word:
    """lhs · rhs⁻¹, trivial exactly when the equation holds."""
    return term_word(atom.lhs, index) * term_word(atom.rhs, index).inverse()


# Normal forms

def negate_formula(formula: Formula) -> Formula:
    if isinstance(formula, Atom):
        return Atom(formula.lhs, formula.rhs, not formula.equal)
    if isinstance(formula, Conjunction):
        return Disjunction(tuple(negate_formula(part) for part in formula.parts))
    return Conjunction(tuple(negate_formula(part) for part in formula.parts))


def to_cnf(formula: Formula, cnf_cap: int = DEFAULT_CNF_CAP) -> tuple[tuple[Atom, ...], ...]:
    """
    Conjunctive normal form as a tuple of clauses (tuples of atoms).

    Raises:
        BudgetExceededError: If distribution produces more than cnf_cap clauses
    """
    if isinstance(formula, Atom):
        return ((formula,),)
    if isinstance(formula, Conjunction):
        clauses = [clause for part in formula.parts for clause in to_cnf(part, cnf_cap)]
    else:
        clauses = [()]
        for part in formula.parts:
            part_clauses = to_cnf(part, cnf_cap)
            if len(clauses) * len(part_clauses) > cnf_cap:
                raise BudgetExceededError(
                    f"Conjunctive normal form exceeds {cnf_cap} clauses; raise cnf_cap or simplify the matrix"
                )
            clauses = [left + right for left in clauses for right in part_clauses]
    unique = dict.fromkeys(tuple(dict.fromkeys(clause)) for clause in clauses)
    if len(unique) > cnf_cap:
        raise BudgetExceededError(f"Conjunctive normal form exceeds {cnf_cap} clauses")
    return tuple(unique)


def _cnf_formula(clauses: tuple[tuple[Atom, ...], ...]) -> Conjunction:
    return Conjunction(tuple(Disjunction(clause) for clause in clauses))


def normalized(s: Sentence, cnf_cap: int = DEFAULT_CNF_CAP) -> Sentence:
    """The same sentence with its matrix in conjunctive normal form."""
    return Sentence(s.prefix, _cnf_formula(to_cnf(s.matrix, cnf_cap)))


def negate(s: Sentence, cnf_cap: int = DEFAULT_CNF_CAP) -> Sentence:
    """Dual sentence: every quantifier flipped, matrix negated and put back in CNF."""
    flipped = {EXISTS: FORALL, FORALL: EXISTS}
    prefix = tuple(Block(flipped[block.quantifier], block.variables) for block in s.prefix)
    return Sentence(prefix, _cnf_formula(to_cnf(negate_formula(s.matrix), cnf_cap)))


def classify(s: Sentence) -> Classification:
    pattern = s.pattern()
    return Classification(
        positive=all(atom.equal for atom in atoms_of(s.matrix)),
        one_quantifier=len(pattern) == 1,
        exists_forall=pattern in (EXISTS, FORALL, EXISTS + FORALL),
    )


def _blocks_of(s: Sentence) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(existential, universal) variables of an existential-universal sentence."""
    pattern = s.pattern()
    if pattern not in (EXISTS, FORALL, EXISTS + FORALL):
        raise UnsupportedPrefixError(
            f"Expected an existential-universal prefix, got '{' '.join(pattern)}'"
        )
    existential: tuple[str, ...] = ()
    universal: tuple[str, ...] = ()
    for block in s.merged_prefix():
        if block.quantifier == EXISTS:
            existential = block.variables
        else:
            universal = block.variables
    return existential, universal


def to_ea_normal(s: Sentence, cnf_cap: int = DEFAULT_CNF_CAP) -> list[Disjunct]:
    """
    Split an existential-universal sentence into its conjuncts.

    Raises:
        UnsupportedPrefixError: If the merged prefix is not E, A or E A
    """
    _blocks_of(s)
    disjuncts = []
    for clause in to_cnf(s.matrix, cnf_cap):
        equations = tuple(atom for atom in clause if atom.equal)
        inequations = tuple(atom for atom in clause if not atom.equal)
        disjuncts.append(Disjunct(equations, inequations))
    return disjuncts


# Witnesses

@dataclass(frozen=True)
class AbstractWitness:
    """
    Group G on universal, existential and constant generators (in that
    order), presented by the conjunct's inequation words, with the equation
    words as V. H is free on the existential and constant generators and
    maps into G by inclusion.
    """

    group: Presentation
    universal: tuple[str, ...]
    existential: tuple[str, ...]
    constants: tuple[str, ...]
    values: tuple[Word, ...]

    @property
    def h_rank(self) -> int:
        return len(self.existential) + len(self.constants)

    @property
    def j_map(self) -> tuple[int, ...]:
        """Generator indices in G of H's generators."""
        start = len(self.universal)
        return tuple(range(start, start + self.h_rank))

    @property
    def values_empty(self) -> bool:
        return not self.values

    def to_dict(self) -> dict:
        alphabet = self.group.alphabet
        return {
            "generators": list(alphabet.names),
            "universal": list(self.universal),
            "existential": list(self.existential),
            "constants": list(self.constants),
            "relators": [format_group_word(r, alphabet) for r in self.group.relators],
            "values": [format_group_word(v, alphabet) for v in self.values],
            "values_empty": self.values_empty,
            "j_map": list(self.j_map),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AbstractWitness":
        alphabet = Alphabet(tuple(data["generators"]))
        relators = [parse_group_word(text, alphabet) for text in data["relators"]]
        return cls(
            group=Presentation.from_words(alphabet, relators),
            universal=tuple(data["universal"]),
            existential=tuple(data["existential"]),
            constants=tuple(data["constants"]),
            values=tuple(parse_group_word(text, alphabet) for text in data["values"]),
        )


@dataclass(frozen=True)
class RealizedWitness:
    """A witness with images of H's generators (existential, then constants) in a base group."""

    abstract: AbstractWitness
    iota: tuple[Word, ...]

    def __post_init__(self):
        if len(self.iota) != self.abstract.h_rank:
            raise InvalidInputError(
                f"Realization needs {self.abstract.h_rank} images, got {len(self.iota)}"
            )


def witness_of_disjunct(d: Disjunct, existential: Sequence[str], universal: Sequence[str],
                        constants: Sequence[str] = ()) -> AbstractWitness:
    names = tuple(universal) + tuple(existential) + tuple(constants)
    alphabet = Alphabet(names)
    index = {name: i for i, name in enumerate(names)}
    relators = [atom_word(atom, index) for atom in d.inequations]
    values = tuple(atom_word(atom, index) for atom in d.equations)
    return AbstractWitness(
        group=Presentation.from_words(alphabet, relators),
        universal=tuple(universal),
        existential=tuple(existential),
        constants=tuple(constants),
        values=values,
    )


def extract_witnesses(s: Sentence, cnf_cap: int = DEFAULT_CNF_CAP) -> list[AbstractWitness]:
    """One abstract witness per conjunct of an existential-universal sentence."""
    existential, universal = _blocks_of(s)
    constants = s.constants
    witnesses = [witness_of_disjunct(d, existential, universal, constants) for d in to_ea_normal(s, cnf_cap)]
    logging.info(f"Extracted {len(witnesses)} witnesses ({len(existential)} existential, "
                 f"{len(universal)} universal, {len(constants)} constants)")
    return witnesses


def is_silly(w: Word) -> bool:
    """Trivial, or exponent sums with gcd 1 (w is a commutator times a primitive monomial)."""
    if not w.letters:
        return True
    return gcd_of(exponent_sums(w, w.max_generator() + 1)) == 1


# Finite model checking

def _check_budget(size: int, budget: int, what: str) -> None:
    if size > budget:
        raise BudgetExceededError(f"{what} needs {size} assignments, above the budget of {budget}")


def _constant_values(names: Sequence[str], F: FiniteGroup, constants: dict[str, int] | None) -> list[int]:
    constants = constants or {}
    values = []
    for name in names:
        if name not in constants:
            raise InvalidInputError(f"No value given for constant '{name}'")
        value = constants[name]
        if not 0 <= value < F.order:
            raise InvalidInputError(f"Constant '{name}' = {value} is not an element of {F.name}")
        values.append(value)
    return values


def holds_in_finite(s: Sentence, F: FiniteGroup, constants: dict[str, int] | None = None,
                    budget: int = DEFAULT_FINITE_BUDGET) -> bool:
    """
    Exhaustive truth of a sentence in a finite group.

    Raises:
        BudgetExceededError: If |F|^(variable count) exceeds the budget
        InvalidInputError: If a constant has no value in F
    """
    variables = s.variables
    _check_budget(F.order ** len(variables), budget, "Sentence evaluation")
    names = variables + s.constants
    index = {name: i for i, name in enumerate(names)}
    assignment = [0] * len(variables) + _constant_values(s.constants, F, constants)
    quantifiers = [block.quantifier for block in s.prefix for _ in block.variables]
    compiled: dict[Atom, tuple[int, ...]] = {
        atom: atom_word(atom, index).letters for atom in atoms_of(s.matrix)
    }

    def satisfied(formula: Formula) -> bool:
        if isinstance(formula, Atom):
            return (F.evaluate(compiled[formula], assignment) == 0) == formula.equal
        if isinstance(formula, Conjunction):
            return all(satisfied(part) for part in formula.parts)
        return any(satisfied(part) for part in formula.parts)

    def check(level: int) -> bool:
        if level == len(variables):
            return satisfied(s.matrix)
        existential = quantifiers[level] == EXISTS
        for element in range(F.order):
            assignment[level] = element
            if check(level + 1) == existential:
                return existential
        return not existential

    result = check(0)
    logging.debug(f"Sentence over {len(variables)} variables in {F.name}: {result}")
    return result


def _poisons(W: AbstractWitness, iota_images: Sequence[int], F: FiniteGroup, budget: int):
    if len(iota_images) != W.h_rank:
        raise InvalidInputError(f"Expected {W.h_rank} images for H, got {len(iota_images)}")
    _check_budget(F.order ** len(W.universal), budget, "Morphism enumeration")
    relators = [r.letters for r in W.group.relators]
    values = [v.letters for v in W.values]
    fixed = list(iota_images)
    for x_values in product(range(F.order), repeat=len(W.universal)):
        assignment = list(x_values) + fixed
        if any(F.evaluate(r, assignment) != 0 for r in relators):
            continue
        if not any(F.evaluate(v, assignment) == 0 for v in values):
            yield tuple(x_values)


def find_poison_finite(W: AbstractWitness, iota_images: Sequence[int], F: FiniteGroup,
                       budget: int = DEFAULT_FINITE_BUDGET) -> tuple[int, ...] | None:
    """First universal assignment giving a morphism G -> F extending iota that kills no value."""
    return next(_poisons(W, iota_images, F, budget), None)


def realizes_positively_finite(W: AbstractWitness, iota_images: Sequence[int], F: FiniteGroup,
                               budget: int = DEFAULT_FINITE_BUDGET) -> bool:
    """Every morphism G -> F extending iota kills some word of V."""
    return find_poison_finite(W, iota_images, F, budget) is None


def witness_truth(s: Sentence, F: FiniteGroup, constants: dict[str, int] | None = None,
                  cnf_cap: int = DEFAULT_CNF_CAP, budget: int = DEFAULT_FINITE_BUDGET) -> bool:
    """
    Truth of a sentence computed through its witnesses.

    An existential-universal sentence holds iff some choice of the
    existential variables positively realizes every conjunct's witness.
    A universal-existential sentence is evaluated as the negation of its
    dual.

    Raises:
        UnsupportedPrefixError: For prefixes with more than one alternation
    """
    pattern = s.pattern()
    if pattern == FORALL + EXISTS:
        return not witness_truth(negate(s, cnf_cap), F, constants, cnf_cap, budget)
    existential, universal = _blocks_of(s)
    _check_budget(F.order ** (len(existential) + len(universal)), budget, "Witness evaluation")
    witnesses = extract_witnesses(s, cnf_cap)
    fixed = _constant_values(s.constants, F, constants)
    for y_values in product(range(F.order), repeat=len(existential)):
        iota = list(y_values) + fixed
        if all(realizes_positively_finite(W, iota, F, budget) for W in witnesses):
            return True
    return False


# Builders

def power_root_sentence(p: int) -> Sentence:
    """Every element has a p-th root: A x E y ( y^p = x )."""
    if p < 1:
        raise DomainError(f"Root exponent must be positive, got {p}")
    root = Symbol("y") if p == 1 else Power(Symbol("y"), p)
    matrix = Conjunction((Disjunction((Atom(root, Symbol("x")),)),))
    return Sentence((Block(FORALL, ("x",)), Block(EXISTS, ("y",))), matrix)


def _substituted_term(w: Word, names: Sequence[str]) -> list[Term]:
    factors: list[Term] = []
    letters = w.letters
    position = 0
    while position < len(letters):
        letter = letters[position]
        run = 1
        while position + run < len(letters) and letters[position + run] == letter:
            run += 1
        symbol = Symbol(names[abs(letter) - 1])
        exponent = run if letter > 0 else -run
        factors.append(symbol if exponent == 1 else Power(symbol, exponent))
        position += run
    return factors


def w_length_sentence(w: Word, k: int) -> Sentence:
    """Every element is a product of k values of w: A x E y1_1 .. yk_n ( x = w(y1) .. w(yk) )."""
    n = w.max_generator() + 1
    if n < 1:
        raise DomainError("w-length sentences need a nontrivial word")
    if k < 1:
        raise DomainError(f"Factor count must be positive, got {k}")
    blocks = [[f"y{i}_{j}" for j in range(1, n + 1)] for i in range(1, k + 1)]
    factors = [factor for names in blocks for factor in _substituted_term(w, names)]
    rhs: Term = factors[0] if len(factors) == 1 else Product(tuple(factors))
    matrix = Conjunction((Disjunction((Atom(Symbol("x"), rhs),)),))
    existential = tuple(name for names in blocks for name in names)
    return Sentence((Block(FORALL, ("x",)), Block(EXISTS, existential)), matrix)
