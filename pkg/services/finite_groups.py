"""
Finite groups given by verified multiplication tables.

Identity is always element 0. Tables are checked for closure, identity,
associativity and inverses when a group is built.
"""

import logging
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Sequence

import numpy as np

from utils.exceptions import InvalidInputError


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """A finite group as an n x n multiplication table (row i = products i·j)."""

    name: str
    table: np.ndarray = field(repr=False)
    inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] == 0:
            raise InvalidInputError(f"Group '{self.name}': table must be a non-empty square matrix")
        n = table.shape[0]
        if table.min() < 0 or table.max() >= n:
            raise InvalidInputError(f"Group '{self.name}': table entries must lie in 0..{n - 1}")
        identity_row = np.arange(n)
        if not (np.array_equal(table[0], identity_row) and np.array_equal(table[:, 0], identity_row)):
            raise InvalidInputError(f"Group '{self.name}': element 0 is not the identity")
        # (ij)k == i(jk) for all triples
        if not np.array_equal(table[table], table[:, table]):
            raise InvalidInputError(f"Group '{self.name}': multiplication is not associative")
        has_inverse = (table == 0).any(axis=1)
        if not has_inverse.all():
            raise InvalidInputError(f"Group '{self.name}': some element has no inverse")
        inverse = np.argmax(table == 0, axis=1)
        if not np.array_equal(table[inverse, identity_row], np.zeros(n, dtype=np.int64)):
            raise InvalidInputError(f"Group '{self.name}': left and right inverses differ")
        object.__setattr__(self, 'table', table)
        object.__setattr__(self, 'inverse', inverse)

    @property
    def order(self) -> int:
        return int(self.table.shape[0])

    def multiply(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def invert(self, a: int) -> int:
        return int(self.inverse[a])

    def evaluate(self, letters: Sequence[int], assignment: Sequence[int]) -> int:
        """Value of a word (signed letters, generator i stored as i+1) under an assignment."""
        value = 0
        table, inverse = self.table, self.inverse
        for letter in letters:
            element = assignment[abs(letter) - 1]
            value = table[value, element if letter > 0 else inverse[element]]
        return int(value)

    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))


def cyclic_group(n: int) -> FiniteGroup:
    if n < 1:
        raise InvalidInputError(f"Cyclic group order must be positive, got {n}")
    elements = np.arange(n)
    return FiniteGroup(f"Z{n}", (elements[:, None] + elements[None, :]) % n)


def direct_product(left: FiniteGroup, right: FiniteGroup) -> FiniteGroup:
    """Element (g, h) is stored as g·|right| + h."""
    m = right.order
    n = left.order * m
    g, h = np.divmod(np.arange(n), m)
    table = left.table[g[:, None], g[None, :]] * m + right.table[h[:, None], h[None, :]]
    return FiniteGroup(f"{left.name}x{right.name}", table)


def symmetric_group(k: int) -> FiniteGroup:
    """Permutations of k points in lexicographic order (identity first); (στ)(i) = σ(τ(i))."""
    perms = list(permutations(range(k)))
    index = {perm: i for i, perm in enumerate(perms)}
    table = [[index[tuple(s[t[i]] for i in range(k))] for t in perms] for s in perms]
    return FiniteGroup(f"S{k}", table)


def small_groups(max_order: int = 6) -> list[FiniteGroup]:
    """Every group of order at most 6 up to isomorphism, smallest first."""
    groups = [
        cyclic_group(1),
        cyclic_group(2),
        cyclic_group(3),
        cyclic_group(4),
        direct_product(cyclic_group(2), cyclic_group(2)),
        cyclic_group(5),
        cyclic_group(6),
        symmetric_group(3),
    ]
    if max_order > 6:
        raise InvalidInputError("The built-in battery only covers orders up to 6")
    return [group for group in groups if group.order <= max_order]


def parse_finite_group(text: str, name: str = "G") -> FiniteGroup:
    """
    Parse the table format: first line the order n, then n rows of n indices.

    Raises:
        InvalidInputError: If the text is malformed or the table is not a group
    """
    lines = [line.split('#', 1)[0].strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise InvalidInputError("Finite group file is empty")
    try:
        n = int(lines[0])
        rows = [[int(value) for value in line.split()] for line in lines[1:]]
    except ValueError as e:
        raise InvalidInputError(f"Finite group file contains a non-integer entry: {e}")
    if len(rows) != n or any(len(row) != n for row in rows):
        raise InvalidInputError(f"Finite group file must contain {n} rows of {n} entries")
    return FiniteGroup(name, rows)


def load_finite_group(path: str | Path) -> FiniteGroup:
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding='utf-8')
    except OSError as e:
        raise InvalidInputError(f"Cannot read finite group file {file_path}: {e}")
    group = parse_finite_group(text, name=file_path.stem)
    logging.info(f"Loaded finite group '{group.name}' of order {group.order}")
    return group
