"""Young-label combinatorics.

Partitions index both symmetric-group and unitary-group irreducible
blocks; this module owns their enumeration, the box-addition lattice,
the two dimension formulas, and the normalized diagonal matrix built
from a label.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cache
from math import comb, factorial
from typing import Iterable, Iterator

import numpy as np


@dataclass(frozen=True, order=True)
class Partition:
    """Non-increasing tuple of positive integers (trailing zeros trimmed)."""

    parts: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        parts = tuple(int(p) for p in self.parts)
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        if any(p < 0 for p in parts):
            raise ValueError(f"negative part in {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValueError(f"parts not non-increasing: {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse the textual literal used in CLI flags and result files, e.g. "3,1"."""
        text = text.strip()
        if not text or text == "()":
            return cls(())
        return cls(tuple(int(tok) for tok in text.split(",")))

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def rows(self) -> int:
        return len(self.parts)

    def padded(self, d: int) -> tuple[int, ...]:
        if self.rows > d:
            raise ValueError(f"{self} has more than {d} rows")
        return self.parts + (0,) * (d - self.rows)

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __getitem__(self, i: int) -> int:
        return self.parts[i]

    def __str__(self) -> str:
        return ",".join(str(p) for p in self.parts) if self.parts else "()"


def as_partition(value: "Partition | Iterable[int] | str") -> Partition:
    if isinstance(value, Partition):
        return value
    if isinstance(value, str):
        return Partition.parse(value)
    return Partition(tuple(value))


@cache
def _enumerate(n: int, max_rows: int, max_part: int) -> tuple[tuple[int, ...], ...]:
    if n == 0:
        return ((),)
    if max_rows == 0 or max_part == 0:
        return ()
    out: list[tuple[int, ...]] = []
    for first in range(min(n, max_part), 0, -1):
        for rest in _enumerate(n - first, max_rows - 1, first):
            out.append((first,) + rest)
    return tuple(out)


def enumerate_partitions(n: int, max_rows: int) -> list[Partition]:
    """All partitions of n with at most max_rows positive parts.

    Lexicographically descending, so output order is a stable golden-file
    order: (4) > (3,1) > (2,2).
    """
    if n < 0 or max_rows < 1:
        raise ValueError("need n >= 0 and max_rows >= 1")
    return [Partition(p) for p in _enumerate(n, max_rows, n if n else 1)]


def add_box(lam: Partition, max_rows: int) -> list[Partition]:
    """All partitions obtained from lam by adding one box, row count capped."""
    lam = as_partition(lam)
    out = []
    for i in range(min(lam.rows + 1, max_rows)):
        prev = lam.parts[i - 1] if i > 0 else None
        cur = lam.parts[i] if i < lam.rows else 0
        if prev is None or cur + 1 <= prev:
            grown = list(lam.parts) + [0] * (i + 1 - lam.rows)
            grown[i] += 1
            out.append(Partition(tuple(grown)))
    return out


def remove_box(lam: Partition) -> Partition:
    """Canonical parent in the Young lattice: drop a box from the last removable row."""
    lam = as_partition(lam)
    if lam.n == 0:
        raise ValueError("empty partition has no parent")
    shrunk = list(lam.parts)
    shrunk[-1] -= 1
    return Partition(tuple(shrunk))


@cache
def _hooks(parts: tuple[int, ...]) -> tuple[int, ...]:
    cols = [0] * (parts[0] if parts else 0)
    for p in parts:
        for j in range(p):
            cols[j] += 1
    hooks = []
    for i, p in enumerate(parts):
        for j in range(p):
            hooks.append((p - j) + (cols[j] - i) - 1)
    return tuple(hooks)


def dim_sym(lam: Partition) -> int:
    """Number of standard Young tableaux of shape lam (hook length formula)."""
    lam = as_partition(lam)
    if lam.n == 0:
        return 1
    prod = 1
    for h in _hooks(lam.parts):
        prod *= h
    return factorial(lam.n) // prod


def dim_gl(lam: Partition, d: int) -> int:
    """Dimension of the unitary-group irrep labeled by lam at dimension d.

    Weyl formula prod_{i<j} (lam_i - lam_j + j - i)/(j - i); zero when the
    label needs more than d rows.
    """
    lam = as_partition(lam)
    if lam.rows > d:
        return 0
    padded = lam.padded(d)
    value = Fraction(1)
    for i in range(d):
        for j in range(i + 1, d):
            value *= Fraction(padded[i] - padded[j] + j - i, j - i)
    assert value.denominator == 1
    return int(value)


def normalized_diag(lam: Partition, d: int) -> np.ndarray:
    """diag(lam_1/n, ..., lam_d/n), the trace-1 diagonal state of a label."""
    lam = as_partition(lam)
    if lam.n == 0:
        raise ValueError("normalized_diag undefined for the empty partition")
    return np.diag(np.array(lam.padded(d), dtype=float) / lam.n).astype(complex)


def weak_composition_count(n: int, r: int) -> int:
    """Number of ways to split n boxes into r ordered (possibly empty) groups."""
    return comb(n + r - 1, r - 1)
