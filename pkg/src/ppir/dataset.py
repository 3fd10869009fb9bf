"""Classified message store.

Messages are numbered 1..f and stored in ascending class order, so class γ owns
the contiguous block θ(γ, 1) .. θ(γ, M_γ). Databases map the client's shared
random number s ∈ [δ] to concrete class members; the client only ever sees δ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import BadSeed, DatasetFormatError, IndexOutOfClass, LambdaTooLarge
from .gf import DEFAULT_MODULUS, check_modulus

HEADER_TAG = "ppir-dataset v1"


@dataclass(frozen=True)
class Classification:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.sizes)
        if not sizes:
            raise ValueError("at least one class is required")
        if any(m < 1 for m in sizes):
            raise ValueError(f"every class needs at least one message: {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def gamma_total(self) -> int:
        return len(self.sizes)

    @property
    def f(self) -> int:
        return sum(self.sizes)

    @cached_property
    def delta(self) -> int:
        return math.lcm(*self.sizes)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """offsets[γ−1] = M_1 + … + M_(γ−1)."""
        out, acc = [], 0
        for m in self.sizes:
            out.append(acc)
            acc += m
        return tuple(out)

    def size(self, gamma: int) -> int:
        self._check_class(gamma)
        return self.sizes[gamma - 1]

    def members(self, gamma: int) -> range:
        self._check_class(gamma)
        start = self.offsets[gamma - 1] + 1
        return range(start, start + self.sizes[gamma - 1])

    def class_of(self, message: int) -> int:
        if not 1 <= message <= self.f:
            raise IndexOutOfClass(f"message index {message} outside [1, {self.f}]")
        for gamma, off in enumerate(self.offsets, start=1):
            if message <= off + self.sizes[gamma - 1]:
                return gamma
        raise AssertionError("unreachable")

    def _check_class(self, gamma: int) -> None:
        if not 1 <= gamma <= self.gamma_total:
            raise IndexOutOfClass(f"class {gamma} outside [1, {self.gamma_total}]")


def theta(classification: Classification, gamma: int, beta: int) -> int:
    """Global index of the β-th member of class γ (both 1-based)."""
    m = classification.size(gamma)
    if not 1 <= beta <= m:
        raise IndexOutOfClass(f"sub-class index {beta} outside [1, {m}] for class {gamma}")
    return beta + classification.offsets[gamma - 1]


def _check_seed(classification: Classification, s: int) -> None:
    if not isinstance(s, (int, np.integer)) or not 1 <= s <= classification.delta:
        raise BadSeed(f"s={s!r} outside [1, {classification.delta}]")


def select_candidate(classification: Classification, s: int, gamma: int) -> int:
    _check_seed(classification, s)
    m = classification.size(gamma)
    delta = classification.delta
    # exact ceil(s * M / delta)
    beta = (s * m + delta - 1) // delta
    return theta(classification, gamma, beta)


def select_candidates_cyclic(classification: Classification, s: int, gamma: int, lam: int) -> tuple[int, ...]:
    m = classification.size(gamma)
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    if lam > m:
        raise LambdaTooLarge(f"lambda={lam} exceeds the {m} members of class {gamma}")
    first = select_candidate(classification, s, gamma)
    last = classification.offsets[gamma - 1] + m
    out = [first]
    for _ in range(lam - 1):
        prev = out[-1]
        out.append(prev - m + 1 if prev == last else prev + 1)
    return tuple(out)


def resolve_candidates(classification: Classification, s: int, lam: int = 1) -> tuple[tuple[int, ...], ...]:
    """Message indices standing in for every candidate: row γ−1 holds λ members of class γ."""
    return tuple(
        select_candidates_cyclic(classification, s, g, lam) for g in range(1, classification.gamma_total + 1)
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    classification: Classification
    length: int
    p: int
    symbols: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_modulus(self.p)
        sym = np.array(self.symbols, dtype=np.int64)
        if sym.shape != (self.classification.f, self.length):
            raise ValueError(f"symbol grid shape {sym.shape} != ({self.classification.f}, {self.length})")
        if sym.size and (sym.min() < 0 or sym.max() >= self.p):
            raise ValueError("symbols must lie in [0, p)")
        sym.flags.writeable = False
        object.__setattr__(self, "symbols", sym)

    @property
    def f(self) -> int:
        return self.classification.f

    @property
    def delta(self) -> int:
        return self.classification.delta

    def message(self, m: int) -> tuple[int, ...]:
        if not 1 <= m <= self.f:
            raise IndexOutOfClass(f"message index {m} outside [1, {self.f}]")
        return tuple(int(v) for v in self.symbols[m - 1])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.classification == other.classification
            and self.length == other.length
            and self.p == other.p
            and np.array_equal(self.symbols, other.symbols)
        )

    def __hash__(self):
        return hash((self.classification, self.length, self.p, self.symbols.tobytes()))

    # -- file format ---------------------------------------------------
    def dumps(self) -> str:
        head = f"{HEADER_TAG} p={self.p} L={self.length} sizes={','.join(map(str, self.classification.sizes))}"
        lines = [head]
        lines.extend(" ".join(str(int(v)) for v in row) for row in self.symbols)
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> Dataset:
        lines = text.splitlines()
        if not lines or not lines[0].startswith(HEADER_TAG):
            raise DatasetFormatError("missing 'ppir-dataset v1' header")
        fields = {}
        for tok in lines[0][len(HEADER_TAG):].split():
            key, sep, value = tok.partition("=")
            if not sep:
                raise DatasetFormatError(f"bad header token {tok!r}")
            fields[key] = value
        try:
            p = int(fields["p"])
            length = int(fields["L"])
            sizes = tuple(int(v) for v in fields["sizes"].split(","))
        except (KeyError, ValueError) as exc:
            raise DatasetFormatError(f"bad header: {lines[0]!r}") from exc
        body = [ln for ln in lines[1:] if ln.strip()]
        classification = Classification(sizes)
        if len(body) != classification.f:
            raise DatasetFormatError(f"expected {classification.f} message lines, found {len(body)}")
        try:
            grid = [[int(v) for v in ln.split()] for ln in body]
        except ValueError as exc:
            raise DatasetFormatError("non-integer symbol") from exc
        if any(len(row) != length for row in grid):
            raise DatasetFormatError(f"every message line must hold L={length} symbols")
        try:
            return cls(classification, length, p, np.array(grid, dtype=np.int64).reshape(classification.f, length))
        except ValueError as exc:
            raise DatasetFormatError(str(exc)) from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> Dataset:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def build_dataset(sizes: Sequence[int], length: int, modulus: int = DEFAULT_MODULUS, seed: int = 0) -> Dataset:
    """Uniform random symbols from a seeded PCG64 stream; same seed, same grid."""
    if length < 1:
        raise ValueError("length must be >= 1")
    classification = Classification(tuple(sizes))
    rng = np.random.default_rng(seed)
    grid = rng.integers(0, modulus, size=(classification.f, length), dtype=np.int64)
    return Dataset(classification, length, modulus, grid)


def parse_sizes(text: Union[str, Iterable[int]]) -> tuple[int, ...]:
    if isinstance(text, str):
        return tuple(int(v) for v in text.replace(" ", "").strip("[]").split(",") if v)
    return tuple(int(v) for v in text)
