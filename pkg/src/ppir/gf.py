"""Prime-field arithmetic and the small amount of exact linear algebra the schemes need.

Hot paths in the schemes work on plain ``int`` residues; :class:`FieldElem` and
:class:`Matrix` are the checked, immutable public surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .errors import DivisionByZero, FieldTooSmall, ModulusMismatch, SingularMatrix

DEFAULT_MODULUS = 257


@lru_cache(maxsize=None)
def is_prime(p: int) -> bool:
    from sympy import isprime

    return bool(isprime(p))


def check_modulus(p: int) -> int:
    if not isinstance(p, int) or p < 2 or not is_prime(p):
        raise ValueError(f"modulus must be a prime, got {p!r}")
    if p >= 1 << 64:
        raise ValueError("moduli above 64 bits are not supported")
    return p


@dataclass(frozen=True)
class FieldElem:
    value: int
    p: int = DEFAULT_MODULUS

    def __post_init__(self):
        check_modulus(self.p)
        if not 0 <= self.value < self.p:
            object.__setattr__(self, "value", self.value % self.p)

    def _other(self, other) -> int:
        if isinstance(other, FieldElem):
            if other.p != self.p:
                raise ModulusMismatch(f"GF({self.p}) vs GF({other.p})")
            return other.value
        if isinstance(other, int):
            return other % self.p
        return NotImplemented

    def __add__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElem((self.value + b) % self.p, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElem((self.value - b) % self.p, self.p)

    def __rsub__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElem((b - self.value) % self.p, self.p)

    def __mul__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return FieldElem(self.value * b % self.p, self.p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        b = self._other(other)
        if b is NotImplemented:
            return b
        return self * FieldElem(b, self.p).inverse()

    def __neg__(self):
        return FieldElem(-self.value % self.p, self.p)

    def inverse(self) -> FieldElem:
        if self.value == 0:
            raise DivisionByZero(f"0 has no inverse in GF({self.p})")
        return FieldElem(pow(self.value, -1, self.p), self.p)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.p})"


def field_arith(a: FieldElem, b: FieldElem, op: str) -> FieldElem:
    """Apply ``op`` in {"add", "sub", "mul", "div"} to two elements of one field."""
    if a.p != b.p:
        raise ModulusMismatch(f"GF({a.p}) vs GF({b.p})")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown field operation {op!r}")


@dataclass(frozen=True)
class Matrix:
    """Dense matrix over GF(p), stored row-major as a tuple of tuples of residues."""

    entries: tuple[tuple[int, ...], ...]
    p: int = DEFAULT_MODULUS

    def __post_init__(self):
        check_modulus(self.p)
        rows = tuple(tuple(int(v) % self.p for v in row) for row in self.entries)
        if not rows or not rows[0]:
            raise ValueError("matrix must have at least one row and one column")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged matrix")
        object.__setattr__(self, "entries", rows)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def __getitem__(self, rc):
        r, c = rc
        return self.entries[r][c]

    def column(self, c: int) -> tuple[int, ...]:
        return tuple(row[c] for row in self.entries)

    def select_columns(self, cols: Sequence[int]) -> Matrix:
        return Matrix(tuple(tuple(row[c] for c in cols) for row in self.entries), self.p)

    def permute_columns(self, perm: Sequence[int]) -> Matrix:
        """Column ``c`` of the result is column ``perm[c]`` of ``self`` (0-based)."""
        if sorted(perm) != list(range(self.cols)):
            raise ValueError(f"not a permutation of {self.cols} columns: {perm!r}")
        return self.select_columns(perm)

    def matvec(self, vec: Sequence[int]) -> tuple[int, ...]:
        if len(vec) != self.cols:
            raise ValueError("dimension mismatch")
        p = self.p
        return tuple(sum(a * int(v) for a, v in zip(row, vec)) % p for row in self.entries)

    def tolist(self) -> list[list[int]]:
        return [list(r) for r in self.entries]


def rs_generator(gamma: int, eta: int, p: int = DEFAULT_MODULUS) -> Matrix:
    """η×Γ Vandermonde generator of a [Γ, η] Reed–Solomon code over GF(p).

    Evaluation points are 0, 1, …, Γ−1, so entry (r, c) is c**r mod p.
    """
    check_modulus(p)
    if not 1 <= eta <= gamma:
        raise ValueError(f"need 1 <= eta <= gamma, got eta={eta}, gamma={gamma}")
    if p < gamma + 1:
        raise FieldTooSmall(f"GF({p}) has too few points for a length-{gamma} RS code")
    return Matrix(tuple(tuple(pow(c, r, p) for c in range(gamma)) for r in range(eta)), p)


def solve_mod(m: Sequence[Sequence[int]], rhs: Sequence[int], p: int) -> list[int]:
    """Solve the square system m·x = rhs over GF(p) on plain residues."""
    k = len(m)
    if any(len(row) != k for row in m) or len(rhs) != k:
        raise ValueError("solve_mod needs a square system")
    aug = [[int(v) % p for v in row] + [int(b) % p] for row, b in zip(m, rhs)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if aug[r][col]), None)
        if pivot is None:
            raise SingularMatrix(f"matrix is singular over GF({p})")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], -1, p)
        aug[col] = [v * inv % p for v in aug[col]]
        for r in range(k):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [(a - f * b) % p for a, b in zip(aug[r], aug[col])]
    return [row[k] for row in aug]


def solve_square(m: Matrix, rhs: Sequence[FieldElem | int]) -> list[FieldElem]:
    if m.rows != m.cols:
        raise ValueError(f"expected a square matrix, got {m.rows}x{m.cols}")
    values = []
    for v in rhs:
        if isinstance(v, FieldElem):
            if v.p != m.p:
                raise ModulusMismatch(f"GF({v.p}) vs GF({m.p})")
            v = v.value
        values.append(v)
    return [FieldElem(x, m.p) for x in solve_mod(m.entries, values, m.p)]
