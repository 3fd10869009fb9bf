"""Query, answer and transcript types shared by every retrieval scheme.

A database only ever sees queries over *candidates*: class indices that it
resolves locally, from the shared random number s, to λ concrete messages. An
answer is therefore always a λ-vector (a super symbol); plain PPIR is λ = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

from .dataset import Dataset, resolve_candidates
from .errors import BadCandidate, InconsistentTranscript

Vector = tuple[int, ...]


class QueryTerm(NamedTuple):
    candidate: int
    symbol_index: int
    coeff: int = 1


@dataclass(frozen=True)
class Query:
    """A linear combination with at most one term per candidate."""

    terms: tuple[QueryTerm, ...]

    def __post_init__(self):
        terms = tuple(sorted(QueryTerm(*map(int, t)) for t in self.terms))
        if not terms:
            raise ValueError("a query needs at least one term")
        cands = [t.candidate for t in terms]
        if len(set(cands)) != len(cands):
            raise ValueError(f"repeated candidate in query {terms}")
        if any(t.coeff == 0 for t in terms):
            raise ValueError("zero coefficients are dropped, not sent")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, *terms) -> Query:
        return cls(tuple(QueryTerm(*t) for t in terms))

    def __len__(self):
        return len(self.terms)

    def to_wire(self) -> list[list[int]]:
        return [list(t) for t in self.terms]

    @classmethod
    def from_wire(cls, obj) -> Query:
        return cls(tuple(QueryTerm(*t) for t in obj))

    def render(self, names: str = "xyzw") -> str:
        """Compact text such as ``2y2+z3+3w2`` (candidates beyond ``names`` use ``X<c>``)."""
        parts = []
        for c, i, a in self.terms:
            name = names[c - 1] if c <= len(names) else f"X{c}_"
            parts.append(f"{'' if a == 1 else a}{name}{i}")
        return "+".join(parts)


def answer_queries(dataset: Dataset, s: int, queries: Sequence[Query], lam: int = 1) -> tuple[Vector, ...]:
    """Answer every query with the coefficient-weighted sum of candidate super symbols.

    Deterministic in (queries, s, dataset).
    """
    cls = dataset.classification
    members = resolve_candidates(cls, s, lam)
    p = dataset.p
    sym = dataset.symbols
    out = []
    for q in queries:
        acc = [0] * lam
        for c, i, a in q.terms:
            if not 1 <= c <= cls.gamma_total:
                raise BadCandidate(f"candidate {c} outside [1, {cls.gamma_total}]")
            if not 1 <= i <= dataset.length:
                raise BadCandidate(f"symbol index {i} outside [1, {dataset.length}]")
            if not 0 < a < p:
                raise BadCandidate(f"coefficient {a} outside [1, {p - 1}]")
            for k, m in enumerate(members[c - 1]):
                acc[k] += a * int(sym[m - 1, i - 1])
        out.append(tuple(v % p for v in acc))
    return tuple(out)


@dataclass(frozen=True)
class Transcript:
    scheme: str
    s: int
    lam: int
    p: int
    queries: tuple[tuple[Query, ...], ...]
    answers: tuple[tuple[Vector, ...], ...]

    def __post_init__(self):
        if len(self.queries) != len(self.answers):
            raise InconsistentTranscript("query and answer lists cover different databases")
        for j, (qs, ans) in enumerate(zip(self.queries, self.answers), start=1):
            if len(qs) != len(ans):
                raise InconsistentTranscript(f"database {j}: {len(ans)} answers for {len(qs)} queries")
            if any(len(a) != self.lam for a in ans):
                raise InconsistentTranscript(f"database {j}: answer vector length differs from lambda={self.lam}")

    @property
    def n(self) -> int:
        return len(self.queries)

    @property
    def download_symbols(self) -> int:
        return sum(len(a) for ans in self.answers for a in ans)

    def answer(self, db: int, position: int) -> Vector:
        return self.answers[db][position]

    def to_json(self) -> str:
        return json.dumps(
            {
                "scheme": self.scheme,
                "s": self.s,
                "lambda": self.lam,
                "p": self.p,
                "queries": [[q.to_wire() for q in qs] for qs in self.queries],
                "answers": [[list(a) for a in ans] for ans in self.answers],
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> Transcript:
        obj = json.loads(text)
        return cls(
            obj["scheme"],
            obj["s"],
            obj["lambda"],
            obj["p"],
            tuple(tuple(Query.from_wire(q) for q in qs) for qs in obj["queries"]),
            tuple(tuple(tuple(a) for a in ans) for ans in obj["answers"]),
        )


def measure_rate(transcript: Transcript, length: int, mu: int) -> Fraction:
    """Desired symbols (μ·L) over total downloaded field symbols."""
    return Fraction(mu * length, transcript.download_symbols)


def vec_sub(a: Vector, b: Vector, p: int) -> Vector:
    return tuple((x - y) % p for x, y in zip(a, b))
