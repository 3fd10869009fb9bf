"""Capacity-achieving single-message PPIR over Γ candidate messages.

Queries follow the round structure of the Sun–Jafar replicated PIR scheme with
messages of length L = n^Γ. Construction happens in "U-space", where symbol i
of candidate c is U^(c)_i = X^(c)_{π_c(i)}; the private permutations π_c are
composed in only when queries leave the client.

Index allocation (canonical, before permutation and shuffling):

* round 1: database j gets symbol j of every candidate;
* round τ ≥ 2: database j gets, for every τ-subset of candidates in
  lexicographic order, (n−1)^(τ−1) sums. A subset holding the desired candidate
  pairs a fresh desired symbol with an undesired (τ−1)-sum from another
  database. Fresh desired indices run n+1, n+2, … over rounds, databases,
  subsets and copies. In an undesired τ-sum T (copy k), member m takes the
  index of the fresh desired symbol of the sum (T \\ {m}) ∪ {desired}, copy k,
  at the same database and round.

With n = 2 and Γ = 3 this reproduces both query tables of the worked example
bit for bit.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

from .dataset import Dataset
from .errors import InconsistentTranscript, UnsupportedSingleDB
from .protocol import Query, QueryTerm, Transcript, Vector, answer_queries, vec_sub

# canonical term: (candidate, U-index); canonical query: tuple of those, candidate-sorted
CanonicalQuery = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ClientRandomness:
    """Private randomness of one PPIR retrieval.

    ``perms[c-1][i-1]`` is the raw symbol position behind U-index i of candidate c.
    ``orders[j][k]`` is the canonical position of the k-th query sent to database
    j+1; ``None`` keeps canonical order.
    """

    s: int
    perms: tuple[tuple[int, ...], ...]
    orders: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        for perm in self.perms:
            if sorted(perm) != list(range(1, len(perm) + 1)):
                raise ValueError(f"not a permutation of [{len(perm)}]: {perm}")
        if self.orders is not None:
            for order in self.orders:
                if sorted(order) != list(range(len(order))):
                    raise ValueError(f"bad query order {order}")

    @property
    def gamma_total(self) -> int:
        return len(self.perms)

    @classmethod
    def identity(cls, s: int, gamma_total: int, length: int) -> ClientRandomness:
        ident = tuple(range(1, length + 1))
        return cls(s, (ident,) * gamma_total, None)


def ppir_length(n: int, gamma_total: int) -> int:
    return n**gamma_total


def queries_per_database(n: int, gamma_total: int) -> int:
    """Σ_τ C(Γ,τ)(n−1)^(τ−1) = (n^Γ − 1)/(n − 1)."""
    return (n**gamma_total - 1) // (n - 1)


def draw_randomness(
    rng: random.Random, n: int, gamma_total: int, delta: int, shuffle: bool = True, s: Optional[int] = None
) -> ClientRandomness:
    length = ppir_length(n, gamma_total)
    if s is None:
        s = rng.randint(1, delta)
    perms = tuple(tuple(rng.sample(range(1, length + 1), length)) for _ in range(gamma_total))
    orders = None
    if shuffle:
        k = queries_per_database(n, gamma_total)
        orders = tuple(tuple(rng.sample(range(k), k)) for _ in range(n))
    return ClientRandomness(s, perms, orders)


@dataclass(frozen=True)
class Recipe:
    """How to recover one desired U-symbol: answer(db, pos) − answer(side_db, side_pos)."""

    index: int
    db: int
    pos: int
    side: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class CanonicalPlan:
    n: int
    gamma_total: int
    desired: int
    queries: tuple[tuple[CanonicalQuery, ...], ...]
    rounds: tuple[tuple[int, ...], ...]
    recipes: tuple[Recipe, ...]

    @property
    def length(self) -> int:
        return ppir_length(self.n, self.gamma_total)


def canonical_plan(n: int, gamma_total: int, desired: int) -> CanonicalPlan:
    if n < 2:
        raise UnsupportedSingleDB("the PPIR scheme needs n >= 2; use the single-server scheme")
    if not 1 <= desired <= gamma_total:
        raise ValueError(f"desired class {desired} outside [1, {gamma_total}]")
    d = desired
    queries: list[list[CanonicalQuery]] = [[] for _ in range(n)]
    rounds: list[list[int]] = [[] for _ in range(n)]
    recipes: list[Recipe] = []

    # prev[j][S] -> [(canonical query, position)] for undesired sums of the previous round
    prev: list[dict[tuple[int, ...], list[tuple[CanonicalQuery, int]]]] = [defaultdict(list) for _ in range(n)]
    for j in range(n):
        for c in range(1, gamma_total + 1):
            pos = len(queries[j])
            q = ((c, j + 1),)
            queries[j].append(q)
            rounds[j].append(1)
            if c == d:
                recipes.append(Recipe(j + 1, j, pos))
            else:
                prev[j][(c,)].append((q, pos))

    next_index = n + 1
    for tau in range(2, gamma_total + 1):
        cur: list[dict] = [defaultdict(list) for _ in range(n)]
        copies = (n - 1) ** (tau - 1)
        subsets = list(combinations(range(1, gamma_total + 1), tau))
        for j in range(n):
            fresh: dict[tuple[tuple[int, ...], int], int] = {}
            for sub in subsets:
                if d in sub:
                    for k in range(copies):
                        fresh[(sub, k)] = next_index
                        next_index += 1
            for sub in subsets:
                if d in sub:
                    others = tuple(c for c in sub if c != d)
                    # side information from the other databases, ascending
                    sources = [(jj, q, pos) for jj in range(n) if jj != j for q, pos in prev[jj][others]]
                    assert len(sources) == copies
                    for k, (jj, side_q, side_pos) in enumerate(sources):
                        idx = fresh[(sub, k)]
                        q = tuple(sorted(side_q + ((d, idx),)))
                        pos = len(queries[j])
                        queries[j].append(q)
                        rounds[j].append(tau)
                        recipes.append(Recipe(idx, j, pos, (jj, side_pos)))
                else:
                    for k in range(copies):
                        terms = []
                        for m in sub:
                            partner = tuple(sorted((set(sub) - {m}) | {d}))
                            terms.append((m, fresh[(partner, k)]))
                        q = tuple(terms)
                        pos = len(queries[j])
                        queries[j].append(q)
                        rounds[j].append(tau)
                        cur[j][sub].append((q, pos))
        prev = cur

    recipes.sort(key=lambda r: r.index)
    assert [r.index for r in recipes] == list(range(1, n**gamma_total + 1))
    return CanonicalPlan(
        n, gamma_total, d, tuple(map(tuple, queries)), tuple(map(tuple, rounds)), tuple(recipes)
    )


@dataclass(frozen=True)
class QueryPlan:
    """Client-side view of one retrieval: what is sent and how to decode it."""

    canonical: CanonicalPlan
    randomness: ClientRandomness
    queries: tuple[tuple[Query, ...], ...]
    offset: int = 0

    @property
    def n(self) -> int:
        return self.canonical.n

    def sent_position(self, db: int, canonical_pos: int) -> int:
        order = self.randomness.orders
        if order is None:
            return canonical_pos
        return order[db].index(canonical_pos)


def realize(
    canonical: Sequence[Sequence[CanonicalQuery]],
    perms: Sequence[Sequence[int]],
    orders: Optional[Sequence[Sequence[int]]],
    offset: int = 0,
) -> tuple[tuple[Query, ...], ...]:
    """Compose permutations into canonical queries, then apply the per-database send order."""
    out = []
    for j, qs in enumerate(canonical):
        raw = [Query(tuple(QueryTerm(c, perms[c - 1][i - 1] + offset, 1) for c, i in q)) for q in qs]
        if orders is not None:
            raw = [raw[k] for k in orders[j]]
        out.append(tuple(raw))
    return tuple(out)


def gen_queries_ppir(
    n: int, gamma_total: int, desired: int, randomness: ClientRandomness, offset: int = 0
) -> QueryPlan:
    canon = canonical_plan(n, gamma_total, desired)
    if randomness.gamma_total != gamma_total:
        raise ValueError("randomness carries permutations for a different class count")
    if any(len(p) != canon.length for p in randomness.perms):
        raise ValueError(f"permutations must act on [{canon.length}]")
    if randomness.orders is not None and (
        len(randomness.orders) != n or any(len(o) != len(canon.queries[0]) for o in randomness.orders)
    ):
        raise ValueError("query orders do not match the per-database query count")
    queries = realize(canon.queries, randomness.perms, randomness.orders, offset)
    return QueryPlan(canon, randomness, queries, offset)


def answer_ppir(dataset: Dataset, s: int, queries: Sequence[Query]) -> tuple[int, ...]:
    return tuple(v[0] for v in answer_queries(dataset, s, queries, 1))


def _check_transcript(transcript: Transcript, plan: QueryPlan) -> None:
    if transcript.n != plan.n:
        raise InconsistentTranscript(f"transcript covers {transcript.n} databases, plan {plan.n}")
    if transcript.queries != plan.queries:
        raise InconsistentTranscript("transcript queries differ from the client's plan")
    if transcript.s != plan.randomness.s:
        raise InconsistentTranscript("transcript s differs from the client's s")


def decode_with_plan(transcript: Transcript, plan: QueryPlan) -> tuple[tuple[int, ...], ...]:
    _check_transcript(transcript, plan)
    p = transcript.p
    length = plan.canonical.length
    perm = plan.randomness.perms[plan.canonical.desired - 1]
    out: list[Optional[Vector]] = [None] * length
    for r in plan.canonical.recipes:
        value = transcript.answer(r.db, plan.sent_position(r.db, r.pos))
        if r.side is not None:
            side_db, side_pos = r.side
            value = vec_sub(value, transcript.answer(side_db, plan.sent_position(side_db, side_pos)), p)
        out[perm[r.index - 1] - 1] = value
    if any(v is None for v in out):
        raise InconsistentTranscript("decoding left desired symbols unresolved")
    lam = transcript.lam
    return tuple(tuple(v[k] for v in out) for k in range(lam))


def decode_ppir(transcript: Transcript, randomness: ClientRandomness, desired: int, offset: int = 0):
    """Recover the λ messages standing behind the desired candidate (λ = 1 for plain PPIR).

    Returns one tuple of L symbols per retrieved message. The client never learns
    which member of the class it received.
    """
    plan = gen_queries_ppir(transcript.n, randomness.gamma_total, desired, randomness, offset)
    return decode_with_plan(transcript, plan)


class PpirClient:
    """The user side. It knows δ, Γ and n but nothing about class sizes."""

    scheme = "ppir"

    def __init__(self, n: int, gamma_total: int, delta: int):
        if n < 2:
            raise UnsupportedSingleDB("the PPIR scheme needs n >= 2")
        self.n = n
        self.gamma_total = gamma_total
        self.delta = delta

    @property
    def length(self) -> int:
        return ppir_length(self.n, self.gamma_total)

    def prepare(
        self,
        desired: int,
        rng: random.Random,
        shuffle: bool = True,
        s: Optional[int] = None,
        offset: int = 0,
    ) -> QueryPlan:
        randomness = draw_randomness(rng, self.n, self.gamma_total, self.delta, shuffle, s)
        return gen_queries_ppir(self.n, self.gamma_total, desired, randomness, offset)

    def decode(self, transcript: Transcript, plan: QueryPlan):
        return decode_with_plan(transcript, plan)
