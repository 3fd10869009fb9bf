"""Multi-message PPIR: λ messages from each of η desired classes.

Executable regimes:

* η ≥ Γ/2, n ≥ 2: two-round MDS-coded scheme over super messages of n² super
  symbols (:func:`gen_queries_mppir`);
* η = 1, n ≥ 2: the PPIR scheme run on super symbols;
* n = 1: download λ members of every class (:func:`single_server_retrieve`).

Everything else (1 < η < Γ/2) raises :class:`RegimeUnsupported` carrying the
analytic bounds.

MDS round 2 at database j uses one equation group per other database d (the
g-th one, ascending). Group g applies the η rows of the RS generator, columns
permuted by the g-th private column permutation, to a vector holding fresh
desired super symbol n + (j−1)(n−1) + g for each desired class and database
d's round-1 super symbol (index d) for each undesired class.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .capacity import ProblemConfig, capacity_report
from .dataset import Dataset
from .errors import InconsistentTranscript, LambdaTooLarge, RegimeUnsupported, UnsupportedSingleDB
from .gf import DEFAULT_MODULUS, rs_generator, solve_mod
from .protocol import Query, QueryTerm, Transcript, Vector, answer_queries, measure_rate
from . import scheme_ppir

# canonical term: (candidate, U-index, coeff)
CanonicalTerm = tuple[int, int, int]


def mppir_regime(n: int, gamma_total: int, eta: int) -> str:
    """Which executable scheme serves (n, Γ, η): 'single_server', 'mds', 'ppir' or 'unsupported'."""
    if n == 1:
        return "single_server"
    if 2 * eta >= gamma_total:
        return "mds"
    if eta == 1:
        return "ppir"
    return "unsupported"


def _check_omega(omega: Sequence[int], gamma_total: int) -> tuple[int, ...]:
    om = tuple(omega)
    if not om or list(om) != sorted(set(om)) or om[0] < 1 or om[-1] > gamma_total:
        raise ValueError(f"omega must be a strictly increasing nonempty subset of [1, {gamma_total}]: {om}")
    return om


@dataclass(frozen=True)
class MppirRequest:
    omega: tuple[int, ...]
    lam: int
    regime: str

    @classmethod
    def make(cls, n: int, gamma_total: int, omega: Sequence[int], lam: int) -> MppirRequest:
        om = _check_omega(omega, gamma_total)
        if lam < 1:
            raise ValueError("lambda must be >= 1")
        regime = mppir_regime(n, gamma_total, len(om))
        if regime == "unsupported":
            cfg = ProblemConfig(n, gamma_total, len(om), lam)
            raise RegimeUnsupported(
                f"no executable scheme for 1 < eta={len(om)} < gamma/2 (gamma={gamma_total}); "
                "analytic bounds only",
                capacity_report(cfg),
            )
        return cls(om, lam, regime)

    @property
    def eta(self) -> int:
        return len(self.omega)


@dataclass(frozen=True)
class MdsRandomness:
    s: int
    perms: tuple[tuple[int, ...], ...]
    column_perms: tuple[tuple[int, ...], ...]
    orders: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        for perm in self.perms:
            if sorted(perm) != list(range(1, len(perm) + 1)):
                raise ValueError(f"not a permutation: {perm}")
        gamma = len(self.perms)
        for cp in self.column_perms:
            if sorted(cp) != list(range(1, gamma + 1)):
                raise ValueError(f"column permutation {cp} is not a bijection on [{gamma}]")
        if self.orders is not None:
            for order in self.orders:
                if sorted(order) != list(range(len(order))):
                    raise ValueError(f"bad query order {order}")

    @property
    def gamma_total(self) -> int:
        return len(self.perms)

    @classmethod
    def identity(cls, s: int, n: int, gamma_total: int, column_perm: Optional[Sequence[int]] = None) -> MdsRandomness:
        length = n * n
        ident = tuple(range(1, length + 1))
        cp = tuple(column_perm) if column_perm is not None else tuple(range(1, gamma_total + 1))
        return cls(s, (ident,) * gamma_total, (cp,) * (n - 1), None)


def mds_length(n: int) -> int:
    return n * n


def mds_queries_per_database(n: int, gamma_total: int, eta: int) -> int:
    return gamma_total + (n - 1) * eta


def draw_mds_randomness(
    rng: random.Random,
    n: int,
    gamma_total: int,
    eta: int,
    delta: int,
    shuffle: bool = True,
    s: Optional[int] = None,
) -> MdsRandomness:
    length = mds_length(n)
    if s is None:
        s = rng.randint(1, delta)
    perms = tuple(tuple(rng.sample(range(1, length + 1), length)) for _ in range(gamma_total))
    column_perms = tuple(tuple(rng.sample(range(1, gamma_total + 1), gamma_total)) for _ in range(n - 1))
    orders = None
    if shuffle:
        k = mds_queries_per_database(n, gamma_total, eta)
        orders = tuple(tuple(rng.sample(range(k), k)) for _ in range(n))
    return MdsRandomness(s, perms, column_perms, orders)


@dataclass(frozen=True)
class EquationGroup:
    """η coded queries at one database that decode η fresh desired super symbols."""

    db: int
    positions: tuple[int, ...]
    side_db: int
    fresh_index: int
    # coefficient matrix restricted to desired classes, rows × omega order
    desired_coeffs: tuple[tuple[int, ...], ...]
    # per row: ((undesired class, coeff), ...)
    side_coeffs: tuple[tuple[tuple[int, int], ...], ...]


@dataclass(frozen=True)
class MdsCanonicalPlan:
    n: int
    gamma_total: int
    omega: tuple[int, ...]
    p: int
    queries: tuple[tuple[tuple[CanonicalTerm, ...], ...], ...]
    rounds: tuple[tuple[int, ...], ...]
    groups: tuple[EquationGroup, ...]

    @property
    def length(self) -> int:
        return mds_length(self.n)


def mds_canonical_plan(
    n: int, gamma_total: int, omega: Sequence[int], column_perms: Sequence[Sequence[int]], p: int = DEFAULT_MODULUS
) -> MdsCanonicalPlan:
    om = _check_omega(omega, gamma_total)
    eta = len(om)
    if n < 2:
        raise UnsupportedSingleDB("the MDS scheme needs n >= 2")
    if 2 * eta < gamma_total:
        raise RegimeUnsupported(f"the MDS scheme needs eta >= gamma/2, got eta={eta}, gamma={gamma_total}")
    if len(column_perms) != n - 1:
        raise ValueError(f"need {n - 1} column permutations, got {len(column_perms)}")
    gen = rs_generator(gamma_total, eta, p)
    queries: list[list[tuple[CanonicalTerm, ...]]] = [[] for _ in range(n)]
    rounds: list[list[int]] = [[] for _ in range(n)]
    groups = []
    for j in range(n):
        for c in range(1, gamma_total + 1):
            queries[j].append(((c, j + 1, 1),))
            rounds[j].append(1)
    for j in range(n):
        others = [d for d in range(n) if d != j]
        for g, d in enumerate(others):
            cp = column_perms[g]
            coded = gen.permute_columns([v - 1 for v in cp])
            fresh = n + j * (n - 1) + g + 1
            positions, desired_rows, side_rows = [], [], []
            for r in range(eta):
                terms = []
                side = []
                for c in range(1, gamma_total + 1):
                    a = coded[r, c - 1]
                    if a == 0:
                        continue
                    if c in om:
                        terms.append((c, fresh, a))
                    else:
                        terms.append((c, d + 1, a))
                        side.append((c, a))
                positions.append(len(queries[j]))
                queries[j].append(tuple(terms))
                rounds[j].append(2)
                desired_rows.append(tuple(coded[r, c - 1] for c in om))
                side_rows.append(tuple(side))
            groups.append(EquationGroup(j, tuple(positions), d, fresh, tuple(desired_rows), tuple(side_rows)))
    return MdsCanonicalPlan(
        n, gamma_total, om, p, tuple(map(tuple, queries)), tuple(map(tuple, rounds)), tuple(groups)
    )


@dataclass(frozen=True)
class MdsQueryPlan:
    canonical: MdsCanonicalPlan
    randomness: MdsRandomness
    lam: int
    queries: tuple[tuple[Query, ...], ...]
    offset: int = 0

    @property
    def n(self) -> int:
        return self.canonical.n

    def sent_position(self, db: int, canonical_pos: int) -> int:
        if self.randomness.orders is None:
            return canonical_pos
        return self.randomness.orders[db].index(canonical_pos)


def realize_coded(canonical, perms, orders, offset: int = 0) -> tuple[tuple[Query, ...], ...]:
    out = []
    for j, qs in enumerate(canonical):
        raw = [Query(tuple(QueryTerm(c, perms[c - 1][i - 1] + offset, a) for c, i, a in q)) for q in qs]
        if orders is not None:
            raw = [raw[k] for k in orders[j]]
        out.append(tuple(raw))
    return tuple(out)


def gen_queries_mppir(
    n: int,
    gamma_total: int,
    omega: Sequence[int],
    lam: int,
    randomness: MdsRandomness,
    p: int = DEFAULT_MODULUS,
    offset: int = 0,
) -> MdsQueryPlan:
    om = _check_omega(omega, gamma_total)
    if 1 < len(om) and 2 * len(om) < gamma_total:
        raise RegimeUnsupported(
            f"no executable scheme for 1 < eta={len(om)} < gamma/2",
            capacity_report(ProblemConfig(n, gamma_total, len(om), lam)),
        )
    canon = mds_canonical_plan(n, gamma_total, om, randomness.column_perms, p)
    if randomness.gamma_total != gamma_total or any(len(x) != canon.length for x in randomness.perms):
        raise ValueError(f"need {gamma_total} permutations of [{canon.length}]")
    if randomness.orders is not None and (
        len(randomness.orders) != n or any(len(o) != len(canon.queries[0]) for o in randomness.orders)
    ):
        raise ValueError("query orders do not match the per-database query count")
    queries = realize_coded(canon.queries, randomness.perms, randomness.orders, offset)
    return MdsQueryPlan(canon, randomness, lam, queries, offset)


def answer_mppir(dataset: Dataset, s: int, queries: Sequence[Query], lam: int) -> tuple[Vector, ...]:
    if lam > min(dataset.classification.sizes):
        raise LambdaTooLarge(f"lambda={lam} exceeds the smallest class size {min(dataset.classification.sizes)}")
    return answer_queries(dataset, s, queries, lam)


def decode_with_mds_plan(transcript: Transcript, plan: MdsQueryPlan) -> dict[int, tuple[tuple[int, ...], ...]]:
    """Returns {desired class: λ messages of n² symbols}."""
    if transcript.n != plan.n or transcript.queries != plan.queries:
        raise InconsistentTranscript("transcript queries differ from the client's plan")
    if transcript.s != plan.randomness.s:
        raise InconsistentTranscript("transcript s differs from the client's s")
    canon = plan.canonical
    p = transcript.p
    if p != canon.p:
        raise InconsistentTranscript(f"transcript field GF({p}) differs from the plan's GF({canon.p})")
    lam = transcript.lam
    length = canon.length
    # U-space super symbols per desired class
    found: dict[int, dict[int, Vector]] = {c: {} for c in canon.omega}

    def ans(db, pos):
        return transcript.answer(db, plan.sent_position(db, pos))

    for j in range(canon.n):
        for c in canon.omega:
            found[c][j + 1] = ans(j, c - 1)

    for grp in canon.groups:
        rhs_rows = []
        for pos, side in zip(grp.positions, grp.side_coeffs):
            value = list(ans(grp.db, pos))
            for c, a in side:
                known = ans(grp.side_db, c - 1)
                value = [(v - a * k) % p for v, k in zip(value, known)]
            rhs_rows.append(value)
        for k in range(lam):
            sol = solve_mod(grp.desired_coeffs, [row[k] for row in rhs_rows], p)
            for c, v in zip(canon.omega, sol):
                found[c].setdefault(grp.fresh_index, [None] * lam)
                found[c][grp.fresh_index][k] = v
    out = {}
    for c in canon.omega:
        perm = plan.randomness.perms[c - 1]
        if sorted(found[c]) != list(range(1, length + 1)):
            raise InconsistentTranscript(f"class {c}: decoding left super symbols unresolved")
        symbols: list[Optional[Sequence[int]]] = [None] * length
        for i, vec in found[c].items():
            symbols[perm[i - 1] - 1] = vec
        out[c] = tuple(tuple(int(sym[k]) for sym in symbols) for k in range(lam))
    return out


def decode_mppir(transcript: Transcript, randomness: MdsRandomness, omega: Sequence[int], lam: int, offset: int = 0):
    plan = gen_queries_mppir(transcript.n, randomness.gamma_total, omega, lam, randomness, transcript.p, offset)
    return decode_with_mds_plan(transcript, plan)


@dataclass(frozen=True)
class SingleServerResult:
    transcript: Transcript
    messages: dict[int, tuple[tuple[int, ...], ...]]
    rate: Fraction


def single_server_queries(gamma_total: int, length: int, offset: int = 0) -> tuple[Query, ...]:
    return tuple(
        Query((QueryTerm(c, offset + i, 1),)) for c in range(1, gamma_total + 1) for i in range(1, length + 1)
    )


def single_server_retrieve(
    dataset: Dataset, omega: Sequence[int], lam: int, rng: random.Random, s: Optional[int] = None
) -> SingleServerResult:
    """Ask for λ members of every class under one random s; keep the desired ones."""
    gamma = dataset.classification.gamma_total
    om = _check_omega(omega, gamma)
    if s is None:
        s = rng.randint(1, dataset.delta)
    queries = single_server_queries(gamma, dataset.length)
    answers = answer_mppir(dataset, s, queries, lam)
    transcript = Transcript("single_server", s, lam, dataset.p, (queries,), (answers,))
    messages = decode_single_server(transcript, om, dataset.length)
    return SingleServerResult(transcript, messages, measure_rate(transcript, dataset.length, lam * len(om)))


def decode_single_server(transcript: Transcript, omega: Sequence[int], length: int):
    lam = transcript.lam
    ans = transcript.answers[0]
    out = {}
    for c in omega:
        block = ans[(c - 1) * length : c * length]
        if len(block) != length:
            raise InconsistentTranscript(f"class {c}: expected {length} answers")
        out[c] = tuple(tuple(v[k] for v in block) for k in range(lam))
    return out


class MppirClient:
    """User side of M-PPIR; like :class:`~ppir.scheme_ppir.PpirClient` it only knows δ."""

    def __init__(self, n: int, gamma_total: int, delta: int, p: int = DEFAULT_MODULUS):
        self.n = n
        self.gamma_total = gamma_total
        self.delta = delta
        self.p = p

    def length(self, eta: int) -> int:
        regime = mppir_regime(self.n, self.gamma_total, eta)
        if regime == "mds":
            return mds_length(self.n)
        if regime == "ppir":
            return scheme_ppir.ppir_length(self.n, self.gamma_total)
        raise RegimeUnsupported(f"no fixed block length for regime {regime}")

    def prepare(self, omega, lam, rng, shuffle=True, s=None, offset=0):
        req = MppirRequest.make(self.n, self.gamma_total, omega, lam)
        if req.regime == "mds":
            r = draw_mds_randomness(rng, self.n, self.gamma_total, req.eta, self.delta, shuffle, s)
            return gen_queries_mppir(self.n, self.gamma_total, req.omega, lam, r, self.p, offset)
        if req.regime == "ppir":
            return scheme_ppir.PpirClient(self.n, self.gamma_total, self.delta).prepare(
                req.omega[0], rng, shuffle, s, offset
            )
        raise UnsupportedSingleDB("single-server retrieval goes through single_server_retrieve")

    def decode(self, transcript: Transcript, plan) -> dict[int, tuple[tuple[int, ...], ...]]:
        if isinstance(plan, MdsQueryPlan):
            return decode_with_mds_plan(transcript, plan)
        return {plan.canonical.desired: scheme_ppir.decode_with_plan(transcript, plan)}
