"""Exact privacy audit by enumeration of the client's randomness.

A database's view is its query list; answers are a deterministic function of
(queries, s, data) and s is drawn independently of the desired classes, so the
query marginal is what has to match across class sets. The shared number s is
left out of the compared transcript for that reason.

Two enumeration modes:

raw
    every combination of symbol permutations (and MDS column permutations, and
    the database's send order when shuffling) is an equally likely atom.
quotient
    the transcript distribution for a fixed column permutation is uniform on the
    orbit of the canonical query list under per-candidate relabelling, so it is
    summarised by the orbit's canonical form. Equal quotient distributions imply
    equal raw distributions. Feasible where raw enumeration is not (Γ=3, L=8).
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from typing import Optional, Sequence

from .dataset import Dataset
from .errors import BudgetExceeded
from .gf import DEFAULT_MODULUS
from .scheme_mppir import mds_canonical_plan, mds_length
from .scheme_ppir import canonical_plan, ppir_length
from .simulate import identify, run_local

DEFAULT_BUDGET = 10**7

Term = tuple[int, int, int]
RawQuery = tuple[Term, ...]
TranscriptKey = tuple

NOTES = (
    "s is excluded from compared transcripts: it is drawn uniformly from [delta] independently of omega",
    "answers are a deterministic function of (queries, s, dataset), so equal query marginals certify privacy",
)


@dataclass(frozen=True)
class AuditConfig:
    scheme: str  # "ppir" or "mppir"
    n: int
    gamma_total: int
    eta: int = 1
    lam: int = 1
    p: int = DEFAULT_MODULUS
    shuffle: bool = True
    quotient: bool = False
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.scheme not in ("ppir", "mppir"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "ppir" and self.eta != 1:
            raise ValueError("the PPIR scheme has eta = 1")

    @property
    def length(self) -> int:
        if self.scheme == "ppir":
            return ppir_length(self.n, self.gamma_total)
        return mds_length(self.n)

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "n": self.n,
            "gamma": self.gamma_total,
            "eta": self.eta,
            "lambda": self.lam,
            "p": self.p,
            "L": self.length,
            "shuffle": self.shuffle,
            "mode": "quotient" if self.quotient else "raw",
        }


@dataclass(frozen=True)
class TranscriptDistribution:
    probs: dict

    def __post_init__(self):
        total = sum(self.probs.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, key):
        return self.probs.get(key, Fraction(0))

    @classmethod
    def from_counts(cls, counts: Counter) -> TranscriptDistribution:
        total = sum(counts.values())
        return cls({k: Fraction(v, total) for k, v in counts.items()})


def privacy_distance(d1: TranscriptDistribution, d2: TranscriptDistribution) -> Fraction:
    """Total variation distance ½ Σ |p − q|, exact."""
    keys = set(d1.probs) | set(d2.probs)
    return sum((abs(d1[k] - d2[k]) for k in keys), Fraction(0)) / 2


# -- canonical per-database query lists -------------------------------------


def _db_structure(cfg: AuditConfig, omega: Sequence[int], db: int, column_perms=None):
    """(canonical queries as (c, U-index, coeff) terms, round labels) at database ``db`` (0-based)."""
    if cfg.scheme == "ppir":
        plan = canonical_plan(cfg.n, cfg.gamma_total, omega[0])
        qs = tuple(tuple((c, i, 1) for c, i in q) for q in plan.queries[db])
        return qs, plan.rounds[db]
    plan = mds_canonical_plan(cfg.n, cfg.gamma_total, omega, column_perms, cfg.p)
    return plan.queries[db], plan.rounds[db]


def _column_perm_atoms(cfg: AuditConfig):
    if cfg.scheme == "ppir":
        return [None]
    perms = list(permutations(range(1, cfg.gamma_total + 1)))
    return list(product(perms, repeat=cfg.n - 1))


def _key(queries: Sequence[RawQuery], rounds: Sequence[int], shuffle: bool) -> TranscriptKey:
    if shuffle:
        return tuple(queries)
    by_round: dict[int, list] = {}
    for q, r in zip(queries, rounds):
        by_round.setdefault(r, []).append(q)
    return tuple(tuple(sorted(by_round[r])) for r in sorted(by_round))


def raw_atom_count(cfg: AuditConfig) -> int:
    k = len(_db_structure(cfg, tuple(range(1, cfg.eta + 1)), 0, _first_cp(cfg))[0])
    atoms = math.factorial(cfg.length) ** cfg.gamma_total * len(_column_perm_atoms(cfg))
    if cfg.shuffle:
        atoms *= math.factorial(k)
    return atoms


def _first_cp(cfg):
    return _column_perm_atoms(cfg)[0]


def _raw_distribution(cfg: AuditConfig, omega, db) -> TranscriptDistribution:
    atoms = raw_atom_count(cfg)
    if atoms > cfg.budget:
        raise BudgetExceeded(f"raw enumeration needs {atoms} atoms, budget {cfg.budget}")
    length = cfg.length
    all_perms = list(permutations(range(1, length + 1)))
    counts: Counter = Counter()
    for cps in _column_perm_atoms(cfg):
        canon, rounds = _db_structure(cfg, omega, db, cps)
        k = len(canon)
        orders = list(permutations(range(k))) if cfg.shuffle else [tuple(range(k))]
        for perms in product(all_perms, repeat=cfg.gamma_total):
            realized = [tuple((c, perms[c - 1][i - 1], a) for c, i, a in q) for q in canon]
            if cfg.shuffle:
                for order in orders:
                    counts[tuple(realized[t] for t in order)] += 1
            else:
                counts[_key(realized, rounds, False)] += 1
    return TranscriptDistribution.from_counts(counts)


def relabel_count(queries: Sequence[RawQuery]) -> int:
    used: dict[int, set] = {}
    for q in queries:
        for c, i, _ in q:
            used.setdefault(c, set()).add(i)
    return math.prod(math.factorial(len(v)) for v in used.values())


def orbit_canonical_form(queries: Sequence[RawQuery], rounds: Sequence[int], shuffle: bool) -> TranscriptKey:
    """Lexicographically least relabelled-and-sorted form over all per-candidate relabellings."""
    used: dict[int, list[int]] = {}
    for q in queries:
        for c, i, _ in q:
            used.setdefault(c, [])
            if i not in used[c]:
                used[c].append(i)
    cands = sorted(used)
    best = None
    for images in product(*(permutations(range(1, len(used[c]) + 1)) for c in cands)):
        maps = {c: dict(zip(used[c], img)) for c, img in zip(cands, images)}
        relabelled = [tuple((c, maps[c][i], a) for c, i, a in q) for q in queries]
        form = tuple(sorted(relabelled)) if shuffle else _key(relabelled, rounds, False)
        if best is None or form < best:
            best = form
    return best


def _quotient_distribution(cfg: AuditConfig, omega, db) -> TranscriptDistribution:
    cps_atoms = _column_perm_atoms(cfg)
    counts: Counter = Counter()
    for cps in cps_atoms:
        canon, rounds = _db_structure(cfg, omega, db, cps)
        work = relabel_count(canon) * len(cps_atoms)
        if work > cfg.budget:
            raise BudgetExceeded(f"quotient canonical form needs {work} relabellings, budget {cfg.budget}")
        counts[orbit_canonical_form(canon, rounds, cfg.shuffle)] += 1
    return TranscriptDistribution.from_counts(counts)


def enumerate_query_distribution(cfg: AuditConfig, omega: Sequence[int], db: int = 0) -> TranscriptDistribution:
    """Exact distribution of database ``db``'s (0-based) query list when the user wants ``omega``."""
    omega = tuple(omega)
    if len(omega) != cfg.eta:
        raise ValueError(f"omega {omega} has size != eta={cfg.eta}")
    if cfg.quotient:
        return _quotient_distribution(cfg, omega, db)
    return _raw_distribution(cfg, omega, db)


@dataclass(frozen=True)
class PairResult:
    omega_a: tuple[int, ...]
    omega_b: tuple[int, ...]
    db: int
    tvd: Fraction


@dataclass(frozen=True)
class AuditReport:
    config: AuditConfig
    pairs: tuple[PairResult, ...]
    notes: tuple[str, ...] = field(default=NOTES)

    @property
    def verdict(self) -> str:
        return "PASS" if all(pr.tvd == 0 for pr in self.pairs) else "FAIL"

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "pairs": [
                {
                    "omega_a": list(pr.omega_a),
                    "omega_b": list(pr.omega_b),
                    "db": pr.db + 1,
                    "tvd_num": pr.tvd.numerator,
                    "tvd_den": pr.tvd.denominator,
                }
                for pr in self.pairs
            ],
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def audit_privacy(cfg: AuditConfig) -> AuditReport:
    """Compare every pair of desired class sets at every database."""
    sets = list(combinations(range(1, cfg.gamma_total + 1), cfg.eta))
    pairs = []
    for db in range(cfg.n):
        dists = {om: enumerate_query_distribution(cfg, om, db) for om in sets}
        for a, b in combinations(sets, 2):
            pairs.append(PairResult(a, b, db, privacy_distance(dists[a], dists[b])))
    return AuditReport(cfg, tuple(pairs))


# -- sampling (can only refute) ----------------------------------------------


def query_shape(queries: Sequence) -> tuple:
    """Relabelling-invariant fingerprint: sorted (term count, coefficient multiset) per query."""
    return tuple(sorted((len(q.terms), tuple(sorted(t.coeff for t in q.terms))) for q in queries))


@dataclass(frozen=True)
class SamplingReport:
    statistic: float
    p_value: float
    verdict: str  # "FAIL" or "NO_EVIDENCE"; sampling never certifies


def sample_privacy_check(
    dataset: Dataset,
    n: int,
    eta: int,
    lam: int = 1,
    samples: int = 200,
    alpha: float = 1e-3,
    rng: Optional[random.Random] = None,
    db: int = 0,
) -> SamplingReport:
    """Chi-square homogeneity test of query shapes across all desired sets."""
    from scipy.stats import chi2_contingency

    rng = rng or random.Random(0)
    gamma = dataset.classification.gamma_total
    sets = list(combinations(range(1, gamma + 1), eta))
    tables = []
    for om in sets:
        c = Counter(query_shape(run_local(dataset, n, om, lam, rng).transcript.queries[db]) for _ in range(samples))
        tables.append(c)
    keys = sorted(set().union(*tables))
    if len(keys) < 2:
        return SamplingReport(0.0, 1.0, "NO_EVIDENCE")
    table = [[t[k] for k in keys] for t in tables]
    stat, pval, _, _ = chi2_contingency(table)
    return SamplingReport(float(stat), float(pval), "FAIL" if pval < alpha else "NO_EVIDENCE")


# -- retrieval uniformity ----------------------------------------------------


@dataclass(frozen=True)
class UniformityReport:
    gamma: int
    delta: int
    class_size: int
    counts: dict[tuple[int, ...], int]

    @property
    def expected(self) -> int:
        return self.delta // self.class_size

    @property
    def verdict(self) -> str:
        ok = len(self.counts) == self.class_size and all(v == self.expected for v in self.counts.values())
        return "PASS" if ok else "FAIL"

    def first_member_counts(self) -> dict[int, int]:
        out: Counter = Counter()
        for k, v in self.counts.items():
            out[k[0]] += v
        return dict(out)


def retrieval_uniformity(
    dataset: Dataset,
    gamma: int,
    lam: int = 1,
    n: int = 2,
    rng: Optional[random.Random] = None,
    budget: int = 10**5,
) -> UniformityReport:
    """Run a real retrieval of class γ for every s ∈ [δ] and tally which members came back.

    Members are identified against the dataset (oracle access the client lacks).
    """
    delta = dataset.delta
    if delta > budget:
        raise BudgetExceeded(f"delta={delta} exceeds budget {budget}")
    rng = rng or random.Random(0)
    counts: Counter = Counter()
    for s in range(1, delta + 1):
        run = run_local(dataset, n, (gamma,), lam, rng, s=s)
        got = tuple(identify(dataset, gamma, msg) for msg in run.messages[gamma])
        counts[got] += 1
    return UniformityReport(gamma, delta, dataset.classification.size(gamma), dict(counts))
