"""Direct in-memory protocol runs (no wire encoding) for sweeps and audits."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .dataset import Dataset
from .protocol import Transcript, answer_queries
from .scheme_mppir import MdsQueryPlan, MppirClient, mppir_regime, single_server_retrieve
from .scheme_ppir import QueryPlan


@dataclass(frozen=True)
class LocalRun:
    plan: object
    transcript: Transcript
    messages: dict[int, tuple[tuple[int, ...], ...]]


def scheme_name(plan) -> str:
    return "mppir" if isinstance(plan, MdsQueryPlan) else "ppir"


def answer_plan(dataset: Dataset, plan, lam: int) -> Transcript:
    s = plan.randomness.s
    answers = tuple(answer_queries(dataset, s, qs, lam) for qs in plan.queries)
    return Transcript(scheme_name(plan), s, lam, dataset.p, plan.queries, answers)


def run_local(
    dataset: Dataset,
    n: int,
    omega: Sequence[int],
    lam: int = 1,
    rng: Optional[random.Random] = None,
    s: Optional[int] = None,
    shuffle: bool = True,
) -> LocalRun:
    """One retrieval of a single block of the dataset (offset 0)."""
    rng = rng or random.Random()
    gamma = dataset.classification.gamma_total
    if mppir_regime(n, gamma, len(omega)) == "single_server":
        res = single_server_retrieve(dataset, omega, lam, rng, s)
        return LocalRun(None, res.transcript, res.messages)
    client = MppirClient(n, gamma, dataset.delta, dataset.p)
    plan = client.prepare(tuple(omega), lam, rng, shuffle, s)
    if isinstance(plan, QueryPlan) and plan.canonical.length > dataset.length:
        raise ValueError(f"dataset messages hold {dataset.length} symbols, scheme needs {plan.canonical.length}")
    transcript = answer_plan(dataset, plan, lam)
    return LocalRun(plan, transcript, client.decode(transcript, plan))


def identify(dataset: Dataset, gamma: int, message: Sequence[int]) -> int:
    """Ground-truth oracle: which member of class γ has this symbol prefix."""
    hits = [
        m
        for m in dataset.classification.members(gamma)
        if dataset.message(m)[: len(message)] == tuple(message)
    ]
    if len(hits) != 1:
        raise LookupError(f"decoded message matches {len(hits)} members of class {gamma}")
    return hits[0]
