import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixture_tables import TABLE_EX5, ex5_table, render
from ppir.capacity import ProblemConfig, mppir_upper_bound, single_server_capacity
from ppir.dataset import build_dataset, resolve_candidates, select_candidates_cyclic
from ppir.errors import InconsistentTranscript, LambdaTooLarge, RegimeUnsupported
from ppir.gf import rs_generator, solve_mod
from ppir.protocol import Query, Transcript, answer_queries, measure_rate
from ppir.scheme_mppir import (
    MdsRandomness,
    MppirClient,
    MppirRequest,
    answer_mppir,
    decode_mppir,
    draw_mds_randomness,
    gen_queries_mppir,
    mds_canonical_plan,
    mds_queries_per_database,
    mppir_regime,
    single_server_retrieve,
)


def run(ds, n, omega, lam, s, rng, shuffle=True):
    gamma = ds.classification.gamma_total
    r = draw_mds_randomness(rng, n, gamma, len(omega), ds.delta, shuffle, s)
    plan = gen_queries_mppir(n, gamma, omega, lam, r, ds.p)
    answers = tuple(answer_mppir(ds, s, qs, lam) for qs in plan.queries)
    return r, plan, Transcript("mppir", s, lam, ds.p, plan.queries, answers)


def expected(ds, s, omega, lam):
    return {c: tuple(ds.message(m) for m in select_candidates_cyclic(ds.classification, s, c, lam)) for c in omega}


def test_table_ex5():
    assert ex5_table() == TABLE_EX5


def test_table_ex5_default_field():
    plan = gen_queries_mppir(2, 4, (1, 3), 2, MdsRandomness.identity(13, 2, 4, (1, 3, 2, 4)))
    assert render(plan.queries) == TABLE_EX5


def test_gamma_equals_eta_has_no_side_info():
    plan = gen_queries_mppir(2, 2, (1, 2), 1, MdsRandomness.identity(1, 2, 2))
    for qs in plan.queries:
        round2 = qs[2:]
        assert len(round2) == 2
        assert all(t.symbol_index > 2 for q in round2 for t in q.terms)
    assert mppir_upper_bound(ProblemConfig(2, 2, 2)) == 1


def test_n3_gamma2_counts():
    plan = mds_canonical_plan(3, 2, (1,), [(1, 2), (2, 1)])
    for rounds in plan.rounds:
        assert rounds.count(1) == 2 and rounds.count(2) == 2
    assert Fraction(9, 3 * mds_queries_per_database(3, 2, 1)) == Fraction(3, 4)
    assert mppir_upper_bound(ProblemConfig(3, 2, 1)) == Fraction(3, 4)


def test_example_run():
    ds = build_dataset([4, 6, 10, 12], 4, seed=8)
    r, plan, tr = run(ds, 2, (1, 3), 2, 13, random.Random(0))
    assert tr.download_symbols == 24
    assert measure_rate(tr, 4, 4) == Fraction(2, 3)
    out = decode_mppir(tr, r, (1, 3), 2)
    assert out == {1: (ds.message(1), ds.message(2)), 3: (ds.message(13), ds.message(14))}


def test_answer_super_symbols():
    ds = build_dataset([4, 6, 10, 12], 4, seed=8)
    assert resolve_candidates(ds.classification, 13, 2)[3] == (23, 24)
    for i in range(1, 5):
        (ans,) = answer_mppir(ds, 13, [Query.of((1, i))], 2)
        assert ans == (ds.message(1)[i - 1], ds.message(2)[i - 1])


def test_lambda_one_matches_scalar_answers():
    ds = build_dataset([4, 6, 10, 12], 4, seed=8)
    qs = [Query.of((1, 1), (2, 3, 2)), Query.of((4, 4, 5))]
    assert answer_mppir(ds, 7, qs, 1) == answer_queries(ds, 7, qs, 1)


def test_lambda_too_large():
    ds = build_dataset([2, 3], 4)
    with pytest.raises(LambdaTooLarge):
        answer_mppir(ds, 1, [Query.of((1, 1))], 3)


def test_regime_unsupported_carries_bounds():
    with pytest.raises(RegimeUnsupported) as info:
        MppirRequest.make(2, 6, (1, 2), 1)
    assert info.value.capacity.upper == Fraction(4, 7)
    assert mppir_regime(2, 6, 2) == "unsupported"
    assert mppir_regime(2, 6, 1) == "ppir"
    assert mppir_regime(2, 6, 3) == "mds"
    assert mppir_regime(1, 6, 2) == "single_server"


def test_mds_solvability_exhaustive():
    for gamma in range(1, 7):
        for eta in range(1, gamma + 1):
            g = rs_generator(gamma, eta)
            for cols in combinations(range(gamma), eta):
                sub = g.select_columns(cols).entries
                solve_mod(sub, [1] * eta, 257)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("gamma", range(1, 6))
@pytest.mark.parametrize("lam", [1, 2, 3])
def test_rate_equals_bound(n, gamma, lam):
    sizes = tuple(3 + i for i in range(gamma))
    ds = build_dataset(sizes, n * n, seed=gamma)
    rng = random.Random(n * 100 + gamma)
    for eta in range((gamma + 1) // 2, gamma + 1):
        omega = tuple(range(1, eta + 1))
        _, _, tr = run(ds, n, omega, lam, rng.randint(1, ds.delta), rng)
        assert measure_rate(tr, n * n, lam * eta) == mppir_upper_bound(ProblemConfig(n, gamma, eta, lam))


def test_decodability_sweep():
    ds = build_dataset([4, 6, 10, 12], 4, seed=1)
    rng = random.Random(3)
    for omega in combinations(range(1, 5), 2):
        for lam in (1, 2):
            for s in range(1, 61):
                r, _, tr = run(ds, 2, omega, lam, s, rng)
                assert decode_mppir(tr, r, omega, lam) == expected(ds, s, omega, lam)


def test_decodability_n3():
    ds = build_dataset([2, 3, 4], 9, seed=2)
    rng = random.Random(1)
    for omega in [(1, 2), (2, 3), (1, 3), (1, 2, 3)]:
        for s in range(1, 13):
            r, _, tr = run(ds, 3, omega, 2, s, rng)
            assert decode_mppir(tr, r, omega, 2) == expected(ds, s, omega, 2)


def test_inconsistent_transcript():
    ds = build_dataset([4, 6, 10, 12], 4, seed=8)
    r, plan, tr = run(ds, 2, (1, 3), 2, 13, random.Random(0))
    with pytest.raises(InconsistentTranscript):
        decode_mppir(Transcript("mppir", 14, 2, ds.p, tr.queries, tr.answers), r, (1, 3), 2)


@pytest.mark.parametrize(
    "gamma,eta,lam,rate",
    [(2, 1, 1, Fraction(1, 2)), (4, 2, 3, Fraction(1, 2)), (3, 3, 1, Fraction(1))],
)
def test_single_server(gamma, eta, lam, rate):
    ds = build_dataset(tuple([3] * gamma), 5, seed=1)
    res = single_server_retrieve(ds, tuple(range(1, eta + 1)), lam, random.Random(0))
    assert res.rate == rate == single_server_capacity(ProblemConfig(1, gamma, eta, lam))
    assert res.messages == expected(ds, res.transcript.s, tuple(range(1, eta + 1)), lam)


def test_client_routes_eta_one_to_ppir():
    ds = build_dataset([4, 6, 10], 8, seed=5)
    client = MppirClient(2, 3, ds.delta)
    plan = client.prepare((2,), 2, random.Random(0), s=13)
    answers = tuple(answer_queries(ds, 13, qs, 2) for qs in plan.queries)
    tr = Transcript("ppir", 13, 2, ds.p, plan.queries, answers)
    assert client.decode(tr, plan) == expected(ds, 13, (2,), 2)
    assert measure_rate(tr, 8, 2) == Fraction(4, 7)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), st.integers(1, 5), st.data())
def test_random_mds_configs(n, gamma, data):
    eta = data.draw(st.integers((gamma + 1) // 2, gamma))
    omega = tuple(sorted(data.draw(st.sets(st.integers(1, gamma), min_size=eta, max_size=eta))))
    sizes = tuple(data.draw(st.lists(st.integers(1, 5), min_size=gamma, max_size=gamma)))
    lam = data.draw(st.integers(1, min(sizes)))
    ds = build_dataset(sizes, n * n, seed=data.draw(st.integers(0, 50)))
    s = data.draw(st.integers(1, ds.delta))
    r, _, tr = run(ds, n, omega, lam, s, random.Random(data.draw(st.integers(0, 10**6))))
    assert decode_mppir(tr, r, omega, lam) == expected(ds, s, omega, lam)
