import random
from itertools import combinations, permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppir.errors import DivisionByZero, FieldTooSmall, ModulusMismatch, SingularMatrix
from ppir.gf import FieldElem, Matrix, check_modulus, field_arith, rs_generator, solve_mod, solve_square


def det_brute(rows, p):
    """Leibniz expansion; independent of the elimination code under test."""
    k = len(rows)
    total = 0
    for perm in permutations(range(k)):
        inversions = sum(1 for i in range(k) for j in range(i + 1, k) if perm[i] > perm[j])
        term = -1 if inversions % 2 else 1
        for r, c in enumerate(perm):
            term *= rows[r][c]
        total += term
    return total % p


def test_mul_mod_5():
    assert field_arith(FieldElem(3, 5), FieldElem(4, 5), "mul") == FieldElem(2, 5)


def test_add_zero_identity():
    for v in range(7):
        assert field_arith(FieldElem(v, 7), FieldElem(0, 7), "add") == FieldElem(v, 7)


def test_div_matches_scan():
    expected = next(c for c in range(5) if 3 * c % 5 == 2)
    assert field_arith(FieldElem(2, 5), FieldElem(3, 5), "div").value == expected == 4


def test_sub_and_neg():
    assert field_arith(FieldElem(1, 7), FieldElem(3, 7), "sub").value == 5
    assert (-FieldElem(3, 7)).value == 4


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        field_arith(FieldElem(1, 5), FieldElem(0, 5), "div")
    with pytest.raises(DivisionByZero):
        FieldElem(0, 5).inverse()


def test_modulus_mismatch():
    with pytest.raises(ModulusMismatch):
        field_arith(FieldElem(1, 5), FieldElem(1, 7), "add")


def test_unknown_op():
    with pytest.raises(ValueError):
        field_arith(FieldElem(1, 5), FieldElem(1, 5), "pow")


@pytest.mark.parametrize("p", [4, 1, 0, 91, 2**64 + 13])
def test_rejects_bad_modulus(p):
    with pytest.raises(ValueError):
        check_modulus(p)


@pytest.mark.parametrize("p", [2, 3, 5, 251, 257])
def test_inverse_exhaustive(p):
    for a in range(1, p):
        x = FieldElem(a, p)
        assert (x * x.inverse()).value == 1
        assert (x / x).value == 1


def test_values_reduced():
    assert FieldElem(12, 5).value == 2
    assert FieldElem(-1, 5).value == 4


def test_rs_generator_example():
    assert rs_generator(4, 2, 5).tolist() == [[1, 1, 1, 1], [0, 1, 2, 3]]


def test_rs_generator_single_row():
    assert rs_generator(3, 1, 5).tolist() == [[1, 1, 1]]


def test_rs_generator_pairs_invertible_f5():
    g = rs_generator(4, 2, 5)
    for cols in combinations(range(4), 2):
        assert det_brute(g.select_columns(cols).entries, 5) != 0


@pytest.mark.parametrize("gamma", range(1, 9))
def test_rs_generator_mds_exhaustive(gamma):
    p = 257
    for eta in range(1, gamma + 1):
        g = rs_generator(gamma, eta, p)
        for cols in combinations(range(gamma), eta):
            assert det_brute(g.select_columns(cols).entries, p) != 0


def test_rs_generator_field_too_small():
    with pytest.raises(FieldTooSmall):
        rs_generator(5, 2, 5)
    rs_generator(4, 2, 5)  # p = Γ + 1 is enough


def test_solve_identity():
    ident = Matrix(((1, 0, 0), (0, 1, 0), (0, 0, 1)), 7)
    assert [x.value for x in solve_square(ident, [3, 5, 6])] == [3, 5, 6]


def test_solve_upper_triangular():
    m = Matrix(((1, 1), (0, 1)), 5)
    assert [x.value for x in solve_square(m, [FieldElem(3, 5), FieldElem(2, 5)])] == [1, 2]


def test_solve_singular():
    with pytest.raises(SingularMatrix):
        solve_mod([[1, 2], [2, 4]], [1, 1], 7)


def test_solve_rhs_modulus_mismatch():
    with pytest.raises(ModulusMismatch):
        solve_square(Matrix(((1,),), 5), [FieldElem(1, 7)])


def test_solve_random_roundtrip():
    rng = random.Random(7)
    p = 257
    done = 0
    while done < 50:
        rows = [[rng.randrange(p) for _ in range(3)] for _ in range(3)]
        if det_brute(rows, p) == 0:
            continue
        m = Matrix(tuple(map(tuple, rows)), p)
        rhs = [rng.randrange(p) for _ in range(3)]
        x = [v.value for v in solve_square(m, rhs)]
        assert list(m.matvec(x)) == rhs
        done += 1


def test_permute_columns():
    g = rs_generator(4, 2, 5)
    assert g.permute_columns([0, 2, 1, 3]).tolist() == [[1, 1, 1, 1], [0, 2, 1, 3]]
    with pytest.raises(ValueError):
        g.permute_columns([0, 0, 1, 2])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 256), st.integers(0, 256), st.integers(1, 256))
def test_field_axioms(a, b, c):
    p = 257
    x, y, z = FieldElem(a, p), FieldElem(b, p), FieldElem(c, p)
    assert (x + y) * z == x * z + y * z
    assert (x - y) + y == x
    assert (x * z) / z == x
