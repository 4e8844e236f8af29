import pytest
from sympy import QQ

from frobhodge.catalog import change_basis, e1_module, projective_product_module, random_polarizable_module
from frobhodge.errors import ShapeMismatch, UnsupportedWeight
from frobhodge.frobenius import (CubicPotential, FrobeniusModule, classical_potential, hodge_numbers,
                                 infinitesimal_automorphism, q_form, structure_constants_from_cubic,
                                 validate_module)
from frobhodge.linalg import identity, qq_matrix
from frobhodge.scalars import ONE, rational

E1_PAIRING = {(0, 3): 1, (3, 0): 1, (1, 2): 1, (2, 1): 1}


def test_e1_is_valid(e1):
    report = validate_module(e1)
    assert report.passed
    assert [c.name for c in report.checks] == [
        'unit', 'pairing_grading', 'pairing_symmetric', 'self_duality', 'degree_two_action',
        'unit_action', 'frobenius_condition', 'commutativity', 'realness', 'framing']


def test_frobenius_condition_witness():
    products = {(1, 0): {1: 1}, (1, 1): {2: 5}, (1, 2): {3: 2}}
    M = FrobeniusModule.from_data(3, [1, 1, 1, 1], E1_PAIRING, products, [1])
    check = validate_module(M).check('frobenius_condition')
    assert not check.passed
    assert check.witness == {'w': 1, 'v1': 2, 'v2': 0, 'lhs': '2', 'rhs': '1'}


def test_scaled_pairing_breaks_self_duality():
    pairing = {(0, 3): 1, (3, 0): 1, (1, 2): 2, (2, 1): 2}
    products = {(1, 0): {1: 1}, (1, 1): {2: 5}, (1, 2): {3: 1}}
    M = FrobeniusModule.from_data(3, [1, 1, 1, 1], pairing, products, [1])
    check = validate_module(M).check('self_duality')
    assert not check.passed
    assert check.witness['a'] == 1


def test_incomplete_framing_is_reported():
    M = projective_product_module((1, 2))
    partial = FrobeniusModule(M.k, M.degrees, M.pairing, M.products, [1])
    assert not validate_module(partial).check('framing').passed


def test_unsorted_basis_is_sorted_with_permutation(e1):
    # given order: T3, T0, T1, T2
    pairing = {(0, 1): 1, (1, 0): 1, (2, 3): 1, (3, 2): 1}
    products = {(2, 1): {2: 1}, (2, 2): {3: 5}, (2, 3): {0: 1}}
    M = FrobeniusModule.from_data(3, [1, 1, 1, 1], pairing, products, [2], degrees=[6, 0, 2, 4])
    assert M.permutation == (1, 2, 3, 0)
    assert M == e1


def test_dims_must_match_degrees():
    with pytest.raises(ShapeMismatch):
        FrobeniusModule.from_data(3, [1, 2, 1, 1], E1_PAIRING, {}, [1], degrees=[0, 2, 4, 6])


@pytest.mark.parametrize("k", [1, 2])
def test_low_weights_are_rejected(k):
    with pytest.raises(UnsupportedWeight):
        FrobeniusModule.from_data(k, [1] * (k + 1), {}, {}, [])


def test_classical_potential_of_e1(e1):
    phi0 = classical_potential(e1)
    assert phi0.monomial_coefficients() == {(1, 1, 1): rational(5, 6), (0, 1, 2): ONE}
    assert phi0.third_partial(1, 1, 1) == rational(5)
    assert phi0.second_partial(1, 2) == {0: ONE}


def test_cubic_from_coefficients_matches_classical(e1):
    cubic = CubicPotential.from_coefficients(4, {(1, 1, 1): rational(5, 6), (0, 1, 2): 1})
    assert cubic == classical_potential(e1)


@pytest.mark.parametrize("M", [
    e1_module(),
    projective_product_module((1, 4)),
    projective_product_module((2, 2)),
    random_polarizable_module(seed=3, k=3),
    random_polarizable_module(seed=5, k=4),
    random_polarizable_module(seed=7, k=5),
])
def test_structure_constants_round_trip(M):
    assert validate_module(M).passed
    assert structure_constants_from_cubic(M, classical_potential(M)) == M.products


def test_q_form_of_e1(e1):
    Q = q_form(e1)
    rows = Q.to_list()
    assert rows[0][3] == QQ(-1)
    assert rows[1][2] == QQ(1)
    assert rows[2][1] == QQ(-1)
    assert rows[3][0] == QQ(1)
    assert Q.transpose() == -Q


def test_products_preserve_q(e1):
    Q = q_form(e1)
    assert infinitesimal_automorphism(Q, e1.left_mult(1))


def test_delta_and_hodge_numbers(e1, p1p4):
    assert e1.delta == (3, 2, 1, 0)
    assert hodge_numbers(e1) == {0: 1, 1: 1, 2: 1, 3: 1}
    assert hodge_numbers(p1p4) == {0: 1, 1: 2, 2: 2, 3: 2, 4: 2, 5: 1}


def test_p1p4_layout(p1p4):
    assert p1p4.n == 10
    assert p1p4.dims == (1, 2, 2, 2, 2, 1)
    assert p1p4.framing == (1, 2)
    assert p1p4.labels[3] == 'h1*h2'


def _middle_isometry(n):
    # T'4 = T4 + T3, T'5 = T5 - T4 - 1/2 T3 on P2 x P2 keeps the middle Gram matrix
    g = identity(n).to_list()
    g[3][4] = QQ(1)
    g[4][5] = QQ(-1)
    g[3][5] = QQ(-1, 2)
    return qq_matrix(g)


def test_basis_change_keeps_the_ring():
    M = projective_product_module((2, 2))
    X = change_basis(M, _middle_isometry(M.n))
    assert X != M
    assert X.pairing == M.pairing
    assert validate_module(X).passed
    assert X.labels[3] == 'h1^2'
    assert X.labels[4] == "T'4"


def test_basis_change_must_preserve_degrees():
    M = projective_product_module((2, 2))
    g = identity(M.n).to_list()
    g[1][3] = QQ(1)
    with pytest.raises(ShapeMismatch) as exc:
        change_basis(M, qq_matrix(g))
    assert exc.value.witness == {'entry': [1, 3]}
