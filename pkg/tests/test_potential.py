import pytest

from frobhodge.amodel import curvature_check
from frobhodge.catalog import e1_potential
from frobhodge.correspondence import gamma1_from_potential, integrability_check
from frobhodge.errors import NotDivisorIndex, ShapeMismatch
from frobhodge.potential import (QuantumPotential, deformed_product_report, product_matrix, quantum_product,
                                 validate_potential, wdvv_check)
from frobhodge.scalars import tau
from frobhodge.series import QSeries


def test_quantum_product_on_e1(e1, e1_q):
    assert quantum_product(e1, e1_q, 1, 1) == {2: QSeries(1, 8, {(0,): 5, (1,): tau ** 3})}
    assert quantum_product(e1, e1_q, 1, 2) == {3: QSeries.constant(1, 1, 8)}
    assert quantum_product(e1, e1_q, 1, 0) == {1: QSeries.constant(1, 1, 8)}


def test_quantum_product_needs_divisor(e1, e1_q):
    with pytest.raises(NotDivisorIndex):
        quantum_product(e1, e1_q, 2, 0)


def test_hbar_partials_of_weight3_series(e1, e1_q):
    assert e1_q.hbar_partial() == QSeries.variable(1, 1, 8)
    assert e1_q.hbar_partial(1, 1) == QSeries.monomial((1,), tau ** 2, 1, 8)
    assert e1_q.hbar_partial(0).is_zero


def test_phi_ab_partner_is_filled(p1p4, p1p4_phi):
    assert p1p4_phi.phi_ab[(4, 4)] == QSeries(2, 4, {(0, 1): 3})
    potential = QuantumPotential(p1p4, phi_ab={(3, 4): QSeries(2, 4, {(1, 0): 1})}, order=4)
    assert potential.phi_ab[(4, 3)] == potential.phi_ab[(3, 4)]
    # phi^{34} enters phi_hbar as z3 z4 phi^{34} + z4 z3 phi^{43}
    assert potential.hbar_partial(3, 4) == QSeries(2, 4, {(1, 0): 2})


def test_potential_series_must_match_order(e1):
    with pytest.raises(ShapeMismatch):
        QuantumPotential(e1, weight3=QSeries.variable(1, 1, 5), order=8)


def test_validate_potential(e1, e1_q):
    assert validate_potential(e1, e1_q).passed
    bad = e1_potential({0: 1, 1: 1}, order=8, module=e1)
    check = validate_potential(e1, bad).check('vanishing_at_zero')
    assert not check.passed
    assert check.witness == {'series': 'weight3', 'constant': '1'}


def test_validate_potential_index_rules(p1p4):
    # phi^a needs deg a = 2k - 4
    wrong = QuantumPotential(p1p4, phi_a={3: QSeries(2, 4, {(0, 1): 1})}, order=4)
    check = validate_potential(p1p4, wrong).check('index_range')
    assert not check.passed
    assert check.witness == {'a': 3, 'degree': 4}


def test_asymmetric_phi_ab_is_reported(p1p4):
    phi = QuantumPotential(p1p4, phi_ab={(3, 4): QSeries(2, 4, {(1, 0): 1}),
                                         (4, 3): QSeries(2, 4, {(1, 0): 2})}, order=4)
    check = validate_potential(p1p4, phi).check('symmetry')
    assert not check.passed
    assert check.witness == {'ab': [3, 4]}


def test_weight3_series_only_for_weight_three(p1p4):
    phi = QuantumPotential(p1p4, weight3=QSeries(2, 4, {(1, 0): 1}), order=4)
    assert not validate_potential(p1p4, phi).check('weight3_usage').passed


def test_deformed_product_report(e1, e1_q, p1p4, p1p4_phi):
    assert deformed_product_report(e1, e1_q).passed
    assert deformed_product_report(p1p4, p1p4_phi).passed


def test_wdvv_holds_for_p1p4(p1p4, p1p4_phi):
    verdict = wdvv_check(p1p4, p1p4_phi)
    assert verdict.holds
    assert verdict.order == 4
    assert verdict.violations == []


def test_wdvv_violation_witness(p1p4, p1p4_perturbed):
    verdict = wdvv_check(p1p4, p1p4_perturbed)
    assert not verdict.holds
    first = verdict.first
    assert (first.j, first.l, first.a, first.d) == (1, 2, 1, 6)
    assert first.monomial == [1, 0]


def test_wdvv_is_thread_count_independent(p1p4, p1p4_perturbed):
    serial = wdvv_check(p1p4, p1p4_perturbed, n_jobs=1)
    threaded = wdvv_check(p1p4, p1p4_perturbed, n_jobs=2)
    assert serial == threaded


def test_single_variable_wdvv_is_vacuous(e1):
    verdict = wdvv_check(e1, e1_potential({1: 3, 2: 7}, order=6, module=e1))
    assert verdict.holds


@pytest.mark.parametrize("perturbed", [False, True])
def test_wdvv_integrability_and_curvature_agree(p1p4, p1p4_phi, p1p4_perturbed, perturbed):
    phi = p1p4_perturbed if perturbed else p1p4_phi
    wdvv = wdvv_check(p1p4, phi)
    integrability = integrability_check(p1p4, gamma1_from_potential(p1p4, phi))
    curvature = curvature_check(p1p4, phi)
    assert wdvv.holds == integrability.holds == curvature.holds == (not perturbed)
    assert wdvv.violations == integrability.violations == curvature.violations


def test_product_matrix_classical_limit(e1):
    A = product_matrix(e1, QuantumPotential.zero(e1, order=3), 1)
    assert A.is_constant
    assert A.entry(2, 1) == QSeries.constant(5, 1, 3)
