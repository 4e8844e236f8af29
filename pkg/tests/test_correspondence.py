import pytest

from frobhodge.catalog import e1_potential, random_weight3_potential
from frobhodge.correspondence import (GammaTower, canonical_check, g_tower, gamma1_from_potential,
                                      potential_from_gamma, reconstruct_gamma, round_trip, tower_report)
from frobhodge.errors import NotCanonical, NotIntegrable
from frobhodge.potential import QuantumPotential
from frobhodge.scalars import rational, tau
from frobhodge.series import QSeries, SeriesMatrix


@pytest.fixture
def e1_tower(e1, e1_q):
    return reconstruct_gamma(e1, gamma1_from_potential(e1, e1_q))


def test_gamma_minus_one_of_e1(e1, e1_q):
    gamma1 = gamma1_from_potential(e1, e1_q)
    assert set(gamma1.entries) == {(2, 1)}
    assert gamma1.entry(2, 1) == QSeries.monomial((1,), tau ** 2, 1, 8)


def test_e1_tower_leading_terms(e1_tower):
    assert e1_tower[2].entry(2, 0)[(1,)] == tau
    assert e1_tower[2].entry(3, 1)[(1,)] == -tau
    assert e1_tower[3].entry(3, 0)[(1,)] == rational(-2)
    assert e1_tower.order == 8


def test_tower_report_passes(e1, e1_tower):
    report = tower_report(e1, e1_tower)
    assert report.passed
    assert canonical_check(e1, e1_tower)


def test_g_tower_starts_with_gamma_one(e1_tower):
    G = g_tower(e1_tower)
    assert G[1] == e1_tower[1]


def test_extract_weight3_series(e1, e1_q, e1_tower):
    phi = potential_from_gamma(e1, e1_tower)
    assert phi.weight3 == QSeries.variable(1, 1, 8)
    assert phi == e1_q


@pytest.mark.parametrize("coefficients", [{1: 1}, {1: 3, 2: 7}])
def test_e1_round_trip(e1, coefficients):
    result = round_trip(e1, e1_potential(coefficients, order=8, module=e1))
    assert result.holds
    assert result.mismatches == []


def test_random_weight3_round_trip(e1):
    phi = random_weight3_potential(seed=11, degree=6, order=8, module=e1)
    assert round_trip(e1, phi).holds


def test_p1p4_round_trip(p1p4, p1p4_phi):
    result = round_trip(p1p4, p1p4_phi)
    assert result.holds
    assert result.order == 4


def test_p1p4_extraction(p1p4, p1p4_phi):
    tower = reconstruct_gamma(p1p4, gamma1_from_potential(p1p4, p1p4_phi))
    phi = potential_from_gamma(p1p4, tower)
    assert phi.phi_a[6] == QSeries(2, 4, {(0, 1): 1, (0, 2): 1})
    assert phi.phi_ab[(4, 4)] == QSeries(2, 4, {(0, 1): 3})
    assert tower_report(p1p4, tower).passed


def test_round_trip_at_lower_order(e1):
    phi = e1_potential({1: 3, 2: 7}, order=8, module=e1)
    result = round_trip(e1, phi, order=1)
    assert result.holds
    assert result.order == 1


def test_zero_potential_gives_zero_tower(e1):
    tower = reconstruct_gamma(e1, gamma1_from_potential(e1, QuantumPotential.zero(e1, order=4)))
    assert all(tower[l].is_zero for l in range(1, 4))
    assert potential_from_gamma(e1, tower).is_zero


def test_perturbed_gamma_is_not_integrable(p1p4, p1p4_perturbed):
    with pytest.raises(NotIntegrable) as exc:
        reconstruct_gamma(p1p4, gamma1_from_potential(p1p4, p1p4_perturbed))
    assert exc.value.witness['a'] == 1
    assert exc.value.witness['d'] == 6


def test_extraction_needs_canonical_tower(e1):
    piece = SeriesMatrix(4, 1, 3, {(3, 2): QSeries.variable(1, 1, 3)})
    tower = GammaTower(e1, {1: piece})
    assert not canonical_check(e1, tower)
    with pytest.raises(NotCanonical):
        potential_from_gamma(e1, tower)


def test_gamma_breaking_q_is_rejected(e1):
    # T0 -> q T1 without the matching T2 -> q T3 term
    gamma1 = SeriesMatrix(4, 1, 4, {(1, 0): QSeries.variable(1, 1, 4)})
    with pytest.raises(NotCanonical) as exc:
        reconstruct_gamma(e1, gamma1)
    assert exc.value.witness == {'level': 1, 'entry': [0, 2], 'monomial': [1]}


def test_q_compatible_gamma_is_accepted(e1):
    q = QSeries.variable(1, 1, 4)
    gamma1 = SeriesMatrix(4, 1, 4, {(1, 0): q, (3, 2): q})
    tower = reconstruct_gamma(e1, gamma1)
    checks = tower_report(e1, tower).checks
    assert all(c.passed for c in checks if c.name.startswith('preserves_q'))
    assert tower[2].entry(2, 0)[(1,)] == -5 / tau
