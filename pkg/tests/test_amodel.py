import pytest
from sympy import QQ

from frobhodge.amodel import (AModelConnection, FrameExpansion, _real_structure_item, canonical_frame,
                              curvature_check, flat_frame, local_monodromy_on_frame, monodromy,
                              pvhs_certificate, residue, untwisted_sections, verify_frame_lemmas)
from frobhodge.catalog import e1_potential
from frobhodge.errors import NotDivisorIndex, NotFlat
from frobhodge.linalg import nilpotency_index, qq_matrix
from frobhodge.potential import QuantumPotential
from frobhodge.scalars import ONE, tau
from frobhodge.series import LogPolySeries, QSeries, SeriesMatrix


def test_residue_of_e1(e1, e1_q):
    rows = residue(e1, e1_q, 1).to_list()
    assert rows[1][0] == ONE / tau
    assert rows[2][1] == 5 * ONE / tau
    assert rows[3][2] == ONE / tau
    assert rows[0][0] == 0


def test_residue_needs_framing_index(e1, e1_q):
    with pytest.raises(NotDivisorIndex):
        residue(e1, e1_q, 2)


def test_monodromy_of_e1(e1, e1_q):
    M1 = monodromy(e1, e1_q, 1)
    column = [row[0] for row in M1.to_list()]
    assert column == [QQ(1), QQ(-1), QQ(5, 2), QQ(-5, 6)]
    assert nilpotency_index(M1 - qq_matrix([[int(i == j) for j in range(4)] for i in range(4)])) == 4


def test_monodromy_ignores_quantum_corrections(e1, e1_q):
    assert monodromy(e1, e1_q, 1) == monodromy(e1, QuantumPotential.zero(e1, order=8), 1)


def test_connection_gauge_vanishes_at_zero(e1, e1_q):
    connection = AModelConnection(e1, e1_q)
    gauge = connection.gauge(1)
    assert all(s.vanishes_at_zero for s in gauge.entries.values())
    assert gauge.entry(2, 1) == QSeries.monomial((1,), tau ** 3, 1, 8)


def test_curvature_vanishes_for_wdvv_solution(p1p4, p1p4_phi):
    assert curvature_check(p1p4, p1p4_phi).holds


def test_e1_canonical_frame(e1, e1_q):
    Y = canonical_frame(e1, e1_q).matrix()
    assert Y.entry(0, 0) == QSeries.constant(1, 1, 8)
    assert Y.entry(1, 0).is_zero
    assert Y.entry(2, 0)[(1,)] == -tau
    assert Y.entry(3, 0)[(1,)] == 2 * ONE
    assert Y.entry(2, 1)[(1,)] == -tau ** 2
    assert Y.entry(3, 1)[(1,)] == tau
    assert Y.column(3) == {3: QSeries.constant(1, 1, 8)}


def test_flat_frame_is_flat(e1, e1_q):
    frame = flat_frame(e1, e1_q)
    connection = AModelConnection(e1, e1_q)
    assert connection.apply(1, frame.matrix()).is_zero
    assert not frame.matrix().is_pure


def test_flat_frame_needs_flat_connection(p1p4, p1p4_perturbed):
    with pytest.raises(NotFlat):
        flat_frame(p1p4, p1p4_perturbed)


def test_frame_lemmas_on_e1(e1, e1_q):
    cert = verify_frame_lemmas(e1, e1_q)
    assert cert.passed
    names = [item.name for item in cert.items]
    assert 'canonical_second_a0' in names
    assert 'canonical_top_a2' in names
    assert 'canonical_second_a1' not in names


def test_frame_lemmas_on_p1p4(p1p4, p1p4_phi):
    cert = verify_frame_lemmas(p1p4, p1p4_phi)
    assert cert.passed
    assert 'canonical_second_a3' in [item.name for item in cert.items]


def test_local_monodromy_is_multiplication(p1p4, p1p4_phi):
    for j in p1p4.framing:
        image = local_monodromy_on_frame(p1p4, p1p4_phi, j)
        assert image == SeriesMatrix.from_constant(p1p4.left_mult(j), 2, 4)


def test_local_monodromy_reads_the_frame(e1, e1_q):
    frame = flat_frame(e1, e1_q)
    doubled = FrameExpansion(frame.Y, [N * QQ(2) for N in frame.nilpotents], 'flat')
    image = local_monodromy_on_frame(e1, e1_q, 1, frame=doubled)
    assert image == SeriesMatrix.from_constant(e1.left_mult(1) * QQ(2), 1, 8)
    assert image != SeriesMatrix.from_constant(e1.left_mult(1), 1, 8)


def test_multivalued_frame_has_no_constant_transport(e1, e1_q):
    log_q = LogPolySeries(1, 8, {(1,): QSeries.variable(1, 1, 8)})
    Y = SeriesMatrix.identity(4, 1, 8) + SeriesMatrix(4, 1, 8, {(2, 0): log_q})
    with pytest.raises(NotFlat) as exc:
        local_monodromy_on_frame(e1, e1_q, 1, frame=FrameExpansion(Y, e1.framing_nilpotents(), 'flat'))
    assert exc.value.witness['j'] == 1


def test_untwisted_sections_match_the_flat_frame(p1p4, p1p4_phi):
    sigma = untwisted_sections(AModelConnection(p1p4, p1p4_phi))
    assert sigma == flat_frame(p1p4, p1p4_phi).Y


def test_untwisted_sections_of_e1(e1, e1_q):
    sigma = untwisted_sections(AModelConnection(e1, e1_q))
    assert sigma.entry(2, 0)[(1,)] == -tau
    assert sigma.entry(3, 1)[(1,)] == tau


def test_real_structure_rejects_a_frame_of_another_potential(e1, e1_q):
    other = e1_potential({1: 7, 2: -3}, order=8, module=e1)
    item = _real_structure_item(e1, e1_q, flat_frame(e1, other))
    assert not item.passed
    assert 'entry' in item.witness
    assert _real_structure_item(e1, e1_q, flat_frame(e1, e1_q)).passed


def test_pvhs_certificate_on_e1(e1, e1_q):
    cert = pvhs_certificate(e1, e1_q, seed=0, samples=2)
    assert [item.name for item in cert.items] == [
        'limiting_mhs', 'flatness', 'pairing_flatness', 'transversality', 'real_structure', 'frame_agreement']
    assert cert.passed


def test_pvhs_certificate_records_failures(p1p4, p1p4_perturbed):
    cert = pvhs_certificate(p1p4, p1p4_perturbed, seed=0, samples=2)
    assert not cert.passed
    assert cert.item('limiting_mhs').passed
    assert not cert.item('flatness').passed
    assert cert.item('frame_agreement').detail.startswith('NotFlat')


def test_pvhs_limiting_mhs_fails_for_negative_coupling(e1_negative):
    phi = QuantumPotential.zero(e1_negative, order=3)
    cert = pvhs_certificate(e1_negative, phi, seed=0, samples=1)
    assert not cert.item('limiting_mhs').passed
    assert cert.item('flatness').passed
