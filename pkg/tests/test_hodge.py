import pytest
from sympy import QQ

from frobhodge.catalog import change_divisor_basis, projective_product_module, random_polarizable_module
from frobhodge.errors import NotMaximallyUnipotent, NotPolarizable
from frobhodge.frobenius import q_form
from frobhodge.hodge import (NilpotentOrbit, check_framing_cone, check_max_unipotent, check_polarized_mhs,
                             cone_points, degree_filtration, direct_sum, graded_isomorphism,
                             hard_lefschetz_check, hodge_tate_grading, module_to_orbit, orbit_to_module,
                             weight_filtration)
from frobhodge.linalg import gram, identity, matrix_power, qq_matrix, same_span, to_qq, unit_vector


def e(n, i):
    return unit_vector(n, i)


def test_weight_filtration_of_single_block(e1):
    W = weight_filtration(e1.left_mult(1))
    assert W[-4] == []
    assert same_span(W[-3], [e(4, 3)], 4)
    assert same_span(W[-2], [e(4, 3)], 4)
    assert same_span(W[-1], [e(4, 2), e(4, 3)], 4)
    assert same_span(W[1], [e(4, 1), e(4, 2), e(4, 3)], 4)
    assert len(W[3]) == 4


def test_shifted_weight_filtration_is_degree_filtration(e1):
    W = weight_filtration(e1.left_mult(1)).shifted(-3)
    assert W == degree_filtration(e1)


def test_e1_limiting_mhs_is_polarized(e1):
    N = to_qq(e1.left_mult(1))
    Q = to_qq(q_form(e1))
    cert = check_polarized_mhs(hodge_tate_grading(e1), N, Q, 3)
    assert cert.passed
    assert [item.name for item in cert.items] == [
        'nilpotency', 'weight_filtration', 'hodge_orthogonality', 'positivity_l3']
    # (-1)^k Q(T0, N^3 T0) = 5
    S = gram(Q, [e(4, 0)], right=matrix_power(N, 3)) * QQ(-1)
    assert S.to_list() == [[QQ(5)]]


def test_negative_coupling_fails_positivity(e1_negative):
    N = e1_negative.left_mult(1)
    cert = check_polarized_mhs(hodge_tate_grading(e1_negative), N, q_form(e1_negative), 3)
    item = cert.item('positivity_l3')
    assert not item.passed
    assert item.witness == {'u': ['1', '0', '0', '0'], 'value': '-5', 'p': 3}
    assert item.detail == 'NegativeDefinite'


def test_literal_sign_flips_the_verdict(e1):
    cert = check_polarized_mhs(hodge_tate_grading(e1), e1.left_mult(1), q_form(e1), 3,
                               sign_calibration='literal')
    assert not cert.item('positivity_l3').passed


def test_e1_orbit(e1):
    orbit = module_to_orbit(e1)
    assert orbit.r == 1
    assert same_span(orbit.hodge[3], [e(4, 0)], 4)
    assert same_span(orbit.hodge[2], [e(4, 0), e(4, 1)], 4)
    assert len(orbit.hodge[0]) == 4
    assert orbit.hodge[4] == []
    assert check_max_unipotent(orbit).holds


def test_negative_coupling_is_not_polarizable(e1_negative):
    with pytest.raises(NotPolarizable) as exc:
        module_to_orbit(e1_negative)
    assert exc.value.witness['item'] == 'positivity_l3'


@pytest.mark.parametrize("M", [
    projective_product_module((1, 4)),
    projective_product_module((1, 1, 1)),
    projective_product_module((2, 2)),
    random_polarizable_module(seed=1, k=3),
    random_polarizable_module(seed=2, k=4),
    random_polarizable_module(seed=4, k=5),
])
def test_module_orbit_round_trip(M):
    assert orbit_to_module(module_to_orbit(M)) == M


def test_e1_orbit_round_trip(e1):
    assert orbit_to_module(module_to_orbit(e1)) == e1


@pytest.mark.parametrize("exponents, mixing", [
    ((1, 4), {(3, 4): 1}),
    ((2, 2), {(3, 4): 1, (4, 5): 1}),
])
def test_orbit_in_other_coordinates_gives_an_isomorphic_module(exponents, mixing):
    M = projective_product_module(exponents)
    g = identity(M.n).to_list()
    for (c, a), value in mixing.items():
        g[c][a] = QQ(value)
    orbit = module_to_orbit(M).change_coordinates(qq_matrix(g))
    recovered = orbit_to_module(orbit)
    assert recovered != M
    assert graded_isomorphism(recovered, M) is not None
    assert orbit_to_module(module_to_orbit(recovered)) == recovered


def test_graded_isomorphism_separates_modules(e1, e1_negative):
    assert graded_isomorphism(e1, e1).to_list() == identity(4).to_list()
    assert graded_isomorphism(e1, e1_negative) is None


def test_framing_ray_outside_the_closure_is_rejected():
    # T1 = -h1 + h2, T2 = 20 h1 on P1 x P2: the cone samples polarize, the ray T1 does not
    M = change_divisor_basis(projective_product_module((1, 2)), qq_matrix([[-1, 20], [1, 0]]))
    with pytest.raises(NotPolarizable) as exc:
        module_to_orbit(M, samples=0)
    assert exc.value.witness['ray'] == 1
    assert exc.value.witness['lambda'] == ['101/100', '1/100']


def test_boundary_rays_are_accepted(p1p4):
    # h1 alone does not polarize P1 x P4 but lies on the boundary of the cone
    N1 = to_qq(p1p4.left_mult(1))
    assert not check_polarized_mhs(hodge_tate_grading(p1p4), N1, to_qq(q_form(p1p4)), 5).passed
    assert module_to_orbit(p1p4, samples=0).r == 2


def test_direct_sum_is_not_maximally_unipotent(e1):
    orbit = module_to_orbit(e1)
    doubled = direct_sum(orbit, orbit)
    verdict = check_max_unipotent(doubled)
    assert not verdict.holds
    assert not next(c for c in verdict.checks if c.name == 'dim_top').passed
    with pytest.raises(NotMaximallyUnipotent):
        orbit_to_module(doubled)


def test_empty_framing_is_not_maximally_unipotent(e1):
    orbit = module_to_orbit(e1)
    bare = NilpotentOrbit(3, [], orbit.hodge, orbit.e, orbit.q)
    assert not check_max_unipotent(bare).holds


def test_hard_lefschetz(e1, p1p4):
    assert hard_lefschetz_check(e1, [1])
    assert hard_lefschetz_check(p1p4, [1, 1])
    assert hard_lefschetz_check(p1p4, [2, 3])
    cube = projective_product_module((1, 1, 1))
    assert not hard_lefschetz_check(cube, [1, -1, 0])


def test_cone_points_are_seeded():
    points = cone_points(2, seed=0, samples=5)
    assert len(points) == 8
    assert points[0] == [QQ(1), QQ(1)]
    assert points[1] == [QQ(10), QQ(1)]
    assert cone_points(2, seed=0, samples=5) == points
    assert cone_points(1, seed=0, samples=3)[0] == [QQ(1)]
    assert len(cone_points(1, seed=0, samples=3)) == 4


def test_framing_cone_is_consistent(p1p4):
    verdict = check_framing_cone(p1p4, seed=0, samples=3)
    assert verdict.consistent
    assert verdict.dependent == []
    assert verdict.polarization.passed
    assert verdict.samples[0] == ['1', '1']
