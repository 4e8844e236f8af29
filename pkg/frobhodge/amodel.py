"""
The A-model connection of a quantum potential

In z-coordinates the connection is nabla_j = D_j + A_j with A_j the matrix of
T_j *_q. A flat frame is Phi = Y exp(-sum_j z_j N_j) with Y(0) = Id; Y itself
is the canonical-extension frame.
"""

from itertools import product
from typing import Dict, List, Optional, Sequence

from sympy.polys.matrices import DomainMatrix

from .correspondence import gamma1_from_potential, reconstruct_gamma
from .errors import FrobHodgeError, NotFlat
from .frobenius import FrobeniusModule, q_form
from .hodge import module_to_orbit
from .linalg import exp_nilpotent, is_zero_matrix, to_qq, to_tau
from .models import Certificate, CheckResult, CommutatorVerdict
from .potential import QuantumPotential, commutator_check, product_matrix
from .runlog import log
from .scalars import ONE, TAU_DOMAIN, tau
from .series import Exponent, LogPolySeries, QSeries, SeriesMatrix, degree_key, monomial_witness


class AModelConnection:
    """nabla_j = D_j + A_j on the trivial bundle with fiber V; j is the q-variable."""

    def __init__(self, module: FrobeniusModule, phi: QuantumPotential):
        self.module = module
        self.phi = phi
        self.r = phi.r
        self.order = phi.order
        self.matrices: Dict[int, SeriesMatrix] = {
            position: product_matrix(module, phi, j) for position, j in enumerate(module.framing, start=1)
        }
        self.nilpotents: Dict[int, SeriesMatrix] = {
            position: SeriesMatrix.from_constant(module.left_mult(j), self.r, self.order)
            for position, j in enumerate(module.framing, start=1)
        }

    def gauge(self, position: int) -> SeriesMatrix:
        """Gamma_j = A_j - N_j, vanishing at q = 0."""
        return self.matrices[position] - self.nilpotents[position]

    def curvature(self, j: int, l: int) -> SeriesMatrix:
        A_j, A_l = self.matrices[j], self.matrices[l]
        return A_l.dz_derive(j) - A_j.dz_derive(l) + A_j @ A_l - A_l @ A_j

    def apply(self, position: int, sections: SeriesMatrix) -> SeriesMatrix:
        """nabla_j applied to each column."""
        return sections.dz_derive(position) + self.matrices[position] @ sections

    def twist(self, sign: int = -1) -> SeriesMatrix:
        """exp(sign * sum_j z_j N_j)."""
        n = self.module.n
        if self.r == 0:
            return SeriesMatrix.identity(n, 0, self.order)
        return SeriesMatrix.z_linear(self.module.framing_nilpotents(), self.r, self.order, sign).exp_nilpotent()


class FrameExpansion:
    """Y with Y(0) = Id; kind 'flat' means the frame Y exp(-sum z_j N_j), 'canonical' means Y."""

    def __init__(self, Y: SeriesMatrix, nilpotents: Sequence[DomainMatrix], kind: str):
        if kind not in ('flat', 'canonical'):
            raise ValueError(f"unknown frame kind {kind!r}")
        self.Y = Y
        self.nilpotents = list(nilpotents)
        self.kind = kind

    def matrix(self) -> SeriesMatrix:
        if self.kind == 'canonical' or not self.nilpotents:
            return self.Y
        twist = SeriesMatrix.z_linear(self.nilpotents, self.Y.r, self.Y.order, -1).exp_nilpotent()
        return self.Y @ twist

    def columns(self) -> Dict[int, Dict[int, object]]:
        frame = self.matrix()
        return {a: frame.column(a) for a in range(frame.size)}

    def __repr__(self) -> str:
        return f"FrameExpansion({self.kind}, {self.Y!r})"


# ============================================================
# Residue, curvature, monodromy
# ============================================================

def residue(M: FrobeniusModule, phi: QuantumPotential, j: int) -> DomainMatrix:
    """tau^-1 times the matrix of third partials of phi_0 with T_j."""
    M.position(j)
    delta = M.delta
    rows = [[TAU_DOMAIN.zero] * M.n for _ in range(M.n)]
    for a in range(M.n):
        for c in M.indices_of_degree(M.degrees[a] + 2):
            rows[c][a] = phi.phi0.third_partial(j, a, delta[c]) / tau
    return DomainMatrix(rows, (M.n, M.n), TAU_DOMAIN)


def curvature_check(M: FrobeniusModule, phi: QuantumPotential, n_jobs: Optional[int] = None) -> CommutatorVerdict:
    """[nabla_j, nabla_l] = 0 for all j < l."""
    connection = AModelConnection(M, phi)
    return commutator_check("curvature", connection.curvature, M, phi.order, n_jobs)


def monodromy(M: FrobeniusModule, phi: QuantumPotential, j: int) -> DomainMatrix:
    """M_j = exp(-tau * residue_j), a rational unipotent matrix."""
    return exp_nilpotent(-to_qq(residue(M, phi, j) * tau))


# ============================================================
# Frames
# ============================================================

def _coefficient_matrices(S: SeriesMatrix) -> Dict[Exponent, DomainMatrix]:
    rows: Dict[Exponent, List[List]] = {}
    n = S.size
    for (i, j), s in S.as_pure().entries.items():
        for m, c in s.coeffs.items():
            if m not in rows:
                rows[m] = [[TAU_DOMAIN.zero] * n for _ in range(n)]
            rows[m][i][j] = c
    return {m: DomainMatrix(r, (n, n), TAU_DOMAIN) for m, r in rows.items()}


def _assemble(coefficients: Dict[Exponent, DomainMatrix], n: int, r: int, order: int) -> SeriesMatrix:
    entries: Dict[tuple, Dict[Exponent, object]] = {}
    for m, mat in coefficients.items():
        for i, row in enumerate(mat.to_list()):
            for j, c in enumerate(row):
                if c:
                    entries.setdefault((i, j), {})[m] = c
    return SeriesMatrix(n, r, order, {k: QSeries(r, order, v) for k, v in entries.items()})


def _monomials(r: int, order: int) -> List[Exponent]:
    out = [m for m in product(range(order + 1), repeat=r) if 0 < sum(m) <= order]
    return sorted(out, key=degree_key)


def _solve_frame(connection: AModelConnection) -> SeriesMatrix:
    """
    Order-by-order solution of D_j Y = Y N_j - N_j Y - Gamma_j Y, Y(0) = Id.

    Summed over j, the coefficient of q^m satisfies
    tau |m| Y_m - (Y_m N - N Y_m) = -(sum_j Gamma_j Y)_m with N = sum_j N_j,
    inverted by a finite Neumann series in the nilpotent ad-operator.
    """
    M = connection.module
    n, r, D = M.n, connection.r, connection.order
    N = DomainMatrix.zeros((n, n), TAU_DOMAIN)
    for j in M.framing:
        N = N + to_tau(M.left_mult(j))
    gauges = [_coefficient_matrices(connection.gauge(p)) for p in range(1, r + 1)]
    Y: Dict[Exponent, DomainMatrix] = {(0,) * r: DomainMatrix.eye(n, TAU_DOMAIN)}
    for m in _monomials(r, D):
        rhs = DomainMatrix.zeros((n, n), TAU_DOMAIN)
        for gauge in gauges:
            for m1, G in gauge.items():
                m2 = tuple(a - b for a, b in zip(m, m1))
                if min(m2) < 0 or m2 not in Y:
                    continue
                rhs = rhs - G * Y[m2]
        if is_zero_matrix(rhs):
            continue
        inverse = ONE / (tau * sum(m))
        term = rhs * inverse
        total = term
        while True:
            term = (term * N - N * term) * inverse
            if is_zero_matrix(term):
                break
            total = total + term
        Y[m] = total
    return _assemble(Y, n, r, D)


def untwisted_sections(connection: AModelConnection) -> SeriesMatrix:
    """
    Sections sigma_a with sigma_a(0) = T_a, as columns, flat for
    nabla~ = nabla - tau^-1 sum_j N_j dq_j / q_j.

    The residue term acts on the label: nabla~_j sigma_v = D_j sigma_v +
    A_j sigma_v - sigma_{N_j v}. Each q^m coefficient is solved from the
    equation of the first variable with m_j > 0 alone,
    tau m_j S_m - (S_m N_j - N_j S_m) = -(Gamma_j S)_m.
    """
    M = connection.module
    n, r, D = M.n, connection.r, connection.order
    nilpotents = {p: to_tau(M.left_mult(j)) for p, j in enumerate(M.framing, start=1)}
    gauges = {p: _coefficient_matrices(connection.gauge(p)) for p in nilpotents}
    S: Dict[Exponent, DomainMatrix] = {(0,) * r: DomainMatrix.eye(n, TAU_DOMAIN)}
    for m in _monomials(r, D):
        p = next(i for i, e in enumerate(m, start=1) if e)
        rhs = DomainMatrix.zeros((n, n), TAU_DOMAIN)
        for m1, G in gauges[p].items():
            m2 = tuple(a - b for a, b in zip(m, m1))
            if min(m2) < 0 or m2 not in S:
                continue
            rhs = rhs - G * S[m2]
        if is_zero_matrix(rhs):
            continue
        N = nilpotents[p]
        inverse = ONE / (tau * m[p - 1])
        term = rhs * inverse
        total = term
        while True:
            term = (term * N - N * term) * inverse
            if is_zero_matrix(term):
                break
            total = total + term
        S[m] = total
    return _assemble(S, n, r, D)


def flatness_residual(connection: AModelConnection, frame: FrameExpansion) -> Dict[int, SeriesMatrix]:
    """nabla_j applied to the flat frame, per q-variable; zero when flat."""
    Phi = FrameExpansion(frame.Y, frame.nilpotents, 'flat').matrix()
    return {p: connection.apply(p, Phi) for p in range(1, connection.r + 1)}


def flat_frame(M: FrobeniusModule, phi: QuantumPotential) -> FrameExpansion:
    """Flat frame Y exp(-sum z_j N_j); NotFlat if some nabla_j does not annihilate it."""
    connection = AModelConnection(M, phi)
    frame = FrameExpansion(_solve_frame(connection), M.framing_nilpotents(), 'flat')
    for position, residual in flatness_residual(connection, frame).items():
        hit = residual.first_nonzero()
        if hit is not None:
            (row, col), s = hit
            raise NotFlat(f"nabla_{position} does not annihilate the frame",
                          witness={'j': position, 'entry': [row, col], 'monomial': monomial_witness(s)})
    log(f"flat frame: {len(frame.Y.entries)} nonzero entries up to order {phi.order}")
    return frame


def canonical_frame(M: FrobeniusModule, phi: QuantumPotential) -> FrameExpansion:
    """Y from the flat frame, checked to carry no log part after untwisting."""
    flat = flat_frame(M, phi)
    connection = AModelConnection(M, phi)
    untwisted = flat.matrix() @ connection.twist(+1)
    return FrameExpansion(untwisted.as_pure(), flat.nilpotents, 'canonical')


def local_monodromy_on_frame(M: FrobeniusModule, phi: QuantumPotential, j: int,
                             frame: Optional[FrameExpansion] = None) -> SeriesMatrix:
    """
    -log T_j read off the flat frame.

    Continuing Phi around q_j = 0 is the shift z_j -> z_j + 1. The transport
    Phi^-1 Phi(z + e_j) has to be constant; minus its logarithm is the matrix
    of N_j on the canonical frame.
    """
    position = M.position(j)
    frame = frame or flat_frame(M, phi)
    Phi = FrameExpansion(frame.Y, frame.nilpotents, 'flat').matrix()
    untwist = SeriesMatrix.z_linear(frame.nilpotents, frame.Y.r, frame.Y.order, +1).exp_nilpotent()
    transport = untwist @ frame.Y.inverse_unipotent() @ Phi.shift(position)
    for (row, col), s in sorted(transport.entries.items()):
        moving = s - s.constant_term
        if moving:
            raise NotFlat(f"continuation around q_{position} = 0 is not a constant transport",
                          witness={'j': position, 'entry': [row, col], 'monomial': monomial_witness(moving)})
    return -transport.log_unipotent()


# ============================================================
# Certificates
# ============================================================

def _phi_hbar_second(M: FrobeniusModule, phi: QuantumPotential, a: int, b: int) -> LogPolySeries:
    """d^2 phi / dz_a dz_b with the z-linear part coming from phi_0."""
    out = LogPolySeries.lift(phi.hbar_partial(a, b))
    framing = M.framing
    for var, coeff in phi.phi0.second_partial(a, b).items():
        if var in framing:
            z = tuple(1 if i == M.position(var) - 1 else 0 for i in range(phi.r))
            out = out + LogPolySeries.z_monomial(z, coeff, phi.r, phi.order)
    return out


def _expected_canonical(M: FrobeniusModule, phi: QuantumPotential, a: int, c: int) -> Optional[QSeries]:
    """Second component of the canonical frame column a at T_c (k > 3), or None if no formula applies."""
    k, r, D = M.k, phi.r, phi.order
    delta = M.delta
    deg = M.degrees[a]
    zero = QSeries.zero(r, D)
    if deg == 0:
        return zero
    if deg == 2:
        s = phi.phi_a.get(delta[c])
        return -s.dz_derive(M.position(a)) if s is not None else zero
    if 2 < deg < 2 * k - 4:
        s = phi.phi_ab.get((a, delta[c]))
        return s.scale(-2) if s is not None else zero
    if deg == 2 * k - 4:
        s = phi.phi_a.get(a)
        return -s.dz_derive(M.position(delta[c])) if s is not None else zero
    return None


def verify_frame_lemmas(M: FrobeniusModule, phi: QuantumPotential,
                        flat: Optional[FrameExpansion] = None,
                        canonical: Optional[FrameExpansion] = None) -> Certificate:
    """Leading and second components of the flat and canonical frames, per basis index."""
    flat = flat or flat_frame(M, phi)
    canonical = canonical or FrameExpansion(flat.Y, flat.nilpotents, 'canonical')
    Phi, Y = flat.matrix(), canonical.matrix()
    k, n, r, D = M.k, M.n, phi.r, phi.order
    delta = M.delta
    one = QSeries.constant(1, r, D)
    items: List[CheckResult] = []

    def leading_ok(frame: SeriesMatrix, a: int) -> Optional[int]:
        for c in range(n):
            if M.degrees[c] <= M.degrees[a]:
                expected = one if c == a else QSeries.zero(r, D)
                if frame.entry(c, a) != expected:
                    return c
        return None

    for a in range(n):
        bad = leading_ok(Phi, a)
        items.append(CheckResult(name=f"flat_normalization_a{a}", passed=bad is None,
                                 witness=None if bad is None else {'c': bad}))
        bad = None
        for c in M.indices_of_degree(M.degrees[a] + 2):
            if Phi.entry(c, a) != -_phi_hbar_second(M, phi, a, delta[c]):
                bad = c
                break
        items.append(CheckResult(name=f"flat_second_a{a}", passed=bad is None,
                                 witness=None if bad is None else {'c': bad}))

        bad = leading_ok(Y, a)
        items.append(CheckResult(name=f"canonical_normalization_a{a}", passed=bad is None,
                                 witness=None if bad is None else {'c': bad}))

        deg = M.degrees[a]
        if deg >= 2 * k - 2:
            ok = Y.column(a) == {a: one}
            items.append(CheckResult(name=f"canonical_top_a{a}", passed=ok))
            continue
        if deg == 0 or k > 3:
            bad = None
            for c in M.indices_of_degree(deg + 2):
                expected = _expected_canonical(M, phi, a, c)
                if expected is not None and Y.entry(c, a) != expected:
                    bad = {'c': c, 'monomial': monomial_witness(Y.entry(c, a) - expected)}
                    break
            if bad is None and deg == 2 * k - 4 and k > 3:
                s = phi.phi_a.get(a, QSeries.zero(r, D))
                if Y.entry(delta[0], a) != s:
                    bad = {'c': delta[0]}
            items.append(CheckResult(name=f"canonical_second_a{a}", passed=bad is None, witness=bad))

    return Certificate(kind="frame_lemmas", items=items)


def _failure(name: str, exc: FrobHodgeError) -> CheckResult:
    return CheckResult(name=name, passed=False, witness=exc.witness, detail=f"{type(exc).__name__}: {exc}")


def pvhs_certificate(M: FrobeniusModule, phi: QuantumPotential, seed: Optional[int] = None,
                     samples: Optional[int] = None, n_jobs: Optional[int] = None) -> Certificate:
    """
    Itemized certificate that the A-model variation is a polarized VHS.

    Items: limiting_mhs, flatness, pairing_flatness, transversality,
    real_structure and frame_agreement. Upstream failures are recorded as
    failed items rather than raised.
    """
    items: List[CheckResult] = []
    n, r, D = M.n, phi.r, phi.order

    try:
        module_to_orbit(M, seed=seed, samples=samples)
        items.append(CheckResult(name="limiting_mhs", passed=True))
    except FrobHodgeError as exc:
        items.append(_failure("limiting_mhs", exc))

    verdict = curvature_check(M, phi, n_jobs)
    items.append(CheckResult(name="flatness", passed=verdict.holds,
                             witness=verdict.first.model_dump() if verdict.first else None))

    connection = AModelConnection(M, phi)
    try:
        flat = flat_frame(M, phi)
    except FrobHodgeError as exc:
        for name in ("pairing_flatness", "real_structure", "frame_agreement"):
            items.append(_failure(name, exc))
        flat = None

    Q = SeriesMatrix.from_constant(to_tau(q_form(M)), r, D)
    if flat is not None:
        Phi = flat.matrix()
        gram = Phi.transpose() @ Q @ Phi
        items.append(CheckResult(name="pairing_flatness", passed=gram == Q,
                                 witness=None if gram == Q else {'entry': list((gram - Q).first_nonzero()[0])}))

    transversal = None
    for position, A in connection.matrices.items():
        bad = next(((c, a) for (c, a) in sorted(A.entries) if M.degrees[c] > M.degrees[a] + 2), None)
        if bad is not None:
            transversal = {'j': position, 'c': bad[0], 'a': bad[1]}
            break
    items.append(CheckResult(name="transversality", passed=transversal is None, witness=transversal))

    if flat is not None:
        items.append(_real_structure_item(M, phi, flat))
        try:
            canonical = canonical_frame(M, phi)
            tower = reconstruct_gamma(M, gamma1_from_potential(M, phi), n_jobs=n_jobs)
            expected = (-tower.total()).exp_nilpotent()
            agree = canonical.Y == expected
            hit = None if agree else (canonical.Y - expected).first_nonzero()
            items.append(CheckResult(name="frame_agreement", passed=agree,
                                     witness=None if hit is None else {'entry': list(hit[0]),
                                                                       'monomial': monomial_witness(hit[1])}))
        except FrobHodgeError as exc:
            items.append(_failure("frame_agreement", exc))

    return Certificate(kind="pvhs", items=items)


def _real_structure_item(M: FrobeniusModule, phi: QuantumPotential, flat: FrameExpansion) -> CheckResult:
    """
    sigma~_v for v in the rational basis, solved from nabla~ alone, must untwist
    the flat frame and be nabla~-flat in every direction; the generating
    sections exp(-sum z_j N_j) sigma~_v = Phi v must be carried around each
    q_j = 0 by the rational monodromy.
    """
    connection = AModelConnection(M, phi)
    sigma = untwisted_sections(connection)
    if sigma != flat.Y:
        (row, col), s = (sigma - flat.Y).first_nonzero()
        return CheckResult(name="real_structure", passed=False,
                           witness={'entry': [row, col], 'monomial': monomial_witness(s)},
                           detail="frame is not the untwisted nabla~-flat sections")
    for position in range(1, connection.r + 1):
        residual = connection.apply(position, sigma) - sigma @ connection.nilpotents[position]
        hit = residual.first_nonzero()
        if hit is not None:
            (row, col), s = hit
            return CheckResult(name="real_structure", passed=False,
                               witness={'j': position, 'entry': [row, col], 'monomial': monomial_witness(s)},
                               detail=f"sections are not flat for nabla~_{position}")
    Phi = flat.matrix()
    r, D = phi.r, phi.order
    for position, j in enumerate(M.framing, start=1):
        transported = Phi @ SeriesMatrix.from_constant(monodromy(M, phi, j), r, D)
        shifted = Phi.shift(position)
        if shifted != transported:
            (row, col), _ = (shifted - transported).first_nonzero()
            return CheckResult(name="real_structure", passed=False,
                               witness={'j': position, 'entry': [row, col]},
                               detail="shift by one period is not right multiplication by the monodromy")
    return CheckResult(name="real_structure", passed=True)
