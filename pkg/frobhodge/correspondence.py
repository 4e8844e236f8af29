"""
Quantum potentials <-> Gamma towers

Potential -> Gamma_{-1} -> (graded horizontality) -> Gamma_{-2..-k}, and back
from a canonical tower to the potential. Gamma_{-l} raises V-degree by 2l.
"""

from typing import Dict, List, Mapping, Optional

from .errors import (InconsistentPrimitive, IntegrationInconsistent, LogPartNonzero, NotCanonical,
                     NotClosed, NotIntegrable, SeriesMismatch)
from .frobenius import FrobeniusModule, infinitesimal_automorphism, q_form
from .models import CheckResult, CommutatorVerdict, RoundTripResult, ValidationReport
from .potential import QuantumPotential, commutator_check
from .runlog import log
from .scalars import rational
from .series import QSeries, SeriesMatrix, integrate_closed_one_form, integrate_matrix_form, monomial_witness


class GammaTower:
    """Gamma_{-1}..Gamma_{-k} as pure series matrices; missing pieces are zero."""

    def __init__(self, module: FrobeniusModule, pieces: Mapping[int, SeriesMatrix],
                 r: Optional[int] = None, order: Optional[int] = None):
        self.module = module
        self.k = module.k
        first = next(iter(pieces.values()), None)
        self.r = first.r if first is not None else (module.r if r is None else r)
        self.order = first.order if first is not None else order
        if self.order is None:
            raise SeriesMismatch("an empty tower needs an explicit order")
        self.pieces: Dict[int, SeriesMatrix] = {}
        for l, piece in pieces.items():
            if not 1 <= l <= self.k:
                raise SeriesMismatch(f"tower level {l} outside 1..{self.k}")
            if (piece.size, piece.r, piece.order) != (module.n, self.r, self.order):
                raise SeriesMismatch(f"Gamma_-{l} has the wrong shape")
            self.pieces[l] = piece.as_pure()

    def __getitem__(self, l: int) -> SeriesMatrix:
        return self.pieces.get(l, SeriesMatrix.zero(self.module.n, self.r, self.order))

    def total(self) -> SeriesMatrix:
        out = SeriesMatrix.zero(self.module.n, self.r, self.order)
        for piece in self.pieces.values():
            out = out + piece
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, GammaTower):
            return NotImplemented
        return self.module == other.module and all(self[l] == other[l] for l in range(1, self.k + 1))

    __hash__ = None

    def __repr__(self) -> str:
        nnz = {l: len(p.entries) for l, p in sorted(self.pieces.items()) if p}
        return f"GammaTower(k={self.k}, r={self.r}, D={self.order}, nnz={nnz})"


def g_tower(tower: GammaTower) -> Dict[int, SeriesMatrix]:
    """Graded pieces G_{-l} of G = exp(Gamma), l = 1..k."""
    G = tower.total().exp_nilpotent()
    return {l: G.graded_piece(tower.module.degrees, l) for l in range(1, tower.k + 1)}


# ============================================================
# Potential -> tower
# ============================================================

def gamma1_from_potential(M: FrobeniusModule, phi: QuantumPotential) -> SeriesMatrix:
    """Gamma_{-1}(T_a) = sum over deg c = deg a + 2 of d^2 phi_hbar / dz_a dz_delta(c) T_c."""
    delta = M.delta
    entries = {}
    for a in range(M.n):
        for c in M.indices_of_degree(M.degrees[a] + 2):
            s = phi.hbar_partial(a, delta[c])
            if s:
                entries[(c, a)] = s
    return SeriesMatrix(M.n, phi.r, phi.order, entries)


def x_minus_one(M: FrobeniusModule, gamma1: SeriesMatrix) -> SeriesMatrix:
    """X_{-1} = sum_j z_j N_j + Gamma_{-1}."""
    if M.r == 0:
        return gamma1
    return SeriesMatrix.z_linear(M.framing_nilpotents(), gamma1.r, gamma1.order) + gamma1


def _connection_matrices(M: FrobeniusModule, gamma1: SeriesMatrix) -> Dict[int, SeriesMatrix]:
    """D_j X_{-1} = N_j + D_j Gamma_{-1}, keyed by q-variable."""
    out = {}
    for position, j in enumerate(M.framing, start=1):
        N = SeriesMatrix.from_constant(M.left_mult(j), gamma1.r, gamma1.order)
        out[position] = N + gamma1.dz_derive(position)
    return out


def integrability_check(M: FrobeniusModule, gamma1: SeriesMatrix,
                        n_jobs: Optional[int] = None) -> CommutatorVerdict:
    """dX_{-1} ^ dX_{-1} = 0 as commutation of the D_j X_{-1}."""
    A = _connection_matrices(M, gamma1)
    return commutator_check("integrability", lambda j, l: A[j] @ A[l] - A[l] @ A[j], M, gamma1.order, n_jobs)


def _check_preserves_q(q, l: int, piece: SeriesMatrix) -> None:
    qs = SeriesMatrix.from_constant(q, piece.r, piece.order)
    found = (piece.transpose() @ qs + qs @ piece).first_nonzero()
    if found is not None:
        (c, a), s = found
        raise NotCanonical(f"Gamma_-{l} does not preserve Q",
                           witness={'level': l, 'entry': [c, a], 'monomial': monomial_witness(s)})


def reconstruct_gamma(M: FrobeniusModule, gamma1: SeriesMatrix, order: Optional[int] = None,
                      n_jobs: Optional[int] = None) -> GammaTower:
    """
    Unique tower with the given Gamma_{-1}.

    Level l solves dG_{-l} = G_{-l+1} dX_{-1} - Theta G_{-l+1} with G(0) = 0;
    the primitive must be a pure q-series. Gamma = log G is then split by
    degree shift.
    """
    if order is not None and order != gamma1.order:
        gamma1 = gamma1.truncate(order)
    gamma1 = gamma1.as_pure()
    verdict = integrability_check(M, gamma1, n_jobs)
    if not verdict.holds:
        raise NotIntegrable("dX_-1 ^ dX_-1 != 0", witness=verdict.first.model_dump())
    q = q_form(M)
    _check_preserves_q(q, 1, gamma1)
    n, r, D = M.n, gamma1.r, gamma1.order
    if r == 0:
        return GammaTower(M, {}, r=0, order=D)

    nilpotents = [SeriesMatrix.from_constant(M.left_mult(j), r, D) for j in M.framing]
    d_gamma1 = [gamma1.dz_derive(p) for p in range(1, r + 1)]
    G_pieces = {1: gamma1}
    previous = gamma1
    for l in range(2, M.k + 1):
        forms = [previous @ N - N @ previous + previous @ dg for N, dg in zip(nilpotents, d_gamma1)]
        if all(f.is_zero for f in forms):
            break
        try:
            primitive = integrate_matrix_form(forms)
        except (NotClosed, InconsistentPrimitive) as exc:
            raise NotIntegrable(f"level {l}: {exc}", witness={'level': l, **(exc.witness or {})}) from exc
        try:
            previous = primitive.as_pure()
        except LogPartNonzero as exc:
            raise LogPartNonzero(f"G_-{l} has a log part", witness={'level': l, **exc.witness}) from exc
        G_pieces[l] = previous
        log(f"reconstruct: G_-{l} has {len(previous.entries)} nonzero entries")

    G = SeriesMatrix.identity(n, r, D)
    for piece in G_pieces.values():
        G = G + piece
    gamma = G.log_unipotent().as_pure()
    pieces = {l: gamma.graded_piece(M.degrees, l) for l in range(1, M.k + 1)}
    for l, piece in pieces.items():
        _check_preserves_q(q, l, piece)
    return GammaTower(M, {l: p for l, p in pieces.items() if p}, r=r, order=D)


def canonical_check(M: FrobeniusModule, tower: GammaTower) -> bool:
    """Gamma_{-l}(v) = 0 for every l and every v in V_{2k-2}."""
    targets = M.indices_of_degree(2 * M.k - 2)
    return all(not tower[l].column(v) for l in range(1, M.k + 1) for v in targets)


def tower_report(M: FrobeniusModule, tower: GammaTower) -> ValidationReport:
    """Vanishing at 0, degree shift, Q-preservation and canonicity of a tower."""
    checks: List[CheckResult] = []
    q = q_form(M)
    for l in range(1, M.k + 1):
        piece = tower[l]
        constant = any(s.constant_term for s in piece.entries.values())
        checks.append(CheckResult(name=f"vanishing_l{l}", passed=not constant))
        shifted = piece.graded_piece(M.degrees, l) == piece
        checks.append(CheckResult(name=f"degree_l{l}", passed=shifted))
        preserved = infinitesimal_automorphism(q, piece)
        checks.append(CheckResult(name=f"preserves_q_l{l}", passed=preserved))
    checks.append(CheckResult(name="canonical", passed=canonical_check(M, tower)))
    return ValidationReport(subject="gamma_tower", checks=checks)


# ============================================================
# Tower -> potential
# ============================================================

def _pair_with(M: FrobeniusModule, column: Mapping[int, QSeries], b: int, r: int, order: int) -> QSeries:
    """B(sum_c column[c] T_c, T_b)."""
    out = QSeries.zero(r, order)
    for c, s in column.items():
        if M.pairing[c][b]:
            out = out + s.scale(M.pairing[c][b])
    return out


def potential_from_gamma(M: FrobeniusModule, tower: GammaTower) -> QuantumPotential:
    """
    phi^{ab} = 1/2 B(Gamma_{-1} T_a, T_b), phi^a = B(-Gamma_{-2} T_a, T_0).

    For k = 3 the one-form sum_j B(-Gamma_{-2} T_j, T_0) dz_j is integrated
    once; every direction must give the same primitive.
    """
    if not canonical_check(M, tower):
        raise NotCanonical("Gamma does not vanish on V_{2k-2}")
    k, r, D = M.k, tower.r, tower.order
    gamma1, gamma2 = tower[1], tower[2]

    if k == 3:
        if r == 0:
            return QuantumPotential(M, order=D)
        forms = [-_pair_with(M, gamma2.column(j), 0, r, D) for j in M.framing]
        try:
            primitive = integrate_closed_one_form(forms).as_qseries()
        except (NotClosed, InconsistentPrimitive, LogPartNonzero) as exc:
            raise IntegrationInconsistent(f"weight-3 primitive: {exc}", witness=exc.witness) from exc
        return QuantumPotential(M, weight3=primitive, order=D)

    phi_a = {}
    for a in M.indices_of_degree(2 * k - 4):
        s = -_pair_with(M, gamma2.column(a), 0, r, D)
        if s:
            phi_a[a] = s
    phi_ab = {}
    half = rational(1, 2)
    for a in range(M.n):
        if not 2 < M.degrees[a] < 2 * k - 4:
            continue
        for b in M.indices_of_degree(2 * k - 2 - M.degrees[a]):
            s = _pair_with(M, gamma1.column(a), b, r, D).scale(half)
            if s:
                phi_ab[(a, b)] = s
    return QuantumPotential(M, phi_a=phi_a, phi_ab=phi_ab, order=D)


def round_trip(M: FrobeniusModule, phi: QuantumPotential, order: Optional[int] = None,
               n_jobs: Optional[int] = None, tower: Optional[GammaTower] = None) -> RoundTripResult:
    """
    potential -> tower -> potential, and Gamma_{-1} -> potential -> Gamma_{-1}.

    A tower already reconstructed from phi can be passed in and is used as is.
    """
    if order is not None and order != phi.order:
        phi = phi.truncate(order)
    if tower is None or tower.order != phi.order:
        tower = reconstruct_gamma(M, gamma1_from_potential(M, phi), n_jobs=n_jobs)
    recovered = potential_from_gamma(M, tower)
    potential_match = recovered == phi
    gamma_match = gamma1_from_potential(M, recovered) == tower[1]
    mismatches = []
    if not potential_match:
        mismatches.append("potential")
    if not gamma_match:
        mismatches.append("gamma_minus_one")
    return RoundTripResult(holds=potential_match and gamma_match, order=phi.order,
                           potential_match=potential_match, gamma_match=gamma_match, mismatches=mismatches)
