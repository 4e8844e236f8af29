"""
Quantum potentials, the deformed product and graded WDVV

phi = phi_0 + phi_hbar where phi_hbar(z) = sum_a z_a phi^a(q) over degree
2k-4 indices plus sum_{(a,b)} z_a z_b phi^{ab}(q) over ordered pairs with
2 < deg a < 2k-4 and deg a + deg b = 2k-2. For k = 3 phi_hbar is a single
series in q. Derivatives in divisor variables act on q-series through D_j.
"""

from collections import Counter
from math import factorial
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from joblib import Parallel, delayed

from .config import get_default_order, get_n_jobs
from .errors import NotDivisorIndex, ShapeMismatch
from .frobenius import CubicPotential, FrobeniusModule, classical_potential
from .models import CheckResult, CommutatorVerdict, CommutatorWitness, ValidationReport
from .runlog import log
from .scalars import format_scalar
from .series import QSeries, SeriesMatrix, commutator_pairs, monomial_witness

Monomial = Tuple[int, ...]


class QuantumPotential:
    """
    Quantum potential on a framed module.

    Only one of (a, b) / (b, a) needs to be given in phi_ab; the partner is
    filled in. Conflicting entries are kept as given and reported by
    validate_potential.
    """

    def __init__(self, module: FrobeniusModule, phi_a: Optional[Mapping[int, QSeries]] = None,
                 phi_ab: Optional[Mapping[Tuple[int, int], QSeries]] = None,
                 weight3: Optional[QSeries] = None, order: Optional[int] = None,
                 phi0: Optional[CubicPotential] = None):
        self.module = module
        self.r = module.r
        self.order = get_default_order() if order is None else order
        self.phi0 = phi0 if phi0 is not None else classical_potential(module)

        self.phi_a: Dict[int, QSeries] = {}
        for a, s in (phi_a or {}).items():
            self._check_index(a)
            self.phi_a[a] = self._check_series(s, f"phi^{a}")
        self.phi_ab: Dict[Tuple[int, int], QSeries] = {}
        for (a, b), s in (phi_ab or {}).items():
            self._check_index(a)
            self._check_index(b)
            self.phi_ab[(a, b)] = self._check_series(s, f"phi^{a}{b}")
        for (a, b), s in list(self.phi_ab.items()):
            self.phi_ab.setdefault((b, a), s)
        self.weight3 = self._check_series(weight3, "weight-3 series") if weight3 is not None else None
        self._expansion = self._expand()
        self._partials: Dict[Tuple[int, int, int], QSeries] = {}

    def _check_index(self, a: int) -> None:
        if not 0 <= a < self.module.n:
            raise ShapeMismatch(f"index {a} out of range 0..{self.module.m}", witness=a)

    def _check_series(self, s: QSeries, name: str) -> QSeries:
        if s.r != self.r or s.order != self.order:
            raise ShapeMismatch(f"{name} has (r={s.r}, D={s.order}), expected (r={self.r}, D={self.order})")
        return s

    @classmethod
    def zero(cls, module: FrobeniusModule, order: Optional[int] = None) -> 'QuantumPotential':
        return cls(module, order=order)

    def _expand(self) -> Dict[Monomial, QSeries]:
        """phi_hbar as sorted non-divisor index tuple -> q-series coefficient."""
        out: Dict[Monomial, QSeries] = {}

        def add(key, s):
            out[key] = out[key] + s if key in out else s

        if self.weight3 is not None:
            add((), self.weight3)
        for a, s in self.phi_a.items():
            add((a,), s)
        for (a, b), s in self.phi_ab.items():
            add(tuple(sorted((a, b))), s)
        return {key: s for key, s in out.items() if s}

    @property
    def is_zero(self) -> bool:
        return not self._expansion

    def hbar_partial(self, *indices: int) -> QSeries:
        """Partial of phi_hbar in the given variables, at z = 0 in the non-divisor ones."""
        framing = set(self.module.framing)
        rest = tuple(sorted(i for i in indices if i not in framing))
        s = self._expansion.get(rest)
        if s is None:
            return QSeries.zero(self.r, self.order)
        multiplicity = 1
        for count in Counter(rest).values():
            multiplicity *= factorial(count)
        for i in indices:
            if i in framing:
                s = s.dz_derive(self.module.position(i))
        return s.scale(multiplicity)

    def third_partial(self, x: int, y: int, w: int) -> QSeries:
        """d^3 phi / dz_x dz_y dz_w; a pure q-series by the grading."""
        key = tuple(sorted((x, y, w)))
        cached = self._partials.get(key)
        if cached is None:
            cached = self.hbar_partial(*key) + self.phi0.third_partial(x, y, w)
            self._partials[key] = cached
        return cached

    def truncate(self, order: int) -> 'QuantumPotential':
        return QuantumPotential(
            self.module,
            {a: s.truncate(order) for a, s in self.phi_a.items()},
            {ab: s.truncate(order) for ab, s in self.phi_ab.items()},
            self.weight3.truncate(order) if self.weight3 is not None else None,
            order=order, phi0=self.phi0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantumPotential):
            return NotImplemented
        return self.module == other.module and self.order == other.order \
            and self.phi0 == other.phi0 and self._expansion == other._expansion

    __hash__ = None

    def __repr__(self) -> str:
        return f"QuantumPotential(k={self.module.k}, r={self.r}, D={self.order}, terms={len(self._expansion)})"


# ============================================================
# Validation
# ============================================================

def validate_potential(M: FrobeniusModule, phi: QuantumPotential) -> ValidationReport:
    """Index ranges, symmetry, vanishing at 0 and the weight-3 rule."""
    if phi.module.n != M.n or phi.r != M.r:
        raise ShapeMismatch(f"potential for rank {phi.module.n}, r={phi.r} does not fit rank {M.n}, r={M.r}")
    k = M.k
    checks: List[CheckResult] = []

    range_witness = None
    for a in sorted(phi.phi_a):
        if k == 3 or M.degrees[a] != 2 * k - 4:
            range_witness = {'a': a, 'degree': M.degrees[a]}
            break
    if range_witness is None:
        for a, b in sorted(phi.phi_ab):
            da, db = M.degrees[a], M.degrees[b]
            if k == 3 or not (2 < da < 2 * k - 4) or da + db != 2 * k - 2:
                range_witness = {'ab': [a, b], 'degrees': [da, db]}
                break
    checks.append(CheckResult(name="index_range", passed=range_witness is None, witness=range_witness))

    sym_witness = next(({'ab': [a, b]} for (a, b), s in sorted(phi.phi_ab.items())
                        if a < b and phi.phi_ab.get((b, a)) != s), None)
    checks.append(CheckResult(name="symmetry", passed=sym_witness is None, witness=sym_witness))

    vanish_witness = None
    named = [('weight3', phi.weight3)] if phi.weight3 is not None else []
    named += [(f"a={a}", s) for a, s in sorted(phi.phi_a.items())]
    named += [(f"ab={a},{b}", s) for (a, b), s in sorted(phi.phi_ab.items())]
    for name, s in named:
        if not s.vanishes_at_zero:
            vanish_witness = {'series': name, 'constant': format_scalar(s.constant_term)}
            break
    checks.append(CheckResult(name="vanishing_at_zero", passed=vanish_witness is None, witness=vanish_witness))

    weight3_ok = k == 3 or phi.weight3 is None or phi.weight3.is_zero
    checks.append(CheckResult(name="weight3_usage", passed=weight3_ok,
                              witness=None if weight3_ok else {'k': k}))
    return ValidationReport(subject="potential", checks=checks)


# ============================================================
# Deformed product
# ============================================================

def quantum_product(M: FrobeniusModule, phi: QuantumPotential, j: int, a: int) -> Dict[int, QSeries]:
    """T_j *_q T_a = sum over deg c = deg a + 2 of d^3 phi / dz_j dz_a dz_delta(c) T_c."""
    if not 0 <= j < M.n or M.degrees[j] != 2:
        raise NotDivisorIndex(f"T{j} is not a degree-2 basis vector", witness=j)
    M.position(j)
    delta = M.delta
    out = {}
    for c in M.indices_of_degree(M.degrees[a] + 2):
        s = phi.third_partial(j, a, delta[c])
        if s:
            out[c] = s
    return out


def product_matrix(M: FrobeniusModule, phi: QuantumPotential, j: int) -> SeriesMatrix:
    """A_j with column a equal to T_j *_q T_a."""
    entries = {}
    for a in range(M.n):
        for c, s in quantum_product(M, phi, j, a).items():
            entries[(c, a)] = s
    return SeriesMatrix(M.n, phi.r, phi.order, entries)


def product_matrices(M: FrobeniusModule, phi: QuantumPotential) -> Dict[int, SeriesMatrix]:
    """A_j keyed by the 1-based q-variable index."""
    return {M.position(j): product_matrix(M, phi, j) for j in M.framing}


def commutator_violations(difference: Callable[[int, int], SeriesMatrix], M: FrobeniusModule,
                          pair: Tuple[int, int]) -> List[CommutatorWitness]:
    """Nonzero entries of difference(j, l) for one pair of q-variables, ordered by (a, d)."""
    j, l = pair
    diff = difference(j, l)
    out = []
    for (d, a), s in sorted(diff.entries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        out.append(CommutatorWitness(j=M.divisor_at(j), l=M.divisor_at(l), a=a, d=d,
                                     monomial=monomial_witness(s)))
    return out


def commutator_check(name: str, difference: Callable[[int, int], SeriesMatrix], M: FrobeniusModule,
                     order: int, n_jobs: Optional[int] = None) -> CommutatorVerdict:
    """difference(j, l) = 0 for all pairs j < l; threaded over pairs, merged in pair order."""
    n_jobs = get_n_jobs() if n_jobs is None else n_jobs
    pairs = list(commutator_pairs(M.r))
    if n_jobs == 1 or len(pairs) < 2:
        chunks = [commutator_violations(difference, M, p) for p in pairs]
    else:
        chunks = Parallel(n_jobs=n_jobs, prefer='threads')(
            delayed(commutator_violations)(difference, M, p) for p in pairs
        )
    violations = [w for chunk in chunks for w in chunk]
    log(f'{name}: {len(pairs)} pairs, {len(violations)} violations up to order {order}')
    return CommutatorVerdict(check=name, holds=not violations, order=order, violations=violations)


def wdvv_check(M: FrobeniusModule, phi: QuantumPotential, n_jobs: Optional[int] = None) -> CommutatorVerdict:
    """Graded WDVV as commutation of the quantum multiplication operators."""
    A = product_matrices(M, phi)
    return commutator_check("wdvv", lambda j, l: A[j] @ A[l] - A[l] @ A[j], M, phi.order, n_jobs)


def deformed_product_report(M: FrobeniusModule, phi: QuantumPotential) -> ValidationReport:
    """Unit, pairing symmetry, degree and classical-limit checks of *_q."""
    matrices = {j: product_matrix(M, phi, j) for j in M.framing}
    checks: List[CheckResult] = []
    n = M.n

    unit_witness = None
    for j, A in matrices.items():
        column = A.column(0)
        expected = {j: QSeries.constant(1, phi.r, phi.order)}
        if column != expected:
            unit_witness = {'j': j}
            break
    checks.append(CheckResult(name="unit", passed=unit_witness is None, witness=unit_witness))

    pairing_witness = None
    for j, A in matrices.items():
        for a in range(n):
            for b in range(a + 1, n):
                lhs = QSeries.zero(phi.r, phi.order)
                rhs = QSeries.zero(phi.r, phi.order)
                for c, s in A.column(a).items():
                    if M.pairing[c][b]:
                        lhs = lhs + s.scale(M.pairing[c][b])
                for c, s in A.column(b).items():
                    if M.pairing[a][c]:
                        rhs = rhs + s.scale(M.pairing[a][c])
                if lhs != rhs:
                    pairing_witness = {'j': j, 'v': a, 'w': b, 'monomial': monomial_witness(lhs - rhs)}
                    break
            if pairing_witness:
                break
        if pairing_witness:
            break
    checks.append(CheckResult(name="pairing_symmetry", passed=pairing_witness is None, witness=pairing_witness))

    degree_witness = None
    for j, A in matrices.items():
        bad = next(((c, a) for (c, a) in sorted(A.entries) if M.degrees[c] != M.degrees[a] + 2), None)
        if bad is not None:
            degree_witness = {'j': j, 'a': bad[1], 'c': bad[0]}
            break
    checks.append(CheckResult(name="degree", passed=degree_witness is None, witness=degree_witness))

    limit_witness = None
    for j, A in matrices.items():
        rows = A.constant_rows()
        for a in range(n):
            classical = M.products.get((j, a), {})
            got = {c: rows[c][a] for c in range(n) if rows[c][a]}
            if got != classical:
                limit_witness = {'j': j, 'a': a}
                break
        if limit_witness:
            break
    checks.append(CheckResult(name="classical_limit", passed=limit_witness is None, witness=limit_witness))

    return ValidationReport(subject="deformed_product", checks=checks)
