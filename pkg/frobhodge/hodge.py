"""
Weight filtrations, Hodge-Tate bigradings and nilpotent orbits

Everything here is tau-free: matrices are DomainMatrix over QQ, subspaces are
lists of QQ vectors. Endomorphism matrices act on columns (column a is the
image of T_a).
"""

import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .config import get_samples, get_seed, get_sign_calibration
from .errors import (ConeDegenerate, GradingViolation, InputError, InvalidModule, MalformedOrbit,
                     NotHodgeTate, NotMaximallyUnipotent, NotNilpotent, NotPolarizable,
                     NotSelfDualizable, ShapeMismatch)
from .frobenius import FrobeniusModule, q_form, validate_module
from .linalg import (Definiteness, Subspace, Vector, apply, columns_matrix, contains,
                     definiteness_check, format_vector, gram, intersect, is_infinitesimal_automorphism,
                     is_zero_matrix, matrix_power, nilpotency_index, pair, preimage, rank_of,
                     same_span, span_basis, to_qq, unit_vector)
from .models import Certificate, CheckResult, ConeVerdict, MaxUnipotentVerdict
from .runlog import log
from .scalars import format_scalar, from_rational, to_rational


def _qq_vector(v: Sequence[object]) -> Vector:
    out = []
    for c in v:
        if hasattr(c, 'numer') and hasattr(c, 'field'):
            c = to_rational(c)
        out.append(QQ.convert(c))
    return out


def _full(n: int) -> Subspace:
    return [unit_vector(n, i) for i in range(n)]


# ============================================================
# Filtrations
# ============================================================

class Filtration:
    """
    Exhaustive filtration of QQ^n stored on a dense range of levels.

    Increasing filtrations are 0 below the stored range and constant above it;
    decreasing ones are constant below and 0 above.
    """

    def __init__(self, n: int, steps: Mapping[int, Subspace], increasing: bool = True):
        if not steps:
            raise ShapeMismatch("a filtration needs at least one level")
        self.n = n
        self.increasing = increasing
        lo, hi = min(steps), max(steps)
        dense: Dict[int, Subspace] = {}
        previous: Optional[Subspace] = None
        levels = range(lo, hi + 1) if increasing else range(hi, lo - 1, -1)
        for level in levels:
            if level in steps:
                previous = span_basis([_qq_vector(v) for v in steps[level]], n)
            dense[level] = previous
        self.lo, self.hi = lo, hi
        self.steps = dense

    def __getitem__(self, level: int) -> Subspace:
        if self.increasing:
            if level < self.lo:
                return []
            return self.steps[min(level, self.hi)]
        if level > self.hi:
            return []
        return self.steps[max(level, self.lo)]

    def dim(self, level: int) -> int:
        return len(self[level])

    def shifted(self, s: int) -> 'Filtration':
        """Level l of the result is level l + s of self; W[-k] is shifted(-k)."""
        return Filtration(self.n, {level - s: basis for level, basis in self.steps.items()},
                          self.increasing)

    def first_difference(self, other: 'Filtration') -> Optional[int]:
        for level in range(min(self.lo, other.lo) - 1, max(self.hi, other.hi) + 2):
            if not same_span(self[level], other[level], self.n):
                return level
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, Filtration):
            return NotImplemented
        return self.n == other.n and self.increasing == other.increasing \
            and self.first_difference(other) is None

    __hash__ = None

    def is_nested(self) -> bool:
        levels = sorted(self.steps)
        for a, b in zip(levels, levels[1:]):
            small, big = (a, b) if self.increasing else (b, a)
            if not contains(self.steps[big], self.steps[small], self.n):
                return False
        return True

    def to_payload(self) -> Dict[str, List[List[str]]]:
        return {str(level): [format_vector(v) for v in self.steps[level]] for level in sorted(self.steps)}

    def __repr__(self) -> str:
        kind = "W" if self.increasing else "F"
        dims = {level: len(b) for level, b in sorted(self.steps.items())}
        return f"Filtration({kind}, dims={dims})"


def _weight_recurse(N: DomainMatrix, upper: Subspace, lower: Subspace, center: int,
                    steps: Dict[int, Subspace]) -> None:
    n = N.shape[0]
    if same_span(upper, lower, n):
        return
    m = 0
    power = N
    while not contains(lower, [apply(power, u) for u in upper], n):
        m += 1
        power = power * N
    top = matrix_power(N, m)
    kernel_m = preimage(top, lower, within=upper)
    image_m = span_basis([apply(top, u) for u in upper] + list(lower), n)
    steps[center + m] = upper
    steps[center + m - 1] = kernel_m
    steps[center - m] = image_m
    steps[center - m - 1] = lower
    if m >= 1:
        _weight_recurse(N, kernel_m, image_m, center, steps)


def _verify_weight(N: DomainMatrix, W: Filtration) -> None:
    n = N.shape[0]
    for level in range(W.lo, W.hi + 1):
        if not contains(W[level - 2], [apply(N, u) for u in W[level]], n):
            raise GradingViolation(f"N W_{level} is not contained in W_{level - 2}", witness={'level': level})
    for level in range(1, W.hi + 1):
        power = matrix_power(N, level)
        if W.dim(level) - W.dim(level - 1) != W.dim(-level) - W.dim(-level - 1):
            raise GradingViolation(f"gr_{level} and gr_-{level} differ in dimension", witness={'level': level})
        if not same_span(preimage(power, W[-level - 1], within=W[level]), W[level - 1], n):
            raise GradingViolation(f"N^{level} is not injective on gr_{level}", witness={'level': level})


def weight_filtration(N: DomainMatrix) -> Filtration:
    """
    Weight filtration W(N) of a nilpotent N, centered at 0.

    Computed by the subquotient recursion on ker N^m / im N^m and verified
    against both characterizing properties before returning.
    """
    N = to_qq(N)
    n = N.shape[0]
    nilpotency_index(N)
    steps: Dict[int, Subspace] = {}
    _weight_recurse(N, _full(n), [], 0, steps)
    if not steps:
        steps = {0: []}
    W = Filtration(n, steps, increasing=True)
    _verify_weight(N, W)
    return W


# ============================================================
# Hodge-Tate bigradings
# ============================================================

class Bigrading:
    """Hodge-Tate splitting V = sum_p I^{p,p} with rational bases."""

    def __init__(self, n: int, pieces: Mapping[Tuple[int, int], Subspace]):
        self.n = n
        clean: Dict[int, Subspace] = {}
        for (p, q), basis in pieces.items():
            if p != q and basis:
                raise NotHodgeTate(f"I^({p},{q}) is nonzero", witness=[p, q])
            if basis:
                clean[p] = [_qq_vector(v) for v in basis]
        vectors = [v for basis in clean.values() for v in basis]
        if len(vectors) != n or rank_of(vectors, n) != n:
            raise NotHodgeTate(f"pieces of total dimension {len(vectors)} do not split a rank-{n} space",
                               witness={'dims': {str(p): len(b) for p, b in sorted(clean.items())}})
        self.pieces = clean

    def piece(self, p: int) -> Subspace:
        return self.pieces.get(p, [])

    @property
    def weights(self) -> List[int]:
        return sorted(self.pieces)

    def weight_steps(self) -> Filtration:
        """W_l = sum_{2p <= l} I^{p,p}."""
        lo, hi = min(self.weights), max(self.weights)
        steps = {2 * lo - 1: []}
        for p in range(lo, hi + 1):
            steps[2 * p] = [v for q in range(lo, p + 1) for v in self.piece(q)]
        return Filtration(self.n, steps, increasing=True)

    def hodge_filtration(self) -> Filtration:
        """F^a = sum_{p >= a} I^{p,p}."""
        lo, hi = min(self.weights), max(self.weights)
        steps = {hi + 1: []}
        for a in range(lo, hi + 1):
            steps[a] = [v for q in range(a, hi + 1) for v in self.piece(q)]
        return Filtration(self.n, steps, increasing=False)

    def dims(self) -> Dict[int, int]:
        return {p: len(b) for p, b in sorted(self.pieces.items())}


def hodge_tate_grading(M: FrobeniusModule) -> Bigrading:
    """I^{p,p} = V_{2(k-p)}."""
    pieces = {}
    for p in range(M.k + 1):
        pieces[(p, p)] = [unit_vector(M.n, a) for a in M.indices_of_degree(2 * (M.k - p))]
    return Bigrading(M.n, pieces)


def degree_filtration(M: FrobeniusModule) -> Filtration:
    return hodge_tate_grading(M).weight_steps()


def hard_lefschetz_check(M: FrobeniusModule, weights: Sequence[object]) -> bool:
    """W(L_w)[-k] equals the degree filtration for w = sum weights_j T_j."""
    L = to_qq(M.left_multiplication(weights))
    try:
        W = weight_filtration(L).shifted(-M.k)
    except NotNilpotent:
        return False
    return W == degree_filtration(M)


# ============================================================
# Polarized mixed Hodge structures
# ============================================================

def _positivity_witness(S: DomainMatrix, primitive: Subspace) -> Dict[str, object]:
    rows = S.to_list()
    size = len(rows)
    for i in range(size):
        if rows[i][i] <= 0:
            return {'u': format_vector(primitive[i]), 'value': format_scalar(from_rational(rows[i][i]))}
    for i in range(size):
        for j in range(i + 1, size):
            for sgn in (1, -1):
                value = rows[i][i] + rows[j][j] + 2 * sgn * rows[i][j]
                if value <= 0:
                    u = [a + sgn * b for a, b in zip(primitive[i], primitive[j])]
                    return {'u': format_vector(u), 'value': format_scalar(from_rational(value))}
    return {'u': None}


def check_polarized_mhs(grading: Bigrading, N: DomainMatrix, Q: DomainMatrix, k: int,
                        sign_calibration: Optional[str] = None) -> Certificate:
    """
    Certify that (W(N)[-k], F, Q) with F from the grading is a polarized MHS.

    Items: nilpotency, weight_filtration, hodge_orthogonality and one
    positivity_l<l> item per nonzero primitive space.
    """
    sign_calibration = sign_calibration or get_sign_calibration()
    n = grading.n
    N, Q = to_qq(N), to_qq(Q)
    if N.shape != (n, n) or Q.shape != (n, n):
        raise ShapeMismatch(f"expected {n}x{n} matrices, got N {N.shape} and Q {Q.shape}")
    items: List[CheckResult] = []

    top = matrix_power(N, k + 1)
    items.append(CheckResult(name="nilpotency", passed=is_zero_matrix(top),
                             witness=None if is_zero_matrix(top) else {'power': k + 1}))

    try:
        W = weight_filtration(N).shifted(-k)
    except NotNilpotent as exc:
        items.append(CheckResult(name="weight_filtration", passed=False, detail=str(exc)))
    else:
        level = W.first_difference(grading.weight_steps())
        items.append(CheckResult(name="weight_filtration", passed=level is None,
                                 witness=None if level is None else {'level': level}))

    F = grading.hodge_filtration()
    orth_witness = None
    for a in range(0, k + 2):
        for u in F[a]:
            v = next((v for v in F[k - a + 1] if pair(Q, u, v)), None)
            if v is not None:
                orth_witness = {'a': a, 'u': format_vector(u), 'v': format_vector(v)}
                break
        if orth_witness:
            break
    items.append(CheckResult(name="hodge_orthogonality", passed=orth_witness is None, witness=orth_witness))

    sign = (-1) ** k if sign_calibration == 'geometric' else 1
    for l in range(0, k + 1):
        if (k + l) % 2:
            continue
        p = (k + l) // 2
        primitive = preimage(matrix_power(N, l + 1), [], within=grading.piece(p))
        if not primitive:
            continue
        S = gram(Q, primitive, right=matrix_power(N, l)) * QQ(sign)
        name = f"positivity_l{l}"
        try:
            verdict = definiteness_check(S)
        except InputError as exc:
            items.append(CheckResult(name=name, passed=False, detail=str(exc), witness=exc.witness))
            continue
        if verdict == Definiteness.POSITIVE_DEFINITE:
            items.append(CheckResult(name=name, passed=True))
        else:
            witness = _positivity_witness(S, primitive)
            witness['p'] = p
            items.append(CheckResult(name=name, passed=False, witness=witness, detail=verdict.value))

    return Certificate(kind="polarized_mhs", items=items)


# ============================================================
# Nilpotent orbits
# ============================================================

class NilpotentOrbit:
    """Commuting nilpotents N_1..N_r, limiting Hodge filtration F0, marked e, form Q."""

    def __init__(self, k: int, nilpotents: Sequence[DomainMatrix], hodge: Filtration,
                 e: Sequence[object], q: DomainMatrix):
        self.k = k
        self.q = to_qq(q)
        self.n = self.q.shape[0]
        self.nilpotents = [to_qq(N) for N in nilpotents]
        self.hodge = hodge
        self.e = _qq_vector(e)
        self._validate()

    @property
    def r(self) -> int:
        return len(self.nilpotents)

    def _validate(self) -> None:
        n = self.n
        for j, N in enumerate(self.nilpotents):
            if N.shape != (n, n):
                raise ShapeMismatch(f"N_{j + 1} has shape {N.shape}, expected {(n, n)}")
            if not is_zero_matrix(matrix_power(N, self.k + 1)):
                raise NotNilpotent(f"N_{j + 1}^{self.k + 1} is nonzero", witness=j + 1)
            if not is_infinitesimal_automorphism(self.q, N):
                raise MalformedOrbit(f"N_{j + 1} does not preserve Q", witness=j + 1)
        for i, Ni in enumerate(self.nilpotents):
            for j in range(i + 1, self.r):
                Nj = self.nilpotents[j]
                if Ni * Nj != Nj * Ni:
                    raise MalformedOrbit(f"N_{i + 1} and N_{j + 1} do not commute", witness=[i + 1, j + 1])
        if not any(self.e):
            raise MalformedOrbit("marked vector is zero")
        if not contains(self.hodge[self.k], [self.e], n):
            raise MalformedOrbit(f"marked vector is not in F^{self.k}")

    def combination(self, weights: Sequence[object]) -> DomainMatrix:
        return _combine(self.nilpotents, weights, self.n)

    def barycenter(self) -> DomainMatrix:
        return self.combination([1] * self.r)

    def bigrading(self) -> Bigrading:
        """I^{p,p} = F^p intersected with W_{2p}, W = W(sum N_j)[-k]."""
        W = weight_filtration(self.barycenter()).shifted(-self.k)
        pieces = {(p, p): intersect(self.hodge[p], W[2 * p], self.n) for p in range(self.k + 1)}
        return Bigrading(self.n, pieces)

    def change_coordinates(self, g: DomainMatrix) -> 'NilpotentOrbit':
        """The same orbit written in the basis formed by the columns of g."""
        g = to_qq(g)
        g_inv = g.inv()
        steps = {level: [apply(g_inv, v) for v in basis] for level, basis in self.hodge.steps.items()}
        return NilpotentOrbit(self.k, [g_inv * N * g for N in self.nilpotents],
                              Filtration(self.n, steps, increasing=self.hodge.increasing),
                              apply(g_inv, self.e), g.transpose() * self.q * g)

    def to_payload(self) -> Dict[str, object]:
        return {
            'k': self.k,
            'nilpotents': [[[format_scalar(from_rational(c)) for c in row] for row in N.to_list()]
                           for N in self.nilpotents],
            'hodge_filtration': self.hodge.to_payload(),
            'e': format_vector(self.e),
        }


def direct_sum(first: NilpotentOrbit, second: NilpotentOrbit) -> NilpotentOrbit:
    """Block sum with N_j = N_j' + N_j''; the marked vector is e' + 0."""
    if first.k != second.k or first.r != second.r:
        raise ShapeMismatch("direct sum needs equal weight and framing size")
    n1, n2 = first.n, second.n

    def block(a: DomainMatrix, b: DomainMatrix) -> DomainMatrix:
        rows = [list(row) + [QQ.zero] * n2 for row in a.to_list()]
        rows += [[QQ.zero] * n1 + list(row) for row in b.to_list()]
        return DomainMatrix(rows, (n1 + n2, n1 + n2), QQ)

    def embed(v: Vector, offset: int) -> Vector:
        out = [QQ.zero] * (n1 + n2)
        for i, c in enumerate(v):
            out[offset + i] = c
        return out

    steps = {}
    for p in range(0, first.k + 2):
        steps[p] = [embed(v, 0) for v in first.hodge[p]] + [embed(v, n1) for v in second.hodge[p]]
    hodge = Filtration(n1 + n2, steps, increasing=False)
    nilpotents = [block(a, b) for a, b in zip(first.nilpotents, second.nilpotents)]
    return NilpotentOrbit(first.k, nilpotents, hodge, embed(first.e, 0), block(first.q, second.q))


# ============================================================
# Polarizing cone
# ============================================================

# interior points e_j + eps * (1, ..., 1) approaching a boundary ray
RAY_APPROACH = (QQ(1, 100), QQ(1, 10000))


def cone_points(r: int, seed: Optional[int] = None, samples: Optional[int] = None) -> List[List]:
    """Barycenter, vertex-biased interior points, then seeded positive rationals."""
    seed = get_seed() if seed is None else seed
    samples = get_samples() if samples is None else samples
    points = [[QQ(1)] * r]
    if r > 1:
        for j in range(r):
            points.append([QQ(10) if i == j else QQ(1) for i in range(r)])
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        points.append([QQ(int(rng.integers(1, 10)), int(rng.integers(1, 10))) for _ in range(r)])
    return points


def _module_nilpotents(M: FrobeniusModule) -> List[DomainMatrix]:
    return [to_qq(N) for N in M.framing_nilpotents()]


def _combine(nilpotents: Sequence[DomainMatrix], weights: Sequence[object], n: int) -> DomainMatrix:
    total = DomainMatrix.zeros((n, n), QQ)
    for w, N in zip(weights, nilpotents):
        total = total + N * QQ.convert(w)
    return total


def _format_point(point: Sequence[object]) -> List[str]:
    return [format_scalar(from_rational(c)) for c in point]


def check_framing_cone(M: FrobeniusModule, seed: Optional[int] = None, samples: Optional[int] = None,
                       sign_calibration: Optional[str] = None) -> ConeVerdict:
    """Sampled lambda-independence of W(sum lambda_j N_j), plus polarization at the barycenter."""
    nilpotents = _module_nilpotents(M)
    points = cone_points(M.r, seed, samples)
    grading = hodge_tate_grading(M)
    q = to_qq(q_form(M))

    reference = None
    dependent: List[List[str]] = []
    for point in points:
        try:
            W = weight_filtration(_combine(nilpotents, point, M.n))
        except NotNilpotent:
            dependent.append(_format_point(point))
            continue
        if reference is None:
            reference = W
        elif W != reference:
            dependent.append(_format_point(point))
    log(f"cone: {len(points)} points, {len(dependent)} with a different weight filtration")

    polarization = check_polarized_mhs(grading, _combine(nilpotents, points[0], M.n), q, M.k,
                                       sign_calibration)
    return ConeVerdict(consistent=not dependent, samples=[_format_point(p) for p in points],
                       dependent=dependent, polarization=polarization)


# ============================================================
# Module <-> orbit
# ============================================================

def module_to_orbit(M: FrobeniusModule, seed: Optional[int] = None, samples: Optional[int] = None,
                    sign_calibration: Optional[str] = None) -> NilpotentOrbit:
    """N_j = L_{T_j}, F^p = sum_{a >= p} I^{a,a}, e = T_0; polarization certified on the cone samples."""
    report = validate_module(M)
    if not report.passed:
        first = report.failures()[0]
        raise InvalidModule(f"module fails {first.name}", witness={'check': first.name, 'witness': first.witness})
    nilpotents = _module_nilpotents(M)
    grading = hodge_tate_grading(M)
    q = to_qq(q_form(M))

    cone = check_framing_cone(M, seed, samples, sign_calibration)
    if not cone.consistent:
        raise ConeDegenerate("weight filtration depends on the cone point", witness=cone.dependent)
    for point in cone_points(M.r, seed, samples):
        cert = check_polarized_mhs(grading, _combine(nilpotents, point, M.n), q, M.k, sign_calibration)
        if not cert.passed:
            failed = cert.failures()[0]
            raise NotPolarizable(f"{failed.name} fails at lambda = {_format_point(point)}",
                                 witness={'lambda': _format_point(point), 'item': failed.name,
                                          'witness': failed.witness})
    for j, N in enumerate(nilpotents, start=1):
        if check_polarized_mhs(grading, N, q, M.k, sign_calibration).passed:
            continue
        # a ray that fails alone must still be a limit of polarizing points
        for eps in RAY_APPROACH:
            point = [QQ(1) + eps if i == j - 1 else eps for i in range(M.r)]
            cert = check_polarized_mhs(grading, _combine(nilpotents, point, M.n), q, M.k, sign_calibration)
            if not cert.passed:
                failed = cert.failures()[0]
                raise NotPolarizable(f"ray N_{j} lies outside the closure of the polarizing cone",
                                     witness={'ray': j, 'lambda': _format_point(point), 'item': failed.name,
                                              'witness': failed.witness})
        log(f"ray N_{j} alone does not polarize; it lies on the boundary of the cone")

    e = unit_vector(M.n, 0)
    return NilpotentOrbit(M.k, nilpotents, grading.hodge_filtration(), e, q)


def check_max_unipotent(orbit: NilpotentOrbit) -> MaxUnipotentVerdict:
    """dim I^{k,k} = 1, dim I^{k-1,k-1} = r and N_j(I^{k,k}) span I^{k-1,k-1}."""
    checks: List[CheckResult] = []
    try:
        grading = orbit.bigrading()
    except NotHodgeTate as exc:
        checks.append(CheckResult(name="hodge_tate", passed=False, witness=exc.witness, detail=str(exc)))
        return MaxUnipotentVerdict(holds=False, checks=checks)
    checks.append(CheckResult(name="hodge_tate", passed=True))

    k, n = orbit.k, orbit.n
    top, nxt = grading.piece(k), grading.piece(k - 1)
    checks.append(CheckResult(name="dim_top", passed=len(top) == 1, witness={'dim': len(top)}))
    checks.append(CheckResult(name="dim_next", passed=len(nxt) == orbit.r,
                              witness={'dim': len(nxt), 'r': orbit.r}))
    images = [apply(N, v) for N in orbit.nilpotents for v in top]
    spans = same_span(images, nxt, n)
    checks.append(CheckResult(name="span", passed=spans,
                              witness={'rank': rank_of(images, n), 'dim': len(nxt)}))
    marked = contains(top, [orbit.e], n)
    checks.append(CheckResult(name="marked_vector", passed=marked))
    return MaxUnipotentVerdict(holds=all(c.passed for c in checks), checks=checks)


def _pivot(v: Vector) -> int:
    return next(i for i, c in enumerate(v) if c)


def _rref_basis(vectors: Subspace, n: int) -> Subspace:
    if not vectors:
        return []
    ref, pivots = DomainMatrix([list(v) for v in vectors], (len(vectors), n), QQ).rref()
    return [list(row) for row in ref.to_list()[:len(pivots)]]


def _rational_sqrt(x) -> Optional[object]:
    x = QQ.convert(x)
    if x <= 0:
        return None
    num, den = int(x.numerator), int(x.denominator)
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn != num or rd * rd != den:
        return None
    return QQ(rn, rd)


def orbit_to_module(orbit: NilpotentOrbit) -> FrobeniusModule:
    """
    Frobenius module of a maximally unipotent Hodge-Tate orbit.

    V_2p = I^{k-p,k-p}; T_0 = e, T_j = N_j(e); lower-half pieces get their
    reduced echelon basis, upper-half pieces the B-dual basis sorted by pivot,
    and the middle piece (k even) must be self-dual up to rational scaling.
    """
    verdict = check_max_unipotent(orbit)
    if not verdict.holds:
        failed = [c for c in verdict.checks if not c.passed]
        if failed[0].name == "hodge_tate":
            raise NotHodgeTate(failed[0].detail or "limiting MHS is not Hodge-Tate", witness=failed[0].witness)
        raise NotMaximallyUnipotent(f"fails {failed[0].name}",
                                    witness=[{'check': c.name, 'witness': c.witness} for c in failed])
    k, n, Q = orbit.k, orbit.n, orbit.q
    grading = orbit.bigrading()

    def b_form(u: Vector, v: Vector, p_u: int):
        return QQ((-1) ** (k + p_u)) * pair(Q, u, v)

    bases: Dict[int, Subspace] = {0: [orbit.e], 1: [apply(N, orbit.e) for N in orbit.nilpotents]}
    for p in range(2, k + 1):
        piece = grading.piece(k - p)
        if 2 * p < k:
            bases[p] = _rref_basis(piece, n)
        elif 2 * p == k:
            bases[p] = _self_dual_middle(_rref_basis(piece, n), lambda u, v: b_form(u, v, p))
    for p in range(k + 1):
        if 2 * p <= k:
            continue
        lower = bases[k - p]
        if not lower:
            bases[p] = []
            continue
        piece = grading.piece(k - p)
        G = DomainMatrix([[b_form(w, u, p) for u in lower] for w in piece], (len(piece), len(lower)), QQ)
        if len(piece) != len(lower) or G.det() == 0:
            raise NotSelfDualizable(f"B pairs V_{2 * p} and V_{2 * (k - p)} degenerately", witness=p)
        X = G.inv().transpose().to_list()
        duals = [[sum((X[i][a] * piece[i][t] for i in range(len(piece))), QQ.zero) for t in range(n)]
                 for a in range(len(lower))]
        bases[p] = sorted(duals, key=_pivot)

    degrees = [2 * p for p in range(k + 1) for _ in bases[p]]
    vectors = [v for p in range(k + 1) for v in bases[p]]
    P = columns_matrix(vectors, n)
    if P.det() == 0:
        raise NotSelfDualizable("constructed basis is dependent")
    P_inv = P.inv()

    pairing = [[b_form(u, v, degrees[a] // 2) for v in vectors] for a, u in enumerate(vectors)]
    products: Dict[Tuple[int, int], Dict[int, object]] = {}
    framing = list(range(1, 1 + orbit.r))
    for j, N in zip(framing, orbit.nilpotents):
        rows = (P_inv * N * P).to_list()
        for a in range(n):
            image = {c: rows[c][a] for c in range(n) if rows[c][a]}
            if image:
                products[(j, a)] = image
    pairing = [[from_rational(c) for c in row] for row in pairing]
    products = {key: {c: from_rational(v) for c, v in image.items()} for key, image in products.items()}
    M = FrobeniusModule(k, degrees, pairing, products, framing, real=True)
    report = validate_module(M)
    if not report.passed:
        first = report.failures()[0]
        raise InvalidModule(f"reconstructed module fails {first.name}",
                            witness={'check': first.name, 'witness': first.witness})
    return M


def graded_isomorphism(first: FrobeniusModule, second: FrobeniusModule) -> Optional[DomainMatrix]:
    """
    Degree-preserving P with P T_0 = T_0, P L_j = L'_j P and P^T B' P = B.

    Column a of P is the image of first's T_a in second's basis; framing
    elements are matched by position. P is the solution of the linear system
    with its free parameters set to zero, which is the only solution when V
    is generated by T_0 under the framing.
    """
    if (first.k, first.degrees, first.r) != (second.k, second.degrees, second.r) \
            or not (first.real and second.real):
        return None
    n = first.n
    unknowns = [(c, a) for a in range(n) for c in range(n) if first.degrees[c] == first.degrees[a]]
    column = {key: i for i, key in enumerate(unknowns)}
    width = len(unknowns) + 1
    rows = []
    for j1, j2 in zip(first.framing, second.framing):
        L1, L2 = first.left_mult(j1).to_list(), second.left_mult(j2).to_list()
        for c in range(n):
            for a in range(n):
                # (P L1 - L2 P)[c][a]
                row = [QQ.zero] * width
                for b in range(n):
                    if L1[b][a] and (c, b) in column:
                        row[column[(c, b)]] += L1[b][a]
                    if L2[c][b] and (b, a) in column:
                        row[column[(b, a)]] -= L2[c][b]
                if any(row):
                    rows.append(row)
    unit = [QQ.zero] * width
    unit[column[(0, 0)]] = QQ(1)
    unit[-1] = QQ(1)
    rows.append(unit)
    ref, pivots = DomainMatrix(rows, (len(rows), width), QQ).rref()
    if len(unknowns) in pivots:
        return None
    values = ref.to_list()
    P = [[QQ.zero] * n for _ in range(n)]
    for i, p in enumerate(pivots):
        c, a = unknowns[p]
        P[c][a] = values[i][-1]
    P = DomainMatrix(P, (n, n), QQ)
    if P.det() == 0:
        return None
    moved = P.transpose() * to_qq(second.pairing_matrix()) * P
    if moved.to_list() != to_qq(first.pairing_matrix()).to_list():
        return None
    return P


def _self_dual_middle(basis: Subspace, b_form) -> Subspace:
    """
    Basis of the middle piece whose B-Gram matrix is a permutation matrix.

    A basis that already has one is kept. Otherwise vectors with a rational
    square norm are split off one at a time, and hyperbolic pairs where none
    is left.
    """
    size = len(basis)
    G = [[b_form(u, v) for v in basis] for u in basis]
    permutation = all(sum(1 for c in row if c) == 1 and all(c in (0, 1) for c in row) for row in G) \
        and all(G[i][j] == G[j][i] for i in range(size) for j in range(size))
    if permutation:
        return basis
    n = len(basis[0])
    remaining = list(basis)
    out: Subspace = []
    while remaining:
        unit = _square_vector(remaining, b_form)
        if unit is not None:
            chosen = [unit]
            remaining = [[c - b_form(w, unit) * x for c, x in zip(w, unit)] for w in remaining]
        else:
            pair_ = _hyperbolic_pair(remaining, b_form)
            if pair_ is None:
                raise NotSelfDualizable("middle piece has no rational self-dual basis",
                                        witness=[format_vector(v) for v in remaining])
            u, v = pair_
            chosen = [u, v]
            remaining = [[c - b_form(w, v) * x - b_form(w, u) * y for c, x, y in zip(w, u, v)]
                         for w in remaining]
        out.extend(chosen)
        remaining = span_basis(remaining, n)
    return out


def _square_vector(vectors: Subspace, b_form) -> Optional[Vector]:
    """u / sqrt(B(u, u)) for the first candidate u whose norm is a positive rational square."""
    candidates = list(vectors)
    for i, u in enumerate(vectors):
        for w in vectors[i + 1:]:
            candidates.append([a + b for a, b in zip(u, w)])
            candidates.append([a - b for a, b in zip(u, w)])
    for u in candidates:
        root = _rational_sqrt(b_form(u, u))
        if root is not None:
            return [c / root for c in u]
    return None


def _hyperbolic_pair(vectors: Subspace, b_form) -> Optional[Tuple[Vector, Vector]]:
    """(u, v) with B(u, u) = B(v, v) = 0 and B(u, v) = 1, or None."""
    isotropic = None
    for i, u in enumerate(vectors):
        if not b_form(u, u):
            isotropic = u
            break
        for w in vectors[i + 1:]:
            a, b, c = b_form(u, u), b_form(u, w), b_form(w, w)
            if not c:
                isotropic = w
                break
            disc = b * b - a * c
            root = QQ.zero if not disc else _rational_sqrt(disc)
            if root is not None:
                t = (-b + root) / c
                isotropic = [x + t * y for x, y in zip(u, w)]
                break
        if isotropic is not None:
            break
    if isotropic is None:
        return None
    partner = next((w for w in vectors if b_form(isotropic, w)), None)
    if partner is None:
        return None
    v = [c / b_form(isotropic, partner) for c in partner]
    half = b_form(v, v) / 2
    return isotropic, [c - half * x for c, x in zip(v, isotropic)]
