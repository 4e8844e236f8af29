"""
Graded V2-Frobenius modules

A module of weight k is V = V_0 + V_2 + ... + V_2k with an adapted basis
T_0..T_m sorted by degree, a pairing B with B(T_delta(a), T_b) = delta_ab,
and the action of degree-2 basis vectors stored as structure constants
A[(j, a)] = {c: coefficient of T_c in T_j * T_a}.
"""

from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from sympy import QQ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.rings import ring

from .errors import (GradingViolation, NotDivisorIndex, NotSelfDual, ShapeMismatch,
                     UnsupportedWeight)
from .linalg import is_infinitesimal_automorphism, qq_matrix, tau_matrix
from .models import CheckResult, ValidationReport
from .scalars import ONE, ZERO, TAU_DOMAIN, Scalar, format_scalar, is_tau_free, rational, scalar
from .series import SeriesMatrix

Products = Dict[Tuple[int, int], Dict[int, Scalar]]


class FrobeniusModule:
    """
    Framed graded V2-Frobenius module with an adapted basis.

    Construct through `from_data`, which accepts bases in any order, sorts
    them by degree and records the permutation (sorted index -> given index).
    """

    def __init__(self, k: int, degrees: Sequence[int], pairing: Sequence[Sequence[object]],
                 products: Mapping[Tuple[int, int], Mapping[int, object]], framing: Sequence[int],
                 real: bool = True, labels: Optional[Sequence[str]] = None,
                 permutation: Optional[Sequence[int]] = None):
        if k in (1, 2):
            raise UnsupportedWeight(f"weight {k} admits no deformations; k >= 3 is required")
        if k < 1:
            raise UnsupportedWeight(f"weight must be >= 3, got {k}")
        self.k = k
        self.degrees: Tuple[int, ...] = tuple(int(d) for d in degrees)
        n = len(self.degrees)
        if list(self.degrees) != sorted(self.degrees):
            raise ShapeMismatch("degrees must be sorted; use FrobeniusModule.from_data")
        for a, d in enumerate(self.degrees):
            if d % 2 or not 0 <= d <= 2 * k:
                raise ShapeMismatch(f"basis vector {a} has invalid degree {d}", witness=a)
        if len(pairing) != n or any(len(row) != n for row in pairing):
            raise ShapeMismatch(f"pairing must be {n}x{n}")
        self.pairing: Tuple[Tuple[Scalar, ...], ...] = tuple(tuple(scalar(c) for c in row) for row in pairing)

        clean: Products = {}
        for (j, a), image in products.items():
            for idx in (j, a):
                if not 0 <= idx < n:
                    raise ShapeMismatch(f"product index {idx} out of range", witness=[j, a])
            for c, value in image.items():
                if not 0 <= c < n:
                    raise ShapeMismatch(f"product ({j}, {a}) has target {c} out of range", witness=[j, a, c])
                value = scalar(value)
                if value:
                    clean.setdefault((j, a), {})[c] = value
        self.products = clean

        self.framing: Tuple[int, ...] = tuple(int(j) for j in framing)
        for j in self.framing:
            if not 0 <= j < n:
                raise ShapeMismatch(f"framing index {j} out of range", witness=j)
        self.real = bool(real)
        self.labels = tuple(labels) if labels is not None else tuple(f"T{a}" for a in range(n))
        if len(self.labels) != n:
            raise ShapeMismatch("labels must match the rank")
        self.permutation = tuple(permutation) if permutation is not None else tuple(range(n))

    @classmethod
    def from_data(cls, k: int, dims: Sequence[int], pairing: Mapping[Tuple[int, int], object],
                  products: Mapping[Tuple[int, int], Mapping[int, object]], framing: Sequence[int],
                  real: bool = True, degrees: Optional[Sequence[int]] = None,
                  labels: Optional[Sequence[str]] = None) -> 'FrobeniusModule':
        """Build from sparse data; `degrees` (if given) may list the basis in any order."""
        if k in (1, 2):
            raise UnsupportedWeight(f"weight {k} admits no deformations; k >= 3 is required")
        if len(dims) != k + 1:
            raise ShapeMismatch(f"dims has {len(dims)} entries, expected k+1 = {k + 1}")
        if any(d < 0 for d in dims):
            raise ShapeMismatch("dims must be non-negative")
        n = sum(dims)
        if degrees is None:
            degrees = [2 * p for p, d in enumerate(dims) for _ in range(d)]
        degrees = [int(d) for d in degrees]
        if len(degrees) != n:
            raise ShapeMismatch(f"{len(degrees)} degrees for rank {n}")
        for p, d in enumerate(dims):
            if degrees.count(2 * p) != d:
                raise ShapeMismatch(f"dims[{p}] = {d} but {degrees.count(2 * p)} basis vectors have degree {2 * p}")

        order = sorted(range(n), key=lambda a: (degrees[a], a))
        new_index = {old: new for new, old in enumerate(order)}

        def remap(i):
            if not 0 <= i < n:
                raise ShapeMismatch(f"index {i} out of range 0..{n - 1}", witness=i)
            return new_index[i]

        matrix = [[ZERO] * n for _ in range(n)]
        for (a, b), value in pairing.items():
            matrix[remap(a)][remap(b)] = scalar(value)
        mapped = {}
        for (j, a), image in products.items():
            mapped[(remap(j), remap(a))] = {remap(c): v for c, v in image.items()}
        sorted_labels = [labels[old] for old in order] if labels is not None else None
        return cls(k, [degrees[old] for old in order], matrix, mapped,
                   [remap(j) for j in framing], real=real, labels=sorted_labels, permutation=order)

    # ------------------------------------------------------------------
    # Basis metadata
    # ------------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def m(self) -> int:
        return self.n - 1

    @property
    def r(self) -> int:
        return len(self.framing)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.degrees.count(2 * p) for p in range(self.k + 1))

    def degree(self, a: int) -> int:
        return self.degrees[a]

    def indices_of_degree(self, d: int) -> List[int]:
        return [a for a, e in enumerate(self.degrees) if e == d]

    @property
    def divisor_indices(self) -> List[int]:
        return self.indices_of_degree(2)

    def position(self, j: int) -> int:
        """1-based q-variable of framing element T_j."""
        if j not in self.framing:
            raise NotDivisorIndex(f"T{j} is not a framing element", witness=j)
        return self.framing.index(j) + 1

    def divisor_at(self, position: int) -> int:
        return self.framing[position - 1]

    @cached_property
    def delta(self) -> Tuple[int, ...]:
        """delta(a) with B(T_delta(a), T_b) = delta_ab; NotSelfDual if undefined."""
        n = self.n
        out = [None] * n
        for a in range(n):
            for i in range(n):
                row = self.pairing[i]
                if all((row[b] == ONE) if b == a else (not row[b]) for b in range(n)):
                    out[a] = i
                    break
            if out[a] is None:
                raise NotSelfDual(f"no basis vector pairs to 1 with T{a} alone", witness=a)
        if sorted(out) != list(range(n)):
            raise NotSelfDual("delta is not a permutation")
        return tuple(out)

    def pairing_value(self, u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
        total = ZERO
        for a, ua in enumerate(u):
            if not ua:
                continue
            for b, vb in enumerate(v):
                if vb and self.pairing[a][b]:
                    total += ua * self.pairing[a][b] * vb
        return total

    def pairing_matrix(self) -> DomainMatrix:
        return qq_matrix(self.pairing) if self.real else tau_matrix(self.pairing)

    def left_mult_rows(self, j: int) -> List[List[Scalar]]:
        n = self.n
        rows = [[ZERO] * n for _ in range(n)]
        for a in range(n):
            for c, value in self.products.get((j, a), {}).items():
                rows[c][a] = value
        return rows

    def left_mult(self, j: int) -> DomainMatrix:
        """Matrix of L_{T_j}; column a is T_j * T_a."""
        rows = self.left_mult_rows(j)
        return qq_matrix(rows) if self.real else tau_matrix(rows)

    def framing_nilpotents(self) -> List[DomainMatrix]:
        return [self.left_mult(j) for j in self.framing]

    def left_multiplication(self, weights: Sequence[object]) -> DomainMatrix:
        """L_w for w = sum_j weights[j] T_{framing[j]}."""
        if len(weights) != self.r:
            raise ShapeMismatch(f"{len(weights)} weights for r = {self.r} framing elements")
        domain = QQ if self.real else TAU_DOMAIN
        total = DomainMatrix.zeros((self.n, self.n), domain)
        for w, j in zip(weights, self.framing):
            total = total + self.left_mult(j) * domain.convert(w)
        return total

    def product_vector(self, j: int, v: Sequence[Scalar]) -> List[Scalar]:
        out = [ZERO] * self.n
        for a, va in enumerate(v):
            if not va:
                continue
            for c, value in self.products.get((j, a), {}).items():
                out[c] += value * va
        return out

    def is_real_data(self) -> bool:
        values = [c for row in self.pairing for c in row]
        values += [c for image in self.products.values() for c in image.values()]
        return all(is_tau_free(c) for c in values)

    def with_products(self, products: Products) -> 'FrobeniusModule':
        return FrobeniusModule(self.k, self.degrees, self.pairing, products, self.framing,
                               real=self.real, labels=self.labels, permutation=self.permutation)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrobeniusModule):
            return NotImplemented
        return (self.k, self.degrees, self.pairing, self.products, self.framing, self.real) == \
            (other.k, other.degrees, other.pairing, other.products, other.framing, other.real)

    __hash__ = None

    def __repr__(self) -> str:
        return f"FrobeniusModule(k={self.k}, dims={self.dims}, framing={self.framing})"


# ============================================================
# Validation
# ============================================================

def validate_module(M: FrobeniusModule) -> ValidationReport:
    """Check every module axiom; each failing check carries a witness."""
    n, k = M.n, M.k
    checks: List[CheckResult] = []

    unit_ok = M.dims[0] == 1 and M.degrees[0] == 0
    checks.append(CheckResult(name="unit", passed=unit_ok,
                              witness=None if unit_ok else {'dims0': M.dims[0]}))

    bad_pair = None
    for a in range(n):
        for b in range(n):
            if M.pairing[a][b] and M.degrees[a] + M.degrees[b] != 2 * k:
                bad_pair = [a, b]
                break
        if bad_pair:
            break
    checks.append(CheckResult(name="pairing_grading", passed=bad_pair is None, witness=bad_pair))

    asym = next(([a, b] for a in range(n) for b in range(a + 1, n)
                 if M.pairing[a][b] != M.pairing[b][a]), None)
    checks.append(CheckResult(name="pairing_symmetric", passed=asym is None, witness=asym))

    dual_witness = None
    for a in range(n):
        hit = any(all((M.pairing[i][b] == ONE) if b == a else (not M.pairing[i][b]) for b in range(n))
                  for i in range(n))
        if not hit:
            dual_witness = {'a': a, 'detail': f"B(T_delta({a}), T_{a}) != 1 for every candidate"}
            break
    if dual_witness is None:
        try:
            delta = M.delta
        except NotSelfDual as exc:
            dual_witness = {'a': exc.witness}
        else:
            bad = next((a for a in range(n) if delta[delta[a]] != a
                        or M.degrees[delta[a]] != 2 * k - M.degrees[a]), None)
            if bad is not None:
                dual_witness = {'a': bad}
    checks.append(CheckResult(name="self_duality", passed=dual_witness is None, witness=dual_witness))

    degree_witness = None
    for (j, a), image in sorted(M.products.items()):
        if M.degrees[j] != 2:
            degree_witness = {'j': j, 'a': a, 'detail': 'left factor is not of degree 2'}
            break
        bad_c = next((c for c in sorted(image) if M.degrees[c] != M.degrees[a] + 2), None)
        if bad_c is not None:
            degree_witness = {'j': j, 'a': a, 'c': bad_c}
            break
    checks.append(CheckResult(name="degree_two_action", passed=degree_witness is None, witness=degree_witness))

    unit_witness = None
    for j in M.divisor_indices:
        if M.products.get((j, 0), {}) != {j: ONE}:
            unit_witness = {'j': j}
            break
    checks.append(CheckResult(name="unit_action", passed=unit_witness is None, witness=unit_witness))

    frob_witness = None
    for j in M.divisor_indices:
        for a in range(n):
            ja = M.product_vector(j, _basis(n, a))
            for b in range(a):
                jb = M.product_vector(j, _basis(n, b))
                lhs = M.pairing_value(ja, _basis(n, b))
                rhs = M.pairing_value(_basis(n, a), jb)
                if lhs != rhs:
                    frob_witness = {'w': j, 'v1': a, 'v2': b,
                                    'lhs': format_scalar(lhs), 'rhs': format_scalar(rhs)}
                    break
            if frob_witness:
                break
        if frob_witness:
            break
    checks.append(CheckResult(name="frobenius_condition", passed=frob_witness is None, witness=frob_witness))

    comm_witness = None
    divisors = M.divisor_indices
    for x, j in enumerate(divisors):
        for l in divisors[x + 1:]:
            for a in range(n):
                lhs = M.product_vector(j, M.product_vector(l, _basis(n, a)))
                rhs = M.product_vector(l, M.product_vector(j, _basis(n, a)))
                if lhs != rhs:
                    comm_witness = {'j': j, 'l': l, 'a': a}
                    break
            if comm_witness:
                break
        if comm_witness:
            break
    checks.append(CheckResult(name="commutativity", passed=comm_witness is None, witness=comm_witness))

    if M.real:
        real_ok = M.is_real_data()
        checks.append(CheckResult(name="realness", passed=real_ok,
                                  detail=None if real_ok else "tau occurs in module data"))

    framing_witness = None
    if len(set(M.framing)) != len(M.framing):
        framing_witness = {'detail': 'repeated framing index'}
    elif sorted(M.framing) != sorted(divisors):
        framing_witness = {'framing': list(M.framing), 'degree_two': divisors}
    checks.append(CheckResult(name="framing", passed=framing_witness is None, witness=framing_witness))

    return ValidationReport(subject="module", checks=checks)


def _basis(n: int, a: int) -> List[Scalar]:
    return [ONE if i == a else ZERO for i in range(n)]


# ============================================================
# Classical potential
# ============================================================

class CubicPotential:
    """Cubic polynomial in z_0..z_m (a sympy PolyElement over Q(tau))."""

    def __init__(self, n: int, poly=None):
        self.n = n
        self.ring, *self.gens = ring(",".join(f"z{a}" for a in range(n)), TAU_DOMAIN)
        self.poly = self.ring.zero if poly is None else poly.set_ring(self.ring)

    @classmethod
    def from_coefficients(cls, n: int, coefficients: Mapping[Tuple[int, int, int], object]) -> 'CubicPotential':
        """Coefficients keyed by index triples; each triple gives one monomial z_a z_b z_c."""
        phi = cls(n)
        total = phi.ring.zero
        for (a, b, c), value in coefficients.items():
            total += phi.gens[a] * phi.gens[b] * phi.gens[c] * scalar(value)
        phi.poly = total
        return phi

    def monomial_coefficients(self) -> Dict[Tuple[int, int, int], Scalar]:
        """Sorted index triple -> coefficient of the monomial."""
        out = {}
        for monom, coeff in self.poly.terms():
            triple = tuple(sorted(i for i, e in enumerate(monom) for _ in range(e)))
            out[triple] = coeff
        return out

    def partial(self, *indices: int):
        p = self.poly
        for i in indices:
            p = p.diff(self.gens[i])
        return p

    def third_partial(self, i: int, j: int, l: int) -> Scalar:
        p = self.partial(i, j, l)
        return p.get(self.ring.zero_monom, TAU_DOMAIN.zero)

    def second_partial(self, a: int, b: int) -> Dict[int, Scalar]:
        """Linear form d^2 phi / dz_a dz_b as {variable: coefficient}."""
        p = self.partial(a, b)
        out = {}
        for monom, coeff in p.terms():
            if sum(monom) != 1:
                continue
            out[monom.index(1)] = coeff
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, CubicPotential):
            return NotImplemented
        return self.n == other.n and self.poly == other.poly

    __hash__ = None

    def __repr__(self) -> str:
        return f"CubicPotential({self.poly})"


def coefficient_c(k: int, degree: int):
    if k == 3 and degree == 2:
        return rational(1, 6)
    if k != 3 and degree in (2, 2 * k - 4):
        return rational(1, 4)
    return rational(1, 2)


def classical_potential(M: FrobeniusModule) -> CubicPotential:
    """phi_0(z) = sum_{deg j = 2, a, b} z_j z_a z_b C(deg a) B(T_j * T_a, T_b)."""
    phi = CubicPotential(M.n)
    z = phi.gens
    total = phi.ring.zero
    for j in M.divisor_indices:
        for a in range(M.n):
            image = M.products.get((j, a))
            if not image:
                continue
            c_a = coefficient_c(M.k, M.degrees[a])
            for b in range(M.n):
                value = sum((v * M.pairing[c][b] for c, v in image.items()), ZERO)
                if value:
                    total += z[j] * z[a] * z[b] * (c_a * value)
    phi.poly = total
    return phi


def structure_constants_from_cubic(M: FrobeniusModule, phi0: CubicPotential) -> Products:
    """A_ja^c = d^3 phi_0 / dz_j dz_a dz_delta(c) for deg c = deg a + 2."""
    if phi0.n != M.n:
        raise ShapeMismatch(f"cubic in {phi0.n} variables for a rank-{M.n} module")
    for monom, coeff in phi0.poly.terms():
        weight = sum(M.degrees[i] * e for i, e in enumerate(monom))
        if sum(monom) != 3 or weight != 2 * M.k:
            raise GradingViolation(f"monomial {monom} has weighted degree {weight}, expected {2 * M.k}",
                                   witness={'monomial': list(monom), 'coefficient': format_scalar(coeff)})
    delta = M.delta
    products: Products = {}
    for j in M.divisor_indices:
        for a in range(M.n):
            for c in M.indices_of_degree(M.degrees[a] + 2):
                value = phi0.third_partial(j, a, delta[c])
                if value:
                    products.setdefault((j, a), {})[c] = value
    return products


# ============================================================
# Signed pairing
# ============================================================

def q_form(M: FrobeniusModule) -> DomainMatrix:
    """Q(T_a, T_b) = (-1)^(k + deg(a)/2) B(T_a, T_b)."""
    rows = [[(-1) ** (M.k + M.degrees[a] // 2) * M.pairing[a][b] for b in range(M.n)] for a in range(M.n)]
    return qq_matrix(rows) if M.real else tau_matrix(rows)


def hodge_numbers(M: FrobeniusModule) -> Dict[int, int]:
    """h^{p,p} = dim V_{2(k-p)}."""
    return {p: M.dims[M.k - p] for p in range(M.k + 1)}


def infinitesimal_automorphism(q: DomainMatrix, x) -> bool:
    """Q(Xu, v) + Q(u, Xv) = 0 for a constant or series matrix X."""
    if isinstance(x, SeriesMatrix):
        qs = SeriesMatrix.from_constant(q, x.r, x.order)
        return (x.transpose() @ qs + qs @ x).is_zero
    return is_infinitesimal_automorphism(q, x)
