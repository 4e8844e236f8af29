"""
Exact linear algebra over QQ and Q(tau)

Thin helpers around sympy's DomainMatrix: spans, kernels, intersections,
nilpotent exponentials and the definiteness test used for polarizations.
Vectors are plain lists of domain elements; subspaces are lists of vectors.
"""

from enum import Enum
from typing import List, Optional, Sequence

from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .errors import NotNilpotent, NotSymmetric, ShapeMismatch, TauPresent
from .scalars import TAU_DOMAIN, format_scalar, from_rational, is_tau_free, scalar, to_rational

Vector = List
Subspace = List[Vector]


class Definiteness(str, Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    NEGATIVE_DEFINITE = "NegativeDefinite"
    INDEFINITE = "Indefinite"
    DEGENERATE = "Degenerate"


# ============================================================
# Construction and conversion
# ============================================================

def qq_matrix(rows: Sequence[Sequence[object]]) -> DomainMatrix:
    """DomainMatrix over QQ from rows of rationals or tau-free scalars."""
    converted = []
    for row in rows:
        out = []
        for c in row:
            if hasattr(c, 'numer') and hasattr(c, 'field'):
                c = to_rational(c)
            out.append(QQ.convert(c))
        converted.append(out)
    ncols = len(converted[0]) if converted else 0
    return DomainMatrix(converted, (len(converted), ncols), QQ)


def tau_matrix(rows: Sequence[Sequence[object]]) -> DomainMatrix:
    converted = [[scalar(c) for c in row] for row in rows]
    ncols = len(converted[0]) if converted else 0
    return DomainMatrix(converted, (len(converted), ncols), TAU_DOMAIN)


def to_qq(m: DomainMatrix) -> DomainMatrix:
    """Convert a tau-domain matrix to QQ; TauPresent if any entry depends on tau."""
    if m.domain == QQ:
        return m
    rows = m.to_list()
    for i, row in enumerate(rows):
        for j, c in enumerate(row):
            if not is_tau_free(c):
                raise TauPresent(f"entry ({i}, {j}) = {format_scalar(c)} depends on tau",
                                 witness=[i, j])
    return qq_matrix(rows)


def to_tau(m: DomainMatrix) -> DomainMatrix:
    if m.domain == TAU_DOMAIN:
        return m
    return DomainMatrix([[from_rational(c) for c in row] for row in m.to_list()], m.shape, TAU_DOMAIN)


def identity(n: int, domain=QQ) -> DomainMatrix:
    return DomainMatrix.eye(n, domain)


def zeros(n: int, domain=QQ) -> DomainMatrix:
    return DomainMatrix.zeros((n, n), domain)


def unit_vector(n: int, i: int, domain=QQ) -> Vector:
    return [domain.one if k == i else domain.zero for k in range(n)]


def columns_matrix(vectors: Sequence[Vector], n: int, domain=QQ) -> DomainMatrix:
    """n x len(vectors) matrix with the given vectors as columns."""
    if not vectors:
        return DomainMatrix.zeros((n, 0), domain)
    rows = [[v[i] for v in vectors] for i in range(n)]
    return DomainMatrix(rows, (n, len(vectors)), domain)


def apply(m: DomainMatrix, v: Vector) -> Vector:
    rows = m.to_list()
    zero = m.domain.zero
    return [sum((a * b for a, b in zip(row, v)), zero) for row in rows]


def is_zero_matrix(m: DomainMatrix) -> bool:
    return all(not c for row in m.to_list() for c in row)


# ============================================================
# Subspaces
# ============================================================

def span_basis(vectors: Sequence[Vector], n: int, domain=QQ) -> Subspace:
    """Independent subset of the vectors spanning the same space (pivot columns)."""
    vectors = [list(v) for v in vectors]
    if not vectors:
        return []
    _, pivots = columns_matrix(vectors, n, domain).rref()
    return [vectors[p] for p in pivots]


def rank_of(vectors: Sequence[Vector], n: int, domain=QQ) -> int:
    return len(span_basis(vectors, n, domain))


def kernel(m: DomainMatrix) -> Subspace:
    """Basis of the right kernel."""
    nrows, ncols = m.shape
    if ncols == 0:
        return []
    if nrows == 0 or is_zero_matrix(m):
        return [unit_vector(ncols, i, m.domain) for i in range(ncols)]
    return [list(row) for row in m.nullspace().to_list()]


def image(m: DomainMatrix) -> Subspace:
    n = m.shape[0]
    cols = [[row[j] for row in m.to_list()] for j in range(m.shape[1])]
    return span_basis(cols, n, m.domain)


def contains(space: Subspace, vectors: Sequence[Vector], n: int, domain=QQ) -> bool:
    base = rank_of(space, n, domain)
    return rank_of(list(space) + list(vectors), n, domain) == base


def same_span(a: Subspace, b: Subspace, n: int, domain=QQ) -> bool:
    ra = rank_of(a, n, domain)
    return ra == rank_of(b, n, domain) and rank_of(list(a) + list(b), n, domain) == ra


def preimage(m: DomainMatrix, space: Subspace, within: Optional[Subspace] = None) -> Subspace:
    """{u in within : m u in space}; `within` defaults to the whole domain space."""
    n = m.shape[1]
    domain = m.domain
    if within is None:
        within = [unit_vector(n, i, domain) for i in range(n)]
    if not within:
        return []
    image_cols = [apply(m, u) for u in within]
    k = len(within)
    # solve sum_i x_i m(u_i) - sum_s y_s v_s = 0
    rows = []
    for r_index in range(m.shape[0]):
        row = [image_cols[i][r_index] for i in range(k)]
        row += [-v[r_index] for v in space]
        rows.append(row)
    system = DomainMatrix(rows, (m.shape[0], k + len(space)), domain)
    solutions = kernel(system)
    vectors = []
    for sol in solutions:
        x = sol[:k]
        vectors.append([sum((x[i] * within[i][t] for i in range(k)), domain.zero) for t in range(n)])
    return span_basis(vectors, n, domain)


def intersect(a: Subspace, b: Subspace, n: int, domain=QQ) -> Subspace:
    if not a or not b:
        return []
    rows = [[a[i][t] for i in range(len(a))] + [-b[s][t] for s in range(len(b))] for t in range(n)]
    system = DomainMatrix(rows, (n, len(a) + len(b)), domain)
    vectors = []
    for sol in kernel(system):
        vectors.append([sum((sol[i] * a[i][t] for i in range(len(a))), domain.zero) for t in range(n)])
    return span_basis(vectors, n, domain)


def coordinates(basis: Subspace, v: Vector, n: int, domain=QQ) -> Vector:
    """Coefficients of v in the given independent vectors."""
    rows = [[basis[i][t] for i in range(len(basis))] + [v[t]] for t in range(n)]
    ref, pivots = DomainMatrix(rows, (n, len(basis) + 1), domain).rref()
    if len(basis) in pivots:
        raise ShapeMismatch("vector is not in the span")
    ref_rows = ref.to_list()
    out = [domain.zero] * len(basis)
    for row_index, p in enumerate(pivots):
        out[p] = ref_rows[row_index][len(basis)]
    return out


# ============================================================
# Nilpotent endomorphisms
# ============================================================

def nilpotency_index(m: DomainMatrix) -> int:
    """Smallest e with m**e = 0; NotNilpotent otherwise."""
    n = m.shape[0]
    power = identity(n, m.domain)
    for e in range(n + 1):
        if is_zero_matrix(power):
            return e
        power = power * m
    raise NotNilpotent(f"matrix is not nilpotent (power {n} is nonzero)")


def exp_nilpotent(m: DomainMatrix) -> DomainMatrix:
    n = m.shape[0]
    nilpotency_index(m)
    out = identity(n, m.domain)
    power = identity(n, m.domain)
    fact = 1
    for e in range(1, n + 1):
        power = power * m
        if is_zero_matrix(power):
            break
        fact *= e
        out = out + power * m.domain.convert(QQ(1, fact))
    return out


def log_unipotent(m: DomainMatrix) -> DomainMatrix:
    n = m.shape[0]
    x = m - identity(n, m.domain)
    nilpotency_index(x)
    out = zeros(n, m.domain)
    power = identity(n, m.domain)
    for e in range(1, n + 1):
        power = power * x
        if is_zero_matrix(power):
            break
        out = out + power * m.domain.convert(QQ((-1) ** (e + 1), e))
    return out


def is_infinitesimal_automorphism(q: DomainMatrix, x: DomainMatrix) -> bool:
    """Q(Xu, v) + Q(u, Xv) = 0, i.e. X^T Q + Q X = 0."""
    return is_zero_matrix(x.transpose() * q + q * x)


# ============================================================
# Definiteness
# ============================================================

def _congruence_diagonal(rows: List[List]) -> List:
    """Diagonal of a symmetric matrix after exact congruence diagonalization."""
    a = [list(row) for row in rows]
    n = len(a)
    diagonal = []
    active = list(range(n))
    while active:
        pivot = next((i for i in active if a[i][i]), None)
        if pivot is None:
            pair = next(((i, j) for i in active for j in active if i < j and a[i][j]), None)
            if pair is None:
                diagonal.extend([QQ.zero] * len(active))
                break
            i, j = pair
            # row/column i += row/column j makes a nonzero diagonal 2*a_ij
            for t in range(n):
                a[i][t] += a[j][t]
            for t in range(n):
                a[t][i] += a[t][j]
            pivot = i
        p = a[pivot][pivot]
        diagonal.append(p)
        active.remove(pivot)
        for i in active:
            factor = a[i][pivot] / p
            if not factor:
                continue
            for t in range(n):
                a[i][t] -= factor * a[pivot][t]
            for t in range(n):
                a[t][i] -= factor * a[t][pivot]
    return diagonal


def definiteness_check(s: DomainMatrix) -> Definiteness:
    """
    Classify a symmetric tau-free matrix.

    Sylvester's criterion on leading principal minors decides the
    nonsingular-minor case; a zero minor falls back to congruence
    diagonalization and counts signs.
    """
    rows = to_qq(s).to_list() if s.domain != QQ else s.to_list()
    n = len(rows)
    for i in range(n):
        if len(rows[i]) != n:
            raise ShapeMismatch("definiteness_check needs a square matrix")
        for j in range(i + 1, n):
            if rows[i][j] != rows[j][i]:
                raise NotSymmetric(f"entries ({i}, {j}) and ({j}, {i}) differ", witness=[i, j])
    if n == 0:
        return Definiteness.POSITIVE_DEFINITE

    qq = DomainMatrix(rows, (n, n), QQ)
    minors = [qq.extract(list(range(i)), list(range(i))).det() for i in range(1, n + 1)]
    if all(minors):
        if all(m > 0 for m in minors):
            return Definiteness.POSITIVE_DEFINITE
        if all((m > 0) if i % 2 else (m < 0) for i, m in enumerate(minors)):
            return Definiteness.NEGATIVE_DEFINITE
        return Definiteness.INDEFINITE

    diagonal = _congruence_diagonal(rows)
    positive = any(d > 0 for d in diagonal)
    negative = any(d < 0 for d in diagonal)
    if positive and negative:
        return Definiteness.INDEFINITE
    return Definiteness.DEGENERATE


def gram(form: DomainMatrix, basis: Subspace, right: Optional[DomainMatrix] = None) -> DomainMatrix:
    """Matrix of (u, v) -> u^T form (right v) on the given vectors."""
    k = len(basis)
    n = form.shape[0]
    domain = form.domain
    images = [apply(right, v) if right is not None else v for v in basis]
    left = [apply(form.transpose(), u) for u in basis]
    rows = [[sum((left[i][t] * images[j][t] for t in range(n)), domain.zero) for j in range(k)]
            for i in range(k)]
    return DomainMatrix(rows, (k, k), domain)


def format_vector(v: Vector) -> List[str]:
    return [format_scalar(c if hasattr(c, 'numer') and hasattr(c, 'field') else from_rational(c)) for c in v]


def matrix_power(m: DomainMatrix, e: int) -> DomainMatrix:
    out = identity(m.shape[0], m.domain)
    for _ in range(e):
        out = out * m
    return out


def pair(form: DomainMatrix, u: Vector, v: Vector):
    """u^T form v."""
    return sum((a * b for a, b in zip(u, apply(form, v))), form.domain.zero)
