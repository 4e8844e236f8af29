"""
Truncated multivariate series

QSeries are power series in q_1..q_r over Q(tau) truncated at total degree D.
LogPolySeries tensor them with polynomials in z_1..z_r, where z_j stands for
log(q_j)/tau. Both wrap a sympy PolyElement of `series_ring(r)`, the ring
Q(tau)[q_1..q_r, z_1..z_r]; products drop every term of q-degree above D.
SeriesMatrix is a sparse DomainMatrix over the same ring; column a of a matrix
is the image of basis vector T_a.

Derivatives are taken in z-coordinates: D_j = tau*q_j*d/dq_j + d/dz_j, so
D_j q^m = tau*m_j*q^m. Variable indices j are 1-based in the public API.
"""

from functools import lru_cache
from types import MappingProxyType
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from sympy.polys.matrices import DomainMatrix
from sympy.polys.rings import PolyElement, PolyRing, ring

from .errors import InconsistentPrimitive, LogPartNonzero, NotClosed, NotNilpotent, SeriesMismatch, ShapeMismatch
from .scalars import ONE, TAU_DOMAIN, ZERO, Scalar, conjugate, format_scalar, is_tau_free, rational, scalar, tau

Exponent = Tuple[int, ...]


@lru_cache(maxsize=None)
def series_ring(r: int) -> PolyRing:
    """Q(tau)[q_1..q_r, z_1..z_r]; a ring monomial is the q-exponent followed by the z-exponent."""
    names = [f"q{j}" for j in range(1, r + 1)] + [f"z{j}" for j in range(1, r + 1)]
    R, *_ = ring(",".join(names), TAU_DOMAIN)
    return R


@lru_cache(maxsize=None)
def series_domain(r: int):
    return series_ring(r).to_domain()


def degree_key(m: Exponent):
    return (sum(m), m)


def _unit(r: int, j: int) -> Exponent:
    return tuple(1 if i == j else 0 for i in range(r))


def _is_scalar(x) -> bool:
    return isinstance(x, (int, Scalar)) and not isinstance(x, bool)


def _variable(r: int, j: int) -> int:
    if not 1 <= j <= r:
        raise ShapeMismatch(f"variable index {j} out of range 1..{r}", witness={'variable': j, 'r': r})
    return j - 1


def _truncated(p: PolyElement, r: int, order: int) -> PolyElement:
    """p without the terms of q-degree above order."""
    if all(sum(m[:r]) <= order for m in p.itermonoms()):
        return p
    return p.ring.from_dict({m: c for m, c in p.iterterms() if sum(m[:r]) <= order})


def _is_pure_poly(p: PolyElement, r: int) -> bool:
    return all(not any(m[r:]) for m in p.itermonoms())


def _dz_poly(p: PolyElement, r: int, i: int) -> PolyElement:
    R = p.ring
    q, z = R.gens[i], R.gens[r + i]
    return (p.diff(q) * q).mul_ground(tau) + p.diff(z)


def _conjugate_poly(p: PolyElement) -> PolyElement:
    return p.ring.from_dict({m: conjugate(c) for m, c in p.iterterms()})


def _poly_tau_free(p: PolyElement) -> bool:
    return all(is_tau_free(c) for c in p.itercoeffs())


def _wrap(r: int, order: int, p: PolyElement) -> 'Series':
    if _is_pure_poly(p, r):
        return QSeries._raw(r, order, p)
    return LogPolySeries._raw(r, order, p)


# ============================================================
# QSeries
# ============================================================

class QSeries:
    """Truncated power series in q_1..q_r with Q(tau) coefficients."""

    __slots__ = ('r', 'order', '_poly')

    def __init__(self, r: int, order: int, coeffs: Optional[Mapping[Exponent, object]] = None):
        if r < 0 or order < 0:
            raise SeriesMismatch(f"invalid series shape r={r}, order={order}")
        self.r = r
        self.order = order
        pad = (0,) * r
        terms: Dict[Exponent, Scalar] = {}
        for m, c in (coeffs or {}).items():
            m = tuple(int(e) for e in m)
            if len(m) != r:
                raise SeriesMismatch(f"exponent {m} has length {len(m)}, expected {r}")
            if any(e < 0 for e in m):
                raise SeriesMismatch(f"negative exponent {m}")
            if sum(m) > order:
                continue
            terms[m + pad] = terms.get(m + pad, ZERO) + scalar(c)
        self._poly = series_ring(r).from_dict({m: c for m, c in terms.items() if c})

    @classmethod
    def _raw(cls, r: int, order: int, poly: PolyElement) -> 'QSeries':
        s = object.__new__(cls)
        s.r = r
        s.order = order
        s._poly = poly
        return s

    @classmethod
    def zero(cls, r: int, order: int) -> 'QSeries':
        return cls._raw(r, order, series_ring(r).zero)

    @classmethod
    def constant(cls, c, r: int, order: int) -> 'QSeries':
        return cls(r, order, {(0,) * r: c})

    @classmethod
    def monomial(cls, m: Exponent, c, r: int, order: int) -> 'QSeries':
        return cls(r, order, {tuple(m): c})

    @classmethod
    def variable(cls, j: int, r: int, order: int) -> 'QSeries':
        """q_j (1-based)."""
        return cls(r, order, {_unit(r, j - 1): 1})

    @property
    def poly(self) -> PolyElement:
        return self._poly

    @property
    def coeffs(self) -> Mapping[Exponent, Scalar]:
        r = self.r
        return MappingProxyType({m[:r]: c for m, c in self._poly.iterterms()})

    def __getitem__(self, m: Exponent) -> Scalar:
        return self._poly.get(tuple(m) + (0,) * self.r, ZERO)

    def items(self) -> List[Tuple[Exponent, Scalar]]:
        return sorted(self.coeffs.items(), key=lambda kv: degree_key(kv[0]))

    def __bool__(self) -> bool:
        return bool(self._poly)

    @property
    def is_zero(self) -> bool:
        return not self._poly

    @property
    def constant_term(self) -> Scalar:
        return self._poly.get(self._poly.ring.zero_monom, ZERO)

    @property
    def vanishes_at_zero(self) -> bool:
        return not self.constant_term

    def is_tau_free(self) -> bool:
        return _poly_tau_free(self._poly)

    def lowest_monomial(self) -> Optional[Exponent]:
        if not self._poly:
            return None
        return min((m[:self.r] for m in self._poly.itermonoms()), key=degree_key)

    def _check(self, other: 'QSeries') -> None:
        if self.r != other.r or self.order != other.order:
            raise SeriesMismatch(
                f"series mismatch: (r={self.r}, D={self.order}) vs (r={other.r}, D={other.order})")

    def __add__(self, other):
        if isinstance(other, LogPolySeries):
            return NotImplemented
        if _is_scalar(other):
            other = QSeries.constant(other, self.r, self.order)
        self._check(other)
        return QSeries._raw(self.r, self.order, self._poly + other._poly)

    __radd__ = __add__

    def __neg__(self) -> 'QSeries':
        return QSeries._raw(self.r, self.order, -self._poly)

    def __sub__(self, other):
        if isinstance(other, LogPolySeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> 'QSeries':
        return QSeries._raw(self.r, self.order, self._poly.mul_ground(scalar(c)))

    def __mul__(self, other):
        if isinstance(other, LogPolySeries):
            return NotImplemented
        if _is_scalar(other):
            return self.scale(other)
        self._check(other)
        return QSeries._raw(self.r, self.order, _truncated(self._poly * other._poly, self.r, self.order))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __eq__(self, other) -> bool:
        if isinstance(other, LogPolySeries):
            return NotImplemented
        if _is_scalar(other):
            other = QSeries.constant(other, self.r, self.order)
        if not isinstance(other, QSeries):
            return NotImplemented
        return self.r == other.r and self.order == other.order and self._poly == other._poly

    __hash__ = None

    def dz_derive(self, j: int) -> 'QSeries':
        return QSeries._raw(self.r, self.order, _dz_poly(self._poly, self.r, _variable(self.r, j)))

    def dq_derive(self, j: int) -> 'QSeries':
        """Derivative in q_j; the result is truncated at order D - 1."""
        i = _variable(self.r, j)
        return QSeries._raw(self.r, max(self.order - 1, 0), self._poly.diff(self._poly.ring.gens[i]))

    def conjugate(self) -> 'QSeries':
        return QSeries._raw(self.r, self.order, _conjugate_poly(self._poly))

    def truncate(self, order: int) -> 'QSeries':
        if order > self.order:
            raise SeriesMismatch(f"cannot raise truncation order {self.order} to {order}")
        return QSeries._raw(self.r, order, _truncated(self._poly, self.r, order))

    def __repr__(self) -> str:
        if not self._poly:
            return f"QSeries(0; r={self.r}, D={self.order})"
        body = " + ".join(f"({format_scalar(c)})*q^{m}" for m, c in self.items())
        return f"QSeries({body}; r={self.r}, D={self.order})"


# ============================================================
# LogPolySeries
# ============================================================

Series = Union[QSeries, 'LogPolySeries']


class LogPolySeries:
    """Polynomial in z_1..z_r with QSeries coefficients."""

    __slots__ = ('r', 'order', '_poly')

    def __init__(self, r: int, order: int, terms: Optional[Mapping[Exponent, QSeries]] = None):
        if r < 0 or order < 0:
            raise SeriesMismatch(f"invalid series shape r={r}, order={order}")
        self.r = r
        self.order = order
        poly = series_ring(r).zero
        for z, s in (terms or {}).items():
            z = tuple(int(e) for e in z)
            if len(z) != r or any(e < 0 for e in z):
                raise SeriesMismatch(f"invalid z-exponent {z} for r={r}")
            if s.r != r or s.order != order:
                raise SeriesMismatch(f"term {z}: (r={s.r}, D={s.order}) vs (r={r}, D={order})")
            poly += s.poly.mul_monom((0,) * r + z)
        self._poly = poly

    @classmethod
    def _raw(cls, r: int, order: int, poly: PolyElement) -> 'LogPolySeries':
        s = object.__new__(cls)
        s.r = r
        s.order = order
        s._poly = poly
        return s

    @classmethod
    def zero(cls, r: int, order: int) -> 'LogPolySeries':
        return cls._raw(r, order, series_ring(r).zero)

    @classmethod
    def lift(cls, s: Series) -> 'LogPolySeries':
        if isinstance(s, LogPolySeries):
            return s
        return cls._raw(s.r, s.order, s.poly)

    @classmethod
    def z_monomial(cls, z: Exponent, c, r: int, order: int) -> 'LogPolySeries':
        return cls(r, order, {tuple(z): QSeries.constant(c, r, order)})

    @property
    def poly(self) -> PolyElement:
        return self._poly

    @property
    def terms(self) -> Mapping[Exponent, QSeries]:
        r = self.r
        grouped: Dict[Exponent, Dict[Exponent, Scalar]] = {}
        for m, c in self._poly.iterterms():
            grouped.setdefault(m[r:], {})[m[:r] + (0,) * r] = c
        R = self._poly.ring
        return MappingProxyType({z: QSeries._raw(r, self.order, R.from_dict(part)) for z, part in grouped.items()})

    def items(self) -> List[Tuple[Exponent, QSeries]]:
        return sorted(self.terms.items(), key=lambda kv: degree_key(kv[0]))

    def __bool__(self) -> bool:
        return bool(self._poly)

    @property
    def is_zero(self) -> bool:
        return not self._poly

    @property
    def is_pure(self) -> bool:
        return _is_pure_poly(self._poly, self.r)

    @property
    def z_degree(self) -> int:
        return max((sum(m[self.r:]) for m in self._poly.itermonoms()), default=0)

    @property
    def constant_term(self) -> Scalar:
        return self._poly.get(self._poly.ring.zero_monom, ZERO)

    def as_qseries(self) -> QSeries:
        if not self.is_pure:
            z = min((m[self.r:] for m in self._poly.itermonoms() if any(m[self.r:])), key=degree_key)
            raise LogPartNonzero(f"series has a log part z^{z}", witness={'z': list(z)})
        return QSeries._raw(self.r, self.order, self._poly)

    def is_tau_free(self) -> bool:
        return _poly_tau_free(self._poly)

    def lowest_term(self) -> Optional[Tuple[Exponent, Exponent]]:
        """(z-exponent, q-exponent) of the lowest nonzero term."""
        if not self._poly:
            return None
        r = self.r
        m = min(self._poly.itermonoms(), key=lambda m: (degree_key(m[:r]), degree_key(m[r:])))
        return m[r:], m[:r]

    def _coerce(self, other) -> 'LogPolySeries':
        if _is_scalar(other):
            other = QSeries.constant(other, self.r, self.order)
        other = LogPolySeries.lift(other)
        if self.r != other.r or self.order != other.order:
            raise SeriesMismatch(
                f"series mismatch: (r={self.r}, D={self.order}) vs (r={other.r}, D={other.order})")
        return other

    def __add__(self, other) -> 'LogPolySeries':
        other = self._coerce(other)
        return LogPolySeries._raw(self.r, self.order, self._poly + other._poly)

    __radd__ = __add__

    def __neg__(self) -> 'LogPolySeries':
        return LogPolySeries._raw(self.r, self.order, -self._poly)

    def __sub__(self, other) -> 'LogPolySeries':
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> 'LogPolySeries':
        return (-self) + other

    def scale(self, c) -> 'LogPolySeries':
        return LogPolySeries._raw(self.r, self.order, self._poly.mul_ground(scalar(c)))

    def __mul__(self, other) -> 'LogPolySeries':
        if _is_scalar(other):
            return self.scale(other)
        other = self._coerce(other)
        return LogPolySeries._raw(self.r, self.order,
                                  _truncated(self._poly * other._poly, self.r, self.order))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not (_is_scalar(other) or isinstance(other, (QSeries, LogPolySeries))):
            return NotImplemented
        other = self._coerce(other)
        return self._poly == other._poly

    __hash__ = None

    def dz_derive(self, j: int) -> 'LogPolySeries':
        return LogPolySeries._raw(self.r, self.order, _dz_poly(self._poly, self.r, _variable(self.r, j)))

    def shift(self, j: int, t: int = 1) -> 'LogPolySeries':
        """Formal substitution z_j -> z_j + t."""
        z = self._poly.ring.gens[self.r + _variable(self.r, j)]
        return LogPolySeries._raw(self.r, self.order, self._poly.compose(z, z + t))

    def conjugate(self) -> 'LogPolySeries':
        return LogPolySeries._raw(self.r, self.order, _conjugate_poly(self._poly))

    def truncate(self, order: int) -> 'LogPolySeries':
        if order > self.order:
            raise SeriesMismatch(f"cannot raise truncation order {self.order} to {order}")
        return LogPolySeries._raw(self.r, order, _truncated(self._poly, self.r, order))

    def __repr__(self) -> str:
        if not self._poly:
            return f"LogPolySeries(0; r={self.r}, D={self.order})"
        body = " + ".join(f"z^{z}*{s!r}" for z, s in self.items())
        return f"LogPolySeries({body})"


def lift(s: Series) -> LogPolySeries:
    return LogPolySeries.lift(s)


def dz_derive(f: Series, j: int) -> Series:
    return f.dz_derive(j)


def dq_derive(f: QSeries, j: int) -> QSeries:
    return f.dq_derive(j)


def monomial_witness(s: Series):
    """JSON-friendly description of the lowest nonzero term."""
    if isinstance(s, QSeries):
        m = s.lowest_monomial()
        return None if m is None else list(m)
    term = s.lowest_term()
    if term is None:
        return None
    z, m = term
    if not any(z):
        return list(m)
    return {'z': list(z), 'q': list(m)}


# ============================================================
# Integration of closed 1-forms
# ============================================================

def integrate_closed_one_form(forms: Sequence[Series]) -> LogPolySeries:
    """
    Primitive F of the closed form sum_j forms[j-1] dz_j with zero constant term.

    Closedness D_l w_j = D_j w_l is checked first. Each q-exponent m is then
    solved separately: for m != 0 the equation dF_m/dz_j + tau*m_j*F_m = P_j
    along one direction with m_j > 0 is inverted by a finite Neumann series;
    for m = 0 the z-polynomial part comes from the radial homotopy formula.
    The solution is checked against every direction.
    """
    if not forms:
        raise SeriesMismatch("empty one-form")
    lifted = [LogPolySeries.lift(w) for w in forms]
    r, order = lifted[0].r, lifted[0].order
    if len(lifted) != r:
        raise SeriesMismatch(f"one-form has {len(lifted)} components for r={r} variables")
    for w in lifted:
        if w.r != r or w.order != order:
            raise SeriesMismatch("one-form components disagree on (r, D)")

    for j in range(r):
        for l in range(j + 1, r):
            diff = lifted[j].dz_derive(l + 1) - lifted[l].dz_derive(j + 1)
            if diff:
                raise NotClosed(f"D_{l + 1} w_{j + 1} != D_{j + 1} w_{l + 1}",
                                witness={'pair': [j + 1, l + 1], 'monomial': monomial_witness(diff)})

    R = series_ring(r)
    z_gens = R.gens[r:]
    pad = (0,) * r
    # q-exponent -> direction -> z-polynomial
    grouped: Dict[Exponent, List[Dict[Exponent, Scalar]]] = {}
    for j, w in enumerate(lifted):
        for mono, c in w.poly.iterterms():
            grouped.setdefault(mono[:r], [dict() for _ in range(r)])[j][pad + mono[r:]] = c

    out = R.zero
    for m in sorted(grouped, key=degree_key):
        parts = [R.from_dict(p) for p in grouped[m]]
        if any(m):
            i = next(k for k, e in enumerate(m) if e)
            lam = tau * m[i]
            primitive = R.zero
            term = parts[i]
            n = 0
            while term:
                primitive += term.mul_ground((-ONE) ** n / lam ** (n + 1))
                term = term.diff(z_gens[i])
                n += 1
        else:
            primitive = R.zero
            for j, p in enumerate(parts):
                for mono, c in p.iterterms():
                    primitive += R.term_new(mono, c / rational(sum(mono) + 1)) * z_gens[j]
        for j in range(r):
            if primitive.diff(z_gens[j]) + primitive.mul_ground(tau * m[j]) != parts[j]:
                raise InconsistentPrimitive(
                    f"primitive of q^{m} disagrees with component {j + 1}",
                    witness={'variable': j + 1, 'monomial': list(m)})
        out += primitive.mul_monom(m + pad)

    return LogPolySeries._raw(r, order, out)


# ============================================================
# Matrices of series
# ============================================================

Index = Tuple[int, int]


class SeriesMatrix:
    """Square matrix of series: a sparse DomainMatrix over series_ring(r)."""

    __slots__ = ('size', 'r', 'order', '_matrix')

    def __init__(self, size: int, r: int, order: int,
                 entries: Optional[Mapping[Index, Series]] = None):
        self.size = size
        self.r = r
        self.order = order
        dok = {}
        for (i, j), s in (entries or {}).items():
            if not (0 <= i < size and 0 <= j < size):
                raise SeriesMismatch(f"entry ({i}, {j}) outside a {size}x{size} matrix")
            if s.r != r or s.order != order:
                raise SeriesMismatch(f"entry ({i}, {j}): (r={s.r}, D={s.order}) vs (r={r}, D={order})")
            dok[(i, j)] = s.poly
        self._matrix = DomainMatrix.from_dok(dok, (size, size), series_domain(r))

    @classmethod
    def _raw(cls, size: int, r: int, order: int, matrix: DomainMatrix) -> 'SeriesMatrix':
        mat = object.__new__(cls)
        mat.size = size
        mat.r = r
        mat.order = order
        mat._matrix = matrix
        return mat

    @classmethod
    def _from_polys(cls, size: int, r: int, order: int, dok: Mapping[Index, PolyElement]) -> 'SeriesMatrix':
        return cls._raw(size, r, order, DomainMatrix.from_dok(dict(dok), (size, size), series_domain(r)))

    @classmethod
    def zero(cls, size: int, r: int, order: int) -> 'SeriesMatrix':
        return cls._from_polys(size, r, order, {})

    @classmethod
    def identity(cls, size: int, r: int, order: int) -> 'SeriesMatrix':
        one = series_ring(r).one
        return cls._from_polys(size, r, order, {(i, i): one for i in range(size)})

    @classmethod
    def from_constant(cls, rows: Sequence[Sequence[object]], r: int, order: int) -> 'SeriesMatrix':
        """Embed a constant matrix (list of rows or DomainMatrix)."""
        if hasattr(rows, 'to_list'):
            rows = rows.to_list()
        size = len(rows)
        R = series_ring(r)
        dok = {}
        for i, row in enumerate(rows):
            if len(row) != size:
                raise SeriesMismatch("constant matrix is not square")
            for j, c in enumerate(row):
                dok[(i, j)] = R.ground_new(scalar(c))
        return cls._from_polys(size, r, order, dok)

    @classmethod
    def z_linear(cls, nilpotents: Sequence[object], r: int, order: int, sign: int = 1) -> 'SeriesMatrix':
        """sign * sum_j z_j N_j as a matrix of LogPolySeries."""
        if not nilpotents:
            raise SeriesMismatch("z_linear needs at least one nilpotent")
        if len(nilpotents) != r:
            raise SeriesMismatch(f"{len(nilpotents)} nilpotents for r={r} variables")
        R = series_ring(r)
        size = None
        dok: Dict[Index, PolyElement] = {}
        for j, n in enumerate(nilpotents):
            rows = n.to_list() if hasattr(n, 'to_list') else n
            size = len(rows)
            z = R.gens[r + j]
            for a, row in enumerate(rows):
                for b, c in enumerate(row):
                    c = scalar(c)
                    if c:
                        dok[(a, b)] = dok.get((a, b), R.zero) + z.mul_ground(c * sign)
        return cls._from_polys(size, r, order, dok)

    @property
    def matrix(self) -> DomainMatrix:
        return self._matrix

    def _dok(self) -> Dict[Index, PolyElement]:
        return self._matrix.to_dok()

    def _map(self, f: Callable[[PolyElement], PolyElement], order: Optional[int] = None) -> 'SeriesMatrix':
        order = self.order if order is None else order
        return SeriesMatrix._from_polys(self.size, self.r, order, {k: f(p) for k, p in self._dok().items()})

    @property
    def entries(self) -> Mapping[Index, Series]:
        return MappingProxyType({k: _wrap(self.r, self.order, p) for k, p in self._dok().items()})

    def entry(self, i: int, j: int) -> Series:
        return _wrap(self.r, self.order, self._matrix[i, j].element)

    def column(self, j: int) -> Dict[int, Series]:
        return {i: _wrap(self.r, self.order, p) for (i, b), p in self._dok().items() if b == j}

    def __bool__(self) -> bool:
        return not self.is_zero

    @property
    def is_zero(self) -> bool:
        return self._matrix.is_zero_matrix

    def _check(self, other: 'SeriesMatrix') -> None:
        if (self.size, self.r, self.order) != (other.size, other.r, other.order):
            raise SeriesMismatch(
                f"matrix mismatch: (n={self.size}, r={self.r}, D={self.order}) vs "
                f"(n={other.size}, r={other.r}, D={other.order})")

    def __add__(self, other: 'SeriesMatrix') -> 'SeriesMatrix':
        self._check(other)
        return SeriesMatrix._raw(self.size, self.r, self.order, self._matrix.add(other._matrix))

    def __neg__(self) -> 'SeriesMatrix':
        return SeriesMatrix._raw(self.size, self.r, self.order, self._matrix.neg())

    def __sub__(self, other: 'SeriesMatrix') -> 'SeriesMatrix':
        self._check(other)
        return SeriesMatrix._raw(self.size, self.r, self.order, self._matrix.sub(other._matrix))

    def scale(self, c) -> 'SeriesMatrix':
        c = scalar(c)
        if not c:
            return SeriesMatrix.zero(self.size, self.r, self.order)
        return SeriesMatrix._raw(self.size, self.r, self.order,
                                 self._matrix.scalarmul(series_ring(self.r).ground_new(c)))

    def __mul__(self, c) -> 'SeriesMatrix':
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other: 'SeriesMatrix') -> 'SeriesMatrix':
        self._check(other)
        r, order = self.r, self.order
        product = SeriesMatrix._raw(self.size, r, order, self._matrix.matmul(other._matrix))
        return product._map(lambda p: _truncated(p, r, order))

    def commutator(self, other: 'SeriesMatrix') -> 'SeriesMatrix':
        return self @ other - other @ self

    def __eq__(self, other) -> bool:
        if not isinstance(other, SeriesMatrix):
            return NotImplemented
        return (self - other).is_zero

    __hash__ = None

    def dz_derive(self, j: int) -> 'SeriesMatrix':
        i = _variable(self.r, j)
        return self._map(lambda p: _dz_poly(p, self.r, i))

    def shift(self, j: int, t: int = 1) -> 'SeriesMatrix':
        z = series_ring(self.r).gens[self.r + _variable(self.r, j)]
        return self._map(lambda p: p.compose(z, z + t))

    def transpose(self) -> 'SeriesMatrix':
        return SeriesMatrix._raw(self.size, self.r, self.order, self._matrix.transpose())

    def conjugate(self) -> 'SeriesMatrix':
        return self._map(_conjugate_poly)

    def is_tau_free(self) -> bool:
        return all(_poly_tau_free(p) for p in self._dok().values())

    def truncate(self, order: int) -> 'SeriesMatrix':
        if order > self.order:
            raise SeriesMismatch(f"cannot raise truncation order {self.order} to {order}")
        return self._map(lambda p: _truncated(p, self.r, order), order=order)

    @property
    def is_pure(self) -> bool:
        return all(_is_pure_poly(p, self.r) for p in self._dok().values())

    def as_pure(self) -> 'SeriesMatrix':
        """Same matrix, checked to have pure q-series entries; LogPartNonzero if any log part survives."""
        for k, p in sorted(self._dok().items()):
            if not _is_pure_poly(p, self.r):
                try:
                    LogPolySeries._raw(self.r, self.order, p).as_qseries()
                except LogPartNonzero as exc:
                    raise LogPartNonzero(f"entry {k} has a log part",
                                         witness={'entry': list(k), **exc.witness}) from exc
        return self

    def constant_rows(self) -> List[List[Scalar]]:
        """Value at q = 0 (pure entries only)."""
        rows = [[ZERO] * self.size for _ in range(self.size)]
        zero = series_ring(self.r).zero_monom
        for (i, j), p in self.as_pure()._dok().items():
            rows[i][j] = p.get(zero, ZERO)
        return rows

    @property
    def is_constant(self) -> bool:
        zero = series_ring(self.r).zero_monom
        return all(m == zero for p in self._dok().values() for m in p.itermonoms())

    def graded_piece(self, degrees: Sequence[int], shift: int) -> 'SeriesMatrix':
        """Entries (c, a) with degrees[c] - degrees[a] == 2*shift."""
        return SeriesMatrix._from_polys(self.size, self.r, self.order,
                                        {(c, a): p for (c, a), p in self._dok().items()
                                         if degrees[c] - degrees[a] == 2 * shift})

    def first_nonzero(self) -> Optional[Tuple[Index, Series]]:
        dok = self._dok()
        if not dok:
            return None
        k = min(dok)
        return k, _wrap(self.r, self.order, dok[k])

    def _power_series(self, coefficients) -> 'SeriesMatrix':
        # sum_n coefficients(n) * self^n for a nilpotent self
        out = SeriesMatrix.identity(self.size, self.r, self.order).scale(coefficients(0))
        power = SeriesMatrix.identity(self.size, self.r, self.order)
        for n in range(1, self.size + self.order + 2):
            power = power @ self
            if power.is_zero:
                return out
            c = coefficients(n)
            if c:
                out = out + power.scale(c)
        raise NotNilpotent("matrix series is not nilpotent")

    def exp_nilpotent(self) -> 'SeriesMatrix':
        factorial = [ONE]

        def coefficient(n):
            while len(factorial) <= n:
                factorial.append(factorial[-1] * len(factorial))
            return ONE / factorial[n]

        return self._power_series(coefficient)

    def log_unipotent(self) -> 'SeriesMatrix':
        """log(self) for self = I + X with X nilpotent."""
        x = self - SeriesMatrix.identity(self.size, self.r, self.order)
        return x._power_series(lambda n: ZERO if n == 0 else rational((-1) ** (n + 1), n))

    def inverse_unipotent(self) -> 'SeriesMatrix':
        """Inverse of I + X with X nilpotent (q-adically or by degree)."""
        x = self - SeriesMatrix.identity(self.size, self.r, self.order)
        return x._power_series(lambda n: rational((-1) ** n))

    def __repr__(self) -> str:
        return f"SeriesMatrix(n={self.size}, r={self.r}, D={self.order}, nnz={self._matrix.nnz()})"


def integrate_matrix_form(forms: Sequence[SeriesMatrix]) -> SeriesMatrix:
    """Entrywise primitive of a closed matrix-valued 1-form."""
    size, r, order = forms[0].size, forms[0].r, forms[0].order
    keys = sorted(set().union(*(f.entries.keys() for f in forms)))
    out = {}
    for k in keys:
        try:
            out[k] = integrate_closed_one_form([f.entry(*k) for f in forms])
        except (NotClosed, InconsistentPrimitive) as exc:
            witness = dict(exc.witness or {})
            witness['entry'] = list(k)
            raise type(exc)(f"entry {k}: {exc}", witness=witness) from exc
    return SeriesMatrix(size, r, order, out)


def commutator_pairs(r: int) -> Iterable[Tuple[int, int]]:
    return ((j, l) for j in range(1, r + 1) for l in range(j + 1, r + 1))
