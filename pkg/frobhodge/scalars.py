"""
Exact scalars in Q(tau)

tau is a formal transcendental standing for 2*pi*i. Scalars are sympy
FracElements of a single module-level rational function field, which keeps
numerator and denominator gcd-reduced with a sign-normalized denominator.
Conjugation is the field automorphism tau -> -tau.
"""

from typing import Union

import sympy
from sympy import QQ
from sympy.polys.fields import FracElement, field
from sympy.polys.polyerrors import CoercionFailed

from .errors import ParseError, TauPresent

TAU_FIELD, tau = field("tau", QQ)
TAU_DOMAIN = TAU_FIELD.to_domain()
TAU_SYMBOL = sympy.Symbol("tau")

Scalar = FracElement
ScalarLike = Union[FracElement, int, str, sympy.Rational]

ZERO = TAU_FIELD.zero
ONE = TAU_FIELD.one


def scalar(value) -> Scalar:
    """Coerce ints, rationals, QQ elements, strings and scalars into Q(tau)."""
    if isinstance(value, FracElement) and value.field == TAU_FIELD:
        return value
    if isinstance(value, str):
        return parse_scalar(value)
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return TAU_FIELD.ground_new(QQ(value))
    if isinstance(value, sympy.Basic):
        return TAU_FIELD.from_expr(value)
    return TAU_FIELD.ground_new(QQ.convert(value))


def rational(p: int, q: int = 1) -> Scalar:
    return TAU_FIELD.ground_new(QQ(p, q))


def _flip(poly):
    return poly.ring.from_dict({m: (-c if m[0] % 2 else c) for m, c in poly.terms()})


def conjugate(x: Scalar) -> Scalar:
    """Apply tau -> -tau."""
    return TAU_FIELD.new(_flip(x.numer), _flip(x.denom))


def is_tau_free(x: Scalar) -> bool:
    return bool(x.numer.degree() <= 0 and x.denom.degree() <= 0)


def to_rational(x: Scalar):
    """Return the QQ value of a tau-free scalar."""
    if not is_tau_free(x):
        raise TauPresent(f"scalar {format_scalar(x)} depends on tau", witness=format_scalar(x))
    return x.numer.LC / x.denom.LC


def from_rational(q) -> Scalar:
    return TAU_FIELD.ground_new(QQ.convert(q))


def sign(x: Scalar) -> int:
    """Sign of a tau-free scalar."""
    q = to_rational(x)
    if q > 0:
        return 1
    if q < 0:
        return -1
    return 0


def tau_power(n: int) -> Scalar:
    return tau ** n if n >= 0 else ONE / tau ** (-n)


def format_scalar(x: Scalar) -> str:
    """Canonical text form: "p/q" for tau-free scalars, "(N)/(D)" otherwise."""
    if is_tau_free(x):
        return str(QQ.to_sympy(x.numer.LC / x.denom.LC))
    return f"({x.numer})/({x.denom})"


def parse_scalar(text: str) -> Scalar:
    text = text.strip()
    if not text:
        raise ParseError("empty scalar")
    try:
        if "tau" not in text:
            return TAU_FIELD.ground_new(QQ.from_sympy(sympy.Rational(text)))
        expr = sympy.sympify(text, locals={"tau": TAU_SYMBOL})
        return TAU_FIELD.from_expr(expr)
    except (TypeError, ValueError, CoercionFailed, sympy.SympifyError, ZeroDivisionError) as exc:
        raise ParseError(f"cannot parse scalar {text!r}: {exc}", witness=text) from exc
