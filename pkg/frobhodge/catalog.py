"""
Built-in example modules and seeded generators

E1 is the weight-3 rank-4 module with T1*T1 = kappa T2. Products of
projective spaces give polarizable modules of any weight through their
monomial cohomology basis.
"""

from itertools import product
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .config import get_default_order, get_seed
from .errors import ShapeMismatch, UnsupportedWeight
from .frobenius import FrobeniusModule
from .linalg import to_qq
from .potential import QuantumPotential
from .runlog import log
from .scalars import from_rational, scalar
from .series import QSeries

# weight -> exponent tuples of P^a1 x ... x P^as with rank <= 12
PROJECTIVE_SHAPES: Dict[int, List[Tuple[int, ...]]] = {
    3: [(3,), (1, 2), (1, 1, 1)],
    4: [(4,), (1, 3), (2, 2), (1, 1, 2)],
    5: [(5,), (1, 4), (2, 3)],
}


def e1_module(kappa=5) -> FrobeniusModule:
    """Weight 3, dims (1,1,1,1), B(T0,T3) = B(T1,T2) = 1, T1*T1 = kappa T2, T1*T2 = T3, framing {T1}."""
    pairing = {(0, 3): 1, (3, 0): 1, (1, 2): 1, (2, 1): 1}
    products = {(1, 0): {1: 1}, (1, 1): {2: kappa}, (1, 2): {3: 1}}
    return FrobeniusModule.from_data(3, [1, 1, 1, 1], pairing, products, [1])


def e1_potential(coefficients: Mapping[int, object], order: Optional[int] = None,
                 module: Optional[FrobeniusModule] = None) -> QuantumPotential:
    """Weight-3 potential sum_n coefficients[n] q^n on E1."""
    M = module if module is not None else e1_module()
    order = get_default_order() if order is None else order
    series = QSeries(1, order, {(n,): c for n, c in coefficients.items() if n <= order})
    return QuantumPotential(M, weight3=series, order=order)


def random_weight3_potential(seed: Optional[int] = None, degree: int = 6, order: Optional[int] = None,
                             module: Optional[FrobeniusModule] = None) -> QuantumPotential:
    """E1 potential with seeded integer coefficients on q^1..q^degree."""
    rng = np.random.default_rng(get_seed() if seed is None else seed)
    coefficients = {}
    for n in range(1, degree + 1):
        c = int(rng.integers(-9, 10))
        if c:
            coefficients[n] = c
    return e1_potential(coefficients, order, module)


# ============================================================
# Products of projective spaces
# ============================================================

def _monomial_basis(exponents: Sequence[int]) -> List[Tuple[int, ...]]:
    """h^e for 0 <= e_i <= a_i, by degree and then h1 before h2."""
    basis = list(product(*(range(a + 1) for a in exponents)))
    return sorted(basis, key=lambda e: (sum(e), tuple(-x for x in e)))


def _standard_module(exponents: Sequence[int]) -> FrobeniusModule:
    k = sum(exponents)
    s = len(exponents)
    basis = _monomial_basis(exponents)
    index = {e: i for i, e in enumerate(basis)}
    top = tuple(exponents)
    pairing = {}
    for e in basis:
        dual = tuple(a - x for a, x in zip(top, e))
        pairing[(index[e], index[dual])] = 1
    products = {}
    divisors = []
    for i in range(s):
        h = tuple(1 if t == i else 0 for t in range(s))
        divisors.append(index[h])
        for e in basis:
            raised = tuple(x + u for x, u in zip(e, h))
            if raised in index:
                products[(index[h], index[e])] = {index[raised]: 1}
    dims = [sum(1 for e in basis if sum(e) == p) for p in range(k + 1)]
    labels = [_label(e) for e in basis]
    return FrobeniusModule.from_data(k, dims, pairing, products, divisors, labels=labels)


def _label(e: Sequence[int]) -> str:
    parts = [f"h{i + 1}" if x == 1 else f"h{i + 1}^{x}" for i, x in enumerate(e) if x]
    return "*".join(parts) or "1"


def _random_positive(rng, size: int) -> DomainMatrix:
    """Invertible rational matrix with entries in 1..3 (identity when size is 1)."""
    if size == 1:
        return DomainMatrix([[QQ(1)]], (1, 1), QQ)
    while True:
        G = DomainMatrix([[QQ(int(rng.integers(1, 4))) for _ in range(size)] for _ in range(size)],
                         (size, size), QQ)
        if G.det() != 0:
            return G


def change_basis(M: FrobeniusModule, P: DomainMatrix, relabel: Optional[Sequence[int]] = None) -> FrobeniusModule:
    """
    The same ring in the basis T'_a = sum_c P_ca T_c.

    P must preserve degrees, and P^T B P must stay an adapted pairing; the
    FrobeniusModule constructor checks the latter.
    """
    n = M.n
    if P.shape != (n, n):
        raise ShapeMismatch(f"basis change must be {n}x{n}, got {P.shape}")
    rows = P.to_list()
    for c in range(n):
        for a in range(n):
            if rows[c][a] and M.degrees[c] != M.degrees[a]:
                raise ShapeMismatch("basis change must preserve degrees", witness={'entry': [c, a]})
    P_inv = P.inv()
    B = to_qq(M.pairing_matrix())
    pairing = [[from_rational(c) for c in row] for row in (P.transpose() * B * P).to_list()]
    low = M.indices_of_degree(2)
    products = {}
    for j in low:
        L = DomainMatrix.zeros((n, n), QQ)
        for i in low:
            if rows[i][j]:
                L = L + to_qq(M.left_mult(i)) * rows[i][j]
        moved = (P_inv * L * P).to_list()
        for a in range(n):
            image = {c: from_rational(moved[c][a]) for c in range(n) if moved[c][a]}
            if image:
                products[(j, a)] = image
    if relabel is None:
        relabel = [a for a in range(n) if any(rows[c][a] != (1 if c == a else 0) for c in range(n))]
    labels = list(M.labels)
    for a in relabel:
        labels[a] = f"T'{a}"
    return FrobeniusModule(M.k, M.degrees, pairing, products, M.framing, real=True, labels=labels)


def change_divisor_basis(M: FrobeniusModule, G: DomainMatrix) -> FrobeniusModule:
    """
    New V_2 basis T'_j = sum_i G_ij T_i, dual change on V_{2k-2}.

    Other degrees keep their basis, so B stays adapted. A positive G keeps
    the framing inside the Kahler cone.
    """
    n = M.n
    low = M.indices_of_degree(2)
    high = [M.delta[j] for j in low]
    if G.shape != (len(low), len(low)):
        raise ShapeMismatch(f"divisor basis change must be {len(low)}x{len(low)}, got {G.shape}")
    P = [[QQ(1) if a == c else QQ(0) for a in range(n)] for c in range(n)]
    for block, mat in ((low, G), (high, G.inv().transpose())):
        entries = mat.to_list()
        for t, a in enumerate(block):
            for s, c in enumerate(block):
                P[c][a] = entries[s][t]
    return change_basis(M, DomainMatrix(P, (n, n), QQ), relabel=low + high)


def projective_product_module(exponents: Sequence[int], seed: Optional[int] = None) -> FrobeniusModule:
    """
    Cohomology of P^a1 x ... x P^as in its monomial basis.

    With a seed, the divisor basis is replaced by a seeded positive
    combination (and the top-but-one degree by its B-dual).
    """
    if any(a < 1 for a in exponents):
        raise ShapeMismatch(f"projective exponents must be positive, got {list(exponents)}")
    if sum(exponents) in (1, 2):
        raise UnsupportedWeight(f"weight {sum(exponents)} admits no deformations; k >= 3 is required")
    M = _standard_module(exponents)
    if seed is None:
        return M
    rng = np.random.default_rng(seed)
    return change_divisor_basis(M, _random_positive(rng, len(M.indices_of_degree(2))))


def random_polarizable_module(seed: Optional[int] = None, k: int = 3) -> FrobeniusModule:
    """Seeded choice of a projective product of weight k in {3, 4, 5}, rank <= 12, with a seeded basis change."""
    if k not in PROJECTIVE_SHAPES:
        raise UnsupportedWeight(f"random modules are available for k in {sorted(PROJECTIVE_SHAPES)}, got {k}")
    seed = get_seed() if seed is None else seed
    rng = np.random.default_rng(seed)
    shapes = PROJECTIVE_SHAPES[k]
    exponents = shapes[int(rng.integers(0, len(shapes)))]
    log(f"random module: seed {seed}, P^{exponents}")
    return projective_product_module(exponents, seed=int(rng.integers(0, 2 ** 31 - 1)))


# ============================================================
# Weight 5: P1 x P4
# ============================================================

def p1_p4_module() -> FrobeniusModule:
    """P1 x P4, rank 10; indices 0:1, 1:h1, 2:h2, 3:h1h2, 4:h2^2, ..., 9:h1h2^4."""
    return projective_product_module((1, 4))


def _series2(coefficients: Mapping[Tuple[int, int], object], order: int) -> QSeries:
    return QSeries(2, order, {m: scalar(c) for m, c in coefficients.items() if sum(m) <= order})


def p1_p4_potential(order: Optional[int] = None, perturbed: bool = False,
                    module: Optional[FrobeniusModule] = None) -> QuantumPotential:
    """
    Weight-5 potential on P1 x P4 solving graded WDVV.

    phi^6 = q2 + q2^2, phi^{44} = 3 q2, everything else zero. The perturbed
    variant adds phi^{33} = q1, which breaks WDVV.
    """
    M = module if module is not None else p1_p4_module()
    order = get_default_order() if order is None else order
    phi_a = {6: _series2({(0, 1): 1, (0, 2): 1}, order)}
    phi_ab = {(4, 4): _series2({(0, 1): 3}, order)}
    if perturbed:
        phi_ab[(3, 3)] = _series2({(1, 0): 1}, order)
    return QuantumPotential(M, phi_a=phi_a, phi_ab=phi_ab, order=order)


CATALOG = {
    'E1': e1_module,
    'E1-negative': lambda: e1_module(kappa=-5),
    'P1xP4': p1_p4_module,
    'P3': lambda: projective_product_module((3,)),
    'P1xP1xP1': lambda: projective_product_module((1, 1, 1)),
    'P2xP2': lambda: projective_product_module((2, 2)),
}


def catalog_module(name: str) -> FrobeniusModule:
    if name not in CATALOG:
        raise ShapeMismatch(f"unknown catalog module {name!r}; available: {', '.join(sorted(CATALOG))}")
    return CATALOG[name]()
