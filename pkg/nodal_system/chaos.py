"""
Wiener Chaos Coefficients for NODAL LAB
Expansion coefficients of the Euclidean norm and of the Dirac delta, and
the diagram formula for expectations of Hermite products
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, Mapping, Sequence, Tuple, Union

import numpy as np

from core.exceptions import DomainError, UnsupportedDegreeError

logger = logging.getLogger(__name__)

MAX_SWINGING_ORDER = 12
MAX_BETA_ORDER = 8
MAX_VERTEX_ORDER = 4
MAX_DIAGRAM_ORDER = 12
PSD_FLOOR = -1e-10
SYMMETRY_TOL = 1e-12


def _check_even(value: int, name: str) -> int:
    if int(value) != value or value < 0 or int(value) % 2:
        raise DomainError(f"{name} must be a nonnegative even integer, got {value!r}")
    return int(value)


@lru_cache(maxsize=None)
def _swinging_coefficients(n: int) -> Tuple[int, ...]:
    return tuple(
        (-1) ** (j + n) * math.comb(n, j) * math.factorial(2 * j + 1) // math.factorial(j) ** 2
        for j in range(n + 1)
    )


def _swinging_exact(n: int, x: Fraction) -> Fraction:
    return sum((Fraction(c) * x ** j for j, c in enumerate(_swinging_coefficients(n))), Fraction(0))


def swinging_p(n: int, x: Union[float, Fraction]) -> float:
    """
    Swinging factorial coefficient p_n(x) = sum_j (-1)^(j+n) C(n,j) (2j+1)!/(j!)^2 x^j

    Evaluated in exact rational arithmetic, then rounded once.

    Args:
        n: Order, 0..12
        x: Argument

    Returns:
        p_n(x)
    """
    if int(n) != n or n < 0:
        raise DomainError(f"swinging_p order must be a nonnegative integer, got {n!r}")
    if n > MAX_SWINGING_ORDER:
        raise UnsupportedDegreeError(f"swinging_p order {n} exceeds {MAX_SWINGING_ORDER}")
    return float(_swinging_exact(int(n), Fraction(x)))


def alpha(two_n: int, two_m: int) -> float:
    """
    Norm expansion coefficient
    alpha_{2n,2m} = sqrt(pi/2) (2n)!(2m)!/(n!m!) 2^-(n+m) p_{n+m}(1/4)
    """
    n = _check_even(two_n, "two_n") // 2
    m = _check_even(two_m, "two_m") // 2
    if n + m > MAX_SWINGING_ORDER:
        raise UnsupportedDegreeError(f"alpha order n+m={n + m} exceeds {MAX_SWINGING_ORDER}")
    rational = Fraction(
        math.factorial(2 * n) * math.factorial(2 * m),
        math.factorial(n) * math.factorial(m) * 2 ** (n + m),
    ) * _swinging_exact(n + m, Fraction(1, 4))
    return math.sqrt(math.pi / 2.0) * float(rational)


def beta(two_k: int) -> float:
    """Delta expansion coefficient beta_{2k} = H_{2k}(0)/sqrt(2 pi)"""
    two_k = _check_even(two_k, "two_k")
    if two_k > MAX_BETA_ORDER:
        raise UnsupportedDegreeError(f"beta order {two_k} exceeds {MAX_BETA_ORDER}")
    k = two_k // 2
    # H_{2k}(0) = (-1)^k (2k-1)!!
    double_factorial = math.prod(range(1, two_k, 2))
    return (-1) ** k * double_factorial / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ChaosCoeffs:
    """Norm coefficients alpha[(2n, 2m)] and delta coefficients beta[2k]"""

    alpha: Dict[Tuple[int, int], float] = field(default_factory=dict)
    beta: Dict[int, float] = field(default_factory=dict)

    @classmethod
    def up_to(cls, order: int = 4) -> "ChaosCoeffs":
        """All coefficients with total Hermite order <= order"""
        alphas = {
            (a, b): alpha(a, b)
            for a in range(0, order + 1, 2)
            for b in range(0, order + 1 - a, 2)
        }
        betas = {k: beta(k) for k in range(0, min(order, MAX_BETA_ORDER) + 1, 2)}
        return cls(alpha=alphas, beta=betas)

    def fourth_chaos_weights(self) -> Dict[Tuple[int, int, int], float]:
        """
        Weights of the six integrands of the fourth-order projection

        Keys are Hermite orders (q_f, q_1, q_2) applied to f and to the two
        standardized gradient components.
        """
        a, b = self.alpha, self.beta
        return {
            (4, 0, 0): a[(0, 0)] * b[4] / math.factorial(4),
            (2, 2, 0): a[(2, 0)] * b[2] / 4.0,
            (0, 4, 0): a[(4, 0)] * b[0] / math.factorial(4),
            (0, 2, 2): a[(2, 2)] * b[0] / 4.0,
            (2, 0, 2): a[(0, 2)] * b[2] / 4.0,
            (0, 0, 4): a[(0, 4)] * b[0] / math.factorial(4),
        }


def delta_partial_sum(hermite_moments: Mapping[int, float], max_k: int) -> float:
    """
    Partial sum sum_{k <= max_k} beta_{2k}/(2k)! E[H_{2k}(X) g(X)]

    Converges to E[delta(X) g(X)] = g(0)/sqrt(2 pi) as max_k grows.

    Args:
        hermite_moments: Map 2k -> E[H_{2k}(X) g(X)]
        max_k: Highest k included (2 max_k <= 8)
    """
    return sum(
        beta(2 * k) / math.factorial(2 * k) * hermite_moments[2 * k]
        for k in range(max_k + 1)
    )


def _validate_correlation(orders: Sequence[int], corr: np.ndarray) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    k = len(orders)
    if corr.shape != (k, k):
        raise DomainError(f"correlation matrix must be {k}x{k}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=SYMMETRY_TOL, rtol=0.0):
        raise DomainError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=SYMMETRY_TOL, rtol=0.0):
        raise DomainError("correlation matrix must have unit diagonal")
    if np.linalg.eigvalsh(corr).min() < PSD_FLOOR:
        raise DomainError("correlation matrix is not positive semidefinite")
    return corr


def _allocations(total: int, capacities: List[int]) -> Iterator[Tuple[int, ...]]:
    if not capacities:
        if total == 0:
            yield ()
        return
    head, rest = capacities[0], capacities[1:]
    for count in range(min(head, total), -1, -1):
        for tail in _allocations(total - count, rest):
            yield (count,) + tail


def _diagram_sum(remaining: Tuple[int, ...], corr: np.ndarray, start: int) -> float:
    k = len(remaining)
    i = start
    while i < k and remaining[i] == 0:
        i += 1
    if i == k:
        return 1.0

    legs = remaining[i]
    partners = list(range(i + 1, k))
    total = 0.0
    for counts in _allocations(legs, [remaining[j] for j in partners]):
        weight = float(math.factorial(legs))
        factor = 1.0
        next_remaining = list(remaining)
        next_remaining[i] = 0
        for j, count in zip(partners, counts):
            if count:
                weight *= math.comb(remaining[j], count)
                factor *= corr[i, j] ** count
                next_remaining[j] -= count
        if factor == 0.0:
            continue
        total += weight * factor * _diagram_sum(tuple(next_remaining), corr, i + 1)
    return total


def hermite_product_expectation(orders: Sequence[int], corr: np.ndarray) -> float:
    """
    E[prod_i H_{q_i}(X_i)] for standardized jointly Gaussian X (diagram formula)

    Sums over all diagrams without flat edges: each vertex i carries q_i
    legs, legs of distinct vertices are paired, and a diagram contributes
    the product of corr[i, j] over its edges.

    Args:
        orders: Hermite orders, each <= 4, total <= 12
        corr: Correlation matrix of X

    Returns:
        The expectation
    """
    orders = [int(q) for q in orders]
    if any(q < 0 for q in orders):
        raise DomainError("Hermite orders must be nonnegative")
    if any(q > MAX_VERTEX_ORDER for q in orders):
        raise UnsupportedDegreeError(f"Hermite orders above {MAX_VERTEX_ORDER} are not supported")
    if sum(orders) > MAX_DIAGRAM_ORDER:
        raise UnsupportedDegreeError(f"total order {sum(orders)} exceeds {MAX_DIAGRAM_ORDER}")
    corr = _validate_correlation(orders, corr)

    if sum(orders) % 2:
        return 0.0
    return _diagram_sum(tuple(orders), corr, 0)
