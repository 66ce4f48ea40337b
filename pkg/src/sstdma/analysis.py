"""Closed-form convergence bounds and the relative-state Markov chain.

``s`` is always the load ratio (extended degree over frame size) and ``n``
the number of signaling periods.  Powers use the convention ``0**0 == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateChainError(ValueError):
    pass


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"number of signaling periods must be >= 2, got {n}")


def _check_s(s: float) -> None:
    if s < 0:
        raise ValueError(f"load ratio must be nonnegative, got {s}")


def _pow(base: float, exp: float) -> float:
    if base <= 0.0:
        return 1.0 if exp == 0 else 0.0
    return base**exp


def only_one_lb(s: float, n: int, rho: Sequence[float] | None = None) -> float:
    """Probability lower bound that a node is alone in its slot.

    Sum over periods k of ``rho_k * (1 - rho_1 - ... - rho_k) ** s``;
    ``rho`` defaults to uniform ``1/n``.
    """
    _check_n(n)
    _check_s(s)
    if rho is None:
        return sum(_pow((n - k) / n, s) for k in range(1, n + 1)) / n
    if len(rho) != n:
        raise ValueError(f"need {n} period probabilities, got {len(rho)}")
    total, acc = 0.0, 0.0
    for r in rho:
        acc += r
        total += r * _pow(max(0.0, 1.0 - acc), s)
    return total


def q_lb(s: float, n: int) -> float:
    _check_n(n)
    _check_s(s)
    return max(((n - 1) / (2 * n)) ** s, (1 - 1 / n) ** (s + 1) / (s + 1))


def local_bound_eq3(s: float, n: int) -> float:
    """Min of the two closed-form local bounds; the second branch is not 1/q_lb's."""
    _check_n(n)
    _check_s(s)
    return min((2 * n / (n - 1)) ** s, (s + 1) / n * (n / (n - 1)) ** (s + 1))


def local_bound_from_q(s: float, n: int) -> float:
    return 1.0 / q_lb(s, n)


@dataclass(frozen=True)
class ChainParams:
    """Transition probabilities of the Ready/Obtaining/Allocated chain.

    f: Ready->Obtaining, q: Ready->Allocated, h: Obtaining->Ready,
    w: Obtaining->Allocated.
    """

    f: float
    h: float
    q: float
    w: float

    def __post_init__(self):
        for name in ("f", "h", "q", "w"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.f + self.q > 1 + 1e-12 or self.h + self.w > 1 + 1e-12:
            raise ValueError("row probabilities exceed 1")


def transition_matrix(p: ChainParams) -> np.ndarray:
    return np.array(
        [
            [1 - p.f - p.q, p.f, p.q],
            [p.h, 1 - p.h - p.w, p.w],
            [1.0, 0.0, 0.0],
        ]
    )


def stationary(p: ChainParams) -> tuple[float, float, float]:
    num3 = p.q * p.h + p.q * p.w + p.f * p.w
    denom = p.h + p.w + p.f + num3
    if denom <= 0:
        raise DegenerateChainError(f"chain has no unique invariant vector: {p}")
    return ((p.h + p.w) / denom, p.f / denom, num3 / denom)


def chain_s(p: ChainParams) -> float:
    """Expected rounds from Ready to Allocated, i.e. 1/pi_3 - 1."""
    num3 = p.q * p.h + p.q * p.w + p.f * p.w
    if num3 <= 0:
        raise DegenerateChainError(f"Allocated is unreachable: {p}")
    return (p.h + p.w + p.f) / num3


def expected_winners_lb(N: int, x_over_T: float, n: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    return N * only_one_lb(x_over_T, n)


def expected_winners_lb_compact(N: int, x_over_T: float, n: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    return N * q_lb(x_over_T, n)


def global_bound(s_max: float, n: int) -> float:
    _check_n(n)
    _check_s(s_max)
    return (2 * n / (n - 1)) ** s_max


def expected_retransmissions(s_max: float, n: int) -> float:
    return global_bound(s_max, n) - 1


def rounds_for_confidence(alpha: float, N: int, s_max: float, n: int) -> float:
    """Rounds after which all N nodes are allocated with probability >= 1 - alpha."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if N < 1:
        raise ValueError("N must be >= 1")
    _check_n(n)
    _check_s(s_max)
    q = ((n - 1) / (2 * n)) ** s_max
    if q >= 1.0:
        return 1.0
    # 1 - (1-alpha)^(1/N) without cancellation
    tail = -math.expm1(math.log1p(-alpha) / N)
    return 1.0 + math.log(tail) / math.log1p(-q)


def tmax_cdf_bound(k: float, q: float, N: int) -> float:
    """Lower bound on P(t_max < k): (1 - (1-q)^(k-1))^N."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0 < q <= 1:
        raise ValueError(f"q must be in (0, 1], got {q}")
    miss = _pow(1.0 - q, k - 1)
    if miss >= 1.0:
        return 0.0
    return math.exp(N * math.log1p(-miss))

