"""Mid-price return functions and the price series they induce.

Trades are assumed to execute at the mid price, so the one-step return is the
average of the impact of the current and previous excess demand:

    linear:  r = (A + A_prev) / 2
    sqrt:    r = (sign(A) sqrt|A| + sign(A_prev) sqrt|A_prev|) / 2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import ImpactKind


def signed_sqrt(a: float) -> float:
    if a > 0:
        return math.sqrt(a)
    if a < 0:
        return -math.sqrt(-a)
    return 0.0


def return_linear(a_now: int, a_prev: int) -> float:
    return 0.5 * (a_now + a_prev)


def return_sqrt(a_now: int, a_prev: int) -> float:
    return 0.5 * (signed_sqrt(a_now) + signed_sqrt(a_prev))


def impact_return(a_now: int, a_prev: int, kind: ImpactKind) -> float:
    if kind is ImpactKind.LINEAR:
        return return_linear(a_now, a_prev)
    return return_sqrt(a_now, a_prev)


@dataclass
class PriceSeries:
    """Mid-price path driven by excess demand.

    ``p`` has one more entry than ``r`` and ``a``; p[0] = 0 and the demand
    before the first step is defined as 0.
    """

    p: list[float] = field(default_factory=lambda: [0.0])
    r: list[float] = field(default_factory=list)
    a: list[int] = field(default_factory=list)

    def advance(self, a_now: int, kind: ImpactKind) -> float:
        a_prev = self.a[-1] if self.a else 0
        ret = impact_return(a_now, a_prev, kind)
        self.a.append(a_now)
        self.r.append(ret)
        self.p.append(self.p[-1] + ret)
        return ret


def advance_price(series: PriceSeries, a_now: int, kind: ImpactKind) -> PriceSeries:
    series.advance(a_now, kind)
    return series
