# draftiv - panel instrumental-variables estimation of swim drafting effects
# Copyright (C) 2025 - The draftiv developers

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#    http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""The two-stage positioning game.

An athlete first commits to a swim effort ``effort_e``, then picks a position
``d`` inside the drafting group. Drafting only pays from the fourth position on,
and the gain saturates at ``gamma``::

    B(d) = 0                                  d <= 3
    B(d) = gamma * (1 - exp(-lam * (d - 3)))  d > 3

The athlete minimises the disutility::

    DIS(d) = alpha * cost_c * effort_e + (1 - alpha) * (mu - B(d))

All functions accept scalars or numpy arrays of positions."""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .utils import settings, FloatInt, DraftivError

__all__ = ['GameParams', 'effort_cost', 'benefit', 'benefit_derivative', 'benefit_second_derivative',
           'disutility', 'disutility_derivative', 'optimal_position', 'FREE_POSITIONS']

# positions that draft without any gain
FREE_POSITIONS = 3

ArrayLike = Union[FloatInt, np.ndarray]


@dataclass(frozen=True)
class GameParams:
    """Structural parameters of the positioning game."""
    gamma: float = 1.0
    lam: float = 0.5
    alpha: float = 0.5
    cost_c: float = 1.0
    mu: float = 1.0
    effort_e: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise DraftivError("gamma must be positive, got {}".format(self.gamma))
        if not self.lam > 0:
            raise DraftivError("lambda must be positive, got {}".format(self.lam))
        if not 0 <= self.alpha <= 1:
            raise DraftivError("alpha must lie in [0, 1], got {}".format(self.alpha))
        if not self.cost_c > 0:
            raise DraftivError("cost_c must be positive, got {}".format(self.cost_c))
        if not self.effort_e >= 0:
            raise DraftivError("effort_e must be non-negative, got {}".format(self.effort_e))
        if not math.isfinite(self.mu):
            raise DraftivError("mu must be finite")

    @staticmethod
    def default() -> 'GameParams':
        return GameParams(gamma=settings.gamma, lam=settings.lam)


def _positions(d: ArrayLike) -> np.ndarray:
    a = np.asarray(d, dtype=float)
    if np.any(a < 1):
        raise DraftivError("Positions start at 1, got {}".format(a[a < 1].min() if a.ndim else float(a)))
    return a

def _out(a: np.ndarray, d: ArrayLike):
    return float(a) if np.ndim(d) == 0 else a


def effort_cost(effort_e: ArrayLike, cost_c: float) -> ArrayLike:
    """Linear cost of the first-stage effort."""
    return cost_c * np.asarray(effort_e, dtype=float) if np.ndim(effort_e) else cost_c * float(effort_e)


def benefit(d: ArrayLike, params: GameParams) -> ArrayLike:
    """Drafting benefit of position ``d``; zero up to position 3."""
    a = _positions(d)
    deep = a > FREE_POSITIONS
    out = np.where(deep, -params.gamma * np.expm1(-params.lam * np.where(deep, a - FREE_POSITIONS, 0.0)), 0.0)
    return _out(out, d)


def benefit_derivative(d: ArrayLike, params: GameParams) -> ArrayLike:
    """dB/dd. Defined as 0 on the flat region d <= 3."""
    a = _positions(d)
    deep = a > FREE_POSITIONS
    out = np.where(deep, params.gamma * params.lam * np.exp(-params.lam * np.where(deep, a - FREE_POSITIONS, 0.0)), 0.0)
    return _out(out, d)


def benefit_second_derivative(d: ArrayLike, params: GameParams) -> ArrayLike:
    """d2B/dd2, negative beyond position 3."""
    a = _positions(d)
    deep = a > FREE_POSITIONS
    out = np.where(deep, -params.gamma * params.lam**2 * np.exp(-params.lam * np.where(deep, a - FREE_POSITIONS, 0.0)), 0.0)
    return _out(out, d)


def disutility(d: ArrayLike, params: GameParams) -> ArrayLike:
    """Weighted effort cost plus the performance shortfall left after drafting."""
    a = _positions(d)
    cost = params.alpha * effort_cost(params.effort_e, params.cost_c)
    out = cost + (1 - params.alpha) * (params.mu - np.asarray(benefit(a, params)))
    return _out(out, d)


def disutility_derivative(d: ArrayLike, params: GameParams) -> ArrayLike:
    """dDIS/dd of the continuous relaxation: -(1 - alpha) B'(d), never positive."""
    out = -(1 - params.alpha) * np.asarray(benefit_derivative(d, params))
    return _out(out, d)


def optimal_position(params: GameParams, d_max: int) -> int:
    """Exhaustive discrete argmin of the disutility over positions 1..d_max.

    Ties go to the smaller position. Only the position-dependent part of DIS,
    ``(1 - alpha) * gamma * r(d)`` with ``r(d) = 1`` for d <= 3 and
    ``exp(-lam (d-3))`` beyond, is compared: it orders the candidates exactly as
    DIS does but does not lose the ordering to rounding once B(d) saturates at
    gamma in floating point. For alpha < 1 and d_max > 3 the minimiser is
    therefore d_max; DIS has no interior minimum."""
    if d_max < 1:
        raise DraftivError("d_max must be at least 1, got {}".format(d_max))
    if params.alpha == 1:
        return 1
    d = np.arange(1, int(d_max)+1, dtype=float)
    remaining = np.where(d > FREE_POSITIONS, np.exp(-params.lam * np.maximum(d - FREE_POSITIONS, 0.0)), 1.0)
    return int(np.argmin(remaining)) + 1
