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

"""Absorption of categorical factors by alternating projections.

Each factor is an integer code per row. Projecting out one factor subtracts
the group means of that factor; cycling through all factors converges to the
residual of a regression on all their dummies together, without ever building
the dummy matrix."""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from ..utils import settings, ConvergenceError, DraftivError

__all__ = ['Factor', 'make_factor', 'within_transform', 'absorbed_dof', 'group_means']

log = logging.getLogger(__name__)


class Factor(object):
    """Integer codes 0..levels-1 of a categorical column, with a cached
    level-by-row indicator matrix."""

    def __init__(self, codes: np.ndarray, levels: int, name: str = '') -> None:
        self.codes = np.asarray(codes, dtype=np.int64)
        self.levels = int(levels)
        self.name = name
        n = len(self.codes)
        self.indicator = scipy.sparse.csr_matrix(
            (np.ones(n), (self.codes, np.arange(n))), shape=(self.levels, n))
        self.counts = np.bincount(self.codes, minlength=self.levels).astype(float)

    def __len__(self) -> int:
        return len(self.codes)

    def __repr__(self) -> str:
        return "Factor({}, levels={}, rows={})".format(self.name, self.levels, len(self))


def make_factor(values: Sequence, name: str = '') -> Factor:
    """Codes an arbitrary column. Missing values are not allowed."""
    s = pd.Series(values)
    if s.isna().any():
        raise DraftivError("Factor {} has missing values".format(name or '?'))
    codes, uniques = pd.factorize(s, sort=True)
    return Factor(codes, len(uniques), name)


def group_means(X: np.ndarray, factor: Factor) -> np.ndarray:
    """Per-level means of every column of X (levels x columns)."""
    sums = factor.indicator @ X
    return sums / factor.counts[:, None]


def _project(X: np.ndarray, factor: Factor) -> None:
    X -= group_means(X, factor)[factor.codes]


def within_transform(matrix: np.ndarray, factors: Sequence[Factor], tol: Optional[float] = None,
                     max_iter: Optional[int] = None, names: Optional[Sequence[str]] = None
                     ) -> Tuple[np.ndarray, int]:
    """Demeans the columns of ``matrix`` with respect to all ``factors``.

    A single factor is removed exactly in one pass. With several factors the
    projections are cycled until no entry moves by ``tol`` or more during a
    full cycle.

    Returns:
        The transformed matrix (same shape as the input) and the number of
        cycles used.

    Raises:
        ConvergenceError: after ``max_iter`` cycles; names the column that was
            still moving the most.
    """
    tol = settings.hdfe_tol if tol is None else tol
    max_iter = settings.hdfe_max_iter if max_iter is None else max_iter
    if not tol > 0:
        raise DraftivError("Tolerance must be positive, got {}".format(tol))
    X = np.array(matrix, dtype=float, copy=True)
    vector = X.ndim == 1
    if vector:
        X = X[:, None]
    for f in factors:
        if len(f) != X.shape[0]:
            raise DraftivError("Factor {} has {} rows, matrix has {}".format(f.name, len(f), X.shape[0]))
    if not factors or X.shape[1] == 0 or X.shape[0] == 0:
        return (X[:, 0] if vector else X), 0
    if len(factors) == 1:
        _project(X, factors[0])
        return (X[:, 0] if vector else X), 1

    change = np.zeros(X.shape[1])
    for it in range(1, max_iter+1):
        previous = X.copy()
        for f in factors:
            _project(X, f)
        change = np.abs(X - previous).max(axis=0)
        if change.max() < tol:
            log.debug("Alternating projections converged after %d cycles", it)
            return (X[:, 0] if vector else X), it
    worst = int(np.argmax(change))
    column = names[worst] if names is not None else str(worst)
    raise ConvergenceError("Fixed effects did not converge within {} cycles; column '{}' still changed "
                           "by {:.3g}".format(max_iter, column, change[worst]), column, max_iter)


def absorbed_dof(factors: Sequence[Factor]) -> int:
    """Number of free parameters the absorbed factors use.

    The first two factors count their levels minus the number of connected
    components of their bipartite level graph, which is exact. Any further
    factor counts its levels minus one."""
    if not factors:
        return 0
    if len(factors) == 1:
        return factors[0].levels
    a, b = factors[0], factors[1]
    graph = scipy.sparse.coo_matrix((np.ones(len(a)), (a.codes, b.codes + a.levels)),
                                    shape=(a.levels + b.levels,)*2)
    components, _ = connected_components(graph, directed=False)
    dof = a.levels + b.levels - components
    for f in factors[2:]:
        dof += f.levels - 1
    return int(dof)
