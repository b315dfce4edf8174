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

"""Dense least squares by column-pivoted QR decomposition.

Pivoting puts the numerically independent columns first, so the rank of the
design can be read off the diagonal of R, and the columns that fall below the
tolerance are exactly the ones that can be written in terms of the others."""

from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .utils import CollinearityError

__all__ = ['QRFit', 'qr_lstsq', 'qr_rank', 'collinear_columns', 'duplicate_columns', 'RANK_TOL']

# relative tolerance on |R_kk| / |R_00|
RANK_TOL = 1e-9


class QRFit(NamedTuple):
    """Result of :func:`qr_lstsq`.

    ``coef`` has one row per column of X and one column per column of Y (or is
    1-D for a vector y). ``xtx_inv`` is (X^T X)^{-1} in the original column order."""
    coef: np.ndarray
    resid: np.ndarray
    fitted: np.ndarray
    xtx_inv: np.ndarray
    rank: int


def _names(names: Optional[Sequence[str]], k: int) -> List[str]:
    return list(names) if names is not None else ["x{}".format(i) for i in range(k)]


def _pivoted_qr(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    Q, R, piv = scipy.linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if len(diag) == 0 or diag[0] == 0:
        return Q, R, piv, 0
    rank = int(np.sum(diag > RANK_TOL * diag[0]))
    return Q, R, piv, rank


def qr_rank(X: np.ndarray) -> int:
    X = np.asarray(X, dtype=float)
    if X.shape[1] == 0: return 0
    return _pivoted_qr(X)[3]


def collinear_columns(X: np.ndarray, names: Optional[Sequence[str]] = None) -> List[str]:
    """Names of the columns involved in a linear dependency, in column order.
    Empty when X has full column rank."""
    X = np.asarray(X, dtype=float)
    k = X.shape[1]
    names = _names(names, k)
    if k == 0: return []
    Q, R, piv, rank = _pivoted_qr(X)
    if rank == k: return []
    involved = set(int(p) for p in piv[rank:])
    if rank > 0:
        # express each deficient column through the independent ones
        coefs = scipy.linalg.solve_triangular(R[:rank,:rank], R[:rank,rank:])
        scale = np.abs(coefs).max() if coefs.size else 0.0
        for i in range(rank):
            if scale > 0 and np.any(np.abs(coefs[i]) > 1e-8 * scale):
                involved.add(int(piv[i]))
    return [names[i] for i in sorted(involved)]


def duplicate_columns(X: np.ndarray, names: Sequence[str],
                      pairs: Optional[Sequence[Tuple[int,int]]] = None) -> List[Tuple[str,str]]:
    """Pairs of columns that are numerically identical. ``pairs`` limits which
    index pairs are compared."""
    X = np.asarray(X, dtype=float)
    k = X.shape[1]
    if pairs is None:
        pairs = [(i, j) for i in range(k) for j in range(i+1, k)]
    return [(names[i], names[j]) for i, j in pairs if np.allclose(X[:,i], X[:,j], rtol=0, atol=1e-12)]


def qr_lstsq(X: np.ndarray, Y: np.ndarray, names: Optional[Sequence[str]] = None) -> QRFit:
    """Least squares solution of X b = Y.

    Raises:
        CollinearityError: X does not have full column rank. The error names
            the columns involved.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, k = X.shape
    if k == 0:
        shape = (0,) if Y.ndim == 1 else (0, Y.shape[1])
        return QRFit(np.zeros(shape), Y.copy(), np.zeros_like(Y), np.zeros((0,0)), 0)
    if n < k:
        raise CollinearityError("{} rows cannot identify {} coefficients".format(n, k), _names(names, k))
    Q, R, piv, rank = _pivoted_qr(X)
    if rank < k:
        cols = collinear_columns(X, names)
        raise CollinearityError("Design is rank deficient (rank {} of {}); collinear columns: {}".format(
            rank, k, ", ".join(cols)), cols)
    qty = Q.T @ Y
    b_piv = scipy.linalg.solve_triangular(R, qty)
    coef = np.empty_like(b_piv)
    coef[piv] = b_piv
    r_inv = scipy.linalg.solve_triangular(R, np.eye(k))
    inv_piv = r_inv @ r_inv.T
    xtx_inv = np.empty_like(inv_piv)
    xtx_inv[np.ix_(piv, piv)] = inv_piv
    fitted = X @ coef
    return QRFit(coef, Y - fitted, fitted, xtx_inv, rank)
