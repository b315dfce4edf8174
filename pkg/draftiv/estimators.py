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

"""OLS and two-stage least squares on designs with absorbed fixed effects.

The estimators work on :class:`~draftiv.hdfe.design.DesignMatrices`: every
column is first demeaned with respect to the absorbed factors, then solved by
pivoted QR. Four covariance estimators are available:

``iid``                  classical, sigma^2 (X'X)^{-1}
``hc1``                  heteroskedasticity robust, scaled by n / (n - k)
``cluster:f``            CR1, scaled by G/(G-1) * (n-1)/(n-k)
``twoway:f1,f2``         V(f1) + V(f2) - V(f1 x f2), each part with its own CR1 factor

Here k counts the estimated slopes plus the parameters the absorbed factors
use (see :func:`~draftiv.hdfe.absorb.absorbed_dof`)."""

import math
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .utils import settings, Audit, DraftivError, EmptySampleError, WeakInstrumentWarning
from .linalg import qr_lstsq
from .hdfe.absorb import Factor, make_factor, within_transform, absorbed_dof
from .hdfe.design import DesignMatrices, factor_column

__all__ = ['CovSpec', 'RegressionResult', 'IVResult', 'ols', 'tsls', 'estimate', 'first_stage_F',
           'wu_hausman', 'semi_elasticity', 'absorb_design', 'AbsorbedDesign']

log = logging.getLogger(__name__)

# relative size below which a first-stage residual counts as identically zero
DEGENERATE_TOL = 1e-10


@dataclass(frozen=True)
class CovSpec:
    """Which covariance estimator to use."""
    kind: str = 'iid'
    factors: Tuple[str, ...] = ()

    def __post_init__(self):
        expected = {'iid': 0, 'hc1': 0, 'cluster': 1, 'twoway': 2}
        if self.kind not in expected:
            raise DraftivError("Unknown covariance '{}', expected iid, hc1, cluster or twoway".format(self.kind))
        if len(self.factors) != expected[self.kind]:
            raise DraftivError("Covariance '{}' takes {} factor(s), got {}".format(
                self.kind, expected[self.kind], len(self.factors)))

    @staticmethod
    def parse(text: str) -> 'CovSpec':
        """Parses ``iid``, ``hc1``, ``cluster:event`` or ``twoway:athlete,event``."""
        kind, _, rest = text.strip().partition(':')
        kind = kind.strip().lower()
        factors = tuple(f.strip() for f in rest.split(',') if f.strip())
        return CovSpec(kind, factors)

    @staticmethod
    def from_factors(factors: Tuple[str, ...]) -> 'CovSpec':
        if len(factors) == 0: return CovSpec('iid')
        if len(factors) == 1: return CovSpec('cluster', tuple(factors))
        return CovSpec('twoway', tuple(factors))

    @property
    def label(self) -> str:
        if self.kind == 'iid': return 'iid'
        if self.kind == 'hc1': return 'HC1'
        return "{}({})".format(self.kind, ",".join(self.factors))

    def __str__(self) -> str:
        if self.kind in ('iid', 'hc1'): return self.kind
        return "{}:{}".format(self.kind, ",".join(self.factors))


@dataclass
class RegressionResult:
    """Coefficients, covariance and fit statistics of one estimation."""
    names: List[str]
    coef: np.ndarray
    cov: np.ndarray
    cov_type: str
    n_obs: int
    df_resid: int
    df_test: int
    rss: float
    rmse: float
    r2: float
    adj_r2: float
    within_r2: float
    fe_levels: Dict[str, int]
    cluster_levels: Dict[str, int]
    small_sample_factor: float
    iterations: int = 0
    audit: Optional[Audit] = None
    method: str = 'OLS'
    specification: str = ''
    warnings: List[str] = field(default_factory=list)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    @property
    def tstat(self) -> np.ndarray:
        with np.errstate(divide='ignore', invalid='ignore'):
            return self.coef / self.se

    @property
    def pvalues(self) -> np.ndarray:
        return 2 * stats.t.sf(np.abs(self.tstat), self.df_test)

    def conf_int(self, level: Optional[float] = None) -> np.ndarray:
        level = settings.ci_level if level is None else level
        q = stats.t.ppf(0.5 + level/2, self.df_test)
        return np.column_stack([self.coef - q*self.se, self.coef + q*self.se])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DraftivError("No coefficient named '{}'".format(name))

    def params(self) -> Dict[str, float]:
        return {n: float(b) for n, b in zip(self.names, self.coef)}

    def coef_table(self) -> pd.DataFrame:
        """Estimate, Std. Error, t value and Pr(>|t|) per coefficient."""
        return pd.DataFrame({'term': self.names, 'estimate': self.coef, 'std_error': self.se,
                             't_value': self.tstat, 'p_value': self.pvalues})

    def to_record(self) -> Dict[str, Any]:
        ci = self.conf_int()
        coefficients = {}
        for i, n in enumerate(self.names):
            coefficients[n] = {'estimate': self.coef[i], 'se': self.se[i], 't': self.tstat[i],
                               'p': self.pvalues[i], 'ci_low': ci[i, 0], 'ci_high': ci[i, 1]}
        return {
            'specification': self.specification, 'method': self.method, 'covariance': self.cov_type,
            'small_sample_factor': self.small_sample_factor, 'coefficients': coefficients,
            'n_obs': self.n_obs, 'df_resid': self.df_resid, 'df_test': self.df_test,
            'rmse': self.rmse, 'r2': self.r2, 'adj_r2': self.adj_r2, 'within_r2': self.within_r2,
            'fe_levels': self.fe_levels, 'cluster_levels': self.cluster_levels,
            'iterations': self.iterations, 'audit': self.audit.as_dict() if self.audit else {},
            'warnings': list(self.warnings),
        }


@dataclass
class IVResult(RegressionResult):
    """A 2SLS result with its first stage and the endogeneity test."""
    first_stage: Optional[RegressionResult] = None
    first_stage_F: float = float('nan')
    first_stage_p: float = float('nan')
    wu_hausman: float = float('nan')
    wu_hausman_p: float = float('nan')
    wu_hausman_kind: str = ''
    endog_name: str = ''

    def to_record(self) -> Dict[str, Any]:
        rec = super().to_record()
        rec['first_stage'] = self.first_stage.to_record()['coefficients'] if self.first_stage else {}
        rec['first_stage_F'] = self.first_stage_F
        rec['first_stage_p'] = self.first_stage_p
        rec['wu_hausman'] = self.wu_hausman
        rec['wu_hausman_p'] = self.wu_hausman_p
        rec['wu_hausman_kind'] = self.wu_hausman_kind
        rec['endogenous'] = self.endog_name
        if self.endog_name in self.names:
            rec['semi_elasticity'] = semi_elasticity(self.coef[self.index(self.endog_name)])
        return rec


def semi_elasticity(beta: float) -> float:
    """Percent change implied by a coefficient on a log outcome, (e^beta - 1) * 100."""
    if not math.isfinite(beta):
        raise DraftivError("Coefficient must be finite, got {}".format(beta))
    return float(np.expm1(beta) * 100)


class AbsorbedDesign(NamedTuple):
    """The columns of a design after projecting out the absorbed factors."""
    y: np.ndarray
    X: np.ndarray
    endog: Optional[np.ndarray]
    Z: np.ndarray
    iterations: int
    fe_dof: int
    design: DesignMatrices


def absorb_design(design: DesignMatrices, tol: Optional[float] = None,
                  max_iter: Optional[int] = None) -> AbsorbedDesign:
    """Demeans y, the regressors, the endogenous column and the instruments in one go."""
    blocks = [design.y[:, None], design.exog]
    names = ['y'] + design.exog_names
    if design.endog is not None:
        blocks.append(design.endog[:, None])
        names.append(design.endog_name or 'endog')
    blocks.append(design.instruments)
    names += design.instrument_names
    M, iterations = within_transform(np.column_stack(blocks), design.absorb, tol, max_iter, names)
    k = design.exog.shape[1]
    y, X = M[:, 0], M[:, 1:1+k]
    pos = 1 + k
    endog = None
    if design.endog is not None:
        endog = M[:, pos]
        pos += 1
    return AbsorbedDesign(y, X, endog, M[:, pos:], iterations, absorbed_dof(design.absorb), design)


def _cluster_factors(design: DesignMatrices, cov: CovSpec) -> List[Factor]:
    return [make_factor(factor_column(design.frame, f), f) for f in cov.factors]


def _cr1(scores: np.ndarray, bread: np.ndarray, factor: Factor, n: int, df_resid: int) -> Tuple[np.ndarray, float]:
    g = factor.levels
    if g < 2:
        raise DraftivError("Clustering on '{}' needs at least 2 clusters".format(factor.name))
    summed = factor.indicator @ scores
    meat = summed.T @ summed
    scale = g / (g - 1) * (n - 1) / df_resid
    return scale * bread @ meat @ bread, scale


def _covariance(X: np.ndarray, resid: np.ndarray, bread: np.ndarray, df_resid: int, cov: CovSpec,
                clusters: List[Factor]) -> Tuple[np.ndarray, float, int]:
    """Returns the covariance, the small-sample factor and the test degrees of freedom."""
    n = len(resid)
    if cov.kind == 'iid':
        sigma2 = float(resid @ resid) / df_resid
        return sigma2 * bread, 1.0, df_resid
    scores = X * resid[:, None]
    if cov.kind == 'hc1':
        scale = n / df_resid
        return scale * bread @ (scores.T @ scores) @ bread, scale, df_resid
    if cov.kind == 'cluster':
        V, scale = _cr1(scores, bread, clusters[0], n, df_resid)
        return V, scale, clusters[0].levels - 1
    a, b = clusters
    both = make_factor(pd.Series(a.codes).astype(str) + '/' + pd.Series(b.codes).astype(str),
                       "{}x{}".format(a.name, b.name))
    V1, s1 = _cr1(scores, bread, a, n, df_resid)
    V2, _ = _cr1(scores, bread, b, n, df_resid)
    if both.levels < 2:
        V12 = np.zeros_like(V1)
    else:
        V12, _ = _cr1(scores, bread, both, n, df_resid)
    return V1 + V2 - V12, s1, min(a.levels, b.levels) - 1


def _fit(regressors: np.ndarray, resid_X: np.ndarray, ab: AbsorbedDesign, y: np.ndarray, names: List[str],
         cov: CovSpec, clusters: List[Factor], method: str) -> RegressionResult:
    """Shared core of OLS and the second stage. ``regressors`` enter the bread
    and the scores, ``resid_X`` is used to form the residuals."""
    design = ab.design
    n, k = regressors.shape
    df_resid = n - k - ab.fe_dof
    if df_resid <= 0:
        raise EmptySampleError("{} observations cannot identify {} slopes and {} absorbed parameters".format(
            n, k, ab.fe_dof))
    qr = qr_lstsq(regressors, y, names)
    coef = qr.coef
    resid = y - resid_X @ coef
    V, scale, df_test = _covariance(regressors, resid, qr.xtx_inv, df_resid, cov, clusters)
    rss = float(resid @ resid)
    raw = design.y
    tss = float(((raw - raw.mean())**2).sum())
    tss_within = float((y**2).sum()) if design.absorb else tss
    r2 = 1 - rss/tss if tss > 0 else float('nan')
    adj = 1 - (rss/df_resid)/(tss/(n-1)) if tss > 0 and n > 1 else float('nan')
    within = 1 - rss/tss_within if tss_within > 0 else float('nan')
    return RegressionResult(
        names=list(names), coef=np.asarray(coef, dtype=float), cov=V, cov_type=cov.label, n_obs=n,
        df_resid=df_resid, df_test=max(df_test, 1), rss=rss, rmse=math.sqrt(rss/n), r2=r2, adj_r2=adj,
        within_r2=within, fe_levels={f.name: f.levels for f in design.absorb},
        cluster_levels={f.name: f.levels for f in clusters}, small_sample_factor=scale,
        iterations=ab.iterations, audit=design.audit, method=method, specification=design.spec.text)


def _default_cov(design: DesignMatrices, cov: Optional[CovSpec]) -> CovSpec:
    if cov is not None: return cov
    return CovSpec.from_factors(design.spec.cluster)


def ols(design: DesignMatrices, cov: Optional[CovSpec] = None, include_endog: bool = False,
        absorbed: Optional[AbsorbedDesign] = None) -> RegressionResult:
    """Least squares on the absorbed design.

    Args:
        design: a design without endogenous term, unless ``include_endog``
        cov: covariance estimator, defaults to the formula's ``cluster:`` section
        include_endog: treat the endogenous column as an ordinary regressor

    Raises:
        CollinearityError: the absorbed design is rank deficient.
    """
    if design.endog is not None and not include_endog:
        raise DraftivError("Design has an endogenous term; use tsls or include_endog=True")
    cov = _default_cov(design, cov)
    ab = absorbed or absorb_design(design)
    X, names = ab.X, list(design.exog_names)
    if include_endog and ab.endog is not None:
        X = np.column_stack([X, ab.endog])
        names.append(design.endog_name or 'endog')
    return _fit(X, X, ab, ab.y, names, cov, _cluster_factors(design, cov), 'OLS')


def first_stage_F(first_stage: RegressionResult, excluded: List[str]) -> Tuple[float, float]:
    """Wald F statistic on the excluded instruments and its p-value, using the
    covariance of the first-stage fit."""
    idx = [first_stage.index(z) for z in excluded]
    b = first_stage.coef[idx]
    V = first_stage.cov[np.ix_(idx, idx)]
    q = len(idx)
    if np.allclose(V, 0.0, atol=0.0):
        stat = math.inf if np.any(b != 0) else 0.0
    else:
        stat = float(b @ np.linalg.solve(V, b)) / q
    p = float(stats.f.sf(stat, q, first_stage.df_test)) if math.isfinite(stat) else 0.0
    return stat, p


def _first_stage(ab: AbsorbedDesign, cov: CovSpec, clusters: List[Factor]) -> RegressionResult:
    design = ab.design
    XZ = np.column_stack([ab.X, ab.Z])
    names = design.exog_names + design.instrument_names
    assert ab.endog is not None
    return _fit(XZ, XZ, ab, ab.endog, names, cov, clusters, 'first stage')


def _degenerate(v: np.ndarray, reference: np.ndarray) -> bool:
    return float(np.abs(v).max(initial=0.0)) <= DEGENERATE_TOL * max(float(np.abs(reference).max(initial=0.0)), 1.0)


def _wu_hausman(ab: AbsorbedDesign, first: RegressionResult, cov: CovSpec, clusters: List[Factor],
                kind: str) -> Tuple[float, float]:
    design = ab.design
    assert ab.endog is not None
    XZ = np.column_stack([ab.X, ab.Z])
    fitted = XZ @ first.coef
    v = ab.endog - fitted
    if _degenerate(v, ab.endog):
        return 0.0, 1.0
    base = np.column_stack([ab.X, ab.endog])
    names = design.exog_names + [design.endog_name or 'endog']
    if kind == 'control_function':
        aug = np.column_stack([base, v])
        res = _fit(aug, aug, ab, ab.y, names + ['first_stage_residual'], cov, clusters, 'control function')
        t = res.tstat[-1]
        stat = float(t*t)
        return stat, float(stats.f.sf(stat, 1, res.df_test))
    if kind == 'wu':
        restricted = qr_lstsq(base, ab.y, names)
        unrestricted = qr_lstsq(np.column_stack([base, fitted]), ab.y, names + ['fitted'])
        ssr_r = float(restricted.resid @ restricted.resid)
        ssr_ur = float(unrestricted.resid @ unrestricted.resid)
        df = len(ab.y) - base.shape[1] - 1 - ab.fe_dof
        if df <= 0 or ssr_ur <= 0:
            return 0.0, 1.0
        stat = (ssr_r - ssr_ur) / (ssr_ur / df)
        return float(stat), float(stats.f.sf(stat, 1, df))
    raise DraftivError("Unknown Wu-Hausman variant '{}'".format(kind))


def wu_hausman(design: DesignMatrices, cov: Optional[CovSpec] = None, kind: Optional[str] = None
               ) -> Tuple[float, float]:
    """Endogeneity test of the endogenous column.

    The default control-function form adds the first-stage residual to the
    structural equation and tests its coefficient with the configured
    covariance. ``kind='wu'`` is the classical F test comparing the fit with
    and without the first-stage fitted values. An identically zero first-stage
    residual gives statistic 0 and p-value 1."""
    if design.endog is None:
        raise DraftivError("Wu-Hausman test needs an endogenous term")
    cov = _default_cov(design, cov)
    ab = absorb_design(design)
    clusters = _cluster_factors(design, cov)
    first = _first_stage(ab, cov, clusters)
    return _wu_hausman(ab, first, cov, clusters, kind or settings.wu_hausman)


def tsls(design: DesignMatrices, cov: Optional[CovSpec] = None, weak_threshold: Optional[float] = None,
         wu_kind: Optional[str] = None, absorbed: Optional[AbsorbedDesign] = None) -> IVResult:
    """Two-stage least squares.

    The first stage regresses the endogenous column on the instruments and the
    exogenous regressors; the second stage replaces it by its fitted values.
    Residuals for the covariance use the original endogenous column. The result
    carries the first stage, its F statistic and the Wu-Hausman test. A first
    stage F below ``weak_threshold`` (default 10) adds a warning to the result
    and emits a :class:`~draftiv.utils.WeakInstrumentWarning`."""
    if design.endog is None or not design.instrument_names:
        raise DraftivError("2SLS needs an endogenous term and at least one instrument")
    cov = _default_cov(design, cov)
    weak_threshold = settings.weak_f_threshold if weak_threshold is None else weak_threshold
    ab = absorbed or absorb_design(design)
    assert ab.endog is not None
    clusters = _cluster_factors(design, cov)

    first = _first_stage(ab, cov, clusters)
    F, F_p = first_stage_F(first, design.instrument_names)
    fitted = np.column_stack([ab.X, ab.Z]) @ first.coef

    names = design.exog_names + [design.endog_name or 'endog']
    X_hat = np.column_stack([ab.X, fitted])
    X_orig = np.column_stack([ab.X, ab.endog])
    base = _fit(X_hat, X_orig, ab, ab.y, names, cov, clusters, '2SLS')
    wh, wh_p = _wu_hausman(ab, first, cov, clusters, wu_kind or settings.wu_hausman)

    result = IVResult(**base.__dict__)
    result.first_stage = first
    result.first_stage_F, result.first_stage_p = F, F_p
    result.wu_hausman, result.wu_hausman_p = wh, wh_p
    result.wu_hausman_kind = wu_kind or settings.wu_hausman
    result.endog_name = design.endog_name or 'endog'
    if not F >= weak_threshold:
        msg = "Weak instrument: first stage F = {:.3g} below {:g}".format(F, weak_threshold)
        result.warnings.append(msg)
        warnings.warn(msg, WeakInstrumentWarning)
    return result


def estimate(design: DesignMatrices, cov: Optional[CovSpec] = None) -> RegressionResult:
    """2SLS for designs with an endogenous term, OLS otherwise."""
    if design.endog is not None:
        return tsls(design, cov)
    return ols(design, cov)
