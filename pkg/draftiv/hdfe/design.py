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

"""Turns a panel and a :class:`~draftiv.hdfe.formula.FormulaSpec` into the
matrices the estimators work on.

Filters are applied in a fixed order, each with its own audit category:
outcome construction (rank cap, undefined outcome), group size, periods,
position cap, bands, then rows with a missing instrument or regressor."""

import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..utils import settings, Audit, Period, DraftivError, EmptySampleError, CollinearityError
from ..grouping import group_filters
from ..theory import GameParams
from ..instruments import band_column, benefit_column
from ..linalg import duplicate_columns
from .formula import FormulaSpec, OutcomeSpec, Term, parse_formula, ENDOG_POSITION, ENDOG_BENEFIT
from .absorb import Factor, make_factor

__all__ = ['DesignMatrices', 'build_outcome', 'build_design', 'resolve_column', 'factor_column',
           'DERIVED_TERMS', 'INTERCEPT']

log = logging.getLogger(__name__)

INTERCEPT = '(Intercept)'

# names that do not map one-to-one onto a panel column
DERIVED_TERMS = (ENDOG_POSITION, ENDOG_BENEFIT, 'race_rank', 'cluster_id', 'treat')


class DesignMatrices(NamedTuple):
    """Matrices of one estimation sample. All arrays share the row count.

    ``exog`` holds the included regressors, ``endog`` the endogenous column (or
    None for OLS) and ``instruments`` the excluded instruments. Nothing is
    absorbed yet; ``absorb`` lists the factors to project out."""
    y: np.ndarray
    exog: np.ndarray
    exog_names: List[str]
    endog: Optional[np.ndarray]
    endog_name: Optional[str]
    instruments: np.ndarray
    instrument_names: List[str]
    absorb: List[Factor]
    clusters: List[Factor]
    audit: Audit
    frame: pd.DataFrame
    spec: FormulaSpec

    @property
    def n(self) -> int:
        return len(self.y)


def build_outcome(panel: pd.DataFrame, outcome: OutcomeSpec) -> Tuple[pd.Series, Audit]:
    """The dependent variable for every row that has one.

    The event mean of the centered mode is taken over all ranked rows of the
    event, before the rank cap.

    Raises:
        EmptySampleError: no row is left.
    """
    audit = Audit(len(panel))
    if outcome.mode == 'level':
        if outcome.column not in panel.columns:
            raise DraftivError("Unknown outcome column '{}'".format(outcome.column))
        y = pd.to_numeric(panel[outcome.column], errors='coerce').astype(float)
        keep = y.notna()
        audit.drop('missing_outcome', int((~keep).sum()))
    else:
        rank = panel['rank'].astype(float)
        keep = rank.notna()
        audit.drop('missing_outcome', int((~keep).sum()))
        if outcome.mode == 'log_rank_plus1':
            arg = rank + 1.0
        else:
            event_mean = rank.groupby(panel['event_id']).transform('mean')
            arg = rank - event_mean + outcome.shift_c
        if outcome.rank_cap is not None:
            capped = keep & ~(rank < outcome.rank_cap)
            audit.drop('rank_cap', int(capped.sum()))
            keep &= ~capped
        undefined = keep & ~(arg > 0)
        audit.drop('undefined_outcome', int(undefined.sum()))
        keep &= ~undefined
        with np.errstate(invalid='ignore', divide='ignore'):
            y = np.log(arg.where(keep))
    y = y[keep]
    audit.finish(len(y))
    if len(y) == 0:
        raise EmptySampleError("No rows left after building the outcome ({})".format(audit))
    return y, audit


def resolve_column(frame: pd.DataFrame, name: str, params: Optional[GameParams] = None) -> np.ndarray:
    """Values of a single term factor as floats."""
    if name in (ENDOG_POSITION, ENDOG_BENEFIT):
        source = 'position'
    elif name == 'race_rank':
        source = 'rank'
    elif name == 'cluster_id':
        source = 'group_size' if settings.group_regressor == 'size' else 'group'
    else:
        source = name
    if source not in frame.columns:
        if source != name:
            raise DraftivError("Term '{}' needs column '{}'; cluster the panel first".format(name, source))
        raise DraftivError("Unknown column '{}'".format(name))
    if name == ENDOG_BENEFIT:
        return benefit_column(frame[source].to_numpy(), params)
    col = frame[source]
    if col.dtype == bool:
        return col.to_numpy().astype(float)
    values = pd.to_numeric(col, errors='coerce')
    if values.isna().all() and col.notna().any():
        raise DraftivError("Column '{}' is not numeric".format(name))
    return values.to_numpy().astype(float)


def term_values(frame: pd.DataFrame, term: Term, params: Optional[GameParams] = None) -> np.ndarray:
    out = resolve_column(frame, term.factors[0], params)
    for f in term.factors[1:]:
        out = out * resolve_column(frame, f, params)
    return out


def factor_column(frame: pd.DataFrame, name: str) -> pd.Series:
    """The categorical column behind an absorbed or cluster factor name."""
    if name == 'athlete':
        return frame['athlete_id'].astype(str)
    if name == 'event':
        return frame['event_id'].astype(str)
    if name == 'group':
        if settings.group_key == 'event_group':
            return frame['event_id'].astype(str) + '/' + frame['group'].astype(str)
        return frame['group']
    if name in frame.columns:
        return frame[name]
    raise DraftivError("Unknown factor '{}'".format(name))


def _game_params(spec: FormulaSpec, params: Optional[GameParams]) -> GameParams:
    base = params or GameParams.default()
    if 'gamma' in spec.options or 'lambda' in spec.options:
        return GameParams(gamma=spec.options.get('gamma', base.gamma), lam=spec.options.get('lambda', base.lam),
                          alpha=base.alpha, cost_c=base.cost_c, mu=base.mu, effort_e=base.effort_e)
    return base


def _sample_filters(panel: pd.DataFrame, frame: pd.DataFrame, spec: FormulaSpec, audit: Audit) -> pd.DataFrame:
    f = spec.filters
    if f.group_size or f.position_cap is not None:
        frame, sub = group_filters(frame, list(f.group_size) or None, f.position_cap)
        audit.merge(sub)
    if f.all_periods:
        seen = panel.groupby('athlete_id')['period'].nunique()
        complete = set(seen[seen == len(Period.ALL)].index)
        keep = frame['athlete_id'].isin(complete)
        audit.drop('not_all_periods', int((~keep).sum()))
        frame = frame[keep]
    if f.period is not None:
        keep = frame['period'] == f.period
        audit.drop('period', int((~keep).sum()))
        frame = frame[keep]
    if f.bands is not None:
        treat = band_column(frame['position'].to_numpy(), f.bands)
        keep = ~np.isnan(treat)
        audit.drop('band_excluded', int((~keep).sum()))
        frame = frame.assign(treat=treat)[keep]
    return frame


def build_design(panel: pd.DataFrame, formula: Union[str, FormulaSpec],
                 params: Optional[GameParams] = None) -> DesignMatrices:
    """Applies the filters of ``formula`` and assembles the design.

    Without absorbed factors an intercept column is added to the regressors.

    Raises:
        EmptySampleError: no rows are left after the filters.
        CollinearityError: two regressors, or a regressor and an instrument,
            are identical.
    """
    spec = parse_formula(formula) if isinstance(formula, str) else formula
    params = _game_params(spec, params)
    audit = Audit(len(panel))

    y, out_audit = build_outcome(panel, spec.outcome)
    audit.merge(out_audit)
    frame = panel.loc[y.index].assign(y=y.to_numpy())
    frame = _sample_filters(panel, frame, spec, audit)

    exog = {t.name: term_values(frame, t, params) for t in spec.exog}
    endog = resolve_column(frame, spec.endog, params) if spec.endog else None
    instruments = {z: resolve_column(frame, z, params) for z in spec.instruments}

    rows = len(frame)
    missing_z = np.zeros(rows, dtype=bool)
    for v in instruments.values():
        missing_z |= np.isnan(v)
    audit.drop('missing_instrument', int(missing_z.sum()))
    missing_x = ~missing_z & (np.isnan(endog) if endog is not None else np.zeros(rows, dtype=bool))
    for v in exog.values():
        missing_x |= ~missing_z & np.isnan(v)
    audit.drop('missing_regressor', int(missing_x.sum()))
    keep = ~(missing_z | missing_x)
    frame = frame[keep]
    audit.finish(len(frame))
    if len(frame) == 0:
        raise EmptySampleError("No rows left after filtering ({})".format(audit))

    exog_names = list(exog)
    X = np.column_stack([exog[k][keep] for k in exog_names]) if exog_names else np.zeros((len(frame), 0))
    if not spec.absorb:
        X = np.column_stack([np.ones(len(frame)), X])
        exog_names = [INTERCEPT] + exog_names
    endog_arr = endog[keep] if endog is not None else None
    instrument_names = list(instruments)
    Z = (np.column_stack([instruments[k][keep] for k in instrument_names])
         if instrument_names else np.zeros((len(frame), 0)))

    # endogenous vs instrument is allowed: that is the identity-instrument case
    k = len(exog_names)
    names = exog_names + instrument_names + ([spec.endog] if spec.endog else [])
    stacked = np.column_stack([X, Z] + ([endog_arr] if endog_arr is not None else []))
    pairs = [(i, j) for i in range(k) for j in range(i+1, stacked.shape[1])]
    dups = duplicate_columns(stacked, names, pairs)
    if dups:
        cols = sorted(set(c for p in dups for c in p))
        raise CollinearityError("Duplicate columns in design: {}".format(
            ", ".join("{} = {}".format(a, b) for a, b in dups)), cols)

    absorb = [make_factor(factor_column(frame, f), f) for f in spec.absorb]
    clusters = [make_factor(factor_column(frame, f), f) for f in spec.cluster]
    log.info("Design: %d rows, %d regressors, absorbing %s", len(frame), len(exog_names),
             ", ".join(spec.absorb) or "nothing")
    return DesignMatrices(frame['y'].to_numpy(), X, exog_names, endog_arr, spec.endog, Z, instrument_names,
                          absorb, clusters, audit, frame.reset_index(drop=True), spec)
