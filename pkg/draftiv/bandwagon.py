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

"""Pooled comparisons of adjacent position bands.

For every pair of bands the sample is restricted to the two arms and the
binary indicator of the deeper band is instrumented by the leave-one-out
group mean, with group and event fixed effects on the event-centered log rank
by default."""

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm
from multiprocessing.pool import Pool

from .utils import settings, DraftivError
from .instruments import BandPair
from .hdfe.formula import OutcomeSpec
from .hdfe.design import build_design
from .estimators import CovSpec, tsls, semi_elasticity

__all__ = ['BandComparison', 'DEFAULT_LADDER', 'run_band_comparisons', 'emit_figure_data',
           'comparisons_table', 'band_formula']

log = logging.getLogger(__name__)

DEFAULT_LADDER = [BandPair.make((k, k+1), (k+2, k+3)) for k in range(1, 8)]

DEFAULT_OUTCOME = OutcomeSpec(mode='centered_log', shift_c=1.0)


@dataclass
class BandComparison:
    """The estimate of one band pair, in log points, with a normal CI."""
    pair: BandPair
    estimate: float = float('nan')
    se: float = float('nan')
    ci_low: float = float('nan')
    ci_high: float = float('nan')
    p_value: float = float('nan')
    percent_change: float = float('nan')
    n_obs: int = 0
    n_control: int = 0
    n_treated: int = 0
    first_stage_F: float = float('nan')
    feasible: bool = True
    note: str = ''

    @property
    def label(self) -> str:
        return self.pair.label

    def to_record(self) -> Dict[str, Any]:
        return {'comparison': self.label, 'estimate': self.estimate, 'se': self.se, 'ci_low': self.ci_low,
                'ci_high': self.ci_high, 'p_value': self.p_value, 'percent_change': self.percent_change,
                'n_obs': self.n_obs, 'n_control': self.n_control, 'n_treated': self.n_treated,
                'first_stage_F': self.first_stage_F, 'feasible': self.feasible, 'note': self.note}


def band_formula(pair: BandPair, outcome: OutcomeSpec = DEFAULT_OUTCOME, absorb: Sequence[str] = ('group', 'event'),
                 cluster: Sequence[str] = ('event',), instrument: str = 'Z') -> str:
    """The formula text of one comparison."""
    lhs = {'log_rank_plus1': 'log_rank', 'centered_log': 'centered_log_rank'}.get(outcome.mode, outcome.column)
    parts = ['{} ~ '.format(lhs), 'iv: treat ~ {}'.format(instrument)]
    if absorb:
        parts.append('fe: ' + ' '.join(absorb))
    if cluster:
        parts.append('cluster: ' + ' '.join(cluster))
    filters = ['bands={}:{}'.format(pair.control, pair.treated)]
    if outcome.rank_cap is not None:
        filters.append('rankcap={}'.format(outcome.rank_cap))
    parts.append('filter: ' + ', '.join(filters))
    if outcome.mode == 'centered_log':
        parts.append('opt: shift={!r}'.format(float(outcome.shift_c)))
    return ' | '.join(parts)


def _compare(task: Tuple[pd.DataFrame, BandPair, str, Optional[CovSpec], float]) -> BandComparison:
    panel, pair, formula, cov, level = task
    out = BandComparison(pair)
    try:
        design = build_design(panel, formula)
        treat = design.frame['treat'].to_numpy()
        out.n_obs = design.n
        out.n_control = int((treat == 0).sum())
        out.n_treated = int((treat == 1).sum())
        if out.n_control == 0 or out.n_treated == 0:
            out.feasible = False
            out.note = "empty {} arm".format('control' if out.n_control == 0 else 'treated')
            return out
        with warnings.catch_warnings(record=True):
            warnings.simplefilter('always')
            result = tsls(design, cov)
    except DraftivError as e:
        out.feasible = False
        out.note = str(e)
        return out
    i = result.index('treat')
    out.estimate = float(result.coef[i])
    out.se = float(result.se[i])
    z = stats.norm.ppf(0.5 + level/2)
    out.ci_low, out.ci_high = out.estimate - z*out.se, out.estimate + z*out.se
    out.p_value = float(2*stats.norm.sf(abs(out.estimate/out.se))) if out.se > 0 else float('nan')
    out.percent_change = semi_elasticity(out.estimate)
    out.first_stage_F = float(result.first_stage_F)
    if result.warnings:
        out.note = "; ".join(result.warnings)
    return out


def run_band_comparisons(panel: pd.DataFrame, pairs: Optional[Sequence[BandPair]] = None,
                         outcome: Optional[OutcomeSpec] = None, absorb: Sequence[str] = ('group', 'event'),
                         cluster: Sequence[str] = ('event',), instrument: str = 'Z', cov: Optional[CovSpec] = None,
                         level: Optional[float] = None, threads: Optional[int] = None,
                         quiet: bool = True) -> List[BandComparison]:
    """Runs the binary-treatment 2SLS of every band pair, in the given order.

    A comparison whose sample or arm is empty, or whose design cannot be
    estimated, is returned with ``feasible=False`` and a note; the others
    still run."""
    if instrument not in panel.columns:
        raise DraftivError("Panel has no instrument column '{}'; attach instruments first".format(instrument))
    pairs = list(DEFAULT_LADDER if pairs is None else pairs)
    outcome = outcome or DEFAULT_OUTCOME
    level = settings.ci_level if level is None else level
    tasks = [(panel, p, band_formula(p, outcome, absorb, cluster, instrument), cov, level) for p in pairs]
    threads = settings.threads if threads is None else threads
    if threads > 1 and len(tasks) > 1:
        with Pool(min(threads, len(tasks))) as pool:
            results = list(tqdm(pool.imap(_compare, tasks), total=len(tasks), desc="bands", disable=quiet))
    else:
        results = [_compare(t) for t in tqdm(tasks, desc="bands", disable=quiet)]
    for r in results:
        if not r.feasible:
            log.warning("Comparison %s infeasible: %s", r.label, r.note)
    return results


def comparisons_table(comparisons: Sequence[BandComparison]) -> pd.DataFrame:
    """One row per comparison, in the layout of the pooled band table."""
    cols = ['comparison', 'estimate', 'se', 'ci_low', 'ci_high', 'p_value', 'percent_change',
            'n_obs', 'n_control', 'n_treated', 'first_stage_F', 'feasible', 'note']
    return pd.DataFrame([c.to_record() for c in comparisons], columns=cols)


def emit_figure_data(comparisons: Sequence[BandComparison], alpha: float = 0.05,
                     significant_only: bool = True) -> pd.DataFrame:
    """Plot-ready rows (label, estimate, ci_low, ci_high, significant).

    With ``significant_only`` only comparisons with p < alpha are kept; an
    alpha of 1 or more keeps every feasible comparison."""
    rows = []
    for c in comparisons:
        if not c.feasible:
            if not significant_only:
                rows.append((c.label, c.estimate, c.ci_low, c.ci_high, False))
            continue
        significant = bool(alpha >= 1 or c.p_value < alpha)
        if significant or not significant_only:
            rows.append((c.label, c.estimate, c.ci_low, c.ci_high, significant))
    return pd.DataFrame(rows, columns=['label', 'estimate', 'ci_low', 'ci_high', 'significant'])
