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

"""A data-generating process for synthetic race panels with a known effect.

Every athlete has a permanent ability and, in every race, a form shock. Athletes
of one event are sorted into swim groups by ability plus noise. Inside a group
the order of the swim exit is driven by ability and form, and the exit times of
a group stay within one clustering threshold while consecutive groups are
further apart, so threshold clustering recovers the simulated groups exactly.

The outcome ln(rank + 1) depends on the treatment (the position, its benefit
transform, or a band indicator) with coefficient ``beta``. The form shock also
enters the outcome with weight ``endogeneity``. While it moves the exit order
as well, the position is endogenous. In band mode the exit order ignores the
form shock unless ``form_in_order`` is set, so keeping the rows of two position
bands does not select on the outcome error. The leave-one-out group mean of
the other members' times depends on the group composition only, so it is a
valid instrument by construction."""

import datetime
import logging
import dataclasses
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit
from tqdm import tqdm
from multiprocessing.pool import Pool

from .utils import settings, Category, Status, DraftivError, InfeasibleError, WeakInstrumentWarning
from .grouping import DraftingGroup, assign_positions, position_records, GROUP_COLUMNS
from .panel.clean import PANEL_COLUMNS, PeriodBoundaries, derive_covariates, sort_panel
from .theory import GameParams, benefit
from .instruments import BandPair, attach_instruments
from .hdfe.design import build_design
from .estimators import tsls, ols

__all__ = ['DgpConfig', 'Truth', 'simulate_panel', 'monte_carlo', 'summarize_monte_carlo',
           'panel_to_tables', 'default_formula', 'TREATMENTS']

log = logging.getLogger(__name__)

TREATMENTS = ('position', 'benefit', 'band')

FIRST_DATE = datetime.date(2015, 1, 1)
LAST_DATE = datetime.date(2024, 12, 31)


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the synthetic race panel.

    The seed fixes every random draw."""
    n_athletes: int = 250
    n_events: int = 40
    participation: float = 0.5
    mean_group_size: float = 4.0
    ability_sd: float = 1.0
    form_sd: float = 1.0
    swim_noise_sd: float = 0.5
    sorting_strength: float = 1.0
    treatment: str = 'position'
    beta: float = -0.05
    beta_leader: float = 0.0
    band_pair: Tuple[Tuple[int, int], Tuple[int, int]] = ((1, 2), (3, 4))
    gamma: float = 1.0
    lam: float = 0.5
    endogeneity: float = 0.8
    form_in_order: Optional[bool] = None
    ability_loading: float = 0.2
    age_effect: float = 0.0
    event_sd: float = 0.2
    noise_sd: float = 0.3
    level: float = 5.0
    threshold: float = 5.0
    between_gap: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_athletes < 1 or self.n_events < 1:
            raise DraftivError("Athlete and event counts must be positive")
        if not 0 < self.participation <= 1:
            raise DraftivError("participation must lie in (0, 1], got {}".format(self.participation))
        if not self.mean_group_size >= 1:
            raise DraftivError("mean_group_size must be at least 1, got {}".format(self.mean_group_size))
        for name in ('ability_sd', 'form_sd', 'swim_noise_sd', 'event_sd', 'noise_sd', 'between_gap'):
            if getattr(self, name) < 0:
                raise DraftivError("{} must be non-negative".format(name))
        if self.treatment not in TREATMENTS:
            raise DraftivError("Unknown treatment '{}', expected one of {}".format(
                self.treatment, ", ".join(TREATMENTS)))
        if not self.threshold > 0:
            raise DraftivError("threshold must be positive")
        if self.form_in_order not in (None, True, False):
            raise DraftivError("form_in_order must be true, false or unset")
        self.bands()

    def bands(self) -> BandPair:
        return BandPair.make(*self.band_pair)

    def form_moves_order(self) -> bool:
        """Whether the form shock enters the exit order. Unset means yes, except
        for the band treatment."""
        if self.form_in_order is None:
            return self.treatment != 'band'
        return self.form_in_order

    def game(self) -> GameParams:
        return GameParams(gamma=self.gamma, lam=self.lam)

    def replace(self, **kwargs) -> 'DgpConfig':
        return dataclasses.replace(self, **kwargs)


@dataclass
class Truth:
    """What the simulation put in: the effect and the true groups."""
    treatment: str
    beta: float
    beta_leader: float
    endogeneity: float
    form_in_order: bool
    band_pair: str
    seed: int
    n_obs: int
    n_groups: int
    groups: pd.DataFrame = field(repr=False)

    def to_record(self) -> Dict[str, Any]:
        return {'treatment': self.treatment, 'beta': self.beta, 'beta_leader': self.beta_leader,
                'endogeneity': self.endogeneity, 'form_in_order': self.form_in_order,
                'band_pair': self.band_pair, 'seed': self.seed,
                'n_obs': self.n_obs, 'n_groups': self.n_groups}


def _group_sizes(rng: np.random.Generator, m: int, mean_size: float) -> List[int]:
    sizes: List[int] = []
    while sum(sizes) < m:
        sizes.append(int(rng.geometric(1.0 / mean_size)))
    sizes[-1] -= sum(sizes) - m
    return sizes


def _treatment(dgp: DgpConfig, positions: np.ndarray) -> np.ndarray:
    if dgp.treatment == 'position':
        return positions.astype(float)
    if dgp.treatment == 'benefit':
        return np.asarray(benefit(positions.astype(float), dgp.game()), dtype=float)
    pair = dgp.bands()
    return ((positions >= pair.treated.low) & (positions <= pair.treated.high)).astype(float)


def simulate_panel(dgp: DgpConfig) -> Tuple[pd.DataFrame, Truth]:
    """Draws one synthetic panel.

    Returns:
        The panel with the columns of a cleaned, covariate-enriched and grouped
        real panel, and the :class:`Truth` it was drawn from.

    Raises:
        InfeasibleError: every simulated group is a singleton, so the
            leave-one-out instrument is undefined everywhere.
    """
    rng = np.random.default_rng(np.random.SeedSequence(dgp.seed))
    A, E = dgp.n_athletes, dgp.n_events
    athlete_ids = np.array(["A{:05d}".format(i+1) for i in range(A)])
    ability = rng.normal(0.0, dgp.ability_sd, A)
    male = rng.random(A) < 0.7
    birth_year = rng.integers(1960, 2001, A)

    span = (LAST_DATE - FIRST_DATE).days
    offsets = np.sort(rng.integers(0, span+1, E))
    dates = [FIRST_DATE + datetime.timedelta(days=int(d)) for d in offsets]
    categories = rng.choice(np.array(Category.ALL), E)
    event_effect = rng.normal(0.0, dgp.event_sd, E)
    event_base = rng.normal(1200.0, 60.0, E)
    spread = 0.9 * dgp.threshold
    form_loading = 1.0 if dgp.form_moves_order() else 0.0

    rows = []
    group_rows = []
    n_groups = 0
    for e in range(E):
        event_id = "E{:04d}".format(e+1)
        members = np.flatnonzero(rng.random(A) < dgp.participation)
        m = len(members)
        if m == 0:
            continue
        score = dgp.sorting_strength * ability[members] + rng.standard_normal(m)
        order = members[np.argsort(-score, kind='stable')]
        form = rng.normal(0.0, dgp.form_sd, m)
        noise = rng.normal(0.0, dgp.swim_noise_sd, m)
        sizes = _group_sizes(rng, m, dgp.mean_group_size)
        gaps = dgp.threshold + 1.0 + rng.exponential(dgp.between_gap, len(sizes)) if dgp.between_gap > 0 \
            else np.full(len(sizes), dgp.threshold + 1.0)
        starts = np.concatenate([[0.0], np.cumsum(spread + gaps[:-1])])
        # each exit offset depends on the athlete's own draws only
        exit_offset = spread * expit(-(ability[order] + form_loading*form) + noise)
        swim = event_base[e] + np.repeat(starts, sizes) + exit_offset
        lo = 0
        for k, size in enumerate(sizes):
            idx = np.arange(lo, lo+size)
            lo += size
            g = DraftingGroup(event_id, k+1, tuple(sorted(((athlete_ids[order[i]], float(swim[i])) for i in idx),
                                                          key=lambda t: (t[1], t[0]))))
            for r in position_records(assign_positions(g)):
                group_rows.append((event_id,) + tuple(r))
            n_groups += 1
        year = dates[e].year
        for i in range(m):
            a = order[i]
            rows.append((athlete_ids[a], event_id, dates[e], categories[e], year, float(swim[i]),
                         float(form[i]), Status.FINISHED, bool(male[a]), int(birth_year[a]),
                         float(ability[a]), event_effect[e]))

    panel = pd.DataFrame(rows, columns=['athlete_id', 'event_id', 'date', 'category', 'event_year', 'swim_out_s',
                                        'form', 'status', 'male', 'birth_year', 'ability', 'event_effect'])
    groups = pd.DataFrame(group_rows, columns=['event_id', 'athlete_id'] + GROUP_COLUMNS)
    if len(groups) == 0 or groups['group_size'].max() <= 1:
        raise InfeasibleError("Every simulated group is a singleton; the leave-one-out instrument is undefined")
    panel = panel.merge(groups, on=['event_id', 'athlete_id'], how='left', validate='one_to_one')
    panel = sort_panel(panel)

    n = len(panel)
    age = (panel['event_year'] - panel['birth_year']).to_numpy()
    treat = _treatment(dgp, panel['position'].to_numpy())
    latent = (dgp.level + dgp.beta*treat + dgp.beta_leader*panel['leader'].to_numpy()
              + dgp.age_effect*(age - 40) - dgp.ability_loading*panel['ability'].to_numpy()
              - dgp.endogeneity*panel['form'].to_numpy() + panel['event_effect'].to_numpy()
              + rng.normal(0.0, dgp.noise_sd, n))
    panel['rank'] = np.maximum(0.0, np.rint(np.expm1(latent)))
    panel['total_s'] = panel['swim_out_s'] + 3000.0 + 60.0*latent + rng.normal(0.0, 60.0, n)
    panel = panel.drop(columns=['form', 'ability', 'event_effect'])
    base = panel[PANEL_COLUMNS]
    extra = panel[GROUP_COLUMNS]
    panel, _ = derive_covariates(pd.concat([base, extra], axis=1), PeriodBoundaries.make())

    truth = Truth(dgp.treatment, dgp.beta, dgp.beta_leader, dgp.endogeneity, dgp.form_moves_order(),
                  dgp.bands().label, dgp.seed, len(panel), n_groups,
                  groups[['event_id', 'group', 'athlete_id', 'position']].copy())
    log.info("Simulated %d rows in %d groups (seed %d)", len(panel), n_groups, dgp.seed)
    return panel, truth


def default_formula(dgp: DgpConfig) -> str:
    """The estimating equation that matches the simulated treatment."""
    base = 'log_rank ~ | fe: athlete event | cluster: event'
    if dgp.treatment == 'position':
        return base + ' | iv: D ~ Z'
    if dgp.treatment == 'benefit':
        return base + ' | iv: B(D) ~ Z | opt: gamma={:g} lambda={:g}'.format(dgp.gamma, dgp.lam)
    pair = dgp.bands()
    return base + ' | iv: treat ~ Z | filter: bands={}:{}'.format(pair.control, pair.treated)


def _replicate(task: Tuple[DgpConfig, str]) -> Dict[str, float]:
    dgp, formula = task
    panel, truth = simulate_panel(dgp)
    panel = attach_instruments(panel)
    design = build_design(panel, formula)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', WeakInstrumentWarning)
        iv = tsls(design)
    naive = ols(design, include_endog=True)
    name = design.endog_name or ''
    i, j = iv.index(name), naive.index(name)
    ci = iv.conf_int()[i]
    return {'seed': dgp.seed, 'n_obs': iv.n_obs, 'beta': truth.beta,
            'iv_estimate': iv.coef[i], 'iv_se': iv.se[i], 'iv_ci_low': ci[0], 'iv_ci_high': ci[1],
            'covered': float(ci[0] <= truth.beta <= ci[1]),
            'ols_estimate': naive.coef[j], 'ols_se': naive.se[j],
            'first_stage_F': iv.first_stage_F, 'first_stage_p': iv.first_stage_p,
            'wu_hausman': iv.wu_hausman, 'wu_hausman_p': iv.wu_hausman_p}


def monte_carlo(dgp: DgpConfig, replications: int, formula: Optional[str] = None,
                threads: Optional[int] = None, quiet: bool = True) -> pd.DataFrame:
    """Simulates and estimates ``replications`` independent panels.

    Replication seeds are spawned from ``dgp.seed``, so the result only
    depends on the configuration, not on the number of threads.

    Returns:
        One row per replication with the 2SLS and OLS estimates, the CI, the
        first-stage F and the Wu-Hausman test.
    """
    if replications < 1:
        raise DraftivError("Need at least one replication")
    formula = formula or default_formula(dgp)
    children = np.random.SeedSequence(dgp.seed).spawn(replications)
    tasks = [(dgp.replace(seed=int(c.generate_state(1)[0])), formula) for c in children]
    threads = settings.threads if threads is None else threads
    if threads > 1:
        with Pool(threads) as pool:
            rows = list(tqdm(pool.imap(_replicate, tasks), total=len(tasks), desc="replications", disable=quiet))
    else:
        rows = [_replicate(t) for t in tqdm(tasks, desc="replications", disable=quiet)]
    return pd.DataFrame(rows)


def summarize_monte_carlo(runs: pd.DataFrame, alpha: float = 0.05) -> Dict[str, float]:
    """Bias, spread, coverage and test rejection rates over replications."""
    beta = float(runs['beta'].iloc[0])
    return {
        'replications': int(len(runs)),
        'beta': beta,
        'iv_mean': float(runs['iv_estimate'].mean()),
        'iv_bias': float(runs['iv_estimate'].mean() - beta),
        'iv_sd': float(runs['iv_estimate'].std(ddof=1)) if len(runs) > 1 else float('nan'),
        'iv_mean_se': float(runs['iv_se'].mean()),
        'coverage': float(runs['covered'].mean()),
        'ols_mean': float(runs['ols_estimate'].mean()),
        'ols_bias': float(runs['ols_estimate'].mean() - beta),
        'ols_mean_se': float(runs['ols_se'].mean()),
        'wu_hausman_rejection': float((runs['wu_hausman_p'] < alpha).mean()),
        'first_stage_F_min': float(runs['first_stage_F'].min()),
        'first_stage_F_median': float(runs['first_stage_F'].median()),
        'first_stage_F_mean': float(runs['first_stage_F'].mean()),
    }


def panel_to_tables(panel: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Splits a panel back into the athletes, events and results input tables,
    with the text encodings the loader expects."""
    athletes = (panel[['athlete_id', 'male', 'birth_year']].drop_duplicates('athlete_id')
                .sort_values('athlete_id', kind='mergesort'))
    athletes = pd.DataFrame({'athlete_id': athletes['athlete_id'],
                             'gender': np.where(athletes['male'], 'm', 'f'),
                             'birth_year': athletes['birth_year'].astype(np.int64)})
    events = (panel[['event_id', 'date', 'category']].drop_duplicates('event_id')
              .sort_values('event_id', kind='mergesort'))
    events = pd.DataFrame({'event_id': events['event_id'],
                           'date': pd.to_datetime(events['date']).dt.strftime('%Y-%m-%d'),
                           'category': events['category']})
    results = panel[['athlete_id', 'event_id', 'swim_out_s', 'total_s', 'rank', 'status']].copy()
    results['rank'] = results['rank'].astype(np.int64)
    return {'athletes': athletes.reset_index(drop=True), 'events': events.reset_index(drop=True),
            'results': results.reset_index(drop=True)}
