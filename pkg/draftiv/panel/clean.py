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

import datetime
import logging
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..utils import settings, Audit, Status, Period, DraftivError, parse_date
from .tables import RawTables, RejectReport

__all__ = ['PANEL_COLUMNS', 'PeriodBoundaries', 'merge_and_clean', 'derive_covariates',
           'build_panel', 'sort_panel']

log = logging.getLogger(__name__)

# Columns of the canonical panel straight after cleaning. Covariates, groups and
# instruments are appended by later stages.
PANEL_COLUMNS = ['athlete_id', 'event_id', 'date', 'category', 'event_year', 'swim_out_s',
                 'total_s', 'rank', 'status', 'male', 'birth_year']

REQUIRED_NUMERIC = ['swim_out_s', 'total_s', 'rank']


class PeriodBoundaries(NamedTuple):
    """Two cut dates: events before ``covid_start`` are Pre, events on or after
    ``post_start`` are Post, everything in between is Covid."""
    covid_start: datetime.date
    post_start: datetime.date

    @staticmethod
    def make(covid_start: Union[str, datetime.date, None]=None,
             post_start: Union[str, datetime.date, None]=None) -> 'PeriodBoundaries':
        c = parse_date(covid_start) if covid_start is not None else settings.covid_start
        p = parse_date(post_start) if post_start is not None else settings.post_start
        if not c < p:
            raise DraftivError("Covid start {} must be earlier than post start {}".format(c, p))
        return PeriodBoundaries(c, p)

    def period(self, dates: pd.Series) -> pd.Series:
        d = pd.to_datetime(dates)
        out = np.where(d < pd.Timestamp(self.covid_start), Period.PRE,
              np.where(d < pd.Timestamp(self.post_start), Period.COVID, Period.POST))
        return pd.Series(out, index=dates.index, dtype=object)


def sort_panel(panel: pd.DataFrame) -> pd.DataFrame:
    """Canonical row order: (event_id, athlete_id)."""
    return panel.sort_values(['event_id', 'athlete_id'], kind='mergesort').reset_index(drop=True)


def _merge(tables: RawTables) -> Tuple[pd.DataFrame, int]:
    results = tables.results
    athletes = tables.athletes.set_index('athlete_id')
    events = tables.events.set_index('event_id')
    known_a = results['athlete_id'].isin(athletes.index)
    known_e = results['event_id'].isin(events.index)
    unresolved = results[~(known_a & known_e)]
    for _, row in unresolved.iterrows():
        which = []
        if row['athlete_id'] not in athletes.index: which.append('athlete_id')
        if row['event_id'] not in events.index: which.append('event_id')
        tables.rejects.add('results', -1, "{}/{}".format(row['athlete_id'], row['event_id']),
                           "unresolved foreign key " + ",".join(which))
    merged = results[known_a & known_e]
    merged = merged.join(athletes, on='athlete_id').join(events, on='event_id')
    merged['event_year'] = pd.to_datetime(merged['date']).dt.year.astype(np.int64)
    return merged[PANEL_COLUMNS].copy(), len(unresolved)


def merge_and_clean(tables: Union[RawTables, pd.DataFrame]) -> Tuple[pd.DataFrame, Audit]:
    """Merges results with athletes and events and keeps complete finishers only.

    Accepts either the raw tables or an already merged panel, so that cleaning
    its own output is a no-op.

    Returns:
        The panel sorted by (event_id, athlete_id), and an :class:`Audit` with
        the categories ``dropped_unresolved``, ``dropped_missing``,
        ``dropped_dnf`` and ``dropped_dns``.
    """
    if isinstance(tables, pd.DataFrame):
        merged = tables.copy()
        audit = Audit(len(merged))
        audit.drop('dropped_unresolved', 0)
    else:
        audit = Audit(len(tables.results))
        merged, unresolved = _merge(tables)
        audit.drop('dropped_unresolved', unresolved)

    status = merged['status']
    dnf = status == Status.DNF
    dns = status == Status.DNS
    incomplete = merged[REQUIRED_NUMERIC].isna().any(axis=1)
    missing = ~dnf & ~dns & ((status == Status.MISSING) | incomplete)
    audit.drop('dropped_missing', int(missing.sum()))
    audit.drop('dropped_dnf', int(dnf.sum()))
    audit.drop('dropped_dns', int(dns.sum()))

    panel = merged[~(dnf | dns | missing)]
    panel = sort_panel(panel)
    audit.finish(len(panel))
    log.info("Cleaning: %r", audit)
    return panel, audit


def derive_covariates(panel: pd.DataFrame, boundaries: Optional[PeriodBoundaries]=None,
                      rejects: Optional[RejectReport]=None) -> Tuple[pd.DataFrame, Audit]:
    """Adds ``age``, ``age_sq``, ``period`` and the dummies ``pre``, ``covid``, ``post``.

    Rows whose event year precedes the birth year are excluded and counted as
    ``invalid_age``."""
    boundaries = boundaries or PeriodBoundaries.make()
    audit = Audit(len(panel))
    out = panel.copy()
    age = out['event_year'].astype(np.int64) - out['birth_year'].astype(np.int64)
    invalid = age < 0
    if rejects is not None:
        for _, row in out[invalid].iterrows():
            rejects.add('results', -1, "{}/{}".format(row['athlete_id'], row['event_id']),
                        "invalid age: event year {} before birth year {}".format(
                            row['event_year'], row['birth_year']))
    audit.drop('invalid_age', int(invalid.sum()))
    out = out[~invalid].copy()
    out['age'] = age[~invalid].astype(np.int64)
    out['age_sq'] = out['age'] ** 2
    out['period'] = boundaries.period(out['date'])
    for name, p in (('pre', Period.PRE), ('covid', Period.COVID), ('post', Period.POST)):
        out[name] = (out['period'] == p).astype(np.int64)
    out = sort_panel(out)
    audit.finish(len(out))
    return out, audit


def build_panel(tables: RawTables, boundaries: Optional[PeriodBoundaries]=None) -> Tuple[pd.DataFrame, Audit]:
    """Runs :func:`merge_and_clean` followed by :func:`derive_covariates` and
    returns one combined audit."""
    panel, audit = merge_and_clean(tables)
    panel, cov_audit = derive_covariates(panel, boundaries, tables.rejects)
    combined = Audit(audit.rows_in)
    combined.merge(audit).merge(cov_audit)
    combined.finish(len(panel))
    return panel, combined
