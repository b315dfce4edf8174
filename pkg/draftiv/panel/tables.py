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

"""Loading of the three relational input tables.

The athletes, events and results files are read as text and then typed
column by column. Rows that cannot be typed are never dropped silently: they
end up in a :class:`RejectReport` with the file line and the reason."""

import os
import datetime
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..utils import settings, IngestError, Status, Category

__all__ = ['ATHLETE_COLUMNS', 'EVENT_COLUMNS', 'RESULT_COLUMNS', 'RejectReport',
           'RawTables', 'load_tables', 'read_table']

log = logging.getLogger(__name__)

ATHLETE_COLUMNS = ('athlete_id', 'gender', 'birth_year')
EVENT_COLUMNS = ('event_id', 'date', 'category')
RESULT_COLUMNS = ('athlete_id', 'event_id', 'swim_out_s', 'total_s', 'rank', 'status')

MALE_CODES = {'m': True, 'male': True, '1': True, 'true': True,
              'f': False, 'female': False, '0': False, 'false': False}

MIN_BIRTH_YEAR = 1900


class RejectReport(object):
    """Rows that could not be loaded or merged, with their reasons."""

    COLUMNS = ['table', 'line', 'key', 'reason']

    def __init__(self) -> None:
        self.entries: List[Tuple[str,int,str,str]] = []

    def add(self, table: str, line: int, key: str, reason: str) -> None:
        self.entries.append((table, int(line), key, reason))

    def __len__(self) -> int:
        return len(self.entries)

    def reasons(self, table: Optional[str]=None) -> List[str]:
        return [r for t,_,_,r in self.entries if table is None or t == table]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.entries, columns=self.COLUMNS)
        return df.sort_values(['table', 'line', 'reason'], kind='mergesort').reset_index(drop=True)


class RawTables(NamedTuple):
    """The typed input tables plus everything that was rejected while typing them."""
    athletes: pd.DataFrame
    events: pd.DataFrame
    results: pd.DataFrame
    rejects: RejectReport


def read_table(path: str, columns: Sequence[str], delimiter: Optional[str]=None) -> pd.DataFrame:
    """Reads a delimited file as strings and checks the header against ``columns``.

    The returned frame carries a ``line`` column with the 1-based file line of
    every row (the header is line 1)."""
    if not os.path.exists(path):
        raise IngestError("File {} does not exist".format(path))
    try:
        df = pd.read_csv(path, sep=delimiter or settings.delimiter, dtype=str,
                         keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise IngestError("File {} is empty, expected header {}".format(path, ",".join(columns)))
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise IngestError("Header mismatch in {}: missing column(s) {}; expected {}".format(
            path, ", ".join(missing), ",".join(columns)))
    extra = [c for c in df.columns if c not in columns]
    if extra:
        log.info("Ignoring extra column(s) %s in %s", ", ".join(extra), path)
    df = df[list(columns)].copy()
    for c in columns:
        df[c] = df[c].str.strip()
    df['line'] = np.arange(2, len(df)+2)
    return df


def _reject_duplicates(df: pd.DataFrame, key: List[str], table: str, rejects: RejectReport) -> pd.DataFrame:
    # every copy of a duplicated key goes, so the result does not depend on row order
    dup = df.duplicated(subset=key, keep=False)
    for _, row in df[dup].iterrows():
        rejects.add(table, row['line'], "/".join(row[k] for k in key),
                    "duplicate key {}".format(",".join(key)))
    return df[~dup]


def _type_athletes(df: pd.DataFrame, rejects: RejectReport) -> pd.DataFrame:
    this_year = datetime.date.today().year
    ok = []
    for _, row in df.iterrows():
        aid = row['athlete_id']
        reason = None
        if not aid:
            reason = "empty athlete_id"
        elif row['gender'].lower() not in MALE_CODES:
            reason = "unparseable gender '{}'".format(row['gender'])
        else:
            by = pd.to_numeric(row['birth_year'], errors='coerce')
            if pd.isna(by) or by != int(by):
                reason = "unparseable birth_year '{}'".format(row['birth_year'])
            elif not MIN_BIRTH_YEAR <= by <= this_year:
                reason = "birth_year {} outside [{}, {}]".format(int(by), MIN_BIRTH_YEAR, this_year)
        if reason is not None:
            rejects.add('athletes', row['line'], aid, reason)
        else:
            ok.append(row['line'])
    df = df[df['line'].isin(ok)]
    df = _reject_duplicates(df, ['athlete_id'], 'athletes', rejects)
    return pd.DataFrame({
        'athlete_id': df['athlete_id'].astype(str),
        'male': df['gender'].str.lower().map(MALE_CODES).astype(bool),
        'birth_year': pd.to_numeric(df['birth_year']).astype(np.int64),
    }).reset_index(drop=True)


def _type_events(df: pd.DataFrame, rejects: RejectReport) -> pd.DataFrame:
    dates = pd.to_datetime(df['date'], format='%Y-%m-%d', errors='coerce')
    ok = []
    for (_, row), date in zip(df.iterrows(), dates):
        reason = None
        if not row['event_id']:
            reason = "empty event_id"
        elif pd.isna(date):
            reason = "unparseable date '{}'".format(row['date'])
        elif row['category'] not in Category.ALL:
            reason = "unknown category '{}'".format(row['category'])
        if reason is not None:
            rejects.add('events', row['line'], row['event_id'], reason)
        else:
            ok.append(row['line'])
    keep = df['line'].isin(ok)
    df = df[keep].assign(date=dates[keep])
    df = _reject_duplicates(df, ['event_id'], 'events', rejects)
    return pd.DataFrame({
        'event_id': df['event_id'].astype(str),
        'date': df['date'],
        'category': df['category'].astype(str),
    }).reset_index(drop=True)


def _parse_optional_number(s: str, integer: bool=False) -> Tuple[float, Optional[str]]:
    """Empty fields are missing values, not errors. Returns (value, reason)."""
    if s == '' or s.upper() in ('NA', 'NAN'):
        return np.nan, None
    v = pd.to_numeric(s, errors='coerce')
    if pd.isna(v):
        return np.nan, "not a number"
    if v < 0:
        return np.nan, "negative"
    if integer and v != int(v):
        return np.nan, "not an integer"
    return float(v), None


def _type_results(df: pd.DataFrame, rejects: RejectReport) -> pd.DataFrame:
    rows = []
    for _, row in df.iterrows():
        key = "{}/{}".format(row['athlete_id'], row['event_id'])
        reason = None
        if not row['athlete_id'] or not row['event_id']:
            reason = "empty key"
        elif row['status'] not in Status.ALL:
            reason = "unknown status '{}'".format(row['status'])
        values = []
        if reason is None:
            for c in ('swim_out_s', 'total_s', 'rank'):
                v, why = _parse_optional_number(row[c], integer=(c == 'rank'))
                if why is not None:
                    reason = "unparseable {} '{}': {}".format(c, row[c], why)
                    break
                values.append(v)
        if reason is not None:
            rejects.add('results', row['line'], key, reason)
            continue
        rows.append((row['line'], row['athlete_id'], row['event_id'], values[0], values[1],
                     values[2], row['status']))
    out = pd.DataFrame(rows, columns=['line', 'athlete_id', 'event_id', 'swim_out_s',
                                      'total_s', 'rank', 'status'])
    out = _reject_duplicates(out, ['athlete_id', 'event_id'], 'results', rejects)
    out = out.drop(columns='line').reset_index(drop=True)
    for c in ('swim_out_s', 'total_s', 'rank'):
        out[c] = out[c].astype(float)
    return out


def load_tables(athletes: str, events: str, results: str, delimiter: Optional[str]=None) -> RawTables:
    """Loads the athletes, events and results files.

    Args:
        athletes: path of ``athlete_id,gender,birth_year``
        events: path of ``event_id,date,category`` (ISO-8601 dates)
        results: path of ``athlete_id,event_id,swim_out_s,total_s,rank,status``
        delimiter: field delimiter, defaults to ``settings.delimiter``

    Raises:
        IngestError: a file is missing or its header lacks a required column.
    """
    rejects = RejectReport()
    a = _type_athletes(read_table(athletes, ATHLETE_COLUMNS, delimiter), rejects)
    e = _type_events(read_table(events, EVENT_COLUMNS, delimiter), rejects)
    r = _type_results(read_table(results, RESULT_COLUMNS, delimiter), rejects)
    log.info("Loaded %d athletes, %d events, %d results (%d rejected)", len(a), len(e), len(r), len(rejects))
    return RawTables(a, e, r, rejects)
