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

"""Descriptive tables and regression tables.

Regression tables are built from result records (the dictionaries that
:meth:`~draftiv.estimators.RegressionResult.to_record` returns and the
``estimate`` command writes to disk), never from live estimation objects, so
every number in a table can be traced to a record."""

import os
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .utils import Category, Period, ConfigError
from .io import hash_stamp

__all__ = ['summary_stats', 'balance_table', 'period_balance', 'age_distribution', 'StarConvention',
           'STAR_CONVENTIONS', 'TableLayout', 'format_cell', 'format_p', 'regression_table',
           'coefficient_table', 'emit_table', 'render_table', 'DIAGNOSTICS']

SUMMARY_COLUMNS = ['swim_out_s', 'total_s', 'rank', 'birth_year', 'age', 'age_sq', 'group', 'group_size',
                   'position']


def summary_stats(panel: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Min, quartiles, median, mean and max of the numeric columns."""
    if columns is None:
        columns = [c for c in SUMMARY_COLUMNS if c in panel.columns]
    rows = []
    for c in columns:
        v = pd.to_numeric(panel[c], errors='coerce').dropna().astype(float)
        if len(v) == 0:
            rows.append((c, 0) + (float('nan'),)*6)
            continue
        rows.append((c, len(v), v.min(), v.quantile(0.25), v.median(), v.mean(), v.quantile(0.75), v.max()))
    return pd.DataFrame(rows, columns=['variable', 'n', 'min', 'q1', 'median', 'mean', 'q3', 'max'])


def balance_table(panel: pd.DataFrame, value: str = 'swim_out_s') -> pd.DataFrame:
    """Mean, standard deviation and count of ``value`` by category and period.
    Only combinations present in the panel are listed."""
    g = panel.groupby(['category', 'period'])[value]
    out = g.agg(['mean', 'std', 'count']).reset_index()
    out['category'] = pd.Categorical(out['category'], categories=list(Category.ALL), ordered=True)
    out['period'] = pd.Categorical(out['period'], categories=list(Period.ALL), ordered=True)
    out = out.sort_values(['category', 'period']).reset_index(drop=True)
    out['category'] = out['category'].astype(str)
    out['period'] = out['period'].astype(str)
    return out.rename(columns={'std': 'sd', 'count': 'n'})


def period_balance(panel: pd.DataFrame) -> pd.DataFrame:
    """Per period: mean total time, swim time, rank and age, male share and count."""
    rows = []
    for p in Period.ALL:
        sub = panel[panel['period'] == p]
        if len(sub) == 0:
            continue
        rows.append((p, sub['total_s'].mean(), sub['swim_out_s'].mean(), sub['rank'].mean(),
                     sub['age'].mean(), sub['male'].astype(float).mean(), len(sub)))
    return pd.DataFrame(rows, columns=['period', 'total_s', 'swim_out_s', 'rank', 'age', 'male_share', 'n'])


def age_distribution(panel: pd.DataFrame) -> pd.DataFrame:
    """Number of rows per (period, age)."""
    out = panel.groupby(['period', 'age']).size().reset_index(name='n')
    out['order'] = out['period'].map({p: i for i, p in enumerate(Period.ALL)})
    return out.sort_values(['order', 'age']).drop(columns='order').reset_index(drop=True)


@dataclass(frozen=True)
class StarConvention:
    """Significance marks as (threshold, symbol) pairs, strictest first."""
    name: str
    levels: Tuple[Tuple[float, str], ...]

    def stars(self, p: Optional[float]) -> str:
        if p is None or not math.isfinite(p):
            return ''
        for cut, symbol in self.levels:
            if p < cut:
                return symbol
        return ''


STAR_CONVENTIONS = {
    'three_ten': StarConvention('three_ten', ((0.01, '***'), (0.05, '**'), (0.1, '*'))),
    'three_thousandth': StarConvention('three_thousandth', ((0.001, '***'), (0.01, '**'), (0.05, '*'))),
    'r_codes': StarConvention('r_codes', ((0.001, '***'), (0.01, '**'), (0.05, '*'), (0.1, '.'))),
}

DIAGNOSTICS = ['Observations', 'Athletes (FE)', 'Events (FE)', 'Clusters (FE)', 'RMSE', 'Adj. R2',
               'Within R2', 'First Stage F-stat', 'First Stage p-value', 'Wu-Hausman p-value']


@dataclass(frozen=True)
class TableLayout:
    """Which specifications go into the columns and how cells look.

    ``terms`` of None lists every coefficient in order of first appearance;
    ``labels`` renames terms in the first column."""
    specifications: Tuple[str, ...] = ()
    terms: Optional[Tuple[str, ...]] = None
    stars: str = 'three_ten'
    digits: int = 3
    diagnostics: Tuple[str, ...] = tuple(DIAGNOSTICS)
    labels: Dict[str, str] = field(default_factory=dict, compare=False)

    def convention(self) -> StarConvention:
        if self.stars not in STAR_CONVENTIONS:
            raise ConfigError("Unknown star convention '{}', expected one of {}".format(
                self.stars, ", ".join(sorted(STAR_CONVENTIONS))))
        return STAR_CONVENTIONS[self.stars]


def _num(v: Any) -> Optional[float]:
    """Record values may be numbers, None, or 'nan'/'inf' strings."""
    if v is None or v == '':
        return None
    try:
        f = float(v)
    except (TypeError, ValueError):
        return None
    return f


def _fmt(v: Optional[float], digits: int) -> str:
    if v is None or math.isnan(v):
        return ''
    if math.isinf(v):
        return 'Inf' if v > 0 else '-Inf'
    s = "{:.{}f}".format(v, digits)
    return '0' + s[2:] if s.startswith('-0') and float(s) == 0 else s


def format_cell(estimate: Optional[float], se: Optional[float], p: Optional[float], convention: StarConvention,
                digits: int = 3) -> str:
    """``-0.972*** (0.185)``. A missing estimate gives an empty cell."""
    if estimate is None or math.isnan(estimate):
        return ''
    cell = _fmt(estimate, digits) + convention.stars(p)
    if se is not None and math.isfinite(se):
        cell += " ({})".format(_fmt(se, digits))
    return cell


def format_p(p: Optional[float]) -> str:
    if p is None or math.isnan(p):
        return ''
    if p < 2.2e-16:
        return '< 2.2e-16'
    if p < 0.001:
        return "{:.2e}".format(p)
    return "{:.3f}".format(p)


def _record(r: Any) -> Dict[str, Any]:
    return r.to_record() if hasattr(r, 'to_record') else dict(r)


def _diagnostic(rec: Dict[str, Any], name: str, digits: int) -> str:
    fe = rec.get('fe_levels') or {}
    if name == 'Observations':
        return str(int(rec['n_obs'])) if rec.get('n_obs') is not None else ''
    if name == 'Athletes (FE)':
        return str(fe['athlete']) if 'athlete' in fe else ''
    if name == 'Events (FE)':
        return str(fe['event']) if 'event' in fe else ''
    if name == 'Clusters (FE)':
        return str(fe['group']) if 'group' in fe else ''
    if name == 'RMSE':
        return _fmt(_num(rec.get('rmse')), digits)
    if name == 'Adj. R2':
        return _fmt(_num(rec.get('adj_r2')), digits)
    if name == 'Within R2':
        return _fmt(_num(rec.get('within_r2')), digits)
    if name == 'First Stage F-stat':
        return _fmt(_num(rec.get('first_stage_F')), digits)
    if name == 'First Stage p-value':
        return format_p(_num(rec.get('first_stage_p')))
    if name == 'Wu-Hausman p-value':
        return format_p(_num(rec.get('wu_hausman_p')))
    raise ConfigError("Unknown diagnostic row '{}'".format(name))


def regression_table(results: Mapping[str, Any], layout: Optional[TableLayout] = None) -> pd.DataFrame:
    """Specifications as columns, coefficient cells then diagnostics as rows.

    Raises:
        ConfigError: the layout names a specification that is not in ``results``.
    """
    layout = layout or TableLayout()
    convention = layout.convention()
    specs = list(layout.specifications) or list(results)
    unknown = [s for s in specs if s not in results]
    if unknown:
        raise ConfigError("Table layout references unknown specification(s): {}".format(", ".join(unknown)))
    if not specs:
        return pd.DataFrame(columns=['term'])
    records = {s: _record(results[s]) for s in specs}
    if layout.terms is not None:
        terms = list(layout.terms)
    else:
        terms = []
        for s in specs:
            for t in records[s]['coefficients']:
                if t not in terms:
                    terms.append(t)
    rows = []
    for t in terms:
        row = [layout.labels.get(t, t)]
        for s in specs:
            c = records[s]['coefficients'].get(t)
            row.append('' if c is None else format_cell(_num(c['estimate']), _num(c['se']), _num(c['p']),
                                                        convention, layout.digits))
        rows.append(row)
    for d in layout.diagnostics:
        rows.append([d] + [_diagnostic(records[s], d, layout.digits) for s in specs])
    return pd.DataFrame(rows, columns=['term'] + specs)


def coefficient_table(record: Any, stars: str = 'r_codes', digits: int = 4) -> pd.DataFrame:
    """Estimate, Std. Error, t value and Pr(>|t|) of a single specification."""
    rec = _record(record)
    convention = STAR_CONVENTIONS[stars]
    rows = []
    for t, c in rec['coefficients'].items():
        p = _num(c['p'])
        rows.append((t, _fmt(_num(c['estimate']), digits), _fmt(_num(c['se']), digits), _fmt(_num(c['t']), digits),
                     format_p(p), convention.stars(p)))
    return pd.DataFrame(rows, columns=['term', 'Estimate', 'Std. Error', 't value', 'Pr(>|t|)', ''])


def render_table(table: pd.DataFrame, fmt: str = 'csv') -> str:
    """The text of a table as csv, tsv or markdown."""
    if fmt in ('csv', 'tsv'):
        return table.to_csv(index=False, sep=',' if fmt == 'csv' else '\t', lineterminator='\n')
    if fmt == 'markdown':
        cols = [str(c) for c in table.columns]
        lines = ['| ' + ' | '.join(cols) + ' |', '|' + '|'.join(['---']*len(cols)) + '|']
        for row in table.itertuples(index=False):
            lines.append('| ' + ' | '.join('' if pd.isna(v) else str(v) for v in row) + ' |')
        return '\n'.join(lines) + '\n'
    raise ConfigError("Unknown table format '{}', expected csv, tsv or markdown".format(fmt))


def emit_table(results: Mapping[str, Any], path: str, layout: Optional[TableLayout] = None, fmt: str = 'csv',
               config_hash: Optional[str] = None) -> str:
    """Writes :func:`regression_table` to ``path``. No results gives a header-only file."""
    text = render_table(regression_table(results, layout), fmt)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, 'w', newline='') as f:
        if fmt != 'markdown':
            f.write(hash_stamp(config_hash))
        f.write(text)
    return path
