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

"""Instrument columns for the drafting position.

The leave-one-out instrument of an athlete is the mean swim-out time of the
other members of their group. The projected variant averages an athlete's
leave-one-out values over all their other events. Band treatments recode the
position into a binary low/high arm for pooled comparisons."""

import re
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .utils import DraftivError
from .theory import GameParams, benefit

__all__ = ['InstrumentColumn', 'loo_group_mean', 'loo_column', 'projected_instrument',
           'projected_column', 'Band', 'BandPair', 'parse_band_pair', 'parse_band_ladder',
           'band_treatment', 'band_column', 'benefit_column', 'attach_instruments', 'EXCLUDED']

log = logging.getLogger(__name__)

# marker returned by band_treatment for rows outside both bands
EXCLUDED = -1


class InstrumentColumn(NamedTuple):
    """Per-row instrument values (NaN when undefined) and where they came from."""
    values: np.ndarray
    provenance: str  # 'loo', 'projected' or 'custom'

    def missing(self) -> np.ndarray:
        return np.isnan(self.values)


def loo_group_mean(times: Sequence[float], member: int) -> float:
    """Mean of all other members' swim times. NaN for a singleton."""
    t = np.asarray(times, dtype=float)
    if not 0 <= member < len(t):
        raise DraftivError("Member index {} outside group of size {}".format(member, len(t)))
    if len(t) < 2:
        return float('nan')
    return float((t.sum() - t[member]) / (len(t) - 1))


def _group_keys(panel: pd.DataFrame) -> List[str]:
    if 'group' not in panel.columns:
        raise DraftivError("Panel has no group assignment; run the clustering first")
    return ['event_id', 'group']


def loo_column(panel: pd.DataFrame, column: str = 'swim_out_s', standardize: bool = False) -> InstrumentColumn:
    """Leave-one-out group mean of ``column`` for every row of a grouped panel.

    With ``standardize`` the times are first z-scored within each event, so the
    instrument measures relative swim performance."""
    keys = _group_keys(panel)
    s = panel[column].astype(float)
    if standardize:
        by_event = s.groupby(panel['event_id'])
        sd = by_event.transform('std', ddof=0).replace(0.0, np.nan)
        s = ((s - by_event.transform('mean')) / sd).fillna(0.0)
    grouped = s.groupby([panel[k] for k in keys])
    total = grouped.transform('sum').to_numpy()
    n = grouped.transform('count').to_numpy().astype(float)
    with np.errstate(invalid='ignore', divide='ignore'):
        z = np.where(n > 1, (total - s.to_numpy()) / (n - 1), np.nan)
    return InstrumentColumn(z, 'loo')


def projected_instrument(values: Sequence[float], target: int) -> float:
    """Mean of an athlete's instrument values over every event except ``target``.
    Undefined (NaN) entries do not count; NaN when nothing is left."""
    v = np.asarray(values, dtype=float)
    others = np.delete(v, target)
    others = others[~np.isnan(others)]
    if len(others) == 0:
        return float('nan')
    return float(others.mean())


def projected_column(panel: pd.DataFrame, instrument: np.ndarray) -> InstrumentColumn:
    """:func:`projected_instrument` for every row, by athlete."""
    z = pd.Series(np.asarray(instrument, dtype=float), index=panel.index)
    defined = z.notna().astype(float)
    by = panel['athlete_id']
    total = z.fillna(0.0).groupby(by).transform('sum').to_numpy()
    count = defined.groupby(by).transform('sum').to_numpy()
    own = z.fillna(0.0).to_numpy()
    others = count - defined.to_numpy()
    with np.errstate(invalid='ignore', divide='ignore'):
        out = np.where(others > 0, (total - own) / others, np.nan)
    return InstrumentColumn(out, 'projected')


class Band(NamedTuple):
    low: int
    high: int

    def __contains__(self, d: object) -> bool:
        if isinstance(d, (bool, np.bool_)) or not isinstance(d, (int, float, np.integer, np.floating)):
            return False
        return float(d).is_integer() and self.low <= d <= self.high

    def __str__(self) -> str:
        return "{}-{}".format(self.low, self.high)


class BandPair(NamedTuple):
    """A control band and a treated band of positions."""
    control: Band
    treated: Band

    @staticmethod
    def make(control: Tuple[int,int], treated: Tuple[int,int]) -> 'BandPair':
        c, t = Band(*map(int, control)), Band(*map(int, treated))
        for b in (c, t):
            if b.low < 1 or b.low > b.high:
                raise DraftivError("Invalid position band {}".format(b))
        if not (c.high < t.low or t.high < c.low):
            raise DraftivError("Bands {} and {} overlap".format(c, t))
        return BandPair(c, t)

    @property
    def label(self) -> str:
        return "{} vs {}".format(self.control, self.treated)


_BAND = r'\s*(\d+)\s*-\s*(\d+)\s*'

def parse_band_pair(text: str) -> BandPair:
    """Parses ``'1-2:3-4'`` into a :class:`BandPair`."""
    m = re.fullmatch(_BAND + ':' + _BAND, text)
    if not m:
        raise DraftivError("Invalid band pair '{}', expected e.g. 1-2:3-4".format(text))
    a, b, c, d = (int(x) for x in m.groups())
    return BandPair.make((a, b), (c, d))


def parse_band_ladder(text: str) -> List[BandPair]:
    """Parses a comma separated list of band pairs."""
    return [parse_band_pair(p) for p in text.split(',') if p.strip()]


def band_treatment(d: float, pair: BandPair) -> int:
    """0 in the control band, 1 in the treated band, :data:`EXCLUDED` otherwise.
    Integral floats such as 2.0 count as positions."""
    if d in pair.control: return 0
    if d in pair.treated: return 1
    return EXCLUDED


def band_column(positions: np.ndarray, pair: BandPair) -> np.ndarray:
    """Vectorised :func:`band_treatment`; excluded rows, including missing or
    fractional positions, are NaN."""
    d = np.asarray(positions, dtype=float)
    out = np.full(len(d), np.nan)
    with np.errstate(invalid='ignore'):
        whole = np.floor(d) == d
        out[whole & (d >= pair.control.low) & (d <= pair.control.high)] = 0.0
        out[whole & (d >= pair.treated.low) & (d <= pair.treated.high)] = 1.0
    return out


def benefit_column(positions: np.ndarray, params: Optional[GameParams] = None) -> np.ndarray:
    """The structural transform B(D) of a position column."""
    return np.asarray(benefit(np.asarray(positions, dtype=float), params or GameParams.default()), dtype=float)


def attach_instruments(panel: pd.DataFrame, kind: str = 'loo', standardize: bool = False,
                       params: Optional[GameParams] = None) -> pd.DataFrame:
    """Appends ``Z`` (the instrument of the requested kind), ``Z_provenance``
    (that kind, as text), ``Z_loo`` and ``benefit`` to a grouped panel.

    Args:
        kind: ``'loo'`` or ``'projected'``
        standardize: z-score swim times within event before averaging
        params: game parameters for the benefit transform
    """
    if kind not in ('loo', 'projected'):
        raise DraftivError("Unknown instrument kind '{}'".format(kind))
    out = panel.copy()
    loo = loo_column(out, standardize=standardize)
    out['Z_loo'] = loo.values
    chosen = loo
    if kind == 'projected':
        chosen = projected_column(out, loo.values)
        out['Z_projected'] = chosen.values
    out['Z'] = chosen.values
    out['Z_provenance'] = chosen.provenance
    out['benefit'] = benefit_column(out['position'].to_numpy(), params)
    log.info("Instrument %s: %d of %d rows undefined", kind, int(np.isnan(out['Z']).sum()), len(out))
    return out
