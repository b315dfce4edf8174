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

"""Inference of drafting groups from swim-out times.

Athletes of one event are grouped by agglomerative clustering of their swim
exit times under a distance threshold. With single linkage, two athletes share
a group iff a chain of gaps no larger than the threshold connects them; in one
dimension this is the same as cutting the sorted times wherever the gap exceeds
the threshold, which is what :func:`cluster_event` does. Complete linkage is
delegated to :mod:`scipy.cluster.hierarchy`.

Inside a group the fastest swimmer is the leader (position 1), the next one the
first drafter (position 2), and so on."""

import re
import math
import logging
import operator
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.cluster import hierarchy

from .utils import settings, Audit, Linkage, DraftivError

__all__ = ['DraftingGroup', 'PositionRecord', 'cluster_event', 'assign_positions', 'position_records',
           'assign_groups', 'group_filters', 'parse_size_predicate', 'GROUP_COLUMNS']

log = logging.getLogger(__name__)

N_DRAFTER_DUMMIES = 5

GROUP_COLUMNS = (['group', 'group_size', 'position', 'leader', 'drafter'] +
                 ['drafter{}'.format(i) for i in range(1, N_DRAFTER_DUMMIES+1)] + ['last_drafter'])


@dataclass(frozen=True)
class DraftingGroup:
    """A swim group of one event.

    ``members`` holds (athlete_id, swim_out_s) pairs sorted by time, ties by
    athlete_id. ``positions`` is empty until :func:`assign_positions` ran."""
    event_id: str
    group_index: int
    members: Tuple[Tuple[str, float], ...]
    positions: Dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.members:
            raise DraftivError("A drafting group needs at least one member")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def leader(self) -> str:
        return self.members[0][0]

    def times(self) -> List[float]:
        return [t for _, t in self.members]

    def athletes(self) -> List[str]:
        return [a for a, _ in self.members]


class PositionRecord(NamedTuple):
    athlete_id: str
    group: int
    group_size: int
    position: int
    leader: int
    drafter: int
    drafter1: int
    drafter2: int
    drafter3: int
    drafter4: int
    drafter5: int
    last_drafter: int


def _sorted_members(times: Sequence[Tuple[str, float]]) -> List[Tuple[str, float]]:
    return sorted(((str(a), float(t)) for a, t in times), key=lambda m: (m[1], m[0]))


def _single_linkage(members: List[Tuple[str, float]], threshold: float) -> List[List[Tuple[str, float]]]:
    groups = [[members[0]]]
    for prev, cur in zip(members, members[1:]):
        if cur[1] - prev[1] <= threshold:
            groups[-1].append(cur)
        else:
            groups.append([cur])
    return groups


def _complete_linkage(members: List[Tuple[str, float]], threshold: float) -> List[List[Tuple[str, float]]]:
    if len(members) == 1:
        return [members]
    obs = np.array([[t] for _, t in members])
    z = hierarchy.linkage(obs, method='complete', metric='euclidean')
    labels = hierarchy.fcluster(z, t=threshold, criterion='distance')
    by_label: Dict[int, List[Tuple[str, float]]] = {}
    for m, label in zip(members, labels):
        by_label.setdefault(int(label), []).append(m)
    # members are already sorted, so each list is too; order groups by their fastest member
    return sorted(by_label.values(), key=lambda g: (g[0][1], g[0][0]))


def cluster_event(times: Sequence[Tuple[str, float]], threshold: Optional[float]=None,
                  linkage: Optional[Linkage.Type]=None, event_id: str='') -> List[DraftingGroup]:
    """Clusters the swim-out times of one event into drafting groups.

    Args:
        times: (athlete_id, seconds) pairs, in any order
        threshold: maximal linking distance in seconds, inclusive (default 5)
        linkage: ``'single'`` (default) or ``'complete'``
        event_id: stored on the returned groups

    Returns:
        Groups numbered 1..K in ascending order of their fastest time.
    """
    threshold = settings.threshold if threshold is None else float(threshold)
    linkage = linkage or settings.linkage
    if not threshold > 0:
        raise DraftivError("Clustering threshold must be positive, got {}".format(threshold))
    if linkage not in Linkage.ALL:
        raise DraftivError("Unknown linkage '{}'".format(linkage))
    if len(times) == 0:
        return []
    members = _sorted_members(times)
    if not all(math.isfinite(t) for _, t in members):
        raise DraftivError("Swim-out times must be finite (event {})".format(event_id))
    if linkage == Linkage.SINGLE:
        parts = _single_linkage(members, threshold)
    else:
        parts = _complete_linkage(members, threshold)
    return [DraftingGroup(event_id, i+1, tuple(p)) for i, p in enumerate(parts)]


def assign_positions(group: DraftingGroup) -> DraftingGroup:
    """Numbers the members 1..n by swim-out time. Position 1 is the leader."""
    positions = {a: i+1 for i, (a, _) in enumerate(group.members)}
    return dataclasses.replace(group, positions=positions)


def position_records(group: DraftingGroup) -> List[PositionRecord]:
    """Leader flag, drafter dummies and last-drafter flag of every member."""
    if not group.positions:
        group = assign_positions(group)
    n = group.size
    out = []
    for a, _ in group.members:
        d = group.positions[a]
        dummies = [int(d == k+1) for k in range(1, N_DRAFTER_DUMMIES+1)]
        out.append(PositionRecord(a, group.group_index, n, d, int(d == 1), int(d > 1),
                                  *dummies, int(n > 1 and d == n)))
    return out


def assign_groups(panel: pd.DataFrame, threshold: Optional[float]=None,
                  linkage: Optional[Linkage.Type]=None) -> pd.DataFrame:
    """Clusters every event of the panel and appends the group columns
    (``group``, ``group_size``, ``position``, ``leader``, ``drafter``,
    ``drafter1``..``drafter5``, ``last_drafter``)."""
    records = []
    for event_id, rows in panel.groupby('event_id', sort=True):
        times = list(zip(rows['athlete_id'], rows['swim_out_s']))
        groups = cluster_event(times, threshold, linkage, event_id=str(event_id))
        for g in groups:
            for r in position_records(assign_positions(g)):
                records.append((event_id,) + tuple(r))
        log.debug("Event %s: %d athletes in %d groups", event_id, len(times), len(groups))
    cols = ['event_id', 'athlete_id'] + GROUP_COLUMNS
    assigned = pd.DataFrame(records, columns=cols)
    out = panel.drop(columns=[c for c in GROUP_COLUMNS if c in panel.columns])
    out = out.merge(assigned, on=['event_id', 'athlete_id'], how='left', validate='one_to_one')
    return out.sort_values(['event_id', 'athlete_id'], kind='mergesort').reset_index(drop=True)


_OPS = {'<': operator.lt, '<=': operator.le, '>': operator.gt, '>=': operator.ge,
        '==': operator.eq, '=': operator.eq, '!=': operator.ne}

def parse_size_predicate(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Turns ``'<10'``, ``'>1'``, ``'>=3'`` ... into a vectorised predicate on group sizes."""
    m = re.fullmatch(r'\s*(<=|>=|==|!=|<|>|=)\s*(\d+)\s*', text)
    if not m:
        raise DraftivError("Invalid group size predicate '{}'".format(text))
    op, value = _OPS[m.group(1)], int(m.group(2))
    return lambda sizes: op(np.asarray(sizes), value)


SizePredicate = Union[str, Callable[[np.ndarray], np.ndarray]]

def group_filters(panel: pd.DataFrame, predicate: Union[SizePredicate, Sequence[SizePredicate], None]=None,
                  cap: Optional[int]=None) -> Tuple[pd.DataFrame, Audit]:
    """Keeps rows whose group size passes every predicate and optionally caps
    positions at ``cap``.

    The leader flag and drafter dummies keep describing the uncapped position."""
    audit = Audit(len(panel))
    out = panel
    if predicate is not None:
        preds = [predicate] if isinstance(predicate, str) or callable(predicate) else list(predicate)
        for p in preds:
            f = parse_size_predicate(p) if isinstance(p, str) else p
            keep = np.asarray(f(out['group_size'].to_numpy()), dtype=bool)
            label = p if isinstance(p, str) else getattr(p, '__name__', 'predicate')
            audit.drop('group_size{}'.format(label.strip()), int((~keep).sum()))
            out = out[keep]
    out = out.copy()
    if cap is not None:
        if cap < 1:
            raise DraftivError("Position cap must be at least 1, got {}".format(cap))
        out['position'] = np.minimum(out['position'].to_numpy(), int(cap))
    audit.finish(len(out))
    return out.reset_index(drop=True), audit
