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

"""Parser for the regression formula language.

A formula is a sequence of sections separated by ``|``::

    log_rank ~ age + age_sq + pre:drafter | fe: athlete event | iv: D ~ Z
             | cluster: event | filter: groupsize<10, rankcap=250

The first section is the model ``outcome ~ term + term``; a term is a column
name, the structural transform ``B(D)``, or a pairwise interaction ``a:b``.
The other sections are optional and may come in any order:

``fe:``      absorbed factors, any of ``athlete``, ``event``, ``group``
``iv:``      ``endogenous ~ instrument [+ instrument]``
``cluster:`` one or two factors for the covariance
``filter:``  comma separated sample filters (see :data:`FILTER_HELP`)
``opt:``     ``gamma=``, ``lambda=`` and ``shift=`` parameters

Text after ``#`` up to the end of the line is ignored. Errors report the
line and column where parsing failed."""

import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from ..utils import FormulaError, Period, DraftivError
from ..instruments import BandPair, parse_band_pair

__all__ = ['OutcomeSpec', 'Term', 'Filters', 'FormulaSpec', 'parse_formula', 'OUTCOME_MODES',
           'FE_FACTORS', 'ENDOG_POSITION', 'ENDOG_BENEFIT']

OUTCOME_MODES = ('log_rank_plus1', 'centered_log', 'level')
FE_FACTORS = ('athlete', 'event', 'group')
ENDOG_POSITION = 'D'
ENDOG_BENEFIT = 'B(D)'

# outcome names that select a transform of the rank instead of a column
_OUTCOME_ALIASES = {'log_rank': 'log_rank_plus1', 'log_rank_plus1': 'log_rank_plus1',
                    'centered_log_rank': 'centered_log', 'centered_log': 'centered_log'}

FILTER_HELP = """groupsize<10   keep groups whose size satisfies the predicate (<, <=, >, >=, ==, !=)
minsize=3      same as groupsize>=3
rankcap=250    keep rows with rank < 250
poscap=5       replace the position D by min(D, 5)
bands=1-2:3-4  keep positions in either band, treat = 1 in the second band
noleader       drop the leader dummy from the regressors
period=Pre     keep one period (Pre, Covid, Post)
allperiods     keep athletes observed in all three periods"""

_IDENT = r'[A-Za-z_][A-Za-z0-9_]*'
_FACTOR = r'(?:B\(D\)|' + _IDENT + r')'
_SECTION = re.compile(r'\s*(fe|iv|cluster|filter|opt)\s*:')


@dataclass(frozen=True)
class OutcomeSpec:
    """How the dependent variable is built from the panel.

    ``log_rank_plus1`` is ln(rank + 1); ``centered_log`` is
    ln(rank - event mean rank + shift_c); ``level`` takes ``column`` as is."""
    mode: str = 'log_rank_plus1'
    shift_c: float = 1.0
    rank_cap: Optional[int] = None
    column: str = 'rank'

    def __post_init__(self):
        if self.mode not in OUTCOME_MODES:
            raise DraftivError("Unknown outcome mode '{}'".format(self.mode))
        if not self.shift_c > 0:
            raise DraftivError("shift_c must be positive, got {}".format(self.shift_c))
        if self.rank_cap is not None and self.rank_cap < 1:
            raise DraftivError("Rank cap must be at least 1, got {}".format(self.rank_cap))


@dataclass(frozen=True)
class Term:
    factors: Tuple[str, ...]

    @property
    def name(self) -> str:
        return ':'.join(self.factors)

    @property
    def is_interaction(self) -> bool:
        return len(self.factors) > 1

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Filters:
    group_size: Tuple[str, ...] = ()
    position_cap: Optional[int] = None
    bands: Optional[BandPair] = None
    leader: bool = True
    period: Optional[str] = None
    all_periods: bool = False


@dataclass(frozen=True)
class FormulaSpec:
    """A parsed formula. ``endog`` and ``instruments`` are both set or both empty."""
    outcome: OutcomeSpec
    exog: Tuple[Term, ...] = ()
    endog: Optional[str] = None
    instruments: Tuple[str, ...] = ()
    absorb: Tuple[str, ...] = ()
    cluster: Tuple[str, ...] = ()
    filters: Filters = field(default_factory=Filters)
    options: Dict[str, float] = field(default_factory=dict, compare=False)
    text: str = field(default='', compare=False)

    @property
    def is_iv(self) -> bool:
        return self.endog is not None

    def columns(self) -> List[str]:
        """Every name the formula references, in order of appearance."""
        out: List[str] = []
        for t in self.exog:
            out.extend(t.factors)
        if self.endog: out.append(self.endog)
        out.extend(self.instruments)
        if self.outcome.mode == 'level': out.append(self.outcome.column)
        seen = set()
        return [c for c in out if not (c in seen or seen.add(c))]  # type: ignore

    def with_filters(self, **kwargs) -> 'FormulaSpec':
        return replace(self, filters=replace(self.filters, **kwargs))


class _Parser(object):
    def __init__(self, text: str) -> None:
        self.text = text
        # comments are blanked so offsets keep pointing into the original text
        self.clean = re.sub(r'#[^\n]*', lambda m: ' '*len(m.group(0)), text)

    def error(self, message: str, offset: int) -> FormulaError:
        line = self.text.count('\n', 0, offset) + 1
        column = offset - (self.text.rfind('\n', 0, offset) + 1) + 1
        return FormulaError(message, line, column)

    def sections(self) -> List[Tuple[int, str]]:
        out, start = [], 0
        for m in re.finditer(r'\|', self.clean):
            out.append((start, self.clean[start:m.start()]))
            start = m.end()
        out.append((start, self.clean[start:]))
        return out

    @staticmethod
    def _lead(s: str) -> int:
        return len(s) - len(s.lstrip())

    def items(self, offset: int, body: str, sep: Optional[str]) -> List[Tuple[int, str]]:
        """Splits ``body`` at ``sep`` (or whitespace for ``None``) with absolute offsets."""
        out = []
        if sep is None:
            for m in re.finditer(r'\S+', body):
                out.append((offset + m.start(), m.group(0)))
            return out
        pos = 0
        for piece in body.split(sep):
            out.append((offset + pos + self._lead(piece), piece.strip()))
            pos += len(piece) + len(sep)
        return out

    def terms(self, offset: int, body: str) -> List[Term]:
        if not body.strip():
            return []
        out = []
        for off, piece in self.items(offset, body, '+'):
            if not piece:
                raise self.error("empty term", off)
            factors = [f.strip() for f in piece.split(':')]
            if len(factors) > 2:
                raise self.error("only pairwise interactions are supported, got '{}'".format(piece), off)
            for f in factors:
                if not re.fullmatch(_FACTOR, f):
                    raise self.error("invalid term '{}'".format(f or piece), off)
            if len(factors) == 2 and factors[0] == factors[1]:
                raise self.error("interaction of '{}' with itself".format(factors[0]), off)
            out.append(Term(tuple(factors)))
        names = [t.name for t in out]
        for i, n in enumerate(names):
            if n in names[:i]:
                raise self.error("term '{}' appears twice".format(n), offset + self._lead(body))
        return out

    def model(self, offset: int, body: str) -> Tuple[str, List[Term]]:
        if body.count('~') != 1:
            raise self.error("expected 'outcome ~ terms'", offset + self._lead(body))
        lhs, rhs = body.split('~')
        name = lhs.strip()
        if not re.fullmatch(_IDENT, name):
            raise self.error("invalid outcome '{}'".format(name), offset + self._lead(lhs))
        return name, self.terms(offset + len(lhs) + 1, rhs)

    def iv(self, offset: int, body: str) -> Tuple[str, List[str]]:
        if body.count('~') != 1:
            raise self.error("expected 'endogenous ~ instrument'", offset + self._lead(body))
        lhs, rhs = body.split('~')
        endog = lhs.strip()
        if not re.fullmatch(_FACTOR, endog):
            raise self.error("invalid endogenous term '{}'".format(endog), offset + self._lead(lhs))
        instr = self.terms(offset + len(lhs) + 1, rhs)
        if not instr:
            raise self.error("an endogenous term needs at least one instrument", offset + len(lhs) + 1)
        for t in instr:
            if t.is_interaction:
                raise self.error("instruments cannot be interactions", offset + len(lhs) + 1)
        return endog, [t.name for t in instr]

    def names(self, offset: int, body: str, allowed: Optional[Tuple[str, ...]], what: str) -> List[str]:
        out = []
        for off, name in self.items(offset, body, None):
            if not re.fullmatch(_IDENT, name) or (allowed is not None and name not in allowed):
                raise self.error("invalid {} '{}'".format(what, name), off)
            if name in out:
                raise self.error("{} '{}' given twice".format(what, name), off)
            out.append(name)
        return out

    def filters(self, offset: int, body: str, outcome: Dict[str, object]) -> Filters:
        sizes: List[str] = []
        kw: Dict[str, object] = {}
        for off, item in self.items(offset, body, ','):
            if not item:
                raise self.error("empty filter", off)
            m = re.fullmatch(r'groupsize\s*(<=|>=|==|!=|<|>)\s*(\d+)', item)
            if m:
                sizes.append(m.group(1) + m.group(2))
                continue
            m = re.fullmatch(r'(\w+)\s*=\s*(.+)', item)
            key, value = (m.group(1), m.group(2).strip()) if m else (item, None)
            try:
                if key == 'minsize' and value is not None:
                    sizes.append('>=' + str(int(value)))
                elif key == 'rankcap' and value is not None:
                    outcome['rank_cap'] = int(value)
                elif key == 'poscap' and value is not None:
                    kw['position_cap'] = int(value)
                    if kw['position_cap'] < 1: raise ValueError("position cap below 1")  # type: ignore
                elif key == 'bands' and value is not None:
                    kw['bands'] = parse_band_pair(value)
                elif key == 'period' and value is not None:
                    if value not in Period.ALL: raise ValueError("unknown period " + value)
                    kw['period'] = value
                elif key == 'noleader' and value is None:
                    kw['leader'] = False
                elif key == 'allperiods' and value is None:
                    kw['all_periods'] = True
                else:
                    raise self.error("unknown filter '{}'".format(item), off)
            except (ValueError, DraftivError) as e:
                if isinstance(e, FormulaError): raise
                raise self.error("invalid filter '{}': {}".format(item, e), off)
        return Filters(group_size=tuple(sizes), **kw)  # type: ignore

    def options(self, offset: int, body: str) -> Dict[str, float]:
        out = {}
        for off, item in self.items(offset, body, None):
            m = re.fullmatch(r'(gamma|lambda|shift)=([0-9.eE+-]+)', item)
            if not m:
                raise self.error("invalid option '{}'".format(item), off)
            try:
                out[m.group(1)] = float(m.group(2))
            except ValueError:
                raise self.error("invalid number in '{}'".format(item), off)
            if not out[m.group(1)] > 0:
                raise self.error("option '{}' must be positive".format(m.group(1)), off)
        return out

    def parse(self) -> FormulaSpec:
        if not self.clean.strip():
            raise self.error("empty formula", 0)
        sections = self.sections()
        off0, body0 = sections[0]
        if _SECTION.match(body0):
            raise self.error("a formula starts with 'outcome ~ terms'", off0 + self._lead(body0))
        lhs, exog = self.model(off0, body0)
        outcome: Dict[str, object] = {}
        seen = set()
        endog, instruments, absorb, cluster = None, [], [], []
        filters, options = Filters(), {}
        for off, body in sections[1:]:
            m = _SECTION.match(body)
            if not m:
                raise self.error("unknown section, expected one of fe:, iv:, cluster:, filter:, opt:",
                                 off + self._lead(body))
            kind = m.group(1)
            if kind in seen:
                raise self.error("section '{}:' given twice".format(kind), off + m.start(1))
            seen.add(kind)
            rest_off, rest = off + m.end(), body[m.end():]
            if kind == 'fe':
                absorb = self.names(rest_off, rest, FE_FACTORS, 'fixed effect')
                if not absorb:
                    raise self.error("'fe:' needs at least one factor", rest_off)
            elif kind == 'iv':
                endog, instruments = self.iv(rest_off, rest)
            elif kind == 'cluster':
                cluster = self.names(rest_off, rest, None, 'cluster factor')
                if not 1 <= len(cluster) <= 2:
                    raise self.error("'cluster:' takes one or two factors", rest_off)
            elif kind == 'filter':
                filters = self.filters(rest_off, rest, outcome)
            else:
                options = self.options(rest_off, rest)

        if lhs in _OUTCOME_ALIASES:
            mode, column = _OUTCOME_ALIASES[lhs], 'rank'
        else:
            mode, column = 'level', lhs
        if 'shift' in options:
            outcome['shift_c'] = options['shift']
        spec_outcome = OutcomeSpec(mode=mode, column=column, **outcome)  # type: ignore
        if not filters.leader:
            exog = [t for t in exog if 'leader' not in t.factors]
        if endog is not None and endog in [t.name for t in exog]:
            raise self.error("'{}' is both exogenous and endogenous".format(endog), off0)
        return FormulaSpec(spec_outcome, tuple(exog), endog, tuple(instruments), tuple(absorb),
                           tuple(cluster), filters, options, self.text)


def parse_formula(text: str) -> FormulaSpec:
    """Parses a formula. Raises :class:`~draftiv.utils.FormulaError` with the
    line and column of the first problem."""
    return _Parser(text).parse()
