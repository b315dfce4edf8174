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
import contextlib
from argparse import ArgumentTypeError
from collections import OrderedDict
from typing import Union, Optional, List, Dict, Any, Iterator, Tuple
from typing_extensions import Literal, Final


FloatInt = Union[float,int]


class Period:
    """Pandemic period of an event."""
    Type = Literal["Pre", "Covid", "Post"]
    PRE: Final = "Pre"
    COVID: Final = "Covid"
    POST: Final = "Post"
    ALL: Final = ("Pre", "Covid", "Post")

class Status:
    """Finishing status of a result row."""
    Type = Literal["Finished", "DNF", "DNS", "Missing"]
    FINISHED: Final = "Finished"
    DNF: Final = "DNF"
    DNS: Final = "DNS"
    MISSING: Final = "Missing"
    ALL: Final = ("Finished", "DNF", "DNS", "Missing")

class Category:
    """Race distance category of an event."""
    Type = Literal["Sprint", "Short", "Middle", "Long"]
    SPRINT: Final = "Sprint"
    SHORT: Final = "Short"
    MIDDLE: Final = "Middle"
    LONG: Final = "Long"
    ALL: Final = ("Sprint", "Short", "Middle", "Long")

class Linkage:
    """Agglomeration rule used to infer swim groups."""
    Type = Literal["single", "complete"]
    SINGLE: Final = "single"
    COMPLETE: Final = "complete"
    ALL: Final = ("single", "complete")


class DraftivError(ValueError):
    """Base class of all errors raised by draftiv."""

class IngestError(DraftivError):
    """An input table is missing or does not have the expected header."""

class EmptySampleError(DraftivError):
    """No rows are left for an estimation after filtering."""

class ConvergenceError(DraftivError):
    """The alternating projections did not converge."""
    def __init__(self, message: str, column: Optional[str] = None, iterations: int = 0):
        super().__init__(message)
        self.column = column
        self.iterations = iterations

class CollinearityError(DraftivError):
    """The design matrix does not have full column rank."""
    def __init__(self, message: str, columns: Optional[List[str]] = None):
        super().__init__(message)
        self.columns = columns or []

class FormulaError(DraftivError):
    """A formula could not be parsed. Carries the 1-based line and column."""
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__("line {}, column {}: {}".format(line, column, message))
        self.line = line
        self.column = column

class ConfigError(DraftivError):
    """A run configuration is invalid."""

class InfeasibleError(DraftivError):
    """A simulation configuration cannot produce an identified design."""

class StageError(DraftivError):
    """A pipeline stage failed. Names the stage and the specification."""
    def __init__(self, stage: str, message: str, specification: Optional[str] = None):
        where = stage if specification is None else "{} [{}]".format(stage, specification)
        super().__init__("stage {} failed: {}".format(where, message))
        self.stage = stage
        self.specification = specification

class WeakInstrumentWarning(UserWarning):
    """The first-stage F statistic is below the configured threshold."""


class Audit(object):
    """Ordered row counter used to account for every row a stage removes.

    The first entry is the number of rows that entered the stage, the last one
    the number of rows that left it. Everything in between is a drop category."""

    def __init__(self, rows_in: int = 0, name: str = "input"):
        self.counts: 'OrderedDict[str,int]' = OrderedDict()
        self.counts[name] = int(rows_in)
        self._in_name = name

    @property
    def rows_in(self) -> int:
        return self.counts[self._in_name]

    def drop(self, category: str, n: int) -> None:
        self.counts[category] = self.counts.get(category, 0) + int(n)

    def dropped(self) -> int:
        return sum(v for k,v in self.counts.items() if k not in (self._in_name, 'output'))

    def finish(self, rows_out: int) -> 'Audit':
        self.counts['output'] = int(rows_out)
        return self

    def conserved(self) -> bool:
        return self.counts.get('output', -1) + self.dropped() == self.rows_in

    def merge(self, other: 'Audit', prefix: str = '') -> 'Audit':
        """Add the drop categories of ``other`` to this audit."""
        for k,v in other.counts.items():
            if k in (other._in_name, 'output'): continue
            self.drop(prefix + k, v)
        return self

    def as_dict(self) -> Dict[str,int]:
        return dict(self.counts)

    def __iter__(self) -> Iterator[Tuple[str,int]]:
        return iter(self.counts.items())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Audit): return False
        return self.counts == other.counts

    def __repr__(self) -> str:
        return "Audit({})".format(", ".join("{}={}".format(k,v) for k,v in self.counts.items()))


class Settings(object): # namespace class
    covid_start: datetime.date = datetime.date(2020, 1, 1)
    post_start: datetime.date = datetime.date(2023, 1, 1)
    threshold: float = 5.0
    linkage: Linkage.Type = "single"
    hdfe_tol: float = 1e-10
    hdfe_max_iter: int = 10000
    weak_f_threshold: float = 10.0
    group_key: Literal["index", "event_group"] = "index"
    group_regressor: Literal["index", "size"] = "index"
    wu_hausman: Literal["control_function", "wu"] = "control_function"
    gamma: float = 1.0
    lam: float = 0.5
    ci_level: float = 0.95
    machine_format: str = "%.6g"
    panel_format: str = "%.10g"
    delimiter: str = ","
    threads: int = 1
    quiet: bool = True

    @contextlib.contextmanager
    def override(self, **values: Any) -> Iterator[None]:
        """Temporarily replaces settings, restoring the old values on exit."""
        for k in values:
            if not hasattr(Settings, k):
                raise ConfigError("Unknown setting '{}'".format(k))
        old = {k: getattr(self, k) for k in values}
        try:
            for k,v in values.items(): setattr(self, k, v)
            yield
        finally:
            for k,v in old.items(): setattr(self, k, v)

settings = Settings()


def restricted_float(x):
    x = float(x)
    if x < 0.0 or x > 1.0:
        raise ArgumentTypeError("%r not in range [0.0, 1.0]." % (x,))
    return x

def positive_float(x):
    x = float(x)
    if not x > 0.0:
        raise ArgumentTypeError("%r is not positive." % (x,))
    return x


def parse_date(s: Union[str, datetime.date]) -> datetime.date:
    """Parses an ISO-8601 calendar date, or passes a date through."""
    if isinstance(s, datetime.date): return s
    return datetime.date.fromisoformat(str(s).strip())
