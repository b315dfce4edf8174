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

"""Run configuration files.

A run is described by a single JSON document::

    {
      "inputs": {"athletes": "athletes.csv", "events": "events.csv", "results": "results.csv"},
      "output": "out",
      "cluster": {"threshold": 5, "linkage": "single"},
      "instrument": {"kind": "loo"},
      "specifications": [
        {"name": "iv_small", "formula": "log_rank ~ leader | fe: athlete event | iv: D ~ Z | cluster: event",
         "se": "cluster:event"}
      ],
      "tables": [{"name": "main", "specifications": ["iv_small"], "stars": "three_ten"}],
      "bandwagon": {"ladder": "1-2:3-4,2-3:4-5"},
      "simulations": [{"name": "endogenous", "replications": 50, "dgp": {"endogeneity": 0.3}}]
    }

Instead of three files, ``inputs`` may hold ``{"simulate": {...}}`` with the
fields of a :class:`~draftiv.simulate.DgpConfig`; the run then draws a panel
and writes it out as input tables first.

Relative paths are resolved against the directory of the config file. The
environment variables ``DRAFTIV_ATHLETES``, ``DRAFTIV_EVENTS``,
``DRAFTIV_RESULTS`` and ``DRAFTIV_OUT`` override the paths and nothing else."""

import os
import json
import hashlib
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .utils import settings, ConfigError, DraftivError, Linkage, parse_date
from .panel.clean import PANEL_COLUMNS, PeriodBoundaries
from .grouping import GROUP_COLUMNS
from .hdfe.formula import FormulaSpec, OutcomeSpec, parse_formula, FE_FACTORS
from .hdfe.design import DERIVED_TERMS
from .instruments import BandPair, parse_band_ladder
from .estimators import CovSpec
from .report import TableLayout, STAR_CONVENTIONS
from .simulate import DgpConfig
from .bandwagon import DEFAULT_LADDER

__all__ = ['RunConfig', 'SpecificationConfig', 'TableConfig', 'BandwagonConfig', 'SimulationConfig',
           'load_config', 'parse_config', 'parse_dgp', 'config_hash', 'KNOWN_COLUMNS', 'ENV_OVERRIDES']

ENV_OVERRIDES = {'DRAFTIV_ATHLETES': 'athletes', 'DRAFTIV_EVENTS': 'events', 'DRAFTIV_RESULTS': 'results',
                 'DRAFTIV_OUT': 'output'}

# every name a formula may reference once ingest, clustering and instruments ran
KNOWN_COLUMNS = frozenset(PANEL_COLUMNS + GROUP_COLUMNS + ['age', 'age_sq', 'period', 'pre', 'covid', 'post',
                                                           'Z', 'Z_loo', 'Z_projected', 'benefit']
                          + list(DERIVED_TERMS))

TOP_LEVEL_KEYS = ('inputs', 'output', 'seed', 'delimiter', 'periods', 'cluster', 'instrument', 'settings',
                  'specifications', 'tables', 'bandwagon', 'simulations', 'threads')

SETTING_KEYS = ('group_key', 'group_regressor', 'wu_hausman', 'weak_f_threshold', 'hdfe_tol', 'hdfe_max_iter',
                'ci_level', 'gamma', 'lam')


@dataclass(frozen=True)
class SpecificationConfig:
    name: str
    formula: FormulaSpec
    se: Optional[CovSpec] = None


@dataclass(frozen=True)
class TableConfig:
    name: str
    layout: TableLayout
    fmt: str = 'csv'


@dataclass(frozen=True)
class BandwagonConfig:
    ladder: Tuple[BandPair, ...]
    outcome: OutcomeSpec = OutcomeSpec(mode='centered_log', shift_c=1.0)
    absorb: Tuple[str, ...] = ('group', 'event')
    cluster: Tuple[str, ...] = ('event',)
    alpha: float = 0.05
    significant_only: bool = True


@dataclass(frozen=True)
class SimulationConfig:
    name: str
    dgp: DgpConfig
    replications: int = 100
    formula: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration."""
    athletes: Optional[str]
    events: Optional[str]
    results: Optional[str]
    output: str
    simulate_inputs: Optional[DgpConfig] = None
    seed: int = 0
    delimiter: str = ','
    periods: PeriodBoundaries = field(default_factory=PeriodBoundaries.make)
    threshold: float = 5.0
    linkage: str = 'single'
    instrument: Optional[str] = None
    standardize: bool = False
    settings: Dict[str, Any] = field(default_factory=dict)
    specifications: Tuple[SpecificationConfig, ...] = ()
    tables: Tuple[TableConfig, ...] = ()
    bandwagon: Optional[BandwagonConfig] = None
    simulations: Tuple[SimulationConfig, ...] = ()
    threads: int = 1
    hash: str = ''

    @property
    def needs_instruments(self) -> bool:
        return self.instrument is not None or bool(self.specifications) or self.bandwagon is not None


def config_hash(raw: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON text of a configuration, without its
    output directory and thread count."""
    data = {k: v for k, v in raw.items() if k not in ('output', 'threads')}
    text = json.dumps(data, sort_keys=True, separators=(',', ':'), ensure_ascii=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _require(d: Dict[str, Any], key: str, where: str) -> Any:
    if key not in d:
        raise ConfigError("Missing key '{}' in {}".format(key, where))
    return d[key]


def _check_keys(d: Any, allowed: Tuple[str, ...], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError("'{}' must be an object".format(where))
    for k in d:
        if k not in allowed:
            raise ConfigError("Unknown key '{}' in {}".format(k, where))


def _resolve(path: str, base: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def parse_dgp(d: Dict[str, Any], where: str = 'dgp') -> DgpConfig:
    """A :class:`~draftiv.simulate.DgpConfig` from a JSON object. ``band_pair``
    may be given as text (``"1-2:3-4"``) or as nested lists."""
    names = [f.name for f in dataclasses.fields(DgpConfig)]
    _check_keys(d, tuple(names), where)
    kw = dict(d)
    if 'band_pair' in kw:
        try:
            pair = parse_band_ladder(kw['band_pair'])[0] if isinstance(kw['band_pair'], str) else None
        except DraftivError as e:
            raise ConfigError("{}: {}".format(where, e))
        if pair is not None:
            kw['band_pair'] = ((pair.control.low, pair.control.high), (pair.treated.low, pair.treated.high))
        else:
            kw['band_pair'] = tuple(tuple(b) for b in kw['band_pair'])
    try:
        return DgpConfig(**kw)
    except (DraftivError, TypeError) as e:
        raise ConfigError("{}: {}".format(where, e))


def _check_columns(spec: FormulaSpec, name: str) -> None:
    for c in spec.columns():
        if c not in KNOWN_COLUMNS:
            raise ConfigError("Specification '{}' references unknown column '{}'".format(name, c))
    for c in spec.cluster:
        if c not in FE_FACTORS and c not in KNOWN_COLUMNS:
            raise ConfigError("Specification '{}' clusters on unknown column '{}'".format(name, c))


def parse_config(raw: Dict[str, Any], base_dir: str = '.', environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """Validates a configuration dictionary. Every check runs before any data is touched.

    Raises:
        ConfigError: naming the offending key, specification or column.
    """
    environ = dict(os.environ) if environ is None else environ
    raw = json.loads(json.dumps(raw))
    _check_keys(raw, TOP_LEVEL_KEYS, 'the configuration')
    inputs = raw.setdefault('inputs', {})
    for var, key in ENV_OVERRIDES.items():
        if environ.get(var):
            if key == 'output':
                raw['output'] = environ[var]
            else:
                inputs[key] = environ[var]
    _check_keys(inputs, ('athletes', 'events', 'results', 'simulate'), 'inputs')

    simulate_inputs = None
    paths: Dict[str, Optional[str]] = {'athletes': None, 'events': None, 'results': None}
    if 'simulate' in inputs:
        simulate_inputs = parse_dgp(inputs['simulate'], 'inputs.simulate')
        if 'seed' not in inputs['simulate']:
            simulate_inputs = simulate_inputs.replace(seed=int(raw.get('seed', 0)))
    else:
        for k in paths:
            paths[k] = _resolve(str(_require(inputs, k, 'inputs')), base_dir)
            if not os.path.exists(paths[k]):  # type: ignore
                raise ConfigError("Input file for '{}' does not exist: {}".format(k, paths[k]))
    output = _resolve(str(raw.get('output', 'out')), base_dir)

    periods_raw = raw.get('periods', {})
    _check_keys(periods_raw, ('covid_start', 'post_start'), 'periods')
    try:
        periods = PeriodBoundaries.make(periods_raw.get('covid_start'), periods_raw.get('post_start'))
    except (DraftivError, ValueError) as e:
        raise ConfigError("periods: {}".format(e))

    cluster = raw.get('cluster', {})
    _check_keys(cluster, ('threshold', 'linkage'), 'cluster')
    threshold = float(cluster.get('threshold', settings.threshold))
    linkage = cluster.get('linkage', settings.linkage)
    if not threshold > 0:
        raise ConfigError("cluster.threshold must be positive")
    if linkage not in Linkage.ALL:
        raise ConfigError("Unknown linkage '{}'".format(linkage))

    instrument, standardize = None, False
    if 'instrument' in raw:
        _check_keys(raw['instrument'], ('kind', 'standardize'), 'instrument')
        instrument = raw['instrument'].get('kind', 'loo')
        standardize = bool(raw['instrument'].get('standardize', False))
        if instrument not in ('loo', 'projected'):
            raise ConfigError("Unknown instrument kind '{}'".format(instrument))

    run_settings = raw.get('settings', {})
    _check_keys(run_settings, SETTING_KEYS, 'settings')
    for k, allowed in (('group_key', ('index', 'event_group')), ('group_regressor', ('index', 'size')),
                       ('wu_hausman', ('control_function', 'wu'))):
        if k in run_settings and run_settings[k] not in allowed:
            raise ConfigError("settings.{} must be one of {}".format(k, ", ".join(allowed)))

    specs: List[SpecificationConfig] = []
    for i, s in enumerate(raw.get('specifications', [])):
        where = 'specifications[{}]'.format(i)
        _check_keys(s, ('name', 'formula', 'se'), where)
        name = str(_require(s, 'name', where))
        if name in [x.name for x in specs]:
            raise ConfigError("Specification name '{}' is used twice".format(name))
        try:
            formula = parse_formula(str(_require(s, 'formula', where)))
        except DraftivError as e:
            raise ConfigError("Specification '{}': {}".format(name, e))
        _check_columns(formula, name)
        try:
            se = CovSpec.parse(s['se']) if 'se' in s else None
        except DraftivError as e:
            raise ConfigError("Specification '{}': {}".format(name, e))
        specs.append(SpecificationConfig(name, formula, se))

    tables: List[TableConfig] = []
    for i, t in enumerate(raw.get('tables', [])):
        where = 'tables[{}]'.format(i)
        _check_keys(t, ('name', 'specifications', 'terms', 'stars', 'digits', 'format', 'labels'), where)
        name = str(_require(t, 'name', where))
        names = tuple(t.get('specifications', [x.name for x in specs]))
        for n in names:
            if n not in [x.name for x in specs]:
                raise ConfigError("Table '{}' references unknown specification '{}'".format(name, n))
        stars = t.get('stars', 'three_ten')
        if stars not in STAR_CONVENTIONS:
            raise ConfigError("Table '{}': unknown star convention '{}'".format(name, stars))
        fmt = t.get('format', 'csv')
        if fmt not in ('csv', 'tsv', 'markdown'):
            raise ConfigError("Table '{}': unknown format '{}'".format(name, fmt))
        terms = tuple(t['terms']) if 'terms' in t else None
        layout = TableLayout(names, terms, stars, int(t.get('digits', 3)), labels=dict(t.get('labels', {})))
        tables.append(TableConfig(name, layout, fmt))

    bandwagon = None
    if 'bandwagon' in raw:
        b = raw['bandwagon']
        _check_keys(b, ('ladder', 'outcome', 'shift_c', 'rank_cap', 'absorb', 'cluster', 'alpha',
                        'significant_only'), 'bandwagon')
        try:
            ladder = tuple(parse_band_ladder(b['ladder'])) if 'ladder' in b else None
            outcome = OutcomeSpec(mode=b.get('outcome', 'centered_log'), shift_c=float(b.get('shift_c', 1.0)),
                                  rank_cap=b.get('rank_cap'))
        except DraftivError as e:
            raise ConfigError("bandwagon: {}".format(e))
        absorb = tuple(b.get('absorb', ('group', 'event')))
        for f in absorb:
            if f not in FE_FACTORS:
                raise ConfigError("bandwagon: unknown fixed effect '{}'".format(f))
        bandwagon = BandwagonConfig(ladder or tuple(DEFAULT_LADDER), outcome, absorb,
                                    tuple(b.get('cluster', ('event',))), float(b.get('alpha', 0.05)),
                                    bool(b.get('significant_only', True)))

    sims: List[SimulationConfig] = []
    for i, s in enumerate(raw.get('simulations', [])):
        where = 'simulations[{}]'.format(i)
        _check_keys(s, ('name', 'dgp', 'replications', 'formula'), where)
        name = str(_require(s, 'name', where))
        if name in [x.name for x in sims]:
            raise ConfigError("Simulation name '{}' is used twice".format(name))
        dgp = parse_dgp(s.get('dgp', {}), where + '.dgp')
        if 'seed' not in s.get('dgp', {}):
            dgp = dgp.replace(seed=int(raw.get('seed', 0)) + i)
        reps = int(s.get('replications', 100))
        if reps < 1:
            raise ConfigError("{}: replications must be positive".format(where))
        formula = s.get('formula')
        if formula is not None:
            try:
                parse_formula(formula)
            except DraftivError as e:
                raise ConfigError("Simulation '{}': {}".format(name, e))
        sims.append(SimulationConfig(name, dgp, reps, formula))

    threads = int(raw.get('threads', 1))
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return RunConfig(paths['athletes'], paths['events'], paths['results'], output, simulate_inputs,
                     int(raw.get('seed', 0)), str(raw.get('delimiter', ',')), periods, threshold, linkage,
                     instrument, standardize, dict(run_settings), tuple(specs), tuple(tables), bandwagon,
                     tuple(sims), threads, config_hash(raw))


def load_config(path: str, environ: Optional[Dict[str, str]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Reads and validates a JSON run configuration. ``overrides`` replaces
    top-level keys, as the ``--seed``, ``--out`` and ``--threads`` flags do."""
    if not os.path.exists(path):
        raise ConfigError("Config file {} does not exist".format(path))
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("Config file {} is not valid JSON: line {}, column {}: {}".format(
                path, e.lineno, e.colno, e.msg))
    if not isinstance(raw, dict):
        raise ConfigError("Config file {} must hold a JSON object".format(path))
    raw.update(overrides or {})
    return parse_config(raw, os.path.dirname(os.path.abspath(path)), environ)
