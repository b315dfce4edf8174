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

"""Configuration-driven execution of the whole analysis.

:func:`run` executes the stages ingest, cluster, instruments, estimate,
tables, bandwagon, simulate and report in this order and writes every artifact
below the output directory::

    out/
      inputs/            simulated input tables (only with "simulate" inputs)
      panel.csv          cleaned, grouped and instrumented panel
      rejects.csv        rows rejected while loading
      audit.csv          row accounting of every stage and specification
      results/<spec>.json
      tables/<table>.csv and tables/<spec>_coefficients.csv
      bandwagon/bands.csv and bandwagon/figure.csv
      simulations/<name>_runs.csv, <name>_truth.json, summary.csv
      report/summary_stats.csv, balance.csv, period_balance.csv, age_distribution.csv
      manifest.json

CSV artifacts start with a ``# config_hash=...`` line and JSON artifacts carry
a ``config_hash`` key. Nothing time dependent is written, so two runs of the
same configuration on the same inputs give identical trees.

Failures of ingest and clustering stop the run. A failing specification,
table or simulation is recorded and the remaining work still runs. Either way
the run ends with a :class:`~draftiv.utils.StageError` when anything failed."""

import os
import json
import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from .utils import settings, Audit, DraftivError, StageError
from .io import write_frame, write_panel, write_record, format_machine
from .config import RunConfig
from .panel import load_tables, build_panel, PeriodBoundaries
from .grouping import assign_groups
from .theory import GameParams
from .instruments import attach_instruments
from .hdfe import build_design
from .estimators import estimate
from .bandwagon import run_band_comparisons, comparisons_table, emit_figure_data
from .simulate import simulate_panel, monte_carlo, summarize_monte_carlo, panel_to_tables
from .report import summary_stats, balance_table, period_balance, age_distribution, emit_table, coefficient_table

__all__ = ['run', 'RunResult', 'STAGES', 'audit_frame', 'simulated_inputs', 'ingest', 'cluster', 'instrument',
           'estimate_specifications']

log = logging.getLogger(__name__)

STAGES = ('ingest', 'cluster', 'instruments', 'estimate', 'tables', 'bandwagon', 'simulate', 'report')


@dataclass
class RunResult:
    """What a run wrote and what went wrong."""
    output: str
    config_hash: str
    artifacts: List[str] = field(default_factory=list)
    records: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    audits: Dict[str, Audit] = field(default_factory=dict)
    failures: List[StageError] = field(default_factory=list)
    stages: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def path(self, *parts: str) -> str:
        return os.path.join(self.output, *parts)

    def wrote(self, path: str) -> str:
        self.artifacts.append(os.path.relpath(path, self.output))
        return path

    def fail(self, stage: str, error: Exception, specification: Optional[str] = None) -> StageError:
        e = StageError(stage, str(error), specification)
        log.error("%s", e)
        self.failures.append(e)
        return e


def audit_frame(audits: Dict[str, Audit]) -> pd.DataFrame:
    """One row per (stage, category, rows), in insertion order."""
    rows = [(stage, k, v) for stage, a in audits.items() for k, v in a]
    return pd.DataFrame(rows, columns=['stage', 'category', 'rows'])


def _settings(config: RunConfig) -> Dict[str, Any]:
    values = dict(config.settings)
    values.update(covid_start=config.periods.covid_start, post_start=config.periods.post_start,
                  threshold=config.threshold, linkage=config.linkage, delimiter=config.delimiter,
                  threads=config.threads)
    return values


def simulated_inputs(config: RunConfig, directory: str) -> Tuple[str, str, str]:
    """Draws the panel of ``config.simulate_inputs`` and writes it out as the
    three input tables. Returns their paths."""
    assert config.simulate_inputs is not None
    panel, _ = simulate_panel(config.simulate_inputs)
    tables = panel_to_tables(panel)
    paths = []
    for name in ('athletes', 'events', 'results'):
        paths.append(write_frame(tables[name], os.path.join(directory, name + '.csv'),
                                 float_format=settings.panel_format))
    return paths[0], paths[1], paths[2]


def ingest(athletes: str, events: str, results: str, boundaries: Optional[PeriodBoundaries] = None
           ) -> Tuple[pd.DataFrame, Audit, pd.DataFrame]:
    """Loads and cleans the input tables.

    Returns:
        The panel, its audit and the reject report as a frame.
    """
    tables = load_tables(athletes, events, results)
    panel, audit = build_panel(tables, boundaries)
    return panel, audit, tables.rejects.to_frame()


def cluster(panel: pd.DataFrame) -> pd.DataFrame:
    return assign_groups(panel, settings.threshold, settings.linkage)


def instrument(panel: pd.DataFrame, kind: str = 'loo', standardize: bool = False) -> pd.DataFrame:
    return attach_instruments(panel, kind, standardize, GameParams.default())


def estimate_specifications(panel: pd.DataFrame, config: RunConfig, result: RunResult) -> None:
    """Estimates every named specification and writes its record and
    coefficient table."""
    for spec in config.specifications:
        try:
            design = build_design(panel, spec.formula)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                fit = estimate(design, spec.se)
        except DraftivError as e:
            result.fail('estimate', e, spec.name)
            continue
        record = fit.to_record()
        record['name'] = spec.name
        record['config_hash'] = config.hash
        # tables are built from the rounded record, exactly as it is on disk
        record = format_machine(record)
        result.records[spec.name] = record
        result.audits['estimate:' + spec.name] = design.audit
        for w in fit.warnings:
            log.warning("%s: %s", spec.name, w)
        result.wrote(write_record(record, result.path('results', spec.name + '.json')))
        result.wrote(write_frame(coefficient_table(record),
                                 result.path('tables', spec.name + '_coefficients.csv'), config_hash=config.hash))
        log.info("Estimated %s on %d rows", spec.name, fit.n_obs)


def _tables(config: RunConfig, result: RunResult) -> None:
    for table in config.tables:
        missing = [s for s in table.layout.specifications if s not in result.records]
        if missing:
            result.fail('tables', DraftivError("specification(s) {} have no result".format(", ".join(missing))),
                        table.name)
            continue
        ext = {'csv': 'csv', 'tsv': 'tsv', 'markdown': 'md'}[table.fmt]
        path = result.path('tables', "{}.{}".format(table.name, ext))
        result.wrote(emit_table(result.records, path, table.layout, table.fmt, config.hash))


def _bandwagon(panel: pd.DataFrame, config: RunConfig, result: RunResult) -> None:
    b = config.bandwagon
    assert b is not None
    comparisons = run_band_comparisons(panel, b.ladder, b.outcome, b.absorb, b.cluster, threads=config.threads,
                                       quiet=settings.quiet)
    result.wrote(write_frame(comparisons_table(comparisons), result.path('bandwagon', 'bands.csv'),
                             config_hash=config.hash))
    result.wrote(write_frame(emit_figure_data(comparisons, b.alpha, b.significant_only),
                             result.path('bandwagon', 'figure.csv'), config_hash=config.hash))


def _simulations(config: RunConfig, result: RunResult) -> None:
    summaries = []
    for sim in config.simulations:
        try:
            _, truth = simulate_panel(sim.dgp)
            runs = monte_carlo(sim.dgp, sim.replications, sim.formula, config.threads, settings.quiet)
        except DraftivError as e:
            result.fail('simulate', e, sim.name)
            continue
        result.wrote(write_frame(runs, result.path('simulations', sim.name + '_runs.csv'), config_hash=config.hash))
        record = truth.to_record()
        record['config_hash'] = config.hash
        result.wrote(write_record(record, result.path('simulations', sim.name + '_truth.json')))
        summary = summarize_monte_carlo(runs)
        summaries.append(dict(name=sim.name, **summary))
        log.info("Simulation %s: IV bias %.4g, coverage %.3g", sim.name, summary['iv_bias'], summary['coverage'])
    if summaries:
        result.wrote(write_frame(pd.DataFrame(summaries), result.path('simulations', 'summary.csv'),
                                 config_hash=config.hash))


def _report(panel: pd.DataFrame, config: RunConfig, result: RunResult) -> None:
    for name, frame in (('summary_stats', summary_stats(panel)), ('balance', balance_table(panel)),
                        ('period_balance', period_balance(panel)), ('age_distribution', age_distribution(panel))):
        result.wrote(write_frame(frame, result.path('report', name + '.csv'), config_hash=config.hash))


def _sha256(path: str) -> str:
    with open(path, 'rb') as f:
        return hashlib.sha256(f.read()).hexdigest()


def _manifest(config: RunConfig, result: RunResult) -> None:
    manifest = {
        'config_hash': config.hash,
        'stages': result.stages,
        'artifacts': {a: _sha256(result.path(a)) for a in sorted(result.artifacts)},
        'failures': [str(f) for f in result.failures],
        'specifications': sorted(result.records),
    }
    path = result.path('manifest.json')
    os.makedirs(result.output, exist_ok=True)
    with open(path, 'w', newline='') as f:
        f.write(json.dumps(manifest, sort_keys=True, indent=2))
        f.write('\n')


def _run(config: RunConfig, result: RunResult) -> None:
    try:
        if config.simulate_inputs is not None:
            athletes, events, results = simulated_inputs(config, result.path('inputs'))
            for p in (athletes, events, results):
                result.wrote(p)
        else:
            assert config.athletes and config.events and config.results
            athletes, events, results = config.athletes, config.events, config.results
        panel, audit, rejects = ingest(athletes, events, results, config.periods)
    except DraftivError as e:
        raise result.fail('ingest', e)
    result.audits['ingest'] = audit
    result.stages.append('ingest')
    result.wrote(write_frame(rejects, result.path('rejects.csv'), config_hash=config.hash))

    try:
        panel = cluster(panel)
    except DraftivError as e:
        raise result.fail('cluster', e)
    result.stages.append('cluster')

    if config.needs_instruments:
        try:
            panel = instrument(panel, config.instrument or 'loo', config.standardize)
        except DraftivError as e:
            raise result.fail('instruments', e)
        result.stages.append('instruments')
    result.wrote(write_panel(panel, result.path('panel.csv'), config.hash))

    if config.specifications:
        estimate_specifications(panel, config, result)
        result.stages.append('estimate')
    if config.tables:
        _tables(config, result)
        result.stages.append('tables')
    if config.bandwagon is not None:
        try:
            _bandwagon(panel, config, result)
        except DraftivError as e:
            result.fail('bandwagon', e)
        result.stages.append('bandwagon')
    if config.simulations:
        _simulations(config, result)
        result.stages.append('simulate')
    _report(panel, config, result)
    result.stages.append('report')


def run(config: RunConfig, quiet: Optional[bool] = None) -> RunResult:
    """Executes every configured stage and writes the output tree.

    Raises:
        StageError: a stage failed. The exception of the first failure is
            raised after the manifest is written; later failures are listed
            in the manifest.
    """
    result = RunResult(config.output, config.hash)
    values = _settings(config)
    if quiet is not None:
        values['quiet'] = quiet
    with settings.override(**values):
        try:
            _run(config, result)
        except StageError:
            pass
        finally:
            result.wrote(write_frame(audit_frame(result.audits), result.path('audit.csv'), config_hash=config.hash))
            _manifest(config, result)
    if result.failures:
        raise result.failures[0]
    return result
