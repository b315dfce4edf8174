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

import os
import warnings

from ..utils import DraftivError
from ..io import read_panel, write_record, write_frame, format_machine
from ..hdfe import build_design, parse_formula, FILTER_HELP
from ..estimators import CovSpec, estimate
from ..report import TableLayout, STAR_CONVENTIONS, emit_table, coefficient_table
from .common import add_common, configure, fail

description="""Estimates one or more specifications on an instrumented panel

    python -m draftiv estimate panel.csv -f iv_small.txt -f iv_large.txt --se cluster:event -o results

A formula file holds one specification, for instance

    log_rank ~ leader + age + age_sq
      | fe: athlete event group
      | iv: D ~ Z
      | cluster: event
      | filter: groupsize<10

Every specification is named after its file. For each one <out>/<name>.json
(the result record) and <out>/<name>_coefficients.csv are written, and
<out>/table.csv puts all specifications side by side.

Filters:
""" + FILTER_HELP

import argparse
parser = argparse.ArgumentParser(prog="draftiv estimate", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('source', type=str, help='panel written by the instrument command')
parser.add_argument('-f', '--formula', type=str, action='append', required=True, dest='formulas',
    help='file holding a formula (may be repeated)')
parser.add_argument('--se', type=str, default=None,
    help='iid, hc1, cluster:<factor> or twoway:<factor>,<factor> (default: the cluster section of the formula)')
parser.add_argument('-o', '--out', type=str, default='results', help='output directory (default results)')
parser.add_argument('--stars', type=str, default='three_ten', choices=sorted(STAR_CONVENTIONS),
    help='significance convention of the table (default three_ten)')
parser.add_argument('--format', type=str, default='csv', choices=('csv', 'tsv', 'markdown'), dest='fmt',
    help='format of the side by side table (default csv)')
add_common(parser)

def main(args):
    options = parser.parse_args(args)
    configure(options)
    specs = []
    try:
        cov = CovSpec.parse(options.se) if options.se else None
        for path in options.formulas:
            if not os.path.exists(path):
                fail("File {} does not exist".format(path))
                return
            with open(path) as f:
                specs.append((os.path.splitext(os.path.basename(path))[0], parse_formula(f.read())))
        panel = read_panel(options.source)
    except DraftivError as e:
        fail(e)
        return
    records = {}
    failed = False
    for name, spec in specs:
        try:
            design = build_design(panel, spec)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                result = estimate(design, cov)
        except DraftivError as e:
            print("Specification {}: {}".format(name, e))
            failed = True
            continue
        record = result.to_record()
        record['name'] = name
        records[name] = format_machine(record)
        for w in result.warnings:
            print("Specification {}: {}".format(name, w))
        if options.verbose: print(result.coef_table())
        write_record(record, os.path.join(options.out, name + '.json'))
        write_frame(coefficient_table(records[name]), os.path.join(options.out, name + '_coefficients.csv'))
    ext = {'csv': 'csv', 'tsv': 'tsv', 'markdown': 'md'}[options.fmt]
    table = os.path.join(options.out, 'table.' + ext)
    emit_table(records, table, TableLayout(tuple(records), stars=options.stars), options.fmt)
    print("Writing output to {}".format(os.path.abspath(options.out)))
    if failed:
        fail("Some specifications could not be estimated")
