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

from ..utils import DraftivError
from ..io import read_panel, read_record, write_frame
from ..report import (summary_stats, balance_table, period_balance, age_distribution, emit_table,
                      TableLayout, STAR_CONVENTIONS)
from .common import add_common, configure, fail

description="""Descriptive tables of a panel and regression tables of result records

    python -m draftiv report --panel panel.csv -o report
    python -m draftiv report --results results/iv_small.json results/iv_large.json --table table.md --format markdown

With --panel the summary statistics, the category by period balance, the
period balance and the age distribution are written to the output directory.
With --results the records are put side by side in one table; every number
in it is read from a record.
"""

import argparse
parser = argparse.ArgumentParser(prog="draftiv report", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('--panel', type=str, default='', help='panel to describe')
parser.add_argument('--results', type=str, nargs='*', default=[], help='result records written by the estimate command')
parser.add_argument('-o', '--out', type=str, default='report', help='output directory of the descriptive tables')
parser.add_argument('--table', type=str, default='table.csv', help='destination of the regression table')
parser.add_argument('--stars', type=str, default='three_ten', choices=sorted(STAR_CONVENTIONS),
    help='significance convention (default three_ten)')
parser.add_argument('--digits', type=int, default=3, help='decimals in table cells (default 3)')
parser.add_argument('--format', type=str, default='csv', choices=('csv', 'tsv', 'markdown'), dest='fmt',
    help='table format (default csv)')
add_common(parser)

def main(args):
    options = parser.parse_args(args)
    configure(options)
    if not options.panel and not options.results:
        fail("Nothing to report: give --panel and/or --results")
        return
    try:
        if options.panel:
            panel = read_panel(options.panel)
            print("Writing output to {}".format(os.path.abspath(options.out)))
            write_frame(summary_stats(panel), os.path.join(options.out, 'summary_stats.csv'))
            if 'period' in panel.columns:
                write_frame(balance_table(panel), os.path.join(options.out, 'balance.csv'))
                write_frame(period_balance(panel), os.path.join(options.out, 'period_balance.csv'))
                write_frame(age_distribution(panel), os.path.join(options.out, 'age_distribution.csv'))
        if options.results:
            records = {}
            for path in options.results:
                if not os.path.exists(path):
                    fail("File {} does not exist".format(path))
                    return
                rec = read_record(path)
                records[rec.get('name') or os.path.splitext(os.path.basename(path))[0]] = rec
            layout = TableLayout(tuple(records), stars=options.stars, digits=options.digits)
            print("Writing output to {}".format(os.path.abspath(options.table)))
            emit_table(records, options.table, layout, options.fmt)
    except DraftivError as e:
        fail(e)
