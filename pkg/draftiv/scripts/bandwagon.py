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

from ..utils import DraftivError, restricted_float
from ..io import read_panel, write_frame, write_panel
from ..instruments import parse_band_ladder, band_column
from ..hdfe import OutcomeSpec
from ..hdfe.formula import FE_FACTORS
from ..bandwagon import DEFAULT_LADDER, run_band_comparisons, comparisons_table, emit_figure_data
from .common import add_common, configure, fail

description="""Compares adjacent drafting-position bands

    python -m draftiv bandwagon panel.csv --bands 1-2:3-4,2-3:4-5 --out bands.csv --figure figure.csv

For every pair the sample is cut to the two bands and the indicator of the
deeper band is instrumented by the leave-one-out group exit time. Without
--bands the ladder 1-2:3-4 up to 7-8:9-10 is used. With --panel-out the band
indicators are appended to the panel, e.g. as band_1_2_vs_3_4.
"""

import argparse
parser = argparse.ArgumentParser(prog="draftiv bandwagon", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('source', type=str, help='panel written by the instrument command')
parser.add_argument('--bands', type=str, default='', help='comma separated band pairs, e.g. 1-2:3-4,2-3:4-5')
parser.add_argument('-o', '--out', type=str, default='bands.csv', help='destination of the comparison table')
parser.add_argument('--figure', type=str, default='', help='destination of the plot-ready rows')
parser.add_argument('--alpha', type=restricted_float, default=0.05,
    help='significance level for the figure rows (default 0.05)')
parser.add_argument('--all', default=False, action='store_true', dest='keep_all',
    help='keep insignificant comparisons in the figure rows')
parser.add_argument('--outcome', type=str, default='centered_log', choices=('centered_log', 'log_rank_plus1'),
    help='dependent variable (default centered_log)')
parser.add_argument('--shift', type=float, default=1.0, help='shift c inside log(rank + c) (default 1)')
parser.add_argument('--rank-cap', type=int, default=None, dest='rank_cap', help='drop rows with a rank above this')
parser.add_argument('--absorb', type=str, default='group,event', help='fixed effects (default group,event)')
parser.add_argument('--cluster', type=str, default='event', help='cluster factors of the errors (default event)')
parser.add_argument('--panel-out', type=str, default='', dest='panel_out', help='write the panel with band indicators')
parser.add_argument('--threads', type=int, default=1, help='number of worker processes (default 1)')
add_common(parser)

def _names(text):
    return tuple(s.strip() for s in text.split(',') if s.strip())

def main(args):
    options = parser.parse_args(args)
    configure(options)
    absorb = _names(options.absorb)
    for f in absorb:
        if f not in FE_FACTORS:
            fail("Unknown fixed effect '{}', expected one of {}".format(f, ", ".join(FE_FACTORS)))
            return
    try:
        ladder = parse_band_ladder(options.bands) if options.bands else list(DEFAULT_LADDER)
        outcome = OutcomeSpec(mode=options.outcome, shift_c=options.shift, rank_cap=options.rank_cap)
        panel = read_panel(options.source)
        comparisons = run_band_comparisons(panel, ladder, outcome, absorb, _names(options.cluster),
                                           threads=options.threads, quiet=not options.verbose)
    except DraftivError as e:
        fail(e)
        return
    table = comparisons_table(comparisons)
    if options.verbose: print(table.to_string(index=False))
    print("Writing output to {}".format(os.path.abspath(options.out)))
    write_frame(table, options.out)
    if options.figure:
        write_frame(emit_figure_data(comparisons, options.alpha, not options.keep_all), options.figure)
    if options.panel_out:
        for pair in ladder:
            name = "band_{}_{}_vs_{}_{}".format(pair.control.low, pair.control.high, pair.treated.low, pair.treated.high)
            panel[name] = band_column(panel['position'].to_numpy(), pair)
        write_panel(panel, options.panel_out)
