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

from ..utils import DraftivError, positive_float
from ..io import read_panel, write_panel
from ..theory import GameParams
from ..instruments import attach_instruments
from .common import add_common, configure, fail

description="""Appends the instrument and the structural benefit columns to a grouped panel

    python -m draftiv instrument panel.csv --kind loo

The columns Z_loo (mean exit time of the other group members), Z (the
instrument of the chosen kind), Z_projected (with --kind projected) and
benefit (the drafting benefit of the position) are added. Without -o the input
panel is overwritten.
"""

import argparse
parser = argparse.ArgumentParser(prog="draftiv instrument", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('source', type=str, help='panel written by the cluster command')
parser.add_argument('-o', '--out', type=str, default='', help='destination for the panel')
parser.add_argument('--kind', type=str, default='loo', choices=('loo', 'projected'),
    help='loo: leave-one-out group mean (default); projected: mean over the other events of the athlete')
parser.add_argument('--standardize', default=False, action='store_true',
    help='z-score exit times within event before averaging')
parser.add_argument('--gamma', type=positive_float, default=1.0, help='scale of the drafting benefit (default 1)')
parser.add_argument('--lambda', type=positive_float, default=0.5, dest='lam', help='decay of the drafting benefit (default 0.5)')
add_common(parser)

def main(args):
    options = parser.parse_args(args)
    configure(options)
    dest = options.out or options.source
    try:
        panel = read_panel(options.source)
        if 'group' not in panel.columns:
            fail("Panel {} has no group columns; run the cluster command first".format(options.source))
            return
        panel = attach_instruments(panel, options.kind, options.standardize,
                                   GameParams(gamma=options.gamma, lam=options.lam))
    except DraftivError as e:
        fail(e)
        return
    if options.verbose:
        print("Instrument defined for {} of {} rows".format(int(panel['Z'].notna().sum()), len(panel)))
    print("Writing output to {}".format(os.path.abspath(dest)))
    write_panel(panel, dest)
