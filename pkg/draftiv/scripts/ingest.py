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
from ..io import write_panel, write_frame
from ..panel import PeriodBoundaries
from ..pipeline import ingest, audit_frame
from .common import add_common, configure, fail

description="""Loads the athletes, events and results tables into the canonical panel

    python -m draftiv ingest -a athletes.csv -e events.csv -r results.csv -o panel.csv

Next to the panel two sidecar files are written: <panel>.rejects.csv lists every
row that could not be loaded with its reason and <panel>.audit.csv accounts for
every row removed while cleaning.
"""

import argparse
parser = argparse.ArgumentParser(prog="draftiv ingest", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('-a', '--athletes', type=str, required=True, help='athletes table (athlete_id,gender,birth_year)')
parser.add_argument('-e', '--events', type=str, required=True, help='events table (event_id,date,category)')
parser.add_argument('-r', '--results', type=str, required=True,
    help='results table (athlete_id,event_id,swim_out_s,total_s,rank,status)')
parser.add_argument('-o', '--out', type=str, default='panel.csv', help='destination of the panel (default panel.csv)')
parser.add_argument('--covid-start', type=str, default=None, dest='covid_start',
    help='first day of the Covid period (default 2020-01-01)')
parser.add_argument('--post-start', type=str, default=None, dest='post_start',
    help='first day of the Post period (default 2023-01-01)')
add_common(parser)

def main(args):
    options = parser.parse_args(args)
    configure(options)
    try:
        boundaries = PeriodBoundaries.make(options.covid_start, options.post_start)
        panel, audit, rejects = ingest(options.athletes, options.events, options.results, boundaries)
    except (DraftivError, ValueError) as e:
        fail(e)
        return
    base = os.path.splitext(options.out)[0]
    if options.verbose: print(audit)
    print("Writing output to {}".format(os.path.abspath(options.out)))
    write_panel(panel, options.out)
    write_frame(rejects, base + '.rejects.csv')
    write_frame(audit_frame({'ingest': audit}), base + '.audit.csv')
