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


usage_string = """python -m draftiv command [args]
Run one of the commands supplied with draftiv.

The options for command are:
    ingest     -- Load the athletes, events and results tables into a panel
    cluster    -- Infer swim groups and drafting positions from exit times
    instrument -- Append the leave-one-out (or projected) instrument to a panel
    estimate   -- Estimate OLS / 2SLS specifications with fixed effects
    bandwagon  -- Compare adjacent position bands
    simulate   -- Draw synthetic panels and run a Monte Carlo study
    report     -- Descriptive tables and regression tables
    run        -- Run everything a JSON configuration describes

For help on the arguments for these commands run for instance 'python -m draftiv estimate --help'
"""

import sys
import argparse
from . import ingest
from . import cluster
from . import instrument
from . import estimate
from . import bandwagon
from . import simulate
from . import report
from . import run

COMMANDS = {
    'ingest': ingest.main,
    'cluster': cluster.main,
    'instrument': instrument.main,
    'estimate': estimate.main,
    'bandwagon': bandwagon.main,
    'simulate': simulate.main,
    'report': report.main,
    'run': run.main,
}

def main(argv):
    parser = argparse.ArgumentParser(prog="draftiv", description="draftiv commandline interface",
                                     usage=usage_string)
    parser.add_argument('command', help='Command to run')
    if len(argv) == 1:
        parser.print_help()
        sys.exit(1)
    args = parser.parse_args(argv[1:2])
    if args.command not in COMMANDS:
        print("Unrecognized command '{}'".format(args.command))
        parser.print_help()
        sys.exit(1)
    COMMANDS[args.command](argv[2:])
