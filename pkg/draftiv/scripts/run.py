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
from ..config import load_config
from ..pipeline import run
from .common import add_common, configure, fail

description="""Runs the whole analysis described by a JSON configuration

    python -m draftiv run config.json --out out --threads 4

The configuration is validated completely before anything is computed. The
output tree is the same for two runs of the same configuration on the same
inputs; out/manifest.json lists every artifact with its SHA-256. The
environment variables DRAFTIV_ATHLETES, DRAFTIV_EVENTS, DRAFTIV_RESULTS and
DRAFTIV_OUT override the paths of the configuration.

The exit status is 1 when the configuration is invalid or any stage failed.
"""

import argparse
parser = argparse.ArgumentParser(prog="draftiv run", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('config', type=str, help='JSON run configuration')
parser.add_argument('-o', '--out', type=str, default='', help='output directory, overrides the configuration')
parser.add_argument('--seed', type=int, default=None, help='master seed, overrides the configuration')
parser.add_argument('--threads', type=int, default=None, help='number of worker processes')
add_common(parser)

def main(args):
    options = parser.parse_args(args)
    configure(options)
    overrides = {}
    if options.out: overrides['output'] = os.path.abspath(options.out)
    if options.seed is not None: overrides['seed'] = options.seed
    if options.threads is not None: overrides['threads'] = options.threads
    if options.delimiter: overrides['delimiter'] = options.delimiter
    try:
        # an explicit --out wins over DRAFTIV_OUT
        environ = {k: v for k, v in os.environ.items() if not (options.out and k == 'DRAFTIV_OUT')}
        config = load_config(options.config, environ, overrides)
        print("Writing output to {}".format(os.path.abspath(config.output)))
        result = run(config, quiet=not options.verbose)
    except DraftivError as e:
        fail(e)
        return
    if options.verbose:
        print("Stages: {}".format(", ".join(result.stages)))
        print("{} artifacts, config hash {}".format(len(result.artifacts), result.config_hash))
