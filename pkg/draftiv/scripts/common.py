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

import sys
import logging
import argparse

from ..utils import settings


def add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-v', default=False, action='store_true', dest='verbose',
        help='Output verbose information and progress bars')
    parser.add_argument('--delimiter', type=str, default=None,
        help='Field delimiter of input and output tables (default ",")')


def configure(options: argparse.Namespace) -> None:
    """Applies the flags every command shares to the logger and to ``settings``."""
    logging.basicConfig(level=logging.INFO if options.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    settings.quiet = not options.verbose
    if getattr(options, 'delimiter', None):
        settings.delimiter = options.delimiter
    if getattr(options, 'threads', None):
        settings.threads = options.threads


def fail(message: object) -> None:
    print(message, file=sys.stderr)
    sys.exit(1)
