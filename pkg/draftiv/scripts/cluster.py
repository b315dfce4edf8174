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

from ..utils import DraftivError, Linkage, positive_float
from ..io import read_panel, write_panel
from ..grouping import assign_groups
from .common import add_common, configure, fail

description="""Infers swim groups from exit times and appends the group columns to a panel

    python -m draftiv cluster panel.csv --threshold 5 --linkage single

Two athletes of the same event fall into the same group when a chain of exit
time gaps of at most the threshold connects them (single linkage), or when all
pairwise gaps are at most the threshold (complete linkage). Without -o the
input panel is overwritten.
"""

import argparse
parser = argparse.ArgumentParser(prog="draftiv cluster", description=description, formatter_class=argparse.RawTextHelpFormatter)
parser.add_argument('source', type=str, help='panel written by the ingest command')
parser.add_argument('-o', '--out', type=str, default='', help='destination for the grouped panel')
parser.add_argument('--threshold', type=positive_float, default=5.0, help='largest gap in seconds inside a group (default 5)')
parser.add_argument('--linkage', type=str, default='single', choices=Linkage.ALL, help='agglomeration rule (default single)')
add_common(parser)

def main(args):
    options = parser.parse_args(args)
    configure(options)
    dest = options.out or options.source
    try:
        panel = read_panel(options.source)
        panel = assign_groups(panel, options.threshold, options.linkage)
    except DraftivError as e:
        fail(e)
        return
    if options.verbose:
        sizes = panel.drop_duplicates(['event_id', 'group'])['group_size']
        print("{} groups, mean size {:.2f}, {} singletons".format(len(sizes), sizes.mean(), int((sizes == 1).sum())))
    print("Writing output to {}".format(os.path.abspath(dest)))
    write_panel(panel, dest)
