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


import unittest
import sys
import os
import shutil
import tempfile
if __name__ == '__main__':
    sys.path.append('..')
    sys.path.append('.')

import numpy as np
import pandas as pd

from draftiv.utils import IngestError, Period
from draftiv.panel import load_tables, merge_and_clean, derive_covariates, build_panel, PeriodBoundaries
from draftiv.io import write_panel, read_panel

ATHLETES = """athlete_id,gender,birth_year
a1,m,1977
a2,f,1990
a3,m,2009
"""

EVENTS = """event_id,date,category
e1,2015-06-01,Sprint
e2,2021-07-01,Middle
e3,2008-05-01,Short
"""

RESULTS = """athlete_id,event_id,swim_out_s,total_s,rank,status
a1,e1,600,3600,1,Finished
a2,e1,610,3700,2,Finished
a1,e2,700,4000,3,Finished
a2,e2,705,4100,4,Finished
a1,e1b,700,4000,3,Finished
"""


class TablesCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def write(self, name, text):
        path = os.path.join(self.dir, name)
        with open(path, 'w') as f:
            f.write(text)
        return path

    def load(self, athletes=ATHLETES, events=EVENTS, results=RESULTS):
        return load_tables(self.write('athletes.csv', athletes), self.write('events.csv', events),
                           self.write('results.csv', results))


class TestLoadTables(TablesCase):

    def test_valid_files_load_with_their_sizes(self):
        tables = self.load(ATHLETES.rsplit('\n', 2)[0] + '\n', "event_id,date,category\ne1,2015-06-01,Sprint\n",
                           "athlete_id,event_id,swim_out_s,total_s,rank,status\n"
                           "a1,e1,600,3600,1,Finished\na2,e1,610,3700,2,Finished\n")
        self.assertEqual((len(tables.athletes), len(tables.events), len(tables.results)), (2, 1, 2))
        self.assertEqual(len(tables.rejects), 0)

    def test_non_numeric_rank_is_rejected_and_rest_loads(self):
        results = RESULTS + "a3,e1,620,3800,abc,Finished\n"
        tables = self.load(results=results)
        self.assertEqual(len(tables.results), 5)
        reasons = tables.rejects.reasons('results')
        self.assertEqual(len(reasons), 1)
        self.assertIn('rank', reasons[0])
        self.assertEqual(tables.rejects.to_frame()['line'].tolist(), [7])

    def test_empty_results_file_is_not_an_error(self):
        tables = self.load(results="athlete_id,event_id,swim_out_s,total_s,rank,status\n")
        self.assertEqual(len(tables.results), 0)
        self.assertEqual(len(tables.rejects), 0)

    def test_missing_file_raises(self):
        with self.assertRaises(IngestError):
            load_tables(os.path.join(self.dir, 'nope.csv'), self.write('events.csv', EVENTS),
                        self.write('results.csv', RESULTS))

    def test_header_mismatch_raises(self):
        with self.assertRaises(IngestError) as cm:
            self.load(events="event_id,day,category\ne1,2015-06-01,Sprint\n")
        self.assertIn('date', str(cm.exception))

    def test_bad_rows_of_every_table_are_reported(self):
        tables = self.load(ATHLETES + "a4,x,1980\na5,f,1800\n",
                           EVENTS + "e4,2015-13-01,Sprint\ne5,2015-01-01,Marathon\n",
                           RESULTS + "a1,e3,1,1,1,Unknown\na2,e3,-5,1,1,Finished\n")
        self.assertEqual(len(tables.rejects.reasons('athletes')), 2)
        self.assertEqual(len(tables.rejects.reasons('events')), 2)
        self.assertEqual(len(tables.rejects.reasons('results')), 2)

    def test_duplicate_keys_are_rejected(self):
        tables = self.load(results=RESULTS + "a1,e1,601,3601,1,Finished\n")
        self.assertFalse(((tables.results['athlete_id'] == 'a1') & (tables.results['event_id'] == 'e1')).any())
        self.assertEqual(len(tables.rejects.reasons('results')), 2)


class TestMergeAndClean(TablesCase):

    def test_audit_of_finished_dnf_and_missing(self):
        results = ("athlete_id,event_id,swim_out_s,total_s,rank,status\n"
                   "a1,e1,600,3600,1,Finished\na2,e1,610,3700,2,Finished\n"
                   "a1,e2,700,4000,3,Finished\na2,e2,705,4100,4,Finished\n"
                   "a1,e3,700,,,DNF\na2,e3,705,4100,,Finished\n")
        panel, audit = merge_and_clean(self.load(results=results))
        self.assertEqual(len(panel), 4)
        counts = audit.as_dict()
        self.assertEqual((counts['input'], counts['dropped_missing'], counts['dropped_dnf'],
                          counts['dropped_dns'], counts['output']), (6, 1, 1, 0, 4))
        self.assertTrue(audit.conserved())

    def test_unresolved_keys_go_to_the_reject_report(self):
        tables = self.load()
        panel, audit = merge_and_clean(tables)
        self.assertEqual(audit.as_dict()['dropped_unresolved'], 1)
        self.assertIn('unresolved foreign key event_id', tables.rejects.reasons('results'))
        self.assertTrue(audit.conserved())

    def test_cleaning_is_idempotent(self):
        panel, _ = merge_and_clean(self.load())
        again, audit = merge_and_clean(panel)
        pd.testing.assert_frame_equal(panel, again)
        self.assertEqual(audit.dropped(), 0)

    def test_empty_input_gives_empty_output(self):
        tables = self.load(results="athlete_id,event_id,swim_out_s,total_s,rank,status\n")
        panel, audit = merge_and_clean(tables)
        self.assertEqual(len(panel), 0)
        self.assertEqual(audit.dropped(), 0)
        self.assertEqual(audit.as_dict()['output'], 0)

    def test_row_order_does_not_matter(self):
        lines = RESULTS.strip().split('\n')
        shuffled = '\n'.join([lines[0]] + lines[1:][::-1]) + '\n'
        a, _ = build_panel(self.load())
        b, _ = build_panel(self.load(results=shuffled))
        pd.testing.assert_frame_equal(a, b)
        self.assertEqual(list(zip(a['event_id'], a['athlete_id'])),
                         sorted(zip(a['event_id'], a['athlete_id'])))


class TestDeriveCovariates(TablesCase):

    def test_age_and_period(self):
        panel, audit = build_panel(self.load())
        row = panel[(panel['athlete_id'] == 'a1') & (panel['event_id'] == 'e1')].iloc[0]
        self.assertEqual(row['age'], 38)
        self.assertEqual(row['age_sq'], 1444)
        self.assertEqual(row['period'], Period.PRE)
        covid = panel[panel['event_id'] == 'e2']
        self.assertTrue((covid['period'] == Period.COVID).all())
        flags = panel[['pre', 'covid', 'post']].sum(axis=1)
        self.assertTrue((flags == 1).all())
        self.assertTrue(audit.conserved())

    def test_event_before_birth_is_excluded(self):
        results = RESULTS + "a3,e3,620,3800,5,Finished\n"
        tables = self.load(results=results)
        panel, audit = build_panel(tables)
        self.assertNotIn('a3', panel['athlete_id'].tolist())
        self.assertEqual(audit.as_dict()['invalid_age'], 1)
        self.assertTrue(any('invalid age' in r for r in tables.rejects.reasons('results')))
        self.assertTrue(audit.conserved())

    def test_boundaries_can_be_moved(self):
        panel, _ = merge_and_clean(self.load())
        moved, _ = derive_covariates(panel, PeriodBoundaries.make('2021-01-01', '2021-06-01'))
        self.assertTrue((moved[moved['event_id'] == 'e2']['period'] == Period.POST).all())

    def test_boundaries_must_be_ordered(self):
        with self.assertRaises(ValueError):
            PeriodBoundaries.make('2023-01-01', '2020-01-01')

    def test_panel_survives_a_write_read_cycle(self):
        panel, _ = build_panel(self.load())
        path = os.path.join(self.dir, 'panel.csv')
        write_panel(panel, path, config_hash='abc')
        with open(path) as f:
            self.assertEqual(f.readline(), '# config_hash=abc\n')
        back = read_panel(path)
        self.assertEqual(back['athlete_id'].tolist(), panel['athlete_id'].tolist())
        self.assertTrue(np.allclose(back['swim_out_s'], panel['swim_out_s']))


if __name__ == '__main__':
    unittest.main()
