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
import tempfile
import unittest
import sys
if __name__ == '__main__':
    sys.path.append('..')
    sys.path.append('.')

import numpy as np
import pandas as pd

from draftiv.utils import DraftivError, InfeasibleError, Period
from draftiv.io import write_frame
from draftiv.grouping import assign_groups, GROUP_COLUMNS
from draftiv.panel import PANEL_COLUMNS
from draftiv.pipeline import ingest
from draftiv.simulate import (DgpConfig, simulate_panel, default_formula, monte_carlo, summarize_monte_carlo,
                              panel_to_tables)

SEED = 1337

SMALL = DgpConfig(n_athletes=60, n_events=10, seed=SEED)


class TestSimulatePanel(unittest.TestCase):

    def test_deterministic(self):
        a, ta = simulate_panel(SMALL)
        b, tb = simulate_panel(SMALL)
        pd.testing.assert_frame_equal(a, b)
        self.assertEqual(ta.to_record(), tb.to_record())
        c, _ = simulate_panel(SMALL.replace(seed=SEED+1))
        self.assertFalse(len(a) == len(c) and np.allclose(a['swim_out_s'], c['swim_out_s']))

    def test_columns(self):
        panel, truth = simulate_panel(SMALL)
        for c in PANEL_COLUMNS + GROUP_COLUMNS + ['age', 'age_sq', 'period', 'pre', 'covid', 'post']:
            self.assertIn(c, panel.columns)
        for c in ('form', 'ability', 'event_effect'):
            self.assertNotIn(c, panel.columns)
        self.assertEqual(truth.n_obs, len(panel))
        self.assertTrue(set(panel['period']) <= set(Period.ALL))
        self.assertTrue((panel['rank'] >= 0).all())
        self.assertTrue(panel.duplicated(['athlete_id', 'event_id']).sum() == 0)

    def test_clustering_recovers_true_groups(self):
        panel, truth = simulate_panel(SMALL)
        recovered = assign_groups(panel.drop(columns=GROUP_COLUMNS), SMALL.threshold)
        keys = ['event_id', 'athlete_id']
        merged = panel[keys + ['group', 'position']].merge(recovered[keys + ['group', 'position']], on=keys)
        self.assertEqual(len(merged), len(panel))
        self.assertTrue((merged['group_x'] == merged['group_y']).all())
        self.assertTrue((merged['position_x'] == merged['position_y']).all())
        self.assertEqual(truth.n_groups, len(panel.drop_duplicates(['event_id', 'group'])))

    def test_band_treatment(self):
        dgp = SMALL.replace(treatment='band', band_pair=((1, 1), (2, 3)))
        self.assertEqual(dgp.bands().label, '1-1 vs 2-3')
        self.assertIn('bands=1-1:2-3', default_formula(dgp))
        panel, truth = simulate_panel(dgp)
        self.assertEqual(truth.band_pair, '1-1 vs 2-3')

    def test_band_order_ignores_form(self):
        band = SMALL.replace(treatment='band', band_pair=((1, 2), (3, 4)))
        self.assertFalse(band.form_moves_order())
        self.assertTrue(SMALL.form_moves_order())
        self.assertTrue(band.replace(form_in_order=True).form_moves_order())
        a, truth = simulate_panel(band)
        b, _ = simulate_panel(band.replace(form_sd=3.0))
        self.assertFalse(truth.to_record()['form_in_order'])
        self.assertTrue(np.array_equal(a['swim_out_s'], b['swim_out_s']))
        self.assertTrue(np.array_equal(a['position'], b['position']))
        self.assertFalse(np.array_equal(a['rank'], b['rank']))
        c, _ = simulate_panel(SMALL)
        d, _ = simulate_panel(SMALL.replace(form_sd=3.0))
        self.assertFalse(np.array_equal(c['swim_out_s'], d['swim_out_s']))

    def test_default_formulas(self):
        self.assertTrue(default_formula(SMALL).endswith('iv: D ~ Z'))
        self.assertIn('iv: B(D) ~ Z', default_formula(SMALL.replace(treatment='benefit', gamma=2.0)))
        self.assertIn('gamma=2', default_formula(SMALL.replace(treatment='benefit', gamma=2.0)))

    def test_singletons_only(self):
        with self.assertRaises(InfeasibleError):
            simulate_panel(SMALL.replace(mean_group_size=1.0))

    def test_invalid_parameters(self):
        for kw in ({'n_athletes': 0}, {'participation': 0.0}, {'mean_group_size': 0.5}, {'noise_sd': -1.0},
                   {'treatment': 'dose'}, {'threshold': 0.0}, {'form_in_order': 'yes'},
                   {'band_pair': ((1, 3), (2, 4))}):
            with self.assertRaises(DraftivError):
                SMALL.replace(**kw)

    def test_tables_load_back(self):
        panel, _ = simulate_panel(SMALL)
        tables = panel_to_tables(panel)
        self.assertEqual(len(tables['athletes']), panel['athlete_id'].nunique())
        self.assertEqual(len(tables['events']), panel['event_id'].nunique())
        with tempfile.TemporaryDirectory() as d:
            paths = [write_frame(tables[n], os.path.join(d, n + '.csv'), float_format='%.10g')
                     for n in ('athletes', 'events', 'results')]
            loaded, audit, rejects = ingest(*paths)
        self.assertEqual(len(rejects), 0)
        self.assertEqual(len(loaded), len(panel))
        keys = ['event_id', 'athlete_id']
        merged = panel[keys + ['swim_out_s', 'age']].merge(loaded[keys + ['swim_out_s', 'age']], on=keys)
        self.assertTrue(np.allclose(merged['swim_out_s_x'], merged['swim_out_s_y']))
        self.assertTrue((merged['age_x'] == merged['age_y']).all())


class TestMonteCarlo(unittest.TestCase):

    def test_runs_and_summary(self):
        runs = monte_carlo(SMALL, 3)
        self.assertEqual(len(runs), 3)
        self.assertEqual(runs['seed'].nunique(), 3)
        for c in ('iv_estimate', 'iv_se', 'ols_estimate', 'first_stage_F', 'wu_hausman_p', 'covered'):
            self.assertIn(c, runs.columns)
        self.assertTrue(runs['covered'].isin([0.0, 1.0]).all())
        s = summarize_monte_carlo(runs)
        self.assertEqual(s['replications'], 3)
        self.assertAlmostEqual(s['iv_bias'], runs['iv_estimate'].mean() - SMALL.beta)
        self.assertTrue(0 <= s['coverage'] <= 1)

    def test_reproducible_and_thread_invariant(self):
        a = monte_carlo(SMALL, 3, threads=1)
        b = monte_carlo(SMALL, 3, threads=2)
        pd.testing.assert_frame_equal(a, b)

    def test_custom_formula(self):
        runs = monte_carlo(SMALL, 2, formula='log_rank ~ age | fe: event | iv: D ~ Z')
        self.assertEqual(len(runs), 2)

    def test_needs_replications(self):
        with self.assertRaises(DraftivError):
            monte_carlo(SMALL, 0)


if __name__ == '__main__':
    unittest.main()
