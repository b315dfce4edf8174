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
import random
import math
import sys
if __name__ == '__main__':
    sys.path.append('..')
    sys.path.append('.')

import numpy as np
import pandas as pd

from draftiv.utils import DraftivError
from draftiv.theory import GameParams, benefit
from draftiv.grouping import assign_groups
from draftiv.instruments import (loo_group_mean, loo_column, projected_instrument, projected_column, BandPair,
                                 band_treatment, band_column, parse_band_pair, parse_band_ladder,
                                 attach_instruments, EXCLUDED)

SEED = 1337


def random_panel(rng, n_athletes=30, n_events=8):
    rows = []
    for e in range(n_events):
        for a in rng.sample(range(n_athletes), rng.randint(5, n_athletes)):
            rows.append(("e{}".format(e), "a{:02d}".format(a), rng.uniform(0, 60)))
    panel = pd.DataFrame(rows, columns=['event_id', 'athlete_id', 'swim_out_s'])
    return assign_groups(panel, 3)


class TestLeaveOneOut(unittest.TestCase):

    def test_mean_of_the_others(self):
        self.assertEqual(loo_group_mean([100, 200, 300], 0), 250)
        self.assertEqual(loo_group_mean([100, 200], 1), 100)
        self.assertTrue(math.isnan(loo_group_mean([100], 0)))
        with self.assertRaises(DraftivError):
            loo_group_mean([100, 200], 2)

    def test_identity_on_random_groups(self):
        rng = np.random.default_rng(SEED)
        for _ in range(200):
            t = rng.uniform(500, 1500, size=rng.integers(2, 30))
            n, m = len(t), t.mean()
            for i in range(n):
                self.assertAlmostEqual(loo_group_mean(t, i), (n*m - t[i]) / (n - 1), delta=1e-9)

    def test_own_time_never_moves_own_instrument(self):
        rng = np.random.default_rng(SEED)
        t = rng.uniform(0, 100, size=10)
        before = loo_group_mean(t, 3)
        t[3] += 1000
        self.assertEqual(loo_group_mean(t, 3), before)

    def test_column_matches_direct_computation(self):
        panel = random_panel(random.Random(SEED))
        z = loo_column(panel)
        self.assertEqual(z.provenance, 'loo')
        for (event, group), rows in panel.groupby(['event_id', 'group']):
            times = rows['swim_out_s'].tolist()
            for k, i in enumerate(rows.index):
                expected = loo_group_mean(times, k)
                if math.isnan(expected):
                    self.assertTrue(np.isnan(z.values[i]))
                else:
                    self.assertAlmostEqual(z.values[i], expected, delta=1e-9)
        self.assertTrue((z.missing() == (panel['group_size'] == 1).to_numpy()).all())

    def test_standardized_instrument_is_unitless(self):
        panel = random_panel(random.Random(SEED))
        shifted = panel.assign(swim_out_s=panel['swim_out_s'] * 3 + 100)
        a = loo_column(panel, standardize=True).values
        b = loo_column(shifted, standardize=True).values
        self.assertTrue(np.allclose(a, b, equal_nan=True))

    def test_needs_groups(self):
        with self.assertRaises(DraftivError):
            loo_column(pd.DataFrame({'event_id': ['e'], 'swim_out_s': [1.0]}))


class TestProjected(unittest.TestCase):

    def test_small_cases(self):
        self.assertEqual(projected_instrument([10, 20, 99], 2), 15)
        self.assertTrue(math.isnan(projected_instrument([7], 0)))
        self.assertTrue(math.isnan(projected_instrument([7, float('nan')], 0)))

    def test_column_matches_enumeration(self):
        rng = random.Random(SEED)
        panel = random_panel(rng)
        z = loo_column(panel).values
        proj = projected_column(panel, z).values
        for athlete, rows in panel.groupby('athlete_id'):
            values = z[rows.index]
            for k, i in enumerate(rows.index):
                expected = projected_instrument(values, k)
                if math.isnan(expected):
                    self.assertTrue(np.isnan(proj[i]))
                else:
                    self.assertAlmostEqual(proj[i], expected, delta=1e-9)


class TestBands(unittest.TestCase):

    def test_treatment_values(self):
        pair = BandPair.make((1, 2), (3, 4))
        self.assertEqual([band_treatment(d, pair) for d in (2, 4, 6)], [0, 1, EXCLUDED])
        self.assertEqual(band_treatment(9, BandPair.make((7, 8), (9, 10))), 1)
        self.assertEqual(band_treatment(1, BandPair.make((2, 3), (4, 5))), EXCLUDED)

    def test_integral_floats_are_positions(self):
        pair = BandPair.make((1, 2), (3, 4))
        self.assertEqual([band_treatment(d, pair) for d in (2.0, np.float64(4.0), np.int64(1))], [0, 1, 0])
        self.assertEqual([band_treatment(d, pair) for d in (2.5, float('nan'), True, '3')], [EXCLUDED]*4)
        d = np.array([1.0, 2.5, 3.0, np.nan, 5.0])
        expected = [band_treatment(x, pair) for x in d]
        col = band_column(d, pair)
        self.assertEqual([EXCLUDED if np.isnan(c) else int(c) for c in col], expected)

    def test_column_partitions_into_two_arms(self):
        pair = parse_band_pair('2-3:4-5')
        col = band_column(np.arange(1, 11), pair)
        kept = col[~np.isnan(col)]
        self.assertEqual(sorted(set(kept.tolist())), [0.0, 1.0])
        self.assertEqual(len(kept), 4)

    def test_overlapping_bands_are_rejected(self):
        with self.assertRaises(DraftivError):
            BandPair.make((1, 3), (3, 4))
        with self.assertRaises(DraftivError):
            parse_band_pair('1-2 3-4')
        with self.assertRaises(DraftivError):
            BandPair.make((0, 1), (2, 3))

    def test_ladder(self):
        ladder = parse_band_ladder('1-2:3-4, 7-8:9-10')
        self.assertEqual([p.label for p in ladder], ['1-2 vs 3-4', '7-8 vs 9-10'])


class TestAttach(unittest.TestCase):

    def test_columns(self):
        panel = random_panel(random.Random(SEED))
        params = GameParams(gamma=2.0, lam=0.3)
        out = attach_instruments(panel, 'projected', params=params)
        for c in ('Z', 'Z_loo', 'Z_projected', 'benefit'):
            self.assertIn(c, out.columns)
        self.assertTrue(np.allclose(out['Z'], out['Z_projected'], equal_nan=True))
        self.assertTrue(np.allclose(out['benefit'], benefit(out['position'].to_numpy().astype(float), params)))
        self.assertNotIn('Z', panel.columns)
        self.assertEqual(set(out['Z_provenance']), {'projected'})
        self.assertEqual(set(attach_instruments(panel)['Z_provenance']), {'loo'})
        with self.assertRaises(DraftivError):
            attach_instruments(panel, 'network')


if __name__ == '__main__':
    unittest.main()
