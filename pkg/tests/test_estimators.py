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


import math
import unittest
import warnings
import sys
if __name__ == '__main__':
    sys.path.append('..')
    sys.path.append('.')

import numpy as np
import pandas as pd
from scipy import stats

from draftiv.utils import settings, DraftivError, CollinearityError, WeakInstrumentWarning
from draftiv.hdfe import build_design
from draftiv.estimators import (CovSpec, ols, tsls, estimate, wu_hausman, first_stage_F, semi_elasticity,
                                absorb_design)

SEED = 1337


def synthetic(n=400, seed=SEED, strength=1.0):
    """Endogenous x: u enters both x and y; z moves x only."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=n)
    z = rng.normal(size=n)
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    event = rng.integers(0, 15, n)
    athlete = rng.integers(0, 40, n)
    xe = strength*z + u + rng.normal(size=n)
    yv = 1.0 + 0.5*x1 - 0.25*x2 - 0.3*xe + 0.2*event/15 + u + rng.normal(size=n)
    return pd.DataFrame({'yv': yv, 'x1': x1, 'x2': x2, 'xe': xe, 'zz': z, 'noise': rng.normal(size=n),
                         'event_id': ['E{}'.format(e) for e in event],
                         'athlete_id': ['A{}'.format(a) for a in athlete],
                         'row_id': np.arange(n)})


def sandwich(X, e, labels, df_resid):
    """CR1 sandwich by explicit loop over clusters."""
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((X.shape[1],)*2)
    groups = pd.Series(labels).astype(str)
    for g in groups.unique():
        idx = np.flatnonzero(groups.to_numpy() == g)
        s = X[idx].T @ e[idx]
        meat += np.outer(s, s)
    G, n = groups.nunique(), len(e)
    return G/(G-1) * (n-1)/df_resid * bread @ meat @ bread


class TestOLS(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.frame = synthetic()

    def test_normal_equations(self):
        d = build_design(self.frame, "yv ~ x1 + x2")
        r = ols(d)
        X = np.column_stack([np.ones(len(self.frame)), self.frame[['x1', 'x2']].to_numpy()])
        y = self.frame['yv'].to_numpy()
        b = np.linalg.solve(X.T @ X, X.T @ y)
        self.assertTrue(np.allclose(r.coef, b, atol=1e-8))
        self.assertEqual(r.names, ['(Intercept)', 'x1', 'x2'])
        e = y - X @ b
        s2 = e @ e / (len(y) - 3)
        self.assertTrue(np.allclose(r.cov, s2*np.linalg.inv(X.T @ X), rtol=1e-8))
        self.assertEqual(r.df_resid, len(y) - 3)
        self.assertEqual(r.cov_type, 'iid')

    def test_exact_fit_with_fixed_effects(self):
        frame = self.frame.assign(yv=2*self.frame['x1'] + self.frame['event_id'].str[1:].astype(float))
        r = ols(build_design(frame, "yv ~ x1 | fe: event"))
        self.assertAlmostEqual(r.coef[0], 2.0, places=8)
        self.assertAlmostEqual(r.within_r2, 1.0, places=8)
        self.assertEqual(r.fe_levels, {'event': 15})

    def test_fixed_effects_equal_dummies(self):
        d = build_design(self.frame, "yv ~ x1 + x2 | fe: athlete event")
        r = ols(d)
        D = pd.get_dummies(self.frame[['athlete_id', 'event_id']], drop_first=True).to_numpy(dtype=float)
        X = np.column_stack([self.frame[['x1', 'x2']].to_numpy(), np.ones(len(self.frame)), D])
        b, _, _, _ = np.linalg.lstsq(X, self.frame['yv'].to_numpy(), rcond=None)
        self.assertTrue(np.allclose(r.coef, b[:2], atol=1e-6))
        self.assertEqual(r.df_resid, len(self.frame) - 2 - (40 + 15 - 1))

    def test_cluster_matches_explicit_sandwich(self):
        d = build_design(self.frame, "yv ~ x1 + x2 | cluster: event")
        r = ols(d)
        X = d.exog
        e = d.y - X @ r.coef
        V = sandwich(X, e, self.frame['event_id'], len(e) - 3)
        self.assertTrue(np.allclose(r.cov, V, rtol=1e-8))
        self.assertEqual(r.cov_type, 'cluster(event)')
        self.assertEqual(r.df_test, 14)

    def test_twoway_is_inclusion_exclusion(self):
        d = build_design(self.frame, "yv ~ x1 + x2 | cluster: athlete event")
        r = ols(d)
        X, e, df = d.exog, d.y - d.exog @ r.coef, len(d.y) - 3
        both = self.frame['athlete_id'] + '/' + self.frame['event_id']
        V = (sandwich(X, e, self.frame['athlete_id'], df) + sandwich(X, e, self.frame['event_id'], df)
             - sandwich(X, e, both, df))
        self.assertTrue(np.allclose(r.cov, V, rtol=1e-8))
        self.assertEqual(r.df_test, 14)

    def test_singleton_clusters_equal_hc1(self):
        d = build_design(self.frame, "yv ~ x1 + x2")
        hc1 = ols(d, CovSpec('hc1'))
        cr1 = ols(d, CovSpec('cluster', ('row_id',)))
        self.assertTrue(np.allclose(hc1.cov, cr1.cov, rtol=1e-10))
        self.assertAlmostEqual(hc1.small_sample_factor, len(self.frame)/(len(self.frame) - 3))

    def test_scale_equivariance(self):
        r = ols(build_design(self.frame, "yv ~ x1 + x2 | fe: event | cluster: event"))
        r10 = ols(build_design(self.frame.assign(yv=10*self.frame['yv']), "yv ~ x1 + x2 | fe: event | cluster: event"))
        self.assertTrue(np.allclose(r10.coef, 10*r.coef))
        self.assertTrue(np.allclose(r10.se, 10*r.se))
        self.assertTrue(np.allclose(r10.pvalues, r.pvalues))

    def test_collinear_regressors(self):
        frame = self.frame.assign(x12=self.frame['x1'] + self.frame['x2'])
        with self.assertRaises(CollinearityError) as cm:
            ols(build_design(frame, "yv ~ x1 + x2 + x12"))
        self.assertTrue(set(cm.exception.columns) & {'x1', 'x2', 'x12'})

    def test_endogenous_design_needs_flag(self):
        d = build_design(self.frame, "yv ~ x1 | iv: xe ~ zz")
        with self.assertRaises(DraftivError):
            ols(d)
        self.assertEqual(ols(d, include_endog=True).names, ['(Intercept)', 'x1', 'xe'])

    def test_invalid_covariance(self):
        with self.assertRaises(DraftivError):
            CovSpec('cluster')
        with self.assertRaises(DraftivError):
            CovSpec('sandwich')
        self.assertEqual(CovSpec.parse('twoway: athlete, event'), CovSpec('twoway', ('athlete', 'event')))
        self.assertEqual(str(CovSpec.parse('cluster:event')), 'cluster:event')


class TestTSLS(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.frame = synthetic()

    def test_just_identified_ratio(self):
        d = build_design(self.frame, "yv ~ | iv: xe ~ zz")
        r = tsls(d)
        f = self.frame
        expected = np.cov(f['zz'], f['yv'])[0, 1] / np.cov(f['zz'], f['xe'])[0, 1]
        self.assertAlmostEqual(r.coef[r.index('xe')], expected, places=8)

    def test_ratio_after_absorption(self):
        d = build_design(self.frame, "yv ~ | fe: event | iv: xe ~ zz")
        r = tsls(d)
        g = self.frame.groupby('event_id')
        dm = {c: self.frame[c] - g[c].transform('mean') for c in ('yv', 'xe', 'zz')}
        expected = (dm['zz'] @ dm['yv']) / (dm['zz'] @ dm['xe'])
        self.assertEqual(r.names, ['xe'])
        self.assertAlmostEqual(r.coef[0], expected, places=8)

    def test_moment_condition(self):
        d = build_design(self.frame, "yv ~ x1 + x2 | fe: event athlete | iv: xe ~ zz")
        r = tsls(d)
        ab = absorb_design(d)
        Z = np.column_stack([ab.X, ab.Z])
        resid = ab.y - np.column_stack([ab.X, ab.endog]) @ r.coef
        self.assertLess(np.abs(Z.T @ resid).max(), 1e-6)

    def test_recovers_effect_and_beats_ols(self):
        frame = synthetic(n=5000, strength=2.0)
        d = build_design(frame, "yv ~ x1 + x2 | iv: xe ~ zz")
        iv = tsls(d)
        naive = ols(d, include_endog=True)
        i = iv.index('xe')
        self.assertLess(abs(iv.coef[i] + 0.3), 4*iv.se[i])
        self.assertGreater(abs(naive.coef[i] + 0.3), abs(iv.coef[i] + 0.3))
        self.assertLess(iv.wu_hausman_p, 0.01)
        self.assertGreater(iv.first_stage_F, 100)

    def test_residuals_use_original_endogenous(self):
        d = build_design(self.frame, "yv ~ x1 | iv: xe ~ zz")
        r = tsls(d, CovSpec('iid'))
        X = np.column_stack([d.exog, d.endog])
        resid = d.y - X @ r.coef
        self.assertAlmostEqual(r.rss, float(resid @ resid), places=8)

    def test_f_is_squared_t_with_one_instrument(self):
        for cov in (CovSpec('iid'), CovSpec('hc1'), CovSpec('cluster', ('event',))):
            r = tsls(build_design(self.frame, "yv ~ x1 | iv: xe ~ zz"), cov)
            j = r.first_stage.index('zz')
            t = r.first_stage.coef[j] / r.first_stage.se[j]
            self.assertAlmostEqual(r.first_stage_F / (t*t), 1.0, places=10)
            self.assertEqual(first_stage_F(r.first_stage, ['zz']), (r.first_stage_F, r.first_stage_p))

    def test_identity_instrument_is_ols(self):
        d = build_design(self.frame, "yv ~ x1 | fe: event | iv: xe ~ xe")
        iv = tsls(d)
        naive = ols(d, include_endog=True)
        self.assertTrue(np.allclose(iv.coef, naive.coef, atol=1e-10))
        self.assertEqual((iv.wu_hausman, iv.wu_hausman_p), (0.0, 1.0))
        self.assertEqual(wu_hausman(d), (0.0, 1.0))
        self.assertEqual(iv.warnings, [])

    def test_weak_instrument_warning(self):
        d = build_design(self.frame, "yv ~ x1 | iv: xe ~ noise")
        with self.assertWarns(WeakInstrumentWarning):
            r = tsls(d)
        self.assertEqual(len(r.warnings), 1)
        self.assertIn('Weak instrument', r.warnings[0])
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            r = tsls(d, weak_threshold=0.0)
        self.assertEqual(r.warnings, [])

    def test_wu_variants_agree_under_iid(self):
        d = build_design(self.frame, "yv ~ x1 + x2 | fe: event | iv: xe ~ zz")
        cf = wu_hausman(d, CovSpec('iid'), 'control_function')
        wu = wu_hausman(d, CovSpec('iid'), 'wu')
        self.assertAlmostEqual(cf[0] / wu[0], 1.0, places=8)
        self.assertAlmostEqual(cf[1], wu[1], places=8)
        with settings.override(wu_hausman='wu'):
            self.assertEqual(tsls(d, CovSpec('iid')).wu_hausman_kind, 'wu')
        with self.assertRaises(DraftivError):
            wu_hausman(d, kind='durbin')

    def test_default_covariance_from_formula(self):
        r = tsls(build_design(self.frame, "yv ~ x1 | cluster: event | iv: xe ~ zz"))
        self.assertEqual(r.cov_type, 'cluster(event)')
        self.assertEqual(r.first_stage.cov_type, 'cluster(event)')
        self.assertEqual(r.df_test, 14)

    def test_estimate_dispatch(self):
        self.assertEqual(estimate(build_design(self.frame, "yv ~ x1 | iv: xe ~ zz")).method, '2SLS')
        self.assertEqual(estimate(build_design(self.frame, "yv ~ x1")).method, 'OLS')
        with self.assertRaises(DraftivError):
            tsls(build_design(self.frame, "yv ~ x1"))

    def test_record(self):
        r = tsls(build_design(self.frame, "yv ~ x1 | cluster: event | iv: xe ~ zz"))
        rec = r.to_record()
        self.assertEqual(rec['method'], '2SLS')
        self.assertEqual(rec['endogenous'], 'xe')
        self.assertEqual(set(rec['coefficients']), {'(Intercept)', 'x1', 'xe'})
        self.assertEqual(set(rec['first_stage']), {'(Intercept)', 'x1', 'zz'})
        self.assertAlmostEqual(rec['semi_elasticity'], math.expm1(r.coef[r.index('xe')])*100)
        c = rec['coefficients']['xe']
        self.assertLess(c['ci_low'], c['estimate'])
        self.assertLess(c['estimate'], c['ci_high'])
        self.assertEqual(rec['n_obs'], len(self.frame))
        self.assertEqual(rec['cluster_levels'], {'event': 15})


class TestFirstStage(unittest.TestCase):

    def mean_F(self, n, replications=20):
        values = []
        for k in range(replications):
            d = build_design(synthetic(n=n, seed=SEED + k), "yv ~ x1 | iv: xe ~ zz")
            values.append(tsls(d, CovSpec('iid')).first_stage_F)
        return float(np.mean(values))

    def test_F_grows_linearly_with_n(self):
        sizes = (500, 1000, 2000)
        slopes = [self.mean_F(n) / n for n in sizes]
        # x = z + u + e: one unit of signal against a residual variance of 2
        for s in slopes:
            self.assertAlmostEqual(s, 0.5, delta=0.06)
        self.assertLess(max(slopes) / min(slopes), 1.15)

    def test_p_uniform_for_irrelevant_instrument(self):
        ps = []
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', WeakInstrumentWarning)
            for k in range(200):
                d = build_design(synthetic(n=200, seed=SEED + k), "yv ~ x1 | iv: xe ~ noise")
                ps.append(tsls(d, CovSpec('iid')).first_stage_p)
        ps = np.array(ps)
        self.assertTrue(((ps >= 0) & (ps <= 1)).all())
        self.assertGreater(stats.kstest(ps, 'uniform').pvalue, 0.05)


class TestSemiElasticity(unittest.TestCase):

    def test_values(self):
        self.assertAlmostEqual(semi_elasticity(-0.011), -1.094, places=3)
        self.assertAlmostEqual(semi_elasticity(-0.972), -62.17, delta=0.01)
        self.assertEqual(semi_elasticity(0.0), 0.0)
        self.assertAlmostEqual(semi_elasticity(-2.378), -90.73, delta=0.01)

    def test_pooled_band_percentages(self):
        for beta, printed in [(-0.382, -31.8), (-0.420, -34.3), (-0.727, -51.9), (-0.925, -60.3),
                               (-0.877, -58.1)]:
            self.assertLess(abs(semi_elasticity(beta) - printed), 0.7)

    def test_small_coefficients(self):
        self.assertAlmostEqual(semi_elasticity(1e-12), 1e-10, delta=1e-20)

    def test_non_finite(self):
        for b in (math.nan, math.inf):
            with self.assertRaises(DraftivError):
                semi_elasticity(b)


if __name__ == '__main__':
    unittest.main()
