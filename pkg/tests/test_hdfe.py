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
import sys
if __name__ == '__main__':
    sys.path.append('..')
    sys.path.append('.')

import numpy as np
import pandas as pd

from draftiv.utils import settings, ConvergenceError, CollinearityError, FormulaError, EmptySampleError
from draftiv.hdfe import (make_factor, within_transform, absorbed_dof, group_means, parse_formula,
                          build_outcome, build_design, OutcomeSpec)
from draftiv.simulate import DgpConfig, simulate_panel
from draftiv.instruments import attach_instruments

SEED = 1337


def dummies(factor):
    D = np.zeros((len(factor), factor.levels))
    D[np.arange(len(factor)), factor.codes] = 1.0
    return D


def dummy_residuals(X, factors):
    D = np.column_stack([dummies(f) for f in factors])
    coef, _, _, _ = np.linalg.lstsq(D, X, rcond=None)
    return X - D @ coef


class TestWithinTransform(unittest.TestCase):

    def test_matches_dummy_regression(self):
        rng = np.random.default_rng(SEED)
        for _ in range(50):
            n = int(rng.integers(20, 501))
            factors = [make_factor(rng.integers(0, int(rng.integers(2, 30)), n), 'f{}'.format(i))
                       for i in range(int(rng.integers(1, 4)))]
            X = rng.normal(size=(n, 3))
            W, _ = within_transform(X, factors, tol=1e-13, max_iter=100000)
            self.assertTrue(np.allclose(W, dummy_residuals(X, factors), atol=1e-6))

    def test_two_factor_panel(self):
        rng = np.random.default_rng(SEED)
        athletes = make_factor(rng.integers(0, 40, 200), 'athlete')
        events = make_factor(rng.integers(0, 12, 200), 'event')
        y = rng.normal(size=200)
        w, iterations = within_transform(y, [athletes, events], tol=1e-13)
        self.assertEqual(w.shape, (200,))
        self.assertGreater(iterations, 1)
        self.assertTrue(np.allclose(w, dummy_residuals(y[:, None], [athletes, events])[:, 0], atol=1e-6))

    def test_single_factor_is_one_pass(self):
        f = make_factor(['a', 'b', 'a', 'c', 'b', 'a'])
        X = np.arange(12.0).reshape(6, 2)
        W, iterations = within_transform(X, [f])
        self.assertEqual(iterations, 1)
        self.assertTrue(np.allclose(group_means(W, f), 0))

    def test_constant_column_vanishes(self):
        rng = np.random.default_rng(SEED)
        factors = [make_factor(rng.integers(0, 5, 80)), make_factor(rng.integers(0, 7, 80))]
        W, _ = within_transform(np.full((80, 1), 3.5), factors)
        self.assertTrue(np.allclose(W, 0, atol=1e-12))

    def test_idempotent(self):
        rng = np.random.default_rng(SEED)
        factors = [make_factor(rng.integers(0, 6, 100)), make_factor(rng.integers(0, 9, 100))]
        W, _ = within_transform(rng.normal(size=(100, 2)), factors, tol=1e-12)
        W2, iterations = within_transform(W, factors, tol=1e-10)
        self.assertEqual(iterations, 1)
        self.assertTrue(np.allclose(W, W2, atol=1e-10))

    def test_group_means_are_zero(self):
        rng = np.random.default_rng(SEED)
        factors = [make_factor(rng.integers(0, 10, 300)), make_factor(rng.integers(0, 4, 300)),
                   make_factor(rng.integers(0, 3, 300))]
        W, _ = within_transform(rng.normal(size=(300, 2)), factors, tol=1e-12)
        for f in factors:
            self.assertLess(np.abs(group_means(W, f)).max(), 1e-10)

    def test_no_factors_is_identity(self):
        X = np.arange(6.0).reshape(3, 2)
        W, iterations = within_transform(X, [])
        self.assertEqual(iterations, 0)
        self.assertTrue(np.array_equal(W, X))

    def test_convergence_error_names_column(self):
        rng = np.random.default_rng(SEED)
        factors = [make_factor(rng.integers(0, 20, 200)), make_factor(rng.integers(0, 20, 200))]
        X = rng.normal(size=(200, 2))
        X[:, 1] *= 1000
        with self.assertRaises(ConvergenceError) as cm:
            within_transform(X, factors, tol=1e-14, max_iter=1, names=['small', 'large'])
        self.assertEqual(cm.exception.column, 'large')
        self.assertEqual(cm.exception.iterations, 1)
        self.assertIn('large', str(cm.exception))

    def test_missing_factor_values(self):
        with self.assertRaises(ValueError):
            make_factor(['a', None, 'b'], 'event')


class TestAbsorbedDof(unittest.TestCase):

    def test_connected(self):
        a = make_factor(['a1', 'a1', 'a2', 'a2', 'a3', 'a3'])
        e = make_factor(['e1', 'e2', 'e1', 'e2', 'e1', 'e2'])
        self.assertEqual(absorbed_dof([a, e]), 3 + 2 - 1)

    def test_disconnected(self):
        a = make_factor(['a1', 'a2', 'a3', 'a4'])
        e = make_factor(['e1', 'e2', 'e1', 'e2'])
        self.assertEqual(absorbed_dof([a, e]), 4 + 2 - 2)
        a = make_factor(['a1', 'a1', 'a2', 'a2'])
        e = make_factor(['e1', 'e1', 'e2', 'e2'])
        self.assertEqual(absorbed_dof([a, e]), 2)

    def test_equals_dummy_rank(self):
        rng = np.random.default_rng(SEED)
        for _ in range(30):
            n = int(rng.integers(5, 60))
            a = make_factor(rng.integers(0, 15, n))
            e = make_factor(rng.integers(0, 8, n))
            rank = np.linalg.matrix_rank(np.column_stack([dummies(a), dummies(e)]))
            self.assertEqual(absorbed_dof([a, e]), rank)

    def test_one_and_three_factors(self):
        a = make_factor(['x', 'y', 'z', 'x'])
        self.assertEqual(absorbed_dof([a]), 3)
        self.assertEqual(absorbed_dof([]), 0)
        b = make_factor(['u', 'u', 'v', 'v'])
        c = make_factor(['p', 'q', 'p', 'q'])
        self.assertEqual(absorbed_dof([a, b, c]), absorbed_dof([a, b]) + 1)


def outcome_panel():
    return pd.DataFrame({'event_id': ['E1', 'E1', 'E1', 'E2', 'E2', 'E2'],
                         'rank': [1.0, 2.0, 3.0, 100.0, 300.0, float('nan')]})


class TestOutcome(unittest.TestCase):

    def test_log_rank_plus_one(self):
        y, audit = build_outcome(outcome_panel(), OutcomeSpec())
        self.assertEqual(len(y), 5)
        self.assertAlmostEqual(y.iloc[0], math.log(2))
        self.assertEqual(audit.counts['missing_outcome'], 1)
        self.assertTrue(audit.conserved())

    def test_centered_drops_nonpositive_argument(self):
        y, audit = build_outcome(outcome_panel().iloc[:3], OutcomeSpec('centered_log', shift_c=1.0))
        # event mean 2: arguments 0, 1, 2
        self.assertEqual(list(y.index), [1, 2])
        self.assertAlmostEqual(y.loc[1], 0.0)
        self.assertAlmostEqual(y.loc[2], math.log(2))
        self.assertEqual(audit.counts['undefined_outcome'], 1)

    def test_centered_shift(self):
        y, _ = build_outcome(outcome_panel().iloc[:3], OutcomeSpec('centered_log', shift_c=3.0))
        self.assertEqual(len(y), 3)
        self.assertAlmostEqual(y.iloc[0], math.log(2))

    def test_rank_cap(self):
        y, audit = build_outcome(outcome_panel(), OutcomeSpec(rank_cap=250))
        self.assertNotIn(4, y.index)
        self.assertEqual(audit.counts['rank_cap'], 1)
        self.assertTrue(audit.conserved())

    def test_centered_mean_uses_capped_rows(self):
        y, _ = build_outcome(outcome_panel().iloc[3:5], OutcomeSpec('centered_log', shift_c=150.0, rank_cap=250))
        # mean over 100 and 300 is 200
        self.assertAlmostEqual(y.iloc[0], math.log(50))

    def test_level_outcome(self):
        panel = outcome_panel().assign(total_s=[1.0, 2.0, None, 4.0, 5.0, 6.0])
        y, audit = build_outcome(panel, OutcomeSpec('level', column='total_s'))
        self.assertEqual(len(y), 5)
        self.assertEqual(audit.counts['missing_outcome'], 1)

    def test_empty_sample(self):
        panel = pd.DataFrame({'event_id': ['E1'], 'rank': [float('nan')]})
        with self.assertRaises(EmptySampleError):
            build_outcome(panel, OutcomeSpec())


class TestFormula(unittest.TestCase):

    def test_full_formula(self):
        spec = parse_formula("log_rank ~ age + age_sq + leader + pre:drafter | fe: athlete event "
                             "| cluster: event | iv: D ~ Z | filter: groupsize<10, poscap=5")
        self.assertEqual([t.name for t in spec.exog], ['age', 'age_sq', 'leader', 'pre:drafter'])
        self.assertTrue(spec.exog[3].is_interaction)
        self.assertEqual(spec.endog, 'D')
        self.assertEqual(spec.instruments, ('Z',))
        self.assertEqual(spec.absorb, ('athlete', 'event'))
        self.assertEqual(spec.cluster, ('event',))
        self.assertEqual(spec.filters.group_size, ('<10',))
        self.assertEqual(spec.filters.position_cap, 5)
        self.assertEqual(spec.outcome.mode, 'log_rank_plus1')
        self.assertTrue(spec.is_iv)

    def test_outcome_modes(self):
        self.assertEqual(parse_formula("centered_log_rank ~ age | opt: shift=2").outcome,
                         OutcomeSpec('centered_log', shift_c=2.0))
        spec = parse_formula("total_s ~ age")
        self.assertEqual((spec.outcome.mode, spec.outcome.column), ('level', 'total_s'))
        self.assertEqual(parse_formula("log_rank ~ age | filter: rankcap=250").outcome.rank_cap, 250)

    def test_noleader(self):
        spec = parse_formula("log_rank ~ leader + age + leader:male | filter: noleader")
        self.assertEqual([t.name for t in spec.exog], ['age'])
        self.assertFalse(spec.filters.leader)

    def test_bands_and_periods(self):
        spec = parse_formula("log_rank ~ | iv: treat ~ Z | filter: bands=1-2:3-4, period=Covid, allperiods")
        self.assertEqual(spec.filters.bands.label, '1-2 vs 3-4')
        self.assertEqual(spec.filters.period, 'Covid')
        self.assertTrue(spec.filters.all_periods)
        self.assertEqual(spec.exog, ())

    def test_comments(self):
        spec = parse_formula("log_rank ~ age  # ages\n | fe: event")
        self.assertEqual(spec.absorb, ('event',))

    def error(self, text):
        with self.assertRaises(FormulaError) as cm:
            parse_formula(text)
        return cm.exception

    def test_error_positions(self):
        e = self.error("log_rank ~ age |\n fe: athlete city")
        self.assertEqual((e.line, e.column), (2, 14))
        e = self.error("log_rank ~ age | foo: bar")
        self.assertEqual((e.line, e.column), (1, 18))
        e = self.error("log_rank ~ age + + male")
        self.assertEqual(e.line, 1)

    def test_errors(self):
        for text in ["", "log_rank", "log_rank ~ age:male:leader", "log_rank ~ age + age",
                     "log_rank ~ age | fe: event | fe: athlete", "log_rank ~ | iv: D ~",
                     "log_rank ~ D | iv: D ~ Z", "log_rank ~ age | cluster: a b c",
                     "log_rank ~ age | filter: poscap=0", "log_rank ~ age | filter: bands=1-3:3-4",
                     "log_rank ~ age | filter: period=Later", "log_rank ~ age | opt: gamma=-1",
                     "log_rank ~ age | iv: D ~ Z:male", "log_rank ~ age | filter: whatever"]:
            self.error(text)

    def test_columns(self):
        spec = parse_formula("total_s ~ age + pre:leader | iv: D ~ Z + Z_loo")
        self.assertEqual(spec.columns(), ['age', 'pre', 'leader', 'D', 'Z', 'Z_loo', 'total_s'])


class TestDesign(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        panel, _ = simulate_panel(DgpConfig(n_athletes=60, n_events=10, seed=SEED))
        cls.panel = attach_instruments(panel)

    def test_intercept_without_absorption(self):
        d = build_design(self.panel, "log_rank ~ age + leader")
        self.assertEqual(d.exog_names, ['(Intercept)', 'age', 'leader'])
        self.assertTrue(np.all(d.exog[:, 0] == 1))
        self.assertIsNone(d.endog)
        d = build_design(self.panel, "log_rank ~ age + leader | fe: athlete event")
        self.assertEqual(d.exog_names, ['age', 'leader'])
        self.assertEqual([f.name for f in d.absorb], ['athlete', 'event'])

    def test_interaction_values(self):
        d = build_design(self.panel, "log_rank ~ pre:drafter | fe: event")
        expected = (self.panel['pre'] * self.panel['drafter']).to_numpy().astype(float)
        self.assertTrue(np.array_equal(d.exog[:, 0], expected))

    def test_missing_instrument_rows_are_dropped(self):
        d = build_design(self.panel, "log_rank ~ age | fe: athlete event | iv: D ~ Z")
        missing = int(self.panel['Z'].isna().sum())
        self.assertEqual(d.audit.counts['missing_instrument'], missing)
        self.assertEqual(d.n, len(self.panel) - missing)
        self.assertFalse(np.isnan(d.instruments).any())
        self.assertTrue(np.array_equal(d.endog, d.frame['position'].to_numpy().astype(float)))

    def test_audit_is_conserved(self):
        d = build_design(self.panel, "log_rank ~ age | fe: event | iv: D ~ Z | filter: groupsize<10, groupsize>1")
        self.assertTrue(d.audit.conserved())
        self.assertEqual(d.audit.rows_in, len(self.panel))
        self.assertEqual(d.audit.counts['output'], d.n)

    def test_band_filter(self):
        d = build_design(self.panel, "log_rank ~ | fe: event | iv: treat ~ Z | filter: bands=1-2:3-4")
        self.assertTrue(set(np.unique(d.endog)) <= {0.0, 1.0})
        self.assertTrue(d.frame['position'].between(1, 4).all())

    def test_group_key(self):
        d = build_design(self.panel, "log_rank ~ age | fe: group")
        with settings.override(group_key='event_group'):
            d2 = build_design(self.panel, "log_rank ~ age | fe: group")
        self.assertGreater(d2.absorb[0].levels, d.absorb[0].levels)

    def test_duplicate_columns(self):
        panel = self.panel.assign(age_copy=self.panel['age'])
        with self.assertRaises(CollinearityError) as cm:
            build_design(panel, "log_rank ~ age + age_copy | fe: event")
        self.assertEqual(cm.exception.columns, ['age', 'age_copy'])

    def test_identity_instrument_is_allowed(self):
        d = build_design(self.panel, "log_rank ~ age | fe: event | iv: D ~ position")
        self.assertTrue(np.array_equal(d.endog, d.instruments[:, 0]))


if __name__ == '__main__':
    unittest.main()
