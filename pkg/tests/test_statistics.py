import unittest


class TestStatistics(unittest.TestCase):

    def test_confidence_interval_mean_t(self):

        import numpy as np
        import tunemerge as tm

        np.random.seed(42)
        x = np.random.normal(loc=0.8, scale=0.05, size=10)
        l_bound, u_bound = tm.statistics.confidence_interval_mean_t(x, 0.05)
        self.assertLess(l_bound, np.mean(x))
        self.assertGreater(u_bound, np.mean(x))
        wide_low, wide_high = tm.statistics.confidence_interval_mean_t(x, 0.01)
        self.assertLess(wide_low, l_bound)
        self.assertGreater(wide_high, u_bound)

        # bounds never leave the accuracy range
        l_bound, u_bound = tm.statistics.confidence_interval_mean_t([0.0, 1.0, 1.0], 0.05)
        self.assertEqual(l_bound, 0.0)
        self.assertEqual(u_bound, 1.0)

        self.assertEqual(tm.statistics.confidence_interval_mean_t([0.25]), [0.25, 0.25])
        self.assertEqual(tm.statistics.confidence_interval_mean_t(10 * [0.5]), [0.5, 0.5])
        with self.assertRaises(tm.exceptions.EmptyDataError):
            tm.statistics.confidence_interval_mean_t([])

    def test_find_best_solution(self):

        import numpy as np
        import tunemerge as tm

        ta = np.array([0.70, 0.71, 0.72, 0.73, 0.74])
        atm = np.array([0.90, 0.91, 0.92, 0.93, 0.94])
        close = np.array([0.89, 0.92, 0.90, 0.94, 0.91])

        best_idx, best_solutions_idx, pvalues = tm.statistics.find_best_solution([ta, atm, close])
        self.assertEqual(best_idx, 1)
        self.assertEqual(best_solutions_idx, [1, 2])
        self.assertEqual(pvalues[1], 1.0)
        self.assertLess(pvalues[0], 0.05)

        # first maximum wins
        fake_score = np.array(5 * [0.5])
        best_idx, best_solutions_idx, pvalues = tm.statistics.find_best_solution([fake_score, fake_score])
        self.assertEqual(best_idx, 0)
        self.assertEqual(best_solutions_idx, [0, 1])

        with self.assertRaises(tm.exceptions.EmptyDataError):
            tm.statistics.find_best_solution([])

    def test_summarize_seeds(self):

        import tunemerge as tm

        summary = tm.statistics.summarize_seeds({"ta": [0.70, 0.71, 0.72, 0.73, 0.74],
                                                 "pa_atm": [0.90, 0.91, 0.92, 0.93, 0.94],
                                                 "single": [0.5]})
        self.assertEqual(list(summary.columns),
                         ["method", "n_seeds", "mean", "std", "ci_low", "ci_high", "tied_with_best"])
        self.assertEqual(list(summary["method"]), ["ta", "pa_atm", "single"])
        self.assertEqual(list(summary["n_seeds"]), [5, 5, 1])
        self.assertAlmostEqual(summary["mean"][1], 0.92)
        self.assertEqual(summary["std"][2], 0.0)
        # a single seed cannot be separated from the best method
        self.assertEqual(list(summary["tied_with_best"]), [False, True, True])
        self.assertTrue(all(summary["ci_low"] <= summary["mean"]) and all(summary["mean"] <= summary["ci_high"]))
