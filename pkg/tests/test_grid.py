import unittest


class TestGrid(unittest.TestCase):

    def test_generate_run_grid(self):

        import tunemerge as tm

        runs = tm.grid.generate_run_grid(budget=[2, 4, 10], iterations=[1, 2])

        # the last axis varies fastest
        self.assertEqual(len(runs), 6)
        self.assertEqual(runs[0], {"budget": 2, "iterations": 1})
        self.assertEqual(runs[1], {"budget": 2, "iterations": 2})
        self.assertEqual(runs[-1], {"budget": 10, "iterations": 2})
        self.assertEqual([run["budget"] for run in runs], [2, 2, 4, 4, 10, 10])

        self.assertEqual(tm.grid.generate_run_grid(budget=(5,)), [{"budget": 5}])
        self.assertEqual(tm.grid.generate_run_grid(), [{}])

    def test_empty_axis(self):

        import tunemerge as tm

        with self.assertRaises(tm.exceptions.ConfigurationError):
            tm.grid.generate_run_grid(budget=[2], seed=[])
