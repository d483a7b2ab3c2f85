import unittest


class TestTaskVectors(unittest.TestCase):

    def test_compute_and_apply(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((2, 2))
        # dyadic values: every difference and sum below is exact
        base = tm.network.ModelState(arch, [0.5, 1.0, -2.0, 0.25, 0.0, 4.0])
        finetuned = tm.network.ModelState(arch, [0.75, 1.0, -1.5, 0.0, 0.125, 3.0])

        tau = tm.task_vectors.compute_task_vector(finetuned, base, "a", 3)
        np.testing.assert_array_equal(tau.delta, [0.25, 0.0, 0.5, -0.25, 0.125, -1.0])
        self.assertEqual((tau.task_id, tau.iteration), ("a", 3))
        self.assertAlmostEqual(tau.norm, np.linalg.norm(tau.delta))

        mtv = tm.task_vectors.aggregate_mean([tau])
        restored = tm.task_vectors.apply(base, mtv, 1.0)
        np.testing.assert_array_equal(restored.params, finetuned.params)
        np.testing.assert_array_equal(tm.task_vectors.apply(base, mtv, 0.0).params, base.params)
        self.assertEqual(tm.task_vectors.apply(base, mtv, 1.0, label="next").label, "next")

    def test_round_trip_random(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((3, 4, 2))
        base = tm.network.init_model(arch, seed=1)
        finetuned = tm.network.init_model(arch, seed=2)
        tau = tm.task_vectors.compute_task_vector(finetuned, base)
        restored = tm.task_vectors.apply(base, tm.task_vectors.aggregate_mean([tau]), 1.0)
        np.testing.assert_allclose(restored.params, finetuned.params, rtol=0, atol=1e-15)

    def test_mismatched_architectures(self):

        import numpy as np
        import tunemerge as tm

        small = tm.network.init_model(tm.network.ArchSpec((2, 2)), seed=0)
        large = tm.network.init_model(tm.network.ArchSpec((2, 3, 2)), seed=0)
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.task_vectors.compute_task_vector(small, large)

        tau = tm.task_vectors.compute_task_vector(large, large, "a")
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.task_vectors.apply(small, tm.task_vectors.aggregate_mean([tau]), 1.0)
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.task_vectors.TaskVector(np.zeros(3), "a", 0, small.arch)

    def test_aggregate_mean(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((1, 1))
        a = tm.task_vectors.TaskVector([1.0, 2.0], "a", 0, arch)
        b = tm.task_vectors.TaskVector([3.0, -2.0], "b", 0, arch)

        mtv = tm.task_vectors.aggregate_mean([b, a])
        np.testing.assert_array_equal(mtv.delta, [2.0, 0.0])
        self.assertEqual(mtv.contributing_tasks, ("a", "b"))
        self.assertEqual(mtv.aggregator_name, "mean")

        # identical vectors average to themselves
        twin = tm.task_vectors.TaskVector([1.0, 2.0], "c", 0, arch)
        np.testing.assert_array_equal(tm.task_vectors.aggregate_mean([a, twin]).delta, a.delta)

        with self.assertRaises(tm.exceptions.EmptyDataError):
            tm.task_vectors.aggregate_mean([])
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.task_vectors.aggregate_mean([a, tm.task_vectors.TaskVector([0.0, 0.0], "b", 1, arch)])
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.task_vectors.aggregate_mean([a, a])

    def test_order_independence(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((4, 3))
        rng = np.random.RandomState(0)
        vectors = [tm.task_vectors.TaskVector(rng.normal(size=arch.n_params), "task%d" % i, 0, arch)
                   for i in range(5)]

        forward = tm.task_vectors.aggregate_mean(vectors)
        backward = tm.task_vectors.aggregate_mean(vectors[::-1])
        np.testing.assert_array_equal(forward.delta, backward.delta)
