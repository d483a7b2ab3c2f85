import unittest

SEEDS = [0, 1, 2, 3, 4]


def _default_config(methods):
    import tunemerge as tm

    return tm.experiments.ExperimentConfig.model_validate({"methods": methods, "seeds": SEEDS})


class TestAcceptance(unittest.TestCase):
    """Orderings and trends on the default synthetic suite, averaged over five seeds."""

    def test_lemma_on_random_triples(self):

        import numpy as np
        import tunemerge as tm

        rng = np.random.RandomState(2024)
        for trial in range(50):
            n_inputs, n_classes = int(rng.randint(2, 9)), int(rng.randint(2, 5))
            hidden = tuple(int(width) for width in rng.randint(1, 12, size=rng.randint(0, 3)))
            arch = tm.network.ArchSpec((n_inputs,) + hidden + (n_classes,), str(rng.choice(tm.network.ACTIVATIONS)))
            spec = tm.datasets.SuiteSpec(num_tasks=1, samples_per_task=int(rng.randint(50, 300)),
                                         feature_dim=n_inputs, class_count=n_classes, seed=trial)
            task = tm.datasets.generate_task_suite(spec).tasks[0]
            eta = float(10 ** rng.uniform(-3, 0))
            report = tm.theory.check_task_vector_is_scaled_gradient(tm.network.init_model(arch, seed=trial), task, eta)
            self.assertLessEqual(report.max_norm_residual, 1e-12, msg="trial %d" % trial)

    def test_distribution_sweep_ordering(self):

        import tunemerge as tm

        cfg = _default_config([{"name": "pa_atm", "kind": "pa_atm"}])
        table = tm.experiments.run_distribution_sweep(cfg, 8, [1, 2, 4, 8])
        accuracy = tm.experiments.average_accuracy(table, ("iterations",)).set_index("iterations")["accuracy"]

        for fewer, more in [(1, 2), (2, 4), (4, 8)]:
            self.assertGreaterEqual(accuracy[more], accuracy[fewer] - 0.01)
        self.assertGreaterEqual(accuracy[8] - accuracy[1], 0.02)

    def test_baseline_ordering(self):

        import tunemerge as tm

        cfg = _default_config([{"name": "ta", "kind": "ta"},
                               {"name": "pa_atm", "kind": "pa_atm", "iterations": 10, "epochs_per_iteration": 1},
                               {"name": "ph_atm", "kind": "ph_atm", "iterations": 10, "epochs_per_iteration": 1}])
        table = tm.experiments.run_baseline_comparison(cfg).table
        accuracy = tm.experiments.average_accuracy(table).set_index("method")["accuracy"]

        self.assertGreaterEqual(accuracy["pa_atm"] - accuracy["ta"], 0.02)
        # the ta row is the initialization of ph_atm
        self.assertGreaterEqual(accuracy["ph_atm"] - accuracy["ta"], 0.01)

    def test_baseline_flatness(self):

        import tunemerge as tm

        cfg = _default_config([{"name": "ta", "kind": "ta"}, {"name": "pa_atm", "kind": "pa_atm"}])
        result = tm.experiments.run_budget_sweep(cfg, [2, 4, 10])
        spread = result.flatness.set_index("method")["spread"]
        accuracy = tm.experiments.average_accuracy(result.table, ("method", "budget"))
        pa = accuracy[accuracy["method"] == "pa_atm"].set_index("budget")["accuracy"]

        self.assertLessEqual(spread["ta"], 0.02)
        self.assertGreaterEqual(pa[10] - pa[2], 0.02)
        self.assertGreaterEqual(pa[4], pa[2] - 0.01)
        self.assertGreaterEqual(pa[10], pa[4] - 0.01)
