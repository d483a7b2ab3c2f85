import unittest


def _write_config(directory, **overrides):
    import json
    import os

    settings = {
        "suite": {"num_tasks": 2, "samples_per_task": 120, "feature_dim": 4, "class_count": 3},
        "arch": {"hidden": [6]},
        "train": {"learning_rate": 0.1, "batch_size": 16},
        "pretrain": {"epochs": 1, "samples": 200},
        "methods": [{"name": "ta", "kind": "ta"}, {"name": "pa_atm", "kind": "pa_atm"}],
        "budget_epochs": 2,
    }
    settings.update(overrides)
    path = os.path.join(directory, "experiment.json")
    with open(path, "w") as file:
        json.dump(settings, file)
    return path


def _read_bytes(path):
    with open(path, "rb") as file:
        return file.read()


def _header(path):
    return _read_bytes(path).split(b"\n")[0].decode().split(",")


class TestCli(unittest.TestCase):

    def test_atm_run_is_deterministic(self):

        import os
        import tempfile
        import tunemerge as tm

        with tempfile.TemporaryDirectory() as tmp:
            config = _write_config(tmp)
            first, second = os.path.join(tmp, "first"), os.path.join(tmp, "second")
            for out in (first, second):
                code = tm.cli.cli_entry(["atm", "run", "--config", config, "--out", out, "--seed", "5", "--quiet"])
                self.assertEqual(code, 0)

            for name in ("comparison.csv", "iterations.csv", "summary.csv", "pa_atm_seed5.ckpt"):
                self.assertEqual(_read_bytes(os.path.join(first, name)), _read_bytes(os.path.join(second, name)))
            self.assertEqual(_header(os.path.join(first, "comparison.csv")), tm.config.REPORT_COLUMNS)
            for name in ("iterations.csv", "summary.csv"):
                self.assertIn("config_hash", _header(os.path.join(first, name)), name)

            code = tm.cli.cli_entry(["atm", "run", "--config", config, "--out", first, "--seed", "5",
                                     "--format", "json", "--quiet"])
            self.assertEqual(code, 0)
            self.assertTrue(os.path.isfile(os.path.join(first, "comparison.json")))

    def test_pipeline(self):

        import os
        import tempfile
        import numpy as np
        import tunemerge as tm

        with tempfile.TemporaryDirectory() as tmp:
            config = _write_config(tmp)
            common = ["--config", config, "--out", tmp, "--quiet"]

            self.assertEqual(tm.cli.cli_entry(["suite", "gen"] + common), 0)
            suite = tm.checkpoint.load_suite(os.path.join(tmp, "suite.bin"))
            self.assertEqual(suite.task_ids, ("task0", "task1"))

            self.assertEqual(tm.cli.cli_entry(["pretrain"] + common), 0)
            base_path = os.path.join(tmp, "pretrained.ckpt")
            base = tm.checkpoint.load_checkpoint(base_path)
            self.assertEqual(base.label, "pretrained")

            self.assertEqual(tm.cli.cli_entry(["finetune", "--base", base_path, "--task", "task1"] + common), 0)
            self.assertFalse(os.path.exists(os.path.join(tmp, "finetuned_task0.ckpt")))
            self.assertEqual(tm.cli.cli_entry(["finetune", "--base", base_path, "--epochs", "1"] + common), 0)
            models = [os.path.join(tmp, "finetuned_task%d.ckpt" % index) for index in range(2)]
            self.assertEqual(tm.checkpoint.load_checkpoint(models[1]).label, "finetuned:task1")
            self.assertEqual(tm.cli.cli_entry(["finetune", "--base", base_path, "--task", "task9"] + common), 1)

            self.assertEqual(tm.cli.cli_entry(["merge", "--base", base_path, "--models"] + models + common), 0)
            merged = tm.checkpoint.load_checkpoint(os.path.join(tmp, "merged.ckpt"))
            vectors = [tm.task_vectors.compute_task_vector(tm.checkpoint.load_checkpoint(path), base, "%04d" % index)
                       for index, path in enumerate(models)]
            np.testing.assert_array_equal(merged.params,
                                          tm.merging.merge_task_arithmetic(base, vectors, 0.4).params)

            self.assertEqual(tm.cli.cli_entry(["merge", "--base", base_path, "--models"] + models + common
                                              + ["--aggregator", "ties", "--alpha", "1.0", "--name", "ties"]), 0)
            self.assertTrue(os.path.isfile(os.path.join(tmp, "ties.ckpt")))

            self.assertEqual(tm.cli.cli_entry(["eval", "--model", os.path.join(tmp, "merged.ckpt"),
                                               "--split", "val"] + common), 0)
            lines = _read_bytes(os.path.join(tmp, "eval.csv")).decode().strip().split("\n")
            self.assertEqual(len(lines), 1 + 3)
            self.assertTrue(lines[1].startswith("merged:sum_ta,task0,val,"))
            self.assertTrue(lines[3].startswith("merged:sum_ta,average,val,"))

    def test_check_lemma(self):

        import contextlib
        import io
        import json
        import os
        import tempfile
        import tunemerge as tm

        with tempfile.TemporaryDirectory() as tmp:
            config = _write_config(tmp)
            common = ["--config", config, "--out", tmp, "--quiet"]

            stdout = io.StringIO()
            with contextlib.redirect_stdout(stdout):
                self.assertEqual(tm.cli.cli_entry(["check", "lemma"] + common), 0)
            report = json.loads(stdout.getvalue())
            self.assertTrue(report["passed"])
            self.assertLessEqual(report["max_norm_residual"], 1e-12)
            self.assertEqual(report["regime"], "full_batch_1epoch")
            self.assertEqual(report["config_hash"],
                             tm.experiments.config_hash(tm.experiments.load_config(config)))
            with open(os.path.join(tmp, "lemma.json")) as file:
                self.assertEqual(json.load(file), report)

            with contextlib.redirect_stdout(io.StringIO()):
                self.assertEqual(tm.cli.cli_entry(["check", "lemma", "--multitask"] + common), 0)
                # outside the full-batch regime a residual is reported, not a failure
                self.assertEqual(tm.cli.cli_entry(["check", "lemma", "--regime", "multi_epoch", "--epochs", "3"]
                                                  + common), 0)
            with open(os.path.join(tmp, "lemma.json")) as file:
                report = json.load(file)
            self.assertEqual(report["regime"], "multi_epoch")
            self.assertFalse(report["passed"])

    def test_sweeps(self):

        import os
        import tempfile
        import tunemerge as tm

        with tempfile.TemporaryDirectory() as tmp:
            config = _write_config(tmp)
            common = ["--config", config, "--out", tmp, "--quiet"]

            self.assertEqual(tm.cli.cli_entry(["sweep", "budget", "--budgets", "1", "2"] + common), 0)
            for name in ("budget_sweep", "budget_iterations", "budget_flatness", "budget_summary"):
                self.assertIn("config_hash", _header(os.path.join(tmp, name + ".csv")), name)

            self.assertEqual(tm.cli.cli_entry(["sweep", "distribution", "--total", "2", "--iterations", "1", "2"]
                                              + common), 0)
            for name in ("distribution_sweep", "distribution_summary"):
                self.assertIn("config_hash", _header(os.path.join(tmp, name + ".csv")), name)

            self.assertEqual(tm.cli.cli_entry(["sweep", "distribution", "--total", "10", "--iterations", "4"]
                                              + common), 1)

    def test_exit_codes(self):

        import contextlib
        import io
        import os
        import tempfile
        import tunemerge as tm

        with tempfile.TemporaryDirectory() as tmp:
            with contextlib.redirect_stderr(io.StringIO()):
                self.assertEqual(tm.cli.cli_entry([]), 1)
                self.assertEqual(tm.cli.cli_entry(["fly"]), 1)
                self.assertEqual(tm.cli.cli_entry(["atm", "run", "--format", "xml"]), 1)
                self.assertEqual(tm.cli.cli_entry(["atm", "run", "--config", os.path.join(tmp, "missing.json"),
                                                   "--quiet"]), 1)

            config = _write_config(tmp)
            corrupted = os.path.join(tmp, "corrupted.ckpt")
            with open(corrupted, "wb") as file:
                file.write(b"ATMCKPT1\x01")
            with contextlib.redirect_stderr(io.StringIO()):
                self.assertEqual(tm.cli.cli_entry(["eval", "--model", corrupted, "--config", config, "--out", tmp,
                                                   "--quiet"]), 2)
                self.assertEqual(tm.cli.cli_entry(["eval", "--model", os.path.join(tmp, "missing.ckpt"),
                                                   "--config", config, "--out", tmp, "--quiet"]), 2)
