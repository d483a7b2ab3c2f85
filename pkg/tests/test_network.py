import unittest


class TestNetwork(unittest.TestCase):

    def test_arch_spec(self):

        import tunemerge as tm

        arch = tm.network.ArchSpec((3, 4, 2))
        self.assertEqual(arch.n_params, 3 * 4 + 4 + 4 * 2 + 2)
        self.assertEqual(arch.n_inputs, 3)
        self.assertEqual(arch.n_classes, 2)

        (w1, shape1, b1), (w2, shape2, b2) = arch.layer_slices
        self.assertEqual((w1.start, w1.stop, b1.start, b1.stop), (0, 12, 12, 16))
        self.assertEqual((w2.start, w2.stop, b2.start, b2.stop), (16, 24, 24, 26))
        self.assertEqual(shape2, (4, 2))
        self.assertEqual(arch.layer_blocks, [slice(0, 16), slice(16, 26)])

        for widths in [(3,), (3, 0, 2), (3, 2.5)]:
            with self.assertRaises(tm.exceptions.ConfigurationError):
                tm.network.ArchSpec(widths)
        with self.assertRaises(tm.exceptions.ConfigurationError):
            tm.network.ArchSpec((3, 2), activation="sigmoid")

    def test_derive_seed(self):

        import tunemerge as tm

        seed = tm.network.derive_seed(7, "task0", 1)
        self.assertEqual(seed, tm.network.derive_seed(7, "task0", 1))
        self.assertNotEqual(seed, tm.network.derive_seed(7, "task0", 2))
        self.assertNotEqual(seed, tm.network.derive_seed(8, "task0", 1))
        self.assertTrue(0 <= seed < 2 ** 64)
        # xor with the root seed
        self.assertEqual(tm.network.derive_seed(0, "a") ^ 5, tm.network.derive_seed(5, "a"))

    def test_init_model(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((4, 8, 3))
        model = tm.network.init_model(arch, seed=11)
        again = tm.network.init_model(arch, seed=11)
        other = tm.network.init_model(arch, seed=12)

        np.testing.assert_array_equal(model.params, again.params)
        self.assertFalse(np.array_equal(model.params, other.params))
        for weights, (fan_in, _), bias in arch.layer_slices:
            self.assertTrue(np.all(np.abs(model.params[weights]) <= 1.0 / np.sqrt(fan_in)))
            np.testing.assert_array_equal(model.params[bias], 0.0)
        self.assertEqual(model.label, "init")
        self.assertFalse(model.params.flags.writeable)

        with self.assertRaises(tm.exceptions.ShapeError):
            tm.network.ModelState(arch, np.zeros(arch.n_params + 1))

    def test_loss(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((2, 5, 3))
        batch = tm.network.LabeledBatch(np.random.RandomState(0).normal(size=(10, 2)), np.arange(10) % 3)

        # all-zero parameters give uniform class probabilities
        zero = tm.network.ModelState(arch, np.zeros(arch.n_params))
        self.assertAlmostEqual(tm.network.loss(zero, batch), np.log(3.0), places=12)

        model = tm.network.init_model(arch, seed=3)
        self.assertGreaterEqual(tm.network.loss(model, batch), 0.0)

        empty = tm.network.LabeledBatch(np.zeros((0, 2)), np.zeros(0))
        with self.assertRaises(tm.exceptions.EmptyDataError):
            tm.network.loss(model, empty)
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.network.loss(model, tm.network.LabeledBatch(np.zeros((2, 3)), [0, 1]))
        with self.assertRaises(tm.exceptions.ShapeError):
            tm.network.loss(model, tm.network.LabeledBatch(np.zeros((2, 2)), [0, 3]))

    def test_loss_by_hand(self):

        import math
        import numpy as np
        import tunemerge as tm

        # identity weights: the logits are the features
        identity = tm.network.ModelState(tm.network.ArchSpec((2, 2)), [1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        batch = tm.network.LabeledBatch(np.array([[1.0, 0.0], [0.0, 2.0]]), [0, 0])

        expected = 0.5 * ((math.log(1.0 + math.e) - 1.0) + math.log(1.0 + math.e ** 2))
        self.assertAlmostEqual(tm.network.loss(identity, batch), expected, places=12)

    def test_gradient(self):

        import numpy as np
        import tunemerge as tm

        rng = np.random.RandomState(1)
        for activation in tm.network.ACTIVATIONS:
            arch = tm.network.ArchSpec((3, 6, 4, 3), activation)
            model = tm.network.init_model(arch, seed=5)
            batch = tm.network.LabeledBatch(rng.normal(size=(20, 3)), rng.randint(0, 3, size=20))

            analytic = tm.network.gradient(model, batch)
            numeric = tm.theory.finite_diff_gradient(model, batch, h=1e-5)
            self.assertEqual(analytic.shape, model.params.shape)
            error = np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic)
            self.assertLess(error, 1e-5)

    def test_gradient_of_duplicated_batch(self):

        import numpy as np
        import tunemerge as tm

        rng = np.random.RandomState(6)
        model = tm.network.init_model(tm.network.ArchSpec((3, 4, 3)), seed=2)
        batch = tm.network.LabeledBatch(rng.normal(size=(9, 3)), rng.randint(0, 3, size=9))
        twice = tm.network.LabeledBatch(np.repeat(batch.features, 2, axis=0), np.repeat(batch.labels, 2))

        np.testing.assert_allclose(tm.network.gradient(model, twice), tm.network.gradient(model, batch),
                                   rtol=1e-12, atol=1e-14)

    def test_gradient_at_saturation(self):

        import numpy as np
        import tunemerge as tm

        # every sample is classified with a margin of 40
        confident = tm.network.ModelState(tm.network.ArchSpec((2, 2)), [40.0, 0.0, 0.0, 40.0, 0.0, 0.0])
        batch = tm.network.LabeledBatch(np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]]), [0, 1, 0])

        self.assertLess(tm.network.loss(confident, batch), 1e-12)
        self.assertLessEqual(np.max(np.abs(tm.network.gradient(confident, batch))), 1e-8)

    def test_gd_step(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((2, 2))
        model = tm.network.ModelState(arch, [1.0, 2.0, 3.0, 4.0, 0.5, -0.5], label="base")
        grad = np.array([1.0, 0.0, -1.0, 0.0, 2.0, 0.0])

        step = tm.network.gd_step(model, grad, 0.5)
        np.testing.assert_array_equal(step.params, [0.5, 2.0, 3.5, 4.0, -0.5, -0.5])
        self.assertEqual(step.label, "base")
        np.testing.assert_array_equal(tm.network.gd_step(model, grad, 0.0).params, model.params)

        with self.assertRaises(tm.exceptions.ShapeError):
            tm.network.gd_step(model, np.zeros(5), 0.1)
        with self.assertRaises(tm.exceptions.ConfigurationError):
            tm.network.gd_step(model, grad, -0.1)
        with self.assertRaises(tm.exceptions.ConfigurationError):
            tm.network.gd_step(model, grad, float("nan"))

    def test_finetune(self):

        import numpy as np
        import tunemerge as tm

        rng = np.random.RandomState(2)
        batch = tm.network.LabeledBatch(rng.normal(size=(40, 3)), rng.randint(0, 2, size=40))
        model = tm.network.init_model(tm.network.ArchSpec((3, 5, 2)), seed=0)

        self.assertIs(tm.network.finetune(model, batch, tm.network.TrainConfig(epochs=0)), model)

        one_step = tm.network.finetune(model, batch, tm.network.TrainConfig(epochs=1, learning_rate=0.3))
        expected = tm.network.gd_step(model, tm.network.gradient(model, batch), 0.3)
        np.testing.assert_array_equal(one_step.params, expected.params)

        two_epochs = tm.network.finetune(model, batch, tm.network.TrainConfig(epochs=2, learning_rate=0.3))
        chained = tm.network.finetune(one_step, batch, tm.network.TrainConfig(epochs=1, learning_rate=0.3))
        np.testing.assert_array_equal(two_epochs.params, chained.params)

        cfg = tm.network.TrainConfig(epochs=3, learning_rate=0.1, batch_size=8, seed=4, shuffle=True)
        first = tm.network.finetune(model, batch, cfg)
        second = tm.network.finetune(model, batch, cfg)
        np.testing.assert_array_equal(first.params, second.params)

        reseeded = tm.network.TrainConfig(epochs=3, learning_rate=0.1, batch_size=8, seed=5, shuffle=True)
        self.assertFalse(np.array_equal(first.params, tm.network.finetune(model, batch, reseeded).params))

        # without shuffling the seed is irrelevant
        ordered = [tm.network.TrainConfig(epochs=2, learning_rate=0.1, batch_size=7, seed=seed) for seed in (1, 2)]
        np.testing.assert_array_equal(tm.network.finetune(model, batch, ordered[0]).params,
                                      tm.network.finetune(model, batch, ordered[1]).params)

        with self.assertRaises(tm.exceptions.EmptyDataError):
            tm.network.finetune(model, tm.network.LabeledBatch(np.zeros((0, 3)), np.zeros(0)), cfg)

    def test_train_config(self):

        import tunemerge as tm

        self.assertTrue(tm.network.TrainConfig().is_lemma_regime)
        self.assertFalse(tm.network.TrainConfig(epochs=2).is_lemma_regime)
        self.assertFalse(tm.network.TrainConfig(batch_size=16).is_full_batch)
        for kwargs in [{"epochs": -1}, {"learning_rate": 0.0}, {"batch_size": 0}]:
            with self.assertRaises(tm.exceptions.ConfigurationError):
                tm.network.TrainConfig(**kwargs)

    def test_predict_and_accuracy(self):

        import numpy as np
        import tunemerge as tm

        arch = tm.network.ArchSpec((2, 2))
        identity = tm.network.ModelState(arch, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        features = np.array([[3.0, 1.0], [0.0, 2.0], [1.0, 1.0]])

        # ties go to the lowest class
        np.testing.assert_array_equal(tm.network.predict(identity, features), [0, 1, 0])
        batch = tm.network.LabeledBatch(features, [0, 1, 1])
        self.assertAlmostEqual(tm.network.evaluate_accuracy(identity, batch), 2.0 / 3.0)

        self.assertEqual(tm.network.evaluate_accuracy(identity, tm.network.LabeledBatch(features, [0, 1, 0])), 1.0)
        self.assertEqual(tm.network.evaluate_accuracy(identity, tm.network.LabeledBatch(features, [1, 0, 1])), 0.0)
