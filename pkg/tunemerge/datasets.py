# -*- coding: utf-8 -*-
#
# Copyright 2019 Pietro Barbiero and Giovanni Squillero
#
# Licensed under the Apache License, Version 2.0 (the "License"); you may not
# use this file except in compliance with the License.
# You may obtain a copy of the License at:
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#
# See the License for the specific language governing permissions and
# limitations under the License.

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy.linalg import expm
from sklearn.model_selection import train_test_split

from .config import (DEFAULT_CLASS_COUNT, DEFAULT_DIFFICULTY, DEFAULT_FEATURE_DIM, DEFAULT_HETEROGENEITY,
                     DEFAULT_NUM_TASKS, DEFAULT_SAMPLES_PER_TASK, DEFAULT_TEST_FRACTION, DEFAULT_VAL_FRACTION)
from .exceptions import ConfigurationError, EmptyDataError, ShapeError
from .network import LabeledBatch, derive_seed, make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuiteSpec:
    """
    Recipe of a synthetic multi-task classification suite.

    Every task is a mixture of isotropic unit-variance Gaussians, one per class.
    The class centroids of all tasks come from a shared template whose radius
    shrinks as ``difficulty`` grows; each task rotates and shifts the template by
    an amount proportional to ``heterogeneity``, so that tasks disagree on where
    each class lives and their gradients conflict.

    Attributes
    ----------
    num_tasks
        Number of tasks
    samples_per_task
        Samples drawn for each task, before the test/train/validation carving
    feature_dim
        Feature dimensionality shared by all tasks
    class_count
        Number of classes of every task
    difficulty
        Value in (0, 1]; higher means closer centroids
    heterogeneity
        Non-negative; 0 makes every task an i.i.d. draw of the same distribution
    seed
        Suite seed
    val_fraction
        Fraction of the training pool carved out as validation split
    test_fraction
        Fraction of the samples held out as test split
    """
    num_tasks: int = DEFAULT_NUM_TASKS
    samples_per_task: int = DEFAULT_SAMPLES_PER_TASK
    feature_dim: int = DEFAULT_FEATURE_DIM
    class_count: int = DEFAULT_CLASS_COUNT
    difficulty: float = DEFAULT_DIFFICULTY
    heterogeneity: float = DEFAULT_HETEROGENEITY
    seed: int = 0
    val_fraction: float = DEFAULT_VAL_FRACTION
    test_fraction: float = DEFAULT_TEST_FRACTION

    def __post_init__(self):
        for name in ("num_tasks", "samples_per_task", "feature_dim", "class_count"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigurationError("%s must be a positive integer, got %r" % (name, value))
        if self.class_count < 2:
            raise ConfigurationError("a classification task needs at least 2 classes")
        if not 0.0 < self.difficulty <= 1.0:
            raise ConfigurationError("difficulty must lie in (0, 1], got %r" % (self.difficulty,))
        if not (np.isfinite(self.heterogeneity) and self.heterogeneity >= 0.0):
            raise ConfigurationError("heterogeneity must be a non-negative real, got %r" % (self.heterogeneity,))
        for name in ("val_fraction", "test_fraction"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigurationError("%s must lie in (0, 1), got %r" % (name, getattr(self, name)))

    @property
    def centroid_radius(self) -> float:
        return 4.0 * (1.0 - self.difficulty) + 0.5


@dataclass(frozen=True, eq=False)
class TaskData:
    """
    The three splits of one classification task.

    Attributes
    ----------
    task_id
        Unique identifier inside its suite
    train
        Training split
    val
        Validation split, carved from the training pool
    test
        Held-out test split
    class_count
        Number of classes
    centroids
        Class centroids of the generating mixture, when known
    """
    task_id: str
    train: LabeledBatch
    val: LabeledBatch
    test: LabeledBatch
    class_count: int
    centroids: Optional[np.ndarray] = field(default=None, repr=False)

    def split(self, name: str) -> LabeledBatch:
        if name not in ("train", "val", "test"):
            raise ConfigurationError("unknown split '%s'" % name)
        return getattr(self, name)


@dataclass(frozen=True, eq=False)
class TaskSuite:
    """Ordered collection of tasks sharing the feature space."""
    tasks: Tuple[TaskData, ...]
    feature_dim: int
    suite_seed: int = 0
    spec: Optional[SuiteSpec] = None

    def __post_init__(self):
        tasks = tuple(self.tasks)
        if not tasks:
            raise EmptyDataError("a task suite needs at least one task")
        task_ids = [task.task_id for task in tasks]
        if len(set(task_ids)) != len(task_ids):
            raise ShapeError("task identifiers must be unique, got %s" % task_ids)
        for task in tasks:
            for name in ("train", "val", "test"):
                batch = task.split(name)
                if len(batch) and batch.n_features != self.feature_dim:
                    raise ShapeError("task %s split %s has %d features, expected %d"
                                     % (task.task_id, name, batch.n_features, self.feature_dim))
        object.__setattr__(self, "tasks", tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[TaskData]:
        return iter(self.tasks)

    @property
    def task_ids(self) -> Tuple[str, ...]:
        return tuple(task.task_id for task in self.tasks)

    @property
    def class_count(self) -> int:
        return max(task.class_count for task in self.tasks)

    def pooled(self, split: str = "train") -> LabeledBatch:
        """Concatenation of one split across all tasks (centralized training only)."""
        batches = [task.split(split) for task in self.tasks]
        return LabeledBatch(np.concatenate([batch.features for batch in batches]),
                            np.concatenate([batch.labels for batch in batches]))


def _shuffled_carve(n_samples: int, n_carved: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    random_state = np.random.RandomState(np.random.Philox(seed))
    kept, carved = train_test_split(np.arange(n_samples), test_size=n_carved, random_state=random_state)
    return np.sort(kept), np.sort(carved)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def split_train_val(full_train: LabeledBatch, val_fraction: float = DEFAULT_VAL_FRACTION,
                    seed: int = 0) -> Tuple[LabeledBatch, LabeledBatch]:
    """
    Carve a validation split out of a training pool.

    Parameters
    ----------
    full_train
        Training pool
    val_fraction
        Fraction of samples moved to the validation split, in (0, 1)
    seed
        Seed of the shuffled split

    Returns
    -------
    Tuple
        Training and validation splits; the validation split holds
        ``round(val_fraction * N)`` samples (halves rounded up)

    Examples
    --------
    >>> import numpy as np
    >>> from tunemerge.network import LabeledBatch
    >>> from tunemerge.datasets import split_train_val
    >>> pool = LabeledBatch(np.zeros((100, 2)), np.zeros(100))
    >>> train, val = split_train_val(pool, 0.10, seed=3)
    >>> len(train), len(val)
    (90, 10)
    """
    if not 0.0 < val_fraction < 1.0:
        raise ConfigurationError("validation fraction must lie in (0, 1), got %r" % (val_fraction,))
    n_samples = len(full_train)
    n_val = _round_half_up(val_fraction * n_samples)
    if n_val == 0 or n_val == n_samples:
        raise ConfigurationError("splitting %d samples with fraction %r leaves an empty split"
                                 % (n_samples, val_fraction))
    train_indices, val_indices = _shuffled_carve(n_samples, n_val, seed)
    return full_train.subset(train_indices), full_train.subset(val_indices)


def _template_centroids(spec: SuiteSpec) -> np.ndarray:
    rng = make_rng(derive_seed(spec.seed, "template"))
    template = rng.normal(size=(spec.class_count, spec.feature_dim))
    template *= spec.centroid_radius / np.linalg.norm(template, axis=1, keepdims=True)
    return template


def _task_centroids(template: np.ndarray, rng: np.random.Generator, heterogeneity: float,
                    radius: float) -> np.ndarray:
    dim = template.shape[1]
    # both draws happen whatever the heterogeneity, so the sample stream does not depend on it
    generator = rng.normal(size=(dim, dim))
    offset = rng.normal(size=dim)
    if heterogeneity == 0.0:
        return template.copy()
    skew = (generator - generator.T) / np.sqrt(2.0 * dim)
    rotation = expm(heterogeneity * np.pi * skew)
    return template @ rotation.T + heterogeneity * radius / np.sqrt(dim) * offset


def _draw_mixture(centroids: np.ndarray, rng: np.random.Generator, n_samples: int) -> LabeledBatch:
    class_count, dim = centroids.shape
    labels = rng.permutation(np.arange(n_samples) % class_count)
    features = centroids[labels] + rng.normal(size=(n_samples, dim))
    return LabeledBatch(features, labels)


def generate_task_suite(spec: SuiteSpec) -> TaskSuite:
    """
    Generate a synthetic multi-task suite.

    For each task, ``samples_per_task`` class-balanced samples are drawn; a
    ``test_fraction`` share is held out as test split, then ``val_fraction`` of
    the remaining pool becomes the validation split. Every random stream is a
    Philox generator seeded by :func:`tunemerge.network.derive_seed` from the
    suite seed, so the suite is a pure function of ``spec``.

    Parameters
    ----------
    spec
        Suite recipe

    Returns
    -------
    TaskSuite
        Tasks named ``task0``, ``task1``, ...

    Examples
    --------
    >>> from tunemerge.datasets import SuiteSpec, generate_task_suite
    >>> suite = generate_task_suite(SuiteSpec(num_tasks=2, samples_per_task=200, seed=1))
    >>> suite.task_ids
    ('task0', 'task1')
    >>> len(suite.tasks[0].train), len(suite.tasks[0].val), len(suite.tasks[0].test)
    (144, 16, 40)
    """
    if not isinstance(spec, SuiteSpec):
        raise ConfigurationError("expected a SuiteSpec, got %s" % type(spec).__name__)
    n_test = _round_half_up(spec.test_fraction * spec.samples_per_task)
    if n_test == 0 or n_test == spec.samples_per_task:
        raise ConfigurationError("%d samples per task cannot hold a test split of fraction %r"
                                 % (spec.samples_per_task, spec.test_fraction))

    template = _template_centroids(spec)
    tasks = []
    for index in range(spec.num_tasks):
        task_id = "task%d" % index
        rng = make_rng(derive_seed(spec.seed, "task", index))
        centroids = _task_centroids(template, rng, spec.heterogeneity, spec.centroid_radius)
        samples = _draw_mixture(centroids, rng, spec.samples_per_task)

        pool_indices, test_indices = _shuffled_carve(len(samples), n_test, derive_seed(spec.seed, "test", index))
        train, val = split_train_val(samples.subset(pool_indices), spec.val_fraction,
                                     derive_seed(spec.seed, "val", index))
        tasks.append(TaskData(task_id, train, val, samples.subset(test_indices), spec.class_count, centroids))
        logger.info("Generated task %s: %d train, %d val, %d test samples", task_id, len(train), len(val), n_test)

    return TaskSuite(tuple(tasks), spec.feature_dim, spec.seed, spec)


def generate_pretraining_batch(spec: SuiteSpec, n_samples: int, seed: int) -> LabeledBatch:
    """
    Draw the pooled mixture used to manufacture a pretrained initialization.

    The mixture shares the class template of the suite built from ``spec`` but
    its ``spec.num_tasks`` pseudo-tasks are rotated by streams derived from
    ``seed`` only, hence disjoint from the suite tasks.
    """
    if n_samples < spec.num_tasks:
        raise ConfigurationError("need at least one pretraining sample per pseudo-task")
    template = _template_centroids(spec)
    rng = make_rng(derive_seed(seed, "pretrain"))
    batches = []
    for index in range(spec.num_tasks):
        centroids = _task_centroids(template, rng, spec.heterogeneity, spec.centroid_radius)
        share = n_samples // spec.num_tasks + (1 if index < n_samples % spec.num_tasks else 0)
        batches.append(_draw_mixture(centroids, rng, share))
    return LabeledBatch(np.concatenate([batch.features for batch in batches]),
                        np.concatenate([batch.labels for batch in batches]))


def estimate_bayes_accuracy(task: TaskData, n_samples: int = 20000, seed: int = 0) -> float:
    """
    Large-sample nearest-centroid accuracy of a task.

    With equal priors and identity covariances the nearest-centroid rule is
    Bayes-optimal, so this estimates the best accuracy any classifier can reach.
    """
    if task.centroids is None:
        raise ConfigurationError("task %s carries no centroids" % task.task_id)
    sample = _draw_mixture(task.centroids, make_rng(seed), n_samples)
    distances = ((sample.features[:, None, :] - task.centroids[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(np.argmin(distances, axis=1) == sample.labels))
