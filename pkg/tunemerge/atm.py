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
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import DEFAULT_ATM_ALPHA
from .datasets import TaskSuite
from .exceptions import ConfigurationError, EmptyDataError, ShapeError
from .merging import Aggregator, resolve
from .network import LabeledBatch, ModelState, TrainConfig, derive_seed, evaluate_accuracy, finetune, loss
from .task_vectors import TaskVector, apply, compute_task_vector

logger = logging.getLogger(__name__)


class AtmMode(str, Enum):
    PA = "pa"
    PH = "ph"


class StopKind(str, Enum):
    FIXED_K = "fixed_k"
    VAL_PLATEAU = "val_plateau"


@dataclass(frozen=True)
class StopRule:
    """
    When to stop iterating before the configured number of iterations.

    ``VAL_PLATEAU`` stops once the mean validation accuracy has failed to beat
    the best value seen so far by more than ``min_delta`` for ``patience``
    consecutive iterations.
    """
    kind: StopKind = StopKind.FIXED_K
    patience: int = 0
    min_delta: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", StopKind(self.kind))
        except ValueError:
            raise ConfigurationError("unknown stop rule '%s'" % (self.kind,))
        if self.patience < 0 or self.min_delta < 0:
            raise ConfigurationError("patience and min_delta must be non-negative")
        if self.kind is StopKind.VAL_PLATEAU and self.patience < 1:
            raise ConfigurationError("the validation plateau rule needs patience >= 1")


@dataclass(frozen=True)
class AtmConfig:
    """
    Settings of an alternating tuning and merging run.

    Attributes
    ----------
    iterations
        Maximum number of tune-then-merge iterations (K)
    epochs_per_iteration
        Finetuning epochs of every task at every iteration
    alpha
        Scaling of the aggregated task vectors; with the mean aggregator one
        iteration is ``base + alpha/|T| * sum(tau_t)``
    aggregator
        Conflict-resolution method
    train
        Finetuning template; its ``seed`` is the root of the per-task seeds and
        its ``epochs`` is replaced by ``epochs_per_iteration``
    mode
        ``PA`` finetunes on training splits, ``PH`` on validation splits
    stop
        Early stopping rule
    n_jobs
        Number of tasks finetuned concurrently inside an iteration
    """
    iterations: int
    epochs_per_iteration: int = 1
    alpha: float = DEFAULT_ATM_ALPHA
    aggregator: Aggregator = field(default_factory=Aggregator)
    train: TrainConfig = field(default_factory=TrainConfig)
    mode: AtmMode = AtmMode.PA
    stop: StopRule = field(default_factory=StopRule)
    n_jobs: int = 1

    def __post_init__(self):
        if isinstance(self.iterations, bool) or not isinstance(self.iterations, (int, np.integer)) \
                or self.iterations < 1:
            raise ConfigurationError("iterations must be a positive integer, got %r" % (self.iterations,))
        if isinstance(self.epochs_per_iteration, bool) or not isinstance(self.epochs_per_iteration, (int, np.integer)) \
                or self.epochs_per_iteration < 1:
            raise ConfigurationError("epochs per iteration must be a positive integer, got %r"
                                     % (self.epochs_per_iteration,))
        if not np.isfinite(self.alpha):
            raise ConfigurationError("alpha must be finite, got %r" % (self.alpha,))
        try:
            object.__setattr__(self, "mode", AtmMode(self.mode))
        except ValueError:
            raise ConfigurationError("unknown ATM mode '%s'" % (self.mode,))

    @property
    def data_split(self) -> str:
        return "train" if self.mode is AtmMode.PA else "val"

    def task_train_config(self, task_id: str, iteration: int) -> TrainConfig:
        """Finetuning settings of one task at one iteration."""
        return replace(self.train, epochs=self.epochs_per_iteration,
                       seed=derive_seed(self.train.seed, task_id, iteration))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterationReport:
    """Validation metrics of the base model produced by one iteration."""
    iteration: int
    per_task_accuracy: Dict[str, float]
    mean_accuracy: float
    per_task_loss: Dict[str, float]
    task_vector_norms: Dict[str, float]
    split: str = "val"


@dataclass
class RunReport:
    """
    Outcome of an ATM run.

    Attributes
    ----------
    config
        Snapshot of the run configuration
    iterations
        One report per executed iteration, in order
    final_model
        Base model after the last executed iteration
    wall_time_seconds
        Elapsed time (not reproducible, never written to report files)
    stopped_early
        Whether the stop rule ended the run
    """
    config: dict
    iterations: List[IterationReport]
    final_model: ModelState
    wall_time_seconds: float
    stopped_early: bool = False


def distribute_budget(total_epochs: int, iterations: int) -> int:
    """
    Split a per-task epoch budget evenly across iterations.

    Examples
    --------
    >>> from tunemerge.atm import distribute_budget
    >>> distribute_budget(10, 5)
    2
    """
    for name, value in (("total epochs", total_epochs), ("iterations", iterations)):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
            raise ConfigurationError("%s must be a positive integer, got %r" % (name, value))
    if total_epochs % iterations:
        raise ConfigurationError("%d epochs cannot be split evenly across %d iterations" % (total_epochs, iterations))
    return total_epochs // iterations


def _tune_task(base: ModelState, task_id: str, data: LabeledBatch, cfg: TrainConfig, iteration: int) -> TaskVector:
    # the finetuned model is dropped here: only the task vector outlives the call
    finetuned = finetune(base, data, cfg).relabel("finetuned:%s@k=%d" % (task_id, iteration))
    return compute_task_vector(finetuned, base, task_id, iteration)


def _check_compatible(base: ModelState, suite: TaskSuite) -> None:
    if len(suite) == 0:
        raise EmptyDataError("cannot run ATM on an empty suite")
    if base.arch.n_inputs != suite.feature_dim or base.arch.n_classes < suite.class_count:
        raise ShapeError("architecture %s does not fit a suite with %d features and %d classes"
                         % (base.arch.layer_widths, suite.feature_dim, suite.class_count))


def atm_iteration(base: ModelState, suite: TaskSuite, cfg: AtmConfig, k: int) -> Tuple[ModelState, IterationReport]:
    """
    One tune-then-merge iteration.

    Every task finetunes the current base on its own split only (training split
    in PA mode, validation split in PH mode); the resulting task vectors are
    aggregated with ``cfg.aggregator`` and applied with ``cfg.alpha``. Task
    vectors are not kept after the merge.

    Parameters
    ----------
    base
        Current base model
    suite
        Tasks
    cfg
        Run settings
    k
        Iteration index, used to derive the per-task finetuning seeds

    Returns
    -------
    Tuple
        The next base model and the validation report of that model
    """
    _check_compatible(base, suite)
    jobs = [(task.task_id, task.split(cfg.data_split)) for task in suite]
    if cfg.n_jobs == 1:
        vectors = [_tune_task(base, task_id, data, cfg.task_train_config(task_id, k), k) for task_id, data in jobs]
    else:
        vectors = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_tune_task)(base, task_id, data, cfg.task_train_config(task_id, k), k) for task_id, data in jobs)

    norms = {vector.task_id: vector.norm for vector in vectors}
    mtv = resolve(cfg.aggregator, vectors)
    del vectors
    new_base = apply(base, mtv, cfg.alpha, label="base@k=%d" % (k + 1))

    accuracies = {}
    losses = {}
    for task in suite:
        accuracies[task.task_id] = evaluate_accuracy(new_base, task.val)
        losses[task.task_id] = loss(new_base, task.val)
    mean_accuracy = sum(accuracies[task_id] for task_id in suite.task_ids) / len(suite)
    return new_base, IterationReport(k, accuracies, mean_accuracy, losses, norms)


def _run(initial: ModelState, suite: TaskSuite, cfg: AtmConfig, start_iteration: int) -> RunReport:
    started = time.perf_counter()
    base = initial
    reports = []
    best = -np.inf
    stale = 0
    stopped = False
    for k in range(start_iteration, start_iteration + cfg.iterations):
        base, report = atm_iteration(base, suite, cfg, k)
        reports.append(report)
        logger.info("ATM-%s iteration %d: mean validation accuracy %.4f",
                    cfg.mode.name, k, report.mean_accuracy)

        if cfg.stop.kind is StopKind.VAL_PLATEAU:
            if report.mean_accuracy > best + cfg.stop.min_delta:
                best = report.mean_accuracy
                stale = 0
            else:
                stale += 1
                if stale >= cfg.stop.patience:
                    logger.info("Validation accuracy plateaued, stopping after iteration %d", k)
                    stopped = True
                    break

    elapsed = time.perf_counter() - started
    logger.info("ATM-%s finished %d iteration(s) in %.2f s", cfg.mode.name, len(reports), elapsed)
    return RunReport(cfg.to_dict(), reports, base, elapsed, stopped)


def run_pa_atm(pretrained: ModelState, suite: TaskSuite, cfg: AtmConfig, start_iteration: int = 0) -> RunReport:
    """
    Build a multitask model from a pretrained base without pooling task data.

    Each task is finetuned on its own training split only. A run of K iterations
    resumed from its final model with ``start_iteration=K`` reproduces a single
    run of 2K iterations.
    """
    if cfg.mode is not AtmMode.PA:
        raise ConfigurationError("run_pa_atm needs an AtmConfig in PA mode")
    _check_compatible(pretrained, suite)
    for task in suite:
        if len(task.train) == 0:
            raise EmptyDataError("task %s has an empty training split" % task.task_id)
    return _run(pretrained, suite, cfg, start_iteration)


def run_ph_atm(merged_init: ModelState, suite: TaskSuite, cfg: AtmConfig, start_iteration: int = 0) -> RunReport:
    """
    Refine an existing merged model using validation splits only.

    Test splits are never read.
    """
    if cfg.mode is not AtmMode.PH:
        raise ConfigurationError("run_ph_atm needs an AtmConfig in PH mode")
    _check_compatible(merged_init, suite)
    for task in suite:
        if len(task.val) == 0:
            raise EmptyDataError("task %s has an empty validation split" % task.task_id)
    return _run(merged_init, suite, cfg, start_iteration)
