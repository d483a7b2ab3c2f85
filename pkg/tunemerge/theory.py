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
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .config import DEFAULT_FD_STEP, LEMMA_TOLERANCE
from .datasets import TaskData, TaskSuite
from .exceptions import ConfigurationError
from .network import FULL_BATCH, GradientVector, LabeledBatch, ModelState, TrainConfig, finetune, gradient, loss
from .task_vectors import aggregate_mean, compute_task_vector

logger = logging.getLogger(__name__)

LossFunction = Callable[[ModelState, LabeledBatch], float]


class Regime(str, Enum):
    FULL_BATCH_1EPOCH = "full_batch_1epoch"
    MINIBATCH = "minibatch"
    MULTI_EPOCH = "multi_epoch"


@dataclass(frozen=True)
class EquivalenceReport:
    """
    Distance between a task (or multitask) vector and the scaled negative gradient it should equal.

    Attributes
    ----------
    max_norm_residual
        Largest absolute coordinate of the residual
    relative_residual
        L2 norm of the residual over the L2 norm of the scaled gradient
    regime
        Training regime the vector was produced with
    passed
        Whether ``max_norm_residual`` is within ``tolerance``
    tolerance
        Threshold used for ``passed``
    """
    max_norm_residual: float
    relative_residual: float
    regime: Regime
    passed: bool
    tolerance: float = LEMMA_TOLERANCE

    def to_dict(self) -> dict:
        report = asdict(self)
        report["regime"] = self.regime.value
        return report


def regime_train_config(regime: Regime, eta: float, epochs: int = 2, batch_size: int = 16,
                        seed: int = 0) -> TrainConfig:
    """
    Training settings of a regime.

    ``FULL_BATCH_1EPOCH`` is a single full-batch step without shuffling,
    ``MINIBATCH`` one shuffled epoch of ``batch_size`` batches and
    ``MULTI_EPOCH`` ``epochs`` full-batch steps.
    """
    regime = Regime(regime)
    if regime is Regime.FULL_BATCH_1EPOCH:
        return TrainConfig(epochs=1, learning_rate=eta, batch_size=FULL_BATCH, seed=seed)
    if regime is Regime.MINIBATCH:
        return TrainConfig(epochs=1, learning_rate=eta, batch_size=batch_size, seed=seed, shuffle=True)
    if epochs < 2:
        raise ConfigurationError("the multi-epoch regime needs at least 2 epochs, got %r" % (epochs,))
    return TrainConfig(epochs=epochs, learning_rate=eta, batch_size=FULL_BATCH, seed=seed)


def _compare(observed: np.ndarray, expected: np.ndarray, regime: Regime, tolerance: float) -> EquivalenceReport:
    residual = observed - expected
    max_norm = float(np.max(np.abs(residual)))
    scale = float(np.linalg.norm(expected))
    residual_norm = float(np.linalg.norm(residual))
    if scale > 0:
        relative = residual_norm / scale
    else:
        relative = 0.0 if residual_norm == 0 else float("inf")
    return EquivalenceReport(max_norm, relative, Regime(regime), bool(max_norm <= tolerance), tolerance)


def finite_diff_gradient(model: ModelState, data: LabeledBatch, h: float = DEFAULT_FD_STEP,
                         loss_fn: Optional[LossFunction] = None) -> GradientVector:
    """
    Central finite-difference estimate of the loss gradient.

    Only loss evaluations are used, never the backpropagation code, so the
    estimate is an independent oracle for :func:`tunemerge.network.gradient`.

    Parameters
    ----------
    model
        Point at which the gradient is estimated
    data
        Batch the loss is computed on
    h
        Positive step
    loss_fn
        Loss ``f(model, data)``; mean cross-entropy by default

    Returns
    -------
    GradientVector
        ``(L(theta + h e_i) - L(theta - h e_i)) / (2h)`` for every coordinate ``i``

    Examples
    --------
    >>> import numpy as np
    >>> from tunemerge.network import ArchSpec, LabeledBatch, ModelState
    >>> from tunemerge.theory import finite_diff_gradient
    >>> half_square = lambda model, data: 0.5 * float(model.params @ model.params)
    >>> model = ModelState(ArchSpec((1, 1)), [3.0, -1.0])
    >>> batch = LabeledBatch(np.zeros((1, 1)), [0])
    >>> np.round(finite_diff_gradient(model, batch, 1e-3, loss_fn=half_square), 6)
    array([ 3., -1.])
    """
    if not h > 0:
        raise ConfigurationError("finite-difference step must be positive, got %r" % (h,))
    loss_fn = loss if loss_fn is None else loss_fn
    params = np.array(model.params)
    estimate = np.zeros_like(params)
    for index in range(params.shape[0]):
        original = params[index]
        params[index] = original + h
        upper = loss_fn(ModelState(model.arch, params, model.label), data)
        params[index] = original - h
        lower = loss_fn(ModelState(model.arch, params, model.label), data)
        params[index] = original
        estimate[index] = (upper - lower) / (2.0 * h)
    return estimate


def check_gradient(model: ModelState, data: LabeledBatch, h: float = DEFAULT_FD_STEP) -> float:
    """Relative L2 error between backpropagation and central finite differences."""
    analytic = gradient(model, data)
    numeric = finite_diff_gradient(model, data, h)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_task_vector_is_scaled_gradient(base: ModelState, task: TaskData, eta: float,
                                         regime: Regime = Regime.FULL_BATCH_1EPOCH, epochs: int = 2,
                                         batch_size: int = 16, seed: int = 0,
                                         tolerance: float = LEMMA_TOLERANCE) -> EquivalenceReport:
    """
    Compare a task vector with ``-eta`` times the full training-split gradient at the base model.

    The two coincide up to rounding for one full-batch epoch; in the other
    regimes the report measures how far the approximation is.

    Parameters
    ----------
    base
        Model the finetuning starts from
    task
        Task whose training split is used
    eta
        Learning rate
    regime
        Finetuning regime
    epochs
        Number of epochs of the multi-epoch regime
    batch_size
        Batch size of the mini-batch regime
    seed
        Shuffling seed of the mini-batch regime
    tolerance
        Max-norm threshold of ``passed``

    Returns
    -------
    EquivalenceReport
        Residual ``tau + eta * grad``
    """
    cfg = regime_train_config(regime, eta, epochs, batch_size, seed)
    tau = compute_task_vector(finetune(base, task.train, cfg), base, task.task_id)
    expected = -eta * gradient(base, task.train)
    report = _compare(tau.delta, expected, regime, tolerance)
    logger.info("Task %s, regime %s: max-norm residual %.3e", task.task_id, report.regime.value,
                report.max_norm_residual)
    return report


def check_multitask_vector_is_average_gradient(base: ModelState, suite: TaskSuite, eta: float,
                                               tolerance: float = LEMMA_TOLERANCE) -> EquivalenceReport:
    """
    Compare the mean task vector of a suite with ``-eta`` times the average task gradient.

    Every task is finetuned for one full-batch epoch on its training split.
    """
    cfg = regime_train_config(Regime.FULL_BATCH_1EPOCH, eta)
    vectors = [compute_task_vector(finetune(base, task.train, cfg), base, task.task_id) for task in suite]
    mtv = aggregate_mean(vectors)

    average = np.zeros(base.arch.n_params)
    for task_id in sorted(suite.task_ids):
        task = next(task for task in suite if task.task_id == task_id)
        average = average + gradient(base, task.train)
    average = average / len(suite)
    report = _compare(mtv.delta, -eta * average, Regime.FULL_BATCH_1EPOCH, tolerance)
    logger.info("Suite of %d task(s): max-norm residual %.3e", len(suite), report.max_norm_residual)
    return report


def epoch_residual_profile(base: ModelState, task: TaskData, eta: float,
                           epoch_counts: Sequence[int] = (1, 2, 4, 8)) -> Dict[int, float]:
    """
    Max-norm lemma residual for several full-batch epoch counts at a fixed learning rate.

    Examples
    --------
    >>> from tunemerge.datasets import SuiteSpec, generate_task_suite
    >>> from tunemerge.network import ArchSpec, init_model
    >>> from tunemerge.theory import epoch_residual_profile
    >>> task = generate_task_suite(SuiteSpec(num_tasks=1, samples_per_task=100, feature_dim=3, class_count=2)).tasks[0]
    >>> profile = epoch_residual_profile(init_model(ArchSpec((3, 2)), seed=0), task, eta=0.1, epoch_counts=(1, 4))
    >>> profile[1] < 1e-12 < profile[4]
    True
    """
    profile = {}
    for epochs in epoch_counts:
        if epochs < 1:
            raise ConfigurationError("epoch counts must be positive, got %r" % (epochs,))
        regime = Regime.FULL_BATCH_1EPOCH if epochs == 1 else Regime.MULTI_EPOCH
        report = check_task_vector_is_scaled_gradient(base, task, eta, regime, epochs=max(epochs, 2))
        profile[int(epochs)] = report.max_norm_residual
    return profile
