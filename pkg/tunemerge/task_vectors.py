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

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import EmptyDataError, ShapeError
from .network import ArchSpec, ModelState


@dataclass(frozen=True, eq=False)
class TaskVector:
    """
    Parameter shift obtained by finetuning a base model on one task.

    Attributes
    ----------
    delta
        ``finetuned.params - base.params``
    task_id
        Task the base model was finetuned on
    iteration
        Merging iteration the vector belongs to (0 for one-shot merging)
    source_arch
        Architecture of the base model
    """
    delta: np.ndarray
    task_id: str
    iteration: int
    source_arch: ArchSpec

    def __post_init__(self):
        delta = np.array(self.delta, dtype=np.float64).ravel()
        if delta.shape[0] != self.source_arch.n_params:
            raise ShapeError("task vector of length %d does not match architecture %s"
                             % (delta.shape[0], self.source_arch.layer_widths))
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))

    def with_delta(self, delta: np.ndarray) -> "TaskVector":
        return TaskVector(delta, self.task_id, self.iteration, self.source_arch)


@dataclass(frozen=True, eq=False)
class MultitaskVector:
    """Aggregate of the task vectors of one iteration, ready to be applied to a base model."""
    delta: np.ndarray
    contributing_tasks: Tuple[str, ...]
    aggregator_name: str
    source_arch: ArchSpec

    def __post_init__(self):
        delta = np.array(self.delta, dtype=np.float64).ravel()
        if delta.shape[0] != self.source_arch.n_params:
            raise ShapeError("multitask vector of length %d does not match architecture %s"
                             % (delta.shape[0], self.source_arch.layer_widths))
        if len(self.contributing_tasks) == 0:
            raise EmptyDataError("a multitask vector needs at least one contributing task")
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "contributing_tasks", tuple(self.contributing_tasks))


def compute_task_vector(finetuned: ModelState, base: ModelState, task_id: str = "", iteration: int = 0) -> TaskVector:
    """
    Compute the task vector of a finetuned model.

    Parameters
    ----------
    finetuned
        Model obtained by finetuning ``base``
    base
        Model the finetuning started from
    task_id
        Task identifier
    iteration
        Merging iteration

    Returns
    -------
    TaskVector
        Element-wise difference ``finetuned - base``

    Examples
    --------
    >>> from tunemerge.network import ArchSpec, ModelState
    >>> from tunemerge.task_vectors import compute_task_vector
    >>> arch = ArchSpec((1, 1))
    >>> compute_task_vector(ModelState(arch, [2.0, 3.0]), ModelState(arch, [1.0, 1.0]), "t").delta
    array([1., 2.])
    """
    if finetuned.arch != base.arch:
        raise ShapeError("cannot subtract models with architectures %s and %s"
                         % (finetuned.arch.layer_widths, base.arch.layer_widths))
    return TaskVector(finetuned.params - base.params, task_id, iteration, base.arch)


def sorted_by_task(vectors: Sequence[TaskVector]) -> List[TaskVector]:
    """
    Validate a set of task vectors and return it in summation order.

    Every aggregation sums in ascending ``task_id`` order so that results are
    bitwise independent of the order in which vectors were produced.
    """
    vectors = list(vectors)
    if not vectors:
        raise EmptyDataError("at least one task vector is required")
    arch = vectors[0].source_arch
    if any(vector.source_arch != arch for vector in vectors):
        raise ShapeError("task vectors come from different architectures")
    task_ids = [vector.task_id for vector in vectors]
    if len(set(task_ids)) != len(task_ids):
        raise ShapeError("task identifiers must be unique, got %s" % task_ids)
    return sorted(vectors, key=lambda vector: vector.task_id)


def sum_deltas(vectors: Sequence[TaskVector]) -> np.ndarray:
    """Left-to-right sum of the deltas, in ascending task order."""
    ordered = sorted_by_task(vectors)
    total = np.zeros_like(ordered[0].delta)
    for vector in ordered:
        total = total + vector.delta
    return total


def aggregate_mean(vectors: Sequence[TaskVector]) -> MultitaskVector:
    """
    Average the task vectors of one iteration.

    Parameters
    ----------
    vectors
        Non-empty list of task vectors sharing architecture and iteration

    Returns
    -------
    MultitaskVector
        ``(1/|T|) * sum(tau_t)`` with aggregator name ``mean``
    """
    ordered = sorted_by_task(vectors)
    if len({vector.iteration for vector in ordered}) != 1:
        raise ShapeError("cannot average task vectors from different iterations")
    delta = sum_deltas(ordered) / len(ordered)
    return MultitaskVector(delta, tuple(vector.task_id for vector in ordered), "mean", ordered[0].source_arch)


def apply(base: ModelState, mtv: MultitaskVector, alpha: float, label: str = None) -> ModelState:
    """
    Move a base model along a multitask vector: ``base + alpha * mtv``.

    With the mean aggregator this is one merging step ``base + alpha/|T| * sum(tau_t)``.
    """
    if base.arch != mtv.source_arch:
        raise ShapeError("cannot apply a multitask vector of architecture %s to a model of architecture %s"
                         % (mtv.source_arch.layer_widths, base.arch.layer_widths))
    return ModelState(base.arch, base.params + alpha * mtv.delta, base.label if label is None else label)
