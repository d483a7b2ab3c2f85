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

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .config import (DEFAULT_BC_BOTTOM_FRACTION, DEFAULT_BC_TOP_FRACTION, DEFAULT_DARE_DROP_PROB,
                     DEFAULT_TIES_KEEP_FRACTION)
from .exceptions import ConfigurationError, ShapeError
from .network import ModelState, derive_seed, make_rng
from .task_vectors import MultitaskVector, TaskVector, aggregate_mean, sorted_by_task, sum_deltas

# slack for fraction * size products such as 0.29 * 100
_ROUNDING_SLACK = 1e-9


class AggregatorKind(str, Enum):
    MEAN = "mean"
    SUM_TA = "sum_ta"
    TIES = "ties"
    DARE_THEN_MEAN = "dare_then_mean"
    BREADCRUMBS_THEN_MEAN = "breadcrumbs_then_mean"


@dataclass(frozen=True)
class Aggregator:
    """
    A conflict-resolution method turning the task vectors of one iteration into a multitask vector.

    Attributes
    ----------
    kind
        Aggregation method
    ties_keep_fraction
        Fraction of coordinates each task vector keeps before sign election (TIES)
    dare_drop_prob
        Probability of dropping a coordinate (DARE)
    bc_top_fraction
        Fraction of largest-magnitude coordinates masked per layer (breadcrumbs)
    bc_bottom_fraction
        Fraction of smallest-magnitude coordinates masked per layer (breadcrumbs)
    seed
        Root seed of the stochastic operators
    """
    kind: AggregatorKind = AggregatorKind.MEAN
    ties_keep_fraction: float = DEFAULT_TIES_KEEP_FRACTION
    dare_drop_prob: float = DEFAULT_DARE_DROP_PROB
    bc_top_fraction: float = DEFAULT_BC_TOP_FRACTION
    bc_bottom_fraction: float = DEFAULT_BC_BOTTOM_FRACTION
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", AggregatorKind(self.kind))
        except ValueError:
            raise ConfigurationError("unknown aggregator '%s'" % (self.kind,))
        _check_keep_fraction(self.ties_keep_fraction)
        _check_drop_prob(self.dare_drop_prob)
        _check_band(self.bc_top_fraction, self.bc_bottom_fraction)

    @property
    def name(self) -> str:
        return self.kind.value


def _check_keep_fraction(keep_fraction: float) -> None:
    if not 0.0 < keep_fraction <= 1.0:
        raise ConfigurationError("TIES keep fraction must lie in (0, 1], got %r" % (keep_fraction,))


def _check_drop_prob(drop_prob: float) -> None:
    if not 0.0 <= drop_prob < 1.0:
        raise ConfigurationError("DARE drop probability must lie in [0, 1), got %r" % (drop_prob,))


def _check_band(top_fraction: float, bottom_fraction: float) -> None:
    if not (0.0 <= top_fraction <= 1.0 and 0.0 <= bottom_fraction <= 1.0):
        raise ConfigurationError("breadcrumbs fractions must lie in [0, 1], got %r and %r"
                                 % (top_fraction, bottom_fraction))
    if top_fraction + bottom_fraction >= 1.0:
        raise ConfigurationError("breadcrumbs fractions must sum to less than 1, got %r"
                                 % (top_fraction + bottom_fraction))


def _descending_magnitude(values: np.ndarray) -> np.ndarray:
    # stable sort: equal magnitudes keep ascending index order
    return np.argsort(-np.abs(values), kind="stable")


def merge_task_arithmetic(base: ModelState, vectors: Sequence[TaskVector], alpha: float,
                          label: str = "merged:task_arithmetic") -> ModelState:
    """
    One-shot task arithmetic: ``base + alpha * sum(tau_i)``.

    Note the plain sum: the scaling coefficient of task arithmetic multiplies
    the sum of the task vectors, not their mean.

    Examples
    --------
    >>> from tunemerge.network import ArchSpec, ModelState
    >>> from tunemerge.task_vectors import TaskVector
    >>> from tunemerge.merging import merge_task_arithmetic
    >>> arch = ArchSpec((1, 1))
    >>> vectors = [TaskVector([1.0, 0.0], "a", 0, arch), TaskVector([0.0, 1.0], "b", 0, arch)]
    >>> merge_task_arithmetic(ModelState(arch, [0.0, 0.0]), vectors, alpha=0.5).params
    array([0.5, 0.5])
    """
    total = sum_deltas(vectors)
    if base.arch != vectors[0].source_arch:
        raise ShapeError("base architecture %s does not match the task vectors" % (base.arch.layer_widths,))
    return ModelState(base.arch, base.params + alpha * total, label)


def ties_aggregate(vectors: Sequence[TaskVector], keep_fraction: float = DEFAULT_TIES_KEEP_FRACTION) -> MultitaskVector:
    """
    TIES merging: trim, elect sign, disjoint mean.

    1. every task vector keeps its ``ceil(keep_fraction * d)`` largest-magnitude
       coordinates (lowest index first among equal magnitudes), the rest is zeroed;
    2. the elected sign of a coordinate is the sign of the sum of the kept values;
    3. each output coordinate is the mean of the kept values whose sign equals the
       elected sign; a zero elected sign gives 0.

    Parameters
    ----------
    vectors
        Task vectors of one iteration
    keep_fraction
        Fraction of coordinates kept by the trimming step, in (0, 1]

    Returns
    -------
    MultitaskVector
        Disjoint mean, aggregator name ``ties``

    Examples
    --------
    >>> from tunemerge.network import ArchSpec
    >>> from tunemerge.task_vectors import TaskVector
    >>> from tunemerge.merging import ties_aggregate
    >>> arch = ArchSpec((3, 1))
    >>> v1 = TaskVector([1.0, -2.0, 0.1, 0.0], "a", 0, arch)
    >>> v2 = TaskVector([-1.0, -1.0, 3.0, 0.0], "b", 0, arch)
    >>> ties_aggregate([v1, v2], keep_fraction=0.5).delta
    array([ 0., -2.,  3.,  0.])
    """
    _check_keep_fraction(keep_fraction)
    ordered = sorted_by_task(vectors)
    stacked = np.stack([vector.delta for vector in ordered])
    n_coordinates = stacked.shape[1]
    n_keep = min(n_coordinates, max(1, math.ceil(keep_fraction * n_coordinates - _ROUNDING_SLACK)))

    trimmed = np.zeros_like(stacked)
    for row, values in enumerate(stacked):
        kept = _descending_magnitude(values)[:n_keep]
        trimmed[row, kept] = values[kept]

    elected = np.sign(trimmed.sum(axis=0))
    agreeing = (np.sign(trimmed) == elected) & (elected != 0)
    counts = agreeing.sum(axis=0)
    totals = np.where(agreeing, trimmed, 0.0).sum(axis=0)
    delta = np.divide(totals, counts, out=np.zeros(n_coordinates), where=counts > 0)
    return MultitaskVector(delta, tuple(vector.task_id for vector in ordered), AggregatorKind.TIES.value,
                           ordered[0].source_arch)


def dare_transform(vector: TaskVector, drop_prob: float = DEFAULT_DARE_DROP_PROB, seed: int = 0) -> TaskVector:
    """
    DARE drop-and-rescale.

    The keep mask is ``rng.random(d) >= drop_prob`` where ``rng`` is a numpy
    ``Generator`` on a ``Philox`` bit generator seeded with ``seed``; survivors
    are multiplied by ``1 / (1 - drop_prob)``, which keeps the expectation.

    Parameters
    ----------
    vector
        Task vector
    drop_prob
        Drop probability in [0, 1)
    seed
        Seed of the mask stream

    Returns
    -------
    TaskVector
        Sparsified and rescaled task vector (a copy of the input when ``drop_prob`` is 0)
    """
    _check_drop_prob(drop_prob)
    if drop_prob == 0.0:
        return vector.with_delta(vector.delta)
    keep = make_rng(seed).random(vector.delta.shape[0]) >= drop_prob
    return vector.with_delta(np.where(keep, vector.delta / (1.0 - drop_prob), 0.0))


def breadcrumbs_mask(vector: TaskVector, top_fraction: float = DEFAULT_BC_TOP_FRACTION,
                     bottom_fraction: float = DEFAULT_BC_BOTTOM_FRACTION) -> TaskVector:
    """
    Model breadcrumbs: keep the middle magnitude band of every layer.

    For each layer (weights and bias of size ``d_l``) the ``floor(top_fraction * d_l)``
    largest and the ``floor(bottom_fraction * d_l)`` smallest coordinates by
    magnitude are zeroed, equal magnitudes being taken in ascending index order.
    Every other coordinate is left untouched.

    Examples
    --------
    >>> from tunemerge.network import ArchSpec
    >>> from tunemerge.task_vectors import TaskVector
    >>> from tunemerge.merging import breadcrumbs_mask
    >>> vector = TaskVector([5.0, 0.01, 1.0, 2.0], "a", 0, ArchSpec((1, 2)))
    >>> breadcrumbs_mask(vector, top_fraction=0.25, bottom_fraction=0.25).delta
    array([0., 0., 1., 2.])
    """
    _check_band(top_fraction, bottom_fraction)
    delta = np.array(vector.delta)
    for block in vector.source_arch.layer_blocks:
        values = delta[block]
        size = values.shape[0]
        n_top = math.floor(top_fraction * size + _ROUNDING_SLACK)
        n_bottom = math.floor(bottom_fraction * size + _ROUNDING_SLACK)
        masked = np.zeros(size, dtype=bool)
        masked[_descending_magnitude(values)[:n_top]] = True
        ascending = [index for index in np.argsort(np.abs(values), kind="stable") if not masked[index]]
        masked[ascending[:n_bottom]] = True
        values[masked] = 0.0
        delta[block] = values
    return vector.with_delta(delta)


def resolve(agg: Aggregator, vectors: Sequence[TaskVector]) -> MultitaskVector:
    """
    Aggregate the task vectors of one iteration with the configured method.

    ``DARE_THEN_MEAN`` seeds the mask of every task vector with
    ``derive_seed(agg.seed, task_id, iteration)``, so the result does not depend
    on the order in which vectors are transformed.
    """
    ordered = sorted_by_task(vectors)
    kind = agg.kind
    if kind is AggregatorKind.MEAN:
        return aggregate_mean(ordered)
    if kind is AggregatorKind.SUM_TA:
        return MultitaskVector(sum_deltas(ordered), tuple(vector.task_id for vector in ordered),
                               kind.value, ordered[0].source_arch)
    if kind is AggregatorKind.TIES:
        return ties_aggregate(ordered, agg.ties_keep_fraction)
    if kind is AggregatorKind.DARE_THEN_MEAN:
        transformed = [dare_transform(vector, agg.dare_drop_prob,
                                      derive_seed(agg.seed, vector.task_id, vector.iteration))
                       for vector in ordered]
        return _renamed(aggregate_mean(transformed), kind)
    if kind is AggregatorKind.BREADCRUMBS_THEN_MEAN:
        masked = [breadcrumbs_mask(vector, agg.bc_top_fraction, agg.bc_bottom_fraction) for vector in ordered]
        return _renamed(aggregate_mean(masked), kind)
    raise ConfigurationError("unsupported aggregator '%s'" % (kind,))


def _renamed(mtv: MultitaskVector, kind: AggregatorKind) -> MultitaskVector:
    return MultitaskVector(mtv.delta, mtv.contributing_tasks, kind.value, mtv.source_arch)
