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

import hashlib
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax
from sklearn.metrics import accuracy_score

from .exceptions import ConfigurationError, EmptyDataError, ShapeError

logger = logging.getLogger(__name__)

ParamVector = np.ndarray
GradientVector = np.ndarray

# batch_size value selecting one gradient step per epoch on the whole split
FULL_BATCH = None

ACTIVATIONS = ("relu", "tanh")

_UINT64_MASK = (1 << 64) - 1


def derive_seed(root_seed: int, *keys) -> int:
    """
    Derive a 64-bit seed from a root seed and a sequence of keys.

    The keys are joined with ``/`` and hashed with BLAKE2b (8-byte digest, read
    little-endian); the digest is XOR-ed with the root seed. The result only
    depends on its arguments, never on evaluation order.

    Parameters
    ----------
    root_seed
        Root seed (taken modulo 2**64)
    keys
        Values identifying the random stream, e.g. a task identifier and an iteration

    Returns
    -------
    int
        Unsigned 64-bit seed

    Examples
    --------
    >>> from tunemerge.network import derive_seed
    >>> derive_seed(42, "task0", 3) == derive_seed(42, "task0", 3)
    True
    >>> derive_seed(42, "task0", 3) == derive_seed(42, "task1", 3)
    False
    """
    payload = "/".join(str(key) for key in keys).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return (int(root_seed) & _UINT64_MASK) ^ int.from_bytes(digest, "little")


def make_rng(seed: int) -> np.random.Generator:
    """Random generator backed by the counter-based Philox bit generator."""
    return np.random.Generator(np.random.Philox(int(seed) & _UINT64_MASK))


@dataclass(frozen=True)
class ArchSpec:
    """
    Architecture of a fully connected classifier.

    Parameters are stored layer by layer in a single flat vector: for each
    layer the weight matrix of shape ``(fan_in, fan_out)`` in row-major order,
    followed by its bias vector.

    Attributes
    ----------
    layer_widths
        Input dimension, hidden widths and number of classes
    activation
        Hidden activation, either ``relu`` or ``tanh``

    Examples
    --------
    >>> from tunemerge.network import ArchSpec
    >>> ArchSpec((2, 3, 2)).n_params
    17
    """
    layer_widths: Tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        widths = tuple(self.layer_widths)
        if len(widths) < 2:
            raise ConfigurationError("an architecture needs at least 2 layer widths, got %s" % (widths,))
        for width in widths:
            if isinstance(width, bool) or not isinstance(width, (int, np.integer)) or width < 1:
                raise ConfigurationError("layer widths must be positive integers, got %s" % (widths,))
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError("unknown activation '%s' (expected one of %s)" % (self.activation, ACTIVATIONS))
        object.__setattr__(self, "layer_widths", tuple(int(width) for width in widths))

    @property
    def n_params(self) -> int:
        widths = self.layer_widths
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in zip(widths[:-1], widths[1:]))

    @property
    def n_inputs(self) -> int:
        return self.layer_widths[0]

    @property
    def n_classes(self) -> int:
        return self.layer_widths[-1]

    @property
    def layer_slices(self) -> List[Tuple[slice, Tuple[int, int], slice]]:
        """Weight slice, weight shape and bias slice of every layer."""
        slices = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:]):
            weights = slice(offset, offset + fan_in * fan_out)
            offset += fan_in * fan_out
            bias = slice(offset, offset + fan_out)
            offset += fan_out
            slices.append((weights, (fan_in, fan_out), bias))
        return slices

    @property
    def layer_blocks(self) -> List[slice]:
        """Contiguous block (weights then bias) of every layer."""
        return [slice(weights.start, bias.stop) for weights, _, bias in self.layer_slices]

    def to_dict(self) -> dict:
        return {"layer_widths": list(self.layer_widths), "activation": self.activation}


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    """Feature matrix of shape ``(n_samples, n_features)`` with integer class labels."""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ShapeError("features must be a 2-D array, got %d dimension(s)" % features.ndim)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ShapeError("got %d labels for %d samples" % (labels.size, features.shape[0]))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "LabeledBatch":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledBatch(self.features[indices], self.labels[indices])


@dataclass(frozen=True, eq=False)
class ModelState:
    """
    An architecture bound to a flat parameter vector.

    The parameter vector is copied on construction and marked read-only, so a
    model state is an immutable value that can be shared between threads.

    Attributes
    ----------
    arch
        Architecture descriptor
    params
        Flat float64 parameter vector
    label
        Free-form provenance, e.g. ``base@k=3`` or ``finetuned:task2@k=3``
    """
    arch: ArchSpec
    params: np.ndarray
    label: str = ""

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64).ravel()
        if params.shape[0] != self.arch.n_params:
            raise ShapeError("architecture %s needs %d parameters, got %d"
                             % (self.arch.layer_widths, self.arch.n_params, params.shape[0]))
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    def relabel(self, label: str) -> "ModelState":
        return replace(self, label=label)


@dataclass(frozen=True)
class TrainConfig:
    """
    Gradient descent settings.

    Attributes
    ----------
    epochs
        Number of passes over the data
    learning_rate
        Step size (eta)
    batch_size
        Mini-batch size, or ``FULL_BATCH`` (None) for one step per epoch on the whole split
    seed
        Seed of the mini-batch shuffling stream
    shuffle
        Whether mini-batches are drawn from a fresh permutation at every epoch
    """
    epochs: int = 1
    learning_rate: float = 0.1
    batch_size: Optional[int] = FULL_BATCH
    seed: int = 0
    shuffle: bool = False

    def __post_init__(self):
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, (int, np.integer)) or self.epochs < 0:
            raise ConfigurationError("epochs must be a non-negative integer, got %r" % (self.epochs,))
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive, got %r" % (self.learning_rate,))
        if self.batch_size is not FULL_BATCH and (not isinstance(self.batch_size, (int, np.integer))
                                                  or self.batch_size < 1):
            raise ConfigurationError("batch size must be a positive integer or FULL_BATCH, got %r"
                                     % (self.batch_size,))

    @property
    def is_full_batch(self) -> bool:
        return self.batch_size is FULL_BATCH

    @property
    def is_lemma_regime(self) -> bool:
        """One full-batch epoch without shuffling: the task vector is exactly -eta times the gradient."""
        return self.is_full_batch and not self.shuffle and self.epochs == 1


def init_model(arch: ArchSpec, seed: int, label: str = "init") -> ModelState:
    """
    Initialize a classifier.

    Weights are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) using a Philox
    stream seeded with ``seed``, layer by layer; biases are zero.

    Parameters
    ----------
    arch
        Architecture
    seed
        Initialization seed
    label
        Label of the returned model

    Returns
    -------
    ModelState
        Initialized model

    Examples
    --------
    >>> from tunemerge.network import ArchSpec, init_model
    >>> model = init_model(ArchSpec((2, 3, 2)), seed=7)
    >>> model.params.shape
    (17,)
    """
    if not isinstance(arch, ArchSpec):
        raise ConfigurationError("expected an ArchSpec, got %s" % type(arch).__name__)
    rng = make_rng(seed)
    params = np.zeros(arch.n_params, dtype=np.float64)
    for weights, (fan_in, fan_out), _ in arch.layer_slices:
        bound = 1.0 / np.sqrt(fan_in)
        params[weights] = rng.uniform(-bound, bound, size=fan_in * fan_out)
    return ModelState(arch, params, label)


def _check_batch(model: ModelState, data: LabeledBatch) -> None:
    if len(data) == 0:
        raise EmptyDataError("cannot evaluate a model on an empty batch")
    if data.n_features != model.arch.n_inputs:
        raise ShapeError("model expects %d features, batch has %d" % (model.arch.n_inputs, data.n_features))
    if data.labels.min() < 0 or data.labels.max() >= model.arch.n_classes:
        raise ShapeError("labels must lie in [0, %d)" % model.arch.n_classes)


def _forward(arch: ArchSpec, params: np.ndarray, features: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    # hidden[l] is the input of layer l, pre[l] its pre-activation
    hidden = [features]
    pre = []
    slices = arch.layer_slices
    for index, (weights, shape, bias) in enumerate(slices):
        z = hidden[-1] @ params[weights].reshape(shape) + params[bias]
        pre.append(z)
        if index < len(slices) - 1:
            hidden.append(np.maximum(z, 0.0) if arch.activation == "relu" else np.tanh(z))
    return hidden, pre


def logits(model: ModelState, features: np.ndarray) -> np.ndarray:
    """Unnormalized class scores of shape ``(n_samples, n_classes)``."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.arch.n_inputs:
        raise ShapeError("model expects features of shape (n, %d), got %s" % (model.arch.n_inputs, features.shape))
    _, pre = _forward(model.arch, model.params, features)
    return pre[-1]


def predict(model: ModelState, features: np.ndarray) -> np.ndarray:
    """Predicted classes; ties are broken in favor of the lowest class index."""
    return np.argmax(logits(model, features), axis=1)


def loss(model: ModelState, data: LabeledBatch) -> float:
    """
    Mean cross-entropy of the model on a batch.

    Parameters
    ----------
    model
        Classifier
    data
        Non-empty labeled batch

    Returns
    -------
    float
        Mean negative log-likelihood of the true labels (non-negative)
    """
    _check_batch(model, data)
    scores = logits(model, data.features)
    picked = scores[np.arange(len(data)), data.labels]
    return float(np.mean(logsumexp(scores, axis=1) - picked))


def gradient(model: ModelState, data: LabeledBatch) -> GradientVector:
    """
    Exact gradient of :func:`loss` with respect to the flat parameter vector.

    Parameters
    ----------
    model
        Classifier
    data
        Non-empty labeled batch

    Returns
    -------
    GradientVector
        Backpropagated gradient, laid out like ``model.params``
    """
    _check_batch(model, data)
    arch = model.arch
    hidden, pre = _forward(arch, model.params, data.features)
    n_samples = len(data)

    delta = softmax(pre[-1], axis=1)
    delta[np.arange(n_samples), data.labels] -= 1.0
    delta /= n_samples

    grad = np.zeros(arch.n_params, dtype=np.float64)
    slices = arch.layer_slices
    for index in reversed(range(len(slices))):
        weights, shape, bias = slices[index]
        grad[weights] = (hidden[index].T @ delta).ravel()
        grad[bias] = delta.sum(axis=0)
        if index > 0:
            delta = delta @ model.params[weights].reshape(shape).T
            if arch.activation == "relu":
                delta = delta * (pre[index - 1] > 0.0)
            else:
                delta = delta * (1.0 - hidden[index] ** 2)
    return grad


def gd_step(model: ModelState, grad: GradientVector, eta: float) -> ModelState:
    """Plain gradient descent update ``params - eta * grad``; architecture and label are kept."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != model.params.shape:
        raise ShapeError("gradient of shape %s does not match %d parameters" % (grad.shape, model.params.shape[0]))
    if not eta >= 0:
        raise ConfigurationError("learning rate must be non-negative, got %r" % (eta,))
    return ModelState(model.arch, model.params - eta * grad, model.label)


def finetune(model: ModelState, data: LabeledBatch, cfg: TrainConfig) -> ModelState:
    """
    Train a model with (stochastic) gradient descent.

    In full-batch mode each epoch performs exactly one :func:`gd_step` on the
    whole split. In mini-batch mode the split is visited in consecutive
    batches, in a permutation drawn at every epoch from a Philox stream seeded
    with ``cfg.seed`` when ``cfg.shuffle`` is set, in storage order otherwise.
    The last batch of an epoch may be smaller.

    Parameters
    ----------
    model
        Starting point
    data
        Training split
    cfg
        Training settings

    Returns
    -------
    ModelState
        Trained model (the input model itself when ``cfg.epochs`` is 0)
    """
    if len(data) == 0:
        raise EmptyDataError("cannot finetune on an empty split")
    _check_batch(model, data)
    if cfg.epochs == 0:
        return model

    eta = cfg.learning_rate
    if cfg.is_full_batch:
        for _ in range(cfg.epochs):
            model = gd_step(model, gradient(model, data), eta)
        return model

    rng = make_rng(cfg.seed)
    n_samples = len(data)
    for _ in range(cfg.epochs):
        order = rng.permutation(n_samples) if cfg.shuffle else np.arange(n_samples)
        for start in range(0, n_samples, cfg.batch_size):
            batch = data.subset(order[start:start + cfg.batch_size])
            model = gd_step(model, gradient(model, batch), eta)
    return model


def evaluate_accuracy(model: ModelState, data: LabeledBatch) -> float:
    """
    Fraction of samples whose arg-max prediction equals the label.

    Examples
    --------
    >>> import numpy as np
    >>> from tunemerge.network import ArchSpec, LabeledBatch, ModelState, evaluate_accuracy
    >>> identity = ModelState(ArchSpec((2, 2)), [1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    >>> batch = LabeledBatch(np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0], [1.0, 3.0]]), [0, 1, 0, 0])
    >>> evaluate_accuracy(identity, batch)
    0.75
    """
    _check_batch(model, data)
    return float(accuracy_score(data.labels, predict(model, data.features)))
