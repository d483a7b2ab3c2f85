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

"""
Portable binary files for models and task suites.

Checkpoint layout (all integers little-endian)::

    magic        8 bytes   b"ATMCKPT1"
    version      u32
    header size  u32
    header       UTF-8 JSON {"layer_widths": [...], "activation": ..., "label": ...}
    param count  u64
    params       param count float64

Suite files share the framing (magic ``b"ATMSUIT1"``); the JSON header
describes the suite and the size of every split, and is followed, task by
task and split by split (train, val, test), by the features as float64 and
the labels as int64.
"""

import json
import logging
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Union

import numpy as np

from .config import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, SUITE_MAGIC, SUITE_VERSION
from .datasets import SuiteSpec, TaskData, TaskSuite
from .exceptions import CheckpointError, TuneMergeError
from .network import ArchSpec, LabeledBatch, ModelState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_SPLITS = ("train", "val", "test")


class _Reader:
    """Sequential reader over a byte buffer that reports truncation as a checkpoint error."""

    def __init__(self, payload: bytes, path: PathLike):
        self.payload = payload
        self.path = path
        self.offset = 0

    def read(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise CheckpointError("%s is truncated: expected %d more byte(s) at offset %d"
                                  % (self.path, size, self.offset))
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> int:
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))[0]

    def array(self, count: int, dtype: str) -> np.ndarray:
        item = np.dtype(dtype).itemsize
        return np.frombuffer(self.read(count * item), dtype=dtype).copy()

    def finish(self) -> None:
        if self.offset != len(self.payload):
            raise CheckpointError("%s has %d unexpected trailing byte(s)"
                                  % (self.path, len(self.payload) - self.offset))


def _header_bytes(header: dict) -> bytes:
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(encoded)) + encoded


def _open_frame(path: PathLike, magic: bytes, version: int) -> (_Reader, dict):
    payload = Path(path).read_bytes()
    reader = _Reader(payload, path)
    if reader.read(len(magic)) != magic:
        raise CheckpointError("%s is not a %s file (wrong magic)" % (path, magic.decode("ascii")))
    found = reader.unpack("<I")
    if found != version:
        raise CheckpointError("%s has unsupported version %d (expected %d)" % (path, found, version))
    size = reader.unpack("<I")
    try:
        header = json.loads(reader.read(size).decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as ex:
        raise CheckpointError("%s has a corrupted header" % path) from ex
    if not isinstance(header, dict):
        raise CheckpointError("%s has a corrupted header" % path)
    return reader, header


def save_checkpoint(model: ModelState, path: PathLike) -> None:
    """
    Write a model to a checkpoint file.

    Parameters
    ----------
    model
        Model to save
    path
        Destination file; parent directories must exist
    """
    header = dict(model.arch.to_dict(), label=model.label)
    payload = b"".join([CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION), _header_bytes(header),
                        struct.pack("<Q", model.params.shape[0]), model.params.astype("<f8").tobytes()])
    Path(path).write_bytes(payload)
    logger.info("Saved model '%s' (%d parameters) to %s", model.label, model.params.shape[0], path)


def load_checkpoint(path: PathLike) -> ModelState:
    """
    Read a model from a checkpoint file.

    Raises
    ------
    CheckpointError
        Wrong magic or version, truncated or inconsistent content
    """
    reader, header = _open_frame(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    try:
        arch = ArchSpec(tuple(header["layer_widths"]), header["activation"])
    except (KeyError, TypeError, TuneMergeError) as ex:
        raise CheckpointError("%s describes an invalid architecture" % path) from ex
    count = reader.unpack("<Q")
    if count != arch.n_params:
        raise CheckpointError("%s holds %d parameters, architecture %s needs %d"
                              % (path, count, arch.layer_widths, arch.n_params))
    params = reader.array(count, "<f8")
    reader.finish()
    return ModelState(arch, params, str(header.get("label", "")))


def save_suite(suite: TaskSuite, path: PathLike) -> None:
    """Write a task suite, split by split, to a suite file."""
    header = {
        "feature_dim": suite.feature_dim,
        "suite_seed": suite.suite_seed,
        "spec": None if suite.spec is None else asdict(suite.spec),
        "tasks": [{"task_id": task.task_id,
                   "class_count": task.class_count,
                   "sizes": {name: len(task.split(name)) for name in _SPLITS},
                   "centroids": None if task.centroids is None else task.centroids.tolist()}
                  for task in suite],
    }
    chunks = [SUITE_MAGIC, struct.pack("<I", SUITE_VERSION), _header_bytes(header)]
    for task in suite:
        for name in _SPLITS:
            batch = task.split(name)
            chunks.append(batch.features.astype("<f8").tobytes())
            chunks.append(batch.labels.astype("<i8").tobytes())
    Path(path).write_bytes(b"".join(chunks))
    logger.info("Saved suite of %d task(s) to %s", len(suite), path)


def load_suite(path: PathLike) -> TaskSuite:
    """Read a task suite written by :func:`save_suite`."""
    reader, header = _open_frame(path, SUITE_MAGIC, SUITE_VERSION)
    try:
        dim = int(header["feature_dim"])
        spec = None if header["spec"] is None else SuiteSpec(**header["spec"])
        tasks = []
        for meta in header["tasks"]:
            splits = {}
            for name in _SPLITS:
                count = int(meta["sizes"][name])
                features = reader.array(count * dim, "<f8").reshape(count, dim)
                splits[name] = LabeledBatch(features, reader.array(count, "<i8"))
            centroids = None if meta["centroids"] is None else np.asarray(meta["centroids"], dtype=np.float64)
            tasks.append(TaskData(meta["task_id"], splits["train"], splits["val"], splits["test"],
                                  int(meta["class_count"]), centroids))
        reader.finish()
        return TaskSuite(tuple(tasks), dim, int(header["suite_seed"]), spec)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, TuneMergeError) as ex:
        raise CheckpointError("%s has an inconsistent suite header" % path) from ex
