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


class TuneMergeError(Exception):
    """Base class of every error raised by tunemerge."""


class ConfigurationError(TuneMergeError, ValueError):
    """Invalid architecture, training, merging or experiment configuration."""


class ShapeError(TuneMergeError, ValueError):
    """Parameter vectors, architectures or data dimensions do not match."""


class EmptyDataError(TuneMergeError, ValueError):
    """An operation received an empty batch, split, suite or vector list."""


class CheckpointError(TuneMergeError, IOError):
    """A checkpoint or suite file is corrupted, truncated or of an unknown version."""
