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

from itertools import product
from typing import Dict, List, Sequence

from .exceptions import ConfigurationError


def generate_run_grid(**axes: Sequence) -> List[Dict]:
    """
    Generate all combinations of the values of some sweep axes.

    The last axis varies fastest, so runs sharing the leading values are
    contiguous in the returned list.

    Parameters
    ----------
    axes
        For each axis name a non-empty list of possible values

    Returns
    -------
    list
        One dictionary per run, mapping every axis name to a value

    Examples
    --------
    >>> from tunemerge.grid import generate_run_grid
    >>> generate_run_grid(budget=[2, 4], seed=[0, 1])
    [{'budget': 2, 'seed': 0}, {'budget': 2, 'seed': 1}, {'budget': 4, 'seed': 0}, {'budget': 4, 'seed': 1}]
    """
    keys = []
    values = []
    for key, value in axes.items():
        value = list(value)
        if not value:
            raise ConfigurationError("sweep axis '%s' has no value" % key)
        keys.append(key)
        values.append(value)

    return [dict(zip(keys, values_list)) for values_list in product(*values)]
