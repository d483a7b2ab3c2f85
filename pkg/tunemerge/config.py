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

# merge operators
DEFAULT_TIES_KEEP_FRACTION = 0.2
DEFAULT_DARE_DROP_PROB = 0.9
DEFAULT_BC_TOP_FRACTION = 0.01
DEFAULT_BC_BOTTOM_FRACTION = 0.85

# scaling coefficients
DEFAULT_BASELINE_ALPHA = 0.4
DEFAULT_ATM_ALPHA = 1.0

# theory checks
DEFAULT_FD_STEP = 1e-5
LEMMA_TOLERANCE = 1e-12

# synthetic suite
DEFAULT_NUM_TASKS = 4
DEFAULT_SAMPLES_PER_TASK = 2000
DEFAULT_FEATURE_DIM = 16
DEFAULT_CLASS_COUNT = 4
DEFAULT_DIFFICULTY = 0.5
DEFAULT_HETEROGENEITY = 0.7
DEFAULT_VAL_FRACTION = 0.10
DEFAULT_TEST_FRACTION = 0.20

# binary files
CHECKPOINT_MAGIC = b"ATMCKPT1"
CHECKPOINT_VERSION = 1
SUITE_MAGIC = b"ATMSUIT1"
SUITE_VERSION = 1

# reports
REPORT_COLUMNS = ["method", "task", "split", "accuracy", "loss", "alpha", "aggregator",
                  "iterations", "epochs_per_iteration", "seed", "config_hash"]
ITERATION_COLUMNS = ["method", "iteration", "task", "split", "accuracy", "loss",
                     "task_vector_norm", "seed", "config_hash"]
AVERAGE_TASK = "average"
