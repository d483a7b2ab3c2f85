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
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .atm import AtmConfig, AtmMode, RunReport, StopKind, StopRule, distribute_budget, run_pa_atm, run_ph_atm
from .checkpoint import load_checkpoint, load_suite
from .config import (AVERAGE_TASK, DEFAULT_ATM_ALPHA, DEFAULT_BASELINE_ALPHA, DEFAULT_BC_BOTTOM_FRACTION,
                     DEFAULT_BC_TOP_FRACTION, DEFAULT_CLASS_COUNT, DEFAULT_DARE_DROP_PROB, DEFAULT_DIFFICULTY,
                     DEFAULT_FEATURE_DIM, DEFAULT_HETEROGENEITY, DEFAULT_NUM_TASKS, DEFAULT_SAMPLES_PER_TASK,
                     DEFAULT_TEST_FRACTION, DEFAULT_TIES_KEEP_FRACTION, DEFAULT_VAL_FRACTION, ITERATION_COLUMNS,
                     REPORT_COLUMNS)
from .datasets import SuiteSpec, TaskSuite, generate_pretraining_batch, generate_task_suite
from .exceptions import ConfigurationError, ShapeError
from .grid import generate_run_grid
from .merging import (Aggregator, AggregatorKind, breadcrumbs_mask, dare_transform, merge_task_arithmetic,
                      ties_aggregate)
from .network import ArchSpec, ModelState, TrainConfig, derive_seed, evaluate_accuracy, finetune, init_model, loss
from .statistics import summarize_seeds
from .task_vectors import TaskVector, apply, compute_task_vector

logger = logging.getLogger(__name__)

BASELINE_KINDS = ("ta", "ties", "dare", "breadcrumbs")
ATM_KINDS = ("pa_atm", "ph_atm")
REFERENCE_KINDS = ("pretrained", "finetuned", "multitask")
METHOD_KINDS = REFERENCE_KINDS + BASELINE_KINDS + ATM_KINDS

# aggregator column of the baseline rows
_BASELINE_AGGREGATORS = {"ta": "sum_ta", "ties": "ties", "dare": "dare", "breadcrumbs": "breadcrumbs"}


class SuiteSettings(BaseModel):
    """Synthetic suite recipe, or the path of a saved suite file."""
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    num_tasks: int = DEFAULT_NUM_TASKS
    samples_per_task: int = DEFAULT_SAMPLES_PER_TASK
    feature_dim: int = DEFAULT_FEATURE_DIM
    class_count: int = DEFAULT_CLASS_COUNT
    difficulty: float = DEFAULT_DIFFICULTY
    heterogeneity: float = DEFAULT_HETEROGENEITY
    val_fraction: float = DEFAULT_VAL_FRACTION
    test_fraction: float = DEFAULT_TEST_FRACTION
    # None: every run seed draws its own suite
    seed: Optional[int] = None

    @field_validator("path")
    @classmethod
    def _path_exists(cls, value):
        if value is not None and not os.path.isfile(value):
            raise ValueError("suite file %s does not exist" % value)
        return value

    @model_validator(mode="after")
    def _valid_recipe(self):
        self.to_spec(0)
        return self

    def to_spec(self, seed: int) -> SuiteSpec:
        return SuiteSpec(num_tasks=self.num_tasks, samples_per_task=self.samples_per_task,
                         feature_dim=self.feature_dim, class_count=self.class_count, difficulty=self.difficulty,
                         heterogeneity=self.heterogeneity, seed=seed if self.seed is None else self.seed,
                         val_fraction=self.val_fraction, test_fraction=self.test_fraction)


class ArchSettings(BaseModel):
    """Hidden layers of the classifier; input and output widths follow the suite."""
    model_config = ConfigDict(extra="forbid")

    hidden: List[int] = [32]
    activation: str = "relu"

    @model_validator(mode="after")
    def _valid_arch(self):
        self.to_arch(1, 2)
        return self

    def to_arch(self, feature_dim: int, class_count: int) -> ArchSpec:
        return ArchSpec((feature_dim, *self.hidden, class_count), self.activation)


class TrainSettings(BaseModel):
    """Finetuning hyper-parameters shared by every method."""
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = 0.1
    # None: full batch
    batch_size: Optional[int] = 32
    shuffle: bool = True

    @model_validator(mode="after")
    def _valid_training(self):
        self.to_train_config(1, 0)
        return self

    def to_train_config(self, epochs: int, seed: int) -> TrainConfig:
        return TrainConfig(epochs=epochs, learning_rate=self.learning_rate, batch_size=self.batch_size, seed=seed,
                           shuffle=self.shuffle)


class PretrainSettings(TrainSettings):
    """Manufactured pretrained initialization, or the path of a checkpoint."""
    path: Optional[str] = None
    learning_rate: float = 0.05
    epochs: int = 2
    samples: int = 2000

    @field_validator("path")
    @classmethod
    def _path_exists(cls, value):
        if value is not None and not os.path.isfile(value):
            raise ValueError("checkpoint %s does not exist" % value)
        return value


class MethodSettings(BaseModel):
    """
    One row family of the comparison table.

    ``kind`` is one of ``pretrained``, ``finetuned``, ``multitask``, ``ta``,
    ``ties``, ``dare``, ``breadcrumbs``, ``pa_atm`` and ``ph_atm``. A
    ``ph_atm`` method refines the merge of the one-shot method named by
    ``init_method``, or task arithmetic with ``init_alpha`` when it is None.
    """
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: str
    alpha: Optional[float] = None
    alpha_grid: Optional[List[float]] = None
    aggregator: str = AggregatorKind.MEAN.value
    ties_keep_fraction: float = DEFAULT_TIES_KEEP_FRACTION
    dare_drop_prob: float = DEFAULT_DARE_DROP_PROB
    bc_top_fraction: float = DEFAULT_BC_TOP_FRACTION
    bc_bottom_fraction: float = DEFAULT_BC_BOTTOM_FRACTION
    iterations: Optional[int] = None
    epochs_per_iteration: Optional[int] = None
    patience: int = 0
    min_delta: float = 0.0
    init_alpha: float = DEFAULT_BASELINE_ALPHA
    init_method: Optional[str] = None

    @model_validator(mode="after")
    def _valid_method(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError("unknown method kind '%s' (expected one of %s)" % (self.kind, ", ".join(METHOD_KINDS)))
        if self.init_method is not None and self.kind != "ph_atm":
            raise ValueError("init_method is only supported by ph_atm")
        if self.alpha_grid is not None:
            if self.kind not in BASELINE_KINDS:
                raise ValueError("alpha_grid is only supported by %s" % ", ".join(BASELINE_KINDS))
            if not self.alpha_grid:
                raise ValueError("alpha_grid of method '%s' is empty" % self.name)
        for name in ("iterations", "epochs_per_iteration"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError("%s must be a positive integer" % name)
        self.to_aggregator(0)
        self.to_stop_rule()
        return self

    @property
    def effective_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return DEFAULT_ATM_ALPHA if self.kind in ATM_KINDS else DEFAULT_BASELINE_ALPHA

    def to_aggregator(self, seed: int) -> Aggregator:
        return Aggregator(AggregatorKind(self.aggregator), self.ties_keep_fraction, self.dare_drop_prob,
                          self.bc_top_fraction, self.bc_bottom_fraction, seed)

    def to_stop_rule(self) -> StopRule:
        if self.patience == 0:
            return StopRule()
        return StopRule(StopKind.VAL_PLATEAU, self.patience, self.min_delta)

    def schedule(self, budget: int) -> Tuple[int, int]:
        """
        Iterations and epochs per iteration of an ATM method under a per-task epoch budget.

        Without explicit values, every iteration spends one epoch.
        """
        if self.iterations is not None and self.epochs_per_iteration is not None:
            return self.iterations, self.epochs_per_iteration
        if self.iterations is not None:
            return self.iterations, distribute_budget(budget, self.iterations)
        epochs = 1 if self.epochs_per_iteration is None else self.epochs_per_iteration
        return distribute_budget(budget, epochs), epochs


def _default_methods() -> List[MethodSettings]:
    return [MethodSettings(name=kind, kind=kind) for kind in ("pretrained", "finetuned", "ta", "pa_atm", "ph_atm")]


class ExperimentConfig(BaseModel):
    """
    Full description of an experiment, loaded from JSON.

    Attributes
    ----------
    suite
        Task suite
    arch
        Classifier hidden layers
    train
        Finetuning hyper-parameters
    pretrain
        Pretrained initialization
    methods
        Methods to compare, with unique names
    budget_epochs
        Finetuning epochs per task
    output_dir
        Directory of the reports
    root_seed
        Seed of the run when ``seeds`` is not given
    seeds
        Independent repetitions; every one of them draws its own suite (unless
        the suite seed is fixed), initialization and finetuning streams
    n_jobs
        Number of (budget, seed) runs processed concurrently
    """
    model_config = ConfigDict(extra="forbid")

    suite: SuiteSettings = Field(default_factory=SuiteSettings)
    arch: ArchSettings = Field(default_factory=ArchSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)
    pretrain: PretrainSettings = Field(default_factory=PretrainSettings)
    methods: List[MethodSettings] = Field(default_factory=_default_methods)
    budget_epochs: int = 10
    output_dir: str = "results"
    root_seed: int = 0
    seeds: Optional[List[int]] = None
    n_jobs: int = 1

    @model_validator(mode="after")
    def _valid_experiment(self):
        names = [method.name for method in self.methods]
        duplicated = sorted({name for name in names if names.count(name) > 1})
        if duplicated:
            raise ValueError("method names must be unique, got duplicates %s" % duplicated)
        kinds = {method.name: method.kind for method in self.methods}
        for method in self.methods:
            if method.init_method is not None and kinds.get(method.init_method) not in BASELINE_KINDS:
                raise ValueError("init_method of '%s' must name a configured %s method"
                                 % (method.name, "/".join(BASELINE_KINDS)))
        if self.budget_epochs < 1:
            raise ValueError("budget_epochs must be a positive integer")
        if self.seeds is not None and not self.seeds:
            raise ValueError("seeds must not be empty")
        if self.n_jobs == 0:
            raise ValueError("n_jobs must not be 0")
        return self

    @property
    def effective_seeds(self) -> List[int]:
        return list(self.seeds) if self.seeds else [self.root_seed]

    def method(self, name: str) -> MethodSettings:
        return next(method for method in self.methods if method.name == name)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy of the configuration whose only run uses ``seed``."""
        return self.model_copy(update={"root_seed": int(seed), "seeds": None})


def load_config(path: Union[str, Path, None] = None) -> ExperimentConfig:
    """
    Load and validate an experiment configuration.

    Parameters
    ----------
    path
        JSON file; the default configuration when None

    Returns
    -------
    ExperimentConfig
        Validated configuration

    Raises
    ------
    ConfigurationError
        Missing file, malformed JSON or invalid content
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("configuration file %s does not exist" % path)
    try:
        content = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as ex:
        raise ConfigurationError("configuration file %s is not valid JSON: %s" % (path, ex)) from ex
    try:
        return ExperimentConfig.model_validate(content)
    except ValidationError as ex:
        raise ConfigurationError("invalid configuration %s:\n%s" % (path, ex)) from ex


def config_hash(cfg: ExperimentConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON dump of a configuration, output directory aside."""
    canonical = json.dumps(cfg.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def build_suite(cfg: ExperimentConfig, seed: int) -> TaskSuite:
    if cfg.suite.path is not None:
        return load_suite(cfg.suite.path)
    return generate_task_suite(cfg.suite.to_spec(seed))


def pretrain_model(cfg: ExperimentConfig, suite: TaskSuite, seed: int) -> ModelState:
    """
    Produce the pretrained base model of a run.

    The base is either loaded from ``cfg.pretrain.path`` or obtained by briefly
    training a fresh classifier on a pooled mixture whose pseudo-tasks are
    drawn from streams disjoint from the suite.
    """
    arch = cfg.arch.to_arch(suite.feature_dim, suite.class_count)
    if cfg.pretrain.path is not None:
        model = load_checkpoint(cfg.pretrain.path)
        if model.arch.n_inputs != suite.feature_dim or model.arch.n_classes < suite.class_count:
            raise ShapeError("checkpoint %s does not fit the suite" % cfg.pretrain.path)
        return model

    spec = suite.spec
    if spec is None:
        spec = SuiteSpec(num_tasks=len(suite), feature_dim=suite.feature_dim, class_count=suite.class_count,
                         seed=seed)
    batch = generate_pretraining_batch(spec, cfg.pretrain.samples, derive_seed(seed, "pretrain-data"))
    model = init_model(arch, derive_seed(seed, "init"))
    train_cfg = cfg.pretrain.to_train_config(cfg.pretrain.epochs, derive_seed(seed, "pretrain-sgd"))
    model = finetune(model, batch, train_cfg).relabel("pretrained")
    logger.info("Pretrained %s for %d epoch(s) on %d samples", arch.layer_widths, cfg.pretrain.epochs, len(batch))
    return model


def evaluate_suite(model: ModelState, suite: TaskSuite, split: str = "test") -> Dict[str, Tuple[float, float]]:
    """Accuracy and loss of a model on one split of every task."""
    return {task.task_id: (evaluate_accuracy(model, task.split(split)), loss(model, task.split(split)))
            for task in suite}


def merge_baseline(kind: str, base: ModelState, vectors: Sequence[TaskVector], alpha: float,
                   method: MethodSettings, seed: int = 0) -> ModelState:
    """
    One-shot merge of fully finetuned task vectors.

    ``ta`` is plain task arithmetic; ``dare`` and ``breadcrumbs`` sparsify every
    task vector before task arithmetic; ``ties`` applies the TIES multitask vector.
    """
    label = "merged:%s" % kind
    if kind == "ta":
        return merge_task_arithmetic(base, vectors, alpha, label)
    if kind == "ties":
        return apply(base, ties_aggregate(vectors, method.ties_keep_fraction), alpha, label)
    if kind == "dare":
        sparse = [dare_transform(vector, method.dare_drop_prob, derive_seed(seed, "dare", vector.task_id))
                  for vector in vectors]
        return merge_task_arithmetic(base, sparse, alpha, label)
    if kind == "breadcrumbs":
        masked = [breadcrumbs_mask(vector, method.bc_top_fraction, method.bc_bottom_fraction) for vector in vectors]
        return merge_task_arithmetic(base, masked, alpha, label)
    raise ConfigurationError("'%s' is not a one-shot merging method" % kind)


def select_alpha(kind: str, base: ModelState, vectors: Sequence[TaskVector], alphas: Sequence[float],
                 method: MethodSettings, suite: TaskSuite, seed: int = 0) -> float:
    """
    Scaling coefficient with the best mean validation accuracy.

    Candidates are tried in ascending order and only a strictly better
    accuracy replaces the current choice, so ties select the smallest coefficient.
    """
    best_alpha = None
    best_score = -np.inf
    for alpha in sorted(alphas):
        merged = merge_baseline(kind, base, vectors, alpha, method, seed)
        score = np.mean([evaluate_accuracy(merged, task.val) for task in suite])
        if score > best_score:
            best_alpha, best_score = alpha, score
    logger.info("Method %s: selected alpha %g (validation accuracy %.4f)", method.name, best_alpha, best_score)
    return float(best_alpha)


@dataclass
class SeedResult:
    """Outcome of all methods for one seed and one budget."""
    rows: List[dict] = field(default_factory=list)
    iteration_rows: List[dict] = field(default_factory=list)
    runs: Dict[str, RunReport] = field(default_factory=dict)


@dataclass
class ComparisonResult:
    """
    Outcome of a comparison.

    Attributes
    ----------
    table
        Test accuracies, one row per (seed, method, task) plus one average row per (seed, method)
    iterations
        Per-iteration validation metrics of the ATM methods
    runs
        ATM run reports keyed by ``(seed, method name)``
    """
    table: pd.DataFrame
    iterations: pd.DataFrame
    runs: Dict[Tuple[int, str], RunReport]


def _task_rows(results: Dict[str, Tuple[float, float]], common: dict) -> List[dict]:
    rows = [dict(common, task=task_id, accuracy=accuracy, loss=task_loss)
            for task_id, (accuracy, task_loss) in sorted(results.items())]
    rows.append(dict(common, task=AVERAGE_TASK, accuracy=float(np.mean([row["accuracy"] for row in rows])),
                     loss=float(np.mean([row["loss"] for row in rows]))))
    return rows


def _atm_config(method: MethodSettings, cfg: ExperimentConfig, budget: int, seed: int, mode: AtmMode) -> AtmConfig:
    iterations, epochs = method.schedule(budget)
    return AtmConfig(iterations=iterations, epochs_per_iteration=epochs, alpha=method.effective_alpha,
                     aggregator=method.to_aggregator(derive_seed(seed, "aggregator", method.name)),
                     train=cfg.train.to_train_config(epochs, derive_seed(seed, "atm", method.name)),
                     mode=mode, stop=method.to_stop_rule())


def _one_shot(method: MethodSettings, base: ModelState, vectors: Sequence[TaskVector], suite: TaskSuite,
              seed: int) -> Tuple[ModelState, float]:
    alpha = method.effective_alpha
    if method.alpha_grid is not None:
        alpha = select_alpha(method.kind, base, vectors, method.alpha_grid, method, suite, seed)
    return merge_baseline(method.kind, base, vectors, alpha, method, seed), alpha


def _iteration_rows(report: RunReport, common: dict) -> List[dict]:
    rows = []
    for iteration in report.iterations:
        for task_id in sorted(iteration.per_task_accuracy):
            rows.append(dict(common, iteration=iteration.iteration, task=task_id, split=iteration.split,
                             accuracy=iteration.per_task_accuracy[task_id], loss=iteration.per_task_loss[task_id],
                             task_vector_norm=iteration.task_vector_norms[task_id]))
    return rows


def _run_methods(cfg: ExperimentConfig, seed: int, budget: int, digest: str,
                 methods: Optional[Sequence[MethodSettings]] = None) -> SeedResult:
    suite = build_suite(cfg, seed)
    base = pretrain_model(cfg, suite, seed)
    methods = cfg.methods if methods is None else methods
    result = SeedResult()

    finetuned = {}
    vectors = []
    if any(method.kind in ("finetuned", "ph_atm") + BASELINE_KINDS for method in methods):
        for task in suite:
            train_cfg = cfg.train.to_train_config(budget, derive_seed(seed, "finetune", task.task_id))
            model = finetune(base, task.train, train_cfg).relabel("finetuned:%s" % task.task_id)
            finetuned[task.task_id] = model
            vectors.append(compute_task_vector(model, base, task.task_id))

    for method in methods:
        common = {"method": method.name, "split": "test", "alpha": None, "aggregator": "", "iterations": 1,
                  "epochs_per_iteration": budget, "seed": seed, "config_hash": digest}
        kind = method.kind
        if kind == "pretrained":
            common.update(iterations=0, epochs_per_iteration=0)
            scores = evaluate_suite(base, suite)
        elif kind == "finetuned":
            scores = {task.task_id: (evaluate_accuracy(finetuned[task.task_id], task.test),
                                     loss(finetuned[task.task_id], task.test)) for task in suite}
        elif kind == "multitask":
            train_cfg = cfg.train.to_train_config(budget, derive_seed(seed, "multitask"))
            scores = evaluate_suite(finetune(base, suite.pooled("train"), train_cfg), suite)
        elif kind in BASELINE_KINDS:
            merged, alpha = _one_shot(method, base, vectors, suite, seed)
            common.update(alpha=alpha, aggregator=_BASELINE_AGGREGATORS[kind])
            scores = evaluate_suite(merged, suite)
        else:
            mode = AtmMode.PA if kind == "pa_atm" else AtmMode.PH
            atm_cfg = _atm_config(method, cfg, budget, seed, mode)
            if mode is AtmMode.PA:
                report = run_pa_atm(base, suite, atm_cfg)
            else:
                if method.init_method is None:
                    init = merge_task_arithmetic(base, vectors, method.init_alpha, "merged:ta")
                else:
                    init, _ = _one_shot(cfg.method(method.init_method), base, vectors, suite, seed)
                report = run_ph_atm(init, suite, atm_cfg)
            result.runs[method.name] = report
            common.update(alpha=atm_cfg.alpha, aggregator=atm_cfg.aggregator.name,
                          iterations=len(report.iterations), epochs_per_iteration=atm_cfg.epochs_per_iteration)
            result.iteration_rows.extend(_iteration_rows(report, {"method": method.name, "seed": seed,
                                                                  "config_hash": digest}))
            scores = evaluate_suite(report.final_model, suite)

        rows = _task_rows(scores, common)
        logger.info("Seed %d, method %s: average test accuracy %.4f", seed, method.name, rows[-1]["accuracy"])
        result.rows.extend(rows)
    return result


def _run_grid(cfg: ExperimentConfig, runs: Sequence[Dict],
              methods: Optional[Sequence[MethodSettings]] = None) -> List[SeedResult]:
    # one job per (budget, seed) run
    digest = config_hash(cfg)
    if cfg.n_jobs == 1 or len(runs) == 1:
        return [_run_methods(cfg, run["seed"], run["budget"], digest, methods) for run in runs]
    return Parallel(n_jobs=cfg.n_jobs)(delayed(_run_methods)(cfg, run["seed"], run["budget"], digest, methods)
                                       for run in runs)


def _collect(results: Sequence[SeedResult], runs: Sequence[Dict], extra: Sequence[str] = ()) -> ComparisonResult:
    extra = list(extra)
    table = pd.DataFrame([dict(row, **{key: run[key] for key in extra})
                          for run, result in zip(runs, results) for row in result.rows],
                         columns=extra + REPORT_COLUMNS)
    iterations = pd.DataFrame([dict(row, **{key: run[key] for key in extra})
                               for run, result in zip(runs, results) for row in result.iteration_rows],
                              columns=extra + ITERATION_COLUMNS)
    reports = {(run["seed"], name): report
               for run, result in zip(runs, results) for name, report in result.runs.items()}
    return ComparisonResult(table, iterations, reports)


def run_baseline_comparison(cfg: ExperimentConfig) -> ComparisonResult:
    """
    Compare the configured methods at the configured budget.

    Baselines merge task models finetuned for ``budget_epochs`` epochs each;
    ATM methods spend the same per-task budget across their iterations unless
    their schedule is given explicitly.

    Parameters
    ----------
    cfg
        Experiment configuration

    Returns
    -------
    ComparisonResult
        Test-split table with columns ``REPORT_COLUMNS``, ATM iteration
        histories and run reports
    """
    runs = generate_run_grid(budget=[cfg.budget_epochs], seed=cfg.effective_seeds)
    return _collect(_run_grid(cfg, runs), runs)


def average_accuracy(table: pd.DataFrame, by: Sequence[str] = ("method",)) -> pd.DataFrame:
    """Seed-averaged ``average`` rows of a report table, one row per group."""
    averages = table[table["task"] == AVERAGE_TASK]
    return averages.groupby(list(by), sort=False)["accuracy"].mean().reset_index()


def summarize(table: pd.DataFrame, by: Sequence[str] = ("method",)) -> pd.DataFrame:
    """
    Multi-seed summary of a report table.

    For every group of rows sharing the ``by`` columns (e.g. method and budget),
    the average-task accuracies of all seeds are reduced to a mean with a t
    confidence interval, and compared with the best group by a Mann-Whitney U test.
    The ``config_hash`` of the summarized rows is carried over.
    """
    by = list(by)
    averages = table[table["task"] == AVERAGE_TASK]
    groups = list(averages.groupby(by, sort=False))
    scores = {str(index): group["accuracy"].to_numpy() for index, (_, group) in enumerate(groups)}
    summary = summarize_seeds(scores).drop(columns="method")
    keys = pd.DataFrame([key if isinstance(key, tuple) else (key,) for key, _ in groups], columns=by)
    summary = pd.concat([keys, summary], axis=1)
    summary["config_hash"] = [",".join(sorted(group["config_hash"].astype(str).unique())) for _, group in groups]
    return summary


@dataclass
class BudgetSweepResult:
    """
    Outcome of a budget sweep.

    Attributes
    ----------
    table
        ``budget`` followed by ``REPORT_COLUMNS``
    flatness
        For every method, the spread (max - min) of its seed-averaged average
        accuracy across budgets, with the configuration hash
    iterations
        ATM iteration histories, with a ``budget`` column
    """
    table: pd.DataFrame
    flatness: pd.DataFrame
    iterations: pd.DataFrame


def run_budget_sweep(cfg: ExperimentConfig, budgets: Sequence[int]) -> BudgetSweepResult:
    """
    Run the comparison once per per-task epoch budget.

    Parameters
    ----------
    cfg
        Experiment configuration; its ``budget_epochs`` is ignored
    budgets
        Non-empty list of budgets

    Returns
    -------
    BudgetSweepResult
        Comparison tables of all budgets and the flatness statistic
    """
    budgets = [int(budget) for budget in budgets]
    if not budgets:
        raise ConfigurationError("the budget sweep needs at least one budget")
    for budget in budgets:
        if budget < 1:
            raise ConfigurationError("budgets must be positive, got %d" % budget)
        for method in cfg.methods:
            if method.kind in ATM_KINDS:
                method.schedule(budget)

    runs = generate_run_grid(budget=budgets, seed=cfg.effective_seeds)
    logger.info("Budget sweep: %d run(s) over budgets %s", len(runs), budgets)
    comparison = _collect(_run_grid(cfg, runs), runs, ("budget",))

    averages = average_accuracy(comparison.table, ("method", "budget"))
    flatness = averages.groupby("method", sort=False)["accuracy"].agg(lambda values: values.max() - values.min())
    flatness = flatness.rename("spread").reset_index().assign(config_hash=config_hash(cfg))
    return BudgetSweepResult(comparison.table, flatness, comparison.iterations)


def run_distribution_sweep(cfg: ExperimentConfig, total_epochs: int,
                           iteration_options: Sequence[int]) -> pd.DataFrame:
    """
    Run PA-ATM under several splits of the same per-task epoch budget.

    The first ``pa_atm`` method of the configuration provides aggregator and
    scaling; a default mean-aggregator method is used when there is none.

    Parameters
    ----------
    cfg
        Experiment configuration
    total_epochs
        Per-task epoch budget
    iteration_options
        Iteration counts, each dividing ``total_epochs``

    Returns
    -------
    pd.DataFrame
        ``REPORT_COLUMNS`` rows for every (seed, iteration count, task)

    Examples
    --------
    >>> from tunemerge.experiments import ExperimentConfig, run_distribution_sweep
    >>> from tunemerge.exceptions import ConfigurationError
    >>> try:
    ...     run_distribution_sweep(ExperimentConfig(), 10, [4])
    ... except ConfigurationError as ex:
    ...     print(ex)
    10 epochs cannot be split evenly across 4 iterations
    """
    options = [int(option) for option in iteration_options]
    if not options:
        raise ConfigurationError("the distribution sweep needs at least one iteration count")
    for option in options:
        distribute_budget(total_epochs, option)

    template = next((method for method in cfg.methods if method.kind == "pa_atm"),
                    MethodSettings(name="pa_atm", kind="pa_atm"))
    methods = [template.model_copy(update={"iterations": option, "epochs_per_iteration": None})
               for option in options]
    runs = generate_run_grid(budget=[total_epochs], seed=cfg.effective_seeds)
    return _collect(_run_grid(cfg, runs, methods), runs).table


def write_table(table: pd.DataFrame, path: Union[str, Path], fmt: str = "csv") -> Path:
    """
    Write a report table as CSV (LF line endings) or JSON records.

    Parameters
    ----------
    table
        Report
    path
        Destination without extension
    fmt
        ``csv`` or ``json``

    Returns
    -------
    Path
        Written file
    """
    path = Path(path).with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        table.to_csv(path, index=False, lineterminator="\n")
    elif fmt == "json":
        path.write_text(table.to_json(orient="records", indent=2, double_precision=15) + "\n", encoding="utf-8")
    else:
        raise ConfigurationError("unknown output format '%s'" % fmt)
    logger.info("Wrote %d row(s) to %s", len(table), path)
    return path
