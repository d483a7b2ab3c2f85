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
Command line interface.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 on runtime
errors (including a failed lemma check in the full-batch regime).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from .checkpoint import load_checkpoint, save_checkpoint, save_suite
from .config import AVERAGE_TASK, REPORT_COLUMNS
from .exceptions import ConfigurationError, TuneMergeError
from .experiments import (ExperimentConfig, build_suite, config_hash, evaluate_suite, load_config, pretrain_model,
                          run_baseline_comparison, run_budget_sweep, run_distribution_sweep, summarize, write_table)
from .merging import Aggregator, AggregatorKind, resolve
from .network import derive_seed, finetune
from .task_vectors import apply, compute_task_vector
from .theory import Regime, check_multitask_vector_is_average_gradient, check_task_vector_is_scaled_gradient

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser exiting with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON)")
    common.add_argument("--out", help="output directory (default: output_dir of the configuration)")
    common.add_argument("--seed", type=int, help="run seed, replacing the seeds of the configuration")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _Parser(prog="tunemerge", description="Alternating tuning and merging of task-specific models.")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    suite = commands.add_parser("suite", help="synthetic task suites").add_subparsers(dest="action", metavar="action")
    suite.required = True
    suite.add_parser("gen", parents=[common], help="generate and save a suite").set_defaults(func=_suite_gen)

    pretrain = commands.add_parser("pretrain", parents=[common], help="manufacture a pretrained base model")
    pretrain.set_defaults(func=_pretrain)

    tune = commands.add_parser("finetune", parents=[common], help="finetune a base model on every task")
    tune.add_argument("--base", help="base checkpoint (default: pretrain from the configuration)")
    tune.add_argument("--epochs", type=int, help="finetuning epochs (default: budget_epochs)")
    tune.add_argument("--task", help="only finetune this task")
    tune.set_defaults(func=_finetune)

    merge = commands.add_parser("merge", parents=[common], help="merge finetuned checkpoints into their base")
    merge.add_argument("--base", required=True, help="base checkpoint")
    merge.add_argument("--models", required=True, nargs="+", help="finetuned checkpoints")
    merge.add_argument("--aggregator", choices=[kind.value for kind in AggregatorKind],
                       default=AggregatorKind.SUM_TA.value)
    merge.add_argument("--alpha", type=float, default=None, help="scaling coefficient (default: 0.4)")
    merge.add_argument("--name", default="merged", help="output checkpoint name")
    merge.set_defaults(func=_merge)

    atm = commands.add_parser("atm", help="alternating tuning and merging").add_subparsers(dest="action",
                                                                                           metavar="action")
    atm.required = True
    atm.add_parser("run", parents=[common], help="compare the configured methods").set_defaults(func=_atm_run)

    sweep = commands.add_parser("sweep", help="budget sweeps").add_subparsers(dest="action", metavar="action")
    sweep.required = True
    budget = sweep.add_parser("budget", parents=[common], help="compare methods across per-task budgets")
    budget.add_argument("--budgets", type=int, nargs="+", default=[2, 4, 10])
    budget.set_defaults(func=_sweep_budget)
    distribution = sweep.add_parser("distribution", parents=[common],
                                    help="split a fixed budget across different iteration counts")
    distribution.add_argument("--total", type=int, default=10, help="per-task epoch budget")
    distribution.add_argument("--iterations", type=int, nargs="+", default=[1, 2, 5, 10])
    distribution.set_defaults(func=_sweep_distribution)

    check = commands.add_parser("check", help="theory checks").add_subparsers(dest="action", metavar="action")
    check.required = True
    lemma = check.add_parser("lemma", parents=[common], help="task vector versus scaled negative gradient")
    lemma.add_argument("--regime", choices=[regime.value for regime in Regime], default=Regime.FULL_BATCH_1EPOCH.value)
    lemma.add_argument("--model", help="base checkpoint (default: pretrain from the configuration)")
    lemma.add_argument("--task", help="task to check (default: the first one)")
    lemma.add_argument("--multitask", action="store_true", help="check the mean task vector of the whole suite")
    lemma.add_argument("--epochs", type=int, default=2, help="epochs of the multi-epoch regime")
    lemma.add_argument("--batch-size", type=int, default=16, help="batch size of the mini-batch regime")
    lemma.set_defaults(func=_check_lemma)

    evaluate = commands.add_parser("eval", parents=[common], help="evaluate a checkpoint on every task")
    evaluate.add_argument("--model", required=True, help="checkpoint to evaluate")
    evaluate.add_argument("--split", choices=("train", "val", "test"), default="test")
    evaluate.set_defaults(func=_eval)
    return parser


def _experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(cfg: ExperimentConfig) -> int:
    return cfg.effective_seeds[0]


def _base_model(path: Optional[str], cfg: ExperimentConfig, suite, seed: int):
    if path is not None:
        return load_checkpoint(path)
    return pretrain_model(cfg, suite, seed)


def _suite_gen(args) -> int:
    cfg = _experiment(args)
    suite = build_suite(cfg, _seed(cfg))
    save_suite(suite, _output_dir(args, cfg) / "suite.bin")
    return 0


def _pretrain(args) -> int:
    cfg = _experiment(args)
    seed = _seed(cfg)
    model = pretrain_model(cfg, build_suite(cfg, seed), seed)
    save_checkpoint(model, _output_dir(args, cfg) / "pretrained.ckpt")
    return 0


def _finetune(args) -> int:
    cfg = _experiment(args)
    seed = _seed(cfg)
    suite = build_suite(cfg, seed)
    base = _base_model(args.base, cfg, suite, seed)
    epochs = cfg.budget_epochs if args.epochs is None else args.epochs
    tasks = [task for task in suite if args.task is None or task.task_id == args.task]
    if not tasks:
        raise ConfigurationError("unknown task '%s' (suite has %s)" % (args.task, ", ".join(suite.task_ids)))
    out = _output_dir(args, cfg)
    for task in tasks:
        train_cfg = cfg.train.to_train_config(epochs, derive_seed(seed, "finetune", task.task_id))
        model = finetune(base, task.train, train_cfg).relabel("finetuned:%s" % task.task_id)
        save_checkpoint(model, out / ("finetuned_%s.ckpt" % task.task_id))
    return 0


def _merge(args) -> int:
    cfg = _experiment(args)
    base = load_checkpoint(args.base)
    # zero-padded positions keep the summation order of the command line
    vectors = [compute_task_vector(load_checkpoint(path), base, "%04d" % index)
               for index, path in enumerate(args.models)]
    alpha = 0.4 if args.alpha is None else args.alpha
    aggregator = Aggregator(AggregatorKind(args.aggregator), seed=_seed(cfg))
    merged = apply(base, resolve(aggregator, vectors), alpha, label="merged:%s" % aggregator.name)
    save_checkpoint(merged, _output_dir(args, cfg) / ("%s.ckpt" % args.name))
    return 0


def _atm_run(args) -> int:
    cfg = _experiment(args)
    out = _output_dir(args, cfg)
    result = run_baseline_comparison(cfg)
    write_table(result.table, out / "comparison", args.format)
    write_table(result.iterations, out / "iterations", args.format)
    write_table(summarize(result.table), out / "summary", args.format)
    for (seed, name), report in sorted(result.runs.items()):
        save_checkpoint(report.final_model, out / ("%s_seed%d.ckpt" % (name, seed)))
        logger.info("Method %s, seed %d: %d iteration(s) in %.2f s", name, seed, len(report.iterations),
                    report.wall_time_seconds)
    return 0


def _sweep_budget(args) -> int:
    cfg = _experiment(args)
    out = _output_dir(args, cfg)
    result = run_budget_sweep(cfg, args.budgets)
    write_table(result.table, out / "budget_sweep", args.format)
    write_table(result.iterations, out / "budget_iterations", args.format)
    write_table(result.flatness, out / "budget_flatness", args.format)
    write_table(summarize(result.table, ("method", "budget")), out / "budget_summary", args.format)
    return 0


def _sweep_distribution(args) -> int:
    cfg = _experiment(args)
    out = _output_dir(args, cfg)
    table = run_distribution_sweep(cfg, args.total, args.iterations)
    write_table(table, out / "distribution_sweep", args.format)
    write_table(summarize(table, ("iterations",)), out / "distribution_summary", args.format)
    return 0


def _check_lemma(args) -> int:
    cfg = _experiment(args)
    seed = _seed(cfg)
    suite = build_suite(cfg, seed)
    base = _base_model(args.model, cfg, suite, seed)
    eta = cfg.train.learning_rate
    regime = Regime(args.regime)
    if args.multitask:
        regime = Regime.FULL_BATCH_1EPOCH
        report = check_multitask_vector_is_average_gradient(base, suite, eta)
    else:
        tasks = [task for task in suite if args.task is None or task.task_id == args.task]
        if not tasks:
            raise ConfigurationError("unknown task '%s' (suite has %s)" % (args.task, ", ".join(suite.task_ids)))
        report = check_task_vector_is_scaled_gradient(base, tasks[0], eta, regime, epochs=args.epochs,
                                                      batch_size=args.batch_size, seed=seed)

    content = json.dumps(dict(report.to_dict(), config_hash=config_hash(cfg)), sort_keys=True, indent=2) + "\n"
    (_output_dir(args, cfg) / "lemma.json").write_text(content, encoding="utf-8")
    sys.stdout.write(content)
    if regime is Regime.FULL_BATCH_1EPOCH and not report.passed:
        logger.error("The task vector differs from the scaled negative gradient by %.3e", report.max_norm_residual)
        return 2
    return 0


def _eval(args) -> int:
    cfg = _experiment(args)
    seed = _seed(cfg)
    model = load_checkpoint(args.model)
    scores = evaluate_suite(model, build_suite(cfg, seed), args.split)
    common = {"method": model.label or Path(args.model).stem, "split": args.split, "alpha": None,
              "aggregator": "", "iterations": None, "epochs_per_iteration": None, "seed": seed,
              "config_hash": config_hash(cfg)}
    rows = [dict(common, task=task_id, accuracy=accuracy, loss=task_loss)
            for task_id, (accuracy, task_loss) in sorted(scores.items())]
    rows.append(dict(common, task=AVERAGE_TASK, accuracy=sum(row["accuracy"] for row in rows) / len(rows),
                     loss=sum(row["loss"] for row in rows) / len(rows)))
    write_table(pd.DataFrame(rows, columns=REPORT_COLUMNS), _output_dir(args, cfg) / "eval", args.format)
    return 0


def _configure_logging(quiet: bool) -> None:
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s", force=True)


def cli_entry(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run a command and return its exit code.

    Parameters
    ----------
    argv
        Command line arguments, without the program name (``sys.argv[1:]`` when None)

    Returns
    -------
    int
        0 on success, 1 on usage or configuration errors, 2 on runtime errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as ex:
        return ex.code if isinstance(ex.code, int) else 1
    _configure_logging(args.quiet)
    try:
        return args.func(args)
    except ConfigurationError as ex:
        logger.error("%s", ex)
        return 1
    except (TuneMergeError, OSError):
        logger.exception("Command '%s' failed", args.command)
        return 2


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli_entry(argv))
