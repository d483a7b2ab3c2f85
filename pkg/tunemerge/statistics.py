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

from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.stats import mannwhitneyu

from .exceptions import EmptyDataError


def confidence_interval_mean_t(x: Sequence[float], cl: float = 0.05) -> List[float]:
    """
    Confidence interval of the mean accuracy over seeds.

    Parameters
    ----------
    x
        Accuracies, one per seed
    cl
        Significance level (0.05 gives a 95% interval)

    Returns
    -------
    List
        Lower and upper bound, clipped to [0, 1]

    Examples
    --------
    >>> from tunemerge.statistics import confidence_interval_mean_t
    >>> confidence_interval_mean_t([0.5, 0.5, 0.5])
    [0.5, 0.5]
    >>> low, high = confidence_interval_mean_t([0.70, 0.72, 0.74, 0.76])
    >>> low < 0.73 < high
    True

    Notes
    -----
    The t distribution is used because the variance is estimated from a handful
    of seeds; with so few samples it has heavier tails than the normal one.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise EmptyDataError("cannot build a confidence interval from an empty sample")
    mean = float(np.mean(x))
    if x.size == 1 or np.all(x == mean):
        return [mean, mean]
    bounds = stats.t.interval(1 - cl, x.size - 1, loc=mean, scale=stats.sem(x))
    return [float(min(max(bound, 0.0), 1.0)) for bound in bounds]


def find_best_solution(solutions: Sequence[Sequence[float]],
                       test: Callable = mannwhitneyu,
                       alpha: float = 0.05,
                       **kwargs) -> (int, list, list):
    """
    Find the method with the highest mean accuracy and the methods statistically tied with it.

    Parameters
    ----------
    solutions
        Accuracies of every method, one array per method (one value per seed)
    test
        Two-sample statistical test returning ``(statistic, pvalue)``
    alpha
        Significance level
    kwargs
        Keyword arguments of the statistical test

    Returns
    -------
    Tuple
        - the position of the best method;
        - the positions of the methods not separable from the best one (itself included);
        - the p-values of the comparisons with the best method

    Examples
    --------
    >>> from tunemerge.statistics import find_best_solution
    >>> atm = [0.90, 0.91, 0.92, 0.93, 0.94]
    >>> ta = [0.70, 0.71, 0.72, 0.73, 0.74]
    >>> best, tied, pvalues = find_best_solution([ta, atm])
    >>> best, tied
    (1, [1])
    """
    if len(solutions) == 0:
        raise EmptyDataError("no candidate to compare")
    means = [np.mean(solution) for solution in solutions]
    # first maximum wins
    best_idx = int(np.argmax(means))
    best_solution = solutions[best_idx]

    best_solutions_idx = []
    pvalues = []
    for index, solution in enumerate(solutions):
        if index == best_idx:
            pvalue = 1.0
        else:
            try:
                _, pvalue = test(best_solution, solution, **kwargs)
            except ValueError:
                # identical samples
                pvalue = 1.0
        if pvalue > alpha:
            best_solutions_idx.append(index)
        pvalues.append(float(pvalue))

    return best_idx, best_solutions_idx, pvalues


def summarize_seeds(scores: Dict[str, Sequence[float]], cl: float = 0.05) -> pd.DataFrame:
    """
    Summarize per-seed average accuracies of several methods.

    Parameters
    ----------
    scores
        Method name to accuracies (one per seed)
    cl
        Significance level of the confidence intervals and of the tie test

    Returns
    -------
    pd.DataFrame
        One row per method, in input order, with columns ``method``, ``n_seeds``,
        ``mean``, ``std``, ``ci_low``, ``ci_high`` and ``tied_with_best``
    """
    names = list(scores)
    samples = [np.asarray(scores[name], dtype=np.float64) for name in names]
    _, tied, _ = find_best_solution(samples, alpha=cl)
    rows = []
    for index, (name, sample) in enumerate(zip(names, samples)):
        low, high = confidence_interval_mean_t(sample, cl)
        rows.append({"method": name, "n_seeds": int(sample.size), "mean": float(np.mean(sample)),
                     "std": float(np.std(sample, ddof=1)) if sample.size > 1 else 0.0,
                     "ci_low": low, "ci_high": high, "tied_with_best": index in tied})
    return pd.DataFrame(rows, columns=["method", "n_seeds", "mean", "std", "ci_low", "ci_high", "tied_with_best"])
