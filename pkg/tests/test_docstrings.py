import doctest

import tunemerge as tm

_MODULES = [tm.atm, tm.datasets, tm.experiments, tm.grid, tm.merging, tm.network, tm.statistics, tm.task_vectors,
            tm.theory]


def load_tests(loader, tests, ignore):
    for module in _MODULES:
        tests.addTests(doctest.DocTestSuite(module))
    return tests
