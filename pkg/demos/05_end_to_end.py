"""
End to end on the built-in fixture
==================================

Imbalanced baseline, each pool alone, and the GA-chosen mixture, for a
decision tree and Gaussian naive Bayes. The same run is available from
the shell as ``mixbalance report --config <file>``.
"""

import sys

from mixbalance.harness import ExperimentConfig, render_report, run_experiment

cfg = ExperimentConfig.from_dict({
    "classifiers": ["decision_tree", "gaussian_nb"],
    "ga": {"population_size": 30, "iterations": 10},
    "validation_folds": 3,
    "seed": 0,
})
report = run_experiment(cfg, progress="-v" in sys.argv)
print(render_report(report, "markdown"))
