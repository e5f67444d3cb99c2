"""Optimal multi-guess strategies and leakage under a tunable loss family.

The package answers four questions about an adversary who gets k distinct
guesses at a secret drawn from a known finite distribution:

* what is the smallest expected loss it can guarantee (``minimal_loss``),
* how often should each symbol appear among the guesses
  (``optimal_coverage``),
* which explicit randomized strategy achieves that
  (``realize_coverage``), and
* how much does observing a correlated side variable help
  (``alpha_leakage``).

Every closed form ships with an independent numerical cross-check in
:mod:`kguess.oracle`.
"""

from .core import (
    AdmissibilityError,
    Alpha,
    BudgetError,
    ConvergenceError,
    DegenerateColumnError,
    DomainError,
    Entropy,
    InvalidDistributionError,
    JointPmf,
    KGuessError,
    ParseError,
    Pmf,
    SizeError,
    alpha_loss,
    arimoto_conditional_entropy,
    as_alpha,
    as_joint,
    as_pmf,
    conditional_pmf,
    renyi_entropy,
    tilted,
)
from .guessing import (
    CoverageVector,
    LossReport,
    SortedPmf,
    minimal_loss,
    minimal_loss_conditional,
    optimal_coverage,
    threshold_rank,
)
from .leakage import (
    LeakageReport,
    RobustnessResult,
    alpha_leakage,
    max_expectation,
    robustness_condition,
)
from .oracle import (
    CappedSimplex,
    FeasibilityResult,
    OracleSolution,
    lp_feasible,
    minimize_expected_loss,
    project_capped_simplex,
)
from .strategy import (
    Admissibility,
    SubsetMixture,
    is_admissible,
    realize_coverage,
    sample_guesses,
    strategy_loss,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Alpha",
    "Pmf",
    "JointPmf",
    "Entropy",
    "SortedPmf",
    "CoverageVector",
    "LossReport",
    "SubsetMixture",
    "Admissibility",
    "LeakageReport",
    "RobustnessResult",
    "CappedSimplex",
    "OracleSolution",
    "FeasibilityResult",
    "KGuessError",
    "ParseError",
    "InvalidDistributionError",
    "DomainError",
    "BudgetError",
    "DegenerateColumnError",
    "AdmissibilityError",
    "SizeError",
    "ConvergenceError",
    "as_alpha",
    "as_pmf",
    "as_joint",
    "alpha_loss",
    "tilted",
    "renyi_entropy",
    "arimoto_conditional_entropy",
    "conditional_pmf",
    "threshold_rank",
    "minimal_loss",
    "optimal_coverage",
    "minimal_loss_conditional",
    "is_admissible",
    "realize_coverage",
    "sample_guesses",
    "strategy_loss",
    "max_expectation",
    "alpha_leakage",
    "robustness_condition",
    "project_capped_simplex",
    "minimize_expected_loss",
    "lp_feasible",
]
