"""Conditional independence tests for discrete data.

U-statistic permutation tests (``uci``, ``wuci``, ``wuci_split``) next to the
classical chi-square and G tests, plus a simulation harness for power and
type-I error studies.
"""

from .io import admissions, parse_csv, read_csv
from .permutation import (
    ConfigError,
    PermutationPlan,
    TestResult,
    asymptotic_test,
    empirical_quantile,
    half_permute,
    local_permute,
    permutation_pvalue,
    run_test,
)
from .simulate import JointPmf, PowerEstimate, estimate_power, sample_from, scenario_pmf, worst_case_pmf
from .statistics import (
    AggregateStatistic,
    Method,
    chi2_statistic,
    chi_square_quantile,
    chi_square_sf,
    g_statistic,
    omega,
    statistic_T,
    statistic_TW,
    statistic_TW_dagger,
)
from .tables import BinnedData, Dataset, InputError, SparseTable, build_sparse_table, partition_by_z
from .ustat import (
    DomainError,
    SplitBin,
    WeightVectors,
    split_bin,
    u_statistic,
    unit_weights,
    weights_from_split,
    weights_no_split,
)

__version__ = "0.1.0"
