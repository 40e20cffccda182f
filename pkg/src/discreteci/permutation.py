"""Monte Carlo permutation calibration of the CI statistics.

Replicates are generated in fixed-size blocks.  Block ``b`` of bin ``m``
draws its permutations from the stream keyed ``(seed, b, m)``, so the result
depends only on the data order and the plan, never on how blocks are
scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import streams
from ._batch import block_size, build_kernels
from .statistics import Method, chi_square_sf, classical_df
from .tables import Dataset, as_pairs, partition_by_z
from .ustat import SplitBin

DEFAULT_B = 199
DEFAULT_ALPHA = 0.05


class ConfigError(ValueError):
    """Invalid test or simulation configuration."""


@dataclass(frozen=True)
class PermutationPlan:
    method: Method
    B: int = DEFAULT_B
    seed: int = 0
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError:
            raise ConfigError(f"unknown method {self.method!r}") from None
        if isinstance(self.B, bool) or int(self.B) != self.B or self.B < 1:
            raise ConfigError(f"B must be a positive integer, got {self.B!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        try:
            streams.check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class TestResult:
    method: Method
    calibration: str
    observed: float
    p_value: float
    alpha: float
    reject: bool
    B: int | None = None
    seed: int | None = None
    df: int | None = None
    replicates: tuple[float, ...] = ()
    skipped_bins: tuple[int, ...] = ()
    discarded: dict[int, int] = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "accept"

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "calibration": self.calibration,
            "statistic": self.observed,
            "p_value": self.p_value,
            "decision": self.decision,
            "reject": self.reject,
            "alpha": self.alpha,
            "B": self.B,
            "seed": self.seed,
            "df": self.df,
            "skipped_bins": list(self.skipped_bins),
            "discarded": {str(k): v for k, v in self.discarded.items()},
            "replicates": list(self.replicates),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TestResult":
        doc = dict(doc)
        doc.pop("decision", None)
        doc["observed"] = doc.pop("statistic")
        doc["method"] = Method(doc["method"])
        doc["replicates"] = tuple(float(v) for v in doc.get("replicates", ()))
        doc["skipped_bins"] = tuple(doc.get("skipped_bins", ()))
        doc["discarded"] = {int(k): int(v) for k, v in doc.get("discarded", {}).items()}
        return cls(**doc)


def permutation_pvalue(observed: float, replicates) -> float:
    reps = np.asarray(replicates, dtype=np.float64)
    if reps.size == 0:
        raise ValueError("need at least one replicate")
    return (int(np.count_nonzero(reps >= observed)) + 1) / (reps.size + 1)


def empirical_quantile(values, p: float) -> float:
    """The ``ceil(p * N)``-th smallest of the N values (exact rational ceiling)."""
    vals = np.sort(np.asarray(values, dtype=np.float64))
    if vals.size == 0:
        raise ValueError("need at least one value")
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    k = math.ceil(Fraction(p) * vals.size)
    return float(vals[max(k, 1) - 1])


def local_permute(pairs, rng: np.random.Generator) -> np.ndarray:
    """Shuffle the Y column of a bin, keeping X in place."""
    arr = as_pairs(pairs).copy()
    if len(arr) > 1:
        arr[:, 1] = rng.permutation(arr[:, 1])
    return arr


def half_permute(sb: SplitBin, rng: np.random.Generator) -> SplitBin:
    """Shuffle Y only inside the paired part of a split bin."""
    return SplitBin(sb.d_x, sb.d_y, local_permute(sb.d_xy, rng), sb.t, sb.t1, sb.t2, sb.discarded)


def _block_replicates(kernels, seed, block, nrep):
    total = np.zeros(nrep)
    for m, k in kernels:
        total += k.replicates(streams.stream(seed, block, m), nrep)
    return total


def run_test(data: Dataset, plan: PermutationPlan, workers: int | None = None) -> TestResult:
    """Permutation test of X independent of Y given Z.

    Y is permuted within each Z-bin (within the paired part only for
    ``wuci_split``) independently for every replicate.  Output is identical for
    any ``workers``.
    """
    if not isinstance(plan, PermutationPlan):
        raise ConfigError("plan must be a PermutationPlan")
    workers = streams.default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    binned = partition_by_z(data)
    kernels, skipped, discarded = build_kernels(binned, plan.method)
    observed = 0.0
    for _, k in kernels:
        observed += k.observed()

    bs = block_size(data.n)
    sizes = [min(bs, plan.B - start) for start in range(0, plan.B, bs)]
    if workers == 1 or len(sizes) == 1:
        parts = [_block_replicates(kernels, plan.seed, b, nb) for b, nb in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _block_replicates(kernels, plan.seed, *a), enumerate(sizes)))
    reps = np.concatenate(parts)
    p = permutation_pvalue(observed, reps)
    return TestResult(
        method=plan.method,
        calibration="permutation",
        observed=observed,
        p_value=p,
        alpha=plan.alpha,
        reject=p <= plan.alpha,
        B=plan.B,
        seed=plan.seed,
        replicates=tuple(reps.tolist()),
        skipped_bins=tuple(skipped),
        discarded=discarded,
    )


def asymptotic_test(data: Dataset, method, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Classical chi-square or G test against the chi-square limit.

    Degrees of freedom ``(l1 - 1)(l2 - 1) d`` come from the declared domain
    sizes, not from the categories actually observed.
    """
    try:
        method = Method(method)
    except ValueError:
        raise ConfigError(f"unknown method {method!r}") from None
    if not method.classical:
        raise ConfigError(f"asymptotic calibration is only defined for chi2 and g, not {method.value}")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha!r}")
    binned = partition_by_z(data)
    kernels, skipped, _ = build_kernels(binned, method)
    observed = 0.0
    for _, k in kernels:
        observed += k.observed()
    df = classical_df(data.l1, data.l2, data.d)
    p = chi_square_sf(observed, df) if df > 0 else 1.0
    return TestResult(
        method=method,
        calibration="asymptotic",
        observed=observed,
        p_value=p,
        alpha=alpha,
        reject=p <= alpha,
        df=df,
        skipped_bins=tuple(skipped),
    )
