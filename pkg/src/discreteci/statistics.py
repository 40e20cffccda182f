"""Aggregate CI statistics over Z-bins and the classical chi-square / G statistics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import special

from .tables import BinnedData, Dataset, build_sparse_table, partition_by_z
from .ustat import (
    split_bin,
    u_statistic,
    unit_weights,
    weights_from_split,
    weights_no_split,
)


class Method(str, enum.Enum):
    UCI = "uci"
    WUCI = "wuci"
    WUCI_SPLIT = "wuci_split"
    CHI2 = "chi2"
    G = "g"

    @property
    def classical(self) -> bool:
        return self in (Method.CHI2, Method.G)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AggregateStatistic:
    method: Method
    value: float
    per_bin: dict[int, float] = field(default_factory=dict)
    skipped_bins: list[int] = field(default_factory=list)


def omega(sigma_m: int, l1: int, l2: int) -> float:
    return math.sqrt(min(sigma_m, l1) * min(sigma_m, l2))


def _aggregate(method, per_bin, skipped) -> AggregateStatistic:
    return AggregateStatistic(method, math.fsum(per_bin.values()), per_bin, skipped)


def statistic_T(binned: BinnedData) -> AggregateStatistic:
    per_bin, skipped = {}, []
    for m, pairs in enumerate(binned.bins, start=1):
        s = len(pairs)
        if s < 4:
            skipped.append(m)
            continue
        per_bin[m] = s * u_statistic(build_sparse_table(pairs), unit_weights(binned.l1, binned.l2))
    return _aggregate(Method.UCI, per_bin, skipped)


def statistic_TW(binned: BinnedData, l1: int | None = None, l2: int | None = None) -> AggregateStatistic:
    """Split-weighted statistic.

    Bins with 4 <= size < 8 are too small to split; they use unit weights on
    the whole bin.
    """
    l1 = binned.l1 if l1 is None else l1
    l2 = binned.l2 if l2 is None else l2
    per_bin, skipped = {}, []
    for m, pairs in enumerate(binned.bins, start=1):
        s = len(pairs)
        if s < 4:
            skipped.append(m)
            continue
        sb = split_bin(pairs, l1, l2, min_size=4)
        u = u_statistic(build_sparse_table(sb.d_xy), weights_from_split(sb, l1, l2))
        per_bin[m] = s * omega(s, l1, l2) * u
    return _aggregate(Method.WUCI_SPLIT, per_bin, skipped)


def statistic_TW_dagger(binned: BinnedData, l1: int | None = None, l2: int | None = None) -> AggregateStatistic:
    l1 = binned.l1 if l1 is None else l1
    l2 = binned.l2 if l2 is None else l2
    per_bin, skipped = {}, []
    for m, pairs in enumerate(binned.bins, start=1):
        s = len(pairs)
        if s < 4:
            skipped.append(m)
            continue
        u = u_statistic(build_sparse_table(pairs), weights_no_split(pairs, l1, l2))
        per_bin[m] = s * omega(s, l1, l2) * u
    return _aggregate(Method.WUCI, per_bin, skipped)


def _slice_terms(pairs):
    """(observed, expected) for every nonzero cell of one slice, plus the slice size."""
    table = build_sparse_table(pairs)
    s = table.sigma
    obs, exp = [], []
    for (q, r), o in table.cells.items():
        obs.append(o)
        exp.append(table.row_margins[q] * table.col_margins[r] / s)
    return np.asarray(obs, dtype=np.float64), np.asarray(exp, dtype=np.float64), s


def _classical(data, kind):
    binned = data if isinstance(data, BinnedData) else partition_by_z(data)
    per_bin, skipped = {}, []
    for m, pairs in enumerate(binned.bins, start=1):
        if len(pairs) == 0:
            skipped.append(m)
            continue
        o, e, s = _slice_terms(pairs)
        if kind == "chi2":
            # zero cells with e > 0 contribute e each; their total is s - sum(e over nonzero cells)
            per_bin[m] = math.fsum((o - e) ** 2 / e) + (s - math.fsum(e))
        else:
            per_bin[m] = 2.0 * math.fsum(o * np.log(o / e))
    return per_bin, skipped


def _nonnegative(method, per_bin, skipped):
    # both statistics are >= 0; rounding can leave tiny negatives on exactly independent slices
    per_bin = {m: max(v, 0.0) for m, v in per_bin.items()}
    return _aggregate(method, per_bin, skipped)


def chi2_statistic(data: Dataset | BinnedData) -> AggregateStatistic:
    return _nonnegative(Method.CHI2, *_classical(data, "chi2"))


def g_statistic(data: Dataset | BinnedData) -> AggregateStatistic:
    return _nonnegative(Method.G, *_classical(data, "g"))


def classical_df(l1: int, l2: int, d: int) -> int:
    """Degrees of freedom from the declared domain sizes."""
    return (l1 - 1) * (l2 - 1) * d


def chi_square_quantile(p: float, df: float) -> float:
    """Inverse CDF of the chi-square distribution.

    A double-precision inverse of the regularised incomplete gamma function
    gives the start; Newton steps on the CDF in 30-digit arithmetic then fix
    the far tails at large ``df``, where the double-precision CDF itself is
    only accurate to ~1e-8 relative.
    """
    if not 0 < p < 1:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    x0 = 2.0 * float(special.gammaincinv(df / 2.0, p))
    if not x0 > 0 or not math.isfinite(x0):
        return x0
    with mpmath.workdps(30):
        a, pp, x = mpmath.mpf(df) / 2, mpmath.mpf(p), mpmath.mpf(x0)
        for _ in range(6):
            # work in the smaller tail to keep relative accuracy
            if p < 0.5:
                resid = mpmath.gammainc(a, 0, x / 2, regularized=True) - pp
            else:
                resid = (1 - pp) - mpmath.gammainc(a, x / 2, mpmath.inf, regularized=True)
            density = mpmath.exp((a - 1) * mpmath.log(x / 2) - x / 2 - mpmath.loggamma(a)) / 2
            step = resid / density
            x = x - step if x - step > 0 else x / 2
            if abs(step) <= 1e-13 * max(1, abs(x)):
                break
        return float(x)


def chi_square_sf(x: float, df: float) -> float:
    """Upper tail P(chi2_df >= x)."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))
