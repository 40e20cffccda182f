"""Weighted U-statistics for independence within a single Z-bin.

The statistic estimates the weighted squared L2 distance between the joint
pmf of (X, Y) and the product of its marginals.  It is evaluated from the
sparse contingency table in time linear in the number of nonzero cells:

    U = [A1 + A2 / ((s-1)(s-2)) - 2 A3 / (s-2)] / (s (s-3))

with ``s`` the sample size and

    A1 = sum_qr (o_qr^2 - o_qr) / (eta_q ups_r)
    A2 = sum_q (o_q+^2 - o_q+) / eta_q  *  sum_r (o_+r^2 - o_+r) / ups_r
    A3 = sum_qr o_qr (o_q+ o_+r - o_q+ - o_+r + 1) / (eta_q ups_r)

Unit weights give the plain U-statistic.  Weights ``1 + a`` built from a
held-out split give the flattened statistic; weights ``1 + b`` built from
the bin's own margins give the no-split variant.

Note on the no-split weights: ``b_q = min(s, l1) * count_q / s`` uses the
bin size ``s``.  The motivating expectation argument is phrased in terms of
the split size ``t`` instead; the formula with ``s`` is the one implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tables import SparseTable, as_pairs


class DomainError(ValueError):
    """Raised when a statistic is undefined for the given sample size."""


@dataclass(frozen=True, eq=False)
class WeightVectors:
    """Per-category weights; ``eta[q - 1]`` weights X=q, ``upsilon[r - 1]`` Y=r."""

    eta: np.ndarray
    upsilon: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.float64).reshape(-1)
        ups = np.asarray(self.upsilon, dtype=np.float64).reshape(-1)
        if eta.size == 0 or ups.size == 0:
            raise ValueError("weight vectors must be nonempty")
        if not (np.all(eta > 0) and np.all(ups > 0)):
            raise ValueError("weights must be strictly positive")
        eta.setflags(write=False)
        ups.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "upsilon", ups)

    @property
    def l1(self) -> int:
        return self.eta.size

    @property
    def l2(self) -> int:
        return self.upsilon.size

    def __eq__(self, other):
        if not isinstance(other, WeightVectors):
            return NotImplemented
        return np.array_equal(self.eta, other.eta) and np.array_equal(self.upsilon, other.upsilon)

    __hash__ = None


def unit_weights(l1: int, l2: int) -> WeightVectors:
    return WeightVectors(np.ones(l1), np.ones(l2))


def u_statistic(table: SparseTable, weights: WeightVectors) -> float:
    """Weighted U-statistic of one bin from its sparse table.

    Only stored (nonzero) cells and margins are visited, so the cost does not
    depend on the declared numbers of categories.
    """
    s = table.sigma
    if s < 4:
        raise DomainError(f"U-statistic needs at least 4 observations, got {s}")
    eta, ups = weights.eta, weights.upsilon
    rows, cols = table.row_margins, table.col_margins
    if len(rows) == 1 or len(cols) == 1:
        # every kernel term vanishes once X or Y is constant in the bin
        return 0.0

    a1 = []
    a3 = []
    for (q, r), o in table.cells.items():
        w = eta[q - 1] * ups[r - 1]
        oq, orr = rows[q], cols[r]
        a1.append((o * o - o) / w)
        a3.append(o * (oq * orr - oq - orr + 1) / w)
    A1 = math.fsum(a1)
    A3 = math.fsum(a3)
    A2 = math.fsum((o * o - o) / eta[q - 1] for q, o in rows.items()) * math.fsum(
        (o * o - o) / ups[r - 1] for r, o in cols.items()
    )
    return (A1 + A2 / ((s - 1) * (s - 2)) - 2.0 * A3 / (s - 2)) / (s * (s - 3))


@dataclass(frozen=True, eq=False)
class SplitBin:
    """A bin split into an X-only part, a Y-only part and a paired part.

    ``d_x`` and ``d_y`` only define the weights; the statistic is computed on
    ``d_xy``.
    """

    d_x: np.ndarray
    d_y: np.ndarray
    d_xy: np.ndarray
    t: int
    t1: int
    t2: int
    discarded: int

    def __eq__(self, other):
        if not isinstance(other, SplitBin):
            return NotImplemented
        return (
            (self.t, self.t1, self.t2, self.discarded) == (other.t, other.t1, other.t2, other.discarded)
            and np.array_equal(self.d_x, other.d_x)
            and np.array_equal(self.d_y, other.d_y)
            and np.array_equal(self.d_xy, other.d_xy)
        )

    __hash__ = None


def split_bin(pairs, l1: int, l2: int, *, min_size: int = 8) -> SplitBin:
    """Split a bin in data order.

    With ``t = (s - 4) // 4``, the first ``t1 = min(t, l1)`` observations give
    ``d_x``, the next ``t2 = min(t, l2)`` give ``d_y`` and observations
    ``2t .. 4t+3`` (0-based) form ``d_xy`` of size ``2t + 4``.  Anything else is
    dropped and counted in ``discarded``.

    Bins with ``4 <= s < 8`` are accepted when ``min_size=4``: then ``t = 0``,
    both weight parts are empty and ``d_xy`` is the whole bin.
    """
    arr = as_pairs(pairs)
    s = len(arr)
    if s < min_size or s < 4:
        raise DomainError(f"cannot split a bin of size {s} (need at least {min_size})")
    if s < 8:
        empty = np.empty(0, dtype=np.int64)
        return SplitBin(empty, empty.copy(), arr.copy(), 0, 0, 0, 0)
    t = (s - 4) // 4
    t1, t2 = min(t, l1), min(t, l2)
    d_x = arr[:t1, 0].copy()
    d_y = arr[t1 : t1 + t2, 1].copy()
    d_xy = arr[2 * t : 4 * t + 4].copy()
    return SplitBin(d_x, d_y, d_xy, t, t1, t2, s - t1 - t2 - len(d_xy))


def weights_from_split(sb: SplitBin, l1: int, l2: int) -> WeightVectors:
    eta = 1.0 + np.bincount(sb.d_x, minlength=l1 + 1)[1 : l1 + 1]
    ups = 1.0 + np.bincount(sb.d_y, minlength=l2 + 1)[1 : l2 + 1]
    return WeightVectors(eta, ups)


def weights_no_split(pairs, l1: int, l2: int) -> WeightVectors:
    arr = as_pairs(pairs)
    s = len(arr)
    if s < 1:
        raise DomainError("no-split weights need at least one observation")
    cx = np.bincount(arr[:, 0], minlength=l1 + 1)[1 : l1 + 1]
    cy = np.bincount(arr[:, 1], minlength=l2 + 1)[1 : l2 + 1]
    return WeightVectors(1.0 + min(s, l1) * cx / s, 1.0 + min(s, l2) * cy / s)
