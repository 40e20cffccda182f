"""Vectorised per-bin statistics over many Y-permutations at once.

Permuting Y within a bin leaves both margins unchanged, so every statistic is
a fixed function of the cell counts.  A ``BinKernel`` precomputes everything
that depends on the margins and then evaluates a whole block of permutations
with one counting pass.

Cells are always reduced in (row, cell-code) order with a sequential
``bincount``, so two permutations that produce the same table produce
bit-identical statistics.  The observed statistic goes through the same path;
ties between observed and permuted values are therefore exact.
"""

from __future__ import annotations

import math

import numpy as np

from .statistics import Method, omega
from .ustat import split_bin

# rows x observations per block; bounds memory of the permuted-index arrays
BLOCK_BUDGET = 1 << 21
MAX_BLOCK = 256


def block_size(n: int) -> int:
    return int(max(1, min(MAX_BLOCK, BLOCK_BUDGET // max(n, 1))))


def _count_in(values: np.ndarray, sample: np.ndarray) -> np.ndarray:
    """Occurrences of each entry of ``values`` in ``sample``."""
    if sample.size == 0:
        return np.zeros(len(values), dtype=np.float64)
    u, c = np.unique(sample, return_counts=True)
    idx = np.minimum(np.searchsorted(u, values), len(u) - 1)
    return np.where(u[idx] == values, c[idx], 0).astype(np.float64)


class BinKernel:
    """Statistic of one bin as a function of a permutation of its Y values.

    ``kind`` is ``"u"`` (weighted U-statistic), ``"chi2"`` or ``"g"``.
    ``eta`` / ``ups`` are weights aligned with the sorted distinct X / Y values
    of the bin (``None`` means unit weights).  Results are multiplied by
    ``scale``.
    """

    def __init__(self, x, y, kind, scale=1.0, weight_fn=None):
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        self.kind = kind
        self.scale = float(scale)
        self.s = s = len(x)
        xs, self.xc = np.unique(x, return_inverse=True)
        ys, self.yc = np.unique(y, return_inverse=True)
        self.k1, self.k2 = len(xs), len(ys)
        self.K = self.k1 * self.k2
        ox = np.bincount(self.xc).astype(np.float64)
        oy = np.bincount(self.yc).astype(np.float64)
        self.ox, self.oy = ox, oy
        self.dense = self.K <= 2 * s + 64
        self.constant = self.k1 == 1 or self.k2 == 1

        if kind == "u":
            if s < 4:
                raise ValueError("U-statistic needs at least 4 observations")
            if weight_fn is None:
                eta, ups = np.ones(self.k1), np.ones(self.k2)
            else:
                eta, ups = weight_fn(xs, ox, ys, oy)
            self.iwx = 1.0 / np.asarray(eta, dtype=np.float64)
            self.iwy = 1.0 / np.asarray(ups, dtype=np.float64)
            A2 = math.fsum((ox * ox - ox) * self.iwx) * math.fsum((oy * oy - oy) * self.iwy)
            self.a2_term = A2 / ((s - 1) * (s - 2))
            if self.dense:
                w, c = self._cell_coefs(*np.divmod(np.arange(self.K), self.k2))
                self.w_cells, self.c_cells = w, c
        elif kind in ("chi2", "g"):
            if self.dense:
                self.e_cells = self._inv_expected(*np.divmod(np.arange(self.K), self.k2))
        else:
            raise ValueError(f"unknown kernel kind {kind!r}")

    def _cell_coefs(self, q, r):
        w = self.iwx[q] * self.iwy[r]
        oq, orr = self.ox[q], self.oy[r]
        return w, (oq * orr - oq - orr + 1.0) * w

    def _inv_expected(self, q, r):
        return self.s / (self.ox[q] * self.oy[r])

    def _cells(self, ycodes):
        """Nonzero cells of every row: (row, cell code, count), sorted by row then code."""
        B = ycodes.shape[0]
        codes = self.xc[None, :] * self.k2 + ycodes
        codes += (np.arange(B, dtype=np.int64) * self.K)[:, None]
        if self.dense:
            counts = np.bincount(codes.ravel(), minlength=B * self.K)
            flat = np.flatnonzero(counts)
            o = counts[flat]
        else:
            flat = np.sort(codes, axis=None)
            start = np.empty(flat.size, dtype=bool)
            start[0] = True
            np.not_equal(flat[1:], flat[:-1], out=start[1:])
            idx = np.flatnonzero(start)
            o = np.diff(np.append(idx, flat.size))
            flat = flat[idx]
        row, cell = np.divmod(flat, self.K)
        return row, cell, o.astype(np.float64)

    def evaluate(self, ycodes: np.ndarray) -> np.ndarray:
        """Scaled statistic for each row of permuted Y codes, shape (B, s)."""
        ycodes = np.asarray(ycodes, dtype=np.int64)
        B = ycodes.shape[0]
        if self.constant:
            # one row or one column: every statistic is exactly zero
            return np.zeros(B)
        row, cell, o = self._cells(ycodes)
        s = self.s
        if self.kind == "u":
            if self.dense:
                w, c = self.w_cells[cell], self.c_cells[cell]
            else:
                w, c = self._cell_coefs(*np.divmod(cell, self.k2))
            A1 = np.bincount(row, weights=(o * o - o) * w, minlength=B)
            A3 = np.bincount(row, weights=o * c, minlength=B)
            stat = (A1 + self.a2_term - 2.0 * A3 / (s - 2)) / (s * (s - 3))
        else:
            e = self.e_cells[cell] if self.dense else self._inv_expected(*np.divmod(cell, self.k2))
            if self.kind == "chi2":
                stat = np.maximum(np.bincount(row, weights=o * o * e, minlength=B) - s, 0.0)
            else:
                stat = np.maximum(2.0 * np.bincount(row, weights=o * np.log(o * e), minlength=B), 0.0)
        return self.scale * stat

    def observed(self) -> float:
        return float(self.evaluate(self.yc[None, :])[0])

    def replicates(self, rng: np.random.Generator, nrep: int) -> np.ndarray:
        """Statistics of ``nrep`` independent uniform permutations of Y."""
        if self.constant:
            return np.zeros(nrep)
        perms = np.tile(self.yc, (nrep, 1))
        rng.permuted(perms, axis=1, out=perms)
        return self.evaluate(perms)


def build_kernels(binned, method: Method):
    """Kernels for all bins that enter the statistic.

    Returns ``(kernels, skipped_bins, discarded)`` where ``kernels`` is a list
    of ``(m, BinKernel)`` in bin order and ``discarded`` maps bins to the
    number of observations dropped by sample splitting.
    """
    method = Method(method)
    l1, l2 = binned.l1, binned.l2
    kernels, skipped, discarded = [], [], {}
    for m, pairs in enumerate(binned.bins, start=1):
        s = len(pairs)
        if method.classical:
            if s == 0:
                skipped.append(m)
                continue
            kernels.append((m, BinKernel(pairs[:, 0], pairs[:, 1], method.value)))
            continue
        if s < 4:
            skipped.append(m)
            continue
        if method is Method.UCI:
            k = BinKernel(pairs[:, 0], pairs[:, 1], "u", scale=s)
        elif method is Method.WUCI:

            def no_split(xs, ox, ys, oy, s=s):
                return 1.0 + min(s, l1) * ox / s, 1.0 + min(s, l2) * oy / s

            k = BinKernel(pairs[:, 0], pairs[:, 1], "u", scale=s * omega(s, l1, l2), weight_fn=no_split)
        else:
            sb = split_bin(pairs, l1, l2, min_size=4)
            discarded[m] = sb.discarded

            def from_split(xs, ox, ys, oy, sb=sb):
                return 1.0 + _count_in(xs, sb.d_x), 1.0 + _count_in(ys, sb.d_y)

            k = BinKernel(sb.d_xy[:, 0], sb.d_xy[:, 1], "u", scale=s * omega(s, l1, l2), weight_fn=from_split)
        kernels.append((m, k))
    return kernels, skipped, discarded
