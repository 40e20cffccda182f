"""Discrete (x, y, z) datasets, per-z binning and sparse contingency tables.

All public interfaces use 1-based category indices: ``x`` in ``[1, l1]``,
``y`` in ``[1, l2]`` and ``z`` in ``[1, d]``.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class InputError(ValueError):
    """Raised for malformed or out-of-range observations."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations of (X, Y, Z) with declared domain sizes.

    Stored column-wise; ``x[i], y[i], z[i]`` is the i-th observation.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    l1: int
    l2: int
    d: int

    def __post_init__(self):
        x, y, z = (_frozen(np.asarray(a).reshape(-1)) for a in (self.x, self.y, self.z))
        if not (len(x) == len(y) == len(z)):
            raise InputError("x, y and z must have the same length")
        for name in ("l1", "l2", "d"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InputError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for col, name, upper in ((x, "x", self.l1), (y, "y", self.l2), (z, "z", self.d)):
            bad = np.flatnonzero((col < 1) | (col > upper))
            if bad.size:
                i = int(bad[0])
                raise InputError(
                    f"row {i + 1}: {name}={int(col[i])} outside [1, {upper}] "
                    f"(observation {(int(x[i]), int(y[i]), int(z[i]))})"
                )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.x)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            (self.l1, self.l2, self.d) == (other.l1, other.l2, other.d)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.z, other.z)
        )

    __hash__ = None

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[Sequence[int]],
        l1: int | None = None,
        l2: int | None = None,
        d: int | None = None,
    ) -> "Dataset":
        """Build a dataset from ``(x, y, z)`` triples.

        Domain sizes that are not given are inferred as the largest observed
        index; inference is logged since the weighted statistics depend on
        ``l1`` and ``l2``.
        """
        arr = np.asarray(list(triples), dtype=np.int64).reshape(-1, 3)
        return cls.from_columns(arr[:, 0], arr[:, 1], arr[:, 2], l1=l1, l2=l2, d=d)

    @classmethod
    def from_columns(cls, x, y, z, l1=None, l2=None, d=None) -> "Dataset":
        x, y, z = (np.asarray(a, dtype=np.int64).reshape(-1) for a in (x, y, z))
        sizes = {}
        for name, col, given in (("l1", x, l1), ("l2", y, l2), ("d", z, d)):
            if given is None:
                given = max(int(col.max()) if col.size else 1, 1)
                log.info("inferred %s=%d from the largest observed index", name, given)
            sizes[name] = given
        return cls(x, y, z, **sizes)

    def triples(self) -> list[tuple[int, int, int]]:
        return list(zip(self.x.tolist(), self.y.tolist(), self.z.tolist()))


@dataclass(frozen=True, eq=False)
class BinnedData:
    """Observations grouped by z.

    ``bins[m - 1]`` is an ``(sigma_m, 2)`` integer array of the (x, y) pairs
    with ``z == m``, in original dataset order.
    """

    bins: tuple[np.ndarray, ...]
    l1: int
    l2: int

    @property
    def d(self) -> int:
        return len(self.bins)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.bins)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def bin(self, m: int) -> np.ndarray:
        """Pairs of the bin with 1-based index ``m``."""
        return self.bins[m - 1]


def partition_by_z(data: Dataset) -> BinnedData:
    order = np.argsort(data.z, kind="stable")
    counts = np.bincount(data.z, minlength=data.d + 1)[1:]
    pairs = np.column_stack([data.x, data.y])[order]
    bins = []
    for chunk in np.split(pairs, np.cumsum(counts)[:-1]):
        chunk = np.ascontiguousarray(chunk)
        chunk.setflags(write=False)
        bins.append(chunk)
    return BinnedData(tuple(bins), data.l1, data.l2)


def as_pairs(pairs) -> np.ndarray:
    """Coerce a list of (x, y) tuples or an (n, 2) array to an int64 array."""
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError(f"expected (n, 2) pairs, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SparseTable:
    """Nonzero cell counts and margins of a two-way table.

    Zero cells and zero margins are never stored, so the size of the table is
    bounded by the number of observations rather than ``l1 * l2``.
    """

    cells: dict[tuple[int, int], int]
    row_margins: dict[int, int]
    col_margins: dict[int, int]
    sigma: int = field(default=0)

    def expand(self) -> list[tuple[int, int]]:
        """The multiset of pairs represented by the table (sorted)."""
        out = []
        for cell in sorted(self.cells):
            out.extend([cell] * self.cells[cell])
        return out


def build_sparse_table(pairs) -> SparseTable:
    arr = as_pairs(pairs)
    xs = arr[:, 0].tolist()
    ys = arr[:, 1].tolist()
    cells = Counter(zip(xs, ys))
    return SparseTable(
        cells=dict(cells),
        row_margins=dict(Counter(xs)),
        col_margins=dict(Counter(ys)),
        sigma=len(xs),
    )
