"""CSV ingestion and the bundled admissions data.

Two layouts are accepted, both with 1-based integer categories:

* observations: header ``x,y,z``, one row per observation;
* aggregated:   header ``x,y,z,count``, expanded to ``count`` observations.
"""

from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path

import numpy as np

from .tables import Dataset, InputError

OBS_HEADER = ["x", "y", "z"]
COUNT_HEADER = ["x", "y", "z", "count"]


def parse_csv(text: str, l1=None, l2=None, d=None) -> Dataset:
    reader = csv.reader(io.StringIO(text.lstrip("\ufeff"), newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError("empty CSV: expected a header line") from None
    if header not in (OBS_HEADER, COUNT_HEADER):
        raise InputError(f"header must be 'x,y,z' or 'x,y,z,count', got {','.join(header)!r}")
    width = len(header)
    cols = [[] for _ in range(3)]
    counts = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise InputError(f"line {lineno}: expected {width} fields, got {len(row)}")
        try:
            vals = [int(c.strip()) for c in row]
        except ValueError:
            raise InputError(f"line {lineno}: non-integer field in {row!r}") from None
        if width == 4 and vals[3] < 0:
            raise InputError(f"line {lineno}: negative count {vals[3]}")
        for i in range(3):
            cols[i].append(vals[i])
        counts.append(vals[3] if width == 4 else 1)
    reps = np.asarray(counts, dtype=np.int64)
    x, y, z = (np.repeat(np.asarray(c, dtype=np.int64), reps) for c in cols)
    return Dataset.from_columns(x, y, z, l1=l1, l2=l2, d=d)


def read_csv(path, l1=None, l2=None, d=None) -> Dataset:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_csv(text, l1=l1, l2=l2, d=d)


def admissions_csv() -> str:
    """Aggregated Berkeley 1973 admissions table (six largest departments).

    x: 1 = men, 2 = women; y: 1 = admitted, 2 = rejected; z: departments A-F.
    Admitted counts are the published admission percentages applied to the
    applicant counts, rounded to the nearest integer.
    """
    return resources.files(__package__).joinpath("data/admissions.csv").read_text(encoding="utf-8")


def admissions() -> Dataset:
    return parse_csv(admissions_csv(), l1=2, l2=2, d=6)
