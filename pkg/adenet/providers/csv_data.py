# adenet/providers/csv_data.py
import csv
import math
from typing import List, Tuple

import numpy as np

from ..core import Dataset, InputFormatError


def read_dataset(path: str) -> Tuple[Dataset, List[str]]:
    """
    CSV with a header row: first column is y, the rest are predictors.
    Returns the (uncentered) dataset and the predictor names.
    Errors name the file line and the column header.
    """
    try:
        f = open(path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise InputFormatError(f"cannot open {path}: {e.strerror}") from e
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError("empty file", line=1) from None
        except csv.Error as e:
            raise InputFormatError(f"bad CSV: {e}", line=1) from e
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise InputFormatError("need a response column and at least one predictor", line=1)

        rows = []
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise InputFormatError(f"expected {len(header)} fields, got {len(row)}", line=line)
                values = []
                for name, cell in zip(header, row):
                    try:
                        v = float(cell)
                    except ValueError:
                        raise InputFormatError(f"not a number: {cell.strip()!r}", line=line, column=name) from None
                    if not math.isfinite(v):
                        raise InputFormatError(f"non-finite value {cell.strip()!r}", line=line, column=name)
                    values.append(v)
                rows.append(values)
        except csv.Error as e:
            raise InputFormatError(f"bad CSV: {e}", line=reader.line_num) from e

    if len(rows) < 2:
        raise InputFormatError("need at least 2 data rows", line=len(rows) + 1)
    M = np.array(rows, dtype=float)
    return Dataset(M[:, 0], M[:, 1:]), header[1:]
