"""Result tables, CSV/TSV emission and log-log slope fitting."""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .fitting import PowerFit, fit_loglog


def format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


@dataclass
class ResultTable:
    columns: tuple
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        if len(set(self.columns)) != len(self.columns):
            raise InputError("duplicate column names")

    def append(self, row):
        if len(row) != len(self.columns):
            raise InputError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name):
        try:
            i = self.columns.index(name)
        except ValueError:
            raise InputError(f"no column {name!r}") from None
        return [r[i] for r in self.rows]

    def array(self, name):
        return np.asarray(self.column(name), dtype=float)

    def where(self, **match):
        """Sub-table of rows whose named columns equal the given values."""
        idx = [self.columns.index(k) for k in match]
        want = list(match.values())
        rows = [r for r in self.rows if all(r[i] == w for i, w in zip(idx, want))]
        return ResultTable(self.columns, rows, dict(self.metadata))

    def body(self, delimiter=","):
        """Column header plus data rows, without metadata."""
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_cell(c) for c in r])
        return buf.getvalue()

    def to_tsv(self):
        return self.body(delimiter="\t")


class CsvStream:
    """Writes a ``#`` metadata header, rows as they arrive, then a ``#`` footer."""

    def __init__(self, fh, columns, header):
        self._fh = fh
        self._writer = csv.writer(fh, lineterminator="\n")
        for k, v in header.items():
            fh.write(f"# {k} = {format_cell(v)}\n")
        self._writer.writerow(columns)
        fh.flush()

    def write_rows(self, rows):
        for r in rows:
            self._writer.writerow([format_cell(c) for c in r])
        self._fh.flush()

    def footer(self, items):
        for k, v in items.items():
            self._fh.write(f"# {k} = {format_cell(v)}\n")
        self._fh.flush()


def csv_body(text):
    """The non-metadata lines of an emitted CSV."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def fit_slope(table, x_col, y_col, drop_smallest=0):
    """Least-squares ``(slope, intercept, r2)`` of log y against log x.

    The ``drop_smallest`` rows with the smallest x are discarded first.
    """
    x = table.array(x_col)
    y = table.array(y_col)
    return fit_loglog(x, y, drop_smallest)


__all__ = ["ResultTable", "CsvStream", "csv_body", "fit_slope", "format_cell", "PowerFit"]
