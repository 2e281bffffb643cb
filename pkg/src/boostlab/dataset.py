"""Columnar datasets: CSV ingestion, preprocessing transforms, and feature binning.

Numeric columns are float64 with NaN as the missing sentinel; categorical
columns are int32 codes into a per-column label table, with -1 marking a
missing value. Datasets are treated as immutable after construction: every
transform returns a new Dataset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
TARGET = "target"

_KINDS = (NUMERIC, CATEGORICAL, TARGET)

MISSING_CODE = -1  # categorical missing sentinel


class DatasetError(ValueError):
    """Raised for schema violations, parse failures, and bad transform arguments."""


@dataclass(frozen=True)
class ColumnSchema:
    """Declared name/kind of one column, plus an optional token treated as missing."""

    name: str
    kind: str = NUMERIC
    missing_marker: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DatasetError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass
class Dataset:
    """A fixed-width columnar table.

    columns maps name -> float64 array (numeric/target) or int32 code array
    (categorical); labels maps categorical names -> list of label strings in
    interned (first-seen) order.
    """

    schema: list[ColumnSchema]
    columns: dict[str, np.ndarray]
    labels: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names in schema")
        if sum(1 for c in self.schema if c.kind == TARGET) > 1:
            raise DatasetError("more than one target column")
        lengths = {len(self.columns[n]) for n in names}
        if len(lengths) > 1:
            raise DatasetError(f"ragged columns: lengths {sorted(lengths)}")
        for c in self.schema:
            if c.kind == CATEGORICAL and c.name not in self.labels:
                raise DatasetError(f"categorical column {c.name!r} has no label table")

    @property
    def n_rows(self) -> int:
        if not self.schema:
            return 0
        return len(self.columns[self.schema[0].name])

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.schema]

    def schema_for(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise DatasetError(f"unknown column {name!r}")

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DatasetError(f"unknown column {name!r}")
        return self.columns[name]

    def target_name(self) -> str | None:
        for c in self.schema:
            if c.kind == TARGET:
                return c.name
        return None

    def feature_names(self, kinds=(NUMERIC, CATEGORICAL)) -> list[str]:
        return [c.name for c in self.schema if c.kind in kinds]

    def numeric_feature_names(self) -> list[str]:
        return [c.name for c in self.schema if c.kind == NUMERIC]

    def take_rows(self, idx: np.ndarray) -> "Dataset":
        cols = {n: v[idx] for n, v in self.columns.items()}
        return Dataset(list(self.schema), cols, dict(self.labels))

    def select_columns(self, names: list[str]) -> "Dataset":
        schema = [self.schema_for(n) for n in names]
        cols = {n: self.columns[n] for n in names}
        labels = {n: self.labels[n] for n in names if n in self.labels}
        return Dataset(schema, cols, labels)

    def is_missing(self, name: str) -> np.ndarray:
        """Boolean mask of missing cells in a column."""
        c = self.schema_for(name)
        v = self.columns[name]
        if c.kind == CATEGORICAL:
            return v == MISSING_CODE
        return np.isnan(v)

    def decoded(self, name: str) -> np.ndarray:
        """Categorical codes back to label strings (missing -> None)."""
        c = self.schema_for(name)
        if c.kind != CATEGORICAL:
            return self.columns[name]
        table = self.labels[name]
        return np.array(
            [table[i] if i != MISSING_CODE else None for i in self.columns[name]],
            dtype=object,
        )

    def summary(self) -> dict:
        """JSON-ready description: shape, per-column kind, missing counts, labels."""
        cols = []
        for c in self.schema:
            entry = {
                "name": c.name,
                "kind": c.kind,
                "missing_marker": c.missing_marker,
                "n_missing": int(self.is_missing(c.name).sum()),
            }
            if c.kind == CATEGORICAL:
                entry["labels"] = list(self.labels[c.name])
            cols.append(entry)
        return {"n_rows": self.n_rows, "n_columns": len(self.schema), "columns": cols}


# One canonical CSV dialect keeps fixtures byte-stable: comma separated,
# first row is the header, quoted fields use doubled-quote escaping.
class _Dialect(csv.Dialect):
    delimiter = ","
    quotechar = '"'
    doublequote = True
    skipinitialspace = False
    lineterminator = "\n"
    quoting = csv.QUOTE_MINIMAL


def load_csv(path, schema: list[ColumnSchema]) -> Dataset:
    """Read a CSV file into a typed Dataset.

    The header must contain exactly the schema's column names (any order).
    Numeric cells equal to the column's missing_marker become NaN; anything
    else that fails to parse raises with the offending row and column.
    """
    by_name = {c.name: c for c in schema}
    if len(by_name) != len(schema):
        raise DatasetError("duplicate column names in schema")
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh, dialect=_Dialect)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, no header") from None
        if set(header) != set(by_name):
            missing = sorted(set(by_name) - set(header))
            extra = sorted(set(header) - set(by_name))
            raise DatasetError(
                f"{path}: header mismatch (missing {missing}, unexpected {extra})"
            )
        raw = {name: [] for name in header}
        for row_i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {row_i} has {len(row)} cells, expected {len(header)}")
            for name, cell in zip(header, row):
                raw[name].append(cell)

    columns: dict[str, np.ndarray] = {}
    labels: dict[str, list[str]] = {}
    for c in schema:
        parsed = parse_cells(raw[c.name], c, where=str(path))
        if c.kind == CATEGORICAL:
            columns[c.name], labels[c.name] = parsed
        else:
            columns[c.name] = parsed
    return Dataset(list(schema), columns, labels)


def parse_cells(cells: list[str], c: ColumnSchema, where: str = "<data>"):
    """Parse raw string cells per the column's kind and missing_marker.

    Returns a float64 array for numeric/target columns, or a (codes, labels)
    pair for categorical ones.
    """
    if c.kind == CATEGORICAL:
        table: list[str] = []
        seen: dict[str, int] = {}
        codes = np.empty(len(cells), dtype=np.int32)
        for i, cell in enumerate(cells):
            if c.missing_marker is not None and cell == c.missing_marker:
                codes[i] = MISSING_CODE
                continue
            code = seen.get(cell)
            if code is None:
                code = len(table)
                seen[cell] = code
                table.append(cell)
            codes[i] = code
        return codes, table
    vals = np.empty(len(cells), dtype=np.float64)
    for i, cell in enumerate(cells):
        if c.missing_marker is not None and cell == c.missing_marker:
            vals[i] = np.nan
            continue
        try:
            vals[i] = float(cell)
        except ValueError:
            raise DatasetError(
                f"{where}: row {i + 1}, column {c.name!r}: cannot parse {cell!r} as a number"
            ) from None
    return vals


def write_csv(ds: Dataset, path) -> None:
    """Write in the canonical dialect so load_csv(write_csv(ds)) round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, dialect=_Dialect)
        writer.writerow(ds.column_names)
        cells_by_col = []
        for c in ds.schema:
            v = ds.columns[c.name]
            if c.kind == CATEGORICAL:
                table = ds.labels[c.name]
                cells = [table[i] if i != MISSING_CODE else (c.missing_marker or "") for i in v]
            else:
                cells = []
                for x in v:
                    if math.isnan(x):
                        if c.missing_marker is None:
                            raise DatasetError(
                                f"column {c.name!r} has missing values but no missing_marker"
                            )
                        cells.append(c.missing_marker)
                    else:
                        cells.append(repr(float(x)))
            cells_by_col.append(cells)
        for row in zip(*cells_by_col):
            writer.writerow(row)


def add_ratio_column(ds: Dataset, new_name: str, num: str, den: str, scale: float = 1.0) -> Dataset:
    """Append new_name = scale * num / den as a numeric column."""
    if new_name in ds.columns:
        raise DatasetError(f"column {new_name!r} already exists")
    for col in (num, den):
        if ds.schema_for(col).kind == CATEGORICAL:
            raise DatasetError(f"column {col!r} is categorical, ratio needs numeric inputs")
    d = ds.columns[den]
    zeros = np.flatnonzero(d == 0.0)
    if zeros.size:
        raise DatasetError(f"zero denominator in {den!r} at row {int(zeros[0])}")
    ratio = scale * ds.columns[num] / d
    schema = list(ds.schema) + [ColumnSchema(new_name, NUMERIC)]
    cols = dict(ds.columns)
    cols[new_name] = ratio
    return Dataset(schema, cols, dict(ds.labels))


def filter_rows(ds: Dataset, column: str, excluded) -> Dataset:
    """Keep rows whose value in `column` is not in `excluded` (order preserved).

    For categorical columns the excluded values are label strings and are also
    removed from the column's label table (remaining codes are recompacted);
    for numeric/target columns they are numbers.
    """
    c = ds.schema_for(column)
    v = ds.columns[column]
    if c.kind == CATEGORICAL:
        table = ds.labels[column]
        excl_set = set(excluded)
        bad_codes = {i for i, lbl in enumerate(table) if lbl in excl_set}
        keep = ~np.isin(v, list(bad_codes)) if bad_codes else np.ones(len(v), dtype=bool)
        out = ds.take_rows(np.flatnonzero(keep))
        if bad_codes:
            remap = np.full(len(table), MISSING_CODE, dtype=np.int32)
            new_table = []
            for code, lbl in enumerate(table):
                if code not in bad_codes:
                    remap[code] = len(new_table)
                    new_table.append(lbl)
            codes = out.columns[column]
            new_codes = np.where(codes == MISSING_CODE, MISSING_CODE, remap[codes])
            cols = dict(out.columns)
            cols[column] = new_codes.astype(np.int32)
            labels = dict(out.labels)
            labels[column] = new_table
            out = Dataset(list(out.schema), cols, labels)
        return out
    excl = [float(x) for x in excluded]
    keep = ~np.isin(v, excl) if excl else np.ones(len(v), dtype=bool)
    return ds.take_rows(np.flatnonzero(keep))


def drop_missing(ds: Dataset, columns: list[str] = ()) -> Dataset:
    """Drop the listed columns, then drop every row still containing a missing value."""
    for name in columns:
        ds.schema_for(name)  # unknown column -> error
    keep_cols = [c.name for c in ds.schema if c.name not in set(columns)]
    out = ds.select_columns(keep_cols)
    if not keep_cols:
        return out
    bad = np.zeros(out.n_rows, dtype=bool)
    for name in keep_cols:
        bad |= out.is_missing(name)
    return out.take_rows(np.flatnonzero(~bad))


def one_hot_encode(ds: Dataset, column: str) -> Dataset:
    """Replace a categorical column with k 0/1 indicator columns named column=label.

    A missing value yields all-zero indicators; otherwise exactly one
    indicator is 1 per row.
    """
    c = ds.schema_for(column)
    if c.kind != CATEGORICAL:
        raise DatasetError(f"column {column!r} is not categorical")
    table = ds.labels[column]
    if len(table) < 2:
        raise DatasetError(f"column {column!r} has {len(table)} level(s); one-hot needs >= 2")
    codes = ds.columns[column]
    schema: list[ColumnSchema] = []
    cols = dict(ds.columns)
    del cols[column]
    labels = {n: t for n, t in ds.labels.items() if n != column}
    for sc in ds.schema:
        if sc.name != column:
            schema.append(sc)
            continue
        for code, lbl in enumerate(table):
            name = f"{column}={lbl}"
            if name in ds.columns:
                raise DatasetError(f"one-hot name collision on {name!r}")
            schema.append(ColumnSchema(name, NUMERIC))
            cols[name] = (codes == code).astype(np.float64)
    return Dataset(schema, cols, labels)


@dataclass
class RecipeSpec:
    """Declarative preprocessing: derived ratio columns, row filters, column
    drops (with removal of rows that still have missing values), and an
    optional shape check applied after all transformations."""

    name: str
    derived_columns: list[tuple[str, str, str, float]] = field(default_factory=list)
    row_filters: list[tuple[str, list]] = field(default_factory=list)
    dropped_columns: list[str] = field(default_factory=list)
    drop_missing_rows: bool = False
    expected_shape: tuple[int | None, int | None] | None = None


def apply_recipe(ds: Dataset, spec: RecipeSpec) -> tuple[Dataset, list[str]]:
    """Run a RecipeSpec (derive, filter, drop); returns the result plus any
    shape-check warnings. Derived columns whose inputs are absent are skipped
    with a warning rather than failing, since upstream files get revised."""
    warnings: list[str] = []
    out = ds
    for new_name, num, den, scale in spec.derived_columns:
        if num not in out.columns or den not in out.columns:
            warnings.append(
                f"{spec.name}: skipped derived column {new_name!r} "
                f"(needs {num!r} and {den!r})")
            continue
        out = add_ratio_column(out, new_name, num, den, scale)
    for column, excluded in spec.row_filters:
        out = filter_rows(out, column, excluded)
    if spec.dropped_columns or spec.drop_missing_rows:
        out = drop_missing(out, spec.dropped_columns)
    if spec.expected_shape is not None:
        want_rows, want_cols = spec.expected_shape
        got = (out.n_rows, len(out.schema))
        if (want_rows is not None and got[0] != want_rows) or \
           (want_cols is not None and got[1] != want_cols):
            warnings.append(
                f"{spec.name}: shape after preprocessing is {got[0]}x{got[1]}, "
                f"expected {want_rows}x{want_cols}")
    return out, warnings


def retype_target(ds: Dataset, column: str) -> Dataset:
    """Mark `column` as the target (any previous target reverts to numeric).

    A categorical column is converted to numeric values: its labels when they
    all parse as numbers, otherwise its integer codes (missing becomes NaN).
    """
    c = ds.schema_for(column)
    cols = dict(ds.columns)
    labels = dict(ds.labels)
    schema = []
    for sc in ds.schema:
        if sc.name == column:
            schema.append(ColumnSchema(sc.name, TARGET, sc.missing_marker))
        elif sc.kind == TARGET:
            schema.append(ColumnSchema(sc.name, NUMERIC, sc.missing_marker))
        else:
            schema.append(sc)
    if c.kind == CATEGORICAL:
        table = ds.labels[column]
        try:
            values = np.array([float(lbl) for lbl in table])
        except ValueError:
            values = np.arange(len(table), dtype=np.float64)
        codes = ds.columns[column]
        out = np.full(len(codes), np.nan)
        present = codes != MISSING_CODE
        out[present] = values[codes[present]]
        cols[column] = out
        del labels[column]
    return Dataset(schema, cols, labels)


def train_test_split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then cut at round(train_fraction * n) (ties round up)."""
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = ds.n_rows
    if n < 2:
        raise DatasetError("need at least 2 rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(train_fraction * n + 0.5))
    return ds.take_rows(perm[:n_train]), ds.take_rows(perm[n_train:])


@dataclass
class BinnedDataset:
    """Per-feature quantile bins over the numeric features of a Dataset.

    boundaries[f] holds each bin's inclusive upper edge (last edge is the
    feature's maximum), so value v lands in the first bin with v <= edge.
    Missing values map to the reserved extra bin n_bins(f).
    """

    source: Dataset
    feature_names: list[str]
    bins: dict[str, np.ndarray]          # uint8/uint16 bin indices per feature
    boundaries: dict[str, np.ndarray]    # float64 upper edges per feature
    max_bins: int

    def n_bins(self, name: str) -> int:
        return len(self.boundaries[name])

    def missing_bin(self, name: str) -> int:
        return self.n_bins(name)

    @property
    def n_rows(self) -> int:
        return self.source.n_rows

    def codes_matrix(self) -> np.ndarray:
        """Row-major int matrix of bin indices, one column per feature."""
        return np.column_stack([self.bins[n].astype(np.int64) for n in self.feature_names])


def _quantile_boundaries(values: np.ndarray, max_bins: int) -> np.ndarray:
    """Upper bin edges for one feature: midpoints between distinct values,
    thinned to at most max_bins equal-mass bins when there are too many."""
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        return np.array([np.inf])
    u = np.unique(finite)
    if len(u) <= max_bins:
        inner = (u[:-1] + u[1:]) / 2.0
        return np.append(inner, u[-1])
    s = np.sort(finite)
    n = len(s)
    cuts = []
    for j in range(1, max_bins):
        pos = (j * n) // max_bins
        if pos <= 0 or pos >= n:
            continue
        v_left = s[pos - 1]
        if v_left == s[pos]:
            # quantile fell inside a run of equal values: cut after the run
            nxt = np.searchsorted(u, v_left, side="right")
            if nxt >= len(u):
                continue
            cuts.append((v_left + u[nxt]) / 2.0)
        else:
            cuts.append((v_left + s[pos]) / 2.0)
    inner = np.unique(np.asarray(cuts, dtype=np.float64))
    return np.append(inner, u[-1])


def bin_features(ds: Dataset, max_bins: int) -> BinnedDataset:
    """Quantile-bin every numeric feature column (target and categoricals excluded)."""
    if max_bins < 2:
        raise DatasetError(f"max_bins must be >= 2, got {max_bins}")
    names = ds.numeric_feature_names()
    if not names:
        raise DatasetError("dataset has no numeric feature columns to bin")
    bins: dict[str, np.ndarray] = {}
    bounds: dict[str, np.ndarray] = {}
    for name in names:
        v = ds.columns[name]
        edges = _quantile_boundaries(v, max_bins)
        nb = len(edges)
        dtype = np.uint8 if nb + 1 <= 256 else np.uint16
        idx = np.searchsorted(edges, v, side="left").astype(dtype)
        idx[np.isnan(v)] = nb  # reserved missing bin
        bins[name] = idx
        bounds[name] = edges
    return BinnedDataset(ds, names, bins, bounds, max_bins)
