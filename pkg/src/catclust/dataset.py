"""Categorical data matrix, schemas, indicator coding and cross-tabulation.

Categories are addressed by *position*: the index of a code in the
variable's ordered category list, with the missing category (when a
variable declares one) placed last.  Codes themselves are only labels, so a
codebook that skips values (1, 2, 4, 8) works the same as 1..J.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DataValidationError,
    EmptyDatasetError,
    SchemaError,
    UsageError,
)

log = logging.getLogger(__name__)

ORDINAL = "ordinal"
NOMINAL = "nominal"
ORDINAL_WITH_MISSING = "ordinal_with_missing"
SCALES = (ORDINAL, NOMINAL, ORDINAL_WITH_MISSING)


@dataclass(frozen=True)
class VariableSchema:
    """One categorical variable.

    ``categories`` lists the substantive codes; for ordinal scales the list
    order is the ordinal order.  ``missing_code`` is required for
    ``ordinal_with_missing`` and allowed for ``nominal``, where it is just
    one more nominal level.
    """

    name: str
    scale: str
    categories: tuple[int, ...]
    missing_code: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(int(c) for c in self.categories))
        if self.scale not in SCALES:
            raise SchemaError(
                f"variable {self.name!r}: unknown scale {self.scale!r} "
                f"(expected one of {', '.join(SCALES)})"
            )
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"variable {self.name!r}: duplicate category codes")
        if not self.categories:
            raise SchemaError(f"variable {self.name!r}: no categories")
        if self.scale == ORDINAL_WITH_MISSING and self.missing_code is None:
            raise SchemaError(
                f"variable {self.name!r}: scale ordinal_with_missing requires missing_code"
            )
        if self.scale == ORDINAL and self.missing_code is not None:
            raise SchemaError(
                f"variable {self.name!r}: use scale ordinal_with_missing to declare "
                "a missing code on an ordinal variable"
            )
        if self.missing_code is not None:
            object.__setattr__(self, "missing_code", int(self.missing_code))
            if self.missing_code in self.categories:
                raise SchemaError(
                    f"variable {self.name!r}: missing_code {self.missing_code} "
                    "is also a substantive category"
                )
        if self.scale in (ORDINAL, ORDINAL_WITH_MISSING) and len(self.categories) < 2:
            raise SchemaError(
                f"variable {self.name!r}: ordinal scales need at least 2 categories"
            )

    @property
    def codes(self) -> tuple[int, ...]:
        """All codes in position order (missing last)."""
        if self.missing_code is None:
            return self.categories
        return self.categories + (self.missing_code,)

    @property
    def n_categories(self) -> int:
        return len(self.codes)

    @property
    def is_ordinal(self) -> bool:
        return self.scale in (ORDINAL, ORDINAL_WITH_MISSING)

    @property
    def missing_position(self) -> int | None:
        if self.missing_code is None:
            return None
        return len(self.categories)

    def position(self, code: int) -> int:
        try:
            return self.codes.index(int(code))
        except ValueError:
            raise KeyError(code) from None

    def label(self, positions: Iterable[int]) -> str:
        """Display label such as ``B1+2`` for a set of category positions."""
        codes = [str(self.codes[p]) for p in sorted(positions)]
        return self.name + "+".join(codes)

    def without_missing(self) -> "VariableSchema":
        if self.missing_code is None:
            return self
        scale = ORDINAL if self.scale == ORDINAL_WITH_MISSING else self.scale
        return VariableSchema(self.name, scale, self.categories, None)

    def to_dict(self) -> dict:
        out = {"name": self.name, "scale": self.scale, "categories": list(self.categories)}
        if self.missing_code is not None:
            out["missing_code"] = self.missing_code
        return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` observations on ``Q`` categorical variables, stored as codes."""

    schemas: tuple[VariableSchema, ...]
    codes: np.ndarray
    _positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        schemas = tuple(self.schemas)
        object.__setattr__(self, "schemas", schemas)
        codes = np.asarray(self.codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(schemas):
            raise SchemaError(
                f"code matrix has shape {codes.shape}, expected (n, {len(schemas)})"
            )
        if codes.shape[0] < 1:
            raise EmptyDatasetError("dataset has no observations")
        if len(schemas) < 2:
            raise SchemaError("at least two variables are required")
        names = [s.name for s in schemas]
        if len(set(names)) != len(names):
            raise SchemaError("variable names must be unique")
        positions = np.empty_like(codes)
        for q, schema in enumerate(schemas):
            lookup = {c: p for p, c in enumerate(schema.codes)}
            col = codes[:, q]
            for code in np.unique(col):
                if int(code) not in lookup:
                    row = int(np.flatnonzero(col == code)[0])
                    raise DataValidationError(
                        f"row {row + 1}, column {schema.name!r}: code {int(code)} "
                        f"is not a category of this variable",
                        row=row + 1, column=schema.name, code=int(code),
                    )
                positions[col == code, q] = lookup[int(code)]
        object.__setattr__(self, "codes", _frozen(codes))
        object.__setattr__(self, "_positions", _frozen(positions))

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def Q(self) -> int:
        return len(self.schemas)

    @property
    def J_q(self) -> tuple[int, ...]:
        return tuple(s.n_categories for s in self.schemas)

    @property
    def J(self) -> int:
        return sum(self.J_q)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.schemas)

    def positions(self) -> np.ndarray:
        """``n x Q`` matrix of category positions."""
        return self._positions

    def missing_mask(self) -> np.ndarray:
        mask = np.zeros(self.codes.shape, dtype=bool)
        for q, schema in enumerate(self.schemas):
            if schema.missing_code is not None:
                mask[:, q] = self.codes[:, q] == schema.missing_code
        return mask

    def frequencies(self) -> list[dict[int, int]]:
        """Per variable, ``{code: count}`` in position order (zeros kept)."""
        out = []
        for q, schema in enumerate(self.schemas):
            counts = np.bincount(self._positions[:, q], minlength=schema.n_categories)
            out.append({c: int(k) for c, k in zip(schema.codes, counts)})
        return out


def _parse_schema_obj(obj) -> list[VariableSchema]:
    if isinstance(obj, Mapping):
        if "variables" not in obj:
            raise SchemaError("schema must contain a 'variables' list")
        obj = obj["variables"]
    if not isinstance(obj, list):
        raise SchemaError("schema 'variables' must be a list")
    out = []
    allowed = {"name", "scale", "categories", "missing_code"}
    for i, entry in enumerate(obj):
        if isinstance(entry, VariableSchema):
            out.append(entry)
            continue
        if not isinstance(entry, Mapping):
            raise SchemaError(f"schema entry {i} is not a mapping")
        extra = set(entry) - allowed
        if extra:
            raise SchemaError(f"schema entry {i}: unknown keys {sorted(extra)}")
        for key in ("name", "scale", "categories"):
            if key not in entry:
                raise SchemaError(f"schema entry {i}: missing key {key!r}")
        try:
            cats = [int(c) for c in entry["categories"]]
            missing = entry.get("missing_code")
            missing = None if missing is None else int(missing)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"schema entry {i}: category codes must be integers") from exc
        out.append(VariableSchema(str(entry["name"]), str(entry["scale"]), tuple(cats), missing))
    return out


def read_schema(source) -> list[VariableSchema]:
    """Read a schema from a path, a text stream, or an already parsed object.

    Files ending in ``.json`` are parsed as JSON, anything else as YAML
    (which also accepts JSON).
    """
    if isinstance(source, (list, Mapping)):
        return _parse_schema_obj(source)
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text(encoding="utf-8")
        is_json = path.suffix.lower() == ".json"
    else:
        text = source.read()
        is_json = False
    try:
        if is_json:
            obj = json.loads(text)
        else:
            import yaml

            obj = yaml.safe_load(text)
    except Exception as exc:  # yaml and json raise unrelated types
        raise SchemaError(f"cannot parse schema: {exc}") from exc
    return _parse_schema_obj(obj)


def load_dataset(codes_source, schema_source, delimiter: str = ",") -> Dataset:
    """Read a delimited code file and validate it against a schema.

    Columns are matched to schema entries by header name; the schema order
    defines the variable order.  Blank cells become the variable's missing
    code when it has one.
    """
    schemas = read_schema(schema_source)
    if isinstance(codes_source, (str, Path)):
        with open(codes_source, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    else:
        rows = list(csv.reader(codes_source, delimiter=delimiter))
    if not rows:
        raise SchemaError("data file is empty (no header row)")
    header = [h.strip() for h in rows[0]]
    names = [s.name for s in schemas]
    if sorted(header) != sorted(names) or len(set(header)) != len(header):
        missing = sorted(set(names) - set(header))
        extra = sorted(set(header) - set(names))
        raise SchemaError(
            f"header does not match schema (missing: {missing}, unexpected: {extra})"
        )
    order = [header.index(name) for name in names]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise EmptyDatasetError("data file has a header but no rows")
    codes = np.empty((len(body), len(schemas)), dtype=np.int64)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataValidationError(
                f"row {i + 1}: {len(row)} cells, expected {len(header)}", row=i + 1
            )
        for q, j in enumerate(order):
            cell = row[j].strip()
            schema = schemas[q]
            if cell == "":
                if schema.missing_code is None:
                    raise DataValidationError(
                        f"row {i + 1}, column {schema.name!r}: blank cell and no "
                        "missing code declared",
                        row=i + 1, column=schema.name,
                    )
                codes[i, q] = schema.missing_code
                continue
            try:
                codes[i, q] = int(cell)
            except ValueError:
                raise DataValidationError(
                    f"row {i + 1}, column {schema.name!r}: {cell!r} is not an integer",
                    row=i + 1, column=schema.name,
                ) from None
    d = Dataset(tuple(schemas), codes)
    for schema, freq in zip(d.schemas, d.frequencies()):
        log.info("%s: %s", schema.name, ", ".join(f"{c}={k}" for c, k in freq.items()))
        empty = [c for c, k in freq.items() if k == 0]
        if empty:
            log.warning("%s: zero-frequency categories %s", schema.name, empty)
    return d


def drop_missing_rows(d: Dataset) -> Dataset:
    """Keep only complete rows; schemas lose their missing category."""
    keep = ~d.missing_mask().any(axis=1)
    if not keep.any():
        raise EmptyDatasetError("no rows left after removing rows with missing codes")
    schemas = tuple(s.without_missing() for s in d.schemas)
    if keep.all() and schemas == d.schemas:
        return d
    return Dataset(schemas, d.codes[keep])


class IndicatorMatrix:
    """Indicator coding ``Z = [Z_1 ... Z_Q]`` with merge bookkeeping.

    Each block column is a tuple of category positions.  Columns within a
    block are kept sorted by their smallest position, so ordinal adjacency
    is adjacency in column order.  Instances are immutable; merging returns
    a new object.
    """

    def __init__(self, schemas: Sequence[VariableSchema], positions: np.ndarray,
                 groups: Sequence[Sequence[Sequence[int]]] | None = None):
        self.schemas = tuple(schemas)
        self._positions = positions
        if groups is None:
            groups = [[(p,) for p in range(s.n_categories)] for s in self.schemas]
        self.groups = tuple(
            tuple(sorted((tuple(sorted(g)) for g in block), key=lambda g: g[0]))
            for block in groups
        )
        self._columns = []
        for q, block in enumerate(self.groups):
            lookup = np.empty(self.schemas[q].n_categories, dtype=np.int64)
            for c, g in enumerate(block):
                lookup[list(g)] = c
            col = lookup[positions[:, q]]
            col.setflags(write=False)
            self._columns.append(col)

    @classmethod
    def from_dataset(cls, d: Dataset) -> "IndicatorMatrix":
        return cls(d.schemas, d.positions())

    @property
    def n(self) -> int:
        return self._positions.shape[0]

    @property
    def Q(self) -> int:
        return len(self.schemas)

    def n_columns(self, q: int) -> int:
        return len(self.groups[q])

    @property
    def J(self) -> int:
        return sum(len(b) for b in self.groups)

    def column_index(self, q: int) -> np.ndarray:
        """For each observation, the block-``q`` column holding its 1."""
        return self._columns[q]

    def block(self, q: int) -> np.ndarray:
        z = np.zeros((self.n, self.n_columns(q)), dtype=np.int64)
        z[np.arange(self.n), self._columns[q]] = 1
        return z

    def matrix(self) -> np.ndarray:
        return np.hstack([self.block(q) for q in range(self.Q)])

    def column_codes(self, q: int, c: int) -> tuple[int, ...]:
        codes = self.schemas[q].codes
        return tuple(codes[p] for p in self.groups[q][c])

    def column_label(self, q: int, c: int) -> str:
        return self.schemas[q].label(self.groups[q][c])

    def labels(self, q: int) -> tuple[str, ...]:
        return tuple(self.column_label(q, c) for c in range(self.n_columns(q)))

    @property
    def all_labels(self) -> tuple[str, ...]:
        return tuple(lab for q in range(self.Q) for lab in self.labels(q))

    @property
    def block_index(self) -> tuple[tuple[int, int], ...]:
        """``(variable, column)`` for each of the ``J`` columns of Z."""
        return tuple((q, c) for q in range(self.Q) for c in range(self.n_columns(q)))

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([self.n_columns(q) for q in range(self.Q)])])

    def frequencies(self, q: int) -> np.ndarray:
        return np.bincount(self._columns[q], minlength=self.n_columns(q))


def _as_indicator(d_or_z) -> IndicatorMatrix:
    if isinstance(d_or_z, IndicatorMatrix):
        return d_or_z
    if isinstance(d_or_z, Dataset):
        return IndicatorMatrix.from_dataset(d_or_z)
    raise TypeError(f"expected Dataset or IndicatorMatrix, got {type(d_or_z).__name__}")


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Two-way table of (possibly fractional) counts with labeled margins."""

    counts: np.ndarray
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValueError("counts must be a 2-d array")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", _frozen(counts))
        rl = tuple(self.row_labels) or tuple(f"r{i + 1}" for i in range(counts.shape[0]))
        cl = tuple(self.col_labels) or tuple(f"c{j + 1}" for j in range(counts.shape[1]))
        if len(rl) != counts.shape[0] or len(cl) != counts.shape[1]:
            raise ValueError("label count does not match table shape")
        object.__setattr__(self, "row_labels", rl)
        object.__setattr__(self, "col_labels", cl)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def grand_total(self):
        return self.counts.sum()

    @property
    def row_margins(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_margins(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def empty_rows(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.row_margins == 0))

    @property
    def empty_cols(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.col_margins == 0))

    @property
    def T(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T, self.col_labels, self.row_labels)


def crosstab(d_or_z, q: int, s: int) -> ContingencyTable:
    """Cross-tabulate the current columns of variables ``q`` (rows) and ``s``."""
    z = _as_indicator(d_or_z)
    if not (0 <= q < z.Q and 0 <= s < z.Q):
        raise IndexError(f"variable index out of range: {q}, {s}")
    if q == s:
        raise UsageError("crosstab needs two different variables; use self_crosstab")
    jq, js = z.n_columns(q), z.n_columns(s)
    flat = z.column_index(q) * js + z.column_index(s)
    counts = np.bincount(flat, minlength=jq * js).reshape(jq, js)
    return ContingencyTable(counts, z.labels(q), z.labels(s))


def self_crosstab(d_or_z, q: int) -> ContingencyTable:
    """Variable ``q`` crossed with itself: a diagonal frequency table."""
    z = _as_indicator(d_or_z)
    labels = z.labels(q)
    return ContingencyTable(np.diag(z.frequencies(q)), labels, labels)


def merge_columns(z: IndicatorMatrix, q: int, a: int, b: int) -> IndicatorMatrix:
    """Sum columns ``a`` and ``b`` of block ``q``; returns a new matrix."""
    ncol = z.n_columns(q)
    if not (0 <= a < ncol and 0 <= b < ncol):
        raise IndexError(f"column index out of range for variable {q}: {a}, {b}")
    if a == b:
        raise UsageError("cannot merge a column with itself")
    block = list(z.groups[q])
    merged = tuple(sorted(block[a] + block[b]))
    block = [g for c, g in enumerate(block) if c not in (a, b)] + [merged]
    groups = list(z.groups)
    groups[q] = tuple(block)
    return IndicatorMatrix(z.schemas, z._positions, groups)
