"""Unit-level data model, CSV ingestion and descriptive statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError

MISSING_TOKENS = frozenset({"", "NA"})
ROLES = ("id", "group", "stratum", "input", "output", "covariate")


@dataclass(frozen=True)
class DmuRecord:
    id: str
    group: str
    inputs: tuple[float, ...]
    outputs: tuple[float, ...]
    covariates: tuple[float, ...] = ()
    stratum: str | None = None

    def validate(self) -> None:
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if np.isnan(x).any() or np.isnan(y).any():
            raise DataError(f"DMU {self.id!r}: inputs and outputs may not be missing")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise DataError(f"DMU {self.id!r}: inputs and outputs must be finite")
        if (x < 0).any() or not (x > 0).any():
            raise DataError(f"DMU {self.id!r}: inputs must be nonnegative with a positive entry")
        if (y <= 0).any():
            raise DataError(f"DMU {self.id!r}: outputs must be strictly positive")


@dataclass(frozen=True)
class DmuPanel:
    """An immutable set of DMUs sharing input/output/covariate layouts."""

    records: tuple[DmuRecord, ...]
    input_names: tuple[str, ...]
    output_names: tuple[str, ...]
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if not self.records:
            raise DataError("a panel needs at least one DMU")
        m, s, p = len(self.input_names), len(self.output_names), len(self.covariate_names)
        seen = set()
        for rec in self.records:
            if (len(rec.inputs), len(rec.outputs), len(rec.covariates)) != (m, s, p):
                raise DataError(f"DMU {rec.id!r}: expected {m} inputs, {s} outputs, {p} covariates")
            if rec.id in seen:
                raise DataError(f"duplicate DMU id {rec.id!r}")
            seen.add(rec.id)
            rec.validate()

    @classmethod
    def from_arrays(cls, X, Y, ids=None, groups=None, covariates=None, strata=None,
                    input_names=None, output_names=None, covariate_names=None) -> "DmuPanel":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        n = X.shape[0]
        if Y.shape[0] != n:
            raise DataError("X and Y must have the same number of rows")
        C = np.zeros((n, 0)) if covariates is None else np.asarray(covariates, dtype=float).reshape(n, -1)
        ids = [f"dmu{i}" for i in range(n)] if ids is None else [str(i) for i in ids]
        groups = ["all"] * n if groups is None else [str(g) for g in groups]
        strata = [None] * n if strata is None else [None if s is None else str(s) for s in strata]
        records = tuple(
            DmuRecord(ids[i], groups[i], tuple(X[i].tolist()), tuple(Y[i].tolist()),
                      tuple(C[i].tolist()), strata[i])
            for i in range(n))
        return cls(records,
                   input_names or tuple(f"x{j}" for j in range(X.shape[1])),
                   output_names or tuple(f"y{j}" for j in range(Y.shape[1])),
                   covariate_names or tuple(f"c{j}" for j in range(C.shape[1])))

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def m(self) -> int:
        return len(self.input_names)

    @property
    def s(self) -> int:
        return len(self.output_names)

    @property
    def p(self) -> int:
        return len(self.covariate_names)

    @cached_property
    def X(self) -> np.ndarray:
        return np.array([r.inputs for r in self.records], dtype=float).reshape(self.n, self.m)

    @cached_property
    def Y(self) -> np.ndarray:
        return np.array([r.outputs for r in self.records], dtype=float).reshape(self.n, self.s)

    @cached_property
    def C(self) -> np.ndarray:
        return np.array([r.covariates for r in self.records], dtype=float).reshape(self.n, self.p)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def group_labels(self) -> list[str]:
        return [r.group for r in self.records]

    @property
    def strata(self) -> list[str | None]:
        return [r.stratum for r in self.records]

    @property
    def groups(self) -> list[str]:
        """Distinct group labels in order of first appearance."""
        return list(dict.fromkeys(self.group_labels))

    def subset(self, indices: Iterable[int]) -> "DmuPanel":
        recs = tuple(self.records[i] for i in indices)
        return DmuPanel(recs, self.input_names, self.output_names, self.covariate_names)

    def column(self, name: str) -> np.ndarray:
        for names, mat in ((self.input_names, "X"), (self.output_names, "Y"), (self.covariate_names, "C")):
            if name in names:
                return getattr(self, mat)[:, names.index(name)]
        raise KeyError(name)


@dataclass(frozen=True)
class Schema:
    """Column-role mapping for :func:`load_csv`."""

    id: str
    group: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    covariates: tuple[str, ...] = ()
    stratum: str | None = None

    def __post_init__(self):
        for name in ("inputs", "outputs", "covariates"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.inputs or not self.outputs:
            raise ConfigError("schema needs at least one input and one output column")
        used = self.columns
        dupes = sorted({c for c in used if used.count(c) > 1})
        if dupes:
            raise ConfigError(f"columns assigned more than one role: {dupes}")

    @property
    def columns(self) -> list[str]:
        cols = [self.id, self.group, *self.inputs, *self.outputs, *self.covariates]
        if self.stratum:
            cols.append(self.stratum)
        return cols

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Schema":
        try:
            return cls(id=mapping["id"], group=mapping["group"], inputs=tuple(mapping["inputs"]),
                       outputs=tuple(mapping["outputs"]),
                       covariates=tuple(mapping.get("covariates", ())),
                       stratum=mapping.get("stratum"))
        except KeyError as exc:
            raise ConfigError(f"schema is missing the {exc.args[0]!r} entry") from None

    def to_mapping(self) -> dict:
        out = {"id": self.id, "group": self.group, "inputs": list(self.inputs),
               "outputs": list(self.outputs), "covariates": list(self.covariates)}
        if self.stratum:
            out["stratum"] = self.stratum
        return out


@dataclass(frozen=True)
class FrontierSpec:
    input_columns: tuple[int, ...]
    output_columns: tuple[int, ...]
    rts: str = "VRS"
    orientation: str = "output"

    def __post_init__(self):
        object.__setattr__(self, "input_columns", tuple(int(i) for i in self.input_columns))
        object.__setattr__(self, "output_columns", tuple(int(i) for i in self.output_columns))
        object.__setattr__(self, "rts", self.rts.upper())
        if self.rts not in ("CRS", "VRS"):
            raise ConfigError(f"rts must be CRS or VRS, got {self.rts!r}")
        if self.orientation != "output":
            raise ConfigError("only output orientation is supported")
        for name in ("input_columns", "output_columns"):
            cols = getattr(self, name)
            if not cols:
                raise ConfigError(f"{name} must be nonempty")
            if len(set(cols)) != len(cols):
                raise ConfigError(f"{name} has duplicates")

    @classmethod
    def for_panel(cls, panel: DmuPanel, inputs=None, outputs=None, rts: str = "VRS") -> "FrontierSpec":
        """Spec selecting named columns (all of them when omitted)."""
        try:
            ic = range(panel.m) if inputs is None else [panel.input_names.index(c) for c in inputs]
            oc = range(panel.s) if outputs is None else [panel.output_names.index(c) for c in outputs]
        except ValueError as exc:
            raise ConfigError(f"frontier references an unknown column: {exc}") from None
        return cls(tuple(ic), tuple(oc), rts)

    def check(self, panel: DmuPanel) -> None:
        if max(self.input_columns) >= panel.m or min(self.input_columns) < 0:
            raise ConfigError("input column index out of range")
        if max(self.output_columns) >= panel.s or min(self.output_columns) < 0:
            raise ConfigError("output column index out of range")

    def matrices(self, panel: DmuPanel) -> tuple[np.ndarray, np.ndarray]:
        self.check(panel)
        return panel.X[:, list(self.input_columns)], panel.Y[:, list(self.output_columns)]

    def with_rts(self, rts: str) -> "FrontierSpec":
        return FrontierSpec(self.input_columns, self.output_columns, rts, self.orientation)


def _parse_float(token: str) -> float:
    return float(token.strip())


def load_csv(path, schema: Schema | Mapping) -> DmuPanel:
    """Read a panel from a UTF-8 CSV file with a header row."""
    if not isinstance(schema, Schema):
        schema = Schema.from_mapping(schema)
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise DataError(f"{path}: unknown column(s) {missing}")
        pos = {c: header.index(c) for c in schema.columns}
        records, errors = [], []
        seen: dict[str, int] = {}
        for rowno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                errors.append(f"row {rowno}: expected {len(header)} fields, found {len(row)}")
                continue
            rid = row[pos[schema.id]].strip()
            if rid in seen:
                errors.append(f"row {rowno}: duplicate id {rid!r} (first seen in row {seen[rid]})")
                continue
            seen[rid] = rowno
            vals = {}
            bad = False
            for col in (*schema.inputs, *schema.outputs):
                token = row[pos[col]].strip()
                if token in MISSING_TOKENS:
                    errors.append(f"row {rowno}, column {col!r}: missing value")
                    bad = True
                    continue
                try:
                    vals[col] = _parse_float(token)
                except ValueError:
                    errors.append(f"row {rowno}, column {col!r}: non-numeric value {token!r}")
                    bad = True
            cov = []
            for col in schema.covariates:
                token = row[pos[col]].strip()
                if token in MISSING_TOKENS:
                    cov.append(math.nan)
                    continue
                try:
                    cov.append(_parse_float(token))
                except ValueError:
                    errors.append(f"row {rowno}, column {col!r}: non-numeric value {token!r}")
                    bad = True
            if bad:
                continue
            rec = DmuRecord(rid, row[pos[schema.group]].strip(),
                            tuple(vals[c] for c in schema.inputs),
                            tuple(vals[c] for c in schema.outputs), tuple(cov),
                            row[pos[schema.stratum]].strip() if schema.stratum else None)
            try:
                rec.validate()
            except DataError as exc:
                errors.append(f"row {rowno}: {exc}")
                continue
            records.append(rec)
    if errors:
        shown = "; ".join(errors[:20])
        more = f" (+{len(errors) - 20} more)" if len(errors) > 20 else ""
        raise DataError(f"{path}: {shown}{more}")
    if not records:
        raise DataError(f"{path}: no data rows")
    return DmuPanel(tuple(records), schema.inputs, schema.outputs, schema.covariates)


def write_csv(panel: DmuPanel, path, stratum_column: str = "stratum") -> Schema:
    """Write ``panel`` so that :func:`load_csv` with the returned schema restores it."""
    has_stratum = any(s is not None for s in panel.strata)
    schema = Schema("id", "group", panel.input_names, panel.output_names, panel.covariate_names,
                    stratum_column if has_stratum else None)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(schema.columns)
        for r in panel.records:
            row = [r.id, r.group, *map(repr, r.inputs), *map(repr, r.outputs),
                   *("NA" if math.isnan(v) else repr(v) for v in r.covariates)]
            if has_stratum:
                row.append(r.stratum or "")
            w.writerow(row)
    return schema


def split_by_group(panel: DmuPanel, label: str) -> DmuPanel:
    idx = [i for i, r in enumerate(panel.records) if r.group == label]
    if not idx:
        raise DataError(f"group {label!r} not present (available: {panel.groups})")
    return panel.subset(idx)


def binarize_efficiency(scores, threshold_mode="regional_mean") -> np.ndarray:
    """Label 1 where the score is strictly above the threshold.

    ``threshold_mode`` is ``"regional_mean"`` (mean of the vector passed in,
    so pass the pooled scores of both groups) or an explicit float.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise ValueError("cannot binarize an empty score vector")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    if isinstance(threshold_mode, str):
        if threshold_mode != "regional_mean":
            raise ValueError(f"unknown threshold mode {threshold_mode!r}")
        threshold = scores.mean()
    else:
        threshold = float(threshold_mode)
    return (scores > threshold).astype(int)


@dataclass
class VariableSummary:
    name: str
    role: str
    mean_a: float
    sd_a: float
    n_a: int
    mean_b: float
    sd_b: float
    n_b: int
    difference: float
    t_statistic: float
    p_value: float
    significant: bool | None  # None = untestable


@dataclass
class GroupSummary:
    group_a: str
    group_b: str
    rows: list[VariableSummary] = field(default_factory=list)
    level: float = 0.10

    def to_records(self) -> list[dict]:
        return [vars(r).copy() for r in self.rows]

    def render_markdown(self) -> str:
        """Table-1-style layout; differences that are not significant are bold."""
        lines = [f"| Variable | {self.group_a} mean | {self.group_a} SD | {self.group_b} mean "
                 f"| {self.group_b} SD | Difference |",
                 "|---|---|---|---|---|---|"]
        for r in self.rows:
            diff = f"{r.difference:.2f}"
            if r.significant is not True:
                diff = f"**{diff}**"
            lines.append(f"| {r.name} | {r.mean_a:.3f} | {r.sd_a:.3f} | {r.mean_b:.3f} "
                         f"| {r.sd_b:.3f} | {diff} |")
        lines.append(f"| N | {self.rows[0].n_a if self.rows else 0} | | "
                     f"{self.rows[0].n_b if self.rows else 0} | | |")
        lines.append("")
        lines.append(f"Differences lacking statistical significance at {self.level:.0%} "
                     "(Welch two-sided t-test) are shown in bold.")
        return "\n".join(lines)


def welch_test(a, b) -> tuple[float, float]:
    """Two-sided Welch t statistic and p-value (nan when untestable)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        return math.nan, math.nan
    if a.var(ddof=1) == 0 and b.var(ddof=1) == 0:
        return math.nan, math.nan
    res = stats.ttest_ind(a, b, equal_var=False)
    return float(res.statistic), float(res.pvalue)


def group_summary(panel: DmuPanel, group_a: str, group_b: str, level: float = 0.10,
                  variables: Sequence[str] | None = None) -> GroupSummary:
    """Per-variable means/SDs by group with a Welch significance flag."""
    pa, pb = split_by_group(panel, group_a), split_by_group(panel, group_b)
    roles = ([(n, "output") for n in panel.output_names] + [(n, "input") for n in panel.input_names]
             + [(n, "covariate") for n in panel.covariate_names])
    if variables is not None:
        roles = [(n, r) for n, r in roles if n in set(variables)]
    out = GroupSummary(group_a, group_b, level=level)
    for name, role in roles:
        a = pa.column(name)
        b = pb.column(name)
        a, b = a[~np.isnan(a)], b[~np.isnan(b)]
        ma = float(a.mean()) if a.size else math.nan
        mb = float(b.mean()) if b.size else math.nan
        t, p = welch_test(a, b)
        sig = None if math.isnan(p) else bool(p < level)
        out.rows.append(VariableSummary(
            name, role, ma, float(a.std(ddof=1)) if a.size > 1 else math.nan, int(a.size),
            mb, float(b.std(ddof=1)) if b.size > 1 else math.nan, int(b.size), ma - mb, t, p, sig))
    return out


def describe(values) -> dict:
    """Mean, SD, IQR, min, max and N of a score vector (linear-interpolated quartiles)."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return {"mean": math.nan, "sd": math.nan, "iqr": math.nan, "min": math.nan,
                "max": math.nan, "n": 0}
    q1, q3 = np.percentile(v, [25, 75])
    return {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if v.size > 1 else math.nan,
            "iqr": float(q3 - q1), "min": float(v.min()), "max": float(v.max()), "n": int(v.size)}


# --- plain result tables -------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "NA" if math.isnan(v) else repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_records(path, rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> None:
    """Write dict rows as CSV; floats use shortest round-trip form and nan is ``NA``."""
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def _parse_cell(token: str):
    if token in MISSING_TOKENS:
        return math.nan if token == "NA" else None
    if token in ("true", "false"):
        return token == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def read_records(path, text_columns: Iterable[str] = ()) -> list[dict]:
    """Read a table written by :func:`write_records` (numbers parsed, ``text_columns`` kept as text)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    keep = set(text_columns)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [{k: (v if k in keep else _parse_cell(v)) for k, v in row.items()} for row in reader]
