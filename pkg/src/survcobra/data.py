"""Dataset representation, CSV ingestion, splitting, and synthetic data.

A `SurvivalDataset` stores right-censored records: a covariate matrix, a
positive observed time per record, and a 0/1 event flag (1 = the event was
observed, 0 = the record is right-censored).  All types here are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

#: Cell contents treated as missing by `preprocess` (case-insensitive).
MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "?"})


@dataclass(frozen=True)
class SurvivalRecord:
    """One individual: covariates, observed time, and event flag."""

    covariates: np.ndarray
    time: float
    event: int


class SurvivalDataset:
    """Immutable array-backed collection of survival records.

    Parameters
    ----------
    x : (n, p) array of covariates (finite reals)
    time : (n,) array of positive observed times
    event : (n,) array of 0/1 event flags; at least one must be 1
    feature_names : p column names
    """

    __slots__ = ("x", "time", "event", "feature_names")

    def __init__(self, x, time, event, feature_names):
        x = np.atleast_2d(np.array(x, dtype=float))
        time = np.array(time, dtype=float)
        event = np.asarray(event)
        names = tuple(str(n) for n in feature_names)
        if x.ndim != 2:
            raise ValueError("covariates must form a 2-d matrix")
        n, p = x.shape
        if time.shape != (n,) or event.shape != (n,):
            raise ValueError("time and event must be 1-d arrays matching the record count")
        if n == 0:
            raise ValueError("a dataset needs at least one record")
        if len(names) != p:
            raise ValueError(f"got {len(names)} feature names for {p} covariate columns")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite (run preprocess to impute)")
        if not np.all(np.isfinite(time)) or np.any(time <= 0.0):
            raise ValueError("times must be finite and strictly positive")
        if not np.all((event == 0) | (event == 1)):
            raise ValueError("event flags must be 0 or 1")
        event = event.astype(np.int64)
        if not np.any(event == 1):
            raise ValueError("a dataset needs at least one observed event")
        for arr in (x, time, event):
            arr.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "feature_names", names)

    def __setattr__(self, name, value):
        raise AttributeError("SurvivalDataset is immutable")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> SurvivalRecord:
        return SurvivalRecord(self.x[i], float(self.time[i]), int(self.event[i]))

    @property
    def records(self) -> list[SurvivalRecord]:
        return [self[i] for i in range(self.n)]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def subset(self, indices) -> "SurvivalDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return SurvivalDataset(self.x[idx], self.time[idx], self.event[idx], self.feature_names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SurvivalDataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
        )

    __hash__ = None

    def __reduce__(self):
        # the guarded __setattr__ blocks default unpickling
        return (SurvivalDataset, (self.x, self.time, self.event, self.feature_names))

    def __repr__(self) -> str:
        return (
            f"SurvivalDataset(n={self.n}, features={self.n_features}, "
            f"events={self.n_events})"
        )


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint split of a training set into a machine-training part `d_k`
    and a calibration part `d_l`."""

    d_k: SurvivalDataset
    d_l: SurvivalDataset
    seed: int

    @property
    def k(self) -> int:
        return self.d_k.n

    @property
    def l(self) -> int:
        return self.d_l.n


@dataclass(frozen=True)
class SyntheticConfig:
    """Configuration for the nonlinear Weibull generator.

    The first four covariates drive the event time through
    scale(x) = 2 + log(13*x0 + 5*x1 + 7*x2) + x3; any further covariates
    are pure noise.  Exactly round(censor_fraction * n) records are
    censored uniformly below their latent event time.
    """

    n: int
    censor_fraction: float
    dim: int = 9
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.censor_fraction < 1.0:
            raise ValueError("censor_fraction must lie in [0, 1)")
        if self.dim < 4:
            raise ValueError("dim must be at least 4 (the link rule reads four covariates)")


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def load_csv(path, time_col: str, event_col: str) -> SurvivalDataset:
    """Load a fully numeric CSV (comma-separated, header row, UTF-8).

    All columns other than `time_col` and `event_col` become features in
    header order.  Rows are reported 1-based (excluding the header) in
    error messages.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file, expected a header row")
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        for col in (time_col, event_col):
            if col not in header:
                raise ValueError(f"{path}: missing required column {col!r}")
        t_idx = header.index(time_col)
        e_idx = header.index(event_col)
        feature_idx = [i for i in range(len(header)) if i not in (t_idx, e_idx)]
        feature_names = [header[i] for i in feature_idx]

        rows, times, events = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValueError(f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
            try:
                t = float(row[t_idx])
            except ValueError:
                raise ValueError(f"{path}: row {rownum}: non-numeric time {row[t_idx]!r}") from None
            if not math.isfinite(t) or t <= 0.0:
                raise ValueError(f"{path}: row {rownum}: time must be positive, got {row[t_idx]!r}")
            try:
                e = float(row[e_idx])
            except ValueError:
                raise ValueError(f"{path}: row {rownum}: non-numeric event flag {row[e_idx]!r}") from None
            if e not in (0.0, 1.0):
                raise ValueError(f"{path}: row {rownum}: event flag must be 0 or 1, got {row[e_idx]!r}")
            try:
                feats = [float(row[i]) for i in feature_idx]
            except ValueError:
                raise ValueError(f"{path}: row {rownum}: non-numeric feature value") from None
            rows.append(feats)
            times.append(t)
            events.append(int(e))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return SurvivalDataset(np.array(rows, dtype=float), times, events, feature_names)


@dataclass(frozen=True)
class RawTable:
    """Unparsed table: column names plus string cells, one tuple per row."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def column(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def load_raw_csv(path) -> RawTable:
    """Read a CSV into string cells for `preprocess` (mixed-type input)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file, expected a header row")
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        rows = []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValueError(f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
            rows.append(tuple(cell.strip() for cell in row))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return RawTable(tuple(h.strip() for h in header), tuple(rows))


def _is_missing(cell: str) -> bool:
    return cell.casefold() in MISSING_TOKENS


def _parse_numeric_column(name: str, cells: list[str]) -> np.ndarray:
    out = np.empty(len(cells), dtype=float)
    for i, cell in enumerate(cells):
        if _is_missing(cell):
            out[i] = np.nan
            continue
        try:
            out[i] = float(cell)
        except ValueError:
            raise ValueError(f"column {name!r}, row {i + 1}: non-numeric value {cell!r}") from None
    return out


def preprocess(
    table: RawTable,
    *,
    numeric,
    categorical,
    time_col: str,
    event_col: str,
) -> SurvivalDataset:
    """Turn a mixed-type table into a numeric dataset.

    Missing numeric cells are imputed with the column mean, missing
    categorical cells with the column mode (ties broken toward the
    lexicographically smallest level).  Each categorical column with c
    levels expands to c indicator columns named ``col=level``; single-level
    columns are dropped with a warning.  Column types must be declared:
    any feature column that is neither numeric nor categorical is an error.
    """
    numeric = list(numeric)
    categorical = list(categorical)
    overlap = set(numeric) & set(categorical)
    if overlap:
        raise ValueError(f"columns declared both numeric and categorical: {sorted(overlap)}")
    declared = set(numeric) | set(categorical) | {time_col, event_col}
    for col in declared:
        if col not in table.columns:
            raise ValueError(f"declared column {col!r} not present in the table")
    undeclared = [c for c in table.columns if c not in declared]
    if undeclared:
        raise ValueError(f"feature columns without a declared type: {undeclared}")

    times = _parse_numeric_column(time_col, table.column(time_col))
    events = _parse_numeric_column(event_col, table.column(event_col))
    if np.any(np.isnan(times)) or np.any(np.isnan(events)):
        raise ValueError("time and event columns may not contain missing values")

    columns: list[np.ndarray] = []
    names: list[str] = []
    for col in table.columns:
        if col in (time_col, event_col):
            continue
        cells = table.column(col)
        if col in numeric:
            vals = _parse_numeric_column(col, cells)
            mask = np.isnan(vals)
            if mask.all():
                raise ValueError(f"column {col!r} is entirely missing")
            if mask.any():
                vals = np.where(mask, vals[~mask].mean(), vals)
            columns.append(vals)
            names.append(col)
        else:
            observed = [c for c in cells if not _is_missing(c)]
            if not observed:
                raise ValueError(f"column {col!r} is entirely missing")
            levels, counts = np.unique(observed, return_counts=True)
            mode = levels[np.argmax(counts)]  # argmax takes the first max: lexicographic tie-break
            filled = [c if not _is_missing(c) else str(mode) for c in cells]
            if len(levels) == 1:
                warnings.warn(f"dropping single-level categorical column {col!r}")
                continue
            for level in levels:
                columns.append(np.array([1.0 if c == level else 0.0 for c in filled]))
                names.append(f"{col}={level}")
    if not columns:
        raise ValueError("no feature columns survived preprocessing")
    x = np.column_stack(columns)
    log.info("preprocessing produced %d feature columns from %d raw columns", x.shape[1], len(table.columns) - 2)
    return SurvivalDataset(x, times, events, names)


def kfold_split(data: SurvivalDataset, folds: int, seed: int):
    """Partition into `folds` near-equal disjoint test sets.

    The first ``n mod folds`` folds receive one extra test record.  Returns
    a list of (train, test) dataset pairs, deterministic for a fixed seed.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if folds > data.n:
        raise ValueError(f"folds ({folds}) exceeds the record count ({data.n})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    base, extra = divmod(data.n, folds)
    pairs = []
    start = 0
    for fold in range(folds):
        size = base + (1 if fold < extra else 0)
        test_idx = np.sort(perm[start : start + size])
        train_idx = np.sort(np.concatenate((perm[:start], perm[start + size :])))
        pairs.append((data.subset(train_idx), data.subset(test_idx)))
        start += size
    return pairs


def cobra_split(train: SurvivalDataset, l_fraction: float, seed: int) -> DatasetSplit:
    """Split a training set into machine-training and calibration parts.

    The calibration part receives l = round(l_fraction * n) records
    (half values round up), assigned uniformly at random by `seed`.
    """
    if not 0.0 < l_fraction < 1.0:
        raise ValueError("l_fraction must lie strictly between 0 and 1")
    n = train.n
    l = _round_half_up(l_fraction * n)
    k = n - l
    if l < 1 or k < 1:
        raise ValueError(f"degenerate split: n={n}, l_fraction={l_fraction} gives k={k}, l={l}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    d_l = train.subset(np.sort(perm[:l]))
    d_k = train.subset(np.sort(perm[l:]))
    return DatasetSplit(d_k=d_k, d_l=d_l, seed=seed)


def generate_synthetic(cfg: SyntheticConfig) -> SurvivalDataset:
    """Draw the nonlinear Weibull benchmark population.

    Covariates are i.i.d. uniform on (0, 1]; event times follow a Weibull
    with shape 2 and scale 2 + log(13*x0 + 5*x1 + 7*x2) + x3.  Exactly
    round(censor_fraction * n) records, chosen uniformly, are censored at
    a time drawn uniformly from (0, T) strictly below the event time.
    """
    rng = np.random.default_rng(cfg.seed)
    x = 1.0 - rng.random((cfg.n, cfg.dim))  # support (0, 1] keeps the log finite
    scale = _link_scale(x)
    bad = np.flatnonzero(scale <= 0.0)
    while bad.size:  # ~1e-6 per record; redraw keeps the scale positive
        x[bad] = 1.0 - rng.random((bad.size, cfg.dim))
        scale = _link_scale(x)
        bad = np.flatnonzero(scale <= 0.0)
    t = scale * rng.weibull(2.0, cfg.n)
    zero = np.flatnonzero(t <= 0.0)
    while zero.size:
        t[zero] = scale[zero] * rng.weibull(2.0, zero.size)
        zero = np.flatnonzero(t <= 0.0)

    n_censor = _round_half_up(cfg.censor_fraction * cfg.n)
    event = np.ones(cfg.n, dtype=np.int64)
    time = t.copy()
    if n_censor:
        censored = rng.permutation(cfg.n)[:n_censor]
        u = rng.random(n_censor)
        zero = np.flatnonzero(u == 0.0)
        while zero.size:
            u[zero] = rng.random(zero.size)
            zero = np.flatnonzero(u == 0.0)
        time[censored] = u * t[censored]
        event[censored] = 0
    names = [f"x{i}" for i in range(cfg.dim)]
    return SurvivalDataset(x, time, event, names)


def _link_scale(x: np.ndarray) -> np.ndarray:
    return 2.0 + np.log(13.0 * x[:, 0] + 5.0 * x[:, 1] + 7.0 * x[:, 2]) + x[:, 3]
