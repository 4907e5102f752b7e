"""Weekly spot/forward ingestion and construction of UIP regression samples.

Quotes are foreign currency per numeraire unit and are never inverted.
The two regression designs share the regression form ``y = a + b x + u``:

* Fama:            y_t = s_{t+k} - s_t,  x_t = f_t - s_t
* Hansen-Hodrick:  y_t = s_{t+k} - f_t,  x_t = s_t - f_{t-k}
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DataWarning

MIN_SPACING_DAYS = 5
MAX_SPACING_DAYS = 9


class Design(str, enum.Enum):
    FAMA = "fama"
    HANSEN_HODRICK = "hh"

    @classmethod
    def parse(cls, value) -> "Design":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower().replace("-", "").replace("_", "")
        if v in ("fama", "f"):
            return cls.FAMA
        if v in ("hh", "hansenhodrick"):
            return cls.HANSEN_HODRICK
        raise ValueError(f"unknown design {value!r}; expected 'fama' or 'hh'")

    @property
    def null_beta(self) -> float:
        """Slope implied by UIP in this design."""
        return 1.0 if self is Design.FAMA else 0.0


@dataclass(frozen=True)
class RawQuote:
    date: dt.date
    spot: float
    forward: float

    def __post_init__(self):
        if not (self.spot > 0 and np.isfinite(self.spot)):
            raise DataError(f"spot must be positive, got {self.spot}", field="spot")
        if not (self.forward > 0 and np.isfinite(self.forward)):
            raise DataError(f"forward must be positive, got {self.forward}", field="forward")


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    ``date_format`` is a ``strptime`` pattern; when ``None`` each value may be
    ISO-8601 (``2021-04-29``) or US style (``04/29/2021``).
    """

    date: str = "date"
    spot: str = "spot"
    forward: str = "forward"
    date_format: str | None = None


def _parse_date(text: str, fmt: str | None) -> dt.date:
    text = text.strip()
    if fmt is not None:
        return dt.datetime.strptime(text, fmt).date()
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        pass
    return dt.datetime.strptime(text, "%m/%d/%Y").date()


def _parse_price(text: str) -> float:
    # float() accepts "1e-3" and rejects "1,234.5" which is what we want
    value = float(text.strip())
    if not np.isfinite(value):
        raise ValueError("non-finite")
    return value


def load_csv(path, schema: CsvSchema | None = None) -> list[RawQuote]:
    """Read dated spot/forward quotes from a CSV file with a header row.

    Rows are returned in date order. Unsorted input is sorted with a
    :class:`DataWarning`; duplicate dates are an error.

    Raises
    ------
    DataError
        On a missing file or column, a malformed row (with its line number),
        a non-positive price, a duplicate date or an empty file.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.exists():
        raise DataError("file does not exist", path=path)

    quotes: list[tuple[int, RawQuote]] = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file", path=path) from None
        names = [h.strip() for h in header]
        idx = {}
        for key in ("date", "spot", "forward"):
            col = getattr(schema, key)
            if col not in names:
                raise DataError(f"column {col!r} not found in header {names}", path=path, line=1)
            idx[key] = names.index(col)

        width = max(idx.values()) + 1
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) > len(names):
                raise DataError(f"row has {len(row)} fields but the header has {len(names)} "
                                "(thousands separators are not supported)", path=path, line=line)
            if len(row) < width:
                raise DataError(f"expected at least {width} fields, got {len(row)}", path=path, line=line)
            try:
                date = _parse_date(row[idx["date"]], schema.date_format)
            except ValueError:
                raise DataError(f"unparseable date {row[idx['date']]!r}", path=path, line=line,
                                field=schema.date) from None
            prices = {}
            for key in ("spot", "forward"):
                raw = row[idx[key]]
                try:
                    prices[key] = _parse_price(raw)
                except ValueError:
                    raise DataError(f"unparseable number {raw!r}", path=path, line=line,
                                    field=getattr(schema, key)) from None
                if prices[key] <= 0:
                    raise DataError(f"price must be positive, got {prices[key]}", path=path, line=line,
                                    field=getattr(schema, key))
            quotes.append((line, RawQuote(date, prices["spot"], prices["forward"])))

    if not quotes:
        raise DataError("empty file: no data rows", path=path)

    dates = [q.date for _, q in quotes]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        seen: dict[dt.date, int] = {}
        for line, q in quotes:
            if q.date in seen:
                raise DataError(f"duplicate date {q.date.isoformat()} (first seen on line {seen[q.date]})",
                                path=path, line=line, field=schema.date)
            seen[q.date] = line
        warnings.warn(f"{path}: rows not in date order; sorted", DataWarning, stacklevel=2)
        quotes.sort(key=lambda item: item[1].date)
    return [q for _, q in quotes]


def save_csv(quotes: Iterable[RawQuote], path, schema: CsvSchema | None = None) -> None:
    """Write quotes in the layout :func:`load_csv` reads."""
    schema = schema or CsvSchema()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([schema.date, schema.spot, schema.forward])
        for q in quotes:
            w.writerow([q.date.isoformat(), repr(float(q.spot)), repr(float(q.forward))])


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AlignedSeries:
    """Log spot ``s`` and log forward ``f`` on a weekly index, horizon ``k``."""

    dates: np.ndarray
    s: np.ndarray
    f: np.ndarray
    k: int = 4

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "s", _readonly(self.s))
        object.__setattr__(self, "f", _readonly(self.f))
        if not (len(self.s) == len(self.f) == len(self.dates)):
            raise ValueError("dates, s and f must have the same length")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"horizon k must be a positive integer, got {self.k}")
        if self.T <= self.k + 2:
            raise ValueError(f"need T > k + 2 observations, got T={self.T}, k={self.k}")

    @property
    def T(self) -> int:
        return len(self.s)

    def to_quotes(self) -> list[RawQuote]:
        return [
            RawQuote(d.astype(dt.date), float(np.exp(s)), float(np.exp(f)))
            for d, s, f in zip(self.dates, self.s, self.f)
        ]


def align(quotes: Sequence[RawQuote], k: int = 4) -> AlignedSeries:
    """Log-transform quotes onto a contiguous weekly index.

    Spacing outside 5-9 calendar days (holiday slack) produces a
    :class:`DataWarning` per occurrence; the series is never split.
    """
    if len(quotes) < k + 3:
        raise DataError(f"too few observations: {len(quotes)} quotes, need at least k + 3 = {k + 3}")
    dates = np.array([q.date for q in quotes], dtype="datetime64[D]")
    spacing = np.diff(dates).astype(int)
    if np.any(spacing <= 0):
        raise DataError("dates must be strictly increasing")
    for i in np.flatnonzero((spacing > MAX_SPACING_DAYS) | (spacing < MIN_SPACING_DAYS)):
        kind = "gap" if spacing[i] > MAX_SPACING_DAYS else "short spacing"
        warnings.warn(
            f"{kind} of {spacing[i]} days between {dates[i]} and {dates[i + 1]}; index kept contiguous",
            DataWarning,
            stacklevel=2,
        )
    s = np.log([q.spot for q in quotes])
    f = np.log([q.forward for q in quotes])
    return AlignedSeries(dates, s, f, k)


@dataclass(frozen=True)
class RegressionSample:
    """Response ``y`` paired element-wise with regressor ``x``.

    ``dates`` are the response (realisation) dates of ``y``.
    """

    y: np.ndarray
    x: np.ndarray
    design: Design
    k: int
    dates: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "y", _readonly(self.y))
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "design", Design.parse(self.design))
        if self.dates is None:
            dates = np.arange(len(self.y)).astype("datetime64[D]")
        else:
            dates = np.asarray(self.dates, dtype="datetime64[D]")
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        if not (len(self.y) == len(self.x) == len(self.dates)):
            raise ValueError("y, x and dates must have the same length")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x))):
            raise ValueError("regression sample contains non-finite values")

    def __len__(self):
        return len(self.y)

    @property
    def start(self):
        return self.dates[0]

    @property
    def end(self):
        return self.dates[-1]

    def slice(self, start: int, stop: int) -> "RegressionSample":
        return RegressionSample(self.y[start:stop], self.x[start:stop], self.design, self.k,
                                self.dates[start:stop])


def build_sample(series: AlignedSeries, design) -> RegressionSample:
    """Build the Fama (length T-k) or Hansen-Hodrick (length T-2k) sample."""
    design = Design.parse(design)
    s, f, k, T = series.s, series.f, series.k, series.T
    if design is Design.FAMA:
        t = np.arange(0, T - k)
        y = s[t + k] - s[t]
        x = f[t] - s[t]
    else:
        if T - 2 * k < 3:
            raise ValueError(f"series too short for the Hansen-Hodrick design: T={T}, k={k}")
        t = np.arange(k, T - k)
        y = s[t + k] - f[t]
        x = s[t] - f[t - k]
    return RegressionSample(y, x, design, k, series.dates[t + k])


def rolling_windows(sample: RegressionSample, window: int = 260, step: int = 1,
                    max_lag: int | None = None) -> list[RegressionSample]:
    """Overlapping contiguous sub-samples of ``window`` observations.

    Window starts are ``0, step, 2*step, ...`` up to ``len(sample) - window``.
    """
    n = len(sample)
    if window < 1 or step < 1:
        raise ValueError("window and step must be positive")
    if window > n:
        raise ValueError(f"window {window} larger than sample length {n}")
    if max_lag is not None and window <= 10 * max_lag:
        raise ValueError(f"window {window} too short for lag order {max_lag} (need > {10 * max_lag})")
    return [sample.slice(i, i + window) for i in range(0, n - window + 1, step)]
