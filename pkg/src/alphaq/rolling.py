"""
Rolling-window CAPM alpha tests on monthly return files.

Input layout (UTF-8, comma separated, header row required):

* returns: ``month,asset,ret`` with ``month`` as ``YYYY-MM``
* factors: ``month,MktRF,RF``

Each window keeps only the assets observed in every month of the window and
is evaluated when at least ``min_assets`` of them remain.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from alphaq.calendar import format_month, parse_month
from alphaq.exceptions import (
    AlphaQError,
    CalendarMismatch,
    DomainError,
    MissingColumn,
    NoEvaluableWindows,
    ParseError,
)
from alphaq.regression import FactorPanel, ReturnPanel
from alphaq.statistics import DEFAULT_VARRHO, DEFAULT_ZETA, run_alpha_tests

__all__ = [
    "ReturnHistory",
    "FactorTable",
    "WindowResult",
    "RollingResult",
    "load_returns_csv",
    "load_factors_csv",
    "excess_returns",
    "rolling_run",
    "convert_prices_csv",
    "PATH_COLUMNS",
    "PAPER_WINDOWS",
]

PATH_COLUMNS = ("month", "N_eff", "p2", "p4", "p6", "p_inf", "p_minp", "p_cc")
_P_FIELDS = ("p2", "p4", "p6", "p_inf", "p_minp", "p_cauchy")
_METHOD_NAMES = ("L2", "L4", "L6", "Linf", "minP", "CC")
PAPER_WINDOWS = (60, 72, 84, 96, 108, 120)


@dataclass(frozen=True)
class ReturnHistory:
    """Monthly returns on a contiguous calendar; NaN marks a missing observation."""

    months: tuple
    assets: tuple
    values: np.ndarray  # n_assets x n_months

    @property
    def n_months(self):
        return len(self.months)


@dataclass(frozen=True)
class FactorTable:
    months: tuple
    mkt_rf: np.ndarray
    rf: np.ndarray
    extra: dict = field(default_factory=dict)

    def index(self):
        return {m: i for i, m in enumerate(self.months)}


def _open_rows(path):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise ParseError("file is empty, a header row is required", path=path, line=1)
    return fh, [h.strip() for h in header], reader


def _require(header, names, path):
    missing = [n for n in names if n not in header]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {missing}; found {header}")
    return {n: header.index(n) for n in names}


def _parse_float(text, path, line, what):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r} as a number", path=path, line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} is not finite: {text!r}", path=path, line=line)
    return value


def _parse_month(text, path, line):
    try:
        return parse_month(text)
    except ValueError as exc:
        raise ParseError(str(exc), path=path, line=line) from None


def load_returns_csv(path) -> ReturnHistory:
    """Read a long-format ``month,asset,ret`` file.

    An empty ``ret`` cell is treated the same as an absent row.
    """
    fh, header, reader = _open_rows(path)
    with fh:
        col = _require(header, ("month", "asset", "ret"), path)
        seen = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path=path, line=line)
            month = _parse_month(row[col["month"]], path, line)
            asset = row[col["asset"]].strip()
            if not asset:
                raise ParseError("empty asset identifier", path=path, line=line)
            text = row[col["ret"]].strip()
            key = (asset, month)
            if key in seen:
                raise ParseError(
                    f"duplicate observation for asset {asset} in {format_month(month)}",
                    path=path, line=line,
                )
            seen[key] = math.nan if text == "" else _parse_float(text, path, line, "ret")
    if not seen:
        raise ParseError("no return observations", path=path)
    first = min(m for _, m in seen)
    last = max(m for _, m in seen)
    months = tuple(format_month(m) for m in range(first, last + 1))
    assets = tuple(sorted({a for a, _ in seen}))
    a_idx = {a: i for i, a in enumerate(assets)}
    values = np.full((len(assets), len(months)), np.nan)
    for (asset, month), value in seen.items():
        values[a_idx[asset], month - first] = value
    values.setflags(write=False)
    return ReturnHistory(months=months, assets=assets, values=values)


def load_factors_csv(path, allow_extra=()) -> FactorTable:
    """Read a ``month,MktRF,RF`` file.

    Columns beyond these three are rejected unless named in ``allow_extra``;
    whitelisted columns are parsed and kept in ``FactorTable.extra``.
    """
    fh, header, reader = _open_rows(path)
    with fh:
        col = _require(header, ("month", "MktRF", "RF"), path)
        allowed = set(allow_extra)
        extra_cols = [h for h in header if h not in col]
        rejected = [h for h in extra_cols if h not in allowed]
        if rejected:
            raise ParseError(
                f"unexpected factor column(s) {rejected}; the CAPM pipeline uses MktRF only "
                "(whitelist extras explicitly to keep them)",
                path=path, line=1,
            )
        rows = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path=path, line=line)
            month = _parse_month(row[col["month"]], path, line)
            if month in rows:
                raise ParseError(f"duplicate factor row for {format_month(month)}", path=path, line=line)
            rows[month] = [
                _parse_float(row[header.index(name)].strip(), path, line, name)
                for name in ("MktRF", "RF", *extra_cols)
            ]
    order = sorted(rows)
    data = np.array([rows[m] for m in order], dtype=float).reshape(len(order), 2 + len(extra_cols))
    return FactorTable(
        months=tuple(format_month(m) for m in order),
        mkt_rf=data[:, 0],
        rf=data[:, 1],
        extra={name: data[:, 2 + k] for k, name in enumerate(extra_cols)},
    )


def excess_returns(history: ReturnHistory, factors: FactorTable):
    """Align factors to the return calendar and subtract RF.

    Returns ``(excess, mkt_rf)``: an ``n_assets x n_months`` array with NaN for
    missing observations and the matching market excess return series.
    """
    idx = factors.index()
    missing = [m for m in history.months if m not in idx]
    if missing:
        shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
        raise CalendarMismatch(f"no factor row for return month(s) {shown}")
    pos = np.array([idx[m] for m in history.months])
    rf = factors.rf[pos]
    return history.values - rf[None, :], factors.mkt_rf[pos]


@dataclass(frozen=True)
class WindowResult:
    month: str
    n_eff: int
    p_values: dict


@dataclass
class RollingResult:
    window_T: int
    windows: list
    skipped: list
    nominal_level: float = 0.05

    @property
    def n_evaluated(self):
        return len(self.windows)

    def rejection_rates(self):
        """Fraction of evaluated windows with p strictly below the level, per method."""
        n = len(self.windows)
        rates = {}
        for method, fld in zip(_METHOD_NAMES, _P_FIELDS):
            hits = sum(1 for w in self.windows if w.p_values[fld] < self.nominal_level)
            rates[method] = hits / n if n else math.nan
        return rates

    def paths_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PATH_COLUMNS)
        for win in self.windows:
            w.writerow([win.month, win.n_eff, *(repr(float(win.p_values[f])) for f in _P_FIELDS)])
        return buf.getvalue()

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window_T", "method", "rejection_rate", "evaluated_windows", "skipped_windows"])
        for method, rate in self.rejection_rates().items():
            w.writerow([self.window_T, method, repr(float(rate)), self.n_evaluated, len(self.skipped)])
        return buf.getvalue()


def rolling_run(history, factors, window_T, min_assets=100, step=1,
                zeta=DEFAULT_ZETA, varrho=DEFAULT_VARRHO, nominal_level=0.05):
    """Run the six tests on every rolling window of ``window_T`` months.

    Each window is a CAPM regression on ``MktRF``; windows with fewer than
    ``min_assets`` complete assets are recorded as skipped.

    Raises
    ------
    NoEvaluableWindows
        If every window is skipped.
    """
    excess, mkt = excess_returns(history, factors)
    n_months = history.n_months
    if window_T >= n_months:
        raise DomainError(f"window of {window_T} months needs a longer history than {n_months}")
    if min_assets < 3:
        raise DomainError("min_assets must be at least 3")
    if step < 1:
        raise DomainError("step must be positive")
    observed = ~np.isnan(excess)
    windows, skipped = [], []
    for end in range(window_T - 1, n_months, step):
        start = end - window_T + 1
        complete = np.all(observed[:, start:end + 1], axis=1)
        n_eff = int(np.count_nonzero(complete))
        month = history.months[end]
        if n_eff < min_assets:
            skipped.append(month)
            continue
        panel = ReturnPanel(
            excess[complete, start:end + 1],
            asset_ids=[a for a, keep in zip(history.assets, complete) if keep],
            time_ids=history.months[start:end + 1],
        )
        fac = FactorPanel(mkt[start:end + 1, None], factor_names=("MktRF",))
        try:
            report = run_alpha_tests(panel, fac, zeta=zeta, varrho=varrho)
        except AlphaQError as exc:
            raise type(exc)(f"window ending {month}: {exc}") from exc
        windows.append(WindowResult(month=month, n_eff=n_eff, p_values=report.p_values()))
    if not windows:
        raise NoEvaluableWindows(
            f"no {window_T}-month window has at least {min_assets} complete assets"
        )
    return RollingResult(window_T=window_T, windows=windows, skipped=skipped,
                         nominal_level=nominal_level)


def convert_prices_csv(in_path, out_path):
    """Turn a ``month,asset,price`` file of month-end prices into simple returns.

    A return is written only where the previous calendar month's price exists.
    """
    fh, header, reader = _open_rows(in_path)
    with fh:
        col = _require(header, ("month", "asset", "price"), in_path)
        prices = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            month = _parse_month(row[col["month"]], in_path, line)
            asset = row[col["asset"]].strip()
            price = _parse_float(row[col["price"]].strip(), in_path, line, "price")
            if price <= 0:
                raise ParseError("prices must be positive", path=in_path, line=line)
            if (asset, month) in prices:
                raise ParseError("duplicate price", path=in_path, line=line)
            prices[(asset, month)] = price
    with open(out_path, "w", newline="", encoding="utf-8") as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["month", "asset", "ret"])
        for asset, month in sorted(prices, key=lambda k: (k[1], k[0])):
            prev = prices.get((asset, month - 1))
            if prev is not None:
                w.writerow([format_month(month), asset, repr(prices[(asset, month)] / prev - 1.0)])
