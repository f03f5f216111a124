"""Tiny helpers for ``YYYY-MM`` month labels."""

from __future__ import annotations

import re

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


def parse_month(label: str) -> int:
    """Months since year 0 for a ``YYYY-MM`` label."""
    m = _MONTH_RE.match(label.strip())
    if m is None:
        raise ValueError(f"not a YYYY-MM month: {label!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range in {label!r}")
    return 12 * year + month - 1


def format_month(index: int) -> str:
    year, month0 = divmod(index, 12)
    return f"{year:04d}-{month0 + 1:02d}"


def month_range(start: str, count: int) -> list[str]:
    first = parse_month(start)
    return [format_month(first + k) for k in range(count)]
