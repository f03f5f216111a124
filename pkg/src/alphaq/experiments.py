"""
Size and power experiments over simulation grids.

Every replication draws from its own substream keyed by
``(master_seed, cell_index, replication_index)``, so tables are identical
whatever the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from alphaq.exceptions import AlphaQError, DomainError
from alphaq.simulation import AlphaSpec, SimConfig, make_rng, simulate_panel
from alphaq.statistics import DEFAULT_VARRHO, DEFAULT_ZETA, run_alpha_tests

__all__ = [
    "METHODS",
    "REPORT_FIELDS",
    "CSV_COLUMNS",
    "ExperimentSpec",
    "Cell",
    "RejectionTable",
    "ReplicationFailed",
    "simulate_cell",
    "replications_csv",
    "run_size_table",
    "run_power_curve",
]

# method label -> TestReport p-value field
METHODS = {
    "L2": "p2",
    "L4": "p4",
    "L6": "p6",
    "Linf": "p_inf",
    "minP": "p_minp",
    "CC": "p_cauchy",
}

REPORT_FIELDS = (
    "q2", "q4", "q6", "t2", "t4", "t6", "l_inf", "m_gumbel",
    "p2", "p4", "p6", "p_inf", "p_minp", "p_cauchy",
)

CSV_COLUMNS = (
    "T", "N", "delta_gamma", "psi", "innovation", "n_active",
    "method", "rejections", "replications", "frequency", "se",
)


class ReplicationFailed(AlphaQError):
    """A replication raised; the whole cell is abandoned."""


@dataclass(frozen=True)
class ExperimentSpec:
    T: tuple = (240,)
    N: tuple = (100,)
    delta_gamma: tuple = (0.0,)
    psi: tuple = (0.0,)
    innovation: tuple = ("gaussian",)
    n_active: tuple = (0,)
    replications: int = 1000
    nominal_level: float = 0.05
    master_seed: int = 0
    kappa: float = 6.5
    burn_in: int = 50
    zeta: float = DEFAULT_ZETA
    varrho: float = DEFAULT_VARRHO

    def __post_init__(self):
        for name in ("T", "N", "delta_gamma", "psi", "innovation", "n_active"):
            value = getattr(self, name)
            if isinstance(value, (str, int, float)):
                value = (value,)
            value = tuple(value)
            if not value:
                raise DomainError(f"grid axis {name} is empty")
            object.__setattr__(self, name, value)
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        if not 0.0 < self.nominal_level < 1.0:
            raise DomainError("nominal_level must lie in (0, 1)")

    @property
    def is_null(self):
        return all(n == 0 for n in self.n_active)

    def cells(self):
        """Grid cells in a fixed order; the position is the cell index."""
        grid = itertools.product(
            self.T, self.N, self.delta_gamma, self.psi, self.innovation, self.n_active
        )
        return [
            Cell(index=i, T=T, N=N, delta_gamma=dg, psi=psi, innovation=inn, n_active=n)
            for i, (T, N, dg, psi, inn, n) in enumerate(grid)
        ]


@dataclass(frozen=True)
class Cell:
    index: int
    T: int
    N: int
    delta_gamma: float
    psi: float
    innovation: str
    n_active: int

    def sim_config(self, spec: ExperimentSpec):
        return SimConfig(
            T=self.T,
            N=self.N,
            delta_gamma=self.delta_gamma,
            psi=self.psi,
            innovation=self.innovation,
            kappa=spec.kappa,
            burn_in=spec.burn_in,
            seed=spec.master_seed,
        )

    def alpha_spec(self):
        return AlphaSpec.sparse(self.n_active)


def _run_chunk(args):
    config, alpha, cell_index, start, stop, zeta, varrho = args
    out = np.empty((stop - start, len(REPORT_FIELDS)))
    # single-threaded BLAS keeps floating point identical across pool sizes
    with threadpool_limits(limits=1):
        for row, rep in enumerate(range(start, stop)):
            try:
                rng = make_rng(config.seed, cell_index, rep)
                panel = simulate_panel(config, alpha, rng=rng, stream=(cell_index, rep))
                report = run_alpha_tests(panel.returns, panel.factors, zeta=zeta, varrho=varrho)
            except AlphaQError as exc:
                raise ReplicationFailed(
                    f"cell {cell_index} replication {rep} failed: {type(exc).__name__}: {exc}"
                ) from exc
            out[row] = [getattr(report, f) for f in REPORT_FIELDS]
    return out


def _chunks(n, threads):
    size = max(1, min(250, math.ceil(n / max(1, 4 * threads))))
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def simulate_cell(config: SimConfig, alpha: AlphaSpec, replications, cell_index=0,
                  threads=1, zeta=DEFAULT_ZETA, varrho=DEFAULT_VARRHO, executor=None):
    """Per-replication statistics for one design point.

    Returns a structured array with one record per replication and the
    fields listed in ``REPORT_FIELDS``.
    """
    jobs = [
        (config, alpha, cell_index, a, b, zeta, varrho)
        for a, b in _chunks(replications, threads)
    ]
    if executor is not None:
        parts = list(executor.map(_run_chunk, jobs))
    elif threads <= 1:
        parts = [_run_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    flat = np.concatenate(parts, axis=0)
    dtype = np.dtype([(f, float) for f in REPORT_FIELDS])
    return np.rec.fromarrays(flat.T, dtype=dtype)


def replications_csv(stats):
    """One CSV row per replication of a :func:`simulate_cell` result."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("replication",) + REPORT_FIELDS)
    for i, rec in enumerate(stats):
        w.writerow([i] + [repr(float(rec[f])) for f in REPORT_FIELDS])
    return buf.getvalue()


@dataclass
class RejectionTable:
    rows: list = field(default_factory=list)

    def add(self, cell: Cell, method, rejections, replications):
        freq = rejections / replications
        self.rows.append(
            {
                "T": cell.T,
                "N": cell.N,
                "delta_gamma": cell.delta_gamma,
                "psi": cell.psi,
                "innovation": cell.innovation,
                "n_active": cell.n_active,
                "method": method,
                "rejections": int(rejections),
                "replications": int(replications),
                "frequency": freq,
                "se": math.sqrt(freq * (1.0 - freq) / replications),
            }
        )

    def lookup(self, method, **cell):
        """Frequency of ``method`` in the single row matching the cell fields."""
        hits = [
            r for r in self.rows
            if r["method"] == method and all(r[k] == v for k, v in cell.items())
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match method={method} {cell}")
        return hits[0]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def pretty(self):
        """Percent rejection rates, one line per cell, methods as columns."""
        methods = list(METHODS)
        header = f"{'T':>5} {'N':>5} {'dg':>5} {'psi':>5} {'innov':>10} {'n':>4} " + " ".join(
            f"{m:>6}" for m in methods
        )
        lines = [header]
        keyed = {}
        for r in self.rows:
            key = tuple(r[c] for c in CSV_COLUMNS[:6])
            keyed.setdefault(key, {})[r["method"]] = r["frequency"]
        for key, freqs in keyed.items():
            T, N, dg, psi, inn, n = key
            cells = " ".join(f"{100 * freqs.get(m, float('nan')):6.1f}" for m in methods)
            lines.append(f"{T:>5} {N:>5} {dg:>5g} {psi:>5g} {inn:>10} {n:>4} {cells}")
        return "\n".join(lines)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _run_grid(spec: ExperimentSpec, threads=1):
    table = RejectionTable()
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for cell in spec.cells():
            stats = simulate_cell(
                cell.sim_config(spec),
                cell.alpha_spec(),
                spec.replications,
                cell_index=cell.index,
                threads=threads,
                zeta=spec.zeta,
                varrho=spec.varrho,
                executor=pool,
            )
            for method, fld in METHODS.items():
                rejections = int(np.count_nonzero(stats[fld] < spec.nominal_level))
                table.add(cell, method, rejections, spec.replications)
    finally:
        if pool is not None:
            pool.shutdown()
    return table


def run_size_table(spec: ExperimentSpec, threads=1) -> RejectionTable:
    """Empirical sizes of the six tests on every null grid cell."""
    if not spec.is_null:
        raise DomainError("a size table needs the null alternative (n_active = 0)")
    return _run_grid(spec, threads)


def run_power_curve(spec: ExperimentSpec, threads=1) -> RejectionTable:
    """Rejection rates against sparse alternatives, one row per method and ``n_active``."""
    return _run_grid(spec, threads)
