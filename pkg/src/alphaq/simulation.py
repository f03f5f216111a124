"""
Synthetic return panels for size and power studies.

Returns follow ``Y_it = alpha_i + beta_i' f_t + kappa (gamma_i v_t + eta_it)``
with AR(1)-GARCH(1,1) factors, a latent factor loading on ``floor(N^delta)``
assets, and spatial-autoregressive heteroskedastic idiosyncratic errors.

Within one replication the random draws happen in a fixed order: loadings,
latent loadings (values then permutation), idiosyncratic scales, factor
shocks, latent factor path, idiosyncratic innovations. Fixtures depend on it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from alphaq.calendar import month_range
from alphaq.exceptions import DomainError, SingularSAR
from alphaq.regression import FactorPanel, ReturnPanel

__all__ = [
    "FACTOR_AR",
    "GARCH_OMEGA",
    "GARCH_RHO",
    "GARCH_PHI",
    "LOADING_BOUNDS",
    "SimConfig",
    "AlphaSpec",
    "SimulatedPanel",
    "RookWeights",
    "make_rng",
    "simulate_factors",
    "draw_loadings",
    "latent_loadings",
    "build_rook_weights",
    "sparse_alpha",
    "draw_innovations",
    "simulate_panel",
]

FACTOR_AR = np.array([-0.1, 0.2, -0.2])
GARCH_OMEGA = np.array([20.25, 6.33, 5.98])
GARCH_RHO = np.array([0.61, 0.70, -0.31])
GARCH_PHI = np.array([0.31, 0.21, 0.10])
LOADING_BOUNDS = ((0.3, 1.8), (-1.0, 1.0), (-0.6, 0.9))
LATENT_BOUNDS = (0.7, 0.9)
H_FLOOR = 1e-12
T8_DOF = 8
INNOVATIONS = ("gaussian", "student_t8")


def make_rng(seed, *stream):
    """Counter-based generator for substream ``stream`` of ``seed``.

    Each distinct ``stream`` tuple (e.g. ``(cell, replication)``) gets an
    independent Philox stream, so results never depend on execution order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimConfig:
    T: int
    N: int
    delta_gamma: float = 0.0
    psi: float = 0.0
    innovation: str = "gaussian"
    kappa: float = 6.5
    burn_in: int = 50
    seed: int = 0
    n_factors: int = 3
    latent: bool = True
    start_month: str = "1990-01"

    def __post_init__(self):
        if self.T < 10:
            raise DomainError(f"T must be at least 10, got {self.T}")
        if self.N < 3:
            raise DomainError(f"N must be at least 3, got {self.N}")
        if not 0.0 <= self.delta_gamma <= 1.0:
            raise DomainError(f"delta_gamma must lie in [0, 1], got {self.delta_gamma}")
        if self.psi >= 1.0:
            raise SingularSAR(f"I - psi W is singular or unstable for psi={self.psi}")
        if self.psi < 0.0:
            raise DomainError(f"psi must lie in [0, 1), got {self.psi}")
        if self.innovation not in INNOVATIONS:
            raise DomainError(f"innovation must be one of {INNOVATIONS}, got {self.innovation!r}")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")
        if not 1 <= self.n_factors <= 3:
            raise DomainError("n_factors must be 1, 2 or 3")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class AlphaSpec:
    """Null (all zero) or sparse alternating-sign alphas on the first ``n_active`` assets."""

    kind: str = "null"
    n_active: int = 0

    def __post_init__(self):
        if self.kind not in ("null", "sparse"):
            raise DomainError(f"alpha kind must be 'null' or 'sparse', got {self.kind!r}")
        if self.n_active < 0:
            raise DomainError("n_active must be nonnegative")
        if self.kind == "null" and self.n_active != 0:
            raise DomainError("a null alpha spec has no active assets")

    @classmethod
    def null(cls):
        return cls("null", 0)

    @classmethod
    def sparse(cls, n_active):
        return cls("sparse", n_active) if n_active > 0 else cls.null()

    def vector(self, n_assets):
        if self.n_active > n_assets:
            raise DomainError(f"n_active={self.n_active} exceeds N={n_assets}")
        return sparse_alpha(n_assets, self.n_active)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SimulatedPanel:
    returns: ReturnPanel
    factors: FactorPanel
    true_alpha: np.ndarray
    config: SimConfig
    alpha_spec: AlphaSpec
    stream: tuple = field(default=())

    def to_csv(self, returns_path, factors_path, rf=0.0):
        """Write the panel in the returns/factors CSV layout read by :mod:`alphaq.rolling`.

        The first factor is written as ``MktRF``, further factors as
        ``F2``, ``F3``. Raw returns are ``Y + rf`` so that the loader recovers
        ``Y`` as excess returns.
        """
        months = self.returns.time_ids
        F = self.factors.values
        with open(factors_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            extra = [f"F{k + 1}" for k in range(1, F.shape[1])]
            w.writerow(["month", "MktRF", "RF", *extra])
            for t, month in enumerate(months):
                w.writerow([month, repr(float(F[t, 0])), repr(float(rf)), *(repr(float(x)) for x in F[t, 1:])])
        Y = self.returns.values
        with open(returns_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "asset", "ret"])
            for t, month in enumerate(months):
                for i, asset in enumerate(self.returns.asset_ids):
                    w.writerow([month, asset, repr(float(Y[i, t] + rf))])


@dataclass(frozen=True)
class RookWeights:
    """Row-normalized nearest-neighbour weights on a line, stored implicitly."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("rook weights need at least two units")

    def dense(self):
        W = np.zeros((self.n, self.n))
        idx = np.arange(self.n - 1)
        W[idx, idx + 1] = 0.5
        W[idx + 1, idx] = 0.5
        W[0, 1] = 1.0
        W[-1, -2] = 1.0
        return W

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[0] = x[1]
        out[-1] = x[-2]
        out[1:-1] = 0.5 * (x[:-2] + x[2:])
        return out

    def sar_banded(self, psi):
        """``I - psi W`` in the (1, 1) banded layout of ``solve_banded``."""
        n = self.n
        ab = np.zeros((3, n))
        ab[1, :] = 1.0
        # ab[0, j] = A[j-1, j], ab[2, j] = A[j+1, j]
        ab[0, 1:] = -0.5 * psi
        ab[0, 1] = -psi
        ab[2, :-1] = -0.5 * psi
        ab[2, n - 2] = -psi
        if n == 2:
            ab[0, 1] = -psi
            ab[2, 0] = -psi
        return ab

    def sar_solve(self, psi, rhs):
        """Solve ``(I - psi W) x = rhs`` for a vector or an N x T matrix."""
        if psi >= 1.0:
            raise SingularSAR(f"I - psi W is singular for psi={psi}")
        if psi == 0.0:
            return np.array(rhs, dtype=float, copy=True)
        return solve_banded((1, 1), self.sar_banded(psi), rhs)


def build_rook_weights(n):
    return RookWeights(n)


def simulate_factors(T, burn_in, rng, shocks=None, n_factors=3):
    """AR(1) factors with GARCH(1,1) conditional variances.

    The recursion starts from ``f = 0``, ``h = 1`` and a zero initial shock,
    runs for ``burn_in + T`` steps and keeps the last ``T``. Conditional
    variances are floored at 1e-12 because the third factor's negative
    GARCH coefficient can push ``h`` below zero.

    Parameters
    ----------
    shocks : ndarray, optional
        ``(burn_in + T, n_factors)`` standard normal shocks to use instead of
        drawing from ``rng``.
    """
    steps = burn_in + T
    k = n_factors
    if shocks is None:
        shocks = rng.standard_normal((steps, k))
    else:
        shocks = np.asarray(shocks, dtype=float)
        if shocks.shape != (steps, k):
            raise DomainError(f"shocks must have shape {(steps, k)}, got {shocks.shape}")
    ar = FACTOR_AR[:k]
    rho = GARCH_RHO[:k]
    phi = GARCH_PHI[:k]
    const = GARCH_OMEGA[:k] * (1.0 - rho - phi)

    f = np.zeros(k)
    h = np.ones(k)
    e = np.zeros(k)
    path = np.empty((steps, k))
    for s in range(steps):
        h = np.maximum(const + rho * h + phi * e * e, H_FLOOR)
        e = np.sqrt(h) * shocks[s]
        f = ar * f + e
        path[s] = f
    names = ("MktRF", "F2", "F3")[:k]
    return FactorPanel(path[burn_in:], factor_names=names)


def draw_loadings(N, rng, n_factors=3):
    cols = [rng.uniform(lo, hi, size=N) for lo, hi in LOADING_BOUNDS[:n_factors]]
    return np.column_stack(cols)


def latent_loadings(N, delta_gamma, rng):
    """``floor(N^delta)`` loadings from U(0.7, 0.9), the rest zero, randomly placed."""
    if not 0.0 <= delta_gamma <= 1.0:
        raise DomainError(f"delta_gamma must lie in [0, 1], got {delta_gamma}")
    # guard against N**0.5 landing a hair below an integer
    k = int(math.floor(N ** delta_gamma + 1e-9))
    k = min(max(k, 0), N)
    gamma = np.zeros(N)
    gamma[:k] = rng.uniform(*LATENT_BOUNDS, size=k)
    return rng.permutation(gamma)


def sparse_alpha(N, n_active):
    """``4 / n^(1/2.2)`` with alternating signs on the first ``n_active`` assets."""
    alpha = np.zeros(N)
    if n_active <= 0:
        return alpha
    if n_active > N:
        raise DomainError(f"n_active={n_active} exceeds N={N}")
    amp = 4.0 / n_active ** (1.0 / 2.2)
    signs = np.where(np.arange(n_active) % 2 == 0, 1.0, -1.0)
    alpha[:n_active] = amp * signs
    return alpha


def draw_innovations(shape, innovation, rng):
    if innovation == "gaussian":
        return rng.standard_normal(shape)
    if innovation == "student_t8":
        return rng.standard_t(T8_DOF, size=shape) / math.sqrt(T8_DOF / (T8_DOF - 2.0))
    raise DomainError(f"unknown innovation {innovation!r}")


def simulate_panel(config: SimConfig, alpha: AlphaSpec = None, rng=None, stream=()):
    """Generate one return panel.

    ``rng`` defaults to the substream ``stream`` of ``config.seed``.
    """
    if alpha is None:
        alpha = AlphaSpec.null()
    if rng is None:
        rng = make_rng(config.seed, *stream)
    N, T = config.N, config.T
    true_alpha = alpha.vector(N)

    beta = draw_loadings(N, rng, config.n_factors)
    gamma = latent_loadings(N, config.delta_gamma, rng)
    if not config.latent:
        gamma = np.zeros(N)
    sigma_eta = np.sqrt((1.0 + rng.chisquare(2, size=N)) / 3.0)
    factors = simulate_factors(T, config.burn_in, rng, n_factors=config.n_factors)
    latent = rng.standard_normal(T)
    eps = draw_innovations((N, T), config.innovation, rng)

    eta = RookWeights(N).sar_solve(config.psi, sigma_eta[:, None] * eps)
    u = gamma[:, None] * latent[None, :] + eta
    Y = true_alpha[:, None] + beta @ factors.values.T + config.kappa * u

    width = max(4, len(str(N)))
    asset_ids = [f"S{i:0{width}d}" for i in range(1, N + 1)]
    returns = ReturnPanel(Y, asset_ids=asset_ids, time_ids=month_range(config.start_month, T))
    true_alpha.setflags(write=False)
    return SimulatedPanel(
        returns=returns,
        factors=factors,
        true_alpha=true_alpha,
        config=config,
        alpha_spec=alpha,
        stream=tuple(stream),
    )

