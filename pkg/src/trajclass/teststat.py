"""
Single-trajectory three-decision test.

The statistic is the maximal distance of the track from its starting point,
standardised by ``sqrt((t_n - t_0) * sigma_hat^2)``. Under free diffusion its
law is free of sigma and dt, so one Monte Carlo sample of standard Brownian
paths per ``(n, estimator)`` calibrates every trajectory of that length.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DegenerateTrajectoryError, InsufficientDataError, ParameterError, TableMismatchError
from .estimators import SigmaMethod, sigma_sq_batch
from .labels import Label
from .processes import RngSeed

DEFAULT_N_INTERACTIVE = 100_001
DEFAULT_N_FULL = 1_000_001

# Floats per Monte Carlo chunk; chunk boundaries (not worker count) fix the streams.
_CHUNK_BUDGET = 4_000_000


def t_statistic_batch(paths: np.ndarray, dt: float = 1.0, method=SigmaMethod.FIRST_DIFF) -> np.ndarray:
    """Vectorised statistic over a ``(..., n+1, 2)`` stack; ``nan`` for motionless paths."""
    n = paths.shape[-2] - 1
    d = paths[..., 1:, :] - paths[..., :1, :]
    dmax = np.sqrt(np.einsum("...ij,...ij->...i", d, d).max(axis=-1))
    s2 = sigma_sq_batch(paths, dt, method)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = dmax / np.sqrt(n * dt * s2)
    return np.where(s2 > 0, t, np.nan)


def t_statistic(traj, method=SigmaMethod.FIRST_DIFF) -> float:
    method = SigmaMethod.coerce(method)
    if traj.n < 2:
        raise InsufficientDataError("the statistic needs at least 2 increments")
    t = float(t_statistic_batch(traj.positions, traj.dt, method))
    if not np.isfinite(t):
        raise DegenerateTrajectoryError(f"track {traj.track_id!r} does not move (sigma_hat = 0)")
    return t


def _null_chunk(n, size, seed, stream_id, method):
    rng = RngSeed(seed, stream_id).generator()
    steps = rng.standard_normal((size, n, 2))
    paths = np.zeros((size, n + 1, 2))
    np.cumsum(steps, axis=1, out=paths[:, 1:, :])
    return t_statistic_batch(paths, 1.0, method)


def _chunk_sizes(n, N):
    chunk = max(1000, _CHUNK_BUDGET // (2 * n))
    full, rest = divmod(N, chunk)
    return [chunk] * full + ([rest] if rest else [])


@dataclass(frozen=True, eq=False)
class NullTable:
    """Sorted Monte Carlo sample of the statistic under free diffusion."""

    n: int
    N: int
    seed: int
    method: SigmaMethod
    sorted_sample: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sorted_sample, dtype=np.float64)
        if s.shape != (self.N,):
            raise ParameterError(f"sample length {s.shape} does not match N={self.N}")
        s.setflags(write=False)
        object.__setattr__(self, "sorted_sample", s)
        object.__setattr__(self, "method", SigmaMethod.coerce(self.method))

    @property
    def key(self):
        return (self.n, self.N, self.seed, self.method.value)

    def __eq__(self, other):
        if not isinstance(other, NullTable):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.sorted_sample, other.sorted_sample)

    def cdf(self, x):
        """Empirical CDF ``#{T <= x} / N``."""
        return np.searchsorted(self.sorted_sample, x, side="right") / self.N

    def survival(self, x):
        """``#{T >= x} / N``."""
        return (self.N - np.searchsorted(self.sorted_sample, x, side="left")) / self.N


def build_null_table(n: int, N: int = DEFAULT_N_INTERACTIVE, seed: int = 0, method=SigmaMethod.FIRST_DIFF, workers: int = 1) -> NullTable:
    """Simulate ``N`` standard Brownian paths of ``n`` increments and sort their statistics.

    Chunk ``c`` always draws from stream ``(seed, c)``, so the table is
    identical for any ``workers``.
    """
    method = SigmaMethod.coerce(method)
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if N < 1000:
        raise ParameterError(f"N must be >= 1000, got {N}")
    sizes = _chunk_sizes(n, N)
    jobs = [(n, size, seed, c, method) for c, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _null_chunk(*job), jobs))
    else:
        parts = [_null_chunk(*job) for job in jobs]
    sample = np.concatenate(parts)
    sample.sort(kind="stable")
    return NullTable(n, N, int(seed), method, sample)


def quantile(table: NullTable, x: float) -> float:
    """The ``ceil(x N)``-th order statistic (1-based)."""
    if not 0.0 < x < 1.0:
        raise ParameterError(f"quantile order must lie in (0, 1), got {x}")
    rank = math.ceil(round(x * table.N, 9))
    return float(table.sorted_sample[max(rank, 1) - 1])


def p_values(t, table: NullTable):
    """Return ``(p_sub, p_sup, p_two_sided)``; works elementwise on arrays."""
    p_sub = table.cdf(t)
    p_sup = table.survival(t)
    p_two = np.minimum(1.0, 2.0 * np.minimum(p_sub, p_sup))
    if np.ndim(t) == 0:
        return float(p_sub), float(p_sup), float(p_two)
    return p_sub, p_sup, p_two


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    t_stat: float
    p_sub: float
    p_sup: float
    p_two_sided: float
    decision: Label
    alpha: float
    track_id: object = None


def decide_statistic(t, lower, upper):
    """Vectorised decision given the two critical values; returns an int code array.

    ``-1`` subdiffusion, ``0`` Brownian, ``+1`` superdiffusion.
    """
    t = np.asarray(t)
    return np.where(t < lower, -1, np.where(t > upper, 1, 0))


_CODE_LABEL = {-1: Label.SUBDIFFUSION, 0: Label.BROWNIAN, 1: Label.SUPERDIFFUSION}


def critical_values(table: NullTable, alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return quantile(table, alpha / 2), quantile(table, 1 - alpha / 2)


def decide(traj, table: NullTable, alpha: float = 0.05) -> TestResult:
    """Three-decision test of one trajectory at level ``alpha``."""
    if traj.n != table.n:
        raise TableMismatchError(f"table built for n={table.n}, trajectory has n={traj.n}")
    lower, upper = critical_values(table, alpha)
    t = t_statistic(traj, table.method)
    p_sub, p_sup, p_two = p_values(t, table)
    code = int(decide_statistic(t, lower, upper))
    return TestResult(t, p_sub, p_sup, p_two, _CODE_LABEL[code], alpha, traj.track_id)


# --- asymptotic law of sup_{0<=s<=1} |W_s| for planar W -----------------------------


def bessel_j0_zeros(k_max: int) -> np.ndarray:
    """First ``k_max`` positive zeros of J0 by Newton from McMahon's expansion."""
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    beta = (np.arange(1, k_max + 1) - 0.25) * np.pi
    b8 = 8.0 * beta
    x = beta + 1.0 / b8 - 124.0 / (3.0 * b8**3) + 120928.0 / (15.0 * b8**5)
    for _ in range(50):
        # J0' = -J1
        step = special.j0(x) / special.j1(x)
        x = x + step
        if np.max(np.abs(step)) < 1e-15 * np.max(x):
            break
    return x


_ZEROS_CACHE = {}


def _zeros_and_weights(k_max):
    if k_max not in _ZEROS_CACHE:
        j = bessel_j0_zeros(k_max)
        _ZEROS_CACHE[k_max] = (j, 2.0 / (j * special.j1(j)))
    return _ZEROS_CACHE[k_max]


def asymptotic_cdf_S0(x, k_max: int = 100, with_error: bool = False):
    """CDF of the limiting law, truncated after ``k_max`` Bessel terms.

    With ``with_error=True`` returns ``(value, bound)`` where ``bound`` is the
    magnitude of the first omitted term; the series alternates with
    decreasing terms so this bounds the truncation error.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ParameterError("x must be > 0")
    j, w = _zeros_and_weights(k_max + 1)
    expo = np.exp(-np.multiply.outer(xa**-2, j**2) / 2.0)
    terms = expo * w
    value = np.clip(terms[..., :k_max].sum(axis=-1), 0.0, 1.0)
    bound = np.abs(terms[..., k_max])
    if xa.ndim == 0:
        value, bound = float(value), float(bound)
    return (value, bound) if with_error else value


def asymptotic_quantile_S0(p: float, k_max: int = 100) -> float:
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    return optimize.brentq(lambda x: asymptotic_cdf_S0(x, k_max) - p, 0.1, 20.0, xtol=1e-12)


def kolmogorov_distance(sample, cdf) -> float:
    """Sup distance between the empirical CDF of ``sample`` and a vectorised ``cdf``."""
    s = np.sort(np.asarray(sample))
    m = s.size
    f = cdf(s)
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(m) / m
    return float(max(upper.max(), lower.max()))
