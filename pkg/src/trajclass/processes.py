"""
Exact simulation of the four reference planar diffusion models.

Brownian motion, Brownian motion with constant drift, the Ornstein-Uhlenbeck
process and fractional Brownian motion are all sampled without discretisation
error: each coordinate axis is simulated independently from its exact
Gaussian transition law.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg, signal

from .errors import InsufficientDataError, ParameterError, UsageError

# Above this size the Toeplitz Cholesky factor is replaced by circulant embedding.
CHOLESKY_MAX_N = 2048


@dataclass(frozen=True)
class RngSeed:
    """Base seed plus replicate index.

    Each ``(seed, stream_id)`` pair maps to its own counter-based Philox
    stream, so replicate ``r`` never depends on how many replicates were
    drawn before it.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "RngSeed":
        return RngSeed(self.seed, stream_id)


def make_rng(seed: Union[int, RngSeed, np.random.Generator, None], stream_id: int = 0):
    """Coerce ``seed`` into something with a ``standard_normal`` method."""
    if seed is None:
        return np.random.default_rng()
    if isinstance(seed, RngSeed):
        return seed.generator()
    if isinstance(seed, (int, np.integer)):
        return RngSeed(int(seed), stream_id).generator()
    return seed


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled planar track ``X_{t0}, ..., X_{tn}``."""

    positions: np.ndarray
    dt: float = 1.0
    t0: float = 0.0
    track_id: object = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ParameterError(f"positions must have shape (n+1, 2), got {pos.shape}")
        if pos.shape[0] < 1:
            raise InsufficientDataError("trajectory has no positions")
        if not np.all(np.isfinite(pos)):
            raise ParameterError("positions must be finite")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ParameterError(f"dt must be strictly positive, got {self.dt}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        """Number of increments."""
        return self.positions.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.positions.shape[0])

    @property
    def duration(self) -> float:
        return self.n * self.dt

    def increments(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)

    def __len__(self):
        return self.positions.shape[0]

    def __repr__(self):
        return f"Trajectory(track_id={self.track_id!r}, n={self.n}, dt={self.dt}, t0={self.t0})"


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise ParameterError(f"sigma must be > 0, got {sigma}")


def _as_vec2(v, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must be a finite 2-vector, got {v!r}")
    return (float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class Brownian:
    sigma: float = 1.0
    kind = "brownian"

    def __post_init__(self):
        _check_sigma(self.sigma)


@dataclass(frozen=True)
class DriftBrownian:
    sigma: float = 1.0
    v: tuple = (0.0, 0.0)
    kind = "drift"

    def __post_init__(self):
        _check_sigma(self.sigma)
        object.__setattr__(self, "v", _as_vec2(self.v, "v"))

    @classmethod
    def diagonal(cls, speed: float, sigma: float = 1.0) -> "DriftBrownian":
        """Drift of norm ``speed`` with equal components."""
        c = speed / np.sqrt(2.0)
        return cls(sigma=sigma, v=(c, c))


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    sigma: float = 1.0
    lam: float = 1.0
    theta: tuple = (0.0, 0.0)
    kind = "ou"

    def __post_init__(self):
        _check_sigma(self.sigma)
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ParameterError(f"lambda must be > 0, got {self.lam}")
        object.__setattr__(self, "theta", _as_vec2(self.theta, "theta"))

    @property
    def stationary_variance(self) -> float:
        """Per-axis variance of the invariant law."""
        return self.sigma**2 / (2.0 * self.lam)


@dataclass(frozen=True)
class FractionalBrownian:
    sigma: float = 1.0
    hurst: float = 0.5
    kind = "fbm"

    def __post_init__(self):
        _check_sigma(self.sigma)
        if not (0.0 < self.hurst < 1.0):
            raise ParameterError(f"hurst must lie in (0, 1), got {self.hurst}")


ProcessSpec = Union[Brownian, DriftBrownian, OrnsteinUhlenbeck, FractionalBrownian]


def fgn_autocovariance(hurst, lag):
    """Autocovariance of standard fractional Gaussian noise at integer ``lag``.

    ``0.5 * (|i+1|^{2H} - 2|i|^{2H} + |i-1|^{2H})``; vectorised over ``lag``.
    """
    if not (0.0 < hurst < 1.0):
        raise ParameterError(f"hurst must lie in (0, 1), got {hurst}")
    i = np.abs(np.asarray(lag, dtype=float))
    h2 = 2.0 * hurst
    out = 0.5 * (np.abs(i + 1) ** h2 - 2.0 * i**h2 + np.abs(i - 1) ** h2)
    return float(out) if out.ndim == 0 else out


class _FactorCache:
    """Read-through cache of fGn Cholesky factors keyed by ``(n, hurst)``."""

    def __init__(self, maxsize=64):
        self._lock = threading.Lock()
        self._store = {}
        self.maxsize = maxsize

    def get(self, n: int, hurst: float) -> np.ndarray:
        key = (int(n), float(hurst))
        factor = self._store.get(key)
        if factor is not None:
            return factor
        cov = linalg.toeplitz(fgn_autocovariance(hurst, np.arange(n)))
        factor = np.linalg.cholesky(cov)
        factor.setflags(write=False)
        with self._lock:
            if len(self._store) >= self.maxsize:
                self._store.pop(next(iter(self._store)))
            factor = self._store.setdefault(key, factor)
        return factor


_cholesky_cache = _FactorCache()


def fgn_cholesky_factor(n: int, hurst: float) -> np.ndarray:
    return _cholesky_cache.get(n, hurst)


def fgn_sample(hurst: float, n: int, size: tuple, rng, method: str = "auto") -> np.ndarray:
    """Draw standard fGn with trailing dimension ``n``; output shape ``size + (n,)``."""
    if method == "auto":
        method = "cholesky" if n <= CHOLESKY_MAX_N else "circulant"
    if method == "cholesky":
        z = rng.standard_normal(tuple(size) + (n,))
        return z @ fgn_cholesky_factor(n, hurst).T
    if method == "circulant":
        return _fgn_circulant(hurst, n, size, rng)
    raise ParameterError(f"unknown fGn method {method!r}")


def _fgn_circulant(hurst, n, size, rng):
    # Davies-Harte embedding into a circulant of size 2n.
    r = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10:
        raise ParameterError("circulant embedding is not nonnegative definite")
    scale = np.sqrt(np.clip(eig, 0.0, None) / (2 * n))
    shape = tuple(size) + (2 * n,)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.fft.fft(scale * w, axis=-1).real[..., :n]


def simulate_paths(spec, n: int, reps: int, dt: float = 1.0, x0=None, rng=None, fgn_method="auto"):
    """Vectorised simulation; returns an array of shape ``(reps, n+1, 2)``.

    ``x0`` is a 2-vector, ``None`` for the origin, or ``"stationary"`` to draw
    the Ornstein-Uhlenbeck start point from its invariant law.
    """
    if n < 1:
        raise ParameterError(f"need at least one increment, got n={n}")
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    rng = make_rng(rng)
    stationary = isinstance(x0, str)
    if stationary:
        if x0 != "stationary":
            raise UsageError(f"unknown start mode {x0!r}")
        if not isinstance(spec, OrnsteinUhlenbeck):
            raise UsageError("stationary start is only defined for the Ornstein-Uhlenbeck model")
        start = None
    else:
        start = np.zeros(2) if x0 is None else np.asarray(_as_vec2(x0, "x0"))

    out = np.empty((reps, n + 1, 2))
    sigma = spec.sigma
    if isinstance(spec, OrnsteinUhlenbeck):
        theta = np.asarray(spec.theta)
        if stationary:
            start = theta + np.sqrt(spec.stationary_variance) * rng.standard_normal((reps, 2))
        decay = np.exp(-spec.lam * dt)
        step_sd = sigma * np.sqrt(-np.expm1(-2.0 * spec.lam * dt) / (2.0 * spec.lam))
        z = rng.standard_normal((reps, n, 2))
        dev0 = np.broadcast_to(start - theta, (reps, 2))
        # AR(1) recursion dev_k = decay * dev_{k-1} + step_sd * z_k, run along time.
        dev, _ = signal.lfilter([step_sd], [1.0, -decay], z, axis=1, zi=(decay * dev0)[:, None, :])
        out[:, 0, :] = dev0 + theta
        out[:, 1:, :] = dev + theta
        return out

    out[:, 0, :] = start
    if isinstance(spec, FractionalBrownian):
        noise = fgn_sample(spec.hurst, n, (reps, 2), rng, fgn_method)
        steps = sigma * dt**spec.hurst * np.swapaxes(noise, 1, 2)
    elif isinstance(spec, (Brownian, DriftBrownian)):
        steps = sigma * np.sqrt(dt) * rng.standard_normal((reps, n, 2))
        if isinstance(spec, DriftBrownian):
            steps = steps + np.asarray(spec.v) * dt
    else:
        raise ParameterError(f"unsupported process spec {spec!r}")
    np.cumsum(steps, axis=1, out=out[:, 1:, :])
    out[:, 1:, :] += start
    return out


def simulate(spec, n: int, dt: float = 1.0, t0: float = 0.0, x0=None, seed=None, track_id=0) -> Trajectory:
    """Simulate one trajectory of ``n`` increments."""
    rng = make_rng(seed)
    pos = simulate_paths(spec, n, 1, dt=dt, x0=x0, rng=rng)[0]
    return Trajectory(pos, dt=dt, t0=t0, track_id=track_id)


def theoretical_msd(spec, t):
    """Expected squared displacement after time ``t`` (planar, both axes)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("t must be nonnegative")
    s2 = spec.sigma**2
    if isinstance(spec, Brownian):
        out = 2 * s2 * t
    elif isinstance(spec, DriftBrownian):
        out = float(np.dot(spec.v, spec.v)) * t**2 + 2 * s2 * t
    elif isinstance(spec, OrnsteinUhlenbeck):
        out = 2 * s2 * -np.expm1(-spec.lam * t) / spec.lam
    elif isinstance(spec, FractionalBrownian):
        out = 2 * s2 * t ** (2 * spec.hurst)
    else:
        raise ParameterError(f"unsupported process spec {spec!r}")
    return float(out) if out.ndim == 0 else out


def spec_from_dict(d: dict):
    """Build a spec from ``{"model": ..., **params}`` (used by the CLI and corpus files)."""
    d = dict(d)
    model = d.pop("model").lower()
    if model in ("brownian", "bm"):
        return Brownian(**d)
    if model in ("drift", "driftbrownian"):
        if "speed" in d:
            return DriftBrownian.diagonal(d.pop("speed"), **d)
        return DriftBrownian(**d)
    if model in ("ou", "ornsteinuhlenbeck"):
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return OrnsteinUhlenbeck(**d)
    if model in ("fbm", "fractionalbrownian"):
        return FractionalBrownian(**d)
    raise UsageError(f"unknown model {model!r}")


@dataclass(frozen=True)
class MixtureComponent:
    label: str
    spec: object
    count: int
    x0: object = None


# Alternatives tuned to 80% single-test power at n=30, sigma=dt=1.
REFERENCE_ALTERNATIVES = {
    "ou": OrnsteinUhlenbeck(sigma=1.0, lam=0.53),
    "fbm_sub": FractionalBrownian(sigma=1.0, hurst=0.13),
    "drift": DriftBrownian.diagonal(0.66, sigma=1.0),
    "fbm_sup": FractionalBrownian(sigma=1.0, hurst=0.85),
}


def _split(total, parts):
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def mixture_components(m: int, m0: int) -> list:
    """Composition of a labelled benchmark collection.

    ``m0`` Brownian tracks; the remaining ``m - m0`` split evenly between
    subdiffusion (OU, fBm h<1/2) and superdiffusion (drift, fBm h>1/2),
    each half again split evenly between its two models.
    """
    if not 0 <= m0 <= m:
        raise ParameterError(f"need 0 <= m0 <= m, got m0={m0}, m={m}")
    m1, m2 = _split(m - m0, 2)
    ou, fsub = _split(m1, 2)
    dr, fsup = _split(m2, 2)
    alt = REFERENCE_ALTERNATIVES
    comps = [
        MixtureComponent("H0", Brownian(1.0), m0),
        MixtureComponent("H1", alt["ou"], ou, "stationary"),
        MixtureComponent("H1", alt["fbm_sub"], fsub),
        MixtureComponent("H2", alt["drift"], dr),
        MixtureComponent("H2", alt["fbm_sup"], fsup),
    ]
    return [c for c in comps if c.count > 0]


def simulate_mixture(m: int, m0: int, n: int = 30, dt: float = 1.0, seed=0):
    """Labelled collection of ``m`` trajectories; returns ``(trajectories, truth)``.

    ``truth`` maps track id to ``"H0"``, ``"H1"`` or ``"H2"``.
    """
    rng = make_rng(seed)
    trajs, truth = [], {}
    k = 0
    for comp in mixture_components(m, m0):
        paths = simulate_paths(comp.spec, n, comp.count, dt=dt, x0=comp.x0, rng=rng)
        for p in paths:
            trajs.append(Trajectory(p, dt=dt, track_id=k))
            truth[k] = comp.label
            k += 1
    return trajs, truth
