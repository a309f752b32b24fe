"""
Diffusion-coefficient estimators and the MSD log-log baseline classifier.

The array helpers (``sigma1_sq_batch`` and friends) accept stacks of paths of
shape ``(..., n+1, 2)`` so that Monte Carlo loops stay vectorised.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrajectoryError, InsufficientDataError, ParameterError
from .labels import Label


class SigmaMethod(str, enum.Enum):
    FIRST_DIFF = "first"
    SECOND_DIFF = "second"

    @classmethod
    def coerce(cls, value) -> "SigmaMethod":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("-", "").replace("_", "")
        if v in ("first", "firstdiff", "sigma1", "1"):
            return cls.FIRST_DIFF
        if v in ("second", "seconddiff", "sigma2", "2"):
            return cls.SECOND_DIFF
        raise ParameterError(f"unknown estimator method {value!r}")


MsdLabel = Label


@dataclass(frozen=True)
class SigmaEstimate:
    value: float
    method: SigmaMethod
    n_increments: int

    @property
    def variance(self) -> float:
        return self.value**2


@dataclass(frozen=True)
class MsdCurve:
    lags: np.ndarray
    values: np.ndarray
    n: int
    dt: float = 1.0

    @property
    def times(self) -> np.ndarray:
        return self.lags * self.dt


@dataclass(frozen=True)
class MsdClassification:
    beta_hat: float
    label: MsdLabel


def sigma1_sq_batch(paths: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """First-difference estimate of sigma^2 for each path in the stack."""
    d = np.diff(paths, axis=-2)
    n = d.shape[-2]
    return np.einsum("...ij,...ij->...", d, d) / (2.0 * n * dt)


def sigma2_sq_batch(paths: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """Second-difference estimate of sigma^2; removes a constant drift."""
    d2 = np.diff(paths, n=2, axis=-2)
    n = paths.shape[-2] - 1
    return np.einsum("...ij,...ij->...", d2, d2) / (2.0 * n * dt)


def sigma_sq_batch(paths, dt=1.0, method=SigmaMethod.FIRST_DIFF):
    method = SigmaMethod.coerce(method)
    if method is SigmaMethod.FIRST_DIFF:
        return sigma1_sq_batch(paths, dt)
    return sigma2_sq_batch(paths, dt)


def sigma1(traj) -> SigmaEstimate:
    if traj.n < 1:
        raise InsufficientDataError("sigma1 needs at least 2 positions")
    value = float(np.sqrt(sigma1_sq_batch(traj.positions, traj.dt)))
    return SigmaEstimate(value, SigmaMethod.FIRST_DIFF, traj.n)


def sigma2(traj) -> SigmaEstimate:
    if traj.n < 2:
        raise InsufficientDataError("sigma2 needs at least 3 positions")
    value = float(np.sqrt(sigma2_sq_batch(traj.positions, traj.dt)))
    return SigmaEstimate(value, SigmaMethod.SECOND_DIFF, traj.n)


def estimate_sigma(traj, method=SigmaMethod.FIRST_DIFF) -> SigmaEstimate:
    method = SigmaMethod.coerce(method)
    return sigma1(traj) if method is SigmaMethod.FIRST_DIFF else sigma2(traj)


def msd_curve_batch(paths: np.ndarray, max_lag: int) -> np.ndarray:
    """Time-averaged MSD at lags ``1..max_lag``; shape ``(..., max_lag)``."""
    out = np.empty(paths.shape[:-2] + (max_lag,))
    for j in range(1, max_lag + 1):
        d = paths[..., j:, :] - paths[..., :-j, :]
        out[..., j - 1] = np.einsum("...ij,...ij->...", d, d) / d.shape[-2]
    return out


def msd_curve(traj, max_lag: int) -> MsdCurve:
    """Pathwise MSD estimate, averaging the ``n - j + 1`` displacements at lag ``j``."""
    if not 1 <= max_lag <= traj.n:
        raise ParameterError(f"max_lag must be in [1, {traj.n}], got {max_lag}")
    values = msd_curve_batch(traj.positions, max_lag)
    return MsdCurve(np.arange(1, max_lag + 1), values, traj.n, traj.dt)


# Defaults tuned so that, at n=30, the baseline reproduces the reference MSD confusion pattern.
IMMOBILE_RADIUS_FACTOR = 3.25


def default_fit_lags(n: int) -> int:
    """Lags ``1..n//2`` (at least 2)."""
    return max(2, n // 2)


def loglog_slope_batch(msd: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """OLS slope of ``log MSD`` on ``log(j dt)`` along the last axis."""
    lags = np.arange(1, msd.shape[-1] + 1)
    x = np.log(lags * dt)
    xc = x - x.mean()
    with np.errstate(divide="ignore"):
        y = np.log(msd)
    return (y @ xc) / (xc @ xc)


def max_displacement_batch(paths: np.ndarray) -> np.ndarray:
    d = paths[..., 1:, :] - paths[..., :1, :]
    return np.sqrt(np.einsum("...ij,...ij->...i", d, d).max(axis=-1))


def msd_label(beta_hat, max_disp, immobile_radius, beta_low=0.9, beta_high=1.1) -> MsdLabel:
    if max_disp < immobile_radius:
        return MsdLabel.NOT_MOVING
    if beta_hat < beta_low:
        return MsdLabel.SUBDIFFUSION
    if beta_hat > beta_high:
        return MsdLabel.SUPERDIFFUSION
    return MsdLabel.BROWNIAN


def msd_classify(traj, fit_lags=None, beta_low=0.9, beta_high=1.1, immobile_radius=None) -> MsdClassification:
    """Classify by the fitted anomalous exponent of the MSD curve.

    ``immobile_radius`` defaults to ``IMMOBILE_RADIUS_FACTOR * sigma1 * sqrt(dt)``;
    tracks that never leave that disc around their start are ``NotMoving``.
    """
    if fit_lags is None:
        fit_lags = default_fit_lags(traj.n)
    if fit_lags < 2:
        raise ParameterError("at least two lags are needed for a slope")
    if fit_lags > traj.n:
        raise ParameterError(f"fit_lags={fit_lags} exceeds the {traj.n} available lags")
    if immobile_radius is None:
        immobile_radius = IMMOBILE_RADIUS_FACTOR * sigma1(traj).value * np.sqrt(traj.dt)
    max_disp = float(max_displacement_batch(traj.positions))
    if max_disp < immobile_radius:
        return MsdClassification(float("nan"), MsdLabel.NOT_MOVING)
    curve = msd_curve_batch(traj.positions, fit_lags)
    if np.any(curve <= 0):
        raise DegenerateTrajectoryError("MSD vanishes at a fitted lag; log-log fit undefined")
    beta = float(loglog_slope_batch(curve, traj.dt))
    return MsdClassification(beta, msd_label(beta, max_disp, immobile_radius, beta_low, beta_high))


MSD_CODES = (Label.BROWNIAN, Label.SUBDIFFUSION, Label.SUPERDIFFUSION, Label.NOT_MOVING)


def msd_classify_batch(paths, dt=1.0, fit_lags=None, beta_low=0.9, beta_high=1.1, radius_factor=IMMOBILE_RADIUS_FACTOR):
    """Vectorised :func:`msd_classify`; returns ``(beta_hat, codes)``.

    ``codes`` index into ``MSD_CODES``. Motionless paths get code 3.
    """
    n = paths.shape[-2] - 1
    J = default_fit_lags(n) if fit_lags is None else fit_lags
    radius = radius_factor * np.sqrt(sigma1_sq_batch(paths, dt) * dt)
    moving = max_displacement_batch(paths) >= radius
    with np.errstate(invalid="ignore"):
        beta = loglog_slope_batch(msd_curve_batch(paths, J), dt)
    codes = np.where(beta < beta_low, 1, np.where(beta > beta_high, 2, 0))
    codes = np.where(moving & np.isfinite(beta), codes, 3)
    return beta, codes
