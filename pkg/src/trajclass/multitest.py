"""
Collection-level three-decision testing with false discovery rate control.

Benjamini-Hochberg (standard, or adaptive with an estimate of the number of
true nulls) selects the rejected tracks from their two-sided p-values; each
rejection is then assigned to subdiffusion or superdiffusion by comparing
its one-sided p-values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, TrajclassError, UsageError
from .labels import HYPOTHESIS_LABEL, Label


class Mode(str, enum.Enum):
    STANDARD = "standard"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class PValueRecord:
    track_id: object
    p: float
    p_sub: float
    p_sup: float

    @classmethod
    def from_one_sided(cls, track_id, p_sub, p_sup):
        return cls(track_id, min(1.0, 2.0 * min(p_sub, p_sup)), p_sub, p_sup)


@dataclass(frozen=True)
class MultiTestReport:
    alpha: float
    mode: Mode
    rejected_sub: tuple
    rejected_sup: tuple
    accepted: tuple
    m: int
    threshold_p: Optional[float]
    m0_hat: Optional[int] = None

    @property
    def n_rejected(self) -> int:
        return len(self.rejected_sub) + len(self.rejected_sup)

    def decisions(self) -> dict:
        out = {tid: Label.BROWNIAN for tid in self.accepted}
        out.update({tid: Label.SUBDIFFUSION for tid in self.rejected_sub})
        out.update({tid: Label.SUPERDIFFUSION for tid in self.rejected_sup})
        return out


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def bh_threshold(pvals, alpha: float, m: Optional[float] = None):
    """Step-up rule: largest ``k`` with ``p_(k) <= k * alpha / m``.

    ``m`` defaults to the number of p-values; the adaptive procedure passes
    its estimate of the number of true nulls instead. Returns
    ``(k_star, threshold)``; ``threshold`` is ``None`` when nothing is rejected.
    """
    _check_alpha(alpha)
    p = np.sort(np.asarray(pvals, dtype=float))
    if p.size == 0:
        return 0, None
    if np.any((p < 0) | (p > 1)):
        raise ParameterError("p-values must lie in [0, 1]")
    m_eff = p.size if m is None else m
    ok = np.nonzero(p <= np.arange(1, p.size + 1) * alpha / m_eff)[0]
    if ok.size == 0:
        return 0, None
    k = int(ok[-1]) + 1
    return k, float(p[k - 1])


def estimate_m0(pvals) -> int:
    """Lowest-slope estimate of the number of true null hypotheses.

    Slopes ``S_i = (1 - p_(i)) / (m + 1 - i)`` are scanned for the first
    decrease at ``i = j >= 2``; the estimate is ``min(m, ceil(1/S_j + 1))``,
    or ``m`` when the slopes never decrease.
    """
    p = np.asarray(pvals, dtype=float)
    if p.size == 0:
        raise ParameterError("need at least one p-value")
    return int(estimate_m0_batch(p[None, :])[0])


def estimate_m0_batch(p: np.ndarray) -> np.ndarray:
    """Row-wise :func:`estimate_m0` for an ``(R, m)`` array."""
    p = np.sort(np.asarray(p, dtype=float), axis=-1)
    m = p.shape[-1]
    if m < 2:
        return np.full(p.shape[0], m, dtype=int)
    slopes = (1.0 - p) / (m + 1 - np.arange(1, m + 1))
    drop = slopes[:, 1:] < slopes[:, :-1]
    has = drop.any(axis=1)
    j = np.argmax(drop, axis=1) + 1
    sj = slopes[np.arange(p.shape[0]), j]
    with np.errstate(divide="ignore"):
        est = np.ceil(1.0 / sj + 1.0)
    est = np.where(has & np.isfinite(est), np.minimum(est, m), m)
    return est.astype(int)


def bh_reject_batch(p: np.ndarray, alpha: float, m_eff=None) -> np.ndarray:
    """Row-wise step-up rejection mask for an ``(R, m)`` array of p-values."""
    p = np.asarray(p, dtype=float)
    R, m = p.shape
    if m_eff is None:
        m_eff = np.full(R, m, dtype=float)
    ps = np.sort(p, axis=1)
    crit = np.arange(1, m + 1)[None, :] * alpha / np.asarray(m_eff, dtype=float)[:, None]
    ok = ps <= crit
    k = np.where(ok.any(axis=1), m - np.argmax(ok[:, ::-1], axis=1), 0)
    thr = np.where(k > 0, ps[np.arange(R), np.maximum(k - 1, 0)], -np.inf)
    return p <= thr[:, None]


def procedure1_batch(p, p_sub, p_sup, alpha: float, mode=Mode.STANDARD):
    """Vectorised procedure over replicates; returns ``(codes, m0_hat)``.

    ``codes`` has the shape of ``p`` with ``-1`` (subdiffusion), ``0``
    (not rejected) or ``+1`` (superdiffusion).
    """
    mode = Mode(mode)
    p = np.atleast_2d(p)
    m0_hat = estimate_m0_batch(p) if mode is Mode.ADAPTIVE else np.full(p.shape[0], p.shape[1])
    rej = bh_reject_batch(p, alpha, m0_hat)
    codes = np.where(rej, np.where(np.atleast_2d(p_sub) < np.atleast_2d(p_sup), -1, 1), 0)
    return codes, m0_hat


def procedure1(records, alpha: float = 0.05, mode=Mode.STANDARD) -> MultiTestReport:
    """Directional Benjamini-Hochberg over a collection of tracks."""
    _check_alpha(alpha)
    mode = Mode(mode)
    records = list(records)
    if not records:
        raise UsageError("procedure1 needs at least one record")
    # Ties broken by track id so the report order is deterministic.
    records.sort(key=lambda r: (r.p, str(r.track_id)))
    p = np.array([r.p for r in records])
    m = len(records)
    m0_hat = estimate_m0(p) if mode is Mode.ADAPTIVE else None
    k, thr = bh_threshold(p, alpha, m0_hat if m0_hat is not None else m)
    sub, sup, acc = [], [], []
    for r in records:
        if thr is not None and r.p <= thr:
            if r.p_sub == r.p_sup:
                raise TrajclassError(f"rejected track {r.track_id!r} has p_sub == p_sup")
            (sub if r.p_sub < r.p_sup else sup).append(r.track_id)
        else:
            acc.append(r.track_id)
    return MultiTestReport(alpha, mode, tuple(sub), tuple(sup), tuple(acc), m, thr, m0_hat)


@dataclass(frozen=True)
class ErrorCounts:
    """Cells of the two-alternative outcome table.

    Rows are the truth (H0, H1, H2), columns the decision (accept H0,
    decide H1, decide H2)::

        H0:  U   V1  V2
        H1:  T1  S1  S3
        H2:  T2  S4  S2
    """

    U: int = 0
    V1: int = 0
    V2: int = 0
    T1: int = 0
    S1: int = 0
    S3: int = 0
    T2: int = 0
    S4: int = 0
    S2: int = 0

    @property
    def V(self):
        return self.V1 + self.V2

    @property
    def S_wrong(self):
        """Directional (type III) errors."""
        return self.S3 + self.S4

    @property
    def T(self):
        return self.T1 + self.T2

    @property
    def R(self):
        return self.V + self.S1 + self.S2 + self.S3 + self.S4

    @property
    def m0(self):
        return self.U + self.V1 + self.V2

    @property
    def m1(self):
        return self.T1 + self.S1 + self.S3

    @property
    def m2(self):
        return self.T2 + self.S4 + self.S2

    @property
    def m(self):
        return self.m0 + self.m1 + self.m2

    @property
    def fdr_realized(self) -> float:
        return self.V / max(self.R, 1)

    @property
    def mdfdr_realized(self) -> float:
        return (self.V + self.S_wrong) / max(self.R, 1)

    def avg_power(self, i: int) -> float:
        """Fraction of true H_i declared H_i (``nan`` if there are none)."""
        s, mi = (self.S1, self.m1) if i == 1 else (self.S2, self.m2)
        return s / mi if mi else float("nan")

    def matrix(self) -> np.ndarray:
        return np.array([[self.U, self.V1, self.V2], [self.T1, self.S1, self.S3], [self.T2, self.S4, self.S2]])


_TRUTH_ROW = {Label.BROWNIAN: 0, Label.SUBDIFFUSION: 1, Label.SUPERDIFFUSION: 2}


def _truth_row(value):
    if isinstance(value, str) and value in HYPOTHESIS_LABEL:
        value = HYPOTHESIS_LABEL[value]
    try:
        return _TRUTH_ROW[Label(value)]
    except (ValueError, KeyError):
        raise ParameterError(f"unknown ground-truth label {value!r}") from None


def score_against_truth(report: MultiTestReport, truth: dict) -> ErrorCounts:
    """Fill the outcome table from a report and ground truth ``id -> H0/H1/H2``."""
    cells = np.zeros((3, 3), dtype=int)
    for col, ids in ((0, report.accepted), (1, report.rejected_sub), (2, report.rejected_sup)):
        for tid in ids:
            if tid not in truth:
                raise ParameterError(f"track {tid!r} has no ground truth")
            cells[_truth_row(truth[tid]), col] += 1
    (U, V1, V2), (T1, S1, S3), (T2, S4, S2) = cells.tolist()
    return ErrorCounts(U, V1, V2, T1, S1, S3, T2, S4, S2)


def counts_from_codes(codes: np.ndarray, truth_rows: np.ndarray) -> np.ndarray:
    """Batch outcome tables: ``codes`` (R, m) in {-1,0,1}, ``truth_rows`` (m,) in {0,1,2}.

    Returns an ``(R, 3, 3)`` integer array laid out like :meth:`ErrorCounts.matrix`.
    """
    col = np.where(codes == 0, 0, np.where(codes < 0, 1, 2))
    out = np.zeros(codes.shape[:1] + (3, 3), dtype=int)
    for r in range(3):
        sel = col[:, truth_rows == r]
        for c in range(3):
            out[:, r, c] = (sel == c).sum(axis=1)
    return out
