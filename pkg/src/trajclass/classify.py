"""
Collection classification pipeline shared by the CLI and the benchmarks.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import DegenerateTrajectoryError, TrajclassError, UsageError
from .estimators import msd_classify
from .io import ClassifiedTrack, TableStore
from .labels import Label
from .multitest import Mode, PValueRecord, procedure1
from .teststat import critical_values, decide_statistic, p_values, t_statistic

logger = logging.getLogger(__name__)

MODES = ("single", "bh", "adaptive-bh", "msd")
_CODE_LABEL = {-1: Label.SUBDIFFUSION, 0: Label.BROWNIAN, 1: Label.SUPERDIFFUSION}


def _with_context(exc, traj):
    return type(exc)(f"track {traj.track_id!r}: {exc}")


def classify_tracks(trajectories, mode="single", alpha=0.05, store=None):
    """Classify every trajectory; returns one :class:`ClassifiedTrack` per input, in order.

    Motionless tracks are reported ``NotMoving``. The test modes calibrate
    each track against the null table for its own length.
    """
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}; choose from {MODES}")
    trajectories = list(trajectories)
    if mode == "msd":
        return [_msd_row(t) for t in trajectories]
    store = store or TableStore()
    rows, records = {}, []
    for traj in trajectories:
        try:
            t = t_statistic(traj, store.method)
        except DegenerateTrajectoryError:
            rows[traj.track_id] = ClassifiedTrack(traj.track_id, traj.n, Label.NOT_MOVING)
            continue
        except TrajclassError as exc:
            raise _with_context(exc, traj) from exc
        table = store.get(traj.n)
        p_sub, p_sup, p_two = p_values(t, table)
        lo, hi = critical_values(table, alpha)
        label = _CODE_LABEL[int(decide_statistic(t, lo, hi))]
        rows[traj.track_id] = ClassifiedTrack(traj.track_id, traj.n, label, t, p_sub, p_sup, p_two)
        records.append(PValueRecord(traj.track_id, p_two, p_sub, p_sup))
    if mode != "single" and records:
        report = procedure1(records, alpha, Mode.ADAPTIVE if mode == "adaptive-bh" else Mode.STANDARD)
        logger.info("%s: %d of %d tracks rejected (m0_hat=%s)", mode, report.n_rejected, report.m, report.m0_hat)
        for tid, label in report.decisions().items():
            r = rows[tid]
            rows[tid] = ClassifiedTrack(tid, r.n, label, r.t_stat, r.p_sub, r.p_sup, r.p_two_sided)
    return [rows[t.track_id] for t in trajectories]


def _msd_row(traj):
    try:
        res = msd_classify(traj)
    except DegenerateTrajectoryError:
        return ClassifiedTrack(traj.track_id, traj.n, Label.NOT_MOVING)
    except TrajclassError as exc:
        raise _with_context(exc, traj) from exc
    beta = None if np.isnan(res.beta_hat) else res.beta_hat
    return ClassifiedTrack(traj.track_id, traj.n, res.label, beta_hat=beta)
