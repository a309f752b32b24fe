"""
File formats: trajectory tables, classification reports and null tables.

Trajectory files are comma-delimited with one observation per row::

    # trajclass-trajectories v1
    # dt=0.1
    # scale=0.16
    track_id,frame,x,y[,truth]

``dt`` is the frame interval in seconds and ``scale`` (optional) converts
pixel coordinates to physical length on load. Floats are written with
``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import struct
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ParseError, TableFormatError, TrajclassError, UsageError
from .labels import Label
from .processes import Trajectory
from .teststat import NullTable, build_null_table

logger = logging.getLogger(__name__)

TRAJECTORY_FORMAT = "trajclass-trajectories v1"
REPORT_SCHEMA = "trajclass-report/1"
REPORT_COLUMNS = ("track_id", "n", "decision", "t_stat", "p_sub", "p_sup", "p_two_sided", "beta_hat")

_TABLE_MAGIC = b"TRJNULL\n"
TABLE_FORMAT_VERSION = 1


# --- trajectories ----------------------------------------------------------------


@dataclass
class TrackSet:
    """Result of :func:`load_trajectories`."""

    trajectories: list
    skipped: list = field(default_factory=list)
    truth: dict = field(default_factory=dict)
    dt: Optional[float] = None
    scale: float = 1.0

    def __iter__(self):
        return iter(self.trajectories)

    def __len__(self):
        return len(self.trajectories)


def _parse_id(token):
    try:
        return int(token)
    except ValueError:
        return token


def _read_header(lines):
    meta = {}
    for line in lines:
        body = line[1:].strip()
        for part in body.split():
            if "=" in part:
                k, v = part.split("=", 1)
                meta[k.strip()] = v.strip()
    return meta


def load_trajectories(path, dt: Optional[float] = None, rel_tol: float = 1e-9) -> TrackSet:
    """Read a trajectory file, grouping rows by track and sorting by frame.

    Tracks with duplicated frames or non-uniform sampling are skipped and
    listed in ``TrackSet.skipped`` as ``(track_id, reason)``. ``dt`` overrides
    the header value.
    """
    path = Path(path)
    comments, rows = [], {}
    truth = {}
    header = None
    order = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                comments.append(stripped)
                continue
            fields = next(csv.reader([stripped]))
            if header is None and fields[0].strip().lower() == "track_id":
                header = [f.strip().lower() for f in fields]
                continue
            cols = header or ["track_id", "frame", "x", "y"]
            if len(fields) < 4 or len(fields) != len(cols):
                raise ParseError(f"expected {len(cols)} fields, got {len(fields)}", lineno)
            rec = dict(zip(cols, (f.strip() for f in fields)))
            try:
                frame = float(rec["frame"])
                x, y = float(rec["x"]), float(rec["y"])
            except (KeyError, ValueError) as exc:
                raise ParseError(f"malformed row: {exc}", lineno) from None
            if not (math.isfinite(frame) and math.isfinite(x) and math.isfinite(y)):
                raise ParseError("non-finite value", lineno)
            tid = _parse_id(rec["track_id"])
            if tid not in rows:
                rows[tid] = []
                order.append(tid)
            rows[tid].append((frame, x, y))
            if rec.get("truth"):
                truth[tid] = rec["truth"]

    meta = _read_header(comments)
    if dt is None:
        dt = float(meta["dt"]) if "dt" in meta else None
    if dt is None:
        raise UsageError(f"{path}: frame interval unknown; add '# dt=<seconds>' or pass dt")
    scale = float(meta.get("scale", 1.0))
    if not rows:
        logger.warning("%s contains no observations", path)

    trajs, skipped = [], []
    for tid in order:
        obs = sorted(rows[tid], key=lambda r: r[0])
        frames = np.array([o[0] for o in obs])
        if len(frames) < 2:
            skipped.append((tid, "too-short"))
            continue
        steps = np.diff(frames)
        if np.any(steps == 0):
            skipped.append((tid, "duplicate-frame"))
            continue
        if np.any(np.abs(steps - steps[0]) > rel_tol * abs(steps[0])):
            skipped.append((tid, "nonuniform-lag"))
            continue
        pos = np.array([(o[1], o[2]) for o in obs])
        if scale != 1.0:
            pos = pos * scale
        trajs.append(Trajectory(pos, dt=dt * steps[0], t0=frames[0] * dt, track_id=tid))
    for tid, reason in skipped:
        logger.info("skipped track %r: %s", tid, reason)
    return TrackSet(trajs, skipped, {k: v for k, v in truth.items()}, dt, scale)


def write_trajectories(path, trajectories, truth: Optional[dict] = None, dt: Optional[float] = None):
    """Write tracks in the delimited format; all tracks must share one ``dt``."""
    trajectories = list(trajectories)
    dts = {t.dt for t in trajectories}
    if dt is None:
        if len(dts) > 1:
            raise TrajclassError("tracks with different dt cannot share one file")
        dt = dts.pop() if dts else 1.0
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# {TRAJECTORY_FORMAT}\n# dt={dt!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        cols = ["track_id", "frame", "x", "y"] + (["truth"] if truth is not None else [])
        w.writerow(cols)
        for t in trajectories:
            step = t.dt / dt
            f0 = t.t0 / dt
            lab = [truth[t.track_id]] if truth is not None else []
            for i, (x, y) in enumerate(t.positions):
                frame = f0 + i * step
                frame = int(round(frame)) if abs(frame - round(frame)) < 1e-9 else frame
                w.writerow([t.track_id, frame, repr(float(x)), repr(float(y))] + lab)
    return path


# --- filtering ---------------------------------------------------------------------


@dataclass(frozen=True)
class FilterPolicy:
    """Track selection rules for tracker output.

    A track is kept when it has at least ``min_distinct_positions`` distinct
    positions and stops (consecutive identical positions) fewer than
    ``floor(points / 10)`` times.
    """

    min_distinct_positions: int = 20
    stop_divisor: int = 10
    min_length: Optional[int] = None
    max_length: Optional[int] = None

    def __post_init__(self):
        for name in ("min_distinct_positions", "stop_divisor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def count_stops(traj) -> int:
    d = np.diff(traj.positions, axis=0)
    return int(np.sum(np.all(d == 0, axis=1)))


def count_distinct(traj) -> int:
    return len({(float(x), float(y)) for x, y in traj.positions})


def apply_filters(trajs, policy: FilterPolicy = FilterPolicy()):
    """Return ``(kept, skipped)``; ``skipped`` holds ``(track_id, reason)`` pairs."""
    kept, skipped = [], []
    for t in trajs:
        points = len(t)
        if policy.min_length is not None and points < policy.min_length:
            skipped.append((t.track_id, "too-short"))
        elif policy.max_length is not None and points > policy.max_length:
            skipped.append((t.track_id, "too-long"))
        elif count_distinct(t) < policy.min_distinct_positions:
            skipped.append((t.track_id, "few-distinct-positions"))
        elif count_stops(t) >= points // policy.stop_divisor:
            skipped.append((t.track_id, "too-many-stops"))
        else:
            kept.append(t)
    return kept, skipped


# --- reports -----------------------------------------------------------------------


@dataclass(frozen=True)
class ClassifiedTrack:
    track_id: object
    n: int
    decision: Label
    t_stat: Optional[float] = None
    p_sub: Optional[float] = None
    p_sup: Optional[float] = None
    p_two_sided: Optional[float] = None
    beta_hat: Optional[float] = None

    @classmethod
    def from_test_result(cls, res, n, decision=None):
        return cls(res.track_id, n, decision or res.decision, res.t_stat, res.p_sub, res.p_sup, res.p_two_sided)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def percentages(counts: dict, labels) -> dict:
    """Percentages rounded to 0.1 that sum to exactly 100 (largest remainder)."""
    total = sum(counts.get(l, 0) for l in labels)
    if total == 0:
        return {l: 0.0 for l in labels}
    raw = {l: 1000.0 * counts.get(l, 0) / total for l in labels}
    floor = {l: math.floor(v) for l, v in raw.items()}
    short = 1000 - sum(floor.values())
    for l in sorted(labels, key=lambda l: raw[l] - floor[l], reverse=True)[:short]:
        floor[l] += 1
    return {l: floor[l] / 10.0 for l in labels}


def summary_rows(rows, include_not_moving=None):
    labels = [Label.BROWNIAN, Label.SUBDIFFUSION, Label.SUPERDIFFUSION]
    counts = Counter(Label(r.decision) for r in rows)
    if include_not_moving or (include_not_moving is None and counts.get(Label.NOT_MOVING)):
        labels.append(Label.NOT_MOVING)
    return labels, counts, percentages(counts, labels)


def write_report_delimited(path, rows, extra_header: Optional[dict] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema={REPORT_SCHEMA}\n# tool=trajclass {__version__}\n")
        for k, v in (extra_header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) if c != "decision" else Label(r.decision).value for c in REPORT_COLUMNS])
    return path


def read_report_delimited(path):
    rows = []
    with Path(path).open(newline="") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    for rec in csv.DictReader(lines):
        num = lambda k: float(rec[k]) if rec[k] else None
        rows.append(ClassifiedTrack(_parse_id(rec["track_id"]), int(rec["n"]), Label(rec["decision"]),
                                    num("t_stat"), num("p_sub"), num("p_sup"), num("p_two_sided"), num("beta_hat")))
    return rows


def format_summary_table(rows, title="") -> str:
    labels, counts, pct = summary_rows(rows)
    lines = [title] if title else []
    lines.append(f"{'class':<16}{'count':>8}{'percent':>10}")
    for l in labels:
        lines.append(f"{l.value:<16}{counts.get(l, 0):>8}{pct[l]:>10.1f}")
    lines.append(f"{'total':<16}{sum(counts.get(l, 0) for l in labels):>8}{sum(pct.values()):>10.1f}")
    return "\n".join(lines) + "\n"


def confusion_matrix(rows, truth: dict, labels=None):
    """Counts indexed ``[truth][decision]`` over the rows with known truth."""
    from .labels import HYPOTHESIS_LABEL

    truth_labels = [Label.BROWNIAN, Label.SUBDIFFUSION, Label.SUPERDIFFUSION]
    labels = labels or truth_labels + [Label.NOT_MOVING]
    mat = np.zeros((len(truth_labels), len(labels)), dtype=int)
    for r in rows:
        if r.track_id not in truth:
            continue
        tv = truth[r.track_id]
        tl = HYPOTHESIS_LABEL.get(tv, None) or Label(tv)
        mat[truth_labels.index(tl), labels.index(Label(r.decision))] += 1
    return truth_labels, labels, mat


def format_confusion(truth_labels, labels, mat, percent=True) -> str:
    head = f"{'truth/decision':<16}" + "".join(f"{l.value:>16}" for l in labels)
    out = [head]
    for i, tl in enumerate(truth_labels):
        row = mat[i].astype(float)
        if percent and row.sum():
            row = 100.0 * row / row.sum()
        cells = "".join(f"{v:>16.1f}" if percent else f"{int(v):>16d}" for v in row)
        out.append(f"{tl.value:<16}{cells}")
    return "\n".join(out) + "\n"


def emit_report(rows, out_dir, stem="report", formats=("delimited", "table-text"), trajectories=None,
                truth=None, title="", extra_header=None) -> dict:
    """Write the requested report artifacts and return ``{format: path}``.

    ``map-vector-graphic`` needs ``trajectories``; it draws every track in its
    class colour to ``<stem>_map.svg``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise TrajclassError(f"cannot create {out_dir}: {exc}") from exc
    rows = list(rows)
    written = {}
    try:
        if "delimited" in formats:
            written["delimited"] = write_report_delimited(out_dir / f"{stem}.csv", rows, extra_header)
        if "table-text" in formats:
            text = format_summary_table(rows, title)
            if truth:
                text += "\n" + format_confusion(*confusion_matrix(rows, truth))
            p = out_dir / f"{stem}_summary.txt"
            p.write_text(text)
            written["table-text"] = p
        if "map-vector-graphic" in formats:
            from .plotting import plot_classification_map

            if trajectories is None:
                raise TrajclassError("map output needs the trajectories")
            decisions = {r.track_id: Label(r.decision) for r in rows}
            written["map-vector-graphic"] = plot_classification_map(trajectories, decisions, out_dir / f"{stem}_map.svg", title=title)
    except OSError as exc:
        raise TrajclassError(f"cannot write report to {out_dir}: {exc}") from exc
    return written


# --- null table persistence --------------------------------------------------------
#
# Layout: 8-byte magic, uint32 little-endian header length, UTF-8 JSON header,
# then N little-endian float64 values. The header stores the SHA-256 of the
# sample bytes, which guards against truncation.


def save_null_table(table: NullTable, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(table.sorted_sample, dtype="<f8").tobytes()
    header = json.dumps({
        "format_version": TABLE_FORMAT_VERSION,
        "n": table.n,
        "N": table.N,
        "seed": table.seed,
        "method": table.method.value,
        "dtype": "<f8",
        "sha256": hashlib.sha256(data).hexdigest(),
    }, sort_keys=True).encode()
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    with tmp.open("wb") as fh:
        fh.write(_TABLE_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(data)
    os.replace(tmp, path)
    return path


def load_null_table(path) -> NullTable:
    raw = Path(path).read_bytes()
    if not raw.startswith(_TABLE_MAGIC):
        raise TableFormatError(f"{path}: not a null-table file")
    off = len(_TABLE_MAGIC)
    try:
        (hlen,) = struct.unpack_from("<I", raw, off)
        header = json.loads(raw[off + 4: off + 4 + hlen])
    except (struct.error, ValueError) as exc:
        raise TableFormatError(f"{path}: corrupt header ({exc})") from None
    if header.get("format_version") != TABLE_FORMAT_VERSION:
        raise TableFormatError(f"{path}: unsupported format version {header.get('format_version')}")
    data = raw[off + 4 + hlen:]
    if len(data) != 8 * header["N"] or hashlib.sha256(data).hexdigest() != header["sha256"]:
        raise TableFormatError(f"{path}: checksum mismatch (truncated or corrupted)")
    sample = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return NullTable(header["n"], header["N"], header["seed"], header["method"], sample)


class TableStore:
    """Null tables keyed by ``(n, N, seed, method)``, built on first use.

    With a ``directory`` the tables are persisted there; otherwise they only
    live in memory.
    """

    def __init__(self, directory=None, N: int = 100_001, seed: int = 0, method="first", workers: int = 1):
        self.directory = Path(directory) if directory is not None else None
        self.N, self.seed, self.method, self.workers = N, seed, method, workers
        self._mem = {}
        self._lock = threading.Lock()

    def path_for(self, n, N, seed, method):
        return self.directory / f"null_n{n}_N{N}_s{seed}_{method}.tbl"

    def get(self, n: int) -> NullTable:
        from .estimators import SigmaMethod

        method = SigmaMethod.coerce(self.method).value
        key = (n, self.N, self.seed, method)
        with self._lock:
            if key in self._mem:
                return self._mem[key]
            table = None
            if self.directory is not None:
                p = self.path_for(*key)
                if p.exists():
                    table = load_null_table(p)
            if table is None:
                logger.info("building null table n=%d N=%d", n, self.N)
                table = build_null_table(n, self.N, self.seed, method, workers=self.workers)
                if self.directory is not None:
                    save_null_table(table, self.path_for(*key))
            self._mem[key] = table
            return table
