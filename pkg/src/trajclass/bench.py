"""
Monte Carlo benchmarks: null quantiles, single-test power, FDR/mdFDR sweeps,
confusion matrices on a labelled collection, and the Donsker check.

Every scenario draws replicate chunk ``c`` of configuration ``k`` from the
stream ``RngSeed(seed, k * STREAM_STRIDE + c)``, so outputs depend only on
the seed and the configuration, never on execution order.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import MSD_CODES, msd_classify_batch
from .labels import Label
from .multitest import Mode, counts_from_codes, procedure1_batch
from .processes import (
    Brownian,
    DriftBrownian,
    FractionalBrownian,
    OrnsteinUhlenbeck,
    RngSeed,
    mixture_components,
    simulate_paths,
)
from .teststat import (
    DEFAULT_N_FULL,
    asymptotic_cdf_S0,
    asymptotic_quantile_S0,
    build_null_table,
    critical_values,
    decide_statistic,
    kolmogorov_distance,
    p_values,
    quantile,
    t_statistic_batch,
)

logger = logging.getLogger(__name__)

STREAM_STRIDE = 1_000_000
FULL_REPLICATES = 10_001
SCENARIOS = ("quantile-table", "power-single", "fdr-sweep", "confusion", "donsker")
_HYP_ROW = {"H0": 0, "H1": 1, "H2": 2}


@dataclass
class BenchConfig:
    scenario: str
    seed: int = 0
    alpha: float = 0.05
    n: int = 30
    ns: tuple = (10, 30, 100)
    power_ns: tuple = (10, 30, 50)
    N: int = DEFAULT_N_FULL
    replicates: int = FULL_REPLICATES
    m: int = 200
    ms: tuple = (100, 200)
    m0_frac: float = 0.4
    m0_fracs: tuple = (0.0, 0.2, 0.4, 0.6, 0.8)
    table_seed: int = 12345
    grid: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        for f in (self.m0_frac, *self.m0_fracs):
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"m0 fraction {f} outside [0, 1]")
        if not self.ns or not self.power_ns or not self.ms or not self.m0_fracs:
            raise ValueError("parameter grids must be nonempty")

    def scaled(self, factor: int = 100) -> "BenchConfig":
        """Replicate counts divided by ``factor`` for quick runs (1,000,001 becomes 10,001)."""
        cfg = BenchConfig(**asdict(self))
        cfg.N = max(1001, (self.N - 1) // factor + 1)
        cfg.replicates = max(100, (self.replicates - 1) // factor + 1)
        return cfg


def _pmap(fn, jobs, workers=1):
    """Ordered map; chunk streams are fixed by index so ``workers`` never changes results."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _chunks(total, size):
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


class _Tables:
    """Null tables shared across one benchmark run."""

    def __init__(self, N, seed):
        self.N, self.seed, self._cache = N, seed, {}

    def __call__(self, n):
        if n not in self._cache:
            self._cache[n] = build_null_table(n, self.N, self.seed)
        return self._cache[n]


# --- quantile table ----------------------------------------------------------------


def quantile_table(ns=(10, 30, 100), N=DEFAULT_N_FULL, seed=0, alpha=0.05):
    rows = []
    for n in ns:
        t = build_null_table(n, N, seed)
        rows.append({"n": n, "q_low": quantile(t, alpha / 2), "q_high": quantile(t, 1 - alpha / 2), "N": N})
    rows.append({"n": "asymptotic", "q_low": asymptotic_quantile_S0(alpha / 2),
                 "q_high": asymptotic_quantile_S0(1 - alpha / 2), "N": ""})
    return rows


# --- single-test power -------------------------------------------------------------

DEFAULT_POWER_GRID = {
    "drift": [0.0, 0.2, 0.4, 0.5, 0.66, 0.8, 1.0, 1.2],
    "ou": [0.05, 0.1, 0.2, 0.3, 0.4, 0.53, 0.7, 1.0, 1.5],
    "fbm": [0.05, 0.13, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.85, 0.95],
}


def alternative_spec(family: str, value: float):
    """Alternatives indexed by their reduced parameter (sigma = dt = 1)."""
    if family == "drift":
        return DriftBrownian.diagonal(value, sigma=1.0), None
    if family == "ou":
        return OrnsteinUhlenbeck(sigma=1.0, lam=value), "stationary"
    if family == "fbm":
        return FractionalBrownian(sigma=1.0, hurst=value), None
    if family == "brownian":
        return Brownian(1.0), None
    raise ValueError(f"unknown family {family!r}")


def power_point(spec, n, reps, table, alpha=0.05, seed=0, stream=0, x0=None, chunk=5000, workers=1):
    """Rejection rates ``(power, sub_rate, sup_rate)`` of the single test."""
    lo, hi = critical_values(table, alpha)

    def job(arg):
        c, size = arg
        rng = RngSeed(seed, stream * STREAM_STRIDE + c).generator()
        codes = decide_statistic(t_statistic_batch(simulate_paths(spec, n, size, x0=x0, rng=rng)), lo, hi)
        return int(np.sum(codes == -1)), int(np.sum(codes == 1))

    counts = _pmap(job, list(enumerate(_chunks(reps, chunk))), workers)
    sub = sum(c[0] for c in counts)
    sup = sum(c[1] for c in counts)
    return (sub + sup) / reps, sub / reps, sup / reps


def power_single(grid=None, ns=(10, 30, 50), reps=FULL_REPLICATES, alpha=0.05, seed=0, N=DEFAULT_N_FULL,
                 table_seed=12345, workers=1):
    grid = grid or DEFAULT_POWER_GRID
    tables = _Tables(N, table_seed)
    rows, k = [], 0
    for family, values in grid.items():
        for value in values:
            spec, x0 = alternative_spec(family, value)
            for n in ns:
                power, sub, sup = power_point(spec, n, reps, tables(n), alpha, seed, k, x0, workers=workers)
                rows.append({"family": family, "param": value, "n": n, "power": power,
                             "sub_rate": sub, "sup_rate": sup, "replicates": reps})
                k += 1
    return rows


# --- collections -------------------------------------------------------------------


def mixture_pvalues(m, m0, n, reps, table, rng):
    """Simulate ``reps`` labelled collections; returns ``(paths, p_sub, p_sup, p, truth_rows)``."""
    blocks, truth = [], []
    for comp in mixture_components(m, m0):
        paths = simulate_paths(comp.spec, n, reps * comp.count, x0=comp.x0, rng=rng)
        blocks.append(paths.reshape(reps, comp.count, n + 1, 2))
        truth += [_HYP_ROW[comp.label]] * comp.count
    paths = np.concatenate(blocks, axis=1)
    p_sub, p_sup, p = p_values(t_statistic_batch(paths), table)
    return paths, p_sub, p_sup, p, np.array(truth)


def _rates(cells):
    R = cells[:, :, 1:].sum(axis=(1, 2))
    V = cells[:, 0, 1:].sum(axis=1)
    S = cells[:, 1, 2] + cells[:, 2, 1]
    denom = np.maximum(R, 1)
    m1 = cells[:, 1].sum(axis=1)
    m2 = cells[:, 2].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        pw1 = np.where(m1 > 0, cells[:, 1, 1] / m1, np.nan)
        pw2 = np.where(m2 > 0, cells[:, 2, 2] / m2, np.nan)
    return V / denom, (V + S) / denom, pw1, pw2


def fdr_sweep(ms=(100, 200), m0_fracs=(0.0, 0.2, 0.4, 0.6, 0.8), n=30, reps=FULL_REPLICATES, alpha=0.05,
              seed=0, N=DEFAULT_N_FULL, table_seed=12345, chunk_cells=40_000, workers=1):
    """FDR, mdFDR and average power of both procedure variants on the same replicates."""
    table = build_null_table(n, N, table_seed)
    rows, k = [], 0
    for m in ms:
        for frac in m0_fracs:
            m0 = int(round(frac * m))

            def job(arg, m=m, m0=m0, k=k):
                c, size = arg
                rng = RngSeed(seed, k * STREAM_STRIDE + c).generator()
                _, ps, pp, p, truth = mixture_pvalues(m, m0, n, size, table, rng)
                out = {}
                for mode in Mode:
                    codes, m0_hat = procedure1_batch(p, ps, pp, alpha, mode)
                    out[mode] = (*_rates(counts_from_codes(codes, truth)), m0_hat)
                return out

            parts = _pmap(job, list(enumerate(_chunks(reps, max(1, chunk_cells // m)))), workers)
            acc = {mode: dict(zip(("fdr", "mdfdr", "pw1", "pw2", "m0_hat"),
                                  ([part[mode][i] for part in parts] for i in range(5)))) for mode in Mode}
            for mode in Mode:
                a = {key: np.concatenate(v) for key, v in acc[mode].items()}
                rows.append({
                    "m": m, "m0_frac": frac, "mode": mode.value,
                    "fdr_pct": float(100 * a["fdr"].mean()),
                    "fdr_se_pct": float(100 * a["fdr"].std(ddof=1) / np.sqrt(reps)),
                    "mdfdr_pct": float(100 * a["mdfdr"].mean()),
                    "avg_power_h1": float(np.nanmean(a["pw1"])) if m0 < m else float("nan"),
                    "avg_power_h2": float(np.nanmean(a["pw2"])) if m0 < m else float("nan"),
                    "mean_m0_hat": float(a["m0_hat"].mean()),
                    "replicates": reps,
                })
            k += 1
    return rows


def pvalue_boxplot_data(m=100, m0=20, n=30, alpha=0.05, seed=0, N=DEFAULT_N_FULL, table_seed=12345):
    """Two-sided p-values of the true alternatives in one collection, plus both BH thresholds."""
    table = build_null_table(n, N, table_seed)
    rng = RngSeed(seed, 0).generator()
    _, ps, pp, p, truth = mixture_pvalues(m, m0, n, 1, table, rng)
    out = {"p_h1": np.sort(p[0, truth == 1]), "p_h2": np.sort(p[0, truth == 2])}
    for mode in Mode:
        codes, m0_hat = procedure1_batch(p, ps, pp, alpha, mode)
        rej = p[0, codes[0] != 0]
        out[f"threshold_{mode.value}"] = float(rej.max()) if rej.size else float("nan")
        out[f"m0_hat_{mode.value}"] = int(m0_hat[0])
    return out


def confusion(m=200, m0_frac=0.4, n=30, alpha=0.05, seed=0, N=DEFAULT_N_FULL, table_seed=12345):
    """Confusion matrices of every classifier on one seeded labelled collection.

    Returns ``{method: (row_labels, col_labels, counts)}``.
    """
    table = build_null_table(n, N, table_seed)
    m0 = int(round(m0_frac * m))
    rng = RngSeed(seed, 0).generator()
    paths, ps, pp, p, truth = mixture_pvalues(m, m0, n, 1, table, rng)
    rows3 = [Label.BROWNIAN, Label.SUBDIFFUSION, Label.SUPERDIFFUSION]
    out = {}
    for mode in Mode:
        codes, _ = procedure1_batch(p, ps, pp, alpha, mode)
        out[mode.value] = (rows3, rows3, counts_from_codes(codes, truth)[0])
    lo, hi = critical_values(table, alpha)
    single = decide_statistic(t_statistic_batch(paths), lo, hi)
    out["single"] = (rows3, rows3, counts_from_codes(single, truth)[0])
    _, msd_codes = msd_classify_batch(paths[0])
    mat = np.zeros((3, 4), dtype=int)
    for r, c in zip(truth, msd_codes):
        mat[r, c] += 1
    out["msd"] = (rows3, list(MSD_CODES), mat)
    return out


def row_percentages(mat):
    mat = np.asarray(mat, dtype=float)
    tot = mat.sum(axis=1, keepdims=True)
    return np.divide(100.0 * mat, tot, out=np.zeros_like(mat), where=tot > 0)


# --- Donsker check -------------------------------------------------------------------


def donsker(n=1000, reps=10_000, seed=0, k_max=100, chunk=2000, workers=1):
    """Kolmogorov distance between simulated statistics and the asymptotic law."""

    def job(arg):
        c, size = arg
        rng = RngSeed(seed, c).generator()
        return t_statistic_batch(simulate_paths(Brownian(1.0), n, size, rng=rng))

    sample = np.concatenate(_pmap(job, list(enumerate(_chunks(reps, chunk))), workers))
    return {"n": n, "replicates": reps,
            "ks_distance": kolmogorov_distance(sample, lambda x: asymptotic_cdf_S0(x, k_max))}


# --- output --------------------------------------------------------------------------


def _provenance(cfg: BenchConfig, extra=None):
    lines = [f"# tool=trajclass {__version__}", f"# scenario={cfg.scenario}", f"# seed={cfg.seed}",
             f"# config={json.dumps(asdict(cfg), sort_keys=True, default=str)}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}={v}")
    return "\n".join(lines) + "\n"


def write_rows(path, rows, header_text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_text)
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def _fmt_rows(rows):
    if not rows:
        return "(no rows)\n"
    keys = list(rows[0].keys())
    cell = lambda v: f"{v:.4f}" if isinstance(v, float) else str(v)
    widths = [max(len(k), *(len(cell(r[k])) for r in rows)) for k in keys]
    out = ["  ".join(k.rjust(w) for k, w in zip(keys, widths))]
    out += ["  ".join(cell(r[k]).rjust(w) for k, w in zip(keys, widths)) for r in rows]
    return "\n".join(out) + "\n"


def run(cfg: BenchConfig, out_dir) -> dict:
    """Run one scenario and write ``<scenario>.csv`` plus a text summary."""
    out_dir = Path(out_dir)
    started = time.time()
    files = {}
    sc = cfg.scenario
    if sc == "quantile-table":
        rows = quantile_table(cfg.ns, cfg.N, cfg.seed, cfg.alpha)
    elif sc == "power-single":
        rows = power_single(cfg.grid or None, cfg.power_ns, cfg.replicates, cfg.alpha, cfg.seed, cfg.N,
                            cfg.table_seed, cfg.workers)
    elif sc == "fdr-sweep":
        rows = fdr_sweep(cfg.ms, cfg.m0_fracs, cfg.n, cfg.replicates, cfg.alpha, cfg.seed, cfg.N, cfg.table_seed,
                         workers=cfg.workers)
        box = pvalue_boxplot_data(100, 20, cfg.n, cfg.alpha, cfg.seed, cfg.N, cfg.table_seed)
        box_rows = [{"hypothesis": h, "p_value": float(v)} for h in ("H1", "H2") for v in box[f"p_{h.lower()}"]]
        files["pvalue_boxplot"] = write_rows(out_dir / "pvalue_boxplot.csv", box_rows, _provenance(cfg, {
            "threshold_standard": box["threshold_standard"], "threshold_adaptive": box["threshold_adaptive"]}))
    elif sc == "confusion":
        res = confusion(cfg.m, cfg.m0_frac, cfg.n, cfg.alpha, cfg.seed, cfg.N, cfg.table_seed)
        rows = []
        for method, (rl, cl, mat) in res.items():
            pct = row_percentages(mat)
            for i, r in enumerate(rl):
                for j, c in enumerate(cl):
                    rows.append({"method": method, "truth": r.value, "decision": c.value,
                                 "count": int(mat[i, j]), "row_pct": float(pct[i, j])})
    elif sc == "donsker":
        rows = [donsker(cfg.n, cfg.replicates, cfg.seed, workers=cfg.workers)]
    else:  # pragma: no cover - guarded by BenchConfig
        raise ValueError(sc)
    elapsed = time.time() - started
    header = _provenance(cfg, {"elapsed_s": f"{elapsed:.1f}"})
    files["data"] = write_rows(out_dir / f"{sc}.csv", rows, header)
    summary = out_dir / f"{sc}_summary.txt"
    summary.write_text(header + "\n" + _fmt_rows(rows))
    files["summary"] = summary
    logger.info("%s finished in %.1fs", sc, elapsed)
    return {"rows": rows, "files": files}
