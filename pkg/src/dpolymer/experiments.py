"""Scaling experiments: free-energy fluctuation and exit-time growth along the
characteristic direction, with deterministic replica-parallel execution.

The engine never materializes an (m, n) grid: bulk rows are regenerated from
their per-(replica, row) seed streams, once on the forward sweep and once on
the backward (bulk-only) sweep that the exit law needs, so memory stays
O(batch * m) even at the largest sizes.  Results are deterministic in
(seed, config) and independent of the worker count: replica batches are fixed
by the config and merged in batch order.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coupling, lattice, mellin
from .errors import FitError, LatticeValidationError

WORKERS_ENV_VAR = "DPOLYMER_WORKERS"

EXIT_MOMENT_ORDERS = (1, 2)
CENTRAL_MOMENT_ORDERS = (1, 2, 3, 4)


@dataclass
class RunConfig:
    kind: str = "ig"
    mu: float = 2.0
    theta: float = 1.0
    beta: float = 1.0
    n_list: tuple = (64, 128, 256)
    replicas: int = 500
    seed: int = 0
    gamma_offset: float = 0.0
    batch: int = 250
    workers: int = 0          # 0 -> env var DPOLYMER_WORKERS, else 1
    m_factor: float = 1.0     # 2.0 = off-characteristic sanity geometry
    want_exit: bool = True

    def __post_init__(self):
        ns = list(self.n_list)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise LatticeValidationError("N-list must be strictly increasing")
        if self.replicas < 100:
            raise LatticeValidationError("scaling runs need at least 100 replicas")

    def spec(self):
        return lattice.make_model(self.kind, self.mu, self.theta, self.beta)

    def shape(self, N):
        spec = self.spec()
        m, n = lattice.characteristic_shape(spec, N, self.gamma_offset)
        if self.m_factor != 1.0:
            m = max(1, int(round(self.m_factor * N * mellin.psi(spec.f2, 1, spec.a2)
                                 + self.gamma_offset * N ** (2.0 / 3.0))))
        return m, n

    def effective_workers(self):
        if self.workers and self.workers > 0:
            return self.workers
        env = os.environ.get(WORKERS_ENV_VAR)
        return max(1, int(env)) if env else 1


def _bulk_row(spec, seed, replicas, rep_lo, j, m):
    p = np.empty((replicas, m))
    for i in range(replicas):
        p[i] = lattice.open_uniform(lattice._seed_stream(seed, rep_lo + i, lattice.ROLE_BULK, j), m)
    return lattice.bulk_pair_log_fast(spec, p)


def _row_recurrence(z_left, h, c):
    """z_i = logaddexp(h_i + z_{i-1}, c_i) with z_0 = z_left, vectorized."""
    alpha = np.cumsum(h, axis=-1)
    u = np.concatenate([z_left[:, None], c - alpha], axis=-1)
    s = np.logaddexp.accumulate(u, axis=-1)
    return np.concatenate([z_left[:, None], s[:, 1:] + alpha], axis=-1)


def _batch_stats(spec, m, n, seed, rep_lo, batch, want_exit):
    """Streaming forward (and optionally backward) sweeps for one batch.

    Returns dict with per-replica logZ and quenched exit moments.
    """
    B = batch
    south = np.empty((B, m))
    west = np.empty((B, n))
    for i in range(B):
        south[i] = lattice.open_uniform(lattice._seed_stream(seed, rep_lo + i, lattice.ROLE_SOUTH), m)
        west[i] = lattice.open_uniform(lattice._seed_stream(seed, rep_lo + i, lattice.ROLE_WEST), n)
    south = coupling.inverse_log(spec.f1, spec.a1, south)
    west = coupling.inverse_log(spec.f2, spec.a2, west) if n else np.zeros((B, 0))
    south_prefix = np.concatenate(
        [np.zeros((B, 1)), np.cumsum(south.astype(np.longdouble), axis=1).astype(float)], axis=1
    )
    west_prefix = np.concatenate(
        [np.zeros((B, 1)), np.cumsum(west.astype(np.longdouble), axis=1).astype(float)], axis=1
    )

    z = south_prefix.copy()
    y1_col0 = np.empty((B, n))
    y2_row1 = None
    for j in range(1, n + 1):
        y1, y2 = _bulk_row(spec, seed, B, rep_lo, j, m)
        if j == 1:
            y2_row1 = y2
        y1_col0[:, j - 1] = y1[:, 0]
        z = _row_recurrence(west_prefix[:, j], y1, y2 + z[:, 1:])
    logz = z[:, m] if n >= 1 else south_prefix[:, m]
    out = {"logz": logz}
    if not want_exit:
        return out

    if n == 0:
        t1 = np.full(B, float(m))
        out["t1_moments"] = np.stack([t1 ** p for p in EXIT_MOMENT_ORDERS], axis=1)
        out["t2_moments"] = np.zeros((B, len(EXIT_MOMENT_ORDERS)))
        return out

    # backward bulk-only sweep, regenerating rows top to bottom
    rev_col1 = np.empty((B, n))
    rev_row = None
    y2_above = None
    rev_row1 = None
    for j in range(n, 0, -1):
        y1, y2 = _bulk_row(spec, seed, B, rep_lo, j, m)
        if j == n:
            seed_col = np.zeros(B)
            c = np.full((B, max(m - 1, 0)), -np.inf)
        else:
            seed_col = y2_above[:, m - 1] + rev_row[:, m - 1]
            c = y2_above[:, : m - 1] + rev_row[:, : m - 1]
        w = _row_recurrence(seed_col, y1[:, 1:][:, ::-1], c[:, ::-1])
        rev_row = w[:, ::-1]
        rev_col1[:, j - 1] = rev_row[:, 0]
        y2_above = y2
        if j == 1:
            rev_row1 = rev_row
    # y2_above now holds row 1
    lq_south = south_prefix[:, 1:] + y2_above + rev_row1 - logz[:, None]
    lq_west = west_prefix[:, 1:] + y1_col0 + rev_col1 - logz[:, None]
    with np.errstate(under="ignore"):
        q_s, q_w = np.exp(lq_south), np.exp(lq_west)
    ls = np.arange(1, m + 1, dtype=float)
    lw = np.arange(1, n + 1, dtype=float)
    out["t1_moments"] = np.stack([(q_s * ls ** p).sum(axis=1) for p in EXIT_MOMENT_ORDERS], axis=1)
    out["t2_moments"] = np.stack([(q_w * lw ** p).sum(axis=1) for p in EXIT_MOMENT_ORDERS], axis=1)
    out["exit_mass"] = q_s.sum(axis=1) + q_w.sum(axis=1)
    return out


def _batch_worker(args):
    kind, mu, theta, beta, m, n, seed, rep_lo, batch, want_exit = args
    spec = lattice.make_model(kind, mu, theta, beta)
    return _batch_stats(spec, m, n, seed, rep_lo, batch, want_exit)


@dataclass
class SizePoint:
    N: int
    m: int
    n: int
    replicas: int
    logz: np.ndarray = field(repr=False)
    t1_mean: np.ndarray = None
    t2_mean: np.ndarray = None

    def central_moments(self):
        """{p: (E|logZbar|^p, stderr)} with plug-in centering."""
        centered = np.abs(self.logz - self.logz.mean())
        out = {}
        for p in CENTRAL_MOMENT_ORDERS:
            vals = centered ** p
            out[p] = (float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)))
        return out

    def variance(self):
        v = self.logz.var(ddof=1)
        centered = self.logz - self.logz.mean()
        se = math.sqrt(max(np.mean(centered ** 4) - v * v, 0.0) / self.logz.size)
        return float(v), se

    def exit_mean(self, axis=1, order=1):
        arr = self.t1_mean if axis == 1 else self.t2_mean
        col = arr[:, EXIT_MOMENT_ORDERS.index(order)]
        return float(col.mean()), float(col.std(ddof=1) / math.sqrt(col.size))


@dataclass
class FitResult:
    slope: float
    intercept: float
    stderr: float
    ci_lo: float
    ci_hi: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "ci": [self.ci_lo, self.ci_hi]}


def fit_exponent(points):
    """Weighted least squares of log(value) on log(N).

    points: iterable of (N, value, stderr); the returned CI is the Gaussian
    WLS interval (bootstrap CIs over replicas are attached by run_scaling).
    """
    pts = [(float(N), float(v), float(se)) for N, v, se in points]
    if len(pts) < 3:
        raise FitError("need at least 3 points to fit a slope")
    if any(v <= 0 for _, v, _ in pts):
        raise FitError("nonpositive values cannot be fit on a log scale")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    se_log = np.array([p[2] / p[1] if p[2] > 0 else 1e-12 for p in pts])
    w = 1.0 / np.maximum(se_log, 1e-12) ** 2
    W = np.sum(w)
    xb = np.sum(w * x) / W
    yb = np.sum(w * y) / W
    sxx = np.sum(w * (x - xb) ** 2)
    slope = float(np.sum(w * (x - xb) * (y - yb)) / sxx)
    intercept = float(yb - slope * xb)
    se_slope = float(math.sqrt(1.0 / sxx))
    return FitResult(slope, intercept, se_slope, slope - 1.96 * se_slope, slope + 1.96 * se_slope)


@dataclass
class ScalingResult:
    config: RunConfig
    points: list
    fits: dict = field(default_factory=dict)

    def fit_bootstrap(self, stat="var", n_boot=200, seed=1234):
        """Percentile bootstrap CI of the log-log slope, resampling replicas."""
        rng = np.random.default_rng(seed)
        slopes = np.empty(n_boot)
        for bidx in range(n_boot):
            pts = []
            for sp in self.points:
                idx = rng.integers(0, sp.logz.size, sp.logz.size)
                if stat == "var":
                    val = float(sp.logz[idx].var(ddof=1))
                elif stat == "t1":
                    col = sp.t1_mean[idx, 0]
                    val = float(col.mean())
                else:
                    raise ValueError(stat)
                pts.append((sp.N, max(val, 1e-300), 1.0))
            slopes[bidx] = fit_exponent(pts).slope
        return float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975))


def run_scaling(config):
    """Run the scaling experiment described by the config.

    Deterministic in (config, seed); batches are merged in fixed order so the
    result is byte-identical for any worker count.
    """
    spec = config.spec()
    points = []
    workers = config.effective_workers()
    for N in config.n_list:
        m, n = config.shape(N)
        ranges = [(lo, min(lo + config.batch, config.replicas))
                  for lo in range(0, config.replicas, config.batch)]
        args = [(config.kind, config.mu, config.theta, config.beta, m, n,
                 config.seed, lo, hi - lo, config.want_exit) for lo, hi in ranges]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_batch_worker, args))
        else:
            results = [_batch_worker(a) for a in args]
        logz = np.concatenate([r["logz"] for r in results])
        point = SizePoint(N, m, n, config.replicas, logz)
        if config.want_exit:
            point.t1_mean = np.concatenate([r["t1_moments"] for r in results])
            point.t2_mean = np.concatenate([r["t2_moments"] for r in results])
        points.append(point)

    result = ScalingResult(config, points)
    if len(points) >= 3:
        var_pts = [(p.N, *p.variance()) for p in points]
        result.fits["var_logz"] = fit_exponent(var_pts)
        if config.want_exit:
            t1_pts = [(p.N, *p.exit_mean(axis=1, order=1)) for p in points]
            result.fits["t1_mean"] = fit_exponent(t1_pts)
    return result


# ---------------------------------------------------------------------------
# Report emission.
# ---------------------------------------------------------------------------

CSV_HEADER = "model,N,m,n,p,moment,stderr,replicas,seed"


def _csv_rows(result):
    cfg = result.config
    model = cfg.kind
    rows = {"moments": [], "exit_t1": [], "exit_t2": []}
    for sp in result.points:
        cm = sp.central_moments()
        for p in CENTRAL_MOMENT_ORDERS:
            v, se = cm[p]
            rows["moments"].append(
                f"{model},{sp.N},{sp.m},{sp.n},{p},{v!r},{se!r},{sp.replicas},{cfg.seed}"
            )
        if sp.t1_mean is not None:
            for p in EXIT_MOMENT_ORDERS:
                for key, axis in (("exit_t1", 1), ("exit_t2", 2)):
                    v, se = sp.exit_mean(axis=axis, order=p)
                    rows[key].append(
                        f"{model},{sp.N},{sp.m},{sp.n},{p},{v!r},{se!r},{sp.replicas},{cfg.seed}"
                    )
    return rows


def emit_report(result, fmt, out_prefix):
    """Write CSV tables / a JSON mirror / a gnuplot script; returns the paths."""
    paths = []
    rows = _csv_rows(result)
    if fmt == "csv":
        for key, lines in rows.items():
            if not lines:
                continue
            path = f"{out_prefix}.{key}.csv"
            with open(path, "w") as fh:
                fh.write(CSV_HEADER + "\n")
                fh.write("\n".join(lines) + "\n")
            paths.append(path)
        return paths
    if fmt == "json":
        payload = {
            "model": result.config.kind,
            "mu": result.config.mu, "theta": result.config.theta, "beta": result.config.beta,
            "seed": result.config.seed, "replicas": result.config.replicas,
            "gamma_offset": result.config.gamma_offset,
            "schema": CSV_HEADER.split(","),
            "tables": {k: [r.split(",") for r in v] for k, v in rows.items()},
            "fits": {k: f.to_dict() for k, f in result.fits.items()},
        }
        path = f"{out_prefix}.json"
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
        return [path]
    if fmt == "plot":
        paths = emit_report(result, "csv", out_prefix)
        fit = result.fits.get("var_logz")
        script = [
            "set datafile separator ','",
            "set logscale xy",
            "set key left top",
            "set xlabel 'N'",
            "set ylabel 'moment'",
            f"slope={fit.slope!r}" if fit else "slope=0.6667",
            f"inter={math.exp(fit.intercept)!r}" if fit else "inter=1.0",
        ]
        plot_parts = [
            f"'{out_prefix}.moments.csv' every ::1 using 2:($5==2?$6:1/0) "
            "with points pt 7 title 'Var(logZ)'",
            "inter*x**slope with lines title sprintf('fit slope %.3f', slope)",
        ]
        if rows["exit_t1"]:
            plot_parts.append(
                f"'{out_prefix}.exit_t1.csv' every ::1 using 2:($5==1?$6:1/0) "
                "with points pt 5 title 'E[t1]'"
            )
        script.append("plot " + ", \\\n     ".join(plot_parts))
        path = f"{out_prefix}.gp"
        with open(path, "w") as fh:
            fh.write("\n".join(script) + "\n")
        paths.append(path)
        return paths
    raise ValueError(f"unknown format {fmt!r}")
