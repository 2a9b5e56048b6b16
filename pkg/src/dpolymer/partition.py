"""Log-space partition functions, the four-boundary decomposition, and
down-right ratio statistics.

The partition function over up-right paths satisfies, in log space,

    log Z_{i,j} = logaddexp(logY1_{i,j} + log Z_{i-1,j},
                            logY2_{i,j} + log Z_{i,j-1}),

with boundary rows given by prefix sums of the boundary log-weights.  Each
row of the recursion is a first-order linear recurrence, which the solver
evaluates with a single running logaddexp accumulation per row (max-shifted
inside numpy's logaddexp), so whole replica batches vectorize.
"""

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import coupling, ks, lattice
from .errors import CapabilityError, LatticeValidationError

BRUTE_FORCE_MAX = 14


class Direction(enum.Enum):
    FORWARD = "forward"
    REVERSE_BULK = "reverse_bulk"


@dataclass(frozen=True)
class PartitionTable:
    """Grid of log Z values; logz[..., i, j] with i = 0..m, j = 0..n."""

    logz: np.ndarray
    direction: Direction
    m: int
    n: int

    def corner(self):
        """log Z_{m,n} (or the empty-path 0 at (m,n) for a reverse table)."""
        return self.logz[..., self.m, self.n]


def _dp_forward(south, west, logy1, logy2):
    lead = south.shape[:-1]
    m = south.shape[-1]
    n = west.shape[-1]
    logz = np.empty(lead + (m + 1, n + 1))
    logz[..., 0, 0] = 0.0
    # boundary prefix sums in extended precision
    logz[..., 1:, 0] = np.cumsum(south.astype(np.longdouble), axis=-1).astype(float)
    logz[..., 0, 1:] = np.cumsum(west.astype(np.longdouble), axis=-1).astype(float)
    for j in range(1, n + 1):
        zprev = logz[..., :, j - 1]
        h = logy1[..., j - 1, :]
        c = logy2[..., j - 1, :] + zprev[..., 1:]
        alpha = np.cumsum(h, axis=-1)
        u = np.concatenate([logz[..., 0:1, j], c - alpha], axis=-1)
        s = np.logaddexp.accumulate(u, axis=-1)
        logz[..., 1:, j] = s[..., 1:] + alpha
    return logz


def log_partition(env):
    """Forward table of log Z over the (m, n) box; O(mn) in log space."""
    logz = _dp_forward(env.south, env.west, env.logy1, env.logy2)
    return PartitionTable(logz, Direction.FORWARD, env.m, env.n)


def log_partition_batch(batch):
    logz = _dp_forward(batch.south, batch.west, batch.logy1, batch.logy2)
    return PartitionTable(logz, Direction.FORWARD, batch.m, batch.n)


def _iter_paths(m, n):
    """All up-right step sequences from (0,0) to (m,n); True marks an up-step."""
    for ups in itertools.combinations(range(m + n), n):
        steps = [False] * (m + n)
        for k in ups:
            steps[k] = True
        yield steps


def path_log_weight(env, steps):
    i = j = 0
    w = 0.0
    for up in steps:
        if up:
            j += 1
            w += env.west[j - 1] if i == 0 else env.logy2[j - 1, i - 1]
        else:
            i += 1
            w += env.south[i - 1] if j == 0 else env.logy1[j - 1, i - 1]
    return w


def brute_force_logZ(env):
    """Path-enumeration oracle for the DP; m + n <= 14."""
    m, n = env.m, env.n
    if m + n > BRUTE_FORCE_MAX:
        raise CapabilityError(f"brute force limited to m+n <= {BRUTE_FORCE_MAX}, got {m + n}")
    logs = [path_log_weight(env, s) for s in _iter_paths(m, n)]
    mx = max(logs)
    return mx + math.log(sum(math.exp(v - mx) for v in logs))


def brute_force_exit(env):
    """Exact exit-point laws (t1, t2) by path enumeration; m + n <= 14.

    Returns (q_south, q_west): q_south[l] = Q(t1 = l) for l = 0..m and
    q_west[j] = Q(t2 = j) for j = 0..n.
    """
    m, n = env.m, env.n
    if m + n > BRUTE_FORCE_MAX:
        raise CapabilityError(f"brute force limited to m+n <= {BRUTE_FORCE_MAX}, got {m + n}")
    rows = []
    for steps in _iter_paths(m, n):
        t1 = 0
        while t1 < m and not steps[t1]:
            t1 += 1
        t2 = 0
        while t2 < n and steps[t2]:
            t2 += 1
        rows.append((t1, t2, path_log_weight(env, steps)))
    mx = max(w for _, _, w in rows)
    total = sum(math.exp(w - mx) for _, _, w in rows)
    q_south = np.zeros(m + 1)
    q_west = np.zeros(n + 1)
    for t1, t2, w in rows:
        p = math.exp(w - mx) / total
        q_south[t1] += p
        q_west[t2] += p
    return q_south, q_west


@dataclass(frozen=True)
class NSEWDecomposition:
    """Boundary sums of log-ratios: west/north and south/east tellings of
    log Z_{m,n}."""

    w: float
    n: float
    s: float
    e: float

    @property
    def west_north(self):
        return self.w + self.n

    @property
    def south_east(self):
        return self.s + self.e


def nsew_decompose(env, table):
    """W = log Z_{0,n}, S = log Z_{m,0}, N/E the telescoping increments along
    the north row / east column; W + N = S + E = log Z_{m,n}."""
    lz = table.logz
    m, n = table.m, table.n
    w = float(lz[0, n])
    s = float(lz[m, 0])
    n_sum = math.fsum(float(lz[i, n] - lz[i - 1, n]) for i in range(1, m + 1))
    e_sum = math.fsum(float(lz[m, j] - lz[m, j - 1]) for j in range(1, n + 1))
    return NSEWDecomposition(w, n_sum, s, e_sum)


# ---------------------------------------------------------------------------
# Down-right paths.
# ---------------------------------------------------------------------------

def staircase_path(m, n, kind="antidiagonal"):
    """Vertex list of a down-right path across the (m, n) box.

    "antidiagonal": alternating right/down steps from (0, n) to (m, 0);
    "boundary": down the west edge then right along the south edge;
    "mid": down to the middle row, across it, then down the east column.
    """
    if kind == "boundary":
        verts = [(0, j) for j in range(n, -1, -1)] + [(i, 0) for i in range(1, m + 1)]
        return verts
    if kind == "mid":
        jm = n // 2
        verts = [(0, j) for j in range(n, jm - 1, -1)]
        verts += [(i, jm) for i in range(1, m + 1)]
        verts += [(m, j) for j in range(jm - 1, -1, -1)]
        return verts
    if kind != "antidiagonal":
        raise LatticeValidationError(f"unknown staircase kind {kind!r}")
    # evenly interleaved right/down steps (exact alternation when m = n)
    verts = [(0, n)]
    i, j = 0, n
    ri = di = 0
    for _ in range(m + n):
        if ri < m and (di >= n or ri * n <= di * m):
            i, ri = i + 1, ri + 1
        else:
            j, di = j - 1, di + 1
        verts.append((i, j))
    return verts


def _validate_down_right(path, m, n):
    if len(path) < 2:
        raise LatticeValidationError("path needs at least one edge")
    for (i0, j0), (i1, j1) in zip(path[:-1], path[1:]):
        step = (i1 - i0, j1 - j0)
        if step not in ((1, 0), (0, -1)):
            raise LatticeValidationError(f"step {step} is not +e1 or -e2")
        if not (0 <= i1 <= m and 0 <= j1 <= n and 0 <= i0 <= m and 0 <= j0 <= n):
            raise LatticeValidationError(f"vertex outside the ({m},{n}) box")
        if step == (1, 0) and i1 - 1 < 0:
            raise LatticeValidationError("horizontal ratio undefined at the left edge")
        if step == (0, -1) and j0 - 1 < 0:
            raise LatticeValidationError("vertical ratio undefined at the bottom edge")


def down_right_collect(env, table, path):
    """Labeled log-ratios along a down-right path.

    Horizontal edges carry ("R1", log Z_v - log Z_{v-e1}) at the right vertex;
    vertical (downward) edges carry ("R2", log Z_v - log Z_{v-e2}) at the
    upper vertex.
    """
    _validate_down_right(path, table.m, table.n)
    lz = table.logz
    labels = []
    values = []
    for prev, cur in zip(path[:-1], path[1:]):
        if cur[0] == prev[0] + 1:
            labels.append("R1")
            values.append(lz[..., cur[0], cur[1]] - lz[..., cur[0] - 1, cur[1]])
        else:
            labels.append("R2")
            values.append(lz[..., prev[0], prev[1]] - lz[..., prev[0], prev[1] - 1])
    return labels, np.stack(values, axis=-1)


@dataclass
class BurkeReport:
    model_label: str
    path_kind: str
    replicas: int
    labels: list
    ks_stats: np.ndarray
    ks_critical: float
    corr_bound: float
    max_abs_corr: float
    ks_pass_fraction: float
    corr_pass_fraction: float

    def passes(self, min_fraction=0.95):
        return self.ks_pass_fraction >= min_fraction and self.corr_pass_fraction >= min_fraction


def burke_test(spec, m, n, replicas, seed, path_kind="antidiagonal", alpha=0.01):
    """Down-right property check: each staircase ratio keeps the boundary law
    and distinct edges decorrelate at the 4/sqrt(R) level."""
    batch = lattice.sample_environment_batch(spec, m, n, seed, replicas, r_max=0)
    table = log_partition_batch(batch)
    path = staircase_path(m, n, path_kind)
    labels, values = down_right_collect(batch, table, path)  # values (R, E)
    values = np.asarray(values)
    n_edges = values.shape[-1]

    crit = ks.ks_critical_value(replicas, alpha)
    stats = np.empty(n_edges)
    for e in range(n_edges):
        fam, a = (spec.f1, spec.a1) if labels[e] == "R1" else (spec.f2, spec.a2)
        stats[e] = ks.ks_statistic(values[:, e], cdf_fn=lambda u: coupling.cdf(fam, a, np.exp(u)))
    ks_fraction = float(np.mean(stats <= crit))

    corr = np.corrcoef(values.T)
    off = corr[~np.eye(n_edges, dtype=bool)]
    bound = 4.0 / math.sqrt(replicas)
    return BurkeReport(
        spec.label(), path_kind, replicas, labels, stats, crit, bound,
        float(np.max(np.abs(off))), ks_fraction, float(np.mean(np.abs(off) <= bound)),
    )


def dump_table_csv(table, path):
    with open(path, "w") as fh:
        fh.write("i,j,logZ\n")
        for i in range(table.m + 1):
            for j in range(table.n + 1):
                fh.write(f"{i},{j},{float(table.logz[i, j])!r}\n")
