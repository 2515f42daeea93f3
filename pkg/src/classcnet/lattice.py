"""Hull loops and conductance scans on the L-lattice."""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import logging

import numpy as np
from scipy import stats

from . import _accel, _hull
from ._random import as_generator, spawn
from .errors import ParameterError, ResourceError, StatisticsError
from .netgraph import (NetworkGraph, build_l_lattice, edge_displacements,
                       l_lattice_scan_leads, l_lattice_theta)
from .quantum import mean_point_conductance_mc
from .trails import (DEFAULT_CEILING, conditional_weight, enumerate_open_trails,
                     omega_value, sample_history_walk, trail_weight)

log = logging.getLogger(__name__)

WALK_BATCH = 128


@dataclasses.dataclass
class LoopStats:
    sample_count: int
    histogram: dict            # loop length -> count
    mean_length: float
    mean_length_stderr: float
    gyration_radii: np.ndarray
    lengths: np.ndarray

    def tail_mass(self, threshold: int) -> tuple[float, float]:
        """Fraction of loops longer than ``threshold`` and its standard error."""
        f = float(np.mean(self.lengths > threshold))
        return f, float(np.sqrt(f * (1 - f) / self.sample_count))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["loop_id", "length", "radius"])
        for k, (n, r) in enumerate(zip(self.lengths, self.gyration_radii)):
            w.writerow([k, int(n), repr(float(r))])
        return buf.getvalue()


def _tables(g: NetworkGraph, L: int):
    e = g.n_edges
    tgt_node = np.empty(e, dtype=np.int64)
    tgt_ch = np.empty(e, dtype=np.int64)
    out_edge = np.empty((len(g.nodes), 2), dtype=np.int64)
    for k, edge in enumerate(g.edges):
        if edge.id != k:
            raise ParameterError("lattice edges must be numbered 0..E-1")
        tgt_node[k], tgt_ch[k] = edge.target
        out_edge[edge.source[0], edge.source[1] - 1] = k
    return tgt_node, tgt_ch, out_edge, edge_displacements(g, L).astype(np.float64)


def _run_batch(tables, n_nodes, n_edges, count, rng, p, max_steps, use_numba):
    starts = rng.integers(0, n_edges, size=count).astype(np.int64)
    left = rng.random((count, n_nodes)) < p
    kernel = _hull.trace_loops_numba if use_numba else _hull.trace_loops_numpy
    return kernel(starts, left, *tables, max_steps)


def hull_loop_statistics(L: int, p: float, n_walks: int, random_source, *,
                         workers: int = 1, use_numba: bool | None = None) -> LoopStats:
    """Loop statistics of history-dependent walks on the L x L torus.

    Each walk starts on a uniformly random edge and runs until it re-enters
    it.  Lengths count edges; gyration radii use edge midpoints along the
    unwrapped path.  Walks are grouped in fixed batches with one substream
    each, so the result does not depend on ``workers`` or on the backend.
    """
    if n_walks < 1:
        raise ParameterError("n_walks must be >= 1")
    theta = l_lattice_theta(p)
    g = build_l_lattice(L, theta)
    tables = _tables(g, L)
    use_numba = _accel.USE_NUMBA if use_numba is None else (use_numba and _accel.HAVE_NUMBA)
    max_steps = 2 * L * L
    n_batches = -(-n_walks // WALK_BATCH)
    counts = [min(WALK_BATCH, n_walks - k * WALK_BATCH) for k in range(n_batches)]
    rngs = spawn(random_source, n_batches)
    p_left = float(np.sin(theta) ** 2)

    def job(args):
        c, r = args
        return _run_batch(tables, len(g.nodes), g.n_edges, c, r, p_left, max_steps, use_numba)

    if workers <= 1:
        parts = [job(a) for a in zip(counts, rngs)]
    else:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, zip(counts, rngs)))
    lengths = np.concatenate([a for a, _ in parts])
    sums = np.concatenate([b for _, b in parts])
    if np.any(lengths > max_steps):
        raise ResourceError(f"a walk did not close within {max_steps} steps")
    n = lengths.astype(float)
    cx, cy = sums[:, 0] / n, sums[:, 1] / n
    rg = np.sqrt(np.maximum(sums[:, 2] / n - cx * cx - cy * cy, 0.0))
    values, freq = np.unique(lengths, return_counts=True)
    se = float(n.std(ddof=1) / np.sqrt(n.size)) if n.size > 1 else float("inf")
    return LoopStats(int(lengths.size), {int(a): int(b) for a, b in zip(values, freq)},
                     float(n.mean()), se, rg, lengths)


@dataclasses.dataclass(frozen=True)
class FractalFit:
    slope: float
    stderr: float
    n_loops: int
    window: tuple


def fit_hull_dimension(stats_: LoopStats, r_min: float, r_max: float, min_loops: int = 30) -> FractalFit:
    sel = (stats_.gyration_radii >= r_min) & (stats_.gyration_radii <= r_max)
    k = int(sel.sum())
    if k < min_loops:
        raise StatisticsError(f"only {k} loops with radius in [{r_min}, {r_max}]")
    fit = stats.linregress(np.log(stats_.gyration_radii[sel]), np.log(stats_.lengths[sel]))
    return FractalFit(float(fit.slope), float(fit.stderr), k, (r_min, r_max))


def fractal_dimension_estimate(L: int, n_walks: int, random_source, *, p: float = 0.5,
                               workers: int = 1, window=None) -> tuple[float, float]:
    """Slope of log(length) against log(radius) for loops with radius in [4, L/8]."""
    s = hull_loop_statistics(L, p, n_walks, random_source, workers=workers)
    lo, hi = window or (4.0, L / 8)
    fit = fit_hull_dimension(s, lo, hi)
    return fit.slope, fit.stderr


# -- node rules ------------------------------------------------------------------


@dataclasses.dataclass
class WeightEquivalenceReport:
    theta: float
    p: float
    first_passage: dict        # (j, i) -> w
    second_passage: dict       # ((j, i), (j', i')) -> w
    max_rule_error: float
    walk_error: float | None
    ok: bool


def weight_equivalence_check(theta: float, walk_steps: int = 64, random_source=0,
                             L: int = 8, tol: float = 1e-12) -> WeightEquivalenceReport:
    """Compare the node weights with the turn rules (p, 1 - p, forced second passage).

    Also grows a walk of ``walk_steps`` passages on an L x L torus and
    compares the product of rule probabilities with the trail's weight.
    """
    s = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    p = float(np.sin(theta) ** 2)
    first, second = {}, {}
    err = 0.0
    for j in (1, 2):
        for i in (1, 2):
            w = omega_value(s, [(j, i)])
            first[(j, i)] = w
            err = max(err, abs(w - ((1 - p) if i == j else p)))
            for i2 in (1, 2):
                if i2 == i:
                    continue
                j2 = 3 - j
                if omega_value(s, [(j, i)]) == 0.0:
                    continue
                w2 = conditional_weight(s, [(j, i)], j2, i2)
                second[((j, i), (j2, i2))] = w2
                err = max(err, abs(w2 - 1.0))
    walk_err = _walk_chain_check(theta, walk_steps, random_source, L)
    ok = err <= tol and (walk_err is None or walk_err <= tol)
    return WeightEquivalenceReport(float(theta), p, first, second, err, walk_err, ok)


def _walk_chain_check(theta, steps, random_source, L):
    g = build_l_lattice(L, theta)
    rng = as_generator(random_source)
    for _ in range(1000):
        trail, diag = sample_history_walk(g, int(rng.integers(g.n_edges)), rng)
        if len(diag.steps) >= steps or len(diag.steps) == g.n_edges:
            break
    p = float(np.sin(theta) ** 2)
    rule_prob = 1.0
    seen = set()
    for node, j, i, _ in diag.steps:
        if node in seen:
            continue       # forced second passage
        seen.add(node)
        rule_prob *= (1 - p) if i == j else p
    return abs(rule_prob - trail_weight(g, trail))


# -- conductance scan ---------------------------------------------------------------


@dataclasses.dataclass
class ScanRow:
    p: float
    g_quantum: float
    err_q: float
    g_classical: float
    err_c: float
    classical_method: str      # "enumeration" or "walk"

    @property
    def agrees(self) -> bool:
        return abs(self.g_quantum - self.g_classical) <= 3 * np.hypot(self.err_q, self.err_c) + 1e-9


def classical_walk_conductance(g, e_in, e_out, n_walks, random_source) -> tuple[float, float]:
    """2 P(walk from e_in leaves on e_out), estimated by sampling."""
    rng = as_generator(random_source)
    hits = 0
    for _ in range(n_walks):
        _, diag = sample_history_walk(g, e_in, rng)
        hits += diag.exit_edge == e_out
    f = hits / n_walks
    return 2 * f, 2 * float(np.sqrt(f * (1 - f) / n_walks))


def conductance_vs_p_scan(L: int, p_list, n_samples: int, random_source, *,
                          ceiling: int = DEFAULT_CEILING, quantum: bool = True,
                          n_walks: int | None = None, workers: int = 1) -> list[ScanRow]:
    """Quantum and classical point conductance across the open L x L lattice.

    The lead pair is the middle row's seam edge: in on the left boundary,
    out on the right.  The classical value is the exact trail sum when the
    enumeration stays under ``ceiling``, else a walk estimate.
    """
    e_in, e_out = l_lattice_scan_leads(L)
    rows = []
    p_list = list(p_list)
    for p, sub in zip(p_list, spawn(random_source, len(p_list))):
        sub_q, sub_c = sub.spawn(2)
        g = build_l_lattice(L, l_lattice_theta(p), boundary="open")
        if quantum:
            gq, eq = mean_point_conductance_mc(g, e_in, e_out, n_samples, sub_q, workers=workers)
        else:
            gq, eq = float("nan"), float("nan")
        try:
            gc = 2.0 * sum(w for _, w in enumerate_open_trails(g, e_in, e_out, ceiling))
            ec, method = 0.0, "enumeration"
        except ResourceError:
            log.info("trail enumeration over ceiling at L=%d p=%g; sampling walks", L, p)
            gc, ec = classical_walk_conductance(g, e_in, e_out, n_walks or n_samples, sub_c)
            method = "walk"
        rows.append(ScanRow(float(p), gq, eq, gc, ec, method))
    return rows


def scan_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "g_quantum", "err_q", "g_classical", "err_c", "classical_method"])
    for r in rows:
        w.writerow([repr(r.p), repr(r.g_quantum), repr(r.err_q), repr(r.g_classical),
                    repr(r.err_c), r.classical_method])
    return buf.getvalue()
