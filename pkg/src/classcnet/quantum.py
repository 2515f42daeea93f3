"""Quantum side: evolution operator, resolvent Green functions, quenched averages.

The state space has basis ``(edge, spin)`` with index ``2*k + a`` for the
k-th edge of the graph (``g.edges`` order).  One time step applies the edge
rotation ``U_e`` and then scatters at the terminal node of ``e``::

    U[(e', b), (e, a)] = S[i(e'), j(e)] * U_e[b, a]

where ``e`` enters node ``n`` on in-channel ``j(e)`` and ``e'`` leaves ``n`` on
out-channel ``i(e')``.  Lead-out edges have empty columns and lead-in edges
have empty rows.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses

import numpy as np

from . import config
from ._random import as_generator, spawn
from .errors import ConditioningError, ParameterError
from .matrixkit import haar_sample
from .netgraph import NetworkGraph

ORDERS = ("rotate-then-scatter", "scatter-then-rotate")


@dataclasses.dataclass(frozen=True)
class EvolutionOperator:
    matrix: np.ndarray
    edge_ids: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclasses.dataclass(frozen=True)
class GreenBlock:
    entries: np.ndarray
    z: complex
    residual: float = 0.0


@dataclasses.dataclass
class GreenMCResult:
    mean: np.ndarray          # 2x2 complex
    stderr: np.ndarray        # 2x2; real/imag parts are the errors of real/imag parts
    mean_det: complex
    stderr_det: complex
    trace: complex
    trace_stderr: complex
    n_used: int
    n_skipped: int
    samples: np.ndarray | None = None   # (n, 2, 2) when requested


# -- disorder ------------------------------------------------------------------


def sample_disorder(g: NetworkGraph, random_source) -> dict:
    """One Haar draw per edge, as ``{edge_id: U}``."""
    u = haar_sample(as_generator(random_source), g.n_edges)
    return {e.id: u[k] for k, e in enumerate(g.edges)}


def disorder_array(g: NetworkGraph, d: dict) -> np.ndarray:
    missing = [e.id for e in g.edges if e.id not in d]
    extra = set(d) - set(g.edge_index)
    if missing or extra:
        raise ParameterError(f"disorder does not cover the graph (missing {missing}, extra {sorted(extra)})")
    return np.stack([np.asarray(d[e.id], dtype=complex) for e in g.edges])


def _transitions(g: NetworkGraph):
    """(row edge index, column edge index, amplitude) for every node passage."""
    out = []
    for n in g.nodes:
        ins = g.in_edges(n.id)
        outs = g.out_edges(n.id)
        for j, e_in in enumerate(ins):
            if e_in is None:
                continue
            for i, e_out in enumerate(outs):
                if e_out is None:
                    continue
                out.append((g.edge_index[e_out], g.edge_index[e_in], float(n.S[i, j])))
    return out


def assemble_batch(g: NetworkGraph, u: np.ndarray, order: str = ORDERS[0]) -> np.ndarray:
    """Evolution operators for a stack of disorder draws ``u`` of shape (m, E, 2, 2)."""
    if order not in ORDERS:
        raise ParameterError(f"order must be one of {ORDERS}")
    m = u.shape[0]
    dim = 2 * g.n_edges
    out = np.zeros((m, dim, dim), dtype=complex)
    rotate_first = order == ORDERS[0]
    for row, col, s in _transitions(g):
        if s == 0.0:
            continue
        block = u[:, col] if rotate_first else u[:, row]
        out[:, 2 * row:2 * row + 2, 2 * col:2 * col + 2] = s * block
    return out


def assemble_evolution(g: NetworkGraph, d: dict, order: str = ORDERS[0]) -> EvolutionOperator:
    u = disorder_array(g, d)
    return EvolutionOperator(assemble_batch(g, u[None], order)[0], tuple(g.edge_ids()))


# -- Green functions -------------------------------------------------------------


def _solve_batch(a: np.ndarray, b: np.ndarray):
    """Batched solve with per-sample max-abs residuals."""
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        x = np.empty(a.shape[:-1] + b.shape[-1:], dtype=complex)
        for k in range(a.shape[0]):
            try:
                x[k] = np.linalg.solve(a[k], b[k])
            except np.linalg.LinAlgError:
                x[k] = np.nan
    r = np.abs(a @ x - b).reshape(a.shape[0], -1).max(axis=1)
    r[~np.isfinite(r)] = np.inf
    return x, r


def _green_from_operators(ops: np.ndarray, k1: int, k2: int, z: complex):
    m, dim, _ = ops.shape
    a = np.eye(dim, dtype=complex)[None] - z * ops
    b = np.zeros((dim, 2), dtype=complex)
    b[2 * k1, 0] = 1.0
    b[2 * k1 + 1, 1] = 1.0
    x, r = _solve_batch(a, np.broadcast_to(b, (m, dim, 2)))
    return x[:, 2 * k2:2 * k2 + 2, :], r


def green(g: NetworkGraph, d: dict, e1, e2, z: complex, order: str = ORDERS[0]) -> GreenBlock:
    """2x2 block <e2| (1 - z U)^-1 |e1> for a fixed disorder realization."""
    for e in (e1, e2):
        if e not in g.edge_index:
            raise ParameterError(f"unknown edge {e}")
    op = assemble_evolution(g, d, order).matrix
    blocks, r = _green_from_operators(op[None], g.edge_index[e1], g.edge_index[e2], z)
    if not r[0] <= config.tol("residual"):
        raise ConditioningError(f"resolvent solve residual {r[0]:.3g} at z={z}", residual=float(r[0]))
    return GreenBlock(blocks[0], complex(z), float(r[0]))


def _chunk_size(g: NetworkGraph) -> int:
    dim = 2 * g.n_edges
    return max(16, int(4_000_000 // (dim * dim)))


def green_samples(g: NetworkGraph, e1, e2, z, n_samples: int, random_source,
                  order: str = ORDERS[0], disorder_map=None):
    """Green blocks for ``n_samples`` independent disorder draws from one stream.

    Returns ``(blocks, residuals)``; ``disorder_map`` optionally transforms
    each (m, E, 2, 2) batch of draws before assembly.
    """
    rng = as_generator(random_source)
    k1, k2 = g.edge_index[e1], g.edge_index[e2]
    blocks, res = [], []
    chunk = _chunk_size(g)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        u = haar_sample(rng, (m, g.n_edges))
        if disorder_map is not None:
            u = disorder_map(u)
        x, r = _green_from_operators(assemble_batch(g, u, order), k1, k2, z)
        blocks.append(x)
        res.append(r)
        done += m
    if not blocks:
        return np.zeros((0, 2, 2), complex), np.zeros(0)
    return np.concatenate(blocks), np.concatenate(res)


def _parallel_samples(fn, n_samples: int, random_source, n_streams: int, workers: int):
    """Run ``fn(count, rng)`` over fixed substreams and concatenate in stream order."""
    n_streams = max(1, min(n_streams, n_samples))
    rngs = spawn(random_source, n_streams)
    counts = [n_samples // n_streams + (1 if k < n_samples % n_streams else 0) for k in range(n_streams)]
    if workers <= 1:
        parts = [fn(c, r) for c, r in zip(counts, rngs)]
    else:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(fn, counts, rngs))
    return parts


def _skip_policy(residuals, n_samples):
    bad = ~(residuals <= config.tol("residual"))
    n_bad = int(bad.sum())
    if n_bad > 0.01 * n_samples:
        raise ConditioningError(
            f"{n_bad} of {n_samples} samples failed the residual check",
            residual=float(np.max(residuals[bad])))
    return ~bad, n_bad


def _complex_stderr(x: np.ndarray, axis=0):
    n = x.shape[axis]
    if n < 2:
        return np.full(np.mean(x, axis=axis).shape, np.inf) * (1 + 1j)
    se_re = np.std(x.real, axis=axis, ddof=1) / np.sqrt(n)
    se_im = np.std(x.imag, axis=axis, ddof=1) / np.sqrt(n)
    return se_re + 1j * se_im


def mean_green_mc(g: NetworkGraph, e1, e2, z, n_samples: int, random_source, *,
                  n_streams: int = 8, workers: int = 1, order: str = ORDERS[0],
                  keep_samples: bool = False, disorder_map=None) -> GreenMCResult:
    """Quenched average of G(e2, e1; z) with entrywise standard errors.

    Results depend only on (random_source, n_samples, n_streams), never on
    ``workers``.  Standard errors are complex numbers whose real and
    imaginary parts are the errors of the real and imaginary parts.
    """
    if n_samples < 2:
        raise ParameterError("n_samples must be >= 2")

    def run(count, rng):
        return green_samples(g, e1, e2, z, count, rng, order, disorder_map)

    parts = _parallel_samples(run, n_samples, random_source, n_streams, workers)
    blocks = np.concatenate([p[0] for p in parts])
    res = np.concatenate([p[1] for p in parts])
    ok, n_bad = _skip_policy(res, n_samples)
    blocks = blocks[ok]
    dets = blocks[:, 0, 0] * blocks[:, 1, 1] - blocks[:, 0, 1] * blocks[:, 1, 0]
    traces = blocks[:, 0, 0] + blocks[:, 1, 1]
    out = GreenMCResult(
        mean=blocks.mean(axis=0),
        stderr=_complex_stderr(blocks),
        mean_det=complex(dets.mean()),
        stderr_det=complex(_complex_stderr(dets)),
        trace=complex(traces.mean()),
        trace_stderr=complex(_complex_stderr(traces)),
        n_used=int(blocks.shape[0]),
        n_skipped=n_bad,
        samples=blocks if keep_samples else None,
    )
    return out


# -- density of states -----------------------------------------------------------


def resolvent_trace(g: NetworkGraph, d: dict, z) -> np.ndarray:
    """sum_e Tr G(e, e; z) for a scalar or array of spectral points."""
    op = assemble_evolution(g, d).matrix
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    dim = op.shape[0]
    a = np.eye(dim)[None] - zs[:, None, None] * op[None]
    x, r = _solve_batch(a, np.broadcast_to(np.eye(dim, dtype=complex), a.shape))
    worst = float(np.max(r)) if r.size else 0.0
    if not worst <= config.tol("residual"):
        raise ConditioningError(f"resolvent solve residual {worst:.3g}", residual=worst)
    tr = np.trace(x, axis1=1, axis2=2)
    return tr if np.ndim(z) else tr[0]


def density_of_states(g: NetworkGraph, d: dict, eps, delta: float, normalized: bool = False):
    """Smoothed eigenphase density of the evolution operator.

    rho(eps) = (1/2pi) sum_e Re[Tr G(e,e; (1-delta) e^{-i eps}) - Tr G(e,e; (1+delta) e^{-i eps})]

    which integrates to the number of states 2N over one period.  With
    ``normalized`` the result is divided by 2N (unit integral).
    """
    if not g.is_closed:
        raise ParameterError("density of states needs a closed graph")
    if not delta > 0:
        raise ParameterError("delta must be positive")
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    phase = np.exp(-1j * eps_arr)
    inner = resolvent_trace(g, d, np.concatenate([(1 - delta) * phase, (1 + delta) * phase]))
    m = eps_arr.size
    rho = (inner[:m] - inner[m:]).real / (2 * np.pi)
    if normalized:
        rho = rho / (2 * g.n_edges)
    return rho if np.ndim(eps) else float(rho[0])


def eigenphases(g: NetworkGraph, d: dict) -> np.ndarray:
    """Eigenphases of the evolution operator in [0, 2pi), sorted."""
    w = np.linalg.eigvals(assemble_evolution(g, d).matrix)
    return np.sort(np.mod(np.angle(w), 2 * np.pi))


def eigenphase_histogram(g: NetworkGraph, d: dict, bins=64):
    """Exact eigenphase counts on [0, 2pi); returns ``(counts, bin_edges)``."""
    return np.histogram(eigenphases(g, d), bins=bins, range=(0.0, 2 * np.pi))


def dos_sum_rule(g: NetworkGraph, d: dict, delta: float, n_points: int = 512) -> float:
    """Periodic trapezoid integral of the smoothed DOS over [0, 2pi)."""
    eps = np.arange(n_points) * (2 * np.pi / n_points)
    return float(np.sum(density_of_states(g, d, eps, delta)) * (2 * np.pi / n_points))


def dos_histogram_distance(g: NetworkGraph, d: dict, delta: float, bins: int = 64, sub: int = 32) -> float:
    """L1 distance between the bin-averaged smoothed DOS and the exact histogram density."""
    counts, edges = eigenphase_histogram(g, d, bins)
    width = edges[1] - edges[0]
    eps = edges[0] + (np.arange(bins * sub) + 0.5) * (width / sub)
    rho = density_of_states(g, d, eps, delta).reshape(bins, sub).mean(axis=1)
    return float(np.sum(np.abs(rho - counts / width)) * width)


# -- conductance -------------------------------------------------------------------


def point_conductance(g: NetworkGraph, d: dict, e_in, e_out) -> float:
    """Tr[G(e_out, e_in; 1)^dag G(e_out, e_in; 1)] for one realization."""
    blk = green(g, d, e_in, e_out, 1.0).entries
    return float(np.real(np.trace(blk.conj().T @ blk)))


def transmission_matrix(g: NetworkGraph, d: dict, leads_in=None, leads_out=None) -> np.ndarray:
    """Lead-to-lead block of (1 - U)^-1 with 2x2 spin blocks per lead pair."""
    leads_in = list(g.leads_in if leads_in is None else leads_in)
    leads_out = list(g.leads_out if leads_out is None else leads_out)
    op = assemble_evolution(g, d).matrix
    dim = op.shape[0]
    b = np.zeros((dim, 2 * len(leads_in)), dtype=complex)
    for c, e in enumerate(leads_in):
        k = g.edge_index[e]
        b[2 * k, 2 * c] = 1.0
        b[2 * k + 1, 2 * c + 1] = 1.0
    x, r = _solve_batch((np.eye(dim) - op)[None], b[None])
    if not r[0] <= config.tol("residual"):
        raise ConditioningError(f"transmission solve residual {r[0]:.3g}", residual=float(r[0]))
    rows = np.concatenate([[2 * g.edge_index[e], 2 * g.edge_index[e] + 1] for e in leads_out]).astype(int) \
        if leads_out else np.zeros(0, int)
    return x[0][rows, :]


def landauer_conductance(g: NetworkGraph, d: dict, leads_in=None, leads_out=None) -> float:
    """g = Tr t^dag t between the chosen lead sets of an open graph."""
    if g.is_closed:
        raise ParameterError("Landauer conductance needs an open graph")
    t = transmission_matrix(g, d, leads_in, leads_out)
    return float(np.real(np.trace(t.conj().T @ t)))


def conductance_samples(g: NetworkGraph, e_in, e_out, n_samples: int, random_source) -> np.ndarray:
    blocks, res = green_samples(g, e_in, e_out, 1.0, n_samples, random_source)
    ok, _ = _skip_policy(res, n_samples)
    blocks = blocks[ok]
    return np.einsum("mab,mab->m", blocks.conj(), blocks).real


def mean_point_conductance_mc(g: NetworkGraph, e_in, e_out, n_samples: int, random_source, *,
                              n_streams: int = 8, workers: int = 1) -> tuple[float, float]:
    """Quenched mean point conductance and its standard error."""
    if n_samples < 2:
        raise ParameterError("n_samples must be >= 2")

    def run(count, rng):
        return conductance_samples(g, e_in, e_out, count, rng)

    vals = np.concatenate(_parallel_samples(run, n_samples, random_source, n_streams, workers))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))
