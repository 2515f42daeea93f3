"""Named checks for the classical/quantum identities and the lattice experiments.

Each check takes a ``numpy.random.Generator`` and a ``scale`` factor for
its sample counts (1.0 means full size) and returns a :class:`CheckResult`.
``run_checks`` feeds them substreams of one master seed in the fixed order
of :data:`CHECKS`, so any single check is reproducible on its own.
"""
from __future__ import annotations

import dataclasses
import json
import time

import numpy as np
from scipy import stats

from . import fixtures, lattice, quantum, smatrix, trails
from ._random import spawn
from .matrixkit import haar_integral_probe, jacobi_complement_check, minor_det, random_orthogonal


@dataclasses.dataclass
class CheckResult:
    name: str
    criterion: int
    passed: bool
    summary: str
    details: dict
    seconds: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.criterion:2d} {self.name}: {self.summary}"

    def as_dict(self) -> dict:
        return {"name": self.name, "criterion": self.criterion, "passed": self.passed,
                "summary": self.summary, "details": _plain(self.details)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _n(base: int, scale: float, floor: int = 2) -> int:
    return max(floor, int(round(base * scale)))


def _within(diff, se, k=3.0, floor=1e-9) -> bool:
    """|diff| <= k * |se| with a small absolute floor for deterministic outcomes."""
    return bool(abs(diff) <= k * abs(se) + floor)


# -- 1-4: classical/quantum equivalences -------------------------------------------


def check_trace_equivalence(rng, scale=1.0) -> CheckResult:
    n_graphs, n_samples = 20, _n(100_000, scale)
    cases = []
    for k in range(n_graphs):
        g = fixtures.random_closed_graph(rng, max_edges=10, max_degree=3)
        e = int(rng.integers(g.n_edges))
        ok = True
        zs = {}
        for z in (0.6, 1.8):
            cl = trails.classical_mean_trace_green(g, e, z)
            mc = quantum.mean_green_mc(g, e, e, z, n_samples, rng)
            good = _within(mc.trace - cl, mc.trace_stderr)
            zs[z] = {"classical": cl.real, "mc": mc.trace, "stderr": abs(mc.trace_stderr), "ok": good}
            ok &= good
        cases.append({"edges": g.n_edges, "nodes": len(g.nodes), "ok": ok, "z": zs})
    n_ok = sum(c["ok"] for c in cases)
    return CheckResult("trace_equivalence", 1, n_ok >= 19,
                       f"{n_ok}/{n_graphs} graphs within 3 sigma at z=0.6 and z=1.8 ({n_samples} samples)",
                       {"cases": cases})


def check_single_loop(rng, scale=1.0) -> CheckResult:
    g = fixtures.single_loop()
    n_samples = _n(100_000, scale)
    rows = []
    ok = True
    for z in (0.3, 0.6, 1.8, 2.5):
        cl = trails.classical_mean_trace_green(g, 0, z)
        exact = 2 - z * z if abs(z) < 1 else z ** -2
        mc = quantum.mean_green_mc(g, 0, 0, z, n_samples, rng)
        good = abs(cl - exact) <= 1e-12 and _within(mc.trace - exact, mc.trace_stderr)
        ok &= good
        rows.append({"z": z, "exact": exact, "classical": cl.real, "mc": mc.trace,
                     "stderr": abs(mc.trace_stderr), "ok": good})
    return CheckResult("single_loop_analytic", 2, ok,
                       "classical exact to 1e-12 and MC within 3 sigma at 4 points", {"rows": rows})


def _offdiag_fixtures(rng):
    """Edge pairs leaving different nodes.

    Pairs sharing a source node are excluded: the per-node SU(2) symmetry
    left after the edge average does not separate them (see
    ``fixtures.self_loop_pair``).
    """
    out = [(fixtures.two_node(np.pi / 4, np.pi / 4), 0, 2), (fixtures.two_node(0.3, 1.1), 1, 3)]
    while len(out) < 10:
        g = fixtures.random_closed_graph(rng, max_edges=10, max_degree=3, min_edges=3)
        pairs = [(a.id, b.id) for a in g.edges for b in g.edges if a.source[0] != b.source[0]]
        if not pairs:
            continue
        e1, e2 = pairs[int(rng.integers(len(pairs)))]
        out.append((g, e1, e2))
    return out


def check_offdiagonal(rng, scale=1.0) -> CheckResult:
    n_samples = _n(100_000, scale)
    rows = []
    ok = True
    for g, e1, e2 in _offdiag_fixtures(rng):
        mc = quantum.mean_green_mc(g, e1, e2, 0.6, n_samples, rng)
        ratio = float(np.max(np.abs(mc.mean) / np.maximum(np.abs(mc.stderr), 1e-300)))
        good = all(_within(m, s, floor=1e-12) for m, s in zip(mc.mean.ravel(), mc.stderr.ravel()))
        ok &= good
        rows.append({"edges": g.n_edges, "e1": e1, "e2": e2, "max_ratio": ratio, "ok": good})
    return CheckResult("offdiagonal_vanishing", 3, ok,
                       f"all entries of mean G(e2,e1) within 3 stderr of 0 on {len(rows)} fixtures",
                       {"rows": rows})


def _open_fixtures(rng):
    a, b = 0.3, 1.1
    named = [
        ("two_node_cut",) + fixtures.two_node_cut(a, b),
        ("two_node_half_cut",) + fixtures.two_node_half_cut(a, b),
        ("single_theta_node",) + fixtures.single_theta_node(0.7),
        ("open_chain",) + fixtures.open_chain(3),
    ]
    while len(named) < 10:
        named.append(("random",) + fixtures.random_open_fixture(rng))
    return named


def check_conductance_equivalence(rng, scale=1.0) -> CheckResult:
    n_samples = _n(100_000, scale)
    rows = []
    ok = True
    for name, g, e_in, e_out in _open_fixtures(rng):
        cl = trails.classical_mean_conductance(g, e_in, e_out)
        q, se = quantum.mean_point_conductance_mc(g, e_in, e_out, n_samples, rng)
        good = _within(q - cl, se)
        if name == "two_node_cut":
            good &= abs(cl - 2 * np.cos(1.1) ** 2) <= 1e-12
        ok &= good
        rows.append({"fixture": name, "classical": cl, "quantum": q, "stderr": se, "ok": good})
    return CheckResult("conductance_equivalence", 4, ok,
                       f"{sum(r['ok'] for r in rows)}/{len(rows)} open fixtures within 3 sigma",
                       {"rows": rows})


# -- 5-9: exact identities ----------------------------------------------------------


def random_history(rng, n_max=6, min_prior_weight=0.0):
    """(S, prior, j_new): prior passages use distinct channels; j_new is unused.

    Priors whose weight does not exceed ``min_prior_weight`` are redrawn,
    since the conditional weights divide by it.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        s = random_orthogonal(n, rng)
        k = int(rng.integers(0, n))
        js = [int(v) + 1 for v in rng.permutation(n)[: k + 1]]
        is_ = [int(v) + 1 for v in rng.permutation(n)[:k]]
        prior = list(zip(js[:k], is_))
        if k == 0 or abs(trails.omega_value(s, prior)) > min_prior_weight:
            return s, prior, js[k]


def check_walk_normalization(rng, scale=1.0) -> CheckResult:
    n_cases = _n(1000, scale)
    worst_norm = worst_chain = 0.0
    for _ in range(n_cases):
        s, prior, j_new = random_history(rng)
        worst_norm = max(worst_norm, abs(trails.normalization_sum(s, prior, j_new) - 1.0))
        # complete the history with a random unused out-channel and telescope
        used = {i for _, i in prior}
        free = [i for i in range(1, s.shape[0] + 1) if i not in used]
        visits = prior + [(j_new, int(rng.choice(free)))]
        rep = trails.omega(s, visits)
        if all(np.isfinite(rep.conditional_factors)):
            worst_chain = max(worst_chain, abs(float(np.prod(rep.conditional_factors)) - rep.omega))
    ok = worst_norm <= 1e-10 and worst_chain <= 1e-12
    return CheckResult("walk_normalization", 5, ok,
                       f"max |sum w - 1| = {worst_norm:.2e}, max chain-rule error = {worst_chain:.2e} "
                       f"over {n_cases} cases", {"worst_norm": worst_norm, "worst_chain": worst_chain})


def _random_subsets(rng, n):
    k = int(rng.integers(1, n + 1))
    rows = tuple(sorted(int(v) + 1 for v in rng.choice(n, size=k, replace=False)))
    cols = tuple(sorted(int(v) + 1 for v in rng.choice(n, size=k, replace=False)))
    return rows, cols


def check_pairing_sum(rng, scale=1.0) -> CheckResult:
    n_cases = _n(1000, scale)
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(1, 7))
        s = random_orthogonal(n, rng)
        rows, cols = _random_subsets(rng, n)
        worst = max(worst, abs(trails.pairing_sum(s, rows, cols) - minor_det(s, rows, cols) ** 2))
    return CheckResult("pairing_sum_equals_minor_squared", 6, worst <= 1e-10,
                       f"max error {worst:.2e} over {n_cases} subsets", {"worst": worst})


def check_gdagg_identity(rng, scale=1.0) -> CheckResult:
    n_graphs, per_graph = _n(100, scale), 100
    worst = 0.0
    for _ in range(n_graphs):
        g = fixtures.random_closed_graph(rng, max_edges=10, max_degree=3)
        e1, e2 = (int(v) for v in rng.integers(g.n_edges, size=2))
        z = float(rng.choice([-1, 1]) * rng.uniform(0.05, 3.0))
        if abs(abs(z) - 1) < 0.05:
            z *= 1.2
        blocks, res = quantum.green_samples(g, e1, e2, z, per_graph, rng)
        blocks = blocks[res <= 1e-8]
        lhs = np.einsum("mab,mab->m", blocks.conj(), blocks).real
        det = blocks[:, 0, 0] * blocks[:, 1, 1] - blocks[:, 0, 1] * blocks[:, 1, 0]
        err = np.abs(lhs - 2 * det) / np.maximum(1.0, lhs)
        worst = max(worst, float(err.max()))
    total = n_graphs * per_graph
    return CheckResult("trace_gdagg_equals_two_det", 7, worst <= 1e-9,
                       f"max relative error {worst:.2e} over {total} draws at real z", {"worst": worst})


def check_jacobi(rng, scale=1.0) -> CheckResult:
    n_cases = _n(1000, scale)
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(1, 7))
        s = random_orthogonal(n, rng)
        rows, cols = _random_subsets(rng, n)
        lhs, rhs = jacobi_complement_check(s, rows, cols)
        worst = max(worst, abs(lhs - rhs))
    return CheckResult("signed_jacobi_identity", 8, worst <= 1e-10,
                       f"max error {worst:.2e} over {n_cases} cases", {"worst": worst})


def check_haar_probe(rng, scale=1.0) -> CheckResult:
    n_samples = _n(1_000_000, scale)
    rows = []
    ok = True
    for _ in range(10):
        bl = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        br = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        z = complex(rng.standard_normal(), rng.standard_normal())
        size = abs(z * np.vdot(bl, br))
        z *= rng.uniform(0.2, 4.0) / size
        mean, se = haar_integral_probe(bl, br, z, n_samples, rng, return_stderr=True)
        good = _within(mean - 1.0, se, k=4.0, floor=0.0)
        ok &= good
        rows.append({"coupling": abs(z * np.vdot(bl, br)), "mean": mean, "stderr": abs(se), "ok": good})
    return CheckResult("haar_bosonic_probe", 9, ok,
                       f"all 10 probes within 4 stderr of 1 at {n_samples} samples", {"rows": rows})


# -- 10-11: sign structure and the walk ---------------------------------------------


def check_positivity(rng, scale=1.0) -> CheckResult:
    n2 = all(smatrix.weights_nonnegative(random_orthogonal(2, rng)) for _ in range(_n(1000, scale)))

    n_o3 = _n(10_000, scale)
    o3_mixed = True
    o3_product = 0.0
    for _ in range(n_o3):
        s = random_orthogonal(3, rng)
        prof = smatrix.det_expansion_terms(s)
        o3_mixed &= prof.uniform == "mixed"
        prod = float(np.prod([v for _, v in prof.terms]))
        o3_product = max(o3_product, abs(prod + float(np.prod(s ** 2))))

    n_trees = _n(1000, scale)
    trees_ok = True
    for _ in range(n_trees):
        n = int(rng.integers(2, 5))
        s = smatrix.givens_tree_matrix(n, rng, reflect_prob=0.3)
        trees_ok &= smatrix.weights_nonnegative(s) and smatrix.complete_reduction(s) is not None

    uniform_seen = necessity_fail = 0
    for _ in range(_n(2000, scale)):
        n = int(rng.integers(3, 5))
        s = smatrix.euler_family(n, rng)
        if smatrix.weights_nonnegative(s, exhaustive=True):
            uniform_seen += 1
            necessity_fail += smatrix.complete_reduction(s) is None
    ok = n2 and o3_mixed and o3_product <= 1e-10 and trees_ok and necessity_fail == 0 and uniform_seen > 0
    return CheckResult(
        "positivity_suite", 10, ok,
        f"N=2 uniform: {n2}; O(3) mixed: {o3_mixed} (product err {o3_product:.1e}); "
        f"Givens trees reducible: {trees_ok}; necessity failures {necessity_fail}/{uniform_seen}",
        {"n2": n2, "o3_mixed": o3_mixed, "o3_product_error": o3_product, "trees_ok": trees_ok,
         "uniform_seen": uniform_seen, "necessity_failures": necessity_fail})


def walk_chi_square(g, e_start, n_walks, rng, min_expected=5.0):
    """Chi-square comparison of sampled closed trails with their enumerated weights."""
    enum = trails.enumerate_closed_trails(g, e_start)
    index = {t.edges: k for k, (t, _) in enumerate(enum)}
    weights = np.array([w for _, w in enum])
    counts = np.zeros(len(enum), dtype=np.int64)
    for _ in range(n_walks):
        t, _ = trails.sample_history_walk(g, e_start, rng)
        counts[index[t.edges]] += 1
    expected = weights / weights.sum() * n_walks
    big = expected >= min_expected
    obs = np.append(counts[big], counts[~big].sum())
    exp = np.append(expected[big], expected[~big].sum())
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    res = stats.chisquare(obs, exp)
    return float(res.pvalue), float(weights.sum()), counts, expected


def check_walk_distribution(rng, scale=1.0) -> CheckResult:
    n_walks = _n(100_000, scale, floor=100)
    g = fixtures.two_node(0.3, 1.1)
    pvalue, total, counts, expected = walk_chi_square(g, 0, n_walks, rng)
    ok = pvalue > 0.01 and abs(total - 1) <= 1e-12
    return CheckResult("walk_vs_enumeration", 11, ok,
                       f"chi-square p = {pvalue:.3f} over {n_walks} walks ({len(counts)} trails)",
                       {"pvalue": pvalue, "weight_total": total, "counts": counts.tolist(),
                        "expected": expected.tolist()})


# -- 12: L-lattice ---------------------------------------------------------------


def check_lattice(rng, scale=1.0, workers=1) -> CheckResult:
    sub = spawn(rng, 6)
    n_walks = _n(10_000, scale, floor=200)
    plaquettes = all(set(lattice.hull_loop_statistics(16, p, 500, r, workers=workers).histogram) == {4}
                     for p, r in ((0.0, sub[0]), (1.0, sub[0])))
    s04 = lattice.hull_loop_statistics(64, 0.4, n_walks, sub[1], workers=workers)
    s05 = lattice.hull_loop_statistics(64, 0.5, n_walks, sub[2], workers=workers)
    contrast = s05.mean_length - 3 * s05.mean_length_stderr >= 3 * (s04.mean_length + 3 * s04.mean_length_stderr)
    s04_32 = lattice.hull_loop_statistics(32, 0.4, n_walks, sub[3], workers=workers)
    indep = _within(s04.mean_length - s04_32.mean_length,
                    np.hypot(s04.mean_length_stderr, s04_32.mean_length_stderr), floor=0.0)
    dh, dh_se = lattice.fractal_dimension_estimate(128, _n(100_000, scale, floor=2000), sub[4], workers=workers)
    in_window = 1.65 <= dh <= 1.85
    ok = plaquettes and contrast and indep and in_window
    return CheckResult(
        "l_lattice_loops", 12, ok,
        f"plaquettes {plaquettes}; <n>(0.5)={s05.mean_length:.1f}+-{s05.mean_length_stderr:.1f} vs "
        f"<n>(0.4)={s04.mean_length:.1f}+-{s04.mean_length_stderr:.1f}; L=32 {s04_32.mean_length:.1f}; "
        f"d_h={dh:.3f}+-{dh_se:.3f}",
        {"plaquettes": plaquettes, "mean_05": s05.mean_length, "se_05": s05.mean_length_stderr,
         "mean_04_L64": s04.mean_length, "se_04_L64": s04.mean_length_stderr,
         "mean_04_L32": s04_32.mean_length, "se_04_L32": s04_32.mean_length_stderr,
         "contrast": contrast, "L_independent": indep, "d_h": dh, "d_h_stderr": dh_se})


# -- 13-14 -----------------------------------------------------------------------


def check_unitarity_dos(rng, scale=1.0) -> CheckResult:
    n_fix = _n(100, scale)
    worst_u = worst_dos = 0.0
    for _ in range(n_fix):
        g = fixtures.random_closed_graph(rng, max_edges=10, max_degree=3)
        d = quantum.sample_disorder(g, rng)
        u = quantum.assemble_evolution(g, d).matrix
        worst_u = max(worst_u, float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))))
        total = quantum.dos_sum_rule(g, d, delta=0.1)
        worst_dos = max(worst_dos, abs(total / (2 * g.n_edges) - 1.0))
    ok = worst_u <= 1e-10 and worst_dos <= 0.01
    return CheckResult("unitarity_and_dos_sum_rule", 13, ok,
                       f"max unitarity defect {worst_u:.1e}; max relative sum-rule error {worst_dos:.1e} "
                       f"on {n_fix} fixtures", {"unitarity": worst_u, "dos": worst_dos})


def determinism_fingerprint(seed: int, workers: int) -> str:
    """Serialized outputs of several stochastic pipelines for one seed."""
    g = fixtures.two_node(0.3, 1.1)
    mc = quantum.mean_green_mc(g, 0, 0, 0.6, 4000, seed, workers=workers)
    go, e_in, e_out = fixtures.two_node_half_cut(0.3, 1.1)
    cond = quantum.mean_point_conductance_mc(go, e_in, e_out, 4000, seed + 1, workers=workers)
    loops = lattice.hull_loop_statistics(32, 0.5, 700, seed + 2, workers=workers)
    doc = {"trace": [mc.trace.real, mc.trace.imag], "trace_se": abs(mc.trace_stderr),
           "conductance": list(cond), "loops": loops.to_csv()}
    return json.dumps(doc, sort_keys=True)


def check_determinism(rng, scale=1.0) -> CheckResult:
    seed = int(rng.integers(2 ** 31))
    a = determinism_fingerprint(seed, workers=1)
    b = determinism_fingerprint(seed, workers=1)
    c = determinism_fingerprint(seed, workers=3)
    ok = a == b == c
    return CheckResult("determinism", 14, ok,
                       "repeat run and 3-worker run byte-identical" if ok else "outputs differ",
                       {"bytes": len(a)})


CHECKS = [
    ("trace_equivalence", check_trace_equivalence),
    ("single_loop_analytic", check_single_loop),
    ("offdiagonal_vanishing", check_offdiagonal),
    ("conductance_equivalence", check_conductance_equivalence),
    ("walk_normalization", check_walk_normalization),
    ("pairing_sum_equals_minor_squared", check_pairing_sum),
    ("trace_gdagg_equals_two_det", check_gdagg_identity),
    ("signed_jacobi_identity", check_jacobi),
    ("haar_bosonic_probe", check_haar_probe),
    ("positivity_suite", check_positivity),
    ("walk_vs_enumeration", check_walk_distribution),
    ("l_lattice_loops", check_lattice),
    ("unitarity_and_dos_sum_rule", check_unitarity_dos),
    ("determinism", check_determinism),
]


def check_rng(seed: int, name: str) -> np.random.Generator:
    """Substream of ``seed`` assigned to the named check."""
    names = [n for n, _ in CHECKS]
    return spawn(seed, len(names))[names.index(name)]


def run_check(name: str, seed: int, scale: float = 1.0) -> CheckResult:
    fn = dict(CHECKS)[name]
    t0 = time.perf_counter()
    res = fn(check_rng(seed, name), scale)
    res.seconds = time.perf_counter() - t0
    return res


def run_checks(seed: int, scale: float = 1.0, only=None, progress=None) -> list[CheckResult]:
    out = []
    for name, _ in CHECKS:
        if only and name not in only:
            continue
        res = run_check(name, seed, scale)
        if progress:
            progress(res)
        out.append(res)
    return out


__all__ = ["CheckResult", "CHECKS", "run_check", "run_checks", "walk_chi_square",
           "random_history", "determinism_fingerprint"]
