import csv
import io

import numpy as np
import pytest
from scipy import stats

from classcnet import _accel, lattice as lt
from classcnet.errors import ParameterError, StatisticsError
from classcnet.netgraph import build_l_lattice, l_lattice_theta
from classcnet.trails import sample_history_walk


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_plaquettes_at_extreme_p(p):
    s = lt.hull_loop_statistics(12, p, 300, 5)
    assert s.histogram == {4: 300}
    assert np.allclose(s.gyration_radii, 0.5)
    assert s.mean_length_stderr == 0.0


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_backends_identical():
    a = lt.hull_loop_statistics(24, 0.5, 700, 11, use_numba=True)
    b = lt.hull_loop_statistics(24, 0.5, 700, 11, use_numba=False)
    assert np.array_equal(a.lengths, b.lengths)
    assert np.array_equal(a.gyration_radii, b.gyration_radii)


def test_worker_count_irrelevant():
    a = lt.hull_loop_statistics(16, 0.5, 500, 3, workers=1)
    b = lt.hull_loop_statistics(16, 0.5, 500, 3, workers=4)
    assert a.to_csv() == b.to_csv()


def test_bad_walk_count():
    with pytest.raises(ParameterError):
        lt.hull_loop_statistics(8, 0.5, 0, 1)


def test_kernel_matches_history_walk():
    # same L-lattice, two independent samplers of the closed loop through a random edge
    L, p = 4, 0.5
    g = build_l_lattice(L, l_lattice_theta(p))
    rng = np.random.default_rng(8)
    walk_lengths = []
    for _ in range(3000):
        trail, _ = sample_history_walk(g, int(rng.integers(g.n_edges)), rng)
        walk_lengths.append(len(trail.edges))
    kern = lt.hull_loop_statistics(L, p, 3000, 9).lengths
    values = sorted(set(walk_lengths) | set(kern.tolist()))
    a = np.array([walk_lengths.count(v) for v in values])
    b = np.array([np.sum(kern == v) for v in values])
    res = stats.chi2_contingency(np.vstack([a, b]))
    assert res.pvalue > 0.001


@pytest.mark.parametrize("theta", [np.pi / 4, 0.37])
def test_weight_equivalence(theta):
    rep = lt.weight_equivalence_check(theta, random_source=4)
    assert rep.ok
    assert rep.max_rule_error <= 1e-12
    assert rep.walk_error is not None and rep.walk_error <= 1e-12
    assert rep.p == pytest.approx(np.sin(theta) ** 2)


def test_critical_tail_heavier():
    crit = lt.hull_loop_statistics(32, 0.5, 3000, 21)
    off = lt.hull_loop_statistics(32, 0.4, 3000, 22)
    fc, sc = crit.tail_mass(100)
    fo, so = off.tail_mass(100)
    assert fc - fo > 3 * np.hypot(sc, so)
    assert crit.mean_length > off.mean_length


def test_stderr_scales_as_root_n():
    a = lt.hull_loop_statistics(32, 0.4, 4000, 31)
    b = lt.hull_loop_statistics(32, 0.4, 8000, 32)
    assert a.mean_length_stderr / b.mean_length_stderr == pytest.approx(np.sqrt(2), rel=0.3)


def test_off_critical_slope_below_hull_value():
    s = lt.hull_loop_statistics(64, 0.3, 20000, 41)
    fit = lt.fit_hull_dimension(s, 2.0, 8.0)
    assert fit.slope + 3 * fit.stderr < 1.75


def test_fit_needs_loops():
    s = lt.hull_loop_statistics(8, 0.0, 50, 1)
    with pytest.raises(StatisticsError):
        lt.fit_hull_dimension(s, 4.0, 8.0)


def test_loop_csv():
    s = lt.hull_loop_statistics(8, 0.5, 20, 2)
    rows = list(csv.reader(io.StringIO(s.to_csv())))
    assert rows[0] == ["loop_id", "length", "radius"]
    assert len(rows) == 21
    assert [int(r[1]) for r in rows[1:]] == s.lengths.tolist()


def test_scan_deterministic_at_p0():
    (row,) = lt.conductance_vs_p_scan(2, [0.0], 200, 5)
    assert row.classical_method == "enumeration"
    assert row.agrees
    assert row.err_q == pytest.approx(0.0, abs=1e-12)


def test_scan_agreement_and_contrast():
    rows = lt.conductance_vs_p_scan(4, [0.1, 0.5], 4000, 6)
    assert all(r.agrees for r in rows)
    assert rows[1].g_classical > rows[0].g_classical
    text = lt.scan_csv(rows)
    assert text.splitlines()[0] == "p,g_quantum,err_q,g_classical,err_c,classical_method"


def test_scan_falls_back_to_walks():
    rows = lt.conductance_vs_p_scan(4, [0.5], 10, 7, ceiling=5, quantum=False, n_walks=3000)
    assert rows[0].classical_method == "walk"
    exact = lt.conductance_vs_p_scan(4, [0.5], 10, 7, quantum=False)[0].g_classical
    assert abs(rows[0].g_classical - exact) <= 3 * rows[0].err_c + 1e-9


def test_env_flag_selects_numpy():
    import os
    import subprocess
    import sys
    env = {**os.environ, "CLASSCNET_NUMBA": "0"}
    out = subprocess.run([sys.executable, "-c", "from classcnet import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
