import itertools
import json

import numpy as np
import pytest

from classcnet import smatrix as sm
from classcnet.errors import ResourceError
from classcnet.matrixkit import givens_rotation, random_orthogonal, rotation2
from classcnet.trails import omega_value


def path_tree_matrix(a=0.7, b=0.5, c=1.1):
    # three O(2) rotations on planes (1,2), (2,3), (3,4)
    return givens_rotation(4, 3, 4, a) @ givens_rotation(4, 2, 3, b) @ givens_rotation(4, 1, 2, c)


def block_diag(*blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


def test_rotation_terms():
    th = 0.83
    prof = sm.det_expansion_terms(rotation2(th))
    values = sorted(v for _, v in prof.terms)
    assert np.allclose(values, sorted([np.cos(th) ** 2, np.sin(th) ** 2]), atol=1e-14)
    assert prof.uniform == "nonnegative"


def test_zero_free_o3_mixed_and_product(rng):
    for _ in range(200):
        s = random_orthogonal(3, rng)
        prof = sm.det_expansion_terms(s)
        assert prof.uniform == "mixed"
        # product of all six terms is minus the product of squares
        assert np.prod([v for _, v in prof.terms]) == pytest.approx(-np.prod(s ** 2), abs=1e-12)
        assert not sm.weights_nonnegative(s)


def test_block_diag_rotations_uniform():
    s = block_diag(rotation2(0.4), rotation2(2.2))
    assert sm.det_expansion_terms(s).uniform != "mixed"


def test_term_sum_is_det(rng):
    for n in range(1, 7):
        s = random_orthogonal(n, rng)
        assert sm.det_expansion_terms(s).total == pytest.approx(np.linalg.det(s), abs=1e-10)


def test_full_pairing_sum_is_det_squared(rng):
    for n in (2, 3, 4):
        s = random_orthogonal(n, rng)
        full = tuple(range(1, n + 1))
        total = sum(omega_value(s, list(zip(full, img))) for img in itertools.permutations(full))
        assert total == pytest.approx(np.linalg.det(s) ** 2, abs=1e-10)


def test_expansion_size_limit():
    with pytest.raises(ResourceError):
        sm.det_expansion_terms(np.eye(9))
    with pytest.raises(ResourceError):
        sm.complete_reduction(np.eye(7))


def test_n2_always_nonnegative(rng):
    for _ in range(100):
        assert sm.weights_nonnegative(random_orthogonal(2, rng), exhaustive=True)


def test_path_tree_zero_pattern():
    s = path_tree_matrix()
    assert np.allclose([s[0, 2], s[0, 3], s[1, 3]], 0.0, atol=1e-15)
    assert sm.weights_nonnegative(s, exhaustive=True)
    red = sm.reduce_once(s)
    assert red is not None
    t = s[np.ix_(red.row_perm, red.col_perm)]
    assert np.max(np.abs(red.S1 @ red.S2 - t)) <= 1e-9
    assert red.p == red.q + 1


def test_reduce_once_shapes():
    s = path_tree_matrix(0.3, 1.2, 2.0)
    red = sm.reduce_once(s)
    p, q, n = red.p, red.q, 4
    # S1 = diag(s1, 1), S2 = diag(1_q, s2)
    assert np.allclose(red.S1[p:, :p], 0) and np.allclose(red.S1[:p, p:], 0)
    assert np.allclose(red.S1[p:, p:], np.eye(n - p))
    assert np.allclose(red.S2[:q, :q], np.eye(q))
    assert np.allclose(red.S2[:q, q:], 0) and np.allclose(red.S2[q:, :q], 0)


def test_reduce_once_trivial_split():
    s = block_diag(rotation2(0.9), np.eye(1))
    red = sm.reduce_once(s)
    assert red is not None
    t = s[np.ix_(red.row_perm, red.col_perm)]
    assert np.max(np.abs(red.S1 @ red.S2 - t)) <= 1e-9


def test_zero_free_o4_irreducible(rng):
    for _ in range(20):
        s = random_orthogonal(4, rng)
        assert sm.zero_count(s) == 0
        assert sm.reduce_once(s) is None
        assert sm.complete_reduction(s) is None


def test_zero_free_o3_not_completely_reducible(rng):
    for _ in range(20):
        assert sm.complete_reduction(random_orthogonal(3, rng)) is None


def test_complete_reduction_small_inputs():
    tree = sm.complete_reduction(rotation2(0.4))
    assert tree is not None and len(tree.factors) == 1
    assert np.allclose(tree.matrix(), rotation2(0.4))


def test_tree_recovers_generator_planes(rng):
    for _ in range(200):
        n = int(rng.integers(3, 7))
        planes = [(int(rng.integers(0, k)), k) for k in range(1, n)]
        s = np.eye(n)
        for k in rng.permutation(len(planes)):
            a, b = planes[k]
            s = s @ givens_rotation(n, a + 1, b + 1, rng.uniform(0.1, 1.4))
        tree = sm.complete_reduction(s)
        assert tree is not None
        assert np.max(np.abs(tree.matrix() - s)) <= 1e-9
        assert sorted(tuple(sorted(ch)) for ch, _ in tree.factors) == sorted(planes)
        assert np.allclose(tree.residual, np.eye(n))


def test_relabelled_trees_reproduce(rng):
    for _ in range(200):
        n = int(rng.integers(2, 7))
        s = sm.givens_tree_matrix(n, rng, reflect_prob=0.3)
        tree = sm.complete_reduction(s)
        assert tree is not None
        assert np.max(np.abs(tree.matrix() - s)) <= 1e-9
        assert all(np.asarray(b).shape[0] <= 2 for _, b in tree.factors)


def test_sufficiency_over_givens_trees(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        s = sm.givens_tree_matrix(n, rng, reflect_prob=0.3)
        assert sm.complete_reduction(s) is not None
        assert sm.weights_nonnegative(s)


def test_necessity_small_n(rng):
    seen = {3: 0, 4: 0}
    for _ in range(1500):
        n = int(rng.integers(3, 5))
        s = sm.euler_family(n, rng)
        if sm.weights_nonnegative(s, exhaustive=True):
            seen[n] += 1
            assert sm.complete_reduction(s) is not None
    assert seen[3] > 10 and seen[4] > 10


def test_structural_checks():
    # uniform O(3) with one plane switched off
    s3 = givens_rotation(3, 1, 2, 0.6) @ givens_rotation(3, 2, 3, 1.3)
    rep = sm.structural_checks(s3)
    assert rep.uniform and rep.n3_has_zero == "pass" and rep.min_zeros == "pass"
    assert rep.zero_count == 1 and rep.zeros_required == 1

    rep4 = sm.structural_checks(path_tree_matrix())
    assert rep4.uniform and rep4.zero_count >= 3 and rep4.min_zeros == "pass"
    assert rep4.submatrix_rule == "pass"
    assert rep4.n3_has_zero == "vacuous"


def test_structural_vacuous_for_mixed(rng):
    s = random_orthogonal(4, rng)
    rep = sm.structural_checks(s)
    assert not rep.uniform
    assert (rep.n3_has_zero, rep.min_zeros, rep.submatrix_rule) == ("vacuous",) * 3
    assert sm.analyze(s)["weights_nonnegative"] is False


def test_analyze_json_keys():
    doc = json.loads(sm.analyze_json(path_tree_matrix()))
    for key in ("det", "uniform", "zero_count", "reducible", "tree", "schema_version"):
        assert key in doc
    assert doc["reducible"] is True
    assert doc["det"] == pytest.approx(1.0)
    chans = sorted(sorted(f["channels"]) for f in doc["tree"]["factors"])
    assert chans == [[1, 2], [2, 3], [3, 4]]


def test_min_zeros_over_trees(rng):
    # the sparsest trees (paths) keep (N-1)(N-2)/2 zeros, never fewer than the bound
    for _ in range(300):
        n = int(rng.integers(2, 7))
        s = sm.givens_tree_matrix(n, rng)
        rep = sm.structural_checks(s)
        assert rep.uniform and rep.min_zeros == "pass" and rep.submatrix_rule != "fail"
        assert rep.zero_count >= (n - 1) * (n - 2) // 2
