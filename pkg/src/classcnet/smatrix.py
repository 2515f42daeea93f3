"""Sign structure and reducibility of node S-matrices.

A matrix is *reducible* when, after relabelling rows and columns, it
factorises as ``S1 @ S2`` with ``S1 = diag(s1, 1)`` (``s1`` of size p) and
``S2 = diag(1, s2)`` (``1`` of size q, ``p > q``).  Such a factorisation exists
exactly when some block ``S[C, A]`` vanishes with ``|C| = N - p`` and
``|A| = q``.  We only accept splits with ``p = q + 1``, i.e. the two factors
share a single internal line, so that iterating the split builds a tree of
2x2 nodes.
"""
from __future__ import annotations

import dataclasses
import itertools
import json

import numpy as np

from . import config
from .errors import ResourceError
from .matrixkit import givens_rotation, minor_det, permutation_sign, subsets
from .trails import omega_value

MAX_EXPANSION_N = 8
MAX_REDUCTION_N = 6


@dataclasses.dataclass(frozen=True)
class SignProfile:
    terms: tuple          # (permutation as tuple of row indices per column, value)
    uniform: str          # "nonnegative", "nonpositive" or "mixed"

    @property
    def total(self) -> float:
        return float(sum(v for _, v in self.terms))


def det_expansion_terms(s) -> SignProfile:
    """All N! signed terms sign(p) prod_j S[p(j), j] of det S.

    Terms with magnitude at most the vanishing tolerance are ignored when
    classifying the sign pattern.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if n > MAX_EXPANSION_N:
        raise ResourceError(f"N={n} too large for a full determinant expansion")
    zero = config.tol("vanishing")
    terms = []
    pos = neg = False
    for perm in itertools.permutations(range(n)):
        v = float(permutation_sign(perm)) * float(np.prod(s[list(perm), range(n)]))
        terms.append((perm, v))
        if v > zero:
            pos = True
        elif v < -zero:
            neg = True
    uniform = "mixed" if pos and neg else ("nonpositive" if neg else "nonnegative")
    return SignProfile(tuple(terms), uniform)


def weights_nonnegative(s, exhaustive: bool = False) -> bool:
    """True when every node weight Omega(I, J) of ``s`` is non-negative.

    Decided from the sign pattern of the determinant expansion; with
    ``exhaustive`` (N <= 5) every subset pair and pairing is also checked.
    """
    ok = det_expansion_terms(s).uniform != "mixed"
    if exhaustive:
        ok_direct = min_node_weight(s) >= -config.tol("vanishing")
        if ok != ok_direct:
            raise AssertionError(f"sign-pattern test ({ok}) disagrees with exhaustive weights ({ok_direct})")
    return ok


def min_node_weight(s) -> float:
    """Smallest Omega over every history (all subset pairs, all pairings)."""
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if n > 5:
        raise ResourceError("exhaustive weight check is limited to N <= 5")
    best = 1.0
    for k in range(1, n + 1):
        for cols in subsets(n, k):
            for rows in subsets(n, k):
                for image in itertools.permutations(rows):
                    best = min(best, omega_value(s, list(zip(cols, image))))
    return best


def zero_count(s) -> int:
    return int(np.sum(np.abs(np.asarray(s)) <= config.tol("vanishing")))


# -- reducibility ---------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Reduction:
    p: int
    q: int
    row_perm: tuple       # 0-based: row k of the relabelled matrix is row row_perm[k] of S
    col_perm: tuple
    S1: np.ndarray        # in relabelled coordinates: S[row_perm][:, col_perm] = S1 @ S2
    S2: np.ndarray


def _zero_blocks(s):
    """(C, A) row/column sets with S[C, A] = 0 and |C| + |A| = N - 1.

    Blocks with A disjoint from C come first: they split without relabelling
    (rows and columns keep a common order), so the residual stays trivial.
    """
    n = s.shape[0]
    zero = config.tol("vanishing")
    aligned, other = [], []
    for r in range(1, n - 1):
        c = n - 1 - r
        for rows in itertools.combinations(range(n), r):
            for cols in itertools.combinations(range(n), c):
                if np.all(np.abs(s[np.ix_(rows, cols)]) <= zero):
                    (other if set(rows) & set(cols) else aligned).append((rows, cols))
    yield from aligned
    yield from other


def _split(s, rows_c, cols_a) -> Reduction:
    n = s.shape[0]
    q = len(cols_a)
    p = n - len(rows_c)
    rows_d = [k for k in range(n) if k not in rows_c]
    if not set(rows_c) & set(cols_a):
        # A inside D: one common order (A, D \ A, C) for rows and columns
        order = tuple(cols_a) + tuple(k for k in rows_d if k not in cols_a) + tuple(rows_c)
        row_perm = col_perm = order
    else:
        cols_rest = [k for k in range(n) if k not in cols_a]
        row_perm = tuple(rows_d) + tuple(rows_c)
        col_perm = tuple(cols_a) + tuple(cols_rest)
    t = s[np.ix_(row_perm, col_perm)]
    # first q columns live in the first p rows; complete them to a basis of R^p
    head = t[:p, :q]
    full, _ = np.linalg.qr(np.hstack([head, np.eye(p)]), mode="complete")
    basis = full[:, :p].copy()
    basis[:, :q] = head
    basis[:, q:] = _orthonormal_complement(head, p)
    s1 = np.eye(n)
    s1[:p, :p] = basis
    s2 = s1.T @ t
    s2[:q, :] = 0.0
    s2[:, :q] = 0.0
    s2[:q, :q] = np.eye(q)
    return Reduction(p, q, row_perm, col_perm, s1, s2)


def _orthonormal_complement(head, p):
    q = head.shape[1]
    proj = np.eye(p) - head @ head.T
    u, sv, _ = np.linalg.svd(proj)
    return u[:, : p - q]


def reduce_once(s):
    """First valid single-line split of ``s``, or ``None`` if irreducible.

    The factorisation is checked against the factorisation tolerance.
    """
    s = np.asarray(s, dtype=float)
    if s.shape[0] < 3:
        return None
    for rows_c, cols_a in _zero_blocks(s):
        red = _split(s, rows_c, cols_a)
        t = s[np.ix_(red.row_perm, red.col_perm)]
        if np.max(np.abs(red.S1 @ red.S2 - t)) <= config.tol("factorization"):
            return red
    return None


@dataclasses.dataclass
class ReductionTree:
    """S = factor_1 @ factor_2 @ ... @ residual.

    Each factor is ``(channels, block)``: the identity except ``block`` on the
    0-based ``channels``.  ``residual`` is a permutation matrix.
    """
    factors: list
    residual: np.ndarray

    def matrix(self) -> np.ndarray:
        n = self.residual.shape[0]
        out = np.eye(n)
        for channels, block in self.factors:
            out = out @ embed(block, channels, n)
        return out @ self.residual

    def to_json(self):
        return {
            "factors": [{"channels": [c + 1 for c in ch], "block": np.asarray(b).tolist()}
                        for ch, b in self.factors],
            "residual_perm": [int(np.argmax(self.residual[:, k])) + 1 for k in range(self.residual.shape[0])],
        }


def embed(block, channels, n) -> np.ndarray:
    out = np.eye(n)
    out[np.ix_(channels, channels)] = block
    return out


def _perm_matrix(perm) -> np.ndarray:
    """P with P[perm[k], k] = 1, i.e. P e_k = e_perm[k]."""
    n = len(perm)
    out = np.zeros((n, n))
    out[list(perm), range(n)] = 1.0
    return out


def _reduce_tree(s):
    """List of (channels, block) and residual permutation array, or None."""
    n = s.shape[0]
    if n <= 2:
        return [(tuple(range(n)), s.copy())], tuple(range(n))
    for rows_c, cols_a in _zero_blocks(s):
        red = _split(s, rows_c, cols_a)
        t = s[np.ix_(red.row_perm, red.col_perm)]
        if np.max(np.abs(red.S1 @ red.S2 - t)) > config.tol("factorization"):
            continue
        p, q = red.p, red.q
        left = _reduce_tree(red.S1[:p, :p])
        if left is None:
            continue
        right = _reduce_tree(red.S2[q:, q:])
        if right is None:
            continue
        # relabelled: t = diag(L, 1) diag(Rl, 1) diag(1, M) diag(1, Rr)
        lf, lperm = left
        rf, rperm = right
        factors = [(tuple(ch), b) for ch, b in lf]
        perm_l = list(lperm) + list(range(p, n))     # diag(Rl, 1)
        for ch, b in rf:
            shifted = tuple(c + q for c in ch)
            factors.append((tuple(perm_l[c] for c in shifted), b))
        # residual diag(Rl,1) diag(1,Rr) as a permutation array
        perm_r = list(range(q)) + [q + k for k in rperm]
        combined = [perm_l[perm_r[k]] for k in range(n)]
        # undo the relabelling: S = Prow t Pcol^T with Prow e_k = e_row_perm[k]
        row_perm, col_perm = red.row_perm, red.col_perm
        factors = [(tuple(row_perm[c] for c in ch), b) for ch, b in factors]
        # residual: Prow @ R @ Pcol^T
        inv_col = [0] * n
        for k, c in enumerate(col_perm):
            inv_col[c] = k
        total = [row_perm[combined[inv_col[k]]] for k in range(n)]
        return factors, tuple(total)
    return None


def complete_reduction(s):
    """Tree of 2x2 (or 1x1) orthogonal factors reproducing ``s``, or ``None``."""
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if n > MAX_REDUCTION_N:
        raise ResourceError(f"complete reduction is limited to N <= {MAX_REDUCTION_N}")
    found = _reduce_tree(s)
    if found is None:
        return None
    factors, perm = found
    tree = ReductionTree([(tuple(int(c) for c in ch), np.asarray(b)) for ch, b in factors], _perm_matrix(perm))
    if np.max(np.abs(tree.matrix() - s)) > config.tol("factorization"):
        return None
    return tree


# -- zero-pattern conditions -----------------------------------------------------------------


@dataclasses.dataclass
class StructuralReport:
    uniform: bool
    zero_count: int
    n3_has_zero: str          # "pass", "fail" or "vacuous"
    min_zeros: str
    submatrix_rule: str
    zeros_required: int
    witnesses: list

    def as_dict(self):
        return dataclasses.asdict(self)


def structural_checks(s) -> StructuralReport:
    """Necessary zero-pattern conditions for uniform-sign S-matrices.

    (a) N = 3 needs at least one vanishing entry; (b) N >= 4 needs at least
    N - 1 (N = 3 needs one, N = 2 none: a plain rotation is uniform); (c) every 3x3 submatrix has a vanishing entry or every term of
    its complementary minor vanishes.  For mixed-sign matrices the items are
    reported as vacuous.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if n > MAX_EXPANSION_N:
        raise ResourceError(f"N={n} too large")
    uniform = det_expansion_terms(s).uniform != "mixed"
    zeros = zero_count(s)
    zero = config.tol("vanishing")
    witnesses = []
    if not uniform:
        return StructuralReport(False, zeros, "vacuous", "vacuous", "vacuous", 0, [])
    a = ("pass" if zeros >= 1 else "fail") if n == 3 else "vacuous"
    need = min_zeros_required(n)
    b = "pass" if zeros >= need else "fail"
    c = "pass"
    if n >= 3:
        for rows in itertools.combinations(range(n), 3):
            for cols in itertools.combinations(range(n), 3):
                sub = s[np.ix_(rows, cols)]
                if np.any(np.abs(sub) <= zero):
                    continue
                rest_r = [k for k in range(n) if k not in rows]
                rest_c = [k for k in range(n) if k not in cols]
                comp = s[np.ix_(rest_r, rest_c)]
                if rest_r and all(abs(v) <= zero for _, v in det_expansion_terms(comp).terms):
                    continue
                c = "fail"
                witnesses.append({"rows": [r + 1 for r in rows], "cols": [k + 1 for k in cols]})
    else:
        c = "vacuous"
    return StructuralReport(True, zeros, a, b, c, need, witnesses)


def min_zeros_required(n: int) -> int:
    return 0 if n <= 2 else (1 if n == 3 else n - 1)


def analyze(s) -> dict:
    """Analyzer report: det, uniform, zero_count, reducible, tree."""
    s = np.asarray(s, dtype=float)
    prof = det_expansion_terms(s)
    tree = complete_reduction(s) if s.shape[0] <= MAX_REDUCTION_N else None
    return {
        "schema_version": 1,
        "det": float(np.linalg.det(s)),
        "uniform": prof.uniform,
        "weights_nonnegative": prof.uniform != "mixed",
        "zero_count": zero_count(s),
        "reducible": tree is not None,
        "tree": tree.to_json() if tree is not None else None,
        "structural": structural_checks(s).as_dict(),
    }


def analyze_json(s) -> str:
    return json.dumps(analyze(s), indent=1, sort_keys=True)


# -- generators used by the positivity suite ----------------------------------------------


def givens_tree_matrix(n: int, rng, reflect_prob: float = 0.0, relabel: bool = True) -> np.ndarray:
    """Product of Givens factors over the edges of a random tree on n channels."""
    edges = []
    for k in range(1, n):
        edges.append((int(rng.integers(0, k)), k))
    order = rng.permutation(len(edges))
    out = np.eye(n)
    for k in order:
        a, b = sorted(edges[k])
        theta = rng.uniform(0, 2 * np.pi)
        out = out @ givens_rotation(n, a + 1, b + 1, theta, reflect=bool(rng.random() < reflect_prob))
    if relabel:
        out = out[rng.permutation(n)][:, rng.permutation(n)]
    return out


def euler_family(n: int, rng, special_prob: float = 0.4) -> np.ndarray:
    """Product of Givens factors over every plane, some angles pinned to 0 or pi/2."""
    out = np.eye(n)
    planes = list(itertools.combinations(range(1, n + 1), 2))
    for k in rng.permutation(len(planes)):
        i, j = planes[k]
        r = rng.random()
        if r < special_prob / 2:
            theta = 0.0
        elif r < special_prob:
            theta = np.pi / 2
        else:
            theta = rng.uniform(0, 2 * np.pi)
        g = givens_rotation(n, i, j, theta)
        if theta == np.pi / 2:
            g[np.abs(g) < 1e-15] = 0.0
        out = out @ g
    out[np.abs(out) < 1e-15] = 0.0
    signs = rng.choice([-1.0, 1.0], size=n)
    return (out * signs)[rng.permutation(n)]


__all__ = [
    "SignProfile", "det_expansion_terms", "weights_nonnegative", "min_node_weight",
    "reduce_once", "complete_reduction", "ReductionTree", "structural_checks",
    "analyze", "analyze_json", "givens_tree_matrix", "euler_family", "zero_count", "minor_det",
]
