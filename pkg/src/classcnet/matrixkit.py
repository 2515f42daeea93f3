"""Small dense matrices: SU(2) elements, O(N) matrices, minors and Givens factors.

Channel subsets are 1-based, matching the way node channels are labelled in
graph documents.
"""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from . import config
from ._random import as_generator
from .errors import ParameterError

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
IDENTITY2 = np.eye(2, dtype=complex)


# -- validity checks ---------------------------------------------------------


def is_su2(u, tol=None) -> bool:
    tol = config.tol("su2") if tol is None else tol
    u = np.asarray(u)
    if u.shape != (2, 2):
        return False
    unitary = np.max(np.abs(u.conj().T @ u - IDENTITY2)) <= tol
    return bool(unitary and abs(np.linalg.det(u) - 1.0) <= tol)


def is_orthogonal(s, tol=None) -> bool:
    tol = config.tol("orthogonal") if tol is None else tol
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or np.iscomplexobj(s):
        return False
    n = s.shape[0]
    if np.max(np.abs(s.T @ s - np.eye(n)), initial=0.0) > tol:
        return False
    return bool(abs(abs(np.linalg.det(s)) - 1.0) <= tol)


def check_subset(subset, n: int) -> tuple[int, ...]:
    """Validate a 1-based strictly ascending channel subset."""
    out = tuple(int(k) for k in subset)
    for a, b in zip(out, out[1:]):
        if b <= a:
            raise ParameterError(f"subset {out} is not strictly ascending")
    if out and (out[0] < 1 or out[-1] > n):
        raise ParameterError(f"subset {out} outside 1..{n}")
    return out


def complement(subset: Sequence[int], n: int) -> tuple[int, ...]:
    taken = set(subset)
    return tuple(k for k in range(1, n + 1) if k not in taken)


def permutation_sign(perm: Sequence[int]) -> int:
    """Signature of a permutation given as a sequence of distinct sortables."""
    perm = list(perm)
    sign = 1
    for a in range(len(perm)):
        for b in range(a + 1, len(perm)):
            if perm[a] > perm[b]:
                sign = -sign
    return sign


# -- SU(2) -------------------------------------------------------------------


def su2_from_axis_angle(alpha, n):
    """cos(alpha) + i sin(alpha) n.sigma, broadcasting over leading axes."""
    alpha = np.asarray(alpha, dtype=float)
    n = np.asarray(n, dtype=float)
    c = np.cos(alpha)[..., None, None]
    s = np.sin(alpha)[..., None, None]
    nsig = np.einsum("...k,kab->...ab", n, SIGMA)
    return c * IDENTITY2 + 1j * s * nsig


_ALPHA_GRID = np.linspace(0.0, np.pi, 4097)
_CDF_GRID = (2.0 * _ALPHA_GRID - np.sin(2.0 * _ALPHA_GRID)) / (2.0 * np.pi)


def _haar_angle_inverse_cdf(u):
    """Invert F(a) = (2a - sin 2a) / (2 pi), the CDF of (2/pi) sin^2 a on [0, pi].

    Table lookup followed by Newton polishing; F' = (2/pi) sin^2 a.
    """
    u = np.asarray(u, dtype=float)
    a = np.interp(u, _CDF_GRID, _ALPHA_GRID)
    # F is cubic at both ends: F(a) ~ 2 a^3 / (3 pi)
    lo = u < _CDF_GRID[1]
    hi = u > _CDF_GRID[-2]
    a = np.where(lo, np.cbrt(1.5 * np.pi * u), a)
    a = np.where(hi, np.pi - np.cbrt(1.5 * np.pi * (1.0 - u)), a)
    target = 2.0 * np.pi * u
    for _ in range(4):
        f = 2.0 * a - np.sin(2.0 * a) - target
        df = 4.0 * np.sin(a) ** 2
        step = np.divide(f, df, out=np.zeros_like(f), where=df > 1e-300)
        a = np.clip(a - step, 0.0, np.pi)
    return a


def haar_sample(random_source, size=None) -> np.ndarray:
    """Haar-random SU(2) matrices.

    Uses U = cos a + i sin a n.sigma with the rotation angle ``a`` drawn
    from the density (2/pi) sin^2 a on [0, pi] and ``n`` uniform on the
    sphere.  Returns shape (2, 2) when ``size`` is None, else
    ``(*size, 2, 2)``.
    """
    rng = as_generator(random_source)
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    alpha = _haar_angle_inverse_cdf(rng.random(shape))
    n = rng.standard_normal(shape + (3,))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return su2_from_axis_angle(alpha, n)


def su2_scalar_decompose(g, tol=None):
    """Write ``g`` as ``lam * u`` with ``lam >= 0`` and ``u`` in SU(2).

    Returns ``(lam, u)``, or ``None`` when ``g`` is not a real multiple of an
    SU(2) matrix.  The zero matrix gives ``(0.0, identity)``.
    """
    tol = config.tol("decompose") if tol is None else tol
    g = np.asarray(g, dtype=complex)
    if g.shape != (2, 2):
        raise ParameterError("expected a 2x2 matrix")
    scale = max(1.0, float(np.max(np.abs(g))))
    a, b = g[0, 0], g[0, 1]
    if abs(g[1, 1] - np.conj(a)) > tol * scale or abs(g[1, 0] + np.conj(b)) > tol * scale:
        return None
    lam = float(np.sqrt(abs(a) ** 2 + abs(b) ** 2))
    if lam <= tol * scale:
        if np.max(np.abs(g)) > tol * scale:
            return None
        return 0.0, IDENTITY2.copy()
    u = g / lam
    if not is_su2(u, tol=tol * scale / lam + config.tol("su2")):
        return None
    return lam, u


def haar_integral_probe(b_left, b_right, z, n_samples: int, random_source,
                        return_stderr: bool = False, chunk: int = 200_000):
    """Monte Carlo estimate of the Haar average of exp(z b_L^dag U b_R)."""
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    bl = np.asarray(b_left, dtype=complex)
    br = np.asarray(b_right, dtype=complex)
    rng = as_generator(random_source)
    total = 0.0 + 0.0j
    sq_re = 0.0
    sq_im = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        u = haar_sample(rng, m)
        x = np.exp(z * np.einsum("a,mab,b->m", bl.conj(), u, br))
        total += x.sum()
        sq_re += float(np.sum(x.real ** 2))
        sq_im += float(np.sum(x.imag ** 2))
        done += m
    mean = total / n_samples
    if not return_stderr:
        return complex(mean)
    if n_samples < 2:
        return complex(mean), float("inf")
    var_re = (sq_re - n_samples * mean.real ** 2) / (n_samples - 1)
    var_im = (sq_im - n_samples * mean.imag ** 2) / (n_samples - 1)
    stderr = complex(np.sqrt(max(var_re, 0.0) / n_samples), np.sqrt(max(var_im, 0.0) / n_samples))
    return complex(mean), stderr


# -- O(N) --------------------------------------------------------------------


def random_orthogonal(n: int, random_source, proper=None) -> np.ndarray:
    """Haar-random element of O(n) (or SO(n) when ``proper`` is True)."""
    rng = as_generator(random_source)
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if proper is not None:
        want = 1.0 if proper else -1.0
        if np.sign(np.linalg.det(q)) != want:
            q[:, 0] = -q[:, 0]
    return q


def givens_rotation(n: int, i: int, j: int, theta: float, reflect: bool = False) -> np.ndarray:
    """Identity except the (i, j) block, channels 1-based.

    The block is ((c, s), (-s, c)) for a rotation and ((c, s), (s, -c)) for a
    reflection.
    """
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise ParameterError(f"bad Givens plane ({i}, {j}) for N={n}")
    if i > j:
        raise ParameterError("Givens plane must have i < j")
    g = np.eye(n)
    c, s = np.cos(theta), np.sin(theta)
    a, b = i - 1, j - 1
    g[a, a] = c
    g[a, b] = s
    if reflect:
        g[b, a] = s
        g[b, b] = -c
    else:
        g[b, a] = -s
        g[b, b] = c
    return g


def rotation2(theta: float) -> np.ndarray:
    return givens_rotation(2, 1, 2, theta)


def minor_det(s, rows: Sequence[int], cols: Sequence[int]) -> float:
    """Determinant of ``s`` restricted to 1-based ascending ``rows`` x ``cols``."""
    s = np.asarray(s)
    if len(rows) != len(cols):
        raise ParameterError(f"minor size mismatch: {len(rows)} rows vs {len(cols)} cols")
    rows = check_subset(rows, s.shape[0])
    cols = check_subset(cols, s.shape[1])
    if not rows:
        return 1.0
    sub = s[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])]
    if len(rows) == 1:
        return float(sub[0, 0])
    if len(rows) == 2:
        return float(sub[0, 0] * sub[1, 1] - sub[0, 1] * sub[1, 0])
    return float(np.linalg.det(sub))


def jacobi_complement_check(s, rows, cols) -> tuple[float, float]:
    """Both sides of the signed complementary-minor identity for O(N).

    lhs = det S[I, J];  rhs = (-1)^(sum I + sum J) det S det S[I', J'] where
    the primes denote ascending complements.
    """
    s = np.asarray(s)
    n = s.shape[0]
    if len(rows) != len(cols):
        raise ParameterError("minor size mismatch")
    rows = check_subset(rows, n)
    cols = check_subset(cols, n)
    lhs = minor_det(s, rows, cols)
    sign = -1.0 if (sum(rows) + sum(cols)) % 2 else 1.0
    rhs = sign * float(np.linalg.det(s)) * minor_det(s, complement(rows, n), complement(cols, n))
    return lhs, rhs


def subsets(n: int, k: int):
    """All 1-based ascending subsets of size k."""
    return itertools.combinations(range(1, n + 1), k)
