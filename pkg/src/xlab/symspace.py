"""The symmetric space X = SL(3,R)/SO(3).

Points of X are stored as positive-definite symmetric matrices of
determinant one (``x = g g^T`` for the coset ``gK``); the basepoint ``o`` is
the identity. Distances use the plain Euclidean norm of the Cartan
projection, so that ``d(o, exp(u) o) = |u|`` for ``u`` in the Cartan
subalgebra of traceless diagonal matrices.
"""

import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateFlagError, ValidationError
from .mat3 import as_mat3, logm_spd, svd3, sym_eig

DET_TOL = 1e-9
SYM_TOL = 1e-10
CARTAN_TOL = 1e-10
FLAG_GAP = 2.0
FLAG_TOL = 1e-8
BUSEMANN_T = 40.0
GAP_GROWTH = 1.0
UNIFORM_FLOOR = 0.05
BOUNDED_GROWTH = 1.0
MIN_SAMPLES = 8

ORIGIN = np.eye(3)


class CartanFactors(NamedTuple):
    k_left: np.ndarray
    mu: np.ndarray
    k_right: np.ndarray


class Flag(NamedTuple):
    """Incident pair: unit vector ``p`` (point) and unit covector ``l`` (line)."""

    p: np.ndarray
    l: np.ndarray


class RaySpec(NamedTuple):
    base: np.ndarray
    direction: np.ndarray


class RelativePosition(NamedTuple):
    level: int
    tag: Optional[str]
    boundary_distance: float
    unstable: bool


class BusemannValue(NamedTuple):
    raw: float
    extrapolated: float


# ---------------------------------------------------------------- validation


def group_elt(m, tol=DET_TOL) -> np.ndarray:
    """Validate a determinant-one matrix.

    The determinant test is relative to the Hadamard bound (product of row
    norms), which is the natural size of its rounding error.
    """
    g = as_mat3(m)
    det = np.linalg.det(g)
    scale = max(1.0, float(np.prod(np.linalg.norm(g, axis=1))))
    if abs(det - 1.0) > tol * scale:
        raise ValidationError(f"determinant {det!r} is not 1")
    return g


def sym_point(m, tol=SYM_TOL) -> np.ndarray:
    """Validate a point of X (symmetric, positive-definite, det 1)."""
    x = as_mat3(m)
    scale = max(1.0, float(np.max(np.abs(x))))
    if np.max(np.abs(x - x.T)) > tol * scale:
        raise ValidationError("point of X must be symmetric")
    x = 0.5 * (x + x.T)
    w = sym_eig(x).values
    if w[-1] <= 0:
        raise ValidationError("point of X must be positive definite")
    if abs(np.prod(w) - 1.0) > DET_TOL * max(1.0, w[0] ** 3):
        raise ValidationError("point of X must have determinant 1")
    return x


def point_of(g) -> np.ndarray:
    """The point ``g o = g g^T``."""
    g = np.asarray(g, dtype=float)
    return g @ g.T


def act(g, x) -> np.ndarray:
    """Isometric action ``g . x = g x g^T``."""
    g = np.asarray(g, dtype=float)
    return g @ x @ g.T


def sqrtm_spd(x) -> np.ndarray:
    w, V = sym_eig(x)
    return (V * np.sqrt(w)) @ V.T


def inv_sqrtm_spd(x) -> np.ndarray:
    w, V = sym_eig(x)
    return (V / np.sqrt(w)) @ V.T


# ---------------------------------------------------------------- Cartan


def cartan(g) -> CartanFactors:
    """Cartan decomposition ``g = k_left exp(diag(mu)) k_right``.

    ``mu`` is the descending vector of log singular values. Both extreme
    singular values are computed accurately even for very elongated
    ``g``; the middle one follows from ``det g = 1``.
    """
    g = as_mat3(g)
    U, s, V = svd3(g, det=1.0)
    mu = np.log(s)
    mu = mu - mu.sum() / 3.0
    return CartanFactors(U, mu, V.T)


def mu(g) -> np.ndarray:
    return cartan(g).mu


def alpha_gaps(g) -> np.ndarray:
    """Simple-root values ``(u1 - u2, u2 - u3)`` of the Cartan projection."""
    u = mu(g)
    return np.array([u[0] - u[1], u[1] - u[2]])


def distance(x, y) -> float:
    """Invariant distance between two points of X.

    Computed as the norm of ``mu(x^{-1/2} y^{1/2})``.
    """
    m = inv_sqrtm_spd(x) @ sqrtm_spd(y)
    return float(np.linalg.norm(mu(m)))


def distance_elt(g, h) -> float:
    """``d(g o, h o)`` straight from group elements (no squaring of ``g``)."""
    m = np.linalg.solve(np.asarray(g, float), np.asarray(h, float))
    return float(np.linalg.norm(mu(m)))


# ---------------------------------------------------------------- batch paths
# vectorized LAPACK routes for bulk work; the scalar functions above are the
# reference implementations they are tested against


# rounding can push the smallest eigenvalue of a very far pair below zero;
# clamping keeps such distances large and finite
_TINY = np.finfo(float).tiny


def mu_batch(G) -> np.ndarray:
    """Cartan projections of a stack of matrices, shape (N, 3)."""
    s = np.linalg.svd(np.asarray(G, dtype=float), compute_uv=False)
    m = np.log(s)
    return m - m.mean(axis=-1, keepdims=True)


def distance_batch(x, Y) -> np.ndarray:
    """Distances from one point ``x`` to a stack of points ``Y``."""
    w, V = np.linalg.eigh(np.asarray(x, dtype=float))
    r = (V / np.sqrt(w)) @ V.T
    M = r @ np.asarray(Y, dtype=float) @ r
    lam = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    return 0.5 * np.linalg.norm(np.log(np.maximum(lam, _TINY)), axis=-1)


def pairwise_distance_batch(X, Y) -> np.ndarray:
    """Distances ``d(X[i], Y[i])`` for two aligned stacks."""
    w, V = np.linalg.eigh(np.asarray(X, dtype=float))
    r = (V / np.sqrt(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    M = r @ np.asarray(Y, dtype=float) @ r
    lam = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    return 0.5 * np.linalg.norm(np.log(np.maximum(lam, _TINY)), axis=-1)


def distance_to_origin_batch(X) -> np.ndarray:
    lam = np.linalg.eigvalsh(np.asarray(X, dtype=float))
    return 0.5 * np.linalg.norm(np.log(lam), axis=-1)


# ---------------------------------------------------------------- regularity


class DivergenceReport(NamedTuple):
    label: str
    gap_slopes: np.ndarray
    norm_slope: float
    floor: float


def divergence_report(
    samples: Sequence,
    params: Optional[Sequence[float]] = None,
    gap_growth: float = GAP_GROWTH,
    uniform_floor: float = UNIFORM_FLOOR,
    bounded_growth: float = BOUNDED_GROWTH,
) -> DivergenceReport:
    """Finite-sample regularity diagnostics for a sequence ``g_n``.

    Growth rates are least-squares slopes against ``log2(n)`` over the second
    half of the samples, i.e. growth per doubling of the index. The
    uniformity floor is the constant term ``f`` of a least-squares fit
    ``min_i alpha_i / |mu| ~ f + c n^{-1/2}`` on the same range.
    """
    if len(samples) < MIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_SAMPLES} samples, got {len(samples)}")
    n = np.arange(1, len(samples) + 1, dtype=float) if params is None else np.asarray(params, float)
    if np.any(n <= 0) or np.any(np.diff(n) <= 0):
        raise ValidationError("sample parameters must be positive and increasing")
    mus = np.array([mu(g) for g in samples])
    gaps = np.column_stack([mus[:, 0] - mus[:, 1], mus[:, 1] - mus[:, 2]])
    norms = np.linalg.norm(mus, axis=1)
    half = len(samples) // 2
    ln = np.log2(n[half:])
    A = np.column_stack([ln, np.ones_like(ln)])
    norm_slope = float(np.linalg.lstsq(A, norms[half:], rcond=None)[0][0])
    gap_slopes = np.linalg.lstsq(A, gaps[half:], rcond=None)[0][0]
    ratio = gaps[half:].min(axis=1) / np.maximum(norms[half:], 1e-300)
    B = np.column_stack([np.ones_like(ln), n[half:] ** -0.5])
    floor = float(np.linalg.lstsq(B, ratio, rcond=None)[0][0])
    if norm_slope < bounded_growth:
        label = "bounded"
    elif np.all(gap_slopes >= gap_growth):
        label = "uniformly_regular" if floor >= uniform_floor else "regular"
    else:
        label = "irregular"
    return DivergenceReport(label, gap_slopes, norm_slope, floor)


def classify_divergence(samples, params=None, **thresholds) -> str:
    """Label a sampled sequence as bounded, regular, uniformly_regular or irregular.

    ``uniformly_regular`` implies regular; ``regular`` is returned only when
    the uniformity test fails.
    """
    return divergence_report(samples, params, **thresholds).label


# ---------------------------------------------------------------- flags


def flag_of(g, gap_threshold: float = FLAG_GAP) -> Flag:
    """Attracting flag ``(k e1, k (e1 ^ e2))`` of the Cartan factor ``k = k_left``."""
    cf = cartan(g)
    gaps = np.array([cf.mu[0] - cf.mu[1], cf.mu[1] - cf.mu[2]])
    if np.any(gaps < gap_threshold):
        raise DegenerateFlagError(f"Cartan gaps {gaps} below threshold {gap_threshold}")
    return Flag(cf.k_left[:, 0].copy(), cf.k_left[:, 2].copy())


def flag_from_point_line(p, l) -> Flag:
    p = np.asarray(p, float)
    l = np.asarray(l, float)
    p = p / np.linalg.norm(p)
    l = l / np.linalg.norm(l)
    if abs(l @ p) > 1e-10:
        raise ValidationError("point does not lie on line")
    return Flag(p, l)


def projective_distance(u, v) -> float:
    """Sine of the angle between two lines through the origin."""
    u = np.asarray(u, float) / np.linalg.norm(u)
    v = np.asarray(v, float) / np.linalg.norm(v)
    return float(np.linalg.norm(np.cross(u, v)))


def relative_position(f: Flag, g: Flag, tau: float = FLAG_TOL) -> RelativePosition:
    """Schubert cell of the pair ``(f, g)`` in the flag variety.

    Levels: 0 when the flags agree; 1 when only the points (tag
    ``"point-type"``) or only the lines (``"line-type"``) agree; 2 when one
    point lies on the other line (``"point-type"`` if ``f.p`` lies on
    ``g.l``, ``"line-type"`` if ``g.p`` lies on ``f.l``); 3 otherwise.
    ``boundary_distance`` is the smallest distance of any incidence measure
    to the tolerance and ``unstable`` marks measures within a factor 10 of it.
    """
    dp = projective_distance(f.p, g.p)
    dl = projective_distance(f.l, g.l)
    a = abs(float(g.l @ f.p))
    b = abs(float(f.l @ g.p))
    qs = np.array([dp, dl, a, b])
    same_p, same_l = dp <= tau, dl <= tau
    if same_p and same_l:
        level, tag = 0, None
    elif same_p:
        level, tag = 1, "point-type"
    elif same_l:
        level, tag = 1, "line-type"
    elif a <= tau:
        level, tag = 2, "point-type"
    elif b <= tau:
        level, tag = 2, "line-type"
    else:
        level, tag = 3, None
    margin = float(np.min(np.abs(qs - tau)))
    unstable = bool(np.any((qs > 0.1 * tau) & (qs < 10.0 * tau)))
    return RelativePosition(level, tag, margin, unstable)


# ---------------------------------------------------------------- Busemann


def ray(base, direction) -> RaySpec:
    v = np.asarray(direction, dtype=float)
    if v.shape != (3,):
        raise ValidationError("direction must be a 3-vector")
    if abs(v.sum()) > 1e-10 or v[0] < v[1] - 1e-10 or v[1] < v[2] - 1e-10:
        raise ValidationError("direction must lie in the closed positive chamber")
    nv = np.linalg.norm(v)
    if abs(nv - 1.0) > 1e-10:
        raise ValidationError("direction must have unit norm")
    return RaySpec(group_elt(base), v)


def ray_point_elt(xi: RaySpec, t: float) -> np.ndarray:
    """Group element ``g exp(t v)`` whose orbit point is the ray at time ``t``."""
    return xi.base * np.exp(t * xi.direction)[None, :]


def busemann(xi: RaySpec, x, T: float = BUSEMANN_T) -> BusemannValue:
    """Busemann function of the ray ``xi`` evaluated at ``x``.

    ``raw`` is ``d(x, xi_T) - T``. ``extrapolated`` applies one Richardson
    step in ``1/T`` to ``(d(x, xi_T)^2 - T^2) / 2T``, which is exact when
    ``x`` lies in a flat containing the ray.
    """
    if T <= 0:
        raise ValidationError("T must be positive")
    r = inv_sqrtm_spd(x)

    def dist(t):
        return float(np.linalg.norm(mu(r @ ray_point_elt(xi, t))))

    d1, d2 = dist(T), dist(2 * T)
    g1 = (d1 - T) * (d1 + T) / (2 * T)
    g2 = (d2 - 2 * T) * (d2 + 2 * T) / (4 * T)
    return BusemannValue(d1 - T, 2 * g2 - g1)


def log_point(x) -> np.ndarray:
    """Symmetric log of a point of X (so ``x = exp(2 * log_point(x)) o``)."""
    return 0.5 * logm_spd(x)


# ---------------------------------------------------------------- charts

_R2 = math.sqrt(2.0)


def _sym_coords(L) -> np.ndarray:
    """Orthonormal coordinates of symmetric matrices (Frobenius inner product)."""
    return np.stack(
        [L[..., 0, 0], L[..., 1, 1], L[..., 2, 2], _R2 * L[..., 0, 1], _R2 * L[..., 0, 2], _R2 * L[..., 1, 2]],
        axis=-1,
    )


def log_chart(X) -> np.ndarray:
    """Batch log coordinates of points of X, shape (N, 6).

    Euclidean distance in this chart equals the distance of X along rays
    from ``o`` and approximates it near ``o``.
    """
    w, V = np.linalg.eigh(np.asarray(X, dtype=float))
    L = (V * (0.5 * np.log(w))[..., None, :]) @ np.swapaxes(V, -1, -2)
    return _sym_coords(L)


def polar_chart(G) -> np.ndarray:
    """Batch coordinates of group elements from ``g = P R`` (P positive, R orthogonal), shape (N, 15).

    The first six coordinates are :func:`log_chart` of ``g o``; the last nine
    are the entries of ``R`` divided by sqrt 2, so a small rotation by angle
    ``phi`` moves them by about ``phi``. Left multiplication by elements
    near the identity is close to an isometry in this chart.
    """
    U, S, Vt = np.linalg.svd(np.asarray(G, dtype=float))
    R = U @ Vt
    L = (U * np.log(S)[..., None, :]) @ np.swapaxes(U, -1, -2)
    n = R.shape[:-2]
    return np.concatenate([_sym_coords(L), R.reshape(*n, 9) / _R2], axis=-1)
