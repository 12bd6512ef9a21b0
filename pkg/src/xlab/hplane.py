"""The subgroup H = SO(F) (identity component) and its plane Y = H o.

``F(x, y, z) = 2xz - y^2`` has Gram matrix ``J``. ``H`` acts on the Klein
disk ``D = {y^2 < 2xz}`` in the projective plane; the centre of ``D`` is
``[1:0:1]`` and corresponds to the basepoint ``o``. A point ``p`` of ``D``
corresponds to the point ``2 p p^T / F(p) - J`` of X, which is the image of
``o`` under any ``h`` in H with ``h [1:0:1] = [p]``.

Boundary points are parametrized by ``p(theta) = k(theta) e1``, which is
already normalized to ``x + z = 1``; in these coordinates H acts on the
boundary circle through the symmetric square of the standard SL(2,R)
action on ``(cos(theta/2), sin(theta/2))``.
"""

import functools
import math
from typing import NamedTuple

import numpy as np

from . import symspace
from .errors import ChartMissError, ValidationError
from .mat3 import as_mat3

SQ2 = math.sqrt(2.0)
R2 = 1.0 / SQ2

J = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
K0 = np.array([[0.5, R2, 0.5], [-R2, 0.0, R2], [0.5, -R2, 0.5]])
K1 = np.array([[R2, 0.0, R2], [0.0, -1.0, 0.0], [R2, 0.0, -R2]])
G3 = np.diag([1.0, -1.0, -1.0])
W0 = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])

CENTER = np.array([0.5, 0.0, 0.5])  # disk point of o, normalized x + z = 1

H_TOL = 1e-9
DISK_TOL = 1e-12
BOUNDARY_TOL = 1e-10
CHART_TOL = 1e-8
CHART_MAX = 1e6

# basis of the Lie algebra of H: entries (s, x, y) of [[s, x, 0], [y, 0, x], [0, y, -s]]
LIE_H = np.array(
    [
        [[1.0, 0, 0], [0, 0, 0], [0, 0, -1.0]],
        [[0, 1.0, 0], [0, 0, 1.0], [0, 0, 0]],
        [[0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]],
    ]
)


def constants() -> dict:
    """Named matrices ``J, k0, k1, g3, w0`` (fresh copies)."""
    return {"J": J.copy(), "k0": K0.copy(), "k1": K1.copy(), "g3": G3.copy(), "w0": W0.copy()}


def h_s(s: float) -> np.ndarray:
    return np.diag([math.exp(s), 1.0, math.exp(-s)])


def a_t(t: float) -> np.ndarray:
    return np.diag([math.exp(t), math.exp(-2.0 * t), math.exp(t)])


def k_theta(theta: float) -> np.ndarray:
    """Rotation ``k(theta)`` in K0 = H cap SO(3); ``k(-pi/2) = k0``, ``k(pi) = J``."""
    c, s = math.cos(theta), math.sin(theta)
    q = SQ2 * s / 2.0
    return np.array(
        [
            [(1 + c) / 2, -q, (1 - c) / 2],
            [q, c, -q],
            [(1 - c) / 2, q, (1 + c) / 2],
        ]
    )


def n_plus(p: float) -> np.ndarray:
    """Lower unipotent one-parameter subgroup of H."""
    return np.array([[1.0, 0.0, 0.0], [p, 1.0, 0.0], [p * p / 2, p, 1.0]])


def n_minus(q: float) -> np.ndarray:
    """Upper unipotent one-parameter subgroup of H."""
    return np.array([[1.0, q, q * q / 2], [0.0, 1.0, q], [0.0, 0.0, 1.0]])


def lie_h(s: float, x: float, y: float) -> np.ndarray:
    return s * LIE_H[0] + x * LIE_H[1] + y * LIE_H[2]


def form(u, v=None):
    """Bilinear form ``u^T J v`` (``F(u)`` when ``v`` is omitted); batched over leading axes."""
    u = np.asarray(u, dtype=float)
    v = u if v is None else np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 2] + u[..., 2] * v[..., 0] - u[..., 1] * v[..., 1]


def is_future(v) -> bool:
    return float(form(CENTER, v)) > 0.0


def h_elt(m, tol=H_TOL) -> np.ndarray:
    """Validate an element of the identity component of SO(F)."""
    h = as_mat3(m)
    scale = 1.0 + float(np.sum(h * h))
    if np.linalg.norm(h.T @ J @ h - J) > tol * scale:
        raise ValidationError("matrix does not preserve the form F")
    if np.linalg.det(h) < 0:
        raise ValidationError("matrix has negative determinant")
    if not is_future(h @ CENTER):
        raise ValidationError("matrix is not in the identity component")
    return h


def in_h(m, tol=H_TOL) -> bool:
    try:
        h_elt(m, tol)
    except ValidationError:
        return False
    return True


# ---------------------------------------------------------------- disk model


def disk_point(v, tol=DISK_TOL) -> np.ndarray:
    """Normalize a projective point of D to ``x + z = 1`` (validated interior)."""
    v = np.asarray(v, dtype=float)
    den = v[0] + v[2]
    if den == 0.0:
        raise ValidationError("point is not in the disk")
    p = v / den
    if p[1] ** 2 - 2 * p[0] * p[2] >= -tol:
        raise ValidationError("point is on or outside the boundary of the disk")
    return p


def boundary_point(theta: float) -> np.ndarray:
    """Boundary point ``k(theta) e1``; satisfies ``x + z = 1``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([(1 + c) / 2, SQ2 * s / 2, (1 - c) / 2])


def boundary_angle(p) -> float:
    """Inverse of :func:`boundary_point` (also used for interior directions)."""
    p = np.asarray(p, dtype=float)
    p = p / (p[0] + p[2])
    return math.atan2(SQ2 * p[1], p[0] - p[2])


def check_boundary(p, tol=BOUNDARY_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    den = p[0] + p[2]
    if den == 0.0:
        raise ValidationError("not a boundary point")
    p = p / den
    if abs(p[1] ** 2 - 2 * p[0] * p[2]) > tol:
        raise ValidationError("point is not on the boundary of the disk")
    return p


def sym_point_of_disk(p) -> np.ndarray:
    """Point of Y corresponding to the disk point ``p``."""
    p = np.asarray(p, dtype=float)
    return 2.0 * np.outer(p, p) / form(p) - J


def disk_of_sym_point(x) -> np.ndarray:
    """Disk point of a point ``x`` of Y: the eigenvector of ``x J`` for eigenvalue 1."""
    from .hbk import timelike_vector

    return disk_point(timelike_vector(x))


def hilbert_distance(p, q) -> float:
    """Cross-ratio (Hilbert) distance on D, uncalibrated (curvature -1)."""
    p = disk_point(p)
    q = disk_point(q)
    d = q - p
    A = float(form(d))
    B = float(form(p, d))
    C = float(form(p))
    if A == 0.0 and B == 0.0:
        return 0.0
    if np.max(np.abs(d)) < 1e-300:
        return 0.0
    disc = math.sqrt(max(B * B - A * C, 0.0))
    # roots of C + 2 B lam + A lam^2 = 0 with lam1 < 0 < 1 < lam2
    if A < 0:
        lam1 = (-B + disc) / A
        lam2 = (-B - disc) / A
    else:  # segment direction timelike or null cannot occur for interior chords
        raise ValidationError("degenerate chord")
    lam1, lam2 = min(lam1, lam2), max(lam1, lam2)
    return 0.5 * math.log((lam2 * (1.0 - lam1)) / ((lam2 - 1.0) * (-lam1)))


@functools.lru_cache(maxsize=1)
def calibration() -> float:
    """Ratio between the ambient distance on Y and the Hilbert distance on D."""
    s = 1.0
    ambient = symspace.distance(np.eye(3), h_s(2 * s))  # h_s o = h_{2s} as a matrix
    hilbert = hilbert_distance(CENTER, h_s(s) @ CENTER)
    return ambient / hilbert


def klein_distance(p, q) -> float:
    """Distance on D calibrated to agree with :func:`symspace.distance` on Y."""
    return calibration() * hilbert_distance(p, q)


def hyperbolic_distance_form(p, q) -> float:
    """``arccosh`` formula for the curvature -1 distance (independent of cross ratios)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    c = float(form(p, q)) / math.sqrt(float(form(p)) * float(form(q)))
    return math.acosh(max(c, 1.0))


# ---------------------------------------------------------------- elements of H


def frame_from_endpoints(attract, repel) -> np.ndarray:
    """``h`` in H with ``h e1 ~ attract`` and ``h e3 ~ repel`` (boundary points)."""
    pa = check_boundary(attract)
    pr = check_boundary(repel)
    c = float(form(pa, pr))
    if c <= 1e-14:
        raise ValidationError("axis endpoints coincide")
    e3 = pr / c
    n = J @ np.cross(pa, e3)
    n = n / math.sqrt(-float(form(n)))
    h = np.column_stack([pa, n, e3])
    if np.linalg.det(h) < 0:
        h[:, 1] = -h[:, 1]
    return h


def hyperbolic_elt(attract, repel, length: float) -> np.ndarray:
    """Hyperbolic element with the given fixed points on the boundary circle.

    ``length`` is the translation length along the axis, measured with
    :func:`klein_distance`.
    """
    if length <= 0:
        raise ValidationError("translation length must be positive")
    h = frame_from_endpoints(attract, repel)
    s = length / calibration()
    return h @ h_s(s) @ np.linalg.inv(h)


def translation_length(g) -> float:
    """Translation length (calibrated) of a hyperbolic element of H."""
    ev = np.sort(np.abs(np.linalg.eigvals(np.asarray(g, float))))
    return calibration() * math.log(ev[-1])


def fixed_points(g):
    """Attracting and repelling boundary fixed points of a hyperbolic element."""
    w, V = np.linalg.eig(np.asarray(g, float))
    order = np.argsort(-np.abs(w))
    a = np.real(V[:, order[0]])
    r = np.real(V[:, order[2]])
    return a / (a[0] + a[2]), r / (r[0] + r[2])


def act_boundary(g, theta):
    """Projective action of ``g`` on boundary angles (vectorized)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    P = np.stack([(1 + c) / 2, SQ2 * s / 2, (1 - c) / 2], axis=-1)
    Q = P @ np.asarray(g, float).T
    return np.arctan2(SQ2 * Q[..., 1], Q[..., 0] - Q[..., 2])


def fermi_coords(h):
    """Write ``h = h_u k0 h_v k(theta)`` and return ``(u, v, theta)``."""
    h = np.asarray(h, dtype=float)
    p = h @ np.array([1.0, 0.0, 1.0])
    v = math.asinh(-p[1] / SQ2)
    u = 0.5 * math.log(p[0] / p[2])
    m = np.linalg.solve(h_s(u) @ K0 @ h_s(v), h)
    theta = math.atan2(SQ2 * m[1, 0], m[1, 1])
    return u, v, theta


def fermi_point(u: float, v: float) -> np.ndarray:
    """Group element ``h_u k0 h_v``; its orbit point has Fermi coordinates ``(u, v)``."""
    return h_s(u) @ K0 @ h_s(v)


def translator(y) -> np.ndarray:
    """Some ``h`` in H with ``h o = y`` for a point ``y`` of Y."""
    p = disk_of_sym_point(y)
    return translator_of_disk(p)


def translator_of_disk(p) -> np.ndarray:
    p = disk_point(p)
    p = p * math.sqrt(2.0 / float(form(p)))
    v = math.asinh(-p[1] / SQ2)
    u = 0.5 * math.log(p[0] / p[2])
    return fermi_point(u, v)


def random_h(rng, scale: float = 1.0) -> np.ndarray:
    """Random element ``h_u k0 h_v k(theta)`` with ``u, v ~ N(0, scale^2)``."""
    u, v = rng.normal(0.0, scale, size=2)
    th = rng.uniform(0, 2 * math.pi)
    return fermi_point(u, v) @ k_theta(th)


# ---------------------------------------------------------------- Bruhat chart


class BruhatCoords(NamedTuple):
    n_plus: float
    n_minus: float
    a: float


def bruhat_coords(h, h0=None, tol=CHART_TOL, max_coord=CHART_MAX) -> BruhatCoords:
    """Coordinates of ``h = h0 n_plus(p) n_minus(q) h_a``.

    This is an LU factorization of ``h0^{-1} h`` without pivoting; it fails
    (``ChartMissError``) when the leading entry is not safely positive or the
    coordinates blow up.
    """
    h = np.asarray(h, dtype=float)
    m = h if h0 is None else np.linalg.solve(np.asarray(h0, dtype=float), h)
    scale = float(np.max(np.abs(m)))
    if not m[0, 0] > tol * scale:
        raise ChartMissError("leading entry not positive: outside the Bruhat chart")
    a = math.log(m[0, 0])
    p = m[1, 0] / m[0, 0]
    q = m[0, 1]
    if max(abs(a), abs(p), abs(q)) > max_coord:
        raise ChartMissError("Bruhat coordinates blow up")
    rec = n_plus(p) @ n_minus(q) @ h_s(a)
    if np.linalg.norm(rec - m) > 1e-9 * max(1.0, float(np.linalg.norm(m))):
        raise ChartMissError("factorization residual too large")
    return BruhatCoords(p, q, a)


def bruhat_point(c: BruhatCoords, h0=None) -> np.ndarray:
    m = n_plus(c.n_plus) @ n_minus(c.n_minus) @ h_s(c.a)
    return m if h0 is None else np.asarray(h0, float) @ m


# ---------------------------------------------------------------- limit flags


def lambda_y_flag(theta: float) -> symspace.Flag:
    """Flag ``(k(theta) [e1], k(theta) [e1 ^ e2])``: a boundary point and its tangent line."""
    k = k_theta(theta)
    return symspace.Flag(k[:, 0].copy(), k[:, 2].copy())


def tangency_residual(f: symspace.Flag) -> float:
    """Discriminant of ``F`` restricted to the line of ``f`` (zero iff tangent)."""
    # basis of the plane orthogonal to the covector
    l = np.asarray(f.l, float) / np.linalg.norm(f.l)
    u = np.asarray(f.p, float) / np.linalg.norm(f.p)
    w = np.cross(l, u)
    a, b, c = float(form(u)), float(form(u, w)), float(form(w))
    return abs(b * b - a * c)


def quadric_residual(t: float, v) -> float:
    """Residual of ``e^{4t} y^2 = 2 e^{-2t} x z`` (the image of the boundary under ``a_t``)."""
    v = np.asarray(v, float)
    v = v / np.linalg.norm(v)
    return abs(math.exp(4 * t) * v[1] ** 2 - 2 * math.exp(-2 * t) * v[0] * v[2])
