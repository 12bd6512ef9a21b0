"""Generalized Cartan decomposition ``G = H W B+ K`` and the projection X -> Y.

``B = exp(b)`` with ``b = {[[t, 0, s], [0, -2t, 0], [s, 0, t]]}`` is a flat
orthogonal to Y at ``o``; conjugating by ``k1`` diagonalizes it:
``k1 exp_B(t, s) k1 = diag(e^{t+s}, e^{-2t}, e^{t-s})``. The positive chamber
``B+`` is where that diagonal is descending, i.e. ``s >= 3|t|``.

For ``g = h w b k`` put ``x = g g^T``. Because ``J`` commutes with ``B`` and
``h^T J = J h^{-1}``, the matrix ``x J`` is conjugate by ``h k1`` to
``diag(a1^2, -a2^2, -a3^2)``. Its unique positive eigenvalue belongs to the
eigenvector ``h [1:0:1]``, which is the disk point of the projection
``pi(x) = h o``. The eigenvectors are obtained from the symmetric matrix
``g^T J g`` (same spectrum, eigenvectors pulled back by ``g``), which keeps
the computation well conditioned.
"""

import itertools
import math
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from . import symspace
from .errors import ConvergenceError, NearSingularStratumError, ValidationError
from .hplane import (
    CENTER,
    G3,
    J,
    K0,
    K1,
    LIE_H,
    SQ2,
    a_t,
    calibration,
    disk_point,
    fermi_point,
    form,
    h_s,
    in_h,
    k_theta,
    n_minus,
    n_plus,
    sym_point_of_disk,
    translator,
)
from .mat3 import expm, sym_eig

COLLISION_TOL = 1e-9
BPLUS_TOL = 1e-10
ORACLE_STARTS = ((0.0, 0.0), (2.0, 2.0), (-2.0, 2.0), (2.0, -2.0), (-2.0, -2.0))


class HBKFactors(NamedTuple):
    h: np.ndarray
    w_index: int
    b: tuple
    k: np.ndarray


class PointCloud(NamedTuple):
    elts: np.ndarray  # group elements g, points are g o
    params: np.ndarray
    provenance: dict

    @property
    def points(self) -> np.ndarray:
        return self.elts @ np.swapaxes(self.elts, -1, -2)


class FloatingPlane(NamedTuple):
    h: np.ndarray  # L = h A0 o
    t: float


# ---------------------------------------------------------------- the flat B


def exp_b(t: float, s: float) -> np.ndarray:
    et = math.exp(t)
    return np.array(
        [
            [et * math.cosh(s), 0.0, et * math.sinh(s)],
            [0.0, math.exp(-2 * t), 0.0],
            [et * math.sinh(s), 0.0, et * math.cosh(s)],
        ]
    )


def lie_b(t: float, s: float) -> np.ndarray:
    return np.array([[t, 0.0, s], [0.0, -2 * t, 0.0], [s, 0.0, t]])


def b_norm(t: float, s: float) -> float:
    """Euclidean norm of ``lie_b(t, s)``, i.e. ``d(o, exp_b(t, s) o)``."""
    return math.sqrt(6 * t * t + 2 * s * s)


def in_b_plus(t: float, s: float, tol=BPLUS_TOL) -> bool:
    return s >= 3 * abs(t) - tol


def _signed_permutations():
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            P = np.zeros((3, 3))
            for i, j in enumerate(perm):
                P[j, i] = signs[i]
            if np.linalg.det(P) > 0:
                yield perm, P


def _normalizer():
    """All 24 elements ``k1 P k1`` of the normalizer of b in SO(3), with their permutations."""
    return [(perm, K1 @ P @ K1) for perm, P in _signed_permutations()]


def _perm_of(w) -> tuple:
    """Permutation induced on k1-diagonal slots by conjugation ``w^{-1} . w``."""
    P = np.rint(K1 @ w @ K1)
    return tuple(int(np.argmax(np.abs(P[:, i]))) for i in range(3))


def weyl_small():
    """Representatives of the little Weyl group of H (normalizer of b in K0 mod centralizer)."""
    reps, seen = [], set()
    for perm, w in _normalizer():
        if in_h(w) and perm not in seen:
            seen.add(perm)
            reps.append(w)
    return reps


def wyl_reps() -> List[np.ndarray]:
    """Coset representatives for the small Weyl group in the full Weyl group.

    Enumerates the signed permutation elements of the normalizer of b
    (conjugated by k1), groups them by the permutation they induce, and keeps
    one element per orbit of the small Weyl group acting on the left.
    Identity first, then enumeration order.
    """
    small = [_perm_of(n) for n in weyl_small()]
    reps, covered = [], set()
    for perm, w in _normalizer():
        if perm in covered:
            continue
        reps.append(w)
        # left multiplication by n composes permutations
        for n in weyl_small():
            covered.add(_perm_of(n @ w))
    assert len(reps) * len(small) == 6
    return reps


_WYL = None


def _wyl():
    global _WYL
    if _WYL is None:
        _WYL = wyl_reps()
    return _WYL


def coset_separation(w1, w2) -> float:
    """Smallest Frobenius distance between ``w1`` and ``n w2 c`` (n small Weyl, c centralizer)."""
    cent = [w for perm, w in _normalizer() if perm == (0, 1, 2)]
    best = math.inf
    for n in weyl_small():
        for n2 in cent:
            for c in cent:
                best = min(best, float(np.linalg.norm(w1 - n2 @ n @ w2 @ c)))
    return best


# ---------------------------------------------------------------- decomposition


def timelike_vector(x) -> np.ndarray:
    """Eigenvector of ``x J`` with the positive eigenvalue, future pointing."""
    r = symspace.sqrtm_spd(x)
    return timelike_vector_elt(r)


def timelike_vector_elt(g) -> np.ndarray:
    """Same as :func:`timelike_vector` for ``x = g g^T`` given ``g``."""
    g = np.asarray(g, dtype=float)
    S = g.T @ J @ g
    S = 0.5 * (S + S.T)
    w, Q = sym_eig(S)
    v = g @ Q[:, 0]
    if not form(CENTER, v) > 0:
        v = -v
    return v


def project_disk(x) -> np.ndarray:
    """Disk point of ``pi(x)``."""
    return disk_point(timelike_vector(x))


def project_disk_elt(g) -> np.ndarray:
    return disk_point(timelike_vector_elt(g))


def project(x) -> np.ndarray:
    """Nearest-point projection of ``x`` onto Y (closed form)."""
    return sym_point_of_disk(project_disk(x))


def project_elt(g) -> np.ndarray:
    """Projection of ``g o`` computed from ``g`` directly."""
    return sym_point_of_disk(project_disk_elt(g))


def _b_params(diag):
    # diag = (e^{t+s}, e^{-2t}, e^{t-s})
    l1, l2, l3 = np.log(diag)
    t = -0.5 * l2
    s = 0.5 * (l1 - l3)
    return t, s


def hbk_decompose(g, collision_tol=COLLISION_TOL, strict=True) -> HBKFactors:
    """Factor ``g = h w b k`` with ``h`` in H, ``w`` from :func:`wyl_reps`, ``b`` in B+, ``k`` in SO(3).

    Raises
    ------
    NearSingularStratumError
        When the two negative eigenvalues of ``x J`` agree to relative
        precision ``collision_tol``; then ``h`` is not unique. With
        ``strict=False`` an arbitrary valid choice is returned instead.
    """
    g = symspace.group_elt(g)
    S = g.T @ J @ g
    S = 0.5 * (S + S.T)
    lam, Q = sym_eig(S)
    # eigenvalue pattern: one positive (timelike slot 1), two negative
    if not (lam[0] > 0 > lam[1]):
        raise ValidationError("x J does not have signature (1, 2)")
    neg = [1, 2]
    neg.sort(key=lambda i: (-abs(lam[i]), lam[i]))
    gap = abs(abs(lam[neg[0]]) - abs(lam[neg[1]]))
    if strict and gap <= collision_tol * max(abs(lam[neg[0]]), 1.0):
        raise NearSingularStratumError("negative eigenvalues of x J collide")
    idx = [0] + neg
    V = np.column_stack([g @ Q[:, i] / math.sqrt(abs(lam[i])) for i in idx])
    if form(CENTER, V[:, 0]) < 0:
        V[:, 0] = -V[:, 0]
    # sign rule for the spacelike pair; the centralizer {I, J} acts by flipping both
    ref = K1[:, 1]
    d = V[:, 1] @ ref
    if abs(d) > 1e-12 * np.linalg.norm(V[:, 1]):
        if d < 0:
            V[:, 1] = -V[:, 1]
    else:
        j = int(np.argmax(np.abs(V[:, 1]) > 1e-12 * np.linalg.norm(V[:, 1])))
        if V[j, 1] < 0:
            V[:, 1] = -V[:, 1]
    if np.linalg.det(V) < 0:
        V[:, 2] = -V[:, 2]
    h = V @ K1
    a = np.sqrt(np.abs(lam[idx]))

    best = None
    for n in weyl_small():
        for wi, w in enumerate(_wyl()):
            nw = n @ w
            perm = _perm_of(nw)
            diag = a[list(perm)]
            if diag[0] >= diag[1] * (1 - BPLUS_TOL) and diag[1] >= diag[2] * (1 - BPLUS_TOL):
                best = (n, wi, w, diag)
                break
        if best is not None:
            break
    n, wi, w, diag = best
    t, s = _b_params(diag)
    h = h @ n
    b = exp_b(t, s)
    k = np.linalg.solve(h @ w @ b, g)
    return HBKFactors(h, wi, (t, s), k)


def hbk_reconstruct(f: HBKFactors) -> np.ndarray:
    return f.h @ _wyl()[f.w_index] @ exp_b(*f.b) @ f.k


# ---------------------------------------------------------------- variational oracle


def _dist2(xr, u, v):
    m = xr @ fermi_point(u, v)
    s = np.linalg.svd(m, compute_uv=False)
    return float(np.sum(np.log(s) ** 2))


def project_oracle(x, starts=ORACLE_STARTS, gtol=1e-10, max_iter=500) -> np.ndarray:
    """Nearest point of Y by direct minimization of ``d(x, h_u k0 h_v o)^2``.

    Independent of the spectral formula: multistart BFGS on the Fermi
    coordinates ``(u, v)`` with central finite-difference gradients.
    """
    x = np.asarray(x, dtype=float)
    xr = symspace.inv_sqrtm_spd(x)

    def f(z):
        return _dist2(xr, z[0], z[1])

    def grad(z, h=1e-6):
        e = np.eye(2) * h
        return np.array([(f(z + e[i]) - f(z - e[i])) / (2 * h) for i in range(2)])

    best = None
    for z0 in starts:
        res = optimize.minimize(f, np.array(z0), jac=grad, method="BFGS", options={"gtol": gtol, "maxiter": max_iter})
        if best is None or res.fun < best.fun:
            best = res
    gnorm = float(np.linalg.norm(grad(best.x)))
    if not np.all(np.isfinite(best.x)) or gnorm > 1e-6:
        raise ConvergenceError(f"oracle did not converge (|grad| = {gnorm:.3g})", best=best.x)
    g = fermi_point(*best.x)
    return g @ g.T


# ---------------------------------------------------------------- samplers


def gamma(t: float, s: float) -> np.ndarray:
    """``a_t k0 h_s``."""
    return a_t(t) @ K0 @ h_s(s)


def fiber_sample(y, radius: float, n: int, n_theta: Optional[int] = None) -> PointCloud:
    """Points ``h k(theta) b o`` of the fiber of the projection over ``y``.

    ``b`` runs over a square grid of side ``2n - 1`` in the Euclidean
    coordinates ``(sqrt6 t, sqrt2 s)`` of the flat B, clipped to the ball of
    the given radius; ``theta`` runs over ``n_theta`` (default ``2n``)
    equally spaced angles in ``[0, pi)``. ``k(theta + pi) b o = k(theta) b o``
    because ``J = k(pi)`` centralizes B.
    """
    h = translator(y)
    if n <= 1 or radius == 0:
        return PointCloud(h[None].copy(), np.zeros((1, 3)), {"kind": "fiber", "radius": radius, "n": n})
    n_theta = 2 * n if n_theta is None else n_theta
    grid = np.linspace(-radius, radius, 2 * n - 1)
    elts, params = [], []
    for th in np.arange(n_theta) * (math.pi / n_theta):
        kh = h @ k_theta(th)
        for e1 in grid:
            for e2 in grid:
                if e1 * e1 + e2 * e2 > radius * radius + 1e-12:
                    continue
                t, s = e1 / math.sqrt(6), e2 / SQ2
                elts.append(kh @ exp_b(t, s))
                params.append((th, t, s))
    return PointCloud(np.array(elts), np.array(params), {"kind": "fiber", "radius": radius, "n": n, "n_theta": n_theta})


def floating_plane_sample(P: FloatingPlane, u_range, v_range, nu: int, nv: int) -> PointCloud:
    """Points ``h a_t h_u k0 h_v o`` on a ``nu x nv`` grid."""
    us = np.linspace(u_range[0], u_range[1], nu)
    vs = np.linspace(v_range[0], v_range[1], nv)
    base = P.h @ a_t(P.t)
    elts = np.array([base @ fermi_point(u, v) for u in us for v in vs])
    params = np.array([(u, v) for u in us for v in vs])
    return PointCloud(elts, params, {"kind": "floating", "t": P.t, "u": list(u_range), "v": list(v_range), "nu": nu, "nv": nv})


def orthogonal_plane(h=None):
    """Sampler for ``Z_L = h g3 Y`` orthogonal to Y along ``L = h A0 o``."""
    h = np.eye(3) if h is None else np.asarray(h, float)

    def sample(u_range, v_range, nu, nv):
        us = np.linspace(u_range[0], u_range[1], nu)
        vs = np.linspace(v_range[0], v_range[1], nv)
        elts = np.array([h @ G3 @ fermi_point(u, v) for u in us for v in vs])
        params = np.array([(u, v) for u in us for v in vs])
        return PointCloud(elts, params, {"kind": "orthogonal", "nu": nu, "nv": nv})

    return sample


def tangent_y():
    """Orthonormal-up-to-scale basis of the tangent space of Y at o (symmetric part of the Lie algebra of H)."""
    E1 = np.diag([1.0, 0.0, -1.0])
    E2 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    return E1, E2


def orthogonality_residual() -> float:
    """Trace pairing between the normal directions of Y and Z_L at o (should vanish)."""
    E1, E2 = tangent_y()
    F2 = G3 @ E2 @ G3
    return abs(float(np.trace(E2 @ F2))) + abs(float(np.trace(E1 @ F2)))


# ---------------------------------------------------------------- distances to L


def _golden_min(f, lo, hi, tol=1e-10, max_iter=200):
    res = optimize.minimize_scalar(f, bracket=(lo, 0.5 * (lo + hi), hi), method="golden", tol=tol, options={"maxiter": max_iter})
    return float(res.x), float(res.fun)


def distance_to_l(y, h=None, bracket=None) -> float:
    """Distance from a point ``y`` of X to the geodesic ``L = h A0 o`` by golden-section search."""
    y = np.asarray(y, dtype=float)
    if h is not None:
        hi = np.linalg.inv(h)
        y = hi @ y @ hi.T
    yr = symspace.inv_sqrtm_spd(y)

    def f(r):
        m = yr @ h_s(r)
        return float(np.linalg.norm(np.log(np.linalg.svd(m, compute_uv=False))))

    if bracket is None:
        # foot of the perpendicular is near the diagonal ratio
        r0 = 0.25 * math.log(y[0, 0] / y[2, 2])
        bracket = (r0 - 10.0, r0 + 10.0)
    lo, hi = bracket
    grid = np.linspace(lo, hi, 41)
    vals = [f(r) for r in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if a == b:
        return float(vals[i])
    res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, vals[i]))


def distance_to_l_closed_form(p) -> float:
    """Closed form for disk points: ``sinh(d / c) = |y| / sqrt(F(p))`` with ``c`` the calibration."""
    p = np.asarray(p, dtype=float)
    return calibration() * math.asinh(abs(p[1]) / math.sqrt(float(form(p))))


def projection_profile(t: float, s_grid: Sequence[float]):
    """``[(s, d(pi(gamma_t(s) o), L))]`` with ``L = A0 o``."""
    if t == 0:
        raise ValidationError("t must be nonzero")
    out = []
    for s in s_grid:
        y = project_elt(gamma(t, s))
        out.append((float(s), distance_to_l(y)))
    return out


# ---------------------------------------------------------------- fiber translation


def theta_prime(theta: float, c: float) -> float:
    """Angle with ``cot theta' = -exp(-3c) cot theta``, branch chosen so the
    diagonal of ``k1^{-1} k(theta') a_c k(theta) k1`` is positive.

    The product is diagonal when ``c = 0`` or ``sin 2 theta = 0``. For other
    inputs it is only upper triangular; see ``rotation_product``.
    """
    if abs(math.sin(theta)) < 1e-15:
        return 0.0
    tp = math.atan2(math.sin(theta), -math.exp(-3 * c) * math.cos(theta))
    if rotation_product(tp, theta, c)[1, 1] < 0:
        tp = tp - math.pi if tp > 0 else tp + math.pi
    return tp


def rotation_product(theta_p: float, theta: float, c: float) -> np.ndarray:
    return K1 @ k_theta(theta_p) @ a_t(c) @ k_theta(theta) @ K1


class HausdorffCheck(NamedTuple):
    hausdorff: float
    bound: float
    slack: float
    passed: bool
    sampled: float


def _fiber_point(z) -> np.ndarray:
    """``k(theta) exp_b(t, s) o`` for ``z = (theta, t, s)``."""
    k = k_theta(z[0])
    return k @ exp_b(2 * z[1], 2 * z[2]) @ k.T


def _distance_to_fiber(X, params, P, tol: float) -> np.ndarray:
    """Distances from the points ``X`` to the full fiber over o.

    Each point starts from its nearest sample in ``P`` (parameters
    ``params``) and is refined by a local minimization over the fiber
    coordinates, so the value is an upper bound on the true distance.
    """
    out = np.empty(len(X))
    for i, x in enumerate(X):
        d = symspace.distance_batch(x, P)
        j = int(np.argmin(d))
        xr = symspace.inv_sqrtm_spd(x)

        def f(z):
            lam = np.linalg.eigvalsh(xr @ _fiber_point(z) @ xr)
            return 0.25 * float(np.sum(np.log(lam) ** 2))

        res = optimize.minimize(f, params[j], method="BFGS", options={"gtol": tol})
        out[i] = min(float(d[j]), math.sqrt(max(res.fun, 0.0)))
    return out


def fiber_translation_check(c: float, radius: float = 1.5, n: int = 5, n_theta: Optional[int] = None, tol: float = 1e-6) -> HausdorffCheck:
    """Finite-sample Hausdorff distance between the fiber over o and its ``a_c`` translate.

    Sample points of each fiber (radius ``radius``) are measured against
    the whole of the other fiber: the nearest point of a coarse sample is
    refined by local minimization, so truncation and mesh size do not
    inflate the result. ``slack`` is the optimizer tolerance; the raw
    sample-to-sample value is kept in ``sampled``.
    """
    dc = symspace.distance_elt(np.eye(3), a_t(c))
    step = radius / (n - 1)
    n_out = n + int(math.ceil(dc / step))
    nt = 2 * n if n_theta is None else n_theta
    inner = fiber_sample(np.eye(3), radius, n, nt)
    outer = fiber_sample(np.eye(3), step * (n_out - 1), n_out, nt)
    ac = a_t(c)
    ai = np.linalg.inv(ac)
    # d(a_c p, F) = d(p, a_c^-1 F): both directions reduce to distances to F
    fwd = ac @ inner.points @ ac.T
    back = ai @ inner.points @ ai.T
    hd_s = 0.0
    for Y in (fwd, back):
        hd_s = max(hd_s, max(float(symspace.distance_batch(y, outer.points).min()) for y in Y))
    d1 = _distance_to_fiber(fwd, outer.params, outer.points, tol)
    d2 = _distance_to_fiber(back, outer.params, outer.points, tol)
    hd = float(max(d1.max(), d2.max()))
    slack = math.sqrt(tol)
    return HausdorffCheck(hd, dc, slack, hd <= dc + slack, hd_s)


# ---------------------------------------------------------------- floating planes


class UltraparallelCheck(NamedTuple):
    min_distance: float
    bound: float
    slack: float
    minimizers_on_l: bool
    passed: bool


def ultraparallel_check(t: float, u_range=(-2.0, 2.0), v_range=(-2.0, 2.0), nu: int = 9, nv: int = 9, rtol: float = 1e-9) -> UltraparallelCheck:
    """Minimum distance between grid samples of Y and ``Y_{L,t} = a_t Y``.

    Minimizers must pair a grid point nearest ``L`` with one nearest
    ``a_t L`` (Fermi coordinate ``v`` in the cell around 0, ``u`` equal up to
    one cell).
    """
    Y = floating_plane_sample(FloatingPlane(np.eye(3), 0.0), u_range, v_range, nu, nv)
    Yt = floating_plane_sample(FloatingPlane(np.eye(3), t), u_range, v_range, nu, nv)
    P, Pt = Y.points, Yt.points
    D = np.array([symspace.distance_batch(p, Pt) for p in P])
    dmin = float(D.min())
    bound = symspace.distance_elt(np.eye(3), a_t(t))
    du = (u_range[1] - u_range[0]) / (nu - 1)
    dv = (v_range[1] - v_range[0]) / (nv - 1)
    slack = 0.5 * max(symspace.distance_elt(np.eye(3), fermi_point(du, dv)), 1e-12)
    ii, jj = np.nonzero(D <= dmin * (1 + rtol) + 1e-12)
    on_l = True
    for i, j in zip(ii, jj):
        u1, v1 = Y.params[i]
        u2, v2 = Yt.params[j]
        on_l &= abs(v1) <= dv / 2 + 1e-12 and abs(v2) <= dv / 2 + 1e-12 and abs(u1 - u2) <= du + 1e-12
    passed = (dmin >= bound - slack) and (dmin <= bound + slack) and on_l
    return UltraparallelCheck(dmin, bound, slack, bool(on_l), bool(passed))


# ---------------------------------------------------------------- Jacobian ranks


def _gd_map(base_h, t):
    def F(z):
        xi = z[0] * LIE_H[0] + z[1] * LIE_H[1] + z[2] * LIE_H[2]
        return (base_h @ expm(xi) @ a_t(t) @ K0 @ h_s(z[3]) @ k_theta(z[4])).ravel()

    return F


def _mul2_map(base_h, t, sign):
    nil = n_plus if sign > 0 else n_minus

    def F(z):
        g = base_h @ nil(z[0]) @ h_s(z[1]) @ a_t(t) @ K0 @ h_s(z[2])
        x = g @ g.T
        return x[np.triu_indices(3)]

    return F


def jacobian_rank(name: str, point, t: float, eps: float = 1e-6, step: float = 1e-5, sign: int = 1) -> int:
    """Numerical rank of a product map at ``point``.

    ``name="gd"``: ``(xi, r, theta) -> h exp(xi) a_t k0 h_r k(theta)`` into G,
    with ``point = (h, r, theta)``. ``name="mul2"``:
    ``(n, a, r) -> h n a a_t k0 h_r o`` into X with ``n`` in the one-parameter
    unipotent subgroup selected by ``sign`` and ``point = (h, a, r)``.
    Central differences at ``step`` and ``step / 4`` must agree on the rank.
    """
    h, r1, r2 = point
    if name == "gd":
        F = _gd_map(h, t)
        z0 = np.array([0.0, 0.0, 0.0, r1, r2])
    elif name == "mul2":
        F = _mul2_map(h, t, sign)
        z0 = np.array([0.0, r1, r2])
    else:
        raise ValidationError(f"unknown map {name!r}")

    def rank(hstep):
        cols = []
        for i in range(len(z0)):
            e = np.zeros_like(z0)
            e[i] = hstep
            cols.append((F(z0 + e) - F(z0 - e)) / (2 * hstep))
        Jm = np.column_stack(cols)
        if not np.all(np.isfinite(Jm)):
            return -1
        sv = np.linalg.svd(Jm, compute_uv=False)
        return int(np.sum(sv > eps * sv[0]))

    r_a, r_b = rank(step), rank(step / 4)
    if r_a != r_b or r_a < 0:
        raise ConvergenceError(f"finite-difference rank unstable ({r_a} vs {r_b})", best=max(r_a, r_b))
    return r_a


# ---------------------------------------------------------------- limit flags


def flag_distance(f, g) -> float:
    return max(symspace.projective_distance(f.p, g.p), symspace.projective_distance(f.l, g.l))


def fiber_limit_flags_distance(f, n_theta: int = 721) -> float:
    """Distance from a flag to the set of flags ``k(theta) k1 w P`` (w in the Weyl group)."""
    ws = [w for perm, w in _normalizer()]

    def dist(th, w):
        m = k_theta(th) @ K1 @ w
        return flag_distance(f, symspace.Flag(m[:, 0], m[:, 2]))

    best = math.inf
    grid = np.linspace(0, 2 * math.pi, n_theta)
    for w in ws:
        vals = np.array([dist(th, w) for th in grid])
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_theta - 1)]
        res = optimize.minimize_scalar(lambda th: dist(th, w), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun), float(vals[i]))
    return best


# ---------------------------------------------------------------- batched decomposition


def _combo_table():
    # for every (n, w) in search order: index of w and the slot permutation
    table = []
    for n in weyl_small():
        for wi, w in enumerate(_wyl()):
            table.append((n, wi, w, _perm_of(n @ w)))
    return table


def hbk_decompose_batch(G, tol=BPLUS_TOL):
    """Vectorized :func:`hbk_decompose` (non-strict) for a stack of group elements.

    Uses numpy's ``eigh`` instead of the Jacobi kernel. Returns arrays
    ``(h, w_index, b, k)`` with shapes ``(n,3,3), (n,), (n,2), (n,3,3)``.
    """
    G = np.asarray(G, dtype=float)
    S = np.swapaxes(G, -1, -2) @ J @ G
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    lam, Q = np.linalg.eigh(S)  # ascending: most negative, other negative, positive
    if not (np.all(lam[:, 2] > 0) and np.all(lam[:, 1] < 0)):
        raise ValidationError("x J does not have signature (1, 2)")
    idx = [2, 0, 1]
    a = np.sqrt(np.abs(lam[:, idx]))
    V = (G @ Q[:, :, idx]) / a[:, None, :]
    V[:, :, 0] *= np.where(form(CENTER, V[:, :, 0]) < 0, -1.0, 1.0)[:, None]
    d = V[:, :, 1] @ K1[:, 1]
    V[:, :, 1] *= np.where(d < 0, -1.0, 1.0)[:, None]
    V[:, :, 2] *= np.where(np.linalg.det(V) < 0, -1.0, 1.0)[:, None]
    h = V @ K1
    table = _combo_table()
    ok = np.zeros((len(G), len(table)), dtype=bool)
    for c, (_, _, _, perm) in enumerate(table):
        dg = a[:, list(perm)]
        ok[:, c] = (dg[:, 0] >= dg[:, 1] * (1 - tol)) & (dg[:, 1] >= dg[:, 2] * (1 - tol))
    choice = np.argmax(ok, axis=1)
    ns = np.array([t[0] for t in table])
    ws = np.array([t[2] for t in table])
    perms = np.array([t[3] for t in table])
    h = h @ ns[choice]
    diag = np.take_along_axis(a, perms[choice], axis=1)
    l = np.log(diag)
    t = -0.5 * l[:, 1]
    s = 0.5 * (l[:, 0] - l[:, 2])
    et = np.exp(t)
    B = np.zeros((len(G), 3, 3))
    B[:, 0, 0] = B[:, 2, 2] = et * np.cosh(s)
    B[:, 0, 2] = B[:, 2, 0] = et * np.sinh(s)
    B[:, 1, 1] = np.exp(-2 * t)
    k = np.linalg.solve(h @ ws[choice] @ B, G)
    w_index = np.array([t[1] for t in table])[choice]
    return h, w_index, np.column_stack([t, s]), k
