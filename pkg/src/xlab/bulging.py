"""Bulging deformations of Schottky subgroups of H.

A bulging parameter is an element ``b`` of the centralizer of a hyperbolic
``delta`` in the group; conjugating ``delta`` into A0 by ``h`` gives
``h b h^-1 = a_{c0} h_{d0}`` and the width is ``|c0|``. The deformation
fixes one side of the splitting and moves the other by ``b``: conjugation
for an amalgam, left multiplication of the stable letter for an HNN
extension.

The tree map ``F_b`` is the identity on the region of X projecting to the
delta1 side of the axis of ``delta`` (near the base point), ``b`` on the
other side, and is extended equivariantly. :class:`TreeMap` evaluates it
on a finite word ball: a point is first pulled back towards ``o`` by the
undeformed group, the side is read off there, and the deformed group
pushes it back out.
"""

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import fuchsian, hbk, symspace
from .errors import ValidationError
from .fuchsian import TreeTag, WordGroupRep
from .hplane import (
    K0,
    a_t,
    boundary_point,
    disk_of_sym_point,
    fixed_points,
    frame_from_endpoints,
    h_elt,
    h_s,
)

COMMUTE_TOL = 1e-9
WIDTH_TOL = 1e-10
RELATION_TOL = 1e-9
RANK_TOL = 1e-8
COLLISION_TOL = 1e-6
SEPARATION = 0.5
TREE_RADIUS = 2
LOCAL_SCALE = 0.5
_SQ6 = math.sqrt(6.0)
_SQ2 = math.sqrt(2.0)


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True, eq=False)
class BulgeParam:
    delta: np.ndarray
    conjugator: np.ndarray  # h with h delta h^-1 in A0
    c0: float
    d0: float

    @property
    def b(self) -> np.ndarray:
        h = self.conjugator
        return np.linalg.solve(h, a_t(self.c0) @ h_s(self.d0) @ h)

    @property
    def width(self) -> float:
        return abs(self.c0)

    @property
    def displacement(self) -> float:
        """``d(o, a_{c0} o)``: the width measured in the metric of X."""
        return _SQ6 * abs(self.c0)

    def factor(self):
        """Recover ``(c0, d0)`` from the diagonal of ``h b h^-1``."""
        D = self.conjugator @ self.b @ np.linalg.inv(self.conjugator)
        return -0.5 * math.log(D[1, 1]), 0.5 * math.log(D[0, 0] / D[2, 2])

    def scaled(self, s: float) -> "BulgeParam":
        """``b_s = exp(s log b)``."""
        return BulgeParam(self.delta, self.conjugator, s * self.c0, s * self.d0)

    def to_dict(self):
        return {"delta": np.asarray(self.delta).tolist(), "conjugator": self.conjugator.tolist(), "c0": self.c0, "d0": self.d0}


def centralizer_param(delta, c0: float, d0: float) -> BulgeParam:
    """Bulging parameter in the centralizer of the hyperbolic element ``delta`` of H.

    The conjugator is the inverse of the frame whose first and last columns
    are the attracting and repelling eigenvectors of ``delta``.
    """
    delta = h_elt(delta)
    w = np.linalg.eigvals(delta)
    if np.any(np.abs(w.imag) > 1e-12) or np.any(w.real <= 0):
        raise ValidationError("delta must have positive real eigenvalues")
    w = np.sort(w.real)
    if min(w[1] - w[0], w[2] - w[1]) < 1e-9 * w[2]:
        raise ValidationError("delta is not hyperbolic (repeated eigenvalue)")
    att, rep = fixed_points(delta)
    h = np.linalg.inv(frame_from_endpoints(att, rep))
    return BulgeParam(delta, h, float(c0), float(d0))


# ---------------------------------------------------------------- deformed representations


@dataclass(frozen=True, eq=False)
class DeformedRep:
    base: WordGroupRep
    param: BulgeParam
    images: tuple

    @property
    def group(self) -> WordGroupRep:
        return WordGroupRep(tuple(self.images), self.base.tree, None)

    def word_matrix(self, word) -> np.ndarray:
        return self.group.word_matrix(word)

    def relation_residual(self) -> float:
        """Residual of the defining relations (the HNN relation when tagged HNN; free groups have none)."""
        tree = self.base.tree
        if tree.kind != "hnn":
            return 0.0
        t, x = tree.stable_index, tree.delta_index
        T, X = self.base.generators[t], self.base.generators[x]
        Y = np.linalg.solve(T, X @ T)  # t^-1 x t lies in the vertex group, so it is not deformed
        Tb = self.images[t]
        return float(np.abs(Tb @ Y @ np.linalg.inv(Tb) - self.images[x]).max())

    def to_json(self) -> str:
        d = {
            "base": json.loads(self.base.to_json()),
            "param": self.param.to_dict(),
            "images": [np.asarray(g).tolist() for g in self.images],
        }
        return json.dumps(d, sort_keys=True)


def bulge(rep: WordGroupRep, param: BulgeParam) -> DeformedRep:
    """Apply the amalgam rule (delta2 conjugated by ``b``) or the HNN rule (stable letter ``b t``)."""
    tree = rep.tree
    if tree.kind not in ("amalgam", "hnn"):
        raise ValidationError("bulging needs an amalgam or HNN tree tag")
    if np.abs(rep.generators[tree.delta_index] - param.delta).max() > 1e-9:
        raise ValidationError("bulging parameter does not match the tagged delta")
    b = param.b
    bi = np.linalg.inv(b)
    imgs = []
    for i, g in enumerate(rep.generators):
        if tree.kind == "amalgam":
            imgs.append(g.copy() if i in tree.delta1 else b @ g @ bi)
        else:
            imgs.append(b @ g if i == tree.stable_index else g.copy())
    return DeformedRep(rep, param, tuple(imgs))


def amalgam_fixture(length: float = 6.0) -> WordGroupRep:
    """Rank-3 Schottky group ``[a, d, c]`` split as ``<a, d> *_<d> <d, c>`` along ``delta = d``.

    The axis of ``d`` is the diameter through ``o`` at angle 0; ``a`` and
    ``c`` have axes on opposite sides of it.
    """
    third = math.pi / 3
    tree = TreeTag.amalgam((0, 1), (1, 2), 1)
    return fuchsian.schottky(
        [((third, 2 * third), length), ((0.0, math.pi), length), ((-third, -2 * third), length)], tree=tree
    )


def hnn_fixture(n: int = 1) -> WordGroupRep:
    """The standard pair as the HNN extension of ``<g1, g2^-1 g1 g2>`` with stable letter ``g2`` and ``delta = g1``."""
    g = fuchsian.standard_fixture(n)
    return WordGroupRep(g.generators, TreeTag.hnn((0,), 1, 0), g.ping_pong)


def integral_fixture() -> WordGroupRep:
    """Integer pair preserving ``2xz - 2y^2``: symmetric squares of ``[[1,2],[0,1]]`` and ``[[1,0],[2,1]]``
    conjugated by ``diag(1, sqrt2, 1)``."""
    D = np.diag([1.0, _SQ2, 1.0])
    gens = []
    for A in (np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [2.0, 1.0]])):
        gens.append(np.round(np.linalg.solve(D, fuchsian.symmetric_square(A) @ D)))
    return WordGroupRep(tuple(gens))


def _as_group(rep) -> WordGroupRep:
    return rep.group if isinstance(rep, DeformedRep) else rep


def _words(k: int, depth: int):
    out = []
    for d in range(1, depth + 1):
        out.extend(fuchsian.reduced_words(k, d))
    return out


# ---------------------------------------------------------------- diagnostics


def _real_log(g) -> Optional[np.ndarray]:
    w, V = np.linalg.eig(np.asarray(g, dtype=float))
    if np.any(np.abs(w.imag) > 1e-9 * np.abs(w).max()) or np.any(w.real <= 0):
        return None
    w, V = w.real, V.real
    return (V * np.log(w)) @ np.linalg.inv(V)


def _bracket(X, Y):
    return X @ Y - Y @ X


def _basis(mats, tol):
    # logs of determinant-one matrices are traceless; drop rounding in the trace
    A = np.array([(m - np.trace(m) / 3.0 * np.eye(3)).ravel() for m in mats])
    _, S, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(S > tol * S[0])) if len(S) and S[0] > 0 else 0
    return [v.reshape(3, 3) for v in Vt[:r]]


def zariski_rank(rep, depth: int = 2, tol: float = RANK_TOL) -> int:
    """Dimension of the Lie algebra generated by real logarithms of words of length ``<= depth``.

    Words whose eigenvalues are not real and positive are skipped. The span
    is closed under brackets until its numeric rank stops growing.
    """
    if depth < 2:
        raise ValidationError("depth must be at least 2")
    grp = _as_group(rep)
    logs = []
    for w in _words(grp.rank, depth):
        L = _real_log(grp.word_matrix(w))
        if L is not None and np.abs(L).max() > 0:
            logs.append(L / np.linalg.norm(L))
    if not logs:
        return 0
    basis = _basis(logs, tol)
    while True:
        new = basis + [_bracket(X, Y) for i, X in enumerate(basis) for Y in basis[i + 1 :]]
        nb = _basis(new, tol)
        if len(nb) == len(basis):
            return len(nb)
        basis = nb


def gap_growth(rep, depth: int = 6):
    """Least-squares slope of the mean of ``min(alpha1, alpha2)(mu(w))`` against word length.

    A positive slope on word balls is the desk-scale Anosov diagnostic.
    """
    grp = _as_group(rep)
    lengths, gaps = [], []
    for d in range(1, depth + 1):
        vals = []
        for w in fuchsian.reduced_words(grp.rank, d):
            m = symspace.mu(grp.word_matrix(w))
            vals.append(min(m[0] - m[1], m[1] - m[2]))
        lengths.append(d)
        gaps.append(float(np.mean(vals)))
    slope = float(np.polyfit(lengths, gaps, 1)[0])
    return slope, gaps


def integrality_check(rep, depth: int, tol: float = 1e-9) -> float:
    """Fraction of words of length ``<= depth`` whose matrices have integer entries within ``tol``."""
    grp = _as_group(rep)
    ws = _words(grp.rank, depth)
    ok = sum(1 for w in ws if np.abs(grp.word_matrix(w) - np.round(grp.word_matrix(w))).max() <= tol)
    return ok / len(ws)


# ---------------------------------------------------------------- sides of the bulging axis


def axis_coords_vec(param: BulgeParam, Q) -> np.ndarray:
    """``(side, distance)`` for points of Y given by timelike vectors ``Q`` (shape ``(n, 3)``).

    After the conjugator moves the axis of delta to ``A0 o``, a vector
    normalized to ``F = 2`` is ``h_u k0 h_v (1, 0, 1)`` with middle entry
    ``-sqrt2 sinh v``; the distance in X is ``sqrt2 |v|`` and the side is
    the sign of the middle entry.
    """
    q = np.asarray(Q, dtype=float).reshape(-1, 3) @ param.conjugator.T
    f = 2.0 * q[:, 0] * q[:, 2] - q[:, 1] ** 2
    if np.any(f <= 0):
        raise ValidationError("vectors must be timelike")
    q = q * (np.sqrt(2.0 / f) * np.sign(q[:, 0] + q[:, 2]))[:, None]
    v = np.arcsinh(-q[:, 1] / _SQ2)
    return np.column_stack([np.where(q[:, 1] >= 0, 1.0, -1.0), _SQ2 * np.abs(v)])


def axis_coords(param: BulgeParam, points) -> np.ndarray:
    """:func:`axis_coords_vec` for sym points of Y, shape ``(n, 3, 3)``."""
    Q = np.array([disk_of_sym_point(x) for x in np.asarray(points, dtype=float).reshape(-1, 3, 3)])
    return axis_coords_vec(param, Q)


def boundary_side(param: BulgeParam, theta: float) -> float:
    p = param.conjugator @ boundary_point(theta)
    return 1.0 if p[1] >= 0 else -1.0


def fixed_side(rep: WordGroupRep, param: BulgeParam) -> float:
    """Side of the axis of delta on which ``F_b`` is the identity.

    Amalgam: the side of the other delta1 generators. HNN: the side of the
    repelling fixed point of the stable letter (where ``t^-1 delta t`` lives).
    """
    tree = rep.tree
    if tree.kind == "amalgam":
        others = [i for i in tree.delta1 if i != tree.delta_index]
        if not others:
            raise ValidationError("delta1 needs a generator besides delta")
        p = fixed_points(rep.generators[others[0]])[0]
    elif tree.kind == "hnn":
        p = fixed_points(rep.generators[tree.stable_index])[1]
    else:
        raise ValidationError("free groups have no bulging side")
    q = param.conjugator @ p
    return 1.0 if q[1] >= 0 else -1.0


# ---------------------------------------------------------------- tree map


class TreeReport(NamedTuple):
    images: np.ndarray
    clearance: np.ndarray  # distance in X from the projection to the nearest sampled translate of the axis
    covered: np.ndarray  # reduction found a minimizer strictly inside the word ball


class TreeMap:
    """``F_b`` and its inverse on group elements, evaluated over a word ball of radius ``radius``."""

    def __init__(self, rep: DeformedRep, radius: int = TREE_RADIUS):
        self.rep = rep
        base = rep.base
        words = [()] + _words(base.rank, radius)
        self.lengths = np.array([len(w) for w in words])
        self.B = np.array([base.word_matrix(w) for w in words])
        self.R = np.array([rep.word_matrix(w) for w in words])
        self.radius = radius
        self.side = fixed_side(base, rep.param)
        self.b = rep.param.b

    @staticmethod
    def _reduce(mats, G):
        """Index of the word ``w`` minimizing ``d(o, pi(w g o))``, per element."""
        P = np.array([hbk.timelike_vector_elt(g) for g in G])
        W = mats[:, 0, :] + mats[:, 2, :]
        return np.argmin(P @ W.T, axis=1)

    @staticmethod
    def _y_vectors(G):
        return np.array([hbk.project_disk_elt(g) for g in G])

    def forward(self, G) -> TreeReport:
        G = np.asarray(G, dtype=float).reshape(-1, 3, 3)
        i = self._reduce(self.B, G)
        red = self.B[i] @ G
        ac = axis_coords_vec(self.rep.param, self._y_vectors(red))
        S = np.where((ac[:, 0] == self.side)[:, None, None], np.eye(3), self.b)
        out = np.linalg.solve(self.R[i], S @ red)
        return TreeReport(out, self._clearance(red), self.lengths[i] < self.radius)

    def inverse(self, G) -> TreeReport:
        """``F_b^-1``: pull back by the deformed group, undo ``b`` off the fixed side, push out by the base group."""
        G = np.asarray(G, dtype=float).reshape(-1, 3, 3)
        i = self._reduce(self.R, G)
        red = self.R[i] @ G
        ac = axis_coords_vec(self.rep.param, self._y_vectors(red))
        keep = ac[:, 0] == self.side
        S = np.where(keep[:, None, None], np.eye(3), np.linalg.inv(self.b))
        src = S @ red
        return TreeReport(np.linalg.solve(self.B[i], src), self._clearance(src), self.lengths[i] < self.radius)

    def _clearance(self, red):
        """Distance from the projections of reduced elements to the nearest translate of the axis in the ball."""
        Q = self._y_vectors(red)
        best = np.full(len(Q), np.inf)
        for g in self.B:
            best = np.minimum(best, axis_coords_vec(self.rep.param, Q @ np.linalg.inv(g).T)[:, 1])
        return best


# ---------------------------------------------------------------- probes


def _check_separation(param: BulgeParam, c: float):
    if c < param.displacement:
        raise ValidationError(f"separation {c} is below the width displacement {param.displacement:.4f}")


def fiber_disjointness(param: BulgeParam, y, y2, c: float = SEPARATION, samples: int = 5, radius: float = 1.5) -> float:
    """Minimum distance between the fiber over ``y`` and ``b`` times the fiber over ``y2``.

    ``y`` and ``y2`` must lie on opposite sides of the axis of delta, each
    at distance greater than ``c`` (in X), and ``c`` must be at least the
    width displacement ``d(o, a_{c0} o)``.
    """
    _check_separation(param, c)
    ac = axis_coords(param, np.array([y, y2]))
    if ac[0, 0] == ac[1, 0]:
        raise ValidationError("y and y2 lie on the same side of the bulging axis")
    if min(ac[:, 1]) <= c:
        raise ValidationError("y or y2 is within the separation of the bulging axis")
    A = hbk.fiber_sample(y, radius, samples).elts
    B = param.b @ hbk.fiber_sample(y2, radius, samples).elts
    X = A @ np.swapaxes(A, -1, -2)
    Z = B @ np.swapaxes(B, -1, -2)
    return float(min(symspace.distance_batch(x, Z).min() for x in X))


def offset_points(param: BulgeParam, c: float, side: float, along=(0.0,), normal: float = 0.0) -> np.ndarray:
    """Points of Y at distance ``c`` (in X) from the axis of delta on the given side."""
    F = np.linalg.inv(param.conjugator)
    v = side * c / _SQ2
    out = []
    for u in along:
        g = F @ h_s(u) @ K0 @ h_s(v)
        x = symspace.point_of(g)
        if axis_coords(param, x[None])[0, 0] != side:
            g = F @ h_s(u) @ K0 @ h_s(-v)
            x = symspace.point_of(g)
        out.append(x)
    return np.array(out)


class EmbeddingReport(NamedTuple):
    points: int
    pairs: int
    collisions: int
    distortion: float
    local_pairs: int
    coverage: float


def embedding_probe(rep: DeformedRep, c: float, elements, pairs: int = 10_000, seed: int = 0,
                    local_scale: float = LOCAL_SCALE, radius: int = TREE_RADIUS) -> EmbeddingReport:
    """Injectivity and local-isometry probe of ``F_b`` on the quotient.

    ``elements`` are group elements ``g`` standing for the points ``g o``;
    those whose projection comes within ``c`` of the sampled axis translates
    are dropped. For random pairs the quotient distances (minimum over the
    word ball) before and after ``F_b`` are compared: a collision is an
    image distance below :data:`COLLISION_TOL` for distinct sources, and the
    distortion is the largest relative change among pairs closer than
    ``local_scale``.
    """
    _check_separation(rep.param, c)
    tm = TreeMap(rep, radius)
    fw = tm.forward(elements)
    keep = (fw.clearance >= c) & fw.covered
    G = np.asarray(elements, dtype=float).reshape(-1, 3, 3)[keep]
    Fg = fw.images[keep]
    n = len(G)
    if n < 2:
        raise ValidationError("fewer than two points clear of the bulging locus")
    rng = np.random.default_rng(seed)
    X = G @ np.swapaxes(G, -1, -2)
    # half the pairs are chart neighbours so the local-isometry score sees close pairs
    near = cKDTree(symspace.log_chart(X)).query_pairs(local_scale, output_type="ndarray")
    if len(near) > pairs // 2:
        near = near[rng.choice(len(near), pairs // 2, replace=False)]
    m = pairs - len(near)
    I = rng.integers(0, n, size=2 * m)
    J = rng.integers(0, n, size=2 * m)
    sel = I != J
    I = np.concatenate([near[:, 0], I[sel][:m]]) if len(near) else I[sel][:m]
    J = np.concatenate([near[:, 1], J[sel][:m]]) if len(near) else J[sel][:m]
    FX = Fg @ np.swapaxes(Fg, -1, -2)

    def qdist(P, mats, I, J):
        best = np.full(len(I), np.inf)
        for g in mats:
            Q = g @ P[J] @ g.T
            best = np.fmin(best, symspace.pairwise_distance_batch(P[I], Q))
        return best

    d0 = qdist(X, tm.B, I, J)
    d1 = qdist(FX, tm.R, I, J)
    collisions = int(np.count_nonzero((d1 < COLLISION_TOL) & (d0 >= COLLISION_TOL)))
    local = d0 < local_scale
    dist = float(np.max(np.abs(d1[local] - d0[local]) / d0[local])) if np.any(local) else 0.0
    return EmbeddingReport(n, len(I), collisions, dist, int(np.count_nonzero(local)), float(np.mean(keep)))


# ---------------------------------------------------------------- deformed floating closure


class DeformedClosure(NamedTuple):
    undeformed: "fuchsian.ProductDimension"
    deformed: "fuchsian.ProductDimension"
    difference: float  # deformed cloud slope minus undeformed cloud slope
    membership: float  # after F_b^-1
    direct_membership: float  # without undoing F_b
    clearance: float


def deformed_floating_closure(rep: DeformedRep, L: "fuchsian.GeodesicY", t: float, scales, half_length: float = 0.6,
                              step: float = 0.01, half_width: float = 0.4, core_half: float = 0.25,
                              seed: int = 0, membership_samples: int = 2000) -> DeformedClosure:
    """Floating-plane orbit cloud over a closed geodesic before and after bulging.

    The base is a flow segment of ``L``; its deformed counterpart is the
    image under :class:`TreeMap`. Both are thickened by the same fiber
    ``a_t k0 h_v k(theta)`` and counted on the same scales. Membership is
    tested on a subsample of the deformed cloud after ``F_b^-1``.
    """
    F, core, _ = fuchsian.flow_segments([L.frame], half_length + max(scales), step, half_length, seed)
    tm = TreeMap(rep)
    fw = tm.forward(F)
    Fd = fw.images
    res = []
    clouds = []
    for frames in (F, Fd):
        base = fuchsian.base_cloud(frames, core)
        cloud = fuchsian.floating_cloud(frames, t, core, half_width, step, core_half, seed)
        res.append(fuchsian.product_dimension(base, cloud, 2, scales, seed))
        clouds.append(cloud)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(clouds[1].elements), size=min(membership_samples, len(clouds[1].elements)), replace=False)
    sub = clouds[1].elements[idx]
    back = tm.inverse(sub).images
    mem = fuchsian.product_membership(back, t, half_width)
    direct = fuchsian.product_membership(sub, t, half_width)
    return DeformedClosure(res[0], res[1], res[1].cloud.slope - res[0].cloud.slope, mem, direct, float(fw.clearance.min()))
