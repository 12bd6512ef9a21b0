"""Schottky subgroups of H and their geometry.

Words are tuples of letters ``0 .. 2k-1``: letter ``j < k`` is the
generator ``j`` and ``j + k`` its inverse. The matrix of a word
``(x1, ..., xn)`` is ``L[x1] @ ... @ L[xn]``.

A ping-pong certificate is a system of ``2k`` pairwise disjoint closed arcs
of the boundary circle (angles as in :func:`hplane.boundary_point`), one
attracting arc per letter, such that letter ``j`` maps the complement of
the arc of its inverse into its own arc. The group is then free and
discrete, and its limit set lies in the union of the arcs.

Geodesic closures are sampled with a symbolic coding: a geodesic with both
endpoints in the limit set is a bi-infinite reduced word, and each time the
geodesic leaves the Dirichlet region about ``o`` it is pulled back by the
next letter. All endpoint computations run through contracting maps only,
so sampling errors do not grow along the flow.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import mpmath
import numpy as np

from . import fracdim, hbk, symspace
from .errors import ChartMissError, NotProvablyDiscreteError, ValidationError
from .hplane import (
    G3,
    K0,
    SQ2,
    a_t,
    act_boundary,
    boundary_point,
    bruhat_coords,
    calibration,
    fixed_points,
    form,
    frame_from_endpoints,
    h_elt,
    h_s,
    hyperbolic_elt,
    k_theta,
    translation_length,
)

TWO_PI = 2.0 * math.pi
PING_SAMPLES = 64
ARC_FILL = 0.95
REDUCTION_RADIUS = 2
BOX_DEPTH = 7
ORBIT_WORDS = 100_000
STABILITY_TOL = 0.15
CHART_MISS_MAX = 0.5
FIBER_STEP = 0.02
FIBER_HALF = 0.45
CORE_HALF = 0.15
MEMBERSHIP_TOL = 1e-6
_C = np.array([1.0, 0.0, 1.0])


def _wrap(x):
    """Angle difference folded into ``[-pi, pi)``."""
    return (np.asarray(x, dtype=float) + math.pi) % TWO_PI - math.pi


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class TreeTag:
    """How the generators split for bulging: free, amalgam or HNN."""

    kind: str = "free"
    delta1: Tuple[int, ...] = ()
    delta2: Tuple[int, ...] = ()
    delta_index: Optional[int] = None
    stable_index: Optional[int] = None

    @classmethod
    def amalgam(cls, delta1, delta2, delta_index):
        d1, d2 = tuple(delta1), tuple(delta2)
        if delta_index not in d1 or delta_index not in d2:
            raise ValidationError("delta must belong to both factors")
        return cls("amalgam", d1, d2, delta_index, None)

    @classmethod
    def hnn(cls, delta_gens, stable_index, delta_index):
        d = tuple(delta_gens)
        if delta_index not in d:
            raise ValidationError("delta must belong to the vertex group")
        if stable_index in d:
            raise ValidationError("the stable letter is not in the vertex group")
        return cls("hnn", d, (), delta_index, stable_index)

    def to_dict(self):
        return {
            "kind": self.kind,
            "delta1": list(self.delta1),
            "delta2": list(self.delta2),
            "delta_index": self.delta_index,
            "stable_index": self.stable_index,
        }


@dataclass(frozen=True)
class Arc:
    center: float
    half_width: float

    def contains(self, theta, tol: float = 0.0):
        return np.abs(_wrap(np.asarray(theta) - self.center)) <= self.half_width + tol

    @property
    def ends(self):
        return self.center - self.half_width, self.center + self.half_width


@dataclass(frozen=True)
class PingPong:
    """One attracting arc per letter (generators first, then inverses)."""

    arcs: Tuple[Arc, ...]

    def cut(self) -> float:
        """An angle outside every arc: the middle of the widest gap."""
        ends = sorted((a.center - a.half_width, a.center + a.half_width) for a in self.arcs)
        best, where = -1.0, 0.0
        for i, (lo, hi) in enumerate(ends):
            nlo = ends[(i + 1) % len(ends)][0] + (TWO_PI if i + 1 == len(ends) else 0.0)
            if nlo - hi > best:
                best, where = nlo - hi, 0.5 * (hi + nlo)
        return float(_wrap(where))


@dataclass(frozen=True, eq=False)
class WordGroupRep:
    generators: Tuple[np.ndarray, ...]
    tree: TreeTag = field(default_factory=TreeTag)
    ping_pong: Optional[PingPong] = None

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def letters(self) -> List[np.ndarray]:
        return list(self.generators) + [np.linalg.inv(g) for g in self.generators]

    def inverse(self, j: int) -> int:
        return (j + self.rank) % (2 * self.rank)

    def word_matrix(self, word) -> np.ndarray:
        L = self.letters
        m = np.eye(3)
        for j in word:
            m = m @ L[j]
        return m

    def to_json(self) -> str:
        d = {
            "generators": [np.asarray(g).tolist() for g in self.generators],
            "tree": self.tree.to_dict(),
            "ping_pong": None
            if self.ping_pong is None
            else [[a.center, a.half_width] for a in self.ping_pong.arcs],
        }
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WordGroupRep":
        d = json.loads(text)
        t = d["tree"]
        tree = TreeTag(t["kind"], tuple(t["delta1"]), tuple(t["delta2"]), t["delta_index"], t["stable_index"])
        pp = None if d["ping_pong"] is None else PingPong(tuple(Arc(c, w) for c, w in d["ping_pong"]))
        return cls(tuple(np.array(g, dtype=float) for g in d["generators"]), tree, pp)


class BoundarySample(NamedTuple):
    points: np.ndarray  # angles in [-pi, pi)
    depth: int
    words: List[tuple]


# ---------------------------------------------------------------- SL(2) lift


def sl2_lift(h) -> np.ndarray:
    """A matrix ``A`` in SL(2, R) whose symmetric square is ``h`` (sign is arbitrary)."""
    h = np.asarray(h, dtype=float)
    if h[0, 0] >= h[2, 2]:
        a = math.sqrt(h[0, 0])
        b = h[0, 1] / (SQ2 * a)
        c = h[1, 0] / (SQ2 * a)
        d = (1.0 + b * c) / a
    else:
        d = math.sqrt(h[2, 2])
        b = h[1, 2] / (SQ2 * d)
        c = h[2, 1] / (SQ2 * d)
        a = (1.0 + b * c) / d
    return np.array([[a, b], [c, d]])


def symmetric_square(A) -> np.ndarray:
    """Element of H induced by ``A`` in SL(2, R)."""
    (a, b), (c, d) = np.asarray(A, dtype=float)
    return np.array(
        [
            [a * a, SQ2 * a * b, b * b],
            [SQ2 * a * c, a * d + b * c, SQ2 * b * d],
            [c * c, SQ2 * c * d, d * d],
        ]
    )


# ---------------------------------------------------------------- certificates


def verify_ping_pong(generators, pp: PingPong, samples: int = PING_SAMPLES) -> float:
    """Check the ping-pong property; returns the worst angular margin (positive = pass).

    For every letter the complement of its repelling arc is sampled with
    ``samples`` points per arc of the system (including both ends) and
    every image must land in the attracting arc. The arcs must be pairwise
    disjoint.
    """
    k = len(generators)
    arcs = pp.arcs
    if len(arcs) != 2 * k:
        raise ValidationError("need one arc per letter")
    margin = math.inf
    for i in range(2 * k):
        for j in range(i + 1, 2 * k):
            sep = abs(float(_wrap(arcs[i].center - arcs[j].center))) - arcs[i].half_width - arcs[j].half_width
            margin = min(margin, sep)
    letters = list(generators) + [np.linalg.inv(g) for g in generators]
    for j in range(2 * k):
        rep = arcs[(j + k) % (2 * k)]
        lo = rep.center + rep.half_width
        hi = rep.center - rep.half_width + TWO_PI
        theta = np.linspace(lo, hi, samples * (2 * k - 1))
        img = act_boundary(letters[j], theta)
        att = arcs[j]
        margin = min(margin, float(np.min(att.half_width - np.abs(_wrap(img - att.center)))))
    return margin


def _certify(generators, pp: PingPong, samples: int = PING_SAMPLES) -> PingPong:
    m = verify_ping_pong(generators, pp, samples)
    if not m > 0:
        raise NotProvablyDiscreteError(f"ping-pong verification failed (margin {m:.3g})")
    return pp


def _letter_arcs(generators, fill: float) -> PingPong:
    fix = []
    for g in generators:
        a, r = fixed_points(g)
        fix.append((math.atan2(SQ2 * a[1], a[0] - a[2]), math.atan2(SQ2 * r[1], r[0] - r[2])))
    centres = [f[0] for f in fix] + [f[1] for f in fix]
    gap = math.inf
    for i in range(len(centres)):
        for j in range(i + 1, len(centres)):
            gap = min(gap, abs(float(_wrap(centres[i] - centres[j]))))
    if gap < 1e-12:
        raise NotProvablyDiscreteError("fixed points coincide")
    w = 0.5 * fill * gap
    return PingPong(tuple(Arc(float(_wrap(c)), w) for c in centres))


def schottky(axes, fill: float = ARC_FILL, samples: int = PING_SAMPLES, tree: Optional[TreeTag] = None) -> WordGroupRep:
    """Schottky group from ``[((attract_angle, repel_angle), length), ...]``.

    Lengths are translation lengths in the metric of X. Every letter gets
    an arc centred at its attracting fixed point; all arcs share the half
    width ``fill / 2`` times the smallest distance between fixed points.

    Raises
    ------
    NotProvablyDiscreteError
        When the arcs fail the ping-pong check.
    """
    gens = []
    for (att, rep), length in axes:
        if abs(float(_wrap(att - rep))) < 1e-12:
            raise ValidationError("axis endpoints coincide")
        gens.append(hyperbolic_elt(boundary_point(att), boundary_point(rep), length))
    pp = _certify(gens, _letter_arcs(gens, fill), samples)
    return WordGroupRep(tuple(gens), tree or TreeTag(), pp)


def standard_fixture(n: int = 1) -> WordGroupRep:
    """Axes through ``o`` at angles 0 and pi/2, translation lengths 4 (times ``n``)."""
    return schottky([((0.0, math.pi), 4.0 * n), ((0.5 * math.pi, -0.5 * math.pi), 4.0 * n)])


def power_subgroup(grp: WordGroupRep, n: int) -> WordGroupRep:
    """``<g1^n, ..., gk^n>`` with the same arcs, re-verified."""
    if n < 1:
        raise ValidationError("n must be positive")
    gens = tuple(np.linalg.matrix_power(g, n) for g in grp.generators)
    pp = None if grp.ping_pong is None else _certify(gens, grp.ping_pong)
    return WordGroupRep(gens, grp.tree, pp)


def conjugate(grp: WordGroupRep, h) -> WordGroupRep:
    """``h grp h^{-1}`` with the arcs carried along by ``h``."""
    h = h_elt(h)
    hi = np.linalg.inv(h)
    gens = tuple(h @ g @ hi for g in grp.generators)
    pp = None
    if grp.ping_pong is not None:
        arcs = []
        for a in grp.ping_pong.arcs:
            lo, hi_ = act_boundary(h, np.array(a.ends))
            span = float((hi_ - lo) % TWO_PI)
            arcs.append(Arc(float(_wrap(lo + 0.5 * span)), 0.5 * span))
        pp = _certify(gens, PingPong(tuple(arcs)))
    return WordGroupRep(gens, grp.tree, pp)


def _require_certificate(grp: WordGroupRep):
    if grp.ping_pong is None:
        raise ValidationError("operation needs a ping-pong certificate")


# ---------------------------------------------------------------- words


def reduced_words(k: int, depth: int) -> List[tuple]:
    """All nonempty reduced words of length at most ``depth``, shortlex order."""
    out, level = [], [(j,) for j in range(2 * k)]
    for _ in range(depth):
        out.extend(level)
        level = [w + (j,) for w in level for j in range(2 * k) if j != (w[-1] + k) % (2 * k)]
    return out


def word_levels(grp: WordGroupRep, depth: int):
    """Yield ``(matrices, words)`` for each word length ``1 .. depth`` (batched)."""
    L = np.array(grp.letters)
    k = grp.rank
    mats = L.copy()
    words = np.arange(2 * k)[:, None]
    yield mats, words
    for _ in range(depth - 1):
        nm, nw = [], []
        for j in range(2 * k):
            sel = words[:, -1] != (j + k) % (2 * k)
            nm.append(mats[sel] @ L[j])
            nw.append(np.column_stack([words[sel], np.full(int(sel.sum()), j)]))
        mats, words = np.concatenate(nm), np.concatenate(nw)
        yield mats, words


def word_ball(grp: WordGroupRep, radius: int):
    """Identity plus all reduced words of length ``<= radius``: ``(matrices, lengths)``."""
    mats, lens = [np.eye(3)[None]], [np.zeros(1, dtype=int)]
    for r, (m, _) in enumerate(word_levels(grp, radius), start=1):
        mats.append(m)
        lens.append(np.full(len(m), r))
    return np.concatenate(mats), np.concatenate(lens)


def displacement(mats) -> np.ndarray:
    """``d(o, g o)`` in curvature -1 units (the Hilbert metric of the disk) for g in H."""
    v = np.asarray(mats) @ _C
    return np.arccosh(np.maximum(0.5 * (v[..., 0] + v[..., 2]), 1.0))


# ---------------------------------------------------------------- limit sets


def _fixed_angle_2x2(a, b, c, d, lib=math):
    tr = a + d
    sq = lib.sqrt(tr * tr - 4)
    lam = (tr + sq) / 2 if tr >= 0 else (tr - sq) / 2
    u1, v1 = b, lam - a
    u2, v2 = lam - d, c
    if abs(u1) + abs(v1) >= abs(u2) + abs(v2):
        u, v = u1, v1
    else:
        u, v = u2, v2
    return 2 * lib.atan2(v, u)


def limit_set(grp: WordGroupRep, depth: int) -> BoundarySample:
    """Attracting fixed points of all reduced words of length ``<= depth``, shortlex order."""
    _require_certificate(grp)
    if depth < 1:
        raise ValidationError("depth must be positive")
    A = [sl2_lift(g) for g in grp.letters]
    words = reduced_words(grp.rank, depth)
    cache = {(): np.eye(2)}
    pts = np.empty(len(words))
    for i, w in enumerate(words):
        m = cache[w[:-1]] @ A[w[-1]]
        cache[w] = m
        pts[i] = _fixed_angle_2x2(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    return BoundarySample(_wrap(pts), depth, words)


def limit_gaps(grp: WordGroupRep, depth: int, prec: Optional[int] = None) -> np.ndarray:
    """Consecutive gaps of the sorted depth-``depth`` limit sample, exact beyond double precision.

    Fixed points are computed with ``mpmath`` at ``prec`` bits (default:
    enough to resolve the deepest cylinders) and sorted on the circle cut
    open at :meth:`PingPong.cut`. The gaps themselves are returned as
    floats, which keeps full relative precision.
    """
    _require_certificate(grp)
    if prec is None:
        ell = max(float(np.log(np.max(np.linalg.svd(np.array(grp.letters), compute_uv=False)))), 1.0)
        prec = 96 + int(depth * ell / math.log(2) * 1.25)
    A = [sl2_lift(g) for g in grp.letters]
    with mpmath.workprec(prec):
        Am = [mpmath.matrix(a.tolist()) for a in A]
        cache = {(): mpmath.eye(2)}
        cut = mpmath.mpf(grp.ping_pong.cut())
        two_pi = 2 * mpmath.pi
        pts = []
        for w in reduced_words(grp.rank, depth):
            m = cache[w[:-1]] * Am[w[-1]]
            cache[w] = m
            th = _fixed_angle_2x2(m[0, 0], m[0, 1], m[1, 0], m[1, 1], lib=mpmath)
            pts.append((th - cut) % two_pi)
        pts.sort()
        return np.array([float(pts[i + 1] - pts[i]) for i in range(len(pts) - 1)])


# ---------------------------------------------------------------- critical exponent


class OrbitFit(NamedTuple):
    slope: float
    r2: float
    window: Tuple[float, float]
    complete_to: float


class CriticalExponent(NamedTuple):
    delta_box: float
    delta_orbit: float
    agreement_gap: float
    box: fracdim.DimEstimate
    orbit: OrbitFit
    low_confidence: bool


def orbit_growth(grp: WordGroupRep, depth: Optional[int] = None, n_grid: int = 40) -> OrbitFit:
    """Slope of ``log #{w : d(o, w o) < T}`` against ``T``.

    ``T`` runs over the range where the enumeration to ``depth`` is complete
    (below the smallest displacement of a word of maximal length); the fit
    uses its upper two thirds.
    """
    k = grp.rank
    if depth is None:
        depth = 1
        while 2 * k * (2 * k - 1) ** depth <= ORBIT_WORDS:
            depth += 1
    d = []
    last = None
    for m, _ in word_levels(grp, depth):
        last = displacement(m)
        d.append(last)
    d = np.sort(np.concatenate(d))
    complete = float(last.min())
    T = np.linspace(complete / 3, complete, n_grid)
    N = np.searchsorted(d, T, side="left")
    sel = N > 0
    x, y = T[sel], np.log(N[sel])
    A = np.column_stack([x, np.ones_like(x)])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    res = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(res @ res) / ss if ss > 0 else 0.0
    return OrbitFit(float(coef[0]), r2, (float(x[0]), float(x[-1])), complete)


def critical_exponent(
    grp: WordGroupRep,
    box_depth: int = BOX_DEPTH,
    orbit_depth: Optional[int] = None,
    min_decades: float = 2.5,
) -> CriticalExponent:
    """Critical exponent by box counting on the limit set and by orbit counting.

    Distances are in curvature -1 units so that both routes estimate the
    same number (the Hausdorff dimension of the limit set). The box fit
    window is at least ``min_decades`` long, which averages over the
    lacunarity of strongly contracting groups.
    """
    _require_certificate(grp)
    gaps = limit_gaps(grp, box_depth)
    box = fracdim.box_dimension_gaps(gaps, min_window=_long_window(min_decades))
    orb = orbit_growth(grp, orbit_depth)
    low = box.low_confidence or orb.r2 < fracdim.LOW_R2
    return CriticalExponent(box.slope, orb.slope, abs(box.slope - orb.slope), box, orb, low)


# ---------------------------------------------------------------- geodesics


@dataclass(frozen=True, eq=False)
class GeodesicY:
    """Geodesic of Y with endpoints ``attract`` (forward) and ``repel`` (angles).

    ``forward`` and ``backward`` code the endpoints as infinite reduced words
    ``forward[0] forward[1] ...`` and ``backward[0] backward[1] ...``; they
    are truncated, and the closure sampler stops before running out.
    """

    attract: float
    repel: float
    forward: Tuple[int, ...] = ()
    backward: Tuple[int, ...] = ()
    seed: Optional[int] = None

    @property
    def frame(self) -> np.ndarray:
        return frame_from_endpoints(boundary_point(self.attract), boundary_point(self.repel))


def _coded_points(grp: WordGroupRep, forward: Sequence[int], backward: Sequence[int]):
    """Forward endpoints of all stages (backward recursion) and backward endpoints (forward recursion)."""
    L = grp.letters
    fix = [fixed_points(g)[0] for g in L]
    n = len(forward)
    fwd = np.empty((n, 3))
    v = fix[forward[-1]]
    for i in range(n - 1, -1, -1):
        v = L[forward[i]] @ v
        v = v / (v[0] + v[2])
        fwd[i] = v
    v = fix[backward[-1]]
    for i in range(len(backward) - 1, -1, -1):
        v = L[backward[i]] @ v
        v = v / (v[0] + v[2])
    bwd = np.empty((n, 3))
    bwd[0] = v
    for i in range(1, n):
        v = L[grp.inverse(forward[i - 1])] @ v
        v = v / (v[0] + v[2])
        bwd[i] = v
    return fwd, bwd


def _angle(v) -> float:
    return math.atan2(SQ2 * v[1], v[0] - v[2])


def coded_geodesic(grp: WordGroupRep, forward, backward, seed=None) -> GeodesicY:
    forward, backward = tuple(int(x) for x in forward), tuple(int(x) for x in backward)
    k = grp.rank
    for w in (forward, backward):
        if len(w) < 2:
            raise ValidationError("codings need at least two letters")
        if any(w[i + 1] == (w[i] + k) % (2 * k) for i in range(len(w) - 1)):
            raise ValidationError("coding is not reduced")
    if forward[0] == backward[0]:
        raise ValidationError("endpoints coincide (first letters agree)")
    fwd, bwd = _coded_points(grp, forward[:40], backward[:40])
    return GeodesicY(_angle(fwd[0]), _angle(bwd[0]), forward, backward, seed)


def axis_geodesic(grp: WordGroupRep, index: int = 0, n_letters: int = 4096) -> GeodesicY:
    """Axis of generator ``index`` (a closed geodesic in the quotient)."""
    return coded_geodesic(grp, (index,) * n_letters, (grp.inverse(index),) * 64)


def dense_geodesic(grp: WordGroupRep, seed: int, n_letters: int = 20000) -> GeodesicY:
    """Geodesic coded by uniformly random reduced words (seeded)."""
    _require_certificate(grp)
    rng = np.random.default_rng(seed)
    k = grp.rank

    def word(n, avoid=None):
        w = []
        while len(w) < n:
            j = int(rng.integers(2 * k))
            if (w and j == (w[-1] + k) % (2 * k)) or (not w and j == avoid):
                continue
            w.append(j)
        return w

    fwd = word(n_letters)
    bwd = word(64, avoid=fwd[0])
    return coded_geodesic(grp, fwd, bwd, seed)


# ---------------------------------------------------------------- closures


@dataclass(eq=False)
class QuotientOrbitCloud:
    """Reduced frames along a flow line, plus the frames where it crosses the section.

    The section is the set of frames whose base point is the foot of ``o``
    on their own geodesic; the coded flow crosses it once per stage.
    """

    frames: np.ndarray  # (n, 3, 3) reduced representatives
    times: np.ndarray
    stage: np.ndarray
    under_reduced: np.ndarray
    reduction_radius: int
    step: float
    section: np.ndarray  # (m, 3, 3)

    @property
    def warnings(self) -> int:
        return int(self.under_reduced.sum())

    @property
    def points(self) -> np.ndarray:
        return self.frames.reshape(len(self.frames), 9)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["time"] + [f"m{i}{j}" for i in range(3) for j in range(3)] + ["under_reduced"])
        for t, f, u in zip(self.times, self.frames, self.under_reduced):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in f.ravel()] + [int(u)])
        return buf.getvalue()


def reduce_frames(grp: WordGroupRep, frames, radius: int = REDUCTION_RADIUS):
    """Word-ball-minimal representatives ``gamma F`` (minimizing ``d(o, gamma F o)``).

    Returns ``(reduced, lengths)``; a minimizer of length ``radius`` means the
    ball may have been too small.
    """
    B, lens = word_ball(grp, radius)
    W = B[:, 0, :] + B[:, 2, :]  # cosh d(o, g F o) ~ row sums against F c
    F = np.asarray(frames, dtype=float)
    score = (F @ _C) @ W.T
    i = np.argmin(score, axis=1)
    return B[i] @ F, lens[i]


def closure_sample(
    grp: WordGroupRep, L: GeodesicY, T: float, step: float, reduction_radius: int = REDUCTION_RADIUS
) -> QuotientOrbitCloud:
    """Frames of the geodesic flow along ``L`` for times ``0 <= t < T``, reduced to the quotient.

    Time is measured in curvature -1 units. Each stage of the coding
    contributes the stretch of its geodesic between the feet of ``o`` and
    of ``x o`` (``x`` the next letter); frames are then reduced over the
    word ball of radius ``reduction_radius``.
    """
    if step <= 0 or T <= 0:
        raise ValidationError("T and step must be positive")
    if len(L.forward) < 64 or len(L.backward) < 2:
        raise ValidationError("closure sampling needs a coded geodesic")
    L_ = grp.letters
    n_stage = len(L.forward) - 48
    fwd, bwd = _coded_points(grp, L.forward, L.backward)
    frames, times, stages, section = [], [], [], []
    t_start, nxt = 0.0, 0.0
    for kk in range(n_stage):
        h = frame_from_endpoints(fwd[kk], bwd[kk])
        e1, e3 = h[:, 0], h[:, 2]
        u0 = 0.5 * math.log(form(_C, e3) / form(_C, e1))
        q = L_[L.forward[kk]] @ _C
        u1 = 0.5 * math.log(form(q, e3) / form(q, e1))
        section.append(h @ h_s(u0))
        span = u1 - u0
        if nxt < t_start + span:
            ts = np.arange(nxt, min(t_start + span, T), step)
            if len(ts):
                e = np.exp(u0 + ts - t_start)
                Hs = np.zeros((len(ts), 3, 3))
                Hs[:, 0, 0], Hs[:, 1, 1], Hs[:, 2, 2] = e, 1.0, 1.0 / e
                frames.append(h @ Hs)
                times.append(ts)
                stages.append(np.full(len(ts), kk))
                nxt = ts[-1] + step
        t_start += span
        if t_start >= T:
            break
    else:
        raise ValidationError("coding too short for the requested time")
    F = np.concatenate(frames)
    red, lens = reduce_frames(grp, F, reduction_radius)
    sec, _ = reduce_frames(grp, np.array(section), reduction_radius)
    return QuotientOrbitCloud(
        red, np.concatenate(times), np.concatenate(stages), lens == reduction_radius, reduction_radius, step, sec
    )


def hopf_coords(frames, cut: float) -> np.ndarray:
    """``(theta+, theta-, tau)``: endpoint angles (cut open at ``cut``) and signed time from the foot of ``o``."""
    F = np.asarray(frames, dtype=float)
    e1, e3 = F[..., :, 0], F[..., :, 2]
    tp = (np.arctan2(SQ2 * e1[..., 1], e1[..., 0] - e1[..., 2]) - cut) % TWO_PI
    tm = (np.arctan2(SQ2 * e3[..., 1], e3[..., 0] - e3[..., 2]) - cut) % TWO_PI
    tau = 0.5 * np.log(form(_C, e1) / form(_C, e3))
    return np.stack([tp, tm, tau], axis=-1)


def deck_images(grp: WordGroupRep, frames, chart, radius: int = 1) -> np.ndarray:
    """``chart(gamma F)`` for every frame and every ``gamma`` in the word ball (identity first)."""
    B, _ = word_ball(grp, radius)
    F = np.asarray(frames, dtype=float)
    return np.stack([chart(g @ F) for g in B], axis=1)


class ClosureDimension(NamedTuple):
    dimension: float
    route: str
    estimate: fracdim.DimEstimate  # raw fit (of the section for the section route)
    flow_dims: int  # added to the fitted slope


def closure_dimension(
    grp: WordGroupRep, cloud: QuotientOrbitCloud, route: str = "section", quotient: bool = True, **kw
) -> ClosureDimension:
    """Box dimension of the closure sampled by ``cloud``.

    ``route="section"`` counts the section crossings in the endpoint
    coordinates ``(theta+, theta-)`` and adds one for the flow direction:
    near every point the closure is a product of the section with an
    interval of flow time, and the section is a compact set away from the
    cut, so this count has no truncation edges and can be taken over many
    decades. ``route="hopf"`` counts the frames themselves in Hopf
    coordinates; with ``quotient=True`` the balls are taken in the quotient
    metric (unions over deck translates by the generators), which glues
    the faces of the fundamental domain.

    Keyword arguments go to :func:`fracdim.box_dimension`.
    """
    _require_certificate(grp)
    cut = grp.ping_pong.cut()

    def chart(F):
        return hopf_coords(F, cut)

    if route == "section":
        P = chart(cloud.section)[:, :2]
        kw.setdefault("min_window", _long_window(fit_decades(grp)))
        est = fracdim.box_dimension(P, metric="chebyshev", **kw)
        return ClosureDimension(est.slope + 1.0, route, est, 1)
    if route != "hopf":
        raise ValidationError(f"unknown route {route!r}")
    P = chart(cloud.frames)
    images = deck_images(grp, cloud.frames, chart) if quotient else None
    est = fracdim.box_dimension(P, metric="chebyshev", images=images, **kw)
    return ClosureDimension(est.slope, route, est, 0)


def _long_window(decades: float = 2.5) -> int:
    return int(math.ceil(decades * fracdim.PER_DECADE)) + 1


def contraction_decades(grp: WordGroupRep) -> float:
    """Decades of scale over which one letter contracts the limit set (the lacunarity period)."""
    return max(translation_length(g) for g in grp.generators) / calibration() / math.log(10.0)


def fit_decades(grp: WordGroupRep, floor: float = 2.5) -> float:
    """Fit windows for limit-set-like samples cover at least one lacunarity period."""
    return max(floor, contraction_decades(grp))


def quotient_distance(grp: WordGroupRep, x, y, radius: int = REDUCTION_RADIUS) -> float:
    """``min over the word ball of d(gamma x, y)`` for points of Y given as disk points."""
    from .hplane import hilbert_distance

    B, _ = word_ball(grp, radius)
    x = np.asarray(x, dtype=float)
    return calibration() * min(hilbert_distance(g @ x, y) for g in B)


# ---------------------------------------------------------------- product clouds
#
# Orbit clouds of floating planes (in G) and of orthogonal planes (in X)
# near a sampled base closure. Fibers are jittered grids; a sample reaches
# FIBER_HALF in each fiber direction but only the core (|coordinate| <
# CORE_HALF) is counted, so scales up to FIBER_HALF - CORE_HALF see no
# truncation edges.


class ProductCloud(NamedTuple):
    elements: np.ndarray  # (n, 3, 3) group elements, or points of X
    chart: np.ndarray  # (n, d) chart coordinates used for counting
    core: np.ndarray  # (n,) bool
    base_index: np.ndarray  # (n,) row of the base sample each point came from


def jittered_grid(half_width, step, dim: int, rng) -> np.ndarray:
    """One uniform point in each cell of a box grid on ``prod [-half_width_i, half_width_i]``.

    ``half_width`` and ``step`` are scalars or length-``dim`` sequences.
    """
    hw = np.broadcast_to(np.asarray(half_width, dtype=float), (dim,))
    st = np.broadcast_to(np.asarray(step, dtype=float), (dim,))
    m = np.maximum(1, np.round(2 * hw / st).astype(int))
    idx = np.stack(np.meshgrid(*[np.arange(k) for k in m], indexing="ij"), axis=-1).reshape(-1, dim)
    return -hw + (idx + rng.uniform(size=idx.shape)) * (2 * hw / m)


def _chart_speed(chart, E, dE, d: float = 1e-6) -> float:
    """Chebyshev chart displacement per unit parameter for ``E -> E dE(d)``."""
    return float(np.abs(chart(np.array([E @ dE(d)])) - chart(np.array([E]))).max() / d)


def _diag_flow(tau) -> np.ndarray:
    e = np.exp(np.asarray(tau, dtype=float))
    D = np.zeros((len(e), 3, 3))
    D[:, 0, 0], D[:, 1, 1], D[:, 2, 2] = e, 1.0, 1.0 / e
    return D


def flow_segments(frames, half_length: float, step: float = FIBER_STEP, core_half: float = CORE_HALF, seed: int = 0):
    """Frames ``F h_tau`` for every base frame and jittered ``|tau| <= half_length``.

    Returns ``(frames, core, base_index)``; the core is ``|tau| < core_half``.
    """
    rng = np.random.default_rng(seed)
    F = np.asarray(frames, dtype=float).reshape(-1, 3, 3)
    tau = jittered_grid(half_length, step, 1, rng)[:, 0]
    out = (F[:, None] @ _diag_flow(tau)[None]).reshape(-1, 3, 3)
    core = np.tile(np.abs(tau) < core_half, len(F))
    return out, core, np.repeat(np.arange(len(F)), len(tau))


def section_net(grp: WordGroupRep, cloud: QuotientOrbitCloud, eps: float, seed: int = 0) -> np.ndarray:
    """Section frames thinned to a greedy eps-net in endpoint coordinates (random visiting order)."""
    P = hopf_coords(cloud.section, grp.ping_pong.cut())[:, :2]
    order = np.random.default_rng(seed).permutation(len(P))
    return cloud.section[np.sort(fracdim.greedy_net(P, eps, "chebyshev", order))]


def floating_fiber(t: float, half_width: float = FIBER_HALF, step: float = FIBER_STEP, core_half: float = CORE_HALF, seed: int = 0):
    """Elements ``a_t k0 h_v k(theta)`` on a jittered ``(v, theta)`` grid; returns ``(elements, core)``.

    Widths and steps are in polar-chart units: each parameter is rescaled by
    the chart speed of its direction at ``v = theta = 0``.
    """
    rng = np.random.default_rng(seed)
    left = a_t(t) @ K0
    speed = np.array([_chart_speed(symspace.polar_chart, left, h_s), _chart_speed(symspace.polar_chart, left, k_theta)])
    vt = jittered_grid(half_width / speed, step / speed, 2, rng)
    E = np.array([left @ h_s(v) @ k_theta(th) for v, th in vt])
    return E, np.all(np.abs(vt) * speed < core_half, axis=1)


def orthogonal_fiber(half_width: float = FIBER_HALF, step: float = FIBER_STEP, core_half: float = CORE_HALF, seed: int = 0):
    """Elements ``g3 k0 h_v``: the geodesic of the orthogonal plane normal to L at its base point.

    ``v`` is arc length, which is also the log-chart speed.
    """
    rng = np.random.default_rng(seed)
    v = jittered_grid(half_width, step, 1, rng)[:, 0]
    E = np.array([G3 @ K0 @ h_s(x) for x in v])
    return E, np.abs(v) < core_half


def _product(base, base_core, fiber, fiber_core, chunk: int = 200_000):
    B = np.asarray(base, dtype=float)
    nb, nf = len(B), len(fiber)
    E = np.empty((nb * nf, 3, 3))
    step = max(1, chunk // nf)
    for i in range(0, nb, step):
        E[i * nf : (i + step) * nf] = (B[i : i + step, None] @ fiber[None]).reshape(-1, 3, 3)
    core = (np.asarray(base_core, bool)[:, None] & np.asarray(fiber_core, bool)[None]).reshape(-1)
    return E, core, np.repeat(np.arange(nb), nf)


def base_cloud(frames, core=None, space: str = "G") -> ProductCloud:
    """Wrap a base sample in the chart of ``space`` (``"G"``: polar chart, ``"X"``: log chart of ``F o``)."""
    F = np.asarray(frames, dtype=float)
    core = np.ones(len(F), bool) if core is None else np.asarray(core, bool)
    if space == "G":
        return ProductCloud(F, symspace.polar_chart(F), core, np.arange(len(F)))
    if space == "X":
        X = F @ np.swapaxes(F, -1, -2)
        return ProductCloud(X, symspace.log_chart(X), core, np.arange(len(F)))
    raise ValidationError(f"unknown space {space!r}")


def floating_cloud(frames, t: float, core=None, half_width: float = FIBER_HALF, step: float = FIBER_STEP,
                   core_half: float = CORE_HALF, seed: int = 0) -> ProductCloud:
    """Orbit points ``F a_t k0 h_v k(theta)`` of the floating plane over each base frame, in the polar chart.

    For ``F = gamma h h_u`` these are points of ``Gamma h a_t H`` because
    ``h_u`` commutes with ``a_t``.
    """
    F = np.asarray(frames, dtype=float)
    core = np.ones(len(F), bool) if core is None else core
    fib, fcore = floating_fiber(t, half_width, step, core_half, seed)
    E, c, bi = _product(F, core, fib, fcore)
    return ProductCloud(E, symspace.polar_chart(E), c, bi)


def orthogonal_cloud(frames, core=None, half_width: float = FIBER_HALF, step: float = FIBER_STEP,
                     core_half: float = CORE_HALF, seed: int = 0) -> ProductCloud:
    """Points ``F g3 k0 h_v o`` of the orthogonal planes through each base frame, in the log chart of X.

    With ``F = h h_u`` the point lies on ``Z_L = h g3 Y`` since ``g3`` commutes with A0.
    """
    F = np.asarray(frames, dtype=float)
    core = np.ones(len(F), bool) if core is None else core
    fib, fcore = orthogonal_fiber(half_width, step, core_half, seed)
    E, c, bi = _product(F, core, fib, fcore)
    X = E @ np.swapaxes(E, -1, -2)
    return ProductCloud(X, symspace.log_chart(X), c, bi)


def fiber_bound(t: float, half_width: float = FIBER_HALF, n: int = 401) -> float:
    """Largest ``|b|`` of the B+-component over the sampled fiber (see :func:`floating_fiber`)."""
    left = a_t(t) @ K0
    vmax = half_width / _chart_speed(symspace.polar_chart, left, h_s)
    E = np.array([left @ h_s(v) for v in np.linspace(-vmax, vmax, n)])
    _, _, b, _ = hbk.hbk_decompose_batch(E)
    return float(np.sqrt(6 * b[:, 0] ** 2 + 2 * b[:, 1] ** 2).max())


def product_membership(elements, t: float, half_width: float = FIBER_HALF, tol: float = MEMBERSHIP_TOL,
                       chunk: int = 100_000) -> float:
    """Fraction of elements whose B+-component is within the fiber bound.

    Points of the predicted product set ``closure(Gamma h A0) a_t k0 A0 K0``
    inside the sampled fiber have ``|b|`` at most :func:`fiber_bound`,
    whatever their H-component.
    """
    E = np.asarray(elements, dtype=float)
    bound = fiber_bound(t, half_width) + tol
    ok = 0
    for i in range(0, len(E), chunk):
        _, _, b, _ = hbk.hbk_decompose_batch(E[i : i + chunk])
        ok += int(np.count_nonzero(np.sqrt(6 * b[:, 0] ** 2 + 2 * b[:, 1] ** 2) <= bound))
    return ok / len(E) if len(E) else 0.0


class ProductDimension(NamedTuple):
    check: fracdim.ProductCheck
    base: fracdim.DimEstimate
    cloud: fracdim.DimEstimate


def product_dimension(base: ProductCloud, cloud: ProductCloud, fiber_dim: float, scales, seed: int = 0,
                      tol: float = 0.15) -> ProductDimension:
    """Counts of base and cloud on one scale ladder, both fitted over the whole ladder."""
    rng = np.random.default_rng(seed)
    nb = fracdim.net_counts(base.chart, scales, "chebyshev", rng.permutation(len(base.chart)), base.core)
    nc = fracdim.net_counts(cloud.chart, scales, "chebyshev", rng.permutation(len(cloud.chart)), cloud.core)
    window = (float(min(scales)), float(max(scales)))
    b, c = fracdim.fit_window(nb, window), fracdim.fit_window(nc, window)
    return ProductDimension(fracdim.product_dimension_check(b, fiber_dim, c, tol), b, c)


# ---------------------------------------------------------------- admissibility


class ChartReport(NamedTuple):
    chart: int
    miss_fraction: float
    rejected: bool
    dims_plus: Tuple[float, ...]
    dims_minus: Tuple[float, ...]
    stability_plus: float
    stability_minus: float
    stable: bool


def window_dimensions(values, windows: int = 3, per_decade: int = fracdim.PER_DECADE):
    """Least-squares box-dimension slopes of a 1-D sample over ``windows`` consecutive scale windows.

    The scale ladder runs from half the extent down to the scale where the
    count saturates at 10% of the sample; it is cut into equal thirds (by
    default) and each third is fitted on its own.
    """
    x = np.sort(np.asarray(values, dtype=float))
    gaps = np.diff(x)
    n = len(x)
    hi = 0.5 * float(x[-1] - x[0])
    pos = gaps[gaps > 0]
    if hi <= 0 or len(pos) == 0:
        return tuple(0.0 for _ in range(windows))
    scales = fracdim.geometric_scales(hi, max(fracdim.MIN_DECADES, math.log10(hi / float(pos.min()))))
    gl = gaps.tolist()
    counts = []
    for e in scales:
        c = fracdim.net_count_gaps(gl, float(e))
        if c > fracdim.SATURATION * n:
            break
        counts.append((float(e), c))
    m = len(counts) // windows
    out = []
    for w in range(windows):
        part = counts[w * m : (w + 1) * m]
        if m < 2:
            out.append(float("nan"))
            continue
        le = np.log([1.0 / e for e, _ in part])
        lc = np.log([c for _, c in part])
        out.append(float(np.polyfit(le, lc, 1)[0]) if np.ptp(lc) > 0 else 0.0)
    return tuple(out)


def admissibility_check(grp: WordGroupRep, cloud: QuotientOrbitCloud, charts=None, tol: float = STABILITY_TOL) -> List[ChartReport]:
    """Per chart: Bruhat-project the cloud and test box-dimension stability over three windows.

    ``charts`` is a list of base points ``h0`` in H (default: the identity).
    A chart is rejected when more than half of the frames miss it.
    """
    charts = [np.eye(3)] if charts is None else list(charts)
    out = []
    for ci, h0 in enumerate(charts):
        plus, minus, miss = [], [], 0
        for F in cloud.frames:
            try:
                c = bruhat_coords(F, h0)
            except ChartMissError:
                miss += 1
                continue
            plus.append(c.n_plus)
            minus.append(c.n_minus)
        frac = miss / len(cloud.frames)
        if frac > CHART_MISS_MAX or len(plus) < 2:
            out.append(ChartReport(ci, frac, True, (), (), math.nan, math.nan, False))
            continue
        dp, dm = window_dimensions(plus), window_dimensions(minus)
        sp, sm = float(np.ptp(dp)), float(np.ptp(dm))
        out.append(ChartReport(ci, frac, False, dp, dm, sp, sm, bool(sp <= tol and sm <= tol)))
    return out


# ---------------------------------------------------------------- export


def boundary_csv(sample: BoundarySample) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["word", "angle"])
    for word, th in zip(sample.words, sample.points):
        w.writerow([" ".join(str(j) for j in word), repr(float(th))])
    return buf.getvalue()


def limit_arc_check(grp: WordGroupRep, sample: BoundarySample, tol: float = 1e-12) -> bool:
    """All sample points lie in the union of the certificate arcs."""
    _require_certificate(grp)
    inside = np.zeros(len(sample.points), dtype=bool)
    for a in grp.ping_pong.arcs:
        inside |= a.contains(sample.points, tol)
    return bool(inside.all())


def boundary_residual(sample: BoundarySample) -> float:
    """Largest ``|F(p)|`` over the sample (points normalized to ``x + z = 1``)."""
    P = np.array([boundary_point(t) for t in sample.points])
    return float(np.max(np.abs(form(P))))
