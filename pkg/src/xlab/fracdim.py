"""Box-counting dimension from greedy epsilon-nets.

``N(eps)`` is the size of a greedy eps-net (points visited in a fixed order;
a point becomes a centre unless it lies within ``eps`` of an earlier
centre). Covering numbers of this kind are invariant under isometries and
comparable to coordinate box counts, so they give the same box dimension in
curved spaces. The dimension estimate is the least-squares slope of
``log N`` against ``log(1/eps)`` over the contiguous window of scales with
the best ``r^2``; scales where the count is saturated by the sample size are
excluded first.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError

MIN_POINTS = 1000
MIN_SCALES = 8
MIN_DECADES = 2.5
MIN_WINDOW = 5
SATURATION = 0.1
PER_DECADE = 8
MAX_DECADES = 8.0
LOW_R2 = 0.98

Metric = Union[str, Callable, None]
_MINKOWSKI = {None: 2.0, "euclidean": 2.0, "chebyshev": np.inf}


@dataclass
class DimEstimate:
    slope: float
    r2: float
    window: Tuple[float, float]
    counts: List[Tuple[float, int]]
    low_confidence: bool = False
    notes: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DimEstimate":
        d = json.loads(text)
        d["window"] = tuple(d["window"])
        d["counts"] = [tuple(c) for c in d["counts"]]
        return cls(**d)

    def counts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["scale", "count"])
        for s, n in self.counts:
            w.writerow([repr(float(s)), int(n)])
        return buf.getvalue()


def geometric_scales(hi: float, decades: float = 3.0, n: Optional[int] = None) -> np.ndarray:
    """Scales from ``hi`` down to ``hi * 10**-decades`` (default 8 per decade)."""
    if n is None:
        n = int(math.ceil(decades * PER_DECADE)) + 1
    return hi * np.logspace(0.0, -decades, n)


def default_scales(points, metric: Metric = None) -> np.ndarray:
    """Half the diameter down to the closest-pair distance, 8 scales per decade.

    Ending at the closest pair keeps the scale ladder fine enough for
    lacunary sets (Cantor-like gaps alias badly on a coarse ladder). For a
    callable metric the range is a fixed 3 decades.
    """
    hi = 0.5 * diameter(points, metric)
    if _is_coord(metric):
        P = _as_points(points).reshape(len(points), -1)
        nn = cKDTree(P).query(P, k=2, p=_MINKOWSKI[metric])[0][:, 1]
        nn = nn[nn > 0]
        lo = float(nn.min()) if len(nn) else hi * 1e-3
        decades = min(MAX_DECADES, max(MIN_DECADES, math.log10(hi / lo)))
    else:
        decades = 3.0
    return geometric_scales(hi, decades)


def _as_points(points):
    return np.asarray(points, dtype=float)


def _is_coord(metric) -> bool:
    return isinstance(metric, str) or metric is None


def net_count(points, eps: float, metric: Metric = None, order=None, tree=None, images=None, core=None) -> int:
    """Size of the greedy eps-net of ``points``.

    ``metric`` is ``None``/``"euclidean"``, ``"chebyshev"`` (both on
    coordinate arrays, via a k-d tree) or a callable ``metric(p, Q)``.

    ``images`` (coordinate metrics only) is an ``(n, m, d)`` array of
    coordinates of ``m`` translates of every point under a finite set of
    deck transformations. The ball about a centre is then the union of the
    balls about its translates, which approximates the quotient metric
    ``min_g d(g x, y)`` and removes the artificial boundary of a
    fundamental domain.

    ``core`` (boolean mask) restricts the count to centres inside the core
    while the net is still built over the whole sample. For a sample that
    extends at least ``eps`` beyond the core this counts the core part of
    the set without the truncation error at the edges of the sample.
    """
    if _is_coord(metric) and metric not in _MINKOWSKI:
        raise ValidationError(f"unknown metric {metric!r}")
    P = _as_points(points) if _is_coord(metric) else points
    n = len(P)
    idx = np.arange(n) if order is None else np.asarray(order)
    covered = np.zeros(n, dtype=bool)
    weight = np.ones(n, dtype=int) if core is None else np.asarray(core, dtype=bool).astype(int)
    count = 0
    if _is_coord(metric):
        flat = P.reshape(n, -1)
        tree = cKDTree(flat) if tree is None else tree
        p = _MINKOWSKI[metric]
        if images is None:
            for i in idx:
                if covered[i]:
                    continue
                count += weight[i]
                covered[tree.query_ball_point(flat[i], eps, p=p)] = True
            return int(count)
        images = np.asarray(images, dtype=float)
        for i in idx:
            if covered[i]:
                continue
            count += weight[i]
            for hit in tree.query_ball_point(images[i], eps, p=p):
                covered[hit] = True
        return int(count)
    if images is not None:
        raise ValidationError("images require a coordinate metric")
    for i in idx:
        if covered[i]:
            continue
        count += weight[i]
        rest = np.flatnonzero(~covered)
        d = np.asarray(metric(P[i], [P[j] for j in rest] if isinstance(P, list) else P[rest]))
        covered[rest[d <= eps]] = True
    return int(count)


def _fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(coef[0]), max(0.0, min(1.0, r2))


def fit_counts(
    counts: Sequence[Tuple[float, int]],
    n_points: int,
    min_window: int = MIN_WINDOW,
    saturation: float = SATURATION,
) -> DimEstimate:
    """Best-``r^2`` contiguous-window slope for precomputed ``(scale, count)`` pairs."""
    counts = sorted(((float(s), int(c)) for s, c in counts), key=lambda sc: -sc[0])
    eps = np.array([s for s, _ in counts])
    N = np.array([c for _, c in counts], dtype=float)
    usable = N <= saturation * n_points
    notes = []
    best = None
    m = len(counts)
    for i in range(m):
        for j in range(i + min_window, m + 1):
            if not np.all(usable[i:j]):
                break
            x = np.log(1.0 / eps[i:j])
            y = np.log(N[i:j])
            if np.ptp(y) == 0:
                continue
            slope, r2 = _fit(x, y)
            key = (round(r2, 4), j - i)
            if best is None or key > best[0]:
                best = (key, slope, r2, (eps[j - 1], eps[i]))
    if best is None:
        notes.append("no unsaturated window of the minimum length; fitted all scales")
        slope, r2 = _fit(np.log(1.0 / eps), np.log(N))
        est = DimEstimate(slope, r2, (float(eps[-1]), float(eps[0])), counts, True, notes)
        return est
    _, slope, r2, window = best
    return DimEstimate(slope, r2, (float(window[0]), float(window[1])), counts, r2 < LOW_R2, notes)


def box_dimension(
    points,
    metric: Metric = None,
    scales: Optional[Sequence[float]] = None,
    order=None,
    min_window: int = MIN_WINDOW,
    saturation: float = SATURATION,
    min_points: int = MIN_POINTS,
    images=None,
    core=None,
) -> DimEstimate:
    """Box-counting dimension of a finite sample.

    Parameters
    ----------
    points : array_like or list
        ``(N, ...)`` array for the Euclidean metric, or any sequence of
        objects understood by ``metric``.
    metric : None, "euclidean" or callable
        ``metric(p, Q)`` must return the distances from ``p`` to every
        element of ``Q``.
    scales : sequence of float, optional
        At least 8 scales spanning at least 2.5 decades. Defaults to
        :func:`default_scales`. Counting stops once a scale saturates at
        more than three times the saturation fraction of the sample.
    order : sequence of int, optional
        Visiting order for the greedy nets (default: sample order).
    images : array_like, optional
        Translates of every point, see :func:`net_count`.
    core : array_like of bool, optional
        Count only centres in the core, see :func:`net_count`. Saturation
        is then judged against the number of core points.
    """
    n = len(points)
    if n < min_points:
        raise ValidationError(f"need at least {min_points} points, got {n}")
    if scales is None:
        scales = default_scales(points, metric)
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    if len(scales) < MIN_SCALES:
        raise ValidationError(f"need at least {MIN_SCALES} scales")
    if scales[-1] <= 0 or math.log10(scales[0] / scales[-1]) < MIN_DECADES - 1e-9:
        raise ValidationError(f"scales must span at least {MIN_DECADES} decades")
    counts = []
    tree = cKDTree(_as_points(points).reshape(n, -1)) if _is_coord(metric) else None
    n_eff = n if core is None else int(np.count_nonzero(core))
    for e in scales:
        c = net_count(points, e, metric, order, tree, images, core)
        counts.append((float(e), c))
        if c > 3 * saturation * n_eff:
            break
    return fit_counts(counts, n_eff, min_window, saturation)


def greedy_net(points, eps: float, metric: Metric = "chebyshev", order=None) -> np.ndarray:
    """Indices of the centres of a greedy eps-net (coordinate metrics only)."""
    if not _is_coord(metric) or metric not in _MINKOWSKI:
        raise ValidationError(f"greedy_net needs a coordinate metric, got {metric!r}")
    P = _as_points(points)
    n = len(P)
    flat = P.reshape(n, -1)
    tree = cKDTree(flat)
    covered = np.zeros(n, dtype=bool)
    centres = []
    for i in np.arange(n) if order is None else np.asarray(order):
        if covered[i]:
            continue
        centres.append(i)
        covered[tree.query_ball_point(flat[i], eps, p=_MINKOWSKI[metric])] = True
    return np.array(centres, dtype=int)


def net_counts(points, scales: Sequence[float], metric: Metric = None, order=None, core=None) -> List[Tuple[float, int]]:
    """``(scale, N(scale))`` on an explicit ladder, without the range checks of
    :func:`box_dimension`.

    Meant for product samples whose density only supports about a decade of
    scales; pair with :func:`fit_window` to compare two sets on the same
    window.
    """
    P = _as_points(points)
    n = len(P)
    tree = cKDTree(P.reshape(n, -1))
    return [(float(e), net_count(P, e, metric, order, tree, None, core)) for e in sorted(scales, reverse=True)]


def fit_window(counts: Sequence[Tuple[float, int]], window: Tuple[float, float]) -> DimEstimate:
    """Least-squares slope over the scales inside ``window = (lo, hi)``."""
    lo, hi = window
    sel = sorted(((float(s), int(c)) for s, c in counts if lo * (1 - 1e-9) <= s <= hi * (1 + 1e-9)), key=lambda sc: -sc[0])
    if len(sel) < 2:
        raise ValidationError("window holds fewer than two scales")
    x = np.log([1.0 / s for s, _ in sel])
    y = np.log([max(c, 1) for _, c in sel])
    slope, r2 = _fit(x, y)
    return DimEstimate(slope, r2, (sel[-1][0], sel[0][0]), list(counts), r2 < LOW_R2, [])


def net_count_gaps(gaps, eps: float) -> int:
    """Greedy eps-net size of sorted points on a line, given consecutive gaps.

    Points are visited left to right. Only gaps are needed, so points that
    are closer together than double precision can resolve (deep limit-set
    samples computed in extended precision) are handled exactly.
    """
    count = 1
    acc = 0.0
    for g in gaps:
        acc += g
        if acc > eps:
            count += 1
            acc = 0.0
    return count


def box_dimension_gaps(
    gaps,
    scales: Optional[Sequence[float]] = None,
    min_window: int = MIN_WINDOW,
    saturation: float = SATURATION,
    min_points: int = MIN_POINTS,
) -> DimEstimate:
    """:func:`box_dimension` for a sorted sample on a line described by its gaps.

    Default scales run from half the total length down to the smallest
    positive gap, 8 per decade.
    """
    gaps = np.asarray(gaps, dtype=float)
    n = len(gaps) + 1
    if n < min_points:
        raise ValidationError(f"need at least {min_points} points, got {n}")
    if np.any(gaps < 0):
        raise ValidationError("gaps must be nonnegative")
    if scales is None:
        hi = 0.5 * float(gaps.sum())
        pos = gaps[gaps > 0]
        if hi <= 0 or len(pos) == 0:
            raise ValidationError("sample has no extent")
        scales = geometric_scales(hi, max(MIN_DECADES, math.log10(hi / float(pos.min()))))
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    if len(scales) < MIN_SCALES:
        raise ValidationError(f"need at least {MIN_SCALES} scales")
    if scales[-1] <= 0 or math.log10(scales[0] / scales[-1]) < MIN_DECADES - 1e-9:
        raise ValidationError(f"scales must span at least {MIN_DECADES} decades")
    gl = gaps.tolist()
    counts = []
    for e in scales:
        c = net_count_gaps(gl, float(e))
        counts.append((float(e), c))
        if c > 3 * saturation * n:
            break
    return fit_counts(counts, n, min_window, saturation)


def diameter(points, metric: Metric = None) -> float:
    """Diameter upper bound: bounding-box diagonal for coordinate metrics, twice a radius otherwise."""
    if _is_coord(metric):
        P = _as_points(points).reshape(len(points), -1)
        ext = P.max(axis=0) - P.min(axis=0)
        return float(np.max(ext)) if metric == "chebyshev" else float(np.linalg.norm(ext))
    d = np.asarray(metric(points[0], points))
    return float(2.0 * d.max())


def hausdorff_distance(A, B, metric: Metric = None) -> float:
    """Symmetric Hausdorff distance between finite samples."""
    if len(A) == 0 or len(B) == 0:
        raise ValidationError("samples must be nonempty")
    if _is_coord(metric):
        p = _MINKOWSKI[metric]
        PA = _as_points(A).reshape(len(A), -1)
        PB = _as_points(B).reshape(len(B), -1)
        dab = cKDTree(PB).query(PA, p=p)[0].max()
        dba = cKDTree(PA).query(PB, p=p)[0].max()
        return float(max(dab, dba))
    dab = max(float(np.min(metric(a, B))) for a in A)
    dba = max(float(np.min(metric(b, A))) for b in B)
    return max(dab, dba)


@dataclass
class ProductCheck:
    base: float
    product: float
    fiber_dim: float
    residual: float
    lower_bound: float
    upper_bound: float
    lower_ok: bool
    upper_ok: bool
    low_confidence: bool


def product_dimension_check(base: DimEstimate, fiber_dim: float, product: DimEstimate, tol: float = 0.15) -> ProductCheck:
    """Compare ``dim(product)`` with ``dim(base) + fiber_dim``.

    Also reports the sandwich ``(3 + b) / 2 <= dim <= 1 + b`` for the closure
    in X of a floating plane over a geodesic closure of dimension ``b``
    (meaningful when ``fiber_dim == 2`` and ``base`` is that geodesic closure).
    The X-side value is the group-side estimate minus the K0 circle, which
    is an upper proxy: it cannot see further collapse under the quotient.
    """
    b, p = base.slope, product.slope
    lo, hi = 0.5 * (3 + b), 1 + b
    x = p - 1.0
    return ProductCheck(
        b,
        p,
        fiber_dim,
        p - (b + fiber_dim),
        lo,
        hi,
        x >= lo - tol,
        x <= hi + tol,
        base.low_confidence or product.low_confidence,
    )


# ---------------------------------------------------------------- reference sets


def cantor_points(depth: int = 12) -> np.ndarray:
    """Left endpoints of the middle-thirds construction at the given depth."""
    x = np.zeros(1)
    for k in range(depth):
        x = np.concatenate([x, x + 2.0 * 3.0 ** -(k + 1)])
    return np.sort(x)[:, None]


def ifs_points(ratio: float, depth: int) -> np.ndarray:
    """Two-map IFS ``x -> r x`` and ``x -> r x + 1 - r`` iterated ``depth`` times."""
    x = np.zeros(1)
    for _ in range(depth):
        x = np.concatenate([ratio * x, ratio * x + 1 - ratio])
    return np.sort(x)[:, None]


def segment_points(n: int = 2000) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)[:, None]
