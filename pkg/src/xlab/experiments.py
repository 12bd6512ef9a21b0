"""Named, configurable experiments.

Each experiment fills an :class:`ExperimentResult` with tables (every row
carries the parameters that produced it), threshold checks and plots. The
command-line runner serializes the result; the acceptance suite reads the
checks directly.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from . import bulging, fracdim, fuchsian, hbk, hplane, mat3, symspace
from .errors import BudgetExhausted, DegenerateFlagError, ValidationError


@dataclass
class Table:
    name: str
    params: List[str]
    rows: List[dict] = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)


@dataclass
class Check:
    criterion: int
    name: str
    value: float
    threshold: str
    passed: bool


@dataclass
class LinePlot:
    title: str
    xlabel: str
    ylabel: str
    series: List[tuple]  # (label, xs, ys)
    logx: bool = False
    logy: bool = False


@dataclass
class HeatMap:
    title: str
    xlabel: str
    ylabel: str
    xs: Sequence[float]
    ys: Sequence[float]
    values: np.ndarray  # shape (len(ys), len(xs))


@dataclass
class ExperimentResult:
    experiment: str
    tables: List[Table] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    plots: list = field(default_factory=list)
    partial: bool = False

    def table(self, name, params):
        t = Table(name, list(params))
        self.tables.append(t)
        return t

    def check(self, criterion, name, value, threshold, passed):
        self.checks.append(Check(criterion, name, float(value), threshold, bool(passed)))

    @property
    def passed(self) -> bool:
        return not self.partial and all(c.passed for c in self.checks)


class Budget:
    """Wall-clock budget checked between stages."""

    def __init__(self, seconds: Optional[float] = None):
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self, stage: str):
        if self.seconds is not None and time.monotonic() - self.start > self.seconds:
            raise BudgetExhausted(f"budget of {self.seconds} s exhausted before {stage}")


class Experiment(NamedTuple):
    name: str
    anchor: str
    criteria: tuple
    params: dict
    tolerances: dict
    runner: Callable


def _fit_plot(title, estimates):
    """Log-log plot of net counts with the fitted lines."""
    series = []
    for label, est in estimates:
        s = np.array([c[0] for c in est.counts], float)
        n = np.array([c[1] for c in est.counts], float)
        series.append((label, 1 / s, n))
        lo, hi = est.window
        w = s[(s >= lo) & (s <= hi)]
        if len(w):
            ref = n[(s >= lo) & (s <= hi)]
            c = np.mean(np.log(ref) + est.slope * np.log(w))
            series.append((f"{label} fit {est.slope:.3f}", 1 / w, np.exp(c - est.slope * np.log(w))))
    return LinePlot(title, "1 / scale", "net count", series, logx=True, logy=True)


def _counts_table(res, name, estimates, extra):
    tab = res.table(name, list(extra) + ["label", "scale"])
    for label, est in estimates:
        for s, n in est.counts:
            tab.add(**extra, label=label, scale=float(s), count=int(n))
    return tab


# ---------------------------------------------------------------- calibration


def run_calibration(p, tol, res, budget, seed):
    rng = np.random.default_rng(seed)
    n = p["samples"]
    tab = res.table("roundtrips", ["routine", "samples"])
    worst = {}
    e = 0.0
    for _ in range(n):
        A = rng.normal(size=(3, 3))
        S = A + A.T
        r = mat3.sym_eig(S)
        e = max(e, float(np.abs(r.vectors @ np.diag(r.values) @ r.vectors.T - S).max()))
    worst["sym_eig"] = e
    budget.check("svd3")
    e = 0.0
    for _ in range(n):
        M = rng.normal(size=(3, 3))
        f = mat3.svd3(M)
        e = max(e, float(np.abs(f.u @ np.diag(f.s) @ f.v.T - M).max()))
    worst["svd3"] = e
    budget.check("expm/logm")
    e = 0.0
    for _ in range(n):
        A = rng.normal(size=(3, 3))
        S = 0.5 * (A + A.T)
        e = max(e, float(np.abs(mat3.logm_spd(mat3.expm(S)) - S).max()))
    worst["expm_logm"] = e
    for k, v in worst.items():
        tab.add(routine=k, samples=n, max_error=v)
        res.check(1, f"{k} roundtrip", v, f"<= {tol['roundtrip']}", v <= tol["roundtrip"])
    budget.check("fractals")
    fr = res.table("fractals", ["set", "depth"])
    sets = [
        ("cantor", fracdim.cantor_points(p["depth"]), math.log(2) / math.log(3)),
        ("segment", fracdim.segment_points(p["segment_points"]), 1.0),
        ("ifs_quarter", fracdim.ifs_points(0.25, p["depth"]), 0.5),
    ]
    ests = []
    for name, pts, exact in sets:
        est = fracdim.box_dimension(pts)
        ests.append((name, est))
        err = abs(est.slope - exact)
        fr.add(set=name, depth=p["depth"], exact=exact, estimate=est.slope, r2=est.r2, error=err)
        res.check(1, f"{name} box dimension", err, f"<= {tol['box']}", err <= tol["box"])
    _counts_table(res, "fractal_counts", ests, {"depth": p["depth"]})
    res.plots.append(_fit_plot("Calibration fractals", ests))


# ---------------------------------------------------------------- Cartan asymptotics


def _mu_deviation(ts, ss):
    D = np.empty((len(ss), len(ts)))
    for j, t in enumerate(ts):
        for i, s in enumerate(ss):
            ref = np.array([t + abs(s), t, -2 * t - abs(s)])
            D[i, j] = np.abs(symspace.mu(hbk.gamma(t, s)) - ref).max()
    return D


def run_cartan(p, tol, res, budget, seed):
    t0, t1 = p["t_range"]
    s0, s1 = p["s_range"]
    n = p["grid_points"]
    tab = res.table("mu_deviation", ["grid", "t", "s"])
    sups = {}
    for label, m in (("base", n), ("doubled", 2 * n - 1)):
        ts = np.linspace(t0, t1, m)
        sa = np.linspace(s0, s1, m)
        ss = np.concatenate([-sa[::-1], sa])
        D = _mu_deviation(ts, ss)
        for i, s in enumerate(ss):
            for j, t in enumerate(ts):
                tab.add(grid=label, t=float(t), s=float(s), deviation=float(D[i, j]))
        sups[label] = float(D.max())
        if label == "base":
            res.plots.append(HeatMap("Cartan projection deviation", "t", "s", ts, ss, D))
        budget.check("doubled grid")
    excess = sups["doubled"] - sups["base"]
    res.table("mu_sup", ["grid"]).rows.extend({"grid": k, "sup": v} for k, v in sups.items())
    res.check(2, "doubled-grid sup excess", excess, f"<= {tol['doubling']}", excess <= tol["doubling"])
    seqs = {
        "n_n": (lambda k: (k, k), "uniformly_regular"),
        "n_sqrt_n": (lambda k: (k, math.sqrt(k)), "regular"),
        "n_0": (lambda k: (k, 0.0), "irregular"),
    }
    reg = res.table("regularity", ["sequence", "n_max"])
    for name, (f, expected) in seqs.items():
        samples = [hbk.gamma(*f(k)) for k in range(1, p["n_max"] + 1)]
        rep = symspace.divergence_report(samples)
        reg.add(sequence=name, n_max=p["n_max"], label=rep.label, expected=expected,
                gap_slope_1=float(rep.gap_slopes[0]), gap_slope_2=float(rep.gap_slopes[1]),
                norm_slope=rep.norm_slope, uniform_floor=rep.floor)
        res.check(3, f"classification of {name}", float(rep.label == expected), f"== {expected}", rep.label == expected)


# ---------------------------------------------------------------- limit flags


def run_gamma_limits(p, tol, res, budget, seed):
    T = p["t_limit"]
    e13 = np.array([1.0, 0.0, 1.0])
    lim = res.table("limit_flag", ["t", "s"])
    for s in (T, -T):
        f = symspace.flag_of(hbk.gamma(T, s))
        d = symspace.projective_distance(f.p, e13)
        lim.add(t=T, s=s, distance_to_e1_plus_e3=d)
        res.check(4, f"flag point of gamma({T}, {s})", d, f"<= {tol['limit']}", d <= tol["limit"])
    budget.check("fiber limit flags")
    tab = res.table("fiber_limit_flags", ["t", "s"])
    worst, classified = 0.0, 0
    for t in p["t_values"]:
        for s in p["s_values"]:
            try:
                f = symspace.flag_of(hbk.gamma(t, s))
            except DegenerateFlagError:
                tab.add(t=t, s=s, classified=False, distance=float("nan"))
                continue
            d = hbk.fiber_limit_flags_distance(f, p["n_theta"])
            classified += 1
            worst = max(worst, d)
            tab.add(t=t, s=s, classified=True, distance=d)
    res.check(4, "classified flags in fiber limit set", worst, f"<= {tol['flag']}", classified > 0 and worst <= tol["flag"])


# ---------------------------------------------------------------- projection and narrowing


def _random_point(rng, scale):
    A = rng.normal(scale=scale, size=(3, 3))
    Z = 0.5 * (A + A.T)
    Z -= np.trace(Z) / 3 * np.eye(3)
    return mat3.expm(2 * Z)


def run_projection(p, tol, res, budget, seed):
    rng = np.random.default_rng(seed)
    n = p["samples"]
    err_c = 0.0
    for _ in range(n):
        h = hplane.random_h(rng)
        t, s = rng.uniform(-2, 2, size=2)
        g = h @ hbk.exp_b(t, s)
        err_c = max(err_c, symspace.distance(hbk.project(symspace.point_of(g)), symspace.point_of(h)))
    budget.check("oracle")
    err_o = lip = eqv = 0.0
    for _ in range(p["oracle_samples"]):
        x = _random_point(rng, p["scale"])
        err_o = max(err_o, symspace.distance(hbk.project(x), hbk.project_oracle(x)))
    budget.check("lipschitz")
    for _ in range(n):
        x, y = _random_point(rng, p["scale"]), _random_point(rng, p["scale"])
        lip = max(lip, symspace.distance(hbk.project(x), hbk.project(y)) - symspace.distance(x, y))
        h = hplane.random_h(rng)
        eqv = max(eqv, symspace.distance(hbk.project(symspace.act(h, x)), symspace.act(h, hbk.project(x))))
    tab = res.table("projection", ["property", "samples"])
    for name, v, key, m in (("fiber_inputs", err_c, "constructed", n), ("oracle_agreement", err_o, "oracle", p["oracle_samples"]),
                            ("lipschitz_excess", lip, "lipschitz", n), ("equivariance", eqv, "equivariance", n)):
        tab.add(property=name, samples=m, max_error=v)
        res.check(5, name, v, f"<= {tol[key]}", v <= tol[key])
    budget.check("narrowing")
    S = p["s_half"]
    prof = res.table("narrowing_profile", ["t", "s"])
    sups = res.table("narrowing_sup", ["t", "s_points"])
    series, sup, slack = [], [], 0.0
    for t in p["t_values"]:
        rows = hbk.projection_profile(t, np.linspace(-S, S, p["s_points"]))
        fine = hbk.projection_profile(t, np.linspace(-S, S, 2 * p["s_points"] - 1))
        for s, d in rows:
            prof.add(t=t, s=s, distance=d)
        a, b = max(d for _, d in rows), max(d for _, d in fine)
        slack = max(slack, abs(b - a))
        sup.append(a)
        sups.add(t=t, s_points=p["s_points"], sup=a, sup_doubled=b)
        series.append((f"t={t}", [s for s, _ in rows], [d for _, d in rows]))
    res.plots.append(LinePlot("Projected floating geodesics", "s", "d(pi(gamma_t(s) o), L)", series))
    mono = all(np.isfinite(sup)) and all(b <= a + slack for a, b in zip(sup, sup[1:]))
    res.check(6, "sup profile non-increasing in t", slack, "sampling slack", mono)
    ratio = sup[-1] / sup[0]
    res.check(6, "last over first sup", ratio, f"< {tol['narrow_ratio']}", ratio < tol["narrow_ratio"])


# ---------------------------------------------------------------- fibers and floating planes


def run_fiber_hausdorff(p, tol, res, budget, seed):
    tab = res.table("fiber_translation", ["c", "radius", "n"])
    for c in p["c_values"]:
        r = hbk.fiber_translation_check(c, p["radius"], p["n"])
        tab.add(c=c, radius=p["radius"], n=p["n"], hausdorff=r.hausdorff, sampled=r.sampled, bound=r.bound, slack=r.slack)
        res.check(7, f"Hausdorff distance at c={c}", r.hausdorff, f"<= {r.bound:.6g} + {r.slack:.3g}", r.passed)
        budget.check("next translation")


def run_ultraparallel(p, tol, res, budget, seed):
    tab = res.table("ultraparallel", ["t", "grid"])
    for t in p["t_values"]:
        r = hbk.ultraparallel_check(t, nu=p["grid"], nv=p["grid"])
        tab.add(t=t, grid=p["grid"], min_distance=r.min_distance, bound=r.bound, slack=r.slack, minimizers_on_l=r.minimizers_on_l)
        res.check(8, f"min distance at t={t}", abs(r.min_distance - r.bound), f"<= {r.slack:.6g} with minimizers on L", r.passed)


def run_jacobian(p, tol, res, budget, seed):
    rng = np.random.default_rng(seed)
    tab = res.table("jacobian_rank", ["map", "t"])
    for name, t, expect, cmp in (("gd", p["t"], 5, "=="), ("mul2", p["t"], 3, "=="), ("gd", 0.0, 3, "<=")):
        ranks = []
        for _ in range(p["points"]):
            h = hplane.random_h(rng)
            r1 = rng.uniform(-2, 2)
            r2 = rng.uniform(0, 2 * math.pi) if name == "gd" else rng.uniform(-2, 2)
            ranks.append(hbk.jacobian_rank(name, (h, r1, r2), t))
        ranks = np.array(ranks)
        ok = np.all(ranks == expect) if cmp == "==" else np.all(ranks <= expect)
        tab.add(map=name, t=t, points=p["points"], min_rank=int(ranks.min()), max_rank=int(ranks.max()))
        res.check(9, f"{name} rank at t={t}", float(ranks.max() if cmp == "<=" else ranks.min()), f"{cmp} {expect}", ok)
        budget.check("next map")


# ---------------------------------------------------------------- Schottky groups


def run_schottky(p, tol, res, budget, seed):
    tab = res.table("critical_exponent", ["power"])
    deltas, ests = [], []
    for n in p["powers"]:
        ce = fuchsian.critical_exponent(fuchsian.standard_fixture(n))
        deltas.append(ce.delta_box)
        ests.append((f"n={n}", ce.box))
        tab.add(power=n, delta_box=ce.delta_box, delta_orbit=ce.delta_orbit, gap=ce.agreement_gap, r2=ce.box.r2)
        res.check(10, f"box and orbit estimates agree (n={n})", ce.agreement_gap, f"<= {tol['agreement']}",
                  ce.agreement_gap <= tol["agreement"])
        budget.check("next power")
    _counts_table(res, "limit_set_counts", ests, {})
    res.plots.append(_fit_plot("Limit-set net counts", ests))
    dec = all(b < a for a, b in zip(deltas, deltas[1:]))
    res.check(10, "delta strictly decreasing", float(dec), "true", dec)
    ratio = deltas[-1] / deltas[0]
    res.check(10, "last over first delta", ratio, f"< {tol['ratio']}", ratio < tol["ratio"])


def run_closure(p, tol, res, budget, seed):
    tab = res.table("closure_dimension", ["power", "seed", "letters"])
    ests = []
    for n in p["powers"]:
        g = fuchsian.standard_fixture(n)
        delta = fuchsian.critical_exponent(g).delta_box
        L = fuchsian.dense_geodesic(g, seed, p["letters"])
        cl = fuchsian.closure_sample(g, L, p["time_per_power"] * n, p["step_per_power"] * n)
        r = fuchsian.closure_dimension(g, cl)
        ests.append((f"n={n}", r.estimate))
        err = abs(r.dimension - (1 + 2 * delta))
        tab.add(power=n, seed=seed, letters=p["letters"], dimension=r.dimension, one_plus_two_delta=1 + 2 * delta,
                section_points=len(cl.section), r2=r.estimate.r2)
        res.check(10, f"closure dimension vs 1 + 2 delta (n={n})", err, f"<= {tol['closure']}", err <= tol["closure"])
        budget.check("next power")
    _counts_table(res, "section_counts", ests, {"seed": seed})
    res.plots.append(_fit_plot("Section net counts of dense geodesic closures", ests))


# ---------------------------------------------------------------- product closures


def _product_rows(res, name, label, r, extra):
    tab = res.table(name, list(extra) + ["fixture"])
    tab.add(**extra, fixture=label, base=r.check.base, cloud=r.check.product, difference=r.check.product - r.check.base,
            residual=r.check.residual, base_r2=r.base.r2, cloud_r2=r.cloud.r2)
    return [(f"{label} base", r.base), (f"{label} cloud", r.cloud)]


def _membership(cloud, t, half_width, n, seed):
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(cloud.elements), size=min(n, len(cloud.elements)), replace=False)
    return fuchsian.product_membership(cloud.elements[np.sort(idx)], t, half_width)


def _dense_base(p, seed):
    g = fuchsian.standard_fixture(1)
    L = fuchsian.dense_geodesic(g, p["dense_seed"], p["dense_letters"])
    cl = fuchsian.closure_sample(g, L, p["dense_time"], p["dense_step"])
    return fuchsian.section_net(g, cl, p["net"], seed)


def run_floating_closure(p, tol, res, budget, seed):
    t, hw, step, ch = p["t"], p["half_width"], p["step"], p["core_half"]
    g = fuchsian.standard_fixture(1)
    ests = []
    extra = {"t": t, "seed": seed}
    if "periodic" in p["fixtures"]:
        L = fuchsian.axis_geodesic(g, 0)
        sc = fracdim.geometric_scales(*p["periodic_scales"])
        F, core, _ = fuchsian.flow_segments([L.frame], p["periodic_half_length"] + max(sc), step, p["periodic_half_length"], seed)
        bl = p["periodic_base_half_length"]
        Fb, cb, _ = fuchsian.flow_segments([L.frame], bl + max(sc), step / 4, bl, seed)
        cloud = fuchsian.floating_cloud(F, t, core, hw, step, ch, seed)
        r = fuchsian.product_dimension(fuchsian.base_cloud(Fb, cb), cloud, 2, sc, seed)
        ests += _product_rows(res, "floating_periodic", "periodic", r, extra)
        mem = _membership(cloud, t, hw, p["membership_samples"], seed)
        res.check(11, "periodic: cloud minus base", r.check.product - r.check.base, f"within {tol['product']} of 2",
                  abs(r.check.residual) <= tol["product"])
        res.check(11, "periodic: product membership", mem, f">= {tol['membership']}", mem >= tol["membership"])
        del cloud
        budget.check("dense fixture")
    if "dense" in p["fixtures"]:
        S = _dense_base(p, seed)
        sc = fracdim.geometric_scales(*p["dense_scales"])
        cloud = fuchsian.floating_cloud(S, t, None, hw, step, ch, seed)
        r = fuchsian.product_dimension(fuchsian.base_cloud(S), cloud, 2, sc, seed)
        ests += _product_rows(res, "floating_dense", "dense", r, dict(extra, dense_seed=p["dense_seed"]))
        mem = _membership(cloud, t, hw, p["membership_samples"], seed)
        res.check(11, "dense: cloud minus base", r.check.product - r.check.base, f"within {tol['product']} of 2",
                  abs(r.check.residual) <= tol["product"])
        res.check(11, "dense: product membership", mem, f">= {tol['membership']}", mem >= tol["membership"])
        del cloud
    _counts_table(res, "floating_counts", ests, extra)
    res.plots.append(_fit_plot("Floating-plane closures", ests))


def run_orthogonal(p, tol, res, budget, seed):
    hw, step, ch = p["half_width"], p["step"], p["core_half"]
    S = _dense_base(p, seed)
    F, core, _ = fuchsian.flow_segments(S, hw, step, ch, seed)
    sc = fracdim.geometric_scales(*p["scales"])
    base = fuchsian.base_cloud(F, core, "X")
    cloud = fuchsian.orthogonal_cloud(F, core, hw, step, ch, seed)
    r = fuchsian.product_dimension(base, cloud, 1, sc, seed)
    ests = _product_rows(res, "orthogonal_dense", "dense", r, {"seed": seed, "dense_seed": p["dense_seed"]})
    _counts_table(res, "orthogonal_counts", ests, {"seed": seed})
    res.plots.append(_fit_plot("Orthogonal-plane closure", ests))
    res.check(13, "orthogonal cloud minus geodesic closure", r.check.product - r.check.base, f"within {tol['product']} of 1",
              abs(r.check.residual) <= tol["product"])


# ---------------------------------------------------------------- bulging


def run_bulge_zariski(p, tol, res, budget, seed):
    g = bulging.amalgam_fixture()
    h = bulging.hnn_fixture()
    tab = res.table("zariski_rank", ["fixture", "width", "d0", "depth"])
    for w in p["widths"]:
        r = bulging.bulge(g, bulging.centralizer_param(g.generators[1], w, p["d0"]))
        rank = bulging.zariski_rank(r, p["depth"])
        expect = 3 if w == 0 else 8
        tab.add(fixture="amalgam", width=w, d0=p["d0"], depth=p["depth"], rank=rank)
        res.check(12, f"amalgam rank at width {w}", rank, f"== {expect}", rank == expect)
        rh = bulging.bulge(h, bulging.centralizer_param(h.generators[0], w, p["d0"]))
        tab.add(fixture="hnn", width=w, d0=p["d0"], depth=p["depth"], rank=bulging.zariski_rank(rh, p["depth"]),
                relation_residual=rh.relation_residual())
    budget.check("integrality")
    it = res.table("integrality", ["fixture", "depth"])
    it.add(fixture="integral", depth=p["integral_depth"], fraction=bulging.integrality_check(bulging.integral_fixture(), p["integral_depth"]))
    it.add(fixture="standard", depth=p["integral_depth"], fraction=bulging.integrality_check(fuchsian.standard_fixture(1), p["integral_depth"]))


def run_bulge_embedding(p, tol, res, budget, seed):
    g = bulging.amalgam_fixture()
    w, c = p["width"], p["separation"]
    param = bulging.centralizer_param(g.generators[1], w, p["d0"])
    y = bulging.offset_points(param, p["offset"], 1.0)[0]
    y2 = bulging.offset_points(param, p["offset"], -1.0)[0]
    dmin = bulging.fiber_disjointness(param, y, y2, c)
    res.table("fiber_disjointness", ["width", "d0", "separation", "offset"]).add(
        width=w, d0=p["d0"], separation=c, offset=p["offset"], min_distance=dmin, displacement=param.displacement)
    res.check(12, "fiber disjointness", dmin, "> 0", dmin > 0)
    budget.check("embedding probe")
    rep = bulging.bulge(g, param)
    L = fuchsian.dense_geodesic(g, seed, p["probe_letters"])
    cl = fuchsian.closure_sample(g, L, p["probe_time"], p["probe_step"])
    E = cl.frames[::2] @ hplane.a_t(p["probe_t"])
    er = bulging.embedding_probe(rep, c, E, p["pairs"], seed)
    res.table("embedding_probe", ["width", "d0", "separation", "pairs", "seed"]).add(
        width=w, d0=p["d0"], separation=c, pairs=er.pairs, seed=seed, points=er.points, collisions=er.collisions,
        distortion=er.distortion, local_pairs=er.local_pairs, coverage=er.coverage)
    res.check(12, "embedding collisions", er.collisions, f"== 0 among {p['pairs']} pairs",
              er.collisions == 0 and er.pairs == p["pairs"])
    budget.check("deformed closure")
    Lc = fuchsian.axis_geodesic(g, p["closure_axis"])
    sc = fracdim.geometric_scales(*p["scales"])
    dc = bulging.deformed_floating_closure(rep, Lc, p["t"], sc, seed=seed)
    diff = dc.deformed.cloud.slope - dc.undeformed.cloud.slope
    tab = res.table("deformed_closure", ["width", "d0", "t", "axis", "fixture"])
    for label, r in (("undeformed", dc.undeformed), ("deformed", dc.deformed)):
        tab.add(width=w, d0=p["d0"], t=p["t"], axis=p["closure_axis"], fixture=label, base=r.base.slope,
                cloud=r.cloud.slope, residual=r.check.residual)
    res.table("deformed_membership", ["width", "d0", "t"]).add(
        width=w, d0=p["d0"], t=p["t"], membership=dc.membership, direct_membership=dc.direct_membership, clearance=dc.clearance)
    ests = [("undeformed", dc.undeformed.cloud), ("deformed", dc.deformed.cloud)]
    _counts_table(res, "deformed_counts", ests, {"width": w})
    res.plots.append(_fit_plot("Floating closure before and after bulging", ests))
    res.check(12, "deformed minus undeformed closure dimension", diff, f"|.| <= {tol['closure']}", abs(diff) <= tol["closure"])


# ---------------------------------------------------------------- catalog

CATALOG: List[Experiment] = [
    Experiment("cartan-asymptotics", "Cartan projection of a_t k0 h_s and the regularity dichotomy", (2, 3),
               {"t_range": [0.5, 8.0], "s_range": [0.5, 8.0], "grid_points": 16, "n_max": 40},
               {"doubling": 0.05}, run_cartan),
    Experiment("gamma-limits", "limit flags of gamma_t(s) and the limit set of the fiber over o", (4,),
               {"t_limit": 30.0, "t_values": [5.0, 10.0, 20.0, 30.0], "s_values": [-30.0, -10.0, -5.0, 0.0, 5.0, 10.0, 30.0],
                "n_theta": 181},
               {"limit": 1e-3, "flag": 1e-2}, run_gamma_limits),
    Experiment("projection-narrow", "nearest-point projection onto Y and narrowing of projected floating planes", (5, 6),
               {"samples": 1000, "oracle_samples": 1000, "scale": 0.7, "t_values": [1.0, 2.0, 4.0, 6.0],
                "s_half": 10.0, "s_points": 201},
               {"constructed": 1e-8, "oracle": 1e-5, "lipschitz": 1e-7, "equivariance": 1e-7, "narrow_ratio": 0.5},
               run_projection),
    Experiment("fiber-hausdorff", "Hausdorff distance between the fiber over o and its a_c translate", (7,),
               {"c_values": [0.25, 0.5, 1.0], "radius": 1.5, "n": 5}, {}, run_fiber_hausdorff),
    Experiment("floating-ultraparallel", "Y and the floating plane Y_{L,t} are at distance d(o, a_t o)", (8,),
               {"t_values": [0.5, 1.0, 2.0], "grid": 9}, {}, run_ultraparallel),
    Experiment("jacobian-ranks", "local diffeomorphism of the product maps at t != 0", (9,),
               {"points": 100, "t": 1.0}, {}, run_jacobian),
    Experiment("schottky-dim", "critical exponents of the power subgroups of a Schottky group", (10,),
               {"powers": [1, 2, 4]}, {"agreement": 0.05, "ratio": 0.5}, run_schottky),
    Experiment("closure-dim", "closure of a dense geodesic has dimension 1 + 2 delta", (10,),
               {"powers": [1, 2, 4], "letters": 60000, "time_per_power": 141500.0, "step_per_power": 1.0},
               {"closure": 0.1}, run_closure),
    Experiment("bulge-zariski", "nonzero bulging width gives a Zariski dense group", (12,),
               {"widths": [0.0, 0.1, 0.3], "d0": 0.3, "depth": 2, "integral_depth": 4}, {}, run_bulge_zariski),
    Experiment("bulge-embedding", "bulged fibers stay disjoint and the deformed floating closure keeps its dimension", (12,),
               {"width": 0.2, "d0": 0.1, "separation": 0.5, "offset": 0.8, "pairs": 10000, "probe_letters": 3000,
                "probe_time": 2000.0, "probe_step": 0.5, "probe_t": 0.5, "closure_axis": 2, "t": 1.0,
                "scales": [0.15, 0.875, 8]},
               {"closure": 0.15}, run_bulge_embedding),
    Experiment("floating-closure", "closure of a floating-plane orbit is the base closure times a plane", (11,),
               {"fixtures": ["periodic", "dense"], "t": 1.0, "half_width": 0.4, "step": 0.01, "core_half": 0.25,
                "periodic_half_length": 0.6, "periodic_base_half_length": 3.0, "periodic_scales": [0.15, 0.875, 8],
                "dense_seed": 1, "dense_letters": 100000, "dense_time": 175000.0, "dense_step": 5.0, "net": 0.01,
                "dense_scales": [0.15, 0.625, 6], "membership_samples": 20000},
               {"product": 0.15, "membership": 0.99}, run_floating_closure),
    Experiment("orthogonal-plane-dim", "closure of an orthogonal-plane orbit adds one to the geodesic closure", (13,),
               {"dense_seed": 1, "dense_letters": 100000, "dense_time": 175000.0, "dense_step": 5.0, "net": 0.005,
                "half_width": 0.35, "step": 0.01, "core_half": 0.2, "scales": [0.15, 1.0, 9]},
               {"product": 0.15}, run_orthogonal),
    Experiment("calibration", "box dimension of analytic fractals and 3x3 kernel roundtrips", (1,),
               {"samples": 10000, "depth": 12, "segment_points": 2000},
               {"roundtrip": 1e-9, "box": 0.03}, run_calibration),
]

BY_NAME: Dict[str, Experiment] = {e.name: e for e in CATALOG}


def catalog() -> List[Experiment]:
    return list(CATALOG)


def run_experiment(name: str, params: Optional[dict] = None, tolerances: Optional[dict] = None, seed: int = 0,
                   budget: Optional[float] = None) -> ExperimentResult:
    """Run one experiment; parameters and tolerances override the catalog defaults."""
    if name not in BY_NAME:
        raise ValidationError(f"unknown experiment {name!r}")
    exp = BY_NAME[name]
    p = dict(exp.params, **(params or {}))
    tol = dict(exp.tolerances, **(tolerances or {}))
    res = ExperimentResult(name)
    try:
        exp.runner(p, tol, res, Budget(budget), seed)
    except BudgetExhausted as e:
        res.partial = True
        res.table("budget", ["stage"]).add(stage=str(e))
    return res
