"""Invariant checks shared by the experiment suites.

Each check appends rows and bands to an :class:`ExperimentReport`.  Checks
over individual samples attach a replay record to a failing band: the
record names the check and carries every parameter needed to recompute the
offending value with :func:`replay`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import decomposition as dec
from ..errors import ConfigurationError, DomainError
from ..fields import GaussianBumpSum, ScalarField, spec_from_config
from ..geometry import (Domain, GridSpec, RasterMask, ShiftedDistance, domain_from_config,
                        lipschitz_violation, nearest_boundary, sample_points)
from ..maximal import cell_delta, derivative_bound_check, maximal_field_map, openness_check
from .report import ExperimentReport

# keys of a domain table that describe how to probe the domain rather than the domain itself
PROBE_KEYS = ("sample_box", "map_box", "bump_box", "delta_cap", "curvature_R", "name")

ANCHORS = {
    "lipschitz": "distance-lipschitz",
    "raster": "raster-distance-agreement",
    "sector": "sector-partition",
    "midpoint": "convex-body-midpoint-closure",
    "boundary": "convex-body-topological-boundary",
    "support": "convex-body-supporting-line",
    "annulus": "annulus-geometry",
    "localization": "band-localization-convex-complement",
    "C_inf": "band-sup-bound",
    "C_1": "band-l1-bound",
    "C_dual": "band-l1-dual-bound",
    "C_meas": "band-measure-bound",
    "C_rough": "rough-band-bound",
    "C_deriv": "averaging-derivative-bound",
    "C_unc": "unconstrained-gradient-bound",
    "openness": "unconstrained-set-open",
    "domination": "maximal-dominates-average",
}

CONSTANT_NAMES = ("C_inf", "C_1", "C_dual", "C_meas", "C_rough", "C_deriv", "C_unc")


@dataclass
class DomainCase:
    """A domain together with the boxes used to probe it."""

    name: str
    config: dict
    domain: Domain
    sample_box: Optional[tuple] = None
    map_box: Optional[tuple] = None
    bump_box: Optional[tuple] = None
    delta_cap: float = 1.0
    curvature_R: float = math.inf
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg: dict, corrupt_shift: float = 0.0) -> "DomainCase":
        cfg = dict(cfg)
        corrupt_shift = float(cfg.pop("corrupt_shift", corrupt_shift))
        probe = {k: cfg.pop(k) for k in PROBE_KEYS if k in cfg}
        if corrupt_shift:
            probe["corrupt_shift"] = corrupt_shift
        dom = domain_from_config(cfg)
        if corrupt_shift:
            dom = ShiftedDistance(dom, corrupt_shift)
        box = lambda key: None if key not in probe else (tuple(probe[key][0]), tuple(probe[key][1]))
        lo, hi = dom.bbox()
        default_box = (tuple(lo), tuple(hi))
        sample_box = box("sample_box") or default_box
        map_box = box("map_box") or sample_box
        bump_box = box("bump_box")
        if bump_box is None:
            c = 0.5 * (np.asarray(map_box[0]) + np.asarray(map_box[1]))
            half = 0.3 * (np.asarray(map_box[1]) - np.asarray(map_box[0]))
            bump_box = (tuple(c - half), tuple(c + half))
        R = probe.get("curvature_R", math.inf)
        R = math.inf if R in (None, "inf") else float(R)
        name = probe.get("name", cfg.get("type", "domain"))
        return cls(str(name), dict(cfg, **probe), dom, sample_box,
                   map_box, bump_box, float(probe.get("delta_cap", 1.0)), R)

    def window_extent(self) -> float:
        lo, hi = self.domain.bbox()
        return float(np.max(np.subtract(hi, lo)))

    def coarse_h(self, cells: int) -> float:
        return self.window_extent() / cells


def bump_suite(case: DomainCase, functions: Sequence[dict]) -> list:
    """Test functions of a config list, with seeded bumps placed in the case's bump box."""
    out = []
    for fc in functions:
        fc = dict(fc)
        if fc.get("kind") == "GaussianBumpSum" and "seed" in fc:
            out.append(GaussianBumpSum.seeded(int(fc["seed"]), int(fc.get("count", 3)),
                                              case.bump_box[0], case.bump_box[1],
                                              tuple(fc.get("width_range", (0.04, 0.1))),
                                              tuple(fc.get("amp_range", (0.5, 1.5)))))
        else:
            out.append(spec_from_config(fc))
    return out


def _pt(p) -> list:
    return [float(v) for v in p]


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------

def check_distance(report: ExperimentReport, case: DomainCase, count: int, seed: int) -> None:
    pts = sample_points(case.domain, count, seed=seed)
    viol = lipschitz_violation(case.domain, pts)
    report.add_row(ANCHORS["lipschitz"], domain=case.name, check="lipschitz_excess", value=viol)
    report.add_band(f"{case.name}: distance is 1-Lipschitz", ANCHORS["lipschitz"], viol, hi=1e-12,
                    replay={"check": "lipschitz", "domain": case.config,
                            "points": [_pt(p) for p in pts]})


def check_raster(report: ExperimentReport, case: DomainCase, cells: int, count: int,
                 seed: int) -> None:
    """Raster distance against the analytic one, on a window that includes
    part of the complement."""
    lo, hi = case.sample_box
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    pad = 0.5 * (hi - lo)
    grid = GridSpec.covering(lo - pad, hi + pad, cells)
    raster = RasterMask.from_domain(case.domain, grid)
    pts = sample_points(case.domain, count, seed=seed, box=case.sample_box)
    pts = pts[raster.contains(pts)]
    d_true = case.domain.delta(pts)
    room = np.min(np.stack([pts[:, 0] - grid.origin[0], grid.upper[0] - pts[:, 0],
                            pts[:, 1] - grid.origin[1], grid.upper[1] - pts[:, 1]]), axis=0)
    keep = d_true < room
    err = float(np.max(np.abs(raster.delta(pts[keep]) - d_true[keep]))) if keep.any() else 0.0
    report.add_row(ANCHORS["raster"], domain=case.name, check="raster_error", value=err,
                   h=grid.h)
    report.add_band(f"{case.name}: raster distance within 2h", ANCHORS["raster"], err,
                    hi=2 * grid.h)


def check_sectors(report: ExperimentReport, case: DomainCase, count: int, seed: int) -> None:
    pts = sample_points(case.domain, count, seed=seed, box=case.sample_box)
    worst = 0.0
    worst_x = pts[0]
    for x in pts:
        c = nearest_boundary(case.domain, x)
        tot = math.fsum(dec.angular_sector(case.domain, x, j).arc_length for j in range(64))
        err = abs(tot - 2 * math.pi * c.delta)
        if err > worst:
            worst, worst_x = err, x
    report.add_row(ANCHORS["sector"], domain=case.name, check="partition_error", value=worst)
    report.add_band(f"{case.name}: band arcs partition the circle", ANCHORS["sector"], worst,
                    hi=1e-6, replay={"check": "sector", "domain": case.config, "x": _pt(worst_x)})


# --------------------------------------------------------------------------
# convex bodies
# --------------------------------------------------------------------------

def support_indices(probe: dec.ConvexBodyProbe, stride: int) -> List[int]:
    """Interior indices of the ordered polyline whose neighbours are close
    (skipping gaps where the curve leaves the window)."""
    pts = probe.points
    out = []
    for i in range(1, len(pts) - 1, max(1, stride)):
        r = np.linalg.norm(pts[i] - probe.y)
        if (np.linalg.norm(pts[i + 1] - pts[i]) > 0.1 * r
                or np.linalg.norm(pts[i] - pts[i - 1]) > 0.1 * r):
            continue
        out.append(i)
    return out


def check_convex_body(report: ExperimentReport, case: DomainCase, y, h: float, pairs: int,
                      seed: int, stride: int = 5, tol_deg: float = 1.0) -> dec.ConvexBodyProbe:
    y = np.asarray(y, float)
    probe = dec.extract_P(case.domain, y, h)
    bad, n = dec.midpoint_closure(case.domain, y, pairs, seed=seed)
    report.add_row(ANCHORS["midpoint"], domain=case.name, y=tuple(y), check="midpoint_violations",
                   value=bad, pairs=n)
    report.add_band(f"{case.name} y={_fmt_pt(y)}: midpoint closure", ANCHORS["midpoint"], bad,
                    hi=0, replay={"check": "midpoint", "domain": case.config, "y": _pt(y),
                                  "pairs": pairs, "seed": seed})
    nb = dec.boundary_check(probe)
    report.add_row(ANCHORS["boundary"], domain=case.name, y=tuple(y),
                   check="boundary_violations", value=nb, points=len(probe.points))
    report.add_band(f"{case.name} y={_fmt_pt(y)}: extracted points are boundary points",
                    ANCHORS["boundary"], nb, hi=0,
                    replay={"check": "boundary", "domain": case.config, "y": _pt(y), "h": h})
    ortho = bis = side = 0.0
    worst, worst_score = None, -1.0
    for i in support_indices(probe, stride):
        try:
            r = dec.supporting_line_check(probe, i, tol_deg=tol_deg)
        except DomainError:
            continue
        score = max(r.orthogonality_deg, r.bisection_deg, r.one_sided_violation / (2 * h))
        if score > worst_score:
            worst, worst_score = i, score
        ortho = max(ortho, r.orthogonality_deg)
        bis = max(bis, r.bisection_deg)
        side = max(side, r.one_sided_violation)
    report.add_row(ANCHORS["support"], domain=case.name, y=tuple(y), check="support",
                   orthogonality_deg=ortho, bisection_deg=bis, one_sided=side)
    rep = {"check": "support", "domain": case.config, "y": _pt(y), "h": h,
           "index": worst if worst is not None else 1}
    report.add_band(f"{case.name} y={_fmt_pt(y)}: tangent orthogonal to b-y",
                    ANCHORS["support"], ortho, hi=tol_deg, replay=rep)
    report.add_band(f"{case.name} y={_fmt_pt(y)}: tangent bisects the angle",
                    ANCHORS["support"], bis, hi=tol_deg, replay=rep)
    report.add_band(f"{case.name} y={_fmt_pt(y)}: one-sided support", ANCHORS["support"], side,
                    hi=2 * h, replay=rep)
    return probe


def _fmt_pt(p) -> str:
    return "(" + ",".join(f"{float(v):.4g}" for v in p) + ")"


# --------------------------------------------------------------------------
# annulus geometry and localization
# --------------------------------------------------------------------------

def annulus_samples(case: DomainCase, count: int, seed: int, max_delta: float = math.inf):
    """Pairs (x, y) with y on dB(x, delta(x)) at a random angle from b_x."""
    xs = sample_points(case.domain, count, seed=seed, box=case.sample_box, max_delta=max_delta)
    rng = np.random.default_rng(seed)
    out = []
    for x in xs:
        c = nearest_boundary(case.domain, x)
        if not c.unique:
            continue
        phi = math.atan2(c.b[1] - x[1], c.b[0] - x[0]) + rng.uniform(-math.pi, math.pi)
        out.append((x, x + c.delta * np.array([math.cos(phi), math.sin(phi)])))
    return out


def check_annulus(report: ExperimentReport, case: DomainCase, count: int, seed: int,
                  exact: bool = False, tol: float = 1e-9) -> None:
    R = case.curvature_R
    max_delta = 0.999 * R if math.isfinite(R) else math.inf
    worst_gap = -math.inf
    worst_eq = 0.0
    worst = None
    for x, y in annulus_samples(case, count, seed, max_delta):
        r = dec.annulus_check(case.domain, x, y, R=R, tol=tol)
        gap = r.lhs - r.rhs
        if gap > worst_gap:
            worst_gap, worst = gap, (x, y)
        worst_eq = max(worst_eq, abs(gap))
    report.add_row(ANCHORS["annulus"], domain=case.name, check="annulus", R=R,
                   max_excess=worst_gap, max_abs_residual=worst_eq, samples=count)
    rep = None if worst is None else {"check": "annulus", "domain": case.config,
                                      "x": _pt(worst[0]), "y": _pt(worst[1]), "R": R,
                                      "tol": tol}
    report.add_band(f"{case.name}: annulus inequality (R={R:g})", ANCHORS["annulus"],
                    worst_gap, hi=tol, replay=rep)
    if exact:
        report.add_band(f"{case.name}: annulus equality (convex complement)", ANCHORS["annulus"],
                        worst_eq, hi=tol, replay=rep)


def check_annulus_raster(report: ExperimentReport, case: DomainCase, cells: int, count: int,
                         seed: int) -> None:
    """Equality case on a raster copy: residual within 2h."""
    lo, hi = case.sample_box
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    pad = 0.5 * (hi - lo) + (hi - lo).max()
    grid = GridSpec.covering(lo - pad, hi + pad, cells)
    raster = RasterMask.from_domain(case.domain, grid)
    xs = sample_points(case.domain, count, seed=seed, box=case.sample_box)
    rng = np.random.default_rng(seed)
    worst = 0.0
    used = 0
    for x in xs:
        if not bool(raster.contains(x)):
            continue
        c = nearest_boundary(raster, x)
        room = min(x[0] - grid.origin[0], grid.upper[0] - x[0], x[1] - grid.origin[1],
                   grid.upper[1] - x[1])
        # the raster complement includes everything beyond the grid; keep the
        # circle and the boundary segment it looks at well inside
        if not c.unique or 3 * c.delta + grid.h >= room:
            continue
        phi = math.atan2(c.b[1] - x[1], c.b[0] - x[0]) + rng.uniform(-math.pi, math.pi)
        y = x + c.delta * np.array([math.cos(phi), math.sin(phi)])
        u = (c.b - x) / c.delta
        v = (y - x) / c.delta
        lhs = c.delta * (1.0 - float(np.dot(u, v)))
        rhs = float(raster.delta(y)) if bool(raster.contains(y)) else 0.0
        worst = max(worst, abs(lhs - rhs))
        used += 1
    report.add_row(ANCHORS["annulus"], domain=case.name + "_raster", check="annulus_raster",
                   max_abs_residual=worst, h=grid.h, samples=used)
    report.add_band(f"{case.name}_raster: annulus equality within 2h", ANCHORS["annulus"], worst,
                    hi=2 * grid.h)


def check_localization(report: ExperimentReport, case: DomainCase, js: Sequence[int],
                       ks: Sequence[int], count: int, seed: int) -> None:
    c1 = math.inf
    c2 = 0.0
    for j in js:
        for k in ks:
            s = dec.localization_samples(case.domain, j, k, count, seed=seed)
            if len(s) == 0:
                continue
            d = s[:, 2]
            c1 = min(c1, float(np.min(d / 2.0 ** (k - 2 * j))))
            c2 = max(c2, float(np.max(d / 2.0 ** (k - j))))
    report.add_row(ANCHORS["localization"], domain=case.name, check="localization", c1=c1, c2=c2)
    report.add_band(f"{case.name}: localization lower constant", ANCHORS["localization"], c1,
                    lo=0.5)
    report.add_band(f"{case.name}: localization upper constant", ANCHORS["localization"], c2,
                    hi=4.0)


# --------------------------------------------------------------------------
# realized constants
# --------------------------------------------------------------------------

def k_window(case: DomainCase, coarse_cells: int, resolved_factor: float) -> range:
    """Shells resolved at the coarse grid (2^k >= resolved_factor * 4h) up to
    the largest shell met in the window."""
    h = case.coarse_h(coarse_cells)
    k_lo = math.ceil(math.log2(resolved_factor * 4 * h))
    pts = sample_points(case.domain, 4000)
    k_hi = dec.shell_index(float(case.domain.delta(pts).max()))
    return range(k_lo, k_hi + 1)


def y_samples(case: DomainCase, count: int, coarse_cells: int, seed: int) -> np.ndarray:
    return sample_points(case.domain, count, seed=seed, box=case.sample_box,
                         min_delta=16 * case.coarse_h(coarse_cells))


def band_constants(case: DomainCase, ys: np.ndarray, cells: int, ks: range, j_max: int,
                   report: Optional[ExperimentReport] = None, table: str = "sweep") -> Dict:
    """C_1, C_dual, C_meas and C_rough over the y samples at grid size ``cells``."""
    grid = case.domain.grid(cells)
    h = grid.h
    eps = 4 * h
    consts = {"C_1": 0.0, "C_dual": 0.0, "C_meas": 0.0, "C_rough": 0.0}
    argmax = {}
    off_center = 0
    for iy, y in enumerate(ys):
        probe = dec.extract_P(case.domain, y, h)
        tab = probe.table()
        S = dec.small_ball_band_integrals(case.domain, y, eps, grid)

        def bump(name, value, key):
            if value > consts[name]:
                consts[name] = value
                argmax[name] = key

        for (j, k) in sorted(tab):
            if j > j_max or k not in ks:
                continue
            raw = tab[(j, k)]
            bump("C_meas", raw / 2.0 ** k, (iy, j, k))
            if report is not None:
                report.add_table_row(table, domain=case.name, cells=cells, j=j, k=k, y=tuple(y),
                                     probe_name="P_measure", raw=raw, normalized=raw / 2.0 ** k)
        for j in range(0, min(j_max, 8) + 1):
            raw = dec.rough_integral(probe, j)
            bump("C_rough", raw / 2.0 ** j, (iy, j, None))
            if report is not None:
                report.add_table_row(table, domain=case.name, cells=cells, j=j, k="", y=tuple(y),
                                     probe_name="rough", raw=raw, normalized=raw / 2.0 ** j)
        for (j, k) in sorted(S):
            if j > j_max or k not in ks:
                continue
            raw = S[(j, k)]
            bump("C_1", raw / 2.0 ** (k + j), (iy, j, k))
            nm, arg = dec.neighbour_measure(tab, j, k)
            dual = raw / (2.0 ** j * nm) if nm > 0 else math.nan
            if nm > 0:
                bump("C_dual", dual, (iy, j, k))
                off_center += arg != (j, k)
            if report is not None:
                report.add_table_row(table, domain=case.name, cells=cells, j=j, k=k, y=tuple(y),
                                     probe_name="L1", raw=raw, normalized=raw / 2.0 ** (k + j))
                report.add_table_row(table, domain=case.name, cells=cells, j=j, k=k, y=tuple(y),
                                     probe_name="L1_dual", raw=raw, normalized=dual)
    consts["_argmax"] = argmax
    consts["_dual_off_center"] = off_center
    return consts


def linf_constant(case: DomainCase, cells: int, ks: range, j_max: int, samples: int = 16,
                  report: Optional[ExperimentReport] = None, table: str = "sweep") -> float:
    grid = case.domain.grid(cells)
    best = 0.0
    for k in ks:
        for j in range(0, j_max + 1):
            v = dec.opnorm_Linf_probe(case.domain, j, k, samples=samples, n_theta=512, grid=grid)
            best = max(best, v)
            if report is not None:
                report.add_table_row(table, domain=case.name, cells=cells, j=j, k=k, y="",
                                     probe_name="Linf", raw=v * 2.0 ** (k - j), normalized=v)
    return best


def derivative_constant(case: DomainCase, functions: list, cells: int, count: int, seed: int,
                        alpha: float = 1.0, rel_floor: float = 1e-4):
    """sup L/R of the averaging derivative bound over sample points, skipping
    points where R is below ``rel_floor`` times the sup of |f| (there both
    sides are rounding noise)."""
    grid = GridSpec.covering(case.map_box[0], case.map_box[1], cells)
    xs = sample_points(case.domain, count, seed=seed, box=case.map_box,
                       min_delta=4 * grid.h, max_delta=case.delta_cap)
    best = 0.0
    worst = None
    for fi, spec in enumerate(functions):
        f = ScalarField.from_spec(spec, case.domain, grid)
        floor = rel_floor * float(np.max(np.abs(f.values)))
        for x in xs:
            try:
                r = derivative_bound_check(f, x, alpha)
            except DomainError:
                continue
            if r.R <= floor:
                continue
            if r.ratio > best:
                best, worst = r.ratio, (fi, _pt(x))
    return best, worst


def _unconstrained_interior(fm) -> np.ndarray:
    unc = np.isfinite(fm.value) & ~fm.constrained
    ok = unc.copy()
    ok[1:-1, 1:-1] &= unc[2:, 1:-1] & unc[:-2, 1:-1] & unc[1:-1, 2:] & unc[1:-1, :-2]
    ok[[0, -1], :] = False
    ok[:, [0, -1]] = False
    return ok


def maps_for(case: DomainCase, spec, cells: int, alpha: float = 1.0):
    grid = GridSpec.covering(case.map_box[0], case.map_box[1], cells)
    f = ScalarField.from_spec(spec, case.domain, grid)
    d = cell_delta(f)
    mask = f.inside & (d >= 3 * grid.h) & (d <= case.delta_cap)
    return f, maximal_field_map(f, alpha, mask), maximal_field_map(f, alpha - 1.0, mask)


def unconstrained_constant(case: DomainCase, functions: list, cells: int, alpha: float = 1.0):
    """sup |grad M_alpha f| / M^loc_{alpha-1} f over unconstrained cells whose
    four neighbours are unconstrained; also checks that the maximal map
    dominates the boundary candidate."""
    best = 0.0
    dom_gap = 0.0
    count = 0
    for spec in functions:
        f, fm, f0 = maps_for(case, spec, cells, alpha)
        ok = _unconstrained_interior(fm)
        g = np.linalg.norm(fm.gradient(), axis=-1)
        r = g[ok] / f0.value[ok]
        r = r[np.isfinite(r)]
        count += int(r.size)
        if r.size:
            best = max(best, float(r.max()))
        fin = np.isfinite(fm.value)
        dom_gap = min(dom_gap, float(np.min(fm.value[fin] - fm.boundary_value[fin])))
    return best, count, dom_gap


def check_openness(report: ExperimentReport, case: DomainCase, spec, cells: int, samples: int,
                   seed: int) -> None:
    f, fm, _ = maps_for(case, spec, cells)
    cand = int(np.sum(np.isfinite(fm.value) & ~fm.constrained))
    rng = np.random.default_rng(seed)
    sel = np.sort(rng.choice(cand, size=min(samples, cand), replace=False)) if cand else None
    checked, viol, skipped = openness_check(fm, sample=sel)
    report.add_row(ANCHORS["openness"], domain=case.name, cells=cells, check="openness",
                   checked=checked, violations=viol, skipped=skipped)
    report.add_band(f"{case.name}: unconstrained set is open", ANCHORS["openness"], viol, hi=0)


# --------------------------------------------------------------------------
# replay
# --------------------------------------------------------------------------

def replay(record: dict) -> dict:
    """Recompute the value behind a failure record."""
    check = record.get("check")
    if check is None:
        raise ConfigurationError("failure record has no replayable check")
    case = DomainCase.from_config(record["domain"])
    dom = case.domain
    if check == "lipschitz":
        value = lipschitz_violation(dom, np.asarray(record["points"], float))
        return {"check": check, "value": value, "passed": value <= 1e-12}
    if check == "sector":
        x = np.asarray(record["x"], float)
        c = nearest_boundary(dom, x)
        tot = math.fsum(dec.angular_sector(dom, x, j).arc_length for j in range(64))
        err = abs(tot - 2 * math.pi * c.delta)
        return {"check": check, "value": err, "passed": err <= 1e-6}
    if check == "midpoint":
        bad, n = dec.midpoint_closure(dom, record["y"], int(record["pairs"]),
                                      seed=int(record["seed"]))
        return {"check": check, "value": bad, "pairs": n, "passed": bad == 0}
    if check == "boundary":
        probe = dec.extract_P(dom, record["y"], float(record["h"]))
        nb = dec.boundary_check(probe)
        return {"check": check, "value": nb, "passed": nb == 0}
    if check == "support":
        probe = dec.extract_P(dom, record["y"], float(record["h"]))
        r = dec.supporting_line_check(probe, int(record["index"]))
        return {"check": check, "orthogonality_deg": r.orthogonality_deg,
                "bisection_deg": r.bisection_deg, "one_sided": r.one_sided_violation,
                "passed": r.passed}
    if check == "annulus":
        R = record.get("R", math.inf)
        R = math.inf if isinstance(R, str) else float(R)
        r = dec.annulus_check(dom, record["x"], record["y"], R=R, tol=float(record["tol"]))
        return {"check": check, "lhs": r.lhs, "rhs": r.rhs, "passed": r.holds}
    raise ConfigurationError(f"no replay for check {check!r}")
