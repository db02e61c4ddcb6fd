"""Nonlocal mean curvature of planar graph profiles.

The curvature at a boundary point x of the subgraph E is the integral of
(indicator of the complement minus indicator of the set) against
|x - y|^(-2-s).  Each vertical column at horizontal distance d integrates in
closed form to ``-2 * slope_weight((u - x2)/d) * d^(-1-s)``, so the whole
evaluation reduces to a principal-value integral over column positions.

Evaluation is organised as a *plan*: a fixed set of quadrature abscissae with
weights and sparse interpolation rows, built once per evaluation geometry.
The numerator of every quadrature point is an affine function of the node
values, which makes residuals and Jacobians of the slab solver cheap.

Plan structure per point k:
    contribution_k = weight_k * slope_weight( numerator_k / t_k )
    numerator_k    = sum_m coef[k,m] * values[idx[k,m]] + cval[k]
where the fold of ``-x2`` (the evaluation height) is already included in the
coefficient rows.  Empty/full columns and power-law tails enter as closed-form
constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SingularPointError
from .kernel import FracParams, gauss_jacobi01, gauss_legendre, slope_weight, slope_weight_limit
from .profiles import ExteriorModel, GraphProfile

__all__ = [
    "CurvatureQuad",
    "CurvatureReport",
    "column_weight",
    "tail_contribution",
    "nmc_graph",
    "EvalPlan",
    "build_plan",
    "evaluate_plan",
]

_SLOTS = 4  # max affine terms per quadrature point (2 interp + 2 evaluation-height)


@dataclass(frozen=True)
class CurvatureQuad:
    """Quadrature configuration for graph-curvature evaluations.

    r_pair caps the radius of the symmetrized near field (None: the full
    smaller adjacent cell).  R_tail moves the switch to the analytic exterior
    tail inward from the window edge (None: tail starts at the window edge).
    pv_model "paired-with-local-slope" additionally subtracts the local
    tangent contribution inside the near field; it changes nothing
    analytically and serves as a cross-check path.
    """

    r_pair: float | None = None
    R_tail: float | None = None
    n_near: int = 24
    n_mid: int = 10
    n_tail: int = 10
    tail_panels: int = 5
    pv_model: str = "paired"

    def __post_init__(self):
        for name in ("n_near", "n_mid", "n_tail"):
            if getattr(self, name) < 8:
                raise ParameterError(f"{name} must be >= 8, got {getattr(self, name)}")
        if self.r_pair is not None and self.r_pair <= 0:
            raise ParameterError("r_pair must be positive")
        if self.R_tail is not None:
            if self.R_tail <= 0:
                raise ParameterError("R_tail must be positive")
            if self.r_pair is not None and not self.r_pair < self.R_tail:
                raise ParameterError("need 0 < r_pair < R_tail")
        if self.pv_model not in ("paired", "paired-with-local-slope"):
            raise ParameterError(f"unknown pv_model {self.pv_model!r}")

    def coarsened(self) -> "CurvatureQuad":
        """A deliberately coarser rule, used for quadrature-error estimates."""
        return CurvatureQuad(
            r_pair=self.r_pair,
            R_tail=self.R_tail,
            n_near=max(8, self.n_near - 8),
            n_mid=max(8, self.n_mid - 3),
            n_tail=max(8, self.n_tail - 3),
            tail_panels=max(2, self.tail_panels - 2),
            pv_model=self.pv_model,
        )


@dataclass(frozen=True)
class CurvatureReport:
    """Curvature value with its near/mid/tail split and an error estimate.

    value is computed as near + mid + tail in that fixed order, so the split
    sums to the value exactly.
    """

    value: float
    near: float
    mid: float
    tail: float
    est_quadrature_error: float


def column_weight(u_col: float, at, y1: float, p: FracParams) -> float:
    """Signed kernel weight of one vertical column seen from the graph point ``at``.

    u_col is the column's graph value (+-inf for full/empty columns); the
    column at y1 must not sit on the evaluation abscissa (principal-value
    pairing is the caller's job).
    """
    x1, x2 = float(at[0]), float(at[1])
    d = abs(float(y1) - x1)
    if d == 0.0:
        raise SingularPointError("column at the evaluation abscissa; use PV pairing")
    if np.isinf(u_col):
        f_val = np.sign(u_col) * slope_weight_limit(p)
    else:
        f_val = slope_weight((u_col - x2) / d, p)
    return -2.0 * f_val * d ** (-1.0 - p.s)


# ---------------------------------------------------------------------------
# plan construction


@dataclass
class EvalPlan:
    """Frozen quadrature geometry for one evaluation point."""

    x1: float
    t: np.ndarray          # (K,) column distances
    weight: np.ndarray     # (K,) signed weights (quadrature x kernel power)
    idx: np.ndarray        # (K, _SLOTS) node indices into the window values
    coef: np.ndarray       # (K, _SLOTS) affine coefficients (includes -x2 fold)
    cval: np.ndarray       # (K,) constant numerator parts
    part: np.ndarray       # (K,) 0 near, 1 mid, 2 tail
    const_near: float = 0.0
    const_mid: float = 0.0
    const_tail: float = 0.0

    @property
    def npoints(self) -> int:
        return self.t.size


class _PlanBuilder:
    def __init__(self):
        self.rows = []  # (t, weight, [(idx, coef)...], cval, part)
        self.const = [0.0, 0.0, 0.0]

    def add(self, t, weight, pairs, cval, part):
        self.rows.append((float(t), float(weight), pairs, float(cval), int(part)))

    def add_const(self, value, part):
        self.const[part] += float(value)

    def finish(self, x1) -> EvalPlan:
        k = len(self.rows)
        t = np.empty(k)
        w = np.empty(k)
        idx = np.zeros((k, _SLOTS), dtype=np.int64)
        coef = np.zeros((k, _SLOTS))
        cval = np.empty(k)
        part = np.empty(k, dtype=np.uint8)
        for i, (ti, wi, pairs, ci, pi) in enumerate(self.rows):
            t[i] = ti
            w[i] = wi
            cval[i] = ci
            part[i] = pi
            if len(pairs) > _SLOTS:
                raise AssertionError("too many affine terms in a plan row")
            for m, (j, c) in enumerate(pairs):
                idx[i, m] = j
                coef[i, m] = c
        return EvalPlan(
            x1=float(x1), t=t, weight=w, idx=idx, coef=coef, cval=cval, part=part,
            const_near=self.const[0], const_mid=self.const[1], const_tail=self.const[2],
        )


def _merge_pairs(pairs):
    out = {}
    for j, c in pairs:
        out[j] = out.get(j, 0.0) + c
    return [(j, c) for j, c in out.items() if c != 0.0]


def _cell_interp_pairs(nodes, j, y):
    h = nodes[j + 1] - nodes[j]
    lam = (nodes[j + 1] - y) / h
    return [(j, lam), (j + 1, 1.0 - lam)]


def _panels(lo: float, hi: float, max_ratio: float = 1.8, cap: int = 24):
    """Split [lo, hi] geometrically so the kernel power is tame per panel."""
    if hi <= lo:
        return
    m = 1
    if lo > 0:
        m = min(cap, max(1, int(np.ceil(np.log(hi / lo) / np.log(max_ratio)))))
    edges = lo * (hi / lo) ** (np.arange(m + 1) / m) if lo > 0 else np.linspace(lo, hi, m + 1)
    edges[0], edges[-1] = lo, hi
    for k in range(m):
        yield edges[k], edges[k + 1]


def build_plan(
    profile: GraphProfile,
    x1: float,
    p: FracParams,
    quad: CurvatureQuad,
) -> EvalPlan:
    """Build the quadrature plan for evaluating the curvature at abscissa x1.

    Raises SingularPointError at marked corners, at window-edge nodes, and
    within one cell of an infinite column.
    """
    nodes = profile.grid.nodes
    vals = profile.values
    n = nodes.size
    a_win, b_win = profile.window
    s = p.s
    x1 = float(x1)
    if not a_win < x1 < b_win:
        raise ParameterError(f"evaluation abscissa {x1} outside the open window")

    node_idx = profile.node_at(x1)
    if node_idx is not None and node_idx in profile.corner_nodes:
        raise SingularPointError(
            f"profile has a corner at node {node_idx} (x = {nodes[node_idx]}); "
            "the principal value diverges there"
        )
    if node_idx in (0, n - 1):
        raise SingularPointError("cannot evaluate at a window-edge node")

    b = _PlanBuilder()
    f_limit = slope_weight_limit(p)

    # --- x2 fold and near-field handling -----------------------------------
    if node_idx is not None:
        i = node_idx
        x1 = float(nodes[i])  # snap
        if not np.isfinite(vals[[i - 1, i, i + 1]]).all():
            raise SingularPointError("evaluation within one cell of an infinite column")
        x2_pairs = [(i, -1.0)]
        h_left = nodes[i] - nodes[i - 1]
        h_right = nodes[i + 1] - nodes[i]
        r_near = min(h_left, h_right)
        if quad.r_pair is not None:
            r_near = min(r_near, quad.r_pair)

        # local parabola in differenced form: q(x_i + tau) - u_i equals
        # d1*tau + d2/2*tau^2 with the 3-point derivative functionals, which
        # avoids catastrophic cancellation in the numerator at tiny tau
        d1 = np.array([
            -h_right / (h_left * (h_left + h_right)),
            (h_right - h_left) / (h_left * h_right),
            h_left / (h_right * (h_left + h_right)),
        ])
        d2 = np.array([
            2.0 / (h_left * (h_left + h_right)),
            -2.0 / (h_left * h_right),
            2.0 / (h_right * (h_left + h_right)),
        ])
        tri_idx = (i - 1, i, i + 1)

        def parabola_pairs(tau):
            c = tau * d1 + 0.5 * tau * tau * d2
            return [(tri_idx[m], c[m]) for m in range(3)]

        # paired singular region (0, r_near]: the integrand carries an
        # integrable t^(-s) factor once both sides use the local parabola
        tq, wq = gauss_jacobi01(quad.n_near, -s)
        scale = r_near ** (1.0 - s)
        for tk, wk in zip(tq, wq):
            t = r_near * tk
            w = -2.0 * scale * wk / t
            for sign in (+1.0, -1.0):
                b.add(t, w, parabola_pairs(sign * t), 0.0, 0)
            if quad.pv_model == "paired-with-local-slope":
                # subtract the tangent contribution; it integrates to zero by
                # oddness, so this only reroutes roundoff (cross-check path)
                for sign in (+1.0, -1.0):
                    pairs = [(tri_idx[m], sign * t * d1[m]) for m in range(3)]
                    b.add(t, -w, pairs, 0.0, 0)

        # asymmetric leftover of the adjacent cells, still on the parabola
        xgl, wgl = gauss_legendre(quad.n_mid)
        for sign, h_side in ((+1.0, h_right), (-1.0, h_left)):
            if h_side > r_near:
                for lo, hi in _panels(r_near, h_side):
                    tm = 0.5 * (hi - lo) * (xgl + 1.0) + lo
                    wm = 0.5 * (hi - lo) * wgl
                    for tk, wk in zip(tm, wm):
                        b.add(tk, -2.0 * wk * tk ** (-1.0 - s),
                              parabola_pairs(sign * tk), 0.0, 0)
        cell_lo, cell_hi = i - 1, i + 1  # mid field starts beyond these nodes
    else:
        j = profile.cell_of(x1)
        if not (np.isfinite(vals[j]) and np.isfinite(vals[j + 1])):
            raise SingularPointError("evaluation within a cell of an infinite column")
        x2_pairs = [(jj, -cc) for jj, cc in _cell_interp_pairs(nodes, j, x1)]
        # within the host cell the paired integrand vanishes identically on
        # (0, r0); only the asymmetric remainder of the cell contributes
        d_left = x1 - nodes[j]
        d_right = nodes[j + 1] - x1
        r0 = min(d_left, d_right)
        xgl, wgl = gauss_legendre(quad.n_mid)
        for sign, d_side in ((+1.0, d_right), (-1.0, d_left)):
            if d_side > r0:
                for lo, hi in _panels(r0, d_side):
                    tm = 0.5 * (hi - lo) * (xgl + 1.0) + lo
                    wm = 0.5 * (hi - lo) * wgl
                    for tk, wk in zip(tm, wm):
                        y = x1 + sign * tk
                        pairs = _merge_pairs(_cell_interp_pairs(nodes, j, y) + x2_pairs)
                        b.add(tk, -2.0 * wk * tk ** (-1.0 - s), pairs, 0.0, 0)
        cell_lo, cell_hi = j, j + 1

    # --- mid field: remaining window cells ---------------------------------
    xgl, wgl = gauss_legendre(quad.n_mid)
    r_tail_right = b_win - x1
    r_tail_left = x1 - a_win
    if quad.R_tail is not None:
        r_tail_right = min(r_tail_right, quad.R_tail)
        r_tail_left = min(r_tail_left, quad.R_tail)

    def add_cell(jcell, sign, t_lo, t_hi):
        v0, v1 = vals[jcell], vals[jcell + 1]
        if np.isinf(v0) and np.isinf(v1) and np.sign(v0) != np.sign(v1):
            raise SingularPointError("cell with opposite infinite endpoints")
        if np.isinf(v0) or np.isinf(v1):
            sgn = np.sign(v0 if np.isinf(v0) else v1)
            piece = (t_lo ** (-s) - t_hi ** (-s)) / s
            b.add_const(-2.0 * sgn * f_limit * piece, 1)
            return
        for lo, hi in _panels(t_lo, t_hi):
            tm = 0.5 * (hi - lo) * (xgl + 1.0) + lo
            wm = 0.5 * (hi - lo) * wgl
            for tk, wk in zip(tm, wm):
                y = x1 + sign * tk
                pairs = _merge_pairs(_cell_interp_pairs(nodes, jcell, y) + x2_pairs)
                b.add(tk, -2.0 * wk * tk ** (-1.0 - s), pairs, 0.0, 1)

    for jcell in range(cell_hi, n - 1):  # right side
        t_lo, t_hi = nodes[jcell] - x1, nodes[jcell + 1] - x1
        if t_lo >= r_tail_right:
            break
        add_cell(jcell, +1.0, t_lo, min(t_hi, r_tail_right))
    for jcell in range(cell_lo - 1, -1, -1):  # left side
        t_lo, t_hi = x1 - nodes[jcell + 1], x1 - nodes[jcell]
        if t_lo >= r_tail_left:
            break
        add_cell(jcell, -1.0, t_lo, min(t_hi, r_tail_left))

    # --- analytic/sampled tails beyond the window (or beyond R_tail) -------
    for sign, d in ((+1.0, r_tail_right), (-1.0, r_tail_left)):
        _add_tail(b, profile.exterior, x1, x2_pairs, sign, d, p, quad, f_limit)

    return b.finish(x1)


def _add_tail(b, exterior, x1, x2_pairs, sign, d, p, quad, f_limit):
    """Columns at distance > d on one side, following the exterior model."""
    s = p.s
    side = "right" if sign > 0 else "left"
    if exterior.kind in ("empty", "full"):
        sgn = -1.0 if exterior.kind == "empty" else 1.0
        b.add_const(-2.0 * sgn * f_limit * d ** (-s) / s, 2)
        return
    # substitution t = d * rho^(-1/s) flattens the power tail exactly;
    # geometric sub-panels in rho tame the remaining fractional smoothness
    xgl, wgl = gauss_legendre(quad.n_tail)
    edges = [1.0] + [0.2**k for k in range(1, quad.tail_panels)] + [0.0]
    for hi, lo in zip(edges[:-1], edges[1:]):
        rho = 0.5 * (hi - lo) * (xgl + 1.0) + lo
        wr = 0.5 * (hi - lo) * wgl
        for rk, wk in zip(rho, wr):
            if rk == 0.0:
                continue
            t = d * rk ** (-1.0 / s)
            y = x1 + sign * t
            w = -2.0 * wk * d ** (-s) / s
            if exterior.kind == "linear":
                slope = exterior.slope_right if side == "right" else exterior.slope_left
                offs = exterior.offset_right if side == "right" else exterior.offset_left
                cval = offs + slope * y
            else:  # sampled
                cval = float(np.asarray(exterior.func(np.array([y])), dtype=float)[0])
            b.add(t, w, list(x2_pairs), cval, 2)


# ---------------------------------------------------------------------------
# plan evaluation


def evaluate_plan(plan: EvalPlan, values: np.ndarray, p: FracParams):
    """Evaluate a plan against window node values; returns (near, mid, tail)."""
    num = np.einsum("km,km->k", plan.coef, values[plan.idx]) + plan.cval
    contrib = plan.weight * slope_weight(num / plan.t, p)
    near = float(np.dot(contrib, plan.part == 0)) + plan.const_near
    mid = float(np.dot(contrib, plan.part == 1)) + plan.const_mid
    tail = float(np.dot(contrib, plan.part == 2)) + plan.const_tail
    return near, mid, tail


def tail_contribution(exterior_model: ExteriorModel, at, from_radius: float, p: FracParams,
                      quad: CurvatureQuad | None = None) -> float:
    """Curvature contribution of all columns at distance > from_radius.

    Both sides are taken at the same radius.  Closed form for empty/full
    exteriors; substitution quadrature of the bounded column weights for
    linear and sampled models (truncation-free: the substitution integrates
    the whole tail).
    """
    if from_radius <= 0:
        raise ParameterError("from_radius must be positive")
    quad = quad or CurvatureQuad()
    x1, x2 = float(at[0]), float(at[1])
    b = _PlanBuilder()
    f_limit = slope_weight_limit(p)
    x2_pairs = []  # x2 folded as a constant below
    for sign in (+1.0, -1.0):
        _add_tail(b, exterior_model, x1, x2_pairs, sign, float(from_radius), p, quad, f_limit)
    plan = b.finish(x1)
    if plan.npoints:
        num = plan.cval - x2
        contrib = plan.weight * slope_weight(num / plan.t, p)
        return float(np.sum(contrib)) + plan.const_tail
    return plan.const_tail


def nmc_graph(profile: GraphProfile, at, p: FracParams, quad: CurvatureQuad | None = None,
              estimate_error: bool = True) -> CurvatureReport:
    """Nonlocal mean curvature of the profile at a point on its graph.

    ``at`` must lie on the graph (its height is checked against the profile
    and then snapped).  Positive values mean the point sees an excess of
    complement; a graph lying above a halfplane tangent pushes the value
    negative.
    """
    quad = quad or CurvatureQuad()
    x1, x2 = float(at[0]), float(at[1])
    u_here = float(profile.interp(np.array([x1]))[0])
    if not np.isfinite(u_here):
        raise SingularPointError("evaluation abscissa sits in an infinite column")
    if abs(x2 - u_here) > 1e-8 * (1.0 + abs(u_here)):
        raise ParameterError(
            f"point ({x1}, {x2}) is not on the graph (profile value {u_here})"
        )
    plan = build_plan(profile, x1, p, quad)
    near, mid, tail = evaluate_plan(plan, profile.values, p)
    value = near + mid + tail
    est = 0.0
    if estimate_error:
        plan2 = build_plan(profile, x1, p, quad.coarsened())
        n2, m2, t2 = evaluate_plan(plan2, profile.values, p)
        est = abs(value - (n2 + m2 + t2))
    return CurvatureReport(value=value, near=near, mid=mid, tail=tail,
                           est_quadrature_error=est)
