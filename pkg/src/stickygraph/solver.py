"""Slab solver: discrete nonlocal minimal graphs in (0,1) x R.

The exterior datum v + t*phi is frozen outside (0,1); the unknowns are the
graph values at interior grid nodes.  The discrete equations demand vanishing
nonlocal mean curvature at every interior node, and are driven to equilibrium
by a damped explicit pseudo-flow with optional Newton acceleration.

Sign convention: the residual at a node is the curvature value there, which
is positive when the point sees an excess of complement; the flow then moves
the graph down.  Raising one node raises its own residual, so the flow is
contractive and inherits the comparison-principle structure of the continuum
problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .curvature import CurvatureQuad, build_plan, evaluate_plan
from .errors import AssemblyError, DivergenceError, ParameterError
from .kernel import FracParams, Grid, make_graded_grid, slope_weight, slope_weight_deriv
from .profiles import ExteriorModel, GraphProfile
from .shapes import Shape

__all__ = [
    "ExteriorData",
    "SlabProblem",
    "SolveOptions",
    "SolveReport",
    "DiscreteSystem",
    "assemble",
    "residual",
    "picard_step",
    "newton_step",
    "solve",
]


@dataclass(frozen=True)
class ExteriorData:
    """Prescribed graph values outside the slab (0,1).

    The datum at abscissa x is v(x) + t * phi(x); phi must be nonnegative and
    vanish on (-d, 1+d).  Beyond the window the datum continues linearly with
    the slopes of the linear parts of v.
    """

    v: Shape
    phi: Shape
    t: float = 0.0
    d: float = 0.25
    window: tuple[float, float] = (-5.0, 6.0)

    def __post_init__(self):
        if self.t < 0:
            raise ParameterError("perturbation amplitude t must be >= 0")
        if self.d <= 0:
            raise ParameterError("phi clearance d must be > 0")
        a, b = self.window
        if not (a < -1.0 and b > 2.0):
            raise ParameterError("window must strictly contain [-1, 2]")
        probe = np.linspace(a, b, 4001)
        phi_vals = self.phi.value(probe)
        if np.any(phi_vals < -1e-14):
            raise ParameterError("phi must be nonnegative")
        gap = (probe > -self.d) & (probe < 1.0 + self.d)
        if np.any(np.abs(phi_vals[gap]) > 1e-14):
            raise ParameterError(f"phi must vanish on (-{self.d}, 1+{self.d})")

    def value(self, x):
        return self.v.value(x) + self.t * self.phi.value(x)

    def deriv(self, x):
        return self.v.deriv(x) + self.t * self.phi.deriv(x)

    def with_t(self, t: float) -> "ExteriorData":
        return replace(self, t=float(t))


@dataclass(frozen=True)
class SlabProblem:
    """Parameters, exterior datum, interior grid, and quadrature config."""

    params: FracParams
    exterior: ExteriorData
    interior_grid: Grid
    quad: CurvatureQuad = field(default_factory=CurvatureQuad)

    def __post_init__(self):
        g = self.interior_grid
        if g.domain != (0.0, 1.0):
            raise ParameterError("interior grid must span [0, 1]")

    @staticmethod
    def default(params: FracParams, exterior: ExteriorData, n: int = 97,
                ratio: float = 0.82, quad: CurvatureQuad | None = None) -> "SlabProblem":
        grid = make_graded_grid((0.0, 1.0), n, ("geometric_both", ratio))
        return SlabProblem(params, exterior, grid, quad or CurvatureQuad())


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-6
    max_iter: int = 160
    damping: float = 0.5
    use_newton: bool = True
    picard_burn: int = 2

    def __post_init__(self):
        if self.damping <= 0:
            raise ParameterError("damping must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Converged (or best-effort) slab solution with its iteration history."""

    solution: GraphProfile
    residual_inf: float
    iterations: int
    converged: bool
    history: tuple
    unknown_idx: np.ndarray
    tol: float

    @property
    def interior_values(self) -> np.ndarray:
        return self.solution.values[self.unknown_idx]


# ---------------------------------------------------------------------------
# window grid construction


def _fill(lo: float, hi: float, h: float) -> np.ndarray:
    """Nodes strictly between lo and hi at spacing <= h."""
    m = max(1, int(np.ceil((hi - lo) / h)))
    return lo + (hi - lo) * np.arange(1, m) / m


def _exterior_ladder(inner_gap: float, reach: float, growth: float = 1.35) -> np.ndarray:
    """Distances from the wall: geometric from the first interior gap out to reach."""
    d = [inner_gap]
    while d[-1] < reach:
        d.append(d[-1] * growth)
    out = np.array(d)
    return out[out < reach]


def _build_window_grid(problem: SlabProblem):
    """Window grid = left exterior + interior + right exterior node sets."""
    interior = problem.interior_grid.nodes
    a_win, b_win = problem.exterior.window
    far_h = 0.25
    gaps = np.diff(interior)

    def one_side(wall: float, edge: float, sign: float, inner_gap: float):
        # graded toward the wall so the trace diagnostics see matched cells
        ladder = _exterior_ladder(inner_gap, min(0.5, abs(edge - wall)))
        graded = wall + sign * ladder
        reach = wall + sign * (ladder[-1] if ladder.size else 0.0)
        lo_x, hi_x = sorted((reach, edge))
        segs = [(lo_x, hi_x, far_h)]
        for (s_lo, s_hi) in problem.exterior.phi.supports() + problem.exterior.v.supports():
            pad = 0.3 * (s_hi - s_lo)
            c_lo, c_hi = max(lo_x, s_lo - pad), min(hi_x, s_hi + pad)
            if c_hi > c_lo:
                segs.append((c_lo, c_hi, (s_hi - s_lo) / 24.0))
        bounds = sorted({lo_x, hi_x} | {x for (sl, sh, _) in segs for x in (sl, sh)})
        nodes = [np.asarray(graded)]
        for b_lo, b_hi in zip(bounds[:-1], bounds[1:]):
            h_here = min(
                h for (sl, sh, h) in segs if sl <= b_lo + 1e-12 and b_hi - 1e-12 <= sh
            )
            nodes.append(np.concatenate(([b_lo], _fill(b_lo, b_hi, h_here), [b_hi])))
        allnodes = np.unique(np.concatenate(nodes))
        allnodes = allnodes[(allnodes - wall) * sign > 1e-14]
        allnodes = allnodes[(edge - allnodes) * sign >= -1e-14]
        # drop near-coincident nodes so no cell degenerates
        keep = np.concatenate(([True], np.diff(allnodes) > 1e-12))
        return allnodes[keep]

    left = one_side(0.0, a_win, -1.0, gaps[0]) if a_win < 0 else np.array([])
    right = one_side(1.0, b_win, +1.0, gaps[-1]) if b_win > 1 else np.array([])
    nodes = np.concatenate((left, interior, right))
    if nodes[0] != a_win or nodes[-1] != b_win:
        raise AssemblyError("window grid does not reach the window edges")
    if not np.all(np.diff(nodes) > 0):
        raise AssemblyError("window grid construction produced non-monotone nodes")
    grid = Grid(nodes, (a_win, b_win), "window")
    n_left = left.size
    interior_slice = slice(n_left, n_left + interior.size)
    return grid, interior_slice


# ---------------------------------------------------------------------------
# assembled system


@dataclass
class DiscreteSystem:
    """Frozen quadrature geometry + exterior closure for one slab problem."""

    problem: SlabProblem
    grid: Grid
    frozen_values: np.ndarray        # window values with NaN at unknowns
    unknown_idx: np.ndarray          # window indices of the unknowns
    trace_idx: tuple                 # window indices of the wall nodes x=0,1
    exterior_model: ExteriorModel
    t: np.ndarray
    weight: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    cval: np.ndarray
    comp: np.ndarray                 # component (unknown) index per point
    const: np.ndarray                # per-component closed-form constants
    h_scale: np.ndarray              # local spacing scale per unknown

    @property
    def n_unknowns(self) -> int:
        return self.unknown_idx.size

    def full_values(self, u: np.ndarray) -> np.ndarray:
        vals = self.frozen_values.copy()
        vals[self.unknown_idx] = u
        return vals

    def profile(self, u: np.ndarray) -> GraphProfile:
        return GraphProfile(self.grid, self.full_values(u), self.exterior_model,
                            corner_nodes=self.trace_idx)

    def initial_guess(self) -> np.ndarray:
        v0 = self.frozen_values[self.trace_idx[0]]
        v1 = self.frozen_values[self.trace_idx[1]]
        x = self.grid.nodes[self.unknown_idx]
        return v0 + (v1 - v0) * x

    def set_exterior(self, exterior: ExteriorData) -> "DiscreteSystem":
        """Same geometry, new exterior values (amplitude sweeps reuse plans).

        The quadrature tails bake the beyond-window continuation, so reuse is
        valid only while that continuation is unchanged: same far-field slope
        and same window-edge values (bump supports stay inside the window).
        """
        new_problem = replace(self.problem, exterior=exterior)
        new_model = _exterior_model(new_problem, self.grid)
        old_model = self.exterior_model
        same_tail = (
            new_model.slope_left == old_model.slope_left
            and new_model.slope_right == old_model.slope_right
            and abs(new_model.offset_left - old_model.offset_left) < 1e-13
            and abs(new_model.offset_right - old_model.offset_right) < 1e-13
        )
        if not same_tail:
            raise AssemblyError(
                "cannot reuse plans: the beyond-window continuation changed; reassemble"
            )
        frozen = _frozen_values(new_problem, self.grid, self.unknown_idx, self.trace_idx)
        return replace(
            self, problem=new_problem, frozen_values=frozen, exterior_model=new_model
        )


def _exterior_model(problem: SlabProblem, grid: Grid) -> ExteriorModel:
    ext = problem.exterior
    slope = ext.v.tail_slope()
    a_win, b_win = grid.domain
    v_a = float(ext.value(np.array([a_win]))[0])
    v_b = float(ext.value(np.array([b_win]))[0])
    return ExteriorModel.linear(
        slope_left=slope, slope_right=slope,
        offset_left=v_a - slope * a_win, offset_right=v_b - slope * b_win,
    )


def _frozen_values(problem, grid, unknown_idx, trace_idx):
    nodes = grid.nodes
    vals = problem.exterior.value(nodes)
    vals[trace_idx[0]] = float(problem.exterior.value(np.array([0.0]))[0])
    vals[trace_idx[1]] = float(problem.exterior.value(np.array([1.0]))[0])
    vals[unknown_idx] = np.nan
    return vals


def assemble(problem: SlabProblem) -> DiscreteSystem:
    """Freeze the exterior closure and build all quadrature plans."""
    grid, interior_slice = _build_window_grid(problem)
    nodes = grid.nodes
    lo, hi = interior_slice.start, interior_slice.stop
    trace_idx = (lo, hi - 1)
    if nodes[lo] != 0.0 or nodes[hi - 1] != 1.0:
        raise AssemblyError("interior grid endpoints must be 0 and 1")
    unknown_idx = np.arange(lo + 1, hi - 1)
    if unknown_idx.size == 0:
        raise AssemblyError("no interior unknowns; refine the interior grid")

    frozen = _frozen_values(problem, grid, unknown_idx, trace_idx)
    ext_model = _exterior_model(problem, grid)
    # plans are geometry-only; build them against a finite placeholder profile
    placeholder = frozen.copy()
    placeholder[unknown_idx] = 0.0
    prof = GraphProfile(grid, placeholder, ext_model)

    t_all, w_all, idx_all, coef_all, cval_all, comp_all = [], [], [], [], [], []
    const = np.zeros(unknown_idx.size)
    edge_anchor = {"left": (0, nodes[0]), "right": (nodes.size - 1, nodes[-1])}
    for ci, wi in enumerate(unknown_idx):
        plan = build_plan(prof, nodes[wi], problem.params, problem.quad)
        t_all.append(plan.t)
        w_all.append(plan.weight)
        idx_all.append(plan.idx)
        coef_all.append(plan.coef)
        cval_all.append(plan.cval)
        comp_all.append(np.full(plan.npoints, ci, dtype=np.int64))
        const[ci] = plan.const_near + plan.const_mid + plan.const_tail
    t = np.concatenate(t_all)
    weight = np.concatenate(w_all)
    idx = np.concatenate(idx_all)
    coef = np.concatenate(coef_all)
    cval = np.concatenate(cval_all)
    comp = np.concatenate(comp_all)

    gaps = np.diff(nodes)
    h_loc = 0.5 * (gaps[unknown_idx - 1] + gaps[unknown_idx])
    h_scale = h_loc ** problem.params.s

    return DiscreteSystem(
        problem=problem, grid=grid, frozen_values=frozen, unknown_idx=unknown_idx,
        trace_idx=trace_idx, exterior_model=ext_model,
        t=t, weight=weight, idx=idx, coef=coef, cval=cval, comp=comp, const=const,
        h_scale=h_scale,
    )


# ---------------------------------------------------------------------------
# residual / jacobian


def _residual_core(system: DiscreteSystem, u: np.ndarray, with_jacobian: bool,
                   with_diag: bool = False):
    p = system.problem.params
    vals = system.full_values(u)
    num = np.einsum("km,km->k", system.coef, vals[system.idx]) + system.cval
    rho = num / system.t
    contrib = system.weight * slope_weight(rho, p)
    r = np.bincount(system.comp, weights=contrib, minlength=system.n_unknowns)
    r += system.const
    if not (with_jacobian or with_diag):
        return r, None, None
    dmask = system.weight * slope_weight_deriv(rho, p) / system.t
    n = system.n_unknowns
    col = np.full(system.grid.n, -1, dtype=np.int64)
    col[system.unknown_idx] = np.arange(n)
    if with_diag and not with_jacobian:
        diag = np.zeros(n)
        for m in range(system.idx.shape[1]):
            cols = col[system.idx[:, m]]
            sel = (cols >= 0) & (cols == system.comp) & (system.coef[:, m] != 0.0)
            if sel.any():
                np.add.at(diag, system.comp[sel], dmask[sel] * system.coef[sel, m])
        return r, None, diag
    jac = np.zeros((n, n))
    for m in range(system.idx.shape[1]):
        cols = col[system.idx[:, m]]
        sel = (cols >= 0) & (system.coef[:, m] != 0.0)
        if sel.any():
            np.add.at(jac, (system.comp[sel], cols[sel]), dmask[sel] * system.coef[sel, m])
    return r, jac, np.diag(jac).copy()


def residual(system: DiscreteSystem, u: np.ndarray) -> np.ndarray:
    """Curvature residual at every unknown node (equals nmc_graph there)."""
    u = np.asarray(u, dtype=float)
    if not np.isfinite(u).all():
        raise ParameterError("iterate contains non-finite values")
    r, _, _ = _residual_core(system, u, with_jacobian=False)
    return r


def residual_and_jacobian(system: DiscreteSystem, u: np.ndarray):
    u = np.asarray(u, dtype=float)
    r, jac, _ = _residual_core(system, u, with_jacobian=True)
    return r, jac


def picard_step(system: DiscreteSystem, u: np.ndarray, damping: float) -> np.ndarray:
    """Explicit pseudo-flow step; positive curvature moves the graph down.

    Each node is scaled by the current diagonal sensitivity of its own
    residual (damped Jacobi).  On strongly graded grids this adapts to the
    h^(-1-s) stiffness of the wall nodes, where a fixed h^s scaling would
    oscillate.
    """
    if damping < 0:
        raise ParameterError("damping must be >= 0")
    u = np.asarray(u, dtype=float)
    r, _, diag = _residual_core(system, u, with_jacobian=False, with_diag=True)
    scale = np.where(diag > 0, 1.0 / np.maximum(diag, 1e-300), system.h_scale)
    u_new = u - damping * scale * r
    if not np.isfinite(u_new).all():
        raise DivergenceError("picard step produced non-finite values", iterate=u)
    return u_new


def newton_step(system: DiscreteSystem, u: np.ndarray):
    """One Newton step; returns (u_new, ok).  ok=False signals fallback.

    The Jacobian is checked for a positive diagonal (the linearized operator
    must move each node against its own residual) and solvability; on
    failure the caller should fall back to picard_step.
    """
    r, jac = residual_and_jacobian(system, u)
    diag = np.diag(jac)
    if not (np.isfinite(jac).all() and np.all(diag > 0)):
        return u, False
    try:
        delta = np.linalg.solve(jac, -r)
    except np.linalg.LinAlgError:
        return u, False
    u_new = u + delta
    if not np.isfinite(u_new).all():
        return u, False
    return u_new, True


def solve(problem_or_system, opts: SolveOptions | None = None) -> SolveReport:
    """Drive the interior values to vanishing curvature residual.

    Picard burn-in followed by guarded Newton steps (a Newton update is kept
    only while it reduces the residual; otherwise the flow continues).  Hitting
    max_iter yields a non-converged report, never an exception.
    """
    opts = opts or SolveOptions()
    system = problem_or_system
    if isinstance(problem_or_system, SlabProblem):
        system = assemble(problem_or_system)

    u = system.initial_guess()
    damping = opts.damping
    history = []
    r = residual(system, u)
    r_inf = float(np.max(np.abs(r)))
    history.append(r_inf)
    iterations = 0
    best_u, best_r = u.copy(), r_inf
    stalls = 0

    while r_inf > opts.tol and iterations < opts.max_iter:
        stepped = False
        if opts.use_newton and iterations >= opts.picard_burn:
            # full Newton steps: the residual infinity norm may grow
            # transiently (the wall rows are h^(-1-s) stiff) but the iteration
            # is quadratically convergent once the interior has lifted
            u_new, ok = newton_step(system, u)
            if ok:
                u = u_new
                r_inf = float(np.max(np.abs(residual(system, u))))
                stepped = True
        if not stepped:
            u = picard_step(system, u, damping)
            r_inf = float(np.max(np.abs(residual(system, u))))
        iterations += 1
        history.append(r_inf)
        if r_inf < best_r:
            best_u, best_r = u.copy(), r_inf
            stalls = 0
        else:
            stalls += 1
            # no progress for a long stretch: restart from the best iterate
            # with stronger damping on the fallback flow
            if stalls >= 25:
                damping *= 0.5
                u, r_inf = best_u.copy(), best_r
                stalls = 0

    if r_inf > best_r:
        u, r_inf = best_u, best_r
    converged = bool(r_inf <= opts.tol)
    return SolveReport(
        solution=system.profile(u),
        residual_inf=r_inf,
        iterations=iterations,
        converged=converged,
        history=tuple(history),
        unknown_idx=system.unknown_idx.copy(),
        tol=opts.tol,
    )
