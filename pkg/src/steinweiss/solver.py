"""Extremal pairs by alternate maximization; integral systems by fixed point.

The best constant is the supremum of <g, V f> over unit-norm pairs.  With
f fixed the optimal g is the Hoelder-equality competitor proportional to
V(f)^(q-1); with g fixed the optimal f is proportional to W(g)^(p'-1).
Alternating the two exact half-steps makes the functional nondecreasing,
and the scale drift along the exact dilation symmetry is pinned by
snapping the half-mass radius of the f^p measure back to 1 through an
integer grid shift (which preserves norms and the functional to roundoff).

The weighted integral systems are solved by normalized fixed-point sweeps
u <- T1(v^q0), v <- T2(u^p0); the homogeneity gauge is fixed by unit
norms during the sweeps and the true amplitudes are reconstructed from
the recorded normalization factors at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .admissibility import (Params, SystemExponents, SystemKind,
                            check_admissible, check_system)
from .errors import PreconditionError, ZeroImage
from .operators import (OperatorContext, _boundary_to_interior,
                        _interior_to_boundary, apply_V, apply_W, functional_J)
from .admissibility import unit_ball_volume
from .profiles import (BoundaryProfile, HalfSpaceProfile, annulus_measures,
                       boundary_norm, decreasing_rearrangement, halfspace_norm,
                       truncation_diagnostics, _shift_indices)

_UNIT_NORM_TOL = 1e-8


@dataclass
class SolveOptions:
    max_iters: int = 400
    tol_J: float = 1e-12          # relative stall tolerance on the functional
    tol_res: float = 1e-8         # residual target for system mode
    scale_fix: str = "half_mass_radius"   # or "none"
    init: str = "power_law_bump"  # "indicator" | "from_profile"
    init_profile: BoundaryProfile | None = None
    relax: float = 1.0            # damping for system sweeps, in (0, 1]

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol_J <= 0 or self.tol_res <= 0:
            raise ValueError("tolerances must be positive")
        if self.scale_fix not in ("half_mass_radius", "none"):
            raise ValueError(f"unknown scale_fix {self.scale_fix!r}")
        if self.init not in ("power_law_bump", "indicator", "from_profile"):
            raise ValueError(f"unknown init {self.init!r}")
        if not (0.0 < self.relax <= 1.0):
            raise ValueError("relax must lie in (0, 1]")


@dataclass
class SolveReport:
    f_star: BoundaryProfile
    g_star: HalfSpaceProfile
    C_est: float
    J_history: list[float]
    el_residual: tuple[float, float]
    truncation_diag: dict
    converged: bool
    iterations: int = 0
    extra: dict = field(default_factory=dict)


def initial_profile(ctx: OperatorContext, opts: SolveOptions) -> BoundaryProfile:
    """Starting boundary profile per the requested initialization."""
    grid = ctx.boundary_grid
    n, p = ctx.params.n, ctx.params.p
    if opts.init == "from_profile":
        if opts.init_profile is None:
            raise PreconditionError("init='from_profile' needs init_profile")
        f = opts.init_profile
    elif opts.init == "indicator":
        f = BoundaryProfile(grid=grid, values=(grid.nodes < 1.0).astype(float), n=n)
    else:
        # power-law bump with the fixed-point decay (W g)^(p'-1) ~ r^-d;
        # the envelope decay (n-1)/p itself is the borderline non-L^p rate
        # and floods the outer grid, so it is not usable as a start
        d = ((n + 2.0 - ctx.params.gamma + ctx.params.alpha)
             * (ctx.params.pprime - 1.0))
        d = max(d, (n - 1) / p + 0.5)
        vals = (1.0 + grid.nodes ** 2) ** (-0.5 * d)
        f = BoundaryProfile(grid=grid, values=vals, n=n)
    f = decreasing_rearrangement(f)
    nrm = boundary_norm(f, p)
    if nrm == 0.0:
        raise ZeroImage("initial profile vanishes identically")
    return f.with_values(f.values / nrm, decreasing=True)


def optimal_g(f: BoundaryProfile, ctx: OperatorContext) -> HalfSpaceProfile:
    """Best unit-q'-norm competitor for a fixed f: normalized V(f)^(q-1)."""
    if abs(boundary_norm(f, ctx.params.p) - 1.0) > _UNIT_NORM_TOL:
        raise PreconditionError("optimal_g requires a unit L^p profile")
    vf = apply_V(f, ctx)
    if not np.any(vf.values > 0.0):
        raise ZeroImage("V(f) vanishes identically")
    g = vf.values ** (ctx.params.q - 1.0)
    g_prof = vf.with_values(g)
    return g_prof.with_values(g / halfspace_norm(g_prof, ctx.params.qprime))


def optimal_f(g: HalfSpaceProfile, ctx: OperatorContext) -> BoundaryProfile:
    """Best unit-p-norm competitor for a fixed g: normalized W(g)^(p'-1)."""
    if abs(halfspace_norm(g, ctx.params.qprime) - 1.0) > _UNIT_NORM_TOL:
        raise PreconditionError("optimal_f requires a unit L^q' profile")
    wg = apply_W(g, ctx)
    if not np.any(wg.values > 0.0):
        raise ZeroImage("W(g) vanishes identically")
    f = wg.values ** (ctx.params.pprime - 1.0)
    f_prof = wg.with_values(f)
    return f_prof.with_values(f / boundary_norm(f_prof, ctx.params.p))


def _envelope_project(f: BoundaryProfile, p: float) -> BoundaryProfile:
    """Clip a decreasing unit-norm profile to its ball-volume envelope.

    Unit-norm decreasing profiles obey f(r) <= (v_{n-1} r^(n-1))^(-1/p);
    on the grid that bound is what excludes single-node concentration
    artifacts, whose discrete functional value grows without bound under
    refinement.  Clipping reduces the norm, so clip and renormalize until
    the bound holds at unit norm; the true extremal satisfies the bound
    with a finite margin and is untouched.
    """
    env = (unit_ball_volume(f.n - 1) * f.grid.nodes ** (f.n - 1)) ** (-1.0 / p)
    vals = f.values
    for _ in range(8):
        clipped = np.minimum(vals, env)
        prof = f.with_values(clipped, decreasing=f.decreasing)
        nrm = boundary_norm(prof, p)
        if nrm == 0.0:
            raise ZeroImage("envelope projection removed all mass")
        vals = clipped / nrm
        if np.all(vals <= env * (1.0 + 1e-13)):
            break
    return f.with_values(np.minimum(vals, env), decreasing=f.decreasing)


def half_mass_radius(f: BoundaryProfile, p: float) -> float:
    """Median radius of the f^p surface measure."""
    mass = annulus_measures(f) * f.values ** p
    cum = np.cumsum(mass)
    if cum[-1] <= 0.0:
        raise ZeroImage("profile carries no mass")
    idx = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(f.grid.nodes[min(idx, len(f.grid) - 1)])


def _snap_shift(f: BoundaryProfile, p: float) -> tuple[BoundaryProfile, int]:
    """Shift f by whole grid steps so its half-mass radius returns near 1.

    Integer shifts on a geometric grid are exact dilations.  A decreasing
    profile shifted outward keeps its plateau: the vacated head is filled
    with the old first value, which is the flat continuation the profile
    had inside r_min.  Triggers only once the drift exceeds 1.5 steps, so
    a settled iteration is never perturbed.
    """
    r_med = half_mass_radius(f, p)
    h = f.grid.log_step
    drift = -math.log(r_med) / h
    if abs(drift) < 1.5:
        return f, 0
    m = round(drift)
    scale = math.exp(m * h) ** (-(f.n - 1) / p)
    shifted = _shift_indices(f.values, m)
    if m > 0:
        shifted[:m] = f.values[0]
    out = f.with_values(scale * shifted, decreasing=f.decreasing)
    nrm = boundary_norm(out, p)
    if nrm == 0.0:
        raise ZeroImage("scale fix shifted the profile off the grid")
    return out.with_values(out.values / nrm, decreasing=out.decreasing), m


def solve_extremal(ctx: OperatorContext, opts: SolveOptions | None = None) -> SolveReport:
    """Monotone alternate maximization of the bilinear functional.

    Runs in the existence regime p < q only.  Each iterate's f is kept
    radial decreasing and unit norm; the report's g_star is the exact
    Hoelder-optimal competitor of the final f_star, so C_est equals the
    discrete q-norm of V(f_star).
    """
    opts = opts or SolveOptions()
    params = ctx.params
    rep = check_admissible(params)
    if not rep.passed:
        raise PreconditionError(
            f"parameters are not admissible: failing {rep.failing()}")
    if not params.p < params.q:
        raise PreconditionError(
            f"extremal solve requires p < q, got p={params.p}, q={params.q}")

    p, q, qprime, pprime = params.p, params.q, params.qprime, params.pprime
    f = initial_profile(ctx, opts)
    J_history: list[float] = []
    converged = False
    iterations = 0
    for k in range(opts.max_iters):
        iterations = k + 1
        vf = _boundary_to_interior(f.values, ctx, params.alpha, params.beta)
        vf_prof = HalfSpaceProfile(rho_grid=ctx.rho_grid, t_grid=ctx.t_grid,
                                   values=vf, n=params.n)
        J = halfspace_norm(vf_prof, q)
        if J <= 0.0:
            raise ZeroImage("V(f) vanished during the iteration")
        J_history.append(J)
        if k >= 2 and abs(J - J_history[-2]) <= opts.tol_J * J:
            converged = True
            break
        g_vals = vf ** (q - 1.0)
        g_vals /= halfspace_norm(vf_prof.with_values(g_vals), qprime)
        wg = _interior_to_boundary(g_vals, ctx, params.beta, params.alpha)
        f_vals = wg ** (pprime - 1.0)
        f_new = f.with_values(f_vals)
        f_new = f_new.with_values(f_vals / boundary_norm(f_new, p))
        f = decreasing_rearrangement(f_new)
        f = f.with_values(f.values / boundary_norm(f, p), decreasing=True)
        f = _envelope_project(f, p)
        if opts.scale_fix == "half_mass_radius":
            f, _ = _snap_shift(f, p)

    f_star = f
    g_star = optimal_g(f_star, ctx)
    C_est = functional_J(f_star, g_star, ctx)
    diag = truncation_diagnostics(f_star, p)
    return SolveReport(f_star=f_star, g_star=g_star, C_est=C_est,
                       J_history=J_history, el_residual=(math.nan, math.nan),
                       truncation_diag=diag, converged=converged,
                       iterations=iterations)


def _system_maps(sys: SystemExponents, ctx: OperatorContext):
    """Weight placements of the two system equations, by kind.

    The double-weighted system carries both weights in each equation; the
    single-weighted system keeps only the integrand weight.
    """
    a, b = sys.alpha, sys.beta
    if sys.kind is SystemKind.DOUBLE_WEIGHTED:
        t1 = lambda h: _interior_to_boundary(h, ctx, b, a)
        t2 = lambda h: _boundary_to_interior(h, ctx, a, b)
    else:
        t1 = lambda h: _interior_to_boundary(h, ctx, b, 0.0)
        t2 = lambda h: _boundary_to_interior(h, ctx, a, 0.0)
    return t1, t2


def el_residual(u: BoundaryProfile, v: HalfSpaceProfile, sys: SystemExponents,
                ctx: OperatorContext) -> tuple[float, float]:
    """Relative sup-norm residuals of the two system equations."""
    t1, t2 = _system_maps(sys, ctx)
    res_u = t1(v.values ** sys.q0)
    res_v = t2(u.values ** sys.p0)
    ru = float(np.max(np.abs(u.values - res_u)) / np.max(np.abs(u.values)))
    rv = float(np.max(np.abs(v.values - res_v)) / np.max(np.abs(v.values)))
    return ru, rv


def _system_norm_u(vals: np.ndarray, ctx: OperatorContext, p0: float) -> float:
    prof = BoundaryProfile(grid=ctx.boundary_grid, values=vals, n=ctx.params.n)
    return boundary_norm(prof, p0 + 1.0)


def _system_norm_v(vals: np.ndarray, ctx: OperatorContext, q0: float) -> float:
    prof = HalfSpaceProfile(rho_grid=ctx.rho_grid, t_grid=ctx.t_grid,
                            values=vals, n=ctx.params.n)
    return halfspace_norm(prof, q0 + 1.0)


def solve_system(sys: SystemExponents, ctx: OperatorContext,
                 opts: SolveOptions | None = None
                 ) -> tuple[BoundaryProfile, HalfSpaceProfile, SolveReport]:
    """Normalized fixed-point iteration for the weighted integral system.

    Sweeps alternate the two equations with unit-norm gauge fixing; the
    converged amplitudes are reconstructed from the final normalization
    factors through the system's homogeneity (degree p0*q0 != 1).
    """
    opts = opts or SolveOptions()
    rep = check_system(sys)
    if not rep.passed:
        raise PreconditionError(f"system exponents fail: {rep.failing()}")
    p0, q0 = sys.p0, sys.q0
    if abs(p0 * q0 - 1.0) < 1e-12:
        raise PreconditionError(
            "p0*q0 = 1: the homogeneity gauge cannot be fixed")
    t1, t2 = _system_maps(sys, ctx)

    if opts.init == "from_profile" and opts.init_profile is not None:
        u_vals = opts.init_profile.values.copy()
    else:
        decay = (sys.n + 2.0 - sys.gamma + sys.alpha) / 2.0
        u_vals = (1.0 + ctx.boundary_grid.nodes ** 2) ** (-0.5 * decay)
    if not np.any(u_vals > 0.0):
        raise ZeroImage("system initialization vanishes identically")
    u_vals = u_vals / _system_norm_u(u_vals, ctx, p0)
    b = t2(u_vals ** p0)
    if not np.any(b > 0.0):
        raise ZeroImage("first interior image vanishes identically")
    m_b = _system_norm_v(b, ctx, q0)
    v_vals = b / m_b

    converged = False
    iterations = 0
    m_a = math.nan
    omega = opts.relax
    for k in range(opts.max_iters):
        iterations = k + 1
        a = t1(v_vals ** q0)
        if not np.any(a > 0.0):
            raise ZeroImage("boundary image vanished during iteration")
        m_a = _system_norm_u(a, ctx, p0)
        u_new = a / m_a
        if omega < 1.0:
            u_new = u_vals ** (1.0 - omega) * u_new ** omega
            u_new /= _system_norm_u(u_new, ctx, p0)
        du = float(np.max(np.abs(u_new - u_vals)) / np.max(u_new))
        u_vals = u_new
        b = t2(u_vals ** p0)
        if not np.any(b > 0.0):
            raise ZeroImage("interior image vanished during iteration")
        m_b = _system_norm_v(b, ctx, q0)
        v_new = b / m_b
        if omega < 1.0:
            v_new = v_vals ** (1.0 - omega) * v_new ** omega
            v_new /= _system_norm_v(v_new, ctx, q0)
        dv = float(np.max(np.abs(v_new - v_vals)) / np.max(v_new))
        v_vals = v_new
        if max(du, dv) < 0.05 * opts.tol_res:
            converged = True
            break

    # reconstruct amplitudes: with u = a/m_a and v = b/m_b at the fixed
    # point, (c u, d v) solves both equations when c = d^q0 m_a and
    # d = c^p0 m_b, i.e. c = (m_a m_b^q0)^(1/(1-p0*q0)).
    if omega < 1.0:
        # the damped shape is not exactly a/m_a; refresh the factors
        a = t1(v_vals ** q0)
        m_a = _system_norm_u(a, ctx, p0)
        u_vals = a / m_a
        b = t2(u_vals ** p0)
        m_b = _system_norm_v(b, ctx, q0)
        v_vals = b / m_b
    c = (m_a * m_b ** q0) ** (1.0 / (1.0 - p0 * q0))
    d = c ** p0 * m_b
    u = BoundaryProfile(grid=ctx.boundary_grid, values=c * u_vals,
                        n=ctx.params.n)
    v = HalfSpaceProfile(rho_grid=ctx.rho_grid, t_grid=ctx.t_grid,
                         values=d * v_vals, n=ctx.params.n)
    residuals = el_residual(u, v, sys, ctx)
    converged = converged and max(residuals) < opts.tol_res
    diag = truncation_diagnostics(u, p0 + 1.0)
    report = SolveReport(f_star=u, g_star=v, C_est=math.nan, J_history=[],
                         el_residual=residuals, truncation_diag=diag,
                         converged=converged, iterations=iterations)
    return u, v, report


def extremal_to_system(report: SolveReport, ctx: OperatorContext
                       ) -> tuple[BoundaryProfile, HalfSpaceProfile, SystemExponents]:
    """Transform a converged extremal pair into a double-weighted solution.

    With J the converged functional value, u = c1 f^(p-1) and
    v = c2 g^(q'-1) solve the system for c1 = J^((1+q0)/(1-p0 q0)),
    c2 = J c1^p0, where p0 = 1/(p-1) and q0 = 1/(q'-1).
    """
    params = ctx.params
    p0 = 1.0 / (params.p - 1.0)
    q0 = 1.0 / (params.qprime - 1.0)
    J = report.C_est
    if not (J > 0.0) or math.isnan(J):
        raise PreconditionError("extremal report lacks a positive C_est")
    if abs(p0 * q0 - 1.0) < 1e-12:
        raise PreconditionError("p0*q0 = 1: amplitude constants undefined")
    c1 = J ** ((1.0 + q0) / (1.0 - p0 * q0))
    c2 = J * c1 ** p0
    u = report.f_star.with_values(c1 * report.f_star.values ** (params.p - 1.0))
    v = report.g_star.with_values(c2 * report.g_star.values ** (params.qprime - 1.0))
    sys = SystemExponents(p0=p0, q0=q0, kind=SystemKind.DOUBLE_WEIGHTED,
                          alpha=params.alpha, beta=params.beta,
                          gamma=params.gamma, n=params.n)
    return u, v, sys
