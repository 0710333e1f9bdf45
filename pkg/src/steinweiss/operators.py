"""Weighted forward/backward operators and the bilinear functional.

The forward operator V maps boundary profiles into the half-space,

    V(f)(x) = |x|^(-beta) int |xi|^(-alpha) P(x, xi, gamma) f(xi) dxi,

and W maps interior profiles back to the boundary with the mirrored
weight placement.  On radial profiles both reduce to integrals of the
angular kernel A(r, rho, t), which concentrates near r = rho on a log
scale t/rho that is far below any affordable grid spacing.  Sampling A
at the nodes therefore blows up on near-diagonal cells; instead the
r-integration uses product quadrature: the kernel times r^(n-2-alpha)
is integrated exactly over each log-cell against a cellwise-constant f.

On aligned geometric grids the cell integrals depend only on the index
offsets (i - j, k - j), so the whole operator is a correlation against a
two-dimensional table

    G(Delta, tau) = int_{Delta-h/2}^{Delta+h/2} e^(kappa u)
                    Phi(cosh u - 1 + tau^2 e^(-u) / 2 + 1) du,

with u = log(r/rho), tau = t/rho, kappa = n-1-alpha-s, and Phi the
chord profile of the kernel module.  Applies run through FFT
correlations; V and W contract the same table with the same cell
measures, so the discrete pairing <g, V f> equals <W g, f> exactly up
to float reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .admissibility import Params, sphere_area
from .errors import DomainError, GridMismatch
from .kernel import get_chord_table
from .profiles import BoundaryProfile, HalfSpaceProfile, RadialGrid

_NODE_RTOL = 1e-12
_GL24_X, _GL24_W = np.polynomial.legendre.leggauss(24)


def _integer_offset(x0: float, y0: float, h: float, what: str) -> int:
    steps = (x0 - y0) / h
    b = round(steps)
    if abs(steps - b) > 1e-9:
        raise GridMismatch(
            f"{what}: grid phases differ by a non-integer number of steps "
            f"({steps})")
    return b


def _cell_table(n: int, gamma: float, alpha: float, h: float,
                deltas: np.ndarray, log_taus: np.ndarray) -> np.ndarray:
    """Cell integrals G(Delta, tau) on the offset grid.

    Each cell is integrated with a fixed Gauss rule in the flattening
    variable u = tau*sinh(v), which resolves the kernel peak at u ~ 0
    of width tau uniformly in tau; away from the diagonal the map is
    nearly logarithmic and equally harmless.
    """
    table = get_chord_table(n, gamma)
    s = table.s
    kappa = (n - 1.0) - alpha - s
    taus = np.exp(log_taus)

    d = deltas[:, None, None]
    tau = taus[None, :, None]
    v_lo = np.arcsinh((d - 0.5 * h) / tau)
    v_hi = np.arcsinh((d + 0.5 * h) / tau)
    v = 0.5 * (v_lo + v_hi) + 0.5 * (v_hi - v_lo) * _GL24_X[None, None, :]
    u = tau * np.sinh(v)
    c = 2.0 * np.sinh(0.5 * u) ** 2 + 0.5 * tau * tau * np.exp(-u)
    integrand = np.exp(kappa * u) * table.phi(c) * tau * np.cosh(v)
    vals = 0.5 * (v_hi - v_lo)[:, :, 0] * np.einsum(
        "q,dmq->dm", _GL24_W, integrand)
    return vals


@dataclass
class CellKernel:
    """Offset-indexed cell-kernel tables shared by V- and W-type applies."""

    n: int
    gamma: float
    s: float
    h: float
    r_grid: RadialGrid
    rho_grid: RadialGrid
    t_grid: RadialGrid
    b_r: int
    b_t: int
    _tables: dict = field(default_factory=dict)
    _spectra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, n: int, gamma: float, r_grid: RadialGrid,
              rho_grid: RadialGrid, t_grid: RadialGrid) -> "CellKernel":
        h = r_grid.log_step
        for g, name in ((rho_grid, "rho"), (t_grid, "t")):
            if abs(g.log_step / h - 1.0) > 1e-10:
                raise GridMismatch(f"{name} grid log-step differs from the "
                                   "boundary grid's")
        b_r = _integer_offset(math.log(r_grid.r_min),
                              math.log(rho_grid.r_min), h, "r vs rho")
        b_t = _integer_offset(math.log(t_grid.r_min),
                              math.log(rho_grid.r_min), h, "t vs rho")
        s = (n + 2.0 - gamma) / 2.0
        return cls(n=n, gamma=gamma, s=s, h=h, r_grid=r_grid,
                   rho_grid=rho_grid, t_grid=t_grid, b_r=b_r, b_t=b_t)

    # offset-index geometry -------------------------------------------------
    @property
    def _shapes(self):
        return len(self.r_grid), len(self.rho_grid), len(self.t_grid)

    @property
    def d0(self) -> int:
        return self.b_r - (len(self.rho_grid) - 1)

    @property
    def m0(self) -> int:
        return self.b_t - (len(self.rho_grid) - 1)

    def table(self, alpha: float) -> np.ndarray:
        """G table for the integrand weight r^(-alpha); built on demand."""
        key = round(float(alpha), 12)
        if key not in self._tables:
            nr, nrho, nt = self._shapes
            d_idx = self.d0 + np.arange(nr + nrho - 1)
            m_idx = self.m0 + np.arange(nt + nrho - 1)
            deltas = d_idx * self.h
            log_taus = (math.log(self.t_grid.r_min)
                        - math.log(self.rho_grid.r_min)
                        + (m_idx - self.b_t) * self.h)
            self._tables[key] = _cell_table(self.n, self.gamma, key, self.h,
                                            deltas, log_taus)
        return self._tables[key]

    def _spectrum(self, alpha: float):
        key = round(float(alpha), 12)
        if key not in self._spectra:
            nr, nrho, _ = self._shapes
            G = self.table(alpha)
            L = next_fast_len(G.shape[0] + max(nr, nrho))
            self._spectra[key] = (L, rfft(G, n=L, axis=0))
        return self._spectra[key]

    def correlate_boundary(self, coeffs: np.ndarray, alpha: float) -> np.ndarray:
        """CORR[j, m] = sum_i coeffs_i G[i - j + b_r, m] for all j, m."""
        nr, nrho, nt = self._shapes
        L, Ghat = self._spectrum(alpha)
        fhat = rfft(coeffs, n=L)
        corr = irfft(fhat[:, None] * np.conj(Ghat), n=L, axis=0)
        shift = nrho - 1  # row index of offset d = i - j + b_r is (i-j)+shift
        idx = (np.arange(nrho) - shift) % L
        return corr[idx, :]

    def convolve_interior(self, bands: np.ndarray, alpha: float) -> np.ndarray:
        """out[i] = sum_{j,m} bands[j, m] G[i - j + b_r, m] for all i."""
        nr, nrho, nt = self._shapes
        L, Ghat = self._spectrum(alpha)
        bhat = rfft(bands, n=L, axis=0)
        total = np.sum(bhat * Ghat, axis=1)
        conv = irfft(total, n=L)
        shift = nrho - 1
        return conv[shift:shift + nr]

    def band_index(self) -> np.ndarray:
        """Column index m(j, k) = k - j + b_t - m0 of each (rho, t) node."""
        nr, nrho, nt = self._shapes
        j = np.arange(nrho)[:, None]
        k = np.arange(nt)[None, :]
        return k - j + self.b_t - self.m0


@dataclass(frozen=True)
class OperatorContext:
    """Parameters plus the cell-kernel machinery and its grids."""

    params: Params
    kernel: CellKernel
    boundary_grid: RadialGrid
    rho_grid: RadialGrid
    t_grid: RadialGrid

    def __post_init__(self):
        if (self.kernel.n != self.params.n
                or self.kernel.gamma != self.params.gamma):
            raise GridMismatch("cell kernel was built for different (n, gamma)")
        for a, b in ((self.kernel.r_grid, self.boundary_grid),
                     (self.kernel.rho_grid, self.rho_grid),
                     (self.kernel.t_grid, self.t_grid)):
            if not a.same_as(b):
                raise GridMismatch("cell kernel grids differ from the context")


def build_context(params: Params, boundary_grid: RadialGrid,
                  rho_grid: RadialGrid | None = None,
                  t_grid: RadialGrid | None = None) -> OperatorContext:
    """Assemble an OperatorContext; grids must share log-step and phase."""
    rho_grid = rho_grid if rho_grid is not None else boundary_grid
    t_grid = t_grid if t_grid is not None else rho_grid
    kern = CellKernel.build(params.n, params.gamma, boundary_grid,
                            rho_grid, t_grid)
    return OperatorContext(params=params, kernel=kern,
                           boundary_grid=boundary_grid,
                           rho_grid=rho_grid, t_grid=t_grid)


def _check_boundary(f: BoundaryProfile, ctx: OperatorContext) -> None:
    if f.n != ctx.params.n or not f.grid.same_as(ctx.boundary_grid):
        raise GridMismatch("boundary profile grid does not match the context")


def _check_halfspace(g: HalfSpaceProfile, ctx: OperatorContext) -> None:
    if (g.n != ctx.params.n or not g.rho_grid.same_as(ctx.rho_grid)
            or not g.t_grid.same_as(ctx.t_grid)):
        raise GridMismatch("half-space profile grids do not match the context")


def _interior_factor(ctx: OperatorContext, beta: float) -> np.ndarray:
    rho = ctx.rho_grid.nodes[:, None]
    t = ctx.t_grid.nodes[None, :]
    if beta == 0.0:
        return np.broadcast_to(t, (rho.size, t.size))
    return t * (rho * rho + t * t) ** (-0.5 * beta)


def _boundary_to_interior(values: np.ndarray, ctx: OperatorContext,
                          alpha_in: float, beta_out: float) -> np.ndarray:
    """V-type application with explicit weight placement."""
    kern = ctx.kernel
    pref = (2.0 ** (-kern.s)
            * ctx.rho_grid.nodes ** (ctx.params.n - 1 - alpha_in - 2.0 * kern.s))
    corr = kern.correlate_boundary(values, alpha_in)
    bands = np.take_along_axis(corr, kern.band_index(), axis=1)
    out = _interior_factor(ctx, beta_out) * pref[:, None] * bands
    # FFT roundoff can leave noise-floor negatives far from the support
    return np.maximum(out, 0.0)


def _interior_to_boundary(values: np.ndarray, ctx: OperatorContext,
                          beta_in: float, alpha_out: float) -> np.ndarray:
    """W-type application with explicit weight placement.

    Contracts the same cell tensor as the V-type apply, so the discrete
    pairings agree identically; the output is the kernel's alpha-weighted
    cell average, matching the continuum operator to O(h^2).
    """
    kern = ctx.kernel
    n = ctx.params.n
    cell = (ctx.rho_grid.weights[:, None] * ctx.t_grid.weights[None, :]
            * ctx.rho_grid.nodes[:, None] ** (n - 2)
            * _interior_factor(ctx, beta_in) * values)
    pref = (2.0 ** (-kern.s)
            * ctx.rho_grid.nodes ** (n - 1 - alpha_out - 2.0 * kern.s))
    nrho, nt = cell.shape
    bands = np.zeros((nrho, len(ctx.t_grid) + nrho - 1))
    np.put_along_axis(bands, kern.band_index(), pref[:, None] * cell, axis=1)
    out = kern.convolve_interior(bands, alpha_out)
    out = np.maximum(out, 0.0)
    return out / (ctx.boundary_grid.weights
                  * ctx.boundary_grid.nodes ** (n - 2))


def apply_V(f: BoundaryProfile, ctx: OperatorContext) -> HalfSpaceProfile:
    """Forward operator on a radial boundary profile; linear and positive."""
    _check_boundary(f, ctx)
    out = _boundary_to_interior(f.values, ctx, ctx.params.alpha, ctx.params.beta)
    return HalfSpaceProfile(rho_grid=ctx.rho_grid, t_grid=ctx.t_grid,
                            values=out, n=ctx.params.n)


def apply_W(g: HalfSpaceProfile, ctx: OperatorContext) -> BoundaryProfile:
    """Backward operator on an axisymmetric interior profile."""
    _check_halfspace(g, ctx)
    out = _interior_to_boundary(g.values, ctx, ctx.params.beta, ctx.params.alpha)
    return BoundaryProfile(grid=ctx.boundary_grid, values=out, n=ctx.params.n)


def functional_J(f: BoundaryProfile, g: HalfSpaceProfile,
                 ctx: OperatorContext) -> float:
    """Bilinear pairing <g, V(f)> over the half-space."""
    _check_boundary(f, ctx)
    _check_halfspace(g, ctx)
    vf = _boundary_to_interior(f.values, ctx, ctx.params.alpha, ctx.params.beta)
    n = ctx.params.n
    wr = ctx.rho_grid.weights * ctx.rho_grid.nodes ** (n - 2)
    total = np.einsum("j,k,jk->", wr, ctx.t_grid.weights, g.values * vf)
    return float(sphere_area(n - 1) * total)


def interior_pairing(g: HalfSpaceProfile, v: HalfSpaceProfile) -> float:
    """Plain interior inner product of two axisymmetric profiles."""
    n = g.n
    wr = g.rho_grid.weights * g.rho_grid.nodes ** (n - 2)
    return float(sphere_area(n - 1)
                 * np.einsum("j,k,jk->", wr, g.t_grid.weights, g.values * v.values))


def boundary_pairing(u: BoundaryProfile, f: BoundaryProfile) -> float:
    """Plain boundary inner product of two radial profiles."""
    n = u.n
    mu = u.grid.weights * u.grid.nodes ** (n - 2)
    return float(sphere_area(n - 1) * np.sum(mu * u.values * f.values))


def oracle_V_montecarlo(f: BoundaryProfile, x, params: Params,
                        samples: int = 10_000, seed: int = 0
                        ) -> tuple[float, float]:
    """Stratified Monte-Carlo estimate of V(f) at one interior point.

    Strata are the profile grid's log-annuli; within each stratum the
    radius is log-uniform and the sphere direction uniform.  The profile
    is read through log-linear interpolation, so the estimate is
    independent of the cell-kernel quadrature used by apply_V.
    Deterministic for a fixed seed.
    """
    x = np.asarray(x, dtype=float)
    n = params.n
    if x.shape != (n,):
        raise DomainError(f"expected a point in R^{n}")
    t = float(x[-1])
    if t <= 0.0:
        raise DomainError(f"interior point needs x_n > 0, got {t}")
    if samples < 2 * (len(f.grid) - 1):
        raise ValueError("too few samples for the stratification")
    rho_vec = x[:-1]
    rho = float(np.linalg.norm(rho_vec))
    s = params.s_kernel

    rng = np.random.default_rng(seed)
    edges = np.log(f.grid.nodes)
    n_strata = edges.size - 1
    per = samples // n_strata
    log_f = np.full_like(f.values, -np.inf)
    pos = f.values > 0
    log_f[pos] = np.log(f.values[pos])

    area = sphere_area(n - 1)
    est = 0.0
    var = 0.0
    for l in range(n_strata):
        width = edges[l + 1] - edges[l]
        u = rng.uniform(edges[l], edges[l + 1], per)
        r = np.exp(u)
        # uniform direction on S^(n-2) in R^(n-1); only the cosine matters
        w = rng.standard_normal((per, n - 1))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        if rho > 0.0:
            cos = w @ (rho_vec / rho)
        else:
            cos = np.zeros(per)
        fvals = np.interp(u, edges, log_f)
        fv = np.where(np.isfinite(fvals), np.exp(fvals), 0.0)
        d2 = (r - rho) ** 2 + t * t + 2.0 * r * rho * (1.0 - cos)
        h = r ** (n - 1 - params.alpha) * fv * t * d2 ** (-s) * width * area
        est += h.mean()
        var += h.var(ddof=1) / per
    scale = (rho * rho + t * t) ** (-0.5 * params.beta)
    return float(est * scale), float(np.sqrt(var) * scale)
