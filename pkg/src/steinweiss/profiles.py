"""Radial grids, boundary/interior profiles, norms, rearrangement, dilation.

All grids are geometric (log-spaced).  Quadrature is the midpoint rule in
log coordinates, so int f(r) dr ~ sum w_i f(r_i) with w_i = h r_i; each
node owns one full log-cell, matching the cell decomposition the
operators use.  Profiles are truncated to [r_min, r_max] and extended by
zero outside; the truncation is observable through
:func:`truncation_diagnostics`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .admissibility import sphere_area, unit_ball_volume
from .errors import BadGrid, InsufficientSupport, PreconditionError

_GRID_RTOL = 1e-12


@dataclass(frozen=True)
class RadialGrid:
    """Geometric nodes with trapezoid-in-log quadrature weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        ratios = nodes[1:] / nodes[:-1]
        if nodes.ndim != 1 or nodes.size < 2 or np.any(nodes <= 0):
            raise BadGrid("grid nodes must be a 1-d array of positive reals")
        if np.any(np.abs(ratios / ratios[0] - 1.0) > 1e-10):
            raise BadGrid("grid nodes must be geometrically spaced")
        if np.any(np.asarray(self.weights) <= 0):
            raise BadGrid("quadrature weights must be positive")

    @property
    def log_step(self) -> float:
        return math.log(self.nodes[1] / self.nodes[0])

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self) -> int:
        return self.nodes.size

    def same_as(self, other: "RadialGrid") -> bool:
        return (len(self) == len(other)
                and np.allclose(self.nodes, other.nodes, rtol=_GRID_RTOL, atol=0.0))


def make_log_grid(r_min: float, r_max: float, count: int) -> RadialGrid:
    """Geometric grid of `count` nodes from r_min to r_max inclusive.

    Weights w_i = h r_i implement the midpoint rule in log coordinates
    (each node owns the full log-cell [r_i e^(-h/2), r_i e^(h/2)]), the
    same cell decomposition the operators integrate the kernel over.
    """
    if not (0.0 < r_min < r_max):
        raise BadGrid(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if count < 2:
        raise BadGrid(f"need at least 2 nodes, got {count}")
    nodes = np.geomspace(r_min, r_max, count)
    h = math.log(r_max / r_min) / (count - 1)
    return RadialGrid(nodes=nodes, weights=h * nodes)


def grid_per_decade(r_min: float, r_max: float, nodes_per_decade: int) -> RadialGrid:
    """Geometric grid with a fixed node density per decade."""
    decades = math.log10(r_max / r_min)
    count = int(round(nodes_per_decade * decades)) + 1
    return make_log_grid(r_min, r_max, max(count, 2))


@dataclass(frozen=True)
class BoundaryProfile:
    """Radial function on the boundary R^(n-1), sampled on a log grid."""

    grid: RadialGrid
    values: np.ndarray
    n: int
    decreasing: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise BadGrid("profile values must match the grid shape")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("profile values must be finite and nonnegative")
        if self.decreasing and np.any(np.diff(v) > 1e-14 * v.max(initial=0.0)):
            raise ValueError("profile flagged decreasing has increasing values")

    def with_values(self, values: np.ndarray, decreasing: bool = False) -> "BoundaryProfile":
        return replace(self, values=np.asarray(values, dtype=float),
                       decreasing=decreasing)


@dataclass(frozen=True)
class HalfSpaceProfile:
    """Axisymmetric function on the half-space, on a (rho, t) tensor grid."""

    rho_grid: RadialGrid
    t_grid: RadialGrid
    values: np.ndarray
    n: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rho_grid), len(self.t_grid)):
            raise BadGrid("values must have shape (len(rho_grid), len(t_grid))")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("profile values must be finite and nonnegative")

    def with_values(self, values: np.ndarray) -> "HalfSpaceProfile":
        return replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class LorentzIndices:
    p: float
    s: float  # math.inf allowed

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError(f"primary index must be positive, got {self.p}")
        if not (self.s > 0):
            raise ValueError(f"secondary index must be positive or inf, got {self.s}")


def annulus_measures(profile: BoundaryProfile) -> np.ndarray:
    """Boundary (n-1)-measure carried by each grid node's annulus."""
    g = profile.grid
    return sphere_area(profile.n - 1) * g.weights * g.nodes ** (profile.n - 2)


def boundary_norm(f: BoundaryProfile, p: float) -> float:
    """Grid L^p norm on the boundary: (sum mu_i f_i^p)^(1/p)."""
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    mu = annulus_measures(f)
    return float(np.sum(mu * f.values ** p) ** (1.0 / p))


def halfspace_norm(g: HalfSpaceProfile, qprime: float) -> float:
    """Grid L^q' norm on the half-space for an axisymmetric profile."""
    if qprime < 1:
        raise ValueError(f"norm exponent must be >= 1, got {qprime}")
    area = sphere_area(g.n - 1)
    wr = g.rho_grid.weights * g.rho_grid.nodes ** (g.n - 2)
    total = area * np.einsum("j,k,jk->", wr, g.t_grid.weights,
                             g.values ** qprime)
    return float(total ** (1.0 / qprime))


def truncation_diagnostics(f: BoundaryProfile, p: float) -> dict:
    """Fraction of the f^p measure carried by the outermost/innermost decade."""
    mu = annulus_measures(f)
    mass = mu * f.values ** p
    total = mass.sum()
    if total == 0.0:
        return {"outer_decade_fraction": 0.0, "inner_decade_fraction": 0.0}
    r = f.grid.nodes
    outer = mass[r >= f.grid.r_max / 10.0].sum() / total
    inner = mass[r <= f.grid.r_min * 10.0].sum() / total
    return {"outer_decade_fraction": float(outer),
            "inner_decade_fraction": float(inner)}


def decreasing_rearrangement(f: BoundaryProfile) -> BoundaryProfile:
    """Radial decreasing profile equimeasurable with f.

    Sorts (value, annulus measure) pairs by value descending, re-accumulates
    measure from zero, and samples the resulting step function at each
    node's own measure coordinate.  Exactly idempotent on profiles that are
    already nonincreasing.
    """
    mu = annulus_measures(f)
    order = np.argsort(-f.values, kind="stable")
    sorted_vals = f.values[order]
    cum = np.cumsum(mu[order])
    # measure coordinate of each node: midpoint of its own annulus
    node_t = np.cumsum(mu) - 0.5 * mu
    idx = np.searchsorted(cum, node_t, side="right")
    idx = np.minimum(idx, sorted_vals.size - 1)
    out = sorted_vals[idx]
    # clip float dust so the decreasing flag validates
    out = np.minimum.accumulate(out)
    return f.with_values(out, decreasing=True)


def lorentz_norm(f: BoundaryProfile, idx: LorentzIndices) -> float:
    """Lorentz norm built from the decreasing rearrangement of f.

    The rearranged profile is read as a function of boundary measure
    t(r) = v_{n-1} r^(n-1); dt/t = (n-1) dlog r turns the defining integral
    into a log-grid quadrature.  With s = p this reproduces boundary_norm
    exactly (same weighted sum, reordered).
    """
    fstar = f if f.decreasing else decreasing_rearrangement(f)
    r = fstar.grid.nodes
    t = unit_ball_volume(f.n - 1) * r ** (f.n - 1)
    dlog = fstar.grid.weights / r  # the log-cell width h
    vals = fstar.values
    if math.isinf(idx.s):
        return float(np.max(t ** (1.0 / idx.p) * vals, initial=0.0))
    integrand = (t ** (idx.s / idx.p)) * vals ** idx.s
    return float(((f.n - 1) * np.sum(integrand * dlog)) ** (1.0 / idx.s))


def _shift_indices(values: np.ndarray, m: int) -> np.ndarray:
    """Shift values by m grid steps toward larger radii, zero-filling."""
    out = np.zeros_like(values)
    if m >= 0:
        if m < values.size:
            out[m:] = values[:values.size - m]
    else:
        if -m < values.size:
            out[:values.size + m] = values[-m:]
    return out


def dilate(f: BoundaryProfile, lam: float, p: float) -> BoundaryProfile:
    """Norm-preserving dilation lam^(-(n-1)/p) f(r/lam), resampled on the grid.

    When log(lam) is an integer number of grid steps the dilation is an
    exact index shift.  Otherwise the profile is resampled by cubic
    interpolation in (log r, log f) over its positive block, linear in f
    where zeros appear; queries outside [r_min, r_max] return zero.
    """
    if lam <= 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    if lam == 1.0:
        return f
    scale = lam ** (-(f.n - 1) / p)
    h = f.grid.log_step
    steps = math.log(lam) / h
    m = round(steps)
    if abs(steps - m) < 1e-9:
        out = scale * _shift_indices(f.values, m)
        # an outward shift zero-fills the head, losing the decreasing shape
        return f.with_values(out, decreasing=f.decreasing and m <= 0)

    x = np.log(f.grid.nodes)
    xq = x - math.log(lam)
    inside = (xq >= x[0] - 1e-12) & (xq <= x[-1] + 1e-12)
    out = np.zeros_like(f.values)
    if np.any(f.values <= 0.0):
        out[inside] = np.interp(xq[inside], x, f.values)
    else:
        spline = CubicSpline(x, np.log(f.values))
        out[inside] = np.exp(spline(np.clip(xq[inside], x[0], x[-1])))
    return f.with_values(scale * out, decreasing=f.decreasing and lam <= 1.0)


def radial_bound_check(f: BoundaryProfile, p: float) -> float:
    """Largest violation of the decreasing-profile envelope bound.

    For a decreasing profile with unit L^p norm, the ball-volume argument
    forces f(r) <= v_{n-1}^(-1/p) r^(-(n-1)/p); returns
    max_i (f_i * (v_{n-1} r_i^(n-1))^(1/p) - 1), nonpositive up to
    quadrature slack for a correct profile.
    """
    if not f.decreasing:
        raise PreconditionError("radial_bound_check requires a profile flagged decreasing")
    norm = boundary_norm(f, p)
    if abs(norm - 1.0) > 1e-6:
        raise PreconditionError(f"profile must have unit L^p norm, got {norm}")
    v = unit_ball_volume(f.n - 1)
    expr = f.values * (v * f.grid.nodes ** (f.n - 1)) ** (1.0 / p)
    return float(np.max(expr) - 1.0)


# ---------------------------------------------------------------------------
# profile CSV interchange

def profile_to_csv(profile) -> str:
    """Serialize a profile; 17 significant digits round-trip exactly."""
    buf = io.StringIO()
    if isinstance(profile, BoundaryProfile):
        buf.write(f"# kind=boundary n={profile.n}\n")
        for r, v in zip(profile.grid.nodes, profile.values):
            buf.write(f"{r:.17g},{v:.17g}\n")
    elif isinstance(profile, HalfSpaceProfile):
        buf.write(f"# kind=halfspace n={profile.n}\n")
        for j, rho in enumerate(profile.rho_grid.nodes):
            for k, t in enumerate(profile.t_grid.nodes):
                buf.write(f"{rho:.17g},{t:.17g},{profile.values[j, k]:.17g}\n")
    else:
        raise TypeError(f"cannot serialize {type(profile).__name__}")
    return buf.getvalue()


def profile_from_csv(text: str):
    """Parse a profile CSV written by profile_to_csv."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("profile CSV must start with a '# kind=... n=...' header")
    header = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
    kind = header.get("kind")
    n = int(header["n"])
    rows = [tuple(float(c) for c in ln.split(",")) for ln in lines[1:]]
    if kind == "boundary":
        if any(len(row) != 2 for row in rows):
            raise ValueError("boundary profile rows must be 'r,value'")
        r = np.array([row[0] for row in rows])
        vals = np.array([row[1] for row in rows])
        return BoundaryProfile(grid=_grid_from_nodes(r), values=vals, n=n)
    if kind == "halfspace":
        if any(len(row) != 3 for row in rows):
            raise ValueError("halfspace profile rows must be 'rho,t,value'")
        rho = np.unique([row[0] for row in rows])
        t = np.unique([row[1] for row in rows])
        vals = np.full((rho.size, t.size), np.nan)
        ji = {x: j for j, x in enumerate(rho)}
        ki = {x: k for k, x in enumerate(t)}
        for row in rows:
            vals[ji[row[0]], ki[row[1]]] = row[2]
        if np.any(np.isnan(vals)):
            raise ValueError("halfspace profile rows do not fill the tensor grid")
        return HalfSpaceProfile(rho_grid=_grid_from_nodes(rho),
                                t_grid=_grid_from_nodes(t), values=vals, n=n)
    raise ValueError(f"unknown profile kind {kind!r}")


def _grid_from_nodes(nodes: np.ndarray) -> RadialGrid:
    """Reconstruct the log-midpoint grid from its node set."""
    if nodes.size < 2:
        raise BadGrid("need at least 2 nodes to reconstruct a grid")
    h = math.log(nodes[-1] / nodes[0]) / (nodes.size - 1)
    return RadialGrid(nodes=nodes, weights=h * nodes)


def decade_slope(f: BoundaryProfile, which: str) -> float:
    """Least-squares log-log slope of f over its innermost or outermost decade."""
    r = f.grid.nodes
    vals = f.values
    positive = vals > 0.0
    if which == "inner":
        mask = positive & (r <= f.grid.r_min * 10.0)
    elif which == "outer":
        if not np.any(positive):
            raise InsufficientSupport("profile has no positive values")
        r_top = r[positive][-1]
        mask = positive & (r >= r_top / 10.0) & (r <= r_top)
    else:
        raise ValueError(f"which must be 'inner' or 'outer', got {which!r}")
    if mask.sum() < 3:
        raise InsufficientSupport(f"too few usable nodes on the {which} decade")
    x = np.log(r[mask])
    y = np.log(vals[mask])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)
