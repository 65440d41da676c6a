"""Non-uniqueness of generators on a multi-dimensional support.

Solves div(f V) = -alpha f on the 3-fragment ordered-simplex domain
D = {(x, y): 0 < 1-x-y < y < x} for a field of the form V = u(x,y)(1-x, -y)
by the method of characteristics, perturbs by a rotated-gradient bump
(divergence free, so the same PDE holds), and checks the coordinate
inequalities V <= y that a growing generator must satisfy. Two distinct
admissible fields certify non-uniqueness.

The reference figure states neither alpha nor grid/bump parameters; the
defaults here (alpha = 1/4, centroid-normalized density, margin 1e-3,
oracle band 0.02) are declared choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

TRIANGLE = ((1.0 / 3.0, 1.0 / 3.0), (0.5, 0.5), (1.0, 0.0))
CENTROID = ((1 / 3 + 1 / 2 + 1) / 3.0, (1 / 3 + 1 / 2) / 3.0)


def hs3_density_raw(x, y):
    """HS 3-fragment density (sum_i (1-s_i)^{-1}) / (s0 s1 s2)^{3/4} at
    (s0, s1, s2) = (x, y, 1-x-y)."""
    z = 1.0 - x - y
    return (1.0 / (1.0 - x) + 1.0 / (1.0 - y) + 1.0 / (1.0 - z)) / (x * y * z) ** 0.75


_FNORM = hs3_density_raw(*CENTROID)


def density(x, y):
    """Centroid-normalized density (normalization is a declared choice)."""
    return hs3_density_raw(x, y) / _FNORM


def domain_margins(x, y):
    """(1-x-y, y-(1-x-y), x-y): all positive inside D."""
    z = 1.0 - x - y
    return z, y - z, x - y


def in_domain(x, y, margin=0.0):
    a, b, c = domain_margins(x, y)
    return (a > margin) & (b > margin) & (c > margin)


@dataclass
class SimplexGrid:
    """Barycentric-regular lattice on D with a boundary margin."""

    n: int = 200
    margin: float = 1e-3
    alpha: float = 0.25

    def __post_init__(self):
        A, B, C = (np.array(v) for v in TRIANGLE)
        pts = []
        for i in range(self.n + 1):
            for j in range(self.n + 1 - i):
                k = self.n - i - j
                p = (i * A + j * B + k * C) / self.n
                if in_domain(p[0], p[1], self.margin):
                    pts.append(p)
        arr = np.array(pts)
        if not len(arr):
            raise ConfigurationError("empty grid; reduce the margin")
        self.x = arr[:, 0]
        self.y = arr[:, 1]
        self.f = density(self.x, self.y)

    def band_mask(self, band):
        return in_domain(self.x, self.y, band)


@dataclass
class VectorFieldGrid:
    """Node-indexed field values (piecewise evaluation via solve_u)."""

    grid: SimplexGrid
    u: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    flagged: int = 0
    name: str = "V"
    bump: object = None


_GL16 = np.polynomial.legendre.leggauss(16)
EPS_INFLOW = 1e-3


def solve_u(x, y, alpha, n_panel=24):
    """u with f V = w (1-x, -y), w solved along characteristics from the
    inflow transversal y = x - eps (u = 0 there).

    Characteristics: x(t) = 1-(1-x0)e^{-t}, y(t) = y0 e^{-t};
    dw/dt = 2w - alpha f. Vectorized composite Gauss-Legendre panels.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 0
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    es = (1.0 - EPS_INFLOW) / (1.0 - x + y)
    sig = np.log(np.maximum(es, 1.0))
    x0 = 1.0 - (1.0 - x) * es
    y0 = y * es
    glx, glw = _GL16
    ks = np.arange(n_panel)
    a = sig[..., None] * (ks / n_panel)
    b = sig[..., None] * ((ks + 1) / n_panel)
    mid = 0.5 * (a + b)[..., None]
    half = 0.5 * (b - a)[..., None]
    r = mid + half * glx
    wq = half * glw
    xt = 1.0 - (1.0 - x0[..., None, None]) * np.exp(-r)
    yt = y0[..., None, None] * np.exp(-r)
    integ = np.exp(2.0 * (sig[..., None, None] - r)) * density(xt, yt)
    w = -alpha * np.sum(integ * wq, axis=(-1, -2))
    w = np.where(es > 1.0, w, 0.0)
    u = w / density(x, y)
    return float(u[0]) if scalar else u


def solve_characteristics(grid: SimplexGrid, alpha: float) -> VectorFieldGrid:
    """Base field V = u (1-x, -y) on the grid nodes.

    Nodes whose backward characteristic fails to reach the inflow edge are
    flagged; more than 1% flagged nodes aborts (with the default geometry
    every margin-interior node is covered).
    """
    es = (1.0 - EPS_INFLOW) / (1.0 - grid.x + grid.y)
    flagged = int(np.sum(es <= 1.0))
    if flagged > 0.01 * len(grid.x):
        raise ConfigurationError(f"{flagged} nodes not covered by characteristics")
    u = solve_u(grid.x, grid.y, alpha)
    return VectorFieldGrid(grid, u, u * (1.0 - grid.x), -u * grid.y, flagged, name="V")


@dataclass(frozen=True)
class Bump:
    """phi(r) = h exp(1 - 1/(1 - (r/R)^2)) inside radius R around (cx, cy)."""

    cx: float
    cy: float
    radius: float
    height: float

    def value(self, x, y):
        r2 = ((x - self.cx) ** 2 + (y - self.cy) ** 2) / self.radius ** 2
        out = np.zeros_like(np.asarray(x, dtype=float))
        m = r2 < 1.0
        out[m] = self.height * np.exp(1.0 - 1.0 / (1.0 - r2[m]))
        return out

    def grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = ((x - self.cx) ** 2 + (y - self.cy) ** 2) / self.radius ** 2
        gx = np.zeros_like(x)
        gy = np.zeros_like(y)
        m = r2 < 1.0
        q = 1.0 - r2[m]
        base = self.height * np.exp(1.0 - 1.0 / q) / (q * q)
        gx[m] = base * (-2.0 * (x[m] - self.cx) / self.radius ** 2)
        gy[m] = base * (-2.0 * (y[m] - self.cy) / self.radius ** 2)
        return gx, gy

    def edge_distance(self):
        """Distance from the bump center to the nearest domain edge."""
        cx, cy = self.cx, self.cy
        d1 = abs(cx + cy - 1.0) / math.sqrt(2.0)        # edge x + y = 1
        d2 = abs(cx + 2.0 * cy - 1.0) / math.sqrt(5.0)  # edge x + 2y = 1
        d3 = abs(cx - cy) / math.sqrt(2.0)              # edge y = x
        return min(d1, d2, d3)


DEFAULT_BUMP = Bump(0.62, 0.28, 0.05, 5e-4)


def bump_perturbation(base: VectorFieldGrid, grid: SimplexGrid, bump: Bump) -> VectorFieldGrid:
    """W = V + grad-perp(phi)/f: the quarter-turn-rotated gradient is
    divergence free, so f W satisfies the same transport PDE."""
    if not in_domain(bump.cx, bump.cy) or bump.edge_distance() <= bump.radius:
        raise ConfigurationError("bump support must lie strictly inside the domain")
    gx, gy = bump.grad(grid.x, grid.y)
    wx = base.vx + (-gy) / grid.f
    wy = base.vy + gx / grid.f
    return VectorFieldGrid(grid, base.u, wx, wy, base.flagged, name="W", bump=bump)


@dataclass
class InequalityReport:
    name: str
    worst_margin: float
    violations: int
    nodes: int

    @property
    def passed(self):
        return self.violations == 0


def inequality_grid(fld: VectorFieldGrid, grid: SimplexGrid, slack=0.0) -> InequalityReport:
    """Coordinate inequalities V <= y on the simplex: Vx <= x, Vy <= y and
    the implied third component -Vx - Vy <= 1 - x - y."""
    m1 = grid.x - fld.vx
    m2 = grid.y - fld.vy
    m3 = (1.0 - grid.x - grid.y) - (-fld.vx - fld.vy)
    worst = float(min(m1.min(), m2.min(), m3.min()))
    violations = int(np.sum((m1 < -slack) | (m2 < -slack) | (m3 < -slack)))
    return InequalityReport(fld.name, worst, violations, len(grid.x))


def divergence_residual_fd(fld: VectorFieldGrid, grid: SimplexGrid, alpha: float,
                           band: float = 0.02, delta: float = 1e-5) -> float:
    """Centered finite-difference oracle for ||div(f V) + alpha f||_inf on
    interior nodes (domain margins >= band), with fresh characteristic
    solves at the 4-point stencil.

    For the bumped field the analytic rotated-gradient term is added at the
    stencil points (it is divergence free, so the residual is unchanged up
    to the differencing error).
    """
    mask = grid.band_mask(band)
    px, py = grid.x[mask], grid.y[mask]

    is_bumped = fld.name != "V"
    bump = getattr(fld, "bump", None)

    def fVx(x, y):
        w = solve_u(x, y, alpha) * density(x, y)
        out = w * (1.0 - x)
        if is_bumped and bump is not None:
            out = out + (-bump.grad(x, y)[1])
        return out

    def fVy(x, y):
        w = solve_u(x, y, alpha) * density(x, y)
        out = -w * y
        if is_bumped and bump is not None:
            out = out + bump.grad(x, y)[0]
        return out

    div = ((fVx(px + delta, py) - fVx(px - delta, py)) / (2 * delta)
           + (fVy(px, py + delta) - fVy(px, py - delta)) / (2 * delta))
    res = np.abs(div + alpha * density(px, py))
    return float(res.max())
