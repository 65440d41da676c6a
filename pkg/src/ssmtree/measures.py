"""Catalog of splitting measures and characteristic quadruplets.

A splitting measure Xi is a (generally infinite) measure on decoration
sequences (y0, y1, y2, ...) with finite mass on {y1 >= eps} for every
eps > 0. The catalog covers the binary conservative families, the
size-biased / locally-largest / weird bifurcators of the Brownian mass
fragmentation, mass- and height-decorated stable trees, Haas-Stephenson
k-ary fragmentations and the Brownian growth-fragmentation measure.

Conventions
-----------
* Normalization constants are 1 (densities exactly as displayed) except
  `brownian-gf` which carries 3/(4*sqrt(pi)).
* Every quadruplet records its jump-compensation convention:
  'none'  - the log of the followed coordinate has finite variation and
            the Levy process is drift + raw jumps;
  'all'   - every jump is compensated (possible under the square
            integrability of y0 - 1), drift coefficient adjusted
            accordingly.
  The cumulant, the Levy exponent and the compensated SDE drift all use
  the entry's convention, which keeps kappa(1) = 0 exactly for the
  conservative drift-free entries.
"""

from __future__ import annotations

import ast
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, SupportError
from .sequences import MAX_OFFSPRING, DecorationSequence
from .tables import MonotoneIntegralTable

DIVERGENCE_LIMIT = 1e12


# ---------------------------------------------------------------------------
# quadrature helpers
# ---------------------------------------------------------------------------

def _quad(f, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, _ = quad(f, a, b, limit=kw.pop("limit", 300), **kw)
    return val


def quad_div(f, a, b, singular_right=True):
    """Adaptive quadrature with divergence detection at one endpoint.

    Integrates over shrinking panels toward the singular endpoint; if the
    running total exceeds DIVERGENCE_LIMIT or panel contributions fail to
    decay, returns +inf.
    """
    lo, hi = (a, b) if singular_right else (b, a)
    total = 0.0
    prev = None
    # panel knots approach the singular endpoint geometrically, floored at
    # the representable distance from the endpoint
    clamp = max(1e-15 * abs(b - a), 4.0 * np.finfo(float).eps * max(abs(hi), 1.0))
    pts = np.maximum((b - a) * np.logspace(0, -13, 60), clamp)
    knots = [hi - p if singular_right else hi + p for p in pts]
    start = lo
    growing = 0
    for kn in knots:
        aa, bb = (start, kn) if singular_right else (kn, start)
        if (bb - aa) <= 0:
            continue
        piece = _quad(f, aa, bb)
        total += piece
        start = kn
        if abs(total) > DIVERGENCE_LIMIT:
            return math.inf
        if prev is not None and abs(piece) > 0:
            growing = growing + 1 if abs(piece) >= abs(prev) * 0.999 and abs(piece) > 1e-9 * max(abs(total), 1.0) else 0
            if growing >= 12:
                return math.inf
        prev = piece
    # integrable-singularity tail, clamped one ulp-scale short of the endpoint
    aa, bb = (start, hi - clamp) if singular_right else (hi + clamp, start)
    if bb > aa:
        total += _quad(f, aa, bb)
    return total


# ---------------------------------------------------------------------------
# the nu_gamma family of first marginals
# ---------------------------------------------------------------------------

def nu_density(gamma, y):
    """Density of nu_gamma(dy) = dy / (y^{1-gamma} (1-y)^{1+gamma}) on (0,1)."""
    y = np.asarray(y, dtype=float)
    return y ** (gamma - 1.0) * (1.0 - y) ** (-1.0 - gamma)


def nu_mass(gamma, t):
    """nu_gamma([0, t]) = (1/gamma) (t/(1-t))^gamma, for gamma > 0."""
    if t <= 0:
        return 0.0
    if t >= 1:
        return math.inf
    return (t / (1.0 - t)) ** gamma / gamma


def nu_inv(gamma, m):
    """Inverse of nu_mass in t."""
    if m <= 0:
        return 0.0
    w = (gamma * m) ** (1.0 / gamma)
    return w / (1.0 + w)


# ---------------------------------------------------------------------------
# bifurcator weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BifurcatorWeights:
    """Probabilities (p_i) of following the i-th largest coordinate of a split."""

    name: str
    fn: object  # callable: ordered ndarray -> ndarray of probabilities

    def probs(self, ordered):
        p = np.asarray(self.fn(np.asarray(ordered, dtype=float)), dtype=float)
        if p.ndim != 1 or p.size != len(ordered):
            raise ConfigurationError("bifurcator weights must return one probability per coordinate")
        if np.any(p < -1e-15):
            raise ConfigurationError("bifurcator weights must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"bifurcator weights sum to {p.sum()}, not 1 within 1e-12")
        return np.clip(p, 0.0, None)


def locally_largest_weights():
    return BifurcatorWeights("ll", lambda y: np.eye(len(y))[0])


def size_biased_weights():
    return BifurcatorWeights("size-biased", lambda y: y / y.sum())


def weird_p(s):
    """Probability of following the larger child s >= 1/2 in the weird bifurcator."""
    num = s * (1.1 - s)
    return num / (num + (1.0 - s) * (0.1 + s))


def weird_weights():
    def fn(y):
        s = y[0] / y.sum() if y.sum() > 0 else y[0]
        p = weird_p(s)
        out = np.zeros(len(y))
        out[0] = p
        if len(y) > 1:
            out[1] = 1.0 - p
        else:
            out[0] = 1.0
        return out

    return BifurcatorWeights("weird", fn)


def hs_special_weights():
    """(1-s_i)^{-1}-proportional weights used for the HS fragmentation."""

    def fn(y):
        w = 1.0 / (1.0 - np.minimum(y, 1.0 - 1e-15))
        return w / w.sum()

    return BifurcatorWeights("hs-special", fn)


# ---------------------------------------------------------------------------
# base class
# ---------------------------------------------------------------------------

class SplittingMeasure:
    """Base interface for catalog splitting measures."""

    key: str = ""
    conservative: bool = False
    normalization: float = 1.0
    support: str = ""

    # -- required numerics ---------------------------------------------------
    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        raise NotImplementedError

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        raise NotImplementedError

    def density(self, point):
        raise NotImplementedError(f"{self.key}: no closed-form density in the declared coordinates")

    # first-marginal integral of f(y0) with f(1) = 0 (integrability by centering)
    def integrate_y0_centered(self, f):
        raise NotImplementedError

    # integral of y0^g - 1 - g*chi(log y0) + sum_i y_i^g against the measure
    def kappa_integral(self, g, chi):
        raise NotImplementedError

    def y1_moment_bound(self):
        """Analytic infimum of {g > 0 : int y1^g dXi < inf}."""
        raise NotImplementedError

    def y1_tail_mass(self, eps):
        return self.truncated_mass(eps, math.inf)

    def kappa_support_inf(self):
        """Infimum of the support of the cumulant integral (may exceed the y1 bound)."""
        return self.y1_moment_bound()

    def check_square_integrability(self):
        """int (y0 - 1)^2 dXi0 < inf, required of every catalog entry."""
        val = self.integrate_y0_centered(lambda y: (y - 1.0) ** 2)
        if not np.isfinite(val):
            raise ConfigurationError(f"{self.key}: (y0-1)^2 is not integrable; entry violates the catalog contract")
        return val

    def __repr__(self):
        return f"<SplittingMeasure {self.key} support={self.support}>"


# ---------------------------------------------------------------------------
# binary conservative measures (scalar density on an interval, marks (s, 1-s))
# ---------------------------------------------------------------------------

class BinaryConservativeMeasure(SplittingMeasure):
    """Splitting measure int lam(s) F(s, 1-s) ds on (s_lo, 1).

    Locally-largest entries live on [1/2, 1); full-interval entries
    (size-biased, weird, custom) live on (0, 1). The scalar density always
    diverges at s = 1 (infinite total mass) and is integrable at s_lo.
    """

    conservative = True

    def __init__(self, key, lam, s_lo, normalization=1.0, y1_bound=None,
                 kappa_inf=None, meta=None):
        self.key = key
        self._lam_raw = lam
        self.normalization = float(normalization)
        self.s_lo = float(s_lo)
        self.support = f"binary-conservative on ({self.s_lo:g}, 1)"
        self._y1_bound = y1_bound
        self._kappa_inf = kappa_inf
        self._table = None
        self.meta = meta or {}

    def lam(self, s):
        return self.normalization * self._lam_raw(s)

    @property
    def table(self) -> MonotoneIntegralTable:
        if self._table is None:
            self._table = MonotoneIntegralTable(self.lam, self.s_lo, 1.0)
        return self._table

    def density(self, point):
        s = float(point)
        if not (self.s_lo <= s < 1.0) and s != 1.0:
            raise SupportError(f"{self.key}: point s={s} outside support [{self.s_lo}, 1)")
        if s == 1.0:
            raise SupportError(f"{self.key}: density diverges at the endpoint s=1")
        return float(self.lam(s))

    def _s_max(self, fragment_cutoff, followed_jump_cutoff):
        # offspring 1 - s >= eps_f, or |log s| >= eps_j (both keep small s)
        s_hi = 1.0 - fragment_cutoff
        if np.isfinite(followed_jump_cutoff):
            s_hi = max(s_hi, math.exp(-followed_jump_cutoff))
        return min(max(s_hi, self.s_lo), 1.0 - 1e-15)

    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        if fragment_cutoff <= 0:
            return math.inf
        return self.table.value(self._s_max(fragment_cutoff, followed_jump_cutoff))

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        # vectorized inverse-CDF on the (geometric, 4096-node) table grid;
        # the interpolation bias of the mark law is far below sampling noise
        smax = self._s_max(fragment_cutoff, followed_jump_cutoff)
        tab = self.table
        k = int(np.searchsorted(tab.s, smax))
        sg = np.append(tab.s[:k], smax)
        Ig = np.append(tab.I[:k], tab.value(smax))
        ss = np.interp(rng.random(n) * Ig[-1], Ig, sg)
        return [DecorationSequence.binary(s) for s in ss]

    def integrate_y0_centered(self, f):
        return quad_div(lambda s: f(s) * self.lam(s), self.s_lo, 1.0, singular_right=True)

    def kappa_integral(self, g, chi):
        if g <= self.kappa_support_inf():
            return math.inf

        def integrand(s):
            y0 = s
            return (y0 ** g - 1.0 - g * chi(math.log(y0)) + (1.0 - s) ** g) * self.lam(s)

        return quad_div(integrand, self.s_lo, 1.0, singular_right=True)

    def y1_moment_bound(self):
        if self._y1_bound is not None:
            return self._y1_bound
        return y1_moment_bound_numeric(self)

    def kappa_support_inf(self):
        if self._kappa_inf is not None:
            return self._kappa_inf
        return self.y1_moment_bound()


# ---------------------------------------------------------------------------
# height-form binary measure: atoms (1, h)
# ---------------------------------------------------------------------------

class BrownianHeightMeasure(SplittingMeasure):
    """int_0^1 dh/h^2 F(1, h): Brownian tree by height, locally largest."""

    conservative = False

    def __init__(self):
        self.key = "brownian-height-ll"
        self.support = "height-binary: atoms (1, h), h in (0,1)"

    def density(self, point):
        h = float(point)
        if not (0.0 < h < 1.0):
            raise SupportError(f"{self.key}: h={h} outside (0,1)")
        return self.normalization * h ** -2.0

    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        if fragment_cutoff <= 0:
            return math.inf
        eps = min(fragment_cutoff, 1.0)
        return self.normalization * (1.0 / eps - 1.0)

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        eps = min(fragment_cutoff, 1.0)
        u = rng.random(n)
        hs = 1.0 / (1.0 / eps - u * (1.0 / eps - 1.0))
        return [DecorationSequence.make(1.0, [h]) for h in hs]

    def integrate_y0_centered(self, f):
        # first marginal is concentrated at y0 = 1 and f(1) = 0
        return 0.0

    def kappa_integral(self, g, chi):
        if g <= 1.0:
            return math.inf
        # int (1 - 1 - 0 + h^g) dh/h^2 = 1/(g-1)
        return self.normalization / (g - 1.0)

    def y1_moment_bound(self):
        return 1.0

    def kappa_support_inf(self):
        return 1.0


# ---------------------------------------------------------------------------
# stable trees by mass
# ---------------------------------------------------------------------------

class _StablePool:
    """Fixed-seed pool of normalized jump-ratio vectors of a 1/beta-stable
    subordinator on [0,1], with S_1 values for moment weighting.

    Jumps are sampled above an adaptive cutoff (two passes: a coarse pass
    estimates S_1, the second pass resamples relative to it); the sum of
    discarded small jumps enters S_1 through its mean. Documented as
    approximate with cutoff-controlled bias.
    """

    def __init__(self, beta, size=2048, rel_cutoff=1e-4, seed=20240817):
        if not (1.0 < beta < 2.0):
            raise ConfigurationError(f"stable index beta={beta} outside (1,2)")
        self.beta = beta
        self.q = 1.0 / beta
        self.rel_cutoff = rel_cutoff
        rng = np.random.default_rng(np.random.SeedSequence([seed, int(beta * 1e9)]))
        self.ratios = []
        self.S1 = np.empty(size)
        for i in range(size):
            r, s1 = self._draw(rng)
            self.ratios.append(r)
            self.S1[i] = s1
        self.theta_w = self.S1 ** (1.0 - self.q)
        self.theta_w /= self.theta_w.sum()

    def _jumps_above(self, rng, delta, delta_hi=math.inf):
        # PPP intensity x^{-1-q} dx on [delta, delta_hi), unit time span
        q = self.q
        mass = (delta ** -q - (0.0 if delta_hi is math.inf else delta_hi ** -q)) / q
        n = rng.poisson(mass)
        u = rng.random(n)
        if delta_hi is math.inf:
            return delta * (1.0 - u) ** (-1.0 / q)
        lo, hi = delta ** -q, delta_hi ** -q
        return (lo - u * (lo - hi)) ** (-1.0 / q)

    def _small_mean(self, delta):
        return delta ** (1.0 - self.q) / (1.0 - self.q)

    def _draw(self, rng):
        d1 = 1e-2
        j1 = self._jumps_above(rng, d1)
        s_tilde = j1.sum() + self._small_mean(d1)
        d2 = min(self.rel_cutoff * s_tilde, d1)
        if d2 < d1:
            j2 = self._jumps_above(rng, d2, d1)
            jumps = np.concatenate([j1, j2])
        else:
            jumps = j1
        # the sub-cutoff jumps of a 1/beta-stable subordinator carry a
        # non-negligible share of the total mass; normalizing by the
        # bias-corrected sum keeps the ratio law nearly unbiased (stored
        # atoms then under-shoot conservation by the documented cutoff bias)
        s1 = jumps.sum() + self._small_mean(d2)
        ratios = np.sort(jumps / s1)[::-1][:MAX_OFFSPRING]
        return ratios, s1

    def theta_mean(self, f):
        """E under the normalized S_1^{1-1/beta}-biased ratio law."""
        vals = np.array([f(r) for r in self.ratios])
        return float(np.sum(self.theta_w * vals))

    def theta_indices(self, n, rng):
        return rng.choice(len(self.ratios), size=n, p=self.theta_w)


_STABLE_POOLS: dict[float, _StablePool] = {}


def stable_pool(beta) -> _StablePool:
    key = round(float(beta), 12)
    if key not in _STABLE_POOLS:
        _STABLE_POOLS[key] = _StablePool(key)
    return _STABLE_POOLS[key]


class StableMassMeasure(SplittingMeasure):
    """Mass fragmentation of the beta-stable tree.

    variant 'sb': size-biased bifurcator, mass form M_gamma with
    gamma = 1 - 1/beta: atoms (y0, (1-y0) y') with y0 ~ nu_gamma and y'
    a Theta-normalized ranked ratio vector.
    variant 'll': locally largest bifurcator, the ordered push-forward of
    the size-biased one.
    """

    conservative = True

    def __init__(self, beta, variant):
        if variant not in ("sb", "ll"):
            raise ConfigurationError(f"unknown stable-mass variant {variant}")
        self.beta = float(beta)
        self.variant = variant
        self.gamma = 1.0 - 1.0 / self.beta
        self.key = f"stable-mass-{variant}:{beta:g}"
        self.support = ("mass form M_gamma (y0 ~ nu_gamma, Theta offspring)" if variant == "sb"
                        else "Poissonian stable ranked sequences")

    @property
    def pool(self):
        return stable_pool(self.beta)

    # -- kept y0-sets --------------------------------------------------------
    def _sb_y0_upper(self, yp, fragment_cutoff, followed_jump_cutoff):
        y1p = yp[0] if len(yp) else 0.0
        hi = 1.0 - fragment_cutoff / y1p if y1p > fragment_cutoff else 0.0
        if np.isfinite(followed_jump_cutoff):
            hi = max(hi, math.exp(-followed_jump_cutoff))
        return min(max(hi, 0.0), 1.0)

    def _ll_intervals(self, yp, fc):
        """{y0 : second largest of {y0} u {(1-y0) y'} >= fc} as nu-intervals."""
        y1p = yp[0] if len(yp) >= 1 else 0.0
        y2p = yp[1] if len(yp) >= 2 else 0.0
        b1 = 1.0 - fc / y1p if y1p > fc else -1.0
        b2 = 1.0 - fc / y2p if y2p > fc else -1.0
        ivs = []
        if b2 >= fc and b1 >= 0:
            ivs.append((0.0, max(b1, b2)))
        else:
            if b2 > 0:
                ivs.append((0.0, b2))
            if b1 >= fc:
                ivs.append((fc, b1))
        return ivs

    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        if fragment_cutoff <= 0:
            return math.inf
        g = self.gamma
        if self.variant == "sb":
            f = lambda yp: nu_mass(g, self._sb_y0_upper(yp, fragment_cutoff, followed_jump_cutoff))
        else:
            def f(yp):
                tot = 0.0
                for (a, b) in self._ll_intervals(yp, fragment_cutoff):
                    tot += max(nu_mass(g, b) - nu_mass(g, a), 0.0)
                return tot
        return self.pool.theta_mean(f)

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        g = self.gamma
        out = []
        idx = self.pool.theta_indices(4 * n + 16, rng)
        k = 0
        while len(out) < n:
            if k >= len(idx):
                idx = self.pool.theta_indices(4 * n + 16, rng)
                k = 0
            yp = self.pool.ratios[idx[k]]
            k += 1
            if self.variant == "sb":
                hi = self._sb_y0_upper(yp, fragment_cutoff, followed_jump_cutoff)
                m_hi = nu_mass(g, hi)
                if m_hi <= 0:
                    continue
                y0 = nu_inv(g, rng.random() * m_hi)
                out.append(DecorationSequence.make(y0, (1.0 - y0) * yp, cutoff=0.0))
            else:
                ivs = self._ll_intervals(yp, fragment_cutoff)
                masses = [max(nu_mass(g, b) - nu_mass(g, a), 0.0) for a, b in ivs]
                tot = sum(masses)
                if tot <= 0:
                    continue
                u = rng.random() * tot
                for (a, b), m in zip(ivs, masses):
                    if u <= m or (a, b) == ivs[-1]:
                        y0 = nu_inv(g, nu_mass(g, a) + u)
                        break
                    u -= m
                coords = np.append((1.0 - y0) * yp, y0)
                coords = np.sort(coords)[::-1]
                out.append(DecorationSequence.make(coords[0], coords[1:], cutoff=0.0))
        return out[:n]

    def integrate_y0_centered(self, f):
        g = self.gamma
        if self.variant == "sb":
            return quad_div(lambda y: f(y) * nu_density(g, y), 0.0, 1.0, singular_right=True)

        # ll first marginal: y0 = max of the ordered atom, per pool sample
        def per_sample(yp):
            y1p = yp[0] if len(yp) else 0.0

            def integrand(y0):
                top = max(y0, (1.0 - y0) * y1p)
                return f(top) * nu_density(g, y0)

            return quad_div(integrand, 0.0, 1.0, singular_right=True)

        return self.pool.theta_mean(per_sample)

    def kappa_integral(self, g, chi):
        if g <= self.kappa_support_inf():
            return math.inf
        gam = self.gamma
        if self.variant == "sb":
            mom = self.pool.theta_mean(lambda yp: np.sum(yp ** g))
            head = quad_div(lambda y: (y ** g - 1.0 - g * chi(math.log(y))) * nu_density(gam, y),
                            0.0, 1.0, singular_right=True)
            tail = quad_div(lambda y: (1.0 - y) ** g * nu_density(gam, y), 0.0, 1.0,
                            singular_right=True)
            return head + mom * tail

        def per_sample(yp):
            def integrand(y0):
                coords = np.sort(np.append((1.0 - y0) * yp, y0))[::-1]
                top = coords[0]
                rest = coords[1:]
                return (top ** g - 1.0 - g * chi(math.log(top)) + np.sum(rest ** g)) * nu_density(gam, y0)

            return quad_div(integrand, 0.0, 1.0, singular_right=True)

        return self.pool.theta_mean(per_sample)

    def y1_moment_bound(self):
        return self.gamma

    def kappa_support_inf(self):
        return self.gamma


# ---------------------------------------------------------------------------
# stable trees by height
# ---------------------------------------------------------------------------

class StableHeightMeasure(SplittingMeasure):
    """Height form H_1 of the beta-stable tree: atoms (1, h, h*Z) with
    h ~ nu_{-1} = dh/h^2 and Z a ranked PPP((theta/z)^{1+theta} u dz) on [0,1],
    u Gamma(1 - 1/theta, theta^theta)-mixed, theta = 1/(beta-1)."""

    conservative = False

    def __init__(self, beta):
        if not (1.0 < beta < 2.0):
            raise ConfigurationError(f"stable index beta={beta} outside (1,2)")
        self.beta = float(beta)
        self.theta = 1.0 / (self.beta - 1.0)
        self.key = f"stable-height-ll:{beta:g}"
        self.support = "height form H_1: atoms (1, h, h*Z)"
        th = self.theta
        # total mass of the u-mixture measure du u^{-1/theta} e^{-u theta^theta}
        self.u_total = math.gamma(1.0 - 1.0 / th) * (th ** th) ** (1.0 / th - 1.0)
        self.u_mean_total = math.gamma(2.0 - 1.0 / th) * (th ** th) ** (1.0 / th - 2.0)

    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        if fragment_cutoff <= 0:
            return math.inf
        eps = min(fragment_cutoff, 1.0)
        return (1.0 / eps - 1.0) * self.u_total

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        th = self.theta
        eps = min(fragment_cutoff, 1.0)
        u0 = rng.random(n)
        hs = 1.0 / (1.0 / eps - u0 * (1.0 / eps - 1.0))
        us = rng.gamma(1.0 - 1.0 / th, 1.0 / th ** th, size=n)
        out = []
        for h, u in zip(hs, us):
            # ranked PPP intensity u theta^{1+theta} z^{-1-theta} dz on [z_min, 1]
            z_min = max(fragment_cutoff / h, 1e-12)
            if z_min < 1.0:
                mass = u * th ** th * (z_min ** -th - 1.0)
                k = rng.poisson(mass)
                v = rng.random(k)
                lo, hi = z_min ** -th, 1.0
                zs = (lo - v * (lo - hi)) ** (-1.0 / th)
            else:
                zs = np.empty(0)
            off = np.sort(np.append(h * zs, h))[::-1]
            out.append(DecorationSequence.make(1.0, off))
        return out

    def integrate_y0_centered(self, f):
        return 0.0

    def kappa_integral(self, g, chi):
        th = self.theta
        if g <= max(1.0, th):
            return math.inf
        # int h^{g-2} dh * [u_total + theta^{1+theta}/(g-theta) * u_mean_total]
        return (self.u_total + th ** (1.0 + th) / (g - th) * self.u_mean_total) / (g - 1.0)

    def y1_moment_bound(self):
        return 1.0

    def kappa_support_inf(self):
        return max(1.0, self.theta)


# ---------------------------------------------------------------------------
# Haas-Stephenson k-ary fragmentation (locally largest)
# ---------------------------------------------------------------------------

class HSSimplexMeasure(SplittingMeasure):
    """HS k-fragmentation: ordered (k+1)-simplex density
    (sum_i (1-s_i)^{-1}) / (prod_i s_i)^{1-a_k}, a_k = 1/(k+1)."""

    conservative = True

    def __init__(self, k):
        k = int(k)
        if k < 1:
            raise ConfigurationError("hs:<k> requires k >= 1")
        self.k = k
        self.alpha_k = 1.0 / (k + 1.0)
        self.key = f"hs:{k}"
        self.support = f"ordered {k + 1}-simplex"
        self._mass_cache = {}

    def density(self, point):
        s = np.asarray(point, dtype=float).ravel()
        if s.size != self.k + 1:
            raise SupportError(f"{self.key}: expected {self.k + 1} coordinates")
        if abs(s.sum() - 1.0) > 1e-9 or np.any(s <= 0) or np.any(np.diff(s) > 1e-12):
            raise SupportError(f"{self.key}: point not in the ordered simplex")
        return float(np.sum(1.0 / (1.0 - s)) / np.prod(s) ** (1.0 - self.alpha_k))

    def _dirichlet_pool(self, m=1 << 17):
        """Fixed-seed Dirichlet(a_k, ..., a_k) pool sorted descending, plus
        importance weights density/proposal (bounded on {s1 >= eps})."""
        if not hasattr(self, "_pool"):
            rng = np.random.default_rng(np.random.SeedSequence([77, self.k]))
            s = rng.dirichlet([self.alpha_k] * (self.k + 1), size=m)
            s = np.sort(s, axis=1)[:, ::-1]
            s = np.clip(s, 1e-300, 1.0 - 1e-16)
            c_dir = math.gamma((self.k + 1) * self.alpha_k) / math.gamma(self.alpha_k) ** (self.k + 1)
            # density / dirichlet-proposal-density, both wrt Lebesgue on the simplex
            self._pool_w = np.sum(1.0 / (1.0 - s), axis=1) / c_dir
            self._pool = s
        return self._pool, self._pool_w

    def _importance_integral(self, f):
        """int_{ordered simplex} f(s) dXi(s) via Dirichlet importance sampling.

        The sorted proposal covers the ordered sector with multiplicity
        (k+1)!, hence the constant below.
        """
        s, w = self._dirichlet_pool()
        vals = f(s) * w
        return float(np.mean(vals) / math.factorial(self.k + 1)) * self.normalization

    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        if fragment_cutoff <= 0:
            return math.inf
        key = round(fragment_cutoff, 14)
        if key not in self._mass_cache:
            fc = fragment_cutoff
            self._mass_cache[key] = self._importance_integral(lambda s: (s[:, 1] >= fc).astype(float))
        return self._mass_cache[key]

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        # weighted resampling from the kept part of the Dirichlet pool;
        # documented approximation (pool of 2^17 fixed-seed proposals)
        s, w = self._dirichlet_pool()
        keep = s[:, 1] >= fragment_cutoff
        sk, wk = s[keep], w[keep]
        if not len(sk):
            raise ConfigurationError(f"{self.key}: no pool support above cutoff {fragment_cutoff}")
        idx = rng.choice(len(sk), size=n, p=wk / wk.sum())
        return [DecorationSequence.make(row[0], row[1:], cutoff=0.0) for row in sk[idx]]

    def integrate_y0_centered(self, f):
        return self._importance_integral(lambda s: np.vectorize(f)(s[:, 0]))

    def kappa_integral(self, g, chi):
        if g <= self.kappa_support_inf():
            return math.inf

        def f(s):
            top = s[:, 0]
            chiv = np.array([chi(math.log(t)) for t in top])
            return top ** g - 1.0 - g * chiv + np.sum(s[:, 1:] ** g, axis=1)

        return self._importance_integral(f)

    def y1_moment_bound(self):
        # int s1^g dXi diverges in the corner s0 -> 1 like (1-s0)^{g + k a - 1 - ...};
        # shell calculus gives infimum 1/(k+1) = alpha_k.
        return self.alpha_k

    def kappa_support_inf(self):
        return self.alpha_k


# ---------------------------------------------------------------------------
# generic bifurcated measure (sampling + ordered push-forward only)
# ---------------------------------------------------------------------------

class BifurcatedMeasure(SplittingMeasure):
    def __init__(self, base, weights):
        self.base = base
        self.weights = weights
        self.key = f"{base.key}+{weights.name}"
        self.support = f"bifurcation of {base.key}"
        self.conservative = base.conservative
        self.normalization = base.normalization

    def truncated_mass(self, fragment_cutoff, followed_jump_cutoff=math.inf):
        return self.base.truncated_mass(fragment_cutoff, followed_jump_cutoff)

    def sample_marks(self, n, fragment_cutoff, followed_jump_cutoff, rng):
        marks = self.base.sample_marks(n, fragment_cutoff, followed_jump_cutoff, rng)
        out = []
        for seq in marks:
            ordered = seq.ordered()
            p = self.weights.probs(ordered)
            i = rng.choice(len(ordered), p=p / p.sum())
            rest = np.delete(ordered, i)
            out.append(DecorationSequence.make(ordered[i], rest))
        return out

    def y1_moment_bound(self):
        return self.base.y1_moment_bound()


def apply_bifurcator(measure, weights: BifurcatorWeights):
    """Re-route a splitting measure through follow-probabilities p_i.

    For binary conservative inputs in locally-largest form the result is
    again a closed-form scalar-density measure on (0, 1); otherwise a
    sampling wrapper with the same ordered push-forward is returned.
    """
    ordered_probe = np.array([0.7, 0.3])
    weights.probs(ordered_probe)  # validates sum-to-1

    if isinstance(measure, BinaryConservativeMeasure) and measure.s_lo >= 0.5:
        def p_pick(s):
            big = max(s, 1.0 - s)
            pr = weights.probs(np.array([big, 1.0 - big]))
            return pr[0] if s >= 0.5 else pr[1]

        if weights.name == "ll":
            return measure
        base_raw = measure._lam_raw

        def lam_w(s, base_raw=base_raw):
            return base_raw(max(s, 1.0 - s)) * p_pick(s)

        out = BinaryConservativeMeasure(
            f"{measure.key}+{weights.name}", lam_w, 0.0,
            normalization=measure.normalization,
            y1_bound=measure._y1_bound, kappa_inf=measure._kappa_inf)
        out.meta = dict(measure.meta)
        return out
    return BifurcatedMeasure(measure, weights)


# ---------------------------------------------------------------------------
# numeric y1 moment bound
# ---------------------------------------------------------------------------

def y1_moment_bound_numeric(measure, hi=6.0, tol=5e-3):
    """Infimum exponent of g -> int y1^g dXi, by bisection on quadrature
    finiteness over dyadic tail shells of {y1 >= eps}."""

    shells = [2.0 ** -k for k in range(4, 18)]
    masses = np.array([measure.y1_tail_mass(e) for e in shells])

    def diverges(g):
        # shell contributions ~ eps^g * (mass(eps) - mass(2 eps)); the sum over
        # dyadic shells converges iff the terms decay geometrically.
        terms = [(shells[i] ** g) * max(masses[i] - masses[i - 1], 0.0) for i in range(1, len(shells))]
        terms = [t for t in terms if t > 0]
        if len(terms) < 4:
            return False
        ratios = [terms[i + 1] / terms[i] for i in range(len(terms) - 1)]
        tail = np.median(ratios[-5:])
        return tail >= 1.0

    lo_g, hi_g = 1e-6, hi
    if not diverges(lo_g):
        return lo_g
    for _ in range(60):
        mid = 0.5 * (lo_g + hi_g)
        if diverges(mid):
            lo_g = mid
        else:
            hi_g = mid
        if hi_g - lo_g < tol:
            break
    return 0.5 * (lo_g + hi_g)


def y1_moment_bound(measure):
    """Infimum of {g > 0: int y1^g dXi(y) < inf} (upper bound on alpha_c)."""
    return measure.y1_moment_bound()


# ---------------------------------------------------------------------------
# characteristic quadruplets
# ---------------------------------------------------------------------------

def _chi(convention):
    if convention == "none":
        return lambda u: 0.0
    if convention == "all":
        return lambda u: u
    if convention == "unit-band":
        return lambda u: u if abs(u) <= 1.0 else 0.0
    raise ConfigurationError(f"unknown compensation convention {convention!r}")


@dataclass(frozen=True)
class CharacteristicQuadruplet:
    """(a, sigma^2, Xi; alpha) with a per-entry jump-compensation convention.

    Subcriticality (kappa(gamma0) <= 0 and kappa(gamma1) < inf for some
    gamma0 < gamma1) is checked numerically at construction.
    """

    a: float
    sigma2: float
    measure: SplittingMeasure
    alpha: float
    compensation: str = "none"
    gamma0: float = 1.0
    gamma1: float | None = None
    skip_checks: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        if self.sigma2 < 0:
            raise ConfigurationError("sigma^2 must be non-negative")
        _chi(self.compensation)
        if self.skip_checks:
            return
        self.measure.check_square_integrability()
        g1 = self.gamma1 if self.gamma1 is not None else self.gamma0 + 1.0
        k0 = cumulant(self, self.gamma0)
        k1 = cumulant(self, g1)
        if not (k0 <= 1e-8):
            raise ConfigurationError(
                f"{self.measure.key}: not subcritical, kappa({self.gamma0}) = {k0:.6g} > 0")
        if not np.isfinite(k1):
            raise ConfigurationError(
                f"{self.measure.key}: kappa({g1}) not finite; choose gamma1 in the cumulant support")

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)


def cumulant(quad: CharacteristicQuadruplet, gamma: float) -> float:
    """kappa(gamma) = sigma^2 gamma^2/2 + a gamma + int (y0^g - 1 - g chi(log y0)
    + sum y_i^g) dXi; +inf when the integral diverges."""
    if gamma <= 0:
        raise ConfigurationError("cumulant requires gamma > 0")
    tail = quad.measure.kappa_integral(gamma, _chi(quad.compensation))
    if not np.isfinite(tail):
        return math.inf
    return 0.5 * quad.sigma2 * gamma ** 2 + quad.a * gamma + tail


def levy_exponent(quad: CharacteristicQuadruplet, gamma: float) -> float:
    """psi(gamma) for the followed coordinate's Levy process; psi <= kappa."""
    if gamma <= 0:
        return 0.0
    chi = _chi(quad.compensation)
    val = quad.measure.integrate_y0_centered(
        lambda y: y ** gamma - 1.0 - gamma * chi(math.log(y)))
    if not np.isfinite(val):
        return math.inf
    return 0.5 * quad.sigma2 * gamma ** 2 + quad.a * gamma + val


def compensated_drift(quad: CharacteristicQuadruplet, cutoffs=None) -> float:
    """SDE drift beta = a + sigma^2/2 + int (y0 - 1 - chi(log y0)) dXi0.

    With the 'all' convention this is the fully compensated drift; with
    'none' the raw-jump form. Divergence signals that the entry would need
    the interlacing device, which is out of scope.
    """
    chi = _chi(quad.compensation)
    val = quad.measure.integrate_y0_centered(lambda y: y - 1.0 - chi(math.log(y)))
    if not np.isfinite(val):
        raise ConfigurationError(
            f"{quad.measure.key}: drift compensation integral diverges; "
            "this entry would require interlacing of large followed jumps (not supported)")
    return quad.a + 0.5 * quad.sigma2 + val


def sample_atoms(measure: SplittingMeasure, fragment_cutoff: float,
                 followed_jump_cutoff: float, horizon: float, rng) -> list:
    """Atoms of a Poisson random measure dt Xi(dy) truncated to
    {y1 >= fragment_cutoff} u {|log y0| >= followed_jump_cutoff}.

    Returns ordered (time, DecorationSequence) pairs, deterministic per rng.
    """
    if fragment_cutoff <= 0 or followed_jump_cutoff <= 0:
        raise ConfigurationError("cutoffs must be strictly positive")
    if horizon <= 0:
        return []
    mass = measure.truncated_mass(fragment_cutoff, followed_jump_cutoff)
    if not np.isfinite(mass):
        raise ConfigurationError(f"{measure.key}: truncated mass diverges at these cutoffs")
    n = rng.poisson(mass * horizon)
    times = np.sort(rng.random(n) * horizon)
    marks = measure.sample_marks(n, fragment_cutoff, followed_jump_cutoff, rng)
    return list(zip(times.tolist(), marks))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

BROWNIAN_GF_NORM = 3.0 / (4.0 * math.sqrt(math.pi))
BROWNIAN_GF_DRIFT = 4.0 * (7.0 - 3.0 * math.pi) / (3.0 * math.pi)


def _gamma_binary(gamma, key=None, normalization=1.0, meta=None):
    if not (1.0 < gamma < 3.0):
        raise ConfigurationError(
            f"gamma-binary requires gamma in (1,3) (infinite mass and square-integrable y0-1): got {gamma}")
    lam = lambda s: (s * (1.0 - s)) ** -gamma
    return BinaryConservativeMeasure(
        key or f"gamma-binary:{gamma:g}", lam, 0.5,
        normalization=normalization, y1_bound=gamma - 1.0, kappa_inf=gamma - 1.0,
        meta={"gamma": gamma, **(meta or {})})


def _brownian_sb():
    return BinaryConservativeMeasure(
        "brownian-mass-sb", lambda s: s * (s * (1.0 - s)) ** -1.5, 0.0,
        y1_bound=0.5, kappa_inf=0.5, meta={"gamma": 1.5, "nu_gamma": 0.5})


def _brownian_weird():
    lam = lambda s: (s * (1.0 - s)) ** -1.5 * weird_p(s)
    return BinaryConservativeMeasure("brownian-mass-weird", lam, 0.0,
                                     y1_bound=0.5, kappa_inf=0.5, meta={"gamma": 1.5})


def _parse_param(key):
    name, _, arg = key.partition(":")
    return name, arg


_MEASURE_CACHE: dict = {}


def get_measure(key: str) -> SplittingMeasure:
    """Resolve a catalog key such as 'brownian-mass-ll' or 'stable-mass-sb:1.5'.

    Instances are cached per key: measures are immutable after construction
    and safe for shared read-only use, and their integral tables are costly.
    """
    if key in _MEASURE_CACHE:
        return _MEASURE_CACHE[key]
    out = _build_measure(key)
    _MEASURE_CACHE[key] = out
    return out


def _build_measure(key: str) -> SplittingMeasure:
    name, arg = _parse_param(key)
    if name == "brownian-mass-ll":
        return _gamma_binary(1.5, key="brownian-mass-ll")
    if name == "brownian-mass-sb":
        return _brownian_sb()
    if name == "brownian-mass-weird":
        return _brownian_weird()
    if name == "brownian-height-ll":
        return BrownianHeightMeasure()
    if name == "gamma-binary":
        return _gamma_binary(float(arg))
    if name == "brownian-gf":
        return _gamma_binary(2.5, key="brownian-gf", normalization=BROWNIAN_GF_NORM,
                             meta={"a": BROWNIAN_GF_DRIFT})
    if name == "aidekon-minus":
        return _gamma_binary(2.0, key="aidekon-minus")
    if name == "stable-mass-sb":
        return StableMassMeasure(float(arg), "sb")
    if name == "stable-mass-ll":
        return StableMassMeasure(float(arg), "ll")
    if name == "stable-height-ll":
        return StableHeightMeasure(float(arg))
    if name == "hs":
        return HSSimplexMeasure(int(arg))
    raise ConfigurationError(f"unknown measure key {key!r}")


#: entries that ship a default characteristic quadruplet: key -> (a, sigma2, alpha, conv, g0, g1)
_DEFAULT_QUADS = {
    "brownian-mass-ll": (0.0, 0.0, 0.5, "none", 1.0, 2.0),
    "brownian-mass-sb": (0.0, 0.0, 0.5, "none", 1.0, 2.0),
    "brownian-mass-weird": (0.0, 0.0, 0.5, "none", 1.0, 2.0),
    "brownian-height-ll": (-1.0, 0.0, 1.0, "none", 2.0, 3.0),
    "stable-mass-sb": (0.0, 0.0, None, "none", 1.0, None),
    "stable-mass-ll": (0.0, 0.0, None, "none", 1.0, None),
    "stable-height-ll": (-1.0, 0.0, 1.0, "none", None, None),
    "gamma-binary": (0.0, 0.0, None, "none", 1.0, None),
    "hs": (0.0, 0.0, None, "none", 1.0, 2.0),
}

#: measure-only entries and why they carry no default quadruplet
MEASURE_ONLY = {
    "brownian-gf": "subcritical only with a killing term (killing is out of scope); "
                   "pass an explicit drift to build a quadruplet",
    "aidekon-minus": "conservative part of the Aidekon-Da Silva measure; with a = 0 and "
                     "compensated jumps the cumulant is positive everywhere, so no default "
                     "subcritical quadruplet exists",
}


def get_quadruplet(key: str, alpha: float | None = None, a: float | None = None,
                   sigma2: float | None = None) -> CharacteristicQuadruplet:
    """Default characteristic quadruplet for a catalog key.

    Overrides for (alpha, a, sigma2) are validated against subcriticality.
    """
    name, arg = _parse_param(key)
    if name in MEASURE_ONLY and a is None:
        raise ConfigurationError(f"{key}: no default quadruplet -- {MEASURE_ONLY[name]}")
    measure = get_measure(key)
    if name in MEASURE_ONLY:
        conv = "all"
        g0, g1 = 2.0, 2.5
        return CharacteristicQuadruplet(a, sigma2 or 0.0, measure, alpha or 0.5, conv, g0, g1)
    if name not in _DEFAULT_QUADS:
        raise ConfigurationError(f"unknown quadruplet key {key!r}")
    a0, s0, al0, conv, g0, g1 = _DEFAULT_QUADS[name]
    if name in ("stable-mass-sb", "stable-mass-ll"):
        beta = float(arg)
        al0 = 1.0 - 1.0 / beta
        g1 = 1.5  # inside the cumulant support (gamma_measure, inf), gamma_measure < 1
    if name == "stable-height-ll":
        beta = float(arg)
        th = 1.0 / (beta - 1.0)
        g0 = max(2.0, th + 2.0)
        g1 = g0  # kappa(g0) itself is finite and negative for g0 large enough
        measure_th = measure
        # find a gamma0 with kappa <= 0 numerically
        qtmp = CharacteristicQuadruplet(a0, s0, measure_th, al0, conv, g0, g0, skip_checks=True)
        g = th + 1.0
        for _ in range(60):
            if cumulant(qtmp, g) <= 0:
                break
            g += 0.5
        g0 = g1 = g
    if name == "gamma-binary":
        gamma = float(arg)
        if gamma >= 2.0:
            raise ConfigurationError(
                f"{key}: log y0 has infinite variation and a = 0 gives a supercritical cumulant; "
                "pass an explicit drift a to build a quadruplet")
        if al0 is None:
            al0 = gamma - 1.0 if gamma <= 1.5 else None
    if name == "hs":
        al0 = measure.alpha_k
    if al0 is None:
        from .generator import alpha_critical
        al0 = alpha_critical(measure) if isinstance(measure, BinaryConservativeMeasure) else measure.y1_moment_bound()
    return CharacteristicQuadruplet(
        a if a is not None else a0,
        sigma2 if sigma2 is not None else s0,
        measure,
        alpha if alpha is not None else al0,
        conv, g0, g1 if g1 is not None else g0 + 1.0)


def catalog_keys():
    return [
        "brownian-mass-ll", "brownian-mass-sb", "brownian-mass-weird",
        "brownian-height-ll", "stable-mass-sb:1.5", "stable-mass-ll:1.5",
        "stable-height-ll:1.5", "gamma-binary:1.25", "gamma-binary:1.5",
        "gamma-binary:2.5", "hs:2", "hs:3", "brownian-gf", "aidekon-minus",
    ]


# ---------------------------------------------------------------------------
# custom measures from key = value files
# ---------------------------------------------------------------------------

_ALLOWED_FUNCS = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp, "abs": abs,
                  "sin": math.sin, "cos": math.cos, "pi": math.pi}
_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Num, ast.Constant,
                  ast.Name, ast.Load, ast.Call, ast.Add, ast.Sub, ast.Mult,
                  ast.Div, ast.Pow, ast.USub, ast.UAdd)


def compile_density_expr(expr: str):
    """Compile a whitelisted arithmetic expression over `s` into a density."""
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigurationError(f"disallowed syntax in density expression: {ast.dump(node)}")
        if isinstance(node, ast.Name) and node.id not in ("s",) and node.id not in _ALLOWED_FUNCS:
            raise ConfigurationError(f"unknown name {node.id!r} in density expression")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise ConfigurationError("only whitelisted functions allowed in density expression")
    code = compile(tree, "<density_expr>", "eval")

    def lam(s):
        return float(eval(code, {"__builtins__": {}}, {**_ALLOWED_FUNCS, "s": float(s)}))

    return lam


def parse_kv_file(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def load_measure_file(path) -> SplittingMeasure:
    """Load a custom binary-conservative measure from a key = value file.

    Fields: kind = gamma-binary with gamma = <float>, or kind = custom-binary
    with density_expr = <whitelisted expression over s> (support (0,1),
    divergence at s = 1 assumed).
    """
    kv = parse_kv_file(path)
    kind = kv.get("kind", "")
    if kind == "gamma-binary":
        return _gamma_binary(float(kv["gamma"]))
    if kind == "custom-binary":
        lam = compile_density_expr(kv["density_expr"])
        s_lo = float(kv.get("s_lo", 0.0))
        return BinaryConservativeMeasure(kv.get("key", "custom-binary"), lam, s_lo)
    raise ConfigurationError(f"unknown measure kind {kind!r} in {path}")
