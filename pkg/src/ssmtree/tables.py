"""Cumulative-integral tables for 1D densities with an endpoint singularity.

Used both for inverse-CDF mark sampling and for the binary-conservative
flow I(s) = int lam. Grids are refined geometrically toward the endpoints
(substitution u = 1 - s near a right-endpoint divergence), and exact local
quadrature from the nearest node keeps evaluations near machine accuracy.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import quad


def _panel(f, a, b):
    # tight per-panel tolerances: thousands of panels are accumulated
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, _ = quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


class MonotoneIntegralTable:
    """I(s) = int_{lo}^{s} lam(u) du on (lo, hi), strictly increasing.

    lam may blow up at either endpoint; the table never evaluates the
    integral across the divergent right endpoint (I -> inf there).
    """

    def __init__(self, lam, lo, hi, n_nodes=4096, edge=1e-12):
        self.lam = lam
        self.lo = float(lo)
        self.hi = float(hi)
        span = self.hi - self.lo
        # geometric refinement toward both endpoints
        m = n_nodes // 2
        left = self.lo + span * 0.5 * np.logspace(np.log10(edge), 0, m)
        right = self.hi - span * 0.5 * np.logspace(0, np.log10(edge), m)
        grid = np.unique(np.concatenate([[self.lo], left, right]))
        self.s = grid
        vals = np.zeros(len(grid))
        for i in range(1, len(grid)):
            vals[i] = vals[i - 1] + _panel(lam, grid[i - 1], grid[i])
        self.I = vals

    def value(self, s):
        """I(s), table node plus exact local panel."""
        s = float(s)
        if s <= self.lo:
            return 0.0
        if s >= self.hi:
            return np.inf
        k = np.searchsorted(self.s, s) - 1
        k = max(k, 0)
        return self.I[k] + _panel(self.lam, self.s[k], s)

    @property
    def total(self):
        return self.I[-1]

    def inverse(self, target, tol=1e-14):
        """Solve I(s) = target by bracketed bisection with Newton warm steps."""
        if target <= 0.0:
            return self.lo
        if target >= self.I[-1]:
            return self.hi
        k = int(np.searchsorted(self.I, target))
        a, b = self.s[k - 1], self.s[k]
        Ia = self.I[k - 1]
        s = a + (b - a) * (target - Ia) / max(self.I[k] - Ia, 1e-300)
        scale = max(abs(target), 1.0)
        for _ in range(100):
            fs = self.value(s) - target
            if abs(fs) <= tol * scale:
                return s
            if fs > 0:
                b = s
            else:
                a = s
            if b - a <= 1e-16 * max(abs(b), 1.0):
                return s
            lam_s = self.lam(s)
            s_new = s - fs / lam_s if np.isfinite(lam_s) and lam_s > 0 else a
            s = s_new if a < s_new < b else 0.5 * (a + b)
        return s

    def inverse_many(self, targets):
        return np.array([self.inverse(t) for t in np.asarray(targets, dtype=float)])
