"""Growing-function families.

A family (G_x : x > 0) pushes a splitting measure Xi to x^{-alpha} Xi
(quasi-preservation) while x * G_x(y) is coordinate-wise increasing in x
(monotone coupling) and G satisfies the semigroup law G_x o G_x' = G_{xx'}.
Closed forms: the magic mass/height families and the Brownian binary flow.
Numeric: the generic binary-conservative flow I^{-1}(x^alpha I(s)) and
generator-driven ODE flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, IntegrationDomainError, OrderingError, SupportError
from .measures import BinaryConservativeMeasure, BrownianHeightMeasure, StableMassMeasure, nu_mass
from .sequences import DecorationSequence


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def magic(x, y):
    """m_x(y) = x y / (x y + 1 - y); semigroup in x, increasing in both."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = x * y / (x * y + (1.0 - y))
    return out if out.ndim else float(out)


def g_mass(x: float, seq: DecorationSequence) -> DecorationSequence:
    """Mass-form family: followed -> m_x(y0), offspring scaled by
    (1 - m_x(y0)) / (1 - y0). Conservative inputs stay conservative."""
    y0 = seq.followed
    if y0 >= 1.0:
        if seq.offspring.size:
            raise SupportError("mass form needs y0 < 1 when offspring are present")
        return seq
    if y0 <= 0.0:
        raise SupportError("mass form needs y0 > 0")
    m = magic(x, y0)
    scale = (1.0 - m) / (1.0 - y0)
    return DecorationSequence(m, seq.offspring * scale)


def g_height(x: float, seq: DecorationSequence) -> DecorationSequence:
    """Height-form family on the slice {y0 = 1}: (1, y1, rest) ->
    (1, m_{1/x}(y1), m_{1/x}(y1)/y1 * rest).

    Off the slice the reference construction is the zero map; a zero output
    is not a valid decoration sequence, so out-of-slice inputs are rejected.
    """
    if seq.followed != 1.0:
        raise SupportError("height form is defined on the slice {y0 = 1} only")
    if not seq.offspring.size:
        return seq
    y1 = float(seq.offspring[0])
    m = magic(1.0 / x, y1)
    rest = seq.offspring[1:] * (m / y1)
    return DecorationSequence(1.0, np.concatenate([[m], rest]))


def h_brownian(s):
    """h(s) = (1 - 2s)^2 / (s(1-s)); the conserved shape of the Brownian flow."""
    s = np.asarray(s, dtype=float)
    out = (1.0 - 2.0 * s) ** 2 / (s * (1.0 - s))
    return out if out.ndim else float(out)


def f_brownian_pair(x, s):
    """(f_x(s), 1 - f_x(s)) for s >= 1/2, with the complement computed via
    (1-u^2)/(2(1+u)) to avoid cancellation when f is close to 1."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    f = np.ones_like(s_arr)
    comp = np.zeros_like(s_arr)
    interior = s_arr < 1.0
    h = h_brownian(s_arr[interior])
    denom = 4.0 / x + h
    u = np.sqrt(h / denom)
    f[interior] = 0.5 * (1.0 + u)
    comp[interior] = (4.0 / x / denom) / (2.0 * (1.0 + u))
    return f, comp


def f_brownian(x, s):
    """Brownian binary flow f_x(s) = (1 + sqrt(h/(4/x + h)))/2 on [1/2, 1],
    extended by f_x(1-s) = 1 - f_x(s); satisfies h(f_x(s)) = x h(s)."""
    s_arr = np.asarray(s, dtype=float)
    scalar = s_arr.ndim == 0
    s_arr = np.atleast_1d(s_arr).astype(float)
    hi = s_arr >= 0.5
    u = np.where(hi, s_arr, 1.0 - s_arr)
    f, _ = f_brownian_pair(x, u)
    out = np.where(hi, f, 1.0 - f)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# the generic binary-conservative flow
# ---------------------------------------------------------------------------

class FlowTable:
    """Cumulative I(s) = int lam for a binary-conservative measure, with the
    monotone inverse used by the flow f_x(s) = I^{-1}(x^alpha I(s))."""

    def __init__(self, measure: BinaryConservativeMeasure):
        self.measure = measure
        self.table = measure.table
        self.s_lo = measure.s_lo
        if not np.all(np.diff(self.table.I) >= 0):
            raise ConfigurationError("flow table I(s) must be non-decreasing")

    def value(self, s):
        return self.table.value(s)

    def inverse(self, target):
        return self.table.inverse(target)


def binary_flow(measure: BinaryConservativeMeasure, alpha: float, x: float, s: float,
                table: FlowTable | None = None) -> float:
    """Numeric flow for a binary-conservative measure: I(result) = x^alpha I(s).

    Locally-largest measures (support [1/2, 1)) are extended to [0, 1/2] by
    the symmetry f_x(1-s) = 1 - f_x(s). The divergent endpoint s = 1 is a
    fixed point.
    """
    tab = table or FlowTable(measure)
    if s >= 1.0:
        return 1.0
    if measure.s_lo >= 0.5 and s < 0.5:
        return 1.0 - binary_flow(measure, alpha, x, 1.0 - s, table=tab)
    if s <= measure.s_lo:
        return measure.s_lo if s == measure.s_lo else _reject_point(measure, s)
    target = x ** alpha * tab.value(s)
    return tab.inverse(target)


def _reject_point(measure, s):
    raise SupportError(f"{measure.key}: s={s} outside flow support")


# ---------------------------------------------------------------------------
# generator-driven ODE flows
# ---------------------------------------------------------------------------

def ode_flow(gen, x: float, seq: DecorationSequence, rtol=1e-10, atol=1e-12) -> DecorationSequence:
    """Integrate the flow dG_t = V(G_t) in log-time t = -log x.

    The trajectory is rejected if it exits the generator's declared domain;
    the error carries the exit state.
    """
    if x <= 0:
        raise SupportError("flow parameter x must be positive")
    y0 = seq.as_array()
    t_end = -math.log(x)
    if t_end == 0.0:
        return seq
    if not gen.domain(y0):
        raise IntegrationDomainError("initial point outside generator domain", state=y0, time=0.0)

    def rhs(t, y):
        return gen.V(y)

    def escape(t, y):
        return gen.domain_margin(y)

    escape.terminal = True
    escape.direction = -1
    sol = solve_ivp(rhs, [0.0, t_end], y0, rtol=rtol, atol=atol, events=escape, dense_output=False)
    if sol.status == 1 and len(sol.t_events[0]):
        raise IntegrationDomainError(
            "flow trajectory exited the generator domain",
            state=sol.y_events[0][0], time=float(sol.t_events[0][0]))
    if not sol.success:
        raise IntegrationDomainError(f"flow integration failed: {sol.message}", state=y0)
    y = sol.y[:, -1]
    off = np.sort(np.clip(y[1:], 0.0, None))[::-1]
    return DecorationSequence(float(y[0]), off)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

CLOSED_FORM_KINDS = ("magic-mass", "magic-height", "brownian-closed-form")
NUMERIC_KINDS = ("binary-conservative-numeric", "generator-ode")


@dataclass
class GrowingFamily:
    """One-parameter semigroup of maps on decoration sequences.

    kind selects the evaluation rule; measure/alpha/generator parameterize
    the numeric flows. evaluate(1, y) = y exactly for every family.
    """

    kind: str
    measure: object = None
    alpha: float | None = None
    generator: object = None
    _table: FlowTable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in CLOSED_FORM_KINDS + NUMERIC_KINDS:
            raise ConfigurationError(f"unknown growing-family kind {self.kind!r}")
        if self.kind == "binary-conservative-numeric":
            if not isinstance(self.measure, BinaryConservativeMeasure) or self.alpha is None:
                raise ConfigurationError("binary-conservative-numeric needs a binary measure and alpha")
            self._table = FlowTable(self.measure)
        if self.kind == "generator-ode" and self.generator is None:
            raise ConfigurationError("generator-ode needs a generator")

    @property
    def closed_form(self):
        return self.kind in CLOSED_FORM_KINDS

    @property
    def tolerance(self):
        return 1e-10 if self.closed_form else 1e-6

    def domain_ok(self, seq: DecorationSequence) -> bool:
        if self.kind == "magic-mass":
            return 0.0 < seq.followed < 1.0 or (seq.followed == 1.0 and not seq.offspring.size)
        if self.kind == "magic-height":
            return seq.followed == 1.0
        if self.kind in ("brownian-closed-form", "binary-conservative-numeric"):
            return seq.offspring.size <= 1 and abs(seq.conservation_deficit()) < 1e-9
        if self.kind == "generator-ode":
            return bool(self.generator.domain(seq.as_array()))
        return False

    def evaluate(self, x: float, seq: DecorationSequence) -> DecorationSequence:
        if x <= 0:
            raise SupportError("x must be positive")
        if not self.domain_ok(seq):
            raise SupportError(f"{self.kind}: sequence outside the family domain")
        if x == 1.0:
            return seq
        if self.kind == "magic-mass":
            return g_mass(x, seq)
        if self.kind == "magic-height":
            return g_height(x, seq)
        if self.kind == "brownian-closed-form":
            f = f_brownian(x, seq.followed)
            return DecorationSequence(f, np.array([1.0 - f]) if seq.offspring.size else np.empty(0))
        if self.kind == "binary-conservative-numeric":
            f = binary_flow(self.measure, self.alpha, x, seq.followed, table=self._table)
            return DecorationSequence(f, np.array([1.0 - f]) if seq.offspring.size else np.empty(0))
        return ode_flow(self.generator, x, seq)

    def evaluate_scalar(self, x: float, s: float) -> float:
        """Followed coordinate of the conservative binary action."""
        return self.evaluate(x, DecorationSequence.binary(s)).followed


def family_for(kind: str, measure=None, alpha=None, generator=None) -> GrowingFamily:
    return GrowingFamily(kind, measure=measure, alpha=alpha, generator=generator)


# ---------------------------------------------------------------------------
# pure-jump coupler
# ---------------------------------------------------------------------------

def jump_transform(family: GrowingFamily, parent_pre: float, parent_seq: DecorationSequence,
                   child_pre: float) -> DecorationSequence:
    """Adapt one relative split of a path at level parent_pre to a coupled
    lower path at level child_pre <= parent_pre: G_{child/parent}(split)."""
    if child_pre > parent_pre:
        raise OrderingError(f"child_pre {child_pre} exceeds parent_pre {parent_pre}")
    return transform_split(family, parent_pre, parent_seq, child_pre)


def transform_split(family, parent_pre, parent_seq, child_pre):
    """jump_transform without the ordering guard (the upward direction is
    used internally by the Markov-forward grow step)."""
    ratio = child_pre / parent_pre
    if ratio == 1.0:
        return parent_seq
    return family.evaluate(ratio, parent_seq)


# ---------------------------------------------------------------------------
# property checkers
# ---------------------------------------------------------------------------

@dataclass
class QuasiPreservationReport:
    family: str
    measure: str
    alpha: float
    x: float
    thresholds: list
    errors: list
    tolerance: float = 1e-5

    @property
    def max_relative_error(self):
        return max(self.errors) if self.errors else 0.0

    @property
    def passed(self):
        return self.max_relative_error <= self.tolerance


@dataclass
class MonotoneReport:
    family: str
    measure: str
    x_grid: list
    sample_count: int
    violations: list
    worst_margin: float
    slack: float = 1e-10

    @property
    def violation_count(self):
        return len(self.violations)

    @property
    def passed(self):
        return not self.violations


def _pullback_threshold_mass(family: GrowingFamily, measure, x: float, z: float) -> float:
    """Xi({y : first offspring of G_x(y) >= z}) by quadrature."""
    if isinstance(measure, BinaryConservativeMeasure):
        # y1-after = 1 - f_x(s), monotone decreasing in s on the support
        lo, hi = measure.s_lo, 1.0 - 1e-13

        def after(s):
            return 1.0 - family.evaluate_scalar(x, s)

        if after(lo + 1e-13) < z:
            return 0.0
        if after(hi) >= z:
            return measure.table.total
        a, b = lo + 1e-13, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if after(mid) >= z:
                a = mid
            else:
                b = mid
            if b - a < 1e-14:
                break
        return measure.table.value(0.5 * (a + b))
    if isinstance(measure, BrownianHeightMeasure):
        # y1-after = m_{1/x}(h), increasing in h: {>= z} = {h >= m_x(z)}
        hmin = magic(x, z)
        return measure.truncated_mass(hmin)
    if isinstance(measure, StableMassMeasure) and measure.variant == "sb":
        g = measure.gamma

        def per_sample(yp):
            y1p = yp[0] if len(yp) else 0.0
            if y1p <= 0:
                return 0.0
            t = 1.0 - z / y1p
            if t <= 0:
                return 0.0
            # (1 - m_x(y0)) y1' >= z  <=>  y0 <= m_{1/x}(1 - z/y1')
            return nu_mass(g, magic(1.0 / x, t))

        return measure.pool.theta_mean(per_sample)
    raise ConfigurationError(f"no quasi-preservation quadrature for measure {measure.key}")


def _threshold_mass(measure, z: float) -> float:
    if isinstance(measure, BinaryConservativeMeasure):
        return measure.table.value(1.0 - z)
    if isinstance(measure, BrownianHeightMeasure):
        return measure.truncated_mass(z)
    if isinstance(measure, StableMassMeasure) and measure.variant == "sb":
        g = measure.gamma

        def per_sample(yp):
            y1p = yp[0] if len(yp) else 0.0
            if y1p <= 0:
                return 0.0
            t = 1.0 - z / y1p
            return nu_mass(g, t) if t > 0 else 0.0

        return measure.pool.theta_mean(per_sample)
    raise ConfigurationError(f"no threshold quadrature for measure {measure.key}")


def check_quasi_preservation(family: GrowingFamily, measure, alpha: float, x: float,
                             thresholds) -> QuasiPreservationReport:
    """Compare Xi(G_x^{-1}{y1 >= z}) with x^{-alpha} Xi({y1 >= z}) for each
    threshold z; report the worst relative error."""
    errors = []
    for z in thresholds:
        lhs = _pullback_threshold_mass(family, measure, x, z)
        rhs = x ** (-alpha) * _threshold_mass(measure, z)
        scale = max(abs(rhs), 1e-300)
        errors.append(abs(lhs - rhs) / scale)
    return QuasiPreservationReport(family.kind, measure.key, alpha, x, list(thresholds), errors)


def _support_points(family: GrowingFamily, measure, count: int, rng) -> list:
    """Mixed deterministic/sampled decoration sequences in the family domain."""
    pts = []
    n_grid = count // 2
    if isinstance(measure, BinaryConservativeMeasure):
        lo = max(measure.s_lo, 1e-4)
        for s in np.linspace(lo + 1e-4, 1.0 - 1e-4, n_grid):
            pts.append(DecorationSequence.binary(float(s)))
    elif isinstance(measure, BrownianHeightMeasure):
        for h in np.linspace(1e-3, 1.0 - 1e-3, n_grid):
            pts.append(DecorationSequence.make(1.0, [h]))
    marks = measure.sample_marks(count - len(pts), 1e-3, math.inf, rng)
    for seq in marks:
        pts.append(seq)
    return [p for p in pts if family.domain_ok(p)]


def check_monotone(family: GrowingFamily, measure, x_grid, sample_count: int, rng,
                   slack: float = 1e-10) -> MonotoneReport:
    """Check that x -> x * G_x(y) is coordinate-wise non-decreasing along the
    grid, on a mix of grid and sampled support points."""
    x_grid = sorted(x_grid)
    pts = _support_points(family, measure, sample_count, rng)
    violations = []
    worst = math.inf
    for seq in pts:
        prev = None
        for x in x_grid:
            cur = family.evaluate(x, seq).scale(x)
            if prev is not None:
                gaps = [prev.followed - cur.followed]
                n = max(prev.offspring.size, cur.offspring.size)
                a = np.zeros(n)
                b = np.zeros(n)
                a[: prev.offspring.size] = prev.offspring
                b[: cur.offspring.size] = cur.offspring
                gaps.extend((a - b).tolist())
                margin = -max(gaps)
                worst = min(worst, margin)
                if margin < -slack:
                    violations.append((x, seq, margin))
            prev = cur
    return MonotoneReport(family.kind, measure.key, list(x_grid), len(pts), violations,
                          worst if pts else 0.0, slack)
