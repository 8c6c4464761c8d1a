"""Moduli of continuity and their Dini-type integrals.

A modulus sigma lives on [0, r_max], vanishes at 0, and is nondecreasing.
Three parametric families are supported (power r^a, log-power |log r|^-b,
tabulated with log-linear interpolation) plus a smoothed wrapper produced by
:func:`smooth_modulus`.  All singular integrals of the form
int_0^r sigma(t) w(t) / t dt are computed after the substitution t = e^{-s},
which turns them into well-behaved integrals over a half-line; iterated
integrals use the Cauchy repeated-integral kernel so that any depth costs a
single adaptive quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import factorial

import numpy as np
from scipy import integrate

# Value returned (and flagged) when a quadrature fails to converge as the
# lower cutoff goes to zero.
DIVERGENCE_CAP = 1e30

# Deepest substitution variable s = -log t explored before declaring
# convergence/divergence; e^{-700} underflows double precision anyway.
_S_MAX = 700.0

_ABS_TOL = 1e-12


@dataclass(frozen=True)
class ModulusOfContinuity:
    """Modulus of continuity on [0, r_max].

    kind is one of "power" (scale * r^param), "log-power"
    (scale * |log r|^-param, needs r_max < 1) or "tabulated".
    """

    kind: str
    param: float = 1.0
    r_max: float = 1.0
    scale: float = 1.0
    table: tuple = ()  # ((r_1, v_1), ...) for kind="tabulated", r ascending

    def __post_init__(self):
        if self.kind not in ("power", "log-power", "tabulated"):
            raise ValueError(f"unknown modulus kind {self.kind!r}")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.kind == "log-power" and self.r_max >= 1.0:
            raise ValueError("log-power modulus needs r_max < 1")
        if self.kind == "tabulated" and len(self.table) < 2:
            raise ValueError("tabulated modulus needs at least two samples")

    # -- evaluation ---------------------------------------------------------

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        if self.kind == "power":
            out = np.where(pos, self.scale * np.abs(r) ** self.param, 0.0)
        elif self.kind == "log-power":
            rp = np.clip(r, 1e-300, None)
            out = np.where(pos, self.scale * np.abs(np.log(rp)) ** (-self.param), 0.0)
        else:
            out = np.where(pos, self._table_eval(np.clip(r, 1e-300, None)), 0.0)
        return out if out.shape else float(out)

    def _table_eval(self, r):
        rs = np.array([p[0] for p in self.table])
        vs = np.array([p[1] for p in self.table])
        # log-linear interpolation preserves monotonicity of sigma(r)/r for
        # monotone tables; below the first sample extend with the first
        # segment's slope in log-log space, above the last clamp.
        logr = np.log(r)
        logs = np.log(rs)
        logv_tab = np.log(np.maximum(vs, 1e-300))
        logv = np.interp(logr, logs, logv_tab)
        below = logr < logs[0]
        if np.any(below):
            slope = (logv_tab[1] - logv_tab[0]) / (logs[1] - logs[0])
            logv = np.where(below, logv_tab[0] + slope * (logr - logs[0]), logv)
        return np.exp(logv)

    def at_log(self, s):
        """sigma(e^{-s}), stable for arbitrarily large s (tiny radii)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            with np.errstate(under="ignore"):
                return self.scale * np.exp(-self.param * s)
        if self.kind == "log-power":
            return self.scale * np.abs(s) ** (-self.param)
        rs = np.log([p[0] for p in self.table])
        vs = np.log(np.maximum([p[1] for p in self.table], 1e-300))
        slope = (vs[1] - vs[0]) / (rs[1] - rs[0])
        logv = np.interp(-s, rs, vs)
        logv = np.where(-s < rs[0], vs[0] + slope * (-s - rs[0]), logv)
        with np.errstate(under="ignore", over="ignore"):
            return np.exp(logv)

    def deriv(self, r):
        """sigma'(r) (analytic for the parametric kinds, FD for tables)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return self.scale * self.param * np.abs(r) ** (self.param - 1.0)
        if self.kind == "log-power":
            s = np.abs(np.log(np.clip(r, 1e-300, None)))
            return self.scale * self.param * s ** (-self.param - 1.0) / r
        dr = 1e-6 * np.maximum(r, 1e-12)
        return (self(r + dr) - self(r - dr)) / (2 * dr)

    def deriv2(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            a = self.param
            return self.scale * a * (a - 1.0) * np.abs(r) ** (a - 2.0)
        if self.kind == "log-power":
            b = self.param
            s = np.abs(np.log(np.clip(r, 1e-300, None)))
            return self.scale * b * (s ** (-b - 2.0)) * ((b + 1.0) - s) / r**2
        dr = 1e-4 * np.maximum(r, 1e-8)
        return (self(r + dr) - 2 * self(r) + self(r - dr)) / dr**2

    # -- structural checks --------------------------------------------------

    def is_smooth(self, n_grid: int = 200) -> bool:
        """Whether the concavity/derivative bounds of a smoothed modulus hold.

        Checks sigma(r)/r nonincreasing, |sigma'| <= 2 sigma/r and
        |sigma''| <= 4 sigma/r^2 on a log grid.
        """
        r = np.geomspace(1e-8 * self.r_max, self.r_max * (1 - 1e-12), n_grid)
        v = self(r)
        if np.any(v < 0):
            return False
        ratio = v / r
        if np.any(np.diff(ratio) > 1e-10 * np.maximum(ratio[:-1], 1e-300)):
            return False
        d1 = self.deriv(r)
        d2 = self.deriv2(r)
        tol = 1e-8 * np.maximum(v, 1e-300)
        if np.any(np.abs(d1) * r > 2 * v + tol):
            return False
        if np.any(np.abs(d2) * r**2 > 4 * v + tol):
            return False
        return True

    def check_basic(self, n_grid: int = 200) -> bool:
        """Nonnegative, nondecreasing, sigma(0+) = 0."""
        r = np.geomspace(1e-10 * self.r_max, self.r_max, n_grid)
        v = self(r)
        vanishes = float(self.at_log(1e8)) < 1e-4  # value far below any radius
        return bool(np.all(v >= 0) and np.all(np.diff(v) >= -1e-12) and vanishes)


def power_modulus(alpha: float, r_max: float = 1.0, scale: float = 1.0) -> ModulusOfContinuity:
    return ModulusOfContinuity("power", alpha, r_max, scale)


def log_power_modulus(beta: float, r_max: float = 0.5, scale: float = 1.0) -> ModulusOfContinuity:
    return ModulusOfContinuity("log-power", beta, r_max, scale)


def zero_modulus(r_max: float = 1.0) -> ModulusOfContinuity:
    """Flat boundary: sigma identically zero."""
    return ModulusOfContinuity("power", 1.0, r_max, 0.0)


# ---------------------------------------------------------------------------
# Dini integrals
# ---------------------------------------------------------------------------


def _halfline_quad(g, s0: float, abs_tol: float = 1e-11, max_windows: int = 44):
    """Integrate g over (s0, infinity), detecting divergence.

    The integral is accumulated on dyadically growing windows.  Increments of
    a convergent power-type tail shrink by a fixed factor per window, so the
    tail is summed geometrically from the last increment ratio; a ratio near
    or above 1 signals divergence.  Returns (value, diverged).
    """
    total = 0.0
    lo = s0
    hi = max(2.0 * abs(s0), s0 + 8.0, 8.0)
    prev_inc = None
    ratio = None
    for _ in range(max_windows):
        inc, _ = integrate.quad(g, lo, hi, limit=200, epsabs=abs_tol, epsrel=1e-11)
        total += inc
        if abs(inc) < abs_tol and (prev_inc is None or abs(prev_inc) < 10 * abs_tol):
            return total, False
        if prev_inc is not None and prev_inc > 0:
            ratio = inc / prev_inc
        prev_inc = inc
        lo = hi
        hi = 2.0 * hi
    if ratio is not None and ratio < 0.99 and prev_inc is not None:
        return total + prev_inc * ratio / (1.0 - ratio), False
    return DIVERGENCE_CAP, True


def dini_integral(sigma: ModulusOfContinuity, r: float, depth: int = 1,
                  log_weight: float = 0.0):
    """Iterated Dini integral of ``sigma`` at radius ``r``.

    depth=j gives the j-fold iterate D^j(r) of f -> int_0^r f(t)/t dt
    (depth=0 returns sigma(r) itself); for depth<=1 a nonzero ``log_weight``
    eps inserts the weight |log t|^eps.  Divergence at 0 is reported through
    the capped value DIVERGENCE_CAP, not an exception.
    """
    if r < 0 or r > sigma.r_max * (1 + 1e-12):
        raise ValueError("radius outside the modulus domain")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if depth == 0 and log_weight == 0.0:
        return float(sigma(r))
    if r == 0.0:
        return 0.0
    s0 = -np.log(r)

    # After t = e^{-s}:  D^j(r) = int_{s0}^inf sigma(e^{-s}) (s-s0)^{j-1}/(j-1)! ds,
    # and the eps-weighted first integral gains a factor s^eps.
    j = max(depth, 1)
    kfac = factorial(j - 1)

    def g(s):
        w = (s - s0) ** (j - 1) / kfac
        if log_weight:
            w *= abs(s) ** log_weight
        return float(sigma.at_log(s)) * w

    value, diverged = _halfline_quad(g, s0)
    return DIVERGENCE_CAP if diverged else value


def dini_is_finite(sigma: ModulusOfContinuity, r: float, depth: int = 1,
                   log_weight: float = 0.0) -> bool:
    return dini_integral(sigma, r, depth, log_weight) < DIVERGENCE_CAP / 2


def check_alpha_dini_equivalence(f: ModulusOfContinuity, n: int, eps: float,
                                 R: float) -> tuple[bool, bool]:
    """Finiteness of the log-weighted integral vs. the iterated one.

    Returns (int_0^R f |log r|^{n+eps}/r finite,
             int_0^R D_f^n |log r|^eps / r finite); the two must agree.
    """
    if n < 1 or eps < 0:
        raise ValueError("need n >= 1 and eps >= 0")
    lhs = dini_is_finite(f, R, depth=1, log_weight=n + eps)

    # rhs: int_0^R D^n(t) |log t|^eps / t dt.  Swapping the iterated integral
    # gives a single quadrature against the kernel
    # int_{s0}^{s} u^eps (s-u)^{n-1}/(n-1)! du, with closed form for eps=0.
    if R == 0.0:
        return (True, True)
    s0 = -np.log(R)
    kfac = factorial(n - 1)
    if eps == 0.0:
        def kernel(s):
            return (s - s0) ** n / factorial(n)
    else:
        def kernel(s):
            val, _ = integrate.quad(
                lambda u: abs(u) ** eps * (s - u) ** (n - 1) / kfac, s0, s,
                limit=100, epsabs=1e-12)
            return val

    def g(s):
        return float(f.at_log(s)) * kernel(s)

    _, diverged = _halfline_quad(g, s0)
    return (lhs, not diverged)


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothedModulus(ModulusOfContinuity):
    """Result of the three-pass smoothing construction.

    Stores dense log-grid tables of the intermediate passes h1, h2 so the
    derivatives can be evaluated through the exact recursion identities
        h'(r)  = (2/r) (h2(r) - h2(r/2)),
        h''(r) = (2/r^2) (-h2(r) + h2(r/2) + 2 h1(r) - 4 h1(r/2) + 2 h1(r/4)),
    instead of noisy finite differences of the table.
    """

    grid_r: tuple = ()
    h1_vals: tuple = ()
    h2_vals: tuple = ()

    def _interp(self, vals, r):
        r = np.clip(np.asarray(r, dtype=float), 1e-300, None)
        gr = np.asarray(self.grid_r)
        gv = np.asarray(vals)
        out = np.exp(np.interp(np.log(r), np.log(gr),
                               np.log(np.maximum(gv, 1e-300))))
        return np.where(gv.max() <= 0, 0.0, out)

    def h1(self, r):
        return self._interp(self.h1_vals, r)

    def h2(self, r):
        return self._interp(self.h2_vals, r)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        return (2.0 / r) * (self.h2(r) - self.h2(r / 2))

    def deriv2(self, r):
        r = np.asarray(r, dtype=float)
        return (2.0 / r**2) * (-self.h2(r) + self.h2(r / 2)
                               + 2 * self.h1(r) - 4 * self.h1(r / 2) + 2 * self.h1(r / 4))


def smooth_modulus(f: ModulusOfContinuity, n_grid: int = 2048) -> ModulusOfContinuity:
    """Dominating modulus h >= f with h/r nonincreasing and C^2 bounds.

    Construction: h1(r) = r * sup_{t in [r, R]} f(t)/t, then two passes of
    h -> 2 int_{r/2}^r h(t)/t dt.  Power moduli with exponent <= 1 already
    satisfy every bound and are returned as-is.
    """
    if not f.check_basic():
        raise ValueError("input is not a modulus (monotone, vanishing at 0)")
    if f.kind == "power" and f.param <= 1.0:
        return f

    R = f.r_max
    # Dense grid reaching far below r/4 of the smallest radius queried later.
    grid = np.geomspace(1e-12 * R, R, n_grid)
    vals = np.asarray(f(grid), dtype=float)

    # h1: running sup of f(t)/t from the right, times r.
    ratio = vals / grid
    sup_from_right = np.maximum.accumulate(ratio[::-1])[::-1]
    h1 = grid * sup_from_right

    def dyadic_average(h):
        # 2 * int_{r/2}^r h(t)/t dt via a cumulative integral on the log grid.
        integrand = h / grid
        cum = integrate.cumulative_trapezoid(integrand, grid, initial=0.0)
        cum_half = np.interp(np.log(grid / 2), np.log(grid), cum, left=0.0)
        return 2.0 * (cum - cum_half)

    h2 = dyadic_average(h1)
    h = dyadic_average(h2)
    # The dyadic window is empty at the very bottom of the grid; splice in h1
    # there (all three passes agree to leading order as r -> 0).
    low = grid < grid[0] * 4
    h[low] = np.maximum(h[low], h1[low])
    h2[low] = np.maximum(h2[low], h1[low])

    return SmoothedModulus(
        kind="tabulated", param=0.0, r_max=R, scale=1.0,
        table=tuple(zip(grid.tolist(), h.tolist())),
        grid_r=tuple(grid.tolist()),
        h1_vals=tuple(h1.tolist()),
        h2_vals=tuple(h2.tolist()),
    )


def alpha_of_sigma(sigma: ModulusOfContinuity, r):
    """Auxiliary modulus alpha(r) = 3 (r sigma(r))' = 3 (sigma + r sigma').

    Requires a smoothed sigma; the sandwich 3 sigma <= alpha <= 6 sigma then
    holds pointwise.
    """
    if not sigma.is_smooth():
        raise ValueError("alpha_of_sigma needs a smoothed modulus")
    r = np.asarray(r, dtype=float)
    return 3.0 * (sigma(r) + r * sigma.deriv(r))


# ---------------------------------------------------------------------------
# Upsilon / theta and the admissibility report
# ---------------------------------------------------------------------------


def upsilon_theta(sigma0: ModulusOfContinuity, r: float,
                  r_cap: float | None = None) -> tuple[float, float]:
    """Interface-oscillation scales (Upsilon(r), theta(r)).

    Upsilon(r) = r^2 sqrt(int_0^r sigma0/t); theta(r) takes the same Dini
    integral at Upsilon^{-1}(r), with the inverse found by bisection to
    1e-12 relative tolerance.  r must lie in the range of Upsilon.
    """
    if r == 0.0:
        return (0.0, 0.0)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    cap = r_cap if r_cap is not None else sigma0.r_max

    def upsilon(t):
        return t * t * np.sqrt(dini_integral(sigma0, t))

    ups_r = upsilon(r) if r <= cap else None
    top = upsilon(cap)
    if r > top:
        raise ValueError("radius outside the range of Upsilon")
    lo, hi = 0.0, cap
    while hi - lo > 1e-12 * max(hi, 1e-30):
        mid = 0.5 * (lo + hi)
        if upsilon(mid) < r:
            lo = mid
        else:
            hi = mid
    theta = float(np.sqrt(dini_integral(sigma0, 0.5 * (lo + hi))))
    if ups_r is None:
        raise ValueError("radius outside the modulus domain")
    return (float(ups_r), theta)


@dataclass(frozen=True)
class DiniReport:
    """Admissibility summary for a pair (sigma, sigma0)."""

    sigma: ModulusOfContinuity
    sigma0: ModulusOfContinuity
    m_d: float
    double_dini: float = field(default=np.nan)
    dini_sigma0: float = field(default=np.nan)
    power_bound_ok: bool = field(default=False)
    admissible: bool = field(default=False)

    def dini(self, r: float) -> float:
        return dini_integral(self.sigma, r)


def make_dini_report(sigma: ModulusOfContinuity, sigma0: ModulusOfContinuity,
                     m_d: float, n_grid: int = 200) -> DiniReport:
    """Evaluates both integrability conditions and the power-growth bound."""
    R2 = min(sigma.r_max, sigma0.r_max)
    s0 = -np.log(R2)

    val0, div0 = _halfline_quad(lambda s: float(sigma0.at_log(s)), s0)

    def g(s):
        t = float(np.exp(-max(s, 0.0))) if s < _S_MAX else 0.0
        return dini_integral(sigma, t) / max(float(sigma0.at_log(s)), 1e-300)

    val_dd, div_dd = _halfline_quad(g, s0, abs_tol=1e-8)

    r = np.geomspace(1e-8 * R2, R2, n_grid)
    ratio = np.asarray(sigma0(r)) / r**m_d
    power_ok = bool(np.all(np.diff(ratio) <= 1e-10 * np.maximum(ratio[:-1], 1e-300)))

    return DiniReport(
        sigma=sigma, sigma0=sigma0, m_d=m_d,
        double_dini=DIVERGENCE_CAP if div_dd else val_dd,
        dini_sigma0=DIVERGENCE_CAP if div0 else val0,
        power_bound_ok=power_ok,
        admissible=(not div0) and (not div_dd) and power_ok,
    )


def sigma0_power_constant(sigma0: ModulusOfContinuity, m_d: float,
                          r_top: float | None = None) -> float:
    """Lower-bound constant: int_0^r sigma0/t >= C r^{m_d} on (0, r_top]."""
    R2 = r_top if r_top is not None else sigma0.r_max
    return float(sigma0(R2)) / (m_d * R2**m_d)


def sigma_vs_sigma0_constant(sigma: ModulusOfContinuity,
                             sigma0: ModulusOfContinuity) -> float:
    """C = (1/4) int_0^{2R} sigma/(t sigma0) dt, used in sigma <= C int sigma0/t."""
    R2 = min(sigma.r_max, sigma0.r_max)
    s0 = -np.log(R2)

    def g(s):
        return float(sigma.at_log(s)) / max(float(sigma0.at_log(s)), 1e-300)

    val, div = _halfline_quad(g, s0, abs_tol=1e-9)
    return DIVERGENCE_CAP if div else 0.25 * val
