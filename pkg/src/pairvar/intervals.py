"""Confidence sets for a single mean and for the difference of two means.

For one observation Y ~ N(mu, h(theta, mu)) the pivot (Y-mu)^2 / h(theta, mu)
is chi-squared with one degree of freedom, and inverting it yields an exact
confidence set: either a single unbounded interval or a union of two
intervals, depending on where the pivot's interior local maximum sits
relative to the quantile. For a pair (Y1, Y2) the reparametrization
(nu1, nu2) = (mu1 - mu2, mu1 + mu2) gives correlated standardized residuals
whose quadratic form is chi-squared with two degrees of freedom; scanning
that region and projecting onto nu1 yields a conservative set for the
difference. Plug-in ("naive") intervals are provided for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtri

from .errors import DomainError, NumericalError
from .model import VarianceForm, VarianceModel

DEFAULT_GRID_RES = 0.005

_BISECT_STEPS = 100
_BRACKET_DOUBLINGS = 200


def normal_quantile(p: float) -> float:
    """Standard normal quantile (machine accurate)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile argument must be in (0,1), got {p}")
    return float(ndtri(p))


def chi2_1_quantile(p: float) -> float:
    """Quantile of chi-squared with 1 df, via the normal quantile."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile argument must be in (0,1), got {p}")
    return float(ndtri(0.5 + p / 2.0)) ** 2


def chi2_2_quantile(p: float) -> float:
    """Quantile of chi-squared with 2 df; closed form -2 log(1-p)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile argument must be in (0,1), got {p}")
    return -2.0 * math.log1p(-p)


def chi2_1_sf(x) -> np.ndarray | float:
    """Upper tail of chi-squared with 1 df: P(Z^2 > x) = erfc(sqrt(x/2))."""
    return erfc(np.sqrt(np.asarray(x, dtype=float) / 2.0))


@dataclass(frozen=True)
class ConfidenceSet:
    """One or two disjoint intervals, their hull, and the confidence level.

    Endpoints may be infinite before bounding. approximate marks sets built
    by grid inversion rather than the closed-form search structure.
    """

    components: tuple[tuple[float, float], ...]
    hull: tuple[float, float]
    disconnected: bool
    level: float
    approximate: bool = False

    def __post_init__(self):
        if not self.components:
            raise ValueError("a confidence set needs at least one component")
        for (lo, hi) in self.components:
            if not lo <= hi:
                raise ValueError(f"malformed component ({lo}, {hi})")
        for (_, hi), (lo, _) in zip(self.components, self.components[1:]):
            if hi >= lo:
                raise ValueError("components must be disjoint and sorted")

    @classmethod
    def from_components(cls, components, level, approximate=False):
        comps = tuple(sorted((float(lo), float(hi)) for lo, hi in components))
        hull = (comps[0][0], comps[-1][1])
        return cls(components=comps, hull=hull, disconnected=len(comps) > 1,
                   level=float(level), approximate=approximate)

    def contains(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self.components)

    def bounded(self, a: float, b: float) -> "ConfidenceSet":
        """Intersect every component with [a, b]."""
        kept = [(max(lo, a), min(hi, b)) for lo, hi in self.components
                if max(lo, a) <= min(hi, b)]
        if not kept:
            raise NumericalError(
                f"confidence set empty after bounding to [{a}, {b}]")
        return ConfidenceSet.from_components(kept, self.level, self.approximate)


@dataclass(frozen=True)
class DifferencePivot:
    """Standardized residuals of the difference and sum, and their quadratic form."""

    g_diff: float
    g_sum: float
    rho: float
    g_quad: float


@dataclass(frozen=True)
class PivotCrossings:
    """Quantile crossings of the one-observation pivot, in mean space.

    For two-sided rows the set is (-inf, r1) U (l2, r2) with
    r1 < mu_star < l2 < y < r2; for one-sided rows it is (-inf, r1) and
    l2, r2 are NaN.
    """

    r1: np.ndarray
    l2: np.ndarray
    r2: np.ndarray
    two_sided: np.ndarray


def _pivot_value(mu, y, t1, t2):
    with np.errstate(over="ignore"):
        return (y - mu) ** 2 * np.exp(-t1 - t2 * mu)


def _bisect(lo, hi, y, t1, t2, increasing: bool, q):
    """Lockstep vector bisection for g(mu) = q on a monotone branch."""
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        high_side = _pivot_value(mid, y, t1, t2) >= q
        if increasing:
            hi = np.where(high_side, mid, hi)
            lo = np.where(high_side, lo, mid)
        else:
            lo = np.where(high_side, mid, lo)
            hi = np.where(high_side, hi, mid)
    return 0.5 * (lo + hi)


def exact_pivot_crossings(y, theta1: float, theta2: float, q) -> PivotCrossings:
    """Solve (y-mu)^2 / h(mu) = q for the exp-linear form with theta2 < 0.

    Uses the search structure of the pivot: zero local minimum at y, local
    maximum at mu_star = y + 2/theta2, monotone tails. Vectorized over y;
    q may be scalar or per-element.
    """
    if theta2 >= 0:
        raise DomainError("closed-form pivot inversion requires theta2 < 0")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    q = np.broadcast_to(np.asarray(q, dtype=float), y.shape)
    t1, t2 = float(theta1), float(theta2)

    mu_star = y + 2.0 / t2
    g_star = 4.0 / t2**2 * np.exp(-(2.0 + t1 + t2 * y))
    two = g_star > q

    # Upper crossing, right of y on the increasing branch.
    step = np.sqrt(q * np.exp(t1 + t2 * y)) + 1.0 / abs(t2)
    hi = y + step
    for _ in range(_BRACKET_DOUBLINGS):
        need = _pivot_value(hi, y, t1, t2) < q
        if not np.any(need):
            break
        step = np.where(need, 2.0 * step, step)
        hi = np.where(need, y + step, hi)
    else:
        raise NumericalError("failed to bracket the upper pivot crossing")
    upper = _bisect(y.copy(), hi, y, t1, t2, True, q)

    r1 = upper.copy()
    l2 = np.full_like(y, np.nan)
    r2 = np.full_like(y, np.nan)
    if np.any(two):
        idx = np.flatnonzero(two)
        ys, qs = y[idx], q[idx]
        ms = mu_star[idx]
        # Middle crossing on the decreasing branch (mu_star, y).
        l2[idx] = _bisect(ms.copy(), ys.copy(), ys, t1, t2, False, qs)
        # Left crossing on the increasing branch (-inf, mu_star).
        step = np.full(idx.size, 2.0 / abs(t2))
        lo = ms - step
        for _ in range(_BRACKET_DOUBLINGS):
            need = _pivot_value(lo, ys, t1, t2) > qs
            if not np.any(need):
                break
            step = np.where(need, 2.0 * step, step)
            lo = np.where(need, ms - step, lo)
        else:
            raise NumericalError("failed to bracket the lower pivot crossing")
        r1[idx] = _bisect(lo, ms.copy(), ys, t1, t2, True, qs)
        r2[idx] = upper[idx]
    return PivotCrossings(r1=r1, l2=l2, r2=r2, two_sided=two)


def _exact_components(y: float, model: VarianceModel, alpha: float):
    q = chi2_1_quantile(1.0 - alpha)
    t1, t2 = model.theta
    c = exact_pivot_crossings(np.array([y]), t1, t2, q)
    if c.two_sided[0]:
        return [(-math.inf, float(c.r1[0])), (float(c.l2[0]), float(c.r2[0]))]
    return [(-math.inf, float(c.r1[0]))]


def _grid_components(y: float, model: VarianceModel, alpha: float, bounds):
    """Dense-grid inversion fallback for forms without the search structure."""
    a, b = bounds
    q = chi2_1_quantile(1.0 - alpha)
    grid = np.linspace(a, b, 20001)
    accepted = (y - grid) ** 2 / model(grid) <= q
    if not np.any(accepted):
        raise NumericalError("confidence set empty on the bounded grid")
    comps = []
    for start, stop in _runs(accepted):
        comps.append((grid[start], grid[stop]))
    return comps


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of maximal True runs."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts, stops))


def ci_mu_exact(
    y: float,
    model: VarianceModel,
    alpha: float,
    bounds: tuple[float, float] | None = None,
) -> ConfidenceSet:
    """Exact pivot-inversion confidence set for one mean.

    The closed-form search structure applies to the exp-linear form with a
    negative slope; other shapes fall back to dense grid inversion over the
    bounds (flagged approximate). When bounds are given every component is
    intersected with them.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    exactable = model.form is VarianceForm.EXP_LINEAR and model.theta[1] < 0
    if exactable:
        comps = _exact_components(y, model, alpha)
        approximate = False
    else:
        if bounds is None:
            raise DomainError(
                "grid inversion for this variance form needs finite bounds")
        comps = _grid_components(y, model, alpha, bounds)
        approximate = True
    cs = ConfidenceSet.from_components(comps, 1.0 - alpha, approximate)
    if bounds is not None:
        cs = cs.bounded(*bounds)
    return cs


def ci_mu_naive(y: float, model: VarianceModel, alpha: float) -> tuple[float, float]:
    """Plug-in interval y +- z * sqrt(h(theta, y))."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * math.sqrt(float(model(y)))
    return (y - half, y + half)


def difference_pivot(y1: float, y2: float, model: VarianceModel,
                     nu1: float, nu2: float) -> DifferencePivot:
    """Standardized residuals and quadratic form at a candidate (nu1, nu2)."""
    gd, gs, rho, quad = _quad_form(y1, y2, model,
                                   np.asarray(nu1, dtype=float),
                                   np.asarray(nu2, dtype=float))
    return DifferencePivot(g_diff=float(gd), g_sum=float(gs),
                           rho=float(rho), g_quad=float(quad))


def _quad_form(y1, y2, model, nu1, nu2):
    mu1 = (nu2 + nu1) / 2.0
    mu2 = (nu2 - nu1) / 2.0
    h1 = model(mu1)
    h2 = model(mu2)
    s = h1 + h2
    root = np.sqrt(s)
    gd = (y1 - y2 - nu1) / root
    gs = (y1 + y2 - nu2) / root
    rho = (h1 - h2) / s
    quad = (gd * gd - 2.0 * rho * gd * gs + gs * gs) / (1.0 - rho * rho)
    return gd, gs, rho, quad


def _min_quad_over_nu2(y1, y2, model, nu1, a, b, grid_res):
    """Smallest quadratic-form value over the nuisance sum at a fixed nu1."""
    lo = 2.0 * a + abs(nu1)
    hi = 2.0 * b - abs(nu1)
    if hi < lo:
        return math.inf
    n = max(int(math.ceil((hi - lo) / grid_res)) + 1, 2)
    nu2 = np.linspace(lo, hi, n)
    with np.errstate(invalid="ignore"):
        _, _, _, quad = _quad_form(y1, y2, model, nu1, nu2)
    k = int(np.argmin(quad))
    best = float(quad[k])
    # Golden-section polish of the bracketing cell.
    left = nu2[max(k - 1, 0)]
    right = nu2[min(k + 1, n - 1)]
    c = right - _GOLDEN_RATIO * (right - left)
    d = left + _GOLDEN_RATIO * (right - left)
    for _ in range(60):
        qc = float(_quad_form(y1, y2, model, nu1, c)[3])
        qd = float(_quad_form(y1, y2, model, nu1, d)[3])
        if qc <= qd:
            right, d = d, c
            c = right - _GOLDEN_RATIO * (right - left)
        else:
            left, c = c, d
            d = left + _GOLDEN_RATIO * (right - left)
    mid = 0.5 * (left + right)
    return min(best, float(_quad_form(y1, y2, model, nu1, mid)[3]))


_GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


def _refine_boundary(y1, y2, model, inside, outside, q, a, b, grid_res):
    """Bisect the nu1 membership boundary between an accepted and a rejected point."""
    for _ in range(60):
        mid = 0.5 * (inside + outside)
        if _min_quad_over_nu2(y1, y2, model, mid, a, b, grid_res) <= q:
            inside = mid
        else:
            outside = mid
        if abs(inside - outside) < 1e-10:
            break
    return inside


def ci_diff_region(
    y1: float,
    y2: float,
    model: VarianceModel,
    alpha: float,
    bounds: tuple[float, float],
    grid_res: float = DEFAULT_GRID_RES,
    refine_boundaries: bool = True,
) -> ConfidenceSet:
    """Projection of the exact two-parameter region onto the difference.

    Scans the parallelogram {a <= (nu2 -+ nu1)/2 <= b} on a grid; a
    candidate difference is kept if any nuisance sum puts the quadratic
    form under the chi-squared(2 df) quantile. By default each component
    boundary is then sharpened by bisection between the last accepted and
    first rejected grid points, so endpoints sit on the true projection
    boundary; with refine_boundaries=False the accepted grid extremes are
    reported instead (slightly inside the boundary, by at most one step).
    Conservative for nu1 by the projection property.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    if grid_res <= 0:
        raise DomainError(f"grid_res must be positive, got {grid_res}")
    a, b = bounds
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DomainError(f"region scan needs finite bounds a < b, got {bounds}")
    q = chi2_2_quantile(1.0 - alpha)
    span = b - a
    n1 = int(round(2.0 * span / grid_res)) + 1
    nu1_grid = np.linspace(-span, span, n1)
    nu2_master = np.arange(2.0 * a, 2.0 * b + grid_res / 2.0, grid_res)

    accepted = np.zeros(n1, dtype=bool)
    chunk = 256
    with np.errstate(invalid="ignore"):
        for start in range(0, n1, chunk):
            nu1 = nu1_grid[start:start + chunk, None]
            nu2 = nu2_master[None, :]
            lo = 2.0 * a + np.abs(nu1)
            hi = 2.0 * b - np.abs(nu1)
            _, _, _, quad = _quad_form(y1, y2, model, nu1, nu2)
            quad = np.where((nu2 >= lo - 1e-12) & (nu2 <= hi + 1e-12),
                            quad, np.inf)
            accepted[start:start + chunk] = (quad <= q).any(axis=1)
    runs = _runs(accepted)
    if not runs:
        raise NumericalError(
            "projected confidence set is empty; the observed pair maps "
            "outside the bounded parameter region")
    comps = []
    for i, j in runs:
        lo = nu1_grid[i]
        hi = nu1_grid[j]
        if refine_boundaries:
            if i > 0:
                lo = _refine_boundary(y1, y2, model, lo, nu1_grid[i - 1],
                                      q, a, b, grid_res)
            if j < n1 - 1:
                hi = _refine_boundary(y1, y2, model, hi, nu1_grid[j + 1],
                                      q, a, b, grid_res)
        comps.append((lo, hi))
    return ConfidenceSet.from_components(comps, 1.0 - alpha)


def ci_diff_bonferroni(
    y1: float,
    y2: float,
    model: VarianceModel,
    alpha: float,
    bounds: tuple[float, float],
) -> tuple[float, float]:
    """Difference interval from two exact half-alpha sets, via their hulls."""
    s1 = ci_mu_exact(y1, model, alpha / 2.0, bounds)
    s2 = ci_mu_exact(y2, model, alpha / 2.0, bounds)
    (lo1, hi1), (lo2, hi2) = s1.hull, s2.hull
    return (lo1 - hi2, hi1 - lo2)


def ci_diff_naive(y1: float, y2: float, model: VarianceModel,
                  alpha: float) -> tuple[float, float]:
    """Plug-in interval for the difference of two means."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * math.sqrt(float(model(y1)) + float(model(y2)))
    d = y1 - y2
    return (d - half, d + half)


def ratio_scale(interval: tuple[float, float]) -> tuple[float, float]:
    """Map a log-scale interval to the ratio (natural) scale."""
    return (math.exp(interval[0]), math.exp(interval[1]))


def bounded_hulls(y, model: VarianceModel, alpha, a: float, b: float):
    """Vectorized hulls of bounded exact sets, for batch constructions.

    Returns (lo, hi, empty): per-element hull endpoints of the exact pivot
    set intersected with [a, b], and a mask of elements whose bounded set is
    empty. Exp-linear with negative slope only.
    """
    t1, t2 = model.theta
    if model.form is not VarianceForm.EXP_LINEAR or t2 >= 0:
        raise DomainError("vectorized hulls need the exp-linear form with "
                          "a negative slope")
    q = chi2_1_quantile(1.0 - alpha) if np.isscalar(alpha) else np.asarray(
        [chi2_1_quantile(1.0 - al) for al in alpha])
    c = exact_pivot_crossings(y, t1, t2, q)
    # Component 1: (-inf, r1) clipped -> [a, min(r1, b)], present iff r1 >= a.
    has1 = c.r1 >= a
    # Component 2: (l2, r2) clipped, only for two-sided rows.
    lo2 = np.maximum(c.l2, a)
    hi2 = np.minimum(c.r2, b)
    has2 = c.two_sided & (lo2 <= hi2)
    empty = ~(has1 | has2)
    lo = np.where(has1, a, lo2)
    hi = np.where(has2, hi2, np.minimum(c.r1, b))
    return lo, hi, empty
