"""Probability densities relative to the standard Gaussian measure.

A :class:`RelativeDensity` bundles ``log g`` and its first two derivatives
for a measure ``nu = g * gamma``, together with CDF/quantile machinery and
optional exact metadata (moments, Poincare and log-Sobolev constants, the
sup of g).  Analytic families carry closed-form CDFs; everything else falls
back to a high-order numeric CDF built from the interpolated density.

Instances are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import minimize_scalar

from .numerics import (
    DEFAULT_DOMAIN,
    DEFAULT_GRID_NODES,
    HALF_LOG_2PI,
    LOG_FLOOR,
    Grid1D,
    QuadratureRule,
    cumulative_hermite,
    default_gamma_rule,
    simpson_rule,
)

FULL_LINE = (-math.inf, math.inf)

# Narrowest mixture component the default working grid resolves (4 spacings).
MIN_COMPONENT_SIGMA = 4.0 * 2.0 * DEFAULT_DOMAIN / (DEFAULT_GRID_NODES - 1)

_SCORE_CHECK_SEED = 20240
_CDF_TABLE_NODES = 16001


@dataclass(frozen=True)
class DensityMetadata:
    """Exact (or explicitly-provenanced numeric) facts about a density."""

    mean: Optional[float] = None
    variance: Optional[float] = None
    c_poincare: Optional[float] = None
    c_lsi: Optional[float] = None
    sup_g: Optional[float] = None


def gamma_logpdf(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - HALF_LOG_2PI


def gamma_pdf(x) -> np.ndarray:
    return np.exp(gamma_logpdf(x))


@dataclass(frozen=True, eq=False)
class RelativeDensity:
    """Density ``g`` of a probability measure ``nu = g * gamma`` on the line.

    ``log_g``/``dlog_g``/``d2log_g`` must be vectorized over ndarrays;
    ``dlog_g`` is the score ``g'/g``.  ``d2log_g`` is optional; operations
    needing second-order smoothness declare themselves unavailable when it
    is missing.
    """

    log_g: Callable
    dlog_g: Callable
    d2log_g: Optional[Callable] = None
    support: tuple = FULL_LINE
    metadata: Optional[DensityMetadata] = None
    exact_cdf: Optional[Callable] = None
    exact_quantile: Optional[Callable] = None
    exact_sf: Optional[Callable] = None
    exact_isf: Optional[Callable] = None
    preferred_rule: Optional[QuadratureRule] = None
    label: str = ""

    # -- pointwise evaluation -------------------------------------------------

    def g(self, x) -> np.ndarray:
        return np.exp(self.log_g(np.asarray(x, dtype=float)))

    def lebesgue_logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.log_g(x) - 0.5 * x * x - HALF_LOG_2PI

    def lebesgue_pdf(self, x) -> np.ndarray:
        return np.exp(self.lebesgue_logpdf(x))

    def lebesgue_dpdf(self, x) -> np.ndarray:
        """Derivative of the Lebesgue density."""
        x = np.asarray(x, dtype=float)
        return (self.dlog_g(x) - x) * self.lebesgue_pdf(x)

    def rule(self) -> QuadratureRule:
        return self.preferred_rule if self.preferred_rule is not None else default_gamma_rule()

    # -- moments ---------------------------------------------------------------

    def expect(self, fn: Callable, rule: QuadratureRule | None = None) -> float:
        """Expectation of ``fn`` under ``nu``; integrand masked where g vanishes."""
        rule = rule if rule is not None else self.rule()
        x = rule.nodes
        logw = self.log_g(x)
        if rule.measure == "lebesgue":
            logw = logw - 0.5 * x * x - HALF_LOG_2PI
        mask = logw > LOG_FLOOR
        vals = np.zeros_like(x)
        vals[mask] = fn(x[mask])
        if not np.all(np.isfinite(vals[mask])):
            raise ValueError("integrand non-finite where the density has mass")
        return float(np.sum(rule.weights[mask] * np.exp(logw[mask]) * vals[mask]))

    def mean(self) -> float:
        if self.metadata is not None and self.metadata.mean is not None:
            return self.metadata.mean
        return self.expect(lambda t: t)

    def variance(self) -> float:
        if self.metadata is not None and self.metadata.variance is not None:
            return self.metadata.variance
        m = self.mean()
        return self.expect(lambda t: (t - m) ** 2)

    def std(self) -> float:
        return math.sqrt(max(self.variance(), 0.0))

    # -- cdf / quantile ----------------------------------------------------------

    @cached_property
    def _tables(self):
        """Dense (nodes, cdf, sf, pdf) table bracketing quantile/isf solves.

        The distribution and survival functions are accumulated separately
        (from the left and from the right), so each keeps full *relative*
        accuracy deep into its own tail.
        """
        center = self.mean()
        radius = 9.0 * max(self.std(), 0.25) + 1.0
        lo = max(self.support[0], center - radius)
        hi = min(self.support[1], center + radius)
        xs = np.linspace(lo, hi, _CDF_TABLE_NODES)
        pdf = self.lebesgue_pdf(xs)
        dpdf = self.lebesgue_dpdf(xs)
        h = np.diff(xs)
        inc = 0.5 * h * (pdf[:-1] + pdf[1:]) + h * h * (dpdf[:-1] - dpdf[1:]) / 12.0
        inc = np.maximum(inc, 0.0)

        def _tail(edge_idx: int, bounded: bool) -> float:
            if bounded:
                return 0.0
            point = np.array([xs[edge_idx]])
            slope = abs(float(self.dlog_g(point)[0] - point[0]))
            return float(pdf[edge_idx]) / max(slope, 1.0)

        cdf = np.empty_like(xs)
        cdf[0] = _tail(0, self.support[0] > -math.inf and lo <= self.support[0] + 1e-12)
        np.cumsum(inc, out=cdf[1:])
        cdf[1:] += cdf[0]
        sf = np.empty_like(xs)
        sf[-1] = _tail(-1, self.support[1] < math.inf and hi >= self.support[1] - 1e-12)
        sf[:-1] = np.cumsum(inc[::-1])[::-1] + sf[-1]
        return xs, np.clip(cdf, 0.0, 1.0), np.clip(sf, 0.0, 1.0), pdf

    @cached_property
    def _cdf_spline(self):
        xs, cdf, _, pdf = self._tables
        return CubicHermiteSpline(xs, cdf, pdf)

    @cached_property
    def _sf_spline(self):
        xs, _, sf, pdf = self._tables
        return CubicHermiteSpline(xs, sf, -pdf)

    def cdf(self, x) -> np.ndarray:
        """Distribution function of ``nu``; vectorized."""
        x = np.asarray(x, dtype=float)
        if self.exact_cdf is not None:
            return np.clip(self.exact_cdf(x), 0.0, 1.0)
        xs, cdf, _, _ = self._tables
        out = self._cdf_spline(np.clip(x, xs[0], xs[-1]))
        out = np.where(x < xs[0], cdf[0], out)
        out = np.where(x > xs[-1], cdf[-1], out)
        return np.clip(out, 0.0, 1.0)

    def sf(self, x) -> np.ndarray:
        """Survival function ``1 - cdf``, accurate in the upper tail."""
        x = np.asarray(x, dtype=float)
        if self.exact_sf is not None:
            return np.clip(self.exact_sf(x), 0.0, 1.0)
        if self.exact_cdf is not None:
            return np.clip(1.0 - self.exact_cdf(x), 0.0, 1.0)
        xs, _, sf, _ = self._tables
        out = self._sf_spline(np.clip(x, xs[0], xs[-1]))
        out = np.where(x < xs[0], sf[0], out)
        out = np.where(x > xs[-1], sf[-1], out)
        return np.clip(out, 0.0, 1.0)

    def quantile(self, p) -> np.ndarray:
        """Inverse CDF; requires ``0 < p < 1`` elementwise."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("quantile requires probabilities strictly inside (0, 1)")
        if self.exact_quantile is not None:
            return np.asarray(self.exact_quantile(p), dtype=float)
        return self._quantile_numeric(p)

    def isf(self, q) -> np.ndarray:
        """Inverse survival function; the upper-tail-accurate quantile."""
        q = np.asarray(q, dtype=float)
        if np.any((q <= 0.0) | (q >= 1.0)):
            raise ValueError("isf requires levels strictly inside (0, 1)")
        if self.exact_isf is not None:
            return np.asarray(self.exact_isf(q), dtype=float)
        return self._isf_numeric(q)

    def _quantile_numeric(self, p: np.ndarray) -> np.ndarray:
        xs, cdf, _, _ = self._tables
        step_x = xs[1] - xs[0]
        pc = np.clip(p, max(cdf[0], 1e-300), min(cdf[-1], 1.0 - 1e-16))
        j = np.clip(np.searchsorted(cdf, pc), 1, xs.size - 1)
        # pad by one cell: the table and the exact cdf may disagree slightly
        lo = xs[j - 1] - step_x
        hi = xs[j] + step_x
        dF = np.maximum(cdf[j] - cdf[j - 1], 1e-300)
        x = xs[j - 1] + step_x * (pc - cdf[j - 1]) / dF
        # safeguarded Newton: keep the bracket, bisect when a step escapes it
        for _ in range(12):
            fx = self.cdf(x) - pc
            lo = np.where(fx <= 0, x, lo)
            hi = np.where(fx > 0, x, hi)
            step = fx / np.maximum(self.lebesgue_pdf(x), 1e-300)
            converged = np.abs(step) <= 1e-15 * (1.0 + np.abs(x))
            xn = np.where(converged, x, x - step)
            bad = (xn < lo) | (xn > hi) | ~np.isfinite(xn)
            x = np.where(bad, 0.5 * (lo + hi), xn)
        return x

    def _isf_numeric(self, q: np.ndarray) -> np.ndarray:
        xs, _, sf, _ = self._tables
        step_x = xs[1] - xs[0]
        qc = np.clip(q, max(sf[-1], 1e-300), min(sf[0], 1.0 - 1e-16))
        # sf decreases in x; bracket via the ascending reversed table
        k = np.clip(np.searchsorted(sf[::-1], qc), 1, xs.size - 1)
        lo = xs[xs.size - 1 - k] - step_x
        hi = xs[np.minimum(xs.size - k, xs.size - 1)] + step_x
        x = 0.5 * (lo + hi)
        for _ in range(12):
            fx = self.sf(x) - qc
            lo = np.where(fx >= 0, x, lo)
            hi = np.where(fx < 0, x, hi)
            step = fx / np.maximum(self.lebesgue_pdf(x), 1e-300)
            converged = np.abs(step) <= 1e-15 * (1.0 + np.abs(x))
            xn = np.where(converged, x, x + step)
            bad = (xn < lo) | (xn > hi) | ~np.isfinite(xn)
            x = np.where(bad, 0.5 * (lo + hi), xn)
        return x

    def tail_quantile_functions(
        self, p_floor: float = 1e-18
    ) -> tuple[Callable[[float], float], Callable[[float], float]]:
        """Fast scalar quantile evaluators for ODE inner loops.

        Returns ``(from_cdf, from_sf)``: the first maps a lower-tail CDF
        level to the quantile, the second an upper-tail survivor level.
        Each interpolates in the log of its level, where the quantile is
        smooth and slowly varying, and costs one spline call per
        evaluation.  Levels below ``p_floor`` clamp to the end value.
        """
        u = np.linspace(math.log(p_floor), math.log(0.75), 2401)
        lev = np.exp(u)
        q_lo = self.quantile(lev)
        slope_lo = lev / np.maximum(self.lebesgue_pdf(q_lo), 1e-300)
        spline_lo = CubicHermiteSpline(u, q_lo, slope_lo)
        q_hi = self.isf(lev)
        slope_hi = -lev / np.maximum(self.lebesgue_pdf(q_hi), 1e-300)
        spline_hi = CubicHermiteSpline(u, q_hi, slope_hi)
        lo_end, lo_cap = float(q_lo[0]), float(q_lo[-1])
        hi_end, hi_cap = float(q_hi[0]), float(q_hi[-1])
        log_cap = math.log(0.75)

        def from_cdf(level: float) -> float:
            if level <= p_floor:
                return lo_end
            u_val = math.log(level)
            if u_val >= log_cap:
                return lo_cap
            return float(spline_lo(u_val))

        def from_sf(level: float) -> float:
            if level <= p_floor:
                return hi_end
            u_val = math.log(level)
            if u_val >= log_cap:
                return hi_cap
            return float(spline_hi(u_val))

        return from_cdf, from_sf

    # -- invariants ---------------------------------------------------------------

    def check_invariants(self) -> None:
        """Normalization and score consistency; raises on violation."""
        total = self.expect(lambda t: np.ones_like(t))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"density not normalized: integral = {total!r}")
        rng = np.random.default_rng(_SCORE_CHECK_SEED)
        lo = max(self.support[0], -3.0)
        hi = min(self.support[1], 3.0)
        pts = rng.uniform(lo + 0.01, hi - 0.01, 20)
        h = 1e-5
        fd = (self.log_g(pts + h) - self.log_g(pts - h)) / (2.0 * h)
        err = np.max(np.abs(fd - self.dlog_g(pts)) / np.maximum(1.0, np.abs(fd)))
        if err > 1e-5:
            raise ValueError(f"score inconsistent with log density (err={err:.2e})")


# -- analytic families -------------------------------------------------------------


def gaussian(mean: float = 0.0, sigma: float = 1.0, *, validate: bool = True) -> RelativeDensity:
    """Relative density of ``N(mean, sigma^2)`` with exact CDF and metadata."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    m, s = float(mean), float(sigma)
    inv2 = 1.0 / (s * s)

    def log_g(x):
        x = np.asarray(x, dtype=float)
        return -math.log(s) - 0.5 * (x - m) ** 2 * inv2 + 0.5 * x * x

    def dlog_g(x):
        x = np.asarray(x, dtype=float)
        return x - (x - m) * inv2

    def d2log_g(x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, 1.0 - inv2)

    if s < 1.0:
        x_star = m / (1.0 - s * s)
        sup_g = float(np.exp(log_g(np.array([x_star]))[0]))
    elif s == 1.0 and m == 0.0:
        sup_g = 1.0
    else:
        sup_g = None  # relative density unbounded

    dens = RelativeDensity(
        log_g=log_g,
        dlog_g=dlog_g,
        d2log_g=d2log_g,
        metadata=DensityMetadata(
            mean=m, variance=s * s, c_poincare=s * s, c_lsi=2.0 * s * s, sup_g=sup_g
        ),
        exact_cdf=lambda x: special.ndtr((np.asarray(x, dtype=float) - m) / s),
        exact_quantile=lambda p: m + s * special.ndtri(np.asarray(p, dtype=float)),
        exact_sf=lambda x: special.ndtr(-(np.asarray(x, dtype=float) - m) / s),
        exact_isf=lambda q: m - s * special.ndtri(np.asarray(q, dtype=float)),
        label=f"gaussian(mean={m:g}, sigma={s:g})",
    )
    if validate:
        dens.check_invariants()
    return dens


def scaled_gaussian(lam: float, *, validate: bool = True) -> RelativeDensity:
    """The family ``g = sqrt(lam) * exp((1-lam) x^2 / 2)``, i.e. ``nu = N(0, 1/lam)``."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    dens = gaussian(0.0, 1.0 / math.sqrt(lam), validate=validate)
    return replace(dens, label=f"scaled_gaussian(lam={lam:g})")


def standard() -> RelativeDensity:
    """g identically one: nu = gamma."""
    return replace(scaled_gaussian(1.0, validate=False), label="standard")


def gaussian_mixture(
    weights: Sequence[float],
    means: Sequence[float],
    sigmas: Sequence[float],
    *,
    validate: bool = True,
) -> RelativeDensity:
    """Relative density of a finite Gaussian mixture.

    Weights must be positive and sum to one; components narrower than four
    default grid spacings are rejected as unresolvable.
    """
    w = np.asarray(weights, dtype=float)
    m = np.asarray(means, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
        raise ValueError("weights, means, sigmas must be equal-length 1d sequences")
    if np.any(w <= 0):
        raise ValueError("mixture weights must be positive")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"mixture weights must sum to 1, got {w.sum()!r}")
    w = w / w.sum()
    if np.any(s <= 0):
        raise ValueError("component sigmas must be positive")
    if np.any(s < MIN_COMPONENT_SIGMA):
        raise ValueError(
            f"component sigma below {MIN_COMPONENT_SIGMA:g} is not resolved by the "
            "working grid"
        )

    log_w = np.log(w) - np.log(s) - HALF_LOG_2PI

    def _log_pdf_terms(x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - m) / s
        return log_w - 0.5 * z * z, z

    def log_g(x):
        x = np.asarray(x, dtype=float)
        terms, _ = _log_pdf_terms(x)
        lead = terms.max(axis=-1)
        lse = lead + np.log(np.sum(np.exp(terms - lead[..., None]), axis=-1))
        return lse + 0.5 * x * x + HALF_LOG_2PI

    def _posterior(x):
        terms, z = _log_pdf_terms(x)
        lead = terms.max(axis=-1, keepdims=True)
        r = np.exp(terms - lead)
        r /= r.sum(axis=-1, keepdims=True)
        return r, z

    def dlog_g(x):
        x = np.asarray(x, dtype=float)
        r, z = _posterior(x)
        score = np.sum(r * (-z / s), axis=-1)
        return score + x

    def d2log_g(x):
        x = np.asarray(x, dtype=float)
        r, z = _posterior(x)
        a = -z / s
        first = np.sum(r * a, axis=-1)
        second = np.sum(r * (a * a - 1.0 / (s * s)), axis=-1)
        return second - first * first + 1.0

    mean_exact = float(np.dot(w, m))
    var_exact = float(np.dot(w, s * s + m * m) - mean_exact**2)

    def exact_cdf(x):
        x = np.asarray(x, dtype=float)
        return np.sum(w * special.ndtr((x[..., None] - m) / s), axis=-1)

    def exact_sf(x):
        x = np.asarray(x, dtype=float)
        return np.sum(w * special.ndtr(-(x[..., None] - m) / s), axis=-1)

    dens = RelativeDensity(
        log_g=log_g,
        dlog_g=dlog_g,
        d2log_g=d2log_g,
        metadata=DensityMetadata(mean=mean_exact, variance=var_exact),
        exact_cdf=exact_cdf,
        exact_sf=exact_sf,
        label=f"gaussian_mixture(k={w.size})",
    )
    if np.all(s < 1.0):
        dens = replace(
            dens,
            metadata=replace(dens.metadata, sup_g=numeric_sup_g(dens)),
        )
    if validate:
        dens.check_invariants()
    return dens


def quartic_perturbation(
    strength: float, shift: float = 0.0, *, validate: bool = True
) -> RelativeDensity:
    """Log-concave tilt ``g ~ exp(-strength * (x - shift)^4)``, normalized."""
    if strength <= 0:
        raise ValueError(f"strength must be positive, got {strength}")
    a, b = float(strength), float(shift)
    rule = default_gamma_rule()
    z = float(np.dot(rule.weights, np.exp(-a * (rule.nodes - b) ** 4)))
    log_z = math.log(z)

    def log_g(x):
        x = np.asarray(x, dtype=float)
        return -a * (x - b) ** 4 - log_z

    def dlog_g(x):
        x = np.asarray(x, dtype=float)
        return -4.0 * a * (x - b) ** 3

    def d2log_g(x):
        x = np.asarray(x, dtype=float)
        return -12.0 * a * (x - b) ** 2

    dens = RelativeDensity(
        log_g=log_g,
        dlog_g=dlog_g,
        d2log_g=d2log_g,
        metadata=DensityMetadata(sup_g=math.exp(-log_z)),
        label=f"quartic_perturbation(strength={a:g}, shift={b:g})",
    )
    if validate:
        dens.check_invariants()
    return dens


def from_grid(
    grid: Grid1D, log_g_values, *, normalize: bool = True, validate: bool = True
) -> RelativeDensity:
    """Density backed by grid samples of ``log g``.

    Interpolation is shape-preserving cubic (monotone-safe); the score comes
    from differentiating the interpolant.  The support is the grid window:
    evaluation outside it raises rather than extrapolating.  No second
    derivative is exposed, so second-order operations report themselves
    unavailable on grid densities.
    """
    vals = np.asarray(log_g_values, dtype=float)
    if vals.shape != (grid.n,):
        raise ValueError("log_g_values must have one entry per grid node")
    if not np.all(np.isfinite(vals)):
        raise ValueError("log_g_values must be finite")
    rule = simpson_rule(grid)
    if normalize:
        total = float(
            np.dot(rule.weights, np.exp(vals + gamma_logpdf(grid.nodes)))
        )
        vals = vals - math.log(total)
    interp = PchipInterpolator(grid.nodes, vals, extrapolate=False)
    dinterp = interp.derivative()
    lo, hi = grid.lo, grid.hi

    def _guard(x):
        x = np.asarray(x, dtype=float)
        if np.any((x < lo - 1e-12) | (x > hi + 1e-12)):
            raise ValueError(f"evaluation outside the support [{lo}, {hi}]")
        return np.clip(x, lo, hi)

    dens = RelativeDensity(
        log_g=lambda x: interp(_guard(x)),
        dlog_g=lambda x: dinterp(_guard(x)),
        d2log_g=None,
        support=(lo, hi),
        preferred_rule=rule,
        label="grid_density",
    )
    if validate:
        dens.check_invariants()
    return dens


# -- transforms ----------------------------------------------------------------------


def translate(dens: RelativeDensity, offset: float) -> RelativeDensity:
    """Relative density of the measure translated by ``offset``.

    Acts on the underlying measure (``rho_new(x) = rho(x - offset)``) and
    recomputes the Gaussian-relative density, so CDF/quantile machinery and
    translation-invariant metadata carry over exactly.
    """
    if offset == 0.0:
        return dens
    c = float(offset)
    base_log, base_dlog, base_d2 = dens.log_g, dens.dlog_g, dens.d2log_g

    def log_g(x):
        x = np.asarray(x, dtype=float)
        return base_log(x - c) + c * x - 0.5 * c * c

    def dlog_g(x):
        x = np.asarray(x, dtype=float)
        return base_dlog(x - c) + c

    d2log_g = (lambda x: base_d2(np.asarray(x, dtype=float) - c)) if base_d2 else None

    meta = dens.metadata
    new_meta = None
    if meta is not None:
        new_meta = DensityMetadata(
            mean=None if meta.mean is None else meta.mean + c,
            variance=meta.variance,
            c_poincare=meta.c_poincare,
            c_lsi=meta.c_lsi,
            sup_g=None,  # not translation invariant; recomputed by recenter
        )
    def _shift_in(fn):
        return None if fn is None else (lambda x: fn(np.asarray(x, dtype=float) - c))

    def _shift_out(fn):
        return None if fn is None else (lambda p: fn(p) + c)

    lo, hi = dens.support
    return RelativeDensity(
        log_g=log_g,
        dlog_g=dlog_g,
        d2log_g=d2log_g,
        support=(lo + c, hi + c),
        metadata=new_meta,
        exact_cdf=_shift_in(dens.exact_cdf),
        exact_quantile=_shift_out(dens.exact_quantile),
        exact_sf=_shift_in(dens.exact_sf),
        exact_isf=_shift_out(dens.exact_isf),
        preferred_rule=None,
        label=dens.label + f"+shift({c:g})",
    )


def recenter(dens: RelativeDensity, *, validate: bool = True) -> RelativeDensity:
    """Translate the underlying measure so its barycenter vanishes."""
    m = dens.mean()
    if not math.isfinite(m):
        raise ValueError("first moment not finite; cannot recenter")
    if abs(m) <= 1e-12:
        return dens
    out = translate(dens, -m)
    had_sup = dens.metadata is not None and dens.metadata.sup_g is not None
    if had_sup:
        out = replace(out, metadata=replace(out.metadata, sup_g=numeric_sup_g(out)))
    if out.metadata is not None:
        out = replace(out, metadata=replace(out.metadata, mean=0.0))
    if validate:
        out.check_invariants()
    return out


def numeric_sup_g(dens: RelativeDensity, radius: float = 30.0) -> Optional[float]:
    """Numeric sup of g for densities with Gaussian-or-faster relative decay.

    Scans a wide window and polishes the maximum; returns ``None`` when the
    scan does not confirm decay at the window edges (sup possibly infinite).
    """
    lo = max(dens.support[0], -radius)
    hi = min(dens.support[1], radius)
    xs = np.linspace(lo, hi, 20001)
    vals = dens.log_g(xs)
    k = int(np.argmax(vals))
    if vals[k] < max(vals[0], vals[-1]) + 10.0:
        return None
    a = xs[max(k - 2, 0)]
    b = xs[min(k + 2, xs.size - 1)]
    res = minimize_scalar(
        lambda t: -float(dens.log_g(np.array([t]))[0]),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(np.exp(-res.fun))
