"""Quadrature, uniform grids, a discrete convex conjugate, and a weighted
spectral-gap eigensolver.

Everything in this module is a pure function of its inputs.  Grids and
quadrature rules are frozen after construction and safe to share between
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special
from scipy.linalg import eigh_tridiagonal

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Half-width of the default truncation window.  The standard-Gaussian tail
# mass beyond +/-8 is below 1e-14, so Neumann truncation there is invisible
# at the tolerances used throughout.  Windows for wider measures are scaled
# by their standard deviation (see transport/kesolver).
DEFAULT_DOMAIN = 8.0
DEFAULT_GRID_NODES = 4001
DEFAULT_GH_NODES = 200

# log(g) values below this are treated as an exact zero of the density.
LOG_FLOOR = -700.0


class IntegrationError(RuntimeError):
    """An integrand was non-finite at a quadrature node."""


class EigensolverError(RuntimeError):
    """The spectral-gap eigenproblem could not be solved reliably."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``n`` nodes on ``[lo, hi]``."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 3:
            raise ValueError(f"need at least 3 nodes, got n={self.n}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def refined(self) -> "Grid1D":
        """Same interval at doubled resolution; the new grid shares every node."""
        return Grid1D(self.lo, self.hi, 2 * self.n - 1)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights for one of the two reference measures.

    ``measure`` is ``"gaussian"`` (weights sum to one, expectations against
    the standard Gaussian) or ``"lebesgue"`` (plain weighted sums).
    """

    nodes: np.ndarray
    weights: np.ndarray
    measure: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1d arrays of equal length")
        if nodes.size < 2:
            raise ValueError("a quadrature rule needs at least 2 nodes")
        if not np.all(weights > 0):
            raise ValueError("quadrature weights must be positive")
        if self.measure not in ("gaussian", "lebesgue"):
            raise ValueError(f"unknown measure tag {self.measure!r}")
        if self.measure == "gaussian" and abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("gaussian-measure weights must sum to 1 within 1e-12")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.nodes.size


@lru_cache(maxsize=64)
def gauss_hermite(n: int) -> QuadratureRule:
    """Gauss quadrature with ``n`` nodes for the standard Gaussian measure.

    Exact for polynomials of degree up to ``2n - 1``.  Nodes and weights come
    from the physicists' Hermite rule rescaled to unit variance and unit
    total mass.
    """
    if not 2 <= n <= 2000:
        raise ValueError(f"node count must be in [2, 2000], got {n}")
    t, v = special.roots_hermite(n)
    # weights of extreme nodes underflow for n >= ~400; such nodes carry no
    # mass in double precision and are dropped
    keep = v > 0.0
    return QuadratureRule(
        nodes=t[keep] * math.sqrt(2.0),
        weights=v[keep] / math.sqrt(math.pi),
        measure="gaussian",
    )


def default_gamma_rule() -> QuadratureRule:
    return gauss_hermite(DEFAULT_GH_NODES)


def simpson_rule(grid: Grid1D) -> QuadratureRule:
    """Composite Simpson rule on a uniform grid (odd node count required)."""
    if grid.n % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of nodes")
    w = np.ones(grid.n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= grid.spacing / 3.0
    return QuadratureRule(nodes=grid.nodes, weights=w, measure="lebesgue")


def integrate(f: Callable, rule: QuadratureRule) -> float:
    """Weighted sum of ``f`` over the rule's nodes.

    ``f`` must accept an ndarray.  A non-finite value raises
    :class:`IntegrationError` naming the offending node.
    """
    vals = np.asarray(f(rule.nodes), dtype=float)
    if vals.shape != rule.nodes.shape:
        raise ValueError("integrand must return one value per node")
    bad = ~np.isfinite(vals)
    if bad.any():
        where = rule.nodes[bad][:3]
        raise IntegrationError(
            f"integrand non-finite at node(s) {np.round(where, 6).tolist()}"
        )
    return float(np.dot(rule.weights, vals))


def integrate_gamma(f: Callable, rule: QuadratureRule | None = None) -> float:
    """Expectation of ``f`` under the standard Gaussian measure."""
    rule = default_gamma_rule() if rule is None else rule
    if rule.measure != "gaussian":
        raise ValueError("integrate_gamma requires a gaussian-measure rule")
    return integrate(f, rule)


def _lower_hull(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of the points (x_i, f_i); x ascending."""
    keep: list[int] = []
    for i in range(x.size):
        # keep secant slopes strictly increasing
        while len(keep) >= 2:
            i0, i1 = keep[-2], keep[-1]
            if (f[i1] - f[i0]) * (x[i] - x[i1]) >= (f[i] - f[i1]) * (x[i1] - x[i0]):
                keep.pop()
            else:
                break
        keep.append(i)
    return np.asarray(keep, dtype=np.intp)


def convex_envelope(x, values) -> np.ndarray:
    """Greatest convex minorant of the grid values, evaluated on the grid."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(values, dtype=float)
    hull = _lower_hull(x, f)
    return np.interp(x, x[hull], f[hull])


def legendre_transform(x, values, y) -> np.ndarray:
    """Convex conjugate ``max_i (x_i * q - f_i)`` evaluated at each ``q`` in ``y``.

    Runs the monotone-slope scan over the lower convex hull, so the cost is
    linear in the two grid sizes.  Input values equal to ``+inf`` are treated
    as points outside the effective domain.  Outputs are set to the sentinel
    ``+inf`` wherever the maximizer sits on the boundary of the grid, i.e.
    where the conjugate of the underlying function is not determined by (or
    is unbounded beyond) the sampled window.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(values, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != f.shape:
        raise ValueError("x and values must be 1d arrays of equal length")
    if np.any(f == -np.inf) or np.any(np.isnan(f)):
        raise ValueError("values must be finite or the +inf sentinel")
    finite = np.isfinite(f)
    if not finite.any():
        raise ValueError("empty effective domain: no finite values")
    xs, fs = x[finite], f[finite]
    hull = _lower_hull(xs, fs)
    hx, hf = xs[hull], fs[hull]
    if hx.size == 1:
        return hx[0] * y - hf[0]
    slopes = np.diff(hf) / np.diff(hx)
    k = np.clip(np.searchsorted(slopes, y), 0, hx.size - 1)
    out = hx[k] * y - hf[k]
    return np.where((y < slopes[0]) | (y > slopes[-1]), np.inf, out)


def spectral_gap(log_density: Callable, grid: Grid1D) -> float:
    """Smallest nonzero Neumann eigenvalue of ``f -> -f'' + W' f'``.

    ``W = -log_density`` up to an additive constant (the constant drops out),
    where ``log_density`` is the log of the Lebesgue density of the measure,
    evaluated vectorized on ``grid``.  The reciprocal of the returned value
    is the Poincare constant of the measure restricted to the window.

    The discretization is the flux form of the associated Dirichlet form;
    matrix entries only involve local differences of ``W``, so steep
    potentials cannot overflow.
    """
    xnodes = grid.nodes
    h = grid.spacing
    n = grid.n
    w_pot = -np.asarray(log_density(xnodes), dtype=float)
    w_mid = -np.asarray(log_density(0.5 * (xnodes[:-1] + xnodes[1:])), dtype=float)
    if not (np.all(np.isfinite(w_pot)) and np.all(np.isfinite(w_mid))):
        raise EigensolverError("log density non-finite on the grid")

    cell = np.full(n, h)
    cell[0] = cell[-1] = 0.5 * h
    off = -np.exp(-w_mid + 0.5 * (w_pot[:-1] + w_pot[1:])) / (
        h * np.sqrt(cell[:-1] * cell[1:])
    )
    diag = np.zeros(n)
    diag[:-1] += np.exp(-w_mid + w_pot[:-1]) / (h * cell[:-1])
    diag[1:] += np.exp(-w_mid + w_pot[1:]) / (h * cell[1:])

    try:
        vals = eigh_tridiagonal(
            diag, off, select="i", select_range=(0, 1), eigvals_only=True
        )
    except Exception as exc:  # pragma: no cover - scipy failure path
        raise EigensolverError(f"tridiagonal eigensolver failed: {exc}") from exc
    null, gap = float(vals[0]), float(vals[1])
    if gap <= 0:
        raise EigensolverError(f"nonpositive spectral gap {gap}")
    if abs(null) > 1e-6 * max(1.0, gap):
        raise EigensolverError(
            f"constant mode not resolved (lambda0={null:.3e}, gap={gap:.3e})"
        )
    return gap


def cumulative_hermite(x: np.ndarray, f: np.ndarray, fprime: np.ndarray) -> np.ndarray:
    """Antiderivative of ``f`` on a uniform grid, zero at the first node.

    Integrates the cubic Hermite interpolant exactly; with exact derivative
    data the global error is O(spacing^4).
    """
    h = np.diff(x)
    inc = 0.5 * h * (f[:-1] + f[1:]) + h * h * (fprime[:-1] - fprime[1:]) / 12.0
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    return out
