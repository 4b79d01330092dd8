"""Entropy, Fisher information, the score-displacement cross term, Poincare
constants, and the Cheeger / Brascamp-Lieb variance checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .densities import RelativeDensity
from .numerics import (
    LOG_FLOOR,
    EigensolverError,
    Grid1D,
    QuadratureRule,
    default_gamma_rule,
    integrate_gamma,
    simpson_rule,
    spectral_gap,
)
from .transport import TransportPlan1D

SPECTRAL_BASE_NODES = 2001
SPECTRAL_DRIFT_TOL = 1e-4


class HypothesisNotMet(ValueError):
    """A stated hypothesis of the inequality fails on this input."""


class NotAvailable(RuntimeError):
    """A required exact constant or evaluator is not available."""


@dataclass(frozen=True)
class FunctionalValues:
    """The scalar functionals of one density, with constant provenance."""

    ent: float
    fisher: float
    cross: float
    cp: float
    cp_provenance: str
    clsi: Optional[float] = None
    clsi_provenance: Optional[str] = None


def entropy(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """Relative entropy ``int g log g dgamma`` (zero for g identically one)."""
    rule = rule if rule is not None else g.rule()
    x = rule.nodes
    logg = g.log_g(x)
    if rule.measure == "lebesgue":
        logw = logg - 0.5 * x * x - 0.5 * math.log(2.0 * math.pi)
    else:
        logw = logg
    mask = logw > LOG_FLOOR
    vals = np.exp(logw[mask]) * logg[mask]
    if not np.all(np.isfinite(vals)):
        raise ValueError("entropy integrand diverges")
    return float(np.dot(rule.weights[mask], vals))


def fisher_information(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """Relative Fisher information ``int |g'/g|^2 g dgamma``."""
    return g.expect(lambda x: g.dlog_g(x) ** 2, rule)


def cross_term(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """``int |g'/g - x|^2 g dgamma``: squared distance of the score from -grad
    of the Gaussian potential."""
    return g.expect(lambda x: (g.dlog_g(x) - x) ** 2, rule)


def poincare_constant(
    g: RelativeDensity,
    *,
    numeric: bool = False,
    grid: Optional[Grid1D] = None,
) -> tuple[float, str]:
    """Poincare constant of ``g * gamma`` with a provenance tag.

    Exact metadata wins unless ``numeric`` forces the spectral route.  The
    numeric route solves the weighted Neumann eigenproblem on a window
    scaled to the density's spread, and repeats on a refined grid; a gap
    drift above 1e-4 marks the result unconverged.
    """
    if not numeric and g.metadata is not None and g.metadata.c_poincare is not None:
        return g.metadata.c_poincare, "exact-metadata"
    if grid is None:
        half = 8.0 * max(1.0, g.std())
        grid = Grid1D(-half, half, SPECTRAL_BASE_NODES)

    def log_density(x):
        x = np.asarray(x, dtype=float)
        return g.log_g(x) - 0.5 * x * x

    coarse = spectral_gap(log_density, grid)
    fine = spectral_gap(log_density, grid.refined())
    provenance = "spectral-gap-numeric"
    if abs(fine - coarse) > SPECTRAL_DRIFT_TOL:
        provenance += ":unconverged"
    return 1.0 / fine, provenance


def functional_values(
    g: RelativeDensity, rule: QuadratureRule | None = None
) -> FunctionalValues:
    cp, cp_prov = poincare_constant(g)
    clsi = None
    clsi_prov = None
    if g.metadata is not None and g.metadata.c_lsi is not None:
        clsi = g.metadata.c_lsi
        clsi_prov = "exact-metadata"
    return FunctionalValues(
        ent=entropy(g, rule),
        fisher=fisher_information(g, rule),
        cross=cross_term(g, rule),
        cp=cp,
        cp_provenance=cp_prov,
        clsi=clsi,
        clsi_provenance=clsi_prov,
    )


def _numeric_derivative(f: Callable, h: float = 1e-6) -> Callable:
    def fp(x):
        x = np.asarray(x, dtype=float)
        return (f(x + h) - f(x - h)) / (2.0 * h)

    return fp


def cheeger_check(
    f: Callable,
    fprime: Optional[Callable] = None,
    rule: QuadratureRule | None = None,
) -> float:
    """Margin of the L1 Poincare inequality for the standard Gaussian.

    Returns ``2 int |f'| dgamma - int |f - mean f| dgamma``; nonnegative for
    Lipschitz ``f``.  The default rule is a gamma-weighted Simpson sum: the
    integrands have kinks, which Gauss rules resolve poorly.
    """
    if rule is None:
        from .densities import gamma_pdf  # local import avoids a cycle

        rule = simpson_rule(Grid1D(-8.0, 8.0, 4001))
        weights = rule.weights * gamma_pdf(rule.nodes)
    elif rule.measure == "gaussian":
        weights = rule.weights
    else:
        from .densities import gamma_pdf

        weights = rule.weights * gamma_pdf(rule.nodes)
    x = rule.nodes
    fp = fprime if fprime is not None else _numeric_derivative(f)
    mean = float(np.dot(weights, f(x)))
    lhs = float(np.dot(weights, np.abs(f(x) - mean)))
    rhs = 2.0 * float(np.dot(weights, np.abs(fp(x))))
    return rhs - lhs


def brascamp_lieb_check(
    plan: TransportPlan1D,
    f: Callable,
    fprime: Optional[Callable] = None,
    rule: QuadratureRule | None = None,
) -> float:
    """Variance bound for the log-concave measure ``exp(-phi) * gamma``.

    ``phi`` is the plan's potential; the measure is normalized internally.
    Checks ``Var(f) <= int (1 + phi'')^{-1} f'^2`` against that measure and
    returns RHS - LHS.  For a moment-measure plan the weighted measure is
    exactly the plan's source.
    """
    rule = rule if rule is not None else default_gamma_rule()
    x = rule.nodes
    hess = plan.Tprime(x)  # 1 + phi''
    if np.min(hess) <= 0.0:
        raise HypothesisNotMet("exp(-phi) * gamma is not log-concave on the window")
    w = rule.weights * np.exp(-plan.phi(x))
    w = w / w.sum()
    fp = fprime if fprime is not None else _numeric_derivative(f)
    fx = f(x)
    mean = float(np.dot(w, fx))
    var = float(np.dot(w, (fx - mean) ** 2))
    rhs = float(np.dot(w, fp(x) ** 2 / hess))
    return rhs - var
