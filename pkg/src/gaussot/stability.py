"""Deficits of the sharp Gaussian inequalities and computable lower bounds.

The scalar remainder ``delta(t) = t - log(1 + t)`` and its conjugate, the
log-Sobolev / transport / HWI deficits, and every lower bound from the
stability theory as margin-producing checks assembled into a
:class:`DeficitReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .densities import RelativeDensity, standard
from .functionals import (
    FunctionalValues,
    HypothesisNotMet,
    NotAvailable,
    cross_term,
    entropy,
    fisher_information,
    functional_values,
    poincare_constant,
)
from .numerics import QuadratureRule
from .transport import k_a_cost, w1, w2

MARGIN_TOL = 1e-6
LP_MARGIN_TOL = 5e-3
CENTERING_TOL = 1e-8

ONE_MINUS_LOG2 = 1.0 - math.log(2.0)


def delta(t):
    """The remainder ``t - log(1 + t)`` on ``t > -1`` (vectorized)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= -1.0):
        raise ValueError("delta requires t > -1")
    out = arr - np.log1p(arr)
    return float(out) if np.ndim(t) == 0 else out

def delta_star(s):
    """Convex conjugate ``-s - log(1 - s)`` on ``s <= 1`` (+inf at s = 1)."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr > 1.0):
        raise ValueError("delta_star requires s <= 1")
    with np.errstate(divide="ignore"):
        out = np.where(arr < 1.0, -arr - np.log1p(-arr), np.inf)
    return float(out) if np.ndim(s) == 0 else out


def _require_centered(g: RelativeDensity, who: str) -> None:
    m = g.mean()
    if abs(m) > CENTERING_TOL:
        raise ValueError(f"{who} requires a centered density (barycenter {m:.3e})")


# -- deficits -----------------------------------------------------------------


def lsi_deficit(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """``I(g)/2 - Ent g``; nonnegative by the log-Sobolev inequality."""
    return 0.5 * fisher_information(g, rule) - entropy(g, rule)


def tal_deficit(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """``Ent g - W2(nu, gamma)^2 / 2``; nonnegative by the transport inequality."""
    dist = w2(g, standard())
    return entropy(g, rule) - 0.5 * dist * dist


def hwi_gap(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """``sqrt(I) W2 - W2^2/2 - Ent``; nonnegative by the HWI inequality."""
    dist = w2(g, standard())
    fisher = fisher_information(g, rule)
    return math.sqrt(max(fisher, 0.0)) * dist - 0.5 * dist * dist - entropy(g, rule)


# -- lower bounds --------------------------------------------------------------


def _fil_coefficient(cp: float) -> float:
    # (cp log cp - cp + 1) / (cp - 1)^2 has a removable singularity at cp = 1
    # with value 1/2 (continuous extension).
    if abs(cp - 1.0) < 1e-6:
        return 0.5
    return (cp * math.log(cp) - cp + 1.0) / ((cp - 1.0) ** 2)


def bound_fil(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """Sharp spectral lower bound for the LSI deficit of a centered density.

    Equals ``coeff(C_P)/2 * I(g)`` and matches the deficit exactly on the
    scaled-Gaussian family.
    """
    _require_centered(g, "bound_fil")
    cp, _ = poincare_constant(g)
    return 0.5 * _fil_coefficient(cp) * fisher_information(g, rule)


def bound_mainstab(g: RelativeDensity, rule: QuadratureRule | None = None) -> float:
    """Lower bound ``I/(1 + sqrt(C_P))^2`` for ``I - 2 Ent`` (centered input)."""
    _require_centered(g, "bound_mainstab")
    cp, _ = poincare_constant(g)
    return fisher_information(g, rule) / (1.0 + math.sqrt(cp)) ** 2


def bound_igncp(
    g: RelativeDensity, n: int = 1, rule: QuadratureRule | None = None
) -> float:
    """Dimensional LSI-deficit bound ``n (C_P log C_P - C_P + 1) / (2 C_P)``.

    Only valid when ``C_P <= 1``; raises :class:`HypothesisNotMet` otherwise.
    ``n`` counts iid coordinates of the product density (all functionals are
    additive over coordinates).
    """
    _require_centered(g, "bound_igncp")
    cp, _ = poincare_constant(g)
    if cp > 1.0 + 1e-12:
        raise HypothesisNotMet(f"bound requires C_P <= 1, got C_P = {cp:.6g}")
    cp = min(cp, 1.0)
    return n * (cp * math.log(cp) - cp + 1.0) / (2.0 * cp)


def bound_bgrs(
    g: RelativeDensity, n: int = 1, rule: QuadratureRule | None = None
) -> float:
    """Lower bound ``n * delta(cross/n - 1)`` for ``I - 2 Ent`` (per-coordinate
    cross term; additive over iid coordinates)."""
    cross = cross_term(g, rule)
    return n * delta(cross - 1.0)


def bound_tal_w11(
    g: RelativeDensity, n: int = 1, rule: QuadratureRule | None = None
) -> tuple[float, float]:
    """Transport-deficit bounds from the coordinatewise absolute cost.

    Returns ``(delta_form, min_form)`` where the chain
    ``tal_deficit >= delta_form >= min_form`` holds for centered densities:
    ``delta_form = delta(W_{1,1} / (2 sqrt(n)))`` and ``min_form`` its
    ``(1 - log 2) min(t, t^2)`` relaxation.  For ``n`` iid coordinates
    ``W_{1,1}`` is ``n`` times the per-coordinate W1.
    """
    _require_centered(g, "bound_tal_w11")
    w11 = n * w1(g, standard())
    t = 0.5 * w11 / math.sqrt(n)
    return delta(t), ONE_MINUS_LOG2 * min(t, t * t)


def bound_lsi_cost(
    g: RelativeDensity, rule: QuadratureRule | None = None, *, n_atoms: int = 256
) -> float:
    """LSI-deficit bound ``K_a / C_LSI`` with the scale-pinned entropic cost.

    Needs an exact log-Sobolev constant (scaled-Gaussian metadata); raises
    :class:`NotAvailable` otherwise.  The transport value comes from the
    exact LP oracle, so margins carry the LP discretization tolerance.
    """
    if g.metadata is None or g.metadata.c_lsi is None:
        raise NotAvailable("C_LSI not known exactly for this density")
    return k_a_cost(g, n_atoms=n_atoms) / g.metadata.c_lsi


def caffarelli_ratio(
    g: RelativeDensity,
    eps: Optional[float] = None,
    rule: QuadratureRule | None = None,
) -> float:
    """Observed contraction-ratio statistic ``(Ent/W2^2 - 1/2)/sqrt(eps)``.

    Requires a centered density with ``1 - (log g)'' >= eps > 0`` on the
    window (verified numerically when ``eps`` is not supplied).  The
    universal constant multiplying ``sqrt(eps)`` is not specified by the
    theory, so this is a report-only statistic.
    """
    _require_centered(g, "caffarelli_ratio")
    if g.d2log_g is None:
        raise NotAvailable("second derivative of log g required")
    half = 8.0 * max(1.0, g.std())
    xs = np.linspace(-half, half, 4001)
    eps_obs = float(np.min(1.0 - g.d2log_g(xs)))
    if eps is None:
        eps = eps_obs
    elif eps > eps_obs + 1e-12:
        raise HypothesisNotMet(
            f"requested eps={eps:g} exceeds the verified bound {eps_obs:g}"
        )
    if eps <= 0:
        raise HypothesisNotMet(f"uniform convexity fails: eps = {eps_obs:.3e} <= 0")
    dist = w2(g, standard())
    if dist < 1e-9:
        raise HypothesisNotMet("degenerate case nu = gamma (W2 = 0)")
    return (entropy(g, rule) / (dist * dist) - 0.5) / math.sqrt(eps)


# -- scalar lemma ----------------------------------------------------------------


@dataclass(frozen=True)
class DeltaLemmaReport:
    """Worst-case margins for the convexity/subadditivity/domination facts
    about ``delta`` on a deterministic sample; all must be >= -1e-12."""

    convexity: float
    sqrt_concavity: float
    sqrt_subadditivity: float
    abs_domination: float
    min_quadratic: float
    conjugate_gap: float
    samples: int

    @property
    def passed(self) -> bool:
        worst = min(
            self.convexity,
            self.sqrt_concavity,
            self.sqrt_subadditivity,
            self.abs_domination,
            self.min_quadratic,
            self.conjugate_gap,
        )
        return worst >= -1e-12


def delta_lemma_checks(samples: int = 10_000) -> DeltaLemmaReport:
    """Verify the scalar-remainder lemma on a deterministic grid of (-1, 50]."""
    t = np.linspace(-1.0 + 1e-6, 50.0, samples)
    d = delta(t)
    # midpoint convexity on consecutive triples (uniform grid)
    convexity = float(np.min(0.5 * (d[:-2] + d[2:]) - d[1:-1]))

    s = np.linspace(0.0, 50.0, samples)
    ds = delta(np.sqrt(s))
    sqrt_concavity = float(np.min(ds[1:-1] - 0.5 * (ds[:-2] + ds[2:])))

    a = np.linspace(1e-4, 50.0, 100)
    aa, bb = np.meshgrid(a, a)
    sub = delta(np.sqrt(aa)) + delta(np.sqrt(bb)) - delta(np.sqrt(aa + bb))
    sqrt_subadditivity = float(np.min(sub))

    neg = np.linspace(-1.0 + 1e-6, -1e-9, samples)
    abs_domination = float(np.min(delta(neg) - delta(-neg)))

    pos = np.linspace(0.0, 50.0, samples)
    min_quadratic = float(
        np.min(delta(pos) - ONE_MINUS_LOG2 * np.minimum(pos, pos * pos))
    )

    # conjugate: the discrete sup of s*t - delta(t) never exceeds delta_star(s)
    svals = np.linspace(-5.0, 0.99, 301)
    sup = np.max(svals[:, None] * t[None, :] - d[None, :], axis=1)
    conjugate_gap = float(np.min(delta_star(svals) - sup))

    return DeltaLemmaReport(
        convexity=convexity,
        sqrt_concavity=sqrt_concavity,
        sqrt_subadditivity=sqrt_subadditivity,
        abs_domination=abs_domination,
        min_quadratic=min_quadratic,
        conjugate_gap=conjugate_gap,
        samples=samples,
    )


# -- assembled report ----------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    """One inequality check: ``lhs >= rhs`` up to ``tolerance``."""

    name: str
    lhs: Optional[float]
    rhs: Optional[float]
    margin: Optional[float]
    status: str  # pass | fail | skipped:hypothesis | skipped:unavailable
    tolerance: float
    provenance: str = ""
    note: str = ""


@dataclass(frozen=True)
class DeficitReport:
    """All functionals, deficits, and bound margins for one density."""

    label: str
    functionals: FunctionalValues
    w2_to_gamma: float
    lsi_deficit: float
    tal_deficit: float
    hwi_gap: float
    checks: list[BoundCheck] = field(default_factory=list)

    @property
    def margins(self) -> dict[str, float]:
        return {c.name: c.margin for c in self.checks if c.margin is not None}

    @property
    def failed(self) -> list[BoundCheck]:
        return [c for c in self.checks if c.status == "fail"]


def _check(name, lhs, rhs, tol, provenance="", note="") -> BoundCheck:
    margin = lhs - rhs
    status = "pass" if margin >= -tol else "fail"
    return BoundCheck(
        name=name,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        status=status,
        tolerance=tol,
        provenance=provenance,
        note=note,
    )


def _skipped(name, tol, reason, kind) -> BoundCheck:
    return BoundCheck(
        name=name,
        lhs=None,
        rhs=None,
        margin=None,
        status=f"skipped:{kind}",
        tolerance=tol,
        note=reason,
    )


def deficit_report(
    g: RelativeDensity,
    *,
    n: int = 1,
    with_lp: bool = True,
    label: str = "",
    rule: QuadratureRule | None = None,
) -> DeficitReport:
    """Evaluate every applicable deficit bound for one (centered) density.

    Bounds whose hypotheses fail are reported as ``skipped:hypothesis``;
    bounds needing unknown exact constants as ``skipped:unavailable``.
    LP-backed margins carry the looser discretization tolerance.
    """
    vals = functional_values(g, rule)
    dist = w2(g, standard())
    lsi = 0.5 * vals.fisher - vals.ent
    tal = vals.ent - 0.5 * dist * dist
    hwi = math.sqrt(max(vals.fisher, 0.0)) * dist - 0.5 * dist * dist - vals.ent

    checks: list[BoundCheck] = [
        _check("lsi", lsi, 0.0, MARGIN_TOL, note="deficit nonnegativity"),
        _check("talagrand", tal, 0.0, MARGIN_TOL, note="deficit nonnegativity"),
        _check("hwi", hwi, 0.0, MARGIN_TOL, note="gap nonnegativity"),
    ]

    i_minus_2ent = vals.fisher - 2.0 * vals.ent
    prov_cp = vals.cp_provenance

    def guarded(name, fn, tol, provenance=""):
        try:
            checks.append(fn())
        except HypothesisNotMet as exc:
            checks.append(_skipped(name, tol, str(exc), "hypothesis"))
        except NotAvailable as exc:
            checks.append(_skipped(name, tol, str(exc), "unavailable"))
        except ValueError as exc:
            checks.append(_skipped(name, tol, str(exc), "hypothesis"))

    guarded(
        "fil",
        lambda: _check("fil", lsi, bound_fil(g, rule), MARGIN_TOL, prov_cp),
        MARGIN_TOL,
    )
    guarded(
        "mainstab",
        lambda: _check(
            "mainstab", i_minus_2ent, bound_mainstab(g, rule), MARGIN_TOL, prov_cp
        ),
        MARGIN_TOL,
    )
    guarded(
        "igncp",
        lambda: _check("igncp", lsi, bound_igncp(g, n, rule), MARGIN_TOL, prov_cp),
        MARGIN_TOL,
    )
    guarded(
        "bgrs",
        lambda: _check("bgrs", i_minus_2ent, bound_bgrs(g, n, rule), MARGIN_TOL),
        MARGIN_TOL,
    )

    def tal_chain():
        delta_form, min_form = bound_tal_w11(g, n, rule)
        checks.append(_check("tal_w11", tal, delta_form, MARGIN_TOL))
        return _check("tal_w11_chain", delta_form, min_form, MARGIN_TOL)

    guarded("tal_w11", tal_chain, MARGIN_TOL)

    if with_lp:
        guarded(
            "lsi_cost",
            lambda: _check(
                "lsi_cost",
                lsi,
                bound_lsi_cost(g, rule),
                LP_MARGIN_TOL,
                "lp-oracle",
                note="zero-cost convention at a=0" if dist < 1e-9 else "",
            ),
            LP_MARGIN_TOL,
        )
    guarded(
        "caffarelli",
        lambda: _check(
            "caffarelli",
            caffarelli_ratio(g, rule=rule),
            0.0,
            MARGIN_TOL,
            note="ratio statistic; universal constant not specified",
        ),
        MARGIN_TOL,
    )

    return DeficitReport(
        label=label or g.label,
        functionals=vals,
        w2_to_gamma=dist,
        lsi_deficit=lsi,
        tal_deficit=tal,
        hwi_gap=hwi,
        checks=checks,
    )
