"""The standard test corpus: scaled Gaussians, mixtures, and log-concave
perturbations, all centered."""

from __future__ import annotations

from .densities import (
    RelativeDensity,
    gaussian_mixture,
    quartic_perturbation,
    recenter,
    scaled_gaussian,
)

SCALED_GAUSSIAN_LAMBDAS = (4.0, 2.0, 1.0, 0.5, 0.25)


def standard_corpus() -> list[tuple[str, RelativeDensity]]:
    """Ten centered densities: five scaled Gaussians, three mixtures, two
    quartic log-concave perturbations.  Construction is deterministic."""
    entries: list[tuple[str, RelativeDensity]] = []
    for lam in SCALED_GAUSSIAN_LAMBDAS:
        entries.append((f"scaled_gaussian_{lam:g}", scaled_gaussian(lam)))
    entries.append(
        ("mixture_sym", gaussian_mixture([0.5, 0.5], [-1.0, 1.0], [0.8, 0.8]))
    )
    entries.append(
        (
            "mixture_asym",
            recenter(gaussian_mixture([0.3, 0.7], [-1.5, 0.5], [0.7, 0.9])),
        )
    )
    entries.append(
        (
            "mixture_three",
            recenter(
                gaussian_mixture(
                    [0.25, 0.5, 0.25], [-1.6, 0.0, 1.2], [0.6, 0.8, 0.7]
                )
            ),
        )
    )
    entries.append(("quartic_even", quartic_perturbation(1.0 / 12.0)))
    entries.append(
        ("quartic_skew", recenter(quartic_perturbation(1.0 / 15.0, shift=0.4)))
    )
    return entries


def corpus_density(name: str) -> RelativeDensity:
    for key, dens in standard_corpus():
        if key == name:
            return dens
    raise KeyError(f"unknown corpus density {name!r}")
