"""Crystalline curvature flow: anisotropies, facet curvatures, level-set evolution."""

try:
    from ._crystalflow import (
        Anisotropy,
        FlowError,
        evolve,
        facet_curvature,
        facet_curvature_1d,
        resolvent,
    )
except ImportError:  # building the extension outside the package
    from _crystalflow import (
        Anisotropy,
        FlowError,
        evolve,
        facet_curvature,
        facet_curvature_1d,
        resolvent,
    )

__all__ = [
    "Anisotropy",
    "FlowError",
    "evolve",
    "facet_curvature",
    "facet_curvature_1d",
    "resolvent",
]
