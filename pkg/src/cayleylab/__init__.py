"""Marked groups, Cayley-diagram convergence, fibred coarse embeddings and
expander certificates at desk scale."""

from __future__ import annotations

from .marked import MarkedGroup, ball, convergence_radius, diagram_iso

__all__ = ["MarkedGroup", "ball", "convergence_radius", "diagram_iso"]
__version__ = "0.1.0"
