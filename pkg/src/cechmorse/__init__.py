"""Point clouds on manifolds: Cech complexes, homology, and distance-function
critical points, with the limiting constants of their expected counts."""

__version__ = "0.1.0"
