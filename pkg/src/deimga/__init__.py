"""POD/DEIM reduced-order modelling with genetic refinement of interpolation points."""

__version__ = "0.1.0"
