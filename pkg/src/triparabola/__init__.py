"""Numerical laboratory for the triangular Hilbert transform along a parabola.

The subpackages cover discretized fields on a periodic grid, Littlewood-Paley
projections, the oscillatory multiplier and its regime estimates, singular and
maximal operators, trilinear smoothing experiments, frequency pruning, the
sublevel-set refinement machinery and a Roth-type corner search.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
