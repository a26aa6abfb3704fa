"""Feasible-path data-flow analysis over a small imperative IR.

The package computes the classic maximum-fixed-point (MFP) solution of a
data-flow problem and a feasible-path refinement (FPMFP) that excludes values
flowing only along infeasible control-flow paths.  Infeasibility is established
by detecting minimal infeasible path segments (MIPS) from branch correlations,
and any registered analysis is lifted so that its values are blocked at the end
edge of a segment they can only have traversed.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
