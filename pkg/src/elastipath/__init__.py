"""Curvature-penalized minimal paths on orientation-lifted grids.

The package computes globally minimal geodesics for a family of
position-orientation metrics (including an asymmetric curvature-penalizing
norm and several Riemannian baselines) by anisotropic fast marching, and
builds interactive contour detection, perceptual grouping and tubular
centerline extraction on top of the solver.

Layout:
    grid      -- planar and orientation-lifted grid discretization
    metrics   -- evaluable metric families and their dual norms
    stencils  -- per-node neighborhood meshes searched by the local update
    solver    -- fast marching and the iterative fixed-point oracle
    tracer    -- geodesic back-tracking and path energies
    features  -- steerable edge / oriented-flux image measurements
    apps      -- closed contours, perceptual grouping, tubular extraction
    fileio    -- images, raw volumes, canonical JSON, overlay rendering
    cli       -- batch command line interface
    service   -- local HTTP service for the interactive workbench
"""

from .grid import GridSpec2, GridSpec3, LiftedIndex, LiftedPoint, LiftedVector

__all__ = [
    "GridSpec2",
    "GridSpec3",
    "LiftedIndex",
    "LiftedPoint",
    "LiftedVector",
]

__version__ = "0.1.0"
