"""Near-optimal solution-space mapping for convex linear programs.

The package bounds the space of solutions whose cost stays within a
user-chosen slack of the optimum (iterative directional optimization plus
convex-hull construction), samples its interior uniformly, and computes
techno-economic metrics over the sampled continuum.  A desk-scale
capacity-expansion power-system model is bundled as the main application.
"""

__version__ = "0.1.0"
