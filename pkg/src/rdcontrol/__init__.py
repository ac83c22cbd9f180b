"""Boundary controllability of 1-D reaction-diffusion equations.

Modules:
  reaction        reaction terms, classification, potential, branch inversion
  phase_plane     stationary phase-plane analysis and length thresholds
  pde             IMEX solver for the controlled parabolic problem
  strategies      static and staircase control strategies
  optimal_control discrete-adjoint terminal-cost optimization, minimal time
  cli             config-driven command line front end
"""

__version__ = "0.1.0"
