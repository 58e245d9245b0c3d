"""Jost/Evans functions and standing-wave stability via Fredholm determinants.

Subpackage map:

* ``matdet``     -- dense complex linear algebra, determinant perturbation
  expansions (regular and singular, ordinary and 2-modified), Riesz
  projections, Taylor coefficients by contour quadrature.
* ``potentials`` -- 1D potentials with nonzero spatial asymptotics and the
  built-in soliton family.
* ``volterra``   -- Jost solutions by Volterra marching, the Jost function,
  its derivative at eigenvalues, and the auxiliary inhomogeneous solutions.
* ``fredholm1d`` -- Birman-Schwinger kernels, Nystrom determinants, the two
  factors of the Jost-function derivative at an eigenvalue, and half-line
  determinant representations of the Jost solutions.
* ``semisep``    -- determinant engine for matrix-valued semi-separable
  kernels (fundamental-solution reduction with exponential preconditioning).
* ``cylinder``   -- transverse Fourier (Galerkin) truncation on a cylinder:
  truncated kernels, traces, 2-modified determinants, Evans functions, the
  renormalized-equivalence check and convergence studies.
* ``stabindex``  -- reaction-diffusion pipeline: standing waves, linearized
  potentials, 1D stability index, multi-dimensional derivative factors.
* ``cli``        -- command-line front end.
"""

from .errors import NumericalError, PreconditionError
from .policy import NumericPolicy

__version__ = "0.1.0"

__all__ = ["NumericPolicy", "PreconditionError", "NumericalError", "__version__"]
