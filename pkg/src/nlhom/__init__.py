"""nlhom: a numerical laboratory for nonlocal homogenization.

Two families of one-dimensional stochastic PDEs with rapidly oscillating
periodic coefficients are implemented side by side:

* an integrable-jump family, where a scaled nonlocal operator homogenizes to
  an effective local diffusion, and
* an alpha-stable family, where the limit stays nonlocal (a constant-
  coefficient fractional Laplacian plus effective lower-order terms).

The package computes the periodic cell problems and effective coefficients,
assembles the full-line multiscale operators, runs SPDE and particle
ensembles, and checks the predicted convergence rates — including a nonlinear
filtering (Zakai equation) application where the heterogeneous posterior is
compared against its homogenized surrogate and a particle-filter oracle.
"""

__version__ = "0.1.0"
