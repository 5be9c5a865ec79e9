"""Numerical tolerances used throughout the package."""

#: absolute tolerance on every constraint residual
EPS_FEAS = 1e-9
#: tolerance on one-sided derivative comparisons in the optimality certificate
TOL_CERT = 1e-8
#: step of the finite-difference derivative fallback
FD_STEP = 1e-7
