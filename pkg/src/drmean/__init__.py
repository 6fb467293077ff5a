"""Population-mean estimation from incomplete data under MAR.

Implements the regression, imputation, inverse-probability-weighted, and
doubly robust (AIPW) estimator family, influence-function standard errors
with estimated-nuisance corrections, and a seeded Monte Carlo harness for
studying the estimators under correct and misspecified working models.
"""

__version__ = "0.1.0"

from .kernels import backend_name

__all__ = ["backend_name", "__version__"]
