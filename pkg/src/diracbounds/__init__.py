"""Dirac eigenvalue bounds for boundaries of spherically symmetric initial data."""

__version__ = "0.1.0"

from .bounds import BoundReport, verify  # noqa: E402
from .dirac_spectrum import (RevolutionSurface, lambda1, sphere_profile,  # noqa: E402
                             spheroid_profile)
from .initial_data import SphericalDataSet, check_dec, constraint_fields, make_family  # noqa: E402
from .jang import JangSolution, solve_jang_dirichlet  # noqa: E402
from .sphere_slices import SphereSlice, classify, horizon_scan, slice  # noqa: E402,A004

__all__ = ["BoundReport", "JangSolution", "RevolutionSurface", "SphereSlice",
           "SphericalDataSet", "check_dec", "classify", "constraint_fields", "horizon_scan",
           "lambda1", "make_family", "slice", "solve_jang_dirichlet", "sphere_profile",
           "spheroid_profile", "verify"]
