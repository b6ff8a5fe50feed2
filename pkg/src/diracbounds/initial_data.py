"""Spherically symmetric initial data ``(g, K)`` and the constraint fields.

The metric is ``g = a(rho)^2 drho^2 + r(rho)^2 dOmega^2``; ``K`` is stored
by its eigenvalues in the orthonormal frame, ``kappa_rho`` (radial) and
``kappa_T`` (each tangential direction).  Radial derivatives use
seven-point finite differences on the sample grid.

Throughout, ``sigma`` denotes proper radial distance, ``d/dsigma = a^-1 d/drho``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._fd import derivative
from .errors import InvalidParameterError

FAMILIES = ("euclidean", "hyperbolic_unit", "hyperbolic", "schwarzschild_isotropic",
            "round_s3", "maximal_slice_custom", "custom")

# Families whose data extends smoothly to a regular centre at rho = 0.
_REGULAR_CORE = ("euclidean", "hyperbolic_unit", "hyperbolic", "round_s3")


@dataclass(frozen=True)
class SphericalDataSet:
    rho: np.ndarray
    a: np.ndarray
    r: np.ndarray
    kappa_rho: np.ndarray
    kappa_T: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        rho = np.asarray(self.rho, float)
        if rho.ndim != 1 or len(rho) < 16:
            raise InvalidParameterError("data grid needs at least 16 points")
        for name in ("a", "r", "kappa_rho", "kappa_T"):
            if np.shape(getattr(self, name)) != rho.shape:
                raise InvalidParameterError(f"field {name} does not match the grid")
        if np.any(np.diff(rho) <= 0):
            raise InvalidParameterError("grid must be strictly increasing")
        if rho[0] <= 0:
            raise InvalidParameterError("rho_min must be positive")
        if np.any(~np.isfinite(self.a)) or np.any(self.a <= 0):
            raise InvalidParameterError("radial metric coefficient a must be positive")
        if np.any(~np.isfinite(self.r)) or np.any(self.r <= 0):
            raise InvalidParameterError("area radius r must be positive")

    @property
    def n(self):
        return len(self.rho)

    @property
    def trace_K(self):
        return self.kappa_rho + 2.0 * self.kappa_T

    @property
    def norm_K_sq(self):
        return self.kappa_rho ** 2 + 2.0 * self.kappa_T ** 2

    @property
    def has_fold(self):
        """True when ``r`` is not monotone (e.g. through a Schwarzschild throat)."""
        return bool(np.any(self.dr <= 0))

    @property
    def dr(self):
        return derivative(self.r, self.rho)

    @property
    def has_regular_core(self):
        return self.family in _REGULAR_CORE

    def resample(self, rho):
        """The same data on a new grid (exact for analytic families)."""
        rho = np.asarray(rho, float)
        if self.family in _ANALYTIC:
            return make_family(self.family, self.params, rho)
        fields = {name: CubicSpline(self.rho, getattr(self, name))(rho)
                  for name in ("a", "r", "kappa_rho", "kappa_T")}
        return SphericalDataSet(rho, family=self.family, params=self.params, **fields)

    def rescaled(self, c):
        """Pull back under the homothety ``g -> c^2 g``, ``K -> c K``."""
        if not c > 0:
            raise InvalidParameterError("scale factor must be positive")
        if self.family in _ANALYTIC:
            params = {k: (v * c if k in _LENGTH_PARAMS else v) for k, v in self.params.items()}
            if self.family == "hyperbolic_unit":
                return make_family("hyperbolic", {**params, "radius": c * params["radius"]},
                                   c * self.rho)
            return make_family(self.family, params, c * self.rho)
        params = dict(self.params)
        return SphericalDataSet(c * self.rho, self.a.copy(), c * self.r,
                                self.kappa_rho / c, self.kappa_T / c,
                                family="custom", params=params)

    def to_json(self):
        return {"family": self.family, "params": _jsonable(self.params),
                "grid": {"rho_min": float(self.rho[0]), "rho_max": float(self.rho[-1]),
                         "n": self.n}}


def _jsonable(params):
    return {k: v for k, v in params.items() if isinstance(v, (int, float, str, bool))}


def _fields(tag, params, rho):
    """Analytic ``(a, r, kappa_rho, kappa_T)`` for the built-in families."""
    one, zero = np.ones_like(rho), np.zeros_like(rho)
    if tag == "euclidean":
        return one, rho.copy(), zero, zero
    if tag in ("hyperbolic_unit", "hyperbolic"):
        # umbilic slice K = g/R of the hyperboloid of radius R in Minkowski space
        radius = float(params.get("radius", 1.0))
        if not radius > 0:
            raise InvalidParameterError("hyperbolic radius must be positive")
        k = one / radius
        return 1.0 / np.sqrt(1.0 + (rho / radius) ** 2), rho.copy(), k, k.copy()
    if tag == "schwarzschild_isotropic":
        m = float(params.get("m", 1.0))
        if not m > 0:
            raise InvalidParameterError("Schwarzschild mass must be positive")
        psi2 = (1.0 + m / (2.0 * rho)) ** 2
        return psi2, rho * psi2, zero, zero
    if tag == "round_s3":
        a0 = float(params.get("a0", 1.0))
        if not a0 > 0 or np.any(rho >= a0):
            raise InvalidParameterError("round_s3 needs 0 < rho < a0")
        return 1.0 / np.sqrt(1.0 - (rho / a0) ** 2), rho.copy(), zero, zero
    raise InvalidParameterError(f"unknown family {tag!r}")


_LENGTH_PARAMS = ("radius", "m", "a0")
_ANALYTIC = ("euclidean", "hyperbolic_unit", "hyperbolic", "schwarzschild_isotropic",
             "round_s3")


def make_grid(rho_min, rho_max, n):
    if not 0 < rho_min < rho_max:
        raise InvalidParameterError(f"need 0 < rho_min < rho_max, got {rho_min}, {rho_max}")
    return np.linspace(rho_min, rho_max, int(n))


def make_family(family_tag, params=None, grid=None):
    """Build a data set for a named family on ``grid``.

    ``grid`` is an array or a dict ``{"rho_min", "rho_max", "n"}``.  The
    custom families take their fields from ``params``: arrays ``a``, ``r``,
    ``kappa_rho``, ``kappa_T`` (``maximal_slice_custom`` derives
    ``kappa_rho = -2 kappa_T``) or a ``csv`` path.
    """
    params = dict(params or {})
    if family_tag == "hyperbolic_unit":
        params.setdefault("radius", 1.0)
    if isinstance(grid, dict):
        grid = make_grid(grid["rho_min"], grid["rho_max"], grid.get("n", 1024))
    if family_tag in ("custom", "maximal_slice_custom"):
        return _custom(family_tag, params, grid)
    if family_tag not in FAMILIES:
        raise InvalidParameterError(f"unknown family {family_tag!r}")
    rho = np.asarray(grid, float)
    if rho.size and rho[0] <= 0:
        raise InvalidParameterError("grid must satisfy rho_min > 0")
    a, r, kr, kt = _fields(family_tag, params, rho)
    return SphericalDataSet(rho, a, r, kr, kt, family=family_tag, params=params)


def _custom(tag, params, grid):
    if "csv" in params:
        cols = load_fields_csv(params["csv"])
        rho = cols["rho"]
        fields = {k: cols[k] for k in ("a", "r", "kappa_rho", "kappa_T")}
        if grid is not None:
            rho = np.asarray(grid, float)
            fields = {k: CubicSpline(cols["rho"], v)(rho) for k, v in fields.items()}
    else:
        rho = np.asarray(params.get("rho", grid), float)
        fields = {}
        for k in ("a", "r", "kappa_T"):
            if k not in params:
                raise InvalidParameterError(f"custom family needs field {k!r}")
            fields[k] = np.asarray(params[k], float)
        fields["kappa_rho"] = np.asarray(params.get("kappa_rho", np.zeros_like(rho)), float)
    if tag == "maximal_slice_custom":
        fields["kappa_rho"] = -2.0 * fields["kappa_T"]
    clean = {k: v for k, v in params.items() if not isinstance(v, np.ndarray)}
    return SphericalDataSet(rho, family=tag, params=clean, **fields)


def load_fields_csv(path):
    """Read ``rho, a, r, kappa_rho, kappa_T`` columns (header optional).

    For the maximal-slice family a four-column file ``rho, a, r, kappa_T``
    is also accepted.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                if rows:
                    raise InvalidParameterError(f"malformed CSV row {row!r} in {path}")
    arr = np.array(rows)
    if arr.ndim != 2 or arr.shape[1] not in (4, 5):
        raise InvalidParameterError(f"{path}: expected 4 or 5 numeric columns")
    if arr.shape[1] == 4:
        return {"rho": arr[:, 0], "a": arr[:, 1], "r": arr[:, 2],
                "kappa_rho": -2.0 * arr[:, 3], "kappa_T": arr[:, 3]}
    return dict(zip(("rho", "a", "r", "kappa_rho", "kappa_T"), arr.T))


def radial_derivatives(rho, a, r):
    """``(r_sigma, r_sigmasigma)`` for the warped metric."""
    da = derivative(a, rho)
    dr = derivative(r, rho)
    d2r = derivative(r, rho, order=2)
    return dr / a, (d2r * a - dr * da) / a ** 3


def warped_scalar_curvature(rho, a, r):
    """Scalar curvature of ``a^2 drho^2 + r^2 dOmega^2``:
    ``R = -4 r_ss / r + 2 (1 - r_s^2) / r^2``."""
    rs, rss = radial_derivatives(rho, a, r)
    return -4.0 * rss / r + 2.0 * (1.0 - rs ** 2) / r ** 2


def scalar_curvature(d):
    if d.n < 16:
        raise InvalidParameterError("grid too coarse for curvature (n < 16)")
    return warped_scalar_curvature(d.rho, d.a, d.r)


def radial_divergence(rho, a, r, x_rad):
    """``r^-2 d/dsigma (r^2 X)`` for a radial field with orthonormal component X."""
    return derivative(r ** 2 * x_rad, rho) / (a * r ** 2)


@dataclass(frozen=True)
class ConstraintFields:
    rho: np.ndarray
    R: np.ndarray
    mu: np.ndarray
    J_rad: np.ndarray
    dec_margin: np.ndarray

    def to_rows(self):
        return [{"rho": float(p), "R": float(R), "mu": float(m), "J_rad": float(j),
                 "dec_margin": float(dm)}
                for p, R, m, j, dm in zip(self.rho, self.R, self.mu, self.J_rad,
                                          self.dec_margin)]


def momentum_density(d):
    """Radial component of ``J = -div(K - tr(K) g)``.

    With ``P = K - tr(K) g`` (eigenvalues ``-2 kT`` and ``-kR - kT``) the
    divergence of a symmetric radial tensor is
    ``dP_rr/dsigma + 2 (r_s / r) (P_rr - P_TT)``.
    """
    p_rr = -2.0 * d.kappa_T
    p_tt = -(d.kappa_rho + d.kappa_T)
    rs = d.dr / d.a
    div = derivative(p_rr, d.rho) / d.a + 2.0 * rs / d.r * (p_rr - p_tt)
    return -div


def constraint_fields(d):
    R = scalar_curvature(d)
    mu = 0.5 * (R - d.norm_K_sq + d.trace_K ** 2)
    J = momentum_density(d)
    return ConstraintFields(d.rho, R, mu, J, mu - np.abs(J))


@dataclass(frozen=True)
class DecReport:
    holds: bool
    min_margin: float
    location: float

    def to_json(self):
        return {"holds": self.holds, "min_margin": self.min_margin,
                "location": self.location}


def check_dec(d, tol=1e-8):
    cf = constraint_fields(d)
    i = int(np.argmin(cf.dec_margin))
    margin = float(cf.dec_margin[i])
    return DecReport(margin >= -tol, margin, float(d.rho[i]))


def core_flux_at(d, rho0):
    """Value of ``w = v / sqrt(1 + v^2)`` at ``rho0`` for the regular Jang graph.

    Spherically symmetric Jang graphs obey the flux law
    ``d/dsigma (r^2 w) = r^2 (kappa_rho (1 - w^2) + 2 kappa_T)``; families with a
    regular centre are integrated out from the origin, otherwise the
    leading-order regular behaviour ``w ~ r tr(K) / 3`` is used.
    """
    from scipy.integrate import solve_ivp

    if not np.any(d.kappa_rho) and not np.any(d.kappa_T):
        return 0.0
    if not d.has_regular_core:
        i = int(np.searchsorted(d.rho, rho0))
        i = min(i, d.n - 1)
        return float(d.r[i] * d.trace_K[i] / 3.0)

    def fields(p):
        return _fields(d.family, d.params, np.atleast_1d(np.asarray(p, float)))

    start = rho0 * 1e-6
    a, r, kr, kt = (x[0] for x in fields(start))
    y0 = r ** 3 * (kr + 2 * kt) / 3.0

    def rhs(p, y):
        a, r, kr, kt = (x[0] for x in fields(p))
        w = y[0] / r ** 2
        return [a * r ** 2 * (kr * (1.0 - w * w) + 2.0 * kt)]

    sol = solve_ivp(rhs, (start, rho0), [y0], method="DOP853", rtol=1e-13, atol=1e-300)
    _, r0, _, _ = (x[0] for x in fields(rho0))
    return float(sol.y[0, -1] / r0 ** 2)

