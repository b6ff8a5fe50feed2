"""Intrinsic Dirac spectrum of rotationally symmetric 2-spheres.

A sphere of revolution carries the warped metric ``dt^2 + f(t)^2 dtheta^2``
with ``t`` in ``[0, L]`` and ``f`` vanishing at both poles.  In the frame
``(d/dt, f^-1 d/dtheta)`` and after the substitution ``chi = f^(1/2) psi``
(which absorbs the ``f'/(2f)`` spin-connection term) the Fourier mode
``exp(i k theta)`` of the Dirac operator becomes

    [ 0               d/dt + k/f ]
    [ -d/dt + k/f     0          ]

acting on ``L^2(0, L)``.  The fiber circle bounds a disc, so ``k`` runs
over the half-integers.

The two components live on interleaved staggered points
``x_m = (m + 1/2) L / (2n)``.  The assembled matrix is tridiagonal with a
zero diagonal; it is symmetric by construction and its spectrum is
exactly symmetric about zero.  Which component sits on the even points
follows the sign of ``k``, so that at each pole the truncated component
is the one that vanishes faster (``t^(|k|+1)`` against ``t^|k|``).  The
other choice produces a spurious near-zero mode.
"""

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.special import ellipeinc

from .errors import (InvalidModeError, InvalidParameterError, NumericalFailure,
                     PoleProximityError)

POLE_SLOPE_TOL = 1e-8


@dataclass(frozen=True)
class RevolutionSurface:
    """Topological 2-sphere ``dt^2 + f(t)^2 dtheta^2``.

    ``t`` and ``f`` are the profile samples; they include the poles
    ``t=0`` and ``t=L`` where ``f`` is zero.  ``profile``/``slope`` are
    optional exact evaluators; without them a cubic spline through the
    samples is used.
    """

    length: float
    t: np.ndarray
    f: np.ndarray
    pole_slopes: tuple
    name: str = "custom"
    profile: Optional[Callable] = field(default=None, repr=False, compare=False)
    slope: Optional[Callable] = field(default=None, repr=False, compare=False)
    slope_tol: float = field(default=POLE_SLOPE_TOL, repr=False, compare=False)

    def __post_init__(self):
        t, f = np.asarray(self.t, float), np.asarray(self.f, float)
        if not self.length > 0:
            raise InvalidParameterError(f"length must be positive, got {self.length}")
        if t.ndim != 1 or t.shape != f.shape or len(t) < 3:
            raise InvalidParameterError("profile samples must be matching 1D arrays")
        if np.any(np.diff(t) <= 0):
            raise InvalidParameterError("sample grid must be strictly increasing")
        inner = (t > 0) & (t < self.length)
        if np.any(f[inner] <= 0):
            raise InvalidParameterError("profile must be positive away from the poles")
        s0, s1 = self.pole_slopes
        if abs(s0 - 1.0) > self.slope_tol or abs(s1 + 1.0) > self.slope_tol:
            raise InvalidParameterError(
                f"pole slopes {self.pole_slopes} differ from (1, -1) by more than "
                f"{self.slope_tol}: the profile does not close smoothly")

    @cached_property
    def _spline(self):
        return CubicSpline(self.t, self.f)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if self.profile is not None:
            return self.profile(t)
        return self._spline(t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.slope is not None:
            return self.slope(t)
        return self._spline(t, 1)

    @property
    def spacing(self):
        return self.length / (len(self.t) - 1)

    def scaled(self, c):
        """The same surface with every length multiplied by ``c``."""
        if not c > 0:
            raise InvalidParameterError("scale factor must be positive")
        prof = None if self.profile is None else (lambda t, p=self.profile: c * p(t / c))
        slope = None if self.slope is None else (lambda t, d=self.slope: d(t / c))
        return RevolutionSurface(c * self.length, c * self.t, c * self.f, self.pole_slopes,
                                 name=self.name, profile=prof, slope=slope,
                                 slope_tol=self.slope_tol)


def sphere_profile(r, n=2048):
    """Round sphere of radius ``r``: ``f(t) = r sin(t/r)`` on ``[0, pi r]``."""
    if not r > 0:
        raise InvalidParameterError(f"radius must be positive, got {r}")
    length = math.pi * r
    t = np.linspace(0.0, length, n + 1)
    f = r * np.sin(t / r)
    f[0] = f[-1] = 0.0
    return RevolutionSurface(length, t, f, (1.0, -1.0), name=f"sphere(r={r:g})",
                             profile=lambda s: r * np.sin(s / r),
                             slope=lambda s: np.cos(s / r))


def _invert_arclength(tau, speed, phi_max, tau_nodes, phi_nodes):
    """phi(t) for a monotone arclength map, by Newton from linear interpolation."""

    def inverse(t):
        t = np.asarray(t, dtype=float)
        phi = np.interp(t, tau_nodes, phi_nodes)
        for _ in range(8):
            step = (tau(phi) - t) / speed(phi)
            phi = np.clip(phi - step, 0.0, phi_max)
            if np.all(np.abs(step) < 1e-15):
                break
        return phi

    return inverse


def meridian_surface(radius, dradius, speed, phi_max, n, name, tau=None,
                     slope_tol=POLE_SLOPE_TOL):
    """Build an arclength-parametrised profile from a meridian curve.

    The meridian is parametrised by ``phi`` in ``[0, phi_max]``;
    ``radius(phi)`` is the distance to the axis (in the intrinsic metric),
    ``speed(phi)`` the arclength density.  When ``tau`` (the cumulative
    arclength) is not supplied it is built from Gauss-Legendre panels and
    a Hermite spline with exact end derivatives.
    """
    phis = np.linspace(0.0, phi_max, 4097)
    if tau is None:
        xg, wg = np.polynomial.legendre.leggauss(8)
        lo, hi = phis[:-1], phis[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = mid[:, None] + half[:, None] * xg[None, :]
        panel = half * (speed(pts) @ wg)
        taus = np.concatenate([[0.0], np.cumsum(panel)])
        tau = CubicHermiteSpline(phis, taus, speed(phis))
    else:
        taus = tau(phis)
    length = float(tau(phi_max))
    inverse = _invert_arclength(tau, speed, phi_max, taus, phis)

    def profile(t):
        return radius(inverse(t))

    def slope(t):
        phi = inverse(t)
        return dradius(phi) / speed(phi)

    t = np.linspace(0.0, length, n + 1)
    f = profile(t)
    f[0] = f[-1] = 0.0
    slopes = (float(slope(0.0)), float(slope(length)))
    return RevolutionSurface(length, t, f, slopes, name=name, profile=profile,
                             slope=slope, slope_tol=slope_tol)


def spheroid_profile(a, c, n=2048):
    """Spheroid ``(x^2 + y^2)/a^2 + z^2/c^2 = 1`` as a revolution profile.

    The meridian arclength is the incomplete elliptic integral
    ``a E(phi | 1 - c^2/a^2)``.
    """
    if not (a > 0 and c > 0) or not (math.isfinite(a) and math.isfinite(c)):
        raise InvalidParameterError(f"semi-axes must be positive, got a={a}, c={c}")
    if n < 16:
        raise InvalidParameterError("spheroid profile needs n >= 16")
    m = 1.0 - (c / a) ** 2

    def speed(phi):
        return np.sqrt((a * np.cos(phi)) ** 2 + (c * np.sin(phi)) ** 2)

    def tau(phi):
        return a * ellipeinc(phi, m)

    return meridian_surface(lambda p: a * np.sin(p), lambda p: a * np.cos(p), speed,
                            math.pi, n, f"spheroid(a={a:g},c={c:g})", tau=tau,
                            slope_tol=1e-6)


def surface_from_samples(t, f, slope_tol=1e-3, name="csv"):
    """Surface from raw profile samples; poles are appended when missing.

    Pole slopes are read off the interpolating spline, hence the looser
    default tolerance.
    """
    t = np.asarray(t, float)
    f = np.asarray(f, float)
    if t[0] > 0:
        t, f = np.concatenate([[0.0], t]), np.concatenate([[0.0], f])
    length = float(t[-1])
    # samples written from sin(t) etc. carry rounding at the poles
    pole_tol = 1e-12 * float(np.max(np.abs(f)))
    if abs(f[0]) > pole_tol or abs(f[-1]) > pole_tol:
        raise InvalidParameterError("first and last samples must be the poles (f = 0)")
    f = f.copy()
    f[0] = f[-1] = 0.0
    spline = CubicSpline(t, f)
    slopes = (float(spline(0.0, 1)), float(spline(length, 1)))
    return RevolutionSurface(length, t, f, slopes, name=name, slope_tol=slope_tol)


def load_profile_csv(path, slope_tol=1e-3):
    """Read a two-column ``t,f`` CSV (an optional header row is skipped)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise InvalidParameterError(f"malformed CSV row {row!r} in {path}")
    if len(rows) < 3:
        raise InvalidParameterError(f"{path}: need at least three samples")
    arr = np.array(rows)
    return surface_from_samples(arr[:, 0], arr[:, 1], slope_tol=slope_tol, name=str(path))


def area(s):
    """``2 pi * int f dt`` by composite Simpson on the sample grid."""
    return 2.0 * math.pi * float(simpson(s.f, x=s.t))


def gauss_curvature(s, t, allow_pole=False):
    """``-f''/f`` at ``t`` from a central second difference of grid spacing.

    Within one cell of a pole the stencil would straddle the pole; with
    ``allow_pole`` the value is linearly extrapolated from the two nearest
    admissible points instead.
    """
    h = s.spacing
    t = float(t)
    lo, hi = h * (1 - 1e-9), s.length - h * (1 - 1e-9)
    if t < lo or t > hi:
        if not allow_pole:
            raise PoleProximityError(f"t={t} lies within one grid cell of a pole")
        base = h if t < lo else s.length - h
        step = h if t < lo else -h
        k1 = gauss_curvature(s, base)
        k2 = gauss_curvature(s, base + step)
        return k1 + (k1 - k2) * (base - t) / step
    fm, f0, fp = s.evaluate(np.array([t - h, t, t + h]))
    return float(-(fp - 2.0 * f0 + fm) / (h * h * f0))


def gauss_curvature_field(s):
    """Gauss curvature at every interior sample point."""
    h = s.spacing
    t = s.t[1:-1]
    f0 = s.evaluate(t)
    return t, -(s.evaluate(t + h) - 2.0 * f0 + s.evaluate(t - h)) / (h * h * f0)


def _as_mode(k):
    k = Fraction(k).limit_denominator(1000)
    if k.denominator != 2:
        raise InvalidModeError(f"mode k={k} is not a half-integer; the spin structure "
                               "on the fiber circle forces k in Z + 1/2")
    return k


def mode_label(k):
    return str(_as_mode(k))


@dataclass(frozen=True)
class ModeProblem:
    """Discretised Dirac operator restricted to one Fourier mode.

    The operator is stored as the off-diagonal of a zero-diagonal
    symmetric tridiagonal matrix in interleaved ordering.
    """

    k: Fraction
    n: int
    offdiag: np.ndarray = field(repr=False)

    @property
    def size(self):
        return 2 * self.n

    @property
    def matrix(self):
        return sp.diags([self.offdiag, self.offdiag], [-1, 1], shape=(self.size, self.size),
                        format="csr")

    def eigenvalues(self, count=None):
        """Eigenvalues closest to zero, ``count`` of each sign (all if None)."""
        n = self.n
        count = n if count is None else min(count, n)
        try:
            w = eigh_tridiagonal(np.zeros(self.size), self.offdiag, eigvals_only=True,
                                 select="i", select_range=(n - count, n + count - 1))
        except (LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"tridiagonal eigensolve failed for mode k={self.k}",
                                   trace={"mode": str(self.k), "n": n}) from exc
        return np.sort(w)


def build_mode_problem(s, k, n):
    k = _as_mode(k)
    if n < 64:
        raise InvalidParameterError("mode problems need n >= 64")
    delta = s.length / (2 * n)
    m = np.arange(2 * n - 1)
    fmid = s.evaluate((m + 1) * delta)
    parity = 1.0 if k > 0 else -1.0
    off = parity * np.where(m % 2 == 0, 1.0, -1.0) / (2 * delta) + float(k) / (2 * fmid)
    return ModeProblem(k, n, off)


def _modes(k_max):
    k_max = _as_mode(k_max)
    if k_max < Fraction(1, 2):
        raise InvalidParameterError("k_max must be at least 1/2")
    ks = [Fraction(2 * j + 1, 2) for j in range(int(k_max - Fraction(1, 2)) + 1)]
    return [-k for k in reversed(ks)] + ks


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    per_mode: dict
    lambda1: float
    multiplicity: int
    zero_margin: float
    error_estimate: float
    n: int
    k_max: Fraction

    def to_json(self):
        return {
            "lambda1": self.lambda1,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "per_mode": {k: [float(x) for x in v] for k, v in self.per_mode.items()},
            "error_estimate": self.error_estimate,
            "multiplicity": self.multiplicity,
            "n": self.n,
            "k_max": str(self.k_max),
        }


def _smallest_positive(s, k_max, n):
    return min(float(np.min(w[w > 0])) for w in
               (build_mode_problem(s, k, n).eigenvalues(1) for k in _modes(k_max)
                if k > 0))


def dirac_spectrum(s, k_max=Fraction(7, 2), n=1024, count_per_mode=4):
    """Eigenvalues of all modes ``|k| <= k_max`` closest to zero.

    ``error_estimate`` is ``|lambda1(2n) - lambda1(n)|``.
    """
    per_mode = {}
    for k in _modes(k_max):
        per_mode[str(k)] = build_mode_problem(s, k, n).eigenvalues(count_per_mode)
    allv = np.sort(np.concatenate(list(per_mode.values())))
    pos = allv[allv > 0]
    lam1 = float(pos[0])
    mult = int(np.sum(np.abs(pos - lam1) <= 1e-6 * lam1))
    fine = _smallest_positive(s, k_max, 2 * n)
    return Spectrum(allv, per_mode, lam1, mult, float(np.min(np.abs(allv))),
                    abs(fine - lam1), n, _as_mode(k_max))


def lambda1(s, k_max=Fraction(7, 2), n0=128, rtol=1e-4, max_refinements=5):
    """First positive eigenvalue, refined by grid doubling until stable."""
    prev = _smallest_positive(s, k_max, n0)
    n = n0
    for _ in range(max_refinements):
        n *= 2
        cur = _smallest_positive(s, k_max, n)
        if abs(cur - prev) < rtol * cur:
            return cur
        prev = cur
    raise NumericalFailure("lambda1 ladder did not converge",
                           trace={"n_final": n, "last": prev, "surface": s.name})
