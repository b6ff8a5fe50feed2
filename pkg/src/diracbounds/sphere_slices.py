"""Coordinate spheres in a spherically symmetric slice.

Sign conventions are anchored on the Euclidean unit sphere having mean
curvature ``H = +2``; in the warped metric this gives ``H = 2 r' / (a r)``.
"""

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import InvalidParameterError

CLASSES = ("untrapped", "future_trapped", "past_trapped", "apparent_horizon", "degenerate")


def default_tol(theta_plus, theta_minus):
    return 1e-8 * max(abs(theta_plus), abs(theta_minus), 1.0)


def classify(theta_plus, theta_minus, tol=None):
    """Trapping class of a 2-surface from its null expansions.

    A vanishing expansion wins over a trapped sign, so ``apparent_horizon``
    holds exactly when ``min(|theta+|, |theta-|) <= tol``.
    """
    if tol is None:
        tol = default_tol(theta_plus, theta_minus)
    if not tol > 0:
        raise InvalidParameterError("classification tolerance must be positive")
    if abs(theta_plus) <= tol or abs(theta_minus) <= tol:
        return "apparent_horizon"
    if theta_plus < -tol and theta_minus < -tol:
        return "degenerate"
    if theta_plus < -tol:
        return "future_trapped"
    if theta_minus < -tol:
        return "past_trapped"
    return "untrapped"


@dataclass(frozen=True)
class SphereSlice:
    rho: float
    area_radius: float
    H: float
    trK_sigma: float
    theta_plus: float
    theta_minus: float
    classification: str
    h_norm_sq: float
    one_sided: bool = False

    def to_json(self):
        return {"rho": self.rho, "area_radius": self.area_radius, "H": self.H,
                "trK_sigma": self.trK_sigma, "theta_plus": self.theta_plus,
                "theta_minus": self.theta_minus, "classification": self.classification,
                "h_norm_sq": self.h_norm_sq, "one_sided": self.one_sided}


def make_slice(rho, area_radius, H, trK_sigma, tol=None, one_sided=False):
    tp, tm = H + trK_sigma, H - trK_sigma
    return SphereSlice(float(rho), float(area_radius), float(H), float(trK_sigma),
                       float(tp), float(tm), classify(tp, tm, tol),
                       float(H * H - trK_sigma * trK_sigma), one_sided)


def mean_curvature_field(d):
    """``H(rho) = 2 r'/(a r)`` on the data grid."""
    return 2.0 * d.dr / (d.a * d.r)


def expansion_fields(d):
    """``(H, Tr_Sigma K, theta+, theta-)`` on the data grid."""
    H = mean_curvature_field(d)
    T = 2.0 * d.kappa_T
    return H, T, H + T, H - T


class _Interpolants:
    def __init__(self, d):
        H, T, _, _ = expansion_fields(d)
        self.H = CubicSpline(d.rho, H)
        self.T = CubicSpline(d.rho, T)
        self.r = CubicSpline(d.rho, d.r)


def slice(d, rho, tol=None):  # noqa: A001 - mirrors the operation name
    """Extrinsic data of the coordinate sphere at ``rho``.

    Off-grid radii are interpolated with cubic splines of the grid fields.
    At the two outermost cells derivatives come from one-sided stencils;
    the result is flagged and a warning is issued.
    """
    rho = float(rho)
    lo, hi = d.rho[0], d.rho[-1]
    if rho < lo or rho > hi:
        raise InvalidParameterError(f"rho={rho} lies outside the grid [{lo}, {hi}]")
    one_sided = rho < d.rho[3] or rho > d.rho[-4]
    if one_sided:
        warnings.warn(f"slice at rho={rho} uses one-sided differences", RuntimeWarning,
                      stacklevel=2)
    ip = _Interpolants(d)
    return make_slice(rho, ip.r(rho), ip.H(rho), ip.T(rho), tol, one_sided)


def slice_table(d, tol=None):
    H, T, _, _ = expansion_fields(d)
    return [make_slice(p, r, h, t, tol) for p, r, h, t in zip(d.rho, d.r, H, T)]


def slices_csv(d, tol=None):
    """CSV text with columns rho, H, trK_sigma, theta_plus, theta_minus, class."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "H", "trK_sigma", "theta_plus", "theta_minus", "class"])
    for s in slice_table(d, tol):
        w.writerow([repr(s.rho), repr(s.H), repr(s.trK_sigma), repr(s.theta_plus),
                    repr(s.theta_minus), s.classification])
    return buf.getvalue()


@dataclass(frozen=True)
class Horizon:
    rho: float
    expansions: tuple


def horizon_scan(d, interval=None, xtol=1e-12):
    """Sign changes of theta+ and theta- inside ``interval``.

    Brackets come from the grid; each root is refined with Brent's method on
    the spline interpolants.  Roots shared by both expansions (within 1e-9)
    are merged.
    """
    if interval is None:
        interval = (d.rho[0], d.rho[-1])
    a, b = map(float, interval)
    if a < d.rho[0] - 1e-12 or b > d.rho[-1] + 1e-12 or not a < b:
        raise InvalidParameterError(f"scan interval {interval} not inside the grid")
    ip = _Interpolants(d)
    nodes = np.concatenate([[a], d.rho[(d.rho > a) & (d.rho < b)], [b]])
    found = []
    for name, fn in (("plus", lambda x: ip.H(x) + ip.T(x)),
                     ("minus", lambda x: ip.H(x) - ip.T(x))):
        vals = fn(nodes)
        for i in range(len(nodes) - 1):
            v0, v1 = vals[i], vals[i + 1]
            if v0 == 0.0:
                found.append((float(nodes[i]), name))
            elif v0 * v1 < 0:
                found.append((brentq(fn, nodes[i], nodes[i + 1], xtol=xtol), name))
        if vals[-1] == 0.0:
            found.append((float(nodes[-1]), name))
    found.sort()
    merged = []
    for rho, name in found:
        if merged and abs(merged[-1][0] - rho) <= 1e-9:
            if name not in merged[-1][1]:
                merged[-1][1].append(name)
            continue
        merged.append([rho, [name]])
    return [Horizon(r, tuple(n)) for r, n in merged]
