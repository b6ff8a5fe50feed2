"""Independent reference computations used by the tests.

Nothing here calls the finite-difference or spectral machinery of the
package; each oracle reaches the same quantity by a different route.
"""

import math
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq


# --- scalar curvature ------------------------------------------------------

def cartesian_metric(a, r):
    """Metric of ``a^2 drho^2 + r^2 dOmega^2`` in Cartesian coordinates x.

    ``g_ij = (r/rho)^2 delta_ij + (a^2 - (r/rho)^2) x_i x_j / rho^2``.
    """

    def g(x):
        rho = np.linalg.norm(x)
        n = x / rho
        t = (r(rho) / rho) ** 2
        return t * np.eye(3) + (a(rho) ** 2 - t) * np.outer(n, n)

    return g


def _d4(fn, x, h):
    """Fourth-order central differences of ``fn`` along each axis."""
    out = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        out.append((-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h))
    return np.array(out)


def cartesian_scalar_curvature(a, r, x, h=2e-3):
    """Scalar curvature from Christoffel symbols and the Ricci tensor, all by
    nested finite differences of the 3x3 metric."""
    g = cartesian_metric(a, r)

    def christoffel(y):
        gi = np.linalg.inv(g(y))
        dg = _d4(g, y, h)  # dg[k, i, j] = d_k g_ij
        t = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg  # [l, i, j]
        return 0.5 * np.einsum("kl,lij->kij", gi, t)

    G = christoffel(x)
    dG = _d4(christoffel, x, h)  # dG[m, k, i, j] = d_m Gamma^k_ij
    ric = (np.einsum("kkij->ij", dG) - np.einsum("jkik->ij", dG)
           + np.einsum("kkl,lij->ij", G, G) - np.einsum("kjl,lik->ij", G, G))
    return float(np.einsum("ij,ij->", np.linalg.inv(g(x)), ric))


@lru_cache(maxsize=None)
def _symbolic_R(a_expr, r_expr):
    rho, th, ph = sp.symbols("rho theta phi", positive=True)
    a = sp.sympify(a_expr, locals={"rho": rho})
    r = sp.sympify(r_expr, locals={"rho": rho})
    x = [rho, th, ph]
    g = sp.diag(a ** 2, r ** 2, r ** 2 * sp.sin(th) ** 2)
    gi = g.inv()
    Gam = [[[sum(gi[k, l] * (sp.diff(g[l, i], x[j]) + sp.diff(g[l, j], x[i])
                             - sp.diff(g[i, j], x[l])) for l in range(3)) / 2
             for j in range(3)] for i in range(3)] for k in range(3)]
    ric = sp.zeros(3, 3)
    for i in range(3):
        for j in range(3):
            ric[i, j] = sum(sp.diff(Gam[k][i][j], x[k]) - sp.diff(Gam[k][i][k], x[j])
                            + sum(Gam[k][k][l] * Gam[l][i][j] - Gam[k][j][l] * Gam[l][i][k]
                                  for l in range(3))
                            for k in range(3))
    R = sp.simplify(sum(gi[i, j] * ric[i, j] for i in range(3) for j in range(3)))
    return sp.lambdify(rho, R, "numpy"), R


def symbolic_scalar_curvature(a_expr, r_expr):
    """Lambdified scalar curvature of ``a^2 drho^2 + r^2 dOmega^2`` from the
    full coordinate Christoffel computation in sympy."""
    fn, _ = _symbolic_R(a_expr, r_expr)
    return lambda rho: np.broadcast_to(fn(np.asarray(rho, float)), np.shape(rho)).astype(float)


FAMILY_EXPRESSIONS = {
    "euclidean": ("1", "rho"),
    "hyperbolic_unit": ("1/sqrt(1 + rho**2)", "rho"),
    "schwarzschild_isotropic": ("(1 + 1/(2*rho))**2", "rho*(1 + 1/(2*rho))**2"),
    "round_s3": ("1/sqrt(1 - rho**2/4)", "rho"),
}


# --- spheroids -------------------------------------------------------------

def meridian_length(a, c):
    val, _ = quad(lambda p: math.sqrt((a * math.cos(p)) ** 2 + (c * math.sin(p)) ** 2),
                  0.0, math.pi / 2, epsabs=0.0, epsrel=1e-12, limit=200)
    return 2.0 * val


def spheroid_area(a, c):
    """Closed-form area of the spheroid with semi-axes (a, a, c)."""
    if math.isclose(a, c):
        return 4.0 * math.pi * a * a
    if c > a:
        e = math.sqrt(1.0 - a * a / (c * c))
        return 2.0 * math.pi * a * a * (1.0 + c / (a * e) * math.asin(e))
    e = math.sqrt(1.0 - c * c / (a * a))
    return 2.0 * math.pi * a * a * (1.0 + (1.0 - e * e) / e * math.atanh(e))


def spheroid_gauss(a, c, phi):
    """Gauss curvature at polar angle ``phi`` (0 at the pole)."""
    s2 = (a * math.cos(phi)) ** 2 + (c * math.sin(phi)) ** 2
    return c * c / s2 ** 2


# --- Dirac modes by shooting -------------------------------------------------

def _mode_rhs(f, k, lam):
    def rhs(t, y):
        ft = f(t)
        return [k / ft * y[0] - lam * y[1], lam * y[0] - k / ft * y[1]]
    return rhs


def _mismatch(f, length, k, lam, t0):
    """Wronskian of the two pole-regular solutions at mid-length.

    Components ``(chi1, chi2)`` solve ``chi2' + k/f chi2 = lam chi1`` and
    ``-chi1' + k/f chi1 = lam chi2``.  For k > 0 the regular solution has
    ``chi1 ~ t^k`` at the first pole and ``chi2 ~ s^k`` at the second.
    """
    k = abs(k)
    mid = 0.5 * length
    left = [t0 ** k, lam * t0 ** (k + 1) / (2 * k + 1)]
    sl = solve_ivp(_mode_rhs(f, k, lam), (t0, mid), left, rtol=1e-11, atol=1e-14,
                   method="DOP853")
    right = [lam * t0 ** (k + 1) / (2 * k + 1), t0 ** k]
    sr = solve_ivp(_mode_rhs(f, k, lam), (length - t0, mid), right, rtol=1e-11, atol=1e-14,
                   method="DOP853")
    yl, yr = sl.y[:, -1], sr.y[:, -1]
    yl = yl / np.linalg.norm(yl)
    yr = yr / np.linalg.norm(yr)
    return yl[0] * yr[1] - yl[1] * yr[0]


def shooting_eigenvalue(f, length, k, guess, width=0.05, t0=1e-5):
    """Eigenvalue of the mode-``k`` operator bracketed around ``guess``."""
    lo, hi = guess * (1 - width), guess * (1 + width)
    return brentq(lambda lam: _mismatch(f, length, k, lam, t0), lo, hi, xtol=1e-13)


# --- Jang -------------------------------------------------------------------

def hyperboloid_height(rho, rho_b, radius=1.0):
    """Jang graph of the umbilic slice K = g/R: the hyperboloid itself."""
    return (np.sqrt(radius ** 2 + rho ** 2) - np.sqrt(radius ** 2 + rho_b ** 2))


def schoen_yau_rhs(sol, mu, J_rad):
    """Right side ``2 (mu + J(nu)) + |hhat - K|^2`` of the pointwise
    Schoen-Yau identity on a radial Jang graph.

    Derivatives come from cubic splines, not the package stencils.  On the
    graph ``hhat_rr = u_ss / S^(3/2)``, ``hhat_TT = (r_s / r) v / sqrt(S)``,
    the induced ``K_rr = kappa_rho / S``, ``K_TT = kappa_T``, and
    ``J(nu) = -J_rad v / sqrt(S)`` with ``v = u'/a``, ``S = 1 + v^2``.
    """
    d = sol.data
    rho, a, r = d.rho, d.a, d.r
    U, A, R = CubicSpline(rho, sol.u), CubicSpline(rho, a), CubicSpline(rho, r)
    du = U(rho, 1)
    v = du / a
    S = 1.0 + v * v
    u_ss = U(rho, 2) / a ** 2 - du * A(rho, 1) / a ** 3
    h_rr = u_ss / S ** 1.5
    h_tt = (R(rho, 1) / a) / r * v / np.sqrt(S)
    second = (h_rr - d.kappa_rho / S) ** 2 + 2.0 * (h_tt - d.kappa_T) ** 2
    return 2.0 * (mu + J_rad * v / np.sqrt(S)) + second
