"""Dirichlet problem for the Jang equation in spherical symmetry.

For a radial height function ``u(rho)`` write ``v = u'/a`` for its
``g``-gradient length (with sign) and ``S = 1 + v^2``.  The Jang operator
reduces to

    u_ss / S^(3/2) + 2 (r_s / r) v / S^(1/2) - kappa_rho / S - 2 kappa_T

where ``s`` is proper radial distance.  The graph metric is
``ghat = (a^2 + u'^2) drho^2 + r^2 dOmega^2`` and ``f = S^(-1/2)``.
"""

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ._fd import diff_matrix
from .errors import InvalidParameterError, NumericalFailure, PreconditionViolation
from .initial_data import (constraint_fields, core_flux_at, radial_divergence,
                           warped_scalar_curvature)
from .sphere_slices import classify, horizon_scan


def _pieces(d, u):
    D1, D2 = diff_matrix(d.rho, 1), diff_matrix(d.rho, 2)
    du, d2u = D1 @ u, D2 @ u
    da, dr = D1 @ d.a, D1 @ d.r
    return du, d2u, da, dr


def jang_residual(d, u):
    """Pointwise Jang operator applied to ``u`` on the grid of ``d``."""
    u = np.asarray(u, float)
    du, d2u, da, dr = _pieces(d, u)
    return _residual(d, du, d2u, da, dr)


def _residual(d, du, d2u, da, dr):
    a, r = d.a, d.r
    v = du / a
    S = 1.0 + v * v
    u_ss = d2u / a ** 2 - du * da / a ** 3
    return (u_ss / S ** 1.5 + 2.0 * (dr / a) / r * v / np.sqrt(S)
            - d.kappa_rho / S - 2.0 * d.kappa_T)


def _jacobian_coeffs(d, du, d2u, da, dr):
    """Partial derivatives of the residual w.r.t. ``u'`` and ``u''``."""
    a, r = d.a, d.r
    v = du / a
    S = 1.0 + v * v
    u_ss = d2u / a ** 2 - du * da / a ** 3
    c2 = 1.0 / (a ** 2 * S ** 1.5)
    c1 = (-da / (a ** 3 * S ** 1.5) - 3.0 * u_ss * v / (a * S ** 2.5)
          + 2.0 * (dr / a) / (r * a * S ** 1.5) + 2.0 * d.kappa_rho * v / (a * S ** 2))
    return c1, c2


@dataclass(frozen=True)
class JangSolution:
    rho: np.ndarray
    u: np.ndarray
    du: np.ndarray
    f_lapse: np.ndarray
    ghat_a: np.ndarray
    X_rad: np.ndarray
    sy_margin: np.ndarray
    residual_norm: float
    iterations: int
    data: object = field(repr=False)
    inner_slope: float = 0.0
    history: tuple = ()

    @property
    def rho_b(self):
        return float(self.rho[-1])

    def summary(self):
        return {"rho_min": float(self.rho[0]), "rho_b": self.rho_b, "n": len(self.rho),
                "iterations": self.iterations, "residual_norm": self.residual_norm,
                "inner_slope": self.inner_slope,
                "max_abs_u": float(np.max(np.abs(self.u))),
                "max_abs_X_rad": float(np.max(np.abs(self.X_rad))),
                "min_sy_margin": float(np.min(self.sy_margin)),
                "max_abs_sy_margin": float(np.max(np.abs(self.sy_margin))),
                "max_abs_Rhat": float(np.max(np.abs(graph_scalar_curvature(self)))),
                "history": list(self.history)}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rho", "u", "du", "f", "ghat_a", "X_rad", "sy_margin"])
        for row in zip(self.rho, self.u, self.du, self.f_lapse, self.ghat_a, self.X_rad,
                       self.sy_margin):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _check_no_horizon(d, rho_b):
    interior = [h for h in horizon_scan(d, (d.rho[0], rho_b)) if h.rho < rho_b - 1e-10]
    if interior:
        raise PreconditionViolation(
            "no apparent horizon",
            f"apparent horizon at rho={interior[0].rho:.12g} inside [{d.rho[0]}, {rho_b}]; "
            "the Jang graph blows up there",
            witness=[{"rho": h.rho, "expansions": list(h.expansions)} for h in interior])


def solve_jang_dirichlet(d, rho_b, n=None, max_iter=60, max_halvings=20):
    """Solve Jang's equation on ``[rho_min, rho_b]`` with ``u(rho_b) = 0``.

    The inner end carries the regular-graph slope ``u'(rho_min)``
    from :func:`~diracbounds.initial_data.core_flux_at`.  Damped Newton
    from ``u = 0`` with step halving on the max-norm of the full system.
    """
    rho_b = float(rho_b)
    if not d.rho[0] < rho_b <= d.rho[-1] + 1e-12:
        raise InvalidParameterError(f"rho_b={rho_b} outside ({d.rho[0]}, {d.rho[-1]}]")
    _check_no_horizon(d, rho_b)
    if n is None:
        n = max(64, int(np.sum(d.rho <= rho_b + 1e-12)))
    dd = d.resample(np.linspace(d.rho[0], rho_b, n))
    w0 = core_flux_at(dd, dd.rho[0])
    if abs(w0) >= 1.0:
        raise NumericalFailure("regular Jang graph is vertical at the inner end",
                               trace={"w_inner": w0})
    slope0 = float(dd.a[0] * w0 / np.sqrt(1.0 - w0 * w0))

    D1, D2 = diff_matrix(dd.rho, 1), diff_matrix(dd.rho, 2)
    da, dr = D1 @ dd.a, D1 @ dd.r

    def system(u):
        du, d2u = D1 @ u, D2 @ u
        F = _residual(dd, du, d2u, da, dr)
        F[0] = du[0] - slope0
        F[-1] = u[-1]
        return F, du, d2u

    tol = 1e-8 * n
    u = np.zeros(n)
    F, du, d2u = system(u)
    norm = float(np.max(np.abs(F)))
    history = [norm]
    it = 0
    for it in range(1, max_iter + 1):
        if norm <= 1e-13 * max(1.0, float(np.max(np.abs(dd.trace_K)))):
            it -= 1
            break
        c1, c2 = _jacobian_coeffs(dd, du, d2u, da, dr)
        J = (sp.diags(c1) @ D1 + sp.diags(c2) @ D2).tolil()
        J[0, :] = D1[0, :].toarray()
        J[-1, :] = 0.0
        J[-1, n - 1] = 1.0
        try:
            step = spsolve(J.tocsc(), -F)
        except RuntimeError as exc:
            raise NumericalFailure("singular Jang Jacobian", trace={"history": history}) from exc
        if not np.all(np.isfinite(step)):
            raise NumericalFailure("non-finite Newton step", trace={"history": history})
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = u + lam * step
            trial[-1] = 0.0  # Dirichlet row, kept exact
            Ft, dut, d2ut = system(trial)
            nt = float(np.max(np.abs(Ft)))
            if np.isfinite(nt) and nt < norm:
                break
            lam *= 0.5
        else:
            if norm <= tol:
                # stalled at the rounding floor of the difference operators
                it -= 1
                break
            raise NumericalFailure("Newton line search failed",
                                   trace={"history": history, "iteration": it})
        u, F, du, d2u, norm = trial, Ft, dut, d2ut, nt
        history.append(norm)
        if float(np.max(np.abs(lam * step))) <= 1e-12 * (1.0 + np.max(np.abs(u))):
            break
    else:
        raise NumericalFailure("Newton did not converge", trace={"history": history})

    interior = float(np.max(np.abs(F[1:-1])))
    if interior > tol:
        raise NumericalFailure("Jang residual above tolerance",
                               trace={"history": history, "residual": interior})
    v = du / dd.a
    f_lapse = 1.0 / np.sqrt(1.0 + v * v)
    ghat_a = np.sqrt(dd.a ** 2 + du ** 2)
    sol = JangSolution(dd.rho, u, du, f_lapse, ghat_a, np.zeros(n), np.zeros(n), interior,
                       it, dd, slope0, tuple(history))
    X = jang_vector_field(dd, sol)
    sol = replace(sol, X_rad=X)
    return replace(sol, sy_margin=schoen_yau_margin(dd, sol))


def jang_vector_field(d, sol):
    """Radial ``ghat``-orthonormal component of ``X = omega - grad log f``.

    ``omega`` is the graph-tangent part of the dual of ``-K(., nu)``; for a
    radial graph it reduces to ``-kappa_rho v f^2``.
    """
    d = sol.data
    v = sol.du / d.a
    omega = -d.kappa_rho * v * sol.f_lapse ** 2
    dlogf = diff_matrix(d.rho, 1) @ np.log(sol.f_lapse)
    return omega - dlogf / sol.ghat_a


def graph_scalar_curvature(sol):
    return warped_scalar_curvature(sol.rho, sol.ghat_a, sol.data.r)


DIVERGENCE_SIGN = {"negative": -1.0, "standard": 1.0}


def schoen_yau_margin(d, sol, convention="negative"):
    """``Rhat - 2|X|^2 - 2 div X - 2 (mu - |J|)`` on the graph.

    ``convention="negative"`` reads ``div X = -sum nabla_i X_i``; with
    ``X = omega - grad log f`` this is the sign under which the pointwise
    Schoen-Yau identity holds, so DEC data give a nonnegative margin.
    ``"standard"`` drops the minus sign.
    """
    try:
        sign = DIVERGENCE_SIGN[convention]
    except KeyError:
        raise InvalidParameterError(f"unknown divergence convention {convention!r}") from None
    dd = sol.data
    X = sol.X_rad
    div = sign * radial_divergence(dd.rho, sol.ghat_a, dd.r, X)
    cf = constraint_fields(dd)
    return graph_scalar_curvature(sol) - 2.0 * X * X - 2.0 * div - 2.0 * (cf.mu - np.abs(cf.J_rad))


def boundary_identity_check(d, sol, eps=1e-6):
    """Boundary mean-curvature identity and bound at ``rho_b``.

    ``lhs = Hhat - ghat(X, Nhat)`` with ``Nhat`` the outward normal is
    compared with ``H/f - sigma |grad u| Tr_Sigma K`` for both signs and with
    ``sqrt(H^2 - Tr_Sigma K^2)``.
    """
    dd = sol.data
    D1 = diff_matrix(dd.rho, 1)
    dr = (D1 @ dd.r)[-1]
    r, a = dd.r[-1], dd.a[-1]
    H = 2.0 * dr / (a * r)
    T = 2.0 * dd.kappa_T[-1]
    cls = classify(H + T, H - T)
    if cls != "untrapped":
        raise PreconditionViolation("untrapped boundary",
                                    f"boundary slice is {cls}",
                                    witness={"theta_plus": H + T, "theta_minus": H - T})
    f = sol.f_lapse[-1]
    grad = abs(sol.du[-1] / a)
    hhat = 2.0 * dr / (sol.ghat_a[-1] * r)
    lhs = hhat - sol.X_rad[-1]
    rhs = {"+1": H / f - grad * T, "-1": H / f + grad * T}
    sigma = min(rhs, key=lambda k: abs(rhs[k] - lhs))
    bound = float(np.sqrt(H * H - T * T))
    scale = max(1.0, abs(bound))
    return {"lhs": float(lhs), "Hhat": float(hhat), "X_normal": float(sol.X_rad[-1]),
            "rhs_formula": {k: float(v) for k, v in rhs.items()}, "sigma": int(sigma),
            "identity_gap": float(abs(rhs[sigma] - lhs)), "rhs_bound": bound,
            "holds": bool(lhs >= bound - eps * scale)}
