"""Eigenvalue bounds for the Dirac operator of a boundary 2-sphere.

Bounds compared against the measured first positive eigenvalue:

* spacetime lower bound ``1/2 inf sqrt(H^2 - Tr_Sigma K^2)``,
* Riemannian lower bound ``1/2 inf (H + g(X, N))`` on the Jang graph,
* upper bound ``1/2 sup sqrt(H^2 - Tr_Sigma K^2)`` (Minkowski slices with
  constant ``Tr_Sigma K``),
* the intrinsic bounds of Baer, ``sqrt(4 pi / Area)``, and Friedrich,
  ``sqrt(inf K_Sigma)``.

``N`` is the inner unit normal of the boundary, so ``g(X, N) = -X_rad``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dirac_spectrum as ds
from .errors import InvalidParameterError, PreconditionViolation
from .initial_data import check_dec
from .jang import boundary_identity_check, solve_jang_dirichlet
from .sphere_slices import expansion_fields, horizon_scan, make_slice

EQUALITY_RTOL = 1e-3
ROUND_RTOL = 1e-3
TRK_CONST_TOL = 1e-10
HOLDS_RTOL = 1e-6

# Families that are slices of Minkowski space (upper bound and rigidity apply).
MINKOWSKI_FAMILIES = ("euclidean", "hyperbolic_unit", "hyperbolic")


def _check(name, satisfied, witness=None):
    return {"name": name, "satisfied": bool(satisfied), "witness": witness}


def _mean_curvature_norm(H, T):
    H = np.atleast_1d(np.asarray(H, float))
    T = np.broadcast_to(np.asarray(T, float), H.shape)
    tp, tm = H + T, H - T
    bad = (tp <= 0) | (tm <= 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PreconditionViolation(
            "untrapped surface", "mean curvature vector is not spacelike and outward",
            witness={"index": i, "theta_plus": float(tp[i]), "theta_minus": float(tm[i])})
    return np.sqrt(tp * tm)


def lower_bound_spacetime(slice_or_H, trK=None):
    """``1/2 inf sqrt(theta+ theta-)`` over an untrapped surface.

    Accepts a :class:`~diracbounds.sphere_slices.SphereSlice` or pointwise
    fields ``H`` and ``Tr_Sigma K``.
    """
    if trK is None:
        s = slice_or_H
        if s.classification != "untrapped":
            raise PreconditionViolation(
                "untrapped surface", f"slice at rho={s.rho} is {s.classification}",
                witness={"theta_plus": s.theta_plus, "theta_minus": s.theta_minus})
        return 0.5 * math.sqrt(s.theta_plus * s.theta_minus)
    return 0.5 * float(np.min(_mean_curvature_norm(slice_or_H, trK)))


def lower_bound_riemannian(H_field, X_normal_field, tol=1e-12):
    """``1/2 inf (H + g(X, N))`` under the hypothesis ``H >= -g(X, N)``."""
    s = np.atleast_1d(np.asarray(H_field, float)) + np.atleast_1d(
        np.asarray(X_normal_field, float))
    scale = max(1.0, float(np.max(np.abs(H_field))))
    if np.any(s < -tol * scale):
        i = int(np.argmin(s))
        raise PreconditionViolation("H >= -g(X,N)", "boundary mean curvature too negative",
                                    witness={"index": i, "H_plus_XN": float(s[i])})
    return 0.5 * float(np.min(s))


def upper_bound(slice_or_H, trK=None, const_tol=TRK_CONST_TOL):
    """``1/2 sup sqrt(H^2 - Tr_Sigma K^2)``; needs constant ``Tr_Sigma K``."""
    if trK is None:
        s = slice_or_H
        return 0.5 * float(_mean_curvature_norm(s.H, s.trK_sigma)[0])
    T = np.atleast_1d(np.asarray(trK, float))
    spread = float(np.max(T) - np.min(T))
    if spread > const_tol * max(1.0, float(np.max(np.abs(T)))):
        raise PreconditionViolation("Tr_Sigma K constant", "trace of K along the surface varies",
                                    witness={"spread": spread})
    return 0.5 * float(np.max(_mean_curvature_norm(slice_or_H, T)))


def baer_bound(area):
    return math.sqrt(4.0 * math.pi / area)


def friedrich_bound(min_gauss):
    """``(value, vacuous)``; the bound is vacuous when ``inf K <= 0``."""
    return math.sqrt(max(0.0, min_gauss)), bool(min_gauss <= 0)


def dec_tolerance(d):
    """Tolerance for the DEC check that tracks the constraint scale and the
    rounding floor of the second-derivative stencil."""
    scale = max(1.0, float(np.max(2.0 / d.r ** 2)), float(np.max(d.norm_K_sq + d.trace_K ** 2)))
    h = float(np.min(np.diff(d.rho)))
    floor = 64.0 * np.finfo(float).eps / (float(np.min(d.a)) * h) ** 2
    return 1e-8 * scale + floor


@dataclass(frozen=True)
class ModelSurface:
    """A closed surface in a model slice of Minkowski space.

    ``H`` and ``trK`` are samples of the mean curvature and of
    ``Tr_Sigma K`` along the meridian; ``ambient`` is ``"euclidean"``
    (``K = 0``) or ``"hyperbolic"`` (``K = g``).
    """

    surface: ds.RevolutionSurface
    H: np.ndarray = field(repr=False)
    trK: np.ndarray = field(repr=False)
    ambient: str
    name: str

    @property
    def is_round(self):
        return bool(np.ptp(self.H) <= 1e-12 * np.max(np.abs(self.H)))


def _meridian(A, C, nphi=4097):
    phi = np.linspace(0.0, math.pi, nphi)
    speed = np.sqrt((A * np.cos(phi)) ** 2 + (C * np.sin(phi)) ** 2)
    h_euc = A * C / speed ** 3 + C / (A * speed)
    x_dot_n = A * C / speed
    q = (A * np.sin(phi)) ** 2 + (C * np.cos(phi)) ** 2
    return phi, h_euc, x_dot_n, q


def euclidean_spheroid(A, C, n=2048):
    """Spheroid with semi-axes ``(A, A, C)`` in flat space."""
    s = ds.spheroid_profile(A, C, n)
    _, h, _, _ = _meridian(A, C)
    return ModelSurface(s, h, np.zeros_like(h), "euclidean", f"euclidean_spheroid({A:g},{C:g})")


def hyperbolic_spheroid(A, C, n=2048):
    """Spheroid ``x^2/A^2 + z^2/C^2 = 1`` in the Poincare ball model.

    The conformal factor ``e^w = 2/(1 - |x|^2)`` gives the induced profile,
    and ``H = e^-w (H_euc + 2 dw/dn)`` the hyperbolic mean curvature.  In the
    umbilic slice ``K = g`` of Minkowski space ``Tr_Sigma K = 2``.
    """
    if not (0 < A < 1 and 0 < C < 1):
        raise InvalidParameterError("semi-axes must lie inside the unit ball")

    def q(p):
        return (A * np.sin(p)) ** 2 + (C * np.cos(p)) ** 2

    def radius(p):
        return 2.0 * A * np.sin(p) / (1.0 - q(p))

    def dradius(p):
        dq = 2.0 * (A * A - C * C) * np.sin(p) * np.cos(p)
        return 2.0 * A * np.cos(p) / (1.0 - q(p)) + 2.0 * A * np.sin(p) * dq / (1.0 - q(p)) ** 2

    def speed(p):
        return 2.0 * np.sqrt((A * np.cos(p)) ** 2 + (C * np.sin(p)) ** 2) / (1.0 - q(p))

    s = ds.meridian_surface(radius, dradius, speed, math.pi, n,
                            f"hyperbolic_spheroid({A:g},{C:g})")
    _, h_euc, xn, qq = _meridian(A, C)
    h = 0.5 * (1.0 - qq) * (h_euc + 4.0 * xn / (1.0 - qq))
    return ModelSurface(s, h, np.full_like(h, 2.0), "hyperbolic", s.name)


@dataclass(frozen=True)
class BoundReport:
    lambda1: float
    lambda1_source: str
    lower_spacetime: float = None
    lower_riemannian: float = None
    upper: float = None
    baer: float = None
    friedrich: float = None
    friedrich_vacuous: bool = False
    flags: dict = field(default_factory=dict)
    gaps: dict = field(default_factory=dict)
    hypotheses: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    cross_check: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)

    @property
    def all_hold(self):
        keys = ("lower_holds", "upper_holds", "riemannian_holds", "baer_holds",
                "friedrich_holds")
        return all(self.flags.get(k) is not False for k in keys)

    def to_json(self):
        out = {}
        for name in ("lambda1", "lambda1_source", "lower_spacetime", "lower_riemannian",
                     "upper", "baer", "friedrich", "friedrich_vacuous"):
            out[name] = getattr(self, name)
        out.update(flags=dict(self.flags), gaps=dict(self.gaps),
                   hypotheses=list(self.hypotheses), tolerances=dict(self.tolerances),
                   cross_check=dict(self.cross_check), context=dict(self.context))
        return out


def _rel_gap(value, lam):
    return None if value is None else abs(lam - value) / lam


def _assemble(lam, source, holds_rtol, *, lower=None, riem=None, upper=None, area=None,
              kmin=None, kmax=None, upper_applies=False, hypotheses=(), cross=None,
              context=None):
    baer = None if area is None else baer_bound(area)
    fried, vacuous = (None, False) if kmin is None else friedrich_bound(kmin)
    eps = holds_rtol * lam

    def below(b):
        return None if b is None else bool(b <= lam + eps)

    flags = {
        "lower_holds": below(lower),
        "riemannian_holds": below(riem),
        "upper_holds": bool(lam <= upper + eps) if upper is not None and upper_applies else None,
        "baer_holds": below(baer),
        "friedrich_holds": below(fried),
    }
    gaps = {"lower_spacetime": _rel_gap(lower, lam), "lower_riemannian": _rel_gap(riem, lam),
            "upper": _rel_gap(upper, lam), "baer": _rel_gap(baer, lam),
            "friedrich": _rel_gap(fried, lam)}
    flags["equality_lower"] = bool(lower is not None and gaps["lower_spacetime"] <= EQUALITY_RTOL)
    flags["equality_upper"] = bool(upper is not None and upper_applies
                                   and gaps["upper"] <= EQUALITY_RTOL)
    spread = None
    if kmin is not None:
        spread = (kmax - kmin) / max(abs(kmax), abs(kmin), 1e-300)
    flags["round_metric"] = bool(spread is not None and spread <= ROUND_RTOL)
    flags["rigidity_round_sphere"] = bool(flags["equality_lower"] and flags["round_metric"])
    return BoundReport(lam, source, lower, riem, upper if upper_applies else None, baer, fried,
                       vacuous, flags, gaps, list(hypotheses),
                       {"equality_rtol": EQUALITY_RTOL, "round_rtol": ROUND_RTOL,
                        "holds_rtol": holds_rtol, "trK_const_tol": TRK_CONST_TOL,
                        "gauss_spread": spread},
                       cross or {}, dict(context or {}, upper_applicable=bool(upper_applies),
                                         upper_value=upper))


def _numeric_holds_rtol(lam, err):
    return HOLDS_RTOL + 10.0 * err / lam


def verify_data(d, rho_b, k_max=Fraction(7, 2), n=1024, jang=True, jang_solution=None,
                numeric_check=True):
    """Bounds for the coordinate sphere ``rho = rho_b`` of a data set.

    Raises :class:`PreconditionViolation` naming the failing hypothesis of
    the spacetime inequality (no apparent horizon inside, untrapped
    boundary, DEC).
    """
    rho_b = float(rho_b)
    if not d.rho[0] < rho_b <= d.rho[-1] + 1e-12:
        raise InvalidParameterError(f"rho_b={rho_b} outside ({d.rho[0]}, {d.rho[-1]}]")
    hyps = []
    dd = d.resample(np.linspace(d.rho[0], rho_b, max(64, int(np.sum(d.rho <= rho_b + 1e-12)))))
    roots = [h for h in horizon_scan(dd) if h.rho < rho_b - 1e-10]
    witness = [{"rho": h.rho, "expansions": list(h.expansions)} for h in roots]
    hyps.append(_check("no apparent horizon", not roots, witness))
    if roots:
        raise PreconditionViolation(
            "no apparent horizon", f"apparent horizon at rho={roots[0].rho:.12g}",
            witness=witness)
    H, T, _, _ = expansion_fields(dd)
    sl = make_slice(rho_b, dd.r[-1], H[-1], T[-1], one_sided=True)
    witness = {"theta_plus": sl.theta_plus, "theta_minus": sl.theta_minus,
               "classification": sl.classification}
    hyps.append(_check("untrapped boundary", sl.classification == "untrapped", witness))
    if sl.classification != "untrapped":
        raise PreconditionViolation("untrapped boundary",
                                    f"boundary sphere is {sl.classification}", witness=witness)
    tol = dec_tolerance(dd)
    dec = check_dec(dd, tol=tol)
    hyps.append(_check("dominant energy condition", dec.holds,
                       {"min_margin": dec.min_margin, "rho": dec.location, "tol": tol}))
    if not dec.holds:
        raise PreconditionViolation("dominant energy condition",
                                    f"mu - |J| = {dec.min_margin:.3g} at rho={dec.location:.6g}",
                                    witness=dec.to_json())
    lower = lower_bound_spacetime(sl)
    minkowski = d.family in MINKOWSKI_FAMILIES
    hyps.append(_check("Minkowski slice", minkowski, {"family": d.family}))
    hyps.append(_check("Tr_Sigma K constant", True, {"spread": 0.0}))
    upper = upper_bound(sl)

    r_b = float(dd.r[-1])
    lam = 1.0 / r_b
    cross = {}
    if numeric_check:
        spec = ds.dirac_spectrum(ds.sphere_profile(r_b), k_max=k_max, n=n, count_per_mode=1)
        cross = {"lambda1_numeric": spec.lambda1, "error_estimate": spec.error_estimate,
                 "relative_difference": abs(spec.lambda1 - lam) / lam, "n": n}

    riem = None
    context = {"rho_b": rho_b, "area_radius": r_b, "family": d.family,
               "slice": sl.to_json()}
    if jang:
        sol = jang_solution or solve_jang_dirichlet(d, rho_b)
        bic = boundary_identity_check(d, sol)
        riem_ok = bic["lhs"] >= -1e-12 * max(1.0, abs(bic["Hhat"]))
        hyps.append(_check("H >= -g(X,N)", riem_ok, {"Hhat": bic["Hhat"],
                                                      "g(X,N)": -bic["X_normal"]}))
        riem = lower_bound_riemannian([bic["Hhat"]], [-bic["X_normal"]])
        hyps.append(_check("boundary identity", bic["holds"], bic))
        context["jang"] = {"residual_norm": sol.residual_norm, "iterations": sol.iterations}
    return _assemble(lam, "analytic", HOLDS_RTOL, lower=lower, riem=riem, upper=upper,
                     area=4.0 * math.pi * r_b ** 2, kmin=1.0 / r_b ** 2, kmax=1.0 / r_b ** 2,
                     upper_applies=minkowski, hypotheses=hyps, cross=cross, context=context)


def _intrinsic(s, k_max, n):
    spec = ds.dirac_spectrum(s, k_max=k_max, n=n, count_per_mode=1)
    _, K = ds.gauss_curvature_field(s)
    return spec, ds.area(s), float(np.min(K)), float(np.max(K))


def verify_surface(surface, k_max=Fraction(7, 2), n=1024):
    """Bounds for a revolution surface, with extrinsic data when available."""
    model = surface if isinstance(surface, ModelSurface) else None
    s = model.surface if model else surface
    spec, area_, kmin, kmax = _intrinsic(s, k_max, n)
    lam = spec.lambda1
    rtol = _numeric_holds_rtol(lam, spec.error_estimate)
    cross = {"error_estimate": spec.error_estimate, "n": n, "multiplicity": spec.multiplicity}
    context = {"surface": s.name, "area": area_, "gauss_min": kmin, "gauss_max": kmax}
    if model is None:
        return _assemble(lam, "numeric", rtol, area=area_, kmin=kmin, kmax=kmax,
                         hypotheses=[_check("extrinsic data", False, "intrinsic-only surface")],
                         cross=cross, context=context)
    hyps = [_check("Minkowski slice", True, {"ambient": model.ambient})]
    norm = _mean_curvature_norm(model.H, model.trK)
    hyps.append(_check("untrapped surface", True, {"min_norm_H": float(np.min(norm))}))
    lower = lower_bound_spacetime(model.H, model.trK)
    upper = upper_bound(model.H, model.trK)
    hyps.append(_check("Tr_Sigma K constant", True, {"spread": float(np.ptp(model.trK))}))
    riem = None
    if model.ambient == "euclidean":
        riem = lower_bound_riemannian(model.H, np.zeros_like(model.H))
    context.update(ambient=model.ambient, H_min=float(np.min(model.H)),
                   H_max=float(np.max(model.H)))
    return _assemble(lam, "numeric", rtol, lower=lower, riem=riem, upper=upper, area=area_,
                     kmin=kmin, kmax=kmax, upper_applies=True, hypotheses=hyps, cross=cross,
                     context=context)


def verify(data=None, rho_b=None, surface=None, **kw):
    """Dispatch to :func:`verify_data` or :func:`verify_surface`."""
    if data is not None:
        if rho_b is None:
            raise InvalidParameterError("data scenarios need a boundary rho_b")
        return verify_data(data, rho_b, **kw)
    if surface is None:
        raise InvalidParameterError("verify needs a data set or a surface")
    kw.pop("jang", None)
    kw.pop("jang_solution", None)
    kw.pop("numeric_check", None)
    return verify_surface(surface, **kw)


@dataclass(frozen=True)
class MasterCheck:
    rho: np.ndarray
    product: np.ndarray
    bound: np.ndarray
    first_horizon: float
    violations: int

    @property
    def min_margin(self):
        return float(np.min(self.bound - self.product)) if len(self.rho) else math.inf


def master_inequality(d, tol=1e-6):
    """``theta+ theta- <= 4/r^2`` at every admissible boundary ``rho_b``.

    Admissible radii are untrapped grid spheres with no horizon in
    ``[rho_min, rho_b]``; a single scan bounds that range by the first root.
    """
    roots = horizon_scan(d)
    first = roots[0].rho if roots else math.inf
    _, _, tp, tm = expansion_fields(d)
    ok = (d.rho < first) & (tp > 0) & (tm > 0)
    prod, bound = (tp * tm)[ok], (4.0 / d.r ** 2)[ok]
    return MasterCheck(d.rho[ok], prod, bound, first, int(np.sum(prod > bound + tol)))

