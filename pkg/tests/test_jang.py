import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracbounds.bounds import master_inequality
from diracbounds.errors import InvalidParameterError, NumericalFailure, PreconditionViolation
from diracbounds.initial_data import SphericalDataSet, check_dec, constraint_fields, make_family
from diracbounds.jang import (boundary_identity_check, graph_scalar_curvature, jang_residual,
                              jang_vector_field, schoen_yau_margin, solve_jang_dirichlet)

import oracles
from dec_data import random_dec_data

GRID = np.linspace(0.01, 1.0, 1024)


def _family(tag, params=None, grid=GRID):
    return make_family(tag, params or {}, grid)


@pytest.fixture(scope="module")
def cap():
    d = _family("hyperbolic_unit")
    return d, solve_jang_dirichlet(d, 1.0)


@pytest.fixture(scope="module")
def ball():
    d = _family("euclidean")
    return d, solve_jang_dirichlet(d, 1.0)


def _dec_solutions(count):
    out, seed = [], 0
    while len(out) < count:
        d, _ = random_dec_data(seed)
        seed += 1
        if d is None:
            continue
        mc = master_inequality(d)
        rho_b = float(mc.rho[-1])
        out.append((seed - 1, d, solve_jang_dirichlet(d, rho_b)))
    return out


@pytest.fixture(scope="module")
def dec_solutions():
    return _dec_solutions(10)


# --- residual --------------------------------------------------------------

def test_residual_zero_for_flat_graph():
    d = _family("schwarzschild_isotropic", {"m": 1.0}, np.linspace(0.6, 2.0, 256))
    assert np.max(np.abs(jang_residual(d, np.zeros(d.n)))) == 0.0


def test_residual_of_zero_graph_is_minus_trace():
    d = _family("hyperbolic_unit")
    assert np.allclose(jang_residual(d, np.zeros(d.n)), -3.0, atol=1e-14)
    rho = np.linspace(0.1, 1.0, 128)
    e = SphericalDataSet(rho, 1 + rho ** 2, rho * (1 + rho), np.sin(rho), np.cos(3 * rho))
    assert np.allclose(jang_residual(e, np.zeros(128)), -e.trace_K, atol=1e-14)


def test_residual_of_hyperboloid():
    d = _family("hyperbolic_unit")
    u = oracles.hyperboloid_height(d.rho, 1.0)
    assert np.max(np.abs(jang_residual(d, u))) <= 1e-6


# --- solver ----------------------------------------------------------------

def test_ball_zero_solution(ball):
    d, sol = ball
    assert np.max(np.abs(sol.u)) <= 1e-10
    assert np.array_equal(sol.ghat_a, sol.data.a)
    assert np.all(sol.f_lapse == 1.0)


def test_cap_hyperboloid(cap):
    d, sol = cap
    assert np.max(np.abs(sol.du - sol.rho / np.sqrt(1 + sol.rho ** 2))) <= 1e-5
    assert np.max(np.abs(sol.u - oracles.hyperboloid_height(sol.rho, 1.0))) <= 1e-6
    assert np.max(np.abs(sol.ghat_a - 1.0)) <= 1e-6
    assert np.max(np.abs(graph_scalar_curvature(sol))) <= 1e-4
    assert sol.residual_norm <= 1e-8 * len(sol.rho)


@pytest.mark.parametrize("radius", [0.5, 2.0])
def test_caps_of_other_radii(radius):
    d = _family("hyperbolic", {"radius": radius}, np.linspace(0.01 * radius, radius, 1024))
    sol = solve_jang_dirichlet(d, radius)
    ref = oracles.hyperboloid_height(sol.rho, radius, radius)
    assert np.max(np.abs(sol.u - ref)) <= 1e-6 * radius
    assert np.max(np.abs(sol.X_rad)) * radius <= 1e-5


def test_schwarzschild_outside_horizon():
    d = _family("schwarzschild_isotropic", {"m": 1.0}, np.linspace(0.6, 2.0, 512))
    sol = solve_jang_dirichlet(d, 2.0)
    assert np.max(np.abs(sol.u)) <= 1e-10
    assert np.max(np.abs(sol.X_rad)) <= 1e-10


def test_schwarzschild_horizon_inside():
    d = _family("schwarzschild_isotropic", {"m": 1.0}, np.linspace(0.4, 2.0, 512))
    with pytest.raises(PreconditionViolation) as exc:
        solve_jang_dirichlet(d, 2.0)
    assert exc.value.hypothesis == "no apparent horizon"
    assert exc.value.witness[0]["rho"] == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("rho_b", [0.0, 0.01, 1.5])
def test_boundary_radius_outside_grid(rho_b):
    with pytest.raises(InvalidParameterError):
        solve_jang_dirichlet(_family("euclidean"), rho_b)


def test_newton_failure_carries_trace():
    d, _ = random_dec_data(3)
    with pytest.raises(NumericalFailure) as exc:
        solve_jang_dirichlet(d, 1.0, max_iter=1)
    assert len(exc.value.trace["history"]) >= 1


def test_solution_invariants(dec_solutions):
    for _, d, sol in dec_solutions:
        a = sol.data.a
        assert sol.u[-1] == 0.0
        assert np.allclose(sol.ghat_a ** 2, a ** 2 + sol.du ** 2, rtol=1e-14)
        assert np.allclose(sol.f_lapse, 1 / np.sqrt(1 + (sol.du / a) ** 2), rtol=1e-14)
        assert np.all((sol.f_lapse > 0) & (sol.f_lapse <= 1))
        assert sol.residual_norm <= 1e-8 * len(sol.rho)


def test_metric_agreement_on_boundary(dec_solutions):
    # the area radius is untouched by the graph deformation
    for _, d, sol in dec_solutions:
        assert sol.data.r[-1] == pytest.approx(float(np.interp(sol.rho_b, d.rho, d.r)),
                                               rel=1e-6)
        assert np.array_equal(sol.data.r, d.resample(sol.rho).r)


def test_zero_solution_for_time_symmetric_data():
    rho = np.linspace(0.05, 1.2, 400)
    z = np.zeros_like(rho)
    d = SphericalDataSet(rho, 1 + 0.2 * np.sin(2 * rho), rho * (1 + 0.1 * rho ** 2), z, z)
    sol = solve_jang_dirichlet(d, 1.2)
    assert np.max(np.abs(sol.u)) <= 1e-10
    assert np.allclose(sol.ghat_a, sol.data.a, rtol=0, atol=1e-12)


# --- X and the Schoen-Yau margin ---------------------------------------------

def test_X_vanishes_without_extrinsic_curvature(ball):
    d, sol = ball
    assert np.max(np.abs(jang_vector_field(d, sol))) == 0.0


def test_X_vanishes_on_cap(cap):
    d, sol = cap
    assert np.max(np.abs(jang_vector_field(d, sol))) <= 1e-5


def test_margin_ball(ball):
    assert np.max(np.abs(schoen_yau_margin(*ball))) <= 1e-6


def test_margin_cap(cap):
    d, sol = cap
    assert np.max(np.abs(sol.sy_margin)) <= 1e-4
    assert np.array_equal(sol.sy_margin, schoen_yau_margin(d, sol))


def test_margin_round_s3():
    d = _family("round_s3", {"a0": 2.0}, np.linspace(0.01, 1.5, 1024))
    sol = solve_jang_dirichlet(d, 1.5)
    assert np.max(np.abs(sol.u)) <= 1e-10
    assert np.max(np.abs(sol.sy_margin)) <= 1e-4


def test_unknown_convention(cap):
    with pytest.raises(InvalidParameterError):
        schoen_yau_margin(*cap, convention="other")


def _scale(sol):
    cf = constraint_fields(sol.data)
    return max(1.0, float(np.max(np.abs(graph_scalar_curvature(sol)))),
               float(np.max(2 * np.abs(cf.mu))))


def test_dec_propagation(dec_solutions):
    for seed, d, sol in dec_solutions:
        assert check_dec(sol.data, tol=1e-6).holds, seed
        assert np.min(sol.sy_margin) >= -1e-6 * _scale(sol), seed


def test_divergence_sign_from_pointwise_identity(dec_solutions):
    # Rhat - 2|X|^2 - 2 div X = 2(mu + J(nu)) + |hhat - K|^2 pins the sign of div
    inner = slice(10, -10)
    for seed, d, sol in dec_solutions:
        cf = constraint_fields(sol.data)
        rhs = oracles.schoen_yau_rhs(sol, cf.mu, cf.J_rad)
        gaps = {}
        for conv in ("negative", "standard"):
            lhs = schoen_yau_margin(d, sol, conv) + 2 * cf.dec_margin
            gaps[conv] = float(np.max(np.abs(lhs - rhs)[inner]))
        assert gaps["negative"] <= 1e-4 * _scale(sol), seed
        assert gaps["standard"] >= 0.1, seed


def test_standard_divergence_breaks_dec_propagation():
    # one pinned draw where the standard sign gives a large negative margin
    d, _ = random_dec_data(3)
    sol = solve_jang_dirichlet(d, float(master_inequality(d).rho[-1]))
    assert np.min(schoen_yau_margin(d, sol, "standard")) < -1.0
    assert np.min(schoen_yau_margin(d, sol, "negative")) >= 0.0


# --- boundary identity -----------------------------------------------------

def test_boundary_identity_ball(ball):
    rep = boundary_identity_check(*ball)
    assert rep["lhs"] == pytest.approx(2.0, abs=1e-10)
    assert rep["rhs_bound"] == pytest.approx(2.0, abs=1e-10)
    assert rep["holds"]


def test_boundary_identity_cap(cap):
    rep = boundary_identity_check(*cap)
    assert rep["lhs"] == pytest.approx(2.0, abs=1e-4)
    assert rep["Hhat"] == pytest.approx(2.0, abs=1e-4)
    assert rep["rhs_bound"] == pytest.approx(2.0, abs=1e-6)
    assert rep["identity_gap"] <= 1e-4
    assert rep["holds"]


def test_boundary_identity_half_cap():
    d = _family("hyperbolic_unit", grid=np.linspace(0.005, 0.5, 1024))
    rep = boundary_identity_check(d, solve_jang_dirichlet(d, 0.5))
    assert rep["rhs_bound"] == pytest.approx(4.0, abs=1e-6)
    assert rep["lhs"] == pytest.approx(4.0, abs=1e-4)
    assert rep["holds"]


def test_boundary_identity_general(dec_solutions):
    for seed, d, sol in dec_solutions:
        rep = boundary_identity_check(d, sol)
        assert rep["identity_gap"] <= 1e-5 * max(1.0, abs(rep["lhs"])), seed
        assert rep["holds"], seed


def test_boundary_identity_needs_untrapped_boundary(cap):
    _, sol = cap
    rho = sol.rho
    # flat metric with kT = 1/rho_b: theta- vanishes on the boundary sphere
    trapped = SphericalDataSet(rho, np.ones_like(rho), rho, np.zeros_like(rho),
                               np.full_like(rho, 1.0 / rho[-1]))
    with pytest.raises(PreconditionViolation) as exc:
        boundary_identity_check(trapped, replace(sol, data=trapped))
    assert exc.value.hypothesis == "untrapped boundary"


@given(st.floats(0.0, 1e3), st.floats(0.01, 100.0), st.floats(-0.999, 0.999))
@settings(max_examples=200, deadline=None)
def test_algebraic_tightness(s, H, ratio):
    T = ratio * H
    bound = math.sqrt(H * H - T * T)
    assert math.sqrt(1 + s * s) * H - s * abs(T) >= bound * (1 - 1e-12)
    s_star = abs(T) / bound
    assert math.sqrt(1 + s_star ** 2) * H - s_star * abs(T) == pytest.approx(bound, rel=1e-9)


# --- output ----------------------------------------------------------------

def test_csv_and_summary(cap):
    _, sol = cap
    rows = list(csv.reader(io.StringIO(sol.to_csv())))
    assert rows[0] == ["rho", "u", "du", "f", "ghat_a", "X_rad", "sy_margin"]
    assert len(rows) == len(sol.rho) + 1
    assert float(rows[-1][1]) == 0.0
    s = sol.summary()
    assert s["rho_b"] == 1.0 and s["max_abs_X_rad"] <= 1e-5
