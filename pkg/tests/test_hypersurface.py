import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypaf import grid
from hypaf import hypersurface as hs
from hypaf.hypersurface import AxisymmetricHypersurface as Surface
from hypaf.symfunc import DomainError


def bumpy(t):
    return 2 + 0.1 * np.cos(2 * t)


# -- hyperboloid-model oracle ---------------------------------------------------

def _minkowski(a, b):
    return -a[0] * b[0] + a[1:] @ b[1:]


def _embed(rfun, t, psi):
    # a 3-dimensional totally geodesic slice through the axis is enough:
    # the surface meets it orthogonally, so its shape operator restricts
    r = rfun(t)
    return np.array([np.cosh(r), np.sinh(r) * np.cos(t),
                     np.sinh(r) * np.sin(t) * np.cos(psi), np.sinh(r) * np.sin(t) * np.sin(psi)])


def embedding_curvatures(rfun, t, e=5e-4):
    """Principal curvatures from finite differences of the hyperboloid embedding."""
    p = 0.4
    X = lambda a, b: _embed(rfun, a, b)  # noqa: E731
    x = X(t, p)
    Xt = (X(t + e, p) - X(t - e, p)) / (2 * e)
    Xp = (X(t, p + e) - X(t, p - e)) / (2 * e)
    Xtt = (X(t + e, p) - 2 * x + X(t - e, p)) / e**2
    Xpp = (X(t, p + e) - 2 * x + X(t, p - e)) / e**2
    Xtp = (X(t + e, p + e) - X(t + e, p - e) - X(t - e, p + e) + X(t - e, p - e)) / (4 * e * e)
    J = np.diag([-1.0, 1, 1, 1])
    _, _, vt = np.linalg.svd(np.stack([x, Xt, Xp]) @ J)
    N = vt[-1] / math.sqrt(_minkowski(vt[-1], vt[-1]))
    radial = X(t, p) * 0
    r = rfun(t)
    radial[:] = [np.sinh(r), np.cosh(r) * np.cos(t), np.cosh(r) * np.sin(t) * np.cos(p),
                 np.cosh(r) * np.sin(t) * np.sin(p)]
    if _minkowski(N, radial) < 0:
        N = -N
    g = np.array([[_minkowski(Xt, Xt), _minkowski(Xt, Xp)], [_minkowski(Xt, Xp), _minkowski(Xp, Xp)]])
    h = -np.array([[_minkowski(Xtt, N), _minkowski(Xtp, N)], [_minkowski(Xtp, N), _minkowski(Xpp, N)]])
    return np.sort(np.linalg.eigvals(np.linalg.solve(g, h)).real)


def test_curvature_matches_embedding_oracle():
    S = Surface.from_function(6, bumpy, 400)
    c = hs.curvature(S)
    worst = 0.0
    for i in range(4, 397, 8):
        ours = np.sort([c.kappa_rad[i], c.kappa_sph[i]])
        worst = max(worst, np.max(np.abs(ours - embedding_curvatures(bumpy, S.theta[i]))))
    assert worst < 1e-6


def test_oracle_reproduces_sphere():
    k = embedding_curvatures(lambda t: 1.3 + 0 * t, 0.7)
    np.testing.assert_allclose(k, [1 / math.tanh(1.3)] * 2, rtol=1e-6)


# -- construction and IO ------------------------------------------------------------

def test_surface_validation():
    th = grid.uniform_theta(64)
    with pytest.raises(DomainError):
        Surface(4, th, np.ones_like(th))
    with pytest.raises(DomainError):
        Surface(6, th, np.where(th > 1, -1.0, 1.0))
    with pytest.raises(DomainError):
        Surface(6, th, 2 + 0.1 * np.cos(th / 2))
    with pytest.raises(DomainError):
        Surface.perturbed(6, 2, 0.1, k=1)
    with pytest.raises(ValueError):
        Surface(6, grid.uniform_theta(64)[:-1], np.ones(64))


def test_surface_file_round_trip(tmp_path):
    S = Surface.from_function(7, bumpy, 64)
    path = tmp_path / "s.txt"
    hs.write_surface(path, S)
    back = hs.read_surface(path)
    assert back.n == 7 and back.N == 64
    np.testing.assert_array_equal(back.r, S.r)
    np.testing.assert_array_equal(back.theta, S.theta)
    assert path.read_text().splitlines()[0] == "7 64"


def test_surface_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("6 32\n0 1\n")
    with pytest.raises(hs.SurfaceFormatError):
        hs.read_surface(path)
    path.write_text("six 32\n")
    with pytest.raises(hs.SurfaceFormatError):
        hs.read_surface(path)


# -- support fields --------------------------------------------------------------

def test_support_fields_invariants():
    S = Surface.from_function(6, bumpy, 400)
    f = hs.support_fields(S)
    np.testing.assert_allclose(f.dlam**2 - f.lam**2, 1.0, rtol=1e-12)
    assert np.all(f.v >= 1)
    np.testing.assert_allclose(f.phi, np.log(np.tanh(S.r / 2)), rtol=1e-14)


def test_support_fields_sphere():
    f = hs.support_fields(Surface.sphere(6, 1.5, 64))
    assert np.ptp(f.phi) == 0
    np.testing.assert_array_equal(f.v, 1.0)


def test_phi_theta_chain_rule():
    errs = []
    for N in (100, 200):
        S = Surface.from_function(6, bumpy, N)
        f = hs.support_fields(S)
        i = N // 2 + N // 8
        t = S.theta[i]
        exact = (-0.2 * np.sin(2 * t)) / np.sinh(bumpy(t))
        errs.append(abs(f.phi_t[i] - exact))
    assert errs[0] < 1e-6
    assert errs[0] / errs[1] > 12


def test_support_fields_large_radius():
    f = hs.support_fields(Surface.sphere(6, 35.0, 64))
    assert np.all(np.isfinite(f.phi)) and np.all(f.phi < 0)


# -- curvature -----------------------------------------------------------------------

def test_sphere_curvature():
    # the second-difference stencil of a constant leaves ~eps/h^2 of round-off
    c = hs.curvature(Surface.sphere(6, 0.8, 64))
    np.testing.assert_allclose(c.kappa_rad, 1 / math.tanh(0.8), rtol=1e-12)
    np.testing.assert_allclose(c.kappa_sph, 1 / math.tanh(0.8), rtol=1e-12)
    # coth(30) - 1 underflows to 0 in float64; the stored excess keeps it
    c = hs.curvature(Surface.sphere(6, 30.0, 64))
    np.testing.assert_allclose(c.x_rad, 2 * math.exp(-60), rtol=1e-10)


def test_pole_umbilic():
    c = hs.curvature(Surface.from_function(6, bumpy, 200))
    assert abs(c.kappa_rad[0] - c.kappa_sph[0]) < 1e-12
    assert abs(c.kappa_rad[-1] - c.kappa_sph[-1]) < 1e-12
    assert np.all(np.isfinite(c.multiset()))


def test_sigma_range_and_table():
    c = hs.curvature(Surface.from_function(6, bumpy, 64))
    assert c.sigma_table().shape == (6, 65)
    np.testing.assert_array_equal(c.sigma(-1), 0)
    with pytest.raises(DomainError):
        c.sigma(6)


# -- closed forms ------------------------------------------------------------------

def test_geodesic_sphere_examples():
    rec = hs.geodesic_sphere(6, 1.0)
    assert rec.kappa == pytest.approx(1.313035, abs=1e-6)
    assert rec.area == pytest.approx(math.pi**3 * 1.175201**5, rel=1e-6)
    assert rec.area == pytest.approx(69.51, abs=0.01)
    assert hs.geodesic_sphere(5, 0.7).int_l2 == pytest.approx(8 * math.pi**2 / 3, rel=1e-14)
    assert 8 * math.pi**2 / 3 == pytest.approx(26.3189, abs=1e-4)
    with pytest.raises(DomainError):
        hs.geodesic_sphere(4, 1.0)
    with pytest.raises(DomainError):
        hs.geodesic_sphere(6, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(5, 9), st.floats(0.05, 6.0))
def test_sphere_is_equality_case(n, radius):
    rec = hs.geodesic_sphere(n, radius)
    byname = {r.name: r for r in rec.reports}
    for name in ("af4", "af2_sigma2", "minkowski_bhw", "minkowski_dlg"):
        assert abs(byname[name].gap) <= 1e-12 * byname[name].rhs
    assert rec.Q == pytest.approx(hs.q_lower_bound(n), rel=1e-12)
    coth = 1 / math.tanh(radius)
    assert byname["gallego_solanes_k2"].lhs / byname["gallego_solanes_k2"].rhs == pytest.approx(coth**2, rel=1e-12)
    assert byname["gallego_solanes_k1"].lhs / byname["gallego_solanes_k1"].rhs == pytest.approx(
        coth * (n - 1) / (n - 2), rel=1e-12)


def test_q_bound_value():
    assert hs.q_lower_bound(6) == pytest.approx(5 * math.pi ** (12 / 5), rel=1e-14)
    assert hs.q_lower_bound(6) == pytest.approx(78.0035, abs=5e-3)
    assert math.pi ** (12 / 5) == pytest.approx(15.6007, abs=1e-3)
    assert hs.q_lower_bound(5) == pytest.approx(8 * math.pi**2 / 3, rel=1e-14)


# -- integrals on spheres --------------------------------------------------------

@pytest.mark.parametrize("n", [5, 6, 7])
def test_discrete_sphere_reproduces_closed_form(n):
    rec = hs.geodesic_sphere(n, 1.0)
    geo = hs.Geometry(Surface.sphere(n, 1.0, 400))
    assert geo.area() == pytest.approx(rec.area, rel=1e-8)
    for k in range(n):
        assert geo.int_sigma(k) == pytest.approx(rec.int_sigma[k], rel=1e-8)
    assert geo.int_l2() == pytest.approx(rec.int_l2, rel=1e-8)
    assert geo.Q() == pytest.approx(rec.Q, rel=1e-8)


def test_sphere_quadrature_order_n5():
    rec = hs.geodesic_sphere(5, 1.0)
    errs = [abs(hs.area(Surface.sphere(5, 1.0, N)) / rec.area - 1) for N in (50, 100, 200)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 3.5


def test_q_radius_invariant():
    q1 = hs.functional_Q(Surface.sphere(6, 1.0, 400))
    q2 = hs.functional_Q(Surface.sphere(6, 2.0, 400))
    assert q1 == pytest.approx(q2, rel=1e-8)
    assert hs.functional_Q(Surface.sphere(5, 1.0, 400)) == pytest.approx(8 * math.pi**2 / 3, rel=1e-8)


@pytest.mark.parametrize("n, rtol", [(5, 1e-13), (6, 1e-13), (7, 1e-13), (8, 1e-12)])
def test_l2_decomposition_identity(n, rtol):
    # integrate_l2 expands in the curvature excess; the direct sigma combination
    # cancels about two digits, more as n grows
    for _ in (0,):
        S = Surface.from_function(n, bumpy, 200)
        geo = hs.Geometry(S)
        direct = geo.int_sigma(4) - (n - 3) * (n - 4) / 6 * geo.int_sigma(2) + hs.gauss_bonnet_constant(n) * geo.area()
        assert geo.int_l2() == pytest.approx(direct, rel=rtol)


def test_area_monotone_nested():
    areas = [hs.area(Surface.sphere(6, r, 64)) for r in (0.5, 0.9, 1.4, 2.0)]
    assert all(a < b for a, b in zip(areas, areas[1:]))
    inner = hs.area(Surface.from_function(6, bumpy, 200))
    outer = hs.area(Surface.from_function(6, lambda t: bumpy(t) + 0.05, 200))
    assert inner < outer


def test_integrate_sigma_range():
    with pytest.raises(DomainError):
        hs.integrate_sigma(7, Surface.sphere(6, 1.0, 64))


# -- inequality checks on perturbed surfaces -----------------------------------------

def test_af4_perturbed_positive():
    S = Surface.from_function(6, bumpy, 400)
    assert hs.horoconvexity_margin(S) > 0
    rep = hs.check_af4(S)
    assert rep.gap > 0 and rep.gap == rep.lhs - rep.rhs
    assert not rep.notes


def test_af4_convergence_fourth_order():
    vals = {N: hs.check_af4(Surface.from_function(6, bumpy, N)).gap for N in (32, 64, 128, 512)}
    e1, e2, e3 = (abs(vals[N] - vals[512]) for N in (32, 64, 128))
    assert e1 / e2 >= 2**3.5 and e2 / e3 >= 2**3.5


def test_af4_warns_when_not_horoconvex():
    S = Surface.from_function(6, lambda t: 2 + 0.5 * np.cos(2 * t), 400)
    margin = hs.horoconvexity_margin(S)
    assert margin < 0
    with pytest.warns(RuntimeWarning):
        rep = hs.check_af4(S)
    assert rep.extra["horoconvexity_margin"] == margin
    assert rep.notes


def test_af2_sigma2():
    rep = hs.check_af2_sigma2(Surface.sphere(6, 1.2, 400))
    assert abs(rep.gap) < 1e-8 * rep.rhs
    rep = hs.check_af2_sigma2(Surface.from_function(6, bumpy, 400))
    assert rep.gap >= 0 and rep.extra["two_convex"]


def test_weighted_minkowski():
    bhw, dlg = hs.check_weighted_minkowski(Surface.sphere(6, 0.9, 400))
    assert abs(bhw.gap) < 1e-8 * bhw.rhs and abs(dlg.gap) < 1e-8 * dlg.rhs
    # mean convex but far from horoconvex
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        S = Surface.from_function(6, lambda t: 1 + 0.2 * np.cos(2 * t), 400)
    bhw, dlg = hs.check_weighted_minkowski(S)
    assert bhw.extra["min_H"] > 0
    assert bhw.gap >= 0 and dlg.gap >= 0


def test_gallego_solanes():
    for r, k in ((1.0, 2), (0.1, 3)):
        rep = hs.check_gallego_solanes(Surface.sphere(6, r, 400), k)
        assert rep.extra["ratio"] == pytest.approx((1 / math.tanh(r)) ** k, rel=1e-8)
    assert hs.check_gallego_solanes(Surface.sphere(6, 0.1, 400), 4).extra["ratio"] > 1000
    with pytest.raises(DomainError):
        hs.check_gallego_solanes(Surface.sphere(6, 1.0, 64), 6)


def test_horoconvexity_margin_sphere():
    assert hs.horoconvexity_margin(Surface.sphere(6, 1.1, 64)) == pytest.approx(1 / math.tanh(1.1) - 1, rel=1e-12)
    assert hs.umbilicity_deficit(Surface.sphere(6, 1.1, 64)) == pytest.approx(1 / math.tanh(1.1) - 1, rel=1e-12)
