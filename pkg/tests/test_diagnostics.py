import csv
import io

import numpy as np
import pytest
from scipy import integrate

from roundcorner import diagnostics as dg
from roundcorner.corner import CornerKind, classify_corner, corner_frame
from roundcorner.fitting import FitProblem, fit_surface
from roundcorner.fixtures import FIXTURES, case_jet, make_fixture, taylor_patch
from roundcorner.spline import KnotVector, TensorSurface, corner_jet

EXAMPLE_NET = np.array(
    [
        [[0, 0, 0], [-1, 0, 0], [-1, 1, 0]],
        [[1, 0, 0], [0, 1, 0], [0, 0, 0]],
        [[1, 1, 0], [0, 0, 0], [0, 0, 0]],
    ],
    dtype=float,
)


class AnalyticSurface:
    """Closed-form surface exposing ``derivative(u, v, ju, jv)`` through a table of partials."""

    def __init__(self, partials):
        self.partials = partials

    def derivative(self, u, v, ju=0, jv=0):
        return np.asarray(self.partials[ju, jv](u, v), dtype=float)


def sphere(radius=1.0):
    # Latitude/longitude: x = R (cos v cos u, cos v sin u, sin v).
    cu, su, cv, sv = np.cos, np.sin, np.cos, np.sin
    R = radius
    return AnalyticSurface({
        (0, 0): lambda u, v: R * np.array([cv(v) * cu(u), cv(v) * su(u), sv(v)]),
        (1, 0): lambda u, v: R * np.array([-cv(v) * su(u), cv(v) * cu(u), 0.0]),
        (0, 1): lambda u, v: R * np.array([-sv(v) * cu(u), -sv(v) * su(u), cv(v)]),
        (2, 0): lambda u, v: R * np.array([-cv(v) * cu(u), -cv(v) * su(u), 0.0]),
        (1, 1): lambda u, v: R * np.array([sv(v) * su(u), -sv(v) * cu(u), 0.0]),
        (0, 2): lambda u, v: R * np.array([-cv(v) * cu(u), -cv(v) * su(u), -sv(v)]),
    })


def monge_curvatures(fx, fy, fxx, fxy, fyy):
    """Gaussian and mean curvature of z = f(x, y), upward normal."""
    w = 1 + fx**2 + fy**2
    K = (fxx * fyy - fxy**2) / w**2
    H = ((1 + fy**2) * fxx - 2 * fx * fy * fxy + (1 + fx**2) * fyy) / (2 * w**1.5)
    return K, H


# -- normals ------------------------------------------------------------------


def test_plane_normal():
    s = make_fixture("plane")
    for u, v in np.random.default_rng(0).uniform(0, 1, (10, 2)):
        np.testing.assert_allclose(dg.normal_vector(s, u, v), [0, 0, 1], atol=1e-15)


def test_example_net_normal_near_corner():
    s = TensorSurface.bezier(EXAMPLE_NET)
    assert dg.angle_between(dg.normal_vector(s, 1e-4, 1e-4), [0, 0, 1]) <= 1e-3
    with pytest.raises(dg.DegeneratePointError):
        dg.normal_vector(s, 0.0, 0.0)


def test_angle_between_accuracy():
    a = np.array([1.0, 0.0, 0.0])
    assert dg.angle_between(a, [1.0, 1e-12, 0.0]) == pytest.approx(1e-12, rel=1e-6)
    assert dg.angle_between(a, -a) == pytest.approx(np.pi)


def test_normal_probe_rate_on_rounded_fixtures():
    for name in ("rounded_bezier", "rounded_quadratic"):
        s = make_fixture(name)
        for d in ((1, 1), (1, 0.2), (0.3, 1)):
            probe = dg.normal_convergence_probe(s, "u0v0", d, np.logspace(-1, -6, 16))
            assert np.all(probe.values[2:] <= 10 * probe.parameters[2:])
            # The quadratic Taylor patch has nu == n exactly on its diagonal; no rate to fit there.
            if probe.values.max() > 1e-12:
                assert probe.fitted_rate >= 0.9


def test_normal_probe_requires_rounded():
    with pytest.raises(ValueError):
        dg.normal_convergence_probe(make_fixture("discont_opposite"))


def test_axis_limits_opposite():
    probe = dg.axis_normal_limits(make_fixture("discont_opposite"))
    assert abs(probe.values[-1] - np.pi) <= 1e-3


def test_axis_limits_independent_match_analytic_angle():
    j = case_jet("discont_independent")
    # Oracle from the jet definition, independent of the classifier.
    t = j.xi10 / np.linalg.norm(j.xi10)
    lam, mu = np.linalg.norm(j.xi10), np.linalg.norm(j.xi01)
    r = mu * j.xi20 + lam * j.xi11
    s = lam * j.xi02 + mu * j.xi11
    expected = dg.angle_between(np.cross(t, r), np.cross(t, s))
    probe = dg.axis_normal_limits(make_fixture("discont_independent"))
    assert abs(probe.values[-1] - expected) <= 1e-3
    assert expected > 0.1


# -- fundamental forms --------------------------------------------------------


def test_sphere_curvatures():
    rng = np.random.default_rng(1)
    for radius in (1.0, 2.5):
        s = sphere(radius)
        for u, v in rng.uniform([-3, -1.2], [3, 1.2], (20, 2)):
            ff = dg.fundamental_forms(s, u, v)
            np.testing.assert_allclose(np.abs([ff.kappa1, ff.kappa2]), 1 / radius, rtol=1e-8)
            assert np.sign(ff.kappa1) == np.sign(ff.kappa2)


def test_plane_curvatures_zero():
    ff = dg.fundamental_forms(make_fixture("plane"), 0.3, 0.7)
    assert ff.kappa1 == 0 and ff.kappa2 == 0


def test_paraboloid_against_monge_formulas():
    # z = a x^2 + b x y + c y^2 as a Bezier patch; exact polynomial, so the oracle is closed form.
    a, b, c = 0.7, -0.4, 1.3
    C = np.zeros((3, 3, 3))
    C[1, 0, 0] = 1.0
    C[0, 1, 1] = 1.0
    C[2, 0, 2], C[1, 1, 2], C[0, 2, 2] = a, b, c
    from roundcorner.spline import monomial_to_bezier

    s = monomial_to_bezier(C, ((-1, 1), (-1, 1)))
    for x, y in np.random.default_rng(2).uniform(-1, 1, (25, 2)):
        ff = dg.fundamental_forms(s, x, y)
        K, H = monge_curvatures(2 * a * x + b * y, b * x + 2 * c * y, 2 * a, b, 2 * c)
        assert ff.kappa1 * ff.kappa2 == pytest.approx(K, rel=1e-10)
        assert 0.5 * (ff.kappa1 + ff.kappa2) == pytest.approx(H, rel=1e-10)


def test_cylinder_curvature_via_fit():
    # Radius-2 cylinder fitted by a fine quartic spline; curvatures approach {0, 1/2}.
    def target(U, V):
        return np.stack([2 * np.cos(U), 2 * np.sin(U), V], -1)

    ku = KnotVector.uniform(4, 8, 0.0, np.pi / 2)
    kv = KnotVector.uniform(2, 1, 0.0, 1.0)
    rep = fit_surface(FitProblem(ku, kv, target))
    assert rep.max_error < 1e-6
    for u, v in np.random.default_rng(3).uniform([0.1, 0.1], [1.4, 0.9], (10, 2)):
        ff = dg.fundamental_forms(rep.surface, u, v)
        k = sorted(np.abs([ff.kappa1, ff.kappa2]))
        assert k[0] == pytest.approx(0.0, abs=1e-5)
        assert k[1] == pytest.approx(0.5, abs=1e-5)


def test_shape_operator_det_trace_identity():
    rng = np.random.default_rng(4)
    for _ in range(10):
        k = KnotVector(3, [0, 0, 0, 0, 0.4, 1, 1, 1, 1])
        s = TensorSurface(k, k, rng.standard_normal((5, 5, 3)))
        for u, v in rng.uniform(0, 1, (10, 2)):
            ff = dg.fundamental_forms(s, u, v)
            k1, k2 = ff.kappa1, ff.kappa2
            scale = max(abs(k1), abs(k2)) ** 2
            assert abs(np.linalg.det(ff.S) - k1 * k2) <= 1e-9 * scale
            assert abs(np.trace(ff.S) - (k1 + k2)) <= 1e-9 * np.sqrt(scale)
            np.testing.assert_allclose(ff.G, ff.G.T)
            np.testing.assert_allclose(ff.B, ff.B.T)


def test_fundamental_forms_singular():
    with pytest.raises(dg.DegeneratePointError):
        dg.fundamental_forms(make_fixture("rounded_bezier"), 0.0, 0.0)


# -- probes -------------------------------------------------------------------


def test_fit_rate_power_law():
    a = np.logspace(-1, -7, 25)
    assert dg.fit_rate(a, 3 * a**1.7) == pytest.approx(1.7, abs=1e-12)


def test_probe_series_validation():
    with pytest.raises(ValueError):
        dg.ProbeSeries(np.array([0.1, 0.2]), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        dg.ProbeSeries(np.array([0.1, -0.2]), np.ones(2), 0.0)


def test_cross_norm_asymptotics():
    s = make_fixture("rounded_bezier")
    probe = dg.cross_norm_asymptotics(s)
    assert abs(probe.values[-1] - 1) <= 1e-5
    assert probe.fitted_rate >= 0.9
    scaled = dg.cross_norm_asymptotics(s.transformed(10 * np.eye(3)))
    np.testing.assert_allclose(scaled.values, probe.values, rtol=1e-12)


def test_cross_norm_on_taylor_patch():
    probe = dg.cross_norm_asymptotics(make_fixture("rounded_quadratic"))
    assert probe.fitted_rate >= 0.9
    assert abs(probe.values[-1] - 1) <= 1e-5


def test_curvature_scale_bounded_on_rounded_bezier():
    probe = dg.diagonal_curvature_scale(make_fixture("rounded_bezier"), alphas=np.logspace(-1, -6, 21))
    assert np.all(np.isfinite(probe.values))
    assert probe.values.max() / probe.values.min() < 10


# -- curvature integral -------------------------------------------------------


def test_curvature_integral_plane():
    assert dg.curvature_integral(make_fixture("plane"), 2, 1e-3, H=0.5) == 0.0


def test_curvature_integral_against_adaptive_quadrature():
    s = make_fixture("rounded_bezier")
    eps, H = 1e-2, 0.5

    def f(v, u):
        ff = dg.fundamental_forms(s, u, v)
        area = np.sqrt(np.linalg.det(ff.G))
        return (ff.kappa1**2 + ff.kappa2**2) * area

    ref, _ = integrate.dblquad(f, eps, H, eps, H, epsabs=1e-10, epsrel=1e-8)
    assert dg.curvature_integral(s, 2, eps, H=H) == pytest.approx(ref, rel=1e-6)


def test_curvature_integral_cauchy_for_p1():
    s = make_fixture("rounded_bezier")
    vals = [dg.curvature_integral(s, 1, 1e-3 * 0.5**k, H=0.5) for k in range(8)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[:-1] / diffs[1:] >= 1.5)


def test_curvature_integral_log_divergence_for_p3():
    s = make_fixture("rounded_bezier")
    vals = [dg.curvature_integral(s, 3, 1e-2 * 0.5**k, H=0.5) for k in range(12)]
    inc = np.diff(vals)
    assert np.all(inc > 0)
    assert np.ptp(inc[-3:]) <= 0.1 * inc[-1]


def test_curvature_integral_errors():
    s = make_fixture("rounded_bezier")
    with pytest.raises(ValueError):
        dg.curvature_integral(s, 0.5, 1e-3)
    with pytest.raises(ValueError):
        dg.curvature_integral(s, 2, 2.0)


# -- injectivity --------------------------------------------------------------


def test_self_intersect_witness():
    s = make_fixture("self_intersect")
    w = dg.injectivity_probe(s, "u0v0", H=0.3, normal=[0, 0, 1])
    assert w is not None
    assert w.separation >= 0.05 and w.distance <= 1e-9
    np.testing.assert_allclose(s(*w.eta0)[:2], s(*w.eta1)[:2], atol=1e-9)


def test_rounded_fixture_has_no_witness():
    assert dg.injectivity_probe(make_fixture("rounded_bezier"), "u0v0", H=0.1) is None


def test_plane_has_no_witness():
    assert dg.injectivity_probe(make_fixture("plane"), "u0v0", normal=[0, 0, 1]) is None


def test_self_intersect_normal_limit():
    s = make_fixture("self_intersect")
    # Limit normal is +-e3; deviation shrinks toward the corner along rays.
    for d in ((1, 1), (1, 0.3), (0.2, 1)):
        d = np.asarray(d) / np.linalg.norm(d)
        ang = [min(dg.angle_between(dg.normal_vector(s, *(h * d)), [0, 0, 1]),
                   dg.angle_between(dg.normal_vector(s, *(h * d)), [0, 0, -1])) for h in (0.1, 0.03, 0.01)]
        assert ang[0] > ang[1] > ang[2]


# -- fixtures and field export ------------------------------------------------


@pytest.mark.parametrize("name, kind", [
    ("rounded_quadratic", CornerKind.ROUNDED),
    ("rounded_bezier", CornerKind.ROUNDED),
    ("discont_opposite", CornerKind.DISCONTINUOUS_OPPOSITE),
    ("discont_independent", CornerKind.DISCONTINUOUS_INDEPENDENT),
    ("degenerate", CornerKind.DEGENERATE),
    ("self_intersect", CornerKind.NOT_ANTIPARALLEL),
    ("plane", CornerKind.REGULAR),
])
def test_fixture_classification(name, kind):
    assert classify_corner(corner_jet(make_fixture(name))).kind is kind


def test_taylor_patch_reproduces_jet():
    j = case_jet("rounded_quadratic")
    got = corner_jet(taylor_patch(j, H=0.25))
    for key in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
        np.testing.assert_allclose(got[key], j[key], atol=1e-12)


def test_unknown_fixture():
    with pytest.raises(ValueError):
        make_fixture("nope")


def test_fields_csv_plane():
    rows, warnings = dg.sample_fields(make_fixture("plane"), 5, 4)
    assert not warnings and len(rows) == 20
    text = dg.fields_csv(rows)
    data = list(csv.DictReader(io.StringIO(text)))
    assert list(data[0]) == list(dg.FIELD_COLUMNS)
    assert all(float(r["kappa1"]) == 0 and float(r["kappa2"]) == 0 for r in data)
    assert all(float(r["isophote"]) == 1 for r in data)


def test_fields_flag_singular_corner():
    rows, warnings = dg.sample_fields(make_fixture("rounded_bezier"), 5, 5)
    assert warnings == [(0.0, 0.0)]
    assert np.isnan(rows[0][5])


def test_all_fixtures_build():
    for name in FIXTURES:
        assert isinstance(make_fixture(name), TensorSurface)


def test_frame_of_rounded_bezier():
    f = corner_frame(corner_jet(make_fixture("rounded_bezier")))
    np.testing.assert_allclose(f.n, [0, 0, 1], atol=1e-15)
