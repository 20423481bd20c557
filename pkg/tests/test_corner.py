import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from roundcorner.corner import (
    CornerKind,
    NormalUndefinedError,
    NotAntiparallelError,
    classify_corner,
    corner_frame,
    limit_tangent_projection,
    spline_corner_conditions,
)
from roundcorner.fixtures import random_rounded_surface, taylor_patch
from roundcorner.spline import CORNERS, CornerJet, KnotVector, TensorSurface, corner_jet

SQ2 = np.sqrt(2.0)


def jet(x10, x01, x20=(0, 0, 0), x11=(0, 0, 0), x02=(0, 0, 0), x00=(0, 0, 0)):
    return CornerJet(*(np.asarray(v, dtype=float) for v in (x00, x10, x01, x20, x11, x02)))


FRAME_JET = jet((2, 0, 0), (-1, 0, 0), (0, 1, 1), (0, 0, 0), (0, 2, 2))

EXAMPLE_NET = np.array(
    [
        [[0, 0, 0], [-1, 0, 0], [-1, 1, 0]],
        [[1, 0, 0], [0, 1, 0], [0, 0, 0]],
        [[1, 1, 0], [0, 0, 0], [0, 0, 0]],
    ],
    dtype=float,
)


def random_jet(rng):
    return CornerJet(*(rng.standard_normal(3) for _ in range(6)))


def rounded_jet(rng, kind="rounded"):
    """Jet with antiparallel partials and r, s placed per ``kind`` (inverse construction)."""
    t = rng.standard_normal(3)
    t /= np.linalg.norm(t)
    n = np.cross(t, rng.standard_normal(3))
    n /= np.linalg.norm(n)
    c = np.cross(n, t)
    lam, mu = rng.uniform(0.5, 2.0, 2)
    rho, sig = rng.uniform(0.3, 2.0, 2)
    if kind == "opposite":
        sig = -sig
    r = rng.standard_normal() * t + rho * c
    s = rng.standard_normal() * t + sig * c
    if kind == "independent":
        s = s + rng.uniform(0.3, 1.0) * n
    x11 = rng.standard_normal(3)
    x20 = (r - lam * x11) / mu
    x02 = (s - mu * x11) / lam
    return CornerJet(rng.standard_normal(3), lam * t, -mu * t, x20, x11, x02), (t, lam, mu, n, rho, sig)


# -- frame --------------------------------------------------------------------


def test_frame_worked_example():
    f = corner_frame(FRAME_JET)
    np.testing.assert_allclose(f.t, [1, 0, 0])
    assert f.lam == pytest.approx(2.0) and f.mu == pytest.approx(1.0)
    np.testing.assert_allclose(f.r, [0, 1, 1])
    np.testing.assert_allclose(f.s, [0, 4, 4])
    np.testing.assert_allclose(f.n, np.array([0, -1, 1]) / SQ2, atol=1e-15)
    assert f.rho == pytest.approx(SQ2) and f.sigma == pytest.approx(4 * SQ2)
    np.testing.assert_allclose(f.c, np.cross(f.n, f.t))


def test_frame_same_direction_is_not_antiparallel():
    with pytest.raises(NotAntiparallelError):
        corner_frame(jet((1, 0, 0), (1, 0, 0)))


def test_frame_zero_partial_is_not_antiparallel():
    with pytest.raises(NotAntiparallelError):
        corner_frame(jet((0, 0, 0), (-1, 0, 0), (0, 1, 0)))


def test_frame_normal_undefined():
    with pytest.raises(NormalUndefinedError):
        corner_frame(jet((1, 0, 0), (-1, 0, 0), (1, 0, 0)))


def test_frame_inverse_construction_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        j, (t, lam, mu, n, rho, sig) = rounded_jet(rng)
        s = taylor_patch(j, H=0.5)
        f = corner_frame(corner_jet(s))
        np.testing.assert_allclose(f.t, t, atol=1e-9)
        np.testing.assert_allclose([f.lam, f.mu, f.rho, f.sigma], [lam, mu, rho, sig], rtol=1e-9)
        np.testing.assert_allclose(f.n, n, atol=1e-9)


def test_frame_orthonormal():
    rng = np.random.default_rng(1)
    for _ in range(20):
        f = corner_frame(rounded_jet(rng)[0])
        B = np.stack([f.t, f.c, f.n])
        np.testing.assert_allclose(B @ B.T, np.eye(3), atol=1e-12)


# -- classification -----------------------------------------------------------


def test_classify_worked_examples():
    assert classify_corner(FRAME_JET).kind is CornerKind.ROUNDED
    opp = jet((2, 0, 0), (-1, 0, 0), (0, 1, 1), (0, 0, 0), (0, -2, -2))
    cls = classify_corner(opp)
    assert cls.kind is CornerKind.DISCONTINUOUS_OPPOSITE
    assert cls.quadruple == pytest.approx(-8.0)
    ind = jet((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, 0, 0), (0, 0, 1))
    assert classify_corner(ind).kind is CornerKind.DISCONTINUOUS_INDEPENDENT


def test_classify_regular_and_not_antiparallel():
    assert classify_corner(jet((1, 0, 0), (0, 1, 0))).kind is CornerKind.REGULAR
    assert classify_corner(jet((1, 0, 0), (2, 0, 0))).kind is CornerKind.NOT_ANTIPARALLEL
    assert classify_corner(jet((0, 0, 0), (1, 0, 0))).kind is CornerKind.NOT_ANTIPARALLEL


def test_classify_degenerate():
    # s = 0 makes the quadruple product vanish.
    d = jet((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, 0, 0), (0, 0, 0))
    assert classify_corner(d).kind is CornerKind.DEGENERATE


@pytest.mark.parametrize("kind, expected", [
    ("rounded", CornerKind.ROUNDED),
    ("opposite", CornerKind.DISCONTINUOUS_OPPOSITE),
    ("independent", CornerKind.DISCONTINUOUS_INDEPENDENT),
])
def test_classify_constructed_jets(kind, expected):
    rng = np.random.default_rng(2)
    for _ in range(30):
        assert classify_corner(rounded_jet(rng, kind)[0]).kind is expected


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["rounded", "opposite", "independent"]),
       scale=st.floats(1e-3, 1e3))
def test_classification_invariances(seed, kind, scale):
    rng = np.random.default_rng(seed)
    j, _ = rounded_jet(rng, kind)
    base = classify_corner(j)
    R = Rotation.random(random_state=seed % 2**31).as_matrix()
    moved = classify_corner(j.transformed(R, rng.standard_normal(3)))
    assert moved.kind is base.kind
    assert classify_corner(j.transformed(scale * np.eye(3))).kind is base.kind
    swapped = classify_corner(j.swapped())
    assert swapped.kind is base.kind
    if base.kind is CornerKind.ROUNDED:
        np.testing.assert_allclose(moved.frame.n, R @ base.frame.n, atol=1e-9)
        np.testing.assert_allclose(swapped.frame.n, -base.frame.n, atol=1e-9)


def test_rounded_sign_identity():
    rng = np.random.default_rng(3)
    for _ in range(30):
        cls = classify_corner(rounded_jet(rng)[0])
        f = cls.frame
        assert cls.quadruple > 0 and f.rho * f.sigma > 0
        assert cls.quadruple == pytest.approx(f.rho * f.sigma, rel=1e-9)
        assert f.rho == pytest.approx(np.linalg.norm(np.cross(f.t, f.r)), rel=1e-12)


def test_random_generic_jets_are_regular():
    rng = np.random.default_rng(4)
    assert all(classify_corner(random_jet(rng)).kind is CornerKind.REGULAR for _ in range(50))


# -- control-point conditions -------------------------------------------------


def test_conditions_worked_example():
    rep = spline_corner_conditions(TensorSurface.bezier(EXAMPLE_NET))
    assert rep.alpha1 == pytest.approx(0.5) and rep.alpha2 == pytest.approx(0.5)
    np.testing.assert_allclose(rep.t_star, [2, 0, 0])
    np.testing.assert_allclose(rep.r_star, [0.5, 1.5, 0])
    np.testing.assert_allclose(rep.s_star, [-0.5, 1.5, 0])
    assert rep.quadruple == pytest.approx(9.0)
    assert rep.antiparallel and rep.coplanar and rep.onesided and rep.rounded


def test_conditions_detect_non_coplanar():
    net = EXAMPLE_NET.copy()
    net[2, 0] = [1, 1, 0.5]
    rep = spline_corner_conditions(TensorSurface.bezier(net))
    assert rep.antiparallel and not rep.coplanar and not rep.rounded
    assert rep.reasons


def test_lifting_p11_alone_keeps_coplanarity():
    # p11 enters r* and s* with equal weights at alpha = 1/2, so both shift by the same vector
    # and r* - s* stays parallel to t*.
    net = EXAMPLE_NET.copy()
    net[1, 1] = [0, 1, 0.5]
    rep = spline_corner_conditions(TensorSurface.bezier(net))
    np.testing.assert_allclose(rep.r_star - rep.s_star, [1, 0, 0])
    assert rep.coplanar and rep.rounded


def test_conditions_off_segment_and_outside_alpha():
    net = EXAMPLE_NET.copy()
    net[0, 0] = [0, 0.1, 0]
    rep = spline_corner_conditions(TensorSurface.bezier(net))
    assert not rep.antiparallel
    net = EXAMPLE_NET.copy()
    net[0, 0] = [2, 0, 0]
    rep = spline_corner_conditions(TensorSurface.bezier(net))
    assert not rep.antiparallel and rep.alpha1 > 1


def test_conditions_t_star_zero():
    net = EXAMPLE_NET.copy()
    net[1, 0] = net[0, 1]
    rep = spline_corner_conditions(TensorSurface.bezier(net))
    assert not rep.rounded and "t* = 0" in rep.reasons[0]


def test_conditions_knot_factors_cubic():
    # tau^1_1 = tau^1_2 = 0.5: r* weights are 2*0.5*alpha1 and 3*0.5*alpha2.
    k = KnotVector(3, [0, 0, 0, 0, 0.5, 0.75, 1, 1, 1, 1])
    rng = np.random.default_rng(5)
    s = TensorSurface(k, k, rng.standard_normal((6, 6, 3)))
    net = s.net.copy()
    net[0, 0] = 0.3 * net[1, 0] + 0.7 * net[0, 1]
    rep = spline_corner_conditions(s.with_net(net))
    p = net
    r_ref = 2 * 0.5 * 0.3 * (p[2, 0] - p[0, 0]) + 3 * 0.75 * 0.7 * (p[1, 1] - p[0, 0])
    s_ref = 2 * 0.5 * 0.7 * (p[0, 2] - p[0, 0]) + 3 * 0.75 * 0.3 * (p[1, 1] - p[0, 0])
    assert rep.alpha1 == pytest.approx(0.3)
    np.testing.assert_allclose(rep.r_star, r_ref, atol=1e-12)
    np.testing.assert_allclose(rep.s_star, s_ref, atol=1e-12)


def test_generated_nets_classify_rounded():
    rng = np.random.default_rng(6)
    for _ in range(100):
        s, corner, alpha1, n = random_rounded_surface(rng)
        rep = spline_corner_conditions(s, corner)
        assert rep.rounded, rep.reasons
        assert rep.alpha1 == pytest.approx(alpha1, abs=1e-12)
        cls = classify_corner(corner_jet(s, corner))
        assert cls.kind is CornerKind.ROUNDED
        assert abs(cls.frame.n @ n) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("corner", CORNERS)
def test_conditions_at_every_corner(corner):
    rng = np.random.default_rng(7)
    s, _, _, _ = random_rounded_surface(rng, (2, 3), corner)
    assert spline_corner_conditions(s, corner).rounded
    others = [c for c in CORNERS if c != corner]
    assert all(classify_corner(corner_jet(s, c)).kind is CornerKind.REGULAR for c in others)


# -- projection ---------------------------------------------------------------


def test_limit_tangent_projection():
    f = corner_frame(FRAME_JET)
    o = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(limit_tangent_projection(f, o, o), [0, 0])
    np.testing.assert_allclose(limit_tangent_projection(f, o + f.n, o), [0, 0], atol=1e-15)
    p = o + 2 * f.t + 3 * f.c + 5 * f.n
    np.testing.assert_allclose(limit_tangent_projection(f, p, o), [2, 3], atol=1e-14)


def test_classification_report_serializes():
    import json

    d = classify_corner(FRAME_JET).to_dict()
    assert json.loads(json.dumps(d))["kind"] == "Rounded"
    rep = spline_corner_conditions(TensorSurface.bezier(EXAMPLE_NET)).to_dict()
    assert json.loads(json.dumps(rep))["all_conditions"] is True
