"""
Tests for the sphere coordinate machinery.
Run with pytest or directly: python test_geometry.py
"""

import math

import numpy as np
from numpy.testing import assert_allclose

from dirtrend.errors import DegenerateRowError, DomainError
from dirtrend.geometry import (
    SphericalPoint,
    atan2_branch,
    cartesian_to_polar,
    directions_from_polar,
    lambert_project,
    latlon_to_polar,
    normalize_rows,
    polar_from_directions,
    polar_to_cartesian,
    polar_to_latlon,
    wrap_longitude,
)


def test_atan2_branch_quadrants():
    assert atan2_branch(1.0, 1.0) == math.atan(1.0)
    assert atan2_branch(0.0, -1.0) == math.pi
    assert atan2_branch(-0.0, -1.0) == math.pi
    assert_allclose(atan2_branch(-1.0, -1.0), -3 * math.pi / 4)
    assert atan2_branch(2.0, 0.0) == math.pi / 2
    assert atan2_branch(-2.0, 0.0) == -math.pi / 2


def test_atan2_branch_matches_math_atan2():
    rng = np.random.default_rng(3)
    for u, v in rng.normal(size=(200, 2)):
        assert_allclose(atan2_branch(v, u), math.atan2(v, u), atol=1e-15)


def test_atan2_branch_origin_raises():
    try:
        atan2_branch(0.0, 0.0)
    except DomainError:
        return
    raise AssertionError("expected DomainError at the origin")


def test_polar_to_cartesian_examples():
    assert_allclose(polar_to_cartesian(SphericalPoint(0.0, 1.3)), [0.0, 0.0, 1.0], atol=1e-15)
    assert_allclose(polar_to_cartesian(SphericalPoint(math.pi / 2, math.pi)), [-1.0, 0.0, 0.0], atol=1e-15)


def test_cartesian_to_polar_poles_and_wrap():
    north = cartesian_to_polar([0.0, 0.0, 2.0])
    assert north.theta == 0.0 and north.phi == 0.0
    south = cartesian_to_polar([0.0, 0.0, -1.0])
    assert_allclose(south.theta, math.pi)
    assert south.phi == 0.0
    west = cartesian_to_polar([0.0, -1.0, 0.0])
    assert_allclose(west.phi, 3 * math.pi / 2)


def test_polar_cartesian_round_trip():
    rng = np.random.default_rng(11)
    theta = rng.uniform(1e-3, math.pi - 1e-3, 1000)
    phi = rng.uniform(0.0, 2 * math.pi, 1000)
    X = directions_from_polar(theta, phi)
    theta_back, phi_back = polar_from_directions(X)
    assert_allclose(theta_back, theta, atol=1e-10)
    # longitude compared on the circle
    assert np.max(np.abs(np.angle(np.exp(1j * (phi_back - phi))))) < 1e-10
    for row, t, f in zip(X[:50], theta[:50], phi[:50]):
        assert_allclose(polar_to_cartesian(SphericalPoint(t, f)), row, atol=1e-15)


def test_lambert_equator_and_pole():
    rim = lambert_project(SphericalPoint(math.pi / 2, 0.7))
    assert abs(math.hypot(rim.u, rim.v) - math.sqrt(2.0)) <= 1e-12
    assert rim.north
    centre = lambert_project(SphericalPoint(0.0, 0.0))
    assert centre.u == 0.0 and centre.v == 0.0
    south = lambert_project(SphericalPoint(math.pi, 0.0))
    assert south.hemisphere == 'south'
    assert abs(south.u) < 1e-15 and abs(south.v) < 1e-15


def test_lambert_is_equal_area_radius():
    # radius 2 sin(theta/2) on the north side, mirrored on the south side
    for theta in (0.3, 1.0, 1.4):
        lp = lambert_project(SphericalPoint(theta, 0.0))
        mirrored = lambert_project(SphericalPoint(math.pi - theta, 0.0))
        assert_allclose(lp.u, 2 * math.sin(theta / 2))
        assert_allclose(mirrored.u, lp.u)
        assert not mirrored.north


def test_normalize_rows_unit_and_degenerate():
    B = np.array([[3.0, 0.0, 4.0], [0.0, 2.0, 0.0]])
    out = normalize_rows(B)
    assert_allclose(out, [[0.6, 0.0, 0.8], [0.0, 1.0, 0.0]])
    assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)

    bad = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1e-12], [0.0, 0.0, 0.0]])
    try:
        normalize_rows(bad)
    except DegenerateRowError as e:
        assert e.row == 1
        return
    raise AssertionError("expected DegenerateRowError")


def test_normalize_rows_rejects_nan():
    try:
        normalize_rows(np.array([[np.nan, 0.0, 1.0]]))
    except DegenerateRowError as e:
        assert e.row == 0
        return
    raise AssertionError("expected DegenerateRowError for NaN row")


def test_latlon_conversion():
    theta, phi = latlon_to_polar([90.0, 0.0, 10.0], [0.0, 180.0, -90.0])
    assert theta[0] == 0.0
    assert_allclose(directions_from_polar(theta, phi)[1], [-1.0, 0.0, 0.0], atol=1e-15)
    assert_allclose(phi[2], 3 * math.pi / 2)
    lat, lon = polar_to_latlon([math.pi / 4], [math.pi / 2])
    assert_allclose((lat[0], lon[0]), (45.0, 90.0))
    try:
        latlon_to_polar([0.0, 91.0], [0.0, 0.0])
    except DomainError as e:
        assert "91.0" in str(e)
    else:
        raise AssertionError("expected DomainError for latitude 91")


def test_wrap_longitude():
    assert wrap_longitude(2 * math.pi) == 0.0
    assert_allclose(wrap_longitude(-math.pi / 2), 3 * math.pi / 2)
    assert_allclose(wrap_longitude(5 * math.pi), math.pi)
    wrapped = wrap_longitude(np.array([-1e-300, 7.0, -7.0]))
    assert np.all((wrapped >= 0.0) & (wrapped < 2 * math.pi))
    assert_allclose(wrapped[1:], [7.0 - 2 * math.pi, 4 * math.pi - 7.0])


def test_spherical_point_validates():
    for theta, phi in ((-0.1, 0.0), (0.5, 2 * math.pi)):
        try:
            SphericalPoint(theta, phi)
        except DomainError:
            continue
        raise AssertionError(f"expected DomainError for {(theta, phi)}")


if __name__ == "__main__":
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith("test_") and callable(fn)]
    print("=" * 70)
    print("GEOMETRY TESTS")
    print("=" * 70)
    for name, fn in tests:
        fn()
        print(f"  ✓ {name}")
    print(f"\n✅ {len(tests)} tests passed")
