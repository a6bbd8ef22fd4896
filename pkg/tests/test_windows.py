import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from aperiodic.errors import ConfigError
from aperiodic.windows import Interval, Polygon, WindowFamily, convex_hull, regular_polygon

SQUARE = Polygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))


def test_interval_half_open():
    w = Interval(-1.0, 2.0)
    assert w.contains([-1.0, 0.0, 1.999]).all()
    assert not w.contains([2.0, -1.0001]).any()
    assert w.volume == 3.0


def test_interval_rejects_reversed():
    with pytest.raises(ConfigError):
        Interval(1.0, 0.0)


@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(-20, 20))
def test_interval_fourier_matches_quadrature(a, length, q):
    w = Interval(a, a + length)
    x = np.linspace(a, a + length, 4001)
    f = np.exp(-2j * np.pi * q * x)
    num = np.trapezoid(f, x) if hasattr(np, "trapezoid") else np.trapz(f, x)
    assert abs(w.fourier(q)[0] - num) < 1e-4 * max(1.0, length)


def test_polygon_requires_ccw_convex():
    with pytest.raises(ConfigError):
        Polygon(SQUARE.vertices[::-1])
    with pytest.raises(ConfigError):
        Polygon(np.array([[0, 0], [2, 0], [1, 0.1], [2, 2], [0, 2]]))


def test_polygon_boundary_convention_tiles_the_plane():
    # translates of the unit square by Z^2 must cover each point exactly once
    pts = np.array([[0.5, 0.5], [-0.5, -0.5], [0.5, -0.5], [0.0, 0.5], [0.5, 0.0], [0.3, 0.2]])
    shifts = np.stack(np.meshgrid(range(-2, 3), range(-2, 3)), -1).reshape(-1, 2)
    for p in pts:
        hits = sum(bool(SQUARE.contains(p - s)[0]) for s in shifts)
        assert hits == 1, p


def test_polygon_area_and_bbox():
    hexagon = regular_polygon(6, 1.0)
    assert hexagon.volume == pytest.approx(3 * np.sqrt(3) / 2)
    lo, hi = hexagon.bbox()
    assert np.allclose(lo, [-1, -np.sqrt(3) / 2]) and np.allclose(hi, [1, np.sqrt(3) / 2])


@given(st.floats(-4, 4), st.floats(-4, 4))
def test_square_fourier_is_product_of_sincs(qx, qy):
    expected = np.sinc(qx) * np.sinc(qy)
    assert abs(SQUARE.fourier([qx, qy])[0] - expected) < 1e-12


@pytest.mark.parametrize("q", [(0.3, -0.7), (1.4, 0.2), (0.0, 2.1), (1e-8, 3e-9)])
def test_polygon_fourier_matches_dblquad(q):
    tri = Polygon(np.array([[0.0, 0.0], [1.2, 0.1], [0.4, 0.9]]))
    (a, b, c) = tri.vertices

    def integrate(part):
        # integrate over x in [0, 1.2] between the lower and upper edges
        def lower(x):
            return a[1] + (b[1] - a[1]) * x / b[0]

        def upper(x):
            if x <= c[0]:
                return a[1] + (c[1] - a[1]) * x / c[0]
            return c[1] + (b[1] - c[1]) * (x - c[0]) / (b[0] - c[0])

        def f(y, x):
            return part(np.exp(-2j * np.pi * (q[0] * x + q[1] * y)))

        return dblquad(f, 0.0, b[0], lower, upper, epsabs=1e-12)[0]

    num = integrate(np.real) + 1j * integrate(np.imag)
    assert abs(tri.fourier(q)[0] - num) < 1e-8


@given(st.floats(0.0, 2 * np.pi))
def test_polygon_fourier_continuous_at_series_cutoff(theta):
    hexagon = regular_polygon(6, 1.3, phase=0.2, center=(0.3, -0.1))
    d = np.array([np.cos(theta), np.sin(theta)])
    below, above = hexagon.fourier([(1e-6 - 1e-15) * d, (1e-6 + 1e-15) * d])
    assert abs(below - above) < 1e-9


def test_window_family_labels():
    fam = WindowFamily({0: Interval(0, 1), 2: Interval(-1, 0)}, (1, 1), 3)
    coords = np.array([[0, 0], [1, 1], [2, 2], [1, 0]])
    y = np.array([0.5, -0.5, 0.5, 0.5])
    assert fam.labels(coords).tolist() == [0, 2, 1, 1]
    assert fam.contains(y, coords).tolist() == [True, True, False, False]
    assert fam.volume == 2.0
    with pytest.raises(ConfigError):
        fam.contains(y)


def test_sublattice_basis_spans_label_zero():
    fam = WindowFamily({0: Interval(0, 1)}, (1, 1, 1, 1), 5)
    b = fam.sublattice_basis()
    assert round(abs(np.linalg.det(b))) == 5
    assert np.all(fam.labels(b.T) == 0)
    for lab in range(5):
        assert fam.labels(fam.coset_representative(lab))[0] == lab


def test_convex_hull_drops_interior_and_collinear():
    pts = [[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1], [1, 2]]
    hull = convex_hull(pts)
    assert len(hull) == 4
    Polygon(hull)  # counterclockwise and strictly convex
