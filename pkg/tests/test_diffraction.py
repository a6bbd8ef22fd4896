import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aperiodic.cps import PHI, fibonacci_cps, fibonacci_window, generate_model_set, lattice_cps, \
    lattice_window, penrose_cps, penrose_vertices, penrose_window
from aperiodic.diffraction import (
    IntensityGrid,
    autocorrelation,
    bragg_peaks_model_set,
    diffraction_image,
    intensity,
    local_maxima,
    peak_scaling_exponent,
    structure_sum,
    symmetric_grid_spec,
    symmetry_score,
    thue_morse_combs,
    thue_morse_scaling,
)
from aperiodic.errors import ConfigError
from aperiodic.pointset import PointSet

coords = st.lists(st.floats(-20, 20), min_size=1, max_size=40, unique=True)
kvals = st.lists(st.floats(-4, 4), min_size=1, max_size=10)


def _patch(xs):
    xs = np.unique(np.round(xs, 6))
    return PointSet(xs.reshape(-1, 1))


@given(coords, kvals)
def test_intensity_positive_and_inversion_symmetric(xs, ks):
    p = _patch(xs)
    k = np.array(ks)
    ip, im = intensity(p, k), intensity(p, -k)
    assert np.all(ip >= 0) and np.all(ip <= 1 + 1e-12)
    assert np.allclose(ip, im, atol=1e-12)


@given(coords, kvals, st.floats(-100, 100))
def test_translation_invariance(xs, ks, t):
    p = _patch(xs)
    k = np.array(ks)
    assert np.allclose(intensity(p, k), intensity(p.translated([t]), k), atol=1e-10)


def test_intensity_at_zero_is_one():
    p = penrose_vertices(5)
    assert intensity(p, np.zeros((1, 2)))[0] == pytest.approx(1.0)


def test_structure_sum_against_loop():
    p = PointSet(np.array([[0.0, 0.0], [1.0, 0.5], [-0.3, 2.0]]))
    k = np.array([[0.2, -0.7]])
    ref = sum(np.exp(-2j * np.pi * (k[0] @ x)) for x in p.points)
    assert structure_sum(p, k)[0] == pytest.approx(ref)


def test_wiener_consistency():
    p = generate_model_set(fibonacci_cps(), fibonacci_window(), (0.0, 80.0))
    gamma = autocorrelation(p, 100.0, 80.0)
    k = np.linspace(-3, 3, 61)
    assert np.allclose(gamma.fourier(k), np.abs(structure_sum(p, k)) ** 2 / 80.0, atol=1e-9)


def test_autocorrelation_symmetry_and_support():
    p = generate_model_set(fibonacci_cps(), fibonacci_window(), (0.0, 200.0))
    gamma = autocorrelation(p, 5.0, 200.0)
    assert gamma.weight_at([0.0]) == pytest.approx(len(p) / 200.0)
    for z in gamma.vectors[:, 0]:
        assert gamma.weight_at([z]) == pytest.approx(gamma.weight_at([-z]))
    # every difference is a + b phi with small integers
    for z in gamma.vectors[:, 0]:
        b = np.arange(-200, 201)
        x = z - b * PHI
        assert np.min(np.abs(x - np.rint(x))) < 1e-9


def test_grid_matches_pointwise(rng):
    p = PointSet(rng.uniform(-5, 5, (60, 2)))
    origin, n = symmetric_grid_spec(1.0, 0.25, 2)
    g = diffraction_image(p, origin, 0.25, n)
    assert g.shape == (9, 9)
    assert np.allclose(g.values.ravel(), intensity(p, g.nodes()), atol=1e-12)
    g4 = diffraction_image(p, origin, 0.25, n, threads=4)
    assert np.array_equal(g.values, g4.values)


def test_local_maxima_strict():
    v = np.zeros(11)
    v[[3, 7]] = [1.0, 0.5]
    v[8] = 0.5  # plateau: neither side strictly greater
    peaks = local_maxima(IntensityGrid(np.array([0.0]), 1.0, v, {}))
    assert peaks.k[:, 0].tolist() == [3.0]


def test_lattice_peaks_on_integers():
    pts = generate_model_set(lattice_cps(1), lattice_window(1), (-50.0, 50.0))
    ex = bragg_peaks_model_set(lattice_cps(1), lattice_window(1), 3.5).normalized()
    assert np.allclose(ex.k, np.rint(ex.k)) and len(ex) == 7
    assert np.allclose(intensity(pts, ex.k), 1.0)


def test_fibonacci_exact_peaks_match_large_patch():
    s, w = fibonacci_cps(), fibonacci_window()
    ex = bragg_peaks_model_set(s, w, 3.0, 1e-3).normalized().top(15)
    pts = generate_model_set(s, w, (0.0, 20000.0))
    assert np.allclose(intensity(pts, ex.k), ex.intensity, atol=5e-3)


def test_fibonacci_bragg_density_squared():
    ex = bragg_peaks_model_set(fibonacci_cps(), fibonacci_window(), 1.0)
    assert ex.intensity[0] == pytest.approx((PHI / np.sqrt(5)) ** 2)
    assert ex.meta["density"] == pytest.approx(PHI / np.sqrt(5))


def test_penrose_exact_peaks_match_patch():
    ex = bragg_peaks_model_set(penrose_cps(), penrose_window(), 3.2, 2e-2).normalized().top(12)
    pts = penrose_vertices(40)
    assert np.allclose(intensity(pts, ex.k), ex.intensity, atol=5e-3)


def test_symmetry_score_square_lattice():
    xs = np.arange(-12, 13)
    sq = np.stack(np.meshgrid(xs, xs), -1).reshape(-1, 2).astype(float)
    origin, n = symmetric_grid_spec(2.5, 1 / 32, 2)
    grid = diffraction_image(PointSet(sq), origin, 1 / 32, n)
    assert symmetry_score(grid, 4).score > 0.95
    assert symmetry_score(grid, 10).score < 0.5
    with pytest.raises(ConfigError):
        symmetry_score(grid, 1)


def test_thue_morse_combs():
    pos, ones, signs = thue_morse_combs([3, 4])
    assert ones[0].tolist() == [1.0, 2.0, 4.0, 7.0]
    assert signs[1].sum() == 0


def test_thue_morse_scaling_exponents():
    assert thue_morse_scaling(1.0, weighted=False).beta == pytest.approx(2.0, abs=1e-6)
    # |S| at k = 1/3 grows like 3^e over N = 2^e doublings
    assert thue_morse_scaling(1 / 3, weighted=True).beta == pytest.approx(np.log2(3), abs=1e-3)


def test_scaling_null_and_errors():
    pts = [np.arange(2**e, dtype=float) for e in range(4, 9)]
    fit = peak_scaling_exponent(pts, 0.5, weights=[(-1.0) ** np.arange(2**e) * 0 for e in range(4, 9)])
    assert fit.null and fit.beta is None
    with pytest.raises(ConfigError):
        peak_scaling_exponent(pts[:2], 0.5)
