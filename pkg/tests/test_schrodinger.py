from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aperiodic.errors import CapExceededError, ConfigError
from aperiodic.schrodinger import (
    Spectrum,
    approximant_period,
    approximant_potential,
    coupling_sweep,
    det2,
    direct_spectrum_oracle,
    fibonacci_potential,
    fricke_invariant,
    half_trace,
    hausdorff_distance,
    merge_intervals,
    oracle_bands,
    rasterize,
    spectrum_estimate,
    spectrum_sumset,
    trace_map_orbit,
    transfer_matrix,
)


def naive_product(E, lam, v):
    t = np.eye(2)
    for vn in v:
        t = np.array([[E - lam * vn, -1.0], [1.0, 0.0]]) @ t
    return t


def test_periods():
    assert [approximant_period(k) for k in range(8)] == [1, 1, 2, 3, 5, 8, 13, 21]
    assert approximant_period(12) == 233
    assert approximant_potential(0).tolist() == [0.0]
    assert approximant_potential(4).tolist() == fibonacci_potential(5).tolist()


def test_transfer_matrix_small_cases():
    assert np.array_equal(transfer_matrix(0.0, 0.0, [1]).astype(float), [[0, -1], [1, 0]])
    assert np.array_equal(transfer_matrix(1.3, 2.0, []).astype(float), np.eye(2))


@given(st.floats(-4, 4), st.floats(0, 5), st.integers(1, 30))
def test_transfer_matrix_matches_naive(E, lam, n):
    v = fibonacci_potential(n)
    ref = naive_product(E, lam, v)
    got = transfer_matrix(E, lam, np.arange(1, n + 1)).astype(float)
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-9)


@given(st.floats(-6, 6), st.floats(0, 8), st.integers(1, 40))
def test_exact_determinant_is_one(E, lam, n):
    t = transfer_matrix(E, lam, np.arange(1, n + 1), exact=True)
    assert det2(t) == Fraction(1)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0])
def test_determinant_in_bands(lam, rng):
    bands = spectrum_estimate(lam, 10).intervals
    for _ in range(20):
        lo, hi = bands[rng.integers(len(bands))]
        t = transfer_matrix(rng.uniform(lo, hi), lam, np.arange(1, 90))
        assert abs(float(det2(t)) - 1.0) <= 1e-12


@pytest.mark.parametrize("level", [1, 2, 3, 5, 8])
def test_half_trace_is_half_the_period_trace(level):
    p = approximant_period(level)
    for E in np.linspace(-3, 3, 7):
        t = transfer_matrix(E, 1.3, np.arange(1, p + 1)).astype(float)
        assert half_trace(E, 1.3, level) == pytest.approx(np.trace(t) / 2, rel=1e-9, abs=1e-9)


@given(st.floats(-10, 10), st.floats(0, 30))
def test_fricke_conservation(E, lam):
    orbit = trace_map_orbit(E, lam, 30)
    inv = orbit.invariants()
    if orbit.escaped:
        inv = inv[: orbit.escape_step]
    if len(inv):
        assert np.abs(inv - lam**2 / 4).max() <= 1e-9 * max(1.0, lam**2 / 4)


def test_fricke_initial_value():
    assert fricke_invariant(1.0, 0.3, 0.3 - 0.5) == pytest.approx(0.25)


@pytest.mark.parametrize("level", [0, 1, 5, 8, 11])
def test_free_spectrum(level):
    s = spectrum_estimate(0.0, level)
    assert len(s) == 1 and np.abs(s.intervals[0] - [-2.0, 2.0]).max() <= 1e-6


@pytest.mark.parametrize("level", [7, 10])
def test_lambda_zero_symmetry(level):
    s = spectrum_estimate(0.0, level)
    assert np.allclose(np.sort(-s.intervals.ravel()), np.sort(s.intervals.ravel()), atol=1e-8)


@pytest.mark.parametrize("lam", [0.3, 1.0, 3.0, 8.0])
def test_band_count_and_oracle_containment(lam):
    s = spectrum_estimate(lam, 10)
    assert len(s) == approximant_period(10)
    ev = direct_spectrum_oracle(lam, 10)
    assert s.contains(ev, 1e-6).all()
    assert hausdorff_distance(s, oracle_bands(lam, 10)) < 1e-6


def test_free_boundary_closed_form():
    ev = direct_spectrum_oracle(0.0, 9, "free")
    m = approximant_period(9)
    ref = np.sort(2 * np.cos(np.pi * np.arange(1, m + 1) / (m + 1)))
    assert np.allclose(ev, ref, atol=1e-10)


def test_oracle_cap_and_boundary():
    with pytest.raises(CapExceededError):
        direct_spectrum_oracle(1.0, 20)
    with pytest.raises(ConfigError):
        direct_spectrum_oracle(1.0, 5, "twisted")


def test_band_measure_non_increasing():
    m = [spectrum_estimate(lam, 10).measure for lam in (0, 1, 2, 4, 8)]
    assert all(a >= b for a, b in zip(m, m[1:]))
    assert m[-1] < m[1]


def test_sumset_examples():
    a = Spectrum(np.array([[-2.0, 2.0]]))
    assert spectrum_sumset(a, a).intervals.tolist() == [[-4.0, 4.0]]
    b = Spectrum(np.array([[0.0, 1.0], [3.0, 4.0]]))
    assert spectrum_sumset(b, b).intervals.tolist() == [[0, 2], [3, 5], [6, 8]]


intervals = st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 2)), min_size=1, max_size=6).map(
    lambda xs: Spectrum(merge_intervals([(a, a + w) for a, w in xs])))


@given(intervals, intervals)
def test_sumset_commutative(a, b):
    assert np.array_equal(spectrum_sumset(a, b).intervals, spectrum_sumset(b, a).intervals)


@given(intervals, intervals, intervals)
def test_sumset_monotone(a, extra, b):
    bigger = Spectrum(merge_intervals(np.concatenate([a.intervals, extra.intervals])))
    small, big = spectrum_sumset(a, b), spectrum_sumset(bigger, b)
    for lo, hi in small.intervals:
        j = np.searchsorted(big.intervals[:, 0], lo, side="right") - 1
        assert j >= 0 and big.intervals[j, 0] <= lo and hi <= big.intervals[j, 1]


def test_merge_and_hausdorff():
    assert merge_intervals([[0, 1], [0.5, 2], [3, 4]]).tolist() == [[0, 2], [3, 4]]
    assert merge_intervals([[0, 1], [1.05, 2]], min_gap=0.1).tolist() == [[0, 2]]
    a = Spectrum(np.array([[0.0, 1.0]]))
    b = Spectrum(np.array([[0.0, 1.0], [3.0, 3.0]]))
    assert hausdorff_distance(a, b) == pytest.approx(2.0)
    assert hausdorff_distance(a, a) == 0.0


def test_invalid_spectrum_rejected():
    with pytest.raises(ConfigError):
        Spectrum(np.array([[0.0, 2.0], [1.0, 3.0]]))


def test_sweep_and_raster():
    rows = coupling_sweep([0.0], 6, product=True)
    assert rows[0].product.intervals[0] == pytest.approx([-4.0, 4.0], abs=1e-6)
    rows = coupling_sweep([0.0, 1.0, 2.0], 6, product=True)
    r1 = rasterize(rows, (-4.5, 4.5), 90)
    assert r1.shape == (3, 90)
    assert r1[2].sum() > r1[0].sum()  # the free row (last) is the widest
    assert r1[2, 0] == False and r1[2, 45]  # noqa: E712
    with pytest.raises(ConfigError):
        coupling_sweep([-1.0], 5)


def test_sweep_thread_independent():
    a = coupling_sweep([0.5, 1.5, 2.5], 8, threads=1)
    b = coupling_sweep([0.5, 1.5, 2.5], 8, threads=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.spectrum.intervals, y.spectrum.intervals)
        assert np.array_equal(x.product.intervals, y.product.intervals)
