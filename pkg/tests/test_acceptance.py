"""Acceptance criteria 1-11 at their stated tolerances and runtime budgets."""

import time
from contextlib import redirect_stdout
from io import StringIO

import numpy as np

from aperiodic.cli import EXIT_OK, main
from aperiodic.cps import PHI, fibonacci_cps, fibonacci_window, generate_model_set, penrose_vertices
from aperiodic.diffraction import (
    bragg_peaks_model_set,
    diffraction_image,
    numeric_peaks,
    peaks_from_grid,
    symmetric_grid_spec,
    symmetry_score,
    thue_morse_scaling,
)
from aperiodic.pointset import PointSet
from aperiodic.schrodinger import (
    Spectrum,
    direct_spectrum_oracle,
    hausdorff_distance,
    oracle_bands,
    spectrum_estimate,
    spectrum_sumset,
)
from aperiodic.substitution import (
    FIBONACCI,
    THUE_MORSE,
    geometric_realization,
    one_sided_fixed_point,
    rotation_sequence,
    two_sided_fixed_point,
)
from conftest import record_criterion


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def check(number, ok, detail):
    record_criterion(number, ok, detail)
    assert ok, detail


def test_criterion_01_fibonacci_equivalence():
    def work():
        v = rotation_sequence(np.arange(1, 100_001))
        w = one_sided_fixed_point(FIBONACCI, "1", 100_000)
        return v, np.frombuffer(w.encode(), dtype=np.uint8) - ord("0")

    (v, ref), dt = timed(work)
    mismatches = int(np.sum(v != ref))
    check(1, mismatches == 0 and dt < 1.0, f"{mismatches} mismatches in 1e5 letters, {dt:.3f} s (< 1 s)")


def test_criterion_02_thue_morse_string():
    expected = "0110100110010110|0110100110010110"
    # best of five to keep interpreter warm-up out of a sub-millisecond budget
    runs = [timed(lambda: str(two_sided_fixed_point(THUE_MORSE, ("0", "0"), 4).restrict(-16, 16)))
            for _ in range(5)]
    got, dt = runs[0][0], min(r[1] for r in runs)
    check(2, got == expected and dt < 1e-3, f"{got} ({dt * 1e6:.0f} us, < 1 ms)")


def test_criterion_03_model_set_vs_chain():
    def work():
        pts = generate_model_set(fibonacci_cps(), fibonacci_window(), (0.0, 200.0)).points[:, 0]
        word = one_sided_fixed_point(FIBONACCI, "1", 400).replace("1", "L").replace("0", "S")
        chain = geometric_realization(word, {"L": PHI, "S": 1.0}).points[:, 0]
        return pts, chain

    (pts, chain), dt = timed(work)
    shift = pts[0] - chain[0]
    chain = chain[chain + shift <= 200.0 + 1e-9]
    same = len(chain) == len(pts)
    dev = float(np.abs(chain + shift - pts).max()) if same else np.inf
    check(3, same and dev <= 1e-9 and dt < 1.0,
          f"{len(pts)} points, shift {shift:g}, max deviation {dev:.2g} (<= 1e-9), {dt:.3f} s (< 1 s)")


def test_criterion_04_pure_point_cross_validation():
    pitch = 1 / 1024

    def work():
        s, w = fibonacci_cps(), fibonacci_window()
        pts = generate_model_set(s, w, (0.0, 13819.66))
        exact = bragg_peaks_model_set(s, w, 3.0, 1e-3).normalized()
        exact = exact.select(exact.k[:, 0] >= 0).top(20)
        num = numeric_peaks(pts, 3.0, pitch, count=120, seed_span=500.0)
        num = num.select(num.k[:, 0] >= -1e-9).top(20)
        return len(pts), exact, num

    (n, exact, num), dt = timed(work)
    pair = np.array([np.abs(num.k[:, 0] - k).argmin() for k in exact.k[:, 0]])
    dk = float(np.abs(num.k[pair, 0] - exact.k[:, 0]).max())
    rel = float((np.abs(num.intensity[pair] - exact.intensity) / exact.intensity).max())
    one_to_one = len(set(pair.tolist())) == 20
    check(4, n == 10001 and one_to_one and dk <= pitch and rel <= 0.05 and dt < 120,
          f"N={n}, top-20 paired one-to-one={one_to_one}, max |dk| {dk:.2g} (<= {pitch:.3g}), "
          f"max rel. intensity error {rel:.3g} (<= 0.05), {dt:.1f} s (< 120 s)")


def test_criterion_05_tenfold_symmetry():
    pitch = 1 / 64

    def work():
        origin, n = symmetric_grid_spec(4.0, pitch, 2)
        pen = penrose_vertices(20)
        s_pen = symmetry_score(peaks_from_grid(pen, diffraction_image(pen, origin, pitch, n), count=300),
                               10, position_tol=pitch)
        xs = np.arange(-20, 21)
        sq = np.stack(np.meshgrid(xs, xs), -1).reshape(-1, 2).astype(float)
        sq = PointSet(sq[np.linalg.norm(sq, axis=1) <= 20])
        s_sq = symmetry_score(peaks_from_grid(sq, diffraction_image(sq, origin, pitch, n), count=300),
                              10, position_tol=pitch)
        return s_pen.score, s_sq.score

    (pen, sq), dt = timed(work)
    check(5, pen >= 0.99 and sq <= 0.9 and dt < 300,
          f"penrose fold-10 score {pen:.4f} (>= 0.99), square lattice {sq:.4f} (<= 0.9), {dt:.1f} s (< 300 s)")


def test_criterion_06_thue_morse_scaling():
    def work():
        return (thue_morse_scaling(1.0, weighted=False).beta,
                thue_morse_scaling(1 / 3, weighted=True).beta)

    (b1, b3), dt = timed(work)
    check(6, abs(b1 - 2.0) <= 0.1 and 1.05 < b3 < 1.95 and dt < 30,
          f"beta(1) unweighted {b1:.4f} (2 +- 0.1), beta(1/3) weighted {b3:.4f} (in (1.05, 1.95)), "
          f"{dt:.2f} s (< 30 s)")


def test_criterion_07_free_spectrum():
    s, dt = timed(lambda: spectrum_estimate(0.0, 8))
    err = float(np.abs(s.intervals[0] - [-2.0, 2.0]).max()) if len(s) == 1 else np.inf
    check(7, len(s) == 1 and err <= 1e-6 and dt < 5,
          f"{len(s)} interval, endpoint error {err:.2g} (<= 1e-6), {dt:.3f} s (< 5 s)")


def test_criterion_08_oracle_agreement():
    def work():
        s = spectrum_estimate(1.0, 12)
        ev = direct_spectrum_oracle(1.0, 12, "periodic")
        return s, ev

    (s, ev), dt = timed(work)
    h = hausdorff_distance(s, Spectrum(np.stack([ev, ev], axis=1)))
    h_bands = hausdorff_distance(s, oracle_bands(1.0, 12))
    check(8, h <= 1e-2 and dt < 60,
          f"Hausdorff to periodic eigenvalues {h:.4g} (<= 1e-2; to periodic/antiperiodic band hull "
          f"{h_bands:.2g}), {dt:.2f} s (< 60 s)")


def test_criterion_09_gap_opening():
    counts = [spectrum_estimate(1.0, k).gap_count for k in range(6, 13)]
    monotone = all(a <= b for a, b in zip(counts, counts[1:]))
    check(9, monotone and counts[-1] >= 10, f"gap counts k=6..12: {counts} (non-decreasing, >= 10 at k=12)")


def test_criterion_10_product_gaplessness():
    small = spectrum_estimate(0.3, 12)
    large = spectrum_estimate(8.0, 12)
    g_small = spectrum_sumset(small, small).max_gap()
    g_large = spectrum_sumset(large, large).max_gap()
    check(10, g_small <= 1e-4 and g_large > 0.1,
          f"max sumset gap at lambda=0.3: {g_small:.3g} (<= 1e-4), at lambda=8: {g_large:.4g} (> 0.1)")


def test_criterion_11_invariant_suite():
    buf = StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        code = main(["verify", "--threads", "1"])
    dt = time.perf_counter() - t0
    lines = buf.getvalue().splitlines()
    failed = [ln for ln in lines if ln.startswith("FAIL")]
    names = {"schrodinger.determinant", "schrodinger.fricke", "diffraction.positivity_inversion",
             "diffraction.translation_invariance", "cps.window_monotonicity"}
    present = {ln.split()[1] for ln in lines if ln.startswith(("PASS", "FAIL"))}
    check(11, code == EXIT_OK and names <= present and dt < 600,
          f"verify: {len(present) - len(failed)}/{len(present)} checks pass, {dt:.1f} s (< 600 s)"
          + (f"; failed: {failed}" if failed else ""))
