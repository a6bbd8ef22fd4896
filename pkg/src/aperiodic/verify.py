"""Invariant suite behind ``aperiodic verify``.

Each check raises ``AssertionError`` with a short reason on failure and
returns a one-line summary on success.  ``run_checks`` prints one
``PASS``/``FAIL`` line per check.
"""

from __future__ import annotations

import tempfile
import time
from contextlib import redirect_stdout
from io import StringIO
from pathlib import Path

import numpy as np

from .cps import (
    PHI,
    check_injective,
    delone_check,
    fibonacci_cps,
    fibonacci_window,
    generate_model_set,
    penrose_cps,
    penrose_vertices,
    star_map,
)
from .diffraction import (
    autocorrelation,
    bragg_peaks_model_set,
    diffraction_image,
    intensity,
    numeric_peaks,
    peaks_from_grid,
    structure_sum,
    symmetric_grid_spec,
    symmetry_score,
    thue_morse_scaling,
)
from .pointset import PointSet
from .schrodinger import (
    Spectrum,
    det2,
    direct_spectrum_oracle,
    hausdorff_distance,
    merge_intervals,
    spectrum_estimate,
    spectrum_sumset,
    trace_map_orbit,
    transfer_matrix,
)
from .substitution import (
    FIBONACCI,
    THUE_MORSE,
    geometric_realization,
    letter_counts,
    one_sided_fixed_point,
    rotation_sequence,
    two_sided_fixed_point,
)
from .windows import Interval, regular_polygon

GOLDEN_DIR = Path(__file__).parent / "golden"
GOLDEN_FILES = {
    "penrose_r20.csv": (["generate", "--preset", "penrose", "--radius", "20"], "points.csv"),
    "sweep_product_l10.pgm": (["spectrum", "--sweep", "0:2:0.05", "--level", "10", "--product"],
                              "raster_2d.pgm"),
}


def _rng():
    return np.random.default_rng(20240601)


# --- cps ---------------------------------------------------------------------

def check_star_map_linearity():
    scheme = penrose_cps()
    rng = _rng()
    a, b = rng.integers(-50, 50, (2, 200, scheme.dim))
    pa, ia = star_map(scheme, a)
    pb, ib = star_map(scheme, b)
    ps, is_ = star_map(scheme, a + b)
    err = max(np.abs(ps - pa - pb).max(), np.abs(is_ - ia - ib).max())
    assert err <= 1e-9, f"linearity error {err:.3g}"
    assert check_injective(fibonacci_cps()), "fibonacci projection not injective on the test range"
    return f"max error {err:.2g}"


def check_model_set_consistency():
    scheme, window = fibonacci_cps(), fibonacci_window()
    pts = generate_model_set(scheme, window, (-60.0, 60.0))
    phys, intl = star_map(scheme, pts.provenance)
    assert np.allclose(phys, pts.points, atol=1e-12)
    assert np.all(window.contains(intl)), "a returned point has its star outside the window"
    # brute force over a box that certainly contains every candidate
    g = np.arange(-200, 201)
    cand = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    p, q = star_map(scheme, cand)
    sel = (p[:, 0] >= -60) & (p[:, 0] <= 60) & window.contains(q)
    assert sel.sum() == len(pts), f"brute force {sel.sum()} != {len(pts)}"
    return f"{len(pts)} points"


def check_window_monotonicity():
    scheme = fibonacci_cps()
    big = generate_model_set(scheme, Interval(-1.0, PHI - 1.0), (-100.0, 100.0))
    small = generate_model_set(scheme, Interval(-0.6, 0.3), (-100.0, 100.0))
    assert big.contains(small), "1D: smaller window produced a point outside the larger model set"
    s2 = penrose_cps()
    big2 = generate_model_set(s2, regular_polygon(10, 1.0), ((-8, -8), (8, 8)))
    small2 = generate_model_set(s2, regular_polygon(10, 0.6), ((-8, -8), (8, 8)))
    assert big2.contains(small2), "2D: smaller window produced a point outside the larger model set"
    return f"1D {len(small)} <= {len(big)}, 2D {len(small2)} <= {len(big2)}"


def check_fibonacci_chain():
    pts = generate_model_set(fibonacci_cps(), fibonacci_window(), (0.0, 200.0))
    word = one_sided_fixed_point(FIBONACCI, "1", 400)
    chain = geometric_realization(word.replace("1", "a").replace("0", "b"), {"a": PHI, "b": 1.0}).points[:, 0]
    chain = chain[chain <= 200.0 + 1e-9]
    assert len(chain) == len(pts), f"{len(chain)} chain points vs {len(pts)} model set points"
    dev = np.abs(chain - pts.points[:, 0]).max()
    assert dev <= 1e-9, f"max deviation {dev:.3g}"
    return f"{len(pts)} points, deviation {dev:.2g}"


def check_penrose_fivefold():
    pts = penrose_vertices(12)
    ang = 2 * np.pi / 5
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    rotated = PointSet(pts.points @ rot.T)
    assert pts.contains(rotated, 1e-9), "patch is not invariant under rotation by 72 degrees"
    r, _ = delone_check(pts, ((-6, -6), (6, 6)))
    assert abs(2 * r - 1 / PHI) < 1e-9, f"min distance {2 * r} != 1/phi"
    return f"{len(pts)} points"


def check_delone():
    pts = generate_model_set(fibonacci_cps(), fibonacci_window(), (-50.0, 50.0))
    r, big_r = delone_check(pts, (-40.0, 40.0))
    # R is sampled on a grid of pitch <= r/2, so it is exact only to r/4
    assert abs(r - 0.5) < 1e-9 and abs(big_r - PHI / 2) <= r / 4, f"r={r}, R={big_r}"
    return f"r={r:.6f} R={big_r:.6f}"


# --- substitution ----------------------------------------------------------

def check_fibonacci_equivalence(n=100_000):
    v = rotation_sequence(np.arange(1, n + 1))
    word = one_sided_fixed_point(FIBONACCI, "1", n)
    ref = np.frombuffer(word.encode(), dtype=np.uint8) - ord("0")
    bad = np.flatnonzero(v != ref)
    assert len(bad) == 0, f"first mismatch at n={bad[0] + 1 if len(bad) else None}"
    return f"{n} letters"


def check_thue_morse_string():
    w = two_sided_fixed_point(THUE_MORSE, ("0", "0"), 4).restrict(-16, 16)
    expected = "0110100110010110|0110100110010110"
    assert str(w) == expected, f"got {w}"
    return expected


def check_abelianization():
    for rule in (THUE_MORSE, FIBONACCI):
        m = rule.incidence_matrix()
        w = one_sided_fixed_point(rule, "0" if rule is THUE_MORSE else "1", 300)
        assert np.array_equal(letter_counts(rule, rule(w)), m @ letter_counts(rule, w))
    word = one_sided_fixed_point(THUE_MORSE, "0", 2**14)
    for n in (10, 100, 1000, 2**14 - 3):
        ones = word[:n].count("1")
        assert abs(ones - n / 2) <= np.log2(n) + 2, f"frequency bound fails at N={n}"
    return "counts follow the incidence matrix"


# --- diffraction -------------------------------------------------------------

def _random_patch(n=200, d=2):
    return PointSet(_rng().uniform(-10, 10, (n, d)), dim=d)


def check_diffraction_symmetry():
    patch = _random_patch()
    k = _rng().uniform(-3, 3, (500, 2))
    ip, im = intensity(patch, k), intensity(patch, -k)
    assert np.all(ip >= 0), "negative intensity"
    err = np.abs(ip - im).max()
    assert err <= 1e-12, f"inversion asymmetry {err:.3g}"
    return f"max |I(k)-I(-k)| {err:.2g}"


def check_translation_invariance():
    patch = penrose_vertices(8)
    k = _rng().uniform(-3, 3, (500, 2))
    err = np.abs(intensity(patch, k) - intensity(patch.translated([0.37, -1.21]), k)).max()
    assert err <= 1e-10, f"translation changed I(k) by {err:.3g}"
    return f"max change {err:.2g}"


def check_wiener():
    patch = generate_model_set(fibonacci_cps(), fibonacci_window(), (0.0, 150.0))
    gamma = autocorrelation(patch, 200.0, 150.0)
    k = np.linspace(-2, 2, 41)
    lhs = gamma.fourier(k)
    rhs = np.abs(structure_sum(patch, k)) ** 2 / 150.0
    err = np.abs(lhs - rhs).max() / rhs.max()
    assert err <= 1e-9, f"relative mismatch {err:.3g}"
    return f"relative error {err:.2g}"


def check_fibonacci_peaks():
    scheme, window = fibonacci_cps(), fibonacci_window()
    pts = generate_model_set(scheme, window, (0.0, 13819.66))
    exact = bragg_peaks_model_set(scheme, window, 3.0, 1e-3).normalized()
    exact = exact.select(exact.k[:, 0] >= 0).top(20)
    num = numeric_peaks(pts, 3.0, 1 / 1024, count=120, seed_span=500.0)
    num = num.select(num.k[:, 0] >= -1e-9).top(20)
    pairs = [np.abs(num.k[:, 0] - k).argmin() for k in exact.k[:, 0]]
    dk = np.abs(num.k[pairs, 0] - exact.k[:, 0]).max()
    rel = (np.abs(num.intensity[pairs] - exact.intensity) / exact.intensity).max()
    assert len(set(pairs)) == 20, "numeric peaks do not pair one-to-one with exact peaks"
    assert dk <= 1 / 1024, f"position error {dk:.3g}"
    assert rel <= 0.05, f"relative intensity error {rel:.3g}"
    return f"dk {dk:.2g}, rel {rel:.2g}"


def check_penrose_tenfold():
    origin, n = symmetric_grid_spec(4.0, 1 / 64, 2)
    pen = penrose_vertices(20)
    s_pen = symmetry_score(peaks_from_grid(pen, diffraction_image(pen, origin, 1 / 64, n), count=300), 10,
                           position_tol=1 / 64)
    xs = np.arange(-20, 21)
    sq = np.stack(np.meshgrid(xs, xs), -1).reshape(-1, 2).astype(float)
    sq = PointSet(sq[np.linalg.norm(sq, axis=1) <= 20])
    s_sq = symmetry_score(peaks_from_grid(sq, diffraction_image(sq, origin, 1 / 64, n), count=300), 10,
                          position_tol=1 / 64)
    assert s_pen.score >= 0.99, f"penrose score {s_pen.score:.4f}"
    assert s_sq.score <= 0.9, f"square lattice score {s_sq.score:.4f}"
    return f"penrose {s_pen.score:.4f}, square {s_sq.score:.4f}"


def check_thue_morse_scaling():
    b1 = thue_morse_scaling(1.0, weighted=False).beta
    b3 = thue_morse_scaling(1 / 3, weighted=True).beta
    assert abs(b1 - 2.0) <= 0.1, f"beta(1) = {b1}"
    assert 1.05 < b3 < 1.95, f"beta(1/3) = {b3}"
    return f"beta(1)={b1:.4f}, beta(1/3)={b3:.4f}"


# --- schrodinger -------------------------------------------------------------

def check_determinant():
    rng = _rng()
    worst = 0.0
    for lam in (0.5, 1.0, 2.0, 4.0):
        bands = spectrum_estimate(lam, 10).intervals
        for _ in range(10):
            lo, hi = bands[rng.integers(len(bands))]
            E = rng.uniform(lo, hi)
            worst = max(worst, abs(float(det2(transfer_matrix(E, lam, np.arange(1, 90)))) - 1.0))
    assert worst <= 1e-12, f"det error {worst:.3g}"
    for E, lam in rng.uniform(-5, 5, (5, 2)):
        assert det2(transfer_matrix(E, abs(lam), np.arange(1, 60), exact=True)) == 1
    return f"max |det-1| {worst:.2g}; exact mode det == 1"


def check_fricke():
    rng = _rng()
    worst = 0.0
    for lam in (0.0, 0.5, 1.0, 4.0, 8.0, 20.0):
        for E in rng.uniform(-3 - lam, 3 + lam, 20):
            orbit = trace_map_orbit(E, lam, 30)
            if orbit.escaped:
                continue
            err = np.abs(orbit.invariants() - lam**2 / 4).max() / max(1.0, lam**2 / 4)
            worst = max(worst, err)
    assert worst <= 1e-9, f"invariant drift {worst:.3g}"
    return f"max scaled drift {worst:.2g}"


def check_free_spectrum():
    s = spectrum_estimate(0.0, 8)
    assert len(s) == 1 and np.abs(s.intervals[0] - [-2, 2]).max() <= 1e-6, f"got {s.intervals}"
    s10 = spectrum_estimate(0.0, 10)
    err = np.abs(np.sort(-s10.intervals.ravel()) - np.sort(s10.intervals.ravel())).max()
    assert err <= 1e-8, f"E -> -E asymmetry {err:.3g}"
    return f"{s.intervals[0]}"


def check_oracle_containment():
    s = spectrum_estimate(1.0, 10)
    ev = direct_spectrum_oracle(1.0, 10)
    out = int((~s.contains(ev, 1e-6)).sum())
    assert out == 0, f"{out} eigenvalues outside the bands"
    return f"{len(ev)} eigenvalues inside {len(s)} bands"


def check_oracle_agreement():
    s = spectrum_estimate(1.0, 12)
    ev = direct_spectrum_oracle(1.0, 12, "periodic")
    h = hausdorff_distance(s, Spectrum(np.stack([ev, ev], axis=1)))
    assert h <= 1e-2, f"Hausdorff distance {h:.4g}"
    return f"Hausdorff {h:.4g}"


def check_sumset_algebra():
    rng = _rng()
    for _ in range(50):
        a = Spectrum(merge_intervals(np.sort(rng.uniform(-3, 3, (4, 2)), axis=1)))
        b = Spectrum(merge_intervals(np.sort(rng.uniform(-3, 3, (3, 2)), axis=1)))
        ab, ba = spectrum_sumset(a, b), spectrum_sumset(b, a)
        assert np.array_equal(ab.intervals, ba.intervals), "sumset not commutative"
        wider = Spectrum(merge_intervals(np.concatenate([a.intervals, [[-1.0, 6.0]]])))
        big = spectrum_sumset(wider, b)
        lo_in = big.contains(ab.intervals[:, 0])
        hi_in = big.contains(ab.intervals[:, 1])
        assert lo_in.all() and hi_in.all(), "sumset not monotone"
    return "commutative and monotone"


def check_band_measure():
    m = [spectrum_estimate(lam, 10).measure for lam in (0, 1, 2, 4, 8)]
    assert all(x >= y for x, y in zip(m, m[1:])), f"measures {m}"
    return " ".join(f"{x:.4g}" for x in m)


def check_gap_opening():
    counts = [spectrum_estimate(1.0, k).gap_count for k in range(6, 13)]
    assert all(a <= b for a, b in zip(counts, counts[1:])) and counts[-1] >= 10, f"counts {counts}"
    return f"gap counts {counts}"


def check_product_gaps():
    small = spectrum_estimate(0.3, 12)
    large = spectrum_estimate(8.0, 12)
    g_small = spectrum_sumset(small, small).max_gap()
    g_large = spectrum_sumset(large, large).max_gap()
    assert g_small <= 1e-4, f"lambda=0.3 gap {g_small:.3g}"
    assert g_large > 0.1, f"lambda=8 max gap {g_large:.3g}"
    return f"max gaps {g_small:.2g} (0.3), {g_large:.3g} (8)"


# --- golden files -----------------------------------------------------------

def check_golden(name: str, golden_dir: Path | None = None, threads: int = 1):
    from .cli import main

    argv, produced = GOLDEN_FILES[name]
    ref = Path(golden_dir or GOLDEN_DIR) / name
    assert ref.exists(), f"golden file {ref} missing"
    with tempfile.TemporaryDirectory() as tmp:
        with redirect_stdout(StringIO()):
            code = main(argv + ["--out", tmp, "--threads", str(threads)])
        assert code == 0, f"generator exited with {code}"
        new = (Path(tmp) / produced).read_bytes()
    old = ref.read_bytes()
    if new != old:
        raise AssertionError(f"golden file {name} differs ({len(old)} vs {len(new)} bytes)")
    return f"{len(old)} bytes identical"


QUICK = [
    ("cps.star_map_linearity", check_star_map_linearity),
    ("cps.model_set_consistency", check_model_set_consistency),
    ("cps.window_monotonicity", check_window_monotonicity),
    ("cps.fibonacci_chain", check_fibonacci_chain),
    ("cps.penrose_fivefold", check_penrose_fivefold),
    ("cps.delone", check_delone),
    ("substitution.fibonacci_equivalence", check_fibonacci_equivalence),
    ("substitution.thue_morse_string", check_thue_morse_string),
    ("substitution.abelianization", check_abelianization),
    ("diffraction.positivity_inversion", check_diffraction_symmetry),
    ("diffraction.translation_invariance", check_translation_invariance),
    ("diffraction.wiener", check_wiener),
    ("schrodinger.determinant", check_determinant),
    ("schrodinger.fricke", check_fricke),
    ("schrodinger.free_spectrum", check_free_spectrum),
    ("schrodinger.oracle_containment", check_oracle_containment),
    ("schrodinger.sumset_algebra", check_sumset_algebra),
    ("schrodinger.band_measure", check_band_measure),
    ("golden.penrose_r20", lambda **kw: check_golden("penrose_r20.csv", **kw)),
]

FULL_ONLY = [
    ("diffraction.fibonacci_peaks", check_fibonacci_peaks),
    ("diffraction.penrose_tenfold", check_penrose_tenfold),
    ("diffraction.thue_morse_scaling", check_thue_morse_scaling),
    ("schrodinger.oracle_agreement", check_oracle_agreement),
    ("schrodinger.gap_opening", check_gap_opening),
    ("schrodinger.product_gaps", check_product_gaps),
    ("golden.sweep_product_l10", lambda **kw: check_golden("sweep_product_l10.pgm", **kw)),
]


def run_checks(quick: bool = False, golden_dir=None, threads: int = 1, out=print) -> bool:
    checks = QUICK if quick else QUICK + FULL_ONLY
    ok_all = True
    t_start = time.perf_counter()
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            kwargs = {"golden_dir": golden_dir, "threads": threads} if name.startswith("golden.") else {}
            detail = fn(**kwargs)
            out(f"PASS {name} ({time.perf_counter() - t0:.2f}s) {detail}")
        except AssertionError as exc:
            ok_all = False
            out(f"FAIL {name} ({time.perf_counter() - t0:.2f}s) {exc}")
        except Exception as exc:  # a crash is a failure of that check, not of the suite
            ok_all = False
            out(f"FAIL {name} ({time.perf_counter() - t0:.2f}s) {type(exc).__name__}: {exc}")
    n_pass = "all" if ok_all else "not all"
    out(f"{n_pass} {len(checks)} checks passed in {time.perf_counter() - t_start:.1f}s")
    return ok_all
