"""Autocorrelation, kinematic diffraction of finite patches, and exact Bragg peaks.

Numeric intensities use ``I(k) = |S(k)|^2 / N^2`` with
``S(k) = sum_x w_x exp(-2 pi i k.x)`` and ``N = sum |w_x|``, so ``I(0) = 1``.
Exact model-set intensities are per unit volume, ``|A(k)|^2`` with
``A(0) = density``; divide by ``density^2`` to compare with numeric values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import cKDTree

from .cps import CutProjectScheme, projected_dual_points
from .errors import ConfigError
from .pointset import PointSet
from .windows import Interval, Polygon, Window, WindowFamily

TWO_PI = 2.0 * np.pi
PEAK_FLOOR = 1e-4
_CHUNK = 256


# --- autocorrelation ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AutocorrelationEstimate:
    vectors: np.ndarray  # (n, d) difference vectors, sorted
    weights: np.ndarray  # multiplicity / volume
    volume: float
    point_count: int

    def weight_at(self, z, tol: float = 1e-9) -> float:
        z = np.asarray(z, dtype=float).reshape(1, -1)
        dist = np.linalg.norm(self.vectors - z, axis=1)
        hit = dist <= tol
        return float(self.weights[hit].sum())

    def fourier(self, k) -> np.ndarray:
        """Fourier transform of the truncated autocorrelation at wavevectors ``k``."""
        k = _as_kvectors(k, self.vectors.shape[1])
        phase = np.exp(-1j * TWO_PI * (k @ self.vectors.T))
        return (phase @ self.weights).real


def autocorrelation(patch: PointSet, max_range: float, volume: float) -> AutocorrelationEstimate:
    """Difference vectors of ``patch`` up to ``max_range``, weighted by count / volume.

    Coinciding differences are merged exactly via integer provenance when
    available, else after rounding to 1e-9.
    """
    if len(patch) == 0:
        raise ConfigError("autocorrelation of an empty patch")
    if not (volume > 0 and max_range > 0):
        raise ConfigError("volume and max_range must be positive")
    pts = patch.points
    pairs = cKDTree(pts).query_pairs(max_range, output_type="ndarray")
    i = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(len(pts))])
    j = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(len(pts))])
    if patch.provenance is not None:
        keys = patch.provenance[i] - patch.provenance[j]
    else:
        keys = np.rint((pts[i] - pts[j]) / 1e-9).astype(np.int64)
    uniq, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    vectors = pts[i[first]] - pts[j[first]]
    order = np.lexsort(vectors.T[::-1])
    return AutocorrelationEstimate(vectors[order], counts[order] / volume, float(volume), len(pts))


# --- structure sums and grids ------------------------------------------------

def _as_kvectors(k, d: int) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        k = k.reshape(1, 1)
    if k.ndim == 1:
        k = k.reshape(-1, 1) if d == 1 else k.reshape(1, d)
    return k


def _patch_arrays(patch, weights=None):
    pts = patch.points if isinstance(patch, PointSet) else np.asarray(patch, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != len(pts):
        raise ConfigError("weights must match point count")
    return pts, w


def structure_sum(patch, k, weights=None) -> np.ndarray:
    """S(k) = sum_x w_x exp(-2 pi i k.x) for each row of ``k``."""
    pts, w = _patch_arrays(patch, weights)
    k = _as_kvectors(k, pts.shape[1])
    out = np.empty(len(k), dtype=complex)
    step = max(1, 4_000_000 // max(1, len(pts)))
    for s in range(0, len(k), step):
        phase = k[s : s + step] @ pts.T
        out[s : s + step] = np.exp(-1j * TWO_PI * phase) @ w
    return out


def intensity(patch, k, weights=None) -> np.ndarray:
    pts, w = _patch_arrays(patch, weights)
    norm = np.sum(np.abs(w))
    if norm == 0:
        raise ConfigError("patch has zero total weight")
    return np.abs(structure_sum(pts, k, w)) ** 2 / norm**2


@dataclass(frozen=True, eq=False)
class IntensityGrid:
    """Intensities on the nodes ``origin + index * pitch`` (1D or 2D)."""

    origin: np.ndarray
    pitch: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.pitch * np.arange(self.values.shape[i])

    def nodes(self) -> np.ndarray:
        axes = [self.axis(i) for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    @property
    def inscribed_radius(self) -> float:
        lo = self.origin
        hi = self.origin + self.pitch * (np.array(self.values.shape) - 1)
        return float(np.min(np.minimum(-lo, hi)))


def symmetric_grid_spec(half_extent: float, pitch: float, dim: int):
    """Origin and node count for a grid over [-half_extent, half_extent]^dim containing k = 0."""
    n = int(round(half_extent / pitch))
    return np.full(dim, -n * pitch), 2 * n + 1


def diffraction_image(patch, origin, pitch: float, shape, *, weights=None, threads: int = 1) -> IntensityGrid:
    """Evaluate I(k) on a regular grid.

    2D grids factor exp(-2 pi i k.x) over the two axes, so each block of rows
    is one matrix product.  Blocks have a fixed size independent of
    ``threads``; the result is bit-identical for any thread count.
    """
    pts, w = _patch_arrays(patch, weights)
    if len(pts) == 0:
        raise ConfigError("diffraction of an empty patch")
    d = pts.shape[1]
    origin = np.asarray(origin, dtype=float).reshape(d)
    shape = (int(shape),) * d if np.isscalar(shape) else tuple(int(s) for s in shape)
    norm = np.sum(np.abs(w)) ** 2
    axes = [origin[i] + pitch * np.arange(shape[i]) for i in range(d)]

    if d == 1:
        blocks = [axes[0][s : s + _CHUNK * 16] for s in range(0, shape[0], _CHUNK * 16)]

        def work(kb):
            return np.abs(structure_sum(pts, kb.reshape(-1, 1), w)) ** 2

    elif d == 2:
        ey = np.exp(-1j * TWO_PI * np.outer(pts[:, 1], axes[1]))  # (N, ny)
        blocks = [axes[0][s : s + _CHUNK] for s in range(0, shape[0], _CHUNK)]

        def work(kb):
            ex = np.exp(-1j * TWO_PI * np.outer(pts[:, 0], kb)) * w[:, None]
            return np.abs(ex.T @ ey) ** 2

    else:
        raise ConfigError("diffraction images support d = 1 or 2")

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    values = np.concatenate(parts, axis=0) / norm
    return IntensityGrid(origin, float(pitch), values, {"normalization": "|S|^2/N^2", "points": len(pts)})


# --- peaks -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PeakList:
    """Peaks sorted by descending intensity."""

    k: np.ndarray
    intensity: np.ndarray
    provenance: np.ndarray | None = None
    extent: float | None = None  # radius of the k-region the list is complete in
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.ndim == 1:
            k = k.reshape(-1, 1)
        inten = np.asarray(self.intensity, dtype=float).reshape(-1)
        # descending intensity, ties broken by position for reproducibility
        order = np.lexsort(tuple(k.T[::-1]) + (-inten,))
        object.__setattr__(self, "k", k[order])
        object.__setattr__(self, "intensity", inten[order])
        if self.provenance is not None:
            object.__setattr__(self, "provenance", np.asarray(self.provenance)[order])

    def __len__(self):
        return len(self.intensity)

    @property
    def dim(self) -> int:
        return self.k.shape[1]

    def top(self, n: int) -> PeakList:
        prov = None if self.provenance is None else self.provenance[:n]
        return PeakList(self.k[:n], self.intensity[:n], prov, self.extent, dict(self.meta))

    def select(self, mask) -> PeakList:
        prov = None if self.provenance is None else self.provenance[mask]
        return PeakList(self.k[mask], self.intensity[mask], prov, self.extent, dict(self.meta))

    def normalized(self) -> PeakList:
        """Intensities divided by the k = 0 value (or the maximum if k = 0 is absent)."""
        zero = np.linalg.norm(self.k, axis=1) < 1e-12
        ref = self.intensity[zero][0] if np.any(zero) else self.intensity.max()
        return PeakList(self.k, self.intensity / ref, self.provenance, self.extent, dict(self.meta))


def local_maxima(grid: IntensityGrid, floor: float = PEAK_FLOOR) -> PeakList:
    """Nodes strictly above all 2 (1D) or 8 (2D) neighbours and above ``floor * I(0)``."""
    v = grid.values
    ref = _value_at_zero(grid)
    if grid.dim == 1:
        c = v[1:-1]
        mask = (c > v[:-2]) & (c > v[2:]) & (c > floor * ref)
        idx = np.flatnonzero(mask) + 1
        k = grid.origin[0] + grid.pitch * idx
        return PeakList(k.reshape(-1, 1), v[idx], extent=grid.inscribed_radius,
                        meta={"source": "grid", "pitch": grid.pitch})
    c = v[1:-1, 1:-1]
    mask = c > floor * ref
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                mask &= c > v[1 + di : v.shape[0] - 1 + di, 1 + dj : v.shape[1] - 1 + dj]
    ii, jj = np.nonzero(mask)
    ii, jj = ii + 1, jj + 1
    k = grid.origin + grid.pitch * np.stack([ii, jj], axis=1)
    return PeakList(k, v[ii, jj], extent=grid.inscribed_radius, meta={"source": "grid", "pitch": grid.pitch})


def _value_at_zero(grid: IntensityGrid) -> float:
    idx = np.rint(-grid.origin / grid.pitch).astype(int)
    if np.all(idx >= 0) and np.all(idx < np.array(grid.shape)) and np.allclose(grid.origin + idx * grid.pitch, 0):
        return float(grid.values[tuple(idx)])
    return float(grid.values.max())


def refine_peaks(patch, seeds: PeakList, radius: float, step: float | None = None,
                 *, weights=None, merge_tol: float = 1e-6) -> PeakList:
    """Move each seed to the nearby local maximum of the patch's I(k).

    A dense scan of spacing ``step`` over a cube of half-width ``radius``
    around the seed picks the basin; a local optimiser then converges.
    """
    pts, w = _patch_arrays(patch, weights)
    d = pts.shape[1]
    norm = np.sum(np.abs(w)) ** 2
    if step is None:
        step = radius / 4

    def inten(k):
        return float(np.abs(structure_sum(pts, np.reshape(k, (1, d)), w)[0]) ** 2 / norm)

    offs1 = np.arange(-radius, radius + 0.5 * step, step)
    offsets = np.stack(np.meshgrid(*([offs1] * d), indexing="ij"), axis=-1).reshape(-1, d)
    found_k, found_i = [], []
    for k0 in seeds.k:
        cand = k0 + offsets
        vals = np.abs(structure_sum(pts, cand, w)) ** 2 / norm
        best = cand[int(np.argmax(vals))]
        if d == 1:
            res = minimize_scalar(lambda t: -inten(t), bounds=(best[0] - step, best[0] + step),
                                  method="bounded", options={"xatol": 1e-12})
            kb, ib = np.array([res.x]), -res.fun
        else:
            res = minimize(lambda t: -inten(t), best, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "initial_simplex": best + step * np.array(
                               [[0, 0], [1, 0], [0, 1]])})
            kb, ib = res.x, -res.fun
        found_k.append(kb)
        found_i.append(ib)
    if not found_k:
        return PeakList(np.zeros((0, d)), np.zeros(0), extent=seeds.extent, meta={"source": "refined"})
    k = np.array(found_k)
    inten_arr = np.array(found_i)
    keep = _dedupe(k, inten_arr, merge_tol)
    return PeakList(k[keep], inten_arr[keep], extent=seeds.extent, meta={"source": "refined"})


def _dedupe(k, inten_arr, tol):
    order = np.argsort(-inten_arr, kind="stable")
    kept = []
    for i in order:
        if all(np.linalg.norm(k[i] - k[j]) > tol for j in kept):
            kept.append(i)
    return np.array(sorted(kept), dtype=int)


def peaks_from_grid(patch, grid: IntensityGrid, *, count: int | None = None, weights=None,
                    floor: float = PEAK_FLOOR, radius: float | None = None) -> PeakList:
    """Refine the strongest grid maxima inside the inscribed radius against ``patch``."""
    pts, w = _patch_arrays(patch, weights)
    seeds = local_maxima(grid, floor)
    seeds = seeds.select(np.linalg.norm(seeds.k, axis=1) <= grid.inscribed_radius + 1e-12)
    if count is not None:
        seeds = seeds.top(count)
    span = float(np.max(np.ptp(pts, axis=0))) if len(pts) > 1 else 1.0
    step = min(grid.pitch / 4, 1.0 / (4.0 * max(span, 1.0)))
    out = refine_peaks(pts, seeds, grid.pitch if radius is None else radius, step, weights=w)
    inside = np.linalg.norm(out.k, axis=1) <= grid.inscribed_radius + 1e-12
    out = out.select(inside)
    return PeakList(out.k, out.intensity, extent=grid.inscribed_radius,
                    meta={"source": "refined", "pitch": grid.pitch})


def numeric_peaks(patch, half_extent: float, pitch: float, *, count: int | None = None,
                  weights=None, threads: int = 1, floor: float = PEAK_FLOOR,
                  seed_span: float | None = None) -> PeakList:
    """Grid local maxima of a patch refined to the patch's true local maxima.

    Only the ``count`` strongest grid maxima (all if None) are refined.  With
    ``seed_span`` the grid pass only uses points whose first coordinate lies
    within ``seed_span`` of the smallest one: on long 1D patches the peaks are
    narrower than the pitch and a shorter patch locates them more reliably.
    Refinement always uses the whole patch.
    """
    pts, w = _patch_arrays(patch, weights)
    sub, wsub = pts, w
    if seed_span is not None:
        keep = pts[:, 0] < pts[:, 0].min() + seed_span
        sub, wsub = pts[keep], w[keep]
    origin, n = symmetric_grid_spec(half_extent, pitch, pts.shape[1])
    grid = diffraction_image(sub, origin, pitch, n, weights=wsub, threads=threads)
    radius = 2 * pitch if seed_span is not None else pitch
    return peaks_from_grid(pts, grid, count=count, weights=w, floor=floor, radius=radius)


# --- exact Bragg peaks -----------------------------------------------------

def bragg_peaks_model_set(scheme: CutProjectScheme, window: Window, k_cutoff: float,
                          intensity_floor: float = 1e-3, internal_cutoff: float | None = None) -> PeakList:
    """Exact Bragg peaks of a regular model set with |k| <= k_cutoff.

    Intensities are ``|A(k)|^2`` with ``A(k) = dens(lattice) * F_W(-k_int)``,
    so the k = 0 entry is the squared point density.  For a window family the
    amplitude is the coset sum over the label-0 sublattice.  With the default
    ``internal_cutoff`` every peak above ``intensity_floor * I(0)`` is listed
    (the window transform decays like perimeter / (2 pi |q|)).
    """
    if isinstance(window, WindowFamily):
        members = list(window.windows.items())
        sub = CutProjectScheme(scheme.d, scheme.m, scheme.basis @ window.sublattice_basis())
        shifts = [scheme.basis @ window.coset_representative(lab) for lab, _ in members]
        wins = [w for _, w in members]
    elif isinstance(window, (Interval, Polygon)):
        sub, shifts, wins = scheme, [np.zeros(scheme.dim)], [window]
    else:
        raise ConfigError(f"no closed-form Fourier transform for {type(window).__name__}")
    if window.volume <= 0:
        raise ConfigError("window has zero volume")
    if internal_cutoff is None:
        perim = sum(_perimeter(w) for w in wins)
        internal_cutoff = perim / (TWO_PI * window.volume * np.sqrt(intensity_floor))
    k, kint, coords = projected_dual_points(sub, k_cutoff, internal_cutoff)
    qfull = np.concatenate([k, kint], axis=1)
    amp = np.zeros(len(k), dtype=complex)
    for shift, w in zip(shifts, wins):
        amp += np.exp(-1j * TWO_PI * (qfull @ shift)) * w.fourier(-kint)
    amp *= sub.lattice_density
    inten = np.abs(amp) ** 2
    i0 = (sub.lattice_density * window.volume) ** 2
    keep = inten >= intensity_floor * i0
    return PeakList(k[keep], inten[keep], coords[keep], extent=k_cutoff,
                    meta={"source": "exact", "density": sub.lattice_density * window.volume,
                          "internal_cutoff": internal_cutoff})


def _perimeter(w: Window) -> float:
    if isinstance(w, Interval):
        return 2.0
    v = w.vertices
    return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))


# --- symmetry --------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryScore:
    score: float
    fold: int
    k_effective: int


def symmetry_score(peaks, fold: int, top: int = 50, *, position_tol: float | None = None,
                   radius: float | None = None) -> SymmetryScore:
    """How well the strongest peaks match their own rotation by 2 pi / fold.

    Each of the ``top`` strongest peaks inside ``radius`` is paired with the
    peak nearest to its rotated position.  The mismatch averages a position
    error (distance / ``position_tol``, capped at 1) and a relative intensity
    error; the score is one minus the mean mismatch.  Grid input is reduced
    to its local maxima and allowed half a grid diagonal of slack.
    """
    if fold < 2:
        raise ConfigError("fold must be at least 2")
    slack = 0.0
    if isinstance(peaks, IntensityGrid):
        pitch = peaks.pitch
        peaks = local_maxima(peaks)
        slack = pitch * np.sqrt(0.5)
        if position_tol is None:
            position_tol = pitch
    if peaks.dim != 2:
        raise ConfigError("symmetry_score needs 2D peaks")
    if position_tol is None:
        position_tol = peaks.meta.get("pitch", 1e-2)
    if radius is None:
        radius = peaks.extent if peaks.extent is not None else np.inf
    if len(peaks) == 0:
        return SymmetryScore(0.0, fold, 0)
    inside = np.linalg.norm(peaks.k, axis=1) <= radius
    chosen = peaks.select(inside).top(top)
    if len(chosen) == 0:
        return SymmetryScore(0.0, fold, 0)
    ang = TWO_PI / fold
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    tree = cKDTree(peaks.k)
    dist, idx = tree.query(chosen.k @ rot.T)
    pos_err = np.minimum(1.0, np.maximum(0.0, dist - slack) / position_tol)
    partner = peaks.intensity[idx]
    int_err = np.abs(chosen.intensity - partner) / np.maximum(chosen.intensity, partner)
    int_err = np.where(pos_err >= 1.0, 1.0, int_err)
    mismatch = 0.5 * (pos_err + int_err)
    return SymmetryScore(float(1.0 - mismatch.mean()), fold, len(chosen))


# --- scaling of peak heights -----------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    beta: float | None
    sizes: np.ndarray
    log_sizes: np.ndarray
    log_intensity: np.ndarray
    null: bool = False


def peak_scaling_exponent(patches, k, *, weights=None, sizes=None) -> ScalingFit:
    """Least-squares slope of log |S_N(k)|^2 against log N.

    ``patches`` is a sequence of point sets (or coordinate arrays) of
    geometrically increasing size; ``weights`` an optional matching sequence
    of per-point weights.  ``sizes`` defaults to the point counts.
    """
    patches = list(patches)
    if len(patches) < 4:
        raise ConfigError("need at least four patch sizes")
    wlist = [None] * len(patches) if weights is None else list(weights)
    if sizes is None:
        sizes = [len(p) for p in patches]
    sizes = np.asarray(sizes, dtype=float)
    if np.any(np.diff(sizes) <= 0):
        raise ConfigError("patch sizes must increase")
    s = np.array([abs(structure_sum(p, k, w)[0]) for p, w in zip(patches, wlist)])
    if np.all(s < 1e-12):
        return ScalingFit(None, sizes, np.log(sizes), np.full(len(s), -np.inf), null=True)
    logs = np.log(np.maximum(s, 1e-300) ** 2)
    beta = float(np.polyfit(np.log(sizes), logs, 1)[0])
    return ScalingFit(beta, sizes, np.log(sizes), logs)


def thue_morse_combs(exponents=range(8, 17)):
    """Patches of the one-sided Thue-Morse word of lengths 2^e.

    Returns ``(positions, ones, signs)``: all sites, the sites holding 1, and
    the +-1 weights (-1)^t_n for each length.
    """
    exps = list(exponents)
    n_max = 2 ** max(exps)
    n = np.arange(n_max)
    t = np.array([bin(i).count("1") & 1 for i in range(n_max)], dtype=np.int8)
    positions, ones, signs = [], [], []
    for e in exps:
        m = 2 ** e
        positions.append(n[:m].astype(float))
        ones.append(n[:m][t[:m] == 1].astype(float))
        signs.append(1.0 - 2.0 * t[:m])
    return positions, ones, signs


def thue_morse_scaling(k: float, *, weighted: bool, exponents=range(8, 17)) -> ScalingFit:
    """Scaling exponent of |S_N(k)|^2 for the Thue-Morse comb, N = 2^e.

    Unweighted: the comb of sites holding 1.  Weighted: all sites with
    weights (-1)^t_n.  N is the word length in both cases.
    """
    exps = list(exponents)
    positions, ones, signs = thue_morse_combs(exps)
    sizes = [2.0 ** e for e in exps]
    if weighted:
        return peak_scaling_exponent(positions, k, weights=signs, sizes=sizes)
    return peak_scaling_exponent(ones, k, sizes=sizes)
