"""Cut-and-project schemes, the star map, and model-set generation.

A scheme is a lattice in R^d x R^m given by a square basis matrix whose
columns generate the lattice.  The first ``d`` rows project to physical space,
the last ``m`` rows to internal space.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import CapExceededError, ConfigError
from .pointset import PointSet
from .windows import Interval, Window, WindowFamily, Polygon, convex_hull

PHI = (1.0 + math.sqrt(5.0)) / 2.0
DEFAULT_CAP = 10**8
INJECTIVITY_RANGE = 20


@dataclass(frozen=True, eq=False)
class CutProjectScheme:
    d: int
    m: int
    basis: np.ndarray
    verified: bool = False
    name: str = "custom"
    basis_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        inv = np.linalg.inv(b)
        inv.setflags(write=False)
        object.__setattr__(self, "basis_inv", inv)

    @property
    def dim(self):
        return self.d + self.m

    @property
    def physical(self) -> np.ndarray:
        return self.basis[: self.d]

    @property
    def internal(self) -> np.ndarray:
        return self.basis[self.d :]

    @property
    def lattice_density(self) -> float:
        return 1.0 / abs(np.linalg.det(self.basis))

    @property
    def dual_basis(self) -> np.ndarray:
        return np.linalg.inv(self.basis).T


def build_cps(basis, d: int, m: int, *, verified: bool = False, name: str = "custom") -> CutProjectScheme:
    """Validate ``basis`` and wrap it as a scheme.

    Injectivity and density of the projections are not checked here; user
    schemes keep ``verified=False``.
    """
    if int(d) < 1 or int(m) < 1:
        raise ConfigError("d and m must be at least 1")
    b = np.asarray(basis, dtype=float)
    n = d + m
    if b.shape != (n, n):
        raise ConfigError(f"basis must be {n}x{n}, got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ConfigError("basis has non-finite entries")
    scale = np.linalg.norm(b) ** n
    det = np.linalg.det(b)
    if abs(det) <= 1e-12 * max(scale, 1e-300):
        raise ConfigError(f"basis is singular (det = {det:.3g}); columns must be independent")
    return CutProjectScheme(int(d), int(m), b, verified, name)


def star_map(scheme: CutProjectScheme, n) -> tuple[np.ndarray, np.ndarray]:
    """Map integer coordinates to (physical point, internal point).

    Accepts a single vector or an array of row vectors.
    """
    n = np.asarray(n)
    y = n @ scheme.basis.T
    return y[..., : scheme.d], y[..., scheme.d :]


def check_injective(scheme: CutProjectScheme, span: int = INJECTIVITY_RANGE, tol: float = 1e-9) -> bool:
    """Exhaustively check that no nonzero n with entries in [-span, span] projects to 0."""
    n = scheme.dim
    if n > 3:
        raise ConfigError("exhaustive injectivity check is only practical for d+m <= 3")
    ranges = [np.arange(-span, span + 1)] * n
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[np.any(grid != 0, axis=1)]
    phys = grid @ scheme.physical.T
    return bool(np.all(np.linalg.norm(phys, axis=1) > tol))


def fibonacci_cps() -> CutProjectScheme:
    """Lattice {(a + b phi, a + b(1 - phi))}: tiles phi and 1, star = Galois conjugation."""
    basis = np.array([[1.0, PHI], [1.0, 1.0 - PHI]])
    scheme = build_cps(basis, 1, 1, name="fibonacci")
    if not check_injective(scheme):
        raise AssertionError("fibonacci scheme failed injectivity check")
    return CutProjectScheme(1, 1, basis, True, "fibonacci")


def fibonacci_window() -> Interval:
    return Interval(-1.0, PHI - 1.0)


def lattice_cps(d: int = 1) -> CutProjectScheme:
    """Identity basis: the crystallographic control case Z^d x Z^d.

    The physical projection is not injective here, so the scheme is flagged
    unverified; with :func:`lattice_window` the model set is exactly Z^d.
    """
    if d not in (1, 2):
        raise ConfigError("lattice control supports d = 1 or 2")
    return CutProjectScheme(d, d, np.eye(2 * d), False, f"lattice-z{d}")


def lattice_window(d: int = 1) -> Window:
    """Half-open unit cube around 0, which holds exactly one integer point."""
    if d == 1:
        return Interval(-0.5, 0.5)
    return Polygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))


def _box_pullback(scheme: CutProjectScheme, lo: np.ndarray, hi: np.ndarray):
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    c = scheme.basis_inv @ center
    h = np.abs(scheme.basis_inv) @ half
    return c, h


def _window_box(window: Window):
    lo, hi = window.bbox()
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def enumerate_candidates(scheme, region_lo, region_hi, win_lo, win_hi, cap=DEFAULT_CAP, cell=None):
    """All integer vectors whose image may lie in region x window box.

    The physical region is cut into cells of side ``cell``; each cell times
    the window box is pulled back through the inverse basis to an integer
    box.  The union over cells is exhaustive.
    """
    d = scheme.d
    region_lo = np.asarray(region_lo, dtype=float).reshape(d)
    region_hi = np.asarray(region_hi, dtype=float).reshape(d)
    win_lo = np.asarray(win_lo, dtype=float).reshape(scheme.m)
    win_hi = np.asarray(win_hi, dtype=float).reshape(scheme.m)
    extent = region_hi - region_lo
    if cell is None:
        cell = max(1.0, float(np.max(win_hi - win_lo)))
    ncell = np.maximum(1, np.ceil(extent / cell).astype(int))
    step = extent / ncell
    # template offsets around each cell's pulled-back centre
    _, h = _box_pullback(scheme, np.concatenate([np.zeros(d), win_lo]),
                         np.concatenate([step, win_hi]))
    radius = np.ceil(h + 1e-9).astype(np.int64)
    per_cell = int(np.prod(2 * radius + 1))
    total = per_cell * int(np.prod(ncell))
    if total > cap:
        raise CapExceededError(f"{total} candidates exceed cap {cap}")
    offsets = np.stack(
        np.meshgrid(*[np.arange(-r, r + 1) for r in radius], indexing="ij"), axis=-1
    ).reshape(-1, scheme.dim)
    idx = np.stack(np.meshgrid(*[np.arange(k) for k in ncell], indexing="ij"), axis=-1).reshape(-1, d)
    centers_phys = region_lo + (idx + 0.5) * step
    centers = np.concatenate(
        [centers_phys, np.broadcast_to(0.5 * (win_lo + win_hi), (len(idx), scheme.m))], axis=1
    )
    base = np.rint(centers @ scheme.basis_inv.T).astype(np.int64)
    return base, offsets


def generate_model_set(
    scheme: CutProjectScheme,
    window: Window,
    region,
    *,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
    return_rejected: bool = False,
):
    """Return the model set points of ``scheme`` with ``window`` inside ``region``.

    ``region`` is a pair ``(lo, hi)`` describing a closed axis-aligned box.
    Output is sorted lexicographically and carries integer provenance.
    """
    lo, hi = (np.asarray(r, dtype=float).reshape(scheme.d) for r in region)
    if np.any(hi < lo) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ConfigError("region must be a bounded box with lo <= hi")
    if window.dim != scheme.m:
        raise ConfigError(f"window dimension {window.dim} != internal dimension {scheme.m}")
    if window.is_empty:
        empty = PointSet(np.zeros((0, scheme.d)), np.zeros((0, scheme.dim), dtype=np.int64), scheme.d)
        return (empty, 0) if return_rejected else empty
    win_lo, win_hi = _window_box(window)
    base, offsets = enumerate_candidates(scheme, lo, hi, win_lo, win_hi, cap)

    def work(chunk):
        cand = (chunk[:, None, :] + offsets[None, :, :]).reshape(-1, scheme.dim)
        phys, intl = star_map(scheme, cand)
        keep = np.all((phys >= lo - 1e-12) & (phys <= hi + 1e-12), axis=1)
        keep &= np.all((intl >= win_lo - 1e-12) & (intl <= win_hi + 1e-12), axis=1)
        cand, phys, intl = cand[keep], phys[keep], intl[keep]
        inside = np.all((phys >= lo) & (phys <= hi), axis=1) & window.contains(intl, cand)
        return cand[inside]

    chunk = max(1, 2_000_000 // max(1, len(offsets)))
    pieces = [base[i : i + chunk] for i in range(0, len(base), chunk)]
    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, pieces))
    else:
        results = [work(p) for p in pieces]
    coords = np.concatenate(results) if results else np.zeros((0, scheme.dim), dtype=np.int64)
    coords = np.unique(coords, axis=0)
    phys, _ = star_map(scheme, coords)
    order = np.lexsort(np.concatenate([phys, coords], axis=1).T[::-1])
    out = PointSet(phys[order], coords[order], scheme.d)
    if return_rejected:
        return out, len(base) * len(offsets) - len(out)
    return out


# --- Penrose vertex set from Z^5 -------------------------------------------

PENROSE_CAP_RADIUS = 400.0


def penrose_projection() -> np.ndarray:
    """4x5 matrix: physical rows (edge length 1) then internal rows (doubled angles)."""
    j = np.arange(5)
    a = 2 * np.pi * j / 5
    s = math.sqrt(2.0 / 5.0)
    return np.array([np.cos(a), np.sin(a), s * np.cos(2 * a), s * np.sin(2 * a)])


def penrose_cps() -> CutProjectScheme:
    """The projected image of Z^5 (coordinate n5 eliminated) as a 4D scheme."""
    p = penrose_projection()
    return CutProjectScheme(2, 2, p[:, :4], True, "penrose")


def penrose_window() -> WindowFamily:
    """Pentagonal windows labelled by (n1+...+n4) mod 5.

    Class k holds the projected cross-section of the unit 5-cube at height
    k - 1 (the shift by 1/5 along the diagonal that keeps the pattern regular
    and fivefold symmetric about the origin).  Class 1 would be the singular
    height-0 section, a single point, and is omitted.
    """
    p = penrose_projection()[2:]
    windows = {}
    for height in range(1, 5):
        corners = [p[:, list(c)].sum(axis=1) for c in itertools.combinations(range(5), height)]
        windows[(height + 1) % 5] = Polygon(convex_hull(corners))
    return WindowFamily(windows, (1, 1, 1, 1), 5)


def penrose_vertices(radius: float | None = None, region=None, *, cap: int = DEFAULT_CAP,
                     max_radius: float = PENROSE_CAP_RADIUS, threads: int = 1) -> PointSet:
    """Vertices of a rhombic Penrose tiling (edge 1) in a disk or box.

    The patch is fivefold symmetric about the origin, which is a vertex.
    """
    if (radius is None) == (region is None):
        raise ConfigError("give exactly one of radius or region")
    if radius is not None:
        if radius < 0:
            raise ConfigError("radius must be non-negative")
        if radius > max_radius:
            raise CapExceededError(f"radius {radius} exceeds cap {max_radius}")
        region = (np.array([-radius, -radius]), np.array([radius, radius]))
    else:
        lo, hi = (np.asarray(r, dtype=float) for r in region)
        if np.max(np.abs(np.concatenate([lo, hi]))) > max_radius:
            raise CapExceededError(f"region exceeds cap {max_radius}")
    pts = generate_model_set(penrose_cps(), penrose_window(), region, cap=cap, threads=threads)
    if radius is not None:
        pts = pts.select(np.linalg.norm(pts.points, axis=1) <= radius + 1e-9)
    return pts


# --- dual lattice ------------------------------------------------------------

def projected_dual_points(scheme: CutProjectScheme, k_cutoff: float, internal_cutoff: float,
                          *, cap: int = DEFAULT_CAP):
    """Dual lattice points with |k| <= k_cutoff and |k_int| <= internal_cutoff.

    Returns ``(k, k_internal, coords)`` arrays sorted by coordinates.
    """
    if not (0 < k_cutoff < np.inf and 0 < internal_cutoff < np.inf):
        raise ConfigError("cutoffs must be positive and finite")
    dual = CutProjectScheme(scheme.d, scheme.m, scheme.dual_basis)
    lo = -np.full(scheme.d, k_cutoff)
    base, offsets = enumerate_candidates(
        dual, lo, -lo, -np.full(scheme.m, internal_cutoff), np.full(scheme.m, internal_cutoff), cap,
        cell=max(1.0, 2 * internal_cutoff),
    )
    cand = (base[:, None, :] + offsets[None, :, :]).reshape(-1, scheme.dim)
    cand = np.unique(cand, axis=0)
    k, kint = star_map(dual, cand)
    keep = (np.linalg.norm(k, axis=1) <= k_cutoff) & (np.linalg.norm(kint, axis=1) <= internal_cutoff)
    return k[keep], kint[keep], cand[keep]


# --- Delone parameters -------------------------------------------------------

def delone_check(patch: PointSet, region) -> tuple[float, float]:
    """Packing radius r and covering radius R of ``patch`` within ``region``.

    R is sampled on a grid of pitch at most r/2 over the box ``region``.
    """
    if len(patch) == 0:
        raise ConfigError("empty patch")
    if len(patch) == 1:
        raise ConfigError("packing radius needs at least two points")
    r = 0.5 * patch.min_distance()
    lo, hi = (np.asarray(x, dtype=float).reshape(patch.dim) for x in region)
    pitch = r / 2
    axes = [np.linspace(a, b, max(2, int(np.ceil((b - a) / pitch)) + 1)) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, patch.dim)
    dist, _ = cKDTree(patch.points).query(grid)
    return r, float(dist.max())
