"""Spectra of the Fibonacci Hamiltonian and of its two-dimensional product model.

The operator is ``(H psi)_n = psi_{n-1} + psi_{n+1} + lam v_n psi_n`` with the
Fibonacci potential ``v_n`` from :func:`aperiodic.substitution.rotation_sequence`.

Level ``k`` refers to the periodic approximant of period ``p_k``, where
``p_0 = p_1 = 1`` and ``p_{k+1} = p_k + p_{k-1}`` (so level 12 has period 233).
Its half-trace ``x_k(E)`` follows the trace map
``x_{-1} = 1, x_0 = E/2, x_1 = (E - lam)/2, x_{k+1} = 2 x_k x_{k-1} - x_{k-2}``,
and its bands are ``{E : |x_k(E)| <= 1}``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from .errors import AperiodicError, CapExceededError, ConfigError
from .substitution import rotation_sequence

EDGE_TOL = 1e-8
TOUCH_TOL = 1e-10
ESCAPE_LIMIT = 1e150
MAX_ORACLE_SIZE = 4000


def approximant_period(level: int) -> int:
    a, b = 1, 1
    for _ in range(level):
        a, b = b, a + b
    return a


def fibonacci_potential(n_sites: int, start: int = 1) -> np.ndarray:
    return rotation_sequence(np.arange(start, start + n_sites)).astype(float)


def approximant_potential(level: int) -> np.ndarray:
    """One period of the level-``level`` approximant: v_1..v_p, except the single 0 at level 0."""
    if level == 0:
        return np.zeros(1)
    return fibonacci_potential(approximant_period(level))


# --- transfer matrices and trace map ---------------------------------------

def transfer_matrix(E: float, lam: float, sites, *, exact: bool = False) -> np.ndarray:
    """Ordered product of [[E - lam v_n, -1], [1, 0]] over ``sites`` (later sites on the left).

    Accumulated in extended precision (``np.longdouble``).  With
    ``exact=True`` the float inputs are taken at their exact rational values
    and the product is an object array of ``Fraction``, with determinant
    exactly 1.
    """
    sites = np.asarray(sites, dtype=np.int64).reshape(-1)
    v = rotation_sequence(sites) if len(sites) else np.zeros(0, dtype=np.uint8)
    if exact:
        e, lm = Fraction(E), Fraction(lam)
        one, zero = Fraction(1), Fraction(0)
        t00, t01, t10, t11 = one, zero, zero, one
    else:
        e, lm = np.longdouble(E), np.longdouble(lam)
        t00, t01, t10, t11 = (np.longdouble(x) for x in (1, 0, 0, 1))
    for vn in v:
        a = e - lm * int(vn)
        t00, t01, t10, t11 = a * t00 - t10, a * t01 - t11, t00, t01
    return np.array([[t00, t01], [t10, t11]], dtype=object if exact else np.longdouble)


def det2(t) -> float:
    """Determinant of a 2x2 matrix in the matrix's own arithmetic."""
    return t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]


def fricke_invariant(x, y, z):
    return x * x + y * y + z * z - 2.0 * x * y * z - 1.0


@dataclass(frozen=True)
class TraceOrbit:
    triples: np.ndarray  # (steps, 3): (x_{j-1}, x_j, x_{j+1}) for j = 0..steps-1
    escaped: bool
    escape_step: int | None

    def half_traces(self) -> np.ndarray:
        return np.concatenate([self.triples[0, :2], self.triples[:, 2]])

    def invariants(self) -> np.ndarray:
        return fricke_invariant(*self.triples.T)


def trace_map_orbit(E: float, lam: float, steps: int) -> TraceOrbit:
    """Iterate (x, y, z) -> (y, z, 2yz - x) from (1, E/2, (E - lam)/2).

    Stops after the step at which the orbit is known to diverge:
    |y| > 1, |z| > 1 and |yz| > |x|, after which |x_j| grows without bound.
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    trip = [(1.0, E / 2.0, (E - lam) / 2.0)]
    escaped, at = False, None
    while True:
        x, y, z = trip[-1]
        if abs(y) > 1 and abs(z) > 1 and abs(y * z) > abs(x) or max(abs(y), abs(z)) > ESCAPE_LIMIT:
            escaped, at = True, len(trip) - 1
            break
        if len(trip) == steps:
            break
        trip.append((y, z, 2.0 * y * z - x))
    return TraceOrbit(np.array(trip), escaped, at)


def half_trace(E, lam: float, level: int) -> np.ndarray:
    """x_level(E), vectorised over E."""
    E = np.asarray(E, dtype=float)
    xm, x0, x1 = np.ones_like(E), E / 2.0, (E - lam) / 2.0
    if level == 0:
        return x0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(level - 1):
            xm, x0, x1 = x0, x1, 2.0 * x1 * x0 - xm
    return x1


# --- spectra as interval unions -------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    """Disjoint closed intervals sorted ascending; shape ``(n, 2)``."""

    intervals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        iv = np.asarray(self.intervals, dtype=float).reshape(-1, 2)
        if len(iv) and (np.any(iv[:, 1] < iv[:, 0]) or np.any(iv[1:, 0] <= iv[:-1, 1])):
            raise ConfigError("spectrum intervals must be sorted, disjoint and non-degenerate")
        iv.setflags(write=False)
        object.__setattr__(self, "intervals", iv)

    def __len__(self):
        return len(self.intervals)

    @property
    def measure(self) -> float:
        return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))

    @property
    def gaps(self) -> np.ndarray:
        return self.intervals[1:, 0] - self.intervals[:-1, 1]

    @property
    def gap_count(self) -> int:
        return max(0, len(self.intervals) - 1)

    def max_gap(self) -> float:
        g = self.gaps
        return float(g.max()) if len(g) else 0.0

    def contains(self, E, tol: float = 0.0) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        lo, hi = self.intervals[:, 0], self.intervals[:, 1]
        j = np.searchsorted(lo, E + tol, side="right") - 1
        ok = j >= 0
        jj = np.clip(j, 0, len(lo) - 1)
        return ok & (E <= hi[jj] + tol)

    def inflated(self, tol: float) -> Spectrum:
        return Spectrum(merge_intervals(self.intervals + np.array([-tol, tol])), dict(self.meta))


def merge_intervals(intervals, min_gap: float = 0.0) -> np.ndarray:
    """Union of closed intervals; neighbours closer than ``min_gap`` are joined."""
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if len(iv) == 0:
        return iv
    iv = iv[np.lexsort((iv[:, 1], iv[:, 0]))]
    hi_run = np.maximum.accumulate(iv[:, 1])
    new = np.concatenate([[True], iv[1:, 0] - hi_run[:-1] > min_gap])
    starts = np.flatnonzero(new)
    ends = np.concatenate([starts[1:], [len(iv)]]) - 1
    return np.stack([iv[starts, 0], hi_run[ends]], axis=1)


def spectrum_sumset(a: Spectrum, b: Spectrum) -> Spectrum:
    """Minkowski sum of two interval unions."""
    if len(a) == 0 or len(b) == 0:
        raise ConfigError("sumset of an empty spectrum")
    lo = (a.intervals[:, 0][:, None] + b.intervals[:, 0][None, :]).ravel()
    hi = (a.intervals[:, 1][:, None] + b.intervals[:, 1][None, :]).ravel()
    meta = {"lambda": a.meta.get("lambda"), "level": a.meta.get("level"), "product": True}
    return Spectrum(merge_intervals(np.stack([lo, hi], axis=1)), meta)


def hausdorff_distance(a: Spectrum, b: Spectrum) -> float:
    """Hausdorff distance between two interval unions (exact)."""
    return max(_directed(a.intervals, b.intervals), _directed(b.intervals, a.intervals))


def _dist_to_union(x, iv):
    lo, hi = iv[:, 0], iv[:, 1]
    d = np.maximum(lo[None, :] - x[:, None], 0) + np.maximum(x[:, None] - hi[None, :], 0)
    return d.min(axis=1)


def _directed(a, b):
    # sup over a of distance to b: attained at endpoints of a or at gap midpoints of b inside a
    cand = [a.ravel()]
    if len(b) > 1:
        mids = 0.5 * (b[1:, 0] + b[:-1, 1])
        inside = np.any((mids[:, None] >= a[:, 0]) & (mids[:, None] <= a[:, 1]), axis=1)
        cand.append(mids[inside])
    x = np.concatenate(cand)
    return float(_dist_to_union(x, b).max())


def energy_window(lam: float) -> tuple[float, float]:
    return -2.0 - abs(lam) - 0.5, 2.0 + abs(lam) + 0.5


def spectrum_estimate(lam: float, level: int, pitch: float = 1e-3, *, edge_tol: float = EDGE_TOL) -> Spectrum:
    """Band union {E : |x_level(E)| <= 1} of the level-``level`` approximant.

    Bands are localised level by level: those of level j + 1 lie inside the
    bands of levels j and j - 1.  Inside each candidate component the
    half-trace polynomial is sampled at spacing at most ``pitch`` (and at
    least 32 samples per component) to find its zeros, one per band; cells
    hiding a pair of zeros are subdivided tenfold until all p_j zeros are
    found.  Consecutive zeros bracket a single critical point, and the gap
    between their bands is open iff |x| > 1 there.  Band edges are bisected
    to ``edge_tol``.
    """
    if level < 0:
        raise ConfigError("level must be non-negative")
    if pitch <= 0:
        raise ConfigError("pitch must be positive")
    lam = float(lam)
    bands = [np.array([[-2.0, 2.0]]), np.array([[lam - 2.0, lam + 2.0]])]
    zeros_found = [1, 1]
    for j in range(2, level + 1):
        support = merge_intervals(np.concatenate([bands[-1], bands[-2]]) + np.array([-10 * edge_tol, 10 * edge_tol]))
        iv, nz = _level_bands(lam, j, support, pitch, edge_tol)
        if len(iv) == 0:
            raise AperiodicError(f"no band found at level {j}; sampling is inconsistent")
        bands.append(iv)
        zeros_found.append(nz)
    iv = bands[level] if level < 2 else bands[-1]
    return Spectrum(iv, {"lambda": lam, "level": int(level), "period": approximant_period(level),
                         "zeros_found": zeros_found[level] if level < 2 else zeros_found[-1],
                         "pitch": pitch})


def _half_trace_scalar(E: float, lam: float, level: int) -> float:
    xm, x0, x1 = 1.0, 0.5 * E, 0.5 * (E - lam)
    if level == 0:
        return x0
    for _ in range(level - 1):
        xm, x0, x1 = x0, x1, 2.0 * x1 * x0 - xm
        if abs(x1) > ESCAPE_LIMIT:
            return x1 if abs(x1) < np.inf else np.copysign(ESCAPE_LIMIT, x1)
    return x1


def _level_bands(lam, level, support, pitch, edge_tol):
    p = approximant_period(level)

    def f(E):
        return _half_trace_scalar(E, lam, level)

    zeros, comp = _find_zeros(lam, level, p, support, pitch)
    intervals = []
    for c in np.unique(comp):
        zc = zeros[comp == c]
        a, b = support[c]
        lo = _bisect_edge(f, a, zc[0], edge_tol)
        for z0, z1 in zip(zc[:-1], zc[1:]):
            res = minimize_scalar(lambda e: -abs(f(e)), bounds=(z0, z1), method="bounded",
                                  options={"xatol": max(1e-15, min(edge_tol, 1e-3 * (z1 - z0)))})
            ecrit, peak = res.x, -res.fun
            if peak <= 1.0 + TOUCH_TOL:
                continue  # bands touch
            intervals.append((lo, _bisect_edge(f, ecrit, z0, edge_tol)))
            lo = _bisect_edge(f, ecrit, z1, edge_tol)
        intervals.append((lo, _bisect_edge(f, b, zc[-1], edge_tol)))
    return merge_intervals(np.array(intervals).reshape(-1, 2), min_gap=2 * edge_tol), len(zeros)


def _bisect_edge(f, outside, inside, tol):
    """Point where |f| crosses 1 between ``outside`` (|f| > 1) and ``inside`` (f = 0)."""
    a, b = outside, inside
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        if abs(f(m)) > 1.0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _samples(support, pitch):
    es, cs = [], []
    for c, (a, b) in enumerate(support):
        n = max(33, int(np.ceil((b - a) / pitch)) + 1)
        es.append(np.linspace(a, b, n))
        cs.append(np.full(n, c))
    return np.concatenate(es), np.concatenate(cs)


def _find_zeros(lam, level, p, support, pitch, max_rounds: int = 12):
    e, comp = _samples(support, pitch)

    def evaluate(x):
        v = half_trace(x, lam, level)
        return np.where(np.isfinite(v), v, np.sign(v) * ESCAPE_LIMIT)

    v = evaluate(e)
    for _ in range(max_rounds):
        same = comp[1:] == comp[:-1]
        sign = np.sign(v)
        nz = int(np.sum(same & (sign[1:] * sign[:-1] < 0)) + np.sum(sign == 0))
        if nz >= p:
            break
        a = np.abs(v)
        inner = np.flatnonzero(same[:-1] & same[1:]) + 1
        mins = inner[(a[inner] <= a[inner - 1]) & (a[inner] <= a[inner + 1])
                     & (sign[inner - 1] * sign[inner + 1] > 0)]
        cells = np.unique(np.concatenate([mins - 1, mins])) if len(mins) else np.flatnonzero(same)
        frac = np.arange(1, 10) / 10
        new = (e[cells][:, None] + (e[cells + 1] - e[cells])[:, None] * frac[None, :]).ravel()
        newc = np.repeat(comp[cells], len(frac))
        e = np.concatenate([e, new])
        v = np.concatenate([v, evaluate(new)])
        comp = np.concatenate([comp, newc])
        order = np.lexsort((e, comp))
        e, v, comp = e[order], v[order], comp[order]
    sign = np.sign(v)

    def f(x):
        return _half_trace_scalar(x, lam, level)

    zs = [(e[i], comp[i]) for i in np.flatnonzero(sign == 0)]
    same = comp[1:] == comp[:-1]
    for i in np.flatnonzero(same & (sign[1:] * sign[:-1] < 0)):
        zs.append((brentq(f, e[i], e[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps), comp[i]))
    zs.sort()
    return np.array([z for z, _ in zs]), np.array([c for _, c in zs], dtype=int)


# --- direct diagonalisation --------------------------------------------------

def direct_spectrum_oracle(lam: float, level: int, boundary: str = "periodic",
                           *, max_size: int = MAX_ORACLE_SIZE) -> np.ndarray:
    """Sorted eigenvalues of the p_level-site block with diagonal lam v_n, n = 1..p.

    ``boundary`` is ``free``, ``periodic`` or ``antiperiodic``.
    """
    p = approximant_period(level)
    if p > max_size:
        raise CapExceededError(f"matrix size {p} exceeds cap {max_size}")
    diag = lam * approximant_potential(level)
    if boundary == "free":
        if p == 1:
            return diag.copy()
        return eigvalsh_tridiagonal(diag, np.ones(p - 1))
    if boundary not in ("periodic", "antiperiodic"):
        raise ConfigError(f"unknown boundary {boundary!r}")
    sign = 1.0 if boundary == "periodic" else -1.0
    h = np.diag(diag) + np.diag(np.ones(p - 1), 1) + np.diag(np.ones(p - 1), -1)
    h[0, p - 1] += sign
    h[p - 1, 0] += sign
    return np.linalg.eigvalsh(h)


def oracle_bands(lam: float, level: int, *, max_size: int = MAX_ORACLE_SIZE) -> Spectrum:
    """Bands from periodic and antiperiodic eigenvalues (consecutive pairs)."""
    ev = np.sort(np.concatenate([
        direct_spectrum_oracle(lam, level, "periodic", max_size=max_size),
        direct_spectrum_oracle(lam, level, "antiperiodic", max_size=max_size),
    ]))
    iv = ev.reshape(-1, 2)
    return Spectrum(merge_intervals(iv, min_gap=2 * EDGE_TOL), {"lambda": lam, "level": level, "oracle": True})


# --- sweeps -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    lam: float
    spectrum: Spectrum
    product: Spectrum | None


def coupling_sweep(lams, level: int, pitch: float = 1e-3, *, product: bool = True,
                   threads: int = 1) -> list[SweepRow]:
    lams = [float(x) for x in lams]
    if any(x < 0 for x in lams):
        raise ConfigError("coupling constants must be non-negative")

    def one(lam):
        s = spectrum_estimate(lam, level, pitch)
        return SweepRow(lam, s, spectrum_sumset(s, s) if product else None)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, lams))
    return [one(x) for x in lams]


def rasterize(rows, e_range, width: int, *, product: bool = False) -> np.ndarray:
    """Boolean raster, one row per coupling (largest first), True where a column meets the spectrum."""
    emin, emax = e_range
    edges = np.linspace(emin, emax, width + 1)
    out = np.zeros((len(rows), width), dtype=bool)
    for r, row in enumerate(sorted(rows, key=lambda s: -s.lam)):
        spec = row.product if product else row.spectrum
        for lo, hi in spec.intervals:
            if hi < emin or lo > emax:
                continue
            first = max(0, int(np.searchsorted(edges, lo, side="left")) - 1)
            last = min(width - 1, int(np.searchsorted(edges, hi, side="right")) - 1)
            out[r, first : last + 1] = True
    return out
