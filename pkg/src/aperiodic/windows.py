"""Acceptance windows in internal space and their Fourier transforms.

Boundary convention: intervals are half-open ``[a, b)``; a polygon contains its
interior plus the two edges meeting at its lexicographically smallest vertex.
The boundary has measure zero, so any fixed rule would do; this one keeps
generated patches bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi
SERIES_CUTOFF = 1e-6


class Window:
    """Common interface: ``dim``, ``contains``, ``bbox``, ``volume``, ``fourier``."""

    dim: int

    def contains(self, y: np.ndarray, coords: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError

    def fourier(self, q: np.ndarray) -> np.ndarray:
        """Return ``F(q) = integral over W of exp(-2 pi i q.y) dy``."""
        raise NotImplementedError

    @property
    def is_empty(self) -> bool:
        return self.volume == 0.0


@dataclass(frozen=True)
class Interval(Window):
    a: float
    b: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b < self.a:
            raise ConfigError(f"invalid interval [{self.a}, {self.b})")

    def contains(self, y, coords=None):
        y = np.asarray(y, dtype=float).reshape(-1)
        return (y >= self.a) & (y < self.b)

    def bbox(self):
        return np.array([self.a]), np.array([self.b])

    @property
    def volume(self):
        return float(self.b - self.a)

    def fourier(self, q):
        q = np.asarray(q, dtype=float).reshape(-1)
        length = self.b - self.a
        mid = 0.5 * (self.a + self.b)
        # exp(-2 pi i q mid) * L * sinc(q L), numpy sinc is sin(pi x)/(pi x)
        return length * np.exp(-1j * TWO_PI * q * mid) * np.sinc(q * length)


@dataclass(frozen=True, eq=False)
class Polygon(Window):
    """Strictly convex polygon with counterclockwise vertices."""

    vertices: np.ndarray
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ConfigError("polygon needs at least three 2D vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise ConfigError("polygon vertices must be strictly convex and counterclockwise")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        lex = min(range(len(v)), key=lambda i: (v[i, 0], v[i, 1]))
        closed = np.zeros(len(v), dtype=bool)
        closed[lex] = True  # edge lex -> lex+1
        closed[lex - 1] = True  # edge lex-1 -> lex
        object.__setattr__(self, "_closed_edges", closed)

    def contains(self, y, coords=None):
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        inside = np.ones(len(y), dtype=bool)
        for i in range(len(v)):
            c = e[i, 0] * (y[:, 1] - v[i, 1]) - e[i, 1] * (y[:, 0] - v[i, 0])
            inside &= (c > 0) | ((c == 0) & self._closed_edges[i])
        return inside

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def volume(self):
        x, y = self.vertices.T
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def _moments(self):
        # fan triangulation from vertex 0: area, first and second moments
        v = self.vertices
        m1 = np.zeros(2)
        m2 = np.zeros((2, 2))
        for i in range(1, len(v) - 1):
            a, b, c = v[0], v[i], v[i + 1]
            area = 0.5 * ((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
            m1 += area * (a + b + c) / 3.0
            s = a + b + c
            m2 += area / 12.0 * (np.outer(a, a) + np.outer(b, b) + np.outer(c, c) + np.outer(s, s))
        return m1, m2

    def fourier(self, q):
        q = np.asarray(q, dtype=float).reshape(-1, 2)
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        d = w - v
        mid = 0.5 * (v + w)
        normal = np.stack([d[:, 1], -d[:, 0]], axis=1)  # outward, scaled by edge length
        qq = np.einsum("ij,ij->i", q, q)
        small = qq < SERIES_CUTOFF**2
        out = np.empty(len(q), dtype=complex)
        if np.any(~small):
            qb = q[~small]
            qn = qb @ normal.T
            u = qb @ d.T
            phase = np.exp(-1j * TWO_PI * (qb @ mid.T))
            edge_sum = np.sum(qn * phase * np.sinc(u), axis=1)
            out[~small] = 1j * edge_sum / (TWO_PI * qq[~small])
        if np.any(small):
            qs = q[small]
            m1, m2 = self._moments()
            out[small] = (
                self.volume
                - 1j * TWO_PI * (qs @ m1)
                - 0.5 * TWO_PI**2 * np.einsum("ij,jk,ik->i", qs, m2, qs)
            )
        return out


@dataclass(frozen=True, eq=False)
class WindowFamily(Window):
    """Windows indexed by the class ``(coeffs . n) mod modulus`` of a lattice point.

    Labels missing from ``windows`` accept nothing.
    """

    windows: dict
    coeffs: tuple
    modulus: int
    dim: int = field(default=0, init=False)

    def __post_init__(self):
        dims = {w.dim for w in self.windows.values()}
        if len(dims) != 1:
            raise ConfigError("window family members must share a dimension")
        if not any(abs(c) == 1 for c in self.coeffs):
            raise ConfigError("label functional needs a coefficient of +-1")
        object.__setattr__(self, "dim", dims.pop())

    def labels(self, coords):
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, len(self.coeffs))
        return np.mod(coords @ np.asarray(self.coeffs, dtype=np.int64), self.modulus)

    def contains(self, y, coords=None):
        if coords is None:
            raise ConfigError("window family membership needs lattice coordinates")
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        lab = self.labels(coords)
        out = np.zeros(len(y), dtype=bool)
        for label, win in self.windows.items():
            sel = lab == label
            if np.any(sel):
                out[sel] = win.contains(y[sel])
        return out

    def bbox(self):
        los, his = zip(*(w.bbox() for w in self.windows.values()))
        return np.min(los, axis=0), np.max(his, axis=0)

    @property
    def volume(self):
        return float(sum(w.volume for w in self.windows.values()))

    def fourier(self, q):
        raise ConfigError("a window family has no single Fourier transform; use the coset sum")

    def sublattice_basis(self) -> np.ndarray:
        """Integer basis (columns) of the label-0 sublattice ``{n : coeffs.n = 0 mod modulus}``."""
        c = np.asarray(self.coeffs, dtype=np.int64)
        n = len(c)
        j = int(np.flatnonzero(np.abs(c) == 1)[0])
        basis = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            if i == j:
                basis[j, i] = self.modulus
            else:
                basis[i, i] = 1
                basis[j, i] = -c[i] * c[j]
        return basis

    def coset_representative(self, label: int) -> np.ndarray:
        c = np.asarray(self.coeffs, dtype=np.int64)
        j = int(np.flatnonzero(np.abs(c) == 1)[0])
        rep = np.zeros(len(c), dtype=np.int64)
        rep[j] = label * c[j]
        return rep


def regular_polygon(n: int, radius: float, phase: float = 0.0, center=(0.0, 0.0)) -> Polygon:
    ang = phase + TWO_PI * np.arange(n) / n
    c = np.asarray(center, dtype=float)
    return Polygon(np.stack([c[0] + radius * np.cos(ang), c[1] + radius * np.sin(ang)], axis=1))


def convex_hull(points) -> np.ndarray:
    """Counterclockwise hull vertices (monotone chain), collinear points dropped."""
    pts = sorted(set(map(tuple, np.round(np.asarray(points, dtype=float), 14))))
    if len(pts) < 3:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-12:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-12:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])
