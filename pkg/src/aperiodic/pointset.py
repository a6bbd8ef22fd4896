"""Finite point sets in R^d and their CSV representation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError

DUPLICATE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite, uniformly discrete set of points.

    ``points`` has shape ``(n, dim)``.  ``provenance`` optionally holds the
    integer lattice coordinates each point was projected from.
    """

    points: np.ndarray
    provenance: np.ndarray | None = None
    dim: int = field(default=0)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if self.dim in (0, 1) else pts.reshape(-1, self.dim)
        dim = self.dim or pts.shape[1]
        if pts.size == 0:
            pts = np.zeros((0, dim))
        if pts.shape[1] != dim:
            raise ConfigError(f"points have dimension {pts.shape[1]}, expected {dim}")
        prov = self.provenance
        if prov is not None:
            prov = np.asarray(prov, dtype=np.int64)
            if prov.shape[0] != pts.shape[0]:
                raise ConfigError("provenance length does not match point count")
            prov.setflags(write=False)
        if len(pts) > 1:
            dmin = _min_distance(pts)
            if dmin <= DUPLICATE_TOL:
                raise ConfigError(f"duplicate points (min distance {dmin:.3g})")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "dim", dim)

    def __len__(self):
        return len(self.points)

    def min_distance(self) -> float:
        if len(self) < 2:
            return float("inf")
        return _min_distance(self.points)

    def translated(self, t) -> PointSet:
        t = np.asarray(t, dtype=float).reshape(1, self.dim)
        return PointSet(self.points + t, self.provenance, self.dim)

    def sorted(self) -> PointSet:
        """Return a copy in canonical (lexicographic) order."""
        order = np.lexsort(self.points.T[::-1]) if len(self) else np.arange(0)
        prov = None if self.provenance is None else self.provenance[order]
        return PointSet(self.points[order], prov, self.dim)

    def select(self, mask) -> PointSet:
        prov = None if self.provenance is None else self.provenance[mask]
        return PointSet(self.points[mask], prov, self.dim)

    def contains(self, other: PointSet, tol: float = 1e-9) -> bool:
        """True if every point of ``other`` lies within ``tol`` of a point here."""
        if len(other) == 0:
            return True
        if len(self) == 0:
            return False
        dist, _ = cKDTree(self.points).query(other.points)
        return bool(np.all(dist <= tol))


def _min_distance(pts: np.ndarray) -> float:
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=2)
    return float(dist[:, 1].min())


def write_csv(pointset: PointSet, path, header_extra: dict | None = None) -> None:
    """One point per line, 12 significant digits, ``# dim=<d>`` header."""
    lines = [f"# dim={pointset.dim}"]
    for key, value in (header_extra or {}).items():
        lines.append(f"# {key}={value}")
    for p in pointset.points:
        lines.append(",".join(f"{c:.12g}" for c in p))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_csv(path) -> PointSet:
    dim = None
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("dim="):
                dim = int(body[4:])
            continue
        rows.append([float(v) for v in line.split(",")])
    if dim is None:
        raise ConfigError(f"{path}: missing '# dim=' header")
    pts = np.array(rows, dtype=float).reshape(-1, dim)
    return PointSet(pts, dim=dim)
