"""Workspaces, cost functions and generalized Voronoi ownership.

All cell integrals in the package are estimated by sampling: a point is
routed to its owner with :func:`cell_owner` (or the vectorized
:meth:`GeneralizedDiagram.owners`) and frequencies are accumulated.  No
Voronoi vertices are ever computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence, TextIO

import numpy as np

if TYPE_CHECKING:
    from .events import SpatialDistribution

OUTSIDE = -1
_TOL = 1e-12


class UnsupportedDimensionError(ValueError):
    pass


class DomainError(ValueError):
    """A point that must lie in the workspace does not."""


def check_in(Q: "Workspace", z) -> np.ndarray:
    z = as_point(z)
    if not Q.contains(z, tol=1e-9):
        raise DomainError(f"event location {z.tolist()} lies outside the workspace")
    return z


def as_point(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class Workspace:
    """Compact convex region: an interval, an axis-aligned box or a convex polygon.

    ``lower``/``upper`` hold the box (or interval) bounds; for a polygon they
    hold the bounding box and ``vertices`` the counterclockwise vertex list.
    """

    kind: str
    lower: np.ndarray
    upper: np.ndarray
    vertices: np.ndarray | None = None

    def __post_init__(self):
        # plain-float copies for the per-event hot paths
        object.__setattr__(self, "_lo", [float(v) for v in self.lower])
        object.__setattr__(self, "_hi", [float(v) for v in self.upper])

    @classmethod
    def interval(cls, a: float, b: float) -> "Workspace":
        if not b > a:
            raise ValueError(f"interval needs a < b, got [{a}, {b}]")
        return cls("interval", np.array([float(a)]), np.array([float(b)]))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "Workspace":
        lo, hi = np.asarray(lower, float), np.asarray(upper, float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be matching vectors")
        if not 1 <= lo.size <= 3:
            raise UnsupportedDimensionError("workspaces have dimension 1, 2 or 3")
        if np.any(hi <= lo):
            raise ValueError("box must have positive side lengths")
        if lo.size == 1:
            return cls("interval", lo, hi)
        return cls("box", lo, hi)

    @classmethod
    def unit_square(cls) -> "Workspace":
        return cls.box([0.0, 0.0], [1.0, 1.0])

    @classmethod
    def polygon(cls, vertices) -> "Workspace":
        v = np.asarray(vertices, float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        e = np.roll(v, -1, axis=0) - v
        f = np.roll(e, -1, axis=0)
        turn = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
        if np.any(turn <= 0):
            raise ValueError("polygon vertices must be in strictly convex counterclockwise order")
        return cls("polygon", v.min(axis=0), v.max(axis=0), v)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        if self.kind == "polygon":
            d = self.vertices[:, None, :] - self.vertices[None, :, :]
            return float(np.sqrt((d ** 2).sum(-1)).max())
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol: float = _TOL) -> bool:
        x = as_point(x)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        if self.kind == "polygon":
            return bool(np.all(self._edge_cross(x[None, :]) >= -tol))
        return True

    def holds(self, x: list, tol: float = 1e-9) -> bool:
        """Fast membership test for a point given as a list of floats."""
        if len(x) != len(self._lo):
            return False
        for v, lo, hi in zip(x, self._lo, self._hi):
            if not lo - tol <= v <= hi + tol:
                return False
        if self.kind == "polygon":
            return self.contains(x, tol)
        return True

    def clamp(self, x: list) -> list:
        """:func:`project` for a point given as a list of floats."""
        if self.kind == "polygon":
            return project(x, self).tolist()
        return [min(max(v, lo), hi) for v, lo, hi in zip(x, self._lo, self._hi)]

    def contains_many(self, xs: np.ndarray, tol: float = _TOL) -> np.ndarray:
        xs = np.asarray(xs, float).reshape(-1, self.dim)
        ok = np.all((xs >= self.lower - tol) & (xs <= self.upper + tol), axis=1)
        if self.kind == "polygon":
            ok &= np.all(self._edge_cross(xs) >= -tol, axis=1)
        return ok

    def _edge_cross(self, xs: np.ndarray) -> np.ndarray:
        a = self.vertices
        e = np.roll(a, -1, axis=0) - a
        r = xs[:, None, :] - a[None, :, :]
        return e[None, :, 0] * r[:, :, 1] - e[None, :, 1] * r[:, :, 0]

    def area(self) -> float:
        if self.kind == "polygon":
            x, y = self.vertices[:, 0], self.vertices[:, 1]
            return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
        return float(np.prod(self.upper - self.lower))

    def to_dict(self) -> dict:
        if self.kind == "polygon":
            return {"kind": "polygon", "vertices": self.vertices.tolist()}
        if self.kind == "interval":
            return {"kind": "interval", "bounds": [float(self.lower[0]), float(self.upper[0])]}
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def project(x, Q: Workspace) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``Q``."""
    x = as_point(x)
    if Q.kind != "polygon":
        return np.clip(x, Q.lower, Q.upper)
    if Q.contains(x, tol=0.0):
        return x.copy()
    a = Q.vertices
    e = np.roll(a, -1, axis=0) - a
    t = np.einsum("ij,ij->i", x - a, e) / np.einsum("ij,ij->i", e, e)
    cand = a + np.clip(t, 0.0, 1.0)[:, None] * e
    d2 = ((cand - x) ** 2).sum(axis=1)
    return cand[int(np.argmin(d2))]


def saturate(u, b: float) -> np.ndarray:
    """Clip the norm of ``u`` to ``b`` keeping its direction."""
    if not b > 0:
        raise ValueError("saturation bound must be positive")
    u = as_point(u)
    norm = float(np.linalg.norm(u))
    if norm <= b:
        return u.copy()
    return u * (b / norm)


def unit(u) -> np.ndarray:
    """``u / ||u||`` with ``0 / ||0|| = 0``."""
    u = as_point(u)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        return np.zeros_like(u)
    return u / norm


def nearest_index(z, points) -> int:
    pts = np.asarray(points, float)
    if pts.size == 0:
        raise ValueError("nearest_index needs at least one point")
    z = as_point(z)
    pts = pts.reshape(len(pts), -1)
    d2 = ((pts - z) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def nearest_indices(zs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`nearest_index` over rows of ``zs``."""
    d2 = ((zs[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


@dataclass(frozen=True)
class CostSpec:
    """Increasing C1 cost of distance: ``linear`` (x/speed), ``quadratic`` or ``power``."""

    kind: str = "quadratic"
    speed: float = 1.0
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic", "power"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "linear" and not self.speed > 0:
            raise ValueError("linear cost needs a positive speed")
        if self.kind == "power" and not self.alpha >= 1:
            raise ValueError("power cost needs alpha >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "CostSpec":
        d = dict(d)
        unknown = set(d) - {"kind", "speed", "alpha"}
        if unknown:
            raise ValueError(f"unknown cost keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "speed": self.speed}
        if self.kind == "power":
            return {"kind": "power", "alpha": self.alpha}
        return {"kind": "quadratic"}

    def __call__(self, x):
        if self.kind == "linear":
            return np.asarray(x, float) / self.speed if np.ndim(x) else float(x) / self.speed
        if self.kind == "quadratic":
            return x * x
        return np.power(x, self.alpha) if np.ndim(x) else float(x) ** self.alpha

    def derivative(self, x):
        if self.kind == "linear":
            return np.full(np.shape(x), 1.0 / self.speed) if np.ndim(x) else 1.0 / self.speed
        if self.kind == "quadratic":
            return 2.0 * x
        if np.ndim(x):
            return self.alpha * np.power(x, self.alpha - 1.0)
        return self.alpha * float(x) ** (self.alpha - 1.0)


@dataclass
class GeneralizedDiagram:
    """Cells ``{z : f(|z-g_i|) - w_i <= f(|z-g_j|) - w_j for all j}``."""

    generators: np.ndarray
    weights: np.ndarray
    cost: CostSpec = field(default_factory=CostSpec)

    def __post_init__(self):
        g = np.asarray(self.generators, float)
        if g.ndim == 1:
            g = g[:, None]
        self.generators = g
        self.weights = np.asarray(self.weights, float).reshape(-1)
        if len(self.weights) != len(g):
            raise ValueError("one weight per generator required")
        if len(g) == 0:
            raise ValueError("diagram needs at least one generator")
        if len(np.unique(g, axis=0)) != len(g):
            raise ValueError("generators must be pairwise distinct")

    @property
    def n(self) -> int:
        return len(self.generators)

    def scores(self, zs: np.ndarray) -> np.ndarray:
        d = np.sqrt(((zs[:, None, :] - self.generators[None, :, :]) ** 2).sum(axis=2))
        return self.cost(d) - self.weights[None, :]

    def owners(self, zs, chunk: int = 200_000) -> np.ndarray:
        zs = np.asarray(zs, float).reshape(-1, self.generators.shape[1])
        out = np.empty(len(zs), dtype=np.int64)
        for s in range(0, len(zs), chunk):
            out[s:s + chunk] = np.argmin(self.scores(zs[s:s + chunk]), axis=1)
        return out


def cell_owner(z, d: GeneralizedDiagram) -> int:
    z = as_point(z)
    return int(np.argmin(d.scores(z[None, :])[0]))


def normalized_frequencies(counts: np.ndarray) -> np.ndarray:
    """Counts to probabilities whose compensated sum is exactly one."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    p = counts / total
    j = int(np.argmax(counts))
    p[j] = 0.0
    p[j] = 1.0 - math.fsum(p)
    return p


def estimate_cell_measures(d: GeneralizedDiagram, dist: "SpatialDistribution", m: int, seed) -> np.ndarray:
    """Fraction of ``m`` iid samples of ``dist`` owned by each cell."""
    from .events import sample_locations, substream

    if m < 1:
        raise ValueError("need at least one sample")
    rng = substream(seed, "cell-measures")
    zs = sample_locations(dist, rng, m)
    counts = np.bincount(d.owners(zs), minlength=d.n)
    return normalized_frequencies(counts)


def render_ownership_raster(d: GeneralizedDiagram, Q: Workspace, resolution) -> np.ndarray:
    """Owner index at every pixel center of the bounding box; ``OUTSIDE`` off Q.

    Row 0 is the top row (largest y).
    """
    if Q.dim != 2:
        raise UnsupportedDimensionError("ownership rasters need a planar workspace")
    if np.isscalar(resolution):
        nx = ny = int(resolution)
    else:
        nx, ny = (int(r) for r in resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    (x0, y0), (x1, y1) = Q.lower, Q.upper
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y1 - (np.arange(ny) + 0.5) * (y1 - y0) / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    grid = d.owners(pts)
    grid[~Q.contains_many(pts)] = OUTSIDE
    return grid.reshape(ny, nx)


def write_raster(grid: np.ndarray, n: int, fh: TextIO) -> None:
    """Header ``width height n`` then one row of owner indices per line."""
    h, w = grid.shape
    fh.write(f"{w} {h} {n}\n")
    for row in grid:
        fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_raster(fh: TextIO) -> tuple[np.ndarray, int]:
    """Inverse of :func:`write_raster`; leading ``#`` comment lines are skipped."""
    lines = (line for line in fh if not line.startswith("#"))
    w, h, n = (int(t) for t in next(lines).split())
    rows = [list(map(int, next(lines).split())) for _ in range(h)]
    grid = np.array(rows, dtype=np.int64).reshape(h, w)
    return grid, n
