"""Seeded event processes: spatial laws, Markov target, Poisson arrivals, typed events.

Every stream draws from its own ``numpy.random.Generator`` obtained with
:func:`substream`, keyed by the master seed and a text label, so adding a
new consumer of randomness never shifts an existing stream.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Workspace, as_point

MAX_ATTEMPTS = 10 ** 6
EVENT_TYPES = ("a", "b", "ab")


class DegenerateDistributionError(RuntimeError):
    pass


def substream(seed, label: str) -> np.random.Generator:
    """Independent generator for ``(seed, label)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))


@dataclass(frozen=True)
class GaussianComponent:
    mean: tuple
    std: float
    weight: float = 1.0


@dataclass(frozen=True, eq=False)
class SpatialDistribution:
    """``uniform`` over Q, truncated isotropic Gaussian ``mixture``, or ``ring``."""

    kind: str
    workspace: Workspace
    components: tuple = ()
    radius: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind == "mixture":
            if not self.components:
                raise ValueError("mixture needs at least one component")
            w = np.array([c.weight for c in self.components], float)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("mixture weights must be positive and sum to 1")
            for c in self.components:
                if len(c.mean) != self.workspace.dim or not c.std > 0:
                    raise ValueError("mixture component has wrong dimension or non-positive std")
        elif self.kind == "ring":
            if self.workspace.dim != 2 or not self.radius > 0:
                raise ValueError("ring needs a planar workspace and positive radius")
            t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
            pts = np.column_stack([np.cos(t), np.sin(t)]) * self.radius + np.asarray(self.center)
            if not self.workspace.contains_many(pts, tol=1e-9).all():
                raise ValueError("ring must lie inside the workspace")
        elif self.kind != "uniform":
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def uniform(cls, Q: Workspace) -> "SpatialDistribution":
        return cls("uniform", Q)

    @classmethod
    def mixture(cls, Q: Workspace, components) -> "SpatialDistribution":
        comps = tuple(
            c if isinstance(c, GaussianComponent)
            else GaussianComponent(tuple(float(v) for v in np.atleast_1d(c["mean"])), float(c["std"]),
                                   float(c.get("weight", 1.0)))
            for c in components
        )
        return cls("mixture", Q, components=comps)

    @classmethod
    def ring(cls, Q: Workspace, radius: float, center=(0.0, 0.0)) -> "SpatialDistribution":
        return cls("ring", Q, radius=float(radius), center=tuple(float(c) for c in center))

    @classmethod
    def from_dict(cls, d: dict, Q: Workspace) -> "SpatialDistribution":
        kind = d.get("kind", "uniform")
        allowed = {"uniform": {"kind"}, "mixture": {"kind", "components"},
                   "ring": {"kind", "radius", "center"}}.get(kind)
        if allowed is None:
            raise ValueError(f"unknown distribution kind {kind!r}")
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown distribution keys {sorted(unknown)}")
        if kind == "uniform":
            return cls.uniform(Q)
        if kind == "mixture":
            for c in d["components"]:
                bad = set(c) - {"mean", "std", "weight"}
                if bad:
                    raise ValueError(f"unknown mixture component keys {sorted(bad)}")
            return cls.mixture(Q, d["components"])
        return cls.ring(Q, d.get("radius", 1.0), d.get("center", (0.0, 0.0)))

    def to_dict(self) -> dict:
        if self.kind == "mixture":
            return {"kind": "mixture", "components": [
                {"mean": list(c.mean), "std": c.std, "weight": c.weight} for c in self.components]}
        if self.kind == "ring":
            return {"kind": "ring", "radius": self.radius, "center": list(self.center)}
        return {"kind": "uniform"}


def _uniform_box(Q: Workspace, rng: np.random.Generator, m: int) -> np.ndarray:
    return Q.lower + rng.random((m, Q.dim)) * (Q.upper - Q.lower)


def _rejection(draw, Q: Workspace, rng, m: int) -> np.ndarray:
    out = np.empty((m, Q.dim))
    filled = 0
    attempts = 0
    while filled < m:
        batch = max(16, int(1.2 * (m - filled)) + 8)
        cand = draw(rng, batch)
        attempts += batch
        ok = cand[Q.contains_many(cand, tol=0.0)]
        take = min(len(ok), m - filled)
        out[filled:filled + take] = ok[:take]
        filled += take
        if filled < m and attempts > MAX_ATTEMPTS * max(1, m):
            raise DegenerateDistributionError(
                f"rejection sampling exceeded {MAX_ATTEMPTS} attempts per sample")
    return out


def sample_locations(dist: SpatialDistribution, rng: np.random.Generator, m: int) -> np.ndarray:
    """``m`` iid samples, shape ``(m, q)``; always inside the workspace."""
    Q = dist.workspace
    if dist.kind == "uniform":
        if Q.kind == "polygon":
            return _rejection(lambda r, k: _uniform_box(Q, r, k), Q, rng, m)
        return _uniform_box(Q, rng, m)
    if dist.kind == "ring":
        t = rng.uniform(0.0, 2.0 * np.pi, m)
        return np.column_stack([np.cos(t), np.sin(t)]) * dist.radius + np.asarray(dist.center)
    means = np.array([c.mean for c in dist.components], float)
    stds = np.array([c.std for c in dist.components], float)
    weights = np.array([c.weight for c in dist.components], float)

    def draw(r, k):
        idx = r.choice(len(weights), size=k, p=weights / weights.sum())
        return means[idx] + stds[idx, None] * r.standard_normal((k, Q.dim))

    return _rejection(draw, Q, rng, m)


def sample_location(dist: SpatialDistribution, rng: np.random.Generator) -> np.ndarray:
    return sample_locations(dist, rng, 1)[0]


@dataclass(frozen=True)
class MarkovTarget:
    """Target on a circle whose angle follows ``theta' = decay * theta + U(-noise, noise)``."""

    radius: float = 1.0
    decay: float = 0.95
    noise: float = 0.5
    theta: float = 0.0

    def position(self) -> np.ndarray:
        return np.array([self.radius * math.cos(self.theta), self.radius * math.sin(self.theta)])


def markov_step(t: MarkovTarget, rng: np.random.Generator, xi: float | None = None):
    if xi is None:
        xi = float(rng.uniform(-t.noise, t.noise))
    nt = replace(t, theta=t.decay * t.theta + xi)
    return nt, nt.position()


@dataclass(frozen=True)
class ServiceLaw:
    kind: str = "deterministic"
    mean: float = 0.0

    def __post_init__(self):
        if self.kind not in ("deterministic", "exponential"):
            raise ValueError(f"unknown service law {self.kind!r}")
        if self.mean < 0:
            raise ValueError("service mean must be nonnegative")

    @property
    def second_moment(self) -> float:
        if self.kind == "exponential":
            return 2.0 * self.mean ** 2
        return self.mean ** 2

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "exponential":
            return float(rng.exponential(self.mean)) if self.mean > 0 else 0.0
        return self.mean


@dataclass
class PoissonStream:
    """Space-time Poisson process with its own arrival, location and service generators.

    Draws are made in blocks of ``block`` from each generator.
    """

    rate: float
    spatial: SpatialDistribution
    service: ServiceLaw = field(default_factory=ServiceLaw)
    seed: int = 0
    time: float = 0.0
    block: int = 4096

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("arrival rate must be positive")
        self._gaps = substream(self.seed, "arrival-gaps")
        self._where = substream(self.seed, "arrival-locations")
        self._service = substream(self.seed, "service-times")
        self._buf: list = []

    def _refill(self) -> None:
        gaps = self._gaps.exponential(1.0 / self.rate, self.block).tolist()
        where = sample_locations(self.spatial, self._where, self.block).tolist()
        if self.service.kind == "exponential" and self.service.mean > 0:
            svc = self._service.exponential(self.service.mean, self.block).tolist()
        else:
            svc = [self.service.draw(self._service)] * self.block
        self._buf = list(zip(gaps, where, svc))[::-1]


def next_arrival(s: PoissonStream) -> tuple[float, np.ndarray, float]:
    if not s._buf:
        s._refill()
    gap, z, service = s._buf.pop()
    s.time = s.time + gap
    return s.time, np.array(z), service


@dataclass(frozen=True)
class TypedEventLaw:
    probabilities: tuple
    spatial: dict

    def __post_init__(self):
        p = np.asarray(self.probabilities, float)
        if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("type probabilities (a, b, ab) must be nonnegative and sum to 1")
        if set(self.spatial) != set(EVENT_TYPES):
            raise ValueError("need one spatial law per event type a, b, ab")


def sample_typed(law: TypedEventLaw, rng: np.random.Generator) -> tuple[str, np.ndarray]:
    u = rng.random()
    cum = np.cumsum(law.probabilities)
    i = int(np.searchsorted(cum, u, side="right"))
    i = min(i, 2)
    while law.probabilities[i] == 0:
        i -= 1
    kind = EVENT_TYPES[i]
    return kind, sample_location(law.spatial[kind], rng)

