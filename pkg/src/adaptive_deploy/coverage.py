"""Adaptive coverage control by stochastic gradient descent.

When an event appears at ``z`` the robot whose reference position is
closest moves toward it by ``gamma_k * f'(|p - z|)`` along the unit
direction, saturated to its velocity budget and projected back onto the
workspace.  Averaged over events this step is minus ``gamma_k`` times the
gradient of ``E[min_i f(|p_i - Z|)]``, which :func:`deterministic_gradient`
estimates independently by sampling the cell integrals.

Per-event code works on lists of floats; numpy is only used for the
batched Monte Carlo estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .consensus import INF, CommGraph, winner
from .events import MarkovTarget, SpatialDistribution, markov_step, sample_locations, substream
from .geometry import CostSpec, DomainError, Workspace, nearest_indices

COINCIDENCE_NUDGE = 2.0 ** -40


class NondifferentiableConfigurationError(ValueError):
    """Two reference positions coincide, where the objective has no gradient."""


@dataclass(frozen=True)
class StepsizeSchedule:
    """``harmonic``: ``c / (1 + d k)``; ``constant``: ``c``."""

    kind: str = "harmonic"
    c: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if self.kind not in ("harmonic", "constant"):
            raise ValueError(f"unknown stepsize kind {self.kind!r}")
        if not self.c > 0 or self.d < 0:
            raise ValueError("stepsize needs c > 0 and d >= 0")

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.c
        return self.c / (1.0 + self.d * k)

    @property
    def diminishing(self) -> bool:
        """True when sum gamma = inf and sum gamma^2 < inf."""
        return self.kind == "harmonic" and self.d > 0

    @classmethod
    def from_dict(cls, d: dict) -> "StepsizeSchedule":
        unknown = set(d) - {"kind", "c", "d"}
        if unknown:
            raise ValueError(f"unknown stepsize keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c": self.c, "d": self.d}


def _to_rows(points, q: int) -> list[list[float]]:
    p = np.asarray(points, float)
    if p.ndim == 1 and q == 1:
        p = p[:, None]
    return p.reshape(-1, q).tolist()


def _require_in(Q: Workspace, x: list) -> None:
    if not Q.holds(x):
        raise DomainError(f"point {x} lies outside the workspace")


def _event(Q: Workspace, z) -> list[float]:
    if isinstance(z, (list, tuple)):
        z = [float(v) for v in z]
    elif isinstance(z, (int, float)):
        z = [float(z)]
    else:
        z = np.atleast_1d(np.asarray(z, float)).tolist()
    _require_in(Q, z)
    return z


_dist = math.dist


def move_toward(p: list, z: list, gamma: float, cost: CostSpec, budget: float,
                Q: Workspace) -> tuple[list, bool]:
    """``Pi_Q[p + sat(gamma f'(|z-p|) (z-p)/|z-p|)_budget]`` and whether saturation bound.

    ``z == p`` gives a zero step (``0/|0| = 0``).
    """
    d = _dist(p, z)
    if d == 0.0:
        return list(p), False
    scale = gamma * cost.derivative(d)
    hit = abs(scale) > budget
    if hit:
        scale = budget
    return Q.clamp([pi + scale * (zi - pi) / d for pi, zi in zip(p, z)]), hit


def _avoid_coincidence(rows: list, i: int, Q: Workspace) -> None:
    for sign in (1.0, -1.0, 2.0, -2.0):
        if not any(rows[i] == r for j, r in enumerate(rows) if j != i):
            return
        rows[i] = Q.clamp([v + sign * COINCIDENCE_NUDGE for v in rows[i]])
    assert not any(rows[i] == r for j, r in enumerate(rows) if j != i), "reference positions coincide"


class CoverageState:
    """Reference positions plus everything the update law needs.

    ``budgets`` is the per-robot displacement allowed between two events,
    ``graph`` the communication graph used to elect the winner (``None``
    means complete), and ``transient_events`` the length of the optional
    initial phase in which every robot moves with a fast-decaying stepsize.
    """

    def __init__(self, positions, workspace: Workspace, cost: CostSpec | None = None,
                 schedule: StepsizeSchedule | None = None, budgets=math.inf, k: int = 0,
                 graph: CommGraph | None = None, detection_radius: float = math.inf,
                 transient_events: int = 0):
        self.workspace = workspace
        self._p = _to_rows(positions, workspace.dim)
        for x in self._p:
            _require_in(workspace, x)
        self.cost = cost or CostSpec()
        self.schedule = schedule or StepsizeSchedule()
        b = np.broadcast_to(np.asarray(budgets, float), (len(self._p),))
        if np.any(b <= 0):
            raise ValueError("velocity budgets must be positive")
        self.budgets = b.tolist()
        self.k = k
        if graph is not None and graph.n != len(self._p):
            raise ValueError("graph size differs from the robot count")
        self.graph = graph
        self.detection_radius = detection_radius
        self.transient_events = transient_events
        self.last_winner = -1
        self.last_stepsize = 0.0
        self.last_cost = 0.0
        self.saturated = 0

    @property
    def positions(self) -> np.ndarray:
        return np.array(self._p)

    @positions.setter
    def positions(self, value) -> None:
        rows = _to_rows(value, self.workspace.dim)
        if len(rows) != len(self._p):
            raise ValueError("robot count cannot change")
        self._p = rows

    @property
    def n(self) -> int:
        return len(self._p)

    def in_transient(self) -> bool:
        return self.k < self.transient_events

    def copy(self) -> "CoverageState":
        c = CoverageState(self._p, self.workspace, self.cost, self.schedule, self.budgets, self.k,
                          self.graph, self.detection_radius, self.transient_events)
        c.last_winner, c.last_stepsize, c.last_cost = self.last_winner, self.last_stepsize, self.last_cost
        c.saturated = self.saturated
        return c


def adaptive_update(s: CoverageState, z) -> CoverageState:
    """Apply one event to ``s`` in place and return it."""
    z = _event(s.workspace, z)
    p = s._p
    d = [_dist(x, z) for x in p]
    s.last_cost = float(s.cost(min(d)))
    if s.detection_radius < math.inf:
        d = [v if v <= s.detection_radius else INF for v in d]
    i = winner(d, s.graph)
    gamma = s.schedule(s.k)
    if s.in_transient():
        gamma = gamma / (1.0 + s.k)
        for j in range(s.n):
            p[j], hit = move_toward(p[j], z, gamma, s.cost, s.budgets[j], s.workspace)
            s.saturated += hit
        for j in range(s.n):
            _avoid_coincidence(p, j, s.workspace)
    else:
        p[i], hit = move_toward(p[i], z, gamma, s.cost, s.budgets[i], s.workspace)
        s.saturated += hit
        if s.n > 1:
            _avoid_coincidence(p, i, s.workspace)
    s.last_winner, s.last_stepsize = i, gamma
    s.k += 1
    return s


def _check_distinct(p: np.ndarray) -> None:
    if len(np.unique(p, axis=0)) != len(p):
        raise NondifferentiableConfigurationError("coincident reference positions")


def deterministic_gradient(p, dist: SpatialDistribution, cost: CostSpec, m: int, seed,
                           with_stderr: bool = False, chunk: int = 100_000):
    """Sampled cell integrals ``int_{V_i} f'(|p_i - z|)(p_i - z)/|p_i - z| dP``, shape ``(n, q)``.

    With ``with_stderr`` also returns the per-component standard errors.
    """
    p = np.asarray(p, float)
    p = p.reshape(len(p), -1)
    _check_distinct(p)
    n, q = p.shape
    rng = substream(seed, "deterministic-gradient")
    total = np.zeros((n, q))
    total_sq = np.zeros((n, q))
    done = 0
    while done < m:
        zs = sample_locations(dist, rng, min(chunk, m - done))
        owner = nearest_indices(zs, p)
        for i in range(n):
            diff = p[i] - zs[owner == i]
            r = np.linalg.norm(diff, axis=1)
            w = np.divide(cost.derivative(r), r, out=np.zeros_like(r), where=r > 0)
            g = diff * w[:, None]
            total[i] += g.sum(axis=0)
            total_sq[i] += (g ** 2).sum(axis=0)
        done += len(zs)
    mean = total / m
    if not with_stderr:
        return mean
    var = np.maximum(total_sq / m - mean ** 2, 0.0) * m / max(m - 1, 1)
    return mean, np.sqrt(var / m)


def objective_estimate(p, dist: SpatialDistribution, cost: CostSpec, m: int, seed) -> tuple[float, float]:
    """Sample mean of ``min_i f(|p_i - Z|)`` and its standard error."""
    p = np.asarray(p, float)
    p = p.reshape(len(p), -1)
    rng = substream(seed, "objective")
    zs = sample_locations(dist, rng, m)
    d = np.sqrt(((zs[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    c = cost(d)
    se = float(c.std(ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return float(c.mean()), se


class HeteroState:
    """Two robot populations ``A`` and ``B`` with their own cost functions."""

    def __init__(self, positions_a, positions_b, workspace: Workspace, cost_a: CostSpec | None = None,
                 cost_b: CostSpec | None = None, schedule: StepsizeSchedule | None = None,
                 budget: float = math.inf, k: int = 0):
        q = workspace.dim
        self.workspace = workspace
        self._a = _to_rows(positions_a, q)
        self._b = _to_rows(positions_b, q)
        if not self._a or not self._b:
            raise ValueError("need at least one robot of each type")
        for x in self._a + self._b:
            _require_in(workspace, x)
        self.cost_a = cost_a or CostSpec("linear")
        self.cost_b = cost_b or CostSpec("linear")
        self.schedule = schedule or StepsizeSchedule()
        self.budget = budget
        self.k = k
        self.last_mover = ("", -1)
        self.last_cost = 0.0

    @property
    def positions_a(self) -> np.ndarray:
        return np.array(self._a)

    @property
    def positions_b(self) -> np.ndarray:
        return np.array(self._b)


def _closest(rows: list, z: list) -> tuple[int, float]:
    d = [_dist(x, z) for x in rows]
    i = min(range(len(d)), key=d.__getitem__)
    return i, d[i]


def hetero_update(s: HeteroState, kind: str, z) -> HeteroState:
    """Event of type ``a``, ``b`` or ``ab``.

    For ``ab`` the closest robot of each type is found and only the one with
    the larger servicing cost moves, using its own cost; equal costs move A.
    """
    z = _event(s.workspace, z)
    gamma = s.schedule(s.k)
    if kind == "a":
        rows, cost = s._a, s.cost_a
        i, d = _closest(rows, z)
        s.last_cost = float(cost(d))
    elif kind == "b":
        rows, cost = s._b, s.cost_b
        i, d = _closest(rows, z)
        s.last_cost = float(cost(d))
    elif kind == "ab":
        ia, da = _closest(s._a, z)
        ib, db = _closest(s._b, z)
        ca, cb = float(s.cost_a(da)), float(s.cost_b(db))
        s.last_cost = max(ca, cb)
        if cb > ca:
            rows, cost, i = s._b, s.cost_b, ib
        else:
            rows, cost, i = s._a, s.cost_a, ia
    else:
        raise ValueError(f"unknown event type {kind!r}")
    rows[i], _ = move_toward(rows[i], z, gamma, cost, s.budget, s.workspace)
    if len(rows) > 1:
        _avoid_coincidence(rows, i, s.workspace)
    s.last_mover = ("A" if rows is s._a else "B", i)
    s.k += 1
    return s


@dataclass
class TrackingTrace:
    targets: np.ndarray
    winners: np.ndarray
    costs: np.ndarray
    positions: np.ndarray  # (steps + 1, n, q), row 0 initial
    target: MarkovTarget

    def window_average(self, window: int = 1000) -> np.ndarray:
        """Average of the last ``window`` costs (fewer at the start)."""
        return trailing_average(self.costs, window)


def trailing_average(x, window: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(x)])
    k = np.arange(1, len(x) + 1)
    lo = np.maximum(k - window, 0)
    return (c[k] - c[lo]) / (k - lo)


def run_tracking(s: CoverageState, t: MarkovTarget, steps: int, rng) -> TrackingTrace:
    """Alternate target moves and coverage updates; each cost is measured before its update."""
    rng = substream(rng, "markov-target")
    n, q = s.n, s.workspace.dim
    targets = np.empty((steps, 2))
    winners = np.empty(steps, dtype=np.int64)
    costs = np.empty(steps)
    positions = np.empty((steps + 1, n, q))
    positions[0] = s.positions
    for k in range(steps):
        t, z = markov_step(t, rng)
        targets[k] = z
        adaptive_update(s, z)
        winners[k] = s.last_winner
        costs[k] = s.last_cost
        positions[k + 1] = s._p
    return TrackingTrace(targets, winners, costs, positions, t)


def angular_positions(positions) -> np.ndarray:
    p = np.asarray(positions, float).reshape(-1, 2)
    return np.arctan2(p[:, 1], p[:, 0])
