"""Adaptive policies for the dynamic traveling repairman problem.

Heavy-traffic policy: each arrival is assigned to a power cell whose
weights follow the load-balancing update with equal rates ``1/n``; the
owner also nudges its reference point toward the event and backlogs it.
Each robot serves its backlog in batches, one 2-opt-improved tour at a
time, and returns to its reference point when it has nothing to do.

Light-traffic policy: reference points follow the coverage update with
``f(x) = x / v`` and events go to the robot with the closest reference
point, served first come first served.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .consensus import CommGraph, winner
from .coverage import CoverageState, StepsizeSchedule, adaptive_update, move_toward
from .events import PoissonStream, ServiceLaw, SpatialDistribution, next_arrival, sample_locations, substream
from .geometry import CostSpec, Workspace, check_in
from .partition import apply_weight_step
from .stats import batch_means_se, slope_with_stderr

TO_REFERENCE, IDLE, TRAVELING, SERVICING = "to-reference", "idle", "traveling", "servicing"
SWAP_CAP_PER_POINT = 50
_UNIT_COST = CostSpec("linear", speed=1.0)


# --------------------------------------------------------------------- tours

def tour_length(points, order, closed: bool = True, start=None) -> float:
    pts = np.asarray(points, float).reshape(len(points), -1)[list(order)]
    if start is not None:
        pts = np.vstack([np.asarray(start, float)[None, :], pts])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    if closed and start is None and len(pts) > 1:
        seg += np.linalg.norm(pts[-1] - pts[0])
    return float(seg)


def nearest_neighbor_order(D: np.ndarray, first: int) -> list[int]:
    n = len(D)
    order = [first]
    left = np.ones(n, dtype=bool)
    left[first] = False
    for _ in range(n - 1):
        row = np.where(left, D[order[-1]], np.inf)
        nxt = int(np.argmin(row))
        order.append(nxt)
        left[nxt] = False
    return order


def two_opt(order: list[int], D: np.ndarray, max_swaps: int | None = None) -> tuple[list[int], int, bool]:
    """Best-improvement 2-opt on a closed tour.

    Returns the improved order, the number of swaps made and whether the
    swap cap stopped the search before a local optimum was reached.
    """
    t = np.asarray(order, dtype=np.int64)
    n = len(t)
    if n < 4:
        return list(order), 0, False
    if max_swaps is None:
        max_swaps = SWAP_CAP_PER_POINT * n
    i_idx, j_idx = np.triu_indices(n, k=2)
    keep = ~((i_idx == 0) & (j_idx == n - 1))
    i_idx, j_idx = i_idx[keep], j_idx[keep]
    swaps = 0
    while True:
        nxt = np.roll(t, -1)
        edge = D[t, nxt]
        delta = (D[t[i_idx], t[j_idx]] + D[nxt[i_idx], nxt[j_idx]]
                 - edge[i_idx] - edge[j_idx])
        best = int(np.argmin(delta))
        if delta[best] >= -1e-12:
            return t.tolist(), swaps, False
        if swaps >= max_swaps:
            return t.tolist(), swaps, True
        i, j = i_idx[best], j_idx[best]
        t[i + 1:j + 1] = t[i + 1:j + 1][::-1].copy()
        swaps += 1


def tsp_tour(points, start=None, stats: dict | None = None) -> list[int]:
    """Visiting order of ``points``: nearest neighbour from ``start``, then 2-opt.

    The closed tour is rotated to begin at the point nearest ``start`` and
    oriented so that the open path from there is the shorter one.
    """
    pts = np.asarray(points, float)
    if pts.size == 0:
        raise ValueError("tsp_tour needs at least one point")
    pts = pts.reshape(len(pts), -1)
    n = len(pts)
    if n == 1:
        return [0]
    D = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    if start is None:
        first = 0
    else:
        first = int(np.argmin(np.linalg.norm(pts - np.asarray(start, float), axis=1)))
    order = nearest_neighbor_order(D, first)
    order, swaps, capped = two_opt(order, D)
    if stats is not None:
        stats["swaps"] = stats.get("swaps", 0) + swaps
        stats["capped"] = stats.get("capped", 0) + int(capped)
    r = order.index(first)
    order = order[r:] + order[:r]
    if n > 2 and D[order[0], order[1]] > D[order[0], order[-1]]:
        order = [order[0]] + order[:0:-1]
    return order


# --------------------------------------------------------------------- robots

@dataclass
class Event:
    k: int
    time: float
    location: list
    service: float
    robot: int = -1
    service_start: float = math.nan
    completion: float = math.nan
    saturated: bool = False  # the reference update for this arrival hit its budget

    @property
    def wait(self) -> float:
        return self.service_start - self.time

    @property
    def system_time(self) -> float:
        return self.completion - self.time


@dataclass
class DtrpRobot:
    id: int
    generator: list
    reference: list
    position: list
    speed: float = 1.0
    weight: float = 0.0
    backlog: list = field(default_factory=list)
    tour: list = field(default_factory=list)
    mode: str = IDLE
    service_left: float = 0.0
    fifo: bool = False
    distance: float = 0.0
    tour_stats: dict = field(default_factory=dict)

    @property
    def outstanding(self) -> int:
        return len(self.backlog) + len(self.tour)


def _advance(x: list, target: list, reach: float) -> tuple[list, float, bool]:
    """Move ``x`` toward ``target`` by at most ``reach``; returns (x, distance moved, arrived)."""
    d = math.dist(x, target)
    if d <= reach:
        return list(target), d, True
    return [a + reach * (b - a) / d for a, b in zip(x, target)], reach, False


def dtrp_robot_step(r: DtrpRobot, now: float, dt: float) -> list[Event]:
    """Advance robot ``r`` from ``now`` by ``dt`` and return the events it completed.

    1. nothing to do: head for the reference point and wait there;
    2. empty tour, nonempty backlog: the backlog becomes the new tour;
    3. otherwise travel to the next tour stop and dwell for its service time.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t, end = now, now + dt
    done = []
    while True:
        if not r.tour:
            if r.backlog:
                batch, r.backlog = r.backlog, []
                if r.fifo or len(batch) == 1:
                    r.tour = batch
                else:
                    order = tsp_tour([e.location for e in batch], start=r.position, stats=r.tour_stats)
                    r.tour = [batch[i] for i in order]
                r.mode = TRAVELING
                continue
            if r.position == r.reference:
                r.mode = IDLE
                break
            r.position, moved, arrived = _advance(r.position, r.reference, r.speed * (end - t))
            r.distance += moved
            r.mode = IDLE if arrived else TO_REFERENCE
            break
        ev = r.tour[0]
        if r.mode == SERVICING:
            if r.service_left <= end - t:
                t += r.service_left
                r.service_left = 0.0
                ev.completion = t
                done.append(ev)
                r.tour.pop(0)
                r.mode = TRAVELING
                continue
            r.service_left -= end - t
            break
        r.position, moved, arrived = _advance(r.position, ev.location, r.speed * (end - t))
        r.distance += moved
        r.mode = TRAVELING
        if not arrived:
            break
        t = min(t + moved / r.speed, end)
        ev.service_start = t
        r.service_left = ev.service
        r.mode = SERVICING
    return done


# --------------------------------------------------------------------- fleet

@dataclass
class DtrpFleet:
    robots: list
    workspace: Workspace
    schedule: StepsizeSchedule
    budget: float = math.inf
    graph: CommGraph | None = None
    k: int = 0
    weight_sum: float = 0.0
    saturated: int = 0

    @property
    def n(self) -> int:
        return len(self.robots)

    @property
    def weights(self) -> list:
        return [r.weight for r in self.robots]


def dtrp_on_event(fleet: DtrpFleet, ev: Event, graph: CommGraph | None = None) -> int:
    """Assign ``ev`` to the owner of its power cell and update weights and reference point.

    The owner's weight drops by ``gamma (n - 1) / n`` and every other weight
    rises by ``gamma / n``; returns the owner's index.
    """
    z = check_in(fleet.workspace, ev.location).tolist()
    ev.location = z
    scores = [math.dist(z, r.generator) ** 2 - r.weight for r in fleet.robots]
    i = winner(scores, graph if graph is not None else fleet.graph)
    gamma = fleet.schedule(fleet.k)
    n = fleet.n
    new = apply_weight_step(fleet.weights, [1.0 / n] * n, i, gamma, fleet.weight_sum)
    for r, w in zip(fleet.robots, new):
        r.weight = w
    r = fleet.robots[i]
    r.reference, hit = move_toward(r.reference, z, gamma, _UNIT_COST, fleet.budget, fleet.workspace)
    fleet.saturated += hit
    ev.saturated = bool(hit)
    ev.robot = i
    r.backlog.append(ev)
    fleet.k += 1
    return i


# --------------------------------------------------------------------- runs

@dataclass
class DtrpConfig:
    workspace: Workspace
    spatial: SpatialDistribution
    rate: float
    service: ServiceLaw
    n: int = 1
    speed: float = 1.0
    events: int = 10_000
    seed: int = 0
    schedule: StepsizeSchedule = field(default_factory=lambda: StepsizeSchedule("harmonic", 0.1, 0.01))
    generators: np.ndarray | None = None
    positions: np.ndarray | None = None
    budget: float | None = None
    graph: CommGraph | None = None

    @property
    def load(self) -> float:
        return self.rate * self.service.mean / self.n


@dataclass
class DtrpResult:
    events: list            # completed events ordered by arrival index
    completions: list       # the same events in completion order
    outstanding: np.ndarray  # (arrivals, n) per-robot outstanding count right after each arrival
    load: float
    weights: np.ndarray
    references: np.ndarray
    saturated: int
    tour_swaps: int
    capped_tours: int

    def system_times(self) -> np.ndarray:
        return np.array([e.system_time for e in self.events])

    def steady(self) -> np.ndarray:
        """System times of the last half of events, burn-in discarded."""
        s = self.system_times()
        return s[len(s) // 2:]

    def summary(self) -> dict:
        s = self.steady()
        mean = float(s.mean()) if len(s) else math.nan
        se = batch_means_se(s) if len(s) >= 40 else math.nan
        slope, slope_se = slope_with_stderr(s) if len(s) >= 40 else (math.nan, math.nan)
        half = len(self.outstanding) // 2
        return {
            "load": self.load,
            "events": len(self.events),
            "mean_system_time": mean,
            "stderr_system_time": se,
            "scaled_system_time": (1.0 - self.load) ** 2 * mean,
            "slope": slope,
            "slope_stderr": slope_se,
            "max_backlog_first_half": int(self.outstanding[:half].max()) if half else 0,
            "max_backlog_last_half": int(self.outstanding[half:].max()) if len(self.outstanding) else 0,
            "saturated_updates": self.saturated,
            "capped_tours": self.capped_tours,
        }


def default_generators(Q: Workspace, n: int, corner_fraction: float = 0.2) -> np.ndarray:
    """Distinct low-discrepancy points in the lower-left corner of the bounding box."""
    from scipy.stats import qmc

    u = qmc.Halton(d=Q.dim, scramble=False).random(n + 1)[1:]
    return Q.lower + corner_fraction * u * (Q.upper - Q.lower)


def _initial_positions(cfg: DtrpConfig) -> np.ndarray:
    if cfg.positions is not None:
        return np.asarray(cfg.positions, float).reshape(cfg.n, -1)
    rng = substream(cfg.seed, "initial-positions")
    return sample_locations(SpatialDistribution.uniform(cfg.workspace), rng, cfg.n)


def _warn_load(load: float) -> None:
    if load >= 1.0:
        warnings.warn(f"load factor {load:.3f} >= 1: no steady state exists", RuntimeWarning, stacklevel=3)


def _simulate(robots: list, cfg: DtrpConfig, assign) -> tuple[list, np.ndarray]:
    stream = PoissonStream(cfg.rate, cfg.spatial, cfg.service, seed=cfg.seed)
    now = 0.0
    completed: list[Event] = []
    outstanding = np.zeros((cfg.events, len(robots)), dtype=np.int64)
    for k in range(cfg.events):
        t, z, s = next_arrival(stream)
        if t > now:
            for r in robots:
                completed += dtrp_robot_step(r, now, t - now)
            now = t
        ev = Event(k + 1, t, z.tolist(), s)
        assign(ev)
        outstanding[k] = [r.outstanding for r in robots]
    for r in robots:
        if r.outstanding:
            completed += dtrp_robot_step(r, now, math.inf)
    completed.sort(key=lambda e: (e.completion, e.robot, e.k))
    return completed, outstanding


def run_dtrp(cfg: DtrpConfig) -> DtrpResult:
    """Heavy-traffic adaptive policy driven by Poisson arrivals, then drained."""
    _warn_load(cfg.load)
    Q = cfg.workspace
    gens = default_generators(Q, cfg.n) if cfg.generators is None else np.asarray(cfg.generators, float)
    pos = _initial_positions(cfg)
    robots = [DtrpRobot(i, gens[i].tolist(), pos[i].tolist(), pos[i].tolist(), cfg.speed)
              for i in range(cfg.n)]
    budget = cfg.budget if cfg.budget is not None else cfg.speed / cfg.rate
    fleet = DtrpFleet(robots, Q, cfg.schedule, budget, cfg.graph)
    completed, outstanding = _simulate(robots, cfg, lambda ev: dtrp_on_event(fleet, ev))
    return DtrpResult(
        sorted(completed, key=lambda e: e.k), completed, outstanding, cfg.load,
        np.array(fleet.weights), np.array([r.reference for r in robots]), fleet.saturated,
        sum(r.tour_stats.get("swaps", 0) for r in robots),
        sum(r.tour_stats.get("capped", 0) for r in robots),
    )


def run_light_traffic(cfg: DtrpConfig) -> DtrpResult:
    """Closest-reference assignment with coverage updates for ``f(x) = x / v``."""
    _warn_load(cfg.load)
    Q = cfg.workspace
    pos = _initial_positions(cfg)
    budget = cfg.budget if cfg.budget is not None else cfg.speed / cfg.rate
    cov = CoverageState(pos, Q, CostSpec("linear", speed=cfg.speed), cfg.schedule, budget, graph=cfg.graph)
    robots = [DtrpRobot(i, pos[i].tolist(), pos[i].tolist(), pos[i].tolist(), cfg.speed, fifo=True)
              for i in range(cfg.n)]

    def assign(ev: Event) -> int:
        before = cov.saturated
        adaptive_update(cov, ev.location)
        ev.saturated = cov.saturated > before
        i = cov.last_winner
        robots[i].reference = list(cov._p[i])
        ev.robot = i
        robots[i].backlog.append(ev)
        return i

    completed, outstanding = _simulate(robots, cfg, assign)
    return DtrpResult(
        sorted(completed, key=lambda e: e.k), completed, outstanding, cfg.load,
        np.zeros(cfg.n), cov.positions, cov.saturated, 0, 0,
    )
