"""Adaptive load balancing with generalized Voronoi (power) cells.

Generators stay fixed; only the cell weights move.  Each event is owned by
the cell minimizing ``f(|z - g_i|) - w_i``.  The owner lowers its weight by
``gamma (1 - a_i)`` and every other robot raises its weight by
``gamma a_j``, a stochastic supergradient ascent step on the concave dual

    h(w) = E[min_i f(|Z - g_i|) - w_i] + sum_i a_i w_i,

whose maximizers give cells of probability exactly ``a_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .consensus import CommGraph, winner
from .coverage import StepsizeSchedule, _event, _to_rows
from .events import SpatialDistribution, sample_locations, substream
from .geometry import CostSpec, GeneralizedDiagram, estimate_cell_measures

PZ_LABEL = "pz-samples"


class PartitionState:
    """Fixed generators, zero-sum weights and target utilization rates."""

    def __init__(self, generators, rates, workspace, cost: CostSpec | None = None,
                 schedule: StepsizeSchedule | None = None, weights=None, k: int = 0,
                 graph: CommGraph | None = None):
        self.workspace = workspace
        self._g = _to_rows(generators, workspace.dim)
        n = len(self._g)
        if len({tuple(g) for g in self._g}) != n:
            raise ValueError("generators must be pairwise distinct")
        rates = [float(a) for a in rates]
        if len(rates) != n:
            raise ValueError("one rate per generator required")
        if any(a <= 0 for a in rates) or abs(math.fsum(rates) - 1.0) > 1e-9:
            raise ValueError("rates must be positive and sum to 1")
        self.rates = rates
        self.cost = cost or CostSpec()
        self.schedule = schedule or StepsizeSchedule()
        self.weights = [0.0] * n if weights is None else [float(w) for w in weights]
        if len(self.weights) != n:
            raise ValueError("one weight per generator required")
        self.weight_sum = math.fsum(self.weights)
        self.k = k
        if graph is not None and graph.n != n:
            raise ValueError("graph size differs from the generator count")
        self.graph = graph
        self.last_winner = -1

    @property
    def n(self) -> int:
        return len(self._g)

    @property
    def generators(self) -> np.ndarray:
        return np.array(self._g)

    def diagram(self) -> GeneralizedDiagram:
        return GeneralizedDiagram(self.generators, np.array(self.weights), self.cost)

    def scores(self, z: list) -> list[float]:
        f = self.cost
        return [float(f(math.dist(z, g))) - w for g, w in zip(self._g, self.weights)]


def apply_weight_step(weights: list, rates: list, i: int, gamma: float, total: float = 0.0) -> list:
    """Winner ``i`` gets ``gamma (a_i - 1)``, others ``gamma a_j``.

    The increments cancel exactly in real arithmetic; to keep the weights
    summing to ``total`` despite rounding, the winner's new weight is set to
    ``total`` minus the compensated sum of the others.
    """
    new = [w + gamma * a for w, a in zip(weights, rates)]
    new[i] = 0.0
    new[i] = total - math.fsum(new)
    return new


def partition_update(s: PartitionState, z, graph: CommGraph | None = None) -> PartitionState:
    z = _event(s.workspace, z)
    i = winner(s.scores(z), graph if graph is not None else s.graph)
    s.weights = apply_weight_step(s.weights, s.rates, i, s.schedule(s.k), s.weight_sum)
    s.last_winner = i
    s.k += 1
    return s


def dual_value(s: PartitionState, dist: SpatialDistribution, m: int, seed) -> tuple[float, float]:
    """Sampled ``h(w)`` and its standard error.

    Draws the same samples as :func:`deterministic_supergradient` for equal
    seeds, so the two are exactly consistent on the empirical measure.
    """
    zs = sample_locations(dist, substream(seed, PZ_LABEL), m)
    d = s.diagram()
    vals = d.scores(zs).min(axis=1)
    linear = math.fsum(a * w for a, w in zip(s.rates, s.weights))
    se = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return float(vals.mean()) + linear, se


def deterministic_supergradient(s: PartitionState, dist: SpatialDistribution, m: int, seed) -> np.ndarray:
    """``a_i - P(cell_i)`` with the cell measures estimated from ``m`` samples."""
    measures = estimate_cell_measures(s.diagram(), dist, m, substream(seed, PZ_LABEL))
    return np.asarray(s.rates) - measures


@dataclass
class PartitionTrace:
    events: np.ndarray
    winners: np.ndarray
    weights: np.ndarray  # (N + 1, n), row 0 initial
    window: int

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    def cumulative_frequencies(self) -> np.ndarray:
        """Row k: win frequencies over events 1..k+1."""
        onehot = np.zeros((len(self.winners), self.n))
        onehot[np.arange(len(self.winners)), self.winners] = 1.0
        return np.cumsum(onehot, axis=0) / np.arange(1, len(self.winners) + 1)[:, None]

    def trailing_frequencies(self, window: int | None = None) -> np.ndarray:
        """Row k: win frequencies over the last ``window`` events up to k+1."""
        window = window or self.window
        onehot = np.zeros((len(self.winners) + 1, self.n))
        onehot[np.arange(1, len(self.winners) + 1), self.winners] = 1.0
        c = np.cumsum(onehot, axis=0)
        k = np.arange(1, len(self.winners) + 1)
        lo = np.maximum(k - window, 0)
        return (c[k] - c[lo]) / (k - lo)[:, None]

    def final_frequencies(self, window: int | None = None) -> np.ndarray:
        window = window or self.window
        tail = self.winners[-window:]
        return np.bincount(tail, minlength=self.n) / len(tail)

    def trailing_weights(self, window: int | None = None) -> np.ndarray:
        """Mean weight vector over the last ``window`` updates."""
        window = window or self.window
        return self.weights[-window:].mean(axis=0)


def run_partition(s: PartitionState, dist: SpatialDistribution, n_events: int, seed,
                  window: int = 1000) -> PartitionTrace:
    rng = substream(seed, "events")
    zs = sample_locations(dist, rng, n_events) if n_events else np.empty((0, s.workspace.dim))
    winners = np.empty(n_events, dtype=np.int64)
    weights = np.empty((n_events + 1, s.n))
    weights[0] = s.weights
    for k, z in enumerate(zs.tolist()):
        partition_update(s, z)
        winners[k] = s.last_winner
        weights[k + 1] = s.weights
    return PartitionTrace(zs, winners, weights, window)
