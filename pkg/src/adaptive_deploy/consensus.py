"""Synchronous FloodMin on an undirected communication graph.

Each agent starts with its own value, and in every round sends its current
minimum to all neighbours and keeps the smallest value it has seen.  After
``diam`` rounds every agent holds the global minimum; the agents whose value
is unchanged are exactly the minimizers.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

INF = math.inf


class NoObserverError(RuntimeError):
    """No agent reported a finite value, so nobody detected the event."""


class DisconnectedGraphError(ValueError):
    pass


def _bfs_eccentricity(adj: list[list[int]], s: int) -> int:
    dist = [-1] * len(adj)
    dist[s] = 0
    q = deque([s])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    if min(dist) < 0:
        raise DisconnectedGraphError("communication graph is not connected")
    return max(dist)


@dataclass
class CommGraph:
    n: int
    edges: tuple
    diam: int | None = None
    adjacency: list = field(init=False, repr=False)
    complete: bool = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one agent")
        adj: list[set] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"bad edge ({u}, {v})")
            adj[u].add(v)
            adj[v].add(u)
        self.adjacency = [sorted(a) for a in adj]
        self.edges = tuple(sorted({(min(u, v), max(u, v)) for u, v in self.edges}))
        true_diam = max(_bfs_eccentricity(self.adjacency, s) for s in range(self.n))
        if self.diam is None:
            self.diam = true_diam
        elif self.diam < true_diam:
            raise ValueError(f"diameter bound {self.diam} is below the graph diameter {true_diam}")
        self.complete = len(self.edges) == self.n * (self.n - 1) // 2

    @classmethod
    def complete_graph(cls, n: int) -> "CommGraph":
        return cls(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def path(cls, n: int) -> "CommGraph":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def disk(cls, positions, radius: float) -> "CommGraph":
        """Link agents closer than ``radius``; raises if the result is disconnected."""
        p = np.asarray(positions, float).reshape(len(positions), -1)
        d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
        n = len(p)
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if d[i, j] <= radius)
        return cls(n, edges)

    @property
    def directed_edges(self) -> int:
        return 2 * len(self.edges)


@dataclass
class FloodMinTrace:
    rounds: list  # rounds[r][i] = value held by agent i after round r (round 0 = initial)
    flags: list
    messages: int

    def write_csv(self, fh: TextIO, event: int | None = None) -> None:
        if event is None:
            fh.write("round,agent,value\n")
        for r, vals in enumerate(self.rounds):
            for i, v in enumerate(vals):
                prefix = "" if event is None else f"{event},"
                fh.write(f"{prefix}{r},{i},{v!r}\n")


def floodmin_trace(values: Sequence[float], g: CommGraph) -> FloodMinTrace:
    vals = [float(v) for v in values]
    if len(vals) != g.n:
        raise ValueError(f"expected {g.n} values, got {len(vals)}")
    if all(v == INF for v in vals):
        raise NoObserverError("no agent observed the event")
    adj = g.adjacency
    d = list(vals)
    rounds = [list(d)]
    for _ in range(g.diam):
        # synchronous: every agent reads the previous round's values
        d = [min([d[i]] + [d[j] for j in adj[i]]) for i in range(g.n)]
        rounds.append(d)
    flags = [d[i] == vals[i] for i in range(g.n)]
    return FloodMinTrace(rounds, flags, g.directed_edges * g.diam)


def floodmin(values: Sequence[float], g: CommGraph) -> list[bool]:
    vals = [float(v) for v in values]
    if len(vals) != g.n:
        raise ValueError(f"expected {g.n} values, got {len(vals)}")
    if all(v == INF for v in vals):
        raise NoObserverError("no agent observed the event")
    adj = g.adjacency
    d = vals
    for _ in range(g.diam):
        d = [min(d[i], min((d[j] for j in adj[i]), default=INF)) for i in range(g.n)]
    return [d[i] == vals[i] for i in range(g.n)]


def winner(values: Sequence[float], g: CommGraph | None = None) -> int:
    """Lowest-index agent flagged by FloodMin.

    With ``g`` omitted or complete the flood is skipped and a plain argmin is
    returned; both paths give the same index.
    """
    if g is None or g.complete:
        vals = [float(v) for v in values]
        best = min(vals)
        if best == INF:
            raise NoObserverError("no agent observed the event")
        return vals.index(best)
    return floodmin(values, g).index(True)
