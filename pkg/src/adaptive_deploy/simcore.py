"""Scenario files, run dispatch and trace output.

A scenario is a nested mapping (YAML on disk) checked against
:data:`SCHEMA`.  Sections listed in ``SCHEMA`` are merged key by key and
unknown keys are rejected; the small leaf mappings (workspace,
distribution, cost, stepsize, graph, service) are replaced whole and
checked by the constructors that consume them.
"""
from __future__ import annotations

import copy
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .consensus import CommGraph
from .coverage import (CoverageState, HeteroState, StepsizeSchedule, adaptive_update, hetero_update,
                       angular_positions, objective_estimate, trailing_average)
from .dtrp import DtrpConfig, default_generators, run_dtrp, run_light_traffic
from .events import (EVENT_TYPES, MarkovTarget, ServiceLaw, SpatialDistribution, TypedEventLaw,
                     markov_step, sample_locations, sample_typed, substream)
from .geometry import CostSpec, GeneralizedDiagram, Workspace, render_ownership_raster, write_raster
from .partition import PartitionState, partition_update
from .stats import batch_means_se, slope_with_stderr, trailing_window_stats

ALGORITHMS = ("coverage", "hetero", "track", "partition", "dtrp", "dtrp-light")
BUNDLED = Path(__file__).parent / "scenarios"

SCHEMA: dict[str, Any] = {
    "algorithm": "coverage",
    "seed": 0,
    "horizon": 1000,
    "workspace": {"kind": "box", "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
    "distribution": {"kind": "uniform"},
    "cost": {"kind": "quadratic"},
    "stepsize": {"kind": "harmonic", "c": 1.0, "d": 1.0},
    "graph": {"kind": "complete"},
    "robots": {"count": 2, "positions": None, "budget": None, "detection_radius": None,
               "transient": 0},
    "partition": {"generators": None, "rates": None},
    "hetero": {"count_a": 3, "count_b": 3, "positions_a": None, "positions_b": None,
               "cost_a": {"kind": "linear", "speed": 1.0}, "cost_b": {"kind": "linear", "speed": 1.0},
               "probabilities": [0.3, 0.3, 0.4],
               "distributions": {"a": {"kind": "uniform"}, "b": {"kind": "uniform"},
                                 "ab": {"kind": "uniform"}}},
    "target": {"radius": 1.0, "decay": 0.95, "noise": 0.5, "theta": 0.0},
    "dtrp": {"rate": 1.0, "service": {"kind": "deterministic", "mean": 0.5}, "speed": 1.0,
             "generators": None, "load": None},
    "output": {"trace_interval": 1, "objective_interval": 0, "objective_samples": 2000,
               "snapshot_interval": 0, "raster_resolution": 64, "window": 1000},
}
# sections whose keys are merged one by one; everything else is a leaf
SECTIONS = ("robots", "partition", "hetero", "target", "dtrp", "output")


class ValidationError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ------------------------------------------------------------------ scenarios

def _merge(base: dict, new: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in new.items():
        full = f"{path}{key}"
        if key not in base:
            raise ValidationError(full, "unknown key")
        if not path and key in SECTIONS:
            if not isinstance(val, dict):
                raise ValidationError(full, "expected a mapping")
            out[key] = _merge(base[key], val, full + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(raw: dict | None, overrides: dict[str, Any] | None = None, seed: int | None = None) -> dict:
    """Defaults, then the file contents, then dotted-key overrides, then the seed."""
    sc = _merge(SCHEMA, raw or {})
    for dotted, value in (overrides or {}).items():
        apply_override(sc, dotted, value)
    if seed is not None:
        sc["seed"] = int(seed)
    d = sc["dtrp"]
    if d["load"] is not None:
        # a load factor fixes the mean service time: rho = rate * mean / n
        try:
            mean = float(d["load"]) * sc["robots"]["count"] / float(d["rate"])
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValidationError("dtrp.load", str(exc)) from exc
        d["service"] = {**d["service"], "mean": mean}
    return sc


def apply_override(sc: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    if parts[0] not in SCHEMA:
        raise ValidationError(dotted, "unknown key")
    if parts[0] in SECTIONS and len(parts) > 1 and parts[1] not in SCHEMA[parts[0]]:
        raise ValidationError(dotted, "unknown key")
    node = sc
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ValidationError(text, "override must look like key=value")
    key, _, value = text.partition("=")
    return key.strip(), yaml.safe_load(value)


def load_scenario(path_or_name: str | Path) -> dict:
    p = Path(path_or_name)
    if not p.exists():
        candidate = BUNDLED / f"{path_or_name}.yaml"
        if not candidate.exists():
            raise FileNotFoundError(f"no scenario file or bundled scenario named {path_or_name!r}")
        p = candidate
    with open(p, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValidationError("<root>", "scenario file must contain a mapping")
    return data


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED.glob("*.yaml"))


def _field(name: str, fn, *args):
    try:
        return fn(*args)
    except ValidationError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ValidationError(name, str(exc)) from exc


def _workspace(d: dict) -> Workspace:
    d = dict(d)
    kind = d.pop("kind", "box")
    if kind == "interval":
        bounds = d.pop("bounds", [0.0, 1.0])
        ws = Workspace.interval(*bounds)
    elif kind == "box":
        ws = Workspace.box(d.pop("lower"), d.pop("upper"))
    elif kind == "polygon":
        ws = Workspace.polygon(d.pop("vertices"))
    else:
        raise ValueError(f"unknown workspace kind {kind!r}")
    if d:
        raise ValueError(f"unknown workspace keys {sorted(d)}")
    return ws


def _graph(d: dict, n: int, positions=None) -> CommGraph | None:
    d = dict(d)
    kind = d.pop("kind", "complete")
    if kind == "complete":
        g = None
    elif kind == "path":
        g = CommGraph.path(n)
    elif kind == "disk":
        g = CommGraph.disk(positions, float(d.pop("radius")))
    elif kind == "edges":
        g = CommGraph(n, tuple(tuple(e) for e in d.pop("edges")), d.pop("diam", None))
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    if d:
        raise ValueError(f"unknown graph keys {sorted(d)}")
    return g


def _points(value, count: int, Q: Workspace, seed: int, label: str) -> np.ndarray:
    if value is None:
        return sample_locations(SpatialDistribution.uniform(Q), substream(seed, label), count)
    p = np.asarray(value, float).reshape(-1, Q.dim)
    if len(p) != count:
        raise ValueError(f"expected {count} points, got {len(p)}")
    if not Q.contains_many(p, tol=1e-9).all():
        raise ValueError("points must lie in the workspace")
    return p


def _opt(x, default):
    return default if x is None else x


@dataclass
class Built:
    """Library objects constructed from a resolved scenario."""

    scenario: dict
    workspace: Workspace
    distribution: SpatialDistribution | None = None
    state: Any = None
    extra: dict = field(default_factory=dict)


def build(sc: dict) -> Built:
    """Validate a resolved scenario and construct the initial state."""
    alg = sc["algorithm"]
    if alg not in ALGORITHMS:
        raise ValidationError("algorithm", f"must be one of {', '.join(ALGORITHMS)}")
    if not isinstance(sc["seed"], int):
        raise ValidationError("seed", "must be an integer")
    if not isinstance(sc["horizon"], int) or sc["horizon"] < 0:
        raise ValidationError("horizon", "must be a nonnegative integer")
    out = sc["output"]
    for key in ("trace_interval", "window", "objective_samples", "raster_resolution"):
        if not isinstance(out[key], int) or out[key] < 1:
            raise ValidationError(f"output.{key}", "must be a positive integer")
    for key in ("objective_interval", "snapshot_interval"):
        if not isinstance(out[key], int) or out[key] < 0:
            raise ValidationError(f"output.{key}", "must be a nonnegative integer")
    Q = _field("workspace", _workspace, sc["workspace"])
    seed = sc["seed"]
    schedule = _field("stepsize", StepsizeSchedule.from_dict, sc["stepsize"])
    b = Built(sc, Q)
    rob = sc["robots"]

    if alg in ("coverage", "track", "partition", "dtrp", "dtrp-light"):
        n = rob["count"]
        if not isinstance(n, int) or n < 1:
            raise ValidationError("robots.count", "must be a positive integer")

    if alg in ("coverage", "partition", "dtrp", "dtrp-light"):
        b.distribution = _field("distribution", SpatialDistribution.from_dict, sc["distribution"], Q)

    if alg in ("coverage", "track"):
        cost = _field("cost", CostSpec.from_dict, sc["cost"])
        pos = _field("robots.positions", _points, rob["positions"], n, Q, seed, "initial-positions")
        graph = _field("graph", _graph, sc["graph"], n, pos)
        b.state = _field("robots", CoverageState, pos, Q, cost, schedule, _opt(rob["budget"], math.inf), 0,
                         graph, _opt(rob["detection_radius"], math.inf), rob["transient"])
        if alg == "track":
            t = sc["target"]
            b.extra["target"] = _field("target", lambda: MarkovTarget(
                float(t["radius"]), float(t["decay"]), float(t["noise"]), float(t["theta"])))
            if Q.dim != 2:
                raise ValidationError("workspace", "target tracking needs a planar workspace")
            ring = _field("target.radius", SpatialDistribution.ring, Q, t["radius"])
            b.distribution = ring

    elif alg == "partition":
        cost = _field("cost", CostSpec.from_dict, sc["cost"])
        part = sc["partition"]
        gens = part["generators"]
        gens = default_generators(Q, n) if gens is None else gens
        rates = part["rates"]
        rates = [1.0 / n] * n if rates is None else rates
        graph = _field("graph", _graph, sc["graph"], n, gens)
        _field("partition.generators", _points, gens, n, Q, seed, "generators")
        _field("partition.rates", _check_rates, rates, n)
        b.state = _field("partition", PartitionState, gens, rates, Q, cost, schedule, None, 0, graph)

    elif alg == "hetero":
        h = sc["hetero"]
        law = _field("hetero.distributions", lambda: TypedEventLaw(
            tuple(float(p) for p in h["probabilities"]),
            {k: SpatialDistribution.from_dict(h["distributions"][k], Q) for k in EVENT_TYPES}))
        b.extra["law"] = law
        pa = _field("hetero.positions_a", _points, h["positions_a"], h["count_a"], Q, seed, "initial-a")
        pb = _field("hetero.positions_b", _points, h["positions_b"], h["count_b"], Q, seed, "initial-b")
        b.state = _field("hetero", HeteroState, pa, pb, Q, CostSpec.from_dict(h["cost_a"]),
                         CostSpec.from_dict(h["cost_b"]), schedule, _opt(rob["budget"], math.inf))

    else:
        d = sc["dtrp"]
        service = _field("dtrp.service", lambda: ServiceLaw(**d["service"]))
        rate = _field("dtrp.rate", _positive, d["rate"])
        speed = _field("dtrp.speed", _positive, d["speed"])
        gens = None
        if alg == "dtrp":
            gens = default_generators(Q, n) if d["generators"] is None else \
                _field("dtrp.generators", _points, d["generators"], n, Q, seed, "generators")
            if len(np.unique(np.asarray(gens), axis=0)) != n:
                raise ValidationError("dtrp.generators", "generators must be distinct")
        pos = _field("robots.positions", _points, rob["positions"], n, Q, seed, "initial-positions")
        graph = _field("graph", _graph, sc["graph"], n, pos)
        b.state = DtrpConfig(Q, b.distribution, rate, service, n, speed, sc["horizon"], seed, schedule,
                             gens, pos, rob["budget"], graph)
    return b


def _check_rates(rates, n: int) -> None:
    r = [float(a) for a in rates]
    if len(r) != n:
        raise ValueError(f"expected {n} rates, got {len(r)}")
    if any(a <= 0 for a in r) or abs(math.fsum(r) - 1.0) > 1e-9:
        raise ValueError(f"rates must be positive and sum to 1 (sum is {math.fsum(r)!r})")


def _positive(x) -> float:
    x = float(x)
    if not x > 0:
        raise ValueError("must be positive")
    return x


def validate(sc_raw: dict, overrides=None, seed=None) -> dict:
    sc = resolve(sc_raw, overrides, seed)
    build(sc)
    return sc


# ------------------------------------------------------------------ traces

@dataclass
class Snapshot:
    k: int
    grid: np.ndarray
    n: int
    positions: np.ndarray


@dataclass
class RunTrace:
    scenario: dict
    columns: list
    rows: list
    summary: dict
    snapshots: list = field(default_factory=list)

    def header_block(self) -> str:
        text = yaml.safe_dump(self.scenario, sort_keys=True, default_flow_style=None)
        return "".join(f"# {line}\n" for line in text.splitlines())

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header_block())
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header_block())
        buf.write("key,value\n")
        for k, v in self.summary.items():
            buf.write(f"{k},{_fmt(v)}\n")
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "trace.csv", out / "summary.csv"]
        written[0].write_text(self.trace_csv(), encoding="utf-8")
        written[1].write_text(self.summary_csv(), encoding="utf-8")
        for snap in self.snapshots:
            written += write_snapshot(snap, out, self.header_block())
        return written


def write_snapshot(snap: Snapshot, out: Path, header: str) -> list[Path]:
    raster = out / f"snapshot_{snap.k:08d}.raster"
    with open(raster, "w", encoding="utf-8") as fh:
        fh.write(header)
        write_raster(snap.grid, snap.n, fh)
    pos = out / f"snapshot_{snap.k:08d}.positions"
    with open(pos, "w", encoding="utf-8") as fh:
        fh.write(header)
        for p in np.atleast_2d(snap.positions):
            fh.write(" ".join(_fmt(v) for v in p) + "\n")
    return [raster, pos]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _flat(points) -> list:
    return [float(x) for x in np.asarray(points, float).ravel()]


def _columns_points(prefix: str, n: int, q: int) -> list[str]:
    return [f"{prefix}{i}_{j}" for i in range(n) for j in range(q)]


# ------------------------------------------------------------------ summaries

def _indexed(columns: list, prefix: str) -> list[str]:
    """Columns named ``prefix`` followed by an index such as ``w3`` or ``p1_0``."""
    return [c for c in columns if re.fullmatch(rf"{prefix}\d+(_\d+)?", c)]


def summarize(sc: dict, columns: list, rows: list) -> dict:
    """Summary block computed from trace rows alone (plus the scenario)."""
    alg = sc["algorithm"]
    window = sc["output"]["window"]
    col = {c: i for i, c in enumerate(columns)}
    if alg in ("dtrp", "dtrp-light"):
        return _summarize_dtrp(sc, col, rows)
    summary: dict[str, Any] = {"algorithm": alg, "events": rows[-1][col["k"]] if rows else 0}
    if not rows:
        return summary
    last = rows[-1]
    if alg in ("coverage", "track", "partition", "hetero") and "cost" in col:
        costs = [r[col["cost"]] for r in rows if r[col["k"]] > 0]
        if costs:
            w = min(window, len(costs))
            mean, slope = trailing_window_stats(costs, w)
            summary["trailing_mean_cost"] = mean
            summary["trailing_cost_slope"] = slope
    if alg in ("coverage", "track"):
        ps = _indexed(columns, "p")
        summary["final_positions"] = [last[col[c]] for c in ps]
        if alg == "track":
            xy = np.array(summary["final_positions"], float).reshape(-1, 2)
            summary["mean_angle"] = float(np.mean(angular_positions(xy)))
        if alg == "coverage" and len(ps) and sc["workspace"].get("kind") == "interval":
            summary["final_positions_sorted"] = sorted(last[col[c]] for c in ps)
    elif alg == "partition":
        summary["final_weights"] = [last[col[c]] for c in _indexed(columns, "w")]
        summary["trailing_frequencies"] = [last[col[c]] for c in _indexed(columns, "f")]
        summary["weight_sum"] = math.fsum(summary["final_weights"])
    elif alg == "hetero":
        ab = [r[col["cost"]] for r in rows if r[col["type"]] == "ab"]
        summary["ab_events"] = len(ab)
        summary["ab_average_cost"] = float(np.mean(ab)) if ab else math.nan
        summary["final_positions_a"] = [last[col[c]] for c in _indexed(columns, "a")]
        summary["final_positions_b"] = [last[col[c]] for c in _indexed(columns, "b")]
    return summary


def _summarize_dtrp(sc: dict, col: dict, rows: list) -> dict:
    n = sc["robots"]["count"]
    d = sc["dtrp"]
    load = float(d["rate"]) * float(d["service"]["mean"]) / n
    sys_t = np.array([r[col["system"]] for r in rows], float)
    steady = sys_t[len(sys_t) // 2:]
    back = np.array([[r[col[f"backlog{i}"]] for i in range(n)] for r in rows], dtype=np.int64).reshape(-1, n)
    half = len(back) // 2
    out: dict[str, Any] = {"algorithm": sc["algorithm"], "events": len(rows), "load": load,
                           "saturated_updates": int(sum(bool(r[col["saturated"]]) for r in rows))}
    if len(steady):
        mean = float(steady.mean())
        out["mean_system_time"] = mean
        out["scaled_system_time"] = (1.0 - load) ** 2 * mean
        if len(steady) >= 40:
            out["stderr_system_time"] = batch_means_se(steady)
            out["slope"], out["slope_stderr"] = slope_with_stderr(steady)
        out["mean_wait"] = float(np.mean([r[col["wait"]] for r in rows[len(rows) // 2:]]))
    if half:
        out["max_backlog_first_half"] = int(back[:half].max())
        out["max_backlog_last_half"] = int(back[half:].max())
    return out


# ------------------------------------------------------------------ runs

def run(sc_raw: dict, overrides=None, seed=None, snapshot_at: int | None = None) -> RunTrace:
    """Run a scenario end to end; identical input gives an identical trace."""
    sc = resolve(sc_raw, overrides, seed)
    if snapshot_at is not None:
        sc["horizon"] = int(snapshot_at)
    b = build(sc)
    alg = sc["algorithm"]
    if alg in ("coverage", "track"):
        columns, rows, snaps = _run_coverage(b)
    elif alg == "partition":
        columns, rows, snaps = _run_partition(b)
    elif alg == "hetero":
        columns, rows, snaps = _run_hetero(b)
    else:
        columns, rows, snaps = _run_dtrp(b)
    if snapshot_at is not None:
        snaps = [s for s in snaps if s.k == snapshot_at] or _final_snapshot(b)
    return RunTrace(sc, columns, rows, summarize(sc, columns, rows), snaps)


def _keep(k: int, horizon: int, interval: int) -> bool:
    return k == 0 or k == horizon or k % interval == 0


def _coverage_snapshot(b: Built, k: int) -> list[Snapshot]:
    if b.workspace.dim != 2:
        return []
    s = b.state
    d = GeneralizedDiagram(s.positions, np.zeros(s.n), s.cost)
    return [Snapshot(k, render_ownership_raster(d, b.workspace, b.scenario["output"]["raster_resolution"]),
                     s.n, s.positions)]


def _partition_snapshot(b: Built, k: int) -> list[Snapshot]:
    if b.workspace.dim != 2:
        return []
    s = b.state
    return [Snapshot(k, render_ownership_raster(s.diagram(), b.workspace,
                                                b.scenario["output"]["raster_resolution"]), s.n, s.generators)]


def _final_snapshot(b: Built) -> list[Snapshot]:
    alg = b.scenario["algorithm"]
    k = b.scenario["horizon"]
    if alg in ("coverage", "track"):
        return _coverage_snapshot(b, k)
    if alg == "partition":
        return _partition_snapshot(b, k)
    if alg == "dtrp" and b.workspace.dim == 2:
        res = b.extra["result"]
        d = GeneralizedDiagram(b.extra["generators"], res.weights, CostSpec("quadratic"))
        return [Snapshot(k, render_ownership_raster(d, b.workspace, b.scenario["output"]["raster_resolution"]),
                         len(res.weights), res.references)]
    return []


def _run_coverage(b: Built):
    sc, s, Q = b.scenario, b.state, b.workspace
    out = sc["output"]
    N, q = sc["horizon"], Q.dim
    columns = ["k"] + [f"z{j}" for j in range(q)] + ["winner", "stepsize", "cost"] + \
        _columns_points("p", s.n, q) + ["objective"]
    rows = [[0] + [None] * q + [None, None, None] + _flat(s.positions) + [None]]
    snaps = []
    if sc["algorithm"] == "track":
        target = b.extra["target"]
        trng = substream(sc["seed"], "markov-target")
        zs = None
    else:
        zs = sample_locations(b.distribution, substream(sc["seed"], "events"), N).tolist() if N else []
    for k in range(1, N + 1):
        if zs is None:
            target, z = markov_step(target, trng)
            z = z.tolist()
        else:
            z = zs[k - 1]
        adaptive_update(s, z)
        if _keep(k, N, out["trace_interval"]) or (out["objective_interval"] and k % out["objective_interval"] == 0):
            obj = None
            if out["objective_interval"] and k % out["objective_interval"] == 0:
                obj = objective_estimate(s.positions, b.distribution, s.cost, out["objective_samples"],
                                         sc["seed"])[0]
            rows.append([k] + list(z) + [s.last_winner, s.last_stepsize, s.last_cost] + _flat(s._p) + [obj])
        if out["snapshot_interval"] and k % out["snapshot_interval"] == 0:
            snaps += _coverage_snapshot(b, k)
    return columns, rows, snaps


def _run_partition(b: Built):
    sc, s, Q = b.scenario, b.state, b.workspace
    out = sc["output"]
    N, q, n, window = sc["horizon"], Q.dim, s.n, out["window"]
    columns = ["k"] + [f"z{j}" for j in range(q)] + ["winner", "stepsize", "cost"] + \
        [f"w{i}" for i in range(n)] + [f"f{i}" for i in range(n)]
    rows = [[0] + [None] * q + [None, None, None] + list(s.weights) + [None] * n]
    zs = sample_locations(b.distribution, substream(sc["seed"], "events"), N).tolist() if N else []
    recent: list[int] = []
    counts = [0] * n
    snaps = []
    for k, z in enumerate(zs, start=1):
        gamma = s.schedule(s.k)
        partition_update(s, z)
        i = s.last_winner
        recent.append(i)
        counts[i] += 1
        if len(recent) > window:
            counts[recent[-window - 1]] -= 1
        m = min(len(recent), window)
        if _keep(k, N, out["trace_interval"]):
            cost = float(s.cost(math.dist(z, s._g[i])))
            rows.append([k] + list(z) + [i, gamma, cost] + list(s.weights) + [c / m for c in counts])
        if out["snapshot_interval"] and k % out["snapshot_interval"] == 0:
            snaps += _partition_snapshot(b, k)
    return columns, rows, snaps


def _run_hetero(b: Built):
    sc, s, Q = b.scenario, b.state, b.workspace
    out = sc["output"]
    N, q = sc["horizon"], Q.dim
    columns = ["k", "type"] + [f"z{j}" for j in range(q)] + ["mover_group", "mover", "stepsize", "cost"] + \
        _columns_points("a", len(s._a), q) + _columns_points("b", len(s._b), q)
    rows = [[0, None] + [None] * q + [None, None, None, None] + _flat(s._a) + _flat(s._b)]
    rng = substream(sc["seed"], "typed-events")
    for k in range(1, N + 1):
        kind, z = sample_typed(b.extra["law"], rng)
        gamma = s.schedule(s.k)
        hetero_update(s, kind, z)
        if _keep(k, N, out["trace_interval"]) or kind == "ab":
            rows.append([k, kind] + z.tolist() + [s.last_mover[0], s.last_mover[1], gamma, s.last_cost]
                        + _flat(s._a) + _flat(s._b))
    return columns, rows, []


def _run_dtrp(b: Built):
    sc, cfg = b.scenario, b.state
    res = run_dtrp(cfg) if sc["algorithm"] == "dtrp" else run_light_traffic(cfg)
    b.extra["result"] = res
    b.extra["generators"] = cfg.generators if cfg.generators is not None else \
        default_generators(cfg.workspace, cfg.n)
    n = cfg.n
    columns = ["k", "arrival", "robot", "wait", "service", "system", "completion", "saturated"] + \
        [f"backlog{i}" for i in range(n)]
    rows = []
    for e in res.events:
        rows.append([e.k, e.time, e.robot, e.wait, e.service, e.system_time, e.completion, e.saturated]
                    + res.outstanding[e.k - 1].tolist())
    snaps = []
    if sc["output"]["snapshot_interval"]:
        snaps = _final_snapshot(b)
    return columns, rows, snaps


def cumulative_ab_cost(trace: RunTrace) -> np.ndarray:
    """Running average cost of the ``ab`` events seen so far, one value per ``ab`` event, with event indices."""
    col = {c: i for i, c in enumerate(trace.columns)}
    ab = [(r[col["k"]], r[col["cost"]]) for r in trace.rows if r[col["type"]] == "ab"]
    if not ab:
        return np.empty((0, 2))
    k = np.array([a[0] for a in ab], float)
    c = np.array([a[1] for a in ab], float)
    return np.column_stack([k, np.cumsum(c) / np.arange(1, len(c) + 1)])


__all__ = [
    "SCHEMA", "ALGORITHMS", "ValidationError", "RunTrace", "Snapshot", "resolve", "validate", "build", "run",
    "summarize", "load_scenario", "bundled_scenarios", "parse_override", "trailing_window_stats",
    "trailing_average", "cumulative_ab_cost",
]
