import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_deploy.events import (DegenerateDistributionError, MarkovTarget, PoissonStream, ServiceLaw,
                                    SpatialDistribution, TypedEventLaw, markov_step, next_arrival,
                                    sample_location, sample_locations, sample_typed, substream)
from adaptive_deploy.geometry import Workspace

SQUARE = Workspace.unit_square()
BIG = Workspace.box([0, 0], [25, 25])
CENTERS = {"a": (20.0, 20.0), "b": (8.0, 20.0), "ab": (20.0, 8.0)}


def _blob(center, std=1.0):
    return SpatialDistribution.from_dict(
        {"kind": "mixture", "components": [{"mean": list(center), "std": std, "weight": 1.0}]}, BIG)


def test_uniform_mean():
    z = sample_locations(SpatialDistribution.uniform(SQUARE), substream(0, "t"), 10 ** 6)
    assert np.allclose(z.mean(axis=0), [0.5, 0.5], atol=0.002)
    assert SQUARE.contains_many(z).all()


def test_truncated_mixture_stays_near_center():
    std = 0.01
    z = sample_locations(_blob((20.0, 8.0), std), substream(1, "t"), 20_000)
    r = np.linalg.norm(z - [20, 8], axis=1)
    # radial 2-D Gaussian: P(r <= 3 std) = 1 - exp(-4.5)
    assert np.mean(r <= 3 * std) == pytest.approx(1 - math.exp(-4.5), abs=0.003)
    assert np.all(r <= 6 * std)
    assert np.all(np.abs(z.mean(axis=0) - [20, 8]) <= 3 * std / math.sqrt(len(z)))
    assert BIG.contains_many(z).all()


def test_mixture_truncated_at_boundary():
    Q = Workspace.interval(0, 1)
    d = SpatialDistribution.from_dict({"kind": "mixture", "components": [{"mean": [0.0], "std": 0.5}]}, Q)
    z = sample_locations(d, substream(2, "t"), 5000)
    assert Q.contains_many(z).all()


def test_ring_norm():
    z = sample_locations(SpatialDistribution.ring(Workspace.box([-2, -2], [2, 2]), 1.0), substream(3, "t"), 1000)
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)


def test_polygon_uniform_membership():
    hexagon = Workspace.polygon([[1, 0], [0.5, 0.8], [-0.5, 0.8], [-1, 0], [-0.5, -0.8], [0.5, -0.8]])
    z = sample_locations(SpatialDistribution.uniform(hexagon), substream(4, "t"), 5000)
    assert hexagon.contains_many(z).all()
    assert np.allclose(z.mean(axis=0), 0.0, atol=0.03)


def test_rejection_cap():
    d = SpatialDistribution.from_dict(
        {"kind": "mixture", "components": [{"mean": [50.0, 50.0], "std": 0.1}]}, SQUARE)
    with pytest.raises(DegenerateDistributionError):
        sample_locations(d, substream(0, "t"), 1)


def test_distribution_validation():
    with pytest.raises(ValueError):
        SpatialDistribution.from_dict({"kind": "uniform", "spread": 1}, SQUARE)
    with pytest.raises(ValueError):
        SpatialDistribution.from_dict({"kind": "mixture", "components": [
            {"mean": [0.5, 0.5], "std": 0.1, "weight": 0.4}]}, SQUARE)
    with pytest.raises(ValueError):  # ring leaves the square
        SpatialDistribution.ring(SQUARE, 1.0)
    d = _blob((3.0, 4.0), 2.0)
    assert SpatialDistribution.from_dict(d.to_dict(), BIG).to_dict() == d.to_dict()


def test_streams_reproducible_and_independent_of_label():
    d = SpatialDistribution.uniform(SQUARE)
    a = sample_locations(d, substream(9, "x"), 100)
    b = sample_locations(d, substream(9, "x"), 100)
    c = sample_locations(d, substream(9, "y"), 100)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    assert sample_location(d, substream(9, "x")).tolist() == a[0].tolist()


# --- Markov target

def test_markov_examples():
    t, z = markov_step(MarkovTarget(theta=0.0), None, xi=0.0)
    assert t.theta == 0.0 and np.array_equal(z, [1.0, 0.0])
    t, _ = markov_step(MarkovTarget(theta=1.0), None, xi=0.5)
    assert t.theta == pytest.approx(1.45, abs=1e-15)


def test_markov_stationary_mean_and_bound():
    rng = substream(0, "markov")
    t = MarkovTarget(theta=3.0)
    thetas = []
    for _ in range(100_000):
        t, z = markov_step(t, rng)
        thetas.append(t.theta)
        assert abs(np.linalg.norm(z) - 1.0) < 1e-12
    th = np.array(thetas)
    assert np.max(np.abs(th)) <= 0.5 / (1 - 0.95) + 3.0
    steady = th[1000:]
    # AR(1) with coefficient 0.95: variance of the mean inflates by (1 + a) / (1 - a)
    se = steady.std() / math.sqrt(len(steady)) * math.sqrt(1.95 / 0.05)
    assert abs(steady.mean()) < 4 * se


# --- Poisson stream

def test_poisson_gap_mean_and_monotone_times():
    s = PoissonStream(2.0, SpatialDistribution.uniform(SQUARE), ServiceLaw("deterministic", 0.1), seed=5)
    times = []
    for _ in range(10 ** 6):
        t, z, svc = next_arrival(s)
        assert svc == 0.1
        times.append(t)
    times = np.array(times)
    gaps = np.diff(np.concatenate([[0.0], times]))
    assert np.all(gaps > 0)
    assert gaps.mean() == pytest.approx(0.5, abs=0.002)


def test_exponential_service_second_moment():
    law = ServiceLaw("exponential", 0.1)
    assert law.second_moment == pytest.approx(0.02)
    s = PoissonStream(1.0, SpatialDistribution.uniform(SQUARE), law, seed=6)
    svc = np.array([next_arrival(s)[2] for _ in range(10 ** 6)])
    assert np.all(svc >= 0)
    assert np.mean(svc ** 2) == pytest.approx(0.02, rel=0.01)


def test_poisson_counts_over_horizon():
    lam, T, runs = 3.0, 50.0, 200
    counts = []
    for r in range(runs):
        s = PoissonStream(lam, SpatialDistribution.uniform(SQUARE), seed=r, block=64)
        c = 0
        while next_arrival(s)[0] <= T:
            c += 1
        counts.append(c)
    assert abs(np.mean(counts) - lam * T) <= 3 * math.sqrt(lam * T / runs)


def test_stream_identical_for_any_block_size():
    d = SpatialDistribution.uniform(SQUARE)
    a = PoissonStream(1.0, d, seed=3, block=4096)
    b = PoissonStream(1.0, d, seed=3, block=64)
    for _ in range(5000):
        ta, za, _ = next_arrival(a)
        tb, zb, _ = next_arrival(b)
        assert ta == tb and za.tolist() == zb.tolist()


# --- typed events

def _law(p):
    return TypedEventLaw(p, {k: _blob(c, 1.0) for k, c in CENTERS.items()})


def test_typed_frequencies_and_centers():
    law = _law((0.3, 0.3, 0.4))
    rng = substream(0, "typed")
    kinds, pts = [], {k: [] for k in CENTERS}
    for _ in range(10 ** 5):
        k, z = sample_typed(law, rng)
        kinds.append(k)
        pts[k].append(z)
    freq = [kinds.count(k) / len(kinds) for k in ("a", "b", "ab")]
    assert np.allclose(freq, [0.3, 0.3, 0.4], atol=0.01)
    for k, c in CENTERS.items():
        z = np.array(pts[k])
        assert np.all(np.abs(z.mean(axis=0) - c) <= 3 * 1.0 / math.sqrt(len(z)))


@pytest.mark.parametrize("p, kind", [((1, 0, 0), "a"), ((0, 1, 0), "b"), ((0, 0, 1), "ab")])
def test_degenerate_type_probabilities(p, kind):
    rng = substream(1, "typed")
    assert {sample_typed(_law(p), rng)[0] for _ in range(500)} == {kind}


def test_typed_law_validation():
    with pytest.raises(ValueError):
        _law((0.5, 0.3, 0.3))
    with pytest.raises(ValueError):
        TypedEventLaw((0.3, 0.3, 0.4), {"a": _blob((1, 1))})


@given(st.integers(0, 2 ** 32 - 1))
def test_any_seed_reproduces(seed):
    d = SpatialDistribution.uniform(SQUARE)
    assert sample_locations(d, substream(seed, "p"), 5).tobytes() == \
        sample_locations(d, substream(seed, "p"), 5).tobytes()
