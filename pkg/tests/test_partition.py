import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_deploy.coverage import StepsizeSchedule
from adaptive_deploy.events import SpatialDistribution, sample_locations, substream
from adaptive_deploy.geometry import CostSpec, GeneralizedDiagram, Workspace, cell_owner
from adaptive_deploy.partition import (PartitionState, apply_weight_step, deterministic_supergradient,
                                       dual_value, partition_update, run_partition)
from oracles import dual_value_1d, power_bisector_1d

LINE = Workspace.interval(0, 1)
SQUARE = Workspace.unit_square()
LINE_U = SpatialDistribution.uniform(LINE)
SQUARE_U = SpatialDistribution.uniform(SQUARE)
CONST = StepsizeSchedule("constant", 0.1)


def test_update_examples():
    s = PartitionState([0.25, 0.75], [0.3, 0.7], LINE, schedule=CONST)
    partition_update(s, 0.1)
    assert s.last_winner == 0
    assert s.weights == pytest.approx([-0.07, 0.07], abs=1e-15)
    t = PartitionState([0.25, 0.75], [0.5, 0.5], LINE, schedule=CONST)
    partition_update(t, 0.9)
    assert t.weights == pytest.approx([0.05, -0.05], abs=1e-15)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=12), st.floats(1e-6, 10.0), st.data())
def test_increments_sum_to_zero(raw, gamma, data):
    a = np.array(raw) / np.sum(raw)
    n = len(a)
    w = data.draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n))
    i = data.draw(st.integers(0, n - 1))
    total = math.fsum(w)
    new = apply_weight_step(w, a.tolist(), i, gamma, total)
    others = math.fsum(v for j, v in enumerate(new) if j != i)
    assert new[i] == total - others
    # two roundings at most: the compensated sum of the others, then total - others
    assert abs(math.fsum(new) - total) <= math.ulp(max(abs(others), abs(new[i])))
    exact = [wj + gamma * (aj - (j == i)) for j, (wj, aj) in enumerate(zip(w, a))]
    assert np.allclose(new, exact, atol=1e-12 * (1 + gamma))


def test_weight_sum_does_not_drift():
    rates = [0.05, 0.15, 0.3, 0.2, 0.3]
    s = PartitionState(np.random.default_rng(0).random((5, 2)), rates, SQUARE,
                       schedule=StepsizeSchedule("harmonic", 10.0, 0.01))
    zs = sample_locations(SQUARE_U, substream(1, "z"), 20_000).tolist()
    worst = 0.0
    for z in zs:
        partition_update(s, z)
        worst = max(worst, abs(math.fsum(s.weights)) / math.ulp(max(map(abs, s.weights))))
    assert worst <= 1.0


def test_generators_fixed_and_validated():
    g = [[0.1, 0.1], [0.2, 0.15]]
    s = PartitionState(g, [0.5, 0.5], SQUARE)
    for z in ([0.9, 0.9], [0.0, 0.0]):
        partition_update(s, z)
    assert s.generators.tolist() == g
    with pytest.raises(ValueError):
        PartitionState([[0.1, 0.1], [0.1, 0.1]], [0.5, 0.5], SQUARE)
    with pytest.raises(ValueError):
        PartitionState(g, [0.3, 0.6], SQUARE)
    with pytest.raises(ValueError):
        PartitionState(g, [1.0, 0.0], SQUARE)


# --- dual function

def test_dual_single_cell_cancels():
    vals = []
    for w in (-1.0, 0.0, 1.0):
        s = PartitionState([[0.3, 0.4]], [1.0], SQUARE, weights=[w])
        vals.append(dual_value(s, SQUARE_U, 50_000, 7))
    assert vals[0][0] == pytest.approx(vals[1][0], abs=1e-12) == pytest.approx(vals[2][0], abs=1e-12)
    s = PartitionState([[0.3, 0.4]], [1.0], SQUARE)
    expected = ((0.3 ** 3 + 0.7 ** 3) + (0.4 ** 3 + 0.6 ** 3)) / 3  # E|Z - g|^2
    assert abs(vals[1][0] - expected) <= 3 * vals[1][1]


def test_dual_matches_closed_form_1d():
    rng = np.random.default_rng(3)
    for _ in range(10):
        w = rng.uniform(-0.3, 0.3, 2)
        s = PartitionState([0.25, 0.75], [0.3, 0.7], LINE, weights=w)
        h, se = dual_value(s, LINE_U, 200_000, 5)
        assert abs(h - dual_value_1d((0.25, 0.75), w, (0.3, 0.7))) <= 4 * se


def test_dual_maximized_at_analytic_optimum():
    diffs = np.linspace(-0.2, 0.6, 81)
    h = [dual_value_1d((0.25, 0.75), (-d / 2, d / 2), (0.3, 0.7)) for d in diffs]
    assert diffs[int(np.argmax(h))] == pytest.approx(0.2, abs=1e-9)
    assert power_bisector_1d(0.25, 0.75, -0.1, 0.1) == pytest.approx(0.3)
    sampled = []
    for d in diffs:
        s = PartitionState([0.25, 0.75], [0.3, 0.7], LINE, weights=[-d / 2, d / 2])
        sampled.append(dual_value(s, LINE_U, 100_000, 1)[0])
    assert abs(diffs[int(np.argmax(sampled))] - 0.2) <= 0.02


def test_supergradient_examples():
    opt = PartitionState([0.25, 0.75], [0.3, 0.7], LINE, weights=[-0.1, 0.1])
    g = deterministic_supergradient(opt, LINE_U, 10 ** 6, 0)
    assert np.allclose(g, 0, atol=0.01)
    zero = PartitionState([0.25, 0.75], [0.3, 0.7], LINE)
    g0 = deterministic_supergradient(zero, LINE_U, 10 ** 6, 0)
    assert np.allclose(g0, [-0.2, 0.2], atol=0.01)
    assert math.fsum(g0) == pytest.approx(0.0, abs=1e-15)


def _random_state(rng, n=5, w=None):
    g = rng.random((n, 2))
    a = rng.random(n) + 0.2
    a = (a / a.sum()).tolist()
    a[-1] = 1.0 - math.fsum(a[:-1])
    return PartitionState(g, a, SQUARE, weights=w if w is not None else rng.normal(0, 0.05, n))


def test_concavity_along_segments():
    rng = np.random.default_rng(8)
    for _ in range(10):
        s = _random_state(rng)
        w1 = np.array(s.weights)
        w2 = rng.normal(0, 0.05, 5)
        h = lambda w: dual_value(PartitionState(s.generators, s.rates, SQUARE, weights=w), SQUARE_U, 20_000, 4)
        h1, se1 = h(w1)
        h2, se2 = h(w2)
        for t in (0.25, 0.5, 0.75):
            ht, set_ = h(t * w1 + (1 - t) * w2)
            assert ht >= t * h1 + (1 - t) * h2 - 3 * math.sqrt(se1 ** 2 + se2 ** 2 + set_ ** 2)


@given(st.floats(-10, 10))
def test_owner_translation_invariant(t):
    rng = np.random.default_rng(1)
    g, w = rng.random((4, 2)), rng.normal(0, 0.1, 4)
    d, dt = GeneralizedDiagram(g, w), GeneralizedDiagram(g, w + t)
    zs = rng.random((200, 2))
    same = sum(cell_owner(z, d) == cell_owner(z, dt) for z in zs)
    assert same >= 199  # a shift can only flip exact numerical ties


def test_unbiased_increments_match_supergradient():
    rng = np.random.default_rng(12)
    s = _random_state(rng, n=4)
    gamma, N = 0.01, 100_000
    s.schedule = StepsizeSchedule("constant", gamma)
    w0 = list(s.weights)
    inc = np.empty((N, s.n))
    for k, z in enumerate(sample_locations(SQUARE_U, substream(2, "z"), N).tolist()):
        partition_update(s, z)  # frozen weights: undo every step
        inc[k] = np.subtract(s.weights, w0)
        s.weights = list(w0)
    mean = inc.mean(axis=0)
    se = inc.std(axis=0, ddof=1) / math.sqrt(N)
    a = np.array(s.rates)
    sg = gamma * deterministic_supergradient(s, SQUARE_U, 10 ** 6, 3)
    sg_se = gamma * np.sqrt(a * (1 - a) / 10 ** 6)
    assert np.all(np.abs(mean - sg) <= 3 * np.sqrt(se ** 2 + sg_se ** 2))


def test_run_partition_single_robot_and_frequencies():
    s = PartitionState([[0.5, 0.5]], [1.0], SQUARE)
    tr = run_partition(s, SQUARE_U, 500, 0, window=100)
    assert np.all(tr.cumulative_frequencies() == 1.0)
    assert tr.final_frequencies().tolist() == [1.0]
    s2 = PartitionState([0.25, 0.75], [0.3, 0.7], LINE, schedule=StepsizeSchedule("harmonic", 10.0, 0.05))
    tr2 = run_partition(s2, LINE_U, 5000, 1, window=1000)
    tf = tr2.trailing_frequencies()
    assert tf.shape == (5000, 2)
    assert np.allclose(tf[-1], tr2.final_frequencies())
    assert np.allclose(tr2.cumulative_frequencies()[-1], np.bincount(tr2.winners, minlength=2) / 5000)
    assert tr2.weights.shape == (5001, 2)
