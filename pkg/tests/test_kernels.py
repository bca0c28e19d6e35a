"""Gaussian kernel and unbiased squared MMD against brute-force oracles."""

import math

import numpy as np
import pytest

from conftest import FD_STEP, max_grad_error
from flowconformal.autodiff import Tensor
from flowconformal.errors import ConfigError, DataError
from flowconformal.kernels import (
    KernelSpec,
    MEDIAN_HEURISTIC,
    kernel_eval,
    median_bandwidth,
    mmd2_unbiased,
    mmd2_unbiased_graph,
    resolve_bandwidth,
)


def brute_force_mmd2(u, v, bw):
    """Plain-Python triple-sum evaluation of the unbiased estimator."""
    def k(a, b):
        d2 = sum((ai - bi) ** 2 for ai, bi in zip(a, b))
        return math.exp(-d2 / (bw * bw))

    m, n = len(u), len(v)
    t1 = sum(k(u[i], u[j]) for i in range(m) for j in range(m) if i != j)
    t2 = sum(k(v[i], v[j]) for i in range(n) for j in range(n) if i != j)
    t3 = sum(k(u[i], v[j]) for i in range(m) for j in range(n))
    return t1 / (m * (m - 1)) + t2 / (n * (n - 1)) - 2.0 * t3 / (m * n)


def test_kernel_hand_values():
    spec = KernelSpec(bandwidth=1.0)
    assert kernel_eval(spec, np.array([0.0]), np.array([0.0])) == 1.0
    assert kernel_eval(spec, np.array([0.0]), np.array([1.0])) == pytest.approx(
        math.exp(-1.0), rel=1e-15)


def test_kernel_symmetry_random_pairs():
    rng = np.random.default_rng(4)
    spec = KernelSpec(bandwidth=0.7)
    for _ in range(20):
        u, v = rng.normal(size=3), rng.normal(size=3)
        assert kernel_eval(spec, u, v) == kernel_eval(spec, v, u)


def test_kernel_dimension_mismatch():
    spec = KernelSpec(bandwidth=1.0)
    with pytest.raises(DataError, match="dimension"):
        kernel_eval(spec, np.zeros(2), np.zeros(3))


def test_kernel_spec_validation():
    with pytest.raises(ConfigError):
        KernelSpec()  # neither bandwidth nor rule
    with pytest.raises(ConfigError):
        KernelSpec(bandwidth=0.0)
    with pytest.raises(ConfigError):
        KernelSpec(bandwidth=1.0, bandwidth_rule=MEDIAN_HEURISTIC)
    with pytest.raises(ConfigError):
        KernelSpec(family="laplace", bandwidth=1.0)


def test_median_bandwidth_hand_cases():
    pts = np.array([[0.0], [1.0], [2.0]])
    assert median_bandwidth(pts) == pytest.approx(1.0)
    two = np.array([[0.0], [5.0]])
    assert median_bandwidth(two) == pytest.approx(5.0)


def test_median_bandwidth_mean_fallback():
    # 4 coincident points + 1 apart: 6 of 10 pairwise distances are zero,
    # so the median is zero and the mean (2.8) takes over
    pts = np.array([[0.0], [0.0], [0.0], [0.0], [7.0]])
    dists = [0.0] * 6 + [7.0] * 4
    assert np.median(dists) == 0.0
    assert median_bandwidth(pts) == pytest.approx(float(np.mean(dists)))


def test_median_bandwidth_degenerate_error():
    pts = np.zeros((4, 2))
    with pytest.raises(DataError, match="degenerate sample for bandwidth"):
        median_bandwidth(pts)
    with pytest.raises(DataError):
        median_bandwidth(np.zeros((1, 2)))


def test_resolve_bandwidth_passthrough_and_rule():
    fixed = KernelSpec(bandwidth=2.0)
    assert resolve_bandwidth(fixed, np.zeros((3, 1))).bandwidth == 2.0
    rule = KernelSpec(bandwidth_rule=MEDIAN_HEURISTIC)
    resolved = resolve_bandwidth(rule, np.array([[0.0], [1.0], [2.0]]))
    assert resolved.bandwidth == pytest.approx(1.0)


def test_mmd_identical_singleton_pairs_zero():
    a = np.array([[1.5, -2.0], [1.5, -2.0]])
    est = mmd2_unbiased(a, a.copy(), KernelSpec(bandwidth=1.0))
    assert est.value == pytest.approx(0.0, abs=1e-15)
    assert est.m == est.n == 2


def test_mmd_hand_value_negative():
    u = np.array([[0.0], [1.0]])
    est = mmd2_unbiased(u, u.copy(), KernelSpec(bandwidth=1.0))
    assert est.value == pytest.approx(math.exp(-1.0) - 1.0, rel=1e-14)


def test_mmd_requires_two_points_each_side():
    spec = KernelSpec(bandwidth=1.0)
    with pytest.raises(DataError):
        mmd2_unbiased(np.zeros((1, 1)), np.zeros((5, 1)), spec)
    with pytest.raises(DataError):
        mmd2_unbiased(np.zeros((5, 1)), np.zeros((1, 1)), spec)


def test_mmd_brute_force_oracle_small_instances():
    rng = np.random.default_rng(12)
    spec_pool = [0.5, 1.0, 2.3]
    for _ in range(100):
        m = int(rng.integers(2, 26))
        n = int(rng.integers(2, 26))
        d = int(rng.integers(1, 7))
        u = rng.normal(size=(m, d))
        v = rng.normal(size=(n, d)) + rng.normal()
        bw = float(rng.choice(spec_pool))
        est = mmd2_unbiased(u, v, KernelSpec(bandwidth=bw))
        want = brute_force_mmd2(u.tolist(), v.tolist(), bw)
        assert est.value == pytest.approx(want, abs=1e-12)


def test_mmd_swap_symmetry_exact():
    rng = np.random.default_rng(8)
    spec = KernelSpec(bandwidth=1.3)
    for _ in range(10):
        u = rng.normal(size=(6, 2))
        v = rng.normal(size=(9, 2))
        assert mmd2_unbiased(u, v, spec).value == mmd2_unbiased(v, u, spec).value


def test_mmd_null_unbiasedness():
    rng = np.random.default_rng(99)
    spec = KernelSpec(bandwidth=1.0)
    vals = np.empty(2000)
    for i in range(2000):
        u = rng.normal(size=(20, 1))
        v = rng.normal(size=(20, 1))
        vals[i] = mmd2_unbiased(u, v, spec).value
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean()) < 4.0 * se


def test_mmd_separation_signal():
    rng = np.random.default_rng(7)
    spec = KernelSpec(bandwidth=1.0)
    null_vals = np.array([
        mmd2_unbiased(rng.normal(size=(200, 1)), rng.normal(size=(200, 1)), spec).value
        for _ in range(50)
    ])
    null_se = null_vals.std(ddof=1)
    shifted = mmd2_unbiased(rng.normal(size=(200, 1)),
                            rng.normal(size=(200, 1)) + 5.0, spec).value
    assert shifted > 10.0 * null_se


def test_mmd_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    u = rng.normal(size=(6, 2))
    v = rng.normal(size=(7, 2)) + 1.0
    spec = KernelSpec(bandwidth=1.4)
    ut = Tensor(u, requires_grad=True)
    mmd2_unbiased_graph(ut, v, spec).backward()
    numeric = np.zeros_like(u)
    for i in range(u.shape[0]):
        for j in range(u.shape[1]):
            up, um = u.copy(), u.copy()
            up[i, j] += FD_STEP
            um[i, j] -= FD_STEP
            numeric[i, j] = (mmd2_unbiased(up, v, spec).value
                             - mmd2_unbiased(um, v, spec).value) / (2 * FD_STEP)
    assert max_grad_error(ut.grad, numeric) < 1e-5


def test_numeric_wrapper_equals_graph_path():
    rng = np.random.default_rng(14)
    u = rng.normal(size=(5, 3))
    v = rng.normal(size=(8, 3))
    spec = KernelSpec(bandwidth=0.9)
    graph_val = float(mmd2_unbiased_graph(Tensor(u), Tensor(v), spec).data)
    assert mmd2_unbiased(u, v, spec).value == graph_val


def test_mmd_unresolved_bandwidth_rejected():
    rule = KernelSpec(bandwidth_rule=MEDIAN_HEURISTIC)
    with pytest.raises(ConfigError, match="resolve"):
        mmd2_unbiased(np.zeros((3, 1)), np.ones((3, 1)), rule)
