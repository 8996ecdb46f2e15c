import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfhst.clustering import ClusterAssignment, GenericSinrCoeffs
from cfhst.power import (
    NumericalError, allocate, fractional_power, full_power, maxmin_power, maxsum_power,
)
from cfhst.validation import maxmin_bisection, random_coeffs

P = 0.2


def assignment(mask):
    mask = np.asarray(mask, bool)
    return ClusterAssignment(mask, np.argmax(mask, axis=1), 10.0)


def test_fractional_equal_gains():
    zeta = np.array([[1.0, 2.0], [2.0, 1.0]])
    alloc = fractional_power(assignment(np.ones((2, 2))), zeta, P)
    np.testing.assert_allclose(alloc.powers, [P, P])


def test_fractional_direct_formula():
    zeta = np.array([[2.0], [1.0]])
    alloc = fractional_power(assignment(np.ones((2, 1))), zeta, 1.0)
    np.testing.assert_allclose(alloc.powers, [0.5, 1.0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_fractional_invariant(seed):
    r = np.random.default_rng(seed)
    zeta = r.uniform(1e-12, 1e-9, (4, 5))
    mask = r.random((4, 5)) < 0.5
    mask[np.arange(4), r.integers(0, 5, 4)] = True
    alloc = fractional_power(assignment(mask), zeta, P)
    z = np.sum(zeta * mask, axis=1)
    np.testing.assert_allclose(alloc.powers / P * z, z.min(), rtol=1e-12)
    assert np.all(alloc.powers > 0) and np.all(alloc.powers <= P)


def test_fractional_rejects_empty_cluster():
    mask = np.array([[True, False], [False, False]])
    with pytest.raises(ValueError):
        fractional_power(ClusterAssignment(mask, np.array([0, 0]), 0.0), np.ones((2, 2)), P)


def test_maxmin_symmetric():
    c = GenericSinrCoeffs(np.array([1.0, 1.0]), np.array([[0.1, 0.2], [0.2, 0.1]]),
                          np.array([0.05, 0.05]))
    np.testing.assert_allclose(maxmin_power(c, P).powers, [P, P])


def test_maxmin_single_user():
    c = GenericSinrCoeffs(np.array([2.0]), np.array([[0.3]]), np.array([0.1]))
    alloc = maxmin_power(c, P)
    assert alloc.powers[0] == P
    assert c.sinr(alloc.powers)[0] == pytest.approx(2 * P / (0.3 * P + 0.1))


@pytest.mark.parametrize("seed", range(20))
def test_maxmin_matches_bisection(seed):
    r = np.random.default_rng(seed)
    c = random_coeffs(r, 3)
    alloc = maxmin_power(c, P)
    sinr = c.sinr(alloc.powers)
    assert alloc.converged and sinr.max() - sinr.min() <= 1e-4
    assert alloc.powers.max() == pytest.approx(P)
    assert sinr.min() >= c.sinr(np.full(3, P)).min() - 1e-12
    assert sinr.min() == pytest.approx(maxmin_bisection(c, P), rel=1e-3)


def test_maxmin_rejects_dead_user():
    c = GenericSinrCoeffs(np.array([1.0, 0.0]), np.zeros((2, 2)), np.ones(2))
    with pytest.raises(ValueError):
        maxmin_power(c, P)


def test_maxmin_reports_nonconvergence():
    c = random_coeffs(np.random.default_rng(1), 4)
    with pytest.raises(NumericalError, match="spread"):
        maxmin_power(c, P, max_iter=1)


def test_maxsum_interference_free_single_user():
    c = GenericSinrCoeffs(np.array([1.0]), np.zeros((1, 1)), np.array([0.1]))
    np.testing.assert_allclose(maxsum_power(c, P).powers, [P])


@pytest.mark.parametrize("seed", range(50))
def test_maxsum_trace_nonincreasing(seed):
    r = np.random.default_rng(seed)
    c = random_coeffs(r, int(r.integers(2, 7)))
    alloc = maxsum_power(c, P)
    tr = np.array(alloc.trace)
    assert np.all(np.diff(tr) <= 1e-9 * np.abs(tr[:-1]))
    assert np.all(alloc.powers > 0) and np.all(alloc.powers <= P)
    assert c.sum_se(alloc.powers) >= c.sum_se(np.full(c.n_tas, P)) - 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_maxsum_grid_oracle(seed):
    r = np.random.default_rng(100 + seed)
    c = random_coeffs(r, 2)
    alloc = maxsum_power(c, P)
    best = c.sum_se(alloc.powers)
    grid = np.linspace(0.01, 1.0, 100) * P
    p1, p2 = np.meshgrid(grid, grid, indexing="ij")
    sinr1 = c.gain[0] * p1 / (c.interference[0, 0] * p1 + c.interference[0, 1] * p2 + c.noise[0])
    sinr2 = c.gain[1] * p2 / (c.interference[1, 0] * p1 + c.interference[1, 1] * p2 + c.noise[1])
    grid_best = np.max(np.log2(1 + sinr1) + np.log2(1 + sinr2))
    assert grid_best <= best * 1.01
    assert best >= c.sum_se(np.full(2, P)) - 1e-12
    assert best >= c.sum_se(maxmin_power(c, P).powers) - 1e-12


def test_maxsum_objective_equals_rate_identity():
    c = random_coeffs(np.random.default_rng(3), 3)
    alloc = maxsum_power(c, P)
    # at the u, d optimum the surrogate is K - sum ln(1 + SINR) up to one block step
    assert alloc.trace[-1] == pytest.approx(3 - np.sum(np.log1p(c.sinr(alloc.powers))), rel=1e-4)


def test_trace_csv_export(tmp_path):
    c = random_coeffs(np.random.default_rng(0), 3)
    alloc = maxsum_power(c, P)
    path = tmp_path / "trace.csv"
    alloc.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["iteration", "objective", "p0", "p1", "p2"]
    assert len(rows) == len(alloc.trace) + 1
    assert float(rows[-1][1]) == alloc.trace[-1]


def test_allocate_dispatch():
    c = random_coeffs(np.random.default_rng(0), 2)
    np.testing.assert_allclose(allocate("full", c, P).powers, [P, P])
    np.testing.assert_allclose(full_power(3, P).powers, [P] * 3)
    assert allocate("maxmin", c, P).scheme == "maxmin"
    assert allocate("maxsum", c, P).scheme == "maxsum"
    with pytest.raises(ValueError):
        allocate("bogus", c, P)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), K=st.integers(1, 6))
def test_maxmin_invariants_property(seed, K):
    c = random_coeffs(np.random.default_rng(seed), K)
    alloc = maxmin_power(c, P)
    sinr = c.sinr(alloc.powers)
    assert sinr.max() - sinr.min() <= 1e-4
    assert alloc.powers.max() == pytest.approx(P)
    assert np.all(alloc.powers > 0)
