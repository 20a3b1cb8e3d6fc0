import numpy as np
import pytest

from covest.design import (
    DesignProblem,
    design_probabilities,
    design_scale_norms,
    kkt_residual,
    project_box_simplex,
    update_design,
)
from covest.estimator import CovarianceEstimate
from covest.sampling import MaskDistribution

from helpers import grid_project


def test_projection_example():
    p = project_box_simplex(np.array([2.0, 1.0, 0.0, -1.0]), 2.0)
    assert np.allclose(p, [1.0, 1.0, 0.0, 0.0], atol=1e-12)


def test_projection_budget_and_box():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 30))
        v = rng.normal(scale=3.0, size=n)
        m = float(rng.uniform(0.1, n))
        p = project_box_simplex(v, m)
        assert abs(p.sum() - m) <= 1e-9 * max(1.0, m)
        assert np.all(p >= 0.0) and np.all(p <= 1.0)


def test_projection_saturated_budgets():
    v = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(project_box_simplex(v, 3.0), np.ones(3))
    assert np.array_equal(project_box_simplex(v, 0.0), np.zeros(3))
    lo = np.full(3, 0.1)
    assert np.array_equal(project_box_simplex(v, 0.3, lo=0.1), lo)


def test_projection_feasible_input_returned_exactly():
    v = np.array([0.25, 0.5, 0.25])
    assert np.array_equal(project_box_simplex(v, 1.0), v)


def test_projection_infeasible_budget():
    with pytest.raises(ValueError):
        project_box_simplex(np.zeros(3), 4.0)
    with pytest.raises(ValueError):
        project_box_simplex(np.zeros(3), -0.5)
    with pytest.raises(ValueError):
        project_box_simplex(np.zeros(3), 1.0, lo=0.6, hi=0.5)


def test_projection_against_grid_oracle():
    # brute-force scan over the dual scalar, independent of the bisection
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        v = rng.normal(scale=2.0, size=n)
        lo = float(rng.uniform(0.0, 0.2))
        m = float(rng.uniform(n * lo, n))
        fast = project_box_simplex(v, m, lo=lo)
        slow = grid_project(v, m, lo=lo)
        assert np.abs(fast - slow).max() <= 2e-3


def test_projection_kkt_residual():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(1, 41))
        v = rng.normal(scale=rng.uniform(0.5, 5.0), size=n)
        lo = float(rng.uniform(0.0, 0.02))
        m = float(rng.uniform(n * lo, n))
        p = project_box_simplex(v, m, lo=lo)
        assert kkt_residual(p, v, m, lo=lo) <= 1e-8


def test_design_example_two_coordinates():
    # variances [4, 1] with budget 1 split 2:1 along standard deviations
    sol = design_probabilities(np.array([4.0, 1.0]), 1.0)
    assert np.allclose(sol.p.p, [2.0 / 3.0, 1.0 / 3.0], atol=1e-9)
    assert sol.rho == pytest.approx(1.0 / 3.0)
    assert sol.converged


def test_design_cap_binds():
    # the dominant coordinate saturates at 1 and the rest split evenly
    sol = design_probabilities(np.array([100.0, 1.0, 1.0]), 2.5)
    assert np.allclose(sol.p.p, [1.0, 0.75, 0.75], atol=1e-9)


def test_design_flat_profile_is_exactly_uniform():
    sol = design_probabilities(np.full(4, 7.0), 2.0)
    assert np.array_equal(sol.p.p, np.full(4, 0.5))
    assert sol.converged and sol.iterations == 0


def test_design_floor_binds_exactly():
    sol = design_probabilities(np.array([100.0, 1e-8]), 0.5, eps=1e-3)
    assert sol.p.p[1] == 1e-3
    assert sol.p.p[0] == pytest.approx(0.499, abs=1e-9)


def test_design_budget_always_met():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 25))
        diag = rng.uniform(0.0, 10.0, size=n) ** 2
        diag[int(rng.integers(n))] = rng.uniform(5.0, 50.0)
        m = float(rng.uniform(n * 2e-3, n))
        sol = design_probabilities(diag, m, eps=1e-3)
        assert abs(sol.p.p.sum() - m) <= 1e-8 * max(1.0, m)
        assert np.all(sol.p.p >= 1e-3 - 1e-15) and np.all(sol.p.p <= 1.0)


def test_design_scale_invariance():
    diag = np.array([9.0, 4.0, 1.0, 0.25])
    base = design_probabilities(diag, 1.5).p.p
    for c in (1e-3, 7.0, 1e4):
        assert np.abs(design_probabilities(c * diag, 1.5).p.p - base).max() <= 1e-8


def test_design_monotone_in_variance():
    # growing one coordinate's variance never shrinks its probability
    diag = np.array([1.0, 2.0, 3.0, 4.0])
    prev = design_probabilities(diag, 2.0).p.p[0]
    for bump in (2.0, 5.0, 20.0):
        d = diag.copy()
        d[0] = bump
        cur = design_probabilities(d, 2.0).p.p[0]
        assert cur >= prev - 1e-10
        prev = cur


def test_design_objective_history_monotone():
    sol = design_probabilities(np.array([50.0, 3.0, 1.0, 0.2, 0.1]), 1.8)
    hist = np.array(sol.objective_history)
    assert hist.size >= 1
    assert np.all(np.diff(hist) <= 1e-10)
    assert sol.objective == hist[-1]
    assert sol.iterations == hist.size


def test_design_errors():
    with pytest.raises(ValueError):
        design_probabilities(np.array([1.0, -1.0]), 1.0)
    with pytest.raises(ValueError):
        design_probabilities(np.array([1.0, 1.0]), 3.0)
    with pytest.raises(ValueError):
        design_probabilities(np.array([1.0, 1.0]), 1e-6, eps=1e-3)
    with pytest.raises(ValueError):
        design_probabilities(np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        DesignProblem(target=np.array([[1.0]]), m=0.5)
    with pytest.raises(ValueError):
        DesignProblem(target=np.array([1.0]), m=0.5, floor=1.5)


def test_update_design_clamps_negative_diagonal():
    est = CovarianceEstimate(np.diag([4.0, -0.5, 1.0]), sample_count=10)
    sol = update_design(est, 1.5, eps=1e-2)
    assert sol.p.p[1] == pytest.approx(1e-2)
    assert sol.p.p[0] > sol.p.p[2]
    assert abs(sol.p.p.sum() - 1.5) <= 1e-8


def test_design_scale_norms_prefers_matched_design():
    # for a spiked profile the fitted design scores below uniform
    cov = np.diag([25.0, 1.0, 1.0, 1.0])
    m = 2.0
    designed = design_probabilities(np.diag(cov), m).p
    uniform = MaskDistribution.uniform(4, m)
    scored = design_scale_norms(cov, [designed, uniform])
    assert scored[0] < scored[1]
