import numpy as np
import pytest

from otopic.errors import InvalidCost
from otopic.sinkhorn import sinkhorn


def lp_oracle_2x2(cost, a, b):
    """Exact 2x2 OT by the one-parameter coupling family.

    plan = [[t, a1-t], [b1-t, a2-b1+t]] with t in [max(0, b1-a2), min(a1, b1)];
    the cost is linear in t so an optimum sits at an endpoint.
    """
    lo = max(0.0, b[0] - a[1])
    hi = min(a[0], b[0])
    best = None
    for t in (lo, hi):
        plan = np.array([[t, a[0] - t], [b[0] - t, a[1] - b[0] + t]])
        val = float((plan * cost).sum())
        if best is None or val < best[0]:
            best = (val, plan)
    return best


class TestSinkhorn:
    def test_constant_cost_independent_coupling(self):
        rng = np.random.default_rng(0)
        a = rng.dirichlet(np.ones(4))
        b = rng.dirichlet(np.ones(6))
        res = sinkhorn(np.full((4, 6), 3.0), a, b, eps=0.5)
        assert np.allclose(res.plan, np.outer(a, b), atol=1e-9)

    def test_small_eps_matches_lp_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            cost = rng.random((2, 2))
            a = rng.dirichlet(np.ones(2) * 5)
            b = rng.dirichlet(np.ones(2) * 5)
            res = sinkhorn(cost, a, b, eps=1e-3, max_iters=20000, tol=1e-10)
            opt_val, _ = lp_oracle_2x2(cost, a, b)
            assert res.cost(cost) == pytest.approx(opt_val, abs=1e-3)

    def test_marginal_violation_random(self):
        rng = np.random.default_rng(2)
        cost = rng.random((10, 15))
        a = rng.dirichlet(np.ones(10))
        b = rng.dirichlet(np.ones(15))
        res = sinkhorn(cost, a, b, eps=0.05, max_iters=5000, tol=1e-7)
        assert res.converged
        assert res.marginal_violation <= 1e-6
        assert np.allclose(res.plan.sum(axis=1), a, atol=1e-6)
        assert np.allclose(res.plan.sum(axis=0), b, atol=1e-6)

    def test_dual_f_centered(self):
        rng = np.random.default_rng(3)
        res = sinkhorn(rng.random((5, 7)), rng.dirichlet(np.ones(5)),
                       rng.dirichlet(np.ones(7)), eps=0.1)
        assert abs(res.dual_f.mean()) < 1e-12

    def test_plan_consistent_with_duals(self):
        rng = np.random.default_rng(4)
        cost = rng.random((3, 4))
        a = rng.dirichlet(np.ones(3))
        b = rng.dirichlet(np.ones(4))
        eps = 0.2
        res = sinkhorn(cost, a, b, eps, max_iters=2000, tol=1e-10)
        rebuilt = np.exp((-cost + res.dual_f[:, None] + res.dual_g[None, :]) / eps)
        assert np.allclose(res.plan, rebuilt, atol=1e-12)

    def test_nonconvergence_is_reported_not_raised(self):
        rng = np.random.default_rng(5)
        res = sinkhorn(rng.random((6, 6)), np.full(6, 1 / 6), np.full(6, 1 / 6),
                       eps=1e-3, max_iters=1, tol=1e-14)
        assert not res.converged
        assert res.iterations_used == 1
        assert np.isfinite(res.marginal_violation)

    def test_nan_cost_rejected(self):
        cost = np.array([[0.0, np.nan], [1.0, 0.0]])
        with pytest.raises(InvalidCost):
            sinkhorn(cost, np.array([0.5, 0.5]), np.array([0.5, 0.5]), eps=0.1)

    def test_nonpositive_eps_rejected(self):
        with pytest.raises(ValueError):
            sinkhorn(np.zeros((2, 2)), np.array([0.5, 0.5]), np.array([0.5, 0.5]),
                     eps=0.0)

    def test_rectangular_high_eps_stable(self):
        rng = np.random.default_rng(6)
        res = sinkhorn(100 * rng.random((4, 9)), rng.dirichlet(np.ones(4)),
                       rng.dirichlet(np.ones(9)), eps=1e-2, max_iters=10000, tol=1e-8)
        assert np.all(np.isfinite(res.plan))
        assert res.plan.min() >= 0.0
