"""Log-domain entropic optimal transport solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidCost


@dataclass
class TransportPlan:
    plan: np.ndarray  # m x n, nonnegative
    dual_f: np.ndarray  # length m, centered to mean 0
    dual_g: np.ndarray  # length n
    iterations_used: int
    marginal_violation: float  # |rowsums - a|_1 + |colsums - b|_1
    converged: bool

    def cost(self, cost_matrix: np.ndarray) -> float:
        return float(np.sum(self.plan * cost_matrix))


def sinkhorn(
    cost: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    eps: float,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> TransportPlan:
    """Solve entropic OT between marginals a and b under the given cost.

    Alternating log-domain scaling updates; returns the plan together with
    the centered dual potentials. Non-convergence is not an error: the plan
    is returned with its marginal violation recorded.
    """
    cost = np.asarray(cost, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(cost)):
        raise InvalidCost("cost matrix contains NaN or Inf")
    if eps <= 0:
        raise ValueError("eps must be positive")

    log_k = -cost / eps
    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros(cost.shape[0])  # dual potentials, units of cost
    g = np.zeros(cost.shape[1])

    it = 0
    violation = np.inf
    converged = False
    for it in range(1, max_iters + 1):
        f = eps * (log_a - logsumexp(log_k + g[None, :] / eps, axis=1))
        g = eps * (log_b - logsumexp(log_k + f[:, None] / eps, axis=0))
        plan = np.exp(log_k + f[:, None] / eps + g[None, :] / eps)
        violation = float(
            np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum()
        )
        if violation <= tol:
            converged = True
            break
    else:
        plan = np.exp(log_k + f[:, None] / eps + g[None, :] / eps)

    shift = f.mean()
    f = f - shift
    g = g + shift
    return TransportPlan(
        plan=plan,
        dual_f=f,
        dual_g=g,
        iterations_used=it,
        marginal_violation=violation,
        converged=converged,
    )
