"""Analytic derivatives of the hypersimplex projection.

On the active set A the projection acts locally as centering: its
Jacobian with respect to the scaled input u = x/tau is I - (1/|A|)11^T
restricted to A and zero elsewhere. The operator is symmetric and
idempotent, so jvp and vjp coincide and both run in O(n). The 1/tau
chain-rule factor is applied only in ``loss_grad_from_residual``, keeping
the Jacobian itself a pure combinatorial object.
"""

import numpy as np

from . import _kernels
from .projection import ProjectionResult


def _as_tangent(v, n):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"tangent has shape {v.shape}, expected ({n},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("tangent contains NaN or Inf")
    return v


def jvp(result, v, *, backend=None):
    """Jacobian-vector product (d y / d u) v at a computed projection.

    Active coordinates receive v centered over the active set; saturated
    coordinates receive 0. An empty active set (k = 0, k = n, or a fully
    saturated solve) yields the zero vector, the chosen subgradient there.
    """
    if not isinstance(result, ProjectionResult):
        raise TypeError("result must come from a projection solve")
    be = _kernels.get_backend(backend)
    v = _as_tangent(v, result.spec.n)
    return be.center_on_active(v, result.active, result.spec.n)


def vjp(result, u, *, backend=None):
    """Vector-Jacobian product u^T (d y / d u); equals jvp since J = J^T."""
    return jvp(result, u, backend=backend)


def loss_grad_from_residual(result, residual, tau, *, backend=None):
    """Gradient of (1/2)||y_hat - target||^2 with respect to the raw scores x.

    residual is y_hat - target. Chains the squared-loss gradient through
    the projection and the 1/tau input scaling: (1/tau) J residual. At
    boundary points this is the one-sided subgradient that treats
    saturated coordinates as constant.
    """
    tau = float(tau)
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau}")
    return jvp(result, residual, backend=backend) / tau
