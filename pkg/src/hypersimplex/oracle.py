"""Slow reference oracles used to certify the fast solvers.

Everything here trades speed for independence: the projection oracle
enumerates all 3^n boundary patterns instead of sorting, the top-k oracle
tries every k-subset, and the Jacobian oracle uses finite differences.
None of them share solver code with the production paths, so agreement
between the two is strong evidence of correctness. Test-only; never
imported by the fast paths.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .projection import HypersimplexSpec, _as_score_vector, project

# 3^n patterns are enumerated; beyond this n the oracle refuses to run.
MAX_ORACLE_N = 12

_ZERO, _ACTIVE, _ONE = 0, 1, 2


@dataclass
class KKTCertificate:
    """Candidate minimizer plus the worst breach of its optimality conditions.

    theta is the clip threshold of the winning boundary pattern;
    max_violation is the largest residual across the per-coordinate
    stationarity / sign conditions and the sum constraint. The certificate
    attests a true minimizer only when max_violation <= 1e-8.
    """

    y: np.ndarray
    theta: float
    max_violation: float


def _theta_for_patterns(u, k, is_zero, is_act, is_one):
    """Best threshold per pattern row; interior coordinates pin it exactly."""
    m = is_act.sum(axis=1)
    n_one = is_one.sum(axis=1).astype(np.float64)
    theta = np.empty(m.shape[0])
    has_act = m > 0
    s_act = is_act @ u
    theta[has_act] = (n_one[has_act] + s_act[has_act] - k) / m[has_act]
    if not np.all(has_act):
        # no interior coordinate: any theta in [max_zero u, min_one u - 1] works
        rows = ~has_act
        lo = np.max(np.where(is_zero[rows], u, -np.inf), axis=1)
        hi = np.min(np.where(is_one[rows], u, np.inf), axis=1) - 1.0
        both = np.isfinite(lo) & np.isfinite(hi)
        theta[rows] = np.where(both, 0.5 * (lo + hi), np.where(np.isfinite(lo), lo, hi))
    return theta


def _pattern_violations(u, k, theta, is_zero, is_act, is_one):
    """Total and worst optimality-condition breach for each pattern row."""
    d = u[None, :] - theta[:, None]
    v_zero = np.where(is_zero, np.maximum(d, 0.0), 0.0)
    v_one = np.where(is_one, np.maximum(1.0 - d, 0.0), 0.0)
    v_act = np.where(is_act, np.maximum(-d, 0.0) + np.maximum(d - 1.0, 0.0), 0.0)
    sum_y = is_one.sum(axis=1) + np.where(is_act, d, 0.0).sum(axis=1)
    gap = np.abs(sum_y - k)
    per_coord = v_zero + v_one + v_act
    total = per_coord.sum(axis=1) + gap
    worst = np.maximum(per_coord.max(axis=1), gap)
    return total, worst


def brute_force_project(x, spec, chunk=65536):
    """Projection by exhaustive search over all 3^n boundary patterns.

    For every assignment of coordinates to {zero, interior, one} the
    threshold is solved in closed form and the optimality conditions are
    scored; the least-violating pattern wins (smallest pattern code on
    ties, so the result is deterministic). Refuses n > MAX_ORACLE_N.
    """
    if not isinstance(spec, HypersimplexSpec):
        raise TypeError("spec must be a HypersimplexSpec")
    if spec.n > MAX_ORACLE_N:
        raise ValueError(
            f"oracle enumerates 3^n patterns; n={spec.n} exceeds the cap of {MAX_ORACLE_N}"
        )
    x = _as_score_vector(x, spec.n)
    u = x / spec.tau
    n, k = spec.n, float(spec.k)
    powers = 3 ** np.arange(n, dtype=np.int64)
    total_codes = 3**n

    best_total = np.inf
    best_code = -1
    for start in range(0, total_codes, chunk):
        codes = np.arange(start, min(start + chunk, total_codes), dtype=np.int64)
        digits = (codes[:, None] // powers) % 3
        is_zero = digits == _ZERO
        is_act = digits == _ACTIVE
        is_one = digits == _ONE
        theta = _theta_for_patterns(u, k, is_zero, is_act, is_one)
        total, _ = _pattern_violations(u, k, theta, is_zero, is_act, is_one)
        i = int(np.argmin(total))  # first index wins ties within the chunk
        if total[i] < best_total:
            best_total = float(total[i])
            best_code = int(codes[i])

    digits = (best_code // powers) % 3
    is_zero = (digits == _ZERO)[None, :]
    is_act = (digits == _ACTIVE)[None, :]
    is_one = (digits == _ONE)[None, :]
    theta = _theta_for_patterns(u, k, is_zero, is_act, is_one)
    _, worst = _pattern_violations(u, k, theta, is_zero, is_act, is_one)

    y = np.where(digits == _ONE, 1.0, 0.0)
    y[digits == _ACTIVE] = u[digits == _ACTIVE] - theta[0]
    return KKTCertificate(y=y, theta=float(theta[0]), max_violation=float(worst[0]))


def exhaustive_topk(x, k):
    """Top-k indicator by trying every k-subset of the coordinates.

    Among maximum-sum subsets the lexicographically first index tuple is
    kept, which admits threshold ties in ascending index order.
    """
    x = _as_score_vector(x)
    n = x.size
    if n > 16:
        raise ValueError(f"exhaustive top-k tries C(n, k) subsets; n={n} exceeds the cap of 16")
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    best = None
    best_sum = -np.inf
    for combo in itertools.combinations(range(n), k):
        s = float(x[list(combo)].sum()) if combo else 0.0
        if s > best_sum:
            best_sum = s
            best = combo
    out = np.zeros(n, dtype=np.int64)
    out[list(best)] = 1
    return out


def fd_jacobian(x, spec, h=1e-6):
    """Central-difference Jacobian of the projection with respect to x.

    J[i, j] ~ (project(x + h e_j).y - project(x - h e_j).y)_i / (2 h).
    Meaningful only when x sits at least ~1e-3 away from any active-set
    change (the map has kinks there); callers screen for that. Note this
    differentiates with respect to x, so it carries the 1/tau factor that
    the analytic jvp (which differentiates with respect to x/tau) omits.
    """
    x = _as_score_vector(x, spec.n)
    J = np.empty((spec.n, spec.n))
    for j in range(spec.n):
        step = np.zeros_like(x)
        step[j] = h
        yp = project(x + step, spec).y
        ym = project(x - step, spec).y
        J[:, j] = (yp - ym) / (2.0 * h)
    return J
