"""Isotonic regression (nonincreasing) via pool-adjacent-violators.

PAV solves min ||v - w||^2 over nonincreasing w by sweeping once and
pooling adjacent blocks whose means violate the order, O(n) amortized.
It doubles as the optimality certifier for the sorted-input route of the
hypersimplex projection: adding a monotonicity constraint to the
projection of a sorted vector does not change the solution, and
``project_sorted_via_isotonic`` realizes that reduction.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .projection import HypersimplexSpec, _as_score_vector, _degenerate


@dataclass
class IsotonicFit:
    """Nonincreasing least-squares fit plus its pooled-block structure.

    blocks is a list of (start, end, mean) with half-open 0-based index
    ranges tiling range(n); within a block every fitted value equals the
    block mean of the input.
    """

    fitted: np.ndarray
    blocks: list


def pav_decreasing(v, *, backend=None):
    """Nonincreasing isotonic regression of v.

    Returns the unique minimizer of ||v - w||^2 over nonincreasing w,
    computed by stack-based pooling in one pass.
    """
    be = _kernels.get_backend(backend)
    v = _as_score_vector(v)
    fitted, starts, means = be.pav_decreasing(v)
    ends = np.append(starts[1:], v.size)
    blocks = [(int(s), int(e), float(m)) for s, e, m in zip(starts, ends, means)]
    return IsotonicFit(fitted=fitted, blocks=blocks)


def project_sorted_via_isotonic(x_sorted_desc, spec, *, backend=None):
    """Hypersimplex projection of an already-sorted (nonincreasing) vector.

    Solves min ||x/tau - y||^2 over {y in [0,1]^n, sum(y) = k, y
    nonincreasing}. The monotonicity constraint is inactive for sorted
    input, so the minimizer is the theta-shifted clip of the isotonic fit
    of x/tau (the fit is the identity here; running it keeps the reduction
    explicit and costs O(n)). Equals the general projection on sorted
    input. Rejects unsorted input.
    """
    be = _kernels.get_backend(backend)
    x = _as_score_vector(x_sorted_desc, spec.n)
    if np.any(np.diff(x) > 0.0):
        raise ValueError("input must be sorted nonincreasing")
    u = x / spec.tau
    if spec.k == 0 or spec.k == spec.n:
        return _degenerate(u, spec).y
    fitted, _, _ = be.pav_decreasing(u)
    prefix = np.concatenate(([0.0], np.cumsum(fitted)))
    theta = be.theta_from_sorted(fitted, prefix, float(spec.k))
    return np.clip(fitted - theta, 0.0, 1.0)
