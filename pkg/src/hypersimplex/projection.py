"""Hard top-k selection and Euclidean projection onto the (n, k)-hypersimplex.

The hypersimplex is the polytope {y in [0,1]^n : sum(y) = k}. Projecting
x / tau onto it gives a temperature-scaled, differentiable relaxation of
the indicator of the k largest entries of x: the solution has the closed
form y_i = clip(x_i / tau - theta, 0, 1) with theta chosen so the
coordinates sum to k. ``project`` finds theta by an O(n log n) sorted
breakpoint scan; ``project_bisect`` is an independent bisection solver
kept for cross-checking.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

# Coordinates within this distance of 0 or 1 are classified as saturated.
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class HypersimplexSpec:
    """Dimension n, target cardinality k and temperature tau of a projection.

    tau > 0 scales the input; small tau drives the projection toward the
    hard top-k vertex, large tau toward the uniform point k/n. theta values
    reported by the solvers are the clip offset (half the equality-constraint
    multiplier of the underlying quadratic program, not the multiplier
    itself).
    """

    n: int
    k: int
    tau: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if not isinstance(self.k, (int, np.integer)) or isinstance(self.k, bool):
            raise ValueError(f"k must be an integer, got {self.k!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "tau", float(self.tau))
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"k must be in [0, {self.n}], got {self.k}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):  # also rejects NaN
            raise ValueError(f"tau must be positive and finite, got {self.tau}")


@dataclass
class ProjectionResult:
    """Projected vector plus the index partition and threshold.

    y sums to k with every entry clamped to [0, 1]. active / at_one /
    at_zero partition range(n) (0-based): at_one and at_zero collect the
    coordinates within BOUNDARY_TOL of the bounds, active the strictly
    interior ones where y_i = x_i / tau - theta.
    """

    y: np.ndarray
    active: np.ndarray
    at_one: np.ndarray
    at_zero: np.ndarray
    theta: float
    spec: HypersimplexSpec

    @property
    def is_degenerate_saturated(self):
        """True when 0 < k < n but no coordinate is strictly interior.

        Happens only with duplicated inputs; downstream gradients are zero
        there and callers may want to surface the event.
        """
        return self.active.size == 0 and 0 < self.spec.k < self.spec.n


def _as_score_vector(x, n=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D score vector, got shape {x.shape}")
    if x.size == 0:
        raise ValueError("score vector must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("score vector contains NaN or Inf")
    if n is not None and x.size != n:
        raise ValueError(f"score vector has length {x.size}, spec.n is {n}")
    return x


def kth_largest(x, k):
    """k-th largest entry of x, duplicates counted with multiplicity."""
    x = _as_score_vector(x)
    n = x.size
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    return float(np.partition(x, n - k)[n - k])

def hard_topk(x, k):
    """0/1 indicator of the k largest entries of x.

    Entries tied at the k-th largest value are admitted in ascending index
    order until exactly k are selected, so the result is deterministic.
    """
    x = _as_score_vector(x)
    n = x.size
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    out = np.zeros(n, dtype=np.int64)
    if k > 0:
        # stable argsort of -x keeps ascending index order among ties
        out[np.argsort(-x, kind="stable")[:k]] = 1
    return out


def _classify(y, theta, spec):
    at_one = y >= 1.0 - BOUNDARY_TOL
    at_zero = y <= BOUNDARY_TOL
    active = ~(at_one | at_zero)
    return ProjectionResult(
        y=y,
        active=np.flatnonzero(active),
        at_one=np.flatnonzero(at_one),
        at_zero=np.flatnonzero(at_zero),
        theta=float(theta),
        spec=spec,
    )


def _degenerate(u, spec):
    # k = 0 and k = n are hypersimplex "corners" with an exact answer.
    if spec.k == 0:
        return _classify(np.zeros(spec.n), np.max(u), spec)
    return _classify(np.ones(spec.n), np.min(u) - 1.0, spec)


def project(x, spec, *, backend=None):
    """Euclidean projection of x / tau onto {y in [0,1]^n : sum(y) = k}.

    Returns the unique minimizer of ||y - x/tau||^2 over the hypersimplex,
    computed by sorting x / tau and scanning the breakpoints of the
    piecewise-linear map theta -> sum(clip(x_i/tau - theta, 0, 1)) for the
    segment where it equals k. O(n log n) total, dominated by the sort.
    """
    be = _kernels.get_backend(backend)
    x = _as_score_vector(x, spec.n)
    u = x / spec.tau
    if spec.k == 0 or spec.k == spec.n:
        return _degenerate(u, spec)
    u_sorted = u[np.argsort(-u, kind="stable")]
    prefix = np.concatenate(([0.0], np.cumsum(u_sorted)))
    theta = be.theta_from_sorted(u_sorted, prefix, float(spec.k))
    y = np.clip(u - theta, 0.0, 1.0)
    return _classify(y, theta, spec)


def project_bisect(x, spec, tol=1e-12):
    """Same minimizer as ``project``, found by bisection on the threshold.

    Bisects theta over [min(u) - 1, max(u)] using the monotone clip-sum map,
    stops once |sum(y) - k| <= tol, then snaps theta to the exact solution
    of the bracketing segment. Shares no solver code with ``project``; used
    as an independent cross-check.
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    x = _as_score_vector(x, spec.n)
    u = x / spec.tau
    if spec.k == 0 or spec.k == spec.n:
        return _degenerate(u, spec)
    k = float(spec.k)
    lo = float(np.min(u)) - 1.0  # clip sum = n here
    hi = float(np.max(u))  # clip sum = 0 here
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = float(np.sum(np.clip(u - mid, 0.0, 1.0)))
        if abs(g - k) <= tol:
            break
        if g > k:
            lo = mid
        else:
            hi = mid

    # snap: solve theta exactly on the active composition found at mid
    d = u - mid
    act = (d > 0.0) & (d < 1.0)
    m = int(np.count_nonzero(act))
    if m > 0:
        n_one = int(np.count_nonzero(d >= 1.0))
        theta = (n_one + float(np.sum(u[act])) - k) / m
        # fall back to the bisection iterate if snapping misjudged the segment
        if abs(np.sum(np.clip(u - theta, 0.0, 1.0)) - k) > abs(
            np.sum(np.clip(u - mid, 0.0, 1.0)) - k
        ):
            theta = mid
    else:
        theta = mid
    y = np.clip(u - theta, 0.0, 1.0)
    return _classify(y, theta, spec)


def project_rows(X, k, tau, *, backend=None):
    """Row-wise projection of a matrix; returns (Y, thetas).

    Each row is projected independently with the same (k, tau), so rows may
    be processed in parallel by callers; results do not depend on order.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    spec = HypersimplexSpec(X.shape[1], k, tau)
    Y = np.empty_like(X)
    thetas = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        res = project(X[i], spec, backend=backend)
        Y[i] = res.y
        thetas[i] = res.theta
    return Y, thetas
