"""Hot numeric kernels, in two interchangeable flavors.

The numba flavor JIT-compiles the inner loops; the numpy flavor is a
vectorized fallback with identical semantics. The active flavor is chosen
at import time from the HYPERSIMPLEX_BACKEND environment variable
("numba" or "numpy", default numba when importable). Both stay accessible
through ``get_backend`` so benchmarks can compare them in one process.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

ENV_FLAG = "HYPERSIMPLEX_BACKEND"


# ---------------------------------------------------------------------------
# Threshold solve for the box-constrained sum-k projection.
#
# Given u sorted descending, find theta with sum_i clip(u_i - theta, 0, 1) = k.
# The clip sum g(theta) is piecewise linear and nonincreasing; its breakpoints
# are the values u_i (coordinate leaves zero) and u_i - 1 (coordinate hits
# one). Walking the breakpoints in decreasing order, g is evaluated exactly
# from the running composition (a coordinates at one, [a, b) active), and the
# first segment where g reaches k yields theta in closed form.
# ---------------------------------------------------------------------------


def _theta_from_sorted_numpy(u_sorted, prefix, k):
    """Vectorized breakpoint scan.

    Counts and running sums are gathered from the exact prefix array with
    the same arithmetic as the scalar walk, so both backends take the same
    branch even when the clip sum plateaus exactly at k and theta is a
    whole interval.
    """
    n = u_sorted.shape[0]
    val = np.concatenate((u_sorted, u_sorted - 1.0))
    act = np.zeros(2 * n, dtype=np.bool_)
    act[:n] = True
    # stable sort keeps activations ahead of saturations at equal values,
    # matching the scalar walk's tie rule
    order = np.argsort(-val, kind="stable")
    val = val[order]
    act = act[order]

    act_i = act.astype(np.int64)
    sat_i = 1 - act_i
    b_before = np.cumsum(act_i) - act_i
    a_before = np.cumsum(sat_i) - sat_i
    s_before = prefix[b_before] - prefix[a_before]
    m = b_before - a_before

    g = a_before + s_before - m * val
    hit = g >= k
    if not hit.any():
        # rounding can leave g just under k = n at the final event
        return float(u_sorted[n - 1] - 1.0)
    idx = int(np.argmax(hit))
    if m[idx] > 0:
        return float((a_before[idx] + s_before[idx] - k) / m[idx])
    return float(val[idx])


def _theta_from_sorted_py(u_sorted, prefix, k):
    # Two-pointer walk over breakpoints; a = coords pinned at one, [a, b) active.
    n = u_sorted.shape[0]
    a = 0
    b = 0
    while a < n or b < n:
        t_act = u_sorted[b] if b < n else -np.inf
        t_sat = u_sorted[a] - 1.0 if a < n else -np.inf
        t = t_act if t_act >= t_sat else t_sat
        s_act = prefix[b] - prefix[a]
        m = b - a
        g = a + s_act - m * t
        if g >= k:
            if m > 0:
                return (a + s_act - k) / m
            return t
        if t_act >= t_sat:
            b += 1
        else:
            a += 1
    return u_sorted[n - 1] - 1.0  # unreachable for 0 < k < n


def _center_on_active_numpy(v, active_idx, n):
    out = np.zeros(n, dtype=np.float64)
    if active_idx.shape[0] > 0:
        va = v[active_idx]
        out[active_idx] = va - va.mean()
    return out


def _center_on_active_py(v, active_idx, n):
    out = np.zeros(n, dtype=np.float64)
    m = active_idx.shape[0]
    if m == 0:
        return out
    s = 0.0
    for j in range(m):
        s += v[active_idx[j]]
    mean = s / m
    for j in range(m):
        i = active_idx[j]
        out[i] = v[i] - mean
    return out


def _pav_decreasing_py(v):
    # Stack of blocks as (running sum, count, start); merge while a block mean
    # rises above its left neighbor, which violates the nonincreasing fit.
    n = v.shape[0]
    sums = np.empty(n, dtype=np.float64)
    counts = np.empty(n, dtype=np.int64)
    starts = np.empty(n, dtype=np.int64)
    nb = 0
    for i in range(n):
        sums[nb] = v[i]
        counts[nb] = 1
        starts[nb] = i
        nb += 1
        while nb > 1 and sums[nb - 2] / counts[nb - 2] < sums[nb - 1] / counts[nb - 1]:
            sums[nb - 2] += sums[nb - 1]
            counts[nb - 2] += counts[nb - 1]
            nb -= 1
    fitted = np.empty(n, dtype=np.float64)
    means = np.empty(nb, dtype=np.float64)
    pos = 0
    for j in range(nb):
        mean = sums[j] / counts[j]
        means[j] = mean
        for _ in range(counts[j]):
            fitted[pos] = mean
            pos += 1
    return fitted, starts[:nb].copy(), means


if HAVE_NUMBA:
    _theta_from_sorted_numba = njit(cache=True)(_theta_from_sorted_py)
    _center_on_active_numba = njit(cache=True)(_center_on_active_py)
    _pav_decreasing_numba = njit(cache=True)(_pav_decreasing_py)


class Backend:
    """Bundle of kernel implementations sharing one calling convention."""

    def __init__(self, name, theta_from_sorted, center_on_active, pav_decreasing):
        self.name = name
        self.theta_from_sorted = theta_from_sorted
        self.center_on_active = center_on_active
        self.pav_decreasing = pav_decreasing

    def __repr__(self):
        return f"Backend({self.name!r})"


_BACKENDS = {
    "numpy": Backend(
        "numpy", _theta_from_sorted_numpy, _center_on_active_numpy, _pav_decreasing_py
    )
}
if HAVE_NUMBA:
    _BACKENDS["numba"] = Backend(
        "numba", _theta_from_sorted_numba, _center_on_active_numba, _pav_decreasing_numba
    )


def available_backends():
    return tuple(sorted(_BACKENDS))


def get_backend(name=None):
    """Resolve a backend by name; None means the active (env-selected) one."""
    if name is None:
        return ACTIVE
    if isinstance(name, Backend):
        return name
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; available: {', '.join(available_backends())}"
        )
    return _BACKENDS[name]


def _select_active():
    requested = os.environ.get(ENV_FLAG, "").strip().lower()
    if requested in ("", "auto"):
        return _BACKENDS["numba"] if HAVE_NUMBA else _BACKENDS["numpy"]
    if requested not in _BACKENDS:
        raise ValueError(
            f"{ENV_FLAG}={requested!r} not recognized; "
            f"available: {', '.join(available_backends())}"
        )
    return _BACKENDS[requested]


ACTIVE = _select_active()


def warmup():
    """Trigger JIT compilation of the numba kernels (no-op for numpy)."""
    if not HAVE_NUMBA:
        return
    u = np.array([2.0, 1.0, 0.0])
    prefix = np.array([0.0, 2.0, 3.0, 3.0])
    be = _BACKENDS["numba"]
    be.theta_from_sorted(u, prefix, 1.0)
    be.center_on_active(u, np.array([0, 1], dtype=np.int64), 3)
    be.pav_decreasing(u)
