"""Independent oracles and samplers shared by the test modules.

Everything here deliberately avoids the library's own numerical paths:
eigenvalue bounds come from LDL inertia bisection, objectives from forward
simulation of the dynamics, and feasible points from clamped random walks.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import ldl

from slewmpc.mpc import CondensedQP, CostSpec, LinearSystem
from slewmpc.rateamp import RateAmpSet


def eigs_below(S: np.ndarray, t: float) -> int:
    """Number of eigenvalues of symmetric S strictly below t, via LDL inertia."""
    n = S.shape[0]
    _, d, _ = ldl(S - t * np.eye(n))
    neg = 0
    i = 0
    while i < n:
        if i + 1 < n and abs(d[i + 1, i]) > 1e-14 * max(1.0, abs(d[i, i])):
            # 2x2 block: one positive and one negative eigenvalue iff det < 0
            det = d[i, i] * d[i + 1, i + 1] - d[i + 1, i] * d[i, i + 1]
            if det < 0:
                neg += 1
            elif d[i, i] + d[i + 1, i + 1] < 0:
                neg += 2
            i += 2
        else:
            if d[i, i] < 0:
                neg += 1
            i += 1
    return neg


def extreme_eigs_bisect(S: np.ndarray, tol: float = 1e-10) -> tuple[float, float]:
    """Extreme eigenvalues of symmetric S by inertia bisection (no eigensolver)."""
    n = S.shape[0]
    radius = float(np.max(np.sum(np.abs(S), axis=1)))  # Gershgorin bound

    def bisect(count_target: int, lo: float, hi: float) -> float:
        # smallest t with eigs_below(t) >= count_target
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if eigs_below(S, mid) >= count_target:
                hi = mid
            else:
                lo = mid
            if hi - lo < tol * max(1.0, abs(hi)):
                break
        return 0.5 * (lo + hi)

    lam_min = bisect(1, -radius - 1.0, radius + 1.0)
    lam_max = bisect(n, -radius - 1.0, radius + 1.0)
    return lam_min, lam_max


def simulated_objective(system: LinearSystem, cost: CostSpec, x0: np.ndarray,
                        u: np.ndarray) -> float:
    """Stage cost accumulated by running the dynamics forward.

    Uses the same normalization as the condensed objective: half the sum of
    state costs over the predicted states x_1..x_T (terminal state weighted
    with P) plus input costs over u_0..u_{T-1}, except for the u-independent
    term; compare values through :func:`objective_offset`.
    """
    A, B = system.A, system.B
    T = cost.T
    n_u = system.n_u
    x = np.asarray(x0, dtype=float)
    total = 0.0
    for k in range(T):
        u_k = u[k * n_u:(k + 1) * n_u]
        x = A @ x + B @ u_k
        W = cost.P if k == T - 1 else cost.Q
        total += float(x @ W @ x + u_k @ cost.R @ u_k)
    return 0.5 * total


def objective_offset(system: LinearSystem, cost: CostSpec, qp: CondensedQP,
                     x0: np.ndarray) -> float:
    """Constant dropped by the condensed objective (value at u = 0)."""
    zero = np.zeros(qp.n)
    return simulated_objective(system, cost, x0, zero)


def feasible_random_walk(uset: RateAmpSet, rng: np.random.Generator) -> np.ndarray:
    """Feasible stacked input via a clamped random walk from u_prev."""
    u = np.empty(uset.dim)
    prev = uset.u_prev.copy()
    for k in range(uset.T):
        lo = np.maximum(-uset.a, prev - uset.r)
        hi = np.minimum(uset.a, prev + uset.r)
        u_k = rng.uniform(lo, hi)
        u[k * uset.n_u:(k + 1) * uset.n_u] = u_k
        prev = u_k
    return u


def random_pair_case(rng: np.random.Generator):
    """Random planar pair-projection case: bounds, previous input, and a point.

    Amplitude a in (0.1, 10], rate 0 < r <= 2a, |u_prev| <= a, and a query
    point drawn from the box [-5a, 5a]^2.
    """
    a = rng.uniform(0.1, 10.0)
    r = rng.uniform(0.0, 2.0 * a)
    if r == 0.0:
        r = 1e-6 * a
    u_prev = rng.uniform(-a, a)
    point = rng.uniform(-5.0 * a, 5.0 * a, size=2)
    return a, r, u_prev, point


def brute_force_pair(point: np.ndarray, a: float, r: float, u_prev: float,
                     first: bool, divisions: int = 2001) -> np.ndarray:
    """Dense-grid minimizer over the planar pair set (coarse but independent).

    Scans u0 over its interval and, for each u0, clamps u1 to its induced
    interval (the closest feasible u1 for fixed u0 is the clamp of the query).
    """
    if first:
        lo0, hi0 = max(-a, u_prev - r), min(a, u_prev + r)
    else:
        lo0, hi0 = -a, a
    best = None
    best_d = np.inf
    for u0 in np.linspace(lo0, hi0, divisions):
        u1 = min(max(point[1], max(-a, u0 - r)), min(a, u0 + r))
        d = (u0 - point[0]) ** 2 + (u1 - point[1]) ** 2
        if d < best_d:
            best_d = d
            best = np.array([u0, u1])
    return best
