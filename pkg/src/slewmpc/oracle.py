"""Independent reference computations used to check the production solvers.

Every routine here reaches the answer by a different route than the code it
checks: dense grid search instead of the closed-form planar map, certified
active-set solves instead of alternating projections, and exhaustive
saturation-branch enumeration instead of dynamic programming shortcuts.
Results carry verifiable optimality certificates wherever possible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls as scipy_nnls

from .mpc import CondensedQP
from .rateamp import PairBounds, RateAmpSet
from .solvers import LiftedConstraints, build_lifted


# ---------------------------------------------------------------------------
# planar grid search


def grid_project_2d(point, bounds: PairBounds, base_divisions: int = 10_000) -> np.ndarray:
    """Brute-force planar projection by line search over the first coordinate.

    For fixed u0 the feasible u1 values form the interval
    [max(-a, u0 - r), min(a, u0 + r)], on which the optimal u1 is an exact
    clamp; the remaining one-dimensional distance profile is scanned on a
    grid (step a/base_divisions, finer than a/2000) and refined around the
    incumbent by a factor of ten at a time until the u0 resolution drops
    below 1e-8 absolute, keeping projections accurate to well below 1e-6
    even for the largest admissible bounds.
    """
    x0, x1 = float(point[0]), float(point[1])
    a, r = bounds.a, bounds.r
    lo0, hi0 = bounds.a0_min, bounds.a0_max

    def candidates(u0s: np.ndarray) -> np.ndarray:
        return np.clip(x1, np.maximum(-a, u0s - r), np.minimum(a, u0s + r))

    def best_on(u0s: np.ndarray, center=None) -> tuple[float, float]:
        u1s = candidates(u0s)
        if center is None:
            score = (u0s - x0) ** 2 + (u1s - x1) ** 2
        else:
            # distance relative to the incumbent, written as a product of a
            # small difference and a smooth sum; this avoids the sqrt(eps)
            # plateau that squaring O(distance) values directly would leave
            c0, c1 = center
            score = ((u0s - c0) * (u0s + c0 - 2.0 * x0)
                     + (u1s - c1) * (u1s + c1 - 2.0 * x1))
        j = int(np.argmin(score))
        return float(u0s[j]), float(u1s[j])

    step = a / base_divisions
    count = max(2, int(np.ceil((hi0 - lo0) / step)) + 1)
    u0, u1 = best_on(np.linspace(lo0, hi0, count))
    while step > 1e-9:
        window_lo = max(lo0, u0 - step)
        window_hi = min(hi0, u0 + step)
        step /= 10.0
        u0, u1 = best_on(np.linspace(window_lo, window_hi, 21), center=(u0, u1))
    return np.array([u0, u1])


# ---------------------------------------------------------------------------
# certified least-distance solves (dual active set)


@dataclass
class ActiveSetCertificate:
    """Verifiable KKT evidence for a least-distance solution.

    ``active`` holds indices into the one-sided row list [K rows at hi;
    K rows at lo]; residuals are absolute.  Stationarity is
    ||u - x + A' mult||_inf, feasibility the worst constraint violation,
    comp_slack the worst multiplier-slack product.
    """

    point: np.ndarray
    multipliers: np.ndarray
    active: np.ndarray
    stationarity: float
    feasibility: float
    comp_slack: float


def _nnls_least_distance(A: np.ndarray, b: np.ndarray, x: np.ndarray):
    """min ||u - x|| s.t. A u <= b by the least-distance transform to NNLS.

    With z = (u - x)/s for a scale s, the problem becomes min ||z|| subject
    to G z >= h where G = -A s and h = A x - b; that least-distance program
    maps to the nonnegative least-squares problem min ||[G'; h'] q - e||
    (e the last unit vector), whose residual r yields the primal point
    z = -r_head / r_tail and multipliers lam = q / (-r_tail).  The active
    set identified that way is then polished by one equality KKT solve, and
    whichever of the raw and polished points has the smaller worst KKT
    residual is returned as (u, lam).
    """
    m, n = A.shape
    w = b - A @ x
    s = max(1.0, float(np.max(np.abs(w))) / max(1.0, float(np.max(np.abs(A)))))
    G = -A * s
    h = -w
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[n] = 1.0
    q, _ = scipy_nnls(E, f)
    r = E @ q - f
    if not r[n] < 0:
        raise RuntimeError("least-distance subproblem is degenerate (empty set?)")
    z = -r[:n] / r[n]
    lam_raw = np.maximum(q / -r[n] * s * s, 0.0)
    u_raw = x + s * z

    best = (u_raw, lam_raw)
    polished = _polish_least_distance(A, b, x, lam_raw)
    if polished is not None:
        worst_raw = _worst_kkt(A, b, x, *best)
        if _worst_kkt(A, b, x, *polished) < worst_raw:
            best = polished
    return best


def _polish_least_distance(A, b, x, lam):
    """Re-solve the equality KKT system on the active set implied by lam."""
    act = np.where(lam > 0)[0]
    n = A.shape[1]
    kkt = np.zeros((n + act.size, n + act.size))
    kkt[:n, :n] = np.eye(n)
    kkt[:n, n:] = A[act].T
    kkt[n:, :n] = A[act]
    rhs = np.concatenate([x, b[act]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    u_p = sol[:n]
    lam_act = sol[n:]
    if np.any(lam_act < -1e-9 * max(1.0, float(np.max(np.abs(lam_act), initial=0.0)))):
        return None
    lam_p = np.zeros_like(lam)
    lam_p[act] = np.maximum(lam_act, 0.0)
    return u_p, lam_p


def _worst_kkt(A, b, x, u, lam) -> float:
    slack = b - A @ u
    return max(
        float(np.max(np.abs(u - x + A.T @ lam), initial=0.0)),
        float(np.max(-slack, initial=0.0)),
        float(np.max(np.abs(lam * slack), initial=0.0)),
    )


def _certify_least_distance(A, b, x, u, lam) -> ActiveSetCertificate:
    slack = b - A @ u
    return ActiveSetCertificate(
        point=u,
        multipliers=lam,
        active=np.where(lam > 0)[0],
        stationarity=float(np.max(np.abs(u - x + A.T @ lam), initial=0.0)),
        feasibility=float(np.max(-slack, initial=0.0)),
        comp_slack=float(np.max(np.abs(lam * slack), initial=0.0)),
    )


def active_set_project(
    point,
    lifted: LiftedConstraints,
    guard_rows: int = 16,
    cert_tol: float = 1e-9,
) -> tuple[np.ndarray, ActiveSetCertificate]:
    """Exact projection onto {u : lo <= K u <= hi} with a KKT certificate.

    Restricted to small polyhedra (``guard_rows`` two-sided rows at most);
    larger problems should go through :func:`reference_solve`.  Raises if the
    certificate residuals exceed ``cert_tol``.
    """
    x = np.asarray(point, dtype=float).ravel()
    if x.size != lifted.K.shape[1]:
        raise ValueError(f"point has size {x.size}, expected {lifted.K.shape[1]}")
    if lifted.n_rows > guard_rows:
        raise ValueError(
            f"{lifted.n_rows} constraint rows exceed the active-set guard of "
            f"{guard_rows}; use reference_solve for larger problems"
        )
    A = np.vstack([lifted.K, -lifted.K])
    b = np.concatenate([lifted.hi, -lifted.lo])
    u, lam = _nnls_least_distance(A, b, x)
    cert = _certify_least_distance(A, b, x, u, lam)
    worst = max(cert.stationarity, cert.feasibility, cert.comp_slack)
    if worst > cert_tol:
        raise RuntimeError(f"active-set certificate residual {worst:.3e} exceeds {cert_tol:.1e}")
    return u, cert


# ---------------------------------------------------------------------------
# exhaustive saturation-branch enumeration for the rate-only set


@dataclass
class RateProjection:
    """Projection onto the rate-only set plus the number of branches evaluated."""

    u: np.ndarray
    branches: int


def _dp_rate_channel(t: np.ndarray, r: float, u_prev: float, feas_tol: float):
    """Exact rate-only projection of one scalar chain by exhausting 3^(T-1) branches.

    Each stage-to-stage link is tried inactive, active at +r, or active at -r.
    Active links weld consecutive stages into rigid segments whose optimal
    offset is a closed-form mean (clamped to the u_prev window for the leading
    segment); candidates violating an inactive link are discarded, and the
    cheapest surviving candidate is the exact projection.
    """
    T = t.size
    best_u = None
    best_cost = np.inf
    branches = 0
    for sigma in itertools.product((-1, 0, 1), repeat=T - 1):
        branches += 1
        u = np.empty(T)
        start = 0
        offset = np.empty(T)
        offset[0] = 0.0
        for k in range(1, T + 1):
            boundary = k == T or sigma[k - 1] == 0
            if not boundary:
                offset[k] = offset[k - 1] + sigma[k - 1] * r
                continue
            seg = slice(start, k)
            value = float(np.mean(t[seg] - offset[seg]))
            if start == 0:
                value = min(max(value, u_prev - r), u_prev + r)
            u[seg] = value + offset[seg]
            if k < T:
                start = k
                offset[k] = 0.0
        ok = True
        for k in range(1, T):
            if sigma[k - 1] == 0 and abs(u[k] - u[k - 1]) > r + feas_tol:
                ok = False
                break
        if ok:
            cost = float(np.sum((u - t) ** 2))
            if cost < best_cost:
                best_cost = cost
                best_u = u
    return best_u, branches


def dp_rate_project(point, r, u_prev, guard_stages: int = 12, feas_tol: float = 1e-10) -> RateProjection:
    """Exact projection onto {|u_k - u_{k-1}| <= r, u_{-1} = u_prev} (no amplitude).

    Channels are independent scalar chains; the branch count is 3^(T-1) per
    channel.  Guarded to at most ``guard_stages`` stages because enumeration
    is exponential.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float))
    n_u = max(r.size, u_prev.size)
    r = np.broadcast_to(r, (n_u,))
    u_prev = np.broadcast_to(u_prev, (n_u,))
    if np.any(r <= 0):
        raise ValueError(f"rate bound must be positive, got {r}")
    pt = np.asarray(point, dtype=float).ravel()
    if pt.size % n_u:
        raise ValueError(f"point size {pt.size} is not a multiple of {n_u} channels")
    T = pt.size // n_u
    if T < 2:
        raise ValueError(f"need at least 2 stages, got {T}")
    if T > guard_stages:
        raise ValueError(f"{T} stages exceed the enumeration guard of {guard_stages}")
    U = pt.reshape(T, n_u)
    out = np.empty_like(U)
    branches = 0
    for c in range(n_u):
        u_c, b_c = _dp_rate_channel(U[:, c].copy(), float(r[c]), float(u_prev[c]), feas_tol)
        if u_c is None:
            raise RuntimeError("no feasible saturation branch found (set should be nonempty)")
        out[:, c] = u_c
        branches += b_c
    return RateProjection(u=out.ravel(), branches=branches)


# ---------------------------------------------------------------------------
# reference QP solutions


@dataclass
class ReferenceSolution:
    """High-accuracy solution with its KKT residuals and the route that produced it."""

    u: np.ndarray
    stationarity: float
    feasibility: float
    comp_slack: float
    method: str


def _kkt_residuals(J, q, lifted: LiftedConstraints, u, lam_hi, lam_lo):
    Ku = lifted.K @ u
    stat = np.max(np.abs(J @ u + q + lifted.K.T @ (lam_hi - lam_lo)), initial=0.0)
    feas = max(
        float(np.max(Ku - lifted.hi, initial=0.0)),
        float(np.max(lifted.lo - Ku, initial=0.0)),
    )
    comp = max(
        float(np.max(np.abs(lam_hi * (lifted.hi - Ku)), initial=0.0)),
        float(np.max(np.abs(lam_lo * (Ku - lifted.lo)), initial=0.0)),
    )
    return float(stat), feas, comp


def _reference_active_set(J, q, lifted: LiftedConstraints) -> ReferenceSolution:
    """Strictly convex QP by reduction to a least-distance problem.

    With J = L L' and d = -J^-1 q, substituting u = d + L^-T w turns the QP
    into the projection of the origin onto the transformed polyhedron; the
    least-distance multipliers are valid for the original problem unchanged.
    """
    n = J.shape[0]
    L = np.linalg.cholesky(J)
    d = -np.linalg.solve(J, q)
    Linv = np.linalg.solve(L, np.eye(n))
    Kw = lifted.K @ Linv.T
    Kd = lifted.K @ d
    A = np.vstack([Kw, -Kw])
    b = np.concatenate([lifted.hi - Kd, -(lifted.lo - Kd)])
    w, lam = _nnls_least_distance(A, b, np.zeros(n))
    u = d + Linv.T @ w
    n_v = lifted.n_rows
    stat, feas, comp = _kkt_residuals(J, q, lifted, u, lam[:n_v], lam[n_v:])
    return ReferenceSolution(
        u=u, stationarity=stat, feasibility=feas, comp_slack=comp, method="active_set"
    )


def _try_polish(J, q, lifted: LiftedConstraints, v, g, act_tol=1e-7):
    """Equality-solve on the active set guessed from an ADMM iterate.

    Rows whose auxiliary value sits on a bound with a consistently signed
    multiplier are treated as equalities; the resulting KKT system is solved
    directly and accepted only if multiplier signs and strict feasibility of
    the remaining rows confirm the guess.
    """
    K, lo, hi = lifted.K, lifted.lo, lifted.hi
    scale = max(1.0, float(np.max(np.abs(np.concatenate([lo, hi])))))
    at_hi = (v >= hi - act_tol * scale) & (g > 0)
    at_lo = (v <= lo + act_tol * scale) & (g < 0)
    rows = np.where(at_hi | at_lo)[0]
    c = np.where(at_hi[rows], hi[rows], lo[rows])
    n, m = J.shape[0], rows.size
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = J
    kkt[:n, n:] = K[rows].T
    kkt[n:, :n] = K[rows]
    rhs = np.concatenate([-q, c])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    u, nu = sol[:n], sol[n:]
    lam_hi = np.zeros(K.shape[0])
    lam_lo = np.zeros(K.shape[0])
    lam_hi[rows] = np.maximum(nu, 0.0)
    lam_lo[rows] = np.maximum(-nu, 0.0)
    # reject if a multiplier sign contradicts the guessed side
    sign_ok = np.all(np.where(at_hi[rows], nu >= -1e-9, nu <= 1e-9))
    if not sign_ok:
        return None
    return u, lam_hi, lam_lo


def _reference_admm(J, q, lifted: LiftedConstraints, kkt_tol: float) -> ReferenceSolution:
    """Tight ADMM with periodic active-set polish and residual-balance rho restarts."""
    rho = 1.0
    warm = None
    chunk = 2000
    total = 0
    best = None
    while total < 1_000_000:
        u, v, g, r_prim, r_dual = _admm_raw(J, q, lifted, rho, chunk, warm)
        total += chunk
        warm = (u, v, g)
        polished = _try_polish(J, q, lifted, v, g)
        if polished is not None:
            pu, lam_hi, lam_lo = polished
            stat, feas, comp = _kkt_residuals(J, q, lifted, pu, lam_hi, lam_lo)
            if max(stat, feas, comp) <= kkt_tol:
                return ReferenceSolution(
                    u=pu, stationarity=stat, feasibility=feas, comp_slack=comp,
                    method="admm_polish",
                )
        lam_hi = np.maximum(g, 0.0)
        lam_lo = np.maximum(-g, 0.0)
        stat, feas, comp = _kkt_residuals(J, q, lifted, u, lam_hi, lam_lo)
        if max(stat, feas, comp) <= kkt_tol:
            return ReferenceSolution(
                u=u, stationarity=stat, feasibility=feas, comp_slack=comp, method="admm"
            )
        best = (u, stat, feas, comp)
        if r_prim > 10 * r_dual:
            rho *= 5.0
        elif r_dual > 10 * r_prim:
            rho /= 5.0
    u, stat, feas, comp = best
    raise RuntimeError(
        f"reference ADMM failed to certify KKT residual <= {kkt_tol:.1e} "
        f"(reached stat={stat:.2e}, feas={feas:.2e}, comp={comp:.2e})"
    )


def _admm_raw(J, q, lifted: LiftedConstraints, rho, iters, warm):
    """Plain ADMM sweep used by the reference route (q given directly)."""
    from scipy.linalg import cho_factor, cho_solve

    K, lo, hi = lifted.K, lifted.lo, lifted.hi
    n = J.shape[0]
    cho = cho_factor(J + rho * K.T @ K, lower=True)
    if warm is None:
        v = np.zeros(K.shape[0])
        g = np.zeros(K.shape[0])
    else:
        _, v, g = warm
        v, g = v.copy(), g.copy()
    u = np.zeros(n)
    r_prim = r_dual = np.inf
    for _ in range(iters):
        u = cho_solve(cho, K.T @ (rho * v - g) - q)
        Ku = K @ u
        v_prev = v
        v = np.clip(Ku + g / rho, lo, hi)
        g = g + rho * (Ku - v)
        r_prim = float(np.max(np.abs(Ku - v)))
        r_dual = rho * float(np.max(np.abs(K.T @ (v - v_prev))))
        if r_prim < 1e-13 and r_dual < 1e-13:
            break
    return u, v, g, r_prim, r_dual


def reference_solve(
    qp: CondensedQP,
    x0,
    uset: RateAmpSet,
    kkt_tol: float = 1e-8,
    guard_rows: int = 16,
) -> ReferenceSolution:
    """High-accuracy solution of the condensed QP over a rate+amplitude set.

    Small problems (at most ``guard_rows`` two-sided constraint rows) are
    solved exactly by the certified active-set route; larger ones by tight
    ADMM with an active-set polish.  The returned KKT residuals are verified
    against ``kkt_tol`` in both cases.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    q = qp.q(x0)
    lifted = build_lifted(uset)
    if lifted.n_rows <= guard_rows:
        sol = _reference_active_set(qp.J, q, lifted)
    else:
        sol = _reference_admm(qp.J, q, lifted, kkt_tol)
    if max(sol.stationarity, sol.feasibility, sol.comp_slack) > kkt_tol:
        raise RuntimeError(
            f"reference solution failed its KKT check: stat={sol.stationarity:.2e}, "
            f"feas={sol.feasibility:.2e}, comp={sol.comp_slack:.2e}"
        )
    return sol


def exact_project(point, uset: RateAmpSet, kkt_tol: float = 1e-8) -> np.ndarray:
    """Certified projection onto a rate+amplitude set at any horizon.

    Formulated as the QP with identity Hessian and linear term -point, which
    routes through the certified active-set or polished-ADMM reference path.
    """
    point = np.asarray(point, dtype=float).ravel()
    n = point.size
    if n != uset.dim:
        raise ValueError(f"point has size {n}, expected {uset.dim}")
    qp = CondensedQP(
        J=np.eye(n), linmap=-np.eye(n), lam_min=1.0, lam_max=1.0, n_u=uset.n_u, T=uset.T
    )
    return reference_solve(qp, point, uset, kkt_tol=kkt_tol).u
