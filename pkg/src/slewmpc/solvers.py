"""QP solvers for the condensed MPC problem over rate+amplitude input sets.

Two routes are provided:

* a fast gradient method (constant step 1/lam_max, constant momentum) whose
  feasibility step is Dykstra's alternating projection — no additional
  decision variables are introduced;
* an ADMM baseline that lifts the constraints through v = K u with box bounds
  on v, factorizing J + rho K'K once and reusing the factor across solves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .mpc import CondensedQP, fgm_step_size
from .rateamp import (
    RateAmpSet,
    _contains_flat,
    _dykstra_run,
    _pair_tables,
    dykstra_project,
)


# ---------------------------------------------------------------------------
# lifted constraint description (used by ADMM and by the reference oracles)


@dataclass(frozen=True)
class LiftedConstraints:
    """Polyhedron {u : lo <= K u <= hi} describing the input set row-wise.

    For a rate+amplitude set the first n_u*T rows of K are the identity with
    bounds +-a, and the remaining n_u*T rows are stage differences with
    bounds +-r — except the k=0 rate row, a single +1 entry with bounds
    shifted by the previously applied input.
    """

    K: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if K.ndim != 2:
            raise ValueError(f"K must be 2-D, got shape {K.shape}")
        if lo.size != K.shape[0] or hi.size != K.shape[0]:
            raise ValueError(
                f"bounds sized {lo.size}/{hi.size} do not match {K.shape[0]} rows of K"
            )
        if np.any(lo > hi):
            raise ValueError("constraint bounds must satisfy lo <= hi")
        for v, name in ((K, "K"), (lo, "lo"), (hi, "hi")):
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_rows(self) -> int:
        return self.K.shape[0]


def build_lifted(uset: RateAmpSet) -> LiftedConstraints:
    """Row-wise (K, lo, hi) description of a rate+amplitude set."""
    n, n_u, T = uset.dim, uset.n_u, uset.T
    K = np.zeros((2 * n, n))
    K[:n, :] = np.eye(n)
    lo = np.empty(2 * n)
    hi = np.empty(2 * n)
    lo[:n] = np.tile(-uset.a, T)
    hi[:n] = np.tile(uset.a, T)
    for k in range(T):
        for c in range(n_u):
            row = n + k * n_u + c
            col = k * n_u + c
            K[row, col] = 1.0
            if k == 0:
                lo[row] = -uset.r[c] + uset.u_prev[c]
                hi[row] = uset.r[c] + uset.u_prev[c]
            else:
                K[row, col - n_u] = -1.0
                lo[row] = -uset.r[c]
                hi[row] = uset.r[c]
    return LiftedConstraints(K=K, lo=lo, hi=hi)


# ---------------------------------------------------------------------------
# shared result types


@dataclass
class SolveTrace:
    """Per-iteration progress: wall time and, when a reference is given, distance."""

    iterations: np.ndarray
    elapsed: np.ndarray
    distance: np.ndarray | None = None


@dataclass
class SolveResult:
    """Solver output: full input trajectory, first control move, diagnostics.

    ``aux`` carries solver-specific extra state — the final (v, gamma) pair
    for ADMM, usable to warm-start the next solve; None for the gradient
    method.
    """

    u_opt: np.ndarray
    u0: np.ndarray
    iterations: int
    trace: SolveTrace | None = None
    aux: tuple | None = None


def warm_start_shift(u: np.ndarray, n_u: int) -> np.ndarray:
    """Shift a stacked trajectory one stage earlier, duplicating the last stage."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[:-n_u] = u[n_u:]
    out[-n_u:] = u[-n_u:]
    return out


# ---------------------------------------------------------------------------
# fast gradient method with Dykstra feasibility step


@dataclass(frozen=True)
class DykstraConfig:
    """Inner projection budget for each gradient step."""

    j_max: int = 50
    eps: float = 1e-9
    check_stride: int = 10
    feas_tol: float = 1e-12


@dataclass(frozen=True)
class FGMConfig:
    i_max: int = 500
    dykstra: DykstraConfig = DykstraConfig()
    record_trace: bool = False
    early_stop: float | None = None  # inf-norm step threshold; None runs all i_max


@dataclass
class FGMWorkspace:
    """Prescaled iteration data: M = I - J/lam_max, momentum beta, linmap/lam_max."""

    qp: CondensedQP
    cfg: FGMConfig
    M: np.ndarray
    beta: float
    linmap_scaled: np.ndarray


def fgm_setup(qp: CondensedQP, cfg: FGMConfig = FGMConfig()) -> FGMWorkspace:
    """Precompute the constant-step iteration matrix and momentum coefficient."""
    if not qp.lam_min > 0:
        raise ValueError(
            f"fast gradient method requires a strongly convex J, got lam_min = {qp.lam_min}"
        )
    n = qp.J.shape[0]
    M = np.eye(n) - qp.J / qp.lam_max
    M = 0.5 * (M + M.T)
    beta = fgm_step_size(qp.lam_min, qp.lam_max)
    return FGMWorkspace(qp=qp, cfg=cfg, M=M, beta=beta, linmap_scaled=qp.linmap / qp.lam_max)


@njit(cache=True)
def _fgm_loop(
    M, qs, beta, i_max, early_tol,
    u, y, t, x, mu, gam, w, xprev,
    a, r, u_prev, T, n_u, feas_tol, j_max, eps, stride,
    e_idx0, e_idx1, e_b0lo, e_b0hi, e_b1lo, e_b1hi, e_amp, e_rate,
    o_idx0, o_idx1, o_b0lo, o_b0hi, o_b1lo, o_b1hi, o_amp, o_rate,
):
    n = u.size
    iters = 0
    delta = np.inf
    for i in range(i_max):
        for row in range(n):
            acc = 0.0
            for col in range(n):
                acc += M[row, col] * y[col]
            t[row] = acc - qs[row]
        if _contains_flat(t, a, r, u_prev, T, n_u, feas_tol):
            for j in range(n):
                x[j] = t[j]
        else:
            for j in range(n):
                x[j] = t[j]
                mu[j] = 0.0
                gam[j] = 0.0
            _dykstra_run(
                x, mu, gam, w, xprev, j_max, eps, stride,
                e_idx0, e_idx1, e_b0lo, e_b0hi, e_b1lo, e_b1hi, e_amp, e_rate,
                o_idx0, o_idx1, o_b0lo, o_b0hi, o_b1lo, o_b1hi, o_amp, o_rate,
            )
        delta = 0.0
        for j in range(n):
            d = abs(x[j] - u[j])
            if d > delta:
                delta = d
            y[j] = (1.0 + beta) * x[j] - beta * u[j]
            u[j] = x[j]
        iters = i + 1
        if not np.isfinite(delta):
            return iters, delta, 1
        if early_tol >= 0.0 and delta < early_tol:
            break
    return iters, delta, 0


def fgm_solve(
    ws: FGMWorkspace,
    x0,
    uset: RateAmpSet,
    warm=None,
    reference=None,
) -> SolveResult:
    """Run the fast gradient method from a cold or warm start.

    ``warm`` is used directly as the initial iterate (use
    :func:`warm_start_shift` on a previous solution to apply the shift
    policy); ``reference`` enables distance recording when the workspace
    config asks for a trace.
    """
    qp, cfg = ws.qp, ws.cfg
    n = qp.J.shape[0]
    if uset.dim != n:
        raise ValueError(f"set dimension {uset.dim} does not match QP dimension {n}")
    x0 = np.asarray(x0, dtype=float).ravel()
    qs = ws.linmap_scaled @ x0
    if warm is None:
        u = np.zeros(n)
    else:
        u = np.asarray(warm, dtype=float).ravel().copy()
        if u.size != n:
            raise ValueError(f"warm start has size {u.size}, expected {n}")
    y = u.copy()
    dyk = cfg.dykstra

    if cfg.record_trace:
        return _fgm_traced(ws, qs, uset, u, y, reference)

    even, odd = _pair_tables(uset)
    t = np.empty(n)
    x = np.empty(n)
    mu = np.empty(n)
    gam = np.empty(n)
    w = np.empty(n)
    xprev = np.empty(n)
    early = cfg.early_stop if cfg.early_stop is not None else -1.0
    iters, delta, status = _fgm_loop(
        ws.M, qs, ws.beta, cfg.i_max, early,
        u, y, t, x, mu, gam, w, xprev,
        uset.a, uset.r, uset.u_prev, uset.T, uset.n_u,
        dyk.feas_tol, dyk.j_max, dyk.eps, dyk.check_stride,
        *even, *odd,
    )
    if status != 0:
        raise RuntimeError(f"fast gradient method produced a non-finite iterate at iteration {iters}")
    return SolveResult(u_opt=u, u0=u[: uset.n_u].copy(), iterations=int(iters))


def _fgm_traced(ws, qs, uset, u, y, reference):
    cfg = ws.cfg
    dyk = cfg.dykstra
    ref = None if reference is None else np.asarray(reference, dtype=float).ravel()
    iter_idx, elapsed, dists = [], [], []
    t0 = time.perf_counter()
    iters = 0
    for i in range(cfg.i_max):
        t = ws.M @ y - qs
        res = dykstra_project(
            t, uset,
            j_max=dyk.j_max, eps=dyk.eps,
            check_stride=dyk.check_stride, feas_tol=dyk.feas_tol,
        )
        u_next = res.u
        if not np.all(np.isfinite(u_next)):
            raise RuntimeError(
                f"fast gradient method produced a non-finite iterate at iteration {i + 1}"
            )
        delta = float(np.max(np.abs(u_next - u)))
        y = (1.0 + ws.beta) * u_next - ws.beta * u
        u = u_next
        iters = i + 1
        iter_idx.append(iters)
        elapsed.append(time.perf_counter() - t0)
        if ref is not None:
            dists.append(float(np.linalg.norm(u - ref)))
        if cfg.early_stop is not None and delta < cfg.early_stop:
            break
    trace = SolveTrace(
        iterations=np.array(iter_idx, dtype=int),
        elapsed=np.array(elapsed),
        distance=np.array(dists) if ref is not None else None,
    )
    return SolveResult(u_opt=u, u0=u[: uset.n_u].copy(), iterations=iters, trace=trace)


# ---------------------------------------------------------------------------
# ADMM baseline on the lifted constraints


@dataclass(frozen=True)
class ADMMConfig:
    rho: float = 1.0
    i_max: int = 2000
    record_trace: bool = False
    early_stop: float | None = None  # primal/dual residual threshold; None disables

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass
class ADMMWorkspace:
    """Cached factorization of J + rho K'K plus the lifted constraint data."""

    qp: CondensedQP
    lifted: LiftedConstraints
    cfg: ADMMConfig
    cho: tuple
    factor_count: int


def admm_setup(qp: CondensedQP, lifted: LiftedConstraints, cfg: ADMMConfig = ADMMConfig()) -> ADMMWorkspace:
    """Assemble and factorize the u-update system once."""
    if lifted.K.shape[1] != qp.J.shape[0]:
        raise ValueError(
            f"K has {lifted.K.shape[1]} columns but J has dimension {qp.J.shape[0]}"
        )
    M = qp.J + cfg.rho * lifted.K.T @ lifted.K
    M = 0.5 * (M + M.T)
    try:
        cho = cho_factor(M, lower=True)
    except np.linalg.LinAlgError:
        raise ValueError("J + rho K'K is not positive definite") from None
    return ADMMWorkspace(qp=qp, lifted=lifted, cfg=cfg, cho=cho, factor_count=1)


def admm_solve(ws: ADMMWorkspace, x0, warm=None, reference=None, lifted=None) -> SolveResult:
    """Scaled-form ADMM iteration with saturation as the v-update.

    ``warm`` is an optional (u, v, gamma) triple.  The cached factorization is
    reused; no refactorization happens here.  ``lifted`` may override the
    workspace bounds (e.g. a shifted previous-input window between closed-loop
    steps) as long as K itself — the factorized part — is unchanged.
    """
    qp, cfg = ws.qp, ws.cfg
    if lifted is None:
        lifted = ws.lifted
    elif not np.array_equal(lifted.K, ws.lifted.K):
        raise ValueError("bounds override must keep the factorized K unchanged")
    K, lo, hi = lifted.K, lifted.lo, lifted.hi
    n = qp.J.shape[0]
    x0 = np.asarray(x0, dtype=float).ravel()
    q = qp.linmap @ x0
    rho = cfg.rho
    if warm is None:
        u = np.zeros(n)
        v = np.zeros(K.shape[0])
        g = np.zeros(K.shape[0])
    else:
        u, v, g = (np.asarray(z, dtype=float).ravel().copy() for z in warm)
        if u.size != n or v.size != K.shape[0] or g.size != K.shape[0]:
            raise ValueError("warm start dimensions do not match the lifted problem")
    ref = None if reference is None else np.asarray(reference, dtype=float).ravel()
    record = cfg.record_trace
    iter_idx, elapsed, dists = [], [], []
    t0 = time.perf_counter()
    iters = 0
    for i in range(cfg.i_max):
        rhs = K.T @ (rho * v - g) - q
        u = cho_solve(ws.cho, rhs)
        Ku = K @ u
        v_prev = v
        v = np.clip(Ku + g / rho, lo, hi)
        g = g + rho * (Ku - v)
        iters = i + 1
        if not np.all(np.isfinite(u)):
            raise RuntimeError(f"ADMM produced a non-finite iterate at iteration {iters}")
        if record:
            iter_idx.append(iters)
            elapsed.append(time.perf_counter() - t0)
            if ref is not None:
                dists.append(float(np.linalg.norm(u - ref)))
        if cfg.early_stop is not None:
            r_prim = float(np.max(np.abs(Ku - v)))
            r_dual = rho * float(np.max(np.abs(K.T @ (v - v_prev))))
            if r_prim < cfg.early_stop and r_dual < cfg.early_stop:
                break
    trace = None
    if record:
        trace = SolveTrace(
            iterations=np.array(iter_idx, dtype=int),
            elapsed=np.array(elapsed),
            distance=np.array(dists) if ref is not None else None,
        )
    return SolveResult(
        u_opt=u, u0=u[: qp.n_u].copy(), iterations=iters, trace=trace, aux=(v, g)
    )


# ---------------------------------------------------------------------------
# dense-matrix memory accounting


@dataclass(frozen=True)
class MemoryFootprint:
    """Dense float counts for each solver's persistent matrices.

    The gradient route stores one n x n matrix (n = n_u T).  The lifted ADMM
    route stores the n x n factor plus the dense payload of the n_u (T-1)
    stage-difference rows; single-entry rows (amplitude bounds and the k=0
    rate row) carry no dense payload beyond their bound vectors.  With that
    ledger the ratio is T/(2T-1), approaching one half for long horizons.
    ``admm_floats_alldense`` stores all n_v = 2 n_u T rows of K densely
    instead (ratio tending to one third) for comparison.
    """

    T: int
    n_u: int
    n: int
    n_v: int
    fgm_floats: int
    admm_floats: int
    admm_floats_alldense: int
    ratio: float
    ratio_alldense: float


def memory_footprint(T: int, n_u: int = 1) -> MemoryFootprint:
    """Dense-matrix storage comparison of the two solver routes."""
    if T < 2 or n_u < 1:
        raise ValueError(f"need T >= 2 and n_u >= 1, got T={T}, n_u={n_u}")
    n = n_u * T
    n_v = 2 * n
    fgm = n * n
    admm = n * n + n_u * (T - 1) * n
    alldense = n * n + n_v * n
    return MemoryFootprint(
        T=T, n_u=n_u, n=n, n_v=n_v,
        fgm_floats=fgm,
        admm_floats=admm,
        admm_floats_alldense=alldense,
        ratio=fgm / admm,
        ratio_alldense=fgm / alldense,
    )
