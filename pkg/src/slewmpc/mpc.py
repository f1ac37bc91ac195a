"""Condensed linear-quadratic MPC: prediction matrices, terminal cost, Hessian data.

The state sequence is eliminated from the finite-horizon problem

    min  sum_{k=0}^{T-1} x_k' Q x_k + u_k' R u_k  +  x_T' P x_T
    s.t. x_{k+1} = A x_k + B u_k,

which leaves a strongly convex quadratic in the stacked input vector
u = (u_0, ..., u_{T-1}) of dimension n_u * T.  The input-constraint
handling lives in :mod:`slewmpc.rateamp` and :mod:`slewmpc.solvers`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _check_symmetric(M: np.ndarray, name: str, tol: float = 1e-10) -> np.ndarray:
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > tol * max(1.0, np.max(np.abs(M))):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class LinearSystem:
    """Discrete-time linear dynamics x+ = A x + B u."""

    A: np.ndarray
    B: np.ndarray
    Ts: float = 1.0

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(
                f"B has {B.shape[0]} rows but A is {A.shape[0]}x{A.shape[1]}"
            )
        if not self.Ts > 0:
            raise ValueError(f"Ts must be positive, got {self.Ts}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class CostSpec:
    """Stage weights Q, R, terminal weight P and horizon length T (stages u_0..u_{T-1})."""

    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    T: int

    def __post_init__(self):
        Q = _check_symmetric(_as_matrix(self.Q, "Q"), "Q")
        R = _check_symmetric(_as_matrix(self.R, "R"), "R")
        P = _check_symmetric(_as_matrix(self.P, "P"), "P")
        if P.shape != Q.shape:
            raise ValueError(f"P shape {P.shape} does not match Q shape {Q.shape}")
        if self.T < 2:
            raise ValueError(f"horizon T must be at least 2, got {self.T}")
        # Q, P only need to be positive semidefinite; R must be positive definite
        # for the condensed Hessian to be strongly convex.
        for M, name in ((Q, "Q"), (P, "P")):
            if np.min(np.linalg.eigvalsh(M)) < -1e-10:
                raise ValueError(f"{name} must be positive semidefinite")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ValueError("R must be positive definite") from None
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class PredictionMatrices:
    """Stacked prediction x = G u + H x0 for x = (x_1, ..., x_T)."""

    G: np.ndarray
    H: np.ndarray
    T: int
    n_x: int
    n_u: int


@dataclass(frozen=True)
class CondensedQP:
    """Input-only quadratic 0.5 u'Ju + q(x0)'u with q(x0) = linmap @ x0.

    The objective equals half the eliminated stage sum up to a state-only
    constant, so minimizers coincide with those of the original problem.
    """

    J: np.ndarray
    linmap: np.ndarray
    lam_min: float
    lam_max: float
    n_u: int
    T: int

    @property
    def n(self) -> int:
        """Decision dimension n_u * T."""
        return self.J.shape[0]

    def q(self, x0: np.ndarray) -> np.ndarray:
        """Linear term of the condensed objective for initial state x0."""
        x0 = np.asarray(x0, dtype=float).ravel()
        if x0.size != self.linmap.shape[1]:
            raise ValueError(
                f"x0 has dimension {x0.size} but linmap expects {self.linmap.shape[1]}"
            )
        return self.linmap @ x0


def build_prediction(sys: LinearSystem, T: int) -> PredictionMatrices:
    """Assemble G (block lower triangular) and H (stacked powers of A).

    Block (i, j) of G is A^(i-j) B for i >= j and zero otherwise; block i of
    H is A^(i+1), so that x_{i+1} = A^(i+1) x0 + sum_j A^(i-j) B u_j.
    """
    if T < 1:
        raise ValueError(f"horizon T must be at least 1, got {T}")
    n_x, n_u = sys.n_x, sys.n_u
    # powers[i] = A^i for i = 0..T
    powers = [np.eye(n_x)]
    for _ in range(T):
        powers.append(sys.A @ powers[-1])
    G = np.zeros((n_x * T, n_u * T))
    H = np.zeros((n_x * T, n_x))
    for i in range(T):
        H[i * n_x:(i + 1) * n_x] = powers[i + 1]
        for j in range(i + 1):
            G[i * n_x:(i + 1) * n_x, j * n_u:(j + 1) * n_u] = powers[i - j] @ sys.B
    return PredictionMatrices(G=G, H=H, T=T, n_x=n_x, n_u=n_u)


def solve_dare(
    sys: LinearSystem,
    Q: np.ndarray,
    R: np.ndarray,
    step_tol: float = 1e-12,
    max_iter: int = 100_000,
    residual_tol: float = 1e-9,
) -> np.ndarray:
    """Terminal weight from the discrete algebraic Riccati equation.

    Backward value iteration P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA starting
    from P = Q, stopped when the max-norm step drops below ``step_tol``.  The
    fixed-point residual of the returned P is verified against ``residual_tol``.
    """
    Q = _check_symmetric(_as_matrix(Q, "Q"), "Q")
    R = _check_symmetric(_as_matrix(R, "R"), "R")
    A, B = sys.A, sys.B
    if Q.shape[0] != A.shape[0]:
        raise ValueError(f"Q has dimension {Q.shape[0]} but A is {A.shape[0]}x{A.shape[0]}")
    if R.shape[0] != B.shape[1]:
        raise ValueError(f"R has dimension {R.shape[0]} but B has {B.shape[1]} columns")
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) < step_tol:
            P = P_next
            break
        P = P_next
    else:
        raise RuntimeError(
            f"Riccati iteration did not converge within {max_iter} iterations"
        )
    residual = dare_residual(sys, Q, R, P)
    if residual > residual_tol:
        raise RuntimeError(
            f"Riccati fixed-point residual {residual:.3e} exceeds {residual_tol:.1e}"
        )
    return P


def dare_residual(sys: LinearSystem, Q: np.ndarray, R: np.ndarray, P: np.ndarray) -> float:
    """Max-norm residual of P as a fixed point of the Riccati recursion."""
    A, B = sys.A, sys.B
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    return float(np.max(np.abs(Q + A.T @ P @ A - A.T @ P @ B @ K - P)))


def _power_iteration(
    S: np.ndarray, scale: float, rtol: float, max_iter: int
) -> float:
    """Largest eigenvalue of the symmetric PSD matrix S by power iteration.

    Convergence is declared when the eigen-residual ||S v - lam v|| falls
    below ``rtol * scale``, which certifies lam to that accuracy.  When the
    top of the spectrum is a near-degenerate cluster the residual floors at
    the cluster width instead; a plateaued residual is then accepted up to
    ``100 * rtol * scale``, still certifying lam within 1e-8 of an eigenvalue
    at the default tolerance.  ``scale`` should be a bound on the spectrum so
    the test stays meaningful for matrices with tiny norm (then 0 is
    returned, meaning the spectrum sits at the origin at this resolution).
    """
    n = S.shape[0]
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    best = np.inf
    flat = 0
    for _ in range(max_iter):
        w = S @ v
        norm_w = np.linalg.norm(w)
        if norm_w <= rtol * scale:
            return 0.0
        lam = float(v @ w)
        resid = float(np.linalg.norm(w - lam * v))
        if resid <= rtol * scale:
            return lam
        if resid < 0.9 * best:
            best = resid
            flat = 0
        else:
            flat += 1
            if flat >= 500 and resid <= 100.0 * rtol * scale:
                return lam
            if flat >= 5000:
                break
        v = w / norm_w
    raise RuntimeError(
        f"power iteration stagnated after {max_iter} iterations (last estimate {lam:.6e})"
    )


def spectral_bounds(
    J: np.ndarray, rtol: float = 1e-10, max_iter: int = 100_000
) -> tuple[float, float]:
    """(lam_min, lam_max) of a symmetric positive definite matrix.

    lam_max comes from plain power iteration; lam_min from power iteration on
    the shifted matrix lam_max*I - J, whose top eigenvalue is lam_max - lam_min.
    """
    J = _check_symmetric(_as_matrix(J, "J"), "J")
    if J.shape[0] == 1:
        lam = float(J[0, 0])
        return lam, lam
    scale = float(np.max(np.abs(J)))
    if scale == 0.0:
        raise ValueError("J is identically zero")
    lam_max = _power_iteration(J, scale, rtol, max_iter)
    shifted = lam_max * np.eye(J.shape[0]) - J
    spread = _power_iteration(shifted, max(scale, lam_max), rtol, max_iter)
    lam_min = lam_max - spread
    return lam_min, lam_max


def fgm_step_size(lam_min: float, lam_max: float) -> float:
    """Momentum coefficient (sqrt(lam_max) - sqrt(lam_min)) / (sqrt(lam_max) + sqrt(lam_min))."""
    if not (lam_min > 0 and lam_max > 0):
        raise ValueError(f"eigenvalue bounds must be positive, got ({lam_min}, {lam_max})")
    if lam_min > lam_max * (1 + 1e-12):
        raise ValueError(f"lam_min {lam_min} exceeds lam_max {lam_max}")
    lam_min = min(lam_min, lam_max)
    rmin, rmax = np.sqrt(lam_min), np.sqrt(lam_max)
    return float((rmax - rmin) / (rmax + rmin))


def _stage_weight(cost: CostSpec) -> np.ndarray:
    """Block diagonal weight on (x_1, ..., x_T): T-1 copies of Q, then P."""
    T, n_x = cost.T, cost.Q.shape[0]
    W = np.zeros((n_x * T, n_x * T))
    for i in range(T - 1):
        W[i * n_x:(i + 1) * n_x, i * n_x:(i + 1) * n_x] = cost.Q
    W[(T - 1) * n_x:, (T - 1) * n_x:] = cost.P
    return W


def condense(pred: PredictionMatrices, cost: CostSpec) -> CondensedQP:
    """Eliminate states: J = G'WG + I_T (x) R, linmap = G'WH.

    W weights (x_1, ..., x_T) with T-1 copies of Q and a terminal P, so
    0.5 u'Ju + (linmap x0)'u reproduces half the stage sum up to a constant
    in x0.  Definiteness of J and of the spectral sandwich
    lam_min I <= J <= lam_max I is verified by Cholesky with a small shift.
    """
    if cost.T != pred.T:
        raise ValueError(f"cost horizon {cost.T} does not match prediction horizon {pred.T}")
    if cost.Q.shape[0] != pred.n_x:
        raise ValueError(
            f"Q has dimension {cost.Q.shape[0]} but prediction uses n_x = {pred.n_x}"
        )
    if cost.R.shape[0] != pred.n_u:
        raise ValueError(
            f"R has dimension {cost.R.shape[0]} but prediction uses n_u = {pred.n_u}"
        )
    W = _stage_weight(cost)
    J = pred.G.T @ W @ pred.G + np.kron(np.eye(pred.T), cost.R)
    J = 0.5 * (J + J.T)
    linmap = pred.G.T @ W @ pred.H
    lam_min, lam_max = spectral_bounds(J)
    if lam_min <= 0:
        raise ValueError(f"condensed Hessian is not strongly convex (lam_min = {lam_min:.3e})")
    slack = 1e-8 * max(1.0, lam_max)
    n = J.shape[0]
    for M, name in (
        (lam_max * np.eye(n) - J, "lam_max*I - J"),
        (J - lam_min * np.eye(n), "J - lam_min*I"),
    ):
        try:
            np.linalg.cholesky(M + slack * np.eye(n))
        except np.linalg.LinAlgError:
            raise RuntimeError(f"spectral sandwich violated: {name} is not PSD") from None
    return CondensedQP(
        J=J, linmap=linmap, lam_min=lam_min, lam_max=lam_max, n_u=pred.n_u, T=pred.T
    )


def condensed_objective(qp: CondensedQP, x0: np.ndarray, u: np.ndarray) -> float:
    """0.5 u'Ju + q(x0)'u — half the eliminated stage sum, constant dropped."""
    u = np.asarray(u, dtype=float).ravel()
    return float(0.5 * u @ qp.J @ u + qp.q(x0) @ u)
