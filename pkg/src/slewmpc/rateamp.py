"""Input sets with amplitude and slew-rate bounds, and projections onto them.

The feasible set couples consecutive stages,

    |u_k| <= a,   |u_k - u_{k-1}| <= r   (u_{-1} is the previously applied input),

and is the intersection of T-1 planar "pair" sets, one per consecutive stage
pair (u_{k-1}, u_k).  Pairs with odd k are mutually disjoint, as are pairs
with even k, so each parity class admits an exact closed-form projection; the
full projection is computed by Dykstra's alternating scheme over the two
classes.  The planar projection itself is a piecewise map: a point is either
clamped to a box, saturated onto a +-45 degree rate edge, or sent to one of
the four corners where rate and amplitude edges meet.

Hot paths (pair projection, group sweeps, Dykstra iterations) are compiled
with numba; the scalar helpers below share the same kernels so every code
path applies bit-identical arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# set descriptions


@dataclass(frozen=True)
class RateAmpSet:
    """Per-channel amplitude bounds a, rate bounds r, and the last applied input.

    ``a``, ``r`` and ``u_prev`` broadcast against each other to the channel
    count; ``T`` is the number of stages in the trajectory (at least 2, so
    that every stage belongs to a pair).  Nonemptiness requires 0 < r <= 2a
    and |u_prev| <= a, which is enforced here.
    """

    a: np.ndarray
    r: np.ndarray
    u_prev: np.ndarray
    T: int

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        u_prev = np.atleast_1d(np.asarray(self.u_prev, dtype=float))
        n_u = max(a.size, r.size, u_prev.size)
        try:
            a, r, u_prev = (np.broadcast_to(v, (n_u,)).copy() for v in (a, r, u_prev))
        except ValueError:
            raise ValueError(
                f"a, r, u_prev have incompatible sizes {a.size}, {r.size}, {u_prev.size}"
            ) from None
        for v, name in ((a, "a"), (r, "r"), (u_prev, "u_prev")):
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(r <= 0):
            raise ValueError(f"rate bound r must be strictly positive, got {r}")
        if np.any(r > 2 * a):
            raise ValueError(f"rate bound r must satisfy r <= 2a, got r={r}, a={a}")
        if np.any(np.abs(u_prev) > a):
            raise ValueError(
                f"previous input must satisfy |u_prev| <= a, got u_prev={u_prev}, a={a}"
            )
        if int(self.T) < 2:
            raise ValueError(f"stage count T must be at least 2, got {self.T}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u_prev", u_prev)
        object.__setattr__(self, "T", int(self.T))

    @property
    def n_u(self) -> int:
        return self.a.size

    @property
    def dim(self) -> int:
        return self.T * self.n_u

    def with_u_prev(self, u_prev) -> "RateAmpSet":
        """Same bounds, new previously-applied input (used when stepping a loop)."""
        return RateAmpSet(a=self.a, r=self.r, u_prev=u_prev, T=self.T)


@dataclass(frozen=True)
class PairBounds:
    """Interval data for one planar pair subproblem.

    ``a0_min``/``a0_max`` bound the first coordinate (tightened by the rate
    link to u_prev for the leading pair), ``a1_min``/``a1_max`` the induced
    box for the second; ``a`` and ``r`` are the underlying channel bounds.
    """

    a0_min: float
    a0_max: float
    a1_min: float
    a1_max: float
    a: float
    r: float


class Region(Enum):
    """Cells of the planar projection map: diagonal (A), box (B), corner (C)."""

    A1 = "A1"
    A2 = "A2"
    B1 = "B1"
    B2 = "B2"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"


@dataclass(frozen=True)
class CornerSet:
    """The four rate/amplitude corner vertices and their diagonal projections p_ci."""

    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    c4: np.ndarray
    p_c1: float
    p_c2: float
    p_c3: float
    p_c4: float


def pair_bounds(uset: RateAmpSet, k: int, channel: int = 0) -> PairBounds:
    """Bounds of pair k (coupling stages k-1 and k) for one channel.

    The leading pair (k = 1) tightens the first coordinate to
    [max(-a, u_prev - r), min(a, u_prev + r)]; later pairs use [-a, a].
    """
    if not 1 <= k <= uset.T - 1:
        raise ValueError(f"pair index k must lie in [1, {uset.T - 1}], got {k}")
    if not 0 <= channel < uset.n_u:
        raise ValueError(f"channel must lie in [0, {uset.n_u - 1}], got {channel}")
    a = float(uset.a[channel])
    r = float(uset.r[channel])
    if k == 1:
        up = float(uset.u_prev[channel])
        a0_min = max(-a, up - r)
        a0_max = min(a, up + r)
    else:
        a0_min, a0_max = -a, a
    return PairBounds(
        a0_min=a0_min,
        a0_max=a0_max,
        a1_min=max(-a, a0_min - r),
        a1_max=min(a, a0_max + r),
        a=a,
        r=r,
    )


def corners(bounds: PairBounds) -> CornerSet:
    """Corner vertices delimiting the two rate edges (clamped formulas)."""
    a, r = bounds.a, bounds.r
    c1 = np.array([bounds.a0_min, min(r + bounds.a0_min, a)])
    c2 = np.array([min(a - r, bounds.a0_max), min(a, r + bounds.a0_max)])
    c3 = np.array([bounds.a0_max, bounds.a0_max - r])
    c4 = np.array([max(r - a, bounds.a0_min), max(-a, bounds.a0_min - r)])
    return CornerSet(
        c1=c1, c2=c2, c3=c3, c4=c4,
        p_c1=float((c1[0] + c1[1]) / SQRT2),
        p_c2=float((c2[0] + c2[1]) / SQRT2),
        p_c3=float((c3[0] + c3[1]) / SQRT2),
        p_c4=float((c4[0] + c4[1]) / SQRT2),
    )


def rotate45(point) -> np.ndarray:
    """Rotate into the diagonal basis: p = (u0 + u1)/sqrt2, pt = (u1 - u0)/sqrt2."""
    u0, u1 = float(point[0]), float(point[1])
    return np.array([(u0 + u1) / SQRT2, (u1 - u0) / SQRT2])


def unrotate45(pp) -> np.ndarray:
    """Inverse of :func:`rotate45`."""
    p, pt = float(pp[0]), float(pp[1])
    return np.array([(p - pt) / SQRT2, (p + pt) / SQRT2])


# ---------------------------------------------------------------------------
# planar projection kernel
#
# Region tests compare s = u0 + u1 (sqrt2 times the diagonal coordinate p)
# against the corner values s_ci = ci_x + ci_y, which avoids square roots in
# the hot path while applying exactly the p-based tests.  Tie precedence is
# corners, then diagonals, then box.


@njit(cache=True)
def _pair_project_scalar(x0, x1, b0lo, b0hi, b1lo, b1hi, amp, rate):
    c1x = b0lo
    c1y = min(rate + b0lo, amp)
    c2x = min(amp - rate, b0hi)
    c2y = min(amp, rate + b0hi)
    c3x = b0hi
    c3y = b0hi - rate
    c4x = max(rate - amp, b0lo)
    c4y = max(-amp, b0lo - rate)
    s = x0 + x1
    if s <= c1x + c1y and x1 >= c1y:
        return c1x, c1y
    if s >= c2x + c2y and x0 <= c2x:
        return c2x, c2y
    if s >= c3x + c3y and x1 <= c3y:
        return c3x, c3y
    if s <= c4x + c4y and x0 >= c4x:
        return c4x, c4y
    d = x1 - x0
    if d > rate and s >= c1x + c1y and s <= c2x + c2y:
        # saturate the rotated coordinate pt at +r/sqrt2, keep p
        return 0.5 * (s - rate), 0.5 * (s + rate)
    if d < -rate and s >= c4x + c4y and s <= c3x + c3y:
        return 0.5 * (s + rate), 0.5 * (s - rate)
    y0 = min(max(x0, b0lo), b0hi)
    y1 = min(max(x1, b1lo), b1hi)
    return y0, y1


def classify_region(point, bounds: PairBounds) -> Region:
    """Which cell of the projection map contains ``point``.

    Uses the same comparisons (and tie precedence C, then A, then B) as the
    projection kernel, so the reported region is always the map actually
    applied.  Feasible points land in a B region, whose map is the identity
    there; the B1/B2 split is at the diagonal through the box center.
    """
    x0, x1 = float(point[0]), float(point[1])
    a, r = bounds.a, bounds.r
    c1x, c1y = bounds.a0_min, min(r + bounds.a0_min, a)
    c2x, c2y = min(a - r, bounds.a0_max), min(a, r + bounds.a0_max)
    c3x, c3y = bounds.a0_max, bounds.a0_max - r
    c4x, c4y = max(r - a, bounds.a0_min), max(-a, bounds.a0_min - r)
    s = x0 + x1
    if s <= c1x + c1y and x1 >= c1y:
        return Region.C1
    if s >= c2x + c2y and x0 <= c2x:
        return Region.C2
    if s >= c3x + c3y and x1 <= c3y:
        return Region.C3
    if s <= c4x + c4y and x0 >= c4x:
        return Region.C4
    d = x1 - x0
    if d > r and s >= c1x + c1y and s <= c2x + c2y:
        return Region.A1
    if d < -r and s >= c4x + c4y and s <= c3x + c3y:
        return Region.A2
    s_mid = 0.5 * (bounds.a0_min + bounds.a0_max + bounds.a1_min + bounds.a1_max)
    return Region.B1 if s <= s_mid else Region.B2


def project_pair(point, bounds: PairBounds) -> np.ndarray:
    """Exact Euclidean projection of a planar point onto one pair set."""
    y0, y1 = _pair_project_scalar(
        float(point[0]), float(point[1]),
        bounds.a0_min, bounds.a0_max, bounds.a1_min, bounds.a1_max,
        bounds.a, bounds.r,
    )
    return np.array([y0, y1])


# ---------------------------------------------------------------------------
# parity groups over a trajectory


class _GroupTables(NamedTuple):
    """Flattened index/bound arrays for all (pair, channel) problems of one parity."""

    idx0: np.ndarray
    idx1: np.ndarray
    b0lo: np.ndarray
    b0hi: np.ndarray
    b1lo: np.ndarray
    b1hi: np.ndarray
    amp: np.ndarray
    rate: np.ndarray


def _build_tables(uset: RateAmpSet, ks: list[int]) -> _GroupTables:
    n_u = uset.n_u
    m = len(ks) * n_u
    idx0 = np.empty(m, dtype=np.int64)
    idx1 = np.empty(m, dtype=np.int64)
    b0lo = np.empty(m)
    b0hi = np.empty(m)
    b1lo = np.empty(m)
    b1hi = np.empty(m)
    amp = np.empty(m)
    rate = np.empty(m)
    j = 0
    for k in ks:
        for c in range(n_u):
            b = pair_bounds(uset, k, c)
            idx0[j] = (k - 1) * n_u + c
            idx1[j] = k * n_u + c
            b0lo[j], b0hi[j] = b.a0_min, b.a0_max
            b1lo[j], b1hi[j] = b.a1_min, b.a1_max
            amp[j], rate[j] = b.a, b.r
            j += 1
    return _GroupTables(idx0, idx1, b0lo, b0hi, b1lo, b1hi, amp, rate)


def _pair_tables(uset: RateAmpSet) -> tuple[_GroupTables, _GroupTables]:
    """(even, odd) parity tables over pair indices 1..T-1."""
    odd = [k for k in range(1, uset.T) if k % 2 == 1]
    even = [k for k in range(1, uset.T) if k % 2 == 0]
    return _build_tables(uset, even), _build_tables(uset, odd)


@njit(cache=True)
def _project_group_inplace(u, idx0, idx1, b0lo, b0hi, b1lo, b1hi, amp, rate):
    for j in range(idx0.size):
        y0, y1 = _pair_project_scalar(
            u[idx0[j]], u[idx1[j]],
            b0lo[j], b0hi[j], b1lo[j], b1hi[j], amp[j], rate[j],
        )
        u[idx0[j]] = y0
        u[idx1[j]] = y1


def project_group(u, uset: RateAmpSet, parity: str) -> np.ndarray:
    """Exact projection onto the intersection of all pairs of one parity.

    Pairs of equal parity touch disjoint stages, so the group projection is
    the independent planar projection of each pair; untouched coordinates are
    returned unchanged.
    """
    u = np.asarray(u, dtype=float)
    if u.size != uset.dim:
        raise ValueError(f"trajectory has size {u.size}, expected {uset.dim}")
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    even, odd = _pair_tables(uset)
    tab = even if parity == "even" else odd
    out = u.copy()
    _project_group_inplace(out, *tab)
    return out


def contains(u, uset: RateAmpSet, tol: float = 0.0) -> bool:
    """Membership test: amplitude, stage-to-stage rate, and the rate from u_prev."""
    u = np.asarray(u, dtype=float)
    if u.size != uset.dim:
        raise ValueError(f"trajectory has size {u.size}, expected {uset.dim}")
    U = u.reshape(uset.T, uset.n_u)
    if np.any(np.abs(U) > uset.a + tol):
        return False
    if np.any(np.abs(U[0] - uset.u_prev) > uset.r + tol):
        return False
    return not np.any(np.abs(np.diff(U, axis=0)) > uset.r + tol)


@njit(cache=True)
def _contains_flat(u, a, r, u_prev, T, n_u, tol):
    for c in range(n_u):
        prev = u_prev[c]
        for k in range(T):
            v = u[k * n_u + c]
            if abs(v) > a[c] + tol:
                return False
            if abs(v - prev) > r[c] + tol:
                return False
            prev = v
    return True


# ---------------------------------------------------------------------------
# Dykstra's alternating projection over the two parity groups


@njit(cache=True)
def _dykstra_chunk(
    x, mu, gam, w, xprev, n_sweeps,
    e_idx0, e_idx1, e_b0lo, e_b0hi, e_b1lo, e_b1hi, e_amp, e_rate,
    o_idx0, o_idx1, o_b0lo, o_b0hi, o_b1lo, o_b1hi, o_amp, o_rate,
):
    """Run ``n_sweeps`` Dykstra sweeps in place.

    Returns the final sweep's (inf-norm step, inf-norm even/odd iterate gap).
    """
    n = x.size
    step = np.inf
    gap = np.inf
    for s in range(n_sweeps):
        for i in range(n):
            xprev[i] = x[i]
        # even-group projection with its increment
        for i in range(n):
            w[i] = x[i] + mu[i]
        _project_group_inplace(w, e_idx0, e_idx1, e_b0lo, e_b0hi, e_b1lo, e_b1hi, e_amp, e_rate)
        for i in range(n):
            mu[i] = mu[i] + x[i] - w[i]
        # odd-group projection with its increment
        for i in range(n):
            x[i] = w[i] + gam[i]
        _project_group_inplace(x, o_idx0, o_idx1, o_b0lo, o_b0hi, o_b1lo, o_b1hi, o_amp, o_rate)
        for i in range(n):
            gam[i] = gam[i] + w[i] - x[i]
        if s == n_sweeps - 1:
            step = 0.0
            gap = 0.0
            for i in range(n):
                d = abs(x[i] - xprev[i])
                if d > step:
                    step = d
                d = abs(x[i] - w[i])
                if d > gap:
                    gap = d
    return step, gap


@njit(cache=True)
def _dykstra_run(
    x, mu, gam, w, xprev, j_max, eps, stride,
    e_idx0, e_idx1, e_b0lo, e_b0hi, e_b1lo, e_b1hi, e_amp, e_rate,
    o_idx0, o_idx1, o_b0lo, o_b0hi, o_b1lo, o_b1hi, o_amp, o_rate,
):
    """Sweeps until step and group gap (checked every ``stride`` sweeps) drop below eps.

    The step alone is not a sound stopping signal: the iterate can sit still
    for many sweeps while the correction vectors drain (e.g. after over-
    shooting a corner), then move again.  Requiring the even- and odd-group
    iterates to agree as well rules those plateaus out, since both sequences
    converge to the projection.
    """
    sweeps = 0
    step = np.inf
    gap = np.inf
    while sweeps < j_max:
        n_next = min(stride, j_max - sweeps)
        step, gap = _dykstra_chunk(
            x, mu, gam, w, xprev, n_next,
            e_idx0, e_idx1, e_b0lo, e_b0hi, e_b1lo, e_b1hi, e_amp, e_rate,
            o_idx0, o_idx1, o_b0lo, o_b0hi, o_b1lo, o_b1hi, o_amp, o_rate,
        )
        sweeps += n_next
        if step < eps and gap < eps:
            break
    return sweeps, step, gap


@dataclass
class DykstraResult:
    """Projection output with iteration diagnostics.

    ``u`` lies in the odd-parity group set (the final projection applied);
    ``last_step`` is the final sweep's inf-norm iterate change and
    ``last_gap`` the final even/odd group disagreement — both below the
    tolerance when the run terminated early.  ``snapshots`` maps requested
    sweep counts to copies of the iterate.
    """

    u: np.ndarray
    sweeps: int
    last_step: float
    last_gap: float = np.inf
    snapshots: dict[int, np.ndarray] | None = None


def dykstra_project(
    u0,
    uset: RateAmpSet,
    j_max: int = 1000,
    eps: float = 1e-9,
    check_stride: int = 10,
    feas_tol: float = 1e-12,
    trace_sweeps=None,
) -> DykstraResult:
    """Project a trajectory onto the full rate+amplitude set.

    Alternates exact projections onto the even- and odd-parity pair groups
    while carrying Dykstra's increment vectors, which makes the iteration
    converge to the exact projection rather than a mere feasible point.
    Termination (evaluated every ``check_stride`` sweeps) requires both the
    sweep's iterate change and the disagreement between the two group
    iterates to fall below ``eps`` — the iterate change alone can vanish
    transiently while the correction vectors are still draining.  Points
    already inside the set (within ``feas_tol``) are returned unchanged.

    Args:
        u0: stacked trajectory of size T*n_u.
        uset: constraint description.
        j_max: sweep budget.
        eps: inf-norm step threshold for termination.
        check_stride: sweeps between termination checks.
        feas_tol: tolerance of the initial membership pre-check.
        trace_sweeps: optional iterable of sweep counts at which to record
            snapshots of the iterate (for convergence studies).
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.size != uset.dim:
        raise ValueError(f"trajectory has size {u0.size}, expected {uset.dim}")
    if j_max < 1:
        raise ValueError(f"j_max must be positive, got {j_max}")
    if check_stride < 1:
        raise ValueError(f"check_stride must be positive, got {check_stride}")
    want = sorted(set(int(t) for t in trace_sweeps)) if trace_sweeps is not None else []
    if want and want[0] < 1:
        raise ValueError("trace sweep indices must be >= 1")
    if contains(u0, uset, feas_tol):
        snaps = {t: u0.copy() for t in want} if want else None
        return DykstraResult(u=u0.copy(), sweeps=0, last_step=0.0, last_gap=0.0, snapshots=snaps)

    even, odd = _pair_tables(uset)
    x = u0.astype(float).copy()
    mu = np.zeros_like(x)
    gam = np.zeros_like(x)
    w = np.empty_like(x)
    xprev = np.empty_like(x)

    if not want:
        sweeps, step, gap = _dykstra_run(
            x, mu, gam, w, xprev, j_max, eps, check_stride, *even, *odd
        )
        return DykstraResult(
            u=x, sweeps=int(sweeps), last_step=float(step), last_gap=float(gap)
        )

    # chunk between snapshot boundaries, honoring the stride-based check
    snaps: dict[int, np.ndarray] = {}
    boundaries = sorted(set(want) | set(range(check_stride, j_max + 1, check_stride)) | {j_max})
    sweeps = 0
    step = gap = np.inf
    for b in boundaries:
        if b > j_max:
            break
        step, gap = _dykstra_chunk(x, mu, gam, w, xprev, b - sweeps, *even, *odd)
        sweeps = b
        if b in want:
            snaps[b] = x.copy()
        if (b % check_stride == 0 or b == j_max) and step < eps and gap < eps:
            break
    for t in want:
        if t not in snaps:  # terminated before this checkpoint; iterate has settled
            snaps[t] = x.copy()
    return DykstraResult(
        u=x, sweeps=int(sweeps), last_step=float(step), last_gap=float(gap), snapshots=snaps
    )
