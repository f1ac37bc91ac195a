"""Problem construction: JSON loading and seeded random benchmark instances.

A problem file carries dynamics, weights, horizon, and input bounds; a model
config additionally names the input channels and lists the horizons an
example is meant to be run at.  Random instances draw the condensed Hessian
directly through its eigendecomposition so the extreme eigenvalues are known
exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mpc import (
    CondensedQP,
    CostSpec,
    LinearSystem,
    build_prediction,
    condense,
    solve_dare,
)
from .rateamp import RateAmpSet


@dataclass(frozen=True)
class ProblemDef:
    """A complete MPC problem: dynamics, cost over a horizon, and input set."""

    system: LinearSystem
    cost: CostSpec
    uset: RateAmpSet

    def __post_init__(self):
        if self.cost.T != self.uset.T:
            raise ValueError(
                f"cost horizon {self.cost.T} does not match input-set horizon {self.uset.T}"
            )
        if self.system.n_u != self.uset.n_u:
            raise ValueError(
                f"system has {self.system.n_u} inputs but the input set has {self.uset.n_u}"
            )


def build_qp(problem: ProblemDef) -> CondensedQP:
    """Condense a problem definition into its dense input-space QP."""
    return condense(build_prediction(problem.system, problem.cost.T), problem.cost)


def _get(data: dict, name: str, required: bool = True, default=None):
    if name not in data:
        if required:
            raise ValueError(f"field '{name}': missing")
        return default
    return data[name]


def _matrix(data: dict, name: str, required: bool = True, default=None) -> np.ndarray | None:
    raw = _get(data, name, required, None)
    if raw is None:
        return default
    try:
        M = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as e:
        raise ValueError(f"field '{name}': not numeric ({e})") from None
    if not np.all(np.isfinite(M)):
        raise ValueError(f"field '{name}': contains non-finite entries")
    return M


def load_problem(path) -> ProblemDef:
    """Read a problem definition from a JSON file.

    Required fields: A, B, Q, R, T, a, r.  Optional: P (defaults to the
    Riccati terminal weight), Ts (default 1.0), u_prev (default 0).
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ValueError(f"cannot read problem file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ValueError(f"problem file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ValueError(f"problem file {path} must hold a JSON object")
    try:
        system = LinearSystem(
            A=_matrix(data, "A"),
            B=_matrix(data, "B"),
            Ts=float(_get(data, "Ts", required=False, default=1.0)),
        )
        Q = _matrix(data, "Q")
        R = _matrix(data, "R")
        T = int(_get(data, "T"))
        P = _matrix(data, "P", required=False)
        if P is None:
            P = solve_dare(system, Q, R)
        cost = CostSpec(Q=Q, R=R, P=P, T=T)
        uset = RateAmpSet(
            a=np.broadcast_to(_matrix(data, "a"), (system.n_u,)),
            r=np.broadcast_to(_matrix(data, "r"), (system.n_u,)),
            u_prev=np.broadcast_to(
                _matrix(data, "u_prev", required=False, default=np.zeros(1)),
                (system.n_u,),
            ),
            T=T,
        )
        return ProblemDef(system=system, cost=cost, uset=uset)
    except ValueError as e:
        raise ValueError(f"problem file {path}: {e}") from None


@dataclass(frozen=True)
class ModelConfig:
    """A named example model: dynamics, channel labels, bounds, run horizons."""

    name: str
    system: LinearSystem
    labels: tuple[str, ...]
    a: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    horizons: tuple[int, ...]
    x0_scale: float = 1.0
    notes: str = ""

    def __post_init__(self):
        if len(self.labels) != self.system.n_u:
            raise ValueError(
                f"{len(self.labels)} labels for {self.system.n_u} input channels"
            )
        if not self.horizons or any(T < 2 for T in self.horizons):
            raise ValueError(f"horizons must all be >= 2, got {self.horizons}")
        if not self.x0_scale > 0:
            raise ValueError(f"x0_scale must be positive, got {self.x0_scale}")

    def problem(self, T: int) -> ProblemDef:
        """Instantiate the model at one horizon, with the Riccati terminal weight."""
        cost = CostSpec(Q=self.Q, R=self.R, P=solve_dare(self.system, self.Q, self.R), T=T)
        uset = RateAmpSet(
            a=self.a, r=self.r, u_prev=np.zeros(self.system.n_u), T=T
        )
        return ProblemDef(system=self.system, cost=cost, uset=uset)


def load_model_config(path) -> ModelConfig:
    """Read a model config from a JSON file.

    Dynamics come either as discrete matrices A, B or as continuous matrices
    A_continuous, B_continuous discretized by forward Euler with the given Ts.
    Q and R default to identity; horizons default to (4, 8, 16, 32).
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ValueError(f"cannot read model config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ValueError(f"model config {path} is not valid JSON: {e}") from None
    try:
        Ts = float(_get(data, "Ts", required=False, default=1.0))
        if "A" in data:
            A = _matrix(data, "A")
            B = _matrix(data, "B")
        else:
            Ac = _matrix(data, "A_continuous")
            Bc = _matrix(data, "B_continuous")
            A = np.eye(Ac.shape[0]) + Ts * Ac
            B = Ts * Bc
        system = LinearSystem(A=A, B=B, Ts=Ts)
        n_x, n_u = system.n_x, system.n_u
        labels = tuple(_get(data, "labels"))
        return ModelConfig(
            name=str(_get(data, "name", required=False, default=path.stem)),
            system=system,
            labels=labels,
            a=np.broadcast_to(_matrix(data, "a"), (n_u,)),
            r=np.broadcast_to(_matrix(data, "r"), (n_u,)),
            Q=_matrix(data, "Q", required=False, default=np.eye(n_x)),
            R=_matrix(data, "R", required=False, default=np.eye(n_u)),
            horizons=tuple(int(T) for T in _get(data, "horizons", required=False, default=(4, 8, 16, 32))),
            x0_scale=float(_get(data, "x0_scale", required=False, default=1.0)),
            notes=str(_get(data, "notes", required=False, default="")),
        )
    except ValueError as e:
        raise ValueError(f"model config {path}: {e}") from None


@dataclass(frozen=True)
class RandomProblem:
    """A synthetic condensed QP with unit-box-like input set and known spectrum.

    The linear map from x0 to the gradient offset is the identity, so drawing
    x0 ~ N(0, x0_std^2 I) draws the QP's linear term directly.
    """

    qp: CondensedQP
    uset: RateAmpSet
    x0_std: float


def gen_random_problem(
    T: int,
    n_u: int = 1,
    seed: int = 0,
    cond_target: float = 100.0,
    instance: int = 0,
    x0_std: float = 10.0,
) -> RandomProblem:
    """Draw a random strongly convex condensed QP with conditioning <= cond_target.

    J = W diag(lam) W' with W a seeded random orthogonal matrix and lam
    log-uniform on [1, cond_target], so the extreme eigenvalues are known
    exactly.  The stream is keyed on (seed, T, instance): the same key always
    reproduces bit-identical data.  The input set is the unit-bound set
    a = r = 1, u_prev = 0.
    """
    if T < 2 or n_u < 1:
        raise ValueError(f"need T >= 2 and n_u >= 1, got T={T}, n_u={n_u}")
    if not cond_target >= 1.0:
        raise ValueError(f"cond_target must be >= 1, got {cond_target}")
    n = n_u * T
    rng = np.random.default_rng([seed, T, instance])
    lam = np.exp(rng.uniform(0.0, np.log(cond_target), size=n))
    W, _ = np.linalg.qr(rng.normal(size=(n, n)))
    J = (W * lam) @ W.T
    J = 0.5 * (J + J.T)
    qp = CondensedQP(
        J=J,
        linmap=np.eye(n),
        lam_min=float(lam.min()),
        lam_max=float(lam.max()),
        n_u=n_u,
        T=T,
    )
    uset = RateAmpSet(a=np.ones(n_u), r=np.ones(n_u), u_prev=np.zeros(n_u), T=T)
    return RandomProblem(qp=qp, uset=uset, x0_std=x0_std)


def sample_x0(problem: RandomProblem, seed: int, T: int, instance: int) -> np.ndarray:
    """Draw the Gaussian linear-term vector for one benchmark instance.

    Keyed separately from the problem data so x0 and J come from independent
    streams under the same (seed, T, instance) triple.
    """
    rng = np.random.default_rng([seed, T, instance, 1])
    return rng.normal(0.0, problem.x0_std, size=problem.qp.J.shape[0])
