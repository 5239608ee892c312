"""Fixed-step simulation of the full closed loop.

The coupled state is every agent's pose plus its tracking reference ``u_i``.
Poses follow the unicycle under the tracking law; references follow the
gradient flow of the formation cost evaluated at the measured positions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

from . import _backend, _pykernel
from .analysis import optimal_configuration
from .controller import GainConfig, lipschitz_constant
from .distributed import distributed_rhs
from .dynamics import AgentPose, wrap_angle
from .errors import DimensionMismatch, UnstableStep
from .graph import FormationSpec

log = logging.getLogger(__name__)

DEFAULT_STRIDE = 10
DEFAULT_TOL = 1e-6
SUSTAIN_SAMPLES = 100
# dt <= DT_SAFETY / max(k_max, epsilon * ell)
DT_SAFETY = 0.1
MODES = ("centralized", "distributed")


@dataclass(frozen=True, eq=False)
class SwarmState:
    poses: np.ndarray  # (N, 3): x, y, heading
    inputs: np.ndarray  # (2N,): stacked references u
    time: float = 0.0

    def __post_init__(self):
        poses = np.array(self.poses, dtype=float).reshape(-1, 3)
        inputs = np.array(self.inputs, dtype=float).reshape(-1)
        if inputs.size != 2 * poses.shape[0]:
            raise DimensionMismatch(f"{inputs.size} input components for {poses.shape[0]} agents")
        poses[:, 2] = wrap_angle(poses[:, 2])
        poses.setflags(write=False)
        inputs.setflags(write=False)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_agents(self) -> int:
        return self.poses.shape[0]

    @property
    def positions(self) -> np.ndarray:
        """Stacked positions ``r`` in ``R^{2N}``."""
        return self.poses[:, :2].reshape(-1)

    def pose(self, i: int) -> AgentPose:
        return AgentPose(*self.poses[i])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.poses.reshape(-1), self.inputs])

    @classmethod
    def from_vector(cls, y, n_agents: int, time: float = 0.0) -> "SwarmState":
        y = np.asarray(y, dtype=float)
        return cls(y[: 3 * n_agents].reshape(n_agents, 3), y[3 * n_agents :], time)

    @classmethod
    def at_rest(cls, poses, time: float = 0.0) -> "SwarmState":
        """References placed on the agents, so tracking error starts at zero."""
        poses = np.asarray(poses, dtype=float).reshape(-1, 3)
        return cls(poses, poses[:, :2].reshape(-1), time)


@dataclass(frozen=True)
class RandomInitial:
    """Positions uniform in a disc around the origin, headings uniform in ``(-pi, pi]``."""

    radius: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("initial radius must be positive")


@dataclass(frozen=True, eq=False)
class ExplicitInitial:
    poses: np.ndarray

    def __post_init__(self):
        poses = np.array(self.poses, dtype=float)
        if poses.ndim != 2 or poses.shape[1] != 3:
            raise DimensionMismatch("explicit initial poses must be rows of (x, y, heading)")
        poses.setflags(write=False)
        object.__setattr__(self, "poses", poses)


InitialCondition = Union[RandomInitial, ExplicitInitial]


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    spec: FormationSpec
    gains: GainConfig
    target: np.ndarray
    initial: InitialCondition
    t_final: float
    dt: float
    stride: int = DEFAULT_STRIDE
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        target = np.array(self.target, dtype=float)
        if target.shape != (2,):
            raise DimensionMismatch("target must be a point in R^2")
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ValueError("t_final must be at least one step")
        if self.stride < 1:
            raise ValueError("recording stride must be a positive integer")
        self.gains.k_vector(self.spec.n_agents)
        if isinstance(self.initial, ExplicitInitial) and self.initial.poses.shape[0] != self.spec.n_agents:
            raise DimensionMismatch(
                f"{self.initial.poses.shape[0]} initial poses for {self.spec.n_agents} agents"
            )

    def max_stable_dt(self) -> float:
        return max_stable_dt(self.spec, self.gains)


def max_stable_dt(spec: FormationSpec, gains: GainConfig) -> float:
    ell = lipschitz_constant(spec, gains)
    return DT_SAFETY / max(gains.k_max, gains.epsilon * ell)


def initial_state(scenario: Scenario, seed: Optional[int] = None) -> SwarmState:
    """Initial swarm state; references start on the agents' positions."""
    init = scenario.initial
    if isinstance(init, ExplicitInitial):
        return SwarmState.at_rest(init.poses)
    seed = init.seed if seed is None else seed
    if seed is None:
        raise ValueError(f"scenario {scenario.name!r} has random initial poses and needs a seed")
    rng = np.random.default_rng(seed)
    n = scenario.spec.n_agents
    radius = init.radius * np.sqrt(rng.random(n))
    angle = 2 * np.pi * rng.random(n)
    heading = np.pi - 2 * np.pi * rng.random(n)
    for i in range(n):
        # exact +pi is the unstable heading equilibrium of the tracking loop
        while heading[i] == np.pi:
            heading[i] = np.pi - 2 * np.pi * rng.random()
    poses = np.stack([radius * np.cos(angle), radius * np.sin(angle), heading], axis=1)
    return SwarmState.at_rest(poses)


class Sample(NamedTuple):
    time: float
    state: SwarmState
    cost_total: float
    gradient_norm: float
    formation_residual: float
    target_distance: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray  # (S,)
    poses: np.ndarray  # (S, N, 3)
    inputs: np.ndarray  # (S, 2N)
    cost: np.ndarray
    gradient_norm: np.ndarray
    formation_residual: np.ndarray
    target_distance: np.ndarray
    dt: float
    stride: int
    mode: str = "centralized"
    backend: str = "python"

    def __len__(self) -> int:
        return self.times.size

    @property
    def n_agents(self) -> int:
        return self.poses.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :, :2].reshape(len(self), -1)

    def state(self, i: int) -> SwarmState:
        return SwarmState(self.poses[i], self.inputs[i], self.times[i])

    @property
    def final_state(self) -> SwarmState:
        return self.state(-1)

    def samples(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield Sample(
                float(self.times[i]),
                self.state(i),
                float(self.cost[i]),
                float(self.gradient_norm[i]),
                float(self.formation_residual[i]),
                float(self.target_distance[i]),
            )


def trajectory_metrics(poses, spec: FormationSpec, gains: GainConfig, target):
    """Cost, gradient norm, formation residual and target distance per sample."""
    p = np.asarray(poses, dtype=float)[..., :2]
    q = np.asarray(target, dtype=float)
    inc = spec.incidence.astype(float)
    edge_err = np.einsum("ne,snk->sek", inc, p) - spec.displacements
    to_target = p - q
    formation_sq = np.sum(edge_err**2, axis=(1, 2))
    target_sq = np.sum(to_target**2, axis=(1, 2))
    cost = 0.5 * gains.a * formation_sq + 0.5 * gains.b * target_sq
    lap_p = np.einsum("nm,smk->snk", inc @ inc.T, p)
    grad = gains.a * (lap_p - inc @ spec.displacements) + gains.b * to_target
    grad_norm = np.sqrt(np.sum(grad**2, axis=(1, 2)))
    return cost, grad_norm, np.sqrt(formation_sq), np.sqrt(target_sq)


def kernel_args(spec: FormationSpec, gains: GainConfig, target) -> tuple:
    """Arguments shared by both kernels after the state: neighbour lists, target, gains."""
    ptr, nbr, sd = _pykernel.neighbour_lists(spec.incidence, spec.displacements)
    q = np.asarray(target, dtype=float)
    ea = gains.epsilon * gains.a
    eb = gains.epsilon * gains.b
    return ptr, nbr, sd, q, gains.k_vector(spec.n_agents), ea, eb


def integrate(
    scenario: Scenario,
    mode: str = "centralized",
    *,
    seed: Optional[int] = None,
    dt: Optional[float] = None,
    t_final: Optional[float] = None,
    stride: Optional[int] = None,
    state0: Optional[SwarmState] = None,
    backend: Optional[str] = None,
) -> Trajectory:
    """RK4 integration of the closed loop from ``state0`` (or the scenario's initial state).

    ``mode="distributed"`` evaluates the input flow agent by agent from
    relative views; ``"centralized"`` uses the stacked gradient in the
    selected kernel backend.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    spec, gains = scenario.spec, scenario.gains
    dt = scenario.dt if dt is None else float(dt)
    t_final = scenario.t_final if t_final is None else float(t_final)
    stride = scenario.stride if stride is None else int(stride)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    limit = max_stable_dt(spec, gains)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability limit {limit:.6g}")
    if state0 is None:
        state0 = initial_state(scenario, seed)
    n = spec.n_agents
    if state0.n_agents != n:
        raise DimensionMismatch(f"state has {state0.n_agents} agents, spec has {n}")
    n_steps = int(round(t_final / dt))
    y0 = state0.to_vector()

    if mode == "centralized":
        kernel = _backend.get_kernel(backend)
        backend_name = "cython" if kernel is not _pykernel else "python"
        records, failed = kernel.rk4_integrate(
            y0, *kernel_args(spec, gains, scenario.target), dt, n_steps, stride
        )
    else:
        backend_name = "python"
        rhs = distributed_rhs(spec, gains, scenario.target)
        records, failed = _pykernel.rk4_run(rhs, y0, n, dt, n_steps, stride)
    if failed >= 0:
        raise UnstableStep(
            f"non-finite state at step {failed} (t={state0.time + failed * dt:.6g}) in "
            f"scenario {scenario.name!r}; reduce dt or epsilon",
            step=failed,
            time=state0.time + failed * dt,
        )

    steps = np.arange(0, n_steps + 1, stride)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    times = state0.time + steps * dt
    poses = records[:, : 3 * n].reshape(-1, n, 3)
    inputs = records[:, 3 * n :]
    metrics = trajectory_metrics(poses, spec, gains, scenario.target)
    log.debug("integrated %s: %d steps, %d samples", scenario.name, n_steps, len(times))
    return Trajectory(times, poses, inputs, *metrics, dt=dt, stride=stride, mode=mode, backend=backend_name)


@dataclass(frozen=True)
class ConvergenceVerdict:
    converged: bool
    t_converged: Optional[float]
    final_formation_residual: float
    final_target_distance: float
    r_inf_deviation: float
    final_gradient_norm: float

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "t_converged": self.t_converged,
            "final_formation_residual": self.final_formation_residual,
            "final_target_distance": self.final_target_distance,
            "r_inf_deviation": self.r_inf_deviation,
            "final_gradient_norm": self.final_gradient_norm,
        }


def detect_convergence(
    traj: Trajectory,
    spec: FormationSpec,
    gains: GainConfig,
    target,
    tol: float = DEFAULT_TOL,
    sustain: int = SUSTAIN_SAMPLES,
) -> ConvergenceVerdict:
    """First sample from which ``|grad| <= tol (1 + |r|)`` holds for ``sustain`` samples.

    Trajectories shorter than ``sustain`` must satisfy the test throughout.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    r = traj.positions
    ok = traj.gradient_norm <= tol * (1.0 + np.linalg.norm(r, axis=1))
    window = min(sustain, len(traj))
    # run[i] = number of consecutive passing samples starting at i
    run = np.zeros(len(ok) + 1, dtype=np.int64)
    for i in range(len(ok) - 1, -1, -1):
        run[i] = run[i + 1] + 1 if ok[i] else 0
    hits = np.flatnonzero(run[:-1] >= window)
    r_inf = optimal_configuration(spec, gains, target)
    return ConvergenceVerdict(
        converged=bool(hits.size),
        t_converged=float(traj.times[hits[0]]) if hits.size else None,
        final_formation_residual=float(traj.formation_residual[-1]),
        final_target_distance=float(traj.target_distance[-1]),
        r_inf_deviation=float(np.linalg.norm(r[-1] - r_inf)),
        final_gradient_norm=float(traj.gradient_norm[-1]),
    )


def simulate_tracking(poses, references, gain_k, dt: float, t_final: float, stride: int = 1):
    """RK4 run of the unicycles alone, tracking references held fixed.

    Returns ``(times, poses)`` with poses of shape ``(samples, N, 3)``.
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    n = poses.shape[0]
    refs = np.asarray(references, dtype=float).reshape(n, 2)
    k = np.broadcast_to(np.asarray(gain_k, dtype=float), (n,)).copy()
    if not dt > 0 or t_final < 0:
        raise ValueError("need dt > 0 and t_final >= 0")
    n_steps = int(round(t_final / dt))

    def rhs(y):
        return _pykernel.plant_rates(y.reshape(n, 3), refs, k).reshape(-1)

    records, failed = _pykernel.rk4_run(rhs, poses.reshape(-1), n, dt, n_steps, stride)
    if failed >= 0:
        raise UnstableStep(f"non-finite pose at step {failed}", step=failed, time=failed * dt)
    steps = np.arange(0, n_steps + 1, stride)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps * dt, records.reshape(-1, n, 3)
