"""Per-agent realisation of the input flow from neighbour-relative measurements.

Each round takes a snapshot of the swarm, hands every agent a view made only
of relative displacements (to its formation neighbours and to the target),
and lets each agent compute its own input rate. Views never contain another
agent's absolute position.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import _pykernel
from .controller import GainConfig
from .dynamics import agent_tracking_rates
from .errors import MissingNeighborMessage, UnstableStep
from .graph import FormationSpec


class NeighborMessage(NamedTuple):
    edge_label: int
    # p_receiver - p_sender
    relative_displacement: tuple[float, float]


@dataclass(frozen=True, slots=True)
class AgentView:
    agent: int
    self_to_target: tuple[float, float]
    in_messages: tuple[NeighborMessage, ...]
    out_messages: tuple[NeighborMessage, ...]

    @property
    def degree(self) -> int:
        return len(self.in_messages) + len(self.out_messages)


class EdgeRow(NamedTuple):
    """A displacement an agent keeps for one incident edge; ``outgoing`` when it is the tail."""

    outgoing: bool
    displacement: tuple[float, float]


def local_displacements(spec: FormationSpec, agent: int) -> dict[int, EdgeRow]:
    """Static formation knowledge held by ``agent``, keyed by 1-based edge label."""
    rows = {}
    for e, (tail, head) in enumerate(spec.edges):
        if agent in (tail, head):
            dx, dy = spec.displacements[e]
            rows[e + 1] = EdgeRow(agent == tail, (float(dx), float(dy)))
    return rows


class _Topology:
    """Per-agent incident edge lists, computed once per spec."""

    def __init__(self, spec: FormationSpec):
        self.n = spec.n_agents
        self.out_edges = [[] for _ in range(self.n)]
        self.in_edges = [[] for _ in range(self.n)]
        for e, (tail, head) in enumerate(spec.edges):
            self.out_edges[tail].append((e + 1, head))
            self.in_edges[head].append((e + 1, tail))
        self.rows = [local_displacements(spec, i) for i in range(self.n)]


@functools.lru_cache(maxsize=64)
def _topology(spec: FormationSpec) -> _Topology:
    return _Topology(spec)


def _views_from_positions(positions, topo: _Topology, target) -> list[AgentView]:
    p = np.asarray(positions, dtype=float)[:, :2].tolist()
    qx, qy = float(target[0]), float(target[1])
    views = []
    for i, (px, py) in enumerate(p):
        outs = tuple(
            [NeighborMessage(label, (px - p[j][0], py - p[j][1])) for label, j in topo.out_edges[i]]
        )
        ins = tuple(
            [NeighborMessage(label, (px - p[j][0], py - p[j][1])) for label, j in topo.in_edges[i]]
        )
        views.append(AgentView(i, (px - qx, py - qy), ins, outs))
    return views


def collect_views(swarm, spec: FormationSpec, target) -> list[AgentView]:
    """Snapshot views for every agent. ``swarm`` is a ``SwarmState`` or an ``(N, 2|3)`` array."""
    poses = getattr(swarm, "poses", swarm)
    positions = np.asarray(poses, dtype=float)[:, :2]
    return _views_from_positions(positions, _topology(spec), target)


def _local_rate(view: AgentView, d_rows: Mapping[int, EdgeRow], gains: GainConfig):
    sx = sy = 0.0
    for msg in view.out_messages:
        row = d_rows.get(msg.edge_label)
        if row is None or not row.outgoing:
            raise MissingNeighborMessage(
                f"agent {view.agent} has no outgoing displacement for edge {msg.edge_label}"
            )
        rel, d = msg.relative_displacement, row.displacement
        sx += rel[0] - d[0]
        sy += rel[1] - d[1]
    for msg in view.in_messages:
        row = d_rows.get(msg.edge_label)
        if row is None or row.outgoing:
            raise MissingNeighborMessage(
                f"agent {view.agent} has no incoming displacement for edge {msg.edge_label}"
            )
        rel, d = msg.relative_displacement, row.displacement
        sx += rel[0] + d[0]
        sy += rel[1] + d[1]
    # labels are unique per agent, so a count mismatch means a silent neighbour
    if len(view.out_messages) + len(view.in_messages) != len(d_rows):
        heard = {m.edge_label for m in view.out_messages + view.in_messages}
        raise MissingNeighborMessage(
            f"agent {view.agent} received no message on edges {sorted(set(d_rows) - heard)}"
        )
    ea = gains.epsilon * gains.a
    eb = gains.epsilon * gains.b
    tx, ty = view.self_to_target
    return (-ea * sx - eb * tx, -ea * sy - eb * ty)


def local_input_derivative(
    view: AgentView, d_rows: Mapping[int, EdgeRow], gains: GainConfig
) -> np.ndarray:
    """Input rate of one agent from its own view and stored displacements.

    ``u_dot_i = -eps a sum_out (p_i - p_j - d_ij) - eps a sum_in (p_i - p_j + d_ji)
    - eps b (p_i - q)``.
    """
    return np.array(_local_rate(view, d_rows, gains))


def stacked_input_derivative(
    positions, spec: FormationSpec, gains: GainConfig, target, order: Sequence[int] | None = None
) -> np.ndarray:
    """One synchronous round: every agent's rate from the same snapshot, stacked."""
    topo = _topology(spec)
    views = _views_from_positions(positions, topo, target)
    out = [None] * topo.n
    for i in range(topo.n) if order is None else order:
        out[i] = _local_rate(views[i], topo.rows[i], gains)
    return np.array(out).reshape(-1)


def distributed_rhs(spec: FormationSpec, gains: GainConfig, target):
    """Closed-loop vector field (kernel state layout) evaluated agent by agent.

    Each agent integrates its own tracking plant and its own input rate; only
    the view snapshot is shared within a round.
    """
    n = spec.n_agents
    k = gains.k_vector(n).tolist()
    q = np.asarray(target, dtype=float)
    topo = _topology(spec)

    def rhs(y):
        flat = y.tolist()
        poses = np.asarray(y[: 3 * n]).reshape(n, 3)
        views = _views_from_positions(poses, topo, q)
        dpose = []
        du = []
        for i in range(n):
            x, yy, th = flat[3 * i : 3 * i + 3]
            ux, uy = flat[3 * n + 2 * i : 3 * n + 2 * i + 2]
            dpose.extend(agent_tracking_rates(x, yy, th, ux, uy, k[i]))
            du.extend(_local_rate(views[i], topo.rows[i], gains))
        return np.array(dpose + du)

    return rhs


def step_distributed(swarm, spec: FormationSpec, gains: GainConfig, target, dt: float):
    """Advance a ``SwarmState`` by one RK4 step of ``dt`` using the distributed law."""
    from .sim import SwarmState

    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return swarm
    y0 = swarm.to_vector()
    records, failed = _pykernel.rk4_run(
        distributed_rhs(spec, gains, target), y0, spec.n_agents, dt, 1, 1
    )
    if failed >= 0:
        raise UnstableStep("non-finite state after distributed step", step=1, time=swarm.time + dt)
    return SwarmState.from_vector(records[-1], spec.n_agents, swarm.time + dt)
