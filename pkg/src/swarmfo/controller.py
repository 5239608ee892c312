"""Feedback-optimisation layer: cost, gradient and gradient-flow input dynamics.

The cost of a stacked configuration ``r`` is::

    Phi(r) = a/2 * sum_edges |p_i - p_j - d_ij|^2 + b/2 * sum_agents |p_i - q|^2

Because the plant's steady-state map is the identity, the input flow is
simply ``u_dot = -epsilon * grad Phi(r)`` evaluated at the measured
positions ``r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, NonpositiveInput
from .graph import FormationSpec, kron_plane, laplacian

# default timescale: u-flow at one tenth of the slowest tracking loop
EPSILON_SAFETY = 0.1


@dataclass(frozen=True)
class GainConfig:
    """Cost weights ``a`` (formation) and ``b`` (target), flow gain, tracking gains.

    ``k`` is either one gain shared by every agent or a per-agent sequence.
    """

    a: float
    b: float
    epsilon: float
    k: Union[float, Sequence[float]] = 1.0

    def __post_init__(self):
        for name in ("a", "b", "epsilon"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise NonpositiveInput(f"gain {name} must be strictly positive, got {value!r}")
        if np.ndim(self.k) == 0:
            object.__setattr__(self, "k", float(self.k))
        else:
            object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        ks = np.atleast_1d(np.asarray(self.k, dtype=float))
        if ks.size == 0 or not np.all(np.isfinite(ks)) or np.any(ks <= 0):
            raise NonpositiveInput("tracking gains k must be strictly positive")

    def k_vector(self, n_agents: int) -> np.ndarray:
        if isinstance(self.k, float):
            return np.full(n_agents, self.k)
        if len(self.k) != n_agents:
            raise DimensionMismatch(f"{len(self.k)} tracking gains for {n_agents} agents")
        return np.array(self.k)

    @property
    def k_min(self) -> float:
        return float(np.min(self.k))

    @property
    def k_max(self) -> float:
        return float(np.max(self.k))


@dataclass(frozen=True)
class CostBreakdown:
    formation_term: float
    target_term: float

    @property
    def total(self) -> float:
        return self.formation_term + self.target_term


def _positions(r, spec: FormationSpec) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    n = spec.n_agents
    if r.shape == (2 * n,):
        return r.reshape(n, 2)
    if r.shape == (n, 2):
        return r
    raise DimensionMismatch(f"configuration of shape {r.shape} for {n} agents")


def _target(target) -> np.ndarray:
    q = np.asarray(target, dtype=float)
    if q.shape != (2,):
        raise DimensionMismatch(f"target must be a point in R^2, got shape {q.shape}")
    return q


def cost(r, spec: FormationSpec, gains: GainConfig, target) -> CostBreakdown:
    p = _positions(r, spec)
    q = _target(target)
    edge_err = spec.incidence.T @ p - spec.displacements
    formation = 0.5 * gains.a * float(np.sum(edge_err**2))
    tgt = 0.5 * gains.b * float(np.sum((p - q) ** 2))
    return CostBreakdown(formation, tgt)


def cost_gradient(r, spec: FormationSpec, gains: GainConfig, target) -> np.ndarray:
    """``a (L^ r - B^ d) + b (r - 1 (x) q)``, stacked like ``r``."""
    p = _positions(r, spec)
    q = _target(target)
    inc = spec.incidence
    lap = inc @ inc.T
    g = gains.a * (lap @ p - inc @ spec.displacements) + gains.b * (p - q)
    return g.reshape(-1)


def steady_state_map(u):
    """Limit positions of the tracking plant under a constant reference: identity."""
    return np.array(u, dtype=float, copy=True)


def steady_state_sensitivity(n_agents: int) -> np.ndarray:
    return np.eye(2 * n_agents)


def input_derivative_centralized(r, spec, gains: GainConfig, target, epsilon=None) -> np.ndarray:
    eps = gains.epsilon if epsilon is None else float(epsilon)
    return -eps * cost_gradient(r, spec, gains, target)


def hessian(spec: FormationSpec, gains: GainConfig) -> np.ndarray:
    lap = laplacian(spec).laplacian
    return gains.a * kron_plane(lap) + gains.b * np.eye(2 * spec.n_agents)


def lipschitz_constant(spec: FormationSpec, gains: GainConfig) -> float:
    """Spectral norm of the (constant) Hessian, ``a * lambda_max + b``."""
    return gains.a * laplacian(spec).lambda_max + gains.b


def epsilon_bound(gamma: float, mu: float, ell: float) -> float:
    """Largest admissible flow gain ``sqrt(gamma / (mu * ell))``; choose strictly below it.

    ``gamma`` and ``mu`` are decay and input-sensitivity constants of a
    Lyapunov certificate for the tracking loop, supplied by the caller.
    """
    for name, value in (("gamma", gamma), ("mu", mu), ("ell", ell)):
        if not value > 0:
            raise NonpositiveInput(f"{name} must be strictly positive, got {value!r}")
    return math.sqrt(gamma / (mu * ell))


def heuristic_epsilon(spec: FormationSpec, a: float, b: float, k) -> float:
    """Conservative timescale separation ``0.1 * k_min / ell``."""
    ell = a * laplacian(spec).lambda_max + b
    return EPSILON_SAFETY * float(np.min(k)) / ell


def with_heuristic_epsilon(spec: FormationSpec, a: float, b: float, k=1.0) -> GainConfig:
    return GainConfig(a, b, heuristic_epsilon(spec, a, b, k), k)
