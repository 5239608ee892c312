"""Unicycle plant, polar tracking-error coordinates and the low-level controller.

Every function works on scalars and, through numpy broadcasting, on
per-agent arrays; the simulator relies on the array form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

RHO_EPS = 1e-12


def wrap_angle(x):
    """Map angles into ``(-pi, pi]``; ``-pi`` goes to ``+pi``."""
    if np.ndim(x) == 0:
        return math.pi - (math.pi - float(x)) % (2 * math.pi)
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


@dataclass(frozen=True)
class AgentPose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ErrorState:
    rho: float
    phi: float


@dataclass(frozen=True)
class LowLevelCommand:
    v: float
    omega: float


def polar_errors(positions, headings, references):
    """Array form of :func:`error_vars`; returns ``(rho, phi)``."""
    e = np.asarray(references, dtype=float) - np.asarray(positions, dtype=float)
    ex, ey = e[..., 0], e[..., 1]
    rho = np.hypot(ex, ey)
    phi = wrap_angle(np.arctan2(ey, ex) - headings)
    phi = np.where(rho < RHO_EPS, 0.0, phi)
    return rho, phi


def error_vars(pose: AgentPose, reference) -> ErrorState:
    rho, phi = polar_errors(pose.position, pose.heading, reference)
    return ErrorState(float(rho), float(phi))


def tracking_law(rho, phi, gain_k):
    """``v = k rho cos(phi)``, ``omega = k (cos(phi) + 1) sin(phi)``."""
    c = np.cos(phi)
    return gain_k * rho * c, gain_k * (c + 1.0) * np.sin(phi)


def low_level_control(err: ErrorState, gain_k: float) -> LowLevelCommand:
    if gain_k <= 0:
        raise ValueError("tracking gain must be positive")
    v, omega = tracking_law(err.rho, err.phi, gain_k)
    return LowLevelCommand(float(v), float(omega))


def unicycle_rates(headings, v, omega):
    """Array form of :func:`plant_derivative`; returns ``(xdot, ydot, thetadot)``."""
    return v * np.cos(headings), v * np.sin(headings), omega


def plant_derivative(pose: AgentPose, cmd: LowLevelCommand) -> tuple[float, float, float]:
    xd, yd, td = unicycle_rates(pose.heading, cmd.v, cmd.omega)
    return float(xd), float(yd), float(td)


def tracking_rates(poses, references, gains):
    """Pose derivatives of unicycles tracking fixed references.

    ``poses`` has shape ``(N, 3)`` (x, y, heading), ``references`` ``(N, 2)``.
    """
    poses = np.asarray(poses, dtype=float)
    rho, phi = polar_errors(poses[:, :2], poses[:, 2], references)
    v, omega = tracking_law(rho, phi, gains)
    xd, yd, td = unicycle_rates(poses[:, 2], v, omega)
    return np.stack([xd, yd, td], axis=1)


def agent_tracking_rates(x, y, heading, ref_x, ref_y, gain_k):
    """Scalar pose derivative of one unicycle tracking ``(ref_x, ref_y)``."""
    ex = ref_x - x
    ey = ref_y - y
    rho = math.sqrt(ex * ex + ey * ey)
    phi = 0.0 if rho < RHO_EPS else math.atan2(ey, ex) - heading
    c = math.cos(phi)
    v = gain_k * rho * c
    return v * math.cos(heading), v * math.sin(heading), gain_k * (c + 1.0) * math.sin(phi)


def closed_loop_error_derivative(err: ErrorState, gain_k: float) -> tuple[float, float]:
    """Error dynamics under the tracking law: ``(rho_dot, phi_dot)``."""
    c = math.cos(err.phi)
    return -gain_k * err.rho * c * c, -gain_k * math.sin(err.phi)


def explicit_rho_solution(
    rho0: float,
    phi_trajectory: Callable[[float], float],
    gain_k: float,
    t: float,
    t0: float = 0.0,
    **quad_kwargs,
) -> float:
    """``rho(t) = rho0 * exp(-k * int_{t0}^{t} cos^2(phi(s)) ds)`` by adaptive quadrature."""
    if t == t0:
        return float(rho0)
    opts = {"epsabs": 1e-13, "epsrel": 1e-12, "limit": 500}
    opts.update(quad_kwargs)
    integral, _ = integrate.quad(lambda s: math.cos(phi_trajectory(s)) ** 2, t0, t, **opts)
    return float(rho0 * math.exp(-gain_k * integral))
