"""Closed-form steady state of the gradient flow and its formation diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .controller import GainConfig
from .errors import SingularSystem
from .graph import FormationSpec, desired_configuration, kron_plane, laplacian

# residual <= 2% of |d| reads as "in formation"
IN_FORMATION_FRACTION = 0.02
# empirical gain ratio a*lambda_2/b beyond which the formation holds
HIGH_GAIN_RATIO = 30.0


@dataclass(frozen=True, eq=False)
class SteadyStateReport:
    r_inf: np.ndarray
    formation_residual: float
    target_distance: float
    d_q_norm: float
    d_norm: float
    gain_ratio: float
    shrink_factor: float
    lambda2: float

    @property
    def in_formation(self) -> bool:
        # absolute floor so that d = 0 is not failed on rounding residue
        floor = 1e-12 * (1.0 + float(np.linalg.norm(self.r_inf)))
        return self.formation_residual <= IN_FORMATION_FRACTION * self.d_norm + floor

    @property
    def relative_residual(self) -> float:
        return self.formation_residual / self.d_norm if self.d_norm > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "r_inf": [float(v) for v in self.r_inf],
            "formation_residual": self.formation_residual,
            "target_distance": self.target_distance,
            "d_q_norm": self.d_q_norm,
            "d_norm": self.d_norm,
            "gain_ratio": self.gain_ratio,
            "shrink_factor": self.shrink_factor,
            "lambda2": self.lambda2,
            "relative_residual": self.relative_residual,
            "in_formation": self.in_formation,
        }


class CurvePoint(NamedTuple):
    a: float
    gain_ratio: float
    formation_residual: float
    target_distance: float
    high_gain_regime: bool


def _rhs(spec: FormationSpec, gains: GainConfig, target) -> np.ndarray:
    q = np.asarray(target, dtype=float).reshape(2)
    return gains.a * (kron_plane(spec.incidence) @ spec.d) + gains.b * np.tile(q, spec.n_agents)


def optimal_configuration(spec: FormationSpec, gains: GainConfig, target) -> np.ndarray:
    """Unique minimiser ``(a L^ + b I)^{-1} (a B^ d + b 1 (x) q)``.

    Solved per coordinate on the ``N x N`` system ``a L + b I`` via Cholesky;
    the lifted system is block-diagonal after a permutation.
    """
    n = spec.n_agents
    lap = laplacian(spec).laplacian
    mat = gains.a * lap + gains.b * np.eye(n)
    rhs = _rhs(spec, gains, target).reshape(n, 2)
    try:
        factor = linalg.cho_factor(mat, lower=True, check_finite=True)
        sol = linalg.cho_solve(factor, rhs)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"steady-state system could not be factorised: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("steady-state solve produced non-finite values")
    return sol.reshape(-1)


def optimal_configuration_lu(spec: FormationSpec, gains: GainConfig, target) -> np.ndarray:
    """Same minimiser from a dense LU solve of the full lifted system."""
    n = spec.n_agents
    mat = gains.a * kron_plane(laplacian(spec).laplacian) + gains.b * np.eye(2 * n)
    return np.linalg.solve(mat, _rhs(spec, gains, target))


def formation_residual(r, spec: FormationSpec) -> float:
    p = np.asarray(r, dtype=float).reshape(-1, 2)
    return float(np.linalg.norm(spec.incidence.T @ p - spec.displacements))


def target_distance(r, target) -> float:
    p = np.asarray(r, dtype=float).reshape(-1, 2)
    return float(np.linalg.norm(p - np.asarray(target, dtype=float)))


def shrink_factor(spec: FormationSpec, gains: GainConfig) -> float:
    """``|| I - b (a L^ + b I)^{-1} ||`` = max over the spectrum of ``a lam / (a lam + b)``."""
    lam = laplacian(spec).eigenvalues
    return float(np.max(gains.a * lam / (gains.a * lam + gains.b)))


def gain_ratio(spec: FormationSpec, gains: GainConfig) -> float:
    return gains.a * laplacian(spec).lambda2 / gains.b


def steady_state_report(spec: FormationSpec, gains: GainConfig, target) -> SteadyStateReport:
    r_inf = optimal_configuration(spec, gains, target)
    _, d_q = desired_configuration(spec, target)
    report = SteadyStateReport(
        r_inf=r_inf,
        formation_residual=formation_residual(r_inf, spec),
        target_distance=target_distance(r_inf, target),
        d_q_norm=float(np.linalg.norm(d_q)),
        d_norm=float(np.linalg.norm(spec.d)),
        gain_ratio=gain_ratio(spec, gains),
        shrink_factor=shrink_factor(spec, gains),
        lambda2=laplacian(spec).lambda2,
    )
    if not 0.0 <= report.shrink_factor < 1.0:
        raise SingularSystem(f"shrink factor {report.shrink_factor} outside [0, 1)")
    if report.d_q_norm > 0:
        slack = 1e-10 * max(1.0, report.d_q_norm)
        bound = report.shrink_factor * report.d_q_norm + slack
        if not (report.target_distance <= bound and report.target_distance < report.d_q_norm):
            raise SingularSystem(
                f"target distance {report.target_distance} violates the contraction bound "
                f"{report.shrink_factor} * {report.d_q_norm}"
            )
    return report


def formation_error_curve(
    spec: FormationSpec, target, b: float, a_values: Sequence[float], epsilon=1.0, k=1.0
) -> list[CurvePoint]:
    """Closed-form formation residual and target distance as ``a`` grows with ``b`` fixed.

    ``epsilon`` and ``k`` do not affect the steady state; they only complete
    the gain set.
    """
    a_values = [float(a) for a in a_values]
    if any(a <= 0 for a in a_values):
        raise ValueError("a values must be positive")
    if any(a1 < a0 for a0, a1 in zip(a_values, a_values[1:])):
        raise ValueError("a values must be non-decreasing")
    lam2 = laplacian(spec).lambda2
    points = []
    for a in a_values:
        gains = GainConfig(a, b, epsilon, k)
        r_inf = optimal_configuration(spec, gains, target)
        ratio = a * lam2 / b
        points.append(
            CurvePoint(
                a,
                ratio,
                formation_residual(r_inf, spec),
                target_distance(r_inf, target),
                ratio >= HIGH_GAIN_RATIO,
            )
        )
    return points
