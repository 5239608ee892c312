"""Formation-graph algebra.

A formation is an oriented graph on ``N`` agents given by its incidence
matrix ``B`` (one column per edge, ``+1`` at the tail and ``-1`` at the
head) together with one desired planar displacement ``d_e = p_tail - p_head``
per edge. Stacked vectors follow the agent-major layout
``[x_1, y_1, x_2, y_2, ...]`` so that planar lifting is ``M (x) I_2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DisconnectedGraph,
    MalformedIncidence,
    UnrealizableDisplacements,
)

REALIZABILITY_RTOL = 1e-8
CONNECTIVITY_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def kron_plane(m) -> np.ndarray:
    """Lift a matrix to the plane: every entry ``m`` becomes ``m * I_2``."""
    return np.kron(np.asarray(m, dtype=float), np.eye(2))


@dataclass(frozen=True, eq=False)
class FormationSpec:
    """Validated oriented formation graph plus desired edge displacements.

    Construct through :func:`build_spec` or :func:`spec_from_edges`; direct
    construction runs the same checks.
    """

    incidence: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.incidence)
        if inc.ndim != 2:
            raise MalformedIncidence("incidence must be a 2-D matrix")
        if not np.all(np.isin(inc, (-1, 0, 1))):
            raise MalformedIncidence("incidence entries must be in {-1, 0, +1}")
        inc = inc.astype(np.int64)
        n, m = inc.shape
        if n < 2:
            raise DisconnectedGraph("a formation needs at least two agents")
        for e in range(m):
            col = inc[:, e]
            if np.count_nonzero(col == 1) != 1 or np.count_nonzero(col == -1) != 1:
                raise MalformedIncidence(
                    f"edge {e + 1} must have exactly one +1 (tail) and one -1 (head)"
                )
        disp = np.asarray(self.displacements, dtype=float)
        if m == 0 and disp.size == 0:
            disp = disp.reshape(0, 2)
        if disp.ndim != 2 or disp.shape != (m, 2):
            raise DimensionMismatch(
                f"expected {m} displacement vectors in R^2, got shape {disp.shape}"
            )
        if not np.all(np.isfinite(disp)):
            raise UnrealizableDisplacements("displacements must be finite")
        object.__setattr__(self, "incidence", _frozen(inc))
        object.__setattr__(self, "displacements", _frozen(disp))

        lam = np.linalg.eigvalsh((inc @ inc.T).astype(float))
        if lam[1] <= CONNECTIVITY_TOL:
            raise DisconnectedGraph(
                f"formation graph is disconnected (lambda_2 = {lam[1]:.3g})"
            )
        residual = realizability_residual(inc, disp)
        scale = max(1.0, float(np.linalg.norm(disp)))
        if residual > REALIZABILITY_RTOL * scale:
            raise UnrealizableDisplacements(
                f"displacements are not consistent around the graph's cycles "
                f"(residual {residual:.3g})"
            )

    @property
    def n_agents(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]

    @property
    def d(self) -> np.ndarray:
        """Displacements stacked edge-major into ``R^{2M}``."""
        return self.displacements.reshape(-1)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Edges as 0-based ``(tail, head)`` pairs in label order."""
        tails = np.argmax(self.incidence == 1, axis=0)
        heads = np.argmax(self.incidence == -1, axis=0)
        return [(int(t), int(h)) for t, h in zip(tails, heads)]

    @property
    def degrees(self) -> np.ndarray:
        return np.abs(self.incidence).sum(axis=1)

    def same_as(self, other: "FormationSpec") -> bool:
        return (
            self.incidence.shape == other.incidence.shape
            and np.array_equal(self.incidence, other.incidence)
            and np.array_equal(self.displacements, other.displacements)
        )


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    lambda2: float
    lambda_max: float


def realizability_residual(incidence, displacements) -> float:
    """Infinity-norm residual of the least-squares fit ``(B (x) I_2)^T r = d``."""
    bt = kron_plane(incidence).T
    d = np.asarray(displacements, dtype=float).reshape(-1)
    if d.size == 0:
        return 0.0
    r, *_ = np.linalg.lstsq(bt, d, rcond=None)
    return float(np.max(np.abs(bt @ r - d)))


def build_spec(incidence, displacements) -> FormationSpec:
    """Validate an incidence matrix and its per-edge displacements."""
    inc = np.asarray(incidence)
    disp = np.asarray(displacements, dtype=float)
    if inc.ndim == 2 and disp.ndim == 2 and disp.shape[0] != inc.shape[1]:
        raise DimensionMismatch(
            f"{inc.shape[1]} edges but {disp.shape[0]} displacement vectors"
        )
    return FormationSpec(inc, disp)


def incidence_from_edges(n_agents: int, edges: Sequence[Sequence[int]], one_based=True):
    """Incidence matrix for an ordered edge list of ``(tail, head)`` pairs."""
    off = 1 if one_based else 0
    inc = np.zeros((n_agents, len(edges)), dtype=np.int64)
    for e, pair in enumerate(edges):
        if len(pair) != 2:
            raise MalformedIncidence(f"edge {e + 1} must be a (tail, head) pair")
        tail, head = int(pair[0]) - off, int(pair[1]) - off
        if not (0 <= tail < n_agents and 0 <= head < n_agents):
            raise MalformedIncidence(f"edge {e + 1} references an unknown agent")
        if tail == head:
            raise MalformedIncidence(f"edge {e + 1} is a self-loop")
        inc[tail, e] = 1
        inc[head, e] = -1
    return inc


def spec_from_edges(n_agents: int, edges, displacements, one_based=True) -> FormationSpec:
    return build_spec(incidence_from_edges(n_agents, edges, one_based), displacements)


def laplacian(spec: FormationSpec) -> SpectralSummary:
    """Laplacian ``L = B B^T`` with its sorted spectrum."""
    inc = spec.incidence.astype(float)
    lap = inc @ inc.T
    lam = np.linalg.eigvalsh(lap)
    lam[0] = max(lam[0], 0.0)
    return SpectralSummary(_frozen(lap), _frozen(lam), float(lam[1]), float(lam[-1]))


def desired_configuration(spec: FormationSpec, target) -> tuple[np.ndarray, np.ndarray]:
    """Positions in exact formation with centroid at ``target``.

    Returns ``(r_star, d_q)`` where ``d_q = r_star - 1 (x) target`` is the
    zero-centroid offset pattern.
    """
    q = np.asarray(target, dtype=float).reshape(2)
    n = spec.n_agents
    bh = kron_plane(spec.incidence)
    lh = bh @ bh.T
    # pinv of the lifted Laplacian acts on the complement of 1 (x) R^2, so
    # the solution has zero centroid by construction
    d_q = np.linalg.pinv(lh, hermitian=True) @ (bh @ spec.d)
    d_q = d_q.reshape(n, 2)
    d_q -= d_q.mean(axis=0)
    d_q = d_q.reshape(-1)
    residual = np.max(np.abs(bh.T @ d_q - spec.d)) if spec.n_edges else 0.0
    if residual > REALIZABILITY_RTOL * max(1.0, float(np.linalg.norm(spec.d))):
        raise UnrealizableDisplacements(f"no configuration realizes d (residual {residual:.3g})")
    r_star = d_q + np.tile(q, n)
    return r_star, d_q


def centroid(r) -> np.ndarray:
    return np.asarray(r, dtype=float).reshape(-1, 2).mean(axis=0)
