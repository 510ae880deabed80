"""The four seeking laws as pure derivative maps.

Every function returns controls and controller-state derivatives for one
player (or, for the single-integrator law, for all players) from the
information that law may use:

* perfect information: every player's plant state, and the player's own
  true parameter;
* consensus-based laws: the player's own plant and controller states, the
  estimates ``z_k`` of in-neighbours k (a_ik > 0) and the broadcast
  ``gamma_hat_j`` (or action ``x_j``) of observed players j (a_ij > 0).

Neighbour access goes through :class:`NeighborTable`, which only ever
indexes the permitted entries; non-neighbour values are never read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from nashseek.errors import ConfigurationError
from nashseek.game import GameSpec
from nashseek.graphs import GraphSnapshot
from nashseek.plant import CompanionRealization, PlantSpec


class Law(str, Enum):
    PERFECT_INFO = "perfect_info"
    CONSENSUS = "single_integrator_consensus"
    ADAPTIVE = "adaptive"
    DISTURBANCE = "disturbance_rejection"


@dataclass(frozen=True)
class ExactSign:
    pass


@dataclass(frozen=True)
class Smoothed:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"smoothing epsilon must be positive, got {self.epsilon}")


def sgn(x: np.ndarray, mode: ExactSign | Smoothed = ExactSign()) -> np.ndarray:
    """Componentwise sign with sgn(0) = 0, or its clamp(x/eps, -1, 1) surrogate."""
    if isinstance(mode, Smoothed):
        return np.clip(np.asarray(x, dtype=float) / mode.epsilon, -1.0, 1.0)
    return np.sign(x)


@dataclass(frozen=True)
class ControllerConfig:
    """Gains, estimator initializations and the selected law.

    Initial values left as ``None`` default to gamma_hat(0) = gamma(0),
    z(0) = 0, theta_hat(0) = 0 and D_hat(0) = 0.
    """

    law: Law
    delta: float = 1.0
    k: tuple = ()
    kappa: tuple = ()
    Lambda: tuple = ()
    sign_mode: ExactSign | Smoothed = field(default_factory=ExactSign)
    gamma_hat0: tuple | None = None
    z0: np.ndarray | None = None
    theta_hat0: tuple | None = None
    d_hat0: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "law", Law(self.law))
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        object.__setattr__(self, "kappa", tuple(float(v) for v in self.kappa))
        object.__setattr__(self, "Lambda", tuple(np.atleast_2d(np.asarray(L, dtype=float)) for L in self.Lambda))

    def problems(self, num_players: int, param_counts: Sequence[int], allow_zero_delta=False):
        """List of ``(path, message)`` for every violated invariant."""
        out = []
        law = self.law
        if not (self.delta > 0 or (allow_zero_delta and self.delta == 0)):
            out.append(("/controller/delta", f"must be positive, got {self.delta}"))
        if law is not Law.PERFECT_INFO:
            if len(self.k) != num_players:
                out.append(("/controller/k", f"expected {num_players} gains, got {len(self.k)}"))
            out += [(f"/controller/k/{i}", f"must be positive, got {v}") for i, v in enumerate(self.k) if not v > 0]
        if law in (Law.ADAPTIVE, Law.DISTURBANCE):
            if len(self.kappa) != num_players:
                out.append(("/controller/kappa", f"expected {num_players} gains, got {len(self.kappa)}"))
            out += [(f"/controller/kappa/{i}", f"must be positive, got {v}")
                    for i, v in enumerate(self.kappa) if not v > 0]
            if len(self.Lambda) != num_players:
                out.append(("/controller/Lambda", f"expected {num_players} matrices, got {len(self.Lambda)}"))
            for i, (L, m) in enumerate(zip(self.Lambda, param_counts)):
                path = f"/controller/Lambda/{i}"
                if L.shape != (m, m):
                    out.append((path, f"shape {L.shape}, expected ({m}, {m})"))
                elif not np.allclose(L, L.T):
                    out.append((path, "must be symmetric"))
                elif m and np.linalg.eigvalsh(L)[0] <= 0:
                    out.append((path, "must be positive definite"))
        if law is Law.DISTURBANCE and self.d_hat0 is not None:
            out += [(f"/controller/d_hat0/{i}", "must be nonnegative") for i, v in enumerate(self.d_hat0) if v < 0]
        return out


@dataclass
class ControllerState:
    """Estimator state for all players.

    ``z`` has one row per player; row i is player i's estimate of the full
    (gamma_hat) strategy vector.  For the single-integrator law ``z`` holds
    the estimates y and the other fields are unused.
    """

    gamma_hat: np.ndarray
    z: np.ndarray
    theta_hat: list
    d_hat: np.ndarray


# --- neighbour access -------------------------------------------------------


class NeighborTable:
    """Per-player index sets derived from one adjacency matrix."""

    def __init__(self, adjacency: np.ndarray, dims: Sequence[int]):
        A = np.asarray(adjacency, dtype=float)
        offsets = np.concatenate([[0], np.cumsum(dims)])
        self.adjacency = A
        self.in_nbrs = []
        self.in_weights = []
        self.degree = A.sum(axis=1)
        self.obs_idx = []
        self.obs_w = []
        for i in range(A.shape[0]):
            nb = np.flatnonzero(A[i])
            self.in_nbrs.append(nb)
            self.in_weights.append(A[i, nb])
            idx = np.concatenate([np.arange(offsets[j], offsets[j + 1]) for j in nb]) if len(nb) else np.zeros(0, int)
            self.obs_idx.append(idx)
            self.obs_w.append(np.repeat(A[i, nb], [dims[j] for j in nb]))

    def estimator_rate(self, i: int, z: np.ndarray, ref: np.ndarray) -> np.ndarray:
        """-(sum_k a_ik (z_i - z_k) + a_ij (z_ij - ref_j)) for all j, as an n-vector."""
        zi = z[i]
        nb = self.in_nbrs[i]
        if not len(nb):
            return np.zeros_like(zi)
        rate = self.in_weights[i] @ z[nb] - self.degree[i] * zi
        idx = self.obs_idx[i]
        rate[idx] -= self.obs_w[i] * (zi[idx] - ref[idx])
        return rate


def _table(snap, dims) -> NeighborTable:
    if isinstance(snap, NeighborTable):
        return snap
    if isinstance(snap, GraphSnapshot):
        return NeighborTable(snap.adjacency, dims)
    return NeighborTable(np.asarray(snap), dims)


# --- laws --------------------------------------------------------------------


def perfect_info_control(game: GameSpec, plants: Sequence[PlantSpec],
                         realizations: Sequence[CompanionRealization], xis: Sequence[np.ndarray],
                         i: int, t: float = 0.0) -> np.ndarray:
    """u_i = -grad_i f_i(gamma) + g_i(xi_i, t) theta_i - K_i^s x_i^s."""
    plant = plants[i]
    if not plant.disturbance.is_zero:
        raise ConfigurationError("perfect-information law assumes zero disturbances")
    gamma = np.concatenate([R.output_map @ xi for R, xi in zip(realizations, xis)])
    R = realizations[i]
    xi = xis[i]
    n = R.dim
    u = -game.partial_gradient(i, gamma) + plant.regressor(xi, t, n) @ plant.theta
    if R.order > 1:
        u = u - R.K_s @ xi[n:]
    return u


def single_integrator_consensus_control(game: GameSpec, config: ControllerConfig, x: np.ndarray,
                                        y: np.ndarray, snap, plants: Sequence[PlantSpec] | None = None):
    """u_i = -delta k_i grad_i f_i(y_i) and the estimator rates for all players.

    Returns ``(u, ydot)`` with u of length n and ydot of shape (N, n).
    """
    if plants is not None:
        for i, p in enumerate(plants):
            if p.order != 1:
                raise ConfigurationError(f"player {i} has order {p.order}; single-integrator law needs order 1")
    table = _table(snap, game.dims)
    N = game.num_players
    u = np.concatenate([-config.delta * config.k[i] * game.partial_gradient(i, y[i]) for i in range(N)])
    ydot = np.stack([table.estimator_rate(i, y, x) for i in range(N)])
    return u, ydot


class AdaptiveRates(NamedTuple):
    u: np.ndarray
    gamma_hat_dot: np.ndarray
    z_dot: np.ndarray
    theta_hat_dot: np.ndarray
    d_hat_dot: float = 0.0


def adaptive_control(game: GameSpec, config: ControllerConfig, realization: CompanionRealization,
                     regressor, xi_i: np.ndarray, state: ControllerState, snap, i: int,
                     t: float) -> AdaptiveRates:
    """Adaptive seeking law for player i (no disturbance compensation)."""
    return _adaptive(game, config, realization, regressor, xi_i, state, snap, i, t, False)


def disturbance_rejection_control(game: GameSpec, config: ControllerConfig,
                                  realization: CompanionRealization, regressor, xi_i: np.ndarray,
                                  state: ControllerState, snap, i: int, t: float) -> AdaptiveRates:
    """Adaptive law plus the sgn(gamma_hat_i - gamma_i) D_hat_i term and the
    bound-estimate update D_hat_i' = (gamma_hat_i - gamma_i)^T sgn(...)."""
    return _adaptive(game, config, realization, regressor, xi_i, state, snap, i, t, True)


def _adaptive(game, config, R, regressor, xi, state, snap, i, t, reject):
    table = _table(snap, game.dims)
    n = R.dim
    s = game.block(i)
    gamma = R.output_map @ xi
    gamma_tilde = state.gamma_hat[s] - gamma
    seek = -config.delta * config.k[i] * game.partial_gradient(i, state.z[i])
    g = regressor(xi, t, n)
    u = seek + g @ state.theta_hat[i] + config.kappa[i] * gamma_tilde
    if R.order > 1:
        u = u - R.K_s @ xi[n:]
    theta_dot = config.Lambda[i] @ (g.T @ gamma_tilde)
    z_dot = table.estimator_rate(i, state.z, state.gamma_hat)
    d_hat_dot = 0.0
    if reject:
        sg = sgn(gamma_tilde, config.sign_mode)
        u = u + sg * state.d_hat[i]
        d_hat_dot = float(gamma_tilde @ sg)
    return AdaptiveRates(u, seek, z_dot, theta_dot, d_hat_dot)


def delta_star_bound(mu: float, psi: float, k: float, p: float, lam_min_q: float) -> float:
    """Sufficient step size bound for the single-integrator consensus law.

    ``p`` bounds ||P(t)|| for the time-varying Lyapunov matrix associated
    with Q; it has to be supplied by the caller.
    """
    denom = psi ** 2 + 4 * k ** 2 * psi ** 2 * p ** 2 + 4 * mu * k * p * psi ** 2 + 8 * mu * k * psi * p
    return 4 * mu * lam_min_q / denom
