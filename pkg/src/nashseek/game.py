"""Games, pseudogradients, monotonicity certificates and reference equilibria.

A game is described by the action dimension of every player and a cost
family.  The canonical family is linear-quadratic,

    f_i(x) = 1/2 x_i^T M_ii x_i + x_i^T (sum_{j != i} M_ij x_j + r_i),

whose pseudogradient is exactly ``F(x) = M x + r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from nashseek.errors import CertificationError, ConvergenceError, InputError, SolverError


@dataclass(frozen=True)
class LinearQuadratic:
    M: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        r = np.array(self.r, dtype=float).reshape(-1)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InputError(f"M must be square, got shape {M.shape}")
        if r.shape[0] != M.shape[0]:
            raise InputError(f"r has length {r.shape[0]}, expected {M.shape[0]}")
        M.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class Custom:
    """User-supplied costs.

    ``costs[i](x)`` returns f_i(x) and ``gradients[i](x)`` returns the partial
    gradient of f_i with respect to x_i (length n_i), both taking the full
    stacked strategy vector.
    """

    costs: Sequence[Callable[[np.ndarray], float]]
    gradients: Sequence[Callable[[np.ndarray], np.ndarray]]


CostFamily = Union[LinearQuadratic, Custom]


@dataclass(frozen=True)
class GameSpec:
    dims: tuple
    cost_family: CostFamily
    offsets: tuple = field(init=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d <= 0 for d in dims):
            raise InputError(f"dims must be a nonempty list of positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "offsets", tuple(np.concatenate([[0], np.cumsum(dims)]).tolist()))
        fam = self.cost_family
        if isinstance(fam, LinearQuadratic):
            if fam.M.shape[0] != self.n:
                raise InputError(f"M is {fam.M.shape}, expected {self.n}x{self.n}")
            # grad of 1/2 x_i^T M_ii x_i is M_ii x_i only for symmetric M_ii
            for i in range(len(dims)):
                Mii = fam.M[self.block(i), self.block(i)]
                if not np.allclose(Mii, Mii.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Mii).max())):
                    raise InputError(f"diagonal block M[{i},{i}] must be symmetric")
        elif isinstance(fam, Custom):
            if len(fam.costs) != len(dims) or len(fam.gradients) != len(dims):
                raise InputError("Custom game needs one cost and one gradient per player")
        else:
            raise InputError(f"unknown cost family {type(fam).__name__}")

    @property
    def num_players(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return self.offsets[-1]

    def block(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])

    def partial_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        """Gradient of f_i with respect to x_i, evaluated at the full vector x."""
        fam = self.cost_family
        if isinstance(fam, LinearQuadratic):
            s = self.block(i)
            return fam.M[s] @ x + fam.r[s]
        return np.asarray(fam.gradients[i](x), dtype=float).reshape(self.dims[i])

    def cost(self, i: int, x: np.ndarray) -> float:
        x = _check_vector(self, x)
        fam = self.cost_family
        if isinstance(fam, LinearQuadratic):
            s = self.block(i)
            xi = x[s]
            own = fam.M[s, s]
            cross = fam.M[s] @ x - own @ xi
            return float(0.5 * xi @ own @ xi + xi @ (cross + fam.r[s]))
        return float(fam.costs[i](x))


def _check_vector(game: GameSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (game.n,):
        raise InputError(f"strategy vector has shape {x.shape}, expected ({game.n},)")
    return x


def pseudogradient(game: GameSpec, x) -> np.ndarray:
    """Stacked partial gradients F(x) = col(grad_1 f_1, ..., grad_N f_N)."""
    x = _check_vector(game, x)
    fam = game.cost_family
    if isinstance(fam, LinearQuadratic):
        return fam.M @ x + fam.r
    return np.concatenate([game.partial_gradient(i, x) for i in range(game.num_players)])


# --- equilibrium solvers -------------------------------------------------


@dataclass(frozen=True)
class ClosedForm:
    tol: float = 1e-8


@dataclass(frozen=True)
class Flow:
    """Integrate the pseudogradient flow x' = -F(x) from the origin.

    ``step=None`` picks 1/||M||_2 for linear-quadratic games and 1e-2
    otherwise.  The flow stops once ||F(x)|| <= ``tol``; the distance to the
    equilibrium is then at most tol / mu.
    """

    step: float | None = None
    horizon: float = 1e4
    tol: float = 1e-10


def solve_ne(game: GameSpec, method: ClosedForm | Flow = ClosedForm()) -> np.ndarray:
    if isinstance(method, ClosedForm):
        fam = game.cost_family
        if not isinstance(fam, LinearQuadratic):
            raise InputError("ClosedForm requires a LinearQuadratic game")
        try:
            x = np.linalg.solve(fam.M, -fam.r)
            # one step of iterative refinement
            x = x - np.linalg.solve(fam.M, fam.M @ x + fam.r)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"closed-form NE solve failed: {exc}") from exc
        res = float(np.linalg.norm(fam.M @ x + fam.r))
        if not np.isfinite(res) or res > method.tol * max(1.0, np.linalg.norm(fam.r)):
            raise SolverError(f"closed-form NE residual {res:.3e} exceeds tolerance")
        return x
    if isinstance(method, Flow):
        return _pseudogradient_flow(game, method)
    raise InputError(f"unknown NE method {method!r}")


def _pseudogradient_flow(game: GameSpec, method: Flow) -> np.ndarray:
    h = method.step
    if h is None:
        fam = game.cost_family
        h = 1.0 / np.linalg.norm(fam.M, 2) if isinstance(fam, LinearQuadratic) else 1e-2

    def F(x):
        return pseudogradient(game, x)

    x = np.zeros(game.n)
    res = np.linalg.norm(F(x))
    t = 0.0
    while res > method.tol:
        if t >= method.horizon or not np.isfinite(res):
            raise ConvergenceError("pseudogradient flow did not converge", float(res))
        k1 = -F(x)
        k2 = -F(x + 0.5 * h * k1)
        k3 = -F(x + 0.5 * h * k2)
        k4 = -F(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        res = np.linalg.norm(F(x))
    return x


# --- certification -------------------------------------------------------


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Sampled:
    num_samples: int = 1000
    seed: int = 0
    box: float = 10.0


@dataclass(frozen=True)
class MonotonicityCertificate:
    """Strong-monotonicity modulus and per-player Lipschitz constants.

    When ``method`` is :class:`Sampled` the values are estimates: ``mu`` is an
    upper estimate of the true modulus obtained as a minimum over sampled
    pairs, ``psi`` lower estimates obtained as maxima.
    """

    mu: float
    psi: tuple
    method: Exact | Sampled

    @property
    def is_estimate(self) -> bool:
        return isinstance(self.method, Sampled)

    @property
    def psi_total(self) -> float:
        return float(np.sqrt(np.sum(np.square(self.psi))))

    @property
    def accepted(self) -> bool:
        return self.mu > 0


def certify(game: GameSpec, method: Exact | Sampled = Exact()) -> MonotonicityCertificate:
    if isinstance(method, Exact):
        fam = game.cost_family
        if not isinstance(fam, LinearQuadratic):
            raise InputError("Exact certification is only available for LinearQuadratic games")
        mu = float(np.linalg.eigvalsh(0.5 * (fam.M + fam.M.T))[0])
        psi = tuple(float(np.linalg.norm(fam.M[game.block(i)], 2)) for i in range(game.num_players))
        if mu <= 0:
            raise CertificationError(f"pseudogradient is not strongly monotone (mu={mu:.6g})", mu)
        return MonotonicityCertificate(mu, psi, method)
    if isinstance(method, Sampled):
        if method.num_samples < 2:
            raise InputError("Sampled certification needs num_samples >= 2")
        rng = np.random.default_rng(method.seed)
        pts = rng.uniform(-method.box, method.box, size=(method.num_samples, 2, game.n))
        mu = np.inf
        psi = np.zeros(game.num_players)
        for x, xp in pts:
            dx = x - xp
            nrm2 = dx @ dx
            if nrm2 == 0:
                continue
            dF = pseudogradient(game, x) - pseudogradient(game, xp)
            mu = min(mu, float(dx @ dF) / nrm2)
            for i in range(game.num_players):
                s = game.block(i)
                psi[i] = max(psi[i], float(np.linalg.norm(dF[s])) / np.sqrt(nrm2))
        return MonotonicityCertificate(float(mu), tuple(psi.tolist()), method)
    raise InputError(f"unknown certification method {method!r}")


def random_lq_game(rng: np.random.Generator, num_players: int, dims=None, mu_min: float = 0.5) -> GameSpec:
    """Draw a strongly monotone linear-quadratic game.

    The symmetric part of M is shifted so that its smallest eigenvalue is at
    least ``mu_min``.
    """
    if dims is None:
        dims = rng.integers(1, 3, size=num_players).tolist()
    n = int(np.sum(dims))
    M = rng.normal(size=(n, n))
    offsets = np.concatenate([[0], np.cumsum(dims)])
    for a, b in zip(offsets, offsets[1:]):
        M[a:b, a:b] = 0.5 * (M[a:b, a:b] + M[a:b, a:b].T)
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    M = M + (mu_min - lam + rng.uniform(0, 1)) * np.eye(n)
    r = rng.normal(size=n)
    return GameSpec(tuple(dims), LinearQuadratic(M, r))
