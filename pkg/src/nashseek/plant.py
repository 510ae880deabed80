"""Player dynamics: high-order uncertain plants in companion form.

Each player obeys

    x_i^(r_i) + g_i(xi_i, t) theta_i = u_i + d_i,
    xi_i = col(x_i, x_i', ..., x_i^(r_i - 1)).

The true parameter ``theta`` and the disturbance live on :class:`PlantSpec`
only.  Controllers receive a :class:`CompanionRealization` and a regressor,
never the plant spec itself.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import expm

from nashseek.errors import ConstructionError, InputError

# --- regressors ------------------------------------------------------------


@dataclass(frozen=True)
class ZeroRegressor:
    m: int = 1

    def columns(self, dim: int, order: int) -> int:
        return self.m

    def __call__(self, xi: np.ndarray, t: float, dim: int) -> np.ndarray:
        return np.zeros((dim, self.m))

    def bound(self, xi: np.ndarray, dim: int) -> float:
        return 0.0


@dataclass(frozen=True)
class SinOfState:
    """g(xi) = scale * [diag(sin x), diag(sin x'), ..., diag(sin x^(r-1))].

    Shape n_i x (n_i r_i); spectral norm at most scale * sqrt(r_i).
    """

    scale: float = 1.0

    def columns(self, dim: int, order: int) -> int:
        return dim * order

    def __call__(self, xi, t, dim):
        s = self.scale * np.sin(xi)
        if dim == 1:
            return s[None, :]
        return _diag_blocks(s, dim)

    def bound(self, xi, dim):
        return abs(self.scale) * math.sqrt(len(xi) // dim)


@dataclass(frozen=True)
class BoundedRational:
    """Entrywise saturation v / (1 + v^2) in the same block layout as
    :class:`SinOfState`; entries are bounded by 1/2."""

    scale: float = 1.0

    def columns(self, dim: int, order: int) -> int:
        return dim * order

    def __call__(self, xi, t, dim):
        s = self.scale * xi / (1.0 + xi * xi)
        if dim == 1:
            return s[None, :]
        return _diag_blocks(s, dim)

    def bound(self, xi, dim):
        return 0.5 * abs(self.scale) * math.sqrt(len(xi) // dim)


@dataclass(frozen=True)
class CustomRegressor:
    """Arbitrary g(xi, t) of shape (dim, m) with a declared bound phi(xi)."""

    fn: Callable[[np.ndarray, float], np.ndarray]
    phi: Callable[[np.ndarray], float]
    m: int

    def columns(self, dim: int, order: int) -> int:
        return self.m

    def __call__(self, xi, t, dim):
        return np.asarray(self.fn(xi, t), dtype=float).reshape(dim, self.m)

    def bound(self, xi, dim):
        return float(self.phi(xi))


Regressor = Union[ZeroRegressor, SinOfState, BoundedRational, CustomRegressor]


def regressor_bound_violation(reg, order: int, dim: int, horizon: float = 1.0, samples: int = 64,
                              seed: int = 0, scale: float = 5.0) -> tuple | None:
    """Spot-check ||g(xi, t)||_2 <= reg.bound(xi) at seeded random (xi, t).

    Returns ``(xi, t, norm, bound)`` for the worst violation, or ``None``.
    This is a sampling heuristic, not a proof of the declared bound.
    """
    rng = np.random.default_rng(seed)
    worst = None
    for _ in range(samples):
        xi = rng.normal(scale=scale, size=order * dim)
        t = float(rng.uniform(0.0, horizon))
        norm = float(np.linalg.norm(reg(xi, t, dim), 2))
        bound = float(reg.bound(xi, dim))
        excess = norm - bound * (1 + 1e-9)
        if excess > 0 and (worst is None or excess > worst[2] - worst[3]):
            worst = (xi, t, norm, bound)
    return worst


def _diag_blocks(values: np.ndarray, dim: int) -> np.ndarray:
    order = len(values) // dim
    out = np.zeros((dim, dim * order))
    rows = np.arange(dim)
    for k in range(order):
        out[rows, k * dim + rows] = values[k * dim:(k + 1) * dim]
    return out


# --- disturbances ----------------------------------------------------------


@lru_cache(maxsize=None)
def _unit(dim: int) -> np.ndarray:
    v = np.full(dim, 1.0 / math.sqrt(dim))
    v.setflags(write=False)
    return v


def _direction(dim: int) -> np.ndarray:
    return _unit(dim)


@dataclass(frozen=True)
class NoDisturbance:
    min_dwell = math.inf

    def value(self, t, dim, anchor=None):
        return np.zeros(dim)

    def discontinuities(self, t0, t1):
        return []


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    frequency: float
    phase: float = 0.0
    min_dwell = math.inf

    def value(self, t, dim, anchor=None):
        return self.amplitude * math.sin(2 * math.pi * self.frequency * t + self.phase) * _direction(dim)

    def discontinuities(self, t0, t1):
        return []


@dataclass(frozen=True)
class SquareWave:
    """+amplitude on the first half of each period, -amplitude on the second."""

    amplitude: float
    period: float

    @property
    def min_dwell(self):
        return self.period / 2

    def value(self, t, dim, anchor=None):
        s = t if anchor is None else anchor
        k = math.floor(2 * s / self.period + 1e-9)
        sign = 1.0 if k % 2 == 0 else -1.0
        return sign * self.amplitude * _direction(dim)

    def discontinuities(self, t0, t1):
        return _grid_points(self.period / 2, t0, t1)


@dataclass(frozen=True)
class PiecewiseConstantRandom:
    """Constant on [k dwell, (k+1) dwell) with a seeded random value of norm at
    most ``amplitude``; each piece is a pure function of (seed, k)."""

    amplitude: float
    dwell: float
    seed: int = 0

    @property
    def min_dwell(self):
        return self.dwell

    def value(self, t, dim, anchor=None):
        s = t if anchor is None else anchor
        k = math.floor(s / self.dwell + 1e-9)
        rng = np.random.default_rng([self.seed, k])
        v = rng.normal(size=dim)
        v *= self.amplitude * rng.uniform() / np.linalg.norm(v)
        return v

    def discontinuities(self, t0, t1):
        return _grid_points(self.dwell, t0, t1)


@dataclass(frozen=True)
class Exosystem:
    """d(t) = D expm(S t) v0."""

    S: np.ndarray
    D: np.ndarray
    v0: np.ndarray
    min_dwell = math.inf

    def value(self, t, dim, anchor=None):
        S = np.asarray(self.S, dtype=float)
        return np.asarray(self.D, dtype=float) @ expm(S * t) @ np.asarray(self.v0, dtype=float)

    def discontinuities(self, t0, t1):
        return []


DisturbanceKind = Union[NoDisturbance, Sinusoid, SquareWave, PiecewiseConstantRandom, Exosystem]


def _grid_points(spacing, t0, t1):
    k = math.floor(t0 / spacing) + 1
    out = []
    while k * spacing < t1 - 1e-12:
        out.append(k * spacing)
        k += 1
    return out


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: DisturbanceKind = field(default_factory=NoDisturbance)
    declared_bound: float | None = None

    def __post_init__(self):
        kind = self.kind
        amp = getattr(kind, "amplitude", None)
        bound = self.declared_bound
        if bound is None:
            if isinstance(kind, NoDisturbance):
                bound = 0.0
            elif amp is not None:
                bound = abs(float(amp))
            else:
                raise InputError("Exosystem disturbances need an explicit declared_bound")
        if bound < 0:
            raise InputError("declared_bound must be nonnegative")
        if amp is not None and abs(amp) > bound + 1e-12:
            raise InputError(f"amplitude {amp} exceeds declared bound {bound}")
        object.__setattr__(self, "declared_bound", float(bound))

    @property
    def is_zero(self) -> bool:
        return isinstance(self.kind, NoDisturbance)


def sample_disturbance(spec: DisturbanceSpec, t: float, dim: int = 1, anchor: float | None = None) -> np.ndarray:
    """Disturbance value at time t.

    ``anchor`` selects which continuous piece to use for piecewise signals;
    integrators pass the midpoint of the current step so that every stage of
    a step sees the same piece.
    """
    if t < 0:
        raise InputError(f"t must be nonnegative, got {t}")
    return spec.kind.value(t, dim, anchor)


# --- companion realization ---------------------------------------------------


def _shift(r: int) -> np.ndarray:
    return np.eye(r, k=1)


def _last(r: int) -> np.ndarray:
    e = np.zeros((r, 1))
    if r:
        e[-1, 0] = 1.0
    return e


@dataclass(frozen=True)
class CompanionRealization:
    order: int
    dim: int
    coeffs: tuple  # c_0, ..., c_{r-2}; empty when order == 1
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    A_s: np.ndarray = field(repr=False)
    B_s: np.ndarray = field(repr=False)
    K_s: np.ndarray = field(repr=False)
    A_K: np.ndarray = field(repr=False)
    output_map: np.ndarray = field(repr=False)  # gamma = output_map @ xi

    @property
    def state_size(self) -> int:
        return self.order * self.dim

    @property
    def hurwitz_coeffs(self) -> tuple:
        return self.coeffs


def build_realization(order: int, dim: int, poles: Sequence | None = None) -> CompanionRealization:
    """Build the companion-form matrices for an order-``order`` plant.

    ``poles`` are the r-1 roots of a(s) = s^(r-1) + c_{r-2} s^(r-2) + ... + c_0;
    they are uniformly rescaled so that c_0 = 1.  Defaults to all poles at -1.
    """
    r, n = int(order), int(dim)
    if r < 1 or n < 1:
        raise ConstructionError(f"order and dim must be positive, got order={order}, dim={dim}")
    if poles is None:
        poles = [-1.0] * (r - 1)
    poles = np.asarray([complex(p) for p in poles])
    if len(poles) != r - 1:
        raise ConstructionError(f"order {r} needs {r - 1} poles, got {len(poles)}")
    if r >= 2:
        if np.any(poles.real >= 0):
            raise ConstructionError(f"poles {poles.tolist()} are not all in the open left half-plane")
        poly = np.poly(poles)
        if np.max(np.abs(poly.imag)) > 1e-9 * np.max(np.abs(poly)):
            raise ConstructionError("complex poles must come in conjugate pairs")
        c0 = poly.real[-1]
        if not c0 > 0:
            raise ConstructionError("constant coefficient of a(s) is zero")
        poly = np.poly(poles * c0 ** (-1.0 / (r - 1))).real
        coeffs = tuple(float(c) for c in poly[::-1][:-1])
        coeffs = (1.0,) + coeffs[1:]
    else:
        coeffs = ()

    I = np.eye(n)
    A = np.kron(_shift(r), I)
    B = np.kron(_last(r), I)
    C = np.kron(np.eye(1, r), I)
    rs = r - 1
    A_s = np.kron(_shift(rs), I)
    B_s = np.kron(_last(rs), I)
    K_s = np.kron(np.asarray(coeffs).reshape(1, rs), I)
    comp = _shift(rs)
    if rs:
        comp[-1, :] = -np.asarray(coeffs)
    A_K = np.kron(comp, I)
    output_map = np.kron(np.asarray(coeffs + (1.0,)).reshape(1, r), I)
    for M in (A, B, C, A_s, B_s, K_s, A_K, output_map):
        M.setflags(write=False)
    return CompanionRealization(r, n, coeffs, A, B, C, A_s, B_s, K_s, A_K, output_map)


def fictitious_output(realization: CompanionRealization, xi) -> np.ndarray:
    """gamma_i = sum_k c_k x_i^(k) + x_i^(r_i - 1)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (realization.state_size,):
        raise InputError(f"xi has shape {xi.shape}, expected ({realization.state_size},)")
    return realization.output_map @ xi


# --- plant -----------------------------------------------------------------


@dataclass(frozen=True)
class PlantSpec:
    order: int
    dim: int
    regressor: Regressor = field(default_factory=ZeroRegressor)
    theta: np.ndarray = None
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    poles: tuple | None = None

    def __post_init__(self):
        if self.order < 1 or self.dim < 1:
            raise InputError("order and dim must be positive")
        m = self.regressor.columns(self.dim, self.order)
        theta = np.zeros(m) if self.theta is None else np.array(self.theta, dtype=float).reshape(-1)
        if theta.shape != (m,):
            raise InputError(f"theta has length {theta.shape[0]}, regressor has {m} columns")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def num_params(self) -> int:
        return self.theta.shape[0]

    def realization(self) -> CompanionRealization:
        return build_realization(self.order, self.dim, self.poles)


def plant_derivative(spec: PlantSpec, realization: CompanionRealization, xi, u, t: float,
                     anchor: float | None = None) -> np.ndarray:
    """A xi + B (u + d(t) - g(xi, t) theta)."""
    n = spec.dim
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (realization.state_size,):
        raise InputError(f"xi has shape {xi.shape}, expected ({realization.state_size},)")
    u = np.asarray(u, dtype=float).reshape(n)
    drive = u - spec.regressor(xi, t, n) @ spec.theta
    if not spec.disturbance.is_zero:
        drive = drive + sample_disturbance(spec.disturbance, t, n, anchor)
    out = np.empty_like(xi)
    out[:-n] = xi[n:]
    out[-n:] = drive
    return out
