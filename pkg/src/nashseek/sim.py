"""Closed-loop assembly and event-aligned fixed-step integration.

State layout (``LAYOUT_VERSION``): players in order; within player i the
plant state xi_i comes first, followed by the controller states the law
uses, in the order gamma_hat_i, z_i (or y_i), theta_hat_i, D_hat_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from nashseek import control
from nashseek.control import ControllerConfig, ControllerState, ExactSign, Law, NeighborTable
from nashseek.errors import CertificationError, InputError, SimulationDiverged, ValidationError
from nashseek.game import (
    ClosedForm,
    Exact,
    Flow,
    GameSpec,
    LinearQuadratic,
    MonotonicityCertificate,
    Sampled,
    certify,
    pseudogradient,
    solve_ne,
)
from nashseek.graphs import SwitchingSchedule
from nashseek.plant import (
    BoundedRational,
    CustomRegressor,
    PlantSpec,
    SinOfState,
    ZeroRegressor,
    regressor_bound_violation,
    sample_disturbance,
)

LAYOUT_VERSION = "nashseek-layout-1"


@dataclass(frozen=True)
class Integration:
    h: float = 1e-3
    horizon: float = 50.0
    method: str = "euler"
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", self.method.lower())


@dataclass(frozen=True)
class Scenario:
    game: GameSpec
    plants: tuple
    controller: ControllerConfig
    integration: Integration = field(default_factory=Integration)
    schedule: SwitchingSchedule | None = None
    xi0: tuple | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "plants", tuple(self.plants))
        if self.xi0 is not None:
            object.__setattr__(self, "xi0", tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.xi0))

    @property
    def law(self) -> Law:
        return self.controller.law

    def realizations(self):
        return tuple(p.realization() for p in self.plants)


# --- validation ---------------------------------------------------------------


def scenario_problems(sc: Scenario, allow_zero_delta: bool = False) -> list:
    out = []
    game = sc.game
    N = game.num_players
    law = sc.law
    if len(sc.plants) != N:
        out.append(("/plants", f"expected {N} plants, got {len(sc.plants)}"))
    for i, p in enumerate(sc.plants[:N]):
        if p.dim != game.dims[i]:
            out.append((f"/plants/{i}/dim", f"{p.dim} does not match game dims[{i}]={game.dims[i]}"))
        try:
            p.realization()
        except Exception as exc:  # noqa: BLE001 - reported as a validation problem
            out.append((f"/plants/{i}/poles", str(exc)))
        if law is Law.CONSENSUS:
            if p.order != 1:
                out.append((f"/plants/{i}/order", "single-integrator law requires order 1"))
            if not isinstance(p.regressor, ZeroRegressor) and np.any(p.theta != 0):
                out.append((f"/plants/{i}/regressor", "single-integrator law requires g_i = 0"))
        if isinstance(p.regressor, CustomRegressor):
            bad = regressor_bound_violation(p.regressor, p.order, p.dim, sc.integration.horizon)
            if bad is not None:
                out.append((f"/plants/{i}/regressor",
                            f"||g|| = {bad[2]:.4g} exceeds the declared bound {bad[3]:.4g} at t = {bad[1]:.4g}"))
        if law in (Law.CONSENSUS, Law.PERFECT_INFO, Law.ADAPTIVE) and not p.disturbance.is_zero:
            out.append((f"/plants/{i}/disturbance", f"law {law.value} assumes zero disturbances"))
    param_counts = [p.num_params for p in sc.plants]
    out += sc.controller.problems(N, param_counts, allow_zero_delta)

    integ = sc.integration
    if integ.method not in ("euler", "rk4"):
        out.append(("/integration/method", f"unknown method {integ.method!r}"))
    if not integ.h > 0:
        out.append(("/integration/h", "must be positive"))
    if not integ.horizon > 0:
        out.append(("/integration/horizon", "must be positive"))
    if integ.stride < 1:
        out.append(("/integration/stride", "must be >= 1"))
    if law is not Law.PERFECT_INFO:
        if sc.schedule is None:
            out.append(("/schedule", f"law {law.value} needs a communication schedule"))
        elif sc.schedule.num_nodes != N:
            out.append(("/schedule/graphs", f"graphs have {sc.schedule.num_nodes} nodes, game has {N} players"))
    if sc.schedule is not None and integ.h > sc.schedule.dwell / 10 + 1e-15:
        out.append(("/integration/h", f"h={integ.h:g} exceeds dwell/10={sc.schedule.dwell / 10:g}"))
    for i, p in enumerate(sc.plants):
        dw = p.disturbance.kind.min_dwell
        if integ.h > dw / 10 + 1e-15:
            out.append(("/integration/h", f"h={integ.h:g} exceeds disturbance dwell/10={dw / 10:g} (player {i})"))
    if law is Law.DISTURBANCE and isinstance(sc.controller.sign_mode, ExactSign) and integ.method == "rk4":
        out.append(("/integration/method", "exact sign mode requires euler; use a smoothed sign for rk4"))
    if sc.xi0 is not None:
        if len(sc.xi0) != N:
            out.append(("/plants", f"xi0 given for {len(sc.xi0)} players, expected {N}"))
        for i, (v, p) in enumerate(zip(sc.xi0, sc.plants)):
            if v.shape != (p.order * p.dim,):
                out.append((f"/plants/{i}/xi0", f"length {v.shape[0]}, expected {p.order * p.dim}"))
    cfg = sc.controller
    for name, size in (("gamma_hat0", game.dims), ("theta_hat0", param_counts)):
        vals = getattr(cfg, name)
        if vals is not None:
            if len(vals) != N:
                out.append((f"/controller/{name}", f"expected {N} entries"))
            for i, (v, m) in enumerate(zip(vals, size)):
                if np.asarray(v).reshape(-1).shape != (m,):
                    out.append((f"/controller/{name}/{i}", f"expected length {m}"))
    if cfg.z0 is not None and np.asarray(cfg.z0).shape != (N, game.n):
        out.append(("/controller/z0", f"expected shape ({N}, {game.n})"))
    if cfg.d_hat0 is not None and len(cfg.d_hat0) != N:
        out.append(("/controller/d_hat0", f"expected {N} entries"))
    if not out:
        cert = game_certificate(game)
        if not cert.accepted:
            out.append(("/game", f"game is not strongly monotone (mu={cert.mu:.4g}); controllers refuse to run"))
    return out


def game_certificate(game: GameSpec):
    if isinstance(game.cost_family, LinearQuadratic):
        try:
            return certify(game, Exact())
        except CertificationError as exc:
            return MonotonicityCertificate(exc.mu, (), Exact())
    return certify(game, Sampled())


def validate(sc: Scenario, allow_zero_delta: bool = False) -> None:
    problems = scenario_problems(sc, allow_zero_delta)
    if problems:
        raise ValidationError(problems)


def reference_ne(game: GameSpec) -> np.ndarray:
    if isinstance(game.cost_family, LinearQuadratic):
        return solve_ne(game, ClosedForm())
    return solve_ne(game, Flow(tol=1e-10))


# --- state layout --------------------------------------------------------------


class StateLayout:
    def __init__(self, game: GameSpec, plants: Sequence[PlantSpec], law: Law):
        self.law = Law(law)
        N, n = game.num_players, game.n
        has_z = self.law is not Law.PERFECT_INFO
        adaptive = self.law in (Law.ADAPTIVE, Law.DISTURBANCE)
        pos = 0
        self.xi, self.gamma_hat, self.z, self.theta_hat, self.d_hat = [], [], [], [], []
        names = []
        for i, p in enumerate(plants):
            ni = p.dim
            sl = slice(pos, pos + p.order * ni)
            self.xi.append(sl)
            for k in range(p.order):
                pre = "x" if k == 0 else f"d{k}x"
                names += [f"{pre}_{i + 1}_{c + 1}" for c in range(ni)]
            pos = sl.stop
            if adaptive:
                self.gamma_hat.append(slice(pos, pos + ni))
                names += [f"gh_{i + 1}_{c + 1}" for c in range(ni)]
                pos += ni
            if has_z:
                self.z.append(slice(pos, pos + n))
                tag = "y" if self.law is Law.CONSENSUS else "z"
                for j in range(N):
                    names += [f"{tag}_{i + 1}_{j + 1}_{c + 1}" for c in range(game.dims[j])]
                pos += n
            if adaptive:
                m = p.num_params
                self.theta_hat.append(slice(pos, pos + m))
                names += [f"th_{i + 1}_{c + 1}" for c in range(m)]
                pos += m
            if self.law is Law.DISTURBANCE:
                self.d_hat.append(slice(pos, pos + 1))
                names.append(f"Dh_{i + 1}")
                pos += 1
        self.size = pos
        self.names = names

        def gather(slices):
            return np.concatenate([np.arange(s.start, s.stop) for s in slices]) if slices else np.zeros(0, int)

        self.gamma_hat_idx = gather(self.gamma_hat)
        self.z_idx = np.stack([np.arange(s.start, s.stop) for s in self.z]) if self.z else None
        self.d_hat_idx = gather(self.d_hat)
        self.x_idx = np.concatenate([np.arange(s.start, s.start + p.dim) for s, p in zip(self.xi, plants)])


# --- assembled closed loop -----------------------------------------------------------


class ClosedLoop:
    """Full-state derivative map for one scenario.

    Calling ``loop(t, state)`` uses the graph active at t; the integrator
    passes an explicit neighbour table and disturbance anchor so every stage
    of a step sees the same graph and disturbance piece.

    The default evaluator works on the stacked (concatenated) form of the
    closed loop.  ``reference=True`` instead calls the per-player laws in
    :mod:`nashseek.control` one player at a time; both give identical
    derivatives and the stacked path is several times faster.
    """

    def __init__(self, sc: Scenario, reference: bool = False):
        self.scenario = sc
        self.game = sc.game
        self.plants = sc.plants
        self.realizations = sc.realizations()
        self.config = sc.controller
        self.law = sc.law
        self.layout = StateLayout(sc.game, sc.plants, sc.law)
        self.schedule = sc.schedule
        self.reference = reference
        self._tables = {}
        self._stacked = {}
        game = self.game
        N, n = game.num_players, game.n
        self.last_u = np.zeros(n)
        self.last_d = np.zeros(n)
        self._dist = [not p.disturbance.is_zero for p in self.plants]
        self._any_dist = any(self._dist)
        L = self.layout
        self._lq = isinstance(game.cost_family, LinearQuadratic)
        self._owner = np.repeat(np.arange(N), game.dims)
        self._comp = np.arange(n)
        # stacked plant maps
        xi_idx = np.concatenate([np.arange(sl.start, sl.stop) for sl in L.xi])
        self._xi_idx = xi_idx
        tot = len(xi_idx)
        G = np.zeros((n, tot))
        Ks = np.zeros((n, tot))
        shift_dst, shift_src, drive_idx = [], [], []
        col = 0
        for i, (R, sl) in enumerate(zip(self.realizations, L.xi)):
            b = game.block(i)
            G[b, col:col + R.state_size] = R.output_map
            if R.order > 1:
                Ks[b, col + R.dim:col + R.state_size] = R.K_s
            idx = np.arange(sl.start, sl.stop)
            shift_dst.append(idx[:-R.dim])
            shift_src.append(idx[R.dim:])
            drive_idx.append(idx[-R.dim:])
            col += R.state_size
        self._G, self._Ks = G, Ks
        self._shift_dst = np.concatenate(shift_dst)
        self._shift_src = np.concatenate(shift_src)
        self._drive_idx = np.concatenate(drive_idx)
        self._has_reg = [not isinstance(p.regressor, ZeroRegressor) for p in self.plants]
        cfg = self.config
        if self.law is not Law.PERFECT_INFO:
            self._dk = cfg.delta * np.repeat(np.asarray(cfg.k, dtype=float), game.dims)
        if self.law in (Law.ADAPTIVE, Law.DISTURBANCE):
            self._kappa = np.repeat(np.asarray(cfg.kappa, dtype=float), game.dims)
            self._lam_inv = [np.linalg.inv(Lam) if Lam.size else Lam for Lam in cfg.Lambda]
        self._bounds = np.array([p.disturbance.declared_bound for p in self.plants])
        if L.theta_hat:
            self._theta_idx = np.concatenate([np.arange(sl.start, sl.stop) for sl in L.theta_hat])
            self._theta_true = np.concatenate([p.theta for p in self.plants])
            m_tot = len(self._theta_idx)
            lam_inv = np.zeros((m_tot, m_tot))
            pos = 0
            for Li in self._lam_inv:
                m = Li.shape[0]
                lam_inv[pos:pos + m, pos:pos + m] = Li
                pos += m
            self._lam_inv_all = lam_inv
            lam_all = np.zeros((m_tot, m_tot))
            pos = 0
            self._theta_offset = []
            for Lam in cfg.Lambda:
                m = Lam.shape[0]
                lam_all[pos:pos + m, pos:pos + m] = Lam
                self._theta_offset.append(pos)
                pos += m
            self._lam_all = lam_all
        self._scalar_players = game.n == game.num_players
        self._dist_players = [i for i, dd in enumerate(self._dist) if dd]
        self.want_u = True
        self._blocks = [game.block(i) for i in range(N)]
        self._affine_cache = {}
        if self.law in (Law.ADAPTIVE, Law.DISTURBANCE):
            P = np.zeros((n, L.size))
            P[np.arange(n), L.gamma_hat_idx] = 1.0
            P[:, xi_idx] -= G
            self._Pgt = P
        self._setup_regressors()

    def table(self, index: int) -> NeighborTable:
        tab = self._tables.get(index)
        if tab is None:
            tab = NeighborTable(self.schedule.graphs[index], self.game.dims)
            self._tables[index] = tab
        return tab

    def table_at(self, t: float) -> NeighborTable | None:
        if self.schedule is None:
            return None
        return self.table(self.schedule.index_at(t))

    def _weights(self, table: NeighborTable):
        key = id(table)
        w = self._stacked.get(key)
        if w is None:
            A = table.adjacency
            W = np.stack([np.repeat(A[i], self.game.dims) for i in range(A.shape[0])])
            w = (A, table.degree[:, None] + W, W)
            self._stacked[key] = w
        return w

    def controller_state(self, s: np.ndarray) -> ControllerState:
        L = self.layout
        return ControllerState(
            gamma_hat=s[L.gamma_hat_idx],
            z=s[L.z_idx] if L.z_idx is not None else None,
            theta_hat=[s[sl] for sl in L.theta_hat],
            d_hat=s[L.d_hat_idx],
        )

    def disturbance(self, i: int, t: float, anchor: float | None) -> np.ndarray:
        p = self.plants[i]
        if not self._dist[i]:
            return np.zeros(p.dim)
        return sample_disturbance(p.disturbance, t, p.dim, anchor)

    def _stacked_gradient(self, z: np.ndarray) -> np.ndarray:
        """H(z) = col(grad_i f_i(z_i)) with z of shape (N, n)."""
        game = self.game
        if self._lq:
            fam = game.cost_family
            return (z @ fam.M.T + fam.r)[self._owner, self._comp]
        return np.concatenate([game.partial_gradient(i, z[i]) for i in range(game.num_players)])

    def __call__(self, t: float, s: np.ndarray, table: NeighborTable | None = None,
                 anchor: float | None = None) -> np.ndarray:
        if table is None:
            table = self.table_at(t)
        if self.reference:
            return self._per_player(t, s, table, anchor)
        return self._concatenated(t, s, table, anchor)

    def _setup_regressors(self):
        """Split players into diagonal built-in regressors (vectorized),
        zero regressors and everything else (evaluated one by one)."""
        L = self.layout
        game = self.game
        self._reg_loop = []
        xi_pos, th_pos, rows, scales, is_sin = [], [], [], [], []
        for i, (p, sl) in enumerate(zip(self.plants, L.xi)):
            reg = p.regressor
            if isinstance(reg, ZeroRegressor):
                continue
            if isinstance(reg, (SinOfState, BoundedRational)):
                xi_pos.append(np.arange(sl.start, sl.stop))
                size = sl.stop - sl.start
                rows.append(game.offsets[i] + np.arange(size) % p.dim)
                scales.append(np.full(size, float(reg.scale)))
                is_sin.append(np.full(size, isinstance(reg, SinOfState)))
                if L.theta_hat:
                    th_pos.append(np.arange(L.theta_hat[i].start, L.theta_hat[i].stop))
                else:
                    th_pos.append(np.zeros(0, int))
            else:
                self._reg_loop.append(i)
        self._diag = bool(xi_pos)
        if self._diag:
            self._dg_xi = np.concatenate(xi_pos)
            self._dg_rows = np.concatenate(rows)
            self._dg_scale = np.concatenate(scales)
            sin_mask = np.concatenate(is_sin)
            self._dg_all_sin = bool(sin_mask.all())
            self._dg_sin = sin_mask
            theta_true = np.concatenate([self.plants[i].theta for i, p in enumerate(self.plants)
                                         if isinstance(p.regressor, (SinOfState, BoundedRational))])
            self._dg_theta = theta_true
            if L.theta_hat:
                self._dg_th = np.concatenate(th_pos)
                # positions of the diagonal-regressor parameters inside the stacked theta vector
                lookup = {int(k): j for j, k in enumerate(self._theta_idx)}
                self._dg_th_local = np.array([lookup[int(k)] for k in self._dg_th], dtype=int)

    def _true_theta(self, i):
        return self._dg_theta if i is None else self.plants[i].theta

    def _diag_values(self, s):
        x = s[self._dg_xi]
        if self._dg_all_sin:
            return self._dg_scale * np.sin(x)
        return self._dg_scale * np.where(self._dg_sin, np.sin(x), x / (1.0 + x * x))

    def _linear_terms(self, s, table):
        """Part of the stacked right-hand side that is affine in the state.

        For linear-quadratic games this covers everything except regressor,
        sign, parameter-update and disturbance terms.
        """
        L = self.layout
        law = self.law
        out = np.zeros_like(s)
        xi_all = s[self._xi_idx]
        gamma = self._G @ xi_all
        ksx = self._Ks @ xi_all
        lq = self._lq
        if law is Law.PERFECT_INFO:
            drive = -ksx - (pseudogradient(self.game, gamma) if lq else 0.0)
        elif law is Law.CONSENSUS:
            y = s[L.z_idx]
            drive = -self._dk * self._stacked_gradient(y) if lq else np.zeros(self.game.n)
            A, diag, W = self._weights(table)
            out[L.z_idx] = A @ y - diag * y + W * s[L.x_idx]
        else:
            gh = s[L.gamma_hat_idx]
            z = s[L.z_idx]
            seek = -self._dk * self._stacked_gradient(z) if lq else np.zeros(self.game.n)
            drive = seek + self._kappa * (gh - gamma) - ksx
            out[L.gamma_hat_idx] = seek
            A, diag, W = self._weights(table)
            out[L.z_idx] = A @ z - diag * z + W * gh
        out[self._shift_dst] = s[self._shift_src]
        out[self._drive_idx] = drive
        return out

    def _affine(self, table):
        """(J, c) with J s + c equal to :meth:`_linear_terms` for this graph."""
        key = None if table is None else id(table)
        aff = self._affine_cache.get(key)
        if aff is None:
            size = self.layout.size
            c = self._linear_terms(np.zeros(size), table)
            J = np.empty((size, size))
            e = np.zeros(size)
            for k in range(size):
                e[k] = 1.0
                J[:, k] = self._linear_terms(e, table) - c
                e[k] = 0.0
            aff = (J, c)
            self._affine_cache[key] = aff
        return aff

    def _g_theta(self, s, t, theta_of):
        """Stacked g_i(xi_i, t) theta_i for parameter vectors picked by ``theta_of``."""
        n = self.game.n
        acc = np.zeros(n)
        if self._diag:
            acc += np.bincount(self._dg_rows, self._diag_values(s) * theta_of(None), n)
        for i in self._reg_loop:
            p = self.plants[i]
            acc[self.game.block(i)] += p.regressor(s[self.layout.xi[i]], t, p.dim) @ theta_of(i)
        return acc

    def _concatenated(self, t, s, table, anchor):
        L = self.layout
        game = self.game
        law = self.law
        n = game.n
        J, c = self._affine(table)
        out = J @ s + c
        extra = None
        if not self._lq:
            if law is Law.PERFECT_INFO:
                extra = -pseudogradient(game, self._G @ s[self._xi_idx])
            elif law is Law.CONSENSUS:
                extra = -self._dk * self._stacked_gradient(s[L.z_idx])
            else:
                extra = -self._dk * self._stacked_gradient(s[L.z_idx])
                out[L.gamma_hat_idx] += extra
        if law in (Law.ADAPTIVE, Law.DISTURBANCE):
            gt = self._Pgt @ s
            if extra is None:
                extra = np.zeros(n)
            if law is Law.DISTURBANCE:
                sg = control.sgn(gt, self.config.sign_mode)
                dh = s[L.d_hat_idx]
                prod = gt * sg
                if self._scalar_players:
                    extra += sg * dh
                    out[L.d_hat_idx] = prod
                else:
                    extra += sg * dh[self._owner]
                    out[L.d_hat_idx] = np.bincount(self._owner, prod, game.num_players)
            th = s[self._theta_idx]
            g_gt = np.zeros(len(th))
            if self._diag:
                v = self._diag_values(s)
                rows = self._dg_rows
                loc = self._dg_th_local
                extra += np.bincount(rows, v * (th[loc] - self._dg_theta), n)
                g_gt[loc] = v * gt[rows]
            for i in self._reg_loop:
                p = self.plants[i]
                b = game.block(i)
                g = p.regressor(s[L.xi[i]], t, p.dim)
                extra[b] += g @ (s[L.theta_hat[i]] - p.theta)
                off = self._theta_offset[i]
                g_gt[off:off + p.num_params] = g.T @ gt[b]
            out[self._theta_idx] = self._lam_all @ g_gt
        if self._any_dist:
            if extra is None:
                extra = np.zeros(n)
            plants = self.plants
            for i in self._dist_players:
                p = plants[i]
                b = self._blocks[i]
                d = p.disturbance.kind.value(t, p.dim, anchor)
                extra[b] += d
                if self.want_u:
                    self.last_d[b] = d
        if extra is not None:
            out[self._drive_idx] += extra
        if self.want_u:
            # the plant input is what remains of the drive once the known
            # plant terms are taken out: xi_r' = u + d - g theta
            self.last_u[:] = out[self._drive_idx] - self.last_d + self._g_theta(s, t, self._true_theta)
        return out

    def _per_player(self, t, s, table, anchor):
        L = self.layout
        game = self.game
        out = np.empty_like(s)
        xis = [s[sl] for sl in L.xi]
        law = self.law
        if law is Law.PERFECT_INFO:
            us = [control.perfect_info_control(game, self.plants, self.realizations, xis, i, t)
                  for i in range(game.num_players)]
        elif law is Law.CONSENSUS:
            x = s[L.x_idx]
            y = s[L.z_idx]
            u, ydot = control.single_integrator_consensus_control(game, self.config, x, y, table)
            us = [u[game.block(i)] for i in range(game.num_players)]
            out[L.z_idx] = ydot
        else:
            state = self.controller_state(s)
            law_fn = control.disturbance_rejection_control if law is Law.DISTURBANCE else control.adaptive_control
            us = []
            for i, (R, p) in enumerate(zip(self.realizations, self.plants)):
                rates = law_fn(game, self.config, R, p.regressor, xis[i], state, table, i, t)
                us.append(rates.u)
                out[L.gamma_hat[i]] = rates.gamma_hat_dot
                out[L.z[i]] = rates.z_dot
                out[L.theta_hat[i]] = rates.theta_hat_dot
                if law is Law.DISTURBANCE:
                    out[L.d_hat[i]] = rates.d_hat_dot
        for i, (p, xi) in enumerate(zip(self.plants, xis)):
            n = p.dim
            d = self.disturbance(i, t, anchor)
            drive = us[i] + d - p.regressor(xi, t, n) @ p.theta
            sl = L.xi[i]
            out[sl.start:sl.stop - n] = xi[n:]
            out[sl.stop - n:sl.stop] = drive
            b = game.block(i)
            self.last_u[b] = us[i]
            self.last_d[b] = d
        return out

    # --- analysis-only views (may read plant truth) ---

    def gammas(self, s: np.ndarray) -> np.ndarray:
        return np.concatenate([R.output_map @ s[sl] for R, sl in zip(self.realizations, self.layout.xi)])

    def x_s(self, s: np.ndarray) -> np.ndarray:
        parts = [s[sl][p.dim:] for sl, p in zip(self.layout.xi, self.plants)]
        return np.concatenate(parts) if parts else np.zeros(0)

    def lyapunov(self, s: np.ndarray, x_star: np.ndarray):
        """(V, gamma_hat - gamma) for the active law; gamma_hat - gamma is None
        for laws without a gamma_hat state."""
        if self.law is Law.PERFECT_INFO:
            e = self._G @ s[self._xi_idx] - x_star
            return 0.5 * float(e @ e), None
        L = self.layout
        gt = self._Pgt @ s
        tt = s[self._theta_idx] - self._theta_true
        v = 0.5 * float(gt @ gt) + 0.5 * float(tt @ self._lam_inv_all @ tt)
        if self.law is Law.DISTURBANCE:
            dt = s[L.d_hat_idx] - self._bounds
            v += 0.5 * float(dt @ dt)
        return v, gt

    def monitor(self, s: np.ndarray, x_star: np.ndarray) -> dict:
        """Lyapunov monitor and error norms at one state."""
        L = self.layout
        gamma = self.gammas(s)
        x = s[L.x_idx]
        rec = {
            "dist_ne": float(np.linalg.norm(x - x_star)),
            "gamma_ne": float(np.linalg.norm(gamma - x_star)),
            "xs_norm": float(np.linalg.norm(self.x_s(s))),
        }
        if L.z_idx is not None:
            rec["cons_err"] = float(np.linalg.norm(s[L.z_idx] - x_star[None, :]))
        if self.law is Law.PERFECT_INFO:
            rec["V"] = 0.5 * float((gamma - x_star) @ (gamma - x_star))
        elif self.law in (Law.ADAPTIVE, Law.DISTURBANCE):
            gt = s[L.gamma_hat_idx] - gamma
            v = 0.5 * float(gt @ gt)
            tt = s[self._theta_idx] - self._theta_true
            v += 0.5 * float(tt @ self._lam_inv_all @ tt)
            theta_err = float(tt @ tt)
            rec["gamma_err"] = float(np.linalg.norm(gt))
            rec["theta_err"] = math.sqrt(theta_err)
            if self.law is Law.DISTURBANCE:
                dt = s[L.d_hat_idx] - np.array([p.disturbance.declared_bound for p in self.plants])
                v += 0.5 * float(dt @ dt)
                rec["D_err"] = float(np.linalg.norm(dt))
            rec["V"] = v
        return rec

    def initial_state(self) -> np.ndarray:
        sc = self.scenario
        L = self.layout
        cfg = self.config
        s = np.zeros(L.size)
        for i, (sl, p) in enumerate(zip(L.xi, self.plants)):
            if sc.xi0 is not None:
                s[sl] = sc.xi0[i]
        gamma = self.gammas(s)
        if L.gamma_hat:
            gh = gamma if cfg.gamma_hat0 is None else np.concatenate([np.ravel(v) for v in cfg.gamma_hat0])
            s[L.gamma_hat_idx] = gh
        if L.z_idx is not None and cfg.z0 is not None:
            s[L.z_idx] = np.asarray(cfg.z0, dtype=float)
        if L.theta_hat and cfg.theta_hat0 is not None:
            for sl, v in zip(L.theta_hat, cfg.theta_hat0):
                s[sl] = np.ravel(v)
        if L.d_hat and cfg.d_hat0 is not None:
            s[L.d_hat_idx] = np.asarray(cfg.d_hat0, dtype=float)
        return s


def assemble(sc: Scenario, allow_zero_delta: bool = False) -> ClosedLoop:
    validate(sc, allow_zero_delta)
    return ClosedLoop(sc)


# --- integration -------------------------------------------------------------------


def time_grid(sc: Scenario) -> np.ndarray:
    """Fixed-step grid that lands exactly on every switching instant and
    disturbance discontinuity in (0, T)."""
    T = sc.integration.horizon
    h = sc.integration.h
    events = set()
    if sc.schedule is not None:
        events.update(sc.schedule.switching_instants(T))
    for p in sc.plants:
        events.update(p.disturbance.kind.discontinuities(0.0, T))
    bounds = [0.0] + sorted(e for e in events if 0 < e < T) + [T]
    pieces = []
    for a, b in zip(bounds, bounds[1:]):
        m = max(1, math.ceil((b - a) / h - 1e-9))
        seg = a + h * np.arange(m)
        pieces.append(seg)
    pieces.append(np.array([T]))
    return np.concatenate(pieces)


@dataclass
class SimTrace:
    t: np.ndarray
    sigma: np.ndarray
    states: np.ndarray
    u: np.ndarray
    d: np.ndarray
    monitors: dict
    x_star: np.ndarray
    layout_names: list
    law: Law
    stats: dict
    scenario: Scenario = field(repr=False)
    layout_version: str = LAYOUT_VERSION

    def column(self, name: str) -> np.ndarray:
        if name in self.monitors:
            return self.monitors[name]
        if name == "t":
            return self.t
        if name in self.layout_names:
            return self.states[:, self.layout_names.index(name)]
        raise InputError(f"unknown trace column {name!r}")

    def _layout(self) -> StateLayout:
        return StateLayout(self.scenario.game, self.scenario.plants, self.law)

    def actions(self) -> np.ndarray:
        return self.states[:, self._layout().x_idx]

    def gammas(self) -> np.ndarray:
        L = self._layout()
        reals = self.scenario.realizations()
        return np.concatenate([self.states[:, sl] @ R.output_map.T for sl, R in zip(L.xi, reals)], axis=1)

    def x_s(self) -> np.ndarray:
        L = self._layout()
        parts = [self.states[:, sl][:, p.dim:] for sl, p in zip(L.xi, self.scenario.plants)]
        return np.concatenate(parts, axis=1)

    def gamma_hat(self) -> np.ndarray:
        return self.states[:, self._layout().gamma_hat_idx]

    def z(self) -> np.ndarray:
        L = self._layout()
        return self.states[:, L.z_idx]

    def theta_hat(self) -> list:
        return [self.states[:, sl] for sl in self._layout().theta_hat]

    def d_hat(self) -> np.ndarray:
        return self.states[:, self._layout().d_hat_idx]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def integrate(sc: Scenario, *, allow_zero_delta: bool = False, x_star: np.ndarray | None = None) -> SimTrace:
    """Integrate the closed loop over [0, T] on the event-aligned grid.

    Raises :class:`SimulationDiverged` (carrying the partial trace) as soon
    as the state stops being finite.
    """
    # overflow is detected and reported explicitly, so numpy need not warn
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate(sc, allow_zero_delta, x_star)


def _integrate(sc, allow_zero_delta, x_star):
    loop = assemble(sc, allow_zero_delta)
    if x_star is None:
        x_star = reference_ne(sc.game)
    grid = time_grid(sc)
    integ = sc.integration
    rk4 = integ.method == "rk4"
    stride = integ.stride
    s = loop.initial_state()
    sched = sc.schedule
    L = loop.layout

    n_rec = (len(grid) - 1) // stride + 2
    rec_t = np.empty(n_rec)
    rec_sigma = np.empty(n_rec, dtype=int)
    rec_s = np.empty((n_rec, L.size))
    rec_u = np.empty((n_rec, sc.game.n))
    rec_d = np.empty((n_rec, sc.game.n))
    mon_rows = []
    k_rec = 0

    track_v = sc.law in (Law.ADAPTIVE, Law.DISTURBANCE, Law.PERFECT_INFO)
    rejecting = sc.law is Law.DISTURBANCE
    v_prev, gt = loop.lyapunov(s, x_star) if track_v else (None, None)
    v_rate = -math.inf
    v_inc = -math.inf
    dh_idx = L.d_hat_idx
    dh_prev = s[dh_idx]
    d_viol = 0
    flips = 0
    prev_sign = np.sign(gt) if rejecting else None

    def record(t, sig, state, mon):
        nonlocal k_rec
        rec_t[k_rec] = t
        rec_sigma[k_rec] = sig
        rec_s[k_rec] = state
        rec_u[k_rec] = loop.last_u
        rec_d[k_rec] = loop.last_d
        mon_rows.append(mon)
        k_rec += 1

    def partial():
        return _build_trace(rec_t[:k_rec], rec_sigma[:k_rec], rec_s[:k_rec], rec_u[:k_rec], rec_d[:k_rec],
                            mon_rows, x_star, L, sc, {})

    sig = -1
    for step in range(len(grid) - 1):
        t0 = grid[step]
        t1 = grid[step + 1]
        h = t1 - t0
        mid = 0.5 * (t0 + t1)
        if sched is not None:
            sig = sched.index_at(mid)
            table = loop.table(sig)
        else:
            table = None
        rec_now = step % stride == 0
        loop.want_u = rec_now
        k1 = loop(t0, s, table, mid)
        loop.want_u = False
        if rec_now:
            record(t0, sig, s, loop.monitor(s, x_star))
        if rk4:
            k2 = loop(t0 + 0.5 * h, s + 0.5 * h * k1, table, mid)
            k3 = loop(t0 + 0.5 * h, s + 0.5 * h * k2, table, mid)
            k4 = loop(t1, s + h * k3, table, mid)
            s_new = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            s_new = s + h * k1
        # one reduction catches NaN and Inf; a sum overflowing from finite
        # entries near the float limit is divergence for all practical purposes
        if not math.isfinite(s_new.sum()):
            raise SimulationDiverged(t1, s, partial())
        if track_v:
            v, gt = loop.lyapunov(s_new, x_star)
            dv = v - v_prev
            if dv > v_inc:
                v_inc = dv
            if dv > v_rate * h:
                v_rate = dv / h
            v_prev = v
        if rejecting:
            dh_new = s_new[dh_idx]
            if (dh_new < dh_prev).any():
                d_viol += 1
            dh_prev = dh_new
            sign_now = np.sign(gt)
            flips += int((sign_now * prev_sign < 0).sum())
            prev_sign = sign_now
        s = s_new
    # final point: one extra evaluation to fill u and d
    loop.want_u = True
    T = grid[-1]
    if sched is not None:
        sig = sched.index_at(T)
        loop(T, s, loop.table(sig), T)
    else:
        loop(T, s, None, T)
    record(T, sig, s, loop.monitor(s, x_star))

    stats = {"steps": len(grid) - 1, "h": integ.h, "method": integ.method}
    if track_v:
        stats["v_max_increase_rate"] = max(v_rate, 0.0)
        stats["v_max_increment"] = max(v_inc, 0.0)
    if sc.law is Law.DISTURBANCE:
        stats["d_hat_violations"] = d_viol
        stats["chatter_rate"] = flips / (T * sc.game.n)
    return _build_trace(rec_t[:k_rec], rec_sigma[:k_rec], rec_s[:k_rec], rec_u[:k_rec], rec_d[:k_rec],
                        mon_rows, x_star, L, sc, stats)


def _build_trace(t, sigma, states, u, d, mon_rows, x_star, layout, sc, stats) -> SimTrace:
    keys = list(mon_rows[0].keys()) if mon_rows else []
    monitors = {k: np.array([row[k] for row in mon_rows]) for k in keys}
    return SimTrace(t.copy(), sigma.copy(), states.copy(), u.copy(), d.copy(), monitors, x_star,
                    list(layout.names), sc.law, stats, sc)
