"""Scenarios and oracles shared by the test modules."""

import itertools

import numpy as np

from nashseek.control import ControllerConfig, Law
from nashseek.game import GameSpec, LinearQuadratic, pseudogradient, random_lq_game
from nashseek.graphs import Periodic, SwitchingSchedule, laplacian, leader_operator
from nashseek.plant import BoundedRational, DisturbanceSpec, PlantSpec, SinOfState, SquareWave, Sinusoid
from nashseek.sim import Integration, Scenario, StateLayout


def two_player_game():
    return GameSpec((1, 1), LinearQuadratic([[2.0, 1.0], [1.0, 2.0]], [-2.0, -2.0]))


def three_player_game():
    M = [[2.0, 0.5, 0.5], [0.5, 2.0, 0.5], [0.5, 0.5, 2.0]]
    return GameSpec((1, 1, 1), LinearQuadratic(M, [-1.0, -2.0, 1.0]))


def cyclic_schedule(num_nodes=3, weight=3.0, dwell=1.0):
    graphs = []
    for a in range(num_nodes):
        A = np.zeros((num_nodes, num_nodes))
        A[(a + 1) % num_nodes, a] = weight
        graphs.append(A)
    return SwitchingSchedule(tuple(graphs), Periodic(tuple(range(num_nodes)), dwell), num_nodes * dwell)


def complete_schedule(num_nodes):
    A = np.ones((num_nodes, num_nodes)) - np.eye(num_nodes)
    return SwitchingSchedule((A,), Periodic((0,), 1.0), 1.0)


def make_scenario(law, *, horizon=2.0, h=0.01, method="rk4", sign_mode=None, disturbed=False, stride=1):
    """Small three-player scenario for each law (order-2 plants except for
    the single-integrator law)."""
    law = Law(law)
    game = three_player_game()
    if law is Law.CONSENSUS:
        plants = tuple(PlantSpec(1, 1) for _ in range(3))
        xi0 = ([2.0], [-1.0], [0.5])
    else:
        dists = [DisturbanceSpec()] * 3
        if disturbed:
            dists = [DisturbanceSpec(SquareWave(1.0, 4.0)), DisturbanceSpec(Sinusoid(1.5, 0.3, 0.0)),
                     DisturbanceSpec(SquareWave(0.8, 6.0))]
        thetas = ([1.5, -0.5], [-1.0, 2.0], [0.5, 1.0])
        plants = tuple(PlantSpec(2, 1, SinOfState(1.0), th, dd) for th, dd in zip(thetas, dists))
        xi0 = ([1.0, 0.0], [-1.0, 0.5], [0.0, 0.0])
    kw = {}
    if law is not Law.PERFECT_INFO:
        kw["k"] = (1.0, 1.0, 1.0)
    if law in (Law.ADAPTIVE, Law.DISTURBANCE):
        kw["kappa"] = (2.0, 2.0, 2.0)
        kw["Lambda"] = tuple(np.eye(2) for _ in range(3))
    if sign_mode is not None:
        kw["sign_mode"] = sign_mode
    ctrl = ControllerConfig(law, delta=0.04 if law is not Law.PERFECT_INFO else 1.0, **kw)
    schedule = None if law is Law.PERFECT_INFO else cyclic_schedule()
    return Scenario(game, plants, ctrl, Integration(h, horizon, method, stride), schedule, xi0, name=law.value)


# --- graph oracles ---------------------------------------------------------------------


def edge(n, src, dst, w=1.0):
    """Adjacency with the single edge src -> dst (dst observes src)."""
    A = np.zeros((n, n))
    A[dst, src] = w
    return A


def reachability_oracle(A):
    """Strong connectivity through the boolean transitive closure (I + A)^(N-1)."""
    N = A.shape[0]
    R = (np.eye(N) + (A > 0)).astype(bool)
    P = R.copy()
    for _ in range(N):
        P = (P.astype(int) @ R.astype(int)) > 0
    return bool(P.all())


def all_digraphs(N):
    off = [(i, j) for i in range(N) for j in range(N) if i != j]
    for bits in itertools.product((0, 1), repeat=len(off)):
        A = np.zeros((N, N))
        for b, (i, j) in zip(bits, off):
            A[i, j] = b
        yield A


# --- stacked block form of the closed loop ---------------------------------------------


def random_schedule(rng, N):
    A = rng.uniform(0.5, 2.0, size=(N, N)) * (rng.random((N, N)) < 0.6)
    np.fill_diagonal(A, 0.0)
    return SwitchingSchedule((A,), Periodic((0,), 1.0), 1.0)


def random_law_scenario(law, rng):
    game = random_lq_game(rng, 3, dims=[1, 2, 1])
    N = 3
    law = Law(law)
    if law is Law.CONSENSUS:
        plants = tuple(PlantSpec(1, d) for d in game.dims)
    elif law is Law.PERFECT_INFO:
        regs = (SinOfState(1.3), BoundedRational(0.8), SinOfState(0.5))
        plants = tuple(PlantSpec(r, d, reg, rng.uniform(-2, 2, size=r * d))
                       for r, d, reg in zip((1, 2, 3), game.dims, regs))
    else:
        dist = DisturbanceSpec(SquareWave(1.0, 2.0)) if law is Law.DISTURBANCE else DisturbanceSpec()
        plants = tuple(PlantSpec(2, d, SinOfState(), rng.uniform(-2, 2, size=2 * d), dist) for d in game.dims)
    kw = {}
    if law is not Law.PERFECT_INFO:
        kw["k"] = tuple(rng.uniform(0.5, 2.0, size=N))
    if law in (Law.ADAPTIVE, Law.DISTURBANCE):
        kw["kappa"] = tuple(rng.uniform(0.5, 3.0, size=N))
        lams = []
        for p in plants:
            B = rng.normal(size=(p.num_params, p.num_params))
            lams.append(B @ B.T + np.eye(p.num_params))
        kw["Lambda"] = tuple(lams)
    cfg = ControllerConfig(law, delta=0.3, **kw)
    sched = None if law is Law.PERFECT_INFO else random_schedule(rng, N)
    return Scenario(game, plants, cfg, Integration(0.01, 1.0, "euler"), sched)


def block_form(sc, s, t):
    """Derivative assembled from stacked matrices:
    gamma = G xi, u = -delta K H(z) + g theta_hat + kappa gamma_tilde - K_s x^s (+ sgn D_hat),
    z' = -(L kron I + B)(z - 1 kron ref), with B the leader operator."""
    game = sc.game
    N, n = game.num_players, game.n
    L = StateLayout(game, sc.plants, sc.law)
    reals = sc.realizations()
    xis = [s[sl] for sl in L.xi]
    gamma = np.concatenate([R.output_map @ xi for R, xi in zip(reals, xis)])
    Ks_xs = np.concatenate([R.K_s @ xi[R.dim:] if R.order > 1 else np.zeros(R.dim) for R, xi in zip(reals, xis)])
    g = [p.regressor(xi, t, p.dim) for p, xi in zip(sc.plants, xis)]
    out = np.zeros_like(s)
    cfg = sc.controller
    law = sc.law
    if law is Law.PERFECT_INFO:
        theta = [p.theta for p in sc.plants]
        u = -pseudogradient(game, gamma) + np.concatenate([gi @ th for gi, th in zip(g, theta)]) - Ks_xs
    else:
        A = sc.schedule.graphs[0]
        Lap = np.kron(laplacian(A), np.eye(n))
        B = leader_operator(A, game.dims)
        zmat = s[L.z_idx]
        z = zmat.reshape(-1)
        H = np.concatenate([game.partial_gradient(i, zmat[i]) for i in range(N)])
        dK = cfg.delta * np.repeat(cfg.k, game.dims)
        seek = -dK * H
        ref = s[L.x_idx] if law is Law.CONSENSUS else s[L.gamma_hat_idx]
        zdot = -(Lap @ z) - B @ (z - np.tile(ref, N))
        out[L.z_idx] = zdot.reshape(N, n)
        if law is Law.CONSENSUS:
            u = seek
        else:
            gh = s[L.gamma_hat_idx]
            gt = gh - gamma
            th_hat = [s[sl] for sl in L.theta_hat]
            u = seek + np.concatenate([gi @ th for gi, th in zip(g, th_hat)]) \
                + np.repeat(cfg.kappa, game.dims) * gt - Ks_xs
            out[L.gamma_hat_idx] = seek
            for i, sl in enumerate(L.theta_hat):
                out[sl] = cfg.Lambda[i] @ g[i].T @ gt[game.block(i)]
            if law is Law.DISTURBANCE:
                sg = np.sign(gt)
                d_hat = s[L.d_hat_idx]
                u = u + sg * np.repeat(d_hat, game.dims)
                for i, sl in enumerate(L.d_hat):
                    b = game.block(i)
                    out[sl] = gt[b] @ sg[b]
    for i, (p, xi, sl) in enumerate(zip(sc.plants, xis, L.xi)):
        b = game.block(i)
        d = p.disturbance.kind.value(t, p.dim, t)
        out[sl.start:sl.stop - p.dim] = xi[p.dim:]
        out[sl.stop - p.dim:sl.stop] = u[b] + d - g[i] @ p.theta
    return out
