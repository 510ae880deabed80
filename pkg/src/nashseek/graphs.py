"""Switching directed communication graphs.

Edge convention: ``adjacency[i, j] > 0`` means player i observes player j,
i.e. the digraph contains the edge j -> i.  The Laplacian is ``D - A`` with
``D`` the diagonal of row sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from nashseek.errors import InputError

_EPS = 1e-12


@dataclass(frozen=True)
class Periodic:
    order: tuple
    dwell: float


@dataclass(frozen=True)
class Scripted:
    """Explicit switching events ``(start_time, graph_index)``.

    The last graph stays active forever.  ``dwell`` is the minimum allowed
    gap between consecutive events.
    """

    events: tuple
    dwell: float


Timeline = Union[Periodic, Scripted]


@dataclass(frozen=True)
class SwitchingSchedule:
    graphs: tuple
    timeline: Timeline
    window: float

    def __post_init__(self):
        graphs = []
        for p, A in enumerate(self.graphs):
            A = np.array(A, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise InputError(f"graph {p} is not square: shape {A.shape}")
            if np.any(A < 0):
                raise InputError(f"graph {p} has negative weights")
            if np.any(np.diag(A) != 0):
                raise InputError(f"graph {p} has nonzero diagonal entries")
            A.setflags(write=False)
            graphs.append(A)
        if not graphs:
            raise InputError("schedule needs at least one graph")
        if len({A.shape for A in graphs}) != 1:
            raise InputError("all graphs must have the same number of nodes")
        object.__setattr__(self, "graphs", tuple(graphs))
        tl = self.timeline
        if not tl.dwell > 0:
            raise InputError(f"dwell time must be positive, got {tl.dwell}")
        if not self.window > 0:
            raise InputError(f"window must be positive, got {self.window}")
        if isinstance(tl, Periodic):
            order = tuple(int(p) for p in tl.order)
            if not order:
                raise InputError("periodic order is empty")
            object.__setattr__(self, "timeline", Periodic(order, float(tl.dwell)))
        elif isinstance(tl, Scripted):
            events = tuple((float(t), int(p)) for t, p in tl.events)
            if not events:
                raise InputError("scripted timeline has no events")
            for (t0, _), (t1, _) in zip(events, events[1:]):
                if t1 - t0 < tl.dwell - _EPS:
                    raise InputError(f"switching gap {t1 - t0:g} at t={t1:g} is shorter than dwell {tl.dwell:g}")
            order = tuple(p for _, p in events)
            object.__setattr__(self, "timeline", Scripted(events, float(tl.dwell)))
        else:
            raise InputError(f"unknown timeline {tl!r}")
        for p in order:
            if not 0 <= p < len(graphs):
                raise InputError(f"graph index {p} out of range (have {len(graphs)} graphs)")

    @property
    def num_nodes(self) -> int:
        return self.graphs[0].shape[0]

    @property
    def dwell(self) -> float:
        return self.timeline.dwell

    @property
    def start(self) -> float:
        tl = self.timeline
        return 0.0 if isinstance(tl, Periodic) else tl.events[0][0]

    def index_at(self, t: float) -> int:
        """Graph index active at t; intervals are half-open [t_j, t_{j+1})."""
        tl = self.timeline
        if t < self.start - _EPS:
            raise InputError(f"t={t} precedes timeline start {self.start}")
        if isinstance(tl, Periodic):
            # tolerate round-off just below a switching instant
            k = math.floor(t / tl.dwell + 1e-9)
            return tl.order[k % len(tl.order)]
        idx = tl.events[0][1]
        for start, p in tl.events:
            if start <= t + _EPS:
                idx = p
            else:
                break
        return idx

    def switching_instants(self, t_end: float, t_start: float = 0.0) -> list:
        """Instants in (t_start, t_end) at which the active graph may change."""
        tl = self.timeline
        if isinstance(tl, Periodic):
            if len(tl.order) == 1:
                return []
            k0 = math.floor(t_start / tl.dwell) + 1
            out = []
            k = k0
            while k * tl.dwell < t_end - _EPS:
                out.append(k * tl.dwell)
                k += 1
            return out
        return [t for t, _ in tl.events if t_start + _EPS < t < t_end - _EPS]


@dataclass(frozen=True)
class GraphSnapshot:
    index: int
    adjacency: np.ndarray
    laplacian: np.ndarray
    leader_input: np.ndarray = field(repr=False)


def laplacian(adjacency: np.ndarray) -> np.ndarray:
    A = np.asarray(adjacency, dtype=float)
    return np.diag(A.sum(axis=1)) - A


def leader_operator(adjacency: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """diag(a_11 I_{n_1}, ..., a_1N I_{n_N}, a_21 I_{n_1}, ..., a_NN I_{n_N})."""
    A = np.asarray(adjacency, dtype=float)
    diag = np.concatenate([np.repeat(A[i], dims) for i in range(A.shape[0])])
    return np.diag(diag)


def snapshot(schedule: SwitchingSchedule, t: float, dims: Sequence[int]) -> GraphSnapshot:
    if t < 0:
        raise InputError(f"t must be nonnegative, got {t}")
    if len(dims) != schedule.num_nodes:
        raise InputError(f"{len(dims)} players but graphs have {schedule.num_nodes} nodes")
    p = schedule.index_at(t)
    A = schedule.graphs[p]
    return GraphSnapshot(p, A, laplacian(A), leader_operator(A, dims))


# --- joint strong connectivity ----------------------------------------------


def is_strongly_connected(adjacency: np.ndarray) -> bool:
    """Reachability from every node along edges j -> i (a_ij > 0)."""
    A = np.asarray(adjacency) > 0
    N = A.shape[0]
    succ = [np.flatnonzero(A[:, j]) for j in range(N)]
    for s in range(N):
        seen = np.zeros(N, dtype=bool)
        seen[s] = True
        frontier = [s]
        while frontier:
            nxt = []
            for j in frontier:
                for i in succ[j]:
                    if not seen[i]:
                        seen[i] = True
                        nxt.append(i)
            frontier = nxt
        if not seen.all():
            return False
    return True


@dataclass(frozen=True)
class JSCReport:
    connected: bool
    windows_checked: int
    failing_window: tuple | None = None
    note: str = (
        "every window starting at a switching instant is checked; this is "
        "stricter than requiring only some subsequence of windows"
    )

    def __bool__(self) -> bool:
        return self.connected


def _window_starts(schedule: SwitchingSchedule, horizon: float | None) -> list:
    tl = schedule.timeline
    if isinstance(tl, Periodic):
        # one period of starts covers every window by periodicity
        starts = [k * tl.dwell for k in range(len(tl.order))]
        if horizon is not None:
            starts = [t for t in starts if t < horizon] or [0.0]
        return starts
    starts = [t for t, _ in tl.events]
    if horizon is not None:
        starts = [t for t in starts if t < horizon]
    return starts


def union_graph(schedule: SwitchingSchedule, t0: float, t1: float) -> np.ndarray:
    """Edge-wise max of the adjacencies active somewhere in [t0, t1)."""
    U = schedule.graphs[schedule.index_at(t0)].copy()
    for t in schedule.switching_instants(t1, t0):
        U = np.maximum(U, schedule.graphs[schedule.index_at(t)])
    return U


def is_jointly_strongly_connected(schedule: SwitchingSchedule, horizon: float | None = None) -> JSCReport:
    """Check that every length-``window`` span starting at a switching instant
    has a strongly connected union graph.

    Periodic schedules only need one period of window starts.  Scripted
    schedules are checked from every event, including the open-ended final
    interval.
    """
    starts = _window_starts(schedule, horizon)
    for k, t0 in enumerate(starts):
        t1 = t0 + schedule.window
        if not is_strongly_connected(union_graph(schedule, t0, t1)):
            return JSCReport(False, k + 1, (t0, t1))
    return JSCReport(True, len(starts))
