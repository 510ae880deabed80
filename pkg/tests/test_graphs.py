import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import all_digraphs, edge, reachability_oracle
from nashseek.errors import InputError
from nashseek.graphs import (
    Periodic,
    Scripted,
    SwitchingSchedule,
    is_jointly_strongly_connected,
    is_strongly_connected,
    laplacian,
    leader_operator,
    snapshot,
    union_graph,
)


def test_complete_graph_laplacian_rows_sum_to_zero():
    A = np.ones((3, 3)) - np.eye(3)
    sched = SwitchingSchedule((A,), Periodic((0,), 1.0), 1.0)
    snap = snapshot(sched, 0.5, (1, 1, 1))
    assert np.allclose(snap.laplacian.sum(axis=1), 0.0)
    assert np.allclose(snap.laplacian, 3 * np.eye(3) - np.ones((3, 3)))


def test_single_edge_laplacian_convention():
    assert np.array_equal(laplacian(edge(2, 0, 1)), [[0.0, 0.0], [-1.0, 1.0]])


def test_leader_operator_block_layout():
    A = np.array([[0.0, 2.0], [3.0, 0.0]])
    assert np.array_equal(np.diag(leader_operator(A, (1, 2))), [0, 2, 2, 3, 0, 0])


def test_switch_boundary_belongs_to_new_interval():
    sched = SwitchingSchedule((edge(2, 0, 1), edge(2, 1, 0)), Periodic((0, 1), 1.0), 2.0)
    assert snapshot(sched, 0.999, (1, 1)).index == 0
    assert snapshot(sched, 1.0, (1, 1)).index == 1
    assert snapshot(sched, 2.0, (1, 1)).index == 0


def test_scripted_timeline_and_start():
    sched = SwitchingSchedule((edge(2, 0, 1), edge(2, 1, 0)), Scripted(((1.0, 0), (3.0, 1)), 1.0), 3.0)
    assert sched.index_at(2.9) == 0
    assert sched.index_at(3.0) == 1
    assert sched.index_at(100.0) == 1
    assert sched.switching_instants(10.0) == [1.0, 3.0]
    assert sched.switching_instants(10.0, 1.0) == [3.0]
    with pytest.raises(InputError):
        sched.index_at(0.5)


def test_scripted_dwell_violation_rejected():
    with pytest.raises(InputError):
        SwitchingSchedule((edge(2, 0, 1),), Scripted(((0.0, 0), (0.5, 0)), 1.0), 1.0)


@pytest.mark.parametrize("bad", [
    dict(graphs=(np.array([[0.0, -1.0], [0.0, 0.0]]),)),
    dict(graphs=(np.array([[1.0, 0.0], [0.0, 0.0]]),)),
    dict(graphs=(np.zeros((2, 2)),), timeline=Periodic((1,), 1.0)),
    dict(graphs=(np.zeros((2, 2)),), timeline=Periodic((0,), 0.0)),
    dict(graphs=(np.zeros((2, 2)), np.zeros((3, 3)))),
])
def test_invalid_schedules(bad):
    kw = dict(graphs=(np.zeros((2, 2)),), timeline=Periodic((0,), 1.0), window=1.0)
    kw.update(bad)
    with pytest.raises(InputError):
        SwitchingSchedule(**kw)


def test_snapshot_rejects_negative_time():
    sched = SwitchingSchedule((np.zeros((2, 2)),), Periodic((0,), 1.0), 1.0)
    with pytest.raises(InputError):
        snapshot(sched, -0.1, (1, 1))


def test_cyclic_single_edge_schedule_is_jsc():
    graphs = (edge(3, 0, 1), edge(3, 1, 2), edge(3, 2, 0))
    sched = SwitchingSchedule(graphs, Periodic((0, 1, 2), 1.0), 3.0)
    assert all(not is_strongly_connected(A) for A in graphs)
    rep = is_jointly_strongly_connected(sched)
    assert rep.connected and bool(rep)


def test_short_window_fails_with_named_window():
    graphs = (edge(3, 0, 1), edge(3, 1, 2), edge(3, 2, 0))
    rep = is_jointly_strongly_connected(SwitchingSchedule(graphs, Periodic((0, 1, 2), 1.0), 1.0))
    assert not rep.connected
    assert rep.failing_window == (0.0, 1.0)


@pytest.mark.parametrize("window", [1.0, 2.0, 5.0, 50.0])
def test_never_connected_node_fails_for_any_window(window):
    graphs = (edge(3, 0, 1), edge(3, 1, 0))
    assert not is_jointly_strongly_connected(SwitchingSchedule(graphs, Periodic((0, 1), 1.0), window))


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_strong_connectivity_matches_reachability_on_all_digraphs(N):
    for A in all_digraphs(N):
        assert is_strongly_connected(A) == reachability_oracle(A)


@pytest.mark.parametrize("N", [2, 3])
def test_jsc_matches_union_reachability_on_all_graph_pairs(N):
    graphs = list(all_digraphs(N))
    for A, B in itertools.product(graphs, repeat=2):
        sched = SwitchingSchedule((A, B), Periodic((0, 1), 1.0), 2.0)
        expected = reachability_oracle(np.maximum(A, B))
        assert bool(is_jointly_strongly_connected(sched)) == expected


def test_jsc_on_sampled_four_node_pairs():
    rng = np.random.default_rng(5)
    graphs = list(all_digraphs(4))
    for _ in range(2000):
        A, B = (graphs[k] for k in rng.integers(0, len(graphs), size=2))
        sched = SwitchingSchedule((A, B), Periodic((0, 1), 1.0), 2.0)
        assert bool(is_jointly_strongly_connected(sched)) == reachability_oracle(np.maximum(A, B))


def test_union_graph_takes_edgewise_max():
    sched = SwitchingSchedule((edge(2, 0, 1, 2.0), edge(2, 1, 0, 3.0)), Periodic((0, 1), 1.0), 2.0)
    assert np.array_equal(union_graph(sched, 0.0, 2.0), [[0.0, 3.0], [2.0, 0.0]])
    assert np.array_equal(union_graph(sched, 0.0, 1.0), [[0.0, 0.0], [2.0, 0.0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_laplacian_rows_sum_to_zero(N, seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, scale, size=(N, N)) * (rng.random((N, N)) < 0.5)
    np.fill_diagonal(A, 0.0)
    L = laplacian(A)
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-12 * scale * N)
    assert np.all(np.diag(L) >= 0)
