import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nashseek.errors import ConstructionError, InputError
from nashseek.plant import (
    BoundedRational,
    CustomRegressor,
    DisturbanceSpec,
    Exosystem,
    NoDisturbance,
    PiecewiseConstantRandom,
    PlantSpec,
    SinOfState,
    Sinusoid,
    SquareWave,
    ZeroRegressor,
    build_realization,
    fictitious_output,
    plant_derivative,
    regressor_bound_violation,
    sample_disturbance,
)


def test_first_order_realization():
    R = build_realization(1, 1)
    assert R.coeffs == ()
    assert R.K_s.size == 0
    assert np.array_equal(R.A, [[0.0]])
    assert np.array_equal(R.B, [[1.0]])
    assert np.array_equal(R.C, [[1.0]])
    assert fictitious_output(R, [4.0]) == pytest.approx([4.0])


def test_second_order_realization_single_pole():
    R = build_realization(2, 1, [-1.0])
    assert R.coeffs == (1.0,)
    assert np.array_equal(R.A_K, [[-1.0]])
    assert fictitious_output(R, [3.0, -1.0]) == pytest.approx([2.0])


def test_third_order_realization_double_pole():
    R = build_realization(3, 1, [-1.0, -1.0])
    assert R.coeffs == pytest.approx((1.0, 2.0))
    assert np.allclose(R.A_K, [[0.0, 1.0], [-1.0, -2.0]])
    assert np.allclose(np.linalg.eigvals(R.A_K), [-1.0, -1.0], atol=1e-6)
    assert fictitious_output(R, [1.0, 1.0, 1.0]) == pytest.approx([4.0])


def test_poles_rescaled_to_unit_constant_coefficient():
    R = build_realization(3, 1, [-2.0, -3.0])
    assert R.coeffs[0] == 1.0
    # s^2 + 5 s + 6 scaled by 1/sqrt(6): roots -2/sqrt(6), -3/sqrt(6)
    assert R.coeffs[1] == pytest.approx(5 / math.sqrt(6))


def test_complex_pole_pair_accepted():
    R = build_realization(3, 1, [complex(-1, 1), complex(-1, -1)])
    assert R.coeffs[0] == pytest.approx(1.0)
    assert np.all(np.linalg.eigvals(R.A_K).real < 0)


@pytest.mark.parametrize("poles", [[0.0], [1.0], [-1.0, 0.5]])
def test_non_hurwitz_poles_rejected(poles):
    with pytest.raises(ConstructionError):
        build_realization(len(poles) + 1, 1, poles)


def test_wrong_pole_count_and_unpaired_complex_pole_rejected():
    with pytest.raises(ConstructionError):
        build_realization(3, 1, [-1.0])
    with pytest.raises(ConstructionError):
        build_realization(3, 1, [complex(-1, 1), complex(-2, 0)])


def test_vector_valued_realization_block_structure():
    R = build_realization(2, 2)
    assert R.state_size == 4
    assert np.array_equal(R.output_map, [[1, 0, 1, 0], [0, 1, 0, 1]])
    assert np.array_equal(R.B, [[0, 0], [0, 0], [1, 0], [0, 1]])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.lists(st.floats(0.2, 5.0), min_size=4, max_size=4))
def test_tail_dynamics_are_hurwitz(order, dim, mags):
    poles = [-m for m in mags[:order - 1]]
    R = build_realization(order, dim, poles)
    assert R.coeffs[0] == pytest.approx(1.0)
    assert np.all(np.linalg.eigvals(R.A_K).real < 0)


def test_chain_of_integrators_derivative():
    spec = PlantSpec(2, 1)
    out = plant_derivative(spec, spec.realization(), [0.0, 5.0], [0.0], 0.0)
    assert np.array_equal(out, [5.0, 0.0])


def test_sin_regressor_derivative():
    spec = PlantSpec(1, 1, SinOfState(1.0), [2.0])
    out = plant_derivative(spec, spec.realization(), [math.pi / 2], [0.0], 0.0)
    assert out == pytest.approx([-2.0])


def test_plant_derivative_includes_disturbance_and_checks_shape():
    spec = PlantSpec(1, 1, disturbance=DisturbanceSpec(SquareWave(0.5, 2.0)))
    R = spec.realization()
    assert plant_derivative(spec, R, [0.0], [1.0], 0.25) == pytest.approx([1.5])
    assert plant_derivative(spec, R, [0.0], [1.0], 1.25) == pytest.approx([0.5])
    with pytest.raises(InputError):
        plant_derivative(spec, R, [0.0, 1.0], [1.0], 0.0)


def test_theta_length_checked():
    with pytest.raises(InputError):
        PlantSpec(2, 1, SinOfState(), [1.0])
    assert PlantSpec(2, 1, SinOfState()).num_params == 2
    assert PlantSpec(1, 1).num_params == 1


def test_regressor_shapes():
    xi = np.arange(6.0)
    assert SinOfState()(xi, 0.0, 2).shape == (2, 6)
    assert BoundedRational()(xi, 0.0, 3).shape == (3, 6)
    assert ZeroRegressor(3)(xi, 0.0, 2).shape == (2, 3)
    reg = CustomRegressor(lambda x, t: [[x[0], t]], lambda x: abs(x[0]) + 1, 2)
    assert np.array_equal(reg(np.array([2.0]), 3.0, 1), [[2.0, 3.0]])
    assert reg.bound(np.array([2.0]), 1) == 3.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_builtin_regressors_respect_declared_bound(order, dim, seed):
    xi = np.random.default_rng(seed).normal(scale=5.0, size=order * dim)
    for reg in (SinOfState(1.7), BoundedRational(2.0)):
        assert np.linalg.norm(reg(xi, 0.0, dim), 2) <= reg.bound(xi, dim) + 1e-12


def test_no_disturbance_is_zero():
    assert np.array_equal(sample_disturbance(DisturbanceSpec(), 1.0, 3), np.zeros(3))
    assert DisturbanceSpec().is_zero


def test_sinusoid_bounded():
    spec = DisturbanceSpec(Sinusoid(1.0, 1.0, 0.0))
    assert abs(sample_disturbance(spec, 0.25)[0]) <= 1.0
    assert sample_disturbance(spec, 0.25)[0] == pytest.approx(1.0)


def test_square_wave_uses_anchor_piece():
    sq = DisturbanceSpec(SquareWave(2.0, 4.0))
    assert sample_disturbance(sq, 1.0)[0] == 2.0
    assert sample_disturbance(sq, 3.0)[0] == -2.0
    # at the jump the anchor selects the piece
    assert sample_disturbance(sq, 2.0, anchor=1.999)[0] == 2.0
    assert sq.kind.discontinuities(0.0, 5.0) == [2.0, 4.0]


def test_random_piecewise_constant_is_reproducible_and_bounded():
    kind = PiecewiseConstantRandom(1.5, 0.5, seed=9)
    spec = DisturbanceSpec(kind)
    a = [sample_disturbance(spec, t, 2) for t in np.linspace(0, 5, 40)]
    b = [sample_disturbance(DisturbanceSpec(PiecewiseConstantRandom(1.5, 0.5, seed=9)), t, 2)
         for t in np.linspace(0, 5, 40)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert all(np.linalg.norm(v) <= 1.5 for v in a)
    assert np.array_equal(sample_disturbance(spec, 0.1, 2), sample_disturbance(spec, 0.4, 2))
    other = DisturbanceSpec(PiecewiseConstantRandom(1.5, 0.5, seed=10))
    assert not np.array_equal(sample_disturbance(spec, 0.1, 2), sample_disturbance(other, 0.1, 2))


def test_exosystem_needs_declared_bound():
    kind = Exosystem(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[1.0, 0.0]]), np.array([0.0, 1.0]))
    with pytest.raises(InputError):
        DisturbanceSpec(kind)
    spec = DisturbanceSpec(kind, declared_bound=1.0)
    assert sample_disturbance(spec, math.pi / 2)[0] == pytest.approx(1.0)


def test_amplitude_above_declared_bound_rejected():
    with pytest.raises(InputError):
        DisturbanceSpec(Sinusoid(2.0, 1.0), declared_bound=1.0)
    assert DisturbanceSpec(Sinusoid(-2.0, 1.0)).declared_bound == 2.0
    assert DisturbanceSpec(NoDisturbance()).declared_bound == 0.0


def test_disturbance_rejects_negative_time():
    with pytest.raises(InputError):
        sample_disturbance(DisturbanceSpec(), -1.0)


def test_custom_regressor_bound_spot_check():
    honest = CustomRegressor(lambda x, t: [[np.sin(x[0]), np.cos(t)]], lambda x: math.sqrt(2.0), 2)
    liar = CustomRegressor(lambda x, t: [[x[0], 0.0]], lambda x: 1.0, 2)
    assert regressor_bound_violation(honest, 1, 1, horizon=10.0) is None
    xi, t, norm, bound = regressor_bound_violation(liar, 1, 1)
    assert norm > bound == 1.0
