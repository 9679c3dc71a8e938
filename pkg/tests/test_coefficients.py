"""Reduced coefficient process for non-overlapping packet superpositions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from pointerlab import (
    ComplexField,
    ConfigError,
    JumpUndefinedError,
    MomentumKernel,
    NormError,
    RngStream,
    SpatialGrid,
    TimeoutError,
    UnstableEquilibriumError,
    basin_map,
    coefficient_derivative,
    coefficient_state,
    gaussian_field,
    jump_rate,
    jump_redistribute,
    localization_rate_matrix,
    n2_analytics,
    normalize,
    sample_coefficient_ensemble,
    sample_coefficient_trajectory,
    saturated_positions,
    simplex_sample,
    total_jump_rate,
    total_rate,
)
from pointerlab.coefficients import TrajectoryOutcome


def n2_state(p1, gamma=1.0):
    return coefficient_state(
        [math.sqrt(p1), math.sqrt(1.0 - p1)], saturated_positions(2), gamma
    )


# ------------------------------------------------------------ state setup


def test_saturated_positions_saturate_the_rates():
    x = saturated_positions(4)
    f = localization_rate_matrix(x, gamma=0.7)
    off = f[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off - 0.7) < 1e-12)
    assert np.all(np.diagonal(f) == 0.0)
    with pytest.raises(ConfigError):
        saturated_positions(1)


def test_rate_matrix_reflects_overlap():
    f = localization_rate_matrix([0.0, 1.0], gamma=1.0)
    assert abs(f[0, 1] - (1.0 - math.exp(-0.5))) < 1e-12


def test_state_validation():
    x = saturated_positions(2)
    f = localization_rate_matrix(x)
    with pytest.raises(NormError):
        coefficient_state([0.9, 0.1], x)  # weights 0.82, not normalized
    with pytest.raises(ConfigError):
        coefficient_state([1.0], [0.0])
    from pointerlab.coefficients import CoefficientState

    c = np.sqrt([0.5, 0.5])
    with pytest.raises(ConfigError):
        CoefficientState(c, x, f + np.eye(2))  # diagonal must stay zero
    asym = f.copy()
    asym[0, 1] *= 0.5
    with pytest.raises(ConfigError):
        CoefficientState(c, x, asym)
    with pytest.raises(ConfigError):
        CoefficientState(c, x, 3.0 * f)  # entries above gamma


def test_outcome_validation():
    TrajectoryOutcome(1, 2, (0.3, 0.9), 5.0)
    with pytest.raises(ConfigError):
        TrajectoryOutcome(0, 0, (), 1.0)
    with pytest.raises(ConfigError):
        TrajectoryOutcome(1, 2, (0.3,), 1.0)


# ------------------------------------------------------------ determinism


def test_fixed_points_have_zero_derivative():
    for winner in (0, 1, 2):
        c = np.zeros(3, dtype=complex)
        c[winner] = 1.0
        state = coefficient_state(c, saturated_positions(3))
        assert np.max(np.abs(coefficient_derivative(state))) == 0.0


def test_equal_two_packet_derivative_vanishes():
    state = n2_state(0.5)
    assert np.max(np.abs(coefficient_derivative(state))) < 1e-15


def test_saturated_two_packet_derivative_exact():
    gamma = 1.3
    state = n2_state(0.8, gamma=gamma)
    dc = coefficient_derivative(state)
    # p (1 - p) mean rate 0.32: majority grows at +0.12 gamma, minority
    # shrinks at -0.48 gamma
    assert abs(dc[0] - 0.12 * gamma * state.c[0]) < 1e-12
    assert abs(dc[1] + 0.48 * gamma * state.c[1]) < 1e-12


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0.02, 1.0), min_size=2, max_size=5),
    st.lists(st.floats(0.0, 2 * math.pi), min_size=5, max_size=5),
)
def test_flow_preserves_norm_and_sorts_weights(raw, phases):
    w = np.asarray(raw) / np.sum(raw)
    c = np.sqrt(w) * np.exp(1j * np.array(phases[: len(raw)]))
    state = coefficient_state(c / np.linalg.norm(c), saturated_positions(len(raw)))
    dc = coefficient_derivative(state)
    # norm frozen
    assert abs(2.0 * np.sum(np.real(np.conj(state.c) * dc))) < 1e-12
    # saturated flow grows the largest weight and shrinks the smallest
    growth = 2.0 * np.real(np.conj(state.c) * dc)
    p = state.weights
    if p.max() - p.min() > 1e-9:
        assert growth[np.argmax(p)] > -1e-15
        assert growth[np.argmin(p)] < 1e-15


# ------------------------------------------------------------------ rates


def test_total_rate_closes_to_weighted_form():
    gamma = 0.9
    state = n2_state(0.8, gamma=gamma)
    assert abs(total_rate(state) - 2.0 * gamma * 0.8 * 0.2) < 1e-12


def test_total_rate_invariant_under_relabeling():
    x = saturated_positions(3)
    c = np.sqrt([0.5, 0.3, 0.2])
    forward = total_rate(coefficient_state(c, x))
    swapped = total_rate(coefficient_state(c[::-1], x))
    assert abs(forward - swapped) < 1e-15


def test_jump_rate_envelope():
    state = n2_state(0.5)
    assert jump_rate(state, 0.0) == 0.0  # chi(0) = 1
    q = 0.8
    chi = np.sum(state.weights * np.exp(1j * q * state.x))
    expected = math.exp(-0.5 * q * q) / math.sqrt(2 * math.pi) * (1 - abs(chi) ** 2)
    assert abs(jump_rate(state, q) - expected) < 1e-15


def test_reduced_rate_matches_full_grid_quadrature():
    # three packets of finite width on a grid vs the point-packet form
    grid = SpatialGrid(2048, 48.0)
    kernel = MomentumKernel(grid)
    amps = sum(
        gaussian_field(grid, center=c, width=0.2).amplitudes for c in (-8.0, 0.0, 8.0)
    )
    full = total_jump_rate(normalize(ComplexField(grid, amps)), kernel)
    reduced = total_rate(
        coefficient_state(np.sqrt([1 / 3, 1 / 3, 1 / 3]), [-8.0, 0.0, 8.0])
    )
    assert abs(full - reduced) / reduced < 0.02


# ----------------------------------------------------------- jump effect


def test_jump_interchanges_two_packet_weights():
    state = n2_state(0.8)
    for q in (0.7, -1.3, 2.1):
        out = jump_redistribute(state, q)
        assert abs(out.weights[0] - 0.2) < 1e-12
        assert abs(out.weights[1] - 0.8) < 1e-12


def test_jump_undefined_at_zero_momentum():
    with pytest.raises(JumpUndefinedError):
        jump_redistribute(n2_state(0.8), 0.0)


# -------------------------------------------------------------- analytics


def test_n2_analytics_exact_values():
    mu, p_odd = n2_analytics(0.3)
    assert abs(mu - (-0.5 * math.log(0.4))) < 1e-12
    assert abs(p_odd - 0.3) < 1e-12  # odd-jump probability is the minority weight
    mu_sym, p_sym = n2_analytics(0.7)
    assert abs(mu_sym - mu) < 1e-15
    assert abs(p_sym - p_odd) < 1e-15


def test_n2_analytics_rejects_edges():
    with pytest.raises(UnstableEquilibriumError):
        n2_analytics(0.5)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ConfigError):
            n2_analytics(bad)


# ------------------------------------------------------------ trajectories


def test_deterministic_flow_picks_largest_weight():
    state = coefficient_state(np.sqrt([0.5, 0.3, 0.2]), saturated_positions(3))
    outcome = sample_coefficient_trajectory(state, RngStream(1, 0), jumps=False)
    assert outcome.asymptotic_index == 1
    assert outcome.jump_count == 0


def test_equal_weights_never_resolve_without_jumps():
    with pytest.raises(TimeoutError):
        sample_coefficient_trajectory(n2_state(0.5), RngStream(1, 0), jumps=False)


def test_outcomes_depend_only_on_moduli():
    c_plain = np.sqrt([0.3, 0.7]).astype(complex)
    c_turned = c_plain * np.exp(1j * np.array([0.9, -2.3]))
    x = saturated_positions(2)
    first = sample_coefficient_trajectory(coefficient_state(c_plain, x), RngStream(77, 1))
    second = sample_coefficient_trajectory(coefficient_state(c_turned, x), RngStream(77, 1))
    assert first.asymptotic_index == second.asymptotic_index
    assert first.jump_times == second.jump_times


def test_ensemble_rows_reproduce_single_runs():
    state = n2_state(0.3)
    outcomes = sample_coefficient_ensemble(state, seed=2024, n_trajectories=8)
    lone = sample_coefficient_trajectory(state, RngStream(2024, 5))
    row = outcomes[5]
    assert (row.asymptotic_index, row.jump_count, row.jump_times) == (
        lone.asymptotic_index,
        lone.jump_count,
        lone.jump_times,
    )


def test_two_packet_statistics_match_analytics():
    n = 2000
    outcomes = sample_coefficient_ensemble(n2_state(0.3), seed=2024, n_trajectories=n)
    mu, p_odd = n2_analytics(0.3)
    odd = np.mean([o.jump_count % 2 for o in outcomes])
    assert abs(odd - p_odd) < 3.0 * math.sqrt(p_odd * (1 - p_odd) / n)
    mean_jumps = np.mean([o.jump_count for o in outcomes])
    assert abs(mean_jumps - mu) < 4.0 * math.sqrt(mu / n)  # jump count is Poisson(mu)


def test_velocity_argument_validated():
    with pytest.raises(ConfigError):
        sample_coefficient_trajectory(
            n2_state(0.3), RngStream(0, 0), velocities=[1.0, 2.0, 3.0]
        )


def test_ensemble_size_validated():
    with pytest.raises(ConfigError):
        sample_coefficient_ensemble(n2_state(0.3), seed=1, n_trajectories=0)


# ---------------------------------------------------------------- simplex


def test_simplex_two_components_uniform():
    draws = np.array(
        [simplex_sample(2, RngStream(55, i)).weights[0] for i in range(1000)]
    )
    assert kstest(draws, "uniform").pvalue > 0.01


def test_simplex_five_component_means():
    weights = np.stack(
        [simplex_sample(5, RngStream(56, i)).weights for i in range(1000)]
    )
    # Dirichlet(1,...,1): slot mean 1/5, slot variance 4/150
    band = 3.0 * math.sqrt(4.0 / 150.0 / 1000.0)
    assert np.all(np.abs(weights.mean(axis=0) - 0.2) < band)


def test_simplex_rejects_degenerate_sizes():
    with pytest.raises(ConfigError):
        simplex_sample(1, RngStream(0, 0))


# -------------------------------------------------------------- basin map


def test_basin_map_validates_inputs():
    with pytest.raises(ConfigError):
        basin_map(resolution=99)
    with pytest.raises(ConfigError):
        basin_map(positions=[0.0, 8.0])


def test_basin_cell_weights_cover_the_simplex():
    from pointerlab.coefficients import BasinMap

    grid = np.full((100, 100), -1, dtype=np.int64)
    bm = BasinMap(resolution=100, indices=grid, positions=saturated_positions(3), saturated=True)
    p1, p2, p3 = bm.cell_weights(10, 20)
    assert abs(p1 - 0.105) < 1e-12
    assert abs(p2 - 0.205) < 1e-12
    assert abs((p1 + p2 + p3) - 1.0) < 1e-12
