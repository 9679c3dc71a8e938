"""Reference solvers: dephasing closed forms, grid master equation, QMC.

The oracles are only trustworthy if they are checked against things even
simpler than themselves, so everything here is either a closed form (Bloch
dephasing, free dispersion, Ehrenfest motion in a harmonic well) or a
hand-computed pointwise factor.
"""

import math

import numpy as np
import pytest

from pointerlab import (
    BlochState,
    ComplexField,
    ConfigError,
    GridDensityMatrix,
    GridError,
    Hamiltonian,
    MomentumKernel,
    NormError,
    OracleError,
    RngStream,
    SpatialGrid,
    coherence_block_weights,
    compare_ensemble,
    dephasing_pointer_flow,
    dephasing_solution,
    evolve_master_equation,
    master_equation_step,
    normalize,
    pure_density_matrix,
    qmc_trajectory,
    trace_distance,
)
from pointerlab.analysis import density_width


def two_sided_state(grid, left_weight, separation=3.0, width=0.2):
    # packets this far apart at this width overlap below 1e-40, so the
    # block weights are exact
    y = grid.positions
    amps = math.sqrt(left_weight) * np.exp(-((y + separation) ** 2) / (4 * width**2))
    amps = amps + math.sqrt(1 - left_weight) * np.exp(
        -((y - separation) ** 2) / (4 * width**2)
    )
    return normalize(ComplexField(grid, amps * np.exp(0.3j * y)))


class TestBlochState:
    def test_length_and_purity(self):
        pure = BlochState(np.array([0.6, 0.0, 0.8]))
        assert pure.length == pytest.approx(1.0, abs=1e-15)
        assert pure.is_pure
        mixed = BlochState(np.array([0.3, 0.0, 0.0]))
        assert mixed.length == pytest.approx(0.3, abs=1e-15)
        assert not mixed.is_pure

    def test_shape_rejected(self):
        with pytest.raises(ConfigError):
            BlochState(np.zeros(2))
        with pytest.raises(ConfigError):
            BlochState(np.zeros((3, 1)))

    def test_non_finite_rejected(self):
        with pytest.raises(ConfigError):
            BlochState(np.array([np.nan, 0.0, 0.0]))

    def test_overlong_rejected(self):
        with pytest.raises(NormError):
            BlochState(np.array([0.8, 0.8, 0.8]))

    def test_components_frozen(self):
        state = BlochState(np.array([0.1, 0.2, 0.3]))
        with pytest.raises(ValueError):
            state.a[0] = 1.0


class TestDephasingClosedForms:
    def test_equatorial_decay(self):
        a0 = BlochState(np.array([0.6, -0.2, 0.5]))
        gamma = 0.8
        out = dephasing_solution(a0, gamma, 1.0 / (2.0 * gamma))
        assert out.a[0] == pytest.approx(0.6 * math.exp(-1.0), abs=1e-15)
        assert out.a[1] == pytest.approx(-0.2 * math.exp(-1.0), abs=1e-15)

    def test_z_component_kept(self):
        a0 = BlochState(np.array([0.3, 0.1, -0.7]))
        for t in (0.0, 0.5, 3.0, 50.0):
            assert dephasing_solution(a0, 1.3, t).a[2] == -0.7

    def test_identity_at_zero_time(self):
        a0 = BlochState(np.array([0.5, -0.5, 0.5]))
        assert np.array_equal(dephasing_solution(a0, 2.0, 0.0).a, a0.a)

    def test_negative_arguments_rejected(self):
        a0 = BlochState(np.zeros(3))
        with pytest.raises(ConfigError):
            dephasing_solution(a0, -0.1, 1.0)
        with pytest.raises(ConfigError):
            dephasing_solution(a0, 1.0, -1.0)


class TestPointerFlow:
    def test_equator_is_fixed(self):
        # roundoff in cos(pi/2) is amplified by the decaying numerator, so
        # the fixed point holds to ~1e-10 at long times rather than exactly
        for t in (0.0, 1.0, 10.0):
            drift = abs(dephasing_pointer_flow(math.pi / 2, 0.7, t) - math.pi / 2)
            assert drift < 1e-9

    def test_poles_are_fixed(self):
        assert dephasing_pointer_flow(0.0, 0.7, 5.0) == 0.0
        assert abs(dephasing_pointer_flow(math.pi, 0.7, 5.0) - math.pi) < 1e-12

    def test_tangent_relation(self):
        gamma = 0.9
        for theta0 in (0.3, math.pi / 4, 1.2, 3 * math.pi / 4, 2.8):
            for t in (0.2, 1.0, 4.0):
                theta = dephasing_pointer_flow(theta0, gamma, t)
                expected = math.tan(theta0) * math.exp(-2.0 * gamma * t)
                assert math.tan(theta) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_flow_runs_to_the_nearer_pole(self):
        ts = np.linspace(0.0, 10.0, 41)
        north = [dephasing_pointer_flow(math.pi / 4, 1.0, t) for t in ts]
        south = [dephasing_pointer_flow(3 * math.pi / 4, 1.0, t) for t in ts]
        assert all(b < a for a, b in zip(north, north[1:]))
        assert all(b > a for a, b in zip(south, south[1:]))
        assert north[-1] < 1e-8
        assert south[-1] > math.pi - 1e-8

    def test_domain_rejected(self):
        with pytest.raises(ConfigError):
            dephasing_pointer_flow(-0.1, 1.0, 1.0)
        with pytest.raises(ConfigError):
            dephasing_pointer_flow(math.pi + 0.1, 1.0, 1.0)
        with pytest.raises(ConfigError):
            dephasing_pointer_flow(1.0, -1.0, 1.0)


class TestHamiltonian:
    def test_kappa_validation(self):
        with pytest.raises(ConfigError):
            Hamiltonian(kappa=-0.1)
        with pytest.raises(ConfigError):
            Hamiltonian(kappa=math.nan)
        Hamiltonian(kappa=0.0)

    def test_potential_validation(self):
        with pytest.raises(ConfigError):
            Hamiltonian(kappa=1.0, potential=np.zeros((4, 4)))
        with pytest.raises(ConfigError):
            Hamiltonian(kappa=1.0, potential=np.array([0.0, math.inf]))

    def test_potential_shape_checked_against_grid(self):
        grid = SpatialGrid(64, 10.0)
        ham = Hamiltonian(kappa=1.0, potential=np.zeros(32))
        with pytest.raises(GridError):
            ham.validate_for_grid(grid, 1e-4)

    def test_coherent_step_bound(self):
        grid = SpatialGrid(64, 10.0)
        ham = Hamiltonian(kappa=1.0, potential=np.zeros(64))
        ham.validate_for_grid(grid, 1e-3)
        with pytest.raises(ConfigError):
            ham.validate_for_grid(grid, 2e-3)


@pytest.fixture(scope="module")
def master_setup():
    grid = SpatialGrid(64, 12.0)
    psi = two_sided_state(grid, 0.7)
    return grid, MomentumKernel(grid), pure_density_matrix(psi)


@pytest.fixture(scope="module")
def point_projectors():
    grid = SpatialGrid(64, 12.0)
    a = np.zeros(64)
    a[20] = 1.0
    b = np.zeros(64)
    b[40] = 1.0
    first = pure_density_matrix(normalize(ComplexField(grid, a)))
    second = pure_density_matrix(normalize(ComplexField(grid, b)))
    return grid, first, second


@pytest.fixture(scope="module")
def gauss_packet():
    grid = SpatialGrid(128, 20.0)
    y = grid.positions
    return grid, normalize(ComplexField(grid, np.exp(-(y**2) / 4)))


class TestMasterEquationStep:
    def test_projector_structure(self, master_setup):
        grid, _, rho = master_setup
        psi = two_sided_state(grid, 0.7)
        density = np.abs(psi.amplitudes) ** 2
        assert np.allclose(rho.position_density(), density, atol=1e-14)
        assert rho.trace == pytest.approx(1.0, abs=1e-12)
        assert rho.purity == pytest.approx(1.0, abs=1e-12)

    def test_unnormalized_field_rejected(self, master_setup):
        grid, _, _ = master_setup
        psi = two_sided_state(grid, 0.7)
        with pytest.raises(NormError):
            pure_density_matrix(ComplexField(grid, 0.5 * psi.amplitudes))

    def test_step_is_pointwise_decay(self, master_setup):
        # with no Hamiltonian the incoherent part has the exact solution
        # rho_ij e^{-F(s_ij) dt} at the minimal-image separation
        grid, kernel, rho = master_setup
        dt = 3.7
        stepped = master_equation_step(rho, kernel, dt)
        y = grid.positions
        d = y[:, None] - y[None, :]
        d = d - grid.length * np.round(d / grid.length)
        factor = np.exp(-(1.0 - np.exp(-0.5 * d**2)) * dt)
        assert np.max(np.abs(stepped.matrix - rho.matrix * factor)) < 1e-15

    def test_steps_compose(self, master_setup):
        grid, kernel, rho = master_setup
        once = master_equation_step(rho, kernel, 3.7)
        twice = master_equation_step(
            master_equation_step(rho, kernel, 1.3), kernel, 2.4
        )
        assert np.max(np.abs(once.matrix - twice.matrix)) < 1e-14

    def test_coherent_step_preserves_invariants(self, master_setup):
        grid, kernel, rho = master_setup
        ham = Hamiltonian(kappa=0.1, potential=None)
        stepped = master_equation_step(rho, kernel, 0.01, hamiltonian=ham)
        assert stepped.trace == pytest.approx(1.0, abs=1e-12)
        stepped.validate()

    def test_argument_validation(self, master_setup):
        grid, kernel, rho = master_setup
        with pytest.raises(ConfigError):
            master_equation_step(rho, kernel, 0.0)
        other = MomentumKernel(SpatialGrid(32, 12.0))
        with pytest.raises(GridError):
            master_equation_step(rho, other, 0.1)

    def test_audit_catches_corruption(self, master_setup):
        grid, _, rho = master_setup
        with pytest.raises(OracleError):
            GridDensityMatrix(grid, 2.0 * rho.matrix).validate()
        bumped = np.array(rho.matrix)
        bumped[0, 1] += 0.1
        with pytest.raises(OracleError):
            GridDensityMatrix(grid, bumped).validate()


class TestEvolveMasterEquation:
    def test_record_schedule(self, master_setup):
        _, kernel, rho = master_setup
        out = evolve_master_equation(rho, kernel, 5.0, 0.5, record_times=(0.0, 2.5))
        assert [t for t, _ in out] == [0.0, 2.5, 5.0]
        assert out[0][1] is rho

    def test_matches_single_exact_step(self, master_setup):
        _, kernel, rho = master_setup
        marched = evolve_master_equation(rho, kernel, 1.0, 0.02)[-1][1]
        direct = master_equation_step(rho, kernel, 1.0)
        assert np.max(np.abs(marched.matrix - direct.matrix)) < 1e-13

    def test_block_weights_survive_decoherence(self, master_setup):
        # the position density is untouched by the incoherent part, so the
        # branch weights of a superposition never move
        _, kernel, rho = master_setup
        left0, right0 = coherence_block_weights(rho)
        assert left0 == pytest.approx(0.7, abs=1e-12)
        assert right0 == pytest.approx(0.3, abs=1e-12)
        final = evolve_master_equation(rho, kernel, 5.0, 0.5)[-1][1]
        left, right = coherence_block_weights(final)
        assert left == pytest.approx(left0, abs=1e-12)
        assert right == pytest.approx(right0, abs=1e-12)

    def test_purity_decays_trace_kept(self, master_setup):
        _, kernel, rho = master_setup
        out = evolve_master_equation(rho, kernel, 5.0, 0.5, record_times=(1.0, 2.5))
        purities = [state.purity for _, state in out]
        assert all(b < a for a, b in zip(purities, purities[1:]))
        assert out[-1][1].trace == pytest.approx(1.0, abs=1e-12)

    def test_split_position_is_respected(self, master_setup):
        _, _, rho = master_setup
        left, right = coherence_block_weights(rho, split_at=-10.0)
        assert left == 0.0
        assert right == pytest.approx(1.0, abs=1e-12)

    def test_bad_schedules_rejected(self, master_setup):
        _, kernel, rho = master_setup
        with pytest.raises(ConfigError):
            evolve_master_equation(rho, kernel, -1.0, 0.5)
        with pytest.raises(ConfigError):
            evolve_master_equation(rho, kernel, 1.0, 0.5, record_times=(2.0,))


class TestTraceDistance:
    def test_identical_states(self, point_projectors):
        _, first, _ = point_projectors
        assert trace_distance(first, first) == 0.0

    def test_orthogonal_pure_states(self, point_projectors):
        _, first, second = point_projectors
        assert trace_distance(first, second) == pytest.approx(1.0, abs=1e-12)

    def test_pure_against_even_mixture(self, point_projectors):
        grid, first, second = point_projectors
        mix = GridDensityMatrix(grid, 0.5 * first.matrix + 0.5 * second.matrix)
        assert trace_distance(first, mix) == pytest.approx(0.5, abs=1e-12)

    def test_symmetry(self, point_projectors):
        _, first, second = point_projectors
        assert trace_distance(first, second) == trace_distance(second, first)

    def test_grid_mismatch_rejected(self, point_projectors):
        _, first, _ = point_projectors
        other = pure_density_matrix(
            normalize(ComplexField(SpatialGrid(32, 12.0), np.ones(32)))
        )
        with pytest.raises(GridError):
            trace_distance(first, other)


class TestQmcTrajectory:
    def test_jump_count_and_modulus(self, gauss_packet):
        # the loss term is proportional to the identity, so jumps fire at
        # exactly gamma and, with no Hamiltonian, phase kicks leave the
        # modulus alone
        grid, psi = gauss_packet
        traj = qmc_trajectory(psi, MomentumKernel(grid), 200.0, RngStream(11, 0))
        n = len(traj.events)
        assert abs(n - 200.0) < 4.0 * math.sqrt(200.0)
        dev = np.abs(np.abs(traj.final.amplitudes) - np.abs(psi.amplitudes))
        assert np.max(dev) < 1e-12
        assert all(e.total_rate_at_jump == 1.0 for e in traj.events)
        times = [e.time for e in traj.events]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert times[-1] < 200.0
        assert all(math.isfinite(e.q) for e in traj.events)

    def test_reproducible_from_stream(self, gauss_packet):
        grid, psi = gauss_packet
        kernel = MomentumKernel(grid)
        first = qmc_trajectory(psi, kernel, 20.0, RngStream(11, 0))
        second = qmc_trajectory(psi, kernel, 20.0, RngStream(11, 0))
        assert first.events == second.events
        assert np.array_equal(first.final.amplitudes, second.final.amplitudes)

    def test_gamma_zero_is_quiet(self, gauss_packet):
        grid, psi = gauss_packet
        traj = qmc_trajectory(psi, MomentumKernel(grid, gamma=0.0), 5.0, RngStream(11, 1))
        assert traj.events == ()
        assert np.max(np.abs(traj.final.amplitudes - psi.amplitudes)) < 1e-15

    def test_free_dispersion_is_exact(self):
        # one spectral propagator per segment: the analytic spread of a
        # Gaussian must come out to roundoff
        grid = SpatialGrid(256, 40.0)
        y = grid.positions
        psi = normalize(ComplexField(grid, np.exp(-(y**2) / 4)))
        traj = qmc_trajectory(
            psi,
            MomentumKernel(grid, gamma=0.0),
            5.0,
            RngStream(11, 2),
            hamiltonian=Hamiltonian(kappa=0.1, potential=None),
            record_times=(0.0, 2.5, 5.0),
        )
        assert [t for t, _ in traj.snapshots] == [0.0, 2.5, 5.0]
        assert traj.snapshots[0][1] is psi
        for t, field in traj.snapshots:
            expected = math.sqrt(1.0 + (0.1 * t) ** 2 / 4.0)
            assert density_width(field) == pytest.approx(expected, rel=1e-12)
        assert density_width(traj.final) == pytest.approx(
            math.sqrt(1.0 + 0.25 / 4.0), rel=1e-12
        )

    def test_harmonic_centroid_returns(self):
        # Ehrenfest: <y> follows the classical half oscillation exactly in
        # a harmonic well, omega = sqrt(kappa)
        grid = SpatialGrid(256, 40.0)
        y = grid.positions
        psi = normalize(ComplexField(grid, np.exp(-((y - 1.5) ** 2) / (4 * 0.5**2))))
        traj = qmc_trajectory(
            psi,
            MomentumKernel(grid, gamma=0.0),
            2.0 * math.pi,
            RngStream(11, 3),
            hamiltonian=Hamiltonian(kappa=0.25, potential=0.5 * y**2),
            coherent_dt=0.004,
        )
        centroid = np.sum(y * np.abs(traj.final.amplitudes) ** 2) * grid.spacing
        assert centroid == pytest.approx(-1.5, abs=1e-9)

    def test_snapshots_stay_normalized_with_jumps(self, gauss_packet):
        grid, psi = gauss_packet
        traj = qmc_trajectory(
            psi, MomentumKernel(grid), 4.0, RngStream(11, 5), record_times=(1.0, 3.0)
        )
        for _, field in traj.snapshots:
            assert field.norm_sq == pytest.approx(1.0, abs=1e-12)
        assert traj.final.norm_sq == pytest.approx(1.0, abs=1e-12)

    def test_argument_validation(self, gauss_packet):
        grid, psi = gauss_packet
        kernel = MomentumKernel(grid)
        with pytest.raises(ConfigError):
            qmc_trajectory(psi, kernel, -1.0, RngStream(1, 1))
        with pytest.raises(NormError):
            qmc_trajectory(ComplexField(grid, 0.5 * psi.amplitudes), kernel, 1.0, RngStream(1, 1))
        with pytest.raises(ConfigError):
            qmc_trajectory(psi, MomentumKernel(SpatialGrid(64, 20.0)), 1.0, RngStream(1, 1))
        with pytest.raises(ConfigError):
            qmc_trajectory(psi, kernel, 1.0, RngStream(1, 1), record_times=(2.0,))

    def test_potential_substep_bound_enforced(self):
        grid = SpatialGrid(256, 40.0)
        psi = normalize(ComplexField(grid, np.exp(-(grid.positions**2) / 4)))
        ham = Hamiltonian(kappa=0.25, potential=0.5 * grid.positions**2)
        with pytest.raises(ConfigError):
            qmc_trajectory(
                psi, MomentumKernel(grid, gamma=0.0), 1.0, RngStream(1, 1),
                hamiltonian=ham, coherent_dt=0.005,
            )


class TestEnsembleComparison:
    @pytest.fixture(scope="module")
    def orthogonal_pair(self):
        grid = SpatialGrid(64, 16.0)
        a = np.zeros(64)
        a[20] = 1.0
        b = np.zeros(64)
        b[40] = 1.0
        first = normalize(ComplexField(grid, a))
        second = normalize(ComplexField(grid, b))
        return grid, first, second

    def test_alternating_ensemble_hits_the_mixture(self, orthogonal_pair):
        grid, first, second = orthogonal_pair
        members = [first if i % 2 == 0 else second for i in range(40)]
        mix = GridDensityMatrix(
            grid,
            0.5 * pure_density_matrix(first).matrix
            + 0.5 * pure_density_matrix(second).matrix,
        )
        report = compare_ensemble(members, mix, 1.0, RngStream(5, 0))
        assert report.trace_distance < 1e-12
        assert report.mc_error > 0.01
        assert report.n_traj == 40
        record = report.as_record()
        assert record == {
            "t": 1.0,
            "trace_distance": report.trace_distance,
            "mc_error": report.mc_error,
            "n_traj": 40,
        }

    def test_identical_members_have_no_spread(self, orthogonal_pair):
        _, first, _ = orthogonal_pair
        report = compare_ensemble(
            [first] * 10, pure_density_matrix(first), 0.0, RngStream(5, 1)
        )
        assert report.trace_distance < 1e-12
        assert report.mc_error < 1e-12

    def test_small_or_mixed_ensembles_rejected(self, orthogonal_pair):
        grid, first, second = orthogonal_pair
        with pytest.raises(ConfigError):
            compare_ensemble([first], pure_density_matrix(first), 0.0, RngStream(5, 2))
        stranger = normalize(ComplexField(SpatialGrid(32, 16.0), np.ones(32)))
        with pytest.raises(GridError):
            compare_ensemble(
                [first, stranger], pure_density_matrix(first), 0.0, RngStream(5, 3)
            )

    def test_qmc_ensemble_lands_on_the_master_equation(self):
        # end to end: 60 unraveled trajectories of a two-packet state
        # average to the decohered matrix within sampling error, and sit
        # far from the initial pure state on the same yardstick
        grid = SpatialGrid(64, 16.0)
        y = grid.positions
        amps = np.exp(-((y + 2.5) ** 2) / (4 * 0.35**2))
        amps = amps + np.exp(-((y - 2.5) ** 2) / (4 * 0.35**2))
        psi = normalize(ComplexField(grid, amps))
        kernel = MomentumKernel(grid)
        rho0 = pure_density_matrix(psi)
        reference = evolve_master_equation(rho0, kernel, 1.0, 0.5)[-1][1]
        members = [
            qmc_trajectory(psi, kernel, 1.0, RngStream(314, 100 + i)).final
            for i in range(60)
        ]
        report = compare_ensemble(members, reference, 1.0, RngStream(314, 99))
        assert report.trace_distance < 3.0 * report.mc_error
        drifted = compare_ensemble(members, rho0, 1.0, RngStream(314, 98))
        assert drifted.trace_distance > 3.0 * drifted.mc_error
