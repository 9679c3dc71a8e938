"""Independent ground-truth solvers used to cross-check the main dynamics.

Three layers, in increasing cost: the closed-form two-level dephasing
model, direct grid integration of the dissipative master equation, and a
quantum Monte Carlo unraveling whose jumps fire at the state-independent
rate gamma. None of them share code with the nonlinear flow or the
orthogonal-jump sampler, which is the point: ensembles from the samplers
are compared against these solvers, not against themselves.

The master-equation step treats the incoherent part exactly (pointwise
decay factor on the coherences), so with H = 0 the integration error is
zero to roundoff regardless of dt. The QMC trajectory is piecewise exact
for free evolution: coherent segments are advanced by a single spectral
propagator per segment, jumps are pure phase kicks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridError, NormError, OracleError
from .grids import (
    ComplexField,
    GridDensityMatrix,
    RngStream,
    SpatialGrid,
    normalize,
)
from .kernels import MomentumKernel
from .unraveling import JumpEvent, UnravelingTrajectory

STABILITY_LIMIT = 0.5  # max kappa * q_max^2 * dt for the split coherent step


@dataclass(frozen=True)
class BlochState:
    """Bloch vector of the two-level dephasing model; |a| <= 1, pure iff = 1."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64).copy()
        if a.shape != (3,):
            raise ConfigError(f"Bloch vector must have 3 components, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ConfigError("Bloch vector must be finite")
        if np.linalg.norm(a) > 1.0 + 1e-12:
            raise NormError(f"Bloch vector length {np.linalg.norm(a)!r} exceeds 1")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.a))

    @property
    def is_pure(self) -> bool:
        return abs(self.length - 1.0) <= 1e-12


def dephasing_solution(a0: BlochState, gamma: float, t: float) -> BlochState:
    """Closed form: equatorial components damp as e^{-2 gamma t}, a_z is kept."""
    if gamma < 0.0 or t < 0.0:
        raise ConfigError("gamma and t must be non-negative")
    decay = math.exp(-2.0 * gamma * t)
    ax, ay, az = a0.a
    return BlochState(np.array([decay * ax, decay * ay, az]))


def dephasing_pointer_flow(theta0: float, gamma: float, t: float) -> float:
    """Polar angle under the nonlinear flow theta' = -gamma sin(2 theta).

    Separation of variables gives tan(theta(t)) = tan(theta0) e^{-2 gamma t};
    the equator theta0 = pi/2 is the unstable fixed point, the poles are
    the attractors. r and the azimuth never move.
    """
    if not (0.0 <= theta0 <= math.pi):
        raise ConfigError(f"theta0 must lie in [0, pi], got {theta0!r}")
    if gamma < 0.0 or t < 0.0:
        raise ConfigError("gamma and t must be non-negative")
    return math.atan2(math.sin(theta0) * math.exp(-2.0 * gamma * t), math.cos(theta0))


@dataclass(frozen=True)
class Hamiltonian:
    """Coherent part of the dynamics: kinetic scale kappa plus an optional
    potential sampled on the grid."""

    kappa: float
    potential: np.ndarray | None = None

    def __post_init__(self):
        if not (self.kappa >= 0.0) or not math.isfinite(self.kappa):
            raise ConfigError(f"kappa must be non-negative, got {self.kappa!r}")
        if self.potential is not None:
            pot = np.asarray(self.potential, dtype=np.float64).copy()
            if pot.ndim != 1 or not np.all(np.isfinite(pot)):
                raise ConfigError("potential must be a finite 1-D sample array")
            pot.flags.writeable = False
            object.__setattr__(self, "potential", pot)

    def validate_for_grid(self, grid: SpatialGrid, dt: float) -> None:
        if self.potential is not None and self.potential.shape != (grid.n_points,):
            raise GridError(
                f"potential has {self.potential.shape[0]} samples for a "
                f"{grid.n_points}-point grid"
            )
        if self.kappa * grid.q_max**2 * dt > STABILITY_LIMIT:
            raise ConfigError(
                f"dt = {dt!r} exceeds the coherent-step bound "
                f"{STABILITY_LIMIT / (self.kappa * grid.q_max**2):.3e}"
            )


def pure_density_matrix(field: ComplexField) -> GridDensityMatrix:
    """Projector |psi><psi| of a normalized field, as a grid density matrix."""
    if abs(field.norm_sq - 1.0) > 1e-9:
        raise NormError(f"field norm^2 = {field.norm_sq!r} is not 1")
    return GridDensityMatrix(field.grid, np.outer(field.amplitudes, field.amplitudes.conj()))


def _minimal_image(grid: SpatialGrid) -> np.ndarray:
    x = grid.positions
    d = x[:, None] - x[None, :]
    return d - grid.length * np.round(d / grid.length)


def _incoherent_factor(grid: SpatialGrid, kernel: MomentumKernel, dt: float) -> np.ndarray:
    return np.exp(-kernel.localization_rate(_minimal_image(grid)) * dt)


def _coherent_phases(grid, hamiltonian, half_dt):
    kin = pot = None
    if hamiltonian is not None:
        if hamiltonian.kappa > 0.0:
            kin = np.exp(-0.5j * hamiltonian.kappa * grid.wavenumbers**2 * half_dt)
        if hamiltonian.potential is not None:
            pot = np.exp(-1j * hamiltonian.potential * half_dt)
    return kin, pot


def _apply_coherent(rho: np.ndarray, kin, pot) -> np.ndarray:
    # U rho U+ with U diagonal in momentum (kin) and position (pot)
    if pot is not None:
        rho = (pot[:, None] * rho) * pot.conj()[None, :]
    if kin is not None:
        rho = np.fft.ifft(np.fft.fft(rho, axis=0) * kin[:, None], axis=0)
        rho = np.fft.ifft(np.fft.fft(rho, axis=1) * kin.conj()[None, :], axis=1)
    return rho


def master_equation_step(
    rho: GridDensityMatrix,
    kernel: MomentumKernel,
    dt: float,
    hamiltonian: Hamiltonian | None = None,
    validate: bool = True,
) -> GridDensityMatrix:
    """Advance the density matrix by one symmetric split step of length dt.

    Coherent halves sandwich the incoherent part, whose exact solution is
    the pointwise factor e^{-F(x - x') dt} on the coherences (minimal-image
    distance on the periodic grid). With no Hamiltonian the step is exact
    for any dt. validate=True re-checks positivity on the result and
    raises OracleError beyond tolerance.
    """
    grid = rho.grid
    if kernel.grid != grid:
        raise GridError("kernel grid does not match the density-matrix grid")
    if not (dt > 0.0):
        raise ConfigError(f"dt must be positive, got {dt!r}")
    if hamiltonian is not None:
        hamiltonian.validate_for_grid(grid, dt)
    kin, pot = _coherent_phases(grid, hamiltonian, 0.5 * dt)
    out = _apply_coherent(rho.matrix, kin, pot)
    out = out * _incoherent_factor(grid, kernel, dt)
    out = _apply_coherent(out, kin, pot)
    result = GridDensityMatrix(grid, out)
    if validate:
        result.validate(hermiticity_tol=1e-10, trace_tol=1e-9, negativity_tol=1e-10)
    return result


def evolve_master_equation(
    rho: GridDensityMatrix,
    kernel: MomentumKernel,
    t_max: float,
    dt: float,
    hamiltonian: Hamiltonian | None = None,
    record_times: tuple[float, ...] = (),
    check_every: int = 100,
) -> list[tuple[float, GridDensityMatrix]]:
    """March the oracle to t_max, returning (time, state) at the requested
    instants plus the final time.

    Positivity is audited every check_every steps and on every recorded
    snapshot rather than per step.
    """
    if not (t_max > 0.0):
        raise ConfigError(f"t_max must be positive, got {t_max!r}")
    stops = sorted(set(float(s) for s in record_times) | {t_max})
    if stops[0] < 0.0 or stops[-1] > t_max:
        raise ConfigError("record_times must lie in [0, t_max]")
    out = []
    if stops[0] == 0.0:
        rho.validate()
        out.append((0.0, rho))
        stops = stops[1:]
    t = 0.0
    steps_done = 0
    for stop in stops:
        while stop - t > 1e-12:
            step_dt = min(dt, stop - t)
            rho = master_equation_step(
                rho, kernel, step_dt, hamiltonian, validate=(steps_done % check_every == 0)
            )
            t += step_dt
            steps_done += 1
        rho.validate()
        out.append((stop, rho))
        t = stop
    return out


def coherence_block_weights(rho: GridDensityMatrix, split_at: float = 0.0) -> tuple[float, float]:
    """Probability carried by the grid regions left and right of split_at."""
    x = rho.grid.positions
    density = rho.position_density()
    left = float(np.sum(density[x < split_at]) * rho.grid.spacing)
    right = float(np.sum(density[x >= split_at]) * rho.grid.spacing)
    return left, right


def _free_propagate(psi: np.ndarray, grid, hamiltonian, duration, coherent_dt):
    """Coherent segment of arbitrary duration; exact when there is no potential."""
    if hamiltonian is None or duration == 0.0:
        return psi
    if hamiltonian.potential is None:
        if hamiltonian.kappa == 0.0:
            return psi
        phase = np.exp(-0.5j * hamiltonian.kappa * grid.wavenumbers**2 * duration)
        return np.fft.ifft(np.fft.fft(psi) * phase)
    n_sub = max(1, int(math.ceil(duration / coherent_dt)))
    sub = duration / n_sub
    kin = np.exp(-0.25j * hamiltonian.kappa * grid.wavenumbers**2 * sub)
    pot = np.exp(-1j * hamiltonian.potential * sub)
    for _ in range(n_sub):
        psi = np.fft.ifft(np.fft.fft(psi) * kin)
        psi = psi * pot
        psi = np.fft.ifft(np.fft.fft(psi) * kin)
    return psi


def qmc_trajectory(
    initial: ComplexField,
    kernel: MomentumKernel,
    t_max: float,
    rng: RngStream,
    hamiltonian: Hamiltonian | None = None,
    record_times: tuple[float, ...] = (),
    coherent_dt: float = 0.01,
) -> UnravelingTrajectory:
    """Quantum Monte Carlo unraveling with phase-kick jumps.

    The loss term of the effective Hamiltonian is proportional to the
    identity here, so the normalized state evolves coherently between
    jumps and the jump rate is exactly gamma, independent of the state.
    Waiting times are drawn directly from Exp(gamma); each jump multiplies
    by e^{iqy} with q drawn from the momentum kernel. No thinning, no
    hazard stepping; free segments use one spectral propagator each.
    """
    grid = initial.grid
    if kernel.grid != grid:
        raise ConfigError("kernel grid does not match the field grid")
    if not (t_max > 0.0):
        raise ConfigError(f"t_max must be positive, got {t_max!r}")
    if abs(initial.norm_sq - 1.0) > 1e-9:
        raise NormError(f"initial norm^2 = {initial.norm_sq!r} is not 1")
    if hamiltonian is not None and hamiltonian.potential is not None:
        # free segments are exact for any duration; only the potential
        # substepping carries a step bound
        hamiltonian.validate_for_grid(grid, coherent_dt)
    stops = sorted(set(float(s) for s in record_times))
    if stops and not (0.0 <= stops[0] and stops[-1] <= t_max):
        raise ConfigError("record_times must lie in [0, t_max]")

    gen = rng.generator()
    gamma = kernel.gamma
    psi = initial.amplitudes.copy()
    y = grid.positions
    events = []
    snapshots = []
    if stops and stops[0] == 0.0:
        snapshots.append((0.0, initial))
        stops = stops[1:]
    t = 0.0
    next_jump = t + (gen.exponential(1.0 / gamma) if gamma > 0.0 else math.inf)
    while t < t_max - 1e-15:
        t_next = min(next_jump, t_max, stops[0] if stops else math.inf)
        psi = _free_propagate(psi, grid, hamiltonian, t_next - t, coherent_dt)
        t = t_next
        if stops and t == stops[0]:
            snapshots.append((t, normalize(ComplexField(grid, psi))))
            stops = stops[1:]
        if t == next_jump and t < t_max:
            q = gen.normal(0.0, kernel.sigma_G)
            psi = psi * np.exp(1j * q * y)
            events.append(JumpEvent(time=t, q=float(q), total_rate_at_jump=gamma))
            next_jump = t + gen.exponential(1.0 / gamma)
    return UnravelingTrajectory(
        initial=initial,
        final=normalize(ComplexField(grid, psi)),
        events=tuple(events),
        stream=rng,
        snapshots=tuple(snapshots),
    )


def trace_distance(a: GridDensityMatrix, b: GridDensityMatrix) -> float:
    """Half the trace norm of the difference, with the grid measure."""
    if a.grid != b.grid:
        raise GridError("density matrices live on different grids")
    eigs = np.linalg.eigvalsh(a.matrix - b.matrix)
    return 0.5 * float(np.sum(np.abs(eigs))) * a.grid.spacing


@dataclass(frozen=True)
class EnsembleComparison:
    """Trace distance of an ensemble average to a reference, with its
    bootstrap Monte Carlo error; serializes to the comparison record."""

    t: float
    trace_distance: float
    mc_error: float
    n_traj: int

    def as_record(self) -> dict:
        return {
            "t": self.t,
            "trace_distance": self.trace_distance,
            "mc_error": self.mc_error,
            "n_traj": self.n_traj,
        }


def compare_ensemble(
    fields,
    reference: GridDensityMatrix,
    t: float,
    rng: RngStream,
    n_bootstrap: int = 200,
) -> EnsembleComparison:
    """Trace distance of the ensemble-average projector to the reference.

    mc_error is the rms trace distance of multinomial bootstrap resamples
    to the ensemble mean, which estimates the sampling-noise scale of the
    mean itself. The distance to the reference is a positively biased
    statistic of that same scale, so an unbiased sampler lands at a ratio
    near 1; a plain std of resample distances would measure only the
    fluctuation on top of the bias and no finite ensemble could ever sit
    below it.
    """
    fields = list(fields)
    m = len(fields)
    if m < 2:
        raise ConfigError("need at least 2 ensemble members")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError("ensemble fields live on different grids")
    stack = np.stack([f.amplitudes for f in fields])
    mean = GridDensityMatrix(grid, stack.T @ stack.conj() / m)
    distance = trace_distance(mean, reference)
    gen = rng.generator()
    draws = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        counts = gen.multinomial(m, np.full(m, 1.0 / m)).astype(np.float64)
        resampled = GridDensityMatrix(grid, stack.T @ (counts[:, None] * stack.conj()) / m)
        draws[b] = trace_distance(resampled, mean)
    return EnsembleComparison(
        t=t,
        trace_distance=distance,
        mc_error=float(math.sqrt(np.mean(draws**2))),
        n_traj=m,
    )
