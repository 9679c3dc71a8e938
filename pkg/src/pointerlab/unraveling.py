"""Piecewise-deterministic unraveling with orthogonal jumps.

Between jumps the state follows the deterministic nonlinear flow; jumps
send it to an exactly orthogonal state and occur at the state-dependent
total rate gamma (1 - <Ghat-smeared self-overlap>). Waiting times come
from the accumulated hazard of that rate along the flow; the momentum
transfer q of an accepted jump is drawn by rejection against the G(q)
envelope, which is exact (no burn-in, no step bias in q).

The ensemble engine advances many trajectories in lockstep on a shared
global step grid. Rows that cross their hazard threshold inside a step
are replayed individually through the same scalar helper the
single-trajectory sampler uses, with partial sub-steps at the jump times,
so a given (seed, trajectory index) yields the same path bit for bit in
both engines and for any ensemble size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .dynamics import EvolutionConfig
from .errors import (
    ConfigError,
    DivergenceError,
    GridError,
    JumpUndefinedError,
    NormError,
)
from .grids import ComplexField, GridDensityMatrix, RngStream, SpatialGrid, normalize
from .kernels import MomentumKernel

# Rate quadrature: 513 points across +-6 sigma_G leaves < 2e-9 Gaussian
# mass outside the window.
Q_SPAN = 6.0
Q_POINTS = 513

# 1 - |<e^{iqy}>|^2 below this means the jump operator annihilates the
# state to working precision.
JUMP_DEFECT_FLOOR = 1e-12

_FINITE_CHECK_EVERY = 256


def momentum_characteristic(field: ComplexField, q) -> np.ndarray:
    """<exp(iqy)> of the field's density for scalar or array q."""
    rho = field.density()
    rho /= np.sum(rho)
    y = field.grid.positions
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    out = np.empty(q.shape, dtype=np.complex128)
    # block the outer product so huge q grids stay cache-friendly
    step = max(1, 2_000_000 // max(y.size, 1))
    for i in range(0, q.size, step):
        block = q[i : i + step]
        out[i : i + step] = np.exp(1j * np.outer(block, y)) @ rho
    return out


def total_jump_rate(field: ComplexField, kernel: MomentumKernel) -> float:
    """gamma (1 - integral G(q) |<e^{iqy}>|^2 dq) by trapezoid quadrature.

    This is the contract route (explicit q-grid over +-6 sigma_G). The
    samplers use the algebraically equal smeared-self-overlap form, and
    the two are cross-checked against each other in the test suite.
    """
    if abs(field.norm_sq - 1.0) > 1e-9:
        raise NormError(f"field norm^2 = {field.norm_sq!r} is not 1")
    q = np.linspace(-Q_SPAN * kernel.sigma_G, Q_SPAN * kernel.sigma_G, Q_POINTS)
    chi_sq = np.abs(momentum_characteristic(field, q)) ** 2
    weights = np.full(Q_POINTS, q[1] - q[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    overlap = float(np.sum(weights * kernel.momentum_density(q) * chi_sq))
    return max(kernel.gamma * (1.0 - overlap), 0.0)


def overlap_jump_rate(field: ComplexField, kernel: MomentumKernel) -> float:
    """Fast-route total rate gamma (1 - density_overlap); used in hot loops."""
    return max(kernel.gamma * (1.0 - kernel.density_overlap(field.density())), 0.0)


def apply_jump(field: ComplexField, q: float) -> ComplexField:
    """Normalized (e^{iqy} - <e^{iqy}>) field, orthogonal to the input.

    The expectation uses the same grid quadrature as the inner product, so
    orthogonality is exact to roundoff. Raises JumpUndefinedError for
    pointer-like states where the jump operator annihilates the state.
    """
    psi = _jump_array(field.grid, field.amplitudes, float(q))
    return ComplexField(field.grid, psi)


def _jump_array(grid: SpatialGrid, psi: np.ndarray, q: float) -> np.ndarray:
    phase = np.exp(1j * q * grid.positions)
    rho = np.abs(psi) ** 2
    norm = np.sum(rho)
    chi = np.sum(rho * phase) / norm
    defect = 1.0 - abs(chi) ** 2
    if defect <= JUMP_DEFECT_FLOOR:
        raise JumpUndefinedError(
            f"jump undefined: 1 - |<e^(iqy)>|^2 = {defect:.3e} at q = {q!r}"
        )
    out = (phase - chi) * psi
    return out / math.sqrt(np.sum(np.abs(out) ** 2) * grid.spacing)


@dataclass(frozen=True)
class JumpEvent:
    """One realized jump: when, which momentum kick, at what total rate."""

    time: float
    q: float
    total_rate_at_jump: float

    def __post_init__(self):
        if self.time < 0.0 or not math.isfinite(self.time):
            raise ConfigError(f"jump time must be >= 0, got {self.time!r}")
        if not (self.total_rate_at_jump > 0.0):
            raise ConfigError(
                f"rate at a realized jump must be positive, got "
                f"{self.total_rate_at_jump!r}"
            )


@dataclass(frozen=True)
class UnravelingTrajectory:
    """One sampled path: initial and final states, jump log, stream key.

    snapshots holds (time, field) pairs at the requested record times.
    """

    initial: ComplexField
    final: ComplexField
    events: tuple[JumpEvent, ...]
    stream: RngStream
    snapshots: tuple[tuple[float, ComplexField], ...] = ()

    def __post_init__(self):
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("jump events must be time-ordered")
        if abs(self.final.norm_sq - 1.0) > 1e-9:
            raise NormError("final state is not normalized")

    @property
    def jump_count(self) -> int:
        return len(self.events)


class _FlowKernel:
    """Precomputed spectral factors for repeated Strang steps at fixed dt."""

    def __init__(self, grid: SpatialGrid, kernel: MomentumKernel, config: EvolutionConfig):
        self.grid = grid
        self.kernel = kernel
        self.kappa = config.kappa
        self.gamma = kernel.gamma
        self.spacing = grid.spacing
        self.n = grid.n_points
        self.q_sq = grid.wavenumbers**2
        self.ghat_k = np.fft.rfft(np.fft.ifftshift(kernel.ghat_samples))
        self.potential = None
        if config.potential is not None:
            self.potential = np.asarray(config.potential, dtype=np.float64)

    def step(self, psi: np.ndarray, dt: float) -> tuple[np.ndarray, float | np.ndarray]:
        """One Strang step of duration dt; returns (new psi, mid-step overlap).

        Works on a single state (n,) or a stack (m, n); the overlap is then
        a scalar or a length-m vector. The stack path applies the same
        per-row transforms as the single path so results agree bitwise.
        """
        half = np.exp(-0.25j * self.kappa * self.q_sq * dt)
        psi = np.fft.ifft(np.fft.fft(psi, axis=-1) * half, axis=-1)
        rho = np.abs(psi) ** 2
        conv = (
            np.fft.irfft(np.fft.rfft(rho, axis=-1) * self.ghat_k, n=self.n, axis=-1)
            * self.spacing
        )
        overlap = self.spacing * np.sum(rho * conv, axis=-1)
        gain = conv - (overlap[..., None] if psi.ndim == 2 else overlap)
        psi = psi * np.exp(self.gamma * dt * gain)
        if self.potential is not None:
            psi = psi * np.exp(-1j * self.potential * dt)
        norm_sq = self.spacing * np.sum(np.abs(psi) ** 2, axis=-1)
        psi = psi / np.sqrt(norm_sq[..., None] if psi.ndim == 2 else norm_sq)
        psi = np.fft.ifft(np.fft.fft(psi, axis=-1) * half, axis=-1)
        return psi, overlap


def _draw_threshold(gen: np.random.Generator) -> float:
    # -log(1 - u) keeps u = 0 finite and never evaluates log(0)
    return -math.log1p(-gen.random())


def _thin_momentum(
    flow: _FlowKernel, psi: np.ndarray, gen: np.random.Generator, max_proposals: int
) -> float:
    """Draw q proportional to G(q)(1 - |<e^{iqy}>|^2) by rejection."""
    y = flow.grid.positions
    rho = np.abs(psi) ** 2
    rho = rho / np.sum(rho)
    for _ in range(max_proposals):
        q = gen.normal(0.0, flow.kernel.sigma_G)
        chi = np.sum(rho * np.exp(1j * q * y))
        if gen.random() < 1.0 - abs(chi) ** 2:
            return float(q)
    raise JumpUndefinedError(
        f"no momentum accepted in {max_proposals} proposals; the state is "
        "pointer-like yet the hazard fired (step too coarse?)"
    )


def metropolis_momentum(
    field: ComplexField,
    kernel: MomentumKernel,
    rng: RngStream,
    n_steps: int = 64,
) -> float:
    """Draw a jump momentum by random-walk Metropolis on G(q)(1 - |<e^{iqy}>|^2).

    Alternative to the exact thinning draw the samplers use, kept for
    cross-validation. One chain per call: the start is an independent G(q)
    draw, the proposal scale is sigma_G, and the chain state after n_steps
    is returned, so repeated calls on distinct streams give independent
    samples (bias decays with n_steps; 64 is plenty at these scales).
    """
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
    rho = field.density()
    rho = rho / np.sum(rho)
    y = field.grid.positions
    sigma = kernel.sigma_G

    def defect(q: float) -> float:
        chi = np.sum(rho * np.exp(1j * q * y))
        return max(1.0 - abs(chi) ** 2, 0.0)

    gen = rng.generator()
    q = gen.normal(0.0, sigma)
    w = defect(q)
    for _ in range(16):
        if w > JUMP_DEFECT_FLOOR:
            break
        q = gen.normal(0.0, sigma)
        w = defect(q)
    else:
        raise JumpUndefinedError(
            f"no momentum with positive jump weight after 16 starts; "
            f"1 - |<e^(iqy)>|^2 = {w:.3e} at q = {q!r}"
        )
    for _ in range(n_steps):
        prop = q + gen.normal(0.0, sigma)
        w_prop = defect(prop)
        log_ratio = (q * q - prop * prop) / (2.0 * sigma * sigma)
        # log1p(-u) is a safe log-uniform: u in [0, 1) never hits log(0)
        if w_prop > 0.0 and math.log1p(-gen.random()) < log_ratio + math.log(w_prop / w):
            q, w = prop, w_prop
    return float(q)


def _advance_row(
    flow: _FlowKernel,
    psi: np.ndarray,
    t0: float,
    duration: float,
    hazard: float,
    threshold: float,
    gen: np.random.Generator,
    events: list,
    max_proposals: int,
) -> tuple[np.ndarray, float, float]:
    """Advance one state through [t0, t0 + duration] with jump subdivisions.

    Returns (psi, hazard, threshold) at the interval end. Both sampling
    engines funnel every hazard decision through this function, which is
    what keeps them draw-for-draw identical.
    """
    remaining = duration
    t = t0
    while True:
        stepped, overlap = flow.step(psi, remaining)
        rate = flow.gamma * max(1.0 - float(overlap), 0.0)
        gained = rate * remaining
        if hazard + gained < threshold:
            return stepped, hazard + gained, threshold
        frac = (threshold - hazard) / gained if gained > 0.0 else 0.0
        dt_part = frac * remaining
        if dt_part > 0.0:
            psi, _ = flow.step(psi, dt_part)
        t += dt_part
        q = _thin_momentum(flow, psi, gen, max_proposals)
        rho = np.abs(psi) ** 2
        rate_at = flow.gamma * (
            1.0 - flow.kernel.density_overlap(rho / (np.sum(rho) * flow.spacing))
        )
        psi = _jump_array(flow.grid, psi, q)
        events.append(JumpEvent(time=t, q=q, total_rate_at_jump=rate_at))
        hazard = 0.0
        threshold = _draw_threshold(gen)
        remaining -= dt_part
        if remaining <= 1e-15:
            return psi, hazard, threshold


def _interval_boundaries(dt: float, t_max: float, stops: tuple[float, ...]) -> np.ndarray:
    grid_points = np.arange(1, int(math.ceil(t_max / dt - 1e-9)) + 1) * dt
    pts = np.concatenate([grid_points, np.asarray(stops, dtype=float), [t_max]])
    pts = np.sort(pts[(pts > 1e-15) & (pts <= t_max + 1e-12)])
    # boundaries closer than dt*1e-6 collapse to one (guards float drift
    # between requested stop times and the step grid)
    out = [float(pts[0])]
    for p in pts[1:]:
        if p - out[-1] > dt * 1e-6:
            out.append(float(p))
    out[-1] = min(out[-1], t_max)
    return np.asarray(out)


def _check_finite(psi: np.ndarray, step_index: int) -> None:
    if not np.all(np.isfinite(psi.view(np.float64))):
        raise DivergenceError("field amplitudes diverged", step=step_index)


def sample_trajectory(
    initial: ComplexField,
    t_max: float,
    config: EvolutionConfig,
    rng: RngStream,
    kernel: MomentumKernel | None = None,
    record_times: tuple[float, ...] = (),
    max_proposals: int = 100_000,
) -> UnravelingTrajectory:
    """Sample one piecewise-deterministic path up to t_max.

    The deterministic part is the same Strang-split nonlinear flow the
    soliton solver uses, here stepped with per-step mid-point rates feeding
    the hazard integral; t_max is taken from the argument, not from
    config.t_max. record_times (each in [0, t_max]) select snapshot
    instants, returned on the trajectory.
    """
    grid = initial.grid
    if kernel is None:
        kernel = MomentumKernel(grid)
    elif kernel.grid != grid:
        raise ConfigError("kernel grid does not match the field grid")
    if not (t_max > 0.0):
        raise ConfigError(f"t_max must be positive, got {t_max!r}")
    if abs(initial.norm_sq - 1.0) > 1e-9:
        raise NormError(f"initial norm^2 = {initial.norm_sq!r} is not 1")
    stops = tuple(float(s) for s in record_times)
    if any(not (0.0 <= s <= t_max) for s in stops):
        raise ConfigError("record_times must lie in [0, t_max]")
    config.validate_for_grid(grid)

    flow = _FlowKernel(grid, kernel, config)
    gen = rng.generator()
    threshold = _draw_threshold(gen)
    hazard = 0.0
    psi = initial.amplitudes.copy()
    events: list[JumpEvent] = []
    snapshots = []
    want = sorted(set(stops))
    if want and want[0] == 0.0:
        snapshots.append((0.0, initial))
        want = want[1:]
    t = 0.0
    for i, boundary in enumerate(_interval_boundaries(config.dt, t_max, tuple(want))):
        psi, hazard, threshold = _advance_row(
            flow, psi, t, boundary - t, hazard, threshold, gen, events, max_proposals
        )
        t = boundary
        if i % _FINITE_CHECK_EVERY == 0:
            _check_finite(psi, i)
        while want and abs(want[0] - t) <= config.dt * 1e-6:
            snapshots.append((want[0], ComplexField(grid, psi)))
            want = want[1:]
    _check_finite(psi, -1)
    return UnravelingTrajectory(
        initial=initial,
        final=normalize(ComplexField(grid, psi)),
        events=tuple(events),
        stream=rng,
        snapshots=tuple(snapshots),
    )


def sample_ensemble(
    initial: ComplexField,
    t_max: float,
    config: EvolutionConfig,
    seed: int,
    n_trajectories: int,
    kernel: MomentumKernel | None = None,
    record_times: tuple[float, ...] = (),
    base_stream_id: int = 0,
    max_proposals: int = 100_000,
) -> list[UnravelingTrajectory]:
    """Sample n_trajectories independent paths in vectorized lockstep.

    Trajectory i uses RngStream(seed, base_stream_id + i) and reproduces
    sample_trajectory with that stream exactly; the ensemble engine only
    exists for speed.
    """
    grid = initial.grid
    if kernel is None:
        kernel = MomentumKernel(grid)
    elif kernel.grid != grid:
        raise ConfigError("kernel grid does not match the field grid")
    if n_trajectories < 1:
        raise ConfigError("n_trajectories must be >= 1")
    if not (t_max > 0.0):
        raise ConfigError(f"t_max must be positive, got {t_max!r}")
    if abs(initial.norm_sq - 1.0) > 1e-9:
        raise NormError(f"initial norm^2 = {initial.norm_sq!r} is not 1")
    stops = tuple(float(s) for s in record_times)
    if any(not (0.0 <= s <= t_max) for s in stops):
        raise ConfigError("record_times must lie in [0, t_max]")
    config.validate_for_grid(grid)

    flow = _FlowKernel(grid, kernel, config)
    streams = [RngStream(seed, base_stream_id + i) for i in range(n_trajectories)]
    gens = [s.generator() for s in streams]
    thresholds = np.array([_draw_threshold(g) for g in gens])
    hazards = np.zeros(n_trajectories)
    psi = np.tile(initial.amplitudes, (n_trajectories, 1))
    events: list[list[JumpEvent]] = [[] for _ in range(n_trajectories)]
    snapshots: list[list[tuple[float, ComplexField]]] = [
        [] for _ in range(n_trajectories)
    ]
    want = sorted(set(stops))
    if want and want[0] == 0.0:
        for snap in snapshots:
            snap.append((0.0, initial))
        want = want[1:]

    t = 0.0
    for i, boundary in enumerate(_interval_boundaries(config.dt, t_max, tuple(want))):
        dt = boundary - t
        pre = psi
        pre_hazards = hazards
        stepped, overlaps = flow.step(psi, dt)
        rates = flow.gamma * np.maximum(1.0 - overlaps, 0.0)
        gained = rates * dt
        crossing = np.nonzero(pre_hazards + gained >= thresholds)[0]
        psi = stepped
        hazards = pre_hazards + gained
        for r in crossing:
            row, hz, th = _advance_row(
                flow,
                pre[r],
                t,
                dt,
                pre_hazards[r],
                thresholds[r],
                gens[r],
                events[r],
                max_proposals,
            )
            psi[r] = row
            hazards[r] = hz
            thresholds[r] = th
        t = boundary
        if i % _FINITE_CHECK_EVERY == 0:
            _check_finite(psi, i)
        while want and abs(want[0] - t) <= config.dt * 1e-6:
            for r in range(n_trajectories):
                snapshots[r].append((want[0], ComplexField(grid, psi[r])))
            want = want[1:]
    _check_finite(psi, -1)
    return [
        UnravelingTrajectory(
            initial=initial,
            final=normalize(ComplexField(grid, psi[r])),
            events=tuple(events[r]),
            stream=streams[r],
            snapshots=tuple(snapshots[r]),
        )
        for r in range(n_trajectories)
    ]


def ensemble_density(fields) -> GridDensityMatrix:
    """Average projector (1/M) sum |psi_k><psi_k| as a grid density matrix.

    Accepts ComplexField instances sharing one grid (snapshots at a common
    time). Hermitian by construction; trace 1 to roundoff when the inputs
    are normalized.
    """
    fields = list(fields)
    if not fields:
        raise ConfigError("ensemble_density needs at least one field")
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError("ensemble fields live on different grids")
    stack = np.stack([f.amplitudes for f in fields])
    rho = stack.T @ stack.conj() / len(fields)
    return GridDensityMatrix(grid, rho)
