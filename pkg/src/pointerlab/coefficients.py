"""Reduced stochastic process for superpositions of well-separated packets.

When the state is a sum of localized packets c_i phi(y - x_i) whose
densities do not overlap, the full dynamics closes on the coefficient
vector: a deterministic replicator-type flow that feeds weight to the
component seen most often by the environment, interrupted by orthogonal
jumps that redistribute the moduli. Everything here is dimensionless
(positions in units of the kernel width, rates in units of gamma unless a
gamma is supplied).

The flow and the jump maps depend only on the moduli |c_i| and the
positions, never on the phases, so outcomes are phase-independent by
construction; the test suite checks this with matched seeds.

Jump proposals arrive as a Poisson stream at the envelope rate gamma and
are accepted with probability 1 - |sum_j p_j e^{iq x_j}|^2, which makes
the accepted (time, q) stream exact for the state-dependent rate; no
hazard integration is involved. One batch engine advances any number of
trajectories on an absolute time grid, subdividing at proposal times, so
a given (seed, stream id) yields the same outcome bit for bit whether it
runs alone or inside an ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    JumpUndefinedError,
    NormError,
    TimeoutError,
    UnstableEquilibriumError,
)
from .grids import RngStream

# packets this far apart have 1 - exp(-spacing^2/2) indistinguishable
# from 1 in float64, making every pairwise rate exactly gamma
DEFAULT_SPACING = 15.0

TERMINATION_THRESHOLD = 1.0 - 1e-6
TIMEOUT_FACTOR = 200.0  # units of 1/gamma
FLOW_STEP = 0.01  # RK4 step, units of 1/gamma
JUMP_DEFECT_FLOOR = 1e-12


def saturated_positions(n: int, spacing: float = DEFAULT_SPACING) -> np.ndarray:
    """n packet positions far enough apart to saturate every pairwise rate."""
    if n < 2:
        raise ConfigError(f"need at least 2 packets, got {n}")
    return np.arange(n, dtype=np.float64) * spacing


def localization_rate_matrix(positions, gamma: float = 1.0) -> np.ndarray:
    """Pairwise rates F_ij = gamma (1 - exp(-(x_i - x_j)^2 / 2)), zero diagonal."""
    x = np.asarray(positions, dtype=np.float64)
    dx = x[:, None] - x[None, :]
    f = gamma * -np.expm1(-0.5 * dx**2)
    np.fill_diagonal(f, 0.0)
    return f


@dataclass(frozen=True)
class CoefficientState:
    """Coefficients and packet positions of an N-component superposition.

    F_matrix caches the pairwise localization rates; weights must sum to 1
    within 1e-12.
    """

    c: np.ndarray
    x: np.ndarray
    F_matrix: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.complex128).copy()
        x = np.asarray(self.x, dtype=np.float64).copy()
        f = np.asarray(self.F_matrix, dtype=np.float64).copy()
        n = c.size
        if n < 2:
            raise ConfigError(f"need at least 2 components, got {n}")
        if x.shape != (n,) or f.shape != (n, n):
            raise ConfigError(
                f"shape mismatch: c has {n} entries, x {x.shape}, F {f.shape}"
            )
        if not (self.gamma > 0.0) or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma must be positive, got {self.gamma!r}")
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise NormError(f"sum |c_i|^2 = {norm!r} differs from 1 beyond 1e-12")
        if np.any(np.abs(np.diagonal(f)) > 0.0):
            raise ConfigError("F matrix must have a zero diagonal")
        if not np.array_equal(f, f.T):
            raise ConfigError("F matrix must be symmetric")
        if np.any(f < -1e-12) or np.any(f > self.gamma * (1.0 + 1e-12)):
            raise ConfigError("F matrix entries must lie in [0, gamma]")
        for arr in (c, x, f):
            arr.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "F_matrix", f)

    @property
    def n_components(self) -> int:
        return self.c.size

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.c) ** 2

    def with_coefficients(self, c) -> "CoefficientState":
        return CoefficientState(c, self.x, self.F_matrix, self.gamma)


def coefficient_state(c, positions, gamma: float = 1.0) -> CoefficientState:
    """Build a state with the rate matrix derived from the positions."""
    return CoefficientState(c, positions, localization_rate_matrix(positions, gamma), gamma)


@dataclass(frozen=True)
class TrajectoryOutcome:
    """Where a trajectory settled: 1-based component index plus the jump log."""

    asymptotic_index: int
    jump_count: int
    jump_times: tuple
    t_reached: float

    def __post_init__(self):
        if self.asymptotic_index < 1:
            raise ConfigError("asymptotic_index is 1-based")
        if self.jump_count != len(self.jump_times):
            raise ConfigError("jump_count disagrees with jump_times")


def _rate_matvec(f: np.ndarray, p: np.ndarray) -> np.ndarray:
    # ordered accumulation over columns so single rows and batched stacks
    # run the identical float sequence
    out = np.zeros(p.shape, dtype=np.float64)
    for j in range(f.shape[0]):
        out += p[..., j : j + 1] * f[:, j]
    return out


def _flow_derivative(c: np.ndarray, f: np.ndarray) -> np.ndarray:
    p = np.abs(c) ** 2
    fp = _rate_matvec(f, p)
    mean_rate = np.sum(p * fp, axis=-1)
    return (mean_rate[..., None] - fp) * c


def coefficient_derivative(state: CoefficientState) -> np.ndarray:
    """dc/dt of the deterministic flow; norm-preserving and phase-frozen."""
    return _flow_derivative(state.c, state.F_matrix)


def _rk4_step(c: np.ndarray, f: np.ndarray, h) -> np.ndarray:
    """One RK4 step; c is (N,) or (M, N), h a scalar or (M, 1) durations."""
    k1 = _flow_derivative(c, f)
    k2 = _flow_derivative(c + 0.5 * h * k1, f)
    k3 = _flow_derivative(c + 0.5 * h * k2, f)
    k4 = _flow_derivative(c + h * k3, f)
    c = c + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    norm = np.sum(np.abs(c) ** 2, axis=-1)
    return c / np.sqrt(norm[..., None] if c.ndim == 2 else norm)


def jump_rate(state: CoefficientState, q: float) -> float:
    """Differential jump rate gamma G(q) (1 - |sum_j |c_j|^2 e^{iq x_j}|^2)."""
    p = state.weights
    chi = np.sum(p * np.exp(1j * q * state.x))
    envelope = math.exp(-0.5 * q * q) / math.sqrt(2.0 * math.pi)
    return max(state.gamma * envelope * (1.0 - abs(chi) ** 2), 0.0)


def total_rate(state: CoefficientState) -> float:
    """Integrated jump rate; closes to the F-weighted form sum_jk p_j F_jk p_k."""
    p = state.weights
    return float(p @ state.F_matrix @ p)


def _redistribute_array(c: np.ndarray, x: np.ndarray, q: float) -> np.ndarray:
    p = np.abs(c) ** 2
    phase = np.exp(1j * q * x)
    chi = np.sum(p * phase)
    defect = 1.0 - abs(chi) ** 2
    if defect <= JUMP_DEFECT_FLOOR:
        raise JumpUndefinedError(
            f"jump undefined: 1 - |sum p e^(iqx)|^2 = {defect:.3e} at q = {q!r}"
        )
    out = (phase - chi) * c
    return out / math.sqrt(np.sum(np.abs(out) ** 2))


def jump_redistribute(state: CoefficientState, q: float, rng=None) -> CoefficientState:
    """Coefficients after an orthogonal jump with momentum q, renormalized.

    The map is deterministic given q; rng is accepted for signature parity
    with the samplers and left untouched.
    """
    return state.with_coefficients(_redistribute_array(state.c, state.x, float(q)))


def simplex_sample(
    n: int, rng: RngStream, positions=None, gamma: float = 1.0
) -> CoefficientState:
    """Weights uniform on the (N-1)-simplex, phases uniform on [0, 2pi)."""
    if n < 2:
        raise ConfigError(f"need at least 2 components, got {n}")
    gen = rng.generator()
    w = gen.exponential(scale=1.0, size=n)
    w /= np.sum(w)
    phases = gen.uniform(0.0, 2.0 * math.pi, size=n)
    c = np.sqrt(w) * np.exp(1j * phases)
    c /= math.sqrt(np.sum(np.abs(c) ** 2))
    if positions is None:
        positions = saturated_positions(n)
    return coefficient_state(c, positions, gamma)


def n2_analytics(c1_sq_0: float) -> tuple[float, float]:
    """Integrated jump intensity and odd-jump probability for two packets.

    For saturated rates the total jump rate along the flow integrates to
    mu(inf) = -ln(1 - 2 min(p, 1-p))/2, and the probability of an odd
    number of jumps, (1 - e^{-2 mu})/2, equals the smaller initial weight:
    the component that loses the deterministic race is reached by exactly
    those trajectories that jump an odd number of times.
    """
    if not (0.0 < c1_sq_0 < 1.0):
        raise ConfigError(f"c1_sq_0 must lie in (0, 1), got {c1_sq_0!r}")
    if abs(c1_sq_0 - 0.5) < 1e-15:
        raise UnstableEquilibriumError(
            "integrated rate diverges at equal weights (unstable equilibrium)"
        )
    minority = min(c1_sq_0, 1.0 - c1_sq_0)
    mu_infinity = -0.5 * math.log1p(-2.0 * minority)
    prob_odd = 0.5 * -math.expm1(-2.0 * mu_infinity)
    return mu_infinity, prob_odd


def _outcome(c_row: np.ndarray, jump_times: list, t: float) -> TrajectoryOutcome:
    return TrajectoryOutcome(
        int(np.argmax(np.abs(c_row) ** 2)) + 1,
        len(jump_times),
        tuple(jump_times),
        t,
    )


def _run_batch(initial: CoefficientState, gens: list, jumps: bool) -> list:
    """March all rows on the absolute grid k*FLOW_STEP, subdividing at events."""
    gamma = initial.gamma
    horizon = TIMEOUT_FACTOR / gamma
    h = FLOW_STEP / gamma
    f, x = initial.F_matrix, initial.x
    m = len(gens)

    c = np.tile(initial.c, (m, 1))
    outcomes: list[TrajectoryOutcome | None] = [None] * m
    jump_times: list[list[float]] = [[] for _ in range(m)]
    start_weights = np.abs(c) ** 2
    active = np.ones(m, dtype=bool)
    for r in np.nonzero(start_weights.max(axis=-1) > TERMINATION_THRESHOLD)[0]:
        outcomes[r] = _outcome(c[r], [], 0.0)
        active[r] = False
    if jumps:
        next_events = np.array([g.exponential(1.0 / gamma) for g in gens])
    else:
        next_events = np.full(m, math.inf)

    t = 0.0
    k = 0
    while np.any(active) and t < horizon:
        t_boundary = min((k + 1) * h, horizon)
        act = np.nonzero(active)[0]
        has_event = next_events[act] <= t_boundary
        smooth = act[~has_event]
        pend = act[has_event]
        if smooth.size:
            c[smooth] = _rk4_step(c[smooth], f, t_boundary - t)
        if pend.size:
            tcur = np.full(pend.size, t)
            live = np.ones(pend.size, dtype=bool)
            while np.any(live):
                idx = np.nonzero(live)[0]
                rows = pend[idx]
                c[rows] = _rk4_step(c[rows], f, (next_events[rows] - tcur[idx])[:, None])
                tcur[idx] = next_events[rows]
                qs = np.empty(rows.size)
                us = np.empty(rows.size)
                for j, r in enumerate(rows):
                    qs[j] = gens[r].normal(0.0, 1.0)
                    us[j] = gens[r].random()
                phase = np.exp(1j * qs[:, None] * x)
                p = np.abs(c[rows]) ** 2
                chi = np.sum(p * phase, axis=-1)
                accept = us < 1.0 - np.abs(chi) ** 2
                if np.any(accept):
                    arows = rows[accept]
                    out = (phase[accept] - chi[accept, None]) * c[arows]
                    c[arows] = out / np.sqrt(np.sum(np.abs(out) ** 2, axis=-1))[:, None]
                    for r, tj in zip(arows, tcur[idx[accept]]):
                        jump_times[r].append(float(tj))
                for j, r in enumerate(rows):
                    next_events[r] = tcur[idx[j]] + gens[r].exponential(1.0 / gamma)
                live[idx] = next_events[rows] <= t_boundary
            c[pend] = _rk4_step(c[pend], f, (t_boundary - tcur)[:, None])
        t = t_boundary
        k += 1
        weights = np.abs(c[act]) ** 2
        for r in act[weights.max(axis=-1) > TERMINATION_THRESHOLD]:
            outcomes[r] = _outcome(c[r], jump_times[r], t)
            active[r] = False
    if np.any(active):
        stuck = np.nonzero(active)[0]
        raise TimeoutError(
            f"{stuck.size} trajectories reached no fixed point by t = {horizon!r} "
            f"(first stuck index {int(stuck[0])})"
        )
    return outcomes


def _drift_trajectory(
    initial: CoefficientState,
    gen: np.random.Generator,
    jumps: bool,
    velocities: np.ndarray,
) -> TrajectoryOutcome:
    """Scalar sampler variant with packets drifting as x(t) = x0 + v t."""
    gamma = initial.gamma
    horizon = TIMEOUT_FACTOR / gamma
    h = FLOW_STEP / gamma
    x0 = initial.x

    def deriv(c, tau):
        return _flow_derivative(c, localization_rate_matrix(x0 + velocities * tau, gamma))

    def rk4(c, tau, dt):
        k1 = deriv(c, tau)
        k2 = deriv(c + 0.5 * dt * k1, tau + 0.5 * dt)
        k3 = deriv(c + 0.5 * dt * k2, tau + 0.5 * dt)
        k4 = deriv(c + dt * k3, tau + dt)
        c = c + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        return c / math.sqrt(np.sum(np.abs(c) ** 2))

    c = initial.c.copy()
    if np.max(np.abs(c) ** 2) > TERMINATION_THRESHOLD:
        return _outcome(c, [], 0.0)
    times: list[float] = []
    next_event = gen.exponential(1.0 / gamma) if jumps else math.inf
    t = 0.0
    k = 0
    while t < horizon:
        t_boundary = min((k + 1) * h, horizon)
        while next_event <= t_boundary:
            c = rk4(c, t, next_event - t)
            t = next_event
            x = x0 + velocities * t
            q = gen.normal(0.0, 1.0)
            u = gen.random()
            chi = np.sum(np.abs(c) ** 2 * np.exp(1j * q * x))
            if u < 1.0 - abs(chi) ** 2:
                c = _redistribute_array(c, x, q)
                times.append(t)
            next_event = t + gen.exponential(1.0 / gamma)
        c = rk4(c, t, t_boundary - t)
        t = t_boundary
        k += 1
        if np.max(np.abs(c) ** 2) > TERMINATION_THRESHOLD:
            return _outcome(c, times, t)
    raise TimeoutError(
        f"no fixed point reached by t = {horizon!r} "
        f"(max weight {float(np.max(np.abs(c) ** 2)):.6f})"
    )


def sample_coefficient_trajectory(
    initial: CoefficientState,
    rng: RngStream,
    jumps: bool = True,
    velocities=None,
) -> TrajectoryOutcome:
    """Run one trajectory until a component holds all but 1e-6 of the weight.

    jumps=False follows the bare deterministic flow (the largest initial
    weight then wins). velocities, if given, advance the packet positions
    linearly in time and the rate matrix follows them; by default the
    packets stand still. Raises TimeoutError if no fixed point is reached
    by t = 200/gamma.
    """
    if velocities is not None:
        velocities = np.asarray(velocities, dtype=np.float64)
        if velocities.shape != initial.x.shape:
            raise ConfigError("velocities must match the packet positions")
        return _drift_trajectory(initial, rng.generator(), jumps, velocities)
    return _run_batch(initial, [rng.generator()], jumps)[0]


def sample_coefficient_ensemble(
    initial: CoefficientState,
    seed: int,
    n_trajectories: int,
    jumps: bool = True,
    base_stream_id: int = 0,
) -> list[TrajectoryOutcome]:
    """Sample n_trajectories outcomes in vectorized lockstep.

    Trajectory i uses RngStream(seed, base_stream_id + i) and reproduces
    sample_coefficient_trajectory with that stream exactly. Fixed packet
    positions only.
    """
    if n_trajectories < 1:
        raise ConfigError("n_trajectories must be >= 1")
    gens = [RngStream(seed, base_stream_id + i).generator() for i in range(n_trajectories)]
    return _run_batch(initial, gens, jumps)


@dataclass(frozen=True)
class BasinMap:
    """Attractor index per simplex cell for the three-packet flow.

    indices[i, j] classifies the cell centered at weights
    ((i+0.5)/resolution, (j+0.5)/resolution, remainder): 1..3 the winning
    component, 0 a stalled cell (tie or separatrix), -1 outside the simplex.
    """

    resolution: int
    indices: np.ndarray
    positions: np.ndarray
    saturated: bool

    def cell_weights(self, i: int, j: int) -> tuple[float, float, float]:
        p1 = (i + 0.5) / self.resolution
        p2 = (j + 0.5) / self.resolution
        return p1, p2, 1.0 - p1 - p2


def basin_map(
    resolution: int = 100,
    saturated: bool = True,
    positions=None,
    gamma: float = 1.0,
    t_max: float = 4000.0,
    step: float = 0.05,
) -> BasinMap:
    """Classify the deterministic flow's endpoint across the weight simplex.

    Saturated rates give the plain largest-weight partition; genuinely
    unsaturated positions deform the basin boundaries away from it. Cells
    that never reach a fixed point by t_max (ties, separatrices) are
    flagged 0 rather than guessed.
    """
    if resolution < 100:
        raise ConfigError(f"resolution must be >= 100, got {resolution}")
    if positions is None:
        positions = saturated_positions(3)
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape != (3,):
        raise ConfigError("basin_map classifies the three-packet flow")
    if saturated:
        f = gamma * (1.0 - np.eye(3))
    else:
        f = localization_rate_matrix(positions, gamma)

    idx = np.full((resolution, resolution), -1, dtype=np.int64)
    centers = (np.arange(resolution) + 0.5) / resolution
    cells = [
        (i, j, centers[i], centers[j], 1.0 - centers[i] - centers[j])
        for i in range(resolution)
        for j in range(resolution)
        if 1.0 - centers[i] - centers[j] > 0.0
    ]
    rows = np.array([(a, b) for a, b, *_ in cells], dtype=np.int64)
    c = np.sqrt([[p1, p2, p3] for *_, p1, p2, p3 in cells]).astype(np.complex128)
    idx[rows[:, 0], rows[:, 1]] = 0

    active = np.ones(len(cells), dtype=bool)
    h = step / gamma
    for _ in range(int(math.ceil(t_max / gamma / h))):
        if not np.any(active):
            break
        sel = np.nonzero(active)[0]
        c[sel] = _rk4_step(c[sel], f, h)
        weights = np.abs(c[sel]) ** 2
        for row in sel[weights.max(axis=-1) > TERMINATION_THRESHOLD]:
            idx[rows[row, 0], rows[row, 1]] = int(np.argmax(np.abs(c[row]) ** 2)) + 1
            active[row] = False
    return BasinMap(resolution=resolution, indices=idx, positions=positions, saturated=saturated)
