"""Quantitative characterization of converged solitons.

Extracts the exponential tail decay constant, the asymptotic phase slopes,
the density width, and fits the collision-localization size model
sigma(kappa) = a + kappa/(4a) across a kappa sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError
from .grids import ComplexField
from .kernels import MomentumKernel, SimulationParams
from .dynamics import (
    EvolutionConfig,
    EvolutionResult,
    evolve_nonlinear,
    expectation_values,
    soliton_seed,
    suggest_discretization,
)

logger = logging.getLogger(__name__)

# Relative-amplitude window for tail fits: below the nonlinear core, above
# the spectral noise floor.
TAIL_WINDOW = (1e-8, 1e-3)
MIN_TAIL_POINTS = 20


@dataclass(frozen=True)
class SolitonProfile:
    """Measured properties of a converged soliton.

    velocity is d<y>/dtau in dimensionless units; tail_exponent is the decay
    constant k of |pi| ~ exp(-k |y - <y>|); a_psi the smeared self-overlap;
    the phase slopes are the fitted asymptotic phase gradients on each tail.
    """

    field: ComplexField
    velocity: float
    tail_exponent: float
    tail_r_squared: float
    sigma_pi: float
    a_psi: float
    phase_slope_left: float
    phase_slope_right: float

    def __post_init__(self):
        if not (self.tail_exponent > 0.0):
            raise FitError(f"tail exponent must be positive, got {self.tail_exponent!r}")
        if not (self.sigma_pi > 0.0):
            raise ConfigError(f"sigma_pi must be positive, got {self.sigma_pi!r}")
        if not (0.0 < self.a_psi <= 1.0 + 1e-12):
            raise ConfigError(f"a_psi must lie in (0, 1], got {self.a_psi!r}")


@dataclass(frozen=True)
class SizeModelParams:
    """Localization parameter of the size model sigma = a + kappa/(4a)."""

    a_loc: float

    def __post_init__(self):
        if not (0.0 < self.a_loc < 3.0):
            raise ConfigError(f"a_loc must lie in (0, 3), got {self.a_loc!r}")

    def width(self, kappa: np.ndarray | float) -> np.ndarray | float:
        return self.a_loc + np.asarray(kappa, dtype=np.float64) / (4.0 * self.a_loc)


def density_width(field: ComplexField) -> float:
    """Standard deviation of |psi|^2 (quadrature, wrap-free fields assumed)."""
    grid = field.grid
    rho = field.density()
    rho /= grid.spacing * np.sum(rho) / 1.0
    mean = grid.spacing * np.sum(grid.positions * rho)
    var = grid.spacing * np.sum((grid.positions - mean) ** 2 * rho)
    return float(np.sqrt(var))


def _tail_sides(field: ComplexField):
    """Window indices on each tail side, ordered outward from the center."""
    grid = field.grid
    modulus = np.abs(field.amplitudes)
    rho = modulus**2
    rho_sum = np.sum(rho)
    mean = float(np.sum(grid.positions * rho) / rho_sum)
    peak = float(modulus.max())
    lo, hi = TAIL_WINDOW[0] * peak, TAIL_WINDOW[1] * peak
    in_window = (modulus >= lo) & (modulus <= hi)
    sides = []
    for side_mask in (grid.positions < mean, grid.positions > mean):
        idx = np.nonzero(in_window & side_mask)[0]
        dist = np.abs(grid.positions[idx] - mean)
        order = np.argsort(dist)
        sides.append((idx[order], dist[order]))
    return sides, modulus, mean


def fit_exponential_tail(field: ComplexField) -> tuple[float, float]:
    """Fit log|psi| vs |y - <y>| over the tail window; return (k, R^2).

    Both tail sides are pooled into one regression. Raises FitError when the
    window holds fewer than 20 points or the modulus is not monotone
    decreasing outward (relative increases above 1% count as non-monotone).
    """
    sides, modulus, _ = _tail_sides(field)
    dists, logs = [], []
    n_points = 0
    for idx, dist in sides:
        n_points += idx.size
        if idx.size >= 2:
            m = modulus[idx]
            if np.any(np.diff(m) > 0.01 * m[:-1]):
                raise FitError("tail modulus is not monotone decreasing outward")
        dists.append(dist)
        logs.append(np.log(modulus[idx]))
    if n_points < MIN_TAIL_POINTS:
        raise FitError(
            f"tail window holds {n_points} points, need >= {MIN_TAIL_POINTS}"
        )
    x = np.concatenate(dists)
    z = np.concatenate(logs)
    slope, intercept = np.polyfit(x, z, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((z - fitted) ** 2))
    ss_tot = float(np.sum((z - np.mean(z)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    k = -float(slope)
    if k <= 0.0:
        raise FitError(f"tail fit produced non-decaying slope {slope!r}")
    return k, r_squared


def measure_phase_slopes(field: ComplexField) -> tuple[float, float]:
    """Linear-fit phase gradients over each tail window, (left, right).

    Raises FitError when phase unwrapping is ambiguous (adjacent samples
    separated by pi or more after unwrapping).
    """
    sides, _, _ = _tail_sides(field)
    slopes = []
    for idx, _dist in sides:
        if idx.size < MIN_TAIL_POINTS // 2:
            raise FitError(f"phase window holds {idx.size} points, too few to fit")
        order = np.argsort(field.grid.positions[idx])
        idx = idx[order]
        y = field.grid.positions[idx]
        phase = np.unwrap(np.angle(field.amplitudes[idx]))
        if np.any(np.abs(np.diff(phase)) >= np.pi * (1.0 - 1e-9)):
            raise FitError("phase unwrap ambiguous: adjacent samples differ by >= pi")
        slope, _ = np.polyfit(y, phase, 1)
        slopes.append(float(slope))
    return slopes[0], slopes[1]


def profile_soliton(
    result: EvolutionResult,
    kernel: MomentumKernel,
    min_track_points: int = 2,
) -> SolitonProfile:
    """Assemble a SolitonProfile from a converged evolution."""
    if not result.converged:
        raise ConfigError("profile_soliton needs a converged evolution result")
    field = result.final_field
    track = result.expectation_track
    if track.shape[0] < min_track_points:
        raise ConfigError("expectation track too short to measure a velocity")
    tail = track[-max(track.shape[0] // 4, min_track_points):]
    velocity = float(np.polyfit(tail[:, 0], tail[:, 1], 1)[0]) if tail.shape[0] > 1 else 0.0
    k, r_squared = fit_exponential_tail(field)
    left, right = measure_phase_slopes(field)
    return SolitonProfile(
        field=field,
        velocity=velocity,
        tail_exponent=k,
        tail_r_squared=r_squared,
        sigma_pi=density_width(field),
        a_psi=kernel.density_overlap(field.density()),
        phase_slope_left=left,
        phase_slope_right=right,
    )


def asymptotic_phase_slope(
    profile: SolitonProfile, params: SimulationParams
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Measured and predicted tail phase slopes, each as (left, right).

    The stationary tail balance (outgoing probability current replenishing
    the damped tails) gives slope = (v -/+ a_psi/k)/kappa on the left/right
    side, with v the dimensionless velocity.
    """
    kappa = params.kappa
    v = profile.velocity
    shift = profile.a_psi / profile.tail_exponent
    predicted = ((v - shift) / kappa, (v + shift) / kappa)
    measured = (profile.phase_slope_left, profile.phase_slope_right)
    return measured, predicted


def point_like_phase_error(
    field: ComplexField,
    kernel: MomentumKernel | None = None,
    q_range: tuple[float, float] = (-2.0, 2.0),
    n_q: int = 201,
) -> float:
    """max over q of |<exp(iqy)> - exp(iq<y>)|.

    Measures how well the state mimics a point particle for the momentum
    transfers that G(q) weights appreciably (default +-2 sigma_G).
    """
    grid = field.grid
    rho = field.density()
    rho /= grid.spacing * np.sum(rho) / 1.0
    mean_y, _ = expectation_values(field)
    q = np.linspace(q_range[0], q_range[1], n_q)
    worst = 0.0
    for block in np.array_split(q, max(1, n_q // 32)):
        char = grid.spacing * (np.exp(1j * np.outer(block, grid.positions)) @ rho)
        err = np.abs(char - np.exp(1j * block * mean_y))
        worst = max(worst, float(err.max()))
    return worst


@dataclass(frozen=True)
class WidthSweepPoint:
    kappa: float
    sigma_pi: float
    converged: bool
    convergence_time: float


@dataclass(frozen=True)
class WidthSweepResult:
    points: tuple[WidthSweepPoint, ...]
    a_loc: float
    residual_rms: float

    @property
    def mean_width(self) -> float:
        widths = [p.sigma_pi for p in self.points if p.converged]
        return float(np.mean(widths)) if widths else math.nan


def fit_size_model(kappas: np.ndarray, widths: np.ndarray) -> tuple[float, float]:
    """Least-squares fit of sigma = a + kappa/(4a); returns (a, residual rms)."""
    from scipy.optimize import minimize_scalar

    kappas = np.asarray(kappas, dtype=np.float64)
    widths = np.asarray(widths, dtype=np.float64)

    def cost(a):
        return float(np.sum((widths - (a + kappas / (4.0 * a))) ** 2))

    res = minimize_scalar(cost, bounds=(0.01, 3.0), method="bounded",
                          options={"xatol": 1e-10})
    a = float(res.x)
    rms = math.sqrt(cost(a) / kappas.size)
    return a, rms


def width_vs_kappa(
    kappas,
    convergence_tol: float = 1e-6,
    t_max: float = 400.0,
) -> WidthSweepResult:
    """Converge a soliton per kappa, measure widths, fit the size model.

    Non-converged points are kept in the table (flagged) but excluded from
    the fit.
    """
    points = []
    for kappa in kappas:
        grid, dt = suggest_discretization(kappa)
        config = EvolutionConfig(kappa=kappa, dt=dt, t_max=t_max,
                                 convergence_tol=convergence_tol)
        kernel = MomentumKernel(grid)
        result = evolve_nonlinear(soliton_seed(grid, kappa), config, kernel)
        width = density_width(result.final_field)
        points.append(WidthSweepPoint(kappa=float(kappa), sigma_pi=width,
                                      converged=result.converged,
                                      convergence_time=result.convergence_time))
        logger.info("width sweep: kappa=%g width=%.4g converged=%s",
                    kappa, width, result.converged)
    usable = [p for p in points if p.converged]
    if len(usable) >= 2:
        a_loc, rms = fit_size_model(np.array([p.kappa for p in usable]),
                                    np.array([p.sigma_pi for p in usable]))
    else:
        a_loc, rms = math.nan, math.nan
    return WidthSweepResult(points=tuple(points), a_loc=a_loc, residual_rms=rms)
