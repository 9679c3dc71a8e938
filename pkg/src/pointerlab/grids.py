"""Periodic 1-D grids, complex fields, spectral helpers, seeded randomness.

All physics modules work in dimensionless units: position y = sigma_G x/hbar,
time tau = gamma t. Free dispersion is then controlled by the single
parameter kappa = sigma_G**2 / (m hbar gamma) and the momentum-transfer
scale is sigma_G = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, GridError, NormError


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [-length/2, length/2).

    Parameters
    ----------
    n_points : int
        Number of samples, a positive power of two.
    length : float
        Domain length in dimensionless position units.
    """

    n_points: int
    length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n <= 0 or (n & (n - 1)) != 0:
            raise GridError(f"n_points must be a positive power of two, got {n!r}")
        if not (float(self.length) > 0.0) or not np.isfinite(self.length):
            raise GridError(f"length must be positive and finite, got {self.length!r}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def positions(self) -> np.ndarray:
        """Sample points y_j = -L/2 + j*dy."""
        y = -0.5 * self.length + self.spacing * np.arange(self.n_points)
        y.flags.writeable = False
        return y

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Dual momentum grid in FFT order, spacing 2*pi/length."""
        q = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        q.flags.writeable = False
        return q

    @property
    def q_max(self) -> float:
        """Nyquist wavenumber pi/spacing."""
        return np.pi / self.spacing


@dataclass(frozen=True)
class ComplexField:
    """Complex amplitudes psi(y_j) on a SpatialGrid.

    Instances are immutable; operations return new fields. The amplitude
    array is copied and locked on construction.
    """

    grid: SpatialGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=np.complex128)
        if psi.shape != (self.grid.n_points,):
            raise GridError(
                f"amplitude count {psi.shape} does not match grid n_points "
                f"{self.grid.n_points}"
            )
        if not np.all(np.isfinite(psi.view(np.float64))):
            raise NormError("field amplitudes must be finite")
        psi = psi.copy()
        psi.flags.writeable = False
        object.__setattr__(self, "amplitudes", psi)

    @property
    def norm_sq(self) -> float:
        """Discrete L2 norm squared, spacing * sum |psi_j|^2."""
        return float(self.grid.spacing * np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))

    def density(self) -> np.ndarray:
        """|psi|^2 samples (a fresh array)."""
        return np.abs(self.amplitudes) ** 2

    def with_amplitudes(self, psi: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, psi)


@dataclass(frozen=True)
class GridDensityMatrix:
    """Position-representation density matrix rho(y_i, y_j) on a grid.

    Entries are kernel samples, so the continuum normalization carries the
    grid measure: trace = spacing * sum of the diagonal, and the operator
    whose eigenvalues are probabilities is spacing * matrix. Grids are
    capped at 256 points (n^2 storage). Construction checks shape and
    finiteness only; validate() does the expensive Hermiticity/trace/
    positivity audit on demand.
    """

    grid: SpatialGrid
    matrix: np.ndarray

    def __post_init__(self):
        if self.grid.n_points > 256:
            raise GridError(
                f"density matrices are capped at 256 points, got {self.grid.n_points}"
            )
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (self.grid.n_points, self.grid.n_points):
            raise GridError(
                f"matrix shape {m.shape} does not match grid n_points "
                f"{self.grid.n_points}"
            )
        if not np.all(np.isfinite(m.view(np.float64))):
            raise NormError("density matrix entries must be finite")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(self.grid.spacing * np.sum(np.real(np.diag(self.matrix))))

    @property
    def purity(self) -> float:
        """Trace of (spacing * matrix)^2, 1 for pure states."""
        return float(self.grid.spacing**2 * np.sum(np.abs(self.matrix) ** 2))

    def position_density(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def eigenvalues(self) -> np.ndarray:
        """Probability spectrum, ascending (eigenvalues of spacing*matrix)."""
        return np.linalg.eigvalsh(self.matrix) * self.grid.spacing

    def validate(
        self,
        hermiticity_tol: float = 1e-12,
        trace_tol: float = 1e-10,
        negativity_tol: float = 1e-10,
    ) -> None:
        """Raise NormError/GridError style OracleError on invariant breach."""
        from .errors import OracleError

        herm = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        scale = float(np.max(np.abs(self.matrix)))
        if herm > hermiticity_tol * max(scale, 1.0):
            raise OracleError(f"Hermiticity defect {herm:.3e} exceeds tolerance")
        if abs(self.trace - 1.0) > trace_tol:
            raise OracleError(f"trace {self.trace!r} deviates from 1")
        lo = float(self.eigenvalues()[0])
        if lo < -negativity_tol:
            raise OracleError(f"negative eigenvalue {lo:.3e} beyond tolerance")


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Identical keys give identical draw sequences on every run and for any
    number of workers; per-trajectory streams use the trajectory index as
    stream_id so ensemble results never depend on scheduling.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if int(self.stream_id) < 0:
            raise ConfigError(f"stream_id must be non-negative, got {self.stream_id!r}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(seq))


def normalize(field: ComplexField) -> ComplexField:
    """Rescale to norm_sq = 1 (relative accuracy 1e-14)."""
    nrm = field.norm
    if nrm <= 0.0 or not np.isfinite(nrm):
        raise NormError(f"cannot normalize field with norm {nrm}")
    return field.with_amplitudes(field.amplitudes / nrm)


def periodic_convolve(grid: SpatialGrid, density: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Circular convolution spacing * sum_m density[m] kernel(y_j - y_m).

    Both arrays are samples on `grid`; the kernel is sampled on the centered
    coordinates (its y=0 value sits at index n//2) and is recentred
    internally. Result is real and commutative in the two arguments.
    """
    density = np.asarray(density, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    n = grid.n_points
    if density.shape != (n,) or kernel.shape != (n,):
        raise GridError(
            f"operand shapes {density.shape}, {kernel.shape} do not match grid size {n}"
        )
    # ifftshift moves the kernel's center sample to index 0 so the product
    # theorem computes sum_m d[m] k[j-m] with k indexed by signed offset.
    out = np.fft.irfft(np.fft.rfft(density) * np.fft.rfft(np.fft.ifftshift(kernel)), n=n)
    return out * grid.spacing


def kinetic_half_step(field: ComplexField, dt: float, kappa: float) -> ComplexField:
    """Advance by the free kinetic flow: multiply by exp(-i kappa q^2 dt / 2).

    This is the exact free propagator for duration dt (the 1/2 comes from
    the kappa/2 dispersion term); Strang loops call it with dt/2 at the
    segment edges. Norm is preserved to machine precision.
    """
    if not (dt > 0.0):
        raise ConfigError(f"dt must be positive, got {dt}")
    q = field.grid.wavenumbers
    psi_k = np.fft.fft(field.amplitudes)
    psi_k *= np.exp(-0.5j * kappa * q**2 * dt)
    return field.with_amplitudes(np.fft.ifft(psi_k))


def spectral_derivative(grid: SpatialGrid, values: np.ndarray) -> np.ndarray:
    """d/dy via the Fourier multiplier iq."""
    return np.fft.ifft(1j * grid.wavenumbers * np.fft.fft(values))


def spectral_shift(grid: SpatialGrid, values: np.ndarray, shift: float) -> np.ndarray:
    """Evaluate the periodic trig interpolant of `values` at y + shift.

    Real input gives real output (imaginary round-off discarded).
    """
    values = np.asarray(values)
    if values.shape != (grid.n_points,):
        raise GridError(f"shape {values.shape} does not match grid size {grid.n_points}")
    shifted = np.fft.ifft(np.fft.fft(values) * np.exp(1j * grid.wavenumbers * shift))
    if np.isrealobj(values):
        return shifted.real
    return shifted


def circular_mean_position(grid: SpatialGrid, density: np.ndarray) -> float:
    """Density centroid robust to periodic wraparound.

    Maps the domain to the unit circle, averages, and maps the angle back.
    Agrees with the plain quadrature mean when the density is localized
    away from the domain edge.
    """
    w = 2.0 * np.pi / grid.length
    z = np.sum(density * np.exp(1j * w * grid.positions))
    if np.abs(z) == 0.0:
        return 0.0
    return float(np.angle(z) / w)


def gaussian_field(
    grid: SpatialGrid, center: float = 0.0, width: float = 1.0, momentum: float = 0.0
) -> ComplexField:
    """Normalized Gaussian packet with |psi|^2 standard deviation `width`."""
    if not (width > 0.0):
        raise ConfigError(f"width must be positive, got {width}")
    y = grid.positions
    psi = np.exp(-((y - center) ** 2) / (4.0 * width**2) + 1j * momentum * y)
    return normalize(ComplexField(grid, psi))
