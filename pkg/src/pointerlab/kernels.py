"""Momentum-transfer model: G(q), its transform, localization rate, Lambda.

The collision kernel is a normalized momentum-transfer distribution G(q).
Its Fourier transform Ghat(s) sets the localization rate
F(s) = gamma (1 - Ghat(s)), which saturates at the collision rate gamma for
separations beyond hbar/sigma_G. The nonlinear functional Lambda drives the
gain/loss structure of the deterministic flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import ConfigError, NormError
from .grids import SpatialGrid, periodic_convolve

DENSITY_NORM_TOL = 1e-8


@dataclass(frozen=True)
class SimulationParams:
    """Dimensionless control parameter, optionally tied to dimensional inputs.

    kappa = sigma_G**2 / (m hbar gamma) is the only parameter of the
    dimensionless dynamics. When the dimensional quartet is supplied it must
    reproduce kappa to 1e-12 relative.
    """

    kappa: float
    gamma: float | None = None
    mass: float | None = None
    sigma_G: float | None = None
    hbar: float | None = None

    def __post_init__(self):
        if not (self.kappa > 0.0) or not np.isfinite(self.kappa):
            raise ConfigError(f"kappa must be finite and positive, got {self.kappa!r}")
        dims = (self.gamma, self.mass, self.sigma_G, self.hbar)
        if any(d is not None for d in dims):
            if any(d is None for d in dims):
                raise ConfigError("dimensional parameters must be given all together")
            derived = self.sigma_G**2 / (self.mass * self.hbar * self.gamma)
            if abs(derived - self.kappa) > 1e-12 * abs(self.kappa):
                raise ConfigError(
                    f"dimensional parameters give kappa={derived!r}, "
                    f"inconsistent with kappa={self.kappa!r}"
                )

    @classmethod
    def from_dimensional(cls, gamma: float, mass: float, sigma_G: float, hbar: float = 1.0):
        kappa = sigma_G**2 / (mass * hbar * gamma)
        return cls(kappa=kappa, gamma=gamma, mass=mass, sigma_G=sigma_G, hbar=hbar)


@dataclass(frozen=True)
class MomentumKernel:
    """Collision kernel sampled on a grid.

    Fields
    ------
    grid : SpatialGrid
    gamma : float
        Collision rate (gamma = 0 switches the incoherent physics off).
    sigma_G : float, hbar : float
        Momentum-transfer spread and hbar; both 1 in dimensionless units.
    ghat_samples : ndarray
        Ghat(y) on the grid's centered coordinates.
    rate_samples : ndarray
        F(y) = gamma (1 - Ghat(y)) on the same coordinates.
    """

    grid: SpatialGrid
    gamma: float = 1.0
    sigma_G: float = 1.0
    hbar: float = 1.0
    ghat_samples: np.ndarray = dataclass_field(init=False, repr=False)
    rate_samples: np.ndarray = dataclass_field(init=False, repr=False)

    def __post_init__(self):
        if self.gamma < 0.0 or not np.isfinite(self.gamma):
            raise ConfigError(f"gamma must be non-negative, got {self.gamma!r}")
        if not (self.sigma_G > 0.0) or not (self.hbar > 0.0):
            raise ConfigError("sigma_G and hbar must be positive")
        ghat = self.characteristic(self.grid.positions)
        rate = self.gamma * (1.0 - ghat)
        ghat.flags.writeable = False
        rate.flags.writeable = False
        object.__setattr__(self, "ghat_samples", ghat)
        object.__setattr__(self, "rate_samples", rate)

    def momentum_density(self, q: np.ndarray | float) -> np.ndarray | float:
        """G(q), the normalized Gaussian momentum-transfer distribution."""
        s = self.sigma_G
        return np.exp(-np.asarray(q, dtype=np.float64) ** 2 / (2.0 * s**2)) / np.sqrt(
            2.0 * np.pi * s**2
        )

    def characteristic(self, s: np.ndarray | float) -> np.ndarray | float:
        """Ghat(s) = integral of G(q) exp(iqs/hbar), Gaussian closed form."""
        s = np.asarray(s, dtype=np.float64)
        return np.exp(-(self.sigma_G**2) * s**2 / (2.0 * self.hbar**2))

    def localization_rate(self, s: np.ndarray | float) -> np.ndarray | float:
        """F(s) = gamma (1 - Ghat(s)): even, monotone in |s|, saturates at gamma."""
        return self.gamma * (1.0 - self.characteristic(s))

    def lambda_functional(self, density: np.ndarray) -> np.ndarray:
        """gamma ((density * Ghat)(y) - integral density (density * Ghat)).

        The subtraction makes the flow norm-preserving:
        integral density * Lambda = 0 by construction.
        """
        density = np.asarray(density, dtype=np.float64)
        total = float(self.grid.spacing * np.sum(density))
        if abs(total - 1.0) > DENSITY_NORM_TOL:
            raise NormError(f"density integral {total!r} is not 1")
        conv = periodic_convolve(self.grid, density, self.ghat_samples)
        overlap = float(self.grid.spacing * np.sum(density * conv))
        return self.gamma * (conv - overlap)

    def density_overlap(self, density: np.ndarray) -> float:
        """The smeared self-overlap integral density (density * Ghat), in (0, 1].

        Equals the G-average of |<exp(iqy)>|^2, so the total jump rate of the
        orthogonal unraveling is gamma (1 - density_overlap).
        """
        density = np.asarray(density, dtype=np.float64)
        conv = periodic_convolve(self.grid, density, self.ghat_samples)
        return float(self.grid.spacing * np.sum(density * conv))
