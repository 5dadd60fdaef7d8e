"""Ideal-gas thermodynamics and transport coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GasModel:
    """Calorically perfect gas with constant viscosity and Prandtl number.

    Heat conductivity is derived as lam = mu * cp / Pr.  All methods accept
    scalars or arrays and broadcast.
    """

    gamma: float = 1.4
    cv: float = 1.0
    mu: float = 0.0
    Pr: float = 0.75

    @property
    def cp(self) -> float:
        return self.gamma * self.cv

    @property
    def R(self) -> float:
        return (self.gamma - 1.0) * self.cv

    @property
    def lam(self) -> float:
        if self.mu == 0.0:
            return 0.0
        return self.mu * self.cp / self.Pr

    def internal_energy(self, rho, p):
        """Specific internal energy e(rho, p) = p / ((gamma-1) rho)."""
        return p / ((self.gamma - 1.0) * np.asarray(rho))

    def rho_e(self, p):
        """Internal-energy density as a function of pressure (rho-independent)."""
        return np.asarray(p) / (self.gamma - 1.0)

    def drho_e_dp(self, p):
        """Derivative of rho*e with respect to p (constant for ideal gas)."""
        return np.full_like(np.asarray(p, dtype=float), 1.0 / (self.gamma - 1.0))

    def pressure(self, rho, rho_e):
        """p from internal-energy density."""
        return (self.gamma - 1.0) * np.asarray(rho_e)

    def temperature(self, rho, p):
        return np.asarray(p) / (self.R * np.asarray(rho))

    def sound_speed(self, rho, p):
        return np.sqrt(self.gamma * np.asarray(p) / np.asarray(rho))

    def enthalpy(self, rho, p):
        """Specific enthalpy h = e + p/rho."""
        return self.internal_energy(rho, p) + np.asarray(p) / np.asarray(rho)

    def total_energy(self, rho, vx, vy, p):
        """rho E = rho e + rho k."""
        rho = np.asarray(rho)
        return self.rho_e(p) + 0.5 * rho * (np.asarray(vx) ** 2 + np.asarray(vy) ** 2)

    def pressure_from_conserved(self, rho, mx, my, rho_E):
        rho = np.asarray(rho)
        k = 0.5 * (np.asarray(mx) ** 2 + np.asarray(my) ** 2) / rho
        return (self.gamma - 1.0) * (np.asarray(rho_E) - k)
