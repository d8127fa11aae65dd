"""Gas <-> power conversion curves.

A conversion plant burns gas to generate power (positive flow above the
switching window) or converts surplus power to gas (negative flow below it).
Both regimes are linear; inside the window [-kappa, kappa] the kink is
smoothed by the unique cubic Hermite interpolant matching value and slope of
both branches, so the curve is C1 on the whole line and exactly linear
outside the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MW_PER_UNIT = 100.0   # power-side per-unit base in MW


@dataclass(frozen=True)
class ConversionCurve:
    e_power_to_gas: float   # MW s / m^3, slope for strongly negative flow
    e_gas_to_power: float   # MW s / m^3, slope for strongly positive flow
    kappa: float            # m^3/s

    def __post_init__(self):
        if self.e_power_to_gas <= 0 or self.e_gas_to_power <= 0 or self.kappa <= 0:
            raise ValueError("conversion constants must be positive")
        e1, e2, k = self.e_power_to_gas, self.e_gas_to_power, self.kappa
        # matching value and slope of both linear branches at +-kappa
        # collapses the cubic coefficient to zero
        object.__setattr__(self, "_coeffs",
                           ((e2 - e1) * k / 4.0, (e1 + e2) / 2.0,
                            (e2 - e1) / (4.0 * k), 0.0))

    @property
    def smoothing_coefficients(self) -> tuple:
        """(c0, c1, c2, c3) of the interpolant sum(c_i q^i)."""
        return self._coeffs

    @staticmethod
    def from_arc(arc) -> "ConversionCurve":
        return ConversionCurve(arc.e_power_to_gas, arc.e_gas_to_power, arc.kappa)


def conversion_power(q, curve: ConversionCurve):
    """Power in MW produced (or, if negative, consumed) at gas flow q."""
    q = np.asarray(q, dtype=float)
    c0, c1, c2, c3 = curve.smoothing_coefficients
    smoothed = c0 + q * (c1 + q * (c2 + q * c3))
    return np.where(
        q <= -curve.kappa, curve.e_power_to_gas * q,
        np.where(q >= curve.kappa, curve.e_gas_to_power * q, smoothed))


def conversion_power_derivative(q, curve: ConversionCurve):
    q = np.asarray(q, dtype=float)
    c0, c1, c2, c3 = curve.smoothing_coefficients
    dsmoothed = c1 + q * (2.0 * c2 + q * 3.0 * c3)
    return np.where(
        q <= -curve.kappa, curve.e_power_to_gas,
        np.where(q >= curve.kappa, curve.e_gas_to_power, dsmoothed))


def coupling_residual(p_per_unit, q, curve: ConversionCurve):
    """Links the slack node's solved real power (per unit) to the gas flow
    withdrawn through the plant: zero iff P equals the conversion curve."""
    return p_per_unit - conversion_power(q, curve) / MW_PER_UNIT
