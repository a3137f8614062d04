"""Gaussian packets in position, momentum, coordinate time, and energy.

All amplitudes use natural units (hbar = 1).  A spatial packet is a minimum
uncertainty Gaussian released at tau = 0 with center x0, mean momentum p0 and
width sigma_x; the free evolution in tau is carried analytically through the
complex dispersion factor f = 1 + i tau / (m sigma_x^2).  The coordinate-time
packet is the mirror object: a Gaussian in t with mean energy E0, width
sigma_t, dispersion factor 1 - i tau / (m sigma_t^2), and center drifting as
t0 + (E0/m) tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfc

__all__ = [
    "SpacePacket",
    "TimePacket",
    "space_amplitude",
    "space_amplitude_dx",
    "space_momentum_amplitude",
    "time_amplitude",
    "time_amplitude_dt",
    "time_amplitude_dt2",
    "max_entropy_time_packet",
    "NegativeEnergyReport",
    "negative_energy_fraction",
]


def _require_finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SpacePacket:
    """Minimum-uncertainty Gaussian in position.

    Attributes
    ----------
    x0 : packet center at tau = 0 (a detector at the origin sits a distance
         d = -x0 to the right of the center when x0 < 0)
    p0 : mean momentum
    sigma_x : position width (momentum width is 1/sigma_x)
    mass : particle mass
    """

    x0: float
    p0: float
    sigma_x: float
    mass: float = 1.0

    def __post_init__(self):
        for name in ("x0", "p0", "sigma_x", "mass"):
            _require_finite(name, getattr(self, name))
        if self.sigma_x <= 0:
            raise ValueError(f"sigma_x must be positive, got {self.sigma_x}")
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @property
    def sigma_p(self) -> float:
        return 1.0 / self.sigma_x

    @property
    def v0(self) -> float:
        return self.p0 / self.mass

    @property
    def d(self) -> float:
        """Distance from the packet center to the origin (positive if x0 < 0)."""
        return -self.x0

    def dispersion_factor(self, tau) -> complex:
        return 1.0 + 1j * np.asarray(tau) / (self.mass * self.sigma_x**2)


@dataclass(frozen=True)
class TimePacket:
    """Gaussian packet in coordinate time.

    The mirror of :class:`SpacePacket` under x -> t, p0 -> E0, sigma_x ->
    sigma_t, with the sign of the dispersion term flipped and the center
    drifting at speed E0/mass in lab time tau.
    """

    t0: float
    E0: float
    sigma_t: float
    mass: float = 1.0

    def __post_init__(self):
        for name in ("t0", "E0", "sigma_t", "mass"):
            _require_finite(name, getattr(self, name))
        if self.sigma_t <= 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @property
    def sigma_E(self) -> float:
        return 1.0 / self.sigma_t

    def dispersion_factor(self, tau) -> complex:
        return 1.0 - 1j * np.asarray(tau) / (self.mass * self.sigma_t**2)


def space_amplitude(pkt: SpacePacket, x, tau=0.0):
    """Freely evolved spatial amplitude phi_tau(x).

    phi_tau(x) = (pi sigma_x^2)^(-1/4) f^(-1/2)
                 exp(i p0 x - (x - x0 - v0 tau)^2 / (2 sigma_x^2 f)
                     - i p0^2 tau / (2 m))
    with f = 1 + i tau / (m sigma_x^2).
    """
    x = np.asarray(x, dtype=float)
    _require_finite("x", x)
    _require_finite("tau", tau)
    f = pkt.dispersion_factor(tau)
    norm = (math.pi * pkt.sigma_x**2) ** -0.25 / np.sqrt(f)
    arg = (
        1j * pkt.p0 * x
        - (x - pkt.x0 - pkt.v0 * tau) ** 2 / (2.0 * pkt.sigma_x**2 * f)
        - 1j * pkt.p0**2 * tau / (2.0 * pkt.mass)
    )
    return norm * np.exp(arg)


def space_amplitude_dx(pkt: SpacePacket, x, tau=0.0):
    """Analytic d/dx of :func:`space_amplitude` (for probability currents)."""
    x = np.asarray(x, dtype=float)
    f = pkt.dispersion_factor(tau)
    logderiv = 1j * pkt.p0 - (x - pkt.x0 - pkt.v0 * tau) / (pkt.sigma_x**2 * f)
    return logderiv * space_amplitude(pkt, x, tau)


def space_momentum_amplitude(pkt: SpacePacket, p, tau=0.0):
    """Momentum-space amplitude phi_tau(p); exact Fourier transform.

    phi_tau(p) = (pi sigma_p^2)^(-1/4)
                 exp(-i p x0 - (p - p0)^2 / (2 sigma_p^2) - i p^2 tau / (2 m))
    The only tau dependence is the free phase; |phi_tau(p)| is stationary.
    """
    p = np.asarray(p, dtype=float)
    _require_finite("p", p)
    _require_finite("tau", tau)
    sp = pkt.sigma_p
    arg = (
        -1j * p * pkt.x0
        - (p - pkt.p0) ** 2 / (2.0 * sp**2)
        - 1j * p**2 * np.asarray(tau) / (2.0 * pkt.mass)
    )
    return (math.pi * sp**2) ** -0.25 * np.exp(arg)


def time_amplitude(pkt: TimePacket, t, tau=0.0):
    """Coordinate-time amplitude phit_tau(t).

    phit_tau(t) = (pi sigma_t^2)^(-1/4) f^(-1/2)
                  exp(-i E0 t - (t - t0 - (E0/m) tau)^2 / (2 sigma_t^2 f)
                      + i E0^2 tau / (2 m))
    with f = 1 - i tau / (m sigma_t^2).  Equals the complex conjugate of the
    spatial amplitude under (x0, p0, sigma_x) -> (t0, E0, sigma_t).
    """
    t = np.asarray(t, dtype=float)
    _require_finite("t", t)
    _require_finite("tau", tau)
    f = pkt.dispersion_factor(tau)
    norm = (math.pi * pkt.sigma_t**2) ** -0.25 / np.sqrt(f)
    arg = (
        -1j * pkt.E0 * t
        - (t - pkt.t0 - (pkt.E0 / pkt.mass) * tau) ** 2 / (2.0 * pkt.sigma_t**2 * f)
        + 1j * pkt.E0**2 * tau / (2.0 * pkt.mass)
    )
    return norm * np.exp(arg)


def _time_logderiv(pkt: TimePacket, t, tau):
    f = pkt.dispersion_factor(tau)
    return -1j * pkt.E0 - (np.asarray(t, dtype=float) - pkt.t0
                           - (pkt.E0 / pkt.mass) * tau) / (pkt.sigma_t**2 * f)


def time_amplitude_dt(pkt: TimePacket, t, tau=0.0):
    """Analytic d/dt of :func:`time_amplitude`."""
    return _time_logderiv(pkt, t, tau) * time_amplitude(pkt, t, tau)


def time_amplitude_dt2(pkt: TimePacket, t, tau=0.0):
    """Analytic d^2/dt^2 of :func:`time_amplitude`."""
    g = _time_logderiv(pkt, t, tau)
    f = pkt.dispersion_factor(tau)
    # d/dt of the log-derivative is the constant -1/(sigma_t^2 f).
    return (g**2 - 1.0 / (pkt.sigma_t**2 * f)) * time_amplitude(pkt, t, tau)


def max_entropy_time_packet(pkt: SpacePacket) -> TimePacket:
    """Time packet matched to a spatial packet.

    The Gaussian is the maximum-entropy profile for fixed mean energy and
    energy variance.  Matching the momentum widths gives sigma_E = sigma_p,
    i.e. sigma_t = sigma_x, with relativistic mean energy
    E0 = sqrt(mass^2 + p0^2) and t0 = 0 (the overall phase is carried by the
    spatial part).
    """
    return TimePacket(t0=0.0,
                      E0=math.hypot(pkt.mass, pkt.p0),
                      sigma_t=pkt.sigma_x,
                      mass=pkt.mass)


class NegativeEnergyReport(NamedTuple):
    sigma_distance: float   # z = E0 / sigma_E
    tail_mass: float        # Gaussian mass at E < 0


def negative_energy_fraction(pkt: TimePacket) -> NegativeEnergyReport:
    """Mass of the energy-space Gaussian lying below E = 0.

    The energy amplitude is a Gaussian centered at E0 with width
    sigma_E = 1/sigma_t, so the negative-energy fraction is
    erfc(z / sqrt(2)) / 2 with z = E0 / sigma_E.
    """
    z = pkt.E0 / pkt.sigma_E
    return NegativeEnergyReport(sigma_distance=z,
                                tail_mass=0.5 * erfc(z / math.sqrt(2.0)))
