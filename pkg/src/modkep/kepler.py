"""Classical mechanics of the potential V(r) = -alpha/r + beta/r^2.

Closed forms only: trajectory geometry, action-angle variables, frequencies,
circular orbits, and the rational-precession condition that selects periodic
orbits.  Units keep m and alpha explicit; the scaled modules use the
dimensionless strength beta_model = m*beta_raw/hbar^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class PotentialParams:
    alpha: float
    beta_raw: float
    m: float

    def __post_init__(self) -> None:
        if not self.alpha > 0.0 or not self.m > 0.0:
            raise ValidationError("alpha and m must be positive")
        if self.beta_raw < 0.0:
            raise ValidationError("beta_raw must be nonnegative")


@dataclass(frozen=True)
class OrbitGeometry:
    """Trajectory r(theta) = p/(1 + e*cos(gamma*(theta - theta0)))."""

    p: float
    e: float
    gamma: float
    theta0: float = 0.0

    def __post_init__(self) -> None:
        if not self.p > 0.0:
            raise ValidationError("semi-latus parameter must be positive")
        if self.e < 0.0:
            raise ValidationError("eccentricity must be nonnegative")
        if self.gamma < 1.0:
            raise ValidationError("precession index must be >= 1")


@dataclass(frozen=True)
class ActionPair:
    i_r: float
    i_theta: float

    def __post_init__(self) -> None:
        if self.i_r < 0.0:
            raise ValidationError("radial action must be nonnegative")
        if not self.i_theta > 0.0:
            raise ValidationError("angular action must be positive")


def _check_bound(energy: float) -> None:
    if not energy < 0.0:
        raise ValidationError(f"bound motion requires energy < 0, got {energy}")


def precession_index(pp: PotentialParams, angular_momentum: float) -> float:
    """gamma(L) = sqrt(1 + 2*m*beta/L^2)."""
    if not angular_momentum > 0.0:
        raise ValidationError("angular momentum must be positive")
    return math.sqrt(1.0 + 2.0 * pp.m * pp.beta_raw / angular_momentum**2)


def ebar(pp: PotentialParams) -> float:
    """Binding scale alpha^2/(4*beta); infinite in the pure Kepler limit."""
    if pp.beta_raw == 0.0:
        return math.inf
    return pp.alpha**2 / (4.0 * pp.beta_raw)


def orbit_geometry(pp: PotentialParams, energy: float, angular_momentum: float) -> OrbitGeometry:
    _check_bound(energy)
    if not angular_momentum > 0.0:
        raise ValidationError("angular momentum must be positive")
    q = pp.beta_raw + angular_momentum**2 / (2.0 * pp.m)
    e_sq = 1.0 + 4.0 * energy * q / pp.alpha**2
    if e_sq < 0.0:
        e_sq = 0.0  # rounding just below the circular orbit
    e = math.sqrt(e_sq)
    if e >= 1.0:
        raise ValidationError(f"eccentricity {e} >= 1: trajectory unbound")
    return OrbitGeometry(2.0 * q / pp.alpha, e, precession_index(pp, angular_momentum))


def trajectory_radius(g: OrbitGeometry, theta: float) -> float:
    denom = 1.0 + g.e * math.cos(g.gamma * (theta - g.theta0))
    if denom <= 0.0:
        raise ValidationError("nonpositive denominator: unbound trajectory branch")
    return g.p / denom


def actions_and_energy(pp: PotentialParams, energy: float, angular_momentum: float) -> ActionPair:
    """Action variables of the bound orbit; rejects I_r < 0 (no turning points)."""
    _check_bound(energy)
    if not angular_momentum > 0.0:
        raise ValidationError("angular momentum must be positive")
    i_r = (
        -math.sqrt(angular_momentum**2 + 2.0 * pp.m * pp.beta_raw)
        + pp.alpha * math.sqrt(pp.m / (2.0 * abs(energy)))
    )
    if i_r < 0.0:
        raise ValidationError(f"radial action {i_r} < 0: no classical turning points")
    return ActionPair(i_r, angular_momentum)


def energy_from_actions(pp: PotentialParams, actions: ActionPair) -> float:
    root = math.sqrt(actions.i_theta**2 + 2.0 * pp.m * pp.beta_raw)
    return -pp.m * pp.alpha**2 / (2.0 * (actions.i_r + root) ** 2)


def frequencies(pp: PotentialParams, energy: float, angular_momentum: float) -> tuple[float, float]:
    """(omega_r, omega_theta); omega_r depends on the energy only."""
    _check_bound(energy)
    omega_r = math.sqrt((2.0 * abs(energy)) ** 3 / (pp.m * pp.alpha**2))
    return omega_r, omega_r / precession_index(pp, angular_momentum)


def circular_orbit(pp: PotentialParams, energy: float) -> tuple[float, float, float]:
    """(L_cir, gamma_cir, T_cir) of the circular orbit at this energy."""
    _check_bound(energy)
    a2 = pp.alpha**2
    depth = 4.0 * pp.beta_raw * abs(energy) / a2  # |energy|/ebar
    if depth >= 1.0:
        raise ValidationError("|energy| >= ebar: no circular orbit")
    l_sq = pp.m * a2 / (2.0 * abs(energy)) - 2.0 * pp.m * pp.beta_raw
    l_cir = math.sqrt(l_sq)
    gamma_cir = 1.0 / math.sqrt(1.0 - depth)
    omega_r, _ = frequencies(pp, energy, l_cir)
    return l_cir, gamma_cir, 2.0 * math.pi / omega_r * gamma_cir


def periodic_condition(
    pp: PotentialParams, energy: float, m_r: int, m_theta: int
) -> float | None:
    """Angular momentum closing the {m_r, m_theta} cycle, or None if inadmissible.

    In the resonant Kepler limit (beta_raw=0, m_r=m_theta=1) every L up to the
    circular bound closes the orbit; the circular L is returned as the
    representative.
    """
    _check_bound(energy)
    if m_r < 1 or m_theta < 1 or math.gcd(m_r, m_theta) != 1:
        raise ValidationError("winding numbers must be positive and coprime")
    if m_r < m_theta:
        raise ValidationError("require m_r/m_theta >= 1")
    gamma_t = m_r / m_theta
    if gamma_t == 1.0:
        if pp.beta_raw != 0.0:
            return None  # gamma(L) > 1 strictly whenever beta > 0
        l_cir, _, _ = circular_orbit(pp, energy)
        return l_cir
    if pp.beta_raw == 0.0:
        return None  # pure Kepler precesses with gamma = 1 only
    _, gamma_cir, _ = circular_orbit(pp, energy)
    if gamma_t < gamma_cir:
        return None
    return math.sqrt(2.0 * pp.m * pp.beta_raw / (gamma_t**2 - 1.0))


def orbit_period(pp: PotentialParams, energy: float, m_r: int) -> float:
    """Period of a periodic orbit with radial winding m_r at this energy."""
    omega_r = math.sqrt((2.0 * abs(energy)) ** 3 / (pp.m * pp.alpha**2))
    return 2.0 * math.pi * m_r / omega_r
