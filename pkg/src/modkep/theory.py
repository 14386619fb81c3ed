"""Periodic-orbit predictions for the scaled spectrum.

Everything here is a function of the interval center eps (unfolded units) and
the strength beta.  The radial frequency, the circular precession index and
the minimal radial winding number fix the orbit structure; the saturation
rigidity and the number variance are floor-weighted sums over the radial
winding number with 1/M^3 amplitudes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import ApproximationWarning, ConvergenceError, ValidationError

_BLOCK = 1 << 18
_GAMMA_VALIDITY = 1.2


def radial_frequency(eps: float, beta: float) -> float:
    """omega_r = (sqrt(2*beta) * 3 * eps)**(1/3)."""
    return float(np.cbrt(math.sqrt(2.0 * beta) * 3.0 * eps))


def gamma_circular(eps: float, beta: float) -> float:
    """Precession index of the circular orbit, (2*beta/(3*eps))**(1/3)."""
    return float(np.cbrt(2.0 * beta / (3.0 * eps)))


@dataclass(frozen=True)
class TheoryPoint:
    """Orbit-structure quantities at one operating point (eps, beta)."""

    eps: float
    beta: float
    omega_r: float
    gamma_cir: float
    mr_min: int

    @property
    def energy_scale(self) -> float:
        """Inverse period of the shortest periodic orbit, omega_r/(2*pi*mr_min)."""
        return self.omega_r / (2.0 * math.pi * self.mr_min)


def theory_point(eps: float, beta: float) -> TheoryPoint:
    if not eps > 0.0 or not beta > 0.0:
        raise ValidationError("eps and beta must be positive")
    g = gamma_circular(eps, beta)
    if g < _GAMMA_VALIDITY:
        warnings.warn(
            f"gamma_cir={g:.4g} < {_GAMMA_VALIDITY}: the gamma >> 1 approximation "
            "is breaking down",
            ApproximationWarning,
            stacklevel=2,
        )
    return TheoryPoint(eps, beta, radial_frequency(eps, beta), g, int(math.floor(g)) + 1)


def jump_energies(beta: float, k_range: tuple[int, int]) -> list[tuple[int, float]]:
    """Centers eps_k = 2*beta/(3*k^3) where the saturation rigidity steps."""
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if k_lo < 2 or k_hi < k_lo:
        raise ValidationError("k range must satisfy 2 <= k_lo <= k_hi")
    return [(k, 2.0 * beta / (3.0 * k**3)) for k in range(k_lo, k_hi + 1)]


@dataclass(frozen=True)
class SumOptions:
    """Truncation and correction controls for the orbit sums."""

    tolerance: float = 1.0e-6
    correction_enabled: bool = False
    m_cut_max: int = 20_000_000

    def __post_init__(self) -> None:
        if not 0.0 < self.tolerance <= 1.0e-2:
            raise ValidationError("tolerance must lie in (0, 1e-2]")
        if self.m_cut_max < 4:
            raise ValidationError("m_cut_max too small")


@dataclass(frozen=True)
class OrbitClass:
    """An irreducible periodic-orbit class with its retracing count."""

    m_r: int
    m_theta: int
    period: float
    amplitude_sq: float
    retracing: int = 1

    def __post_init__(self) -> None:
        if self.m_r < 1 or self.m_theta < 1 or self.retracing < 1:
            raise ValidationError("winding and retracing numbers must be positive")
        if gcd(self.m_r, self.m_theta) != 1:
            raise ValidationError(f"{{{self.m_r},{self.m_theta}}} is not coprime")


def amplitude_sq(tp: TheoryPoint, m_r: int) -> float:
    """Squared amplitude of the cycle, omega_r/(3*eps*m_r)."""
    return tp.omega_r / (3.0 * tp.eps * m_r)


def enumerate_orbits(tp: TheoryPoint, period_max: float) -> list[OrbitClass]:
    """All coprime cycles above the circular bound, with retracings, sorted by period."""
    t_unit = 2.0 * math.pi / tp.omega_r
    if not period_max > tp.mr_min * t_unit:
        raise ValidationError("period_max must exceed the shortest orbit period")
    w_max = int(math.floor(period_max / t_unit))
    orbits = []
    for m_r in range(tp.mr_min, w_max + 1):
        theta_hi = int(math.ceil(m_r / tp.gamma_cir)) - 1  # strict m_r/m_theta > gamma
        for m_theta in range(1, theta_hi + 1):
            if gcd(m_r, m_theta) != 1:
                continue
            a2 = amplitude_sq(tp, m_r)
            for n in range(1, w_max // m_r + 1):
                orbits.append(OrbitClass(m_r, m_theta, n * m_r * t_unit, a2, n))
    orbits.sort(key=lambda o: (o.period, o.m_r, o.m_theta))
    return orbits


def _floor_weights(m: np.ndarray, gamma: float, correction: bool) -> np.ndarray:
    """floor(M/gamma), optionally with the empirical plateau correction added."""
    f = np.floor(m / gamma)
    if correction:
        f = f + np.where(f >= 1.0, (2.0 / 3.0) * (1.0 - 0.25 ** np.maximum(f - 1.0, 0.0)), 0.0)
    return f


def _envelope_cutoff(gamma: float, opts: SumOptions) -> tuple[int, float]:
    """Truncation point and value of the envelope sum  Sum F(M)/M^3.

    The certificate is the analytic tail bound Sum_{M>Mc} (M/gamma)/M^3
    <= 1/(gamma*Mc), plus 1/(3*Mc^2) for the bounded correction term; the sum
    stops once the bound drops below tolerance * partial.
    """
    total = 0.0
    m_lo = 2
    while m_lo <= opts.m_cut_max:
        m_hi = min(m_lo + _BLOCK - 1, opts.m_cut_max)
        m = np.arange(m_lo, m_hi + 1, dtype=np.float64)
        total += float(np.sum(_floor_weights(m, gamma, opts.correction_enabled) / m**3))
        tail = 1.0 / (gamma * m_hi)
        if opts.correction_enabled:
            tail += 1.0 / (3.0 * m_hi * m_hi)
        if total > 0.0 and tail < opts.tolerance * total:
            return m_hi, total
        m_lo = m_hi + 1
    raise ConvergenceError(
        f"orbit sum not converged to tolerance {opts.tolerance} by M={opts.m_cut_max}"
    )


def saturation_sum_factor(gamma: float, opts: SumOptions | None = None) -> float:
    """Sum_{M>=2} F(M)/M^3 under the truncation rule."""
    opts = opts or SumOptions()
    return _envelope_cutoff(gamma, opts)[1]


def delta3_saturation(tp: TheoryPoint, opts: SumOptions | None = None) -> float:
    """Oscillation-averaged saturation rigidity, (sqrt(2*beta)/pi^2) * Sum F(M)/M^3."""
    opts = opts or SumOptions()
    s = saturation_sum_factor(tp.gamma_cir, opts)
    return math.sqrt(2.0 * tp.beta) / math.pi**2 * s


def sigma_inf(tp: TheoryPoint, width: float, opts: SumOptions | None = None) -> float:
    """Saturation number variance at interval width E.

    (4*sqrt(2*beta)/pi^2) * Sum F(M)/M^3 * sin^2(pi*E*M/omega_r), truncated at
    the same M as the envelope sum so the E-average identity holds exactly.
    """
    if not width > 0.0:
        raise ValidationError("width must be positive")
    opts = opts or SumOptions()
    m_cut, _ = _envelope_cutoff(tp.gamma_cir, opts)
    return float(sigma_curve(tp, np.asarray([width]), opts, _m_cut=m_cut)[0])


def sigma_curve(
    tp: TheoryPoint, widths: np.ndarray, opts: SumOptions | None = None, _m_cut: int | None = None
) -> np.ndarray:
    """Vectorized sigma_inf over a grid of interval widths."""
    opts = opts or SumOptions()
    e = np.asarray(widths, dtype=np.float64)
    m_cut = _m_cut if _m_cut is not None else _envelope_cutoff(tp.gamma_cir, opts)[0]
    out = np.zeros_like(e)
    block = max(1, _BLOCK // max(1, e.size))
    m_lo = 2
    while m_lo <= m_cut:
        m_hi = min(m_lo + block - 1, m_cut)
        m = np.arange(m_lo, m_hi + 1, dtype=np.float64)
        w = _floor_weights(m, tp.gamma_cir, opts.correction_enabled) / m**3
        out += np.sin(np.outer(e, m) * (math.pi / tp.omega_r)) ** 2 @ w
        m_lo = m_hi + 1
    return 4.0 * math.sqrt(2.0 * tp.beta) / math.pi**2 * out


def k_inf(tp: TheoryPoint, omega: float, opts: SumOptions | None = None) -> float:
    """Density correlation sum at energy separation omega.

    Sum_{M>=2} (omega_r/(3*eps*M)) * floor(M/gamma) * cos(2*pi*omega*M/omega_r).
    The cosine coefficients do not decay (the series is a distribution: a delta
    spike at omega=0 minus a smooth part), so the partial sum is evaluated up
    to opts.m_cut_max verbatim.
    """
    opts = opts or SumOptions()
    return float(k_inf_curve(tp, np.asarray([omega]), opts)[0])


def k_inf_curve(tp: TheoryPoint, omegas: np.ndarray, opts: SumOptions | None = None) -> np.ndarray:
    opts = opts or SumOptions()
    om = np.asarray(omegas, dtype=np.float64)
    out = np.zeros_like(om)
    block = max(1, _BLOCK // max(1, om.size))
    m_lo = 2
    while m_lo <= opts.m_cut_max:
        m_hi = min(m_lo + block - 1, opts.m_cut_max)
        m = np.arange(m_lo, m_hi + 1, dtype=np.float64)
        w = _floor_weights(m, tp.gamma_cir, False) * tp.omega_r / (3.0 * tp.eps * m)
        out += np.cos(np.outer(om, m) * (2.0 * math.pi / tp.omega_r)) @ w
        m_lo = m_hi + 1
    return out


def k_inf_smooth_reference(tp: TheoryPoint, omegas: np.ndarray) -> np.ndarray:
    """Half-sinc smooth part -sin(omega/E_scale)/(2*pi*omega) of the correlation.

    Matches the undoubled normalization of k_inf; doubling both (time reversal)
    gives the delta-minus-sinc continuum form with a unit delta weight.
    """
    om = np.asarray(omegas, dtype=np.float64)
    ee = tp.energy_scale
    with np.errstate(invalid="ignore", divide="ignore"):
        ref = -np.sin(om / ee) / (2.0 * math.pi * om)
    return np.where(om == 0.0, -1.0 / (2.0 * math.pi * ee), ref)


def k_inf_delta_precursor(tp: TheoryPoint, omegas: np.ndarray, opts: SumOptions) -> np.ndarray:
    """Finite-cutoff image of the delta term, sin(omega*T_cut)/(2*pi*omega)."""
    om = np.asarray(omegas, dtype=np.float64)
    t_cut = 2.0 * math.pi * opts.m_cut_max / tp.omega_r
    with np.errstate(invalid="ignore", divide="ignore"):
        pre = np.sin(om * t_cut) / (2.0 * math.pi * om)
    return np.where(om == 0.0, t_cut / (2.0 * math.pi), pre)


_REGIMES = ("uncorrelated", "nearly_rigid", "rigid", "oscillatory")
_SHORT_ORBIT_SPAN = 3  # oscillatory regime keeps M_r from mr_min to mr_min+3


def sigma_derivative_regime(regime: str, tp: TheoryPoint, width: float) -> float:
    """Regime label value for dSigma/dE: 1, 1/E, 0, or the short-orbit sum.

    Proportionality constants follow the regime table; the oscillatory entry is
    4E * Sum_short floor(M/gamma) * (A_M^2/T_M) * sin(2*pi*E*M/omega_r),
    restricted to the few shortest radial windings.
    """
    if regime not in _REGIMES:
        raise ValidationError(f"unknown regime {regime!r}; expected one of {_REGIMES}")
    if regime == "uncorrelated":
        return 1.0
    if regime == "nearly_rigid":
        return 1.0 / width
    if regime == "rigid":
        return 0.0
    m = np.arange(2, tp.mr_min + _SHORT_ORBIT_SPAN + 1, dtype=np.float64)
    f = _floor_weights(m, tp.gamma_cir, False)
    a2_over_t = tp.omega_r**2 / (6.0 * math.pi * tp.eps * m * m)
    return float(4.0 * width * np.sum(f * a2_over_t * np.sin(2.0 * math.pi * width * m / tp.omega_r)))


# ---------------------------------------------------------------------------
# orbit amplitudes from the general two-frequency formula

def _scaled_frequencies(i_r: float, i_theta: float, beta: float):
    """Frequencies and their action derivatives for the unit-density Hamiltonian.

    The scaled Hamiltonian is (2*I_r*s + I_theta^2)**1.5/(3*s) with
    s = sqrt(2*beta); all derivatives below are its exact partials.
    """
    s = math.sqrt(2.0 * beta)
    u = 2.0 * i_r * s + i_theta * i_theta
    ru = math.sqrt(u)
    w1 = ru                       # d eps / d I_r
    w2 = ru * i_theta / s         # d eps / d I_theta
    dw1_d1 = s / ru
    dw1_d2 = i_theta / ru
    dw2_d1 = i_theta / ru
    dw2_d2 = (i_theta * i_theta + u) / (s * ru)
    return w1, w2, dw1_d1, dw1_d2, dw2_d1, dw2_d2


def orbit_actions(tp: TheoryPoint, m_r: int, m_theta: int) -> tuple[float, float]:
    """Action-variable point of the cycle {m_r, m_theta} at this energy."""
    gamma = m_r / m_theta
    if gamma <= tp.gamma_cir:
        raise ValidationError(
            f"cycle {{{m_r},{m_theta}}} not admissible: gamma={gamma:.6g} "
            f"<= gamma_cir={tp.gamma_cir:.6g}"
        )
    s = math.sqrt(2.0 * tp.beta)
    i_theta = s / gamma
    u = tp.omega_r**2  # omega_r = sqrt(u) for the scaled Hamiltonian
    i_r = (u - i_theta * i_theta) / (2.0 * s)
    return i_r, i_theta


def amplitude_sq_general(tp: TheoryPoint, m_r: int, m_theta: int) -> float:
    """Squared amplitude via the second-derivative determinant route.

    Independent of the closed form omega_r/(3*eps*m_r): evaluates
    2*pi / (T_M * |omega x second-derivative bracket|) from the coded partials
    of the scaled Hamiltonian at the orbit's action point.
    """
    i_r, i_theta = orbit_actions(tp, m_r, m_theta)
    w1, w2, dw1_d1, dw1_d2, dw2_d1, dw2_d2 = _scaled_frequencies(i_r, i_theta, tp.beta)
    period = 2.0 * math.pi * m_r / w1
    bracket = -(w1 * w1 * dw2_d2 + w2 * w2 * dw1_d1) + w1 * w2 * (dw1_d2 + dw2_d1)
    return 2.0 * math.pi / (period * abs(bracket))
