"""Semiclassical model spectrum of the modified Kepler problem and its unfolding.

The model levels are eps = 2*p*sqrt(2*beta) + l**2 over nonnegative integer
quantum numbers (p, l), restricted to a window well below 2*beta.  Unfolding
maps a raw level x to x**1.5 / (3*sqrt(2*beta)), which flattens the mean
staircase to unit density.  The bound-state closed form of the unscaled
problem is also provided as a validation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

DEFAULT_WINDOW_FRACTION = 0.25


@dataclass(frozen=True)
class SpectrumParams:
    """Window definition for the model spectrum.

    eps_max must stay below window_fraction * 2 * beta so the quadratic
    expansion behind the model spectrum remains controlled.
    """

    beta: float
    eps_max: float
    window_fraction: float = DEFAULT_WINDOW_FRACTION

    def __post_init__(self) -> None:
        if not self.beta > 0.0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if not self.eps_max > 0.0:
            raise ValidationError(f"eps_max must be positive, got {self.eps_max}")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValidationError(
                f"window_fraction must lie in (0, 1], got {self.window_fraction}"
            )
        if self.eps_max > self.window_fraction * 2.0 * self.beta:
            raise ValidationError(
                f"eps_max={self.eps_max} exceeds window_fraction*2*beta="
                f"{self.window_fraction * 2.0 * self.beta} (semiclassical window violated)"
            )


@dataclass(frozen=True)
class ExactSpectrumParams:
    """Parameters of the unscaled bound-state closed form."""

    alpha: float
    beta_raw: float
    m: float
    hbar: float
    p_max: int
    l_max: int

    def __post_init__(self) -> None:
        for name in ("alpha", "beta_raw", "m", "hbar"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive")
        if self.p_max < 1 or self.l_max < 1:
            raise ValidationError("p_max and l_max must be positive integers")
        if self.m * self.beta_raw / self.hbar**2 < 1.0e4:
            raise ValidationError(
                "m*beta_raw/hbar^2 must be >= 1e4 for the semiclassical regime, "
                f"got {self.m * self.beta_raw / self.hbar ** 2:g}"
            )

    @property
    def beta_model(self) -> float:
        """Dimensionless strength used by the scaled modules."""
        return self.m * self.beta_raw / self.hbar**2


@dataclass(frozen=True)
class Level:
    """One model level with its quantum numbers."""

    value: float
    p: int
    l: int


@dataclass(frozen=True)
class Spectrum:
    """Sorted raw levels with their quantum numbers."""

    params: SpectrumParams | ExactSpectrumParams
    p: np.ndarray
    l: np.ndarray
    value: np.ndarray

    def __post_init__(self) -> None:
        if not (self.p.shape == self.l.shape == self.value.shape):
            raise ValidationError("p, l, value arrays must have equal shapes")
        if self.value.size > 1 and np.any(np.diff(self.value) < 0.0):
            raise ValidationError("levels must be sorted ascending")
        for arr in (self.p, self.l, self.value):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return int(self.value.size)

    def level(self, i: int) -> Level:
        return Level(float(self.value[i]), int(self.p[i]), int(self.l[i]))


@dataclass(frozen=True)
class UnfoldedSpectrum:
    """Levels rescaled to unit mean density.

    ``window`` is the covered unfolded range (set by :func:`unfold`); synthetic
    spectra built directly in tests may leave it unset, which disables the
    interval-coverage checks.
    """

    beta: float
    levels: np.ndarray
    window: tuple[float, float] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.levels.size > 1 and np.any(np.diff(self.levels) < 0.0):
            raise ValidationError("unfolded levels must be sorted ascending")
        self.levels.flags.writeable = False

    def __len__(self) -> int:
        return int(self.levels.size)


def raw_energy(beta: float, unfolded: float) -> float:
    """Inverse of the unfolding map: the raw energy whose mean count is `unfolded`."""
    x = 3.0 * math.sqrt(2.0 * beta) * unfolded
    return float(np.cbrt(x * x))


def mean_staircase(beta: float, eps) -> np.ndarray:
    """Smooth cumulative level count of the model spectrum at raw energy eps."""
    return np.asarray(eps, dtype=np.float64) ** 1.5 / (3.0 * math.sqrt(2.0 * beta))


def model_level_values(params: SpectrumParams) -> np.ndarray:
    """Sorted raw model levels, values only.

    Fast path used by the ensemble runners, which never need the quantum
    numbers.  Produces exactly the same sorted values as
    :func:`generate_model_spectrum`.
    """
    s = math.sqrt(2.0 * params.beta)
    chunks = []
    for p, base, l_lo, l_hi in _admissible_rows(params.eps_max, s):
        l = np.arange(l_lo, l_hi + 1, dtype=np.float64)
        chunks.append(base + l * l)
    if not chunks:
        return np.empty(0, dtype=np.float64)
    values = np.concatenate(chunks)
    values.sort(kind="stable")
    return values


def generate_model_spectrum(params: SpectrumParams) -> Spectrum:
    """Enumerate every admissible (p, l) pair with 0 < 2p*sqrt(2beta)+l^2 <= eps_max."""
    s = math.sqrt(2.0 * params.beta)
    vs, ps, ls = [], [], []
    for p, base, l_lo, l_hi in _admissible_rows(params.eps_max, s):
        l = np.arange(l_lo, l_hi + 1, dtype=np.int64)
        vs.append(base + l.astype(np.float64) ** 2)
        ls.append(l)
        ps.append(np.full(l.size, p, dtype=np.int64))
    if not vs:
        empty_i = np.empty(0, dtype=np.int64)
        return Spectrum(params, empty_i, empty_i.copy(), np.empty(0, dtype=np.float64))
    value = np.concatenate(vs)
    p_arr = np.concatenate(ps)
    l_arr = np.concatenate(ls)
    # stable sort on value keeps ties in (p, l) enumeration order
    order = np.argsort(value, kind="stable")
    return Spectrum(params, p_arr[order], l_arr[order], value[order])


def _admissible_rows(eps_max: float, s: float):
    """Yield (p, base, l_lo, l_hi) rows of the quantum-number quarter plane.

    sqrt(2*beta) is computed once by the caller so that equal values tie
    deterministically.  The l bound is nudged so the computed value itself
    (base + l^2 in double precision) respects the window.
    """
    p_max = int(math.floor(eps_max / (2.0 * s)))
    for p in range(p_max + 1):
        base = 2.0 * p * s
        rem = eps_max - base
        if rem < 0.0:
            break
        l_hi = int(math.floor(math.sqrt(rem)))
        while base + float(l_hi + 1) ** 2 <= eps_max:
            l_hi += 1
        l_lo = 1 if p == 0 else 0
        while l_hi >= l_lo and base + float(l_hi) ** 2 > eps_max:
            l_hi -= 1
        if l_hi >= l_lo:
            yield p, base, l_lo, l_hi


def unfold(s: Spectrum) -> UnfoldedSpectrum:
    """Map each raw level x to x**1.5/(3*sqrt(2*beta)); order is preserved."""
    if not isinstance(s.params, SpectrumParams):
        raise ValidationError("unfold applies to the model spectrum only")
    beta = s.params.beta
    levels = unfold_values(beta, s.value)
    hi = float(mean_staircase(beta, s.params.eps_max))
    return UnfoldedSpectrum(beta, levels, window=(0.0, hi))


def unfold_values(beta: float, values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) ** 1.5 / (3.0 * math.sqrt(2.0 * beta))


def staircase(u: UnfoldedSpectrum, x: float) -> int:
    """Number of unfolded levels <= x (a level exactly at x is counted)."""
    return int(np.searchsorted(u.levels, x, side="right"))


def exact_level(p: int, l: int, params: ExactSpectrumParams) -> float:
    """Bound-state energy, principal closed form."""
    a, b, m, hb = params.alpha, params.beta_raw, params.m, params.hbar
    root = math.sqrt((2 * l + 1) ** 2 + 2.0 * m * b / hb**2)
    return -2.0 * m * a * a / (hb**2 * (2 * p + 1 + root) ** 2)


def exact_level_large_qn(p: int, l: int, params: ExactSpectrumParams) -> float:
    """Bound-state energy in the large-quantum-number form used for generation."""
    a, b, m, hb = params.alpha, params.beta_raw, params.m, params.hbar
    root = math.sqrt(l * l + 2.0 * m * b / hb**2)
    return -m * a * a / (2.0 * hb**2 * (p + root) ** 2)


def ebar(params: ExactSpectrumParams) -> float:
    """Depth scale alpha^2/(4*beta_raw); all bound levels lie in (-ebar, 0)."""
    return params.alpha**2 / (4.0 * params.beta_raw)


def generate_exact_spectrum(params: ExactSpectrumParams) -> Spectrum:
    """All levels of the large-quantum-number closed form on the (p, l) grid."""
    p = np.repeat(np.arange(params.p_max + 1, dtype=np.int64), params.l_max + 1)
    l = np.tile(np.arange(params.l_max + 1, dtype=np.int64), params.p_max + 1)
    c = 2.0 * params.m * params.beta_raw / params.hbar**2
    root = np.sqrt(l.astype(np.float64) ** 2 + c)
    value = -params.m * params.alpha**2 / (2.0 * params.hbar**2 * (p + root) ** 2)
    order = np.argsort(value, kind="stable")
    return Spectrum(params, p[order], l[order], value[order])


def write_spectrum_csv(
    spec: Spectrum, path: str | Path, unfolded: np.ndarray | None = None
) -> None:
    """Export levels as CSV, 17 significant digits for bit-faithful round-trips."""
    lines = []
    if unfolded is None:
        lines.append("p,l,value")
        for p, l, v in zip(spec.p, spec.l, spec.value):
            lines.append(f"{p},{l},{v:.17g}")
    else:
        if unfolded.shape != spec.value.shape:
            raise ValidationError("unfolded column length must match the spectrum")
        lines.append("p,l,value,unfolded")
        for p, l, v, w in zip(spec.p, spec.l, spec.value, unfolded):
            lines.append(f"{p},{l},{v:.17g},{w:.17g}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
