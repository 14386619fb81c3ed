"""Fluctuation measures on unfolded spectra and the beta-ensemble runners.

The rigidity statistic is evaluated in closed form from the level positions:
the staircase is piecewise constant, so the three integrals of the
least-squares residual are finite sums over the segments between levels.  No
quadrature grid is involved anywhere in the measured statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .spectrum import SpectrumParams, UnfoldedSpectrum, model_level_values, raw_energy, unfold_values
from .theory import radial_frequency

_CDF_BINS = 200_000  # KS accumulation grid; bias <= 1/_CDF_BINS


@dataclass(frozen=True)
class IntervalSpec:
    """Energy interval [center - width/2, center + width/2] in unfolded units."""

    center: float
    width: float

    def __post_init__(self) -> None:
        if not self.width > 0.0:
            raise ValidationError(f"width must be positive, got {self.width}")
        if self.width > 0.2 * self.center:
            raise ValidationError(
                f"width={self.width} violates width <= 0.2*center (center={self.center})"
            )

    @property
    def lo(self) -> float:
        return self.center - 0.5 * self.width

    @property
    def hi(self) -> float:
        return self.center + 0.5 * self.width


@dataclass(frozen=True)
class EnsembleConfig:
    """Equally spaced beta ensemble around a central value."""

    beta_central: float
    member_count: int = 100
    spread: float = 5.0e-3
    seed: int = 0  # provenance only; the ensemble itself is deterministic

    def __post_init__(self) -> None:
        if not self.beta_central > 0.0:
            raise ValidationError("beta_central must be positive")
        if self.member_count < 2:
            raise ValidationError("member_count must be >= 2")
        if not 0.0 < self.spread < 0.05:
            raise ValidationError(f"spread must lie in (0, 0.05), got {self.spread}")


@dataclass(frozen=True)
class StatCurve:
    """A sampled curve with optional per-point ensemble standard error."""

    x: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.x.shape != self.mean.shape:
            raise ValidationError("x and mean must have equal lengths")
        if self.stderr is not None and self.stderr.shape != self.x.shape:
            raise ValidationError("stderr length must match x")
        if self.x.size > 1 and np.any(np.diff(self.x) <= 0.0):
            raise ValidationError("abscissa must be strictly increasing")


@dataclass(frozen=True)
class SpacingHistogram:
    bin_edges: np.ndarray
    density: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        if self.bin_edges.size != self.density.size + 1:
            raise ValidationError("bin_edges must have one more entry than density")


@dataclass(frozen=True)
class SpacingScanResult:
    histogram: SpacingHistogram
    ks_distance: float
    sample_count: int


@dataclass(frozen=True)
class StepFit:
    """Two-plateau change-point fit of a monotone step curve."""

    location: float
    lower: float
    upper: float


def _check_window(u: UnfoldedSpectrum, iv: IntervalSpec) -> None:
    if u.window is None:
        return
    lo, hi = u.window
    tol = 1e-9 * max(1.0, abs(hi))
    if iv.lo < lo - tol or iv.hi > hi + tol:
        raise ValidationError(
            f"interval [{iv.lo}, {iv.hi}] outside the unfolded window [{lo}, {hi}]"
        )


def _delta3_segments(t: np.ndarray, n0: int, width: float) -> float:
    """Least-squares rigidity of a staircase with jumps at centered positions t.

    t holds the level positions relative to the interval center, restricted to
    (-width/2, width/2]; n0 is the staircase value at the left edge.
    """
    h = 0.5 * width
    m = t.size
    knots = np.empty(m + 2)
    knots[0] = -h
    knots[1 : m + 1] = t
    knots[m + 1] = h
    vals = np.arange(n0, n0 + m + 1, dtype=np.float64)
    d = np.diff(knots)
    i1 = vals @ d
    i2 = (vals * vals) @ d
    sq = knots * knots
    i3 = 0.5 * (vals @ (sq[1:] - sq[:-1]))
    r = i2 / width - (i1 / width) ** 2 - 12.0 * i3 * i3 / width**4
    return r if r > 0.0 else 0.0


def delta3(u: UnfoldedSpectrum, iv: IntervalSpec) -> float:
    """Single-realization spectral rigidity on the interval.

    Equals (1/E) int N^2 - (1/E^2) (int N)^2 - (12/E^4) (int (x-center) N)^2
    with the integrals taken exactly over the piecewise-constant staircase.
    """
    _check_window(u, iv)
    lev = u.levels
    i0 = int(np.searchsorted(lev, iv.lo, side="right"))
    i1 = int(np.searchsorted(lev, iv.hi, side="right"))
    t = lev[i0:i1] - iv.center
    return _delta3_segments(t, i0, iv.width)


def count_levels(u: UnfoldedSpectrum, iv: IntervalSpec) -> int:
    """Staircase difference N(center + E/2) - N(center - E/2)."""
    _check_window(u, iv)
    lo, hi = np.searchsorted(u.levels, [iv.lo, iv.hi], side="right")
    return int(hi - lo)


def number_variance(counts) -> float:
    """Population variance of interval counts across ensemble members."""
    c = np.asarray(counts, dtype=np.float64)
    if c.size < 2:
        raise ValidationError("number_variance needs at least 2 samples")
    return float(np.var(c))


def ks_exponential(spacings: np.ndarray) -> float:
    """Exact Kolmogorov-Smirnov distance of the sample to the unit exponential."""
    x = np.sort(np.asarray(spacings, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValidationError("empty spacing sample")
    f = -np.expm1(-x)
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def nn_spacing_histogram(u: UnfoldedSpectrum, bins: int) -> SpacingHistogram:
    """Normalized histogram of consecutive unfolded spacings."""
    if bins < 2:
        raise ValidationError("bins must be >= 2")
    if len(u) < 1000:
        raise ValidationError(f"need >= 1000 levels, got {len(u)}")
    sp = np.diff(u.levels)
    density, edges = np.histogram(sp, bins=bins, density=True)
    return SpacingHistogram(edges, density, int(sp.size))


def delta3_from_sigma(sigma: StatCurve, width: float) -> float:
    """Rigidity from the number variance via the cubic-weight integral.

    (2/E^4) * int_0^E (E^3 - 2 x E^2 + x^3) Sigma(x) dx, with Sigma taken as
    the piecewise-linear interpolant of the sampled curve and each segment
    integrated in closed form.  Sigma(0)=0 is prepended when the grid starts
    above zero.
    """
    if not width > 0.0:
        raise ValidationError("width must be positive")
    xs = np.asarray(sigma.x, dtype=np.float64)
    ys = np.asarray(sigma.mean, dtype=np.float64)
    if xs[0] > 0.0:
        xs = np.concatenate([[0.0], xs])
        ys = np.concatenate([[0.0], ys])
    if xs[0] < 0.0 or xs[-1] < width * (1.0 - 1e-12):
        raise ValidationError(f"curve grid does not cover [0, {width}]")
    k = int(np.searchsorted(xs, width))
    if k < xs.size and xs[k] == width:
        xs, ys = xs[: k + 1], ys[: k + 1]
    else:
        y_cut = ys[k - 1] + (ys[k] - ys[k - 1]) * (width - xs[k - 1]) / (xs[k] - xs[k - 1])
        xs = np.concatenate([xs[:k], [width]])
        ys = np.concatenate([ys[:k], [y_cut]])
    x0, x1 = xs[:-1], xs[1:]
    y0, y1 = ys[:-1], ys[1:]
    slope = (y1 - y0) / (x1 - x0)
    intercept = y0 - slope * x0
    e2, e3 = width * width, width**3

    def w1(x):  # int (E^3 - 2xE^2 + x^3) dx
        return e3 * x - e2 * x * x + 0.25 * x**4

    def w2(x):  # int x (E^3 - 2xE^2 + x^3) dx
        return 0.5 * e3 * x * x - (2.0 / 3.0) * e2 * x**3 + 0.2 * x**5

    total = float(np.sum(intercept * (w1(x1) - w1(x0)) + slope * (w2(x1) - w2(x0))))
    return 2.0 * total / width**4


def make_ensemble(cfg: EnsembleConfig) -> np.ndarray:
    """member_count equally spaced beta in [b0(1-spread), b0(1+spread)]."""
    b0, s = cfg.beta_central, cfg.spread
    return np.linspace(b0 * (1.0 - s), b0 * (1.0 + s), cfg.member_count)


def locate_step(x: np.ndarray, y: np.ndarray) -> StepFit:
    """Fit two plateaus by variance-minimizing change point; interpolate the crossing."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 6:
        raise ValidationError("need at least 6 points to locate a step")
    best_k, best_cost = None, None
    for k in range(3, x.size - 2):
        cost = float(np.var(y[:k]) + np.var(y[k:]))
        if best_cost is None or cost < best_cost:
            best_k, best_cost = k, cost
    lower = float(np.mean(y[:best_k]))
    upper = float(np.mean(y[best_k:]))
    mid = 0.5 * (lower + upper)
    j = best_k - 1
    while j + 1 < x.size and not (y[j] <= mid <= y[j + 1]):
        j += 1
    if j + 1 >= x.size:  # fall back to the change-point boundary
        return StepFit(float(x[best_k]), lower, upper)
    loc = x[j] + (mid - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    return StepFit(float(loc), lower, upper)


# ---------------------------------------------------------------------------
# ensemble runners


def member_unfolded_values(beta: float, unfolded_hi: float) -> np.ndarray:
    """Sorted unfolded levels of one member, covering [0, unfolded_hi]."""
    eps_max = raw_energy(beta, unfolded_hi * 1.002)
    frac = min(1.0, max(SpectrumParams.__dataclass_fields__["window_fraction"].default,
                        1.05 * eps_max / (2.0 * beta)))
    params = SpectrumParams(beta, eps_max, window_fraction=frac)
    return unfold_values(beta, model_level_values(params))


def _map_members(fn, tasks, workers: int) -> list:
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _counts_member(task) -> np.ndarray:
    beta, center, e_grid = task
    u = member_unfolded_values(beta, center + 0.5 * e_grid[-1] + 1.0)
    hi = np.searchsorted(u, center + 0.5 * e_grid, side="right")
    lo = np.searchsorted(u, center - 0.5 * e_grid, side="right")
    return (hi - lo).astype(np.int64)


def _delta3_member(task) -> np.ndarray:
    beta, center, e_grid = task
    u = member_unfolded_values(beta, center + 0.5 * e_grid[-1] + 1.0)
    e_max = e_grid[-1]
    i0 = int(np.searchsorted(u, center - 0.5 * e_max, side="right"))
    i1 = int(np.searchsorted(u, center + 0.5 * e_max, side="right"))
    t = u[i0:i1] - center
    out = np.empty(e_grid.size)
    for k, width in enumerate(e_grid):
        h = 0.5 * width
        j0, j1 = np.searchsorted(t, [-h, h], side="right")
        out[k] = _delta3_segments(t[j0:j1], i0 + j0, width)
    return out


def _rigidity_member(task) -> np.ndarray:
    beta, centers, e_grid = task
    u = member_unfolded_values(beta, centers[-1] + 0.5 * e_grid[-1] + 1.0)
    e_max = e_grid[-1]
    out = np.empty(centers.size)
    for ci, c in enumerate(centers):
        i0 = int(np.searchsorted(u, c - 0.5 * e_max, side="right"))
        i1 = int(np.searchsorted(u, c + 0.5 * e_max, side="right"))
        t = u[i0:i1] - c
        acc = 0.0
        for width in e_grid:
            h = 0.5 * width
            j0, j1 = np.searchsorted(t, [-h, h], side="right")
            acc += _delta3_segments(t[j0:j1], i0 + j0, width)
        out[ci] = acc / e_grid.size
    return out


def _spacing_member(task) -> tuple[np.ndarray, np.ndarray, int]:
    beta, w_lo, w_hi, edges = task
    u = member_unfolded_values(beta, w_hi)
    lo, hi = np.searchsorted(u, [w_lo, w_hi], side="right")
    sp = np.diff(u[lo:hi])
    hist, _ = np.histogram(sp, bins=edges)
    q = -np.expm1(-sp)  # CDF transform: uniform on [0,1] under the exponential law
    cdf_hist, _ = np.histogram(q, bins=_CDF_BINS, range=(0.0, 1.0))
    return hist, cdf_hist, int(sp.size)


def _variance_and_jackknife(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Population variance per column plus leave-one-out jackknife stderr."""
    m = counts.shape[0]
    c = counts.astype(np.float64)
    s1 = c.sum(axis=0)
    s2 = (c * c).sum(axis=0)
    var_full = s2 / m - (s1 / m) ** 2
    loo1 = (s1 - c) / (m - 1)
    loo2 = (s2 - c * c) / (m - 1)
    theta = loo2 - loo1 * loo1
    se = np.sqrt((m - 1) / m * np.sum((theta - theta.mean(axis=0)) ** 2, axis=0))
    return var_full, se


def _validate_grid(e_grid: np.ndarray, center: float) -> np.ndarray:
    e = np.asarray(e_grid, dtype=np.float64)
    if e.size == 0 or np.any(e <= 0.0) or (e.size > 1 and np.any(np.diff(e) <= 0.0)):
        raise ValidationError("E grid must be positive and strictly increasing")
    IntervalSpec(center, float(e[-1]))  # enforces E_max <= 0.2*center
    return e


def ensemble_sigma_scan(
    cfg: EnsembleConfig, center: float, e_grid, workers: int = 1
) -> StatCurve:
    """Number variance across the ensemble at a fixed unfolded interval center.

    Intervals are placed in each member's own unfolded coordinate, so the mean
    count equals the width member by member.  The per-point spread is the
    leave-one-out jackknife standard error of the variance estimate.
    """
    e = _validate_grid(e_grid, center)
    betas = make_ensemble(cfg)
    rows = _map_members(_counts_member, [(b, center, e) for b in betas], workers)
    counts = np.vstack(rows)
    var_full, se = _variance_and_jackknife(counts)
    return StatCurve(e, var_full, se)


def ensemble_counts(
    cfg: EnsembleConfig, center: float, e_grid, workers: int = 1
) -> np.ndarray:
    """Raw member-by-member interval counts (members x grid)."""
    e = _validate_grid(e_grid, center)
    betas = make_ensemble(cfg)
    rows = _map_members(_counts_member, [(b, center, e) for b in betas], workers)
    return np.vstack(rows)


def ensemble_delta3_scan(
    cfg: EnsembleConfig, center: float, e_grid, workers: int = 1
) -> StatCurve:
    """Ensemble-mean rigidity versus interval width at a fixed center."""
    e = _validate_grid(e_grid, center)
    betas = make_ensemble(cfg)
    rows = _map_members(_delta3_member, [(b, center, e) for b in betas], workers)
    d3 = np.vstack(rows)
    mean = d3.mean(axis=0)
    se = d3.std(axis=0, ddof=1) / math.sqrt(d3.shape[0])
    return StatCurve(e, mean, se)


def ensemble_rigidity_scan(
    cfg: EnsembleConfig,
    centers,
    e_band: tuple[float, float],
    band_steps: int = 64,
    workers: int = 1,
) -> StatCurve:
    """Oscillation-averaged saturation rigidity versus interval center.

    For each center, the rigidity is averaged over the members and over a
    band_steps grid spanning e_band; the band must start at or above twice the
    radial frequency of every requested center.
    """
    c = np.asarray(centers, dtype=np.float64)
    if c.size == 0 or (c.size > 1 and np.any(np.diff(c) <= 0.0)):
        raise ValidationError("centers must be non-empty and strictly increasing")
    e_lo, e_hi = float(e_band[0]), float(e_band[1])
    if not 0.0 < e_lo < e_hi:
        raise ValidationError("E band must satisfy 0 < E_lo < E_hi")
    wr_max = radial_frequency(float(c[-1]), cfg.beta_central)
    if e_lo < 2.0 * wr_max * (1.0 - 1e-12):
        raise ValidationError(
            f"E_lo={e_lo} below 2*omega_r={2 * wr_max:.6g} of the largest center"
        )
    IntervalSpec(float(c[0]), e_hi)
    e = np.linspace(e_lo, e_hi, band_steps)
    betas = make_ensemble(cfg)
    rows = _map_members(_rigidity_member, [(b, c, e) for b in betas], workers)
    d3 = np.vstack(rows)
    mean = d3.mean(axis=0)
    se = d3.std(axis=0, ddof=1) / math.sqrt(d3.shape[0])
    return StatCurve(c, mean, se)


def ensemble_spacing_scan(
    cfg: EnsembleConfig,
    window: tuple[float, float],
    bins: int = 100,
    s_max: float = 10.0,
    workers: int = 1,
) -> SpacingScanResult:
    """Pooled nearest-neighbor spacing statistics over the ensemble.

    Returns the pooled histogram on [0, s_max] and the KS distance of the
    pooled sample to the unit exponential, computed on a fixed fine CDF grid
    (bias below 1/200000, far under the tolerances in use).
    """
    if bins < 2:
        raise ValidationError("bins must be >= 2")
    w_lo, w_hi = float(window[0]), float(window[1])
    if not 0.0 <= w_lo < w_hi:
        raise ValidationError("window must satisfy 0 <= lo < hi")
    edges = np.linspace(0.0, s_max, bins + 1)
    betas = make_ensemble(cfg)
    rows = _map_members(_spacing_member, [(b, w_lo, w_hi, edges) for b in betas], workers)
    hist = np.zeros(bins, dtype=np.int64)
    cdf = np.zeros(_CDF_BINS, dtype=np.int64)
    total = 0
    for h, ch, n in rows:  # fixed member order: bit-reproducible reduction
        hist += h
        cdf += ch
        total += n
    if total == 0:
        raise ValidationError("no spacings in the requested window")
    density = hist / (total * np.diff(edges))
    ecdf = np.cumsum(cdf) / total
    grid = np.arange(1, _CDF_BINS + 1) / _CDF_BINS
    ks = float(np.max(np.abs(ecdf - grid)))
    return SpacingScanResult(SpacingHistogram(edges, density, total), ks, total)


# ---------------------------------------------------------------------------
# CSV export


def write_curve_csv(curve: StatCurve, path: str | Path) -> None:
    lines = ["x,mean,stderr"]
    if curve.stderr is None:
        for x, m in zip(curve.x, curve.mean):
            lines.append(f"{x:.17g},{m:.17g},")
    else:
        for x, m, s in zip(curve.x, curve.mean, curve.stderr):
            lines.append(f"{x:.17g},{m:.17g},{s:.17g}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_histogram_csv(hist: SpacingHistogram, path: str | Path,
                        reference: np.ndarray | None = None) -> None:
    header = "bin_left,bin_right,density"
    if reference is not None:
        header += ",exponential_ref"
    lines = [header]
    for i, d in enumerate(hist.density):
        row = f"{hist.bin_edges[i]:.17g},{hist.bin_edges[i + 1]:.17g},{d:.17g}"
        if reference is not None:
            row += f",{reference[i]:.17g}"
        lines.append(row)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
