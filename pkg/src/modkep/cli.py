"""Command-line front end: ensemble orchestration, CSV/JSON emission, plots.

Every run writes its CSV outputs plus one manifest.json (config echo, code
version, member beta list, derived theory quantities, sha256 of every output)
into --out.  Outputs are deterministic for a fixed config regardless of the
worker count; plot scripts are emitted as standalone text and never executed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, ValidationError
from .kepler import PotentialParams, circular_orbit, orbit_period, periodic_condition
from .spectrum import SpectrumParams, generate_model_spectrum, unfold, write_spectrum_csv
from .stats import (
    EnsembleConfig,
    StatCurve,
    ensemble_rigidity_scan,
    ensemble_sigma_scan,
    ensemble_spacing_scan,
    locate_step,
    make_ensemble,
    write_curve_csv,
    write_histogram_csv,
)
from .theory import (
    SumOptions,
    delta3_saturation,
    enumerate_orbits,
    jump_energies,
    k_inf_curve,
    k_inf_delta_precursor,
    k_inf_smooth_reference,
    radial_frequency,
    sigma_curve,
    theory_point,
)

_UNSET = object()

COMMANDS = (
    "spectrum",
    "spacings",
    "rigidity",
    "variance",
    "correlation",
    "theory",
    "orbits",
    "compare",
)

# option name -> (type, default, help); "repeat" marks append-style flags
_ENSEMBLE_OPTS = {
    "beta": (float, 3.0e6, "central potential strength"),
    "members": (int, 100, "ensemble member count"),
    "spread": (float, 5.0e-3, "relative half-width of the beta ensemble"),
    "seed": (int, 0, "run seed recorded in the manifest"),
    "workers": (int, 1, "worker processes for the member map"),
}
_SUM_OPTS = {
    "correction": (bool, False, "enable the empirical plateau correction"),
    "tolerance": (float, 1.0e-6, "relative tail tolerance of the orbit sums"),
    "m_cut": (int, None, "hard cutoff override for the orbit sums"),
}

_OPTS: dict[str, dict] = {
    "spectrum": {
        "beta": _ENSEMBLE_OPTS["beta"],
        "eps_max": (float, 1.0e5, "raw window upper edge"),
        "window_fraction": (float, 0.25, "bound eps_max <= fraction*2*beta"),
    },
    "spacings": {
        **_ENSEMBLE_OPTS,
        "w_lo": (float, 1.0e5, "unfolded window lower edge"),
        "w_hi": (float, 6.0e5, "unfolded window upper edge"),
        "bins": (int, 100, "histogram bin count"),
        "s_max": (float, 10.0, "histogram upper edge in spacing units"),
    },
    "rigidity": {
        **_ENSEMBLE_OPTS,
        **_SUM_OPTS,
        "centers_min": (float, 1.0e5, "lowest interval center"),
        "centers_max": (float, 6.0e5, "highest interval center"),
        "centers_steps": (int, 26, "number of centers"),
        "e_min": (float, None, "saturation band lower edge (default 2*omega_r(top))"),
        "e_max": (float, None, "saturation band upper edge (default 4*omega_r(top))"),
        "band_steps": (int, 64, "grid points across the saturation band"),
    },
    "variance": {
        **_ENSEMBLE_OPTS,
        **_SUM_OPTS,
        "eps_center": (float, [5.0e5], "interval center; repeatable", "repeat"),
        "e_min": (float, None, "width grid lower edge (default E_max/steps)"),
        "e_max": (float, None, "width grid upper edge (default 3*omega_r)"),
        "e_steps": (int, 192, "width grid points"),
    },
    "correlation": {
        "beta": _ENSEMBLE_OPTS["beta"],
        **_SUM_OPTS,
        "eps_center": (float, [5.0e5], "operating point; first entry used", "repeat"),
        "omega_max": (float, None, "omega grid upper edge (default 5*energy scale)"),
        "omega_steps": (int, 200, "omega grid points"),
    },
    "theory": {
        "beta": _ENSEMBLE_OPTS["beta"],
        **_SUM_OPTS,
        "eps_center": (float, [5.0e5], "operating point; repeatable", "repeat"),
        "max_winding": (int, 12, "orbit table total-winding bound"),
    },
    "orbits": {
        "alpha": (float, 1.0, "Coulomb strength"),
        "mass": (float, 1.0, "particle mass"),
        "beta_raw": (float, 1.0, "repulsive strength"),
        "energy": (float, -0.1, "bound-state energy (< 0)"),
        "max_winding": (int, 12, "largest radial winding number listed"),
    },
    "compare": {
        "file_a": (str, None, "first curve CSV"),
        "file_b": (str, None, "second curve CSV"),
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modkep",
        description="Spectral statistics of the modified Kepler model spectrum.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in _OPTS.items():
        p = sub.add_parser(command)
        p.add_argument("--out", default=_UNSET, help="output directory")
        p.add_argument("--config", default=None, help="key=value file or a manifest.json")
        for name, spec in opts.items():
            typ, _default, help_text = spec[0], spec[1], spec[2]
            flag = "--" + name.replace("_", "-")
            if len(spec) > 3 and spec[3] == "repeat":
                p.add_argument(flag, type=typ, action="append", default=_UNSET, help=help_text)
            elif typ is bool:
                p.add_argument(flag, action="store_true", default=_UNSET, help=help_text)
            else:
                p.add_argument(flag, type=typ, default=_UNSET, help=help_text)
    return parser


def _parse_config_file(path: Path, command: str) -> dict:
    text = path.read_text()
    if text.lstrip().startswith("{"):
        manifest = json.loads(text)
        data = dict(manifest.get("config", manifest))
        file_command = data.pop("command", command)
        if file_command != command:
            raise ValidationError(
                f"config file is for command {file_command!r}, not {command!r}"
            )
        return data
    out: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"bad config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(name: str, value, spec) -> object:
    typ = spec[0]
    repeat = len(spec) > 3 and spec[3] == "repeat"
    if isinstance(value, str):
        if repeat:
            return [typ(v) for v in value.split(",") if v.strip()]
        if typ is bool:
            return value.strip().lower() in ("1", "true", "yes", "on")
        return typ(value)
    if repeat and isinstance(value, list):
        return [typ(v) for v in value]
    if value is None:
        return None
    return typ(value) if typ is not bool else bool(value)


def build_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicitly given flags (flags win)."""
    command = args.command
    opts = _OPTS[command]
    merged: dict = {name: spec[1] for name, spec in opts.items()}
    merged["out"] = None
    if args.config:
        for key, value in _parse_config_file(Path(args.config), command).items():
            if key == "out":
                merged["out"] = str(value)
                continue
            if key not in opts:
                raise ValidationError(f"unknown config key {key!r} for command {command!r}")
            merged[key] = _coerce(key, value, opts[key])
    for name in opts:
        value = getattr(args, name)
        if value is not _UNSET:
            merged[name] = _coerce(name, value, opts[name])
    if args.out is not _UNSET:
        merged["out"] = args.out
    if not merged["out"]:
        raise ValidationError("--out is required (directly or via the config file)")
    merged["command"] = command
    return merged


class OutputTracker:
    """Records written files so a failed run leaves no partial outputs."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.files.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.files:
            p.unlink(missing_ok=True)

    def hashes(self) -> dict[str, str]:
        out = {}
        for p in self.files:
            out[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
        return out


def _sum_options(cfg: dict) -> SumOptions:
    kwargs = {
        "tolerance": cfg.get("tolerance", 1.0e-6),
        "correction_enabled": False,
    }
    if cfg.get("m_cut"):
        kwargs["m_cut_max"] = int(cfg["m_cut"])
    return SumOptions(**kwargs)


def _ensemble(cfg: dict) -> EnsembleConfig:
    return EnsembleConfig(
        beta_central=cfg["beta"],
        member_count=cfg["members"],
        spread=cfg["spread"],
        seed=cfg["seed"],
    )


def _theory_summary(eps: float, beta: float) -> dict:
    tp = theory_point(eps, beta)
    return {
        "eps": tp.eps,
        "omega_r": tp.omega_r,
        "gamma_cir": tp.gamma_cir,
        "mr_min": tp.mr_min,
        "energy_scale": tp.energy_scale,
    }


def _write_plot_script(track: OutputTracker, name: str, body: str) -> None:
    header = "#!/usr/bin/env python3\n# Auto-generated overlay plot; run manually.\n"
    with open(track.path(name), "w", newline="\n") as fh:
        fh.write(header + "import matplotlib.pyplot as plt\nimport numpy as np\n\n" + body)


def _load_curve(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows = [line.split(",") for line in path.read_text().splitlines()[1:] if line]
    x = np.array([float(r[0]) for r in rows])
    y = np.array([float(r[1]) for r in rows])
    return x, y


# ---------------------------------------------------------------------------
# command bodies


def run_spectrum(cfg: dict, track: OutputTracker) -> dict:
    params = SpectrumParams(cfg["beta"], cfg["eps_max"], cfg["window_fraction"])
    spec = generate_model_spectrum(params)
    u = unfold(spec)
    write_spectrum_csv(spec, track.path("spectrum.csv"), unfolded=u.levels)
    return {"level_count": len(spec)}


def run_spacings(cfg: dict, track: OutputTracker) -> dict:
    if cfg["bins"] < 2:
        raise ValidationError("bins must be >= 2")
    res = ensemble_spacing_scan(
        _ensemble(cfg),
        (cfg["w_lo"], cfg["w_hi"]),
        bins=cfg["bins"],
        s_max=cfg["s_max"],
        workers=cfg["workers"],
    )
    centers = 0.5 * (res.histogram.bin_edges[:-1] + res.histogram.bin_edges[1:])
    write_histogram_csv(res.histogram, track.path("spacings.csv"), reference=np.exp(-centers))
    _write_plot_script(
        track,
        "plot_spacings.py",
        "d = np.genfromtxt('spacings.csv', delimiter=',', names=True)\n"
        "s = 0.5*(d['bin_left']+d['bin_right'])\n"
        "plt.step(s, d['density'], where='mid', label='measured')\n"
        "plt.plot(s, d['exponential_ref'], label='exp(-s)')\n"
        "plt.xlabel('s'); plt.ylabel('P(s)'); plt.legend(); plt.savefig('spacings.png', dpi=160)\n",
    )
    return {"ks_distance": res.ks_distance, "sample_count": res.sample_count}


def run_rigidity(cfg: dict, track: OutputTracker) -> dict:
    centers = np.linspace(cfg["centers_min"], cfg["centers_max"], cfg["centers_steps"])
    if centers.size == 0:
        raise ValidationError("empty centers grid")
    wr_top = radial_frequency(float(centers[-1]), cfg["beta"])
    band = (
        cfg["e_min"] if cfg["e_min"] else 2.0 * wr_top,
        cfg["e_max"] if cfg["e_max"] else 4.0 * wr_top,
    )
    measured = ensemble_rigidity_scan(
        _ensemble(cfg), centers, band, band_steps=cfg["band_steps"], workers=cfg["workers"]
    )
    write_curve_csv(measured, track.path("measured.csv"))

    opts = _sum_options(cfg)
    opts_on = SumOptions(opts.tolerance, True, opts.m_cut_max)
    n_theory = min(4 * centers.size, 241)
    grid = np.linspace(centers[0], centers[-1], n_theory)
    off = np.array([delta3_saturation(theory_point(x, cfg["beta"]), opts) for x in grid])
    on = np.array([delta3_saturation(theory_point(x, cfg["beta"]), opts_on) for x in grid])
    write_curve_csv(StatCurve(grid, off), track.path("theory.csv"))
    write_curve_csv(StatCurve(grid, on), track.path("theory_corrected.csv"))

    markers = []
    for k, eps_k in jump_energies(cfg["beta"], (2, 64)):
        markers.append((k, eps_k))
        if eps_k < centers[0]:
            break
    with open(track.path("jump_markers.csv"), "w", newline="\n") as fh:
        fh.write("k,eps\n" + "\n".join(f"{k},{e:.17g}" for k, e in markers) + "\n")

    fit = locate_step(measured.x, measured.mean)
    _write_plot_script(
        track,
        "plot_rigidity.py",
        "m = np.genfromtxt('measured.csv', delimiter=',', names=True)\n"
        "t = np.genfromtxt('theory.csv', delimiter=',', names=True)\n"
        "c = np.genfromtxt('theory_corrected.csv', delimiter=',', names=True)\n"
        "j = np.genfromtxt('jump_markers.csv', delimiter=',', names=True)\n"
        "plt.errorbar(m['x'], m['mean'], yerr=m['stderr'], lw=2, label='measured')\n"
        "plt.plot(t['x'], t['mean'], lw=1, label='theory')\n"
        "plt.plot(c['x'], c['mean'], lw=1, ls='--', label='theory+correction')\n"
        "for e in np.atleast_1d(j['eps']): plt.axvline(e, color='k', alpha=0.3)\n"
        "plt.xlabel('interval center'); plt.ylabel('saturation rigidity')\n"
        "plt.legend(); plt.savefig('rigidity.png', dpi=160)\n",
    )
    return {
        "band": list(band),
        "step": {"location": fit.location, "lower": fit.lower, "upper": fit.upper},
        "jump_markers": [{"k": k, "eps": e} for k, e in markers],
        "points": [_theory_summary(float(x), cfg["beta"]) for x in centers[:: max(1, centers.size // 8)]],
    }


def run_variance(cfg: dict, track: OutputTracker) -> dict:
    opts = _sum_options(cfg)
    opts_on = SumOptions(opts.tolerance, True, opts.m_cut_max)
    derived: dict = {"centers": []}
    for idx, center in enumerate(cfg["eps_center"]):
        tp = theory_point(center, cfg["beta"])
        e_hi = cfg["e_max"] if cfg["e_max"] else 3.0 * tp.omega_r
        steps = cfg["e_steps"]
        if cfg["e_min"]:
            grid = np.linspace(cfg["e_min"], e_hi, steps)
        else:
            grid = np.arange(1, steps + 1) * (e_hi / steps)
        measured = ensemble_sigma_scan(_ensemble(cfg), center, grid, workers=cfg["workers"])
        write_curve_csv(measured, track.path(f"variance_measured_{idx}.csv"))
        write_curve_csv(
            StatCurve(grid, sigma_curve(tp, grid, opts)), track.path(f"variance_theory_{idx}.csv")
        )
        write_curve_csv(
            StatCurve(grid, sigma_curve(tp, grid, opts_on)),
            track.path(f"variance_theory_corrected_{idx}.csv"),
        )
        zeros = [n * tp.omega_r for n in range(1, int(e_hi / tp.omega_r) + 1)]
        info = _theory_summary(center, cfg["beta"])
        info["coherent_zeros"] = zeros
        derived["centers"].append(info)
        _write_plot_script(
            track,
            f"plot_variance_{idx}.py",
            f"m = np.genfromtxt('variance_measured_{idx}.csv', delimiter=',', names=True)\n"
            f"t = np.genfromtxt('variance_theory_{idx}.csv', delimiter=',', names=True)\n"
            "plt.errorbar(m['x'], m['mean'], yerr=m['stderr'], lw=2, label='measured')\n"
            "plt.plot(t['x'], t['mean'], lw=1, label='theory')\n"
            + "".join(f"plt.axvline({z!r}, color='k', alpha=0.3)\n" for z in zeros)
            + "plt.xlabel('interval width'); plt.ylabel('number variance')\n"
            "plt.legend(); plt.savefig('variance_%d.png', dpi=160)\n" % idx,
        )
    return derived


def run_correlation(cfg: dict, track: OutputTracker) -> dict:
    tp = theory_point(cfg["eps_center"][0], cfg["beta"])
    opts = SumOptions(
        tolerance=cfg.get("tolerance", 1.0e-6),
        m_cut_max=int(cfg["m_cut"]) if cfg.get("m_cut") else 100_000,
    )
    omega_hi = cfg["omega_max"] if cfg["omega_max"] else 5.0 * tp.energy_scale
    steps = cfg["omega_steps"]
    omegas = np.arange(1, steps + 1) * (omega_hi / steps)
    kk = k_inf_curve(tp, omegas, opts)
    ref = k_inf_smooth_reference(tp, omegas)
    write_curve_csv(StatCurve(omegas, kk), track.path("correlation_theory.csv"))
    write_curve_csv(StatCurve(omegas, ref), track.path("correlation_sinc.csv"))
    # informational: smooth-part deviation from the half-sinc after removing
    # the finite-cutoff image of the delta term
    mask = omegas <= 0.2 * tp.energy_scale
    smooth = kk[mask] - k_inf_delta_precursor(tp, omegas[mask], opts)
    dev = float(np.max(np.abs(smooth - ref[mask]) / np.abs(ref[mask]))) if mask.any() else None
    _write_plot_script(
        track,
        "plot_correlation.py",
        "t = np.genfromtxt('correlation_theory.csv', delimiter=',', names=True)\n"
        "s = np.genfromtxt('correlation_sinc.csv', delimiter=',', names=True)\n"
        "plt.plot(t['x'], t['mean'], label='orbit sum')\n"
        "plt.plot(s['x'], s['mean'], label='half-sinc reference')\n"
        "plt.xlabel('energy separation'); plt.ylabel('correlation')\n"
        "plt.legend(); plt.savefig('correlation.png', dpi=160)\n",
    )
    info = _theory_summary(tp.eps, cfg["beta"])
    info.update({"m_cut": opts.m_cut_max, "smooth_vs_sinc_max_rel_dev": dev})
    return info


def run_theory(cfg: dict, track: OutputTracker) -> dict:
    opts = _sum_options(cfg)
    opts_on = SumOptions(opts.tolerance, True, opts.m_cut_max)
    lines = ["eps,omega_r,gamma_cir,mr_min,energy_scale,delta3_sat,delta3_sat_corrected,sigma_bar"]
    infos = []
    for center in cfg["eps_center"]:
        tp = theory_point(center, cfg["beta"])
        d_off = delta3_saturation(tp, opts)
        d_on = delta3_saturation(tp, opts_on)
        lines.append(
            f"{tp.eps:.17g},{tp.omega_r:.17g},{tp.gamma_cir:.17g},{tp.mr_min},"
            f"{tp.energy_scale:.17g},{d_off:.17g},{d_on:.17g},{2 * d_off:.17g}"
        )
        infos.append(_theory_summary(center, cfg["beta"]))
    with open(track.path("theory_points.csv"), "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    tp = theory_point(cfg["eps_center"][0], cfg["beta"])
    period_max = cfg["max_winding"] * 2.0 * math.pi / tp.omega_r
    rows = ["m_r,m_theta,retracing,period,amplitude_sq"]
    for orbit in enumerate_orbits(tp, period_max):
        rows.append(
            f"{orbit.m_r},{orbit.m_theta},{orbit.retracing},"
            f"{orbit.period:.17g},{orbit.amplitude_sq:.17g}"
        )
    with open(track.path("orbit_classes.csv"), "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    return {"points": infos}


def run_orbits(cfg: dict, track: OutputTracker) -> dict:
    pp = PotentialParams(cfg["alpha"], cfg["beta_raw"], cfg["mass"])
    energy = cfg["energy"]
    rows = ["m_r,m_theta,angular_momentum,period"]
    for m_r in range(1, cfg["max_winding"] + 1):
        for m_theta in range(1, m_r + 1):
            if math.gcd(m_r, m_theta) != 1:
                continue
            ang = periodic_condition(pp, energy, m_r, m_theta)
            if ang is None:
                continue
            rows.append(
                f"{m_r},{m_theta},{ang:.17g},{orbit_period(pp, energy, m_r):.17g}"
            )
    with open(track.path("orbits.csv"), "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    derived: dict = {"rows": len(rows) - 1}
    try:
        l_cir, gamma_cir, t_cir = circular_orbit(pp, energy)
        derived["circular"] = {"L": l_cir, "gamma_cir": gamma_cir, "period": t_cir}
    except ValidationError:
        derived["circular"] = None
    return derived


def run_compare(cfg: dict, track: OutputTracker) -> dict:
    if not cfg["file_a"] or not cfg["file_b"]:
        raise ValidationError("compare requires --file-a and --file-b")
    xa, ya = _load_curve(Path(cfg["file_a"]))
    xb, yb = _load_curve(Path(cfg["file_b"]))
    common, ia, ib = np.intersect1d(xa, xb, return_indices=True)
    if common.size == 0:
        raise ValidationError("curves share no abscissa points")
    diff = ya[ia] - yb[ib]
    max_abs = float(np.max(np.abs(diff)))
    rms = float(math.sqrt(np.mean(diff * diff)))
    with open(track.path("compare.csv"), "w", newline="\n") as fh:
        fh.write("n_common,max_abs,rms\n")
        fh.write(f"{common.size},{max_abs:.17g},{rms:.17g}\n")
    return {"n_common": int(common.size), "max_abs": max_abs, "rms": rms}


_RUNNERS = {
    "spectrum": run_spectrum,
    "spacings": run_spacings,
    "rigidity": run_rigidity,
    "variance": run_variance,
    "correlation": run_correlation,
    "theory": run_theory,
    "orbits": run_orbits,
    "compare": run_compare,
}


def execute(cfg: dict) -> Path:
    """Run one command from a merged config; returns the output directory."""
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    track = OutputTracker(outdir)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    try:
        derived = _RUNNERS[cfg["command"]](cfg, track)
    except BaseException:
        track.cleanup()
        raise
    manifest = {
        "command": cfg["command"],
        "version": __version__,
        "started_utc": started,
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": {k: v for k, v in cfg.items() if k != "command"},
        "derived": derived,
        "outputs": track.hashes(),
    }
    if "members" in cfg:
        manifest["members_beta"] = [float(b) for b in make_ensemble(_ensemble(cfg))]
    with open(outdir / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        outdir = execute(cfg)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"outputs written to {outdir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
