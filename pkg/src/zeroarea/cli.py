"""Batch front-end: config-driven scans, propagation and optimization runs.

Configs are flat INI-style key=value files with one section per concern; all
physical inputs carry explicit unit suffixes (b_cm1, intensity_twcm2, f_thz,
tf_au, delta_tper) and are converted once at ingestion. Every run writes its
artifacts (trajectory, iteration log, final pulse, spectrum, spectrogram,
summary) into the output directory and is bit-reproducible from the config:
there is no randomness anywhere in the toolkit.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import control, gridfrag, rotor, units
from . import pulse as pmod


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --- config ingestion ----------------------------------------------------------


def parse_config(path, overrides=()) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise OSError(f"config file not found: {path}")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError("--override", f"expected SECTION.KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        section, name = key.split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section.strip(), name.strip(), value.strip())
    return cp


def serialize_config(cp: configparser.ConfigParser) -> str:
    out = []
    for section in cp.sections():
        out.append(f"[{section}]")
        for key, val in cp.items(section):
            out.append(f"{key} = {val}")
        out.append("")
    return "\n".join(out)


def _get(cp, section, key, cast, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"{section}.{key}", "missing required key")
        return default
    raw = cp.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as err:
        raise ConfigError(f"{section}.{key}", f"unreadable value {raw!r}") from err


@dataclass
class RunConfig:
    backend: str
    mode: str
    outdir: Path
    rotor_model: rotor.RotorModel | None = None
    temperature: float = 0.0
    dt_sub: float | None = None
    tau: float | None = None
    tau_auto: bool = False
    pulse_source: str = "family"
    pulse_params: dict = dc_field(default_factory=dict)
    control_cfg: control.ControlConfig | None = None
    grid: dict = dc_field(default_factory=dict)

    @property
    def t_per(self) -> float:
        return self.rotor_model.t_per


def build_run_config(cp: configparser.ConfigParser, outdir) -> RunConfig:
    backend = _get(cp, "run", "backend", str, required=True)
    if backend not in ("rotor", "gridfrag"):
        raise ConfigError("run.backend", f"must be rotor or gridfrag, got {backend!r}")
    mode = _get(cp, "run", "mode", str, default="none")
    if mode not in ("none", "lct", "oct"):
        raise ConfigError("run.mode", f"must be none, lct or oct, got {mode!r}")
    if mode == "lct" and backend != "gridfrag":
        raise ConfigError("run.mode", "local control drives the gridfrag backend only")
    rc = RunConfig(backend=backend, mode=mode, outdir=Path(outdir))

    if backend == "rotor":
        b_cm1 = _get(cp, "rotor", "b_cm1", float, default=rotor.CO_B_CM1)
        d_au = _get(cp, "rotor", "dipole_au", float, default=rotor.CO_DIPOLE_AU)
        jmax = _get(cp, "rotor", "jmax", int, default=16)
        try:
            rc.rotor_model = rotor.RotorModel(b=units.cm1_to_au(b_cm1), d=d_au, jmax=jmax)
        except ValueError as err:
            raise ConfigError("rotor", str(err)) from err
        rc.temperature = _get(cp, "rotor", "temperature_k", float, default=0.0)
        if rc.temperature < 0:
            raise ConfigError("rotor.temperature_k", "must be non-negative")
        rc.dt_sub = _get(cp, "rotor", "dt_sub_au", float, default=None)
        rc.tau_auto = _get(cp, "control", "tau_auto", bool, default=False)
        tau_tper = _get(cp, "control", "tau_tper", float, default=None)
        if tau_tper is not None:
            rc.tau = tau_tper * rc.rotor_model.t_per

    sources = []
    if cp.has_section("pulse"):
        src = _get(cp, "pulse", "source", str, default=None)
        if src:
            sources.append(src)
    if len(sources) != 1 and mode != "lct":
        raise ConfigError("pulse.source", "exactly one pulse source must be declared")
    if sources:
        rc.pulse_source = sources[0]
        if rc.pulse_source not in ("family", "file", "hermite"):
            raise ConfigError("pulse.source", f"unknown source {rc.pulse_source!r}")
        rc.pulse_params = dict(cp.items("pulse")) if cp.has_section("pulse") else {}
        if rc.pulse_source == "file":
            p = Path(_get(cp, "pulse", "path", str, required=True))
            if not p.exists():
                raise ConfigError("pulse.path", f"file does not exist: {p}")

    lam = _get(cp, "control", "lambda_au", float, default=1.0)
    mu = _get(cp, "control", "mu_au", float, default=0.0)
    eta = _get(cp, "control", "eta_au", float, default=0.0)
    mu_tilde = _get(cp, "control", "mu_tilde_au", float, default=None)
    tf = _get(cp, "control", "tf_au", float, default=None)
    tf_tper = _get(cp, "control", "tf_tper", float, default=None)
    if tf_tper is not None and rc.rotor_model is not None:
        tf = tf_tper * rc.rotor_model.t_per
    try:
        rc.control_cfg = control.ControlConfig(
            lam=lam,
            mu=mu,
            eta=eta,
            mu_tilde=mu_tilde,
            tf=tf,
            max_iters=_get(cp, "control", "max_iters", int, default=500),
            stop_tol=_get(cp, "control", "stop_tol", float, default=1e-8),
            n_sub=_get(cp, "control", "n_sub", int, default=1),
            intensity_target=_get(cp, "control", "intensity_target_au", float, default=None),
        )
    except ValueError as err:
        raise ConfigError("control", str(err)) from err

    if backend == "gridfrag":
        g = {}
        g["model"] = _get(cp, "gridfrag", "model", str, default="synthetic")
        if g["model"] != "synthetic" and not Path(g["model"]).exists():
            raise ConfigError("gridfrag.model", f"model file does not exist: {g['model']}")
        g["channels"] = tuple(
            int(c) for c in _get(cp, "gridfrag", "channels", str, default="1,2").split(",")
        )
        band = _get(cp, "gridfrag", "e_band_au", str, default="2.56,2.68").split(",")
        g["e_band"] = (float(band[0]), float(band[1]))
        g["n_k"] = _get(cp, "gridfrag", "n_k", int, default=16)  # 32 states over two channels
        g["t_free"] = _get(cp, "gridfrag", "t_free_au", float, default=400.0)
        g["dt"] = _get(cp, "gridfrag", "dt_au", float, default=0.15)
        g["seed_eps"] = _get(cp, "gridfrag", "seed_eps", float, default=0.05)
        g["absorber"] = _get(cp, "gridfrag", "absorber", bool, default=False)
        g["scattering_set"] = _get(cp, "gridfrag", "scattering_set", str, default=None)
        if g["scattering_set"] and not Path(g["scattering_set"]).exists():
            raise ConfigError("gridfrag.scattering_set", "file does not exist")
        rc.grid = g
    return rc


def build_pulse(rc: RunConfig) -> pmod.Pulse:
    p = rc.pulse_params
    src = rc.pulse_source

    def fget(key, default=None, required=False):
        if key not in p:
            if required:
                raise ConfigError(f"pulse.{key}", "missing required key")
            return default
        try:
            return float(p[key])
        except ValueError as err:
            raise ConfigError(f"pulse.{key}", f"unreadable value {p[key]!r}") from err

    if src == "file":
        return pmod.read_pulse(p["path"])
    n_samples = int(fget("n_samples", 512))
    if src == "family":
        e0 = units.field_from_intensity_tw(fget("intensity_twcm2", required=True))
        f_au = units.thz_to_au(fget("f_thz", required=True))
        if rc.rotor_model is not None and "delta_tper" in p:
            delta = fget("delta_tper") * rc.rotor_model.t_per
        else:
            delta = fget("delta_au", required=True)
        return pmod.sample_family(e0, delta, f_au, n_samples)
    if src == "hermite":
        coeffs = [fget("c1", 1.0), fget("c3", 1.0), fget("c5", 1.0)]
        if rc.rotor_model is not None and "width_tper" in p:
            width = fget("width_tper") * rc.rotor_model.t_per
        else:
            width = fget("width_au", required=True)
        center = fget("center_au", None)
        span = None
        if "t0_au" in p and "t1_au" in p:
            span = (fget("t0_au"), fget("t1_au"))
            if center is None:
                center = 0.5 * (span[0] + span[1])
        elif center is None:
            raise ConfigError("pulse.center_au", "hermite source needs a center or a span")
        guess = pmod.hermite_guess(coeffs, width, center, n_samples, span=span)
        peak_i = fget("intensity_twcm2", None)
        if peak_i is not None:
            guess = guess.scaled(units.field_from_intensity_tw(peak_i) / guess.peak)
        return guess
    raise ConfigError("pulse.source", f"unhandled source {src!r}")


# --- landscape scan -----------------------------------------------------------------


def _scan_point(args):
    b, d, jmax, e0, f_au, delta, n_samples, n_scan = args
    model = rotor.RotorModel(b=b, d=d, jmax=jmax)
    p = pmod.sample_family(e0, delta, f_au, n_samples)
    traj = rotor.propagate_state(model, rotor.ground_rotor_state(model), p, dt_sub=p.dt / 4)
    t = np.linspace(0.0, model.t_per, n_scan)
    return float(np.max(np.abs(rotor.free_cos_theta(model, traj.final_state, t))))


def scan_landscape(
    model: rotor.RotorModel,
    f_range_thz: tuple[float, float],
    delta_range_tper: tuple[float, float],
    grid_dims: tuple[int, int],
    intensity_twcm2: float,
    n_samples: int = 512,
    n_scan: int = 4096,
    workers: int = 1,
):
    """Post-pulse orientation maxima over the (f, delta) family landscape.

    Each grid point propagates the family pulse and takes the field-free
    maximum of |<cos theta>| over one rotational period. Points are
    independent; with workers > 1 they fan out over processes and results are
    gathered by index, so the output ordering never depends on scheduling.
    """
    n_f, n_d = grid_dims
    if n_f < 1 or n_d < 1:
        raise ValueError("empty scan ranges")
    fs = np.linspace(f_range_thz[0], f_range_thz[1], n_f)
    ds = np.linspace(delta_range_tper[0], delta_range_tper[1], n_d)
    e0 = units.field_from_intensity_tw(intensity_twcm2)
    jobs = []
    for f_thz in fs:
        for d_frac in ds:
            jobs.append(
                (model.b, model.d, model.jmax, e0, units.thz_to_au(f_thz), d_frac * model.t_per, n_samples, n_scan)
            )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_scan_point, jobs, chunksize=4))
    else:
        values = [_scan_point(job) for job in jobs]
    matrix = np.array(values).reshape(n_f, n_d)
    i, j = np.unravel_index(int(np.argmax(matrix)), matrix.shape)
    return matrix, fs, ds, (float(fs[i]), float(ds[j]))


# --- artifact writers -----------------------------------------------------------------


def _write_summary(path, rows: list[tuple[str, object]]) -> None:
    with open(path, "w") as fh:
        for key, val in rows:
            fh.write(f"{key} = {val}\n")


def _write_table(path, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in zip(*columns):
            fh.write("\t".join(f"{v:.12e}" for v in row) + "\n")


def _emit_pulse_products(outdir: Path, result_pulse: pmod.Pulse, meta: str) -> None:
    pmod.write_pulse(outdir / "final.pulse", result_pulse, comment=meta)
    pmod.write_spectrum(outdir / "spectrum.tsv", pmod.spectrum(result_pulse))
    width = max(result_pulse.duration / 8.0, 4 * result_pulse.dt)
    pmod.write_spectrogram(
        outdir / "spectrogram.tsv", pmod.spectrogram(result_pulse, width, n_centers=32)
    )


def _emit_trajectory(outdir: Path, trajectory: dict) -> None:
    keys = [k for k in trajectory if k != "t"]
    _write_table(
        outdir / "trajectory.tsv", ["t_au"] + keys, [trajectory["t"]] + [trajectory[k] for k in keys]
    )


# --- backend drivers ----------------------------------------------------------------------


def _rotor_target(rc: RunConfig, system, guess):
    model = rc.rotor_model
    if rc.tau_auto or rc.tau is None:
        if rc.temperature > 0:
            rho_f = system.initial()
            dt_sub = guess.dt / rc.control_cfg.n_sub
            for i in range(guess.n - 1):
                e_mid = 0.5 * (guess.samples[i] + guess.samples[i + 1])
                for _ in range(rc.control_cfg.n_sub):
                    rho_f = system.substep(rho_f, e_mid, dt_sub)
            dens = system.to_density(rho_f)
            t = np.linspace(0.0, model.t_per, 4096 + 1)[1:]
            v = rotor.free_cos_theta_density(model, dens, t)
            i_pk = int(np.argmax(np.abs(v)))
            tau, sign = float(t[i_pk]), float(np.sign(v[i_pk]))
        else:
            traj = rotor.propagate_state(
                model, rotor.ground_rotor_state(model), guess, dt_sub=guess.dt / rc.control_cfg.n_sub
            )
            pk = rotor.free_orientation_peak(model, traj.final_state, model.t_per)
            v = rotor.free_cos_theta(model, traj.final_state, np.array([pk.t_peak]))[0]
            tau, sign = pk.t_peak, float(np.sign(v))
    else:
        tau = rc.tau
        if rc.temperature > 0:
            rho_f = system.initial()
            dt_sub = guess.dt / rc.control_cfg.n_sub
            for i in range(guess.n - 1):
                e_mid = 0.5 * (guess.samples[i] + guess.samples[i + 1])
                for _ in range(rc.control_cfg.n_sub):
                    rho_f = system.substep(rho_f, e_mid, dt_sub)
            dens = system.to_density(rho_f)
            v = rotor.free_cos_theta_density(model, dens, np.array([tau]))[0]
        else:
            traj = rotor.propagate_state(
                model, rotor.ground_rotor_state(model), guess, dt_sub=guess.dt / rc.control_cfg.n_sub
            )
            v = rotor.free_cos_theta(model, traj.final_state, np.array([tau]))[0]
        sign = float(np.sign(v)) if v != 0 else 1.0
    # maximize |<cos theta>| at t_f + tau: orient the target along the guess's
    # own revival sign
    if rc.temperature > 0:
        target = system.stack_block_operator(lambda mod, mm: rotor.target_operator(mod, tau, mm))
    else:
        target = rotor.target_operator(model, tau, 0)
    return sign * target, tau, sign


def _grid_setup(rc: RunConfig):
    g = rc.grid
    if g["model"] == "synthetic":
        adia = gridfrag.synthetic_model()
    else:
        adia = gridfrag.read_model(g["model"])
    dia = gridfrag.diabatize(adia)
    gs, e0 = gridfrag.ground_state(dia)
    return dia, gs, e0


def run(config_path, outdir, workers: int = 1, overrides=()) -> int:
    """Dispatch a config to the matching driver; returns the exit status."""
    t_start = time.perf_counter()
    cp = parse_config(config_path, overrides)
    rc = build_run_config(cp, outdir)
    rc.outdir.mkdir(parents=True, exist_ok=True)
    summary: list[tuple[str, object]] = [("backend", rc.backend), ("mode", rc.mode)]

    if rc.backend == "rotor":
        guess = build_pulse(rc)
        area0, _ = pmod.area(guess)
        summary.append(("guess_area_au", f"{area0:.12e}"))
        if rc.mode == "none":
            if rc.temperature > 0:
                traj = rotor.propagate_density(
                    rc.rotor_model, rotor.boltzmann_init(rc.rotor_model, rc.temperature), guess, dt_sub=rc.dt_sub
                )
            else:
                traj = rotor.propagate_state(
                    rc.rotor_model, rotor.ground_rotor_state(rc.rotor_model), guess, dt_sub=rc.dt_sub
                )
            rotor.write_trajectory(rc.outdir / "trajectory.tsv", traj)
            _emit_pulse_products(rc.outdir, guess, "propagate run")
            summary.append(("max_abs_cos_theta", f"{np.max(np.abs(traj.cos_theta)):.12e}"))
            summary.append(("final_area_au", f"{area0:.12e}"))
        else:  # oct
            if rc.control_cfg.tf is None:
                rc.control_cfg.tf = guess.duration
            if rc.temperature > 0:
                system = control.RotorDensitySystem(rc.rotor_model, rc.temperature)
            else:
                system = control.RotorStateSystem(rc.rotor_model)
            target, tau, sign = _rotor_target(rc, system, guess)
            result = control.krotov_optimize(system, guess, target, rc.control_cfg)
            control.write_iteration_log(rc.outdir / "iterations.log", result)
            _emit_trajectory(rc.outdir, result.trajectory)
            meta = (
                f"lambda_au = {rc.control_cfg.lam}\nmu_au = {rc.control_cfg.mu}\n"
                f"iterations = {result.iterations}\nfinal_J = {result.final_cost:.12e}\n"
                f"tau_au = {tau:.12e}\ntarget_sign = {sign}"
            )
            _emit_pulse_products(rc.outdir, result.pulse, meta)
            summary.extend(
                [
                    ("iterations", result.iterations),
                    ("converged", result.converged),
                    ("objective", f"{result.final_objective:.12e}"),
                    ("final_J", f"{result.final_cost:.12e}"),
                    ("area_before_au", f"{area0:.12e}"),
                    ("area_after_au", f"{result.final_area:.12e}"),
                ]
            )
    else:  # gridfrag
        dia, gs, e_ground = _grid_setup(rc)
        g = rc.grid
        summary.append(("ground_energy_au", f"{e_ground:.12e}"))
        absorber = gridfrag.absorber_mask(dia.r, g["dt"]) if g["absorber"] else None
        if rc.mode == "none":
            guess = build_pulse(rc)
            n_sub = max(1, int(np.ceil(guess.dt / g["dt"])))
            traj = gridfrag.propagate_grid(dia, gs, guess, dt_sub=guess.dt / n_sub, absorber=absorber)
            _write_table(
                rc.outdir / "trajectory.tsv",
                ["t_au"] + [f"pop_ch{i}" for i in range(dia.n_channels)] + ["norm"],
                [traj.times] + [traj.populations[:, i] for i in range(dia.n_channels)] + [traj.norm],
            )
            _emit_pulse_products(rc.outdir, guess, "propagate run")
            area0, _ = pmod.area(guess)
            summary.append(("final_area_au", f"{area0:.12e}"))
            summary.append(
                ("target_population", f"{sum(traj.populations[-1, p] for p in g['channels']):.12e}")
            )
        else:
            if g["scattering_set"]:
                sset = gridfrag.load_scattering_set(g["scattering_set"])
            else:
                sset = gridfrag.scattering_set_from_energy_band(
                    dia, g["channels"], g["e_band"], g["n_k"], g["t_free"], dt=1.0, workers=workers
                )
            seeded = gridfrag.seeded_initial_state(dia, gs, eps=g["seed_eps"])
            system = control.GridSystem(dia, seeded.psi, absorber=absorber)
            if rc.mode == "lct":
                if rc.control_cfg.tf is None:
                    raise ConfigError("control.tf_au", "local control needs a horizon")
                control.check_free_commutation(system, sset, t_probe=50.0, dt=g["dt"], tol=1e-3)
                result = control.lct_run(system, sset, rc.control_cfg, dt=g["dt"])
                summary.append(("objective", f"{result.final_objective:.12e}"))
            else:  # oct on the channel projector
                guess = build_pulse(rc)
                if rc.control_cfg.tf is None:
                    rc.control_cfg.tf = guess.duration
                result = control.krotov_optimize(system, guess, g["channels"], rc.control_cfg)
                area_g, _ = pmod.area(guess)
                summary.append(("area_before_au", f"{area_g:.12e}"))
                summary.append(("objective", f"{result.final_objective:.12e}"))
            control.write_iteration_log(rc.outdir / "iterations.log", result)
            _emit_trajectory(rc.outdir, result.trajectory)
            meta = (
                f"mode = {rc.mode}\neta_au = {rc.control_cfg.eta}\n"
                f"mu_tilde_au = {rc.control_cfg.lct_mu_tilde if rc.mode == 'lct' else ''}\n"
                f"lambda_au = {rc.control_cfg.lam}\nmu_au = {rc.control_cfg.mu}\n"
                f"final_J = {result.final_cost:.12e}"
            )
            _emit_pulse_products(rc.outdir, result.pulse, meta)
            summary.append(("final_J", f"{result.final_cost:.12e}"))
            summary.append(("area_after_au", f"{result.final_area:.12e}"))

    summary.append(("wall_time_s", f"{time.perf_counter() - t_start:.3f}"))
    _write_summary(rc.outdir / "summary.txt", summary)
    return 0


# --- subcommand handlers ---------------------------------------------------------------------


def _cmd_run_factory(mode):
    def handler(args):
        overrides = list(args.override or [])
        overrides.append(f"run.mode={mode}")
        return run(args.config, args.out, workers=args.workers, overrides=overrides)

    return handler


def _cmd_scan(args):
    cp = parse_config(args.config, args.override or [])
    rc = build_run_config(cp, args.out)
    if rc.backend != "rotor":
        raise ConfigError("run.backend", "scan drives the rotor backend")
    f_lo = _get(cp, "scan", "f_min_thz", float, default=0.5)
    f_hi = _get(cp, "scan", "f_max_thz", float, default=3.0)
    d_lo = _get(cp, "scan", "delta_min_tper", float, default=0.12)
    d_hi = _get(cp, "scan", "delta_max_tper", float, default=0.25)
    n_f = _get(cp, "scan", "n_f", int, default=10)
    n_d = _get(cp, "scan", "n_delta", int, default=10)
    n_samples = _get(cp, "scan", "n_samples", int, default=512)
    intensity = _get(cp, "scan", "intensity_twcm2", float, default=20.0)
    t0 = time.perf_counter()
    matrix, fs, ds, argmax = scan_landscape(
        rc.rotor_model, (f_lo, f_hi), (d_lo, d_hi), (n_f, n_d), intensity,
        n_samples=n_samples, workers=args.workers,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "landscape.tsv", "w") as fh:
        fh.write("f_thz\tdelta_tper\tmax_abs_cos_theta\n")
        for i, f_thz in enumerate(fs):
            for j, d_frac in enumerate(ds):
                fh.write(f"{f_thz:.8e}\t{d_frac:.8e}\t{matrix[i, j]:.12e}\n")
    _write_summary(
        outdir / "summary.txt",
        [
            ("global_max", f"{matrix.max():.12e}"),
            ("argmax_f_thz", f"{argmax[0]:.8e}"),
            ("argmax_delta_tper", f"{argmax[1]:.8e}"),
            ("wall_time_s", f"{time.perf_counter() - t0:.3f}"),
        ],
    )
    return 0


def _cmd_filter(args):
    p = pmod.read_pulse(args.pulse)
    before, _ = pmod.area(p)
    q = pmod.filter_low_frequencies(p, args.cutoff_au)
    after, _ = pmod.area(q)
    pmod.write_pulse(args.out_pulse, q, comment=f"filtered, cutoff_au = {args.cutoff_au}")
    print(f"area_before_au = {before:.12e}")
    print(f"area_after_au = {after:.12e}")
    return 0


def _cmd_spectrum(args):
    p = pmod.read_pulse(args.pulse)
    pmod.write_spectrum(args.out_file, pmod.spectrum(p))
    return 0


def _cmd_spectrogram(args):
    p = pmod.read_pulse(args.pulse)
    width = args.window_au if args.window_au else max(p.duration / 8.0, 4 * p.dt)
    pmod.write_spectrogram(args.out_file, pmod.spectrogram(p, width, n_centers=args.n_centers))
    return 0


def _cmd_validate_model(args):
    defects = gridfrag.validate_model_file(args.model)
    if defects:
        for d in defects:
            print(d)
        return 2
    print("model file is clean")
    return 0


def _cmd_moller_build(args):
    cp = parse_config(args.config, args.override or [])
    rc = build_run_config(cp, args.out)
    if rc.backend != "gridfrag":
        raise ConfigError("run.backend", "moller-build drives the gridfrag backend")
    dia, _, _ = _grid_setup(rc)
    g = rc.grid
    sset = gridfrag.scattering_set_from_energy_band(
        dia, g["channels"], g["e_band"], g["n_k"], g["t_free"], dt=1.0, workers=args.workers
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gridfrag.save_scattering_set(out / "scattering_set.npz", sset)
    print(f"states = {sset.k_values.size}")
    print(f"max_residual = {sset.max_residual():.3e}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="zeroarea", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, handler, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE")
        p.set_defaults(func=handler)
        return p

    add_config_cmd("scan", _cmd_scan, "family-pulse orientation landscape")
    add_config_cmd("propagate", _cmd_run_factory("none"), "propagate a pulse, no optimization")
    add_config_cmd("lct", _cmd_run_factory("lct"), "closed-loop local control run")
    add_config_cmd("oct", _cmd_run_factory("oct"), "Krotov optimal-control run")
    add_config_cmd("moller-build", _cmd_moller_build, "build and persist a scattering set")

    p_filter = sub.add_parser("filter", help="hard low-frequency mask on a pulse file")
    p_filter.add_argument("--pulse", required=True)
    p_filter.add_argument("--cutoff-au", type=float, required=True, dest="cutoff_au")
    p_filter.add_argument("--out-pulse", required=True, dest="out_pulse")
    p_filter.set_defaults(func=_cmd_filter)

    p_spec = sub.add_parser("spectrum", help="export the spectrum of a pulse file")
    p_spec.add_argument("--pulse", required=True)
    p_spec.add_argument("--out-file", required=True, dest="out_file")
    p_spec.set_defaults(func=_cmd_spectrum)

    p_gram = sub.add_parser("spectrogram", help="export a Gaussian-window spectrogram")
    p_gram.add_argument("--pulse", required=True)
    p_gram.add_argument("--out-file", required=True, dest="out_file")
    p_gram.add_argument("--window-au", type=float, default=None, dest="window_au")
    p_gram.add_argument("--n-centers", type=int, default=32, dest="n_centers")
    p_gram.set_defaults(func=_cmd_spectrogram)

    p_val = sub.add_parser("validate-model", help="check a model file, report defects")
    p_val.add_argument("--model", required=True)
    p_val.set_defaults(func=_cmd_validate_model)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, gridfrag.ModelError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return 2
    except (control.ControlError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
