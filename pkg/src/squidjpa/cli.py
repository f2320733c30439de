"""Command-line front end.

Each subcommand runs one task from a JSON config (``--config``) with optional
``--set block.field=value`` overrides, writes CSV/JSON results into ``--out``
and a ``manifest.json`` echoing the resolved config.

Exit codes: 0 success, 2 configuration error, 3 a single-target task failed
to converge, 4 a map finished with failed cells, 1 anything else.
"""

import argparse
import json
import logging
import math
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .analysis import (
    FluxSweepRecord,
    StarkCalibration,
    drive_power_calibration,
    fit_reflection,
    flux_modulation_spectrum,
    photons_from_stark,
)
from .circuit import (
    CircuitParams,
    array_inductance,
    max_c3_bias,
    quality_factor,
    solve_dc_phase,
    taylor_coefficients,
    tunability_curve,
)
from .config import RunConfig, parse_config, set_path
from .coupling import capacitive_network, high_frequency_limit, pce, pce_spectrum
from .design_space import (
    FamilySpec,
    PipelineOptions,
    bias_pump_map,
    build_family,
    design_map,
)
from .dynamics import SolverOptions
from .errors import (
    BadFit,
    ConfigError,
    DivergedTrajectory,
    FitDiverged,
    MaxGainBelowTarget,
    NearPole,
    NoCompressionInRange,
    NoConvergence,
)
from .kernel import BACKEND
from .metrics import (
    find_p1db,
    gain_curve,
    pump_added_efficiency,
    saturation_sweep,
    tune_pump,
)
from .outputs import IoError, columns, ensure_dir, read_table, write_csv, write_json
from .parallel import THREADS_ENV, default_workers
from .units import GIGA, MEGA, PICO

log = logging.getLogger("squidjpa")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_MAP_FAILED = 0, 1, 2, 3, 4

CONVERGENCE_ERRORS = (NoConvergence, DivergedTrajectory, MaxGainBelowTarget,
                      NoCompressionInRange, FitDiverged, BadFit, NearPole)


class TaskResult:
    def __init__(self, tables=None, summary=None, exit_code=EXIT_OK):
        self.tables = tables or {}
        self.summary = summary or {}
        self.exit_code = exit_code


# ------------------------------------------------------------------ builders


def build_circuit(cfg: RunConfig):
    c = cfg.circuit
    phi_e = None if c.bias == "max_c3" else float(c.bias)
    if c.f0_target is not None:
        params, bias = build_family(c.l_shunt * PICO, c.q_target, c.l_junction * PICO,
                                    c.n_squids, c.f0_target * GIGA, phi_e)
        if c.c_coupling is not None:
            params = CircuitParams(params.n_squids, params.l_shunt, params.l_junction,
                                   params.c_main, params.r_env, c.c_coupling * PICO)
        return params, bias
    params = CircuitParams(
        c.n_squids, c.l_shunt * PICO, c.l_junction * PICO, c.c_main * PICO, c.r_env,
        None if c.c_coupling is None else c.c_coupling * PICO,
    )
    bias = max_c3_bias(params) if phi_e is None else solve_dc_phase(params, phi_e)
    return params, bias


def solver_options(cfg: RunConfig) -> SolverOptions:
    s = cfg.solver
    return SolverOptions(
        steps_per_pump_period=s.steps_per_period,
        tol=s.tol,
        min_periods=s.min_periods,
        max_periods=s.max_periods,
        warmup_pump_periods=s.warmup_periods,
        target_gain_db=max(cfg.amplifier.target_gain_db, 0.0),
    )


def pipeline_options(cfg: RunConfig) -> PipelineOptions:
    a = cfg.amplifier
    return PipelineOptions(
        target_gain_db=a.target_gain_db,
        probe_power_dbm=a.probe_power_dbm,
        detuning=a.detuning * MEGA,
        base_f=cfg.solver.base_frequency * MEGA,
        tol_db=a.tol_db,
        p1db_start_dbm=a.p1db_start_dbm,
        p1db_stop_dbm=a.p1db_stop_dbm,
        p1db_coarse_db=a.p1db_coarse_db,
        p1db_fine_db=a.p1db_fine_db,
        pae_reference=a.pae_reference,
    )


def _operating_point(params, bias):
    t = taylor_coefficients(params, bias)
    return {
        "beta": params.beta,
        "inv_beta_q": 1.0 / (params.beta * quality_factor(params, bias)),
        "c_main_f": params.c_main,
        "r_env_ohm": params.r_env,
        "phi_e_rad": bias.phi_e,
        "phi_e_flux_quanta": bias.phi_e / (2 * math.pi),
        "phi_dc_rad": bias.phi_dc,
        "f0_hz": bias.f0,
        "l_array_h": array_inductance(params, bias),
        "q": quality_factor(params, bias),
        "c2": t.c2,
        "c3": t.c3,
        "c4": t.c4,
    }


def _tune_kwargs(cfg, opts):
    p = pipeline_options(cfg)
    return dict(probe_power_dbm=p.probe_power_dbm, detuning=p.detuning, base_f=p.base_f,
                opts=opts, tol_db=p.tol_db)


def _tuned_pump(cfg, params, bias, opts, explicit):
    if explicit is not None:
        return explicit, None
    tune = tune_pump(params, bias, cfg.amplifier.target_gain_db, **_tune_kwargs(cfg, opts))
    return tune.pump_power_dbm, tune


# --------------------------------------------------------------------- tasks


def task_dc(cfg, workers):
    params, bias = build_circuit(cfg)
    grid = cfg.task_params.phi_e_grid
    rows = []
    for phi_e, f0, l_arr in tunability_curve(params, grid):
        b = solve_dc_phase(params, phi_e)
        t = taylor_coefficients(params, b)
        rows.append((phi_e, phi_e / (2 * math.pi), b.phi_dc, f0, l_arr, t.c2, t.c3, t.c4))
    header = ("phi_e_rad", "phi_e_flux_quanta", "phi_dc_rad", "f0_hz", "l_array_h", "c2", "c3", "c4")
    return TaskResult({"dc.csv": (header, rows)}, {"operating_point": _operating_point(params, bias)})


def task_tune(cfg, workers):
    params, bias = build_circuit(cfg)
    opts = solver_options(cfg)
    tp = cfg.task_params
    r = tune_pump(params, bias, cfg.amplifier.target_gain_db, step_db=tp.step_db,
                  span_db=tp.span_db, start_dbm=tp.start_dbm, **_tune_kwargs(cfg, opts))
    summary = {
        "operating_point": _operating_point(params, bias),
        "pump_power_dbm": r.pump_power_dbm,
        "core_pump_power_dbm": r.core_pump_power_dbm,
        "achieved_gain_db": r.achieved_gain_db,
        "pump_frequency_hz": r.pump_frequency,
        "max_power_balance": r.max_power_balance,
    }
    return TaskResult({"tune.csv": (("pump_power_dbm", "gain_db"), r.samples)}, summary)


def task_gain(cfg, workers):
    params, bias = build_circuit(cfg)
    opts = solver_options(cfg)
    pump, _ = _tuned_pump(cfg, params, bias, opts, cfg.task_params.pump_power_dbm)
    p = pipeline_options(cfg)
    curve = gain_curve(params, bias, pump, [d * MEGA for d in cfg.task_params.detunings],
                       p.probe_power_dbm, p.base_f, opts, workers)
    summary = {
        "pump_power_dbm": pump,
        "pump_frequency_hz": curve.pump_frequency,
        "peak_gain_db": curve.peak_gain_db,
        "bandwidth_3db_hz": curve.bandwidth_3db,
        "gain_bandwidth_hz": curve.gbw,
    }
    return TaskResult({"gain.csv": (("probe_frequency_hz", "gain_db"), curve.points)}, summary)


def task_saturate(cfg, workers):
    params, bias = build_circuit(cfg)
    opts = solver_options(cfg)
    p = pipeline_options(cfg)
    pump, tune = _tuned_pump(cfg, params, bias, opts, cfg.task_params.pump_power_dbm)
    powers = cfg.task_params.input_powers_dbm
    if powers:
        sat = saturation_sweep(params, bias, pump, powers, p.detuning, p.base_f, opts)
    else:
        ss = tune.achieved_gain_db if tune else None
        if ss is None:
            from .metrics import measure_gain

            ss = measure_gain(params, bias, pump, p.probe_power_dbm, p.detuning, p.base_f, opts).gain_db
        sat = find_p1db(params, bias, pump, ss, p.detuning, p.base_f, opts, p.p1db_start_dbm,
                        p.p1db_stop_dbm, p.p1db_coarse_db, p.p1db_fine_db, p.probe_power_dbm)
    core = tune.core_pump_power_dbm if tune else None
    summary = {
        "pump_power_dbm": pump,
        "core_pump_power_dbm": core,
        "small_signal_gain_db": sat.small_signal_gain,
        "input_p1db_dbm": sat.input_p1db,
        "output_p1db_dbm": sat.output_p1db,
        "max_power_balance": sat.max_power_balance,
    }
    eta_pump = core if (p.pae_reference == "core" and core is not None) else pump
    summary["eta_pae"], summary["eta_pae_db"] = pump_added_efficiency(sat, eta_pump)
    summary["eta_pae_reference"] = "core" if eta_pump is core else "incident"
    return TaskResult({"saturation.csv": (("input_power_dbm", "gain_db"), sat.sweep)}, summary)


CELL_COLUMNS = (
    "l_shunt_ph", "beta", "q_target", "inv_beta_q", "c_main_pf", "r_env_ohm", "phi_e_rad",
    "f0_hz", "status", "pump_power_20db_dbm", "core_pump_power_20db_dbm", "achieved_gain_db",
    "max_gain_db", "input_p1db_dbm", "output_p1db_dbm", "eta_pae", "eta_pae_db",
    "max_power_balance",
)


def cell_row(c):
    return (c.l_shunt / PICO, c.beta, c.q_target, c.inv_beta_q, c.c_main / PICO, c.r_env,
            c.bias_chosen.phi_e, c.bias_chosen.f0, c.status, c.pump_power_20db,
            c.core_pump_power_20db, c.achieved_gain_db, c.max_gain_db, c.input_p1db,
            c.output_p1db, c.eta_pae, c.eta_pae_db, c.max_power_balance)


def task_map(cfg, workers):
    c = cfg.circuit
    phi_e = None if c.bias == "max_c3" else float(c.bias)
    family = FamilySpec(c.l_junction * PICO, c.n_squids,
                        (c.f0_target if c.f0_target is not None else 6.0) * GIGA, phi_e)
    tp = cfg.task_params
    for i, l in enumerate(tp.l_shunt_grid):
        if l >= c.l_junction:
            raise ConfigError(f"/task/l_shunt_grid/{i}", "l_shunt >= l_junction gives a hysteretic loop")
    cells = design_map([l * PICO for l in tp.l_shunt_grid], list(tp.q_grid), family,
                       pipeline_options(cfg), solver_options(cfg), workers)
    counts = {}
    for cell in cells:
        counts[cell.status] = counts.get(cell.status, 0) + 1
    ok = [cell for cell in cells if cell.ok]
    summary = {"cells": len(cells), "status_counts": dict(sorted(counts.items()))}
    if ok:
        p1 = [cell.input_p1db for cell in ok]
        summary["input_p1db_spread_db"] = max(p1) - min(p1)
    failed = [cell for cell in cells if not cell.ok]
    for cell in failed:
        log.warning("cell L_s=%.3f pH Q=%.3f: %s %s", cell.l_shunt / PICO, cell.q_target,
                    cell.status, cell.message)
    code = EXIT_MAP_FAILED if failed else EXIT_OK
    return TaskResult({"cells.csv": (CELL_COLUMNS, [cell_row(x) for x in cells])}, summary, code)


def task_biasmap(cfg, workers):
    params, _ = build_circuit(cfg)
    tp = cfg.task_params
    for i, f in enumerate(tp.phi_e_grid):
        if not 0 < f < math.pi:
            raise ConfigError(f"/task/phi_e_grid/{i}", "must lie in (0, pi)")
    contour = bias_pump_map(params, tp.phi_e_grid, tp.pump_power_grid,
                            cfg.amplifier.target_gain_db, pipeline_options(cfg),
                            solver_options(cfg), workers, tp.along_branch)
    grid_rows = []
    for i, f in enumerate(contour.phi_e_grid):
        for j, p in enumerate(contour.pump_power_grid):
            g = contour.gain_db[i, j]
            grid_rows.append((f, p, None if contour.diverged[i, j] else g, bool(contour.diverged[i, j])))
    low_rows = [(b.phi_e, b.pump_power_dbm, b.core_pump_power_dbm, b.gain_db, b.input_p1db,
                 b.output_p1db, b.eta_pae, b.eta_pae_db) for b in contour.low_branch]
    high_rows = [(b.phi_e, b.pump_power_dbm) for b in contour.high_branch]
    summary = {"low_branch_points": len(low_rows), "high_branch_points": len(high_rows),
               "diverged_cells": int(contour.diverged.sum())}
    p1 = [b.input_p1db for b in contour.low_branch if b.input_p1db is not None]
    if p1:
        summary["input_p1db_range_db"] = max(p1) - min(p1)
    pumps = [b.pump_power_dbm for b in contour.low_branch]
    if pumps:
        summary["pump_power_range_db"] = max(pumps) - min(pumps)
    tables = {
        "grid.csv": (("phi_e_rad", "pump_power_dbm", "gain_db", "diverged"), grid_rows),
        "low_branch.csv": (("phi_e_rad", "pump_power_dbm", "core_pump_power_dbm", "gain_db",
                            "input_p1db_dbm", "output_p1db_dbm", "eta_pae", "eta_pae_db"), low_rows),
        "high_branch.csv": (("phi_e_rad", "pump_power_dbm"), high_rows),
    }
    return TaskResult(tables, summary)


def task_pce(cfg, workers):
    if cfg.circuit.c_coupling is None:
        raise ConfigError("/circuit/c_coupling", "required for the pce task")
    params, bias = build_circuit(cfg)
    tp = cfg.task_params
    net = capacitive_network(params.c_coupling, params.c_main, array_inductance(params, bias),
                             tp.r_source)
    freqs = np.linspace(tp.f_start, tp.f_stop, tp.points) * GIGA
    rows = []
    for w, eta in pce_spectrum(net, 2 * math.pi * freqs, tp.guard):
        db = None if eta is None else 10 * math.log10(eta)
        rows.append((w / (2 * math.pi), eta, db))
    w_p = 2.0 * bias.omega0
    summary = {
        "pump_frequency_hz": w_p / (2 * math.pi),
        "pole_frequencies_hz": [p / (2 * math.pi) for p in net.poles],
        "high_frequency_limit": high_frequency_limit(params.c_coupling, params.c_main),
    }
    try:
        summary["eta_pce_at_pump"], summary["eta_pce_at_pump_db"] = pce(net, w_p, tp.guard)
    except NearPole:
        summary["eta_pce_at_pump"] = None
    return TaskResult({"pce.csv": (("frequency_hz", "eta_pce", "eta_pce_db"), rows)}, summary)


def task_fluxfft(cfg, workers):
    tp = cfg.task_params
    t = read_table(tp.input, ("bias", "f0_hz"), ("q",))
    try:
        rec = FluxSweepRecord(t["bias"], t["f0_hz"], t.get("q"))
    except ValueError as exc:
        raise ConfigError("/task/input", str(exc)) from exc
    spec = flux_modulation_spectrum(rec, tp.threshold_db, tp.resample_tol)
    spectrum = columns(range(len(spec.frequencies)), spec.frequencies, spec.magnitudes, spec.retained)
    peaks = [(p.index, p.frequency, p.period, p.magnitude) for p in spec.peaks]
    recon = columns(spec.bias, spec.reconstruction)
    summary = {"relative_rms_error": spec.relative_rms_error, "peaks": len(peaks),
               "threshold_db": spec.threshold_db}
    if len(spec.peaks) >= 2:
        summary["peak_magnitude_ratio"] = spec.peaks[0].magnitude / spec.peaks[1].magnitude
    return TaskResult({
        "spectrum.csv": (("index", "frequency", "magnitude", "retained"), spectrum),
        "peaks.csv": (("index", "frequency", "period", "magnitude"), peaks),
        "reconstruction.csv": (("bias", "f0_hz"), recon),
    }, summary)


def task_calibrate(cfg, workers):
    tp = cfg.task_params
    cal = StarkCalibration(tp.two_chi * MEGA, tp.kappa * MEGA, tp.readout_frequency * GIGA)
    t = read_table(tp.input, ("drive_v",), ("photons", "qubit_shift_hz"))
    if ("photons" in t) == ("qubit_shift_hz" in t):
        raise ConfigError("/task/input", "need exactly one of the columns photons, qubit_shift_hz")
    if "photons" in t:
        n = t["photons"]
    else:
        n = np.array([photons_from_stark(cal, s) for s in t["qubit_shift_hz"]])
    fit = drive_power_calibration(list(zip(t["drive_v"], n)), cal)
    rows = columns(t["drive_v"], n, fit.power_dbm(t["drive_v"]))
    summary = {"exponent": fit.exponent, "prefactor": fit.prefactor,
               "photons_per_v2": fit.photons_per_v2, "watts_per_v2": fit.watts_per_v2,
               "chi_over_kappa": cal.chi_over_kappa}
    return TaskResult({"calibration.csv": (("drive_v", "photons", "input_power_dbm"), rows)}, summary)


def task_fit(cfg, workers):
    t = read_table(cfg.task_params.input, ("frequency_hz", "s11_re", "s11_im"))
    fit = fit_reflection(t["frequency_hz"], t["s11_re"] + 1j * t["s11_im"])
    summary = {"f0_hz": fit.f0, "q_total": fit.q_total, "kappa_hz": fit.kappa,
               "delay_s": fit.delay, "scale": fit.scale, "residual_rms": fit.residual_rms}
    return TaskResult({}, summary)


TASK_RUNNERS = {
    "dc": task_dc,
    "tune": task_tune,
    "gain": task_gain,
    "saturate": task_saturate,
    "map": task_map,
    "biasmap": task_biasmap,
    "pce": task_pce,
    "fluxfft": task_fluxfft,
    "calibrate": task_calibrate,
    "fit": task_fit,
}


# ------------------------------------------------------------------- running


def _resolve_out(cfg: RunConfig, name: str) -> str:
    root = os.path.abspath(cfg.output.directory)
    path = os.path.abspath(os.path.join(root, name))
    if os.path.commonpath([root, path]) != root:
        raise IoError(path, "outside the output directory")
    return path


def write_outputs(cfg: RunConfig, result: TaskResult, manifest: dict) -> list:
    """Write tables (csv), the summary (json) and the manifest; return file names."""
    ensure_dir(os.path.abspath(cfg.output.directory))
    written = []
    if "csv" in cfg.output.formats:
        for name, (header, rows) in sorted(result.tables.items()):
            write_csv(_resolve_out(cfg, name), header, rows)
            written.append(name)
    if "json" in cfg.output.formats:
        write_json(_resolve_out(cfg, "summary.json"), {"task": cfg.task, **result.summary})
        written.append("summary.json")
    manifest = dict(manifest, outputs=written + ["manifest.json"])
    write_json(_resolve_out(cfg, "manifest.json"), manifest)
    return written


def run(cfg: RunConfig, workers=None) -> int:
    """Execute one task and persist its outputs; returns the exit code."""
    workers = default_workers() if workers is None else workers
    t0 = time.perf_counter()
    code = EXIT_OK
    error = None
    try:
        result = TASK_RUNNERS[cfg.task](cfg, workers)
        code = result.exit_code
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CONVERGENCE_ERRORS as exc:
        print(f"{cfg.task}: {type(exc).__name__}: {exc}", file=sys.stderr)
        result = TaskResult(summary={"error": type(exc).__name__, "detail": str(exc)})
        code, error = EXIT_CONVERGENCE, exc
    manifest = {
        "config": cfg.to_document(),
        "versions": {"squidjpa": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "backend": BACKEND,
        "workers": workers,
        "wall_time_s": time.perf_counter() - t0,
        "exit_code": code,
        "summary": result.summary,
    }
    try:
        write_outputs(cfg, result, manifest)
    except IoError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if error is None and code == EXIT_OK:
        log.info("%s finished in %.1f s", cfg.task, manifest["wall_time_s"])
    return code


def _parse_override(text):
    if "=" not in text:
        raise ConfigError("/", f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squidjpa",
        description="Periodic steady-state simulation of rf-SQUID array parametric amplifiers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, metavar="TASK")
    helps = {
        "dc": "DC bias solution and tunability",
        "tune": "pump power for the target gain",
        "gain": "gain versus probe frequency",
        "saturate": "1 dB compression and pump-added efficiency",
        "map": "design map over shunt inductance and Q",
        "biasmap": "gain over bias flux and pump power",
        "pce": "pump phase-coupling efficiency spectrum",
        "fluxfft": "DCT of resonance frequency versus bias",
        "calibrate": "Stark-shift drive power calibration",
        "fit": "fit a reflection trace",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int,
                       help=f"worker processes (default ${THREADS_ENV} or all cores)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. circuit.l_shunt=12 (repeatable)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def load_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError("/", f"cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("/", f"invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("/", "expected a JSON object")
    task = doc.get("task")
    if isinstance(task, dict):
        if task.get("name", args.task) != args.task:
            raise ConfigError("/task/name", f"config is for {task.get('name')!r}, not {args.task!r}")
        task = dict(task, name=args.task)
    elif task is not None and task != args.task:
        raise ConfigError("/task", f"config is for {task!r}, not {args.task!r}")
    else:
        task = {"name": args.task}
    doc["task"] = task
    for text in args.overrides:
        key, value = _parse_override(text)
        set_path(doc, key, value)
    if args.out:
        set_path(doc, "output.directory", args.out)
    return parse_config(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.threads)


if __name__ == "__main__":
    sys.exit(main())
