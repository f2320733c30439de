"""Design-space exploration over amplifier families.

A family fixes the junction inductance, the number of loops and the operating
frequency; each cell picks a shunt inductance and a quality factor, re-derives
the capacitance and environment resistance at the operating bias, and runs
the tune-up / saturation / efficiency pipeline.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import partial
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .circuit import (
    CircuitParams,
    FluxBias,
    array_inductance,
    max_c3_bias,
    solve_dc_phase,
)
from .dynamics import SolverOptions
from .errors import (
    DivergedTrajectory,
    MaxGainBelowTarget,
    NoCompressionInRange,
    NoConvergence,
    SquidJPAError,
)
from .metrics import (
    DEFAULT_BASE_HZ,
    DEFAULT_DETUNING_HZ,
    DEFAULT_PROBE_DBM,
    find_p1db,
    measure_gain,
    pump_added_efficiency,
    refine_crossing,
    tune_pump,
)
from .parallel import pmap

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

STATUS_OK = "ok"
STATUS_NO_20DB = "no_20db"
STATUS_DIVERGED = "diverged"

DEFAULT_L_SHUNT_GRID = tuple(np.linspace(8e-12, 30e-12, 6))
DEFAULT_Q_GRID = tuple(np.linspace(4.0, 14.0, 6))


@dataclass(frozen=True)
class FamilySpec:
    """Parameters shared by every cell of a design map (SI units)."""

    l_junction: float = 60e-12
    n_squids: int = 25
    f0_target: float = 6e9
    phi_e: Optional[float] = None


@dataclass(frozen=True)
class PipelineOptions:
    """Knobs of the per-cell tune-up and saturation search.

    ``pae_reference`` selects the pump power in the efficiency denominator:
    ``"core"`` uses the pump wave power at the array node, ``"incident"`` the
    applied pump power.
    """

    target_gain_db: float = 20.0
    probe_power_dbm: float = DEFAULT_PROBE_DBM
    detuning: float = DEFAULT_DETUNING_HZ
    base_f: float = DEFAULT_BASE_HZ
    tol_db: float = 0.05
    p1db_start_dbm: float = -130.0
    p1db_stop_dbm: float = -40.0
    p1db_coarse_db: float = 2.0
    p1db_fine_db: float = 0.25
    pae_reference: str = "core"

    def __post_init__(self):
        if self.pae_reference not in ("core", "incident"):
            raise ValueError(f"pae_reference must be 'core' or 'incident', got {self.pae_reference!r}")


def build_family(
    l_shunt: float,
    q_target: float,
    l_junction: float = 60e-12,
    n_squids: int = 25,
    f0_target: float = 6e9,
    phi_e: Optional[float] = None,
) -> Tuple[CircuitParams, FluxBias]:
    """Circuit resonant at ``f0_target`` with quality factor ``q_target``.

    The bias is the maximum-``c3`` point unless ``phi_e`` is given. The
    capacitance and environment resistance are derived at that bias, where
    ``L_arr`` is the array inductance::

        C = 1 / ((2 pi f0)^2 L_arr),    r_env = Q sqrt(L_arr / C)
    """
    for name, v in (("l_shunt", l_shunt), ("q_target", q_target), ("l_junction", l_junction),
                    ("f0_target", f0_target)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be finite and > 0, got {v}")
    # placeholder C and r_env; the bias depends only on beta and N
    probe = CircuitParams(n_squids, l_shunt, l_junction, 1e-12, 50.0)
    bias = max_c3_bias(probe) if phi_e is None else solve_dc_phase(probe, phi_e)
    l_arr = array_inductance(probe, bias)
    c = 1.0 / ((TWO_PI * f0_target) ** 2 * l_arr)
    r = q_target * math.sqrt(l_arr / c)
    params = CircuitParams(n_squids, l_shunt, l_junction, c, r)
    return params, solve_dc_phase(params, bias.phi_e)


@dataclass
class DesignMapCell:
    l_shunt: float
    beta: float
    q_target: float
    inv_beta_q: float
    c_main: float
    r_env: float
    bias_chosen: FluxBias
    status: str
    pump_power_20db: Optional[float] = None
    core_pump_power_20db: Optional[float] = None
    achieved_gain_db: Optional[float] = None
    max_gain_db: Optional[float] = None
    input_p1db: Optional[float] = None
    output_p1db: Optional[float] = None
    eta_pae: Optional[float] = None
    eta_pae_db: Optional[float] = None
    max_power_balance: Optional[float] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def _pae_pump(pipeline: PipelineOptions, incident: float, core: float) -> float:
    return core if pipeline.pae_reference == "core" else incident


def run_cell(
    l_shunt: float,
    q_target: float,
    family: FamilySpec = FamilySpec(),
    pipeline: PipelineOptions = PipelineOptions(),
    opts: Optional[SolverOptions] = None,
) -> DesignMapCell:
    """Full pipeline for one cell; failures are recorded in ``status``."""
    params, bias = build_family(l_shunt, q_target, family.l_junction, family.n_squids,
                                family.f0_target, family.phi_e)
    opts = opts or SolverOptions(target_gain_db=pipeline.target_gain_db)
    cell = DesignMapCell(
        l_shunt=l_shunt,
        beta=params.beta,
        q_target=q_target,
        inv_beta_q=1.0 / (params.beta * q_target),
        c_main=params.c_main,
        r_env=params.r_env,
        bias_chosen=bias,
        status=STATUS_DIVERGED,
    )
    common = dict(detuning=pipeline.detuning, base_f=pipeline.base_f, opts=opts)
    try:
        tune = tune_pump(params, bias, pipeline.target_gain_db,
                         probe_power_dbm=pipeline.probe_power_dbm, tol_db=pipeline.tol_db, **common)
    except MaxGainBelowTarget as exc:
        cell.status = STATUS_NO_20DB
        cell.max_gain_db = exc.max_gain_db
        cell.message = str(exc)
        return cell
    except (SquidJPAError, ValueError) as exc:
        cell.message = str(exc)
        return cell
    cell.max_gain_db = max(g for _, g in tune.samples)
    cell.max_power_balance = tune.max_power_balance
    try:
        sat = find_p1db(
            params, bias, tune.pump_power_dbm, tune.achieved_gain_db,
            start_dbm=pipeline.p1db_start_dbm, stop_dbm=pipeline.p1db_stop_dbm,
            coarse_db=pipeline.p1db_coarse_db, fine_db=pipeline.p1db_fine_db,
            probe_power_dbm=pipeline.probe_power_dbm, **common,
        )
    except (NoCompressionInRange, SquidJPAError) as exc:
        cell.message = f"20 dB at {tune.pump_power_dbm:.3f} dBm but saturation search failed: {exc}"
        return cell
    eta, eta_db = pump_added_efficiency(
        sat, _pae_pump(pipeline, tune.pump_power_dbm, tune.core_pump_power_dbm)
    )
    cell.max_power_balance = max(tune.max_power_balance, sat.max_power_balance)
    cell.status = STATUS_OK
    cell.pump_power_20db = tune.pump_power_dbm
    cell.core_pump_power_20db = tune.core_pump_power_dbm
    cell.achieved_gain_db = tune.achieved_gain_db
    cell.input_p1db = sat.input_p1db
    cell.output_p1db = sat.output_p1db
    cell.eta_pae = eta
    cell.eta_pae_db = eta_db
    return cell


def _cell_task(args):
    l_shunt, q, family, pipeline, opts = args
    return run_cell(l_shunt, q, family, pipeline, opts)


def design_cells(
    pairs: Sequence[Tuple[float, float]],
    family: FamilySpec = FamilySpec(),
    pipeline: PipelineOptions = PipelineOptions(),
    opts: Optional[SolverOptions] = None,
    workers: Optional[int] = None,
) -> List[DesignMapCell]:
    """Run an explicit list of ``(l_shunt, q_target)`` cells, in order."""
    pairs = [(float(l), float(q)) for l, q in pairs]
    for l, q in pairs:
        if not (math.isfinite(l) and math.isfinite(q)):
            raise ValueError(f"non-finite grid point ({l}, {q})")
        if l / family.l_junction >= 1.0:
            raise ValueError(f"l_shunt {l:.4g} H gives beta >= 1")
    return pmap(_cell_task, [(l, q, family, pipeline, opts) for l, q in pairs], workers)


def design_map(
    l_shunt_grid: Sequence[float] = DEFAULT_L_SHUNT_GRID,
    q_grid: Sequence[float] = DEFAULT_Q_GRID,
    family: FamilySpec = FamilySpec(),
    pipeline: PipelineOptions = PipelineOptions(),
    opts: Optional[SolverOptions] = None,
    workers: Optional[int] = None,
) -> List[DesignMapCell]:
    """Every ``(l_shunt, q)`` combination; rows of fixed ``q``, ``l_shunt`` fastest."""
    pairs = [(l, q) for q, l in product(q_grid, l_shunt_grid)]
    return design_cells(pairs, family, pipeline, opts, workers)


def inverse_beta_q_pairs(inv_beta_q: Sequence[float], q_grid: Sequence[float],
                         l_junction: float = 60e-12) -> List[Tuple[float, float]]:
    """``(l_shunt, q)`` pairs lying on lines of constant ``1/(beta Q)``."""
    return [(l_junction / (x * q), q) for x in inv_beta_q for q in q_grid]


@dataclass
class EfficiencyTables:
    """Pump power and efficiency indexed by ``(Q, 1/(beta Q))``; NaN where absent."""

    q: List[float]
    inv_beta_q: List[float]
    pump_power_dbm: np.ndarray
    core_pump_power_dbm: np.ndarray
    eta_pae_db: np.ndarray
    input_p1db: np.ndarray


def _key(x: float) -> float:
    return float(f"{x:.9g}")


def efficiency_maps(cells: Sequence[DesignMapCell]) -> EfficiencyTables:
    """Tabulate ok cells on the ``Q`` x ``1/(beta Q)`` axes present in ``cells``."""
    qs = sorted({_key(c.q_target) for c in cells})
    xs = sorted({_key(c.inv_beta_q) for c in cells})
    shape = (len(qs), len(xs))
    tabs = {k: np.full(shape, np.nan) for k in ("pump", "core", "eta", "p1db")}
    qi = {q: i for i, q in enumerate(qs)}
    xi = {x: i for i, x in enumerate(xs)}
    for c in cells:
        if not c.ok:
            continue
        ij = qi[_key(c.q_target)], xi[_key(c.inv_beta_q)]
        tabs["pump"][ij] = c.pump_power_20db
        tabs["core"][ij] = c.core_pump_power_20db
        tabs["eta"][ij] = c.eta_pae_db
        tabs["p1db"][ij] = c.input_p1db
    return EfficiencyTables(qs, xs, tabs["pump"], tabs["core"], tabs["eta"], tabs["p1db"])


# ------------------------------------------------------------- bias contours


@dataclass
class BranchPoint:
    phi_e: float
    pump_power_dbm: float
    gain_db: float
    core_pump_power_dbm: Optional[float] = None
    input_p1db: Optional[float] = None
    output_p1db: Optional[float] = None
    eta_pae: Optional[float] = None
    eta_pae_db: Optional[float] = None


@dataclass
class BiasContour:
    phi_e_grid: np.ndarray
    pump_power_grid: np.ndarray
    gain_db: np.ndarray
    diverged: np.ndarray
    low_branch: List[BranchPoint]
    high_branch: List[BranchPoint]
    target_gain_db: float = 20.0

    @property
    def along_branch(self) -> List[Tuple[float, Optional[float], Optional[float]]]:
        return [(p.phi_e, p.input_p1db, p.eta_pae_db) for p in self.low_branch]


def _interp(x0, y0, x1, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def _grid_task(args):
    params, phi_e, pump_dbm, pipeline, opts = args
    bias = solve_dc_phase(params, phi_e)
    try:
        return measure_gain(params, bias, pump_dbm, pipeline.probe_power_dbm, pipeline.detuning,
                            pipeline.base_f, opts).gain_db
    except (DivergedTrajectory, NoConvergence):
        return math.nan


def low_crossing(pumps: Sequence[float], gains: Sequence[float], level: float) -> Optional[int]:
    """Index ``j`` of the first rising crossing ``g[j] < level <= g[j+1]``."""
    for j in range(len(gains) - 1):
        g0, g1 = gains[j], gains[j + 1]
        if math.isfinite(g0) and math.isfinite(g1) and g0 < level <= g1:
            return j
    return None


def high_crossings(pumps: Sequence[float], gains: Sequence[float], level: float) -> List[float]:
    """Interpolated falling crossings at or after the gain maximum."""
    g = np.asarray(gains, dtype=float)
    if not np.any(np.isfinite(g)):
        return []
    jmax = int(np.nanargmax(g))
    out = []
    for j in range(jmax, len(g) - 1):
        g0, g1 = g[j], g[j + 1]
        if math.isfinite(g0) and math.isfinite(g1) and g0 >= level > g1:
            out.append(_interp(pumps[j], g0, pumps[j + 1], g1, level))
    return out


def _branch_task(args):
    params, phi_e, lo_p, hi_p, pipeline, opts = args
    bias = solve_dc_phase(params, phi_e)
    measure = partial(measure_gain, params, bias, probe_power_dbm=pipeline.probe_power_dbm,
                      detuning=pipeline.detuning, base_f=pipeline.base_f, opts=opts)
    try:
        pt = refine_crossing(measure, measure(lo_p), measure(hi_p), pipeline.target_gain_db,
                             pipeline.tol_db)
    except (DivergedTrajectory, NoConvergence) as exc:
        log.info("branch refinement failed at phi_e=%.4f: %s", phi_e, exc)
        return None
    bp = BranchPoint(phi_e, pt.pump_power_dbm, pt.gain_db, pt.core_pump_power_dbm)
    try:
        sat = find_p1db(params, bias, pt.pump_power_dbm, pt.gain_db, pipeline.detuning,
                        pipeline.base_f, opts, pipeline.p1db_start_dbm, pipeline.p1db_stop_dbm,
                        pipeline.p1db_coarse_db, pipeline.p1db_fine_db, pipeline.probe_power_dbm)
    except SquidJPAError as exc:
        log.info("no compression along branch at phi_e=%.4f: %s", phi_e, exc)
        return bp
    bp.input_p1db = sat.input_p1db
    bp.output_p1db = sat.output_p1db
    bp.eta_pae, bp.eta_pae_db = pump_added_efficiency(
        sat, _pae_pump(pipeline, pt.pump_power_dbm, pt.core_pump_power_dbm)
    )
    return bp


def bias_pump_map(
    params: CircuitParams,
    phi_e_grid: Sequence[float],
    pump_power_grid: Sequence[float],
    target_gain_db: float = 20.0,
    pipeline: Optional[PipelineOptions] = None,
    opts: Optional[SolverOptions] = None,
    workers: Optional[int] = None,
    along_branch: bool = True,
) -> BiasContour:
    """Gain over bias flux x pump power and the target-gain contour.

    The pump sits at twice the bias-dependent resonance. Each bias row's first
    rising crossing of the target is the low branch, refined by bisection;
    falling crossings after the row maximum form the high branch. Along the
    low branch the saturation power and pump-added efficiency are computed.
    """
    phi = np.asarray(phi_e_grid, dtype=float)
    pumps = np.asarray(sorted(float(p) for p in pump_power_grid))
    if np.any(phi <= 0) or np.any(phi >= math.pi):
        raise ValueError("phi_e_grid must lie inside (0, pi)")
    pipeline = replace(pipeline or PipelineOptions(), target_gain_db=target_gain_db)
    opts = opts or SolverOptions(target_gain_db=target_gain_db)

    tasks = [(params, float(f), float(p), pipeline, opts) for f in phi for p in pumps]
    gains = np.array(pmap(_grid_task, tasks, workers)).reshape(phi.size, pumps.size)
    diverged = ~np.isfinite(gains)

    branch_tasks = []
    high = []
    for i, f in enumerate(phi):
        row = gains[i]
        j = low_crossing(pumps, row, target_gain_db)
        if j is not None:
            branch_tasks.append((params, float(f), float(pumps[j]), float(pumps[j + 1]), pipeline, opts))
        for p in high_crossings(pumps, row, target_gain_db):
            high.append(BranchPoint(float(f), float(p), target_gain_db))

    if along_branch:
        low = [bp for bp in pmap(_branch_task, branch_tasks, workers) if bp is not None]
    else:
        low = []
        for params_, f, lo_p, hi_p, _, _ in branch_tasks:
            i = int(np.flatnonzero(phi == f)[0])
            j = int(np.flatnonzero(pumps == lo_p)[0])
            p = _interp(lo_p, gains[i, j], hi_p, gains[i, j + 1], target_gain_db)
            low.append(BranchPoint(f, p, target_gain_db))
    return BiasContour(phi, pumps, gains, diverged, low, high, target_gain_db)
