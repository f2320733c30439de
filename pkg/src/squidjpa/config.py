"""Run configuration: JSON document -> validated, fully defaulted RunConfig.

Configs use engineering units (pH, pF, GHz, MHz, dBm, ohm); conversion to SI
happens when building simulation objects. Unknown keys are rejected and every
error carries a JSON-pointer path to the offending field.
"""

import json
import math
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import Any, Optional, Tuple

from .errors import ConfigError

TASKS = ("dc", "tune", "gain", "saturate", "map", "biasmap", "pce", "fluxfft", "calibrate", "fit")

_POSITIVE = "positive"
_NONNEG = "nonneg"


def _f(default=MISSING, check=None, choices=None, **kw):
    meta = {"check": check, "choices": choices}
    if default is MISSING:
        return field(metadata=meta, **kw)
    return field(default=default, metadata=meta, **kw)


@dataclass(frozen=True)
class CircuitConfig:
    """Either ``c_main`` + ``r_env`` or ``f0_target`` + ``q_target`` fix the circuit.

    ``bias`` is ``"max_c3"`` or a per-loop external phase in radians.
    """

    n_squids: int = _f(25, _POSITIVE)
    l_shunt: Optional[float] = _f(None, _POSITIVE)
    l_junction: float = _f(60.0, _POSITIVE)
    c_main: Optional[float] = _f(None, _POSITIVE)
    r_env: Optional[float] = _f(None, _POSITIVE)
    c_coupling: Optional[float] = _f(None, _POSITIVE)
    f0_target: Optional[float] = _f(None, _POSITIVE)
    q_target: Optional[float] = _f(None, _POSITIVE)
    bias: Any = _f("max_c3")


@dataclass(frozen=True)
class SolverConfig:
    steps_per_period: int = _f(512, _POSITIVE)
    tol: float = _f(1e-5, _POSITIVE)
    min_periods: int = _f(2, _POSITIVE)
    max_periods: int = _f(8, _POSITIVE)
    warmup_periods: Optional[int] = _f(None, _POSITIVE)
    base_frequency: float = _f(1.0, _POSITIVE)


@dataclass(frozen=True)
class AmplifierConfig:
    target_gain_db: float = 20.0
    probe_power_dbm: float = -140.0
    detuning: float = _f(1.0)
    tol_db: float = _f(0.05, _POSITIVE)
    p1db_start_dbm: float = -130.0
    p1db_stop_dbm: float = -40.0
    p1db_coarse_db: float = _f(2.0, _POSITIVE)
    p1db_fine_db: float = _f(0.25, _POSITIVE)
    pae_reference: str = _f("core", choices=("core", "incident"))


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: Tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class DcTask:
    phi_e_grid: Tuple[float, ...] = ()


@dataclass(frozen=True)
class TuneTask:
    start_dbm: Optional[float] = None
    step_db: float = _f(1.0, _POSITIVE)
    span_db: float = _f(20.0, _POSITIVE)


@dataclass(frozen=True)
class GainTask:
    pump_power_dbm: Optional[float] = None
    detunings: Tuple[float, ...] = (-100.0, -80.0, -60.0, -40.0, -30.0, -20.0, -10.0, -5.0, -1.0,
                                    1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0)


@dataclass(frozen=True)
class SaturateTask:
    pump_power_dbm: Optional[float] = None
    input_powers_dbm: Tuple[float, ...] = ()


@dataclass(frozen=True)
class MapTask:
    l_shunt_grid: Tuple[float, ...] = _f()
    q_grid: Tuple[float, ...] = _f()


@dataclass(frozen=True)
class BiasmapTask:
    phi_e_grid: Tuple[float, ...] = _f()
    pump_power_grid: Tuple[float, ...] = _f()
    along_branch: bool = True


@dataclass(frozen=True)
class PceTask:
    f_start: float = _f(1.0, _POSITIVE)
    f_stop: float = _f(40.0, _POSITIVE)
    points: int = _f(400, _POSITIVE)
    guard: float = _f(1e-3, _NONNEG)
    r_source: float = _f(50.0, _POSITIVE)


@dataclass(frozen=True)
class FluxfftTask:
    input: str = _f()
    threshold_db: float = _f(20.0, _POSITIVE)
    resample_tol: float = _f(0.05, _NONNEG)


@dataclass(frozen=True)
class CalibrateTask:
    input: str = _f()
    two_chi: float = _f(check=_POSITIVE)
    kappa: float = _f(check=_POSITIVE)
    readout_frequency: float = _f(check=_POSITIVE)


@dataclass(frozen=True)
class FitTask:
    input: str = _f()


TASK_BLOCKS = {
    "dc": DcTask,
    "tune": TuneTask,
    "gain": GainTask,
    "saturate": SaturateTask,
    "map": MapTask,
    "biasmap": BiasmapTask,
    "pce": PceTask,
    "fluxfft": FluxfftTask,
    "calibrate": CalibrateTask,
    "fit": FitTask,
}


@dataclass(frozen=True)
class RunConfig:
    task: str
    task_params: Any
    circuit: CircuitConfig = CircuitConfig()
    solver: SolverConfig = SolverConfig()
    amplifier: AmplifierConfig = AmplifierConfig()
    output: OutputConfig = OutputConfig()

    def to_document(self) -> dict:
        """Plain JSON-able form; ``parse_config`` of it gives back ``self``."""
        doc = asdict(self)
        params = doc.pop("task_params")
        doc["task"] = {"name": self.task, **params}
        return _listify(doc)


def _listify(x):
    if isinstance(x, dict):
        return {k: _listify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_listify(v) for v in x]
    return x


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if tp is Any:
        return value
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")
        return tuple(_coerce(v, args[0], f"{path}/{i}") for i, v in enumerate(value))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if not (_is_number(value) and float(value).is_integer()):
            raise ConfigError(path, "expected an integer")
        return int(value)
    if tp is float:
        if not _is_number(value) or not math.isfinite(value):
            raise ConfigError(path, "expected a finite number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    raise ConfigError(path, f"unsupported field type {tp}")


def _check(value, meta, path):
    check, choices = meta.get("check"), meta.get("choices")
    vals = value if isinstance(value, tuple) else (value,)
    for v in vals:
        if v is None or not _is_number(v):
            continue
        if check == _POSITIVE and not v > 0:
            raise ConfigError(path, f"must be > 0, got {v}")
        if check == _NONNEG and not v >= 0:
            raise ConfigError(path, f"must be >= 0, got {v}")
    if choices is not None and value not in choices:
        raise ConfigError(path, f"must be one of {', '.join(choices)}, got {value!r}")


def _parse_block(cls, doc, path):
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(path or "/", "expected an object")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in fields(cls)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{path}/{key}", "unknown key")
    kwargs = {}
    for name, f in known.items():
        fpath = f"{path}/{name}"
        if name in doc:
            value = _coerce(doc[name], hints[name], fpath)
        elif f.default is not MISSING:
            value = f.default
        else:
            raise ConfigError(fpath, "required field missing")
        _check(value, f.metadata, fpath)
        kwargs[name] = value
    return cls(**kwargs)


def _validate_circuit(c: CircuitConfig, task: str):
    if c.bias != "max_c3" and not (_is_number(c.bias) and 0 < c.bias < math.pi):
        raise ConfigError("/circuit/bias", "must be \"max_c3\" or a phase in (0, pi) rad")
    if task in ("map", "fluxfft", "calibrate", "fit"):
        return
    if c.l_shunt is None:
        raise ConfigError("/circuit/l_shunt", "required field missing")
    if c.l_shunt >= c.l_junction:
        raise ConfigError("/circuit/l_shunt", "l_shunt >= l_junction gives a hysteretic loop")
    explicit = (c.c_main is not None, c.r_env is not None)
    family = (c.f0_target is not None, c.q_target is not None)
    if any(explicit) and any(family):
        raise ConfigError("/circuit", "give either c_main/r_env or f0_target/q_target, not both")
    if all(explicit) or all(family):
        return
    if any(explicit):
        missing = "r_env" if explicit[0] else "c_main"
    elif any(family):
        missing = "q_target" if family[0] else "f0_target"
    else:
        missing = "c_main"
    raise ConfigError(f"/circuit/{missing}", "required field missing")


def parse_config(document) -> RunConfig:
    """Validate a JSON document (str, bytes or already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError("/", f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError("/", "expected a JSON object")
    allowed = {"task", "circuit", "solver", "amplifier", "output"}
    for key in document:
        if key not in allowed:
            raise ConfigError(f"/{key}", "unknown key")
    task_doc = document.get("task")
    if task_doc is None:
        raise ConfigError("/task", "required field missing")
    if isinstance(task_doc, str):
        task_doc = {"name": task_doc}
    if not isinstance(task_doc, dict):
        raise ConfigError("/task", "expected a task name or an object with a name")
    task_doc = dict(task_doc)
    name = task_doc.pop("name", None)
    if name not in TASKS:
        raise ConfigError("/task/name", f"must be one of {', '.join(TASKS)}, got {name!r}")
    task_params = _parse_block(TASK_BLOCKS[name], task_doc, "/task")
    required_grids = {"map": ("l_shunt_grid", "q_grid"), "biasmap": ("phi_e_grid", "pump_power_grid")}
    for which in required_grids.get(name, ()):
        if not getattr(task_params, which):
            raise ConfigError(f"/task/{which}", "must not be empty")
    if name == "biasmap":
        for i, v in enumerate(task_params.phi_e_grid):
            if not 0 < v < math.pi:
                raise ConfigError(f"/task/phi_e_grid/{i}", "must lie in (0, pi) rad")
    circuit = _parse_block(CircuitConfig, document.get("circuit"), "/circuit")
    _validate_circuit(circuit, name)
    solver = _parse_block(SolverConfig, document.get("solver"), "/solver")
    if solver.min_periods < 2:
        raise ConfigError("/solver/min_periods", "must be >= 2")
    if solver.max_periods < solver.min_periods:
        raise ConfigError("/solver/max_periods", "must be >= min_periods")
    if solver.steps_per_period < 8:
        raise ConfigError("/solver/steps_per_period", "must be >= 8")
    amplifier = _parse_block(AmplifierConfig, document.get("amplifier"), "/amplifier")
    output = _parse_block(OutputConfig, document.get("output"), "/output")
    for i, fmt in enumerate(output.formats):
        if fmt not in ("csv", "json"):
            raise ConfigError(f"/output/formats/{i}", f"unknown format {fmt!r}")
    return RunConfig(name, task_params, circuit, solver, amplifier, output)


def set_path(document: dict, dotted: str, value) -> dict:
    """Apply an override like ``circuit.l_shunt=12``; creates missing blocks."""
    keys = dotted.split(".")
    node = document
    for k in keys[:-1]:
        if k == "task" and isinstance(node.get("task"), str):
            node["task"] = {"name": node["task"]}
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError("/" + "/".join(keys), "cannot override inside a non-object")
    node[keys[-1]] = value
    return document
