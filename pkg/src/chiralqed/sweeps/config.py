"""JSON scenario configuration: parsing, validation and grid enumeration.

Schema (all keys optional except ``mode``)::

    {
      "mode": "single_excitation" | "weak_drive" | "correlations" | "full_me",
      "params": {<SystemParams field>: number, "omega": number or [re, im]},
      "sweep": [
        {"param": "g_a", "start": 0.01, "stop": 0.25, "num": 25, "scale": "log"},
        {"param": "delta_b", "values": [0.0, 0.1]}
      ],
      "ties": {"g_b": {"param": "g_a", "factor": 0.1490712}, "gamma_a": {"param": "gamma_q"}},
      "solver": {"n_max": 1, "rtol": 1e-8, "atol": 1e-10, "horizon": null},
      "output": "results.csv",
      "workers": 1,
      "provenance": {<name>: "paper" | "choice"}
    }

Ties are applied after the sweep values, so tied parameters follow the swept
ones.  ``n_max`` lives under ``solver``; its default depends on the mode.
"""

from __future__ import annotations

import difflib
import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from ..core_model import SystemParams

MODES = ("single_excitation", "weak_drive", "correlations", "full_me")
DEFAULT_NMAX = {"single_excitation": 1, "full_me": 1, "weak_drive": 2, "correlations": 2}
PHYSICAL = tuple(name for name in SystemParams.field_names() if name != "n_max")
TOP_KEYS = ("mode", "params", "sweep", "ties", "solver", "output", "workers", "provenance")
AXIS_KEYS = ("param", "start", "stop", "num", "scale", "values")
TIE_KEYS = ("param", "factor")
SOLVER_KEYS = ("n_max", "rtol", "atol", "horizon")
MAX_AXES = 2


class ConfigError(ValueError):
    """Carries every validation problem found, not only the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class SweepAxis:
    param: str
    values: tuple[float, ...]
    scale: str = "values"  # linear | log | values


@dataclass(frozen=True)
class Tie:
    target: str
    source: str
    factor: float = 1.0


@dataclass(frozen=True)
class SolverOptions:
    n_max: int
    rtol: float = 1e-8
    atol: float = 1e-10
    horizon: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str
    base: SystemParams
    axes: tuple[SweepAxis, ...] = ()
    ties: tuple[Tie, ...] = ()
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(n_max=1))
    output: str | None = None
    workers: int = 1
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax.values) for ax in self.axes)

    def __len__(self) -> int:
        return int(np.prod(self.shape)) if self.axes else 1

    def grid(self) -> list[SystemParams]:
        """Parameter points in row-major order over the axes (first axis outermost)."""
        return [self.point(combo) for combo in itertools.product(*(ax.values for ax in self.axes))]

    def point(self, combo) -> SystemParams:
        values = {ax.param: float(v) for ax, v in zip(self.axes, combo)}
        p = self.base.replace(**values)
        for tie in self.ties:
            p = p.replace(**{tie.target: tie.factor * getattr(p, tie.source)})
        return p

    def to_dict(self) -> dict:
        """JSON-ready form; parse_config(json.dumps(cfg.to_dict())) reproduces cfg."""
        params = {}
        for name in PHYSICAL:
            value = getattr(self.base, name)
            if name == "omega":
                value = complex(value)
                value = value.real if value.imag == 0 else [value.real, value.imag]
            params[name] = value
        out = {
            "mode": self.mode,
            "params": params,
            "sweep": [{"param": ax.param, "values": list(ax.values)} for ax in self.axes],
            "ties": {t.target: {"param": t.source, "factor": t.factor} for t in self.ties},
            "solver": {"n_max": self.solver.n_max, "rtol": self.solver.rtol, "atol": self.solver.atol,
                       "horizon": self.solver.horizon},
            "output": self.output,
            "workers": self.workers,
        }
        if self.provenance:
            out["provenance"] = dict(self.provenance)
        return out

    def physics_hash(self) -> str:
        """Hash of everything that affects the numbers (workers and output path excluded)."""
        d = self.to_dict()
        d.pop("workers")
        d.pop("output")
        d.pop("provenance", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _suggest(name: str, options) -> str:
    close = difflib.get_close_matches(name, list(options), n=1, cutoff=0.4)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _unknown_keys(section: str, data: dict, allowed, errors: list[str]) -> None:
    for key in data:
        if key not in allowed:
            errors.append(f"{section}: unknown key {key!r}{_suggest(key, allowed)}")


def _number(where: str, value, errors: list[str], positive=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        errors.append(f"{where}: expected a finite number, got {value!r}")
        return None
    if positive and value <= 0:
        errors.append(f"{where}: must be > 0, got {value!r}")
        return None
    return float(value)


def _parse_params(data, errors) -> dict:
    if not isinstance(data, dict):
        errors.append("params: expected an object")
        return {}
    if "n_max" in data:
        errors.append("params: 'n_max' belongs under 'solver'")
    _unknown_keys("params", {k: v for k, v in data.items() if k != "n_max"}, PHYSICAL, errors)
    out = {}
    for name in PHYSICAL:
        if name not in data:
            continue
        value = data[name]
        if name == "omega" and isinstance(value, list):
            if len(value) != 2:
                errors.append("params.omega: complex values are written as [re, im]")
                continue
            re = _number("params.omega[0]", value[0], errors)
            im = _number("params.omega[1]", value[1], errors)
            if re is not None and im is not None:
                out[name] = complex(re, im)
            continue
        v = _number(f"params.{name}", value, errors)
        if v is not None:
            out[name] = v
    return out


def _parse_axis(k: int, data, errors) -> SweepAxis | None:
    where = f"sweep[{k}]"
    if not isinstance(data, dict):
        errors.append(f"{where}: expected an object")
        return None
    _unknown_keys(where, data, AXIS_KEYS, errors)
    name = data.get("param")
    if name not in PHYSICAL:
        hint = _suggest(str(name), PHYSICAL) if isinstance(name, str) else ""
        errors.append(f"{where}.param: {name!r} is not a sweepable parameter{hint}")
        name = None
    if "values" in data:
        if any(key in data for key in ("start", "stop", "num", "scale")):
            errors.append(f"{where}: give either 'values' or start/stop/num, not both")
        values = data["values"]
        if not isinstance(values, list) or not values:
            errors.append(f"{where}.values: expected a nonempty list")
            return None
        nums = [_number(f"{where}.values[{i}]", v, errors) for i, v in enumerate(values)]
        if any(v is None for v in nums) or name is None:
            return None
        return SweepAxis(name, tuple(nums), "values")
    missing = [key for key in ("start", "stop", "num") if key not in data]
    if missing:
        errors.append(f"{where}: missing {', '.join(missing)} (or give 'values')")
        return None
    start = _number(f"{where}.start", data["start"], errors)
    stop = _number(f"{where}.stop", data["stop"], errors)
    num = data["num"]
    if isinstance(num, bool) or not isinstance(num, int) or num < 1:
        errors.append(f"{where}.num: expected an integer >= 1, got {num!r}")
        num = None
    scale = data.get("scale", "linear")
    if scale not in ("linear", "log"):
        errors.append(f"{where}.scale: expected 'linear' or 'log', got {scale!r}")
        scale = None
    if None in (start, stop, num, scale, name):
        return None
    if stop < start:
        errors.append(f"{where}: empty range, stop {stop} < start {start}")
        return None
    if scale == "log":
        if start <= 0:
            errors.append(f"{where}: log scale needs start > 0")
            return None
        values = np.geomspace(start, stop, num)
    else:
        values = np.linspace(start, stop, num)
    return SweepAxis(name, tuple(float(v) for v in values), scale)


def _parse_ties(data, errors) -> list[Tie]:
    if not isinstance(data, dict):
        errors.append("ties: expected an object")
        return []
    ties = []
    for target, spec in data.items():
        where = f"ties.{target}"
        if target not in PHYSICAL:
            errors.append(f"ties: {target!r} is not a parameter{_suggest(target, PHYSICAL)}")
            continue
        if not isinstance(spec, dict):
            errors.append(f"{where}: expected an object like {{'param': 'g_a', 'factor': 0.5}}")
            continue
        _unknown_keys(where, spec, TIE_KEYS, errors)
        source = spec.get("param")
        if source not in PHYSICAL:
            hint = _suggest(str(source), PHYSICAL) if isinstance(source, str) else ""
            errors.append(f"{where}.param: {source!r} is not a parameter{hint}")
            continue
        factor = _number(f"{where}.factor", spec.get("factor", 1.0), errors)
        if factor is not None:
            ties.append(Tie(target, source, factor))
    targets = {t.target for t in ties}
    for t in ties:
        if t.source in targets:
            errors.append(f"ties.{t.target}: source {t.source!r} is itself tied; chains are not supported")
    return ties


def _parse_solver(data, mode, errors) -> SolverOptions:
    default = SolverOptions(n_max=DEFAULT_NMAX.get(mode, 1))
    if not isinstance(data, dict):
        errors.append("solver: expected an object")
        return default
    _unknown_keys("solver", data, SOLVER_KEYS, errors)
    n_max = data.get("n_max", default.n_max)
    if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 1:
        errors.append(f"solver.n_max: expected an integer >= 1, got {n_max!r}")
        n_max = default.n_max
    rtol = _number("solver.rtol", data.get("rtol", default.rtol), errors, positive=True)
    atol = _number("solver.atol", data.get("atol", default.atol), errors, positive=True)
    horizon = _number("solver.horizon", data.get("horizon"), errors, positive=True, allow_none=True)
    return SolverOptions(n_max, rtol or default.rtol, atol or default.atol, horizon)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario; raises ConfigError listing all problems."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected a JSON object"])
    errors: list[str] = []
    _unknown_keys("config", data, TOP_KEYS, errors)
    mode = data.get("mode")
    if mode not in MODES:
        errors.append(f"mode: expected one of {', '.join(MODES)}, got {mode!r}{_suggest(str(mode), MODES)}")
    params = _parse_params(data.get("params", {}), errors)
    axes_data = data.get("sweep", [])
    axes = []
    if not isinstance(axes_data, list):
        errors.append("sweep: expected a list of axes")
    else:
        if len(axes_data) > MAX_AXES:
            errors.append(f"sweep: at most {MAX_AXES} axes, got {len(axes_data)}")
        parsed = [_parse_axis(k, item, errors) for k, item in enumerate(axes_data)]
        axes = [ax for ax in parsed if ax is not None]
        names = [ax.param for ax in axes]
        for name in set(names):
            if names.count(name) > 1:
                errors.append(f"sweep: parameter {name!r} appears on more than one axis")
    ties = _parse_ties(data.get("ties", {}), errors)
    for tie in ties:
        if tie.target in {ax.param for ax in axes}:
            errors.append(f"ties.{tie.target}: a swept parameter cannot also be tied")
    solver = _parse_solver(data.get("solver", {}), mode, errors)
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        errors.append("output: expected a path string")
    workers = data.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        errors.append(f"workers: expected an integer >= 1, got {workers!r}")
    provenance = data.get("provenance", {})
    if not isinstance(provenance, dict):
        errors.append("provenance: expected an object of tags")
        provenance = {}
    base = None
    try:
        base = SystemParams(**params, n_max=solver.n_max)
    except ValueError as exc:
        errors.append(str(exc))
    if not errors:
        # every grid point must be a valid parameter set
        cfg = ScenarioConfig(mode, base, tuple(axes), tuple(ties), solver, output, workers, provenance)
        try:
            cfg.grid()
        except ValueError as exc:
            errors.append(f"sweep: {exc}")
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
