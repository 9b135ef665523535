"""CSV output with a JSON metadata sidecar.

Floats are written with 17 significant digits so that parsing the file
recovers every value bit for bit.  Wall times go only into the sidecar,
which keeps the CSV byte-identical between runs.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy

from ..core_model import SystemParams
from .config import ScenarioConfig
from .runner import OBSERVABLES, PointResult

PARAM_COLUMNS = {
    "g_q": "QD-mode coupling", "g_a": "atom sigma+ to mode a coupling", "g_b": "atom sigma- to mode b coupling",
    "kappa": "cavity field decay rate", "gamma_q": "QD spontaneous emission rate",
    "gamma_a": "atomic spontaneous emission rate (both transitions)",
    "delta_c": "cavity detuning", "delta_q": "QD detuning", "delta_a": "|+> detuning", "delta_b": "|-> detuning",
    "omega_re": "Re drive amplitude", "omega_im": "Im drive amplitude", "n_max": "Fock truncation per mode",
}


class OutputError(OSError):
    pass


def columns_for(mode: str) -> list[str]:
    return ["index", *PARAM_COLUMNS, *OBSERVABLES[mode], "status", "error"]


def column_dictionary(mode: str) -> dict[str, str]:
    out = {"index": "grid index (row-major over the sweep axes)"}
    out.update(PARAM_COLUMNS)
    out.update(OBSERVABLES[mode])
    out["status"] = "ok or error"
    out["error"] = "exception text for failed points"
    return out


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _param_echo(p: SystemParams) -> dict:
    omega = complex(p.omega)
    echo = {name: getattr(p, name) for name in PARAM_COLUMNS if name not in ("omega_re", "omega_im")}
    echo["omega_re"], echo["omega_im"] = omega.real, omega.imag
    return echo


def result_row(res: PointResult, mode: str) -> list[str]:
    values = dict(index=res.index, **_param_echo(res.params))
    for name in OBSERVABLES[mode]:
        values[name] = res.values.get(name, math.nan)
    values["status"] = "ok" if res.ok else "error"
    values["error"] = res.error
    return [format_value(values[c]) for c in columns_for(mode)]


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json") if path.suffix != ".csv" else path.with_suffix(".meta.json")


def emit_csv(results: Iterable[PointResult], path, config: ScenarioConfig) -> list[PointResult]:
    """Write results to ``path`` as they arrive, then the metadata sidecar.

    Returns the list of results written.
    """
    path = Path(path)
    written = []
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(columns_for(config.mode))
            fh.flush()
            for res in results:
                writer.writerow(result_row(res, config.mode))
                fh.flush()
                written.append(res)
    except OSError as exc:
        raise OutputError(f"cannot write results to {path}: {exc}") from exc
    write_metadata(sidecar_path(path), config, written)
    return written


def write_metadata(path, config: ScenarioConfig, results: list[PointResult]) -> None:
    from .. import __version__

    meta = {
        "config_hash": config.physics_hash(),
        "code_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "python_version": platform.python_version(),
        "config": config.to_dict(),
        "provenance": dict(config.provenance),
        "columns": column_dictionary(config.mode),
        "points": len(results),
        "errors": sum(not r.ok for r in results),
        "wall_time_s": [round(r.wall_time, 6) for r in results],
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write metadata to {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    """Parse an emitted CSV back into dicts, converting numeric fields to float."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, text in raw.items():
                if key in ("status", "error"):
                    row[key] = text
                else:
                    row[key] = float(text)
            rows.append(row)
    return rows
