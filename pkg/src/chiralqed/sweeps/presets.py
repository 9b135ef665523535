"""Ready-made scenarios for the published figures.

Values printed in the figure captions are tagged "paper"; axis ranges and
anything else that had to be read off a plot or picked are tagged "choice".
"""

from __future__ import annotations

import json
import math

from .config import ScenarioConfig, parse_config

INV_SQRT45 = 1 / math.sqrt(45)


def _fig3(right: bool) -> dict:
    g_a_axis = {"param": "g_a", "start": 0.01, "stop": 0.25, "num": 25, "scale": "log"}
    if right:
        second = {"param": "gamma_q", "start": 1e-4, "stop": 1e-2, "num": 25, "scale": "log"}
        params = {"g_q": 0.05}
        ties = {"g_b": {"param": "g_a", "factor": INV_SQRT45}, "gamma_a": {"param": "gamma_q", "factor": 1.0}}
        prov = {"g_q": "paper", "g_b": "paper", "gamma_a": "paper", "sweep.g_a": "choice", "sweep.gamma_q": "choice"}
    else:
        second = {"param": "g_q", "start": 0.01, "stop": 0.25, "num": 25, "scale": "log"}
        params = {"gamma_q": 1e-3, "gamma_a": 1e-3}
        ties = {"g_b": {"param": "g_a", "factor": INV_SQRT45}}
        prov = {"gamma_q": "paper", "gamma_a": "paper", "g_b": "paper", "sweep.g_a": "choice", "sweep.g_q": "choice"}
    params.update(kappa=1.0, delta_c=0.0, delta_q=0.0, delta_a=0.0, delta_b=0.0)
    prov.update(kappa="choice", detunings="paper")
    return {
        "mode": "single_excitation",
        "params": params,
        "sweep": [g_a_axis, second],
        "ties": ties,
        "solver": {"n_max": 1},
        "provenance": prov,
    }


def _driven(gamma: float) -> dict:
    return {
        "mode": "weak_drive",
        "params": {"g_q": 0.5, "g_a": 0.5, "g_b": 0.5 * INV_SQRT45, "gamma_q": gamma, "gamma_a": gamma,
                   "kappa": 1.0},
        "sweep": [
            {"param": "delta_b", "values": [0.0, 0.1]},
            {"param": "omega", "start": 1e-3, "stop": 1e-1, "num": 25, "scale": "log"},
        ],
        "solver": {"n_max": 2},
        "provenance": {"g_q": "paper", "g_a": "paper", "g_b": "paper", "gamma_q": "paper", "gamma_a": "paper",
                       "sweep.delta_b": "paper", "sweep.omega": "choice", "n_max": "choice"},
    }


_PRESETS = {
    "fig2": lambda: {
        "mode": "single_excitation",
        "params": {"g_q": 0.05, "g_b": 0.0, "gamma_q": 0.0, "gamma_a": 0.0, "kappa": 1.0},
        "sweep": [{"param": "g_a", "values": [0.05, 0.5]}],
        "solver": {"n_max": 1},
        "provenance": {"g_q": "paper", "gamma_q": "paper", "gamma_a": "paper", "detunings": "paper",
                       "g_b": "choice", "sweep.g_a": "choice", "ratio g_a/g_q in {1, 10}": "choice"},
    },
    "fig3l": lambda: _fig3(right=False),
    "fig3r": lambda: _fig3(right=True),
    "fig4": lambda: _driven(0.01),
    "fig5": lambda: _driven(0.05),
}

PRESET_NAMES = tuple(_PRESETS)


def preset_document(name: str) -> dict:
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return _PRESETS[name]()


def figure_preset(name: str) -> ScenarioConfig:
    return parse_config(json.dumps(preset_document(name)))
