"""TOML run manifests and the built-in figure presets.

A document describes one run with the sections ``[manipulator]``,
``[controller]``, ``[disturbance]``, ``[sim]`` and ``[output]`` plus a
top-level ``name``. A batch lists runs under ``[[run]]``; top-level
sections then act as shared defaults that each run may override key by key.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .controllers import (
    DiscGains,
    DiscontinuousController,
    InvDynGains,
    InverseDynamicsController,
    LyapGains,
    LyapunovController,
)
from .dynamics import JointState, ManipulatorParams
from .sim import DisturbanceSpec, SimConfig, SimConfigError


class ConfigError(ValueError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class RunManifest:
    name: str
    config: SimConfig
    out_dir: Path = Path("out")
    states: bool = True
    controls: bool = True
    diagnostics: bool = True


SECTIONS = ("manipulator", "controller", "disturbance", "sim", "output")

# config key -> (gains class, dataclass field)
_GAIN_KEYS = {
    "inverse_dynamics": (InvDynGains, {"kd": "kd", "kp": "kp", "ki": "ki"}),
    "lyapunov": (LyapGains, {"kd": "kd", "ki": "ki", "lambda": "lam"}),
    "discontinuous": (DiscGains, {"kd_switch": "kd_switch", "lambda": "lam", "epsilon": "epsilon"}),
}
_SIM_KEYS = {"t_end", "dt", "q0", "qdot0"}
_OUTPUT_KEYS = {"dir", "states", "controls", "diagnostics"}
_DIST_KEYS = {"d", "limit"}


def _number(where, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    return float(value)


def _pair(where, value) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(where, f"expected a 2-element array, got {value!r}")
    return (_number(where, value[0]), _number(where, value[1]))


def _flag(where, value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(where, f"expected true/false, got {value!r}")
    return value


def _reject_unknown(section, table, allowed):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}" if section else unknown[0], "unknown key")


def _table(doc, key):
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a table")
    return value


def _build_manifest(doc: dict, where: str = "") -> RunManifest:
    prefix = f"{where}." if where else ""
    _reject_unknown(where, doc, ("name",) + SECTIONS)
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError(f"{prefix}name", "missing or empty experiment name")

    man = _table(doc, "manipulator")
    known = [f.name for f in fields(ManipulatorParams)]
    _reject_unknown(f"{prefix}manipulator", man, known)
    try:
        params = ManipulatorParams(**{k: _number(f"{prefix}manipulator.{k}", v)
                                      for k, v in man.items()})
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{prefix}manipulator", str(exc)) from None

    ctl = dict(_table(doc, "controller"))
    kind = ctl.pop("kind", "inverse_dynamics")
    if kind not in _GAIN_KEYS:
        raise ConfigError(f"{prefix}controller.kind",
                          f"unknown controller {kind!r}; expected one of {sorted(_GAIN_KEYS)}")
    gains_cls, keymap = _GAIN_KEYS[kind]
    extra = ("d_hat0",) if kind == "lyapunov" else ()
    _reject_unknown(f"{prefix}controller", ctl, tuple(keymap) + extra)
    d_hat0 = _pair(f"{prefix}controller.d_hat0", ctl.pop("d_hat0", [0.0, 0.0])) if extra else None
    try:
        gains = gains_cls(**{keymap[k]: _number(f"{prefix}controller.{k}", v)
                             for k, v in ctl.items()})
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{prefix}controller", str(exc)) from None
    if kind == "inverse_dynamics":
        controller = InverseDynamicsController(gains)
    elif kind == "lyapunov":
        controller = LyapunovController(gains, d_hat0=d_hat0)
    else:
        controller = DiscontinuousController(gains)

    dist = _table(doc, "disturbance")
    _reject_unknown(f"{prefix}disturbance", dist, _DIST_KEYS)
    sim = _table(doc, "sim")
    _reject_unknown(f"{prefix}sim", sim, _SIM_KEYS)
    out = _table(doc, "output")
    _reject_unknown(f"{prefix}output", out, _OUTPUT_KEYS)

    try:
        disturbance = DisturbanceSpec(
            d=_pair(f"{prefix}disturbance.d", dist.get("d", [0.0, 0.0])),
            limit=_number(f"{prefix}disturbance.limit", dist.get("limit", 50.0)))
        initial = JointState(np.array(_pair(f"{prefix}sim.q0", sim.get("q0", [0.0, 0.0]))),
                             np.array(_pair(f"{prefix}sim.qdot0", sim.get("qdot0", [0.0, 0.0]))))
        config = SimConfig(params=params, controller=controller, disturbance=disturbance,
                           t_end=_number(f"{prefix}sim.t_end", sim.get("t_end", 10.0)),
                           dt=_number(f"{prefix}sim.dt", sim.get("dt", 1e-3)),
                           initial_state=initial)
    except SimConfigError as exc:
        raise ConfigError(f"{prefix}{exc.field}", str(exc).split(": ", 1)[1]) from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{prefix}sim", str(exc)) from None

    out_dir = out.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ConfigError(f"{prefix}output.dir", f"expected a string, got {out_dir!r}")
    return RunManifest(
        name=name, config=config, out_dir=Path(out_dir),
        states=_flag(f"{prefix}output.states", out.get("states", True)),
        controls=_flag(f"{prefix}output.controls", out.get("controls", True)),
        diagnostics=_flag(f"{prefix}output.diagnostics", out.get("diagnostics", True)),
    )


def _merge(defaults: dict, override: dict) -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def manifests_from_dict(doc: dict) -> list[RunManifest]:
    if "run" not in doc:
        return [_build_manifest(doc)]
    runs = doc["run"]
    if not isinstance(runs, list) or not runs:
        raise ConfigError("run", "expected a non-empty array of tables")
    defaults = {k: v for k, v in doc.items() if k != "run"}
    _reject_unknown("", defaults, SECTIONS)
    manifests = [_build_manifest(_merge(defaults, r), f"run[{i}]") for i, r in enumerate(runs)]
    seen = set()
    for i, m in enumerate(manifests):
        if m.name in seen:
            raise ConfigError(f"run[{i}].name", f"duplicate experiment name {m.name!r}")
        seen.add(m.name)
    return manifests


def parse_config(text: str) -> list[RunManifest]:
    """Parse and validate a TOML document into one or more run manifests."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("parse", str(exc)) from None
    return manifests_from_dict(doc)


def manifest_to_dict(m: RunManifest) -> dict:
    """Fully resolved manifest, defaults included, in config-document form."""
    cfg = m.config
    ctl = cfg.controller
    _, keymap = _GAIN_KEYS[ctl.kind]
    controller = {"kind": ctl.kind}
    controller.update({k: getattr(ctl.gains, attr) for k, attr in keymap.items()})
    if ctl.kind == "lyapunov":
        controller["d_hat0"] = list(ctl.d_hat0)
    return {
        "name": m.name,
        "manipulator": {f.name: getattr(cfg.params, f.name) for f in fields(ManipulatorParams)},
        "controller": controller,
        "disturbance": {"d": list(cfg.disturbance.d), "limit": cfg.disturbance.limit},
        "sim": {"t_end": cfg.t_end, "dt": cfg.dt,
                "q0": cfg.initial_state.q.tolist(), "qdot0": cfg.initial_state.qdot.tolist()},
        "output": {"dir": m.out_dir.as_posix(), "states": m.states,
                   "controls": m.controls, "diagnostics": m.diagnostics},
    }


def dump_manifest(m: RunManifest) -> str:
    return tomli_w.dumps(manifest_to_dict(m))


def override(doc: dict, *, dt=None, t_end=None, disturbance=None, out=None) -> dict:
    """Apply command-line overrides to a run document."""
    doc = copy.deepcopy(doc)
    if dt is not None:
        doc.setdefault("sim", {})["dt"] = dt
    if t_end is not None:
        doc.setdefault("sim", {})["t_end"] = t_end
    if disturbance is not None:
        doc.setdefault("disturbance", {})["d"] = list(disturbance)
    if out is not None:
        doc.setdefault("output", {})["dir"] = str(out)
    return doc


def _preset(name, controller, t_end, dt, states, controls):
    return {
        "name": name,
        "controller": controller,
        "disturbance": {"d": [0.0, 0.0]},
        "sim": {"t_end": t_end, "dt": dt},
        "output": {"states": states, "controls": controls, "diagnostics": True},
    }


_INVDYN = {"kind": "inverse_dynamics", "kd": 12.0, "kp": 21.0, "ki": 10.0}
_LYAP = {"kind": "lyapunov", "kd": 2.0, "ki": 1.0, "lambda": 2.0}
# no published gains for the unit-vector law; dt is tightened so RK4 stays
# stable inside the boundary layer (stiffness ~ kd_switch / (epsilon * min eig D))
_DISC = {"kind": "discontinuous", "kd_switch": 5.0, "lambda": 2.0, "epsilon": 1e-2}

PRESETS: dict[str, dict] = {
    "fig2": _preset("fig2", _INVDYN, 10.0, 1e-3, True, False),
    "fig3": _preset("fig3", _INVDYN, 10.0, 1e-3, False, True),
    "fig4": _preset("fig4", _LYAP, 30.0, 1e-3, True, False),
    "fig5": _preset("fig5", _LYAP, 30.0, 1e-3, False, True),
    "fig6": _preset("fig6", _DISC, 10.0, 2e-4, True, False),
    "fig7": _preset("fig7", _DISC, 10.0, 2e-4, False, True),
}
PRESET_DESCRIPTIONS = {
    "fig2": "inverse dynamics + integral action, joint states, 10 s",
    "fig3": "inverse dynamics + integral action, control torques, 10 s",
    "fig4": "Lyapunov law with disturbance estimator, joint states, 30 s",
    "fig5": "Lyapunov law with disturbance estimator, control torques, 30 s",
    "fig6": "discontinuous (boundary-layer) law, joint states, 10 s",
    "fig7": "discontinuous (boundary-layer) law, control torques, 10 s",
    "all": "batch of fig2..fig7",
}


def preset_documents(name: str) -> list[dict]:
    if name == "all":
        return [copy.deepcopy(PRESETS[k]) for k in sorted(PRESETS)]
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; try one of "
                          + ", ".join(sorted(PRESET_DESCRIPTIONS)))
    return [copy.deepcopy(PRESETS[name])]


def load_documents(path: Path) -> list[dict]:
    """Read a config file into per-run documents (batch defaults merged in)."""
    try:
        doc = tomli.loads(Path(path).read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}", str(exc)) from None
    except OSError as exc:
        raise ConfigError(f"{path}", exc.strerror or str(exc)) from None
    if "run" not in doc:
        return [doc]
    runs = doc["run"]
    if not isinstance(runs, list):
        raise ConfigError("run", "expected an array of tables")
    defaults = {k: v for k, v in doc.items() if k != "run"}
    return [_merge(defaults, r) for r in runs]


def manifests_from_documents(docs: list[dict]) -> list[RunManifest]:
    if len(docs) == 1:
        return manifests_from_dict(docs[0])
    return manifests_from_dict({"run": docs})
