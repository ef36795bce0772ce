"""Experiment configuration documents.

A config is one JSON object with optional sections::

    {
      "model":    {"name": "singlet", "params": {}},
      "table":    {"plane": "xy", "a1": 0, "a2": 90, "b1": 45, "b2": 135},
      "run":      {"trials": 100000, "seed": 1, "mode": "parallel", "reveal_hidden": true},
      "hp":       {"family": "reference", "n": 1, "plane": "xy",
                   "a_angles": [0, 45, 90], "b_angles": [0, 45, 90],
                   "cells_per_unit": 8, "quadrature_tolerance": 1e-9,
                   "verdict_tolerance": 1e-6},
      "analysis": {"confidence": 0.99, "alpha": 0.001}
    }

Angles are in degrees. A table may instead give unit vectors under
``a1dir``/``a2dir``/``b1dir``/``b2dir``; they are normalized on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from bellaudit.engine import MODES, ExperimentConfig
from bellaudit.errors import ConfigError, ContractError
from bellaudit.hpdensity import FAMILIES, VERDICT_TOLERANCE, QuadratureConfig
from bellaudit.models import MODELS, Direction, ModelClass, ModelDescriptor, SettingTable

DEFAULT_HP_ANGLES = [0.0, 30.0, 45.0, 60.0, 90.0]


@dataclass
class HPAuditConfig:
    family: str = "reference"
    n: int = 1
    a_grid: list[Direction] = field(default_factory=lambda: [Direction.from_angle(t) for t in DEFAULT_HP_ANGLES])
    b_grid: list[Direction] = field(default_factory=lambda: [Direction.from_angle(t) for t in DEFAULT_HP_ANGLES])
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    verdict_tolerance: float = VERDICT_TOLERANCE

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n": self.n,
            "a_grid": [list(d.as_tuple()) for d in self.a_grid],
            "b_grid": [list(d.as_tuple()) for d in self.b_grid],
            "cells_per_unit": self.quadrature.cells_per_unit,
            "quadrature_tolerance": self.quadrature.tolerance,
            "verdict_tolerance": self.verdict_tolerance,
        }


@dataclass
class AnalysisConfig:
    confidence: float = 0.99
    alpha: float = 0.001


def load_document(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return sec


def _number(sec: dict, key: str, default, kind=float):
    value = sec.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key!r} must be an integer, got {value!r}")
    return kind(value)


def parse_model(doc: dict) -> ModelDescriptor:
    sec = _section(doc, "model")
    name = sec.get("name")
    if name not in MODELS:
        raise ConfigError(f"model.name must be one of {sorted(MODELS)}, got {name!r}")
    cls = MODELS[name]
    declared = sec.get("class", cls.model_class.value)
    if declared != cls.model_class.value:
        raise ConfigError(f"model {name!r} has class {cls.model_class.value}, config says {declared!r}")
    params = sec.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("model.params must be an object")
    params = {k: _number(params, k, None) for k in params}
    # instantiating validates parameter names and ranges
    model = cls(**params)
    return ModelDescriptor(name, ModelClass(declared), dict(model.params))


def parse_table(sec: dict) -> SettingTable:
    try:
        if any(k in sec for k in ("a1dir", "a2dir", "b1dir", "b2dir")):
            return SettingTable(*(Direction.normalized(*map(float, sec[k])) for k in ("a1dir", "a2dir", "b1dir", "b2dir")))
        if not sec:
            return SettingTable.default()
        plane = sec.get("plane", "xy")
        return SettingTable.from_angles(*(_number(sec, k, None) for k in ("a1", "a2", "b1", "b2")), plane=plane)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad table section: {exc}") from exc


def table_from_document(doc: dict) -> SettingTable:
    """Table section of a config, or the table echoed in a simulate manifest."""
    if "table" not in doc and isinstance(doc.get("config"), dict):
        doc = doc["config"]
    return parse_table(_section(doc, "table"))


def parse_experiment(doc: dict) -> ExperimentConfig:
    run = _section(doc, "run")
    mode = run.get("mode", "parallel")
    if mode not in MODES:
        raise ConfigError(f"run.mode must be one of {MODES}, got {mode!r}")
    trials = _number(run, "trials", 1000, int)
    if trials < 0:
        raise ConfigError("run.trials must be nonnegative")
    reveal = run.get("reveal_hidden", True)
    if not isinstance(reveal, bool):
        raise ConfigError("run.reveal_hidden must be true or false")
    try:
        return ExperimentConfig(
            model=parse_model(doc),
            table=parse_table(_section(doc, "table")),
            trials=trials,
            seed=_number(run, "seed", 0, int),
            mode=mode,
            reveal_hidden=reveal,
        )
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc


def parse_hp(doc: dict) -> HPAuditConfig:
    sec = _section(doc, "hp")
    family = sec.get("family", "reference")
    if family not in FAMILIES:
        raise ConfigError(f"hp.family must be one of {sorted(FAMILIES)}, got {family!r}")
    plane = sec.get("plane", "xy")
    try:
        grids = []
        for key in ("a_angles", "b_angles"):
            angles = sec.get(key, DEFAULT_HP_ANGLES)
            if not isinstance(angles, list) or not angles:
                raise ConfigError(f"hp.{key} must be a nonempty list of angles")
            grids.append([Direction.from_angle(float(t), plane) for t in angles])
        quad = QuadratureConfig(
            _number(sec, "cells_per_unit", 8, int), _number(sec, "quadrature_tolerance", 1e-9)
        )
        n = _number(sec, "n", 1, int)
        if n < 1:
            raise ConfigError("hp.n must be a positive integer")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad hp section: {exc}") from exc
    return HPAuditConfig(family, n, grids[0], grids[1], quad, _number(sec, "verdict_tolerance", VERDICT_TOLERANCE))


def parse_analysis(doc: dict) -> AnalysisConfig:
    sec = _section(doc, "analysis")
    cfg = AnalysisConfig(_number(sec, "confidence", 0.99), _number(sec, "alpha", 0.001))
    if not 0 < cfg.confidence < 1 or not 0 < cfg.alpha < 1:
        raise ConfigError("analysis.confidence and analysis.alpha must lie in (0, 1)")
    return cfg
