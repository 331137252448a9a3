"""Run configuration: one JSON document, merged over the shipped defaults."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emitter import EmitterParams, load_defaults
from .errors import ConfigError, OutputError
from .interferometry import AmziConfig

TOP_LEVEL_KEYS = {"schema_version", "emitter", "amzi", "instrument", "metadata", "spectrum", "sweep",
                  "sim", "fit", "output", "reference_sets", "visibility_curve", "oracle"}

SPECTRUM_DEFAULTS = {"span_hz": 1.2e10, "step_hz": 5e6}
SWEEP_DEFAULTS = {
    "nbar": [0.001, 0.002, 0.0062, 0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 0.62, 1.0, 2.0, 5.0, 10.0],
    "phi_points": 73,
    "phi": None,
    "reference_sets": True,
}
SIM_DEFAULTS = {
    "p1": 0.3,
    "p2": 0.0,
    "slots_per_tau": 7,
    "slots": 2_000_000,
    "seed": 7,
    "detector_efficiency": 1.0,
    "dark_rate": 0.0,
    "phase_drift_rate": 0.0,
    "segment_slots": None,
    "phis": [0.0, 0.3927, 0.7854, 1.1781, 1.5708, 1.9635, 2.3562, 2.7489],
    "max_lag_slots": 200,
    "write_streams": True,
}
FIT_DEFAULTS = {"M": None, "n_starts": 8, "seed": 0, "visibility_model": "both"}
ORACLE_DEFAULTS = {"random_draws": 200, "seed": 0, "phi_points": 9, "tol": 1e-10}
OUTPUT_DEFAULTS = {"dir": "out", "format": "csv"}
FORMATS = ("csv", "json")


def _merge(base: dict, over: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in out:
            raise ConfigError(f"unknown key {where}.{key}")
        out[key] = val
    return out


@dataclass
class RunConfig:
    emitter: EmitterParams
    amzi: AmziConfig
    instrument: dict
    spectrum: dict
    sweep: dict
    sim: dict
    fit: dict
    oracle: dict
    output: dict
    reference: dict = field(default_factory=dict)
    visibility_curve: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def out_dir(self) -> Path:
        return Path(self.output["dir"])

    @property
    def fmt(self) -> str:
        return self.output["format"]

    def phi_grid(self) -> np.ndarray:
        if self.sweep.get("phi") is not None:
            grid = np.asarray(self.sweep["phi"], dtype=float)
        else:
            grid = np.linspace(0.0, 2.0 * math.pi, int(self.sweep["phi_points"]))
        if grid.size == 0:
            raise ConfigError("phase grid is empty")
        return grid

    def nbar_grid(self) -> np.ndarray:
        grid = np.asarray(self.sweep["nbar"], dtype=float)
        if grid.size == 0:
            raise ConfigError("flux grid is empty")
        if np.any(grid < 0):
            raise ConfigError("flux grid has negative entries")
        return grid

    def frequency_grid(self) -> np.ndarray:
        span, step = float(self.spectrum["span_hz"]), float(self.spectrum["step_hz"])
        if not (span > 0 and step > 0 and step < span):
            raise ConfigError("spectrum grid needs 0 < step_hz < span_hz")
        n = int(round(span / step))
        return np.arange(-n, n + 1) * step

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "emitter": self.emitter.to_dict(),
            "amzi": self.amzi.to_dict(),
            "instrument": self.instrument,
            "spectrum": self.spectrum,
            "sweep": self.sweep,
            "sim": self.sim,
            "fit": self.fit,
            "oracle": self.oracle,
            "output": self.output,
            "reference_sets": self.reference,
            "visibility_curve": self.visibility_curve,
        }

    def hash(self) -> str:
        doc = self.to_dict()
        doc["output"] = {k: v for k, v in doc["output"].items() if k != "dir"}
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def build_config(doc: dict | None = None, source: str | None = None) -> RunConfig:
    doc = dict(doc or {})
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if doc.get("schema_version", 1) != 1:
        raise ConfigError(f"unsupported schema_version {doc.get('schema_version')}")
    defaults = load_defaults()
    em = _merge(defaults["emitter"], doc.get("emitter", {}), "emitter")
    if "emitter" in doc and ({"p0", "p1", "p2"} & set(doc["emitter"])) and "p0" not in doc["emitter"]:
        em["p0"] = 1.0 - em["p1"] - em["p2"]
    try:
        emitter = EmitterParams.from_dict(em)
        amzi = AmziConfig.from_dict(_merge(defaults["amzi"], doc.get("amzi", {}), "amzi"))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    sweep = _merge(SWEEP_DEFAULTS, doc.get("sweep", {}), "sweep")
    sim = _merge(SIM_DEFAULTS, doc.get("sim", {}), "sim")
    fit = _merge(FIT_DEFAULTS, doc.get("fit", {}), "fit")
    output = _merge(OUTPUT_DEFAULTS, doc.get("output", {}), "output")
    if output["format"] not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if fit["M"] is None:
        fit["M"] = emitter.M
    return RunConfig(
        emitter=emitter, amzi=amzi,
        instrument=_merge(defaults["instrument"], doc.get("instrument", {}), "instrument"),
        spectrum=_merge(SPECTRUM_DEFAULTS, doc.get("spectrum", {}), "spectrum"),
        sweep=sweep, sim=sim, fit=fit,
        oracle=_merge(ORACLE_DEFAULTS, doc.get("oracle", {}), "oracle"),
        output=output,
        reference=doc.get("reference_sets", defaults["reference_sets"]),
        visibility_curve=_merge(defaults["visibility_curve"], doc.get("visibility_curve", {}),
                                "visibility_curve"),
        source=source,
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return build_config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return build_config(doc, str(path))
