"""Result containers for correlation and spectral data, with CSV/JSON export."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1

CLASS_LABELS = ("nondegenerate", "side(+tau)", "side(-tau)", "zero")
_CLASS_ALIASES = {
    "nondegenerate": "nondegenerate", "baseline": "nondegenerate",
    "side": "side(+tau)", "+tau": "side(+tau)", "side(+tau)": "side(+tau)",
    "-tau": "side(-tau)", "side(-tau)": "side(-tau)",
    "zero": "zero", "0": "zero",
}


def canonical_class(name: str) -> str:
    try:
        return _CLASS_ALIASES[str(name).strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown degeneracy class {name!r}") from None


@dataclass
class CorrelationTrace:
    kind: str  # "g1" | "g2" | "coincidence"
    abscissa: np.ndarray  # lag (slots or seconds) or class labels
    values: np.ndarray
    normalization: str = "raw-probability"  # or "baseline-normalized"
    errors: np.ndarray | None = None
    counts: np.ndarray | None = None
    opportunities: np.ndarray | None = None
    baseline: float | None = None
    baseline_error: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("g1", "g2", "coincidence"):
            raise ConfigError(f"unknown trace kind {self.kind!r}")
        if self.normalization not in ("raw-probability", "baseline-normalized"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        self.abscissa = np.asarray(self.abscissa)
        self.values = np.asarray(self.values)
        if self.abscissa.shape[0] != self.values.shape[0]:
            raise ConfigError("abscissa and values differ in length")
        if self.kind == "g2" and np.any(np.real(self.values) < 0):
            raise ConfigError("g2 values must be non-negative")

    def value_at(self, lag):
        idx = np.flatnonzero(self.abscissa == lag)
        if idx.size == 0:
            raise KeyError(lag)
        i = int(idx[0])
        err = None if self.errors is None else float(self.errors[i])
        return self.values[i], err

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"abscissa": self.abscissa}
        if np.iscomplexobj(self.values):
            cols["value_re"] = self.values.real
            cols["value_im"] = self.values.imag
        else:
            cols["value"] = self.values
        if self.errors is not None:
            cols["error"] = self.errors
        if self.counts is not None:
            cols["counts"] = self.counts
        if self.opportunities is not None:
            cols["opportunities"] = self.opportunities
        return cols

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "type": "CorrelationTrace",
            "kind": self.kind,
            "normalization": self.normalization,
            "baseline": self.baseline,
            "baseline_error": self.baseline_error,
            "meta": self.meta,
            "columns": {k: _jsonable(v) for k, v in self.columns().items()},
        }


@dataclass(frozen=True)
class SpectralComponent:
    name: str
    weight: float
    fwhm: float  # Hz


def lorentzian(f, fwhm: float):
    """Unit-area Lorentzian centered at zero."""
    f = np.asarray(f, dtype=float)
    g = fwhm / 2.0
    return (g / np.pi) / (f * f + g * g)


@dataclass
class SpectrumTrace:
    frequencies: np.ndarray  # Hz, offset from the carrier
    density: np.ndarray
    components: tuple[SpectralComponent, ...]
    instrument_fwhm: float | None = None
    transfer: dict | None = None  # AMZI filter metadata: tau, phi, port
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        if self.frequencies.shape != self.density.shape:
            raise ConfigError("frequency grid and density differ in shape")
        if np.any(self.density < 0):
            raise ConfigError("spectral density must be non-negative")

    def component_density(self, name: str, f=None):
        f = self.frequencies if f is None else np.asarray(f, dtype=float)
        comp = next((c for c in self.components if c.name == name), None)
        if comp is None:
            raise KeyError(name)
        width = comp.fwhm + (self.instrument_fwhm or 0.0)
        return comp.weight * lorentzian(f, width) * self.transfer_function(f)

    def model_density(self, f):
        """Evaluate the analytic density (components, instrument, filter) anywhere."""
        f = np.asarray(f, dtype=float)
        total = np.zeros_like(f)
        for c in self.components:
            total = total + c.weight * lorentzian(f, c.fwhm + (self.instrument_fwhm or 0.0))
        return total * self.transfer_function(f)

    def transfer_function(self, f):
        if self.transfer is None:
            return np.ones_like(np.asarray(f, dtype=float))
        return amzi_transfer(f, self.transfer["tau"], self.transfer["phi"], self.transfer["port"])

    @property
    def total_weight(self) -> float:
        return float(sum(c.weight for c in self.components))

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"frequency_hz": self.frequencies, "density": self.density}
        for c in self.components:
            cols[c.name] = self.component_density(c.name)
        return cols

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "type": "SpectrumTrace",
            "components": [{"name": c.name, "weight": c.weight, "fwhm_hz": c.fwhm} for c in self.components],
            "instrument_fwhm_hz": self.instrument_fwhm,
            "transfer": self.transfer,
            "meta": self.meta,
            "columns": {k: _jsonable(v) for k, v in self.columns().items()},
        }


def amzi_transfer(f, tau: float, phi: float, port: str):
    """Intensity transfer of one AMZI port; port d is bright at zero detuning for phi = 0."""
    x = np.cos(2.0 * np.pi * np.asarray(f, dtype=float) * tau + phi)
    if port == "d":
        return (1.0 + x) / 2.0
    if port == "c":
        return (1.0 - x) / 2.0
    raise ConfigError(f"unknown AMZI port {port!r}")


# ---------------------------------------------------------------------------
# serialization


def _jsonable(v):
    arr = np.asarray(v)
    if arr.dtype.kind in "US O":
        return [str(x) for x in arr]
    if arr.dtype.kind == "c":
        return [[float(x.real), float(x.imag)] for x in arr]
    return [x.item() for x in arr]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def columns_to_csv(columns: dict[str, Sequence], schema: str) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}; schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(names)
    n = len(next(iter(columns.values()))) if columns else 0
    for i in range(n):
        w.writerow([_fmt(columns[k][i]) for k in names])
    return buf.getvalue()


def write_csv(path: str | Path, columns: dict[str, Sequence], schema: str) -> Path:
    path = Path(path)
    path.write_text(columns_to_csv(columns, schema))
    return path


def write_json(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def trace_to_csv(trace: CorrelationTrace | SpectrumTrace) -> str:
    schema = "correlation-trace" if isinstance(trace, CorrelationTrace) else "spectrum-trace"
    return columns_to_csv(trace.columns(), schema)


def read_csv_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header and (line number, fields) rows of a CSV written by this package; '#' lines skipped."""
    header: list[str] | None = None
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = [h.strip() for h in fields]
            else:
                rows.append((lineno, [x.strip() for x in fields]))
    if header is None:
        raise ConfigError(f"{path}: no header row")
    return header, rows
