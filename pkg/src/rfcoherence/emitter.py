"""Steady-state light-matter states of a driven two-level emitter and the flux-to-population law."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelValidityWarning
from .fock import DensityState, ModeSpec, ModeState

DEFAULT_N_MAX = 2
# p2 is treated as "much smaller than p1^2/2" below this ratio
P2_WARNING_RATIO = 0.1
# tolerated relative excess of T2 over 2*T1 (the shipped device sits ~2% above)
T2_TOLERANCE = 0.05


def matter_label(time_label: str) -> str:
    return f"{time_label}.m"


@dataclass(frozen=True)
class EmitterParams:
    p0: float = 1.0
    p1: float = 0.0
    p2: float = 0.0
    nbar: float = 0.0
    eta_ab: float = 0.97
    T1: float = 67.2e-12
    T2: float = 137.4e-12
    TL: float = 1.59e-6
    nu: float = 3.2888569e14
    M: float = 1.0
    Mprime: float = 1.0
    no_pure_dephasing: bool = False

    def __post_init__(self):
        for name in ("p0", "p1", "p2", "M", "Mprime", "eta_ab"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ConfigError(f"{name}={v} outside [0, 1]")
        total = self.p0 + self.p1 + self.p2
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"p0+p1+p2 = {total!r}, expected 1")
        if self.nbar < 0:
            raise ConfigError(f"nbar={self.nbar} is negative")
        for name in ("T1", "T2", "TL"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.no_pure_dephasing and self.T2 > 2 * self.T1 * (1 + T2_TOLERANCE):
            raise ConfigError(f"T2={self.T2} exceeds 2*T1={2 * self.T1} beyond tolerance")
        if self.p2 > 0 and self.p2 >= P2_WARNING_RATIO * self.p1 ** 2 / 2:
            warnings.warn(f"p2={self.p2:.3g} is not small against p1^2/2={self.p1 ** 2 / 2:.3g}",
                          ModelValidityWarning, stacklevel=3)

    @property
    def x(self) -> float:
        """Saturation coefficient 2*eta_ab (the fitted quantity in flux sweeps)."""
        return 2.0 * self.eta_ab

    @property
    def mean_photon_number(self) -> float:
        return self.p1 + 2.0 * self.p2

    @classmethod
    def from_populations(cls, p0: float, p1: float, p2: float = 0.0, normalize: bool = False, **kw):
        """Build from (possibly rounded) populations; ``normalize`` rescales them onto the simplex."""
        if normalize:
            s = p0 + p1 + p2
            p0, p1, p2 = p0 / s, p1 / s, p2 / s
            p0 = 1.0 - p1 - p2
        return cls(p0=p0, p1=p1, p2=p2, **kw)

    @classmethod
    def from_flux(cls, nbar: float, eta_ab: float = 0.97, **kw) -> "EmitterParams":
        p1 = saturation_p1(nbar, eta_ab)
        return cls(p0=1.0 - p1, p1=p1, p2=0.0, nbar=nbar, eta_ab=eta_ab, **kw)

    def with_populations(self, p0: float, p1: float, p2: float = 0.0) -> "EmitterParams":
        return replace(self, p0=p0, p1=p1, p2=p2)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EmitterParams":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown emitter fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EmitterParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SaturationModel:
    """Absorption/emission balance p1 = x n / (1 + x n) with x = 2 eta_ab."""

    eta_ab: float = 0.97
    no_pure_dephasing: bool = True
    T1: float | None = None
    T2: float | None = None

    def __post_init__(self):
        if not self.eta_ab > 0:
            raise ConfigError("saturation coefficient must be positive")
        if (self.no_pure_dephasing and self.T1 is not None and self.T2 is not None
                and self.T2 < 2 * self.T1 * (1 - T2_TOLERANCE)):
            warnings.warn("T2 < 2*T1: the saturation law assumes no pure dephasing",
                          ModelValidityWarning, stacklevel=3)

    @classmethod
    def from_x(cls, x: float, **kw) -> "SaturationModel":
        return cls(eta_ab=x / 2.0, **kw)

    @property
    def x(self) -> float:
        return 2.0 * self.eta_ab

    def p1(self, nbar):
        return saturation_p1(nbar, self.eta_ab)

    def nbar(self, p1):
        return nbar_from_p1(p1, self.eta_ab)


def saturation_p1(nbar, eta_ab: float = 0.97):
    """Excited quasi-population from the mean incident photon number per T1."""
    nbar_arr = np.asarray(nbar, dtype=float)
    if np.any(nbar_arr < 0):
        raise ConfigError("mean incident photon number must be non-negative")
    if not 0.0 < eta_ab <= 1.0:
        raise ConfigError(f"eta_ab={eta_ab} outside (0, 1]")
    xn = 2.0 * eta_ab * nbar_arr
    with np.errstate(invalid="ignore"):
        p1 = np.where(np.isinf(xn), 1.0, xn / (1.0 + xn))
    return float(p1) if p1.ndim == 0 else p1


def nbar_from_p1(p1, eta_ab: float = 0.97):
    p1_arr = np.asarray(p1, dtype=float)
    if np.any((p1_arr < 0) | (p1_arr >= 1)):
        raise ConfigError("p1 must lie in [0, 1) to invert the saturation law")
    n = p1_arr / (2.0 * eta_ab * (1.0 - p1_arr))
    return float(n) if n.ndim == 0 else n


def carrier_phase(nu: float, t: float) -> float:
    """2*pi*nu*t reduced mod 2*pi; only phase differences enter any observable."""
    cycles = math.fmod(nu * t, 1.0)
    return 2.0 * math.pi * cycles


def steady_state(params: EmitterParams, time_label: str, n_max: int = DEFAULT_N_MAX,
                 carrier: float = 0.0) -> ModeState:
    """sqrt(p0)|0,g> + sqrt(p1) e^{i carrier} (|0,e> + |1,g>)/sqrt(2) on one photon + one matter mode."""
    if params.p2 != 0.0:
        raise ConfigError("the entangled steady state has no two-photon term (p2 must be 0)")
    spec = ModeSpec.of(photons=[(time_label, n_max)], matter=[matter_label(time_label)])
    ph = np.exp(1j * carrier)
    c = math.sqrt(params.p1 / 2.0)
    return ModeState.from_dict(spec, {
        (0, "g"): math.sqrt(params.p0),
        (0, "e"): ph * c,
        (1, "g"): ph * c,
    })


def photon_pure_state(p0: float, p1: float, p2: float, time_label: str,
                      n_max: int = DEFAULT_N_MAX) -> ModeState:
    if abs(p0 + p1 + p2 - 1.0) > 1e-12 or min(p0, p1, p2) < 0:
        raise ConfigError(f"populations ({p0}, {p1}, {p2}) are not a probability vector")
    if p2 > 0 and n_max < 2:
        raise ConfigError("a two-photon term needs truncation n_max >= 2")
    spec = ModeSpec.of(photons=[(time_label, n_max)])
    terms = {(0,): math.sqrt(p0), (1,): math.sqrt(p1)}
    if p2 > 0:
        terms[(2,)] = math.sqrt(p2)
    return ModeState.from_dict(spec, terms)


def reduced_photon_density(p0: float, p1: float, time_label: str = "t",
                           n_max: int = DEFAULT_N_MAX) -> DensityState:
    """Photon state left after tracing the emitter out of the steady state."""
    if abs(p0 + p1 - 1.0) > 1e-12:
        raise ConfigError("reduced density needs p0 + p1 = 1")
    spec = ModeSpec.of(photons=[(time_label, n_max)])
    rho = np.zeros((spec.dim, spec.dim), dtype=complex)
    off = math.sqrt(p0 * p1 / 2.0)
    rho[0, 0] = p0 + p1 / 2.0
    rho[1, 1] = p1 / 2.0
    rho[0, 1] = rho[1, 0] = off
    return DensityState(spec, rho)


def load_defaults() -> dict:
    """The shipped device configuration document."""
    text = resources.files("rfcoherence").joinpath("data/defaults.json").read_text()
    return json.loads(text)


def default_emitter(**overrides) -> EmitterParams:
    doc = dict(load_defaults()["emitter"])
    doc.update(overrides)
    return EmitterParams.from_dict(doc)


def load_emitter(path: str | Path) -> EmitterParams:
    return EmitterParams.from_json(Path(path).read_text())


def reference_sets(doc: dict | None = None) -> list[tuple[float, EmitterParams]]:
    """Reference (nbar, populations, M') triples with the shared M, projected onto the simplex."""
    doc = load_defaults()["reference_sets"] if doc is None else doc
    out = []
    for row in doc["sets"]:
        params = EmitterParams.from_populations(row["p0"], row["p1"], row["p2"], normalize=True,
                                                nbar=row["nbar"], M=doc["M"], Mprime=row["Mprime"])
        out.append((row["nbar"], params))
    return out
