"""Asymmetric Mach-Zehnder interferometer acting on the emitter's temporal modes.

Port mapping used throughout: the early mode (t - tau) travels the long arm,
the late mode (t) the short arm and picks up the phase phi. Input creation
operators map to the output ports as

    a_early^dag -> (c^dag + d^dag)/sqrt2,   a_late^dag -> e^{i phi}(d^dag - c^dag)/sqrt2

when the entrance splitter is dropped ("drop" convention). Under "keep-3dB"
each input first loses half of its amplitude to the unused entrance port.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .emitter import EmitterParams, matter_label, steady_state
from .errors import ConfigError, ModelValidityWarning
from .fock import (
    DensityState,
    ModeSpec,
    ModeState,
    apply_beam_splitter,
    apply_loss,
    apply_phase,
    relabel,
    tensor,
)

CONVENTIONS = ("drop", "keep-3dB")
EARLY, LATE = "t-tau", "t"


class ConventionError(ConfigError):
    pass


@dataclass(frozen=True)
class AmziConfig:
    tau: float = 4.92e-9
    phi: float = math.pi
    entrance_loss_convention: str = "drop"
    port_c: str = "c"
    port_d: str = "d"

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("AMZI delay must be positive")
        if self.entrance_loss_convention not in CONVENTIONS:
            raise ConfigError(f"unknown entrance-loss convention {self.entrance_loss_convention!r}")
        if self.port_c == self.port_d:
            raise ConfigError("port labels must differ")

    @property
    def fringe_period(self) -> float:
        """Free spectral range of the interferometer in Hz."""
        return 1.0 / self.tau

    def check_timescales(self, params: EmitterParams, ratio: float = 10.0) -> bool:
        ok = params.T1 * ratio <= self.tau <= params.TL / ratio
        if not ok:
            warnings.warn(f"AMZI delay {self.tau:g} s violates T1 << tau << TL "
                          f"(T1={params.T1:g}, TL={params.TL:g})", ModelValidityWarning, stacklevel=2)
        return ok

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "AmziConfig":
        return cls(**doc)


def output_spec(cfg: AmziConfig, n_max: int = 2) -> ModeSpec:
    return ModeSpec.of(photons=[(cfg.port_c, n_max), (cfg.port_d, n_max)],
                       matter=[matter_label(EARLY), matter_label(LATE)])


def _closed_form_state(params: EmitterParams, cfg: AmziConfig, n_max: int) -> ModeState:
    p0, p1 = params.p0, params.p1
    u = np.exp(1j * cfg.phi)
    s = math.sqrt(p0 * p1 / 2.0)
    q = p1 / (2.0 * math.sqrt(2.0))
    r2 = math.sqrt(2.0)
    terms = [
        ((0, 0, "g", "g"), p0),
        ((0, 0, "g", "e"), s),
        ((0, 0, "e", "g"), s),
        ((0, 0, "e", "e"), p1 / 2.0),
        ((1, 0, "g", "g"), s * (1 - u) / r2),
        ((1, 0, "g", "e"), q),
        ((1, 0, "e", "g"), -u * q),
        ((2, 0, "g", "g"), -u * q),
        ((0, 1, "g", "g"), s * (1 + u) / r2),
        ((0, 1, "g", "e"), q),
        ((0, 1, "e", "g"), u * q),
        ((0, 2, "g", "g"), u * q),
    ]
    return ModeState.from_dict(output_spec(cfg, n_max), terms)


def _pipeline_state(params: EmitterParams, cfg: AmziConfig, n_max: int) -> ModeState | DensityState:
    early = steady_state(params, EARLY, n_max)
    late = steady_state(params, LATE, n_max)
    state = tensor([early, late])
    if cfg.entrance_loss_convention == "keep-3dB":
        state = apply_loss(state, EARLY, 0.5)
        state = apply_loss(state, LATE, 0.5)
    state = apply_phase(state, LATE, cfg.phi)
    state = apply_beam_splitter(state, EARLY, LATE, 0.5)
    state = relabel(state, {EARLY: cfg.port_d, LATE: cfg.port_c})
    order = [cfg.port_c, cfg.port_d, matter_label(EARLY), matter_label(LATE)]
    return _reorder_any(state, order)


def _reorder_any(state, labels: Sequence[str]):
    spec = state.spec
    perm = [spec.index(lbl) for lbl in labels]
    new_spec = spec.subset(labels)
    if isinstance(state, ModeState):
        return ModeState(new_spec, np.transpose(state.tensor_view, perm).reshape(-1))
    n = len(perm)
    t = np.transpose(state.tensor_view, perm + [n + i for i in perm])
    return DensityState(new_spec, t.reshape(new_spec.dim, new_spec.dim))


def amzi_output_state(params: EmitterParams, cfg: AmziConfig, method: str = "closed-form",
                      n_max: int = 2) -> ModeState | DensityState:
    """Joint state of output ports (c, d) at time bin t and the emitter in bins (t - tau, t).

    ``method="closed-form"`` writes the coefficients down directly (drop convention
    only); ``method="pipeline"`` builds the same object from two steady states with
    the Fock engine and supports both entrance-loss conventions.
    """
    if params.p2 != 0.0:
        raise ConfigError("the AMZI output state is built from p2 = 0 steady states")
    if params.M != 1.0:
        raise ConfigError("the output state is only defined for indistinguishable photons (M = 1)")
    if method == "closed-form":
        if cfg.entrance_loss_convention != "drop":
            raise ConventionError("the closed-form output state uses the drop convention")
        return _closed_form_state(params, cfg, n_max)
    if method == "pipeline":
        return _pipeline_state(params, cfg, n_max)
    raise ConfigError(f"unknown construction method {method!r}")


def fringe_visibility(params: EmitterParams) -> float:
    """First-order coherence plateau sqrt(M) * p0, i.e. the AMZI fringe visibility."""
    return math.sqrt(params.M) * params.p0


def port_rates(params: EmitterParams, phi, convention: str = "drop"):
    """Mean photon numbers per time bin at ports (c, d) for the steady-state source."""
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown entrance-loss convention {convention!r}")
    scale = 1.0 if convention == "drop" else 0.5
    v = fringe_visibility(params)
    cos = np.cos(phi)
    base = scale * params.p1 / 2.0
    return base * (1 - v * cos), base * (1 + v * cos)


def visibility_from_counts(counts_c, counts_d) -> float:
    """Fringe visibility from two complementary count series over a drifting phase.

    Each bin is normalized by the two-channel sum before taking extrema, which
    cancels source intensity drift. A channel that recorded nothing at all falls
    back to the single-detector estimate on the other one.
    """
    c = np.asarray(counts_c, dtype=float)
    d = np.asarray(counts_d, dtype=float)
    if c.size == 0 or d.size == 0:
        raise ConfigError("empty count series")
    if c.shape != d.shape:
        raise ConfigError("count series must have equal length")
    if not np.any(d):
        return _minmax_visibility(c)
    if not np.any(c):
        return _minmax_visibility(d)
    total = c + d
    if np.any(total <= 0):
        raise ConfigError(f"zero total counts in bin {int(np.flatnonzero(total <= 0)[0])}")
    return 0.5 * (_minmax_visibility(c / total) + _minmax_visibility(d / total))


def _minmax_visibility(x: np.ndarray) -> float:
    hi, lo = float(np.max(x)), float(np.min(x))
    if hi + lo <= 0:
        raise ConfigError("fringe has no counts")
    return (hi - lo) / (hi + lo)
