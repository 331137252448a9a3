"""Closed-form coherence, spectra, filtered photon statistics and phase-dependent HOM coincidences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emitter import EmitterParams
from .errors import ConfigError, NumericError
from .interferometry import AmziConfig
from .traces import (
    CorrelationTrace,
    SpectralComponent,
    SpectrumTrace,
    amzi_transfer,
    canonical_class,
    lorentzian,
)

FPI_RESOLUTION = 20e6
DIVERGENCE_FLOOR = 1e-12
MIN_POINTS_PER_FRINGE = 8
_FT_CUTOFF = 60.0


class DivergentLimitError(NumericError):
    """The requested quantity diverges (p1 -> 0 limit of the filtered g2)."""


# ---------------------------------------------------------------------------
# first-order coherence and spectrum


def laser_like_weight(params: EmitterParams, with_indistinguishability: bool = False) -> float:
    w = params.p0
    return math.sqrt(params.M) * w if with_indistinguishability else w


def g1_model(tau_delay, params: EmitterParams, with_indistinguishability: bool = False,
             include_carrier: bool = True):
    """|g1| = p1 exp(-tau/T2) + p0 exp(-tau/TL), optionally times the carrier exp(-i 2 pi nu tau).

    With ``with_indistinguishability`` the slowly decaying plateau is scaled by
    sqrt(M) and the remainder of the weight is given to the fast component, so
    that |g1(0)| = 1 still holds.
    """
    tau = np.asarray(tau_delay, dtype=float)
    if np.any(tau < 0):
        raise ConfigError("g1 is evaluated for non-negative delays")
    w_ll = laser_like_weight(params, with_indistinguishability)
    mag = (1.0 - w_ll) * np.exp(-tau / params.T2) + w_ll * np.exp(-tau / params.TL)
    if not include_carrier:
        return mag
    # the carrier phase is reduced mod 2 pi before exponentiation
    cycles = np.fmod(params.nu * tau, 1.0)
    return mag * np.exp(-2j * np.pi * cycles)


def spectrum_components(params: EmitterParams, with_indistinguishability: bool = False):
    w_ll = laser_like_weight(params, with_indistinguishability)
    return (
        SpectralComponent("laser_like", w_ll, 1.0 / (math.pi * params.TL)),
        SpectralComponent("broadband", 1.0 - w_ll, 1.0 / (math.pi * params.T2)),
    )


def default_frequency_grid(params: EmitterParams, span_fwhm: float = 10.0, points: int = 4001):
    """Symmetric grid wide enough to show the broadband component."""
    half = span_fwhm * 0.5 / (math.pi * params.T2)
    return np.linspace(-half, half, points)


def spectrum_analytic(params: EmitterParams, frequencies=None, instrument_fwhm: float | None = None,
                      with_indistinguishability: bool = False) -> SpectrumTrace:
    """Two unit-area Lorentzians (laser-like and broadband) weighted by p0 and p1.

    An instrument Lorentzian of FWHM ``instrument_fwhm`` convolves to a Lorentzian
    whose width is the sum of both widths.
    """
    f = default_frequency_grid(params) if frequencies is None else np.asarray(frequencies, dtype=float)
    comps = spectrum_components(params, with_indistinguishability)
    extra = instrument_fwhm or 0.0
    density = sum(c.weight * lorentzian(f, c.fwhm + extra) for c in comps)
    return SpectrumTrace(f, density, comps, instrument_fwhm=instrument_fwhm,
                         meta={"T2": params.T2, "TL": params.TL})


def filtered_spectrum(spec: SpectrumTrace, cfg: AmziConfig, port: str = "d") -> SpectrumTrace:
    """Multiply a spectrum by the intensity transfer of one AMZI output port."""
    f = spec.frequencies
    if f.size < 2:
        raise ConfigError("frequency grid too short to filter")
    df = float(np.max(np.diff(f)))
    if df * MIN_POINTS_PER_FRINGE > cfg.fringe_period:
        raise ConfigError(f"grid step {df:g} Hz gives fewer than {MIN_POINTS_PER_FRINGE} "
                          f"points per {cfg.fringe_period:g} Hz fringe")
    if spec.transfer is not None:
        raise ConfigError("spectrum is already filtered")
    port_key = "c" if port == cfg.port_c else "d" if port == cfg.port_d else None
    if port_key is None:
        raise ConfigError(f"unknown port {port!r}")
    transfer = {"tau": cfg.tau, "phi": cfg.phi, "port": port_key}
    density = spec.density * amzi_transfer(f, cfg.tau, cfg.phi, port_key)
    meta = dict(spec.meta, fringe_period_hz=cfg.fringe_period)
    return SpectrumTrace(f, density, spec.components, spec.instrument_fwhm, transfer, meta)


# ---------------------------------------------------------------------------
# AMZI-filtered (phi = pi) auto-correlation


def g2_filtered(degeneracy_class: str, p1: float) -> float:
    """Normalized g2 of port d at phi = pi for one degeneracy class."""
    cls = canonical_class(degeneracy_class)
    if not 0.0 <= p1 <= 1.0:
        raise ConfigError(f"p1={p1} outside [0, 1]")
    if cls == "nondegenerate":
        return 1.0
    if p1 <= DIVERGENCE_FLOOR:
        raise DivergentLimitError("filtered g2 diverges as p1 -> 0")
    if cls == "zero":
        return 1.0 / (p1 * p1)
    return (1.0 + 2.0 * p1) / (4.0 * p1 * p1)


def g2_filtered_trace(p1: float) -> CorrelationTrace:
    labels = np.array(["nondegenerate", "side(+tau)", "side(-tau)", "zero"])
    vals = np.array([g2_filtered(c, p1) for c in labels])
    return CorrelationTrace("g2", labels, vals, "baseline-normalized", meta={"p1": p1, "phi": math.pi})


# ---------------------------------------------------------------------------
# phase-dependent two-photon interference


@dataclass(frozen=True)
class HomCoincidences:
    """Coincidence probabilities (c at t1, d at t2) per slot pair, by lag class."""

    c0: np.ndarray | float
    c_side: np.ndarray | float
    c_zero: np.ndarray | float

    @property
    def side_ratio(self):
        return self.c_side / self.c0

    @property
    def zero_ratio(self):
        return self.c_zero / self.c0

    def get(self, degeneracy_class: str):
        cls = canonical_class(degeneracy_class)
        return {"nondegenerate": self.c0, "side(+tau)": self.c_side,
                "side(-tau)": self.c_side, "zero": self.c_zero}[cls]


def _check_hom_params(params: EmitterParams):
    if not (0.0 <= params.M <= 1.0 and 0.0 <= params.Mprime <= 1.0):
        raise ConfigError("M and M' must lie in [0, 1]")


def coincidence_baseline(phi, p0, p1, M=1.0):
    """Nondegenerate coincidence (p1^2/4) [(p0+p1)^2 - M p0^2 cos^2 phi].

    With p2 = 0 this is the familiar (p1^2/4)(1 - M p0^2 cos^2 phi); keeping
    (p0+p1)^2 makes it exact for the single-photon-projected input when p2 > 0.
    """
    c = np.cos(phi)
    return 0.25 * p1 * p1 * ((p0 + p1) ** 2 - M * p0 * p0 * c * c)


def coincidence_side(phi, p0, p1, M=1.0):
    """Coincidence at lag +-tau: (1/16) p0 p1^2 (3 - 2 M cos 2phi) + (3/16) p1^3."""
    return p0 * p1 * p1 * (3.0 - 2.0 * M * np.cos(2.0 * phi)) / 16.0 + 3.0 * p1 ** 3 / 16.0


def coincidence_side_simplified(phi, p0, p1, M=1.0):
    """Shorter (p1^2/16)(3 - 2 p0 M cos 2phi); equals :func:`coincidence_side` when p0 + p1 = 1."""
    return p1 * p1 * (3.0 - 2.0 * p0 * M * np.cos(2.0 * phi)) / 16.0


def coincidence_zero(phi, p0, p1, p2, M=1.0, Mprime=1.0):
    """Zero-lag coincidence from two-photon components plus imperfect HOM cancellation."""
    return (p2 / 4.0) * (1.0 - p0 * M * np.cos(2.0 * phi)) + \
        (p1 * p1 + 4.0 * p1 * p2 + 4.0 * p2 * p2) / 8.0 * (1.0 - Mprime)


def hom_coincidences(phi, params: EmitterParams) -> HomCoincidences:
    _check_hom_params(params)
    p0, p1, p2, M = params.p0, params.p1, params.p2, params.M
    return HomCoincidences(
        c0=coincidence_baseline(phi, p0, p1, M),
        c_side=coincidence_side(phi, p0, p1, M),
        c_zero=coincidence_zero(phi, p0, p1, p2, M, params.Mprime),
    )


def hom_trace(phi, params: EmitterParams, normalized: bool = True) -> dict[str, np.ndarray]:
    """C(0), C(+-tau) and C0 over a phase grid, optionally divided by C0."""
    phi = np.asarray(phi, dtype=float)
    h = hom_coincidences(phi, params)
    if normalized:
        return {"phi": phi, "zero": h.zero_ratio, "side": h.side_ratio, "nondegenerate": np.ones_like(phi)}
    return {"phi": phi, "zero": h.c_zero, "side": h.c_side, "nondegenerate": h.c0}


def has_side_crossover(params: EmitterParams, n_phi: int = 721) -> bool:
    """Whether C(+-tau)/C0 crosses 1 somewhere in phi."""
    phi = np.linspace(0.0, math.pi, n_phi)
    r = hom_coincidences(phi, params).side_ratio - 1.0
    return bool(np.any(r > 0) and np.any(r < 0))


def oracle_coincidences(phi: float, params: EmitterParams, degeneracy_class: str) -> float:
    """Brute-force Fock-space evaluation of the coincidence probability (M = M' = 1)."""
    from .oracle import coincidence_oracle

    return coincidence_oracle(phi, params, degeneracy_class)


def spectrum_numeric(params: EmitterParams, frequencies, with_indistinguishability: bool = False):
    """Spectral density from a quadrature Fourier transform of |g1| (Wiener-Khinchin).

    S(f) = 2 Re int_0^inf g1(t) e^{i 2 pi f t} dt with the carrier removed, so f is
    the offset from the emitter frequency. Each exponential is integrated on its
    own time scale, which keeps QUADPACK's oscillatory rule well conditioned.
    """
    from scipy.integrate import quad

    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    w_ll = laser_like_weight(params, with_indistinguishability)
    parts = ((1.0 - w_ll, params.T2), (w_ll, params.TL))
    out = np.zeros_like(f)
    for k, fk in enumerate(f):
        total = 0.0
        for weight, T in parts:
            if weight == 0.0:
                continue
            # integrate in units of T so the integrand is exp(-u) cos(2 pi f T u)
            omega = 2.0 * math.pi * abs(fk) * T
            # exp(-60) is far below the comparison tolerance, so [0, 60] stands in for [0, inf)
            val, _ = quad(lambda u: math.exp(-u), 0.0, _FT_CUTOFF, weight="cos", wvar=omega,
                          epsabs=0.0, epsrel=1e-12, limit=400)
            total += 2.0 * weight * T * val
        out[k] = total
    return out
