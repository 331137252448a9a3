"""Brute-force Fock-space evaluation of AMZI correlations, used to cross-check the closed forms.

Every input time bin X gets a vacuum companion. An entrance 50:50 splitter turns
(X, companion) into a long-arm mode (kept in the X slot) and a short-arm mode
(kept in the companion slot); the short arm picks up phi. The exit splitter of
output bin X mixes the long arm of the previous bin with the short arm of X and
leaves d_X in the previous bin's slot and c_X in the companion slot. This is the
"keep-3dB" network, so in Heisenberg form

    c_X = (a_{X-tau} - e^{i phi} a_X) / 2,   d_X = (a_{X-tau} + e^{i phi} a_X) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emitter import EmitterParams
from .errors import ConfigError
from .fock import ModeSpec, ModeState, apply_beam_splitter, apply_phase, correlator, tensor
from .traces import canonical_class


@dataclass(frozen=True)
class _Layout:
    chains: tuple[int, ...]  # number of consecutive bins per independent chain
    first: tuple[int, int]  # (chain, output index) of the first detection
    second: tuple[int, int]


# detection of port A at t1 and port B at t2; lag = t2 - t1 in units of tau
_LAYOUTS = {
    "zero": _Layout((2,), (0, 1), (0, 1)),
    "side(+tau)": _Layout((3,), (0, 1), (0, 2)),
    "side(-tau)": _Layout((3,), (0, 2), (0, 1)),
    "nondegenerate": _Layout((2, 2), (0, 1), (1, 1)),
}


def _bin(chain: int, i: int) -> str:
    return f"x{chain}_{i}"


def _companion(chain: int, i: int) -> str:
    return f"v{chain}_{i}"


def _port_mode(port: str, chain: int, i: int) -> str:
    if i < 1:
        raise ConfigError("the first bin of a chain has no complete output")
    return _bin(chain, i - 1) if port == "d" else _companion(chain, i)


def _bin_state(chain: int, i: int, amps: dict, n_max: int, with_matter: bool) -> ModeState:
    x, v = _bin(chain, i), _companion(chain, i)
    matter = [f"{x}.m"] if with_matter else []
    spec = ModeSpec.of(photons=[(x, n_max), (v, n_max)], matter=matter)
    terms = {}
    for occ, a in amps.items():
        n, m = occ if with_matter else (occ, None)
        key = (n, 0, m) if with_matter else (n, 0)
        terms[key] = a
    return ModeState.from_dict(spec, terms)


def _network(chains, amps: dict, phi: float, n_max: int, with_matter: bool) -> ModeState:
    parts = [_bin_state(c, i, amps, n_max, with_matter) for c, k in enumerate(chains) for i in range(k)]
    state = tensor(parts)
    for c, k in enumerate(chains):
        for i in range(k):
            state = apply_beam_splitter(state, _bin(c, i), _companion(c, i), 0.5)
            state = apply_phase(state, _companion(c, i), phi)
        for i in range(1, k):
            state = apply_beam_splitter(state, _bin(c, i - 1), _companion(c, i), 0.5)
    return state


def _require_indistinguishable(params: EmitterParams):
    if params.M != 1.0 or params.Mprime != 1.0:
        raise ConfigError("the Fock-space oracle models indistinguishable photons only (M = M' = 1)")


def coincidence_oracle(phi: float, params: EmitterParams, degeneracy_class: str,
                       ports: tuple[str, str] = ("c", "d")) -> float:
    """Probability of ``ports[0]`` at t1 and ``ports[1]`` at t2 for the lag class, from the pure photon-number input.

    The zero-lag class keeps the full sqrt(p0)|0> + sqrt(p1)|1> + sqrt(p2)|2> input.
    The other classes only see single-photon terms at the order kept by the closed
    forms, so they use the input projected onto n <= 1 and rescale by s^K, where
    s = p0 + p1 and K is the number of bins involved.
    """
    _require_indistinguishable(params)
    cls = canonical_class(degeneracy_class)
    lay = _LAYOUTS[cls]
    p0, p1, p2 = params.p0, params.p1, params.p2
    if cls == "zero":
        amps = {0: math.sqrt(p0), 1: math.sqrt(p1), 2: math.sqrt(p2)}
        n_max, scale = 4, 1.0
    else:
        s = p0 + p1
        if s <= 0:
            return 0.0
        amps = {0: math.sqrt(p0 / s), 1: math.sqrt(p1 / s)}
        n_max, scale = 2, s ** sum(lay.chains)
    state = _network(lay.chains, amps, phi, n_max, with_matter=False)
    if any(p not in ("c", "d") for p in ports):
        raise ConfigError(f"ports must be 'c' or 'd', got {ports}")
    first = _port_mode(ports[0], *lay.first)
    second = _port_mode(ports[1], *lay.second)
    val = correlator(state, [first, second], [second, first]).real
    return scale * val


def mean_photon_oracle(phi: float, params: EmitterParams, port: str) -> float:
    """Mean photon number per bin at one port for the pure photon-number input."""
    _require_indistinguishable(params)
    amps = {0: math.sqrt(params.p0), 1: math.sqrt(params.p1), 2: math.sqrt(params.p2)}
    state = _network((2,), amps, phi, 4, with_matter=False)
    mode = _port_mode(port, 0, 1)
    return correlator(state, [mode], [mode]).real


def _steady_amps(params: EmitterParams) -> dict:
    if params.p2 != 0.0:
        raise ConfigError("the light-matter oracle needs p2 = 0")
    c = math.sqrt(params.p1 / 2.0)
    return {(0, "g"): math.sqrt(params.p0), (0, "e"): c, (1, "g"): c}


def filtered_g2_oracle(params: EmitterParams, degeneracy_class: str, phi: float = math.pi) -> float:
    """Normalized auto-correlation of port d built from entangled light-matter steady states."""
    _require_indistinguishable(params)
    cls = canonical_class(degeneracy_class)
    lay = _LAYOUTS[cls]
    state = _network(lay.chains, _steady_amps(params), phi, 2, with_matter=True)
    d1 = _port_mode("d", *lay.first)
    d2 = _port_mode("d", *lay.second)
    num = correlator(state, [d1, d2], [d2, d1]).real
    den = correlator(state, [d1], [d1]).real * correlator(state, [d2], [d2]).real
    if den <= 0:
        raise ConfigError("port d is dark; g2 undefined")
    return num / den


def port_mean_oracle(params: EmitterParams, phi: float, port: str = "d") -> float:
    """Mean photon number at one port per bin (keep-3dB network, light-matter input)."""
    _require_indistinguishable(params)
    state = _network((2,), _steady_amps(params), phi, 2, with_matter=True)
    mode = _port_mode(port, 0, 1)
    return correlator(state, [mode], [mode]).real


def oracle_check(params: EmitterParams, phis=None, tol: float = 1e-10) -> list[dict]:
    """Compare closed-form coincidences with the oracle over a phase grid."""
    from .correlations import hom_coincidences

    phis = np.linspace(0.0, 2.0 * math.pi, 9) if phis is None else np.asarray(phis, dtype=float)
    rows = []
    for phi in phis:
        closed = hom_coincidences(float(phi), params)
        for cls in ("nondegenerate", "side(+tau)", "side(-tau)", "zero"):
            a = float(closed.get(cls))
            b = coincidence_oracle(float(phi), params, cls)
            err = abs(a - b)
            rows.append({"phi": float(phi), "class": cls, "closed_form": a, "oracle": b,
                         "abs_error": err, "ok": err <= tol})
    return rows
