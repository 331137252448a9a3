import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfcoherence.correlations import (
    DivergentLimitError,
    coincidence_side,
    coincidence_side_simplified,
    filtered_spectrum,
    g1_model,
    g2_filtered,
    g2_filtered_trace,
    has_side_crossover,
    hom_coincidences,
    hom_trace,
    oracle_coincidences,
    spectrum_analytic,
    spectrum_numeric,
)
from rfcoherence.emitter import EmitterParams, reference_sets
from rfcoherence.errors import ConfigError
from rfcoherence.fock import ModeSpec, ModeState, apply_loss, correlator, photon_number
from rfcoherence.interferometry import AmziConfig, port_rates
from rfcoherence.oracle import filtered_g2_oracle, port_mean_oracle

CLASSES = ("nondegenerate", "side(+tau)", "side(-tau)", "zero")
PHI = st.floats(0.0, 2 * math.pi)


def simplex():
    return st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 0.2)).map(_normalize)


def _normalize(t):
    a, b, c = t
    s = a + b + c
    if s == 0:
        return (1.0, 0.0, 0.0)
    p1, p2 = b / s, c / s
    # rounding can push p0 a hair below zero
    if p1 + p2 >= 1.0:
        return (0.0, 1.0 - p2, p2)
    return (1.0 - p1 - p2, p1, p2)


def make(p, **kw):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return EmitterParams(p0=p[0], p1=p[1], p2=p[2], **kw)


# filtered auto-correlation


def test_g2_filtered_values():
    assert g2_filtered("zero", 0.546) == pytest.approx(3.35, abs=0.01)
    assert g2_filtered("nondegenerate", 0.3) == 1.0
    assert g2_filtered("side", 0.5) == pytest.approx(2.0 / (4 * 0.25))


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1.0))
def test_g2_zero_times_p1_squared_is_one(p1):
    assert g2_filtered("zero", p1) * p1 * p1 == pytest.approx(1.0, rel=1e-14)
    ratio = g2_filtered("side(-tau)", p1) / g2_filtered("zero", p1)
    assert ratio == pytest.approx((1 + 2 * p1) / 4, rel=1e-14)


def test_side_ratio_tends_to_quarter():
    assert g2_filtered("side", 1e-8) / g2_filtered("zero", 1e-8) == pytest.approx(0.25, rel=1e-6)


def test_divergent_limit():
    with pytest.raises(DivergentLimitError):
        g2_filtered("zero", 0.0)
    with pytest.raises(ConfigError):
        g2_filtered("zero", 1.5)
    with pytest.raises(ConfigError):
        g2_filtered("sideways", 0.5)


@pytest.mark.parametrize("p1", [0.05, 0.3, 0.8])
@pytest.mark.parametrize("cls", ["zero", "side(+tau)", "side(-tau)", "nondegenerate"])
def test_g2_filtered_matches_light_matter_network(p1, cls):
    p = EmitterParams(p0=1 - p1, p1=p1)
    assert filtered_g2_oracle(p, cls) == pytest.approx(g2_filtered(cls, p1), rel=1e-12)


def test_g2_trace_shape():
    t = g2_filtered_trace(0.5)
    assert t.value_at("zero")[0] == pytest.approx(4.0)


@pytest.mark.parametrize("phi", [0.0, 1.2, math.pi])
def test_port_means_match_keep_3db_rates(phi):
    p = EmitterParams(p0=0.7, p1=0.3)
    c, d = port_rates(p, phi, "keep-3dB")
    assert port_mean_oracle(p, phi, "d") == pytest.approx(d, abs=1e-14)
    assert port_mean_oracle(p, phi, "c") == pytest.approx(c, abs=1e-14)


# two-photon interference


@settings(max_examples=25, deadline=None)
@given(simplex(), PHI)
def test_closed_forms_match_oracle(p, phi):
    params = make(p)
    h = hom_coincidences(phi, params)
    for cls in CLASSES:
        assert float(h.get(cls)) == pytest.approx(oracle_coincidences(phi, params, cls), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(simplex(), PHI, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_hom_periodicity(p, phi, m, mp):
    params = make(p, M=m, Mprime=mp)
    a = hom_coincidences(phi, params)
    for shift in (math.pi, 2 * math.pi, -math.pi):
        b = hom_coincidences(phi + shift, params)
        for cls in CLASSES:
            assert float(b.get(cls)) == pytest.approx(float(a.get(cls)), abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), PHI, st.floats(0.0, 1.0))
def test_side_forms_agree_without_two_photon_term(p1, phi, m):
    a = coincidence_side(phi, 1 - p1, p1, m)
    b = coincidence_side_simplified(phi, 1 - p1, p1, m)
    assert a == pytest.approx(b, abs=1e-15)


def test_perfect_hom_cancels_zero_lag():
    h = hom_coincidences(np.linspace(0, math.pi, 7), EmitterParams(p0=0.7, p1=0.3))
    assert np.all(h.c_zero == 0.0)


def test_crossover_presence():
    sets = dict(reference_sets())
    assert has_side_crossover(sets[0.25])
    assert not has_side_crossover(sets[0.0062])
    for p in sets.values():
        h = hom_coincidences(np.linspace(0, math.pi, 181), p)
        assert np.all(h.c_zero < h.c_side)


def test_hom_trace_normalization():
    t = hom_trace([0.0, 1.0], EmitterParams(p0=0.6, p1=0.4, M=0.9, Mprime=0.9))
    assert np.all(t["nondegenerate"] == 1.0)
    raw = hom_trace([0.0, 1.0], EmitterParams(p0=0.6, p1=0.4, M=0.9, Mprime=0.9), normalized=False)
    assert np.allclose(t["side"], raw["side"] / raw["nondegenerate"])


# first-order coherence and spectrum


def _normalized_moments(state):
    na, nb = photon_number(state, "a"), photon_number(state, "b")
    g1 = correlator(state, ["a"], ["b"]) / math.sqrt(na * nb)
    g2aa = correlator(state, ["a", "a"], ["a", "a"]).real / na ** 2
    g2ab = correlator(state, ["a", "b"], ["b", "a"]).real / (na * nb)
    return np.array([g1.real, g1.imag, g2aa, g2ab])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([0.1, 0.5, 0.9]), st.sampled_from([0.1, 0.5, 0.9]))
def test_loss_invariance_of_normalized_correlations(seed, eta_a, eta_b):
    r = np.random.default_rng(seed)
    spec = ModeSpec.of(photons=[("a", 3), ("b", 3)])
    v = r.normal(size=spec.dim) + 1j * r.normal(size=spec.dim)
    psi = ModeState(spec, v / np.linalg.norm(v))
    before = _normalized_moments(psi)
    lossy = apply_loss(apply_loss(psi, "a", eta_a), "b", eta_b)
    assert np.allclose(_normalized_moments(lossy), before, atol=1e-10, rtol=0)


def test_g1_limits():
    p = EmitterParams.from_flux(0.25)
    assert abs(g1_model(0.0, p)) == pytest.approx(1.0)
    far = g1_model(50 * p.T2, p, include_carrier=False)
    assert far == pytest.approx(p.p0 * math.exp(-50 * p.T2 / p.TL), rel=1e-12)
    with pytest.raises(ConfigError):
        g1_model(-1.0, p)


def test_broadband_width_and_weights():
    p = EmitterParams.from_flux(0.0062)
    s = spectrum_analytic(p, np.linspace(-1e10, 1e10, 11))
    widths = {c.name: c.fwhm for c in s.components}
    weights = {c.name: c.weight for c in s.components}
    assert widths["broadband"] == pytest.approx(2.32e9, rel=0.02)
    assert weights["laser_like"] == pytest.approx(p.p0, abs=1e-10)


def test_numeric_transform_matches_analytic():
    p = EmitterParams.from_flux(0.25)
    f = np.array([0.0, 1e5, 3e5, 1e6, 1e8, 5e8, 2e9, 8e9])
    num = spectrum_numeric(p, f)
    ana = spectrum_analytic(p, f).density
    assert np.max(np.abs(num / ana - 1)) <= 1e-4


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.99), PHI)
def test_filtered_ports_are_complementary(p1, phi):
    p = EmitterParams(p0=1 - p1, p1=p1)
    f = np.linspace(-2e9, 2e9, 4001)
    s = spectrum_analytic(p, f, instrument_fwhm=20e6)
    cfg = AmziConfig(phi=phi)
    total = filtered_spectrum(s, cfg, "c").density + filtered_spectrum(s, cfg, "d").density
    assert np.allclose(total, s.density, rtol=1e-12, atol=0)


def test_filter_fringe_period_and_grid_check():
    cfg = AmziConfig(phi=math.pi)
    p = EmitterParams.from_flux(0.25)
    f = np.arange(-2000, 2001) * 1e6
    d = filtered_spectrum(spectrum_analytic(p, f), cfg, "d")
    assert d.meta["fringe_period_hz"] == pytest.approx(203.25e6, rel=1e-3)
    # laser line sits on a dark fringe of port d at phi = pi
    assert d.density[2000] < 1e-6 * spectrum_analytic(p, f).density[2000]
    with pytest.raises(ConfigError):
        filtered_spectrum(spectrum_analytic(p, np.arange(0, 10) * 50e6), cfg, "d")
    with pytest.raises(ConfigError):
        filtered_spectrum(d, cfg, "d")
