import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfcoherence.emitter import EmitterParams, ModelValidityWarning, reference_sets
from rfcoherence.errors import ConfigError
from rfcoherence.estimation import (
    RabiModel,
    coincidence_ratios,
    fit_visibility_curve,
    infer_p1_from_g2,
    load_coincidence_csv,
    load_visibility_csv,
    mle_fit_coincidences,
    ratio_jacobian,
    synthetic_coincidences,
    visibility_saturation,
)

PHIS = np.linspace(0.0, math.pi, 25)[:-1]


@pytest.mark.parametrize("index", [0, 1, 2])
def test_noiseless_recovery(index):
    _, p = reference_sets()[index]
    res = mle_fit_coincidences(synthetic_coincidences(p, PHIS), p.M)
    for k in ("p0", "p1", "p2", "Mprime"):
        assert res.parameters[k] == pytest.approx(getattr(p, k), abs=1e-6)
    assert res.converged


def test_noisy_recovery_within_three_sigma():
    _, p = reference_sets()[1]
    hits = 0
    for seed in range(10):
        data = synthetic_coincidences(p, PHIS, 0.02, np.random.default_rng(seed))
        res = mle_fit_coincidences(data, p.M, seed=seed)
        hits += all(abs(res.parameters[k] - getattr(p, k)) <= 3 * res.errors[k] for k in ("p1", "p2", "Mprime"))
    assert hits >= 9


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(0.0, 0.05), st.floats(0.3, 1.0), st.floats(0.3, 0.99))
def test_ratio_jacobian_matches_finite_differences(p1, p2, m, mp):
    phi = np.array([0.3, 1.1, 2.0])
    jz, js = ratio_jacobian(phi, p1, p2, m, mp)
    h = 1e-7
    base = np.array([p1, p2, mp])
    for j in range(3):
        up, dn = base.copy(), base.copy()
        up[j] += h
        dn[j] -= h
        zu, su = coincidence_ratios(phi, 1 - up[0] - up[1], up[0], up[1], m, up[2])
        zd, sd = coincidence_ratios(phi, 1 - dn[0] - dn[1], dn[0], dn[1], m, dn[2])
        assert np.allclose(jz[:, j], (zu - zd) / (2 * h), rtol=1e-5, atol=1e-5)
        assert np.allclose(js[:, j], (su - sd) / (2 * h), rtol=1e-5, atol=1e-5)


def test_fit_result_stays_on_simplex():
    _, p = reference_sets()[2]
    data = synthetic_coincidences(p, PHIS, 0.05, np.random.default_rng(3))
    res = mle_fit_coincidences(data, p.M)
    total = res.parameters["p0"] + res.parameters["p1"] + res.parameters["p2"]
    assert total == pytest.approx(1.0, abs=1e-12)
    assert min(res.parameters.values()) >= 0.0
    doc = res.to_json_dict()
    assert doc["parameters"]["p1"]["stderr"] > 0


def test_mle_input_errors():
    with pytest.raises(ConfigError):
        mle_fit_coincidences([(0.0, "zero", 0.1, 0.01)], 1.5)
    with pytest.raises(ConfigError):
        mle_fit_coincidences([(0.0, "zero", 0.1, 0.0)], 0.9)
    with pytest.raises(ConfigError):
        mle_fit_coincidences(synthetic_coincidences(EmitterParams(p0=0.7, p1=0.3), PHIS), 1.0, n_starts=2)


def _vis_data(nbar):
    return [(n, float(visibility_saturation(n, 0.946, 1.94))) for n in nbar]


def test_visibility_fit_recovers_curve():
    data = _vis_data(np.geomspace(0.005, 5.0, 12))
    sat = fit_visibility_curve(data, "saturation")
    rabi = fit_visibility_curve(data, "rabi")
    assert sat.parameters["x"] == pytest.approx(1.94, abs=1e-6)
    assert sat.parameters["V0"] == pytest.approx(0.946, abs=1e-9)
    assert rabi.parameters["x"] == pytest.approx(1.94, abs=1e-6)
    diff = np.array(sat.meta["residuals"]) - np.array(rabi.meta["residuals"])
    assert np.max(np.abs(diff)) <= 1e-9


def test_rabi_model_equivalence():
    m = RabiModel.from_x(1.94)
    assert m.x == pytest.approx(1.94)
    n = np.geomspace(1e-3, 10, 9)
    assert np.allclose(m.visibility(n, 0.946), visibility_saturation(n, 0.946, 1.94), atol=1e-15)


def test_visibility_spread_required():
    with pytest.raises(ConfigError, match="spread"):
        fit_visibility_curve(_vis_data([0.1, 0.11, 0.12, 0.13]))
    with pytest.raises(ConfigError):
        fit_visibility_curve(_vis_data([0.1, 1.0]))
    with pytest.raises(ConfigError):
        fit_visibility_curve(_vis_data([0.01, 0.1, 1.0]), "linear")


def test_infer_p1_from_g2():
    assert infer_p1_from_g2(3.35) == pytest.approx(0.546, abs=1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        infer_p1_from_g2(3.35, nbar=0.62)
    with pytest.warns(ModelValidityWarning):
        infer_p1_from_g2(168.9, nbar=0.0062)
    with pytest.raises(ConfigError):
        infer_p1_from_g2(0.5)


def test_loaders(tmp_path):
    good = tmp_path / "c.csv"
    good.write_text("phi_radians,class,value,error\n0.1,zero,0.2,0.01\n0.1,side,1.1,0.02\n")
    assert load_coincidence_csv(good) == [(0.1, "zero", 0.2, 0.01), (0.1, "side(+tau)", 1.1, 0.02)]
    bad = tmp_path / "b.csv"
    bad.write_text("phi_radians,class,value,error\n0.1,zero,0.2,0.01\n0.2,zero,abc,0.01\n")
    with pytest.raises(ConfigError, match="line 3"):
        load_coincidence_csv(bad)
    vis = tmp_path / "v.csv"
    vis.write_text("nbar,visibility,error\n0.01,0.93,0.01\n0.1,0.79,0.01\n")
    assert load_visibility_csv(vis)[1] == (0.1, 0.79, 0.01)
    with pytest.raises(ConfigError):
        load_visibility_csv(good)
