import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfcoherence.fock import (
    DensityState,
    DimensionCapError,
    FockError,
    LabelError,
    ModeSpec,
    ModeState,
    apply_beam_splitter,
    apply_loss,
    apply_phase,
    correlator,
    partial_trace,
    photon_number,
    project_photon_number,
    splitter_matrix,
    tensor,
    two_mode_fock_unitary,
)


def two_modes(n_max=2):
    return ModeSpec.of(photons=[("a", n_max), ("b", n_max)])


def random_state(spec, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=spec.dim) + 1j * r.normal(size=spec.dim)
    return ModeState(spec, v / np.linalg.norm(v))


def test_splitter_matrix_is_unitary():
    u = splitter_matrix(0.3, 0.7)
    assert np.allclose(u @ u.conj().T, np.eye(2))


def test_fock_unitary_is_unitary():
    n_max = 3
    u = two_mode_fock_unitary(splitter_matrix(0.5), n_max)
    # exact on the sector whose total photon number fits in one mode
    keep = np.add.outer(np.arange(n_max + 1), np.arange(n_max + 1)).reshape(-1) <= n_max
    block = u[np.ix_(keep, keep)]
    assert np.allclose(block @ block.conj().T, np.eye(block.shape[0]), atol=1e-12)


def test_hom_dip_on_balanced_splitter():
    psi = ModeState.basis(two_modes(), {"a": 1, "b": 1})
    out = apply_beam_splitter(psi, "a", "b", 0.5)
    assert abs(out.amplitude({"a": 1, "b": 1})) < 1e-14
    assert abs(out.amplitude({"a": 2, "b": 0})) ** 2 == pytest.approx(0.5)
    assert abs(out.amplitude({"a": 0, "b": 2})) ** 2 == pytest.approx(0.5)


def test_single_photon_splits_evenly():
    psi = ModeState.basis(two_modes(1), {"a": 1})
    out = apply_beam_splitter(psi, "a", "b", 0.5)
    assert photon_number(out, "a") == pytest.approx(0.5)
    assert photon_number(out, "b") == pytest.approx(0.5)


def test_truncation_overflow_is_reported():
    psi = ModeState.basis(two_modes(1), {"a": 1, "b": 1})
    with pytest.raises(FockError):
        apply_beam_splitter(psi, "a", "b", 0.5)


def test_unknown_label_and_cap():
    with pytest.raises(LabelError):
        photon_number(ModeState.basis(two_modes()), "z")
    with pytest.raises(DimensionCapError):
        ModeSpec.of(photons=[(str(i), 9) for i in range(8)], dimension_cap=1000)


def test_unnormalized_state_rejected():
    with pytest.raises(FockError):
        ModeState(two_modes(), np.ones(9))


def test_phase_leaves_numbers_unchanged():
    psi = random_state(two_modes(), 0)
    out = apply_phase(psi, "a", 1.1)
    assert photon_number(out, "a") == pytest.approx(photon_number(psi, "a"))


def test_partial_trace_and_projection():
    psi = ModeState.from_dict(two_modes(1), {(1, 0): 1 / math.sqrt(2), (0, 1): 1 / math.sqrt(2)})
    rho = partial_trace(psi, ["a"])
    assert rho.purity() == pytest.approx(0.5)
    p, post = project_photon_number(psi, "a", 1)
    assert p == pytest.approx(0.5)
    assert photon_number(post, "b") == pytest.approx(0.0)


def test_density_and_pure_correlators_agree():
    psi = random_state(two_modes(), 3)
    rho = psi.to_density()
    for c, a in ((["a"], ["a"]), (["a", "b"], ["b", "a"]), (["a"], ["b"])):
        assert correlator(rho, c, a) == pytest.approx(correlator(psi, c, a), abs=1e-12)


def test_tensor_product_factorizes():
    a = ModeState.from_dict(ModeSpec.of(photons=[("a", 1)]), {(0,): 0.6, (1,): 0.8})
    b = ModeState.from_dict(ModeSpec.of(photons=[("b", 1)]), {(0,): 0.8, (1,): 0.6})
    ab = tensor([a, b])
    assert correlator(ab, ["a", "b"], ["b", "a"]).real == pytest.approx(0.64 * 0.36)


def test_loss_scales_mean_number():
    psi = random_state(two_modes(), 5)
    out = apply_loss(psi, "a", 0.3)
    assert isinstance(out, DensityState)
    assert photon_number(out, "a") == pytest.approx(0.3 * photon_number(psi, "a"))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi))
def test_beam_splitter_conserves_norm_and_number(seed, t, phase):
    psi = random_state(ModeSpec.of(photons=[("a", 4), ("b", 4)]), seed)
    # keep total photon number <= 4 so nothing leaves the truncated space
    amps = psi.tensor_view.copy()
    n = np.add.outer(np.arange(5), np.arange(5))
    amps[n > 4] = 0
    psi = ModeState(psi.spec, amps.reshape(-1) / np.linalg.norm(amps))
    out = apply_beam_splitter(psi, "a", "b", t, phase)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)
    tot_in = photon_number(psi, "a") + photon_number(psi, "b")
    tot_out = photon_number(out, "a") + photon_number(out, "b")
    assert tot_out == pytest.approx(tot_in, abs=1e-10)
