import math

import pytest

from rfcoherence.correlations import hom_coincidences
from rfcoherence.emitter import EmitterParams
from rfcoherence.errors import ConfigError
from rfcoherence.oracle import coincidence_oracle, mean_photon_oracle, oracle_check


def test_nondegenerate_at_quadrature():
    p = EmitterParams(p0=0.7, p1=0.3)
    assert coincidence_oracle(math.pi / 2, p, "nondegenerate") == pytest.approx(0.3 ** 2 / 4, abs=1e-14)


def test_zero_lag_with_two_photon_term():
    p = EmitterParams(p0=0.515, p1=0.48, p2=0.005)
    for phi in (0.0, 0.9, math.pi):
        assert coincidence_oracle(phi, p, "zero") == pytest.approx(float(hom_coincidences(phi, p).c_zero), abs=1e-12)


def test_mean_photon_number_is_conserved():
    p = EmitterParams(p0=0.515, p1=0.48, p2=0.005)
    # half of each of two bins reaches the output pair, so one bin's worth leaves
    total = mean_photon_oracle(1.3, p, "c") + mean_photon_oracle(1.3, p, "d")
    assert total == pytest.approx(p.p1 + 2 * p.p2, abs=1e-12)


def test_oracle_rejects_distinguishable_photons():
    with pytest.raises(ConfigError):
        coincidence_oracle(0.0, EmitterParams(p0=0.7, p1=0.3, M=0.9), "zero")


def test_oracle_check_rows():
    rows = oracle_check(EmitterParams(p0=0.605, p1=0.39, p2=0.005))
    assert len(rows) == 36
    assert all(r["ok"] for r in rows)
