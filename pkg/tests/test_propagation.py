import math
import warnings

import pytest
from hypothesis import given, strategies as st

from thznet.propagation import (
    DEFAULT_ABSORPTION,
    AbsorptionRangeError,
    AbsorptionTable,
    LinkConfig,
    LosMode,
    ModelValidityWarning,
    UmiChannelParams,
    absorption_loss_db,
    dbm_to_w,
    noise_power_dbm,
    snr_db,
    snr_gap_db,
    spreading_loss_db,
    thz_model,
    thz_pathloss_db,
    umi_los_probability,
    umi_model,
    umi_pathloss_db,
    w_to_dbm,
)

# Expected values below were evaluated independently at 40 significant digits
# (mpmath) from the closed-form expressions, then frozen.
TWO_POINT_TABLE = AbsorptionTable((0.43e12, 1.5e12), (0.0279, 0.0552))


def test_spreading_loss_values():
    assert spreading_loss_db(430e9, 1.0) == pytest.approx(85.117152333475, abs=1e-9)
    assert spreading_loss_db(1.0345e12, 1.0) == pytest.approx(92.742393121918, abs=1e-9)
    assert spreading_loss_db(430e9, 104.7) == pytest.approx(125.516085967052, abs=1e-9)
    assert spreading_loss_db(1.5e12, 41.35) == pytest.approx(128.299118680768, abs=1e-9)


def test_spreading_unit_argument_is_zero():
    d = 299_792_458.0 / (4 * math.pi * 1e9)
    assert spreading_loss_db(1e9, d) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("f,d", [(0, 1), (1e9, 0), (-1, 1), (1e9, -2)])
def test_spreading_domain_errors(f, d):
    with pytest.raises(ValueError):
        spreading_loss_db(f, d)


def test_absorption_values():
    assert absorption_loss_db(0.43e12, 104.7, TWO_POINT_TABLE) == pytest.approx(12.686306399220, abs=1e-9)
    assert absorption_loss_db(1.5e12, 41.35, TWO_POINT_TABLE) == pytest.approx(9.912858408338, abs=1e-9)
    assert absorption_loss_db(0.8e12, 0.0, TWO_POINT_TABLE) == 0.0


def test_absorption_out_of_range_raises():
    with pytest.raises(AbsorptionRangeError):
        absorption_loss_db(0.3e12, 1.0)
    with pytest.raises(AbsorptionRangeError):
        DEFAULT_ABSORPTION.coefficient(1.6e12)


def test_thz_pathloss_default_table():
    assert thz_pathloss_db(0.43e12, 104.7) == pytest.approx(138.202392366272, abs=1e-9)
    assert thz_pathloss_db(1.5e12, 41.35) == pytest.approx(138.211977089106, abs=1e-9)


def test_default_table_interpolates_midpoint():
    k = DEFAULT_ABSORPTION.coefficient(1.0345e12)
    assert k == pytest.approx(0.0433, abs=1e-12)
    assert TWO_POINT_TABLE.coefficient(1.0345e12) == pytest.approx(0.043323224299, abs=1e-12)


def test_table_from_file(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("# f_Hz k\n4.3e11 0.03\n\n1.5e12 0.05  # end\n")
    table = AbsorptionTable.from_file(p)
    assert table.frequencies == (4.3e11, 1.5e12)
    assert table.coefficient(9.65e11) == pytest.approx(0.04)


def test_table_validation():
    with pytest.raises(ValueError):
        AbsorptionTable((2.0, 1.0), (0.1, 0.1))
    with pytest.raises(ValueError):
        AbsorptionTable((1.0,), (-0.1,))
    with pytest.raises(ValueError):
        AbsorptionTable((1.0, 2.0), (0.1,))


def test_los_probability():
    assert umi_los_probability(10.0) == 1.0
    assert umi_los_probability(18.0) == 1.0
    assert umi_los_probability(36.0) == pytest.approx(0.683939720586, abs=1e-12)
    assert umi_los_probability(math.inf) == 0.0
    assert umi_los_probability(1e6) < 1e-4
    with pytest.raises(ValueError):
        umi_los_probability(-1.0)


def test_umi_pathloss_values():
    assert umi_pathloss_db(30e9, 100.0, True) == pytest.approx(103.942425094393, abs=1e-9)
    assert umi_pathloss_db(30e9, 1.0, True) == pytest.approx(61.942425094393, abs=1e-9)
    assert umi_pathloss_db(30e9, 100.0, True, shadow_sample=4.0) == pytest.approx(107.942425094393)


def test_umi_nlos_is_at_least_los():
    for d in (1.0, 10.0, 50.0, 300.0):
        assert umi_pathloss_db(28e9, d, False) >= umi_pathloss_db(28e9, d, True)
    # 35.3 log10(100) + 22.4 + 21.3 log10(30)
    assert umi_pathloss_db(30e9, 100.0, False) == pytest.approx(124.462682725529, abs=1e-9)


def test_umi_warns_outside_validity():
    with pytest.warns(ModelValidityWarning):
        umi_pathloss_db(140e9, 10.0, True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        umi_pathloss_db(28e9, 10.0, True)


def test_noise_power():
    assert noise_power_dbm(1.0, 0.0) == -174.0
    assert noise_power_dbm(400e6, 10.0) == pytest.approx(-77.979400086720, abs=1e-9)
    assert noise_power_dbm(50e9, 10.0) == pytest.approx(-57.010299956640, abs=1e-9)


def test_snr_examples():
    thz = LinkConfig(0.43e12, 50e9)
    mm = LinkConfig(30e9, 400e6)
    assert snr_db(thz, 100.0, thz_model(TWO_POINT_TABLE)) == pytest.approx(-53.233968378576, abs=1e-9)
    assert snr_db(mm, 100.0, umi_model(True)) == pytest.approx(1.026675035687, abs=1e-9)


def test_snr_gap_reported_per_distance():
    gaps = snr_gap_db([5.0, 30.0, 100.0], LinkConfig(30e9, 400e6), LinkConfig(0.43e12, 50e9))
    assert len(gaps) == 3
    assert gaps[0] < gaps[1] < gaps[2]


def test_link_config_validation():
    for kwargs in (dict(carrier_frequency=0, bandwidth=1), dict(carrier_frequency=1, bandwidth=0),
                   dict(carrier_frequency=1, bandwidth=1, tx_power=0),
                   dict(carrier_frequency=1, bandwidth=1, tx_elements=0)):
        with pytest.raises(ValueError):
            LinkConfig(**kwargs)
    assert LinkConfig(1e9, 1e6).tx_power_dbm == pytest.approx(26.989700043360)


def test_umi_params():
    p = UmiChannelParams(los_mode="forced-los")
    assert p.los_mode is LosMode.LOS
    assert p.distance_3d(0.0) == pytest.approx(8.5)
    with pytest.raises(ValueError):
        UmiChannelParams(bs_height=0)
    with pytest.raises(ValueError):
        UmiChannelParams(shadow_sigma_los=-1)


# -- properties

distances = st.floats(min_value=0.1, max_value=1000.0)
thz_freqs = st.floats(min_value=0.43e12, max_value=1.5e12)


@given(thz_freqs, distances, st.floats(min_value=1.001, max_value=5.0))
def test_thz_pathloss_increases_with_distance(f, d, factor):
    assert thz_pathloss_db(f, d * factor) > thz_pathloss_db(f, d)


@given(st.floats(min_value=1e9, max_value=1e13), distances, st.floats(min_value=1.001, max_value=3.0))
def test_spreading_increases_with_frequency(f, d, factor):
    assert spreading_loss_db(f * factor, d) > spreading_loss_db(f, d)


@given(thz_freqs, distances)
def test_absorption_linear_in_distance(f, d):
    assert absorption_loss_db(f, 2 * d) == pytest.approx(2 * absorption_loss_db(f, d), rel=1e-12)


@given(st.floats(min_value=-30.0, max_value=80.0), distances)
def test_snr_gain_additivity(g, d):
    link = LinkConfig(1e12, 50e9)
    model = thz_model()
    assert snr_db(link, d, model, g) - snr_db(link, d, model, 0.0) == pytest.approx(g, abs=1e-9)


@given(st.floats(min_value=1e-9, max_value=1e6))
def test_watt_dbm_roundtrip(p):
    assert dbm_to_w(w_to_dbm(p)) == pytest.approx(p, rel=1e-9)


@given(st.floats(min_value=0.0, max_value=1e5))
def test_los_probability_bounds(d):
    assert 0.0 <= umi_los_probability(d) <= 1.0


@given(st.floats(min_value=18.0, max_value=1e4), st.floats(min_value=1.0, max_value=10.0))
def test_los_probability_nonincreasing(d, factor):
    assert umi_los_probability(d * factor) <= umi_los_probability(d) + 1e-15
