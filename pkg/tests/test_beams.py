import pytest

from thznet.beams import (MAX_PAIR_COUNT, MMWAVE_ARRAYS, THZ_ARRAYS, ArrayPair,
                          beamforming_gain_db, scan_pair_count)


def test_gain_values():
    assert beamforming_gain_db(ArrayPair(1024, 256)) == pytest.approx(54.185399219517, abs=1e-9)
    assert beamforming_gain_db(ArrayPair(16, 4)) == pytest.approx(18.061799739839, abs=1e-9)
    assert beamforming_gain_db(ArrayPair(1, 1)) == 0.0


def test_default_pair_counts():
    assert scan_pair_count(MMWAVE_ARRAYS) == 208
    assert scan_pair_count(THZ_ARRAYS) == 411538


def test_beams_are_independent_of_elements():
    a = ArrayPair(16, 4, 100, 3)
    assert scan_pair_count(a) == 300
    assert beamforming_gain_db(a) == beamforming_gain_db(ArrayPair(16, 4))


def test_overflow_guard():
    big = ArrayPair(1, 1, 2**32, 2**32)
    assert 2**64 > MAX_PAIR_COUNT
    with pytest.raises(OverflowError):
        scan_pair_count(big)


@pytest.mark.parametrize("args", [(0, 1), (1, 0), (1, 1, 0, 1), (1, 1, 1, 0), (1.5, 1)])
def test_validation(args):
    with pytest.raises(ValueError):
        ArrayPair(*args)
