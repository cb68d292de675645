import math

from zeroarea import units


def test_intensity_field_roundtrip():
    e0 = units.field_from_intensity_tw(20.0)
    assert abs(e0 - 2.39e-2) < 2e-4  # standard I = 3.509e16 E^2 conversion
    assert abs(units.intensity_tw_from_field(e0) - 20.0) < 1e-12


def test_co_rotational_period_au_and_ps():
    b = units.cm1_to_au(1.9312)
    t_per = math.pi / b
    assert abs(t_per - 3.57e5) / 3.57e5 < 2e-3
    assert abs(t_per * units.AU_TIME_S - 8.64e-12) / 8.64e-12 < 2e-3


def test_thz_conversion():
    # 1 THz period = 1 ps = 41341 a.u.
    f = units.thz_to_au(1.0)
    assert abs(1.0 / f - 41341.37) < 0.5


def test_boltzmann_constant_in_wavenumbers():
    assert abs(units.KB_CM1_PER_K - 0.6950348) < 1e-6


def test_negative_intensity_rejected():
    import pytest

    with pytest.raises(ValueError):
        units.field_from_intensity(-1.0)
