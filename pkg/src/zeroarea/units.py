"""Unit conversions. Everything internal is in Hartree atomic units."""

import math

# CODATA-derived constants
AU_TIME_S = 2.4188843265857e-17          # one a.u. of time in seconds
CM1_TO_AU = 1.0 / 219474.6313632          # wavenumber -> Hartree
KB_AU_PER_K = 3.1668115634556e-6          # Boltzmann constant, Hartree/K
AU_FIELD_INTENSITY_WCM2 = 3.50944758e16   # I[W/cm^2] = this * (E[a.u.])^2

FS_TO_AU = 1.0e-15 / AU_TIME_S
KB_CM1_PER_K = KB_AU_PER_K / CM1_TO_AU    # ~0.695035 cm^-1/K


def cm1_to_au(x: float) -> float:
    return x * CM1_TO_AU


def thz_to_au(f_thz: float) -> float:
    """Linear frequency in THz to cycles per a.u. of time."""
    return f_thz * 1.0e12 * AU_TIME_S


def kelvin_to_au(t_kelvin: float) -> float:
    """Temperature to k_B*T in Hartree."""
    return t_kelvin * KB_AU_PER_K


def fs_to_au(t_fs: float) -> float:
    return t_fs * FS_TO_AU


def field_from_intensity(intensity_w_cm2: float) -> float:
    """Peak field amplitude (a.u.) for a given peak intensity in W/cm^2."""
    if intensity_w_cm2 < 0:
        raise ValueError("intensity must be >= 0")
    return math.sqrt(intensity_w_cm2 / AU_FIELD_INTENSITY_WCM2)


def field_from_intensity_tw(intensity_tw_cm2: float) -> float:
    """Peak field amplitude (a.u.) for a peak intensity in TW/cm^2."""
    return field_from_intensity(intensity_tw_cm2 * 1.0e12)


def intensity_tw_from_field(e0_au: float) -> float:
    return AU_FIELD_INTENSITY_WCM2 * e0_au**2 / 1.0e12
