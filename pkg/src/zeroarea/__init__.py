"""zeroarea: zero-area control fields for molecular orientation and fragmentation."""

__version__ = "0.1.0"

from .pulse import (  # noqa: F401
    Pulse,
    Spectrogram,
    Spectrum,
    area,
    envelope_s,
    eval_family,
    filter_low_frequencies,
    hermite_guess,
    sample_family,
    spectrogram,
    spectrum,
)
from .rotor import RotorDensity, RotorModel, RotorState, co_model  # noqa: F401
from .gridfrag import (  # noqa: F401
    AdiabaticModel,
    DiabaticModel,
    GridWavepacket,
    ScatteringSet,
    diabatize,
    synthetic_model,
)
from .control import ControlConfig, ControlResult, krotov_optimize, lct_run  # noqa: F401
