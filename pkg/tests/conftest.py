import hypothesis
import numpy as np
import pytest

from zeroarea import gridfrag

# deterministic, CI-friendly hypothesis defaults
hypothesis.settings.register_profile(
    "default", max_examples=40, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def synthetic_diabatic():
    """Diabatized shipped benchmark model, reused across modules."""
    return gridfrag.diabatize(gridfrag.synthetic_model())


@pytest.fixture(scope="session")
def synthetic_ground(synthetic_diabatic):
    return gridfrag.ground_state(synthetic_diabatic)


@pytest.fixture(scope="session")
def scattering_set(synthetic_diabatic):
    """Small Moller set over the synthetic model's bright energy band."""
    return gridfrag.scattering_set_from_energy_band(
        synthetic_diabatic, [1, 2], (2.56, 2.68), n_k=6, t_free=400.0, dt=1.0
    )


def assert_close(a, b, tol, label=""):
    a = np.asarray(a)
    b = np.asarray(b)
    err = np.max(np.abs(a - b))
    assert err <= tol, f"{label}: |diff| = {err:.3e} > {tol:.1e}"
