import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from zeroarea import units
from zeroarea.pulse import Pulse, sample_family
from zeroarea.rotor import (
    RotorDensity,
    RotorModel,
    RotorState,
    boltzmann_init,
    build_operators,
    co_model,
    free_cos_theta,
    free_cos_theta_density,
    free_orientation_peak,
    ground_rotor_state,
    propagate_density,
    propagate_state,
    target_operator,
    write_trajectory,
)


# --- matrix-element oracle: numerical quadrature over the sphere -----------------


def assoc_legendre_norm(j, m, x):
    """Normalized associated Legendre part of Y_jm (Condon-Shortley)."""
    from scipy.special import lpmv
    from math import factorial

    pref = np.sqrt((2 * j + 1) / 2 * factorial(j - abs(m)) / factorial(j + abs(m)))
    val = lpmv(abs(m), j, x)
    if m < 0:
        val = (-1) ** abs(m) * val
    return pref * val


def cos_matrix_element_quadrature(j1, j2, m):
    def integrand(x):
        return assoc_legendre_norm(j1, m, x) * x * assoc_legendre_norm(j2, m, x)

    val, _ = quad(integrand, -1, 1, limit=200)
    return val


@pytest.mark.parametrize(
    "j1,j2,m",
    [(0, 1, 0), (1, 2, 1), (1, 2, 0), (3, 4, 2), (5, 6, 5), (2, 3, -1)],
)
def test_cos_theta_elements_vs_spherical_quadrature(j1, j2, m):
    model = RotorModel(b=1.0, d=1.0, jmax=8)
    _, x = build_operators(model, m)
    i1, i2 = j1 - abs(m), j2 - abs(m)
    oracle = cos_matrix_element_quadrature(j1, j2, m)
    assert abs(x[i1, i2] - oracle) < 1e-10


def test_cos_theta_known_values():
    model = co_model(6)
    _, x0 = build_operators(model, 0)
    assert abs(x0[0, 1] - 1 / np.sqrt(3)) < 1e-15
    _, x1 = build_operators(model, 1)
    assert abs(x1[0, 1] - np.sqrt(3.0 / 15.0)) < 1e-15


def test_cos_theta_diagonal_zero_parity():
    model = co_model(10)
    for m in (0, 2, 7):
        _, x = build_operators(model, m)
        assert np.all(np.diag(x) == 0.0)
        # only the j <-> j+1 couplings survive
        off = x - np.diag(np.diag(x, 1), 1) - np.diag(np.diag(x, -1), -1)
        assert np.all(off == 0.0)


def test_build_operators_rejects_large_m():
    with pytest.raises(ValueError):
        build_operators(co_model(4), 5)


def test_default_co_parameters():
    m = co_model()
    assert m.jmax >= 12
    assert abs(m.b - units.cm1_to_au(1.9312)) < 1e-18
    assert m.d == 0.044


# --- pure-state propagation ----------------------------------------------------------


def test_zero_field_ground_state_stays_dark():
    m = co_model(8)
    p = Pulse(0.0, 50.0, np.zeros(64))
    traj = propagate_state(m, ground_rotor_state(m), p)
    assert np.max(np.abs(traj.cos_theta)) < 1e-12
    assert np.max(np.abs(traj.norm - 1.0)) < 1e-12


def test_propagation_norm_conserved_and_bounded():
    m = co_model(12)
    e0 = units.field_from_intensity_tw(20.0)
    p = sample_family(e0, 0.14 * m.t_per, units.thz_to_au(0.9), 256)
    traj = propagate_state(m, ground_rotor_state(m), p, dt_sub=p.dt / 4)
    assert np.max(np.abs(traj.norm - 1.0)) < 1e-9
    assert np.max(np.abs(traj.cos_theta)) <= 1.0 + 1e-12


def test_propagator_matches_ode_oracle():
    # independent high-accuracy integration of the same TDSE
    from scipy.integrate import solve_ivp

    m = co_model(10)
    e0 = units.field_from_intensity_tw(5.0)
    p = sample_family(e0, 3.0e4, units.thz_to_au(1.2), 128)
    h0, x = build_operators(m, 0)

    def rhs(t, y):
        psi = y[:11] + 1j * y[11:]
        e = np.interp(t, p.times, p.samples)
        dpsi = -1j * (h0 * psi - e * m.d * (x @ psi))
        return np.concatenate([dpsi.real, dpsi.imag])

    psi0 = np.zeros(11, complex)
    psi0[0] = 1.0
    sol = solve_ivp(
        rhs,
        (p.times[0], p.times[-1]),
        np.concatenate([psi0.real, psi0.imag]),
        rtol=1e-11,
        atol=1e-13,
    )
    psi_ode = sol.y[:11, -1] + 1j * sol.y[11:, -1]
    traj = propagate_state(m, RotorState(0, psi0), p, dt_sub=p.dt / 8)
    psi = traj.final_state.coeffs
    psi = psi * np.exp(-1j * np.angle(np.vdot(psi_ode, psi)))
    assert np.linalg.norm(psi - psi_ode) < 1e-6


def test_convergence_order_in_dt():
    m = co_model(10)
    e0 = units.field_from_intensity_tw(10.0)
    p = sample_family(e0, 2.0e4, units.thz_to_au(1.0), 64)
    vals = []
    for sub in (1, 2, 4, 8):
        traj = propagate_state(m, ground_rotor_state(m), p, dt_sub=p.dt / sub)
        vals.append(traj.cos_theta[-1])
    e1 = abs(vals[0] - vals[3])
    e2 = abs(vals[1] - vals[3])
    order = np.log2(e1 / e2)
    assert order > 1.8


def test_free_evolution_periodicity():
    m = co_model(10)
    e0 = units.field_from_intensity_tw(10.0)
    p = sample_family(e0, 2.0e4, units.thz_to_au(1.0), 128)
    traj = propagate_state(m, ground_rotor_state(m), p, dt_sub=p.dt / 4)
    st = traj.final_state
    t = np.linspace(0, 0.3 * m.t_per, 200)
    v1 = free_cos_theta(m, st, t)
    v2 = free_cos_theta(m, st, t + m.t_per)
    assert np.max(np.abs(v1 - v2)) < 1e-8


def test_rejects_unnormalized_state():
    m = co_model(4)
    with pytest.raises(ValueError):
        RotorState(0, np.array([1.0, 1.0, 0.0, 0.0, 0.0]))


@given(seed=st.integers(0, 2000))
def test_cos_theta_expectation_bounded(seed):
    rng = np.random.default_rng(seed)
    m = co_model(9)
    c = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    c /= np.linalg.norm(c)
    st_ = RotorState(0, c)
    t = np.linspace(0, m.t_per, 64)
    v = free_cos_theta(m, st_, t)
    assert np.all(np.abs(v) <= 1.0 + 1e-12)


# --- density propagation -----------------------------------------------------------------


def test_pure_state_density_equivalence():
    m = co_model(8)
    e0 = units.field_from_intensity_tw(5.0)
    p = sample_family(e0, 2.0e4, units.thz_to_au(0.8), 96)
    traj_s = propagate_state(m, ground_rotor_state(m), p, dt_sub=p.dt / 2)
    rho = boltzmann_init(m, 0.0)
    traj_d = propagate_density(m, rho, p, dt_sub=p.dt / 2)
    assert np.max(np.abs(traj_s.cos_theta - traj_d.cos_theta)) < 1e-9
    assert np.max(np.abs(traj_d.norm - 1.0)) < 1e-9


def test_thermal_zero_field_isotropic():
    m = co_model(10)
    p = Pulse(0.0, 100.0, np.zeros(32))
    traj = propagate_density(m, boltzmann_init(m, 30.0), p)
    assert np.max(np.abs(traj.cos_theta)) < 1e-12
    assert np.max(np.abs(traj.norm - 1.0)) < 1e-9


def test_density_block_structure_preserved():
    m = co_model(6)
    e0 = units.field_from_intensity_tw(2.0)
    p = sample_family(e0, 1.0e4, units.thz_to_au(1.0), 48)
    rho0 = boltzmann_init(m, 10.0)
    keys0 = set(rho0.blocks)
    traj = propagate_density(m, rho0, p, dt_sub=p.dt / 2)
    final = traj.final_state
    assert set(final.blocks) == keys0  # m never leaks
    final.validate(tol_herm=1e-9, tol_trace=1e-9)


# --- Boltzmann initialization ----------------------------------------------------------------


def test_boltzmann_zero_temperature():
    m = co_model(5)
    rho = boltzmann_init(m, 0.0)
    assert set(rho.blocks) == {0}
    b = rho.blocks[0]
    assert b[0, 0] == 1.0
    assert np.sum(np.abs(b)) == 1.0


def test_boltzmann_30k_population_ratio():
    # oracle: direct Boltzmann arithmetic, kT(30 K) = 20.851 cm^-1
    m = co_model(12)
    rho = boltzmann_init(m, 30.0)
    p00 = rho.blocks[0][0, 0].real
    p10 = rho.blocks[0][1, 1].real
    kt_cm1 = units.KB_CM1_PER_K * 30.0
    assert abs(p10 / p00 - np.exp(-2 * 1.9312 / kt_cm1)) < 1e-9
    # same j weight in every m block
    p11 = rho.blocks[1][0, 0].real
    assert abs(p11 - p10) < 1e-15


@given(temp=st.floats(0.5, 300.0))
def test_boltzmann_trace_one(temp):
    m = co_model(10)
    rho = boltzmann_init(m, temp)
    assert abs(rho.trace() - 1.0) < 1e-9


def test_boltzmann_rejects_negative_temperature():
    with pytest.raises(ValueError):
        boltzmann_init(co_model(4), -1.0)


# --- target operator ----------------------------------------------------------------------------


def test_target_operator_tau_zero_is_cos_theta():
    m = co_model(8)
    _, x = build_operators(m, 0)
    t = target_operator(m, 0.0, 0)
    assert np.max(np.abs(t - x)) == 0.0


def test_target_operator_spectrum_preserved():
    m = co_model(10)
    _, x = build_operators(m, 0)
    t = target_operator(m, 0.95 * m.t_per, 0)
    ex = np.linalg.eigvalsh(x)
    et = np.linalg.eigvalsh(t)
    assert np.max(np.abs(ex - et)) < 1e-12


@given(seed=st.integers(0, 500), tau_frac=st.floats(0.01, 1.5))
def test_target_expectation_is_future_free_orientation(seed, tau_frac):
    rng = np.random.default_rng(seed)
    m = co_model(8)
    c = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    c /= np.linalg.norm(c)
    st_ = RotorState(0, c)
    tau = tau_frac * m.t_per
    t_op = target_operator(m, tau, 0)
    lhs = float(np.real(np.vdot(c, t_op @ c)))
    rhs = free_cos_theta(m, st_, np.array([tau]))[0]
    assert abs(lhs - rhs) < 1e-10


# --- free-evolution peak ---------------------------------------------------------------------------


def test_peak_degenerate_for_eigenstate():
    m = co_model(6)
    res = free_orientation_peak(m, ground_rotor_state(m), m.t_per)
    assert res.flag == "degenerate"
    assert res.value == 0.0


def test_peak_two_level_analytic():
    m = co_model(4)
    c = np.zeros(5, complex)
    c[0] = 1 / np.sqrt(2)
    c[1] = 1j / np.sqrt(2)
    res = free_orientation_peak(m, RotorState(0, c), m.t_per)
    # |<cos>| = sin(2Bt)/sqrt(3): first attains its maximum at t = pi/(4B)
    assert res.flag == "ok"
    assert abs(res.value - 1 / np.sqrt(3)) < 1e-6
    assert abs(res.t_peak - np.pi / (4 * m.b)) < 2e-4 * m.t_per


def test_peak_two_level_real_coefficients_value():
    m = co_model(4)
    c = np.zeros(5, complex)
    c[0] = c[1] = 1 / np.sqrt(2)
    res = free_orientation_peak(m, RotorState(0, c), m.t_per)
    assert abs(res.value - 1 / np.sqrt(3)) < 1e-6


def test_guess_pulse_peak_near_095_tper():
    # the orientation revival of the near-optimal family pulse sits at about
    # 0.95 T_per after the pulse end
    m = co_model(16)
    e0 = units.field_from_intensity_tw(20.0)
    p = sample_family(e0, 0.1344 * m.t_per, units.thz_to_au(0.778), 512)
    traj = propagate_state(m, ground_rotor_state(m), p, dt_sub=p.dt / 4)
    res = free_orientation_peak(m, traj.final_state, m.t_per)
    assert res.flag == "ok"
    assert abs(res.t_peak / m.t_per - 0.95) < 0.02
    assert res.value > 0.85


# --- misc ---------------------------------------------------------------------------------------------


def test_density_free_evolution_matches_state_version():
    m = co_model(7)
    rng = np.random.default_rng(5)
    c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    c /= np.linalg.norm(c)
    st_ = RotorState(0, c)
    rho = RotorDensity({0: np.outer(c, c.conj())})
    t = np.linspace(0, 0.5 * m.t_per, 128)
    assert np.max(np.abs(free_cos_theta(m, st_, t) - free_cos_theta_density(m, rho, t))) < 1e-12


def test_trajectory_export(tmp_path):
    m = co_model(6)
    p = Pulse(0.0, 50.0, np.zeros(16))
    traj = propagate_state(m, ground_rotor_state(m), p)
    path = tmp_path / "traj.tsv"
    write_trajectory(path, traj)
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == ["t_au", "cos_theta", "norm_or_trace"]
    assert len(lines) == 17


def test_dt_sub_must_divide_grid():
    m = co_model(4)
    p = Pulse(0.0, 10.0, np.zeros(8))
    with pytest.raises(ValueError):
        propagate_state(m, ground_rotor_state(m), p, dt_sub=3.0)
