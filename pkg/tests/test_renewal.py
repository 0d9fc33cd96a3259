import math

import numpy as np
import pytest
from scipy import integrate

from spinreset.observables import connected_correlation, excitation_density
from spinreset.renewal import (
    DriveParams,
    ResetWeights,
    WaitingTime,
    exp_weighted_average,
    renewal_state_at_time,
    reset_rates_R,
    sample_waiting_time,
    stationary_density_closed_form,
    stationary_state_p1,
    stationary_state_p2,
    survival_probability,
    waiting_density,
    waiting_time_from_uniform,
)
from spinreset.spin_dynamics import (
    evolve_qubit,
    flip_probability,
    flip_probability_poly,
    free_qubit_poly,
)

POISSON = WaitingTime.poisson(0.5)
CHOPPED = WaitingTime.chopped(0.5, 8.0)


def test_waiting_time_validation():
    with pytest.raises(ValueError):
        WaitingTime.poisson(0.0)
    with pytest.raises(ValueError):
        WaitingTime.poisson(-1.0)
    with pytest.raises(ValueError):
        WaitingTime.chopped(0.5, 0.0)


@pytest.mark.parametrize("dist", [POISSON, CHOPPED], ids=["poisson", "chopped"])
def test_density_normalization_and_survival(dist):
    hi = dist.t_max if dist.t_max else 80.0
    total, _ = integrate.quad(lambda t: waiting_density(dist, t), 0.0, hi, limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)
    for t in (0.0, 0.3, 2.7, 7.9):
        tail, _ = integrate.quad(lambda s: waiting_density(dist, s), t, hi, limit=200)
        assert survival_probability(dist, t) == pytest.approx(tail, abs=1e-10)
    if dist.t_max:
        assert survival_probability(dist, dist.t_max) == 0.0
        assert waiting_density(dist, dist.t_max + 0.1) == 0.0


@pytest.mark.parametrize("dist", [POISSON, CHOPPED], ids=["poisson", "chopped"])
def test_inverse_cdf_inverts_the_cdf(dist):
    us = np.linspace(0.0, 0.999, 57)
    ts = waiting_time_from_uniform(dist, us)
    cdf = 1.0 - survival_probability(dist, ts)
    np.testing.assert_allclose(cdf, us, atol=1e-12)
    if dist.t_max:
        assert np.all(ts < dist.t_max)


def test_sampling_statistics():
    rng = np.random.default_rng(11)
    n = 200_000
    x = sample_waiting_time(POISSON, rng, size=n)
    assert abs(np.mean(x) - 1.0 / POISSON.gamma) < 4.0 * (1.0 / POISSON.gamma) / math.sqrt(n)
    y = sample_waiting_time(CHOPPED, rng, size=n)
    assert np.max(y) < CHOPPED.t_max
    g, tm = CHOPPED.gamma, CHOPPED.t_max
    mean = 1.0 / g - tm * math.exp(-g * tm) / (1.0 - math.exp(-g * tm))
    assert abs(np.mean(y) - mean) < 4.0 * mean / math.sqrt(n)
    assert isinstance(sample_waiting_time(POISSON, rng), float)


@pytest.mark.parametrize("dist", [POISSON, CHOPPED], ids=["poisson", "chopped"])
def test_exp_weighted_average_routes_agree(dist):
    params = DriveParams(omega=1.3, delta=1.0)
    poly = flip_probability_poly(params)
    via_poly = exp_weighted_average(dist, poly)
    via_quad = exp_weighted_average(dist, lambda t: flip_probability(params, float(t)))
    assert via_poly == pytest.approx(via_quad, abs=1e-9)
    # matrix-valued callable against the object-array route
    entries = free_qubit_poly(params, "up")
    mat_poly = exp_weighted_average(dist, entries)
    up = np.diag([1.0, 0.0]).astype(complex)
    mat_quad = exp_weighted_average(dist, lambda t: evolve_qubit(params, float(t), up))
    np.testing.assert_allclose(mat_poly, mat_quad, atol=1e-9)
    with pytest.raises(TypeError):
        exp_weighted_average(dist, 3.0)


def test_poisson_stationary_density_closed_form():
    g = 0.5
    dist = WaitingTime.poisson(g)
    for omega in (0.2, 0.7, 1.0, 1.6):
        params = DriveParams(omega=omega, delta=1.0)
        ob2 = omega**2 + 1.0
        expect = 1.0 - 2.0 * omega**2 / (g**2 + 4.0 * ob2)
        assert stationary_density_closed_form(params, dist) == pytest.approx(expect, abs=0)
        st = stationary_state_p1(params, dist)
        assert st.density == pytest.approx(expect, abs=1e-12)
        assert excitation_density(st.state) == pytest.approx(expect, abs=1e-12)
    # omega = delta = 1, gamma = 1/2 is the rational point 25/33
    assert stationary_density_closed_form(DriveParams(1.0, 1.0), dist) == pytest.approx(
        25.0 / 33.0, abs=1e-16)
    assert stationary_density_closed_form(DriveParams(0.0, 1.0), dist) == 1.0


def test_chopped_stationary_density_matches_machinery():
    params = DriveParams(omega=0.8, delta=1.0)
    for gt in (1.0, 5.0, 20.0):
        dist = WaitingTime.chopped(0.5, gt / 0.5)
        closed = stationary_density_closed_form(params, dist)
        st = stationary_state_p1(params, dist)
        assert st.density == pytest.approx(closed, abs=1e-12)


def test_chopped_density_converges_to_poisson():
    params = DriveParams(omega=1.4, delta=1.0)
    poisson_val = stationary_density_closed_form(params, WaitingTime.poisson(0.5))
    gaps = []
    for t_max in (10.0, 40.0, 80.0):
        val = stationary_density_closed_form(params, WaitingTime.chopped(0.5, t_max))
        gaps.append(abs(val - poisson_val))
    assert gaps[1] < gaps[0] and gaps[2] <= gaps[1]
    assert gaps[2] < 1e-12
    # extreme truncation must not overflow the correction term
    far = stationary_density_closed_form(params, WaitingTime.chopped(0.5, 2000.0))
    assert far == pytest.approx(poisson_val, abs=1e-15)


def test_renewal_state_relaxes_to_stationary():
    params = DriveParams(omega=1.1, delta=1.0)
    gamma = 0.5
    st = stationary_state_p1(params, WaitingTime.poisson(gamma))
    # short times: survival term dominates, state is nearly the free one
    early = renewal_state_at_time(params, gamma, 0.0)
    np.testing.assert_allclose(early, np.diag([1.0, 0.0]), atol=1e-12)
    late = renewal_state_at_time(params, gamma, 120.0)
    np.testing.assert_allclose(late, st.state, atol=1e-12)
    late_pair = renewal_state_at_time(params, gamma, 120.0, pair=True)
    np.testing.assert_allclose(late_pair, st.pair_state, atol=1e-12)
    with pytest.raises(ValueError):
        renewal_state_at_time(params, 0.0, 1.0)
    with pytest.raises(ValueError):
        renewal_state_at_time(params, gamma, -1.0)


def test_renewal_state_against_direct_quadrature():
    params = DriveParams(omega=0.9, delta=1.0)
    gamma, t = 0.6, 4.0
    up = np.diag([1.0, 0.0]).astype(complex)

    def hist(entry):
        def re_im(s, part):
            rho = evolve_qubit(params, s, up)
            return getattr(rho[entry], part)
        out = complex()
        for part in ("real", "imag"):
            val, _ = integrate.quad(
                lambda s: math.exp(-gamma * s) * re_im(s, part), 0.0, t, limit=200)
            out += val if part == "real" else 1j * val
        return out

    direct = np.empty((2, 2), dtype=complex)
    for idx in np.ndindex(2, 2):
        rho_t = evolve_qubit(params, t, up)
        direct[idx] = math.exp(-gamma * t) * rho_t[idx] + gamma * hist(idx)
    np.testing.assert_allclose(renewal_state_at_time(params, gamma, t), direct,
                               atol=1e-10)


def test_reset_weights_validation():
    with pytest.raises(ValueError):
        ResetWeights(0.7, 0.4, 1.0, 0.0, 0.0, 1.0)  # c's don't sum to 1
    with pytest.raises(ValueError):
        ResetWeights(0.5, 0.5, 0.9, 0.2, 0.0, 1.0)  # up-row sum != 1
    with pytest.raises(ValueError):
        ResetWeights(0.5, 0.5, 1.2, -0.2, 0.0, 1.0)  # out of range


def test_reset_rates_thermo_branches():
    dist = POISSON
    below = reset_rates_R(DriveParams(0.7, 1.0), dist)
    assert below.c_up == 1.0 and below.c_down == 0.0
    assert below.R_up_down == 0.0 and not below.degenerate
    at = reset_rates_R(DriveParams(1.0, 1.0), dist)
    assert at.c_up == 1.0 and at.degenerate
    above = reset_rates_R(DriveParams(1.5, 1.0), dist)
    assert above.c_up == above.c_down == 0.5
    assert 0.0 < above.R_up_down < 0.5
    assert above.R_down_up == above.R_up_down  # symmetric chain
    # the flip window mass: chopped with the same gamma stays close
    above_c = reset_rates_R(DriveParams(1.5, 1.0), WaitingTime.chopped(0.5, 60.0))
    assert above_c.R_up_down == pytest.approx(above.R_up_down, abs=1e-6)


def test_reset_rates_thermo_against_quadrature():
    # R_up_down = P(flip prob at the reset time exceeds 1/2)
    params = DriveParams(1.5, 1.0)
    val, _ = integrate.quad(
        lambda t: waiting_density(POISSON, t) * (flip_probability(params, t) > 0.5),
        0.0, 120.0, limit=2000)
    assert reset_rates_R(params, POISSON).R_up_down == pytest.approx(val, abs=1e-6)


def test_reset_rates_finite_n():
    params = DriveParams(1.5, 1.0)
    with pytest.raises(ValueError):
        reset_rates_R(params, POISSON, n_spins=10)
    rates = [reset_rates_R(params, POISSON, n_spins=n).R_up_down for n in (11, 101, 1001)]
    thermo = reset_rates_R(params, POISSON).R_up_down
    gaps = [abs(r - thermo) for r in rates]
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1]
    # below threshold the step never fires in the limit but finite N leaks
    leak = reset_rates_R(DriveParams(0.95, 1.0), POISSON, n_spins=11).R_up_down
    assert 0.0 < leak < 0.5


def test_stationary_state_p2():
    dist = POISSON
    below = stationary_state_p2(DriveParams(0.7, 1.0), dist)
    ref = stationary_state_p1(DriveParams(0.7, 1.0), dist)
    np.testing.assert_allclose(below.state, ref.state, atol=1e-14)
    assert below.density == ref.density
    assert below.note == ""
    at = stationary_state_p2(DriveParams(1.0, 1.0), dist)
    assert "omega == delta" in at.note
    above = stationary_state_p2(DriveParams(1.5, 1.0), dist)
    assert above.density == 0.5  # exact by symmetry
    assert excitation_density(above.state) == pytest.approx(0.5, abs=1e-14)
    # pair state carries positive correlations from the shared reset age
    assert connected_correlation(above.pair_state) > 0.0
    # exchange symmetry of the pair
    swap = np.zeros((4, 4))
    swap[0, 0] = swap[3, 3] = swap[1, 2] = swap[2, 1] = 1.0
    np.testing.assert_allclose(swap @ above.pair_state @ swap, above.pair_state,
                               atol=1e-12)
