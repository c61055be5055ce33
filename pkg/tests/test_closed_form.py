import numpy as np
import pytest

from wgbragg.errors import NumericalError, ValidationError
from wgbragg.closed_form import (alias_analysis, bragg_orders, bragg_solution,
                                 classify_regime, gb_peak_asymptotics,
                                 geometric_bragg_angle, k_effective,
                                 mb_envelope, modified_bragg_angle,
                                 phase_mismatch, rate_direct_sum,
                                 rate_geometric_sum, rate_positions_sum,
                                 single_atom_guided_rate,
                                 transmission_coefficient)
from wgbragg.model import K0, make_params

SEED = 202


def test_transmission_reference_values():
    t0 = transmission_coefficient(0.0, 0.0707)
    assert t0 == pytest.approx(1.0 - 2 * 0.0707)
    assert t0.imag == 0.0
    t1 = transmission_coefficient(1.0, 0.0707)
    assert t1.real == pytest.approx(0.97172)
    assert t1.imag == pytest.approx(-0.05656)
    # full coupling on resonance blocks the guide completely
    assert abs(transmission_coefficient(0.0, 1.0) + 1.0) < 1e-15


def test_transmission_modulus_identity():
    rng = np.random.default_rng(SEED)
    delta = rng.uniform(-20, 20, size=500)
    beta = rng.uniform(0.001, 0.999, size=500)
    t2 = np.abs(transmission_coefficient(delta, beta)) ** 2
    expect = (4 * delta**2 + (1 - 2 * beta) ** 2) / (4 * delta**2 + 1)
    assert np.allclose(t2, expect, rtol=1e-13)


def test_single_atom_rate_lorentzian():
    assert single_atom_guided_rate(0.0, 0.01, 0.0707) == pytest.approx(4e-4 * 0.0707)
    assert single_atom_guided_rate(0.5, 0.01, 0.2) == pytest.approx(4e-4 * 0.2 / 2.0)


def test_direct_equals_geometric():
    rng = np.random.default_rng(SEED + 1)
    for _ in range(2000):
        n = int(rng.integers(1, 201))
        beta = float(rng.uniform(0.01, 0.99))
        p = make_params(n_sites=n, a=float(rng.uniform(0.3, 2.0)),
                        gamma_r=beta, gamma_l=0.0, gamma_u=1.0 - beta)
        theta = float(rng.uniform(0, np.pi))
        delta = float(rng.uniform(-10, 10))
        rd = rate_direct_sum(n, theta, delta, p)
        rg = float(rate_geometric_sum(n, theta, delta, p))
        assert abs(rd - rg) <= 1e-10 * max(abs(rd), abs(rg), 1e-300)


def test_positions_sum_matches_full_chain():
    p = make_params(n_sites=25, a=0.9)
    z = 0.9 * np.arange(25, dtype=float)
    r_pos = rate_positions_sum(z, 0.8, 1.3, p)
    r_dir = rate_direct_sum(25, 0.8, 1.3, p)
    assert r_pos == pytest.approx(r_dir, rel=1e-12)


def test_geometric_sum_small_coupling_limit():
    # nearly lossless chain driven exactly on condition: quadratic buildup
    beta = 1e-7
    p = make_params(n_sites=10, gamma_r=beta, gamma_l=0.0, gamma_u=1.0 - beta)
    theta = modified_bragg_angle(2, 0.0, p)
    n = 10
    rate = float(rate_geometric_sum(n, theta, 0.0, p))
    quad = n**2 * single_atom_guided_rate(0.0, p.omega, beta)
    assert rate == pytest.approx(quad, rel=1e-4)
    # and the fallback path agrees with the direct sum
    assert rate == pytest.approx(rate_direct_sum(n, theta, 0.0, p), rel=1e-10)


def test_bragg_orders_defaults():
    p = make_params(n_sites=10)
    orders = bragg_orders(p)
    assert [m for m, _ in orders] == [1, 2]
    th = dict(orders)
    assert np.cos(th[1]) == pytest.approx(-0.2)
    assert np.cos(th[2]) == pytest.approx(0.8)
    assert th[1] == pytest.approx(1.7721542475852274)
    assert th[2] == pytest.approx(0.6435011087932844)


def test_bragg_orders_other_lattices():
    # a = 0.5: only first order lands inside the light cone
    p = make_params(n_sites=10, a=0.5)
    orders = bragg_orders(p)
    assert [m for m, _ in orders] == [1]
    assert np.cos(orders[0][1]) == pytest.approx(0.8)
    # a = 0.25: no order reachable
    assert bragg_orders(make_params(n_sites=10, a=0.25)) == []


def test_geometric_angle_out_of_range():
    p = make_params(n_sites=10, a=0.25)
    with pytest.raises(NumericalError):
        geometric_bragg_angle(1, p)


def test_modified_angle_zeroes_mismatch():
    rng = np.random.default_rng(SEED + 2)
    checked = 0
    for _ in range(300):
        beta = float(rng.uniform(0.02, 0.9))
        p = make_params(n_sites=10, a=float(rng.uniform(0.8, 1.2)),
                        gamma_r=beta, gamma_l=0.0, gamma_u=1.0 - beta)
        delta = float(rng.uniform(-5, 5))
        for m, _ in bragg_orders(p):
            try:
                theta = modified_bragg_angle(m, delta, p)
            except NumericalError:
                # the transmission phase can push the condition outside the
                # light cone near grazing geometric angles; that is reported,
                # not solved
                continue
            b = phase_mismatch(theta, delta, p)
            alias, _ = alias_analysis(b)
            assert alias < 1e-10
            checked += 1
    assert checked > 200


def test_modified_angle_reduces_to_geometric_on_resonance():
    # on resonance and below half coupling the transmission phase vanishes
    p = make_params(n_sites=10)
    assert modified_bragg_angle(2, 0.0, p) == pytest.approx(
        geometric_bragg_angle(2, p), abs=1e-15)


def test_alias_analysis_folding():
    alias, period = alias_analysis(0.3)
    assert alias == pytest.approx(0.3)
    assert period == pytest.approx(2 * np.pi / 0.3)
    alias, _ = alias_analysis(-0.3)
    assert alias == pytest.approx(0.3)
    alias, _ = alias_analysis(2 * np.pi + 0.3)
    assert alias == pytest.approx(0.3)
    alias, _ = alias_analysis(2 * np.pi - 0.3)
    assert alias == pytest.approx(0.3)
    # Nyquist fold: alternating sign, period two
    alias, period = alias_analysis(np.pi)
    assert alias == pytest.approx(np.pi)
    assert period == pytest.approx(2.0)
    alias, period = alias_analysis(4 * np.pi)
    assert alias == 0.0
    assert np.isinf(period)


def test_k_effective():
    p = make_params(n_sites=4)
    assert k_effective(np.pi / 2, p) == pytest.approx(1.2 * K0)
    assert k_effective(0.0, p) == pytest.approx(2.2 * K0)


def test_gb_peak_asymptotics_values():
    (dneg, dpos), rate = gb_peak_asymptotics(144, 0.0707, 0.01)
    assert dpos == pytest.approx(0.0707 * 144 / np.pi)
    assert dpos == pytest.approx(3.2406, abs=1e-3)
    assert dneg == -dpos
    # large-n limit of the peak rate is 4 omega^2 / beta
    (_, _), rate_inf = gb_peak_asymptotics(10**9, 0.0707, 0.01)
    assert rate_inf == pytest.approx(4e-4 / 0.0707, rel=1e-6)
    assert rate < rate_inf


def test_mb_envelope_peak_reference_value():
    # frozen reference: 150 emitters at beta = 0.0707 reach 464.9 times the
    # single-atom resonant rate at the optimum detuning
    beta, omega = 0.0707, 0.01
    grid = np.linspace(0.05, 25.0, 4001)
    env = mb_envelope(150, grid, beta, omega)
    ratio = env.max() / single_atom_guided_rate(0.0, omega, beta)
    assert ratio == pytest.approx(464.9, rel=5e-3)


def test_mb_envelope_limits():
    # beta -> 0 keeps |t| ~ 1 and the envelope approaches n^2 growth
    env = mb_envelope(20, np.array([0.0]), 1e-8, 0.01)
    assert env[0] == pytest.approx(400 * single_atom_guided_rate(0.0, 0.01, 1e-8),
                                   rel=1e-5)


def test_bragg_solution_fields():
    p = make_params(n_sites=144)
    sol = bragg_solution(2, p, delta=0.0, theta=geometric_bragg_angle(2, p))
    assert sol.m == 2
    assert sol.cos_theta_gb == pytest.approx(0.8)
    assert sol.b_alias < 1e-10
    assert np.isinf(sol.period)


def test_classify_regime_labels():
    p = make_params(n_sites=10)
    theta_mb = modified_bragg_angle(2, 0.0, p)
    # tiny coupling on condition: quadratic
    p_small = make_params(n_sites=10, gamma_r=1e-4, gamma_l=0.0, gamma_u=1.0 - 1e-4)
    th_small = modified_bragg_angle(2, 0.0, p_small)
    assert classify_regime(10, th_small, 0.0, p_small).label == "quadratic"
    # benchmark coupling on condition at large n: linear
    assert classify_regime(144, theta_mb, 0.0, p).label == "linear"
    # off condition with strong extinction: saturating
    assert classify_regime(400, theta_mb + 0.01, 0.0, p).label == "saturating"
    # off condition, weak extinction at moderate n: oscillatory
    assert classify_regime(30, theta_mb + 0.01, 3.0, p).label == "oscillatory"


def test_positions_sum_rejects_empty():
    p = make_params(n_sites=4)
    with pytest.raises(ValidationError):
        rate_positions_sum(np.array([]), 0.5, 0.0, p)
