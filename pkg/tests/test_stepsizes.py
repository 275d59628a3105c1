from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svi.errors import ParameterError
from svi.stepsizes import (
    SchemeParams,
    StepsizeSchedule,
    asa_schedule,
    bound_schedules,
    dasa_schedule,
    error_sequence,
    harmonic_step,
    optimality_gap_check,
    polyak_sequences,
    recursive_schedule,
    step_upper_bound,
)

from oracles import ulps_between


def _params(**kw):
    base = dict(eta=1.0, lip=1.0, nu=1.0, e0=1.0)
    base.update(kw)
    return SchemeParams(**base)


# --- harmonic ---------------------------------------------------------------

def test_harmonic_values():
    assert harmonic_step(1.0, 1) == 1.0
    assert harmonic_step(10.0, 4000) == pytest.approx(0.0025)
    assert harmonic_step(0.1, 2) == pytest.approx(0.05)


def test_harmonic_is_one_indexed():
    with pytest.raises(ParameterError):
        harmonic_step(1.0, 0)


def test_harmonic_schedule_starts_at_theta():
    sched = StepsizeSchedule.harmonic(0.1)
    assert sched.next() == pytest.approx(0.1)      # first update uses theta/1
    assert sched.next() == pytest.approx(0.05)


# --- centralized adaptive rule ----------------------------------------------

def test_asa_first_terms():
    g = asa_schedule(_params(), 3)
    # gamma_0 = eta e0 / (2 nu^2); each next term multiplies by (1 - eta/2 * g)
    assert g[0] == 0.5
    assert g[1] == 0.375
    assert g[2] == pytest.approx(0.3046875)  # = 39/128 by direct evaluation
    assert g[3] == pytest.approx(float(Fraction(39, 128) * (1 - Fraction(39, 256))))


def test_asa_initialization_formula():
    g = asa_schedule(_params(eta=2.0, nu=10.0, lip=2.0, e0=1.0), 0)
    assert g[0] == pytest.approx(2.0 * 1.0 / (2.0 * 100.0))


def test_asa_strictly_decreasing_and_feasible():
    p = _params(eta=0.5, lip=2.0, nu=3.0, e0=2.0)
    g = asa_schedule(p, 2000)
    assert np.all(np.diff(g) < 0)
    assert np.all(g > 0)
    assert np.all(g <= step_upper_bound(p, "centralized") * (1 + 1e-12))


def test_asa_noise_validation():
    with pytest.raises(ParameterError):
        asa_schedule(_params(nu=0.5, lip=2.0, e0=1.0), 5)  # nu < lip sqrt(e0/2)


# --- distributed adaptive rule ----------------------------------------------

def test_dasa_initialization_formula():
    p = SchemeParams(eta=2.0, lip=2.0, nu=1.5 * 2.0 / np.sqrt(2.0), c=0.5,
                     r=(1.0,), diameter=1.5)
    g = dasa_schedule(p, 0, 0)
    assert g[0] == pytest.approx(0.5 * 1.5 ** 2 / ((1.5) ** 2 * 4.5))


def test_dasa_with_half_eta_is_centralized():
    # c = eta/2 forces r = 1 and reproduces the centralized rule with e0 = D^2
    p = SchemeParams(eta=1.0, lip=2.0, nu=5.0, c=0.5, r=(1.0,), diameter=1.5,
                     e0=1.5 ** 2)
    assert np.array_equal(dasa_schedule(p, 0, 100), asa_schedule(p, 100))


def test_dasa_ratio_identity_long_horizon():
    p = SchemeParams(eta=1.0, lip=2.0, nu=50.0, c=0.25, r=(1.0, 1.25), diameter=1.5)
    g1 = dasa_schedule(p, 0, 10_000)
    g2 = dasa_schedule(p, 1, 10_000)
    assert ulps_between(g2 / 1.25, g1) <= 4.0
    assert np.allclose(g2 / g1, 1.25, rtol=1e-12)


def test_dasa_multiplier_validation():
    p = SchemeParams(eta=1.0, lip=2.0, nu=50.0, c=0.25, r=(2.0,), diameter=1.5)
    with pytest.raises(ParameterError):
        dasa_schedule(p, 0, 5)  # r above 1 + (eta - 2c)/lip = 1.25
    with pytest.raises(ParameterError):
        dasa_schedule(SchemeParams(eta=1.0, lip=2.0, nu=50.0, c=0.6,
                                   r=(1.0,), diameter=1.5), 0, 5)  # c > eta/2


def test_dasa_relaxed_noise_mode():
    weak_nu = SchemeParams(eta=1.0, lip=100.0, nu=2.0, c=0.25, r=(1.0,),
                           diameter=1.5)
    with pytest.raises(ParameterError):
        dasa_schedule(weak_nu, 0, 5)
    relaxed = weak_nu.with_(relaxed_nu=True)
    g = dasa_schedule(relaxed, 0, 2000)
    assert np.all(g > 0)


def test_dasa_discrepancy_bound_audit():
    # min/max across agents stays within the induced discrepancy bound
    p = SchemeParams(eta=1.0, lip=2.0, nu=60.0, c=0.25,
                     r=(1.0, 1.1, 1.18, 1.25), diameter=1.5)
    seqs = np.stack([dasa_schedule(p, i, 10_000) for i in range(4)])
    delta = seqs.min(axis=0)
    Gamma = seqs.max(axis=0)
    beta = p.dasa_beta
    assert np.all((Gamma - delta) / delta <= beta * (1 + 1e-9))


# --- envelope sequences -------------------------------------------------------

def test_bounds_initialization_and_scaling():
    p = _params(beta=0.5)
    delta, upper = bound_schedules(p, 5)
    assert delta[0] == pytest.approx(0.5 / (2 * 2.25))
    assert upper[0] == pytest.approx(0.5 / (2 * 1.5))
    assert upper[0] == pytest.approx(1.5 * delta[0])


def test_bounds_beta_zero_collapses_to_centralized():
    p = _params(eta=0.8, lip=1.6, nu=2.0, e0=1.5, beta=0.0)
    delta, upper = bound_schedules(p, 200)
    g = asa_schedule(p, 200)
    assert np.array_equal(delta, g)
    assert np.array_equal(upper, g)


def test_bounds_scaling_identity_long_horizon():
    p = _params(eta=1.0, lip=1.25, nu=4.0, e0=2.0, beta=0.3)
    delta, upper = bound_schedules(p, 1000)
    assert ulps_between(upper, (1 + 0.3) * delta) <= 4.0
    assert np.all(np.diff(delta) < 0)
    assert np.all(delta <= step_upper_bound(p, "distributed") * (1 + 1e-12))


def test_bounds_e0_validation():
    with pytest.raises(ParameterError):
        bound_schedules(_params(e0=5.0, nu=1.0, lip=1.0), 5)  # e0 > 2 nu^2/L^2


# --- error recursions ---------------------------------------------------------

def test_error_one_step_hand_value():
    e = error_sequence(_params(), [0.5], "centralized")
    assert e[0] == 1.0
    assert e[1] == pytest.approx(0.75)  # (1 - 0.5) * 1 + 0.25


def test_error_matches_scaled_schedule_centralized():
    p = _params(eta=0.7, lip=1.4, nu=3.0, e0=1.2)
    g = asa_schedule(p, 2000)
    e = error_sequence(p, g[:-1], "centralized")
    assert ulps_between(e, 2 * p.nu ** 2 / p.eta * g) <= 64.0


def test_error_matches_scaled_schedule_distributed():
    p = _params(eta=0.9, lip=1.5, nu=2.5, e0=1.1, beta=0.4)
    delta, _ = bound_schedules(p, 2000)
    e = error_sequence(p, delta[:-1], "distributed")
    target = 2 * (1 + p.beta) ** 2 * p.nu ** 2 / (p.eta - p.beta * p.lip) * delta
    assert ulps_between(e, target) <= 64.0


# --- optimality of the adaptive sequences --------------------------------------

def test_gap_zero_at_optimum():
    p = _params()
    g = asa_schedule(p, 32)
    assert optimality_gap_check(p, g[:32], "centralized") == 0.0


def test_gap_lower_bound_halved_last_step():
    p = _params(beta=0.25, lip=1.2, nu=2.0)
    delta, _ = bound_schedules(p, 32)
    perturbed = delta[:32].copy()
    perturbed[-1] /= 2.0
    gap = optimality_gap_check(p, perturbed, "distributed")
    bound = (1 + p.beta) ** 2 * p.nu ** 2 * (perturbed[-1] - delta[31]) ** 2
    assert gap >= bound - 64 * np.spacing(max(gap, bound))


def test_gap_random_audit(rng):
    p = _params(eta=0.8, lip=1.1, nu=2.0, e0=1.0, beta=0.3)
    K = 24
    hi = step_upper_bound(p, "distributed")
    delta, _ = bound_schedules(p, K - 1)
    steps = rng.uniform(1e-6, hi, size=(K, 200))
    gaps = optimality_gap_check(p, steps, "distributed")
    bounds = (1 + p.beta) ** 2 * p.nu ** 2 * (steps[-1] - delta[K - 1]) ** 2
    assert np.all(gaps >= bounds - 1e-13)


def test_gap_rejects_infeasible_steps():
    p = _params()
    with pytest.raises(ParameterError):
        optimality_gap_check(p, [2.0], "centralized")  # above eta/L^2


# --- shared recursion identity -------------------------------------------------

def test_scaled_recursions_exact_rational():
    # lam_{k+1} = lam_k (1 - lam_k) with lam_0 = c gamma_0 tracks c gamma_k exactly
    c = Fraction(3, 7)
    gamma = Fraction(1, 5)
    lam = c * gamma
    for _ in range(64):
        gamma = gamma * (1 - c * gamma)
        lam = lam * (1 - lam)
        assert lam == c * gamma


def test_scaled_recursions_float():
    for cbar in (0.5, 0.25, 0.37):
        gam = recursive_schedule(0.9 / cbar, cbar, 10_000)
        lam = recursive_schedule(0.9, 1.0, 10_000)
        assert ulps_between(cbar * gam, lam) <= 4.0


@given(st.floats(0.05, 0.95), st.floats(0.1, 4.0))
@settings(max_examples=50, deadline=None)
def test_recursive_stays_positive(frac, cbar):
    g = recursive_schedule(frac / cbar, cbar, 500)
    assert np.all(g > 0)
    assert np.all(np.diff(g) < 0)


def test_recursive_validation():
    with pytest.raises(ParameterError):
        recursive_schedule(2.0, 1.0, 5)  # gamma0 >= 1/cbar


# --- summability audits ---------------------------------------------------------

def test_divergence_and_square_summability_audit():
    # slow-decay regime: partial sums keep growing by 10x from 1e4 to 1e6
    # terms while the squares' tail vanishes
    sched = StepsizeSchedule.recursive(gamma0=0.01, cbar=0.01)
    g = sched.materialize(1_000_000)
    head = g[:10_000].sum()
    assert g.sum() >= 10.0 * head
    sq = g * g
    assert sq[100_000:].sum() < 1e-2 * sq[:100_000].sum()


# --- stateful schedule ------------------------------------------------------------

def test_schedule_stream_matches_materialize():
    p = _params(eta=0.7, lip=1.4, nu=3.0, e0=1.2)
    sched = StepsizeSchedule.asa(p)
    first = [sched.clone().materialize(50)[k] for k in range(0, 50, 7)]
    stream = [sched.next() for _ in range(50)]
    assert np.allclose(stream, StepsizeSchedule.asa(p).materialize(50))
    assert np.allclose(first, np.asarray(stream)[list(range(0, 50, 7))])


def test_explicit_schedule():
    sched = StepsizeSchedule.explicit([0.5, 0.25])
    assert sched.next() == 0.5
    assert sched.next() == 0.25
    with pytest.raises(ParameterError):
        sched.next()
    with pytest.raises(ParameterError):
        StepsizeSchedule.explicit([0.5, -0.1])


def test_polyak_sequences_formula():
    p = _params(beta=0.5, lip=1.0, nu=2.0)
    alpha, mu = polyak_sequences(p, [0.1])
    gap = p.eta - p.beta * p.lip
    assert alpha[0] == pytest.approx(2 * gap * 0.1 - p.lip ** 2 * 2.25 * 0.01)
    assert mu[0] == pytest.approx(2.25 * 4.0 * 0.01)
