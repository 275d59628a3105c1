import numpy as np
import pytest

from svi.blocks import BlockVector
from svi.engine import (
    ReplicationError,
    RunConfig,
    polyak_conditions_audit,
    run_replications,
    run_sa,
    step,
)
from svi.errors import ParameterError
from svi.problems import bandwidth_instance, quadratic_from, quadratic_instance
from svi.sets import Box, CartesianSet
from svi.smoothing import SmoothingScheme
from svi.stepsizes import (
    SchemeParams,
    StepsizeSchedule,
    bound_schedules,
    polyak_sequences,
)

from oracles import make_pw_map, pw_smoothed_solution

UNIT_BOX = CartesianSet((Box([0.0], [1.0]),))


def _vec(*vals):
    return BlockVector(np.array(vals, dtype=float), (len(vals),))


def test_step_hand_values():
    x = BlockVector(np.array([0.5]), (1,))
    f = BlockVector(np.array([1.0]), (1,))
    assert step(x, f, 0.2, UNIT_BOX).data[0] == pytest.approx(0.3)
    low = BlockVector(np.array([0.1]), (1,))
    assert step(low, f, 0.5, UNIT_BOX).data[0] == 0.0  # projection activates


def test_step_zero_drift_is_stationary():
    x = BlockVector(np.array([0.5]), (1,))
    zero = BlockVector(np.array([0.0]), (1,))
    assert step(x, zero, 0.7, UNIT_BOX) == x


def test_step_rejects_nonpositive_gamma():
    x = BlockVector(np.array([0.5]), (1,))
    with pytest.raises(ParameterError):
        step(x, x, 0.0, UNIT_BOX)


def _quad_config(K=100, seed=1, noise_half=0.0, record_every=10):
    qi = quadratic_from(np.diag([2.0, 1.0]), np.array([1.0, -0.5]),
                        noise_half=noise_half)
    p = SchemeParams(eta=qi.eta, lip=qi.lip, nu=max(1.0, np.sqrt(qi.nu_sq)), e0=0.5)
    cfg = RunConfig(stochastic_map=qi.stochastic_map, feasible=qi.feasible,
                    schedules=[StepsizeSchedule.asa(p)], x0=qi.x0, iterations=K,
                    seed=seed, record_every=record_every)
    return qi, cfg


def test_zero_iterations_returns_start():
    qi, cfg = _quad_config(K=0)
    rec = run_sa(cfg, qi.x_star)
    assert rec.ks.tolist() == [0]
    assert np.array_equal(rec.iterates[0], qi.x0.data)


def test_same_seed_bit_identical():
    qi, cfg = _quad_config(K=200, noise_half=1.0)
    a = run_sa(cfg, qi.x_star)
    b = run_sa(cfg, qi.x_star)
    assert np.array_equal(a.iterates, b.iterates)
    assert np.array_equal(a.sq_dist, b.sq_dist)


def test_noise_free_distance_decreases_monotonically():
    qi, cfg = _quad_config(K=300)
    rec = run_sa(cfg, qi.x_star)
    assert np.all(np.diff(rec.sq_dist) <= 1e-16)
    assert rec.sq_dist[-1] < 1e-6 * rec.sq_dist[0]


def test_snapshot_plan_and_feasibility():
    inst = bandwidth_instance()
    sched = StepsizeSchedule.harmonic(1.0)
    cfg = RunConfig(stochastic_map=inst.stochastic_map, feasible=inst.feasible,
                    schedules=[sched], x0=inst.x0, iterations=105, seed=5,
                    group_dims=inst.group_dims, record_every=10)
    rec = run_sa(cfg)
    assert rec.ks.tolist() == list(range(0, 110, 10)) + [105]
    assert len(rec.ks) == 105 // 10 + 2  # regular snapshots plus the final one
    for row in rec.iterates:
        assert inst.feasible.max_violation(BlockVector(row, inst.dims)) <= 1e-9


def test_single_schedule_broadcasts_to_groups():
    inst = bandwidth_instance()
    shared = RunConfig(stochastic_map=inst.stochastic_map, feasible=inst.feasible,
                       schedules=[StepsizeSchedule.harmonic(0.5)], x0=inst.x0,
                       iterations=50, seed=2, group_dims=inst.group_dims)
    per_group = RunConfig(stochastic_map=inst.stochastic_map, feasible=inst.feasible,
                          schedules=[StepsizeSchedule.harmonic(0.5) for _ in range(5)],
                          x0=inst.x0, iterations=50, seed=2,
                          group_dims=inst.group_dims)
    assert np.array_equal(run_sa(shared).iterates, run_sa(per_group).iterates)


def test_infeasible_start_rejected():
    qi, _ = _quad_config()
    bad = BlockVector(np.array([5.0, 5.0]), (2,))
    with pytest.raises(ParameterError):
        RunConfig(stochastic_map=qi.stochastic_map, feasible=qi.feasible,
                  schedules=[StepsizeSchedule.harmonic(1.0)], x0=bad,
                  iterations=10, seed=0)


def test_replications_statistics():
    qi, cfg = _quad_config(K=50, noise_half=1.0)
    records, mse = run_replications(cfg, 8, base_seed=100, x_ref=qi.x_star)
    assert len(records) == 8
    assert [r.seed for r in records] == list(range(100, 108))
    stacked = np.stack([r.sq_dist for r in records])
    assert np.allclose(mse, stacked.mean(axis=0))
    # single run: trajectory equals its own mean
    _, mse1 = run_replications(cfg, 1, base_seed=3, x_ref=qi.x_star)
    rec1 = run_sa(type(cfg)(**{**cfg.__dict__, "seed": 3}), qi.x_star)
    assert np.array_equal(mse1, rec1.sq_dist)


def test_zero_noise_replications_have_zero_variance():
    qi, cfg = _quad_config(K=40, noise_half=0.0)
    records, mse = run_replications(cfg, 4, base_seed=11, x_ref=qi.x_star)
    stacked = np.stack([r.sq_dist for r in records])
    assert np.all(stacked.std(axis=0) == 0.0)


def test_replication_failure_carries_seed():
    qi, cfg = _quad_config(K=10)
    cfg.schedules = [StepsizeSchedule.explicit([0.1] * 5)]  # too short for K=10
    with pytest.raises(ReplicationError) as exc:
        run_replications(cfg, 3, base_seed=77, x_ref=qi.x_star)
    assert exc.value.seed == 77


def test_one_step_contraction_bound(rng):
    # conditional mean-squared step bound on the quadratic fixture
    qi = quadratic_from(np.diag([2.0, 1.0]), np.array([0.4, -0.2]), noise_half=1.0)
    eta, lip = qi.eta, qi.lip
    nu_sq = qi.nu_sq
    gamma = 0.2
    reps = 1000
    for _ in range(20):
        x = rng.uniform(-1, 1, size=2)
        X = np.tile(x, (reps, 1))
        draws = qi.stochastic_map.sample_batch(X, rng)
        x_next = np.clip(X - gamma * draws, -1.0, 1.0)
        sq = ((x_next - qi.x_star.data) ** 2).sum(axis=1)
        lhs = sq.mean()
        d2 = float(((x - qi.x_star.data) ** 2).sum())
        rhs = (1 - 2 * eta * gamma + lip ** 2 * gamma ** 2) * d2 + gamma ** 2 * nu_sq
        mc_sigma = sq.std(ddof=1) / np.sqrt(reps)
        assert lhs <= rhs + 3 * mc_sigma


def test_distributed_error_envelope():
    # empirical MSE stays below the worst-case envelope driven by the
    # lower stepsize bounds, for matched constants
    qi = quadratic_from(np.diag([2.0, 1.0]), np.array([0.4, -0.2]), noise_half=1.0)
    D = np.sqrt(2.0) * 2  # box corner distance from origin (crude bound)
    eta, lip = qi.eta, qi.lip
    c = eta / 4
    beta = (eta - 2 * c) / lip
    nu = max(np.sqrt(qi.nu_sq), D * lip / np.sqrt(2))
    params = SchemeParams(eta=eta, lip=lip, nu=nu, c=c, r=(1.0, 1.0),
                          diameter=D, e0=D ** 2, beta=beta)
    K = 150
    cfg = RunConfig(stochastic_map=qi.stochastic_map, feasible=qi.feasible,
                    schedules=[StepsizeSchedule.dasa(params, 0),
                               StepsizeSchedule.dasa(params, 1)],
                    x0=qi.x0, iterations=K, seed=0, group_dims=(1, 1),
                    record_every=10)
    R = 1000
    records, mse = run_replications(cfg, R, base_seed=500, x_ref=qi.x_star)
    delta, _ = bound_schedules(params, K)
    envelope = 2 * (1 + beta) ** 2 * nu ** 2 / (eta - beta * lip) * delta
    stacked = np.stack([r.sq_dist for r in records])
    ci_half = 3 * stacked.std(axis=0, ddof=1) / np.sqrt(R)
    ks = records[0].ks
    assert np.all(mse <= envelope[ks] + ci_half)


def test_smoothed_run_converges_to_smoothed_solution():
    # the randomized variant solves the smoothed problem, not the original
    reg = 0.1
    eps = 0.5
    smap = make_pw_map(reg=reg, noise_half=0.5)
    feasible = CartesianSet((Box([-5.0], [5.0]),))
    x_eps = pw_smoothed_solution(reg, eps)   # 71/28, away from the plain solution 3
    cfg = RunConfig(stochastic_map=smap, feasible=feasible,
                    schedules=[StepsizeSchedule.harmonic(1.0)],
                    x0=BlockVector(np.array([0.0]), (1,)), iterations=6000, seed=9,
                    smoothing=SmoothingScheme.ball((eps,)), record_every=600)
    records, mse = run_replications(cfg, 12, 40,
                                    BlockVector(np.array([x_eps]), (1,)))
    assert mse[-1] < 0.01
    assert mse[-1] < 0.2 * (x_eps - 3.0) ** 2  # clearly not at the plain solution


# --- convergence-condition audit ------------------------------------------------

def test_polyak_audit_canonical_sequences():
    k = np.arange(1, 20_001, dtype=float)
    rep = polyak_conditions_audit(1.0 / k, 1.0 / k ** 2)
    assert rep.passed
    bad = polyak_conditions_audit(1.0 / k, 1.0 / k)
    assert not bad.mu_summable
    assert not bad.passed


def test_polyak_audit_from_envelope_sequences():
    p = SchemeParams(eta=1.0, lip=1.5, nu=6.0, e0=1.0, beta=0.25)
    delta, _ = bound_schedules(p, 20_000)
    alpha, mu = polyak_sequences(p, delta)
    rep = polyak_conditions_audit(alpha, mu)
    assert rep.alpha_in_range
    assert rep.passed
