import numpy as np
import pytest

from svi.blocks import BlockVector
from svi.errors import DimensionMismatchError
from svi.maps import natural_residual, sample_map
from svi.problems import bandwidth_instance, quadratic_from, quadratic_instance
from svi.sets import Box, CartesianSet


def _quad(noise_half=1.0):
    return quadratic_from(np.array([[2.0, 0.5], [0.5, 1.0]]),
                          np.array([0.3, -0.7]), noise_half=noise_half)


def test_zero_noise_sampler_is_exact():
    qi = _quad(noise_half=0.0)
    x = BlockVector.zeros(qi.dims)
    draw = sample_map(qi.stochastic_map, x, np.random.default_rng(0))
    assert np.array_equal(draw.data, qi.b)


def test_sampler_bit_reproducible():
    qi = _quad()
    x = BlockVector(np.array([0.2, -0.4]), qi.dims)
    a = sample_map(qi.stochastic_map, x, np.random.default_rng(42))
    b = sample_map(qi.stochastic_map, x, np.random.default_rng(42))
    assert a == b


def test_monte_carlo_mean_matches_offset():
    # uniform noise on [-1, 1]: per-coordinate sd 1/sqrt(3)
    qi = _quad(noise_half=1.0)
    M = 10 ** 5
    rng = np.random.default_rng(7)
    X = np.zeros((M, 2))
    draws = qi.stochastic_map.sample_batch(X, rng)
    bound = 3.0 * (1.0 / np.sqrt(3.0)) / np.sqrt(M)
    assert np.all(np.abs(draws.mean(axis=0) - qi.b) <= bound)


def test_empirical_mean_rate(rng):
    # halving of the deviation when quadrupling the sample count, on average
    qi = _quad()
    x = np.array([0.3, 0.1])
    exact = qi.stochastic_map.exact_mean_flat(x)
    devs = {M: [] for M in (2000, 8000)}
    for M in devs:
        for s in range(8):
            est = qi.stochastic_map.sample_mean(x, M, np.random.default_rng(100 + s))
            devs[M].append(np.linalg.norm(est - exact))
    ratio = np.mean(devs[8000]) / np.mean(devs[2000])
    assert 0.3 <= ratio <= 0.8


def test_bandwidth_origin_coordinate():
    inst = bandwidth_instance()
    x = inst.x0
    mean = inst.stochastic_map.exact_mean(x)
    assert mean.data[0] == pytest.approx(-1.0)  # first user, first route
    M = 20000
    draws = inst.stochastic_map.sample_batch(np.zeros((M, 9)), np.random.default_rng(3))
    assert draws[:, 0].mean() == pytest.approx(-1.0, abs=5 * 0.1 / np.sqrt(3 * M))


def test_dimension_mismatch_names_block():
    qi = _quad()
    bad = BlockVector(np.zeros(3), (3,))
    with pytest.raises(DimensionMismatchError):
        sample_map(qi.stochastic_map, bad, np.random.default_rng(0))


def test_monotonicity_and_lipschitz_audit(rng):
    # sampled pairs must respect the certified constants
    for inst in (quadratic_instance(6, seed=11), bandwidth_instance()):
        smap = inst.stochastic_map
        eta, lip = inst.eta, inst.lip
        n = smap.n
        if hasattr(inst, "capacities"):
            X = rng.uniform(0.0, 1.0, size=(1000, n))
            Y = rng.uniform(0.0, 1.0, size=(1000, n))
        else:
            X = rng.uniform(-1.0, 1.0, size=(1000, n))
            Y = rng.uniform(-1.0, 1.0, size=(1000, n))
        FX = smap.exact_mean_flat(X)
        FY = smap.exact_mean_flat(Y)
        D = X - Y
        nd2 = (D * D).sum(axis=1)
        inner = ((FX - FY) * D).sum(axis=1)
        keep = nd2 > 1e-16
        assert np.all(inner[keep] >= eta * nd2[keep] * (1 - 1e-9))
        fn = np.linalg.norm(FX - FY, axis=1)
        assert np.all(fn[keep] <= lip * np.sqrt(nd2[keep]) * (1 + 1e-9))


def test_natural_residual_examples():
    box = CartesianSet((Box([0.0], [1.0]),))
    x = BlockVector(np.array([0.5]), (1,))
    zero = BlockVector(np.array([0.0]), (1,))
    assert natural_residual(x, zero, box, 1.0) == 0.0
    # active bound blocks the descent direction
    x1 = BlockVector(np.array([1.0]), (1,))
    fneg = BlockVector(np.array([-1.0]), (1,))
    assert natural_residual(x1, fneg, box, 1.0) == 0.0
    # interior move: ||0.5 - clip(0.5 - 0.25)|| = 0.25
    fpos = BlockVector(np.array([1.0]), (1,))
    assert natural_residual(x, fpos, box, 0.25) == pytest.approx(0.25)


def test_natural_residual_rejects_bad_gamma():
    box = CartesianSet((Box([0.0], [1.0]),))
    x = BlockVector(np.array([0.5]), (1,))
    with pytest.raises(ValueError):
        natural_residual(x, x, box, 0.0)
