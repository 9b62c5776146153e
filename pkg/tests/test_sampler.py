import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from diffrestore.errors import ConfigError, ParameterError, ShapeError
from diffrestore.models import GaussianMixtureWorld, gm_optimal_denoiser
from diffrestore.sampler import (difface_restore, pluralistic_restore, reconstruct_probe, restore_run,
                                 reverse_chain, sample_xN)
from diffrestore.analysis import diversity
from diffrestore.schedule import default_schedule, diffuse, make_linear_schedule, respace

SCHED = default_schedule()


@pytest.fixture(scope="module")
def world():
    return GaussianMixtureWorld.default(dim=4, components=3, std=0.1, seed=0)


@pytest.fixture(scope="module")
def oracle(world):
    return gm_optimal_denoiser(world, SCHED)


def test_sample_xN_zero_error_is_forward_marginal():
    rng = np.random.default_rng(0)
    x0 = rng.uniform(-1, 1, (3, 5))
    noise = rng.standard_normal(x0.shape)
    np.testing.assert_array_equal(sample_xN(x0 + 0.3, 400, lambda y: x0, SCHED, noise),
                                  diffuse(x0, 400, SCHED, noise))


def test_sample_xN_noiseless():
    y = np.full((1, 4), 0.5)
    a = SCHED.alphas_cum[199]
    np.testing.assert_array_equal(sample_xN(y, 200, lambda y: y, SCHED, np.zeros_like(y)), math.sqrt(a) * y)


def test_sample_xN_errors():
    y = np.zeros((1, 4))
    with pytest.raises(ShapeError):
        sample_xN(y, 10, lambda y: y, SCHED, np.zeros((1, 3)))
    with pytest.raises(ParameterError):
        sample_xN(y, 1000, lambda y: y, SCHED, np.zeros_like(y))
    with pytest.raises(ParameterError):
        sample_xN(y, 0, lambda y: y, SCHED, np.zeros_like(y))


def test_error_contraction_monte_carlo():
    rng = np.random.default_rng(1)
    x0 = rng.uniform(-1, 1, 6)
    e = rng.normal(0, 0.3, 6)
    est = lambda y: np.broadcast_to(x0 - e, y.shape)
    n, N = 10_000, 400
    a = SCHED.alphas_cum[N - 1]
    xs = sample_xN(np.zeros((n, 6)), N, est, SCHED, rng.standard_normal((n, 6)))
    shift = xs.mean(0) - math.sqrt(a) * x0
    assert np.all(np.abs(shift + math.sqrt(a) * e) < 3 * math.sqrt((1 - a) / n))


def test_contraction_factor_strictly_decreasing():
    assert np.all(np.diff(np.sqrt(SCHED.alphas_cum)) < 0)
    assert np.all(np.sqrt(SCHED.alphas_cum) < 1)


def test_respaced_chain_runs_100_steps(oracle, world):
    x = world.sample(8, np.random.default_rng(0))
    traj = []
    reverse_chain(diffuse(x, 400, SCHED, np.random.default_rng(1).standard_normal(x.shape)), 400, oracle,
                  respace(SCHED, 250), seed=0, clip_x0=None, trajectory=traj)
    assert len(traj) == 101


def test_reverse_chain_deterministic(oracle, world):
    x = world.sample(16, np.random.default_rng(0))
    a = reverse_chain(x, 200, oracle, SCHED, seed=3)
    b = reverse_chain(x, 200, oracle, SCHED, seed=3)
    c = reverse_chain(x, 200, oracle, SCHED, seed=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_reverse_chain_rejects_nonfinite(oracle):
    from diffrestore.errors import NumericError
    with pytest.raises(NumericError):
        reverse_chain(np.full((1, 4), np.nan), 10, oracle, SCHED, seed=0)


def test_reconstruct_probe_zero_is_identity(oracle, world):
    x = world.sample(4, np.random.default_rng(0))
    np.testing.assert_array_equal(reconstruct_probe(x, 0, oracle, SCHED, seed=0), x)


def _probe_rmse(world, oracle, grid, n=600, seed=0):
    x0 = world.sample(n, np.random.default_rng(seed))
    return [float(np.sqrt(np.mean((reconstruct_probe(x0, N, oracle, SCHED, seed=N, clip_x0=None) - x0) ** 2)))
            for N in grid]


def test_probe_error_grows_with_N(world, oracle):
    grid = [20, 100, 200, 300, 500, 700, 900]
    err = _probe_rmse(world, oracle, grid)
    assert err[1] < 0.5 * err[-1]
    assert spearmanr(grid, err)[0] > 0.8


def test_restore_at_N1_with_zero_error_estimator(world, oracle):
    x0 = world.sample(500, np.random.default_rng(2))
    out = difface_restore(x0 + 1.0, 1, lambda y: y - 1.0, oracle, SCHED, seed=0, clip_x0=None)
    mse = np.mean((out - x0) ** 2)
    assert 10 * math.log10(2.0 ** 2 / mse) > 40.0  # peak = range of [-1, 1]


def test_zero_error_restore_equals_probe(world, oracle):
    x0 = world.sample(32, np.random.default_rng(3))
    r = respace(SCHED, 250)
    a = difface_restore(x0 * 3, 300, lambda y: x0, oracle, r, seed=9, clip_x0=None)
    b = reconstruct_probe(x0, 300, oracle, r, seed=9, clip_x0=None)
    np.testing.assert_array_equal(a, b)


def test_fingerprint_mismatch(oracle):
    other = make_linear_schedule(1000, 1e-4, 0.03)
    with pytest.raises(ConfigError):
        difface_restore(np.zeros((1, 4)), 10, lambda y: y, oracle, other, seed=0)
    with pytest.raises(ConfigError):
        reconstruct_probe(np.zeros((1, 4)), 10, oracle, other, seed=0)


def test_restore_psnr_falls_with_N(world, oracle):
    rng = np.random.default_rng(4)
    x0 = world.sample(400, rng)
    est = lambda y: y * 0.0 + x0 + 0.15 * np.sign(x0)  # biased estimator
    grid = list(range(50, 451, 50))
    psnr = []
    for N in grid:
        out = difface_restore(x0, N, est, oracle, SCHED, seed=N, clip_x0=None)
        psnr.append(10 * math.log10(4.0 / np.mean((out - x0) ** 2)))
    assert spearmanr(grid, psnr)[0] < 0


def test_pluralistic(world, oracle):
    x0 = world.sample(8, np.random.default_rng(5))
    y = np.zeros_like(x0)  # severe: the estimate carries no information
    est = lambda y: np.zeros_like(y)
    r = respace(SCHED, 250)
    single = pluralistic_restore(y, 400, est, oracle, r, [7], clip_x0=None)
    np.testing.assert_array_equal(single[0], difface_restore(y, 400, est, oracle, r, 7, clip_x0=None))
    outs = pluralistic_restore(y, 400, est, oracle, r, [1, 2, 3, 4], clip_x0=None)
    assert len(outs) == 4
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.abs(outs[i] - outs[j]).mean() > 0
    with pytest.raises(ParameterError):
        pluralistic_restore(y, 400, est, oracle, r, [1, 1])


def test_diversity_grows_with_N(world, oracle):
    x0 = world.sample(200, np.random.default_rng(6))
    est = lambda y: y
    grid = [50, 150, 250, 350, 450, 600]
    div = [diversity(pluralistic_restore(x0, N, est, oracle, SCHED, [0, 1, 2], clip_x0=None)) for N in grid]
    assert spearmanr(grid, div)[0] > 0.8


def test_restore_run_record(world, oracle):
    x0 = world.sample(4, np.random.default_rng(0))
    run = restore_run(x0, 400, lambda y: y, oracle, respace(SCHED, 250), [1, 2])
    assert run.steps == 100 and run.respaced_to == 250 and len(run.outputs) == 2
    assert run.to_dict()["schedule_fingerprint"] == SCHED.fingerprint
