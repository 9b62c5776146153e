import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffrestore.degradation import (EVAL_SETS, BlurKernel, DegradationRanges, DegradationSpec, default_support,
                                     degrade, make_kernel, sample_spec)
from diffrestore.errors import InputError, ParameterError
from diffrestore.toyfaces import render_faces


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.2])
def test_isotropic_kernel(theta):
    k = make_kernel(2, 2, theta, default_support(2, 2))
    assert k.support == 17
    np.testing.assert_allclose(k.covariance, 4 * np.eye(2), atol=1e-12)
    assert rel_err(k.empirical_covariance(), 4 * np.eye(2)) < 0.05


def test_axis_aligned_kernel():
    k = make_kernel(2, 4, 0.0)
    np.testing.assert_allclose(k.covariance, np.diag([4.0, 16.0]), atol=1e-12)
    assert rel_err(k.empirical_covariance(), np.diag([4.0, 16.0])) < 0.05


def test_rotated_kernel_matches_matrix_product():
    theta = 0.25 * math.pi
    c, s = math.cos(theta), math.sin(theta)
    # explicit entries of U diag(4, 16) U^T
    expected = np.array([[4 * c * c + 16 * s * s, (4 - 16) * c * s],
                         [(4 - 16) * c * s, 4 * s * s + 16 * c * c]])
    k = make_kernel(2, 4, theta)
    np.testing.assert_allclose(k.covariance, expected, atol=1e-12)
    assert rel_err(k.empirical_covariance(), expected) < 0.05


def test_even_support_rejected():
    with pytest.raises(ParameterError):
        make_kernel(2, 2, 0.0, 16)
    with pytest.raises(ParameterError):
        make_kernel(0, 2, 0.0, 17)


def test_default_support_caps_to_image():
    assert default_support(14, 2) == 113
    assert default_support(14, 2, image_size=32) == 31
    assert default_support(0.1, 0.1) == 3


@settings(max_examples=50, deadline=None)
@given(lx=st.floats(0.1, 6), ly=st.floats(0.1, 6), theta=st.floats(0, math.pi),
       support=st.integers(0, 15).map(lambda k: 2 * k + 1))
def test_kernel_normalized_and_point_symmetric(lx, ly, theta, support):
    k = make_kernel(lx, ly, theta, support)
    assert k.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(k.weights >= 0)
    np.testing.assert_array_equal(k.weights, k.weights[::-1, ::-1])


@pytest.fixture(scope="module")
def faces():
    return render_faces(4, seed=3)


def test_identity_pipeline_is_exact(faces):
    for x in faces:
        np.testing.assert_array_equal(degrade(x, DegradationSpec.identity()), x)


def test_degrade_deterministic(faces):
    spec = DegradationSpec(3.0, 5.0, 0.5, 4.0, 12.0, 40, seed=11)
    a = degrade(faces[0], spec)
    b = degrade(faces[0], spec)
    np.testing.assert_array_equal(a, b)
    assert a.shape == faces[0].shape
    assert a.min() >= 0 and a.max() <= 1
    c = degrade(faces[0], DegradationSpec(3.0, 5.0, 0.5, 4.0, 12.0, 40, seed=12))
    assert not np.array_equal(a, c)


def test_noise_variance_in_8bit_units():
    x = np.full((256, 256, 1), 0.5)
    spec = DegradationSpec(0.0, 0.0, 0.0, 1.0, 20.0, None, seed=5)
    resid = (degrade(x, spec) - x) * 255.0
    assert resid.var() == pytest.approx(400.0, rel=0.05)


def test_image_smaller_than_support():
    spec = DegradationSpec(4.0, 4.0, 0.0, 1.0, 0.0, None, seed=0, support=33)
    with pytest.raises(InputError):
        degrade(np.zeros((16, 16, 3)), spec)


def test_severe_downscale_keeps_shape(faces):
    y = degrade(faces[1], DegradationSpec(14.0, 14.0, 0.0, 40.0, 20.0, 30, seed=1))
    assert y.shape == faces[1].shape


def test_delta_kernel():
    k = BlurKernel.delta()
    assert k.weights.tolist() == [[1.0]]


def test_eval_mode_draws_from_sets():
    rng = np.random.default_rng(0)
    specs = [sample_spec(DegradationRanges.evaluation(), rng) for _ in range(500)]
    assert {sp.s for sp in specs} <= set(EVAL_SETS["s"])
    assert {sp.s for sp in specs} == {4, 8, 16, 24, 32, 36, 40}
    assert {sp.sigma for sp in specs} <= set(EVAL_SETS["sigma"])
    assert {sp.q for sp in specs} <= set(EVAL_SETS["q"])
    assert {sp.l_x for sp in specs} | {sp.l_y for sp in specs} <= set(EVAL_SETS["l"])
    assert {sp.theta for sp in specs} <= set(EVAL_SETS["theta"])


def test_train_mode_ranges():
    rng = np.random.default_rng(1)
    specs = [sample_spec(DegradationRanges.train(), rng) for _ in range(10_000)]
    sig = np.array([sp.sigma for sp in specs])
    assert sig.min() >= 0 and sig.max() <= 20
    s = np.array([sp.s for sp in specs])
    assert s.min() >= 0.8 and s.max() <= 32
    l = np.array([sp.l_x for sp in specs])
    assert l.min() >= 0.1 and l.max() <= 15
    assert all(sp.l_x == sp.l_y and sp.theta == 0 for sp in specs)
    q = np.array([sp.q for sp in specs])
    assert q.min() >= 30 and q.max() <= 100


def test_sample_spec_reproducible():
    a = [sample_spec(DegradationRanges.evaluation(), np.random.default_rng(7)) for _ in range(3)]
    b = [sample_spec(DegradationRanges.evaluation(), np.random.default_rng(7)) for _ in range(3)]
    assert a == b


def test_spec_validation():
    with pytest.raises(ParameterError):
        DegradationSpec(1, 1, 0, 0.0, 1, 50, 0)
    with pytest.raises(ParameterError):
        DegradationSpec(1, 1, 0, 2.0, -1, 50, 0)
    with pytest.raises(ParameterError):
        DegradationSpec(1, 1, 0, 2.0, 1, 101, 0)
    with pytest.raises(ParameterError):
        DegradationRanges(mode="test")


def test_spec_dict_roundtrip():
    sp = DegradationSpec(2.0, 4.0, 0.25 * math.pi, 8.0, 5.0, 60, 3)
    assert DegradationSpec.from_dict(sp.to_dict()) == sp


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_sampled_kernels_are_valid(seed):
    sp = sample_spec(DegradationRanges.evaluation(), np.random.default_rng(seed))
    k = sp.kernel(32)
    assert k.support <= 31 and k.support % 2 == 1
    assert k.weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(k.weights, k.weights[::-1, ::-1])
