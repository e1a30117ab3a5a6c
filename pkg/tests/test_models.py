import numpy as np
import pytest

from errors import ConfigurationError, PreconditionError
from losses.edge_aware import LossConfig
from models.common import MODE_CR, MODE_FR, STRIDE_FIRST, ModeConfig, check_mode, count_params
from models.pon import PoNParams, pon_backward, pon_forward, pon_forward_raw
from models.prn import PrNParams, prn_forward, prn_forward_raw
from nn.gradcheck import numerical_gradient, relative_error, sample_indices
from nn.tensor import upsample_nearest_x2
from training.trainer import pon_loss_and_grads, prn_loss_and_grads


def test_mode_validation():
    assert check_mode("CR") == MODE_CR
    assert ModeConfig(MODE_CR).compact
    assert not ModeConfig(MODE_FR).compact
    with pytest.raises(ConfigurationError):
        check_mode("XR")


@pytest.mark.parametrize("mode,expected", [(MODE_FR, (2, 1, 8, 10)), (MODE_CR, (2, 1, 4, 5))])
def test_prn_output_shape(rng, mode, expected):
    prn = PrNParams.create(mode, rng)
    y = prn_forward(rng.uniform(size=(2, 1, 8, 10)), prn)
    assert y.shape == expected
    assert y.min() >= 0.0 and y.max() <= 1.0


@pytest.mark.parametrize("mode,dims", [(MODE_FR, (8, 12)), (MODE_CR, (4, 6))])
def test_zero_weight_prn_emits_its_bias(rng, mode, dims):
    prn = PrNParams.create(mode)
    for layer in prn.layers():
        layer.bias = np.full(layer.out_channels, 0.5)
    y = prn_forward(rng.uniform(size=(1, 1, 8, 12)), prn)
    assert y.shape == (1, 1, *dims)
    assert np.all(y == 0.5)


def test_prn_stride_first_halves_too(rng):
    prn = PrNParams.create(MODE_CR, rng, stride_position=STRIDE_FIRST)
    assert prn.stride_position == STRIDE_FIRST
    assert prn.l1.stride == 2 and prn.l3.stride == 1
    assert prn_forward(rng.uniform(size=(1, 1, 8, 8)), prn).shape == (1, 1, 4, 4)


def test_prn_cr_rejects_odd_dims(rng):
    with pytest.raises(PreconditionError):
        prn_forward_raw(rng.uniform(size=(1, 1, 7, 8)), PrNParams.create(MODE_CR, rng))


def test_parameter_counts():
    prn = PrNParams.create(MODE_FR)
    assert count_params(prn.l1) == 640
    assert count_params(prn) == 640 + 18464 + 289
    assert count_params() == 0
    # CR only adds the stride, not parameters
    assert count_params(PrNParams.create(MODE_CR)) == count_params(prn)
    pon_fr = PoNParams.create(MODE_FR)
    pon_cr = PoNParams.create(MODE_CR)
    assert count_params(pon_cr) - count_params(pon_fr) == 32 * 128 * 9 + 128
    with pytest.raises(ConfigurationError):
        count_params([prn.l1, prn.l2])


def test_zero_pon_is_identity_fr(rng):
    x = rng.uniform(size=(1, 1, 6, 6))
    out, _ = pon_forward_raw(x, PoNParams.create(MODE_FR))
    np.testing.assert_array_equal(out, x)


def test_zero_pon_is_nearest_upsample_cr(rng):
    x = rng.uniform(size=(1, 1, 3, 4))
    out = pon_forward(x, PoNParams.create(MODE_CR))
    assert out.shape == (1, 1, 6, 8)
    np.testing.assert_array_equal(out, upsample_nearest_x2(x))


def test_pon_output_is_clamped(rng):
    pon = PoNParams.create(MODE_FR, rng)
    pon.final.bias[:] = 5.0
    assert pon_forward(rng.uniform(size=(1, 1, 4, 4)), pon).max() == 1.0


def small_pair(mode, rng):
    prn = PrNParams.create(mode, rng, features=(4, 3))
    pon = PoNParams.create(mode, rng, features=4, num_blocks=1)
    return prn, pon


@pytest.mark.parametrize("mode", [MODE_FR, MODE_CR])
def test_pon_input_gradient(rng, mode):
    _, pon = small_pair(mode, rng)
    x = rng.uniform(size=(1, 1, 4, 4))
    out, cache = pon_forward_raw(x, pon)
    upstream = rng.standard_normal(out.shape)
    grad_x, _ = pon_backward(pon, cache, upstream)

    def loss():
        return float(np.sum(pon_forward_raw(x, pon)[0] * upstream))

    assert relative_error(grad_x, numerical_gradient(loss, x)) < 1e-4


@pytest.mark.parametrize("mode", [MODE_FR, MODE_CR])
def test_pon_input_only_backward_matches_full(rng, mode):
    _, pon = small_pair(mode, rng)
    out, cache = pon_forward_raw(rng.uniform(size=(2, 1, 4, 4)), pon)
    grad_out = rng.standard_normal(out.shape)
    full, grads = pon_backward(pon, cache, grad_out)
    input_only, none = pon_backward(pon, cache, grad_out, with_params=False)
    np.testing.assert_array_equal(input_only, full)
    assert len(grads) == len(pon.params())
    assert none == []


@pytest.mark.parametrize("mode", [MODE_FR, MODE_CR])
def test_pon_parameter_gradients(rng, mode):
    _, pon = small_pair(mode, rng)
    decoded = rng.uniform(size=(2, 1, 4, 4))
    scale = 2 if mode == MODE_CR else 1
    targets = rng.uniform(size=(2, 1, 4 * scale, 4 * scale))
    _, grads = pon_loss_and_grads(pon, decoded, targets)
    for param, grad in zip(pon.params(), grads):
        idx = sample_indices(param.shape, 6, rng)
        numeric = numerical_gradient(lambda: pon_loss_and_grads(pon, decoded, targets)[0], param, indices=idx)
        analytic = np.zeros_like(grad)
        for i in idx:
            analytic[i] = grad[i]
        assert relative_error(analytic, numeric) < 1e-3


@pytest.mark.parametrize("mode", [MODE_FR, MODE_CR])
def test_end_to_end_prn_gradients(rng, mode):
    prn, pon = small_pair(mode, rng)
    images = rng.uniform(size=(2, 1, 6, 6))
    edges = (rng.uniform(size=images.shape) > 0.7).astype(np.float64)
    cfg = LossConfig(0.75)
    _, grads = prn_loss_and_grads(prn, pon, images, edges, cfg)

    def loss():
        return prn_loss_and_grads(prn, pon, images, edges, cfg)[0]

    for param, grad in zip(prn.params(), grads):
        idx = sample_indices(param.shape, 6, rng)
        numeric = numerical_gradient(loss, param, indices=idx)
        analytic = np.zeros_like(grad)
        for i in idx:
            analytic[i] = grad[i]
        assert relative_error(analytic, numeric) < 1e-3


def test_load_params_checks_count(rng):
    prn = PrNParams.create(MODE_FR, rng)
    with pytest.raises(ConfigurationError):
        prn.load_params(prn.params()[:-1])


def test_copy_is_independent(rng):
    pon = PoNParams.create(MODE_CR, rng)
    clone = pon.copy()
    clone.head.weights[0, 0, 0, 0] += 1.0
    assert pon.head.weights[0, 0, 0, 0] != clone.head.weights[0, 0, 0, 0]
