import numpy as np
import pytest

from lgnlab.core.errors import DimensionError
from lgnlab.core.toy_net import (
    CLASSES,
    FEATURE_LEN,
    INPUT_SIDE,
    PSI0_SIDE,
    ToyModel,
    backward,
    forward,
    loss,
    predict,
    reference_loss,
)

STEP = 1e-6
# 扰动 STEP 不能让任何 ReLU 越过 0
MIN_PRE_ACTIVATION = 1e-4


def _batch_loss(model, images, labels):
    logits, _, _ = forward(model, images)
    return float(np.sum(loss(logits, labels)))


def _stable_instance(generator, seed):
    while True:
        model = ToyModel.init(seed)
        model.conv_bias = generator.uniform(-0.1, 0.1)
        model.fc_bias = generator.uniform(-0.1, 0.1, size=CLASSES)
        images = generator.uniform(size=(2, INPUT_SIDE, INPUT_SIDE))
        labels = generator.integers(0, CLASSES, size=2)
        _, _, cache = forward(model, images)
        if np.abs(cache.pre_activation).min() > MIN_PRE_ACTIVATION:
            return model, images, labels
        seed += 1000


def _numeric(model, images, labels, field, index):
    plus = model.copy()
    minus = model.copy()
    if field == "conv_bias":
        plus.conv_bias += STEP
        minus.conv_bias -= STEP
    else:
        getattr(plus, field)[index] += STEP
        getattr(minus, field)[index] -= STEP
    return (_batch_loss(plus, images, labels) - _batch_loss(minus, images, labels)) / (2.0 * STEP)


class TestModel:
    def test_shapes(self):
        model = ToyModel.init(0)
        assert model.psi0.shape == (PSI0_SIDE, PSI0_SIDE)
        assert model.fc_weights.shape == (CLASSES, FEATURE_LEN)
        assert np.abs(model.psi0).max() <= 1.0 / PSI0_SIDE
        assert model.conv_bias == 0.0

    def test_same_seed_same_init(self):
        a, b = ToyModel.init(4), ToyModel.init(4)
        np.testing.assert_array_equal(a.psi0, b.psi0)
        np.testing.assert_array_equal(a.fc_weights, b.fc_weights)

    def test_bad_shape(self):
        with pytest.raises(DimensionError):
            ToyModel(np.zeros((11, 11)), 0.0, np.zeros((CLASSES, FEATURE_LEN)), np.zeros(CLASSES))

    def test_copy_is_independent(self):
        model = ToyModel.init(1)
        clone = model.copy()
        clone.psi0[0, 0] += 1.0
        assert model.psi0[0, 0] != clone.psi0[0, 0]


class TestForward:
    def test_zero_model_is_uniform(self, rng):
        logits, probabilities, _ = forward(ToyModel.zeros(), rng.uniform(size=(INPUT_SIDE, INPUT_SIDE)))
        assert logits.shape == (CLASSES,)
        np.testing.assert_allclose(probabilities, [0.5, 0.5])

    def test_valid_true_convolution(self, rng):
        model = ToyModel.zeros()
        model.psi0[0, 0] = 1.0
        image = rng.uniform(size=(INPUT_SIDE, INPUT_SIDE))
        _, _, cache = forward(model, image)
        # 翻转后的核在窗口右下角取值
        np.testing.assert_allclose(cache.pre_activation[0], image[12:, 12:])

    def test_batch_matches_single(self, rng):
        model = ToyModel.init(2)
        images = rng.uniform(size=(3, INPUT_SIDE, INPUT_SIDE))
        batch_logits, _, _ = forward(model, images)
        single_logits, _, _ = forward(model, images[1])
        np.testing.assert_allclose(batch_logits[1], single_logits, atol=1e-14)

    def test_wrong_input(self):
        with pytest.raises(DimensionError):
            forward(ToyModel.zeros(), np.zeros((27, 28)))

    def test_predict_shift_invariant(self, rng):
        model = ToyModel.init(3)
        images = rng.uniform(size=(20, INPUT_SIDE, INPUT_SIDE))
        before = predict(model, images)
        model.fc_bias += 5.0
        np.testing.assert_array_equal(predict(model, images), before)


class TestLoss:
    def test_matches_log_softmax(self):
        generator = np.random.default_rng(0)
        logits = generator.normal(scale=10.0, size=(1000, CLASSES))
        labels = generator.integers(0, CLASSES, size=1000)
        np.testing.assert_allclose(loss(logits, labels), reference_loss(logits, labels), rtol=0, atol=1e-12)

    def test_scalar_and_non_negative(self):
        value = loss(np.array([3.0, -1.0]), 1)
        assert isinstance(value, float)
        assert value == pytest.approx(reference_loss(np.array([3.0, -1.0]), 1), abs=1e-12)
        assert value >= 0.0

    def test_huge_logits_stay_finite(self):
        assert np.isfinite(loss(np.array([1000.0, -1000.0]), 1))


class TestBackward:
    def test_gradients_match_finite_differences(self):
        generator = np.random.default_rng(123)
        for instance in range(100):
            model, images, labels = _stable_instance(generator, instance)
            _, _, cache = forward(model, images)
            grads = backward(model, cache, labels)

            psi_index = tuple(generator.integers(0, PSI0_SIDE, size=2))
            fc_index = (int(generator.integers(0, CLASSES)), int(generator.integers(0, FEATURE_LEN)))
            bias_index = int(generator.integers(0, CLASSES))
            checks = [
                ("psi0", psi_index, grads.psi0[psi_index]),
                ("conv_bias", None, grads.conv_bias),
                ("fc_weights", fc_index, grads.fc_weights[fc_index]),
                ("fc_bias", bias_index, grads.fc_bias[bias_index]),
            ]
            for field, index, analytic in checks:
                numeric = _numeric(model, images, labels, field, index)
                np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8, err_msg=field)

    def test_gradient_is_batch_sum(self, rng):
        model = ToyModel.init(9)
        images = rng.uniform(size=(2, INPUT_SIDE, INPUT_SIDE))
        labels = np.array([0, 1])
        _, _, cache = forward(model, images)
        total = backward(model, cache, labels)
        parts = []
        for i in range(2):
            _, _, single = forward(model, images[i : i + 1])
            parts.append(backward(model, single, labels[i : i + 1]))
        np.testing.assert_allclose(total.psi0, parts[0].psi0 + parts[1].psi0, atol=1e-13)
        assert total.conv_bias == pytest.approx(parts[0].conv_bias + parts[1].conv_bias)
