import numpy as np
import pytest
from numpy.testing import assert_allclose

from hmaflow.etc.errors import ShapeMismatch
from hmaflow.model.config import ModelConfig
from hmaflow.network.encoders import ContextEncoder, FeatureEncoder, check_divisible, encode_context, \
    encode_features
from hmaflow.tensor import Tensor


SMALL = ModelConfig(feature_dim=8, hidden_dim=6, context_dim=4, max_image_height=32, max_image_width=32)


def _image(seed, height=16, width=16, batch=1):
    data = np.random.default_rng(seed).uniform(-1, 1, size=(batch, 3, height, width)).astype(np.float32)
    return Tensor(data)


class TestFeatureEncoder:
    def test_two_level_shapes(self):
        encoder = FeatureEncoder(SMALL, np.random.default_rng(0))

        features = encode_features(_image(1), _image(2), encoder)

        assert features.f1_quarter.shape == (1, 8, 4, 4)
        assert features.f2_quarter.shape == (1, 8, 4, 4)
        assert features.f1_eighth.shape == (1, 8, 2, 2)
        assert features.f2_eighth.shape == (1, 8, 2, 2)

    def test_weights_are_shared_between_frames(self):
        encoder = FeatureEncoder(SMALL.model_copy(update={'feature_normalization': 'none'}), np.random.default_rng(0))
        a, b = _image(3), _image(4)

        forward = encoder(a, b)
        swapped = encoder(b, a)

        assert_allclose(forward.f1_eighth.numpy(), swapped.f2_eighth.numpy(), rtol=1e-5, atol=1e-5)
        assert_allclose(forward.f2_quarter.numpy(), swapped.f1_quarter.numpy(), rtol=1e-5, atol=1e-5)

    def test_frame_shapes_must_match(self):
        encoder = FeatureEncoder(SMALL, np.random.default_rng(0))

        with pytest.raises(ShapeMismatch):
            encoder(_image(1, 16, 16), _image(2, 16, 24))

    def test_instance_normalisation_switch(self):
        with_norm = FeatureEncoder(SMALL, np.random.default_rng(0))
        without_norm = FeatureEncoder(SMALL.model_copy(update={'feature_normalization': 'none'}),
                                      np.random.default_rng(0))

        assert with_norm.backbone.norm is not None
        assert without_norm.backbone.norm is None
        assert with_norm.num_parameters() == without_norm.num_parameters()


class TestContextEncoder:
    def test_split_and_activations(self):
        encoder = ContextEncoder(SMALL, np.random.default_rng(0))

        context = encode_context(_image(5), encoder)

        assert context.hidden_init.shape == (1, 6, 2, 2)
        assert context.context.shape == (1, 4, 2, 2)
        assert np.all(np.abs(context.hidden_init.numpy()) <= 1.0)
        assert np.all(context.context.numpy() >= 0.0)

    def test_has_no_normalisation(self):
        encoder = ContextEncoder(SMALL, np.random.default_rng(0))

        assert encoder.backbone.norm is None
        assert not encoder.backbone.normalization


@pytest.mark.parametrize('shape', [(1, 3, 12, 16), (1, 3, 16, 20), (1, 1, 16, 16), (3, 16, 16)])
def test_check_divisible_rejects(shape):
    with pytest.raises(ShapeMismatch):
        check_divisible(Tensor(np.zeros(shape, dtype=np.float32)))


def test_check_divisible_accepts_multiples_of_eight():
    check_divisible(Tensor(np.zeros((2, 3, 24, 40), dtype=np.float32)))


def test_eight_pixel_shift_moves_eighth_features_by_one_cell():
    config = SMALL.model_copy(update={'feature_normalization': 'none', 'max_image_height': 160,
                                      'max_image_width': 160})
    encoder = FeatureEncoder(config, np.random.default_rng(0))
    image = _image(7, 160, 160).numpy()
    shifted = np.random.default_rng(8).uniform(-1, 1, size=image.shape).astype(np.float32)
    shifted[..., 8:] = image[..., :-8]

    features = encoder(Tensor(image), Tensor(shifted))

    # Cells whose receptive field never reaches the zero padding in either frame
    original = features.f1_eighth.numpy()[..., 7:13, 7:12]
    moved = features.f2_eighth.numpy()[..., 7:13, 8:13]
    assert_allclose(moved, original, rtol=1e-4, atol=1e-4)


def test_zero_projection_gives_zero_features():
    encoder = FeatureEncoder(SMALL, np.random.default_rng(0))
    for projection in (encoder.proj_quarter, encoder.proj_eighth):
        projection.weight.data[...] = 0.0
        projection.bias.data[...] = 0.0

    features = encode_features(_image(1), _image(2), encoder)

    for tensor in (features.f1_quarter, features.f1_eighth, features.f2_quarter, features.f2_eighth):
        assert not tensor.numpy().any()
