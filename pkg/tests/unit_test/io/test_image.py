import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from PIL import Image

from hmaflow.etc.errors import FilesNotFound, InvalidConfiguration, ShapeMismatch
from hmaflow.io.image import InputPadder, load_image, save_image, to_uint8
from hmaflow.tensor import Tensor


class TestImageFiles:
    @pytest.mark.parametrize('suffix', ['png', 'ppm'])
    def test_round_trip(self, tmp_path, suffix):
        path = tmp_path / f'frame.{suffix}'
        rgb = np.random.default_rng(0).integers(0, 256, size=(5, 7, 3), dtype=np.uint8)

        save_image(path, rgb)
        image = load_image(path)

        assert image.shape == (3, 5, 7)
        assert image.numpy().min() >= -1.0 and image.numpy().max() <= 1.0
        assert_array_equal(to_uint8(image), rgb)

    def test_scaling(self, tmp_path):
        path = tmp_path / 'levels.png'
        save_image(path, np.array([[[0, 255, 51]]], dtype=np.uint8))

        assert_allclose(load_image(path).numpy()[:, 0, 0], [-1.0, 1.0, -0.6], rtol=1e-6)

    def test_grayscale_is_expanded(self, tmp_path):
        path = tmp_path / 'gray.png'
        Image.fromarray(np.full((2, 2), 128, dtype=np.uint8)).save(path)

        assert load_image(path).shape == (3, 2, 2)

    def test_unsupported_format(self, tmp_path):
        path = tmp_path / 'frame.bmp'
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path)

        with pytest.raises(InvalidConfiguration, match='Unsupported'):
            load_image(path)

    def test_not_an_image(self, tmp_path):
        path = tmp_path / 'noise.png'
        path.write_bytes(b'not an image')

        with pytest.raises(InvalidConfiguration):
            load_image(path)

    def test_missing(self, tmp_path):
        with pytest.raises(FilesNotFound):
            load_image(tmp_path / 'absent.png')

    def test_save_requires_uint8_rgb(self, tmp_path):
        with pytest.raises(ShapeMismatch):
            save_image(tmp_path / 'bad.png', np.zeros((2, 2), dtype=np.uint8))


class TestInputPadder:
    def test_pads_to_multiple_of_eight(self):
        padder = InputPadder(13, 21)

        padded = padder.pad(Tensor(np.zeros((1, 3, 13, 21), dtype=np.float32)))

        assert padder.padded_size == (16, 24)
        assert padded.shape == (1, 3, 16, 24)
        assert (padder.top, padder.bottom, padder.left, padder.right) == (1, 2, 1, 2)

    def test_unpad_inverts_pad(self):
        padder = InputPadder(13, 21)
        x = Tensor(np.random.default_rng(0).standard_normal((1, 2, 13, 21)))

        assert_array_equal(padder.unpad(padder.pad(x)).numpy(), x.numpy())

    def test_padding_replicates_borders(self):
        padder = InputPadder(6, 8)
        x = np.arange(48, dtype=np.float64).reshape(1, 1, 6, 8)

        padded = padder.pad(Tensor(x)).numpy()

        assert_array_equal(padded[0, 0, 0], x[0, 0, 0])
        assert_array_equal(padded[0, 0, -1], x[0, 0, -1])

    def test_aligned_size_is_untouched(self):
        padder = InputPadder(16, 16)

        assert padder.padded_size == (16, 16)

    def test_size_checks(self):
        padder = InputPadder(13, 21)

        with pytest.raises(ShapeMismatch):
            padder.pad(Tensor(np.zeros((1, 3, 16, 24))))
        with pytest.raises(ShapeMismatch):
            padder.unpad(Tensor(np.zeros((1, 3, 13, 21))))
