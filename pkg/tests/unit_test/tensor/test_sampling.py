import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hmaflow.etc.errors import NonFiniteValues, ShapeMismatch
from hmaflow.tensor import Tensor, bilinear_sample, bilinear_sample_array, gradient_check


def _grid():
    return np.arange(12, dtype=np.float64).reshape(1, 1, 3, 4)


class TestBilinearSample:
    def test_integer_coordinates_address_elements(self):
        coords = np.array([[[0.0, 3.0, 2.0], [0.0, 2.0, 1.0]]])

        out = bilinear_sample(Tensor(_grid()), Tensor(coords)).numpy()

        assert_array_equal(out[0, 0], [0.0, 11.0, 6.0])

    def test_fractional_coordinates_interpolate(self):
        coords = np.array([[[0.5, 1.25], [0.5, 1.0]]])

        out = bilinear_sample(Tensor(_grid()), Tensor(coords)).numpy()

        assert_allclose(out[0, 0], [2.5, 5.25])

    def test_outside_corners_contribute_zero(self):
        coords = np.array([[[-0.5, 10.0, 3.5], [0.0, 10.0, 0.0]]])

        out = bilinear_sample(Tensor(_grid()), Tensor(coords)).numpy()

        assert_allclose(out[0, 0], [0.0, 0.0, 1.5])

    def test_array_variant_matches(self):
        rng = np.random.default_rng(0)
        grid = rng.standard_normal((2, 3, 4, 5))
        coords = rng.uniform(-1, 5, size=(2, 2, 7))

        assert_allclose(
            bilinear_sample_array(grid, coords),
            bilinear_sample(Tensor(grid), Tensor(coords)).numpy(),
        )

    def test_non_finite_coordinates_are_rejected(self):
        coords = np.array([[[np.nan], [0.0]]])

        with pytest.raises(NonFiniteValues):
            bilinear_sample(Tensor(_grid()), Tensor(coords))

    def test_coordinate_shape_is_checked(self):
        with pytest.raises(ShapeMismatch):
            bilinear_sample(Tensor(_grid()), Tensor(np.zeros((1, 3, 2))))

    def test_gradients_through_grid_and_coordinates(self):
        rng = np.random.default_rng(1)
        grid = Tensor(rng.standard_normal((2, 2, 4, 5)))
        # Keep samples away from integer kinks
        coords = Tensor(np.floor(rng.uniform(-1, 5, size=(2, 2, 6))) + rng.uniform(0.1, 0.9, size=(2, 2, 6)))

        assert gradient_check(bilinear_sample, [grid, coords]) < 1e-5

    def test_grid_gradient_scatters_weights(self):
        grid = Tensor(np.zeros((1, 1, 2, 2)), requires_grad=True)
        coords = Tensor(np.array([[[0.5], [0.5]]]))

        bilinear_sample(grid, coords).sum().backward()

        assert_allclose(grid.grad[0, 0], np.full((2, 2), 0.25))
