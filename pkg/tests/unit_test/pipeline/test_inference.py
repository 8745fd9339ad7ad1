import numpy as np
import pytest
from numpy.testing import assert_allclose

from hmaflow.etc.enums import Resolution
from hmaflow.etc.errors import ResolutionMismatch, ShapeMismatch
from hmaflow.io.image import InputPadder
from hmaflow.model.config import ModelConfig
from hmaflow.model.flow import FlowField
from hmaflow.network import HmaFlow
from hmaflow.pipeline.inference import downsample_flow, estimate_flow, warm_start_flow
from hmaflow.tensor import Tensor


SMALL = ModelConfig(feature_dim=8, hidden_dim=6, context_dim=4, correlation_dim=10, radii=(1, 2),
                    max_image_height=32, max_image_width=32, seed=0)


@pytest.fixture(scope='module')
def model():
    return HmaFlow(SMALL).eval()


def _frames(height, width, seed=0, batch=None):
    rng = np.random.default_rng(seed)
    shape = (3, height, width) if batch is None else (batch, 3, height, width)
    return (
        Tensor(rng.uniform(-1, 1, size=shape).astype(np.float32)),
        Tensor(rng.uniform(-1, 1, size=shape).astype(np.float32)),
    )


class TestEstimateFlow:
    def test_output_is_cropped_to_input(self, model):
        image1, image2 = _frames(13, 21)

        flow = estimate_flow(model, image1, image2, iters=1)

        assert flow.resolution is Resolution.FULL
        assert flow.data.shape == (1, 2, 13, 21)

    def test_batched_input(self, model):
        image1, image2 = _frames(16, 16, batch=2)

        assert estimate_flow(model, image1, image2, iters=1).data.shape == (2, 2, 16, 16)

    def test_no_graph_is_recorded(self, model):
        image1, image2 = _frames(8, 8)

        flow = estimate_flow(model, image1, image2, iters=1)

        assert not flow.data.requires_grad

    def test_repeated_calls_are_identical(self, model):
        image1, image2 = _frames(16, 8, seed=1)

        first = estimate_flow(model, image1, image2, iters=2).numpy()
        second = estimate_flow(model, image1, image2, iters=2).numpy()

        assert np.array_equal(first, second)

    def test_full_resolution_warm_start_carries_through(self, model):
        image1, image2 = _frames(13, 21, seed=2)
        warm = FlowField(Tensor(np.full((1, 2, 13, 21), 8.0, dtype=np.float32)), Resolution.FULL)

        # A fresh flow head predicts zero updates, so the warm start is returned as-is
        flow = estimate_flow(model, image1, image2, iters=1, warm_start=warm)

        assert_allclose(flow.numpy(), 8.0, rtol=1e-5)

    def test_mismatched_frames(self, model):
        image1, _ = _frames(16, 16)
        _, image2 = _frames(16, 24)

        with pytest.raises(ShapeMismatch):
            estimate_flow(model, image1, image2)


class TestWarmStart:
    def test_downsample_block_mean(self):
        flow = np.zeros((1, 2, 16, 8))
        flow[0, 0, :8] = 16.0
        flow[0, 1, 8:, :4] = 8.0

        eighth = downsample_flow(flow)

        assert eighth.shape == (1, 2, 2, 1)
        assert_allclose(eighth[0, 0, :, 0], [2.0, 0.0])
        assert_allclose(eighth[0, 1, :, 0], [0.0, 0.5])

    def test_eighth_field_must_match_padded_input(self):
        padder = InputPadder(13, 21)

        ok = FlowField.zeros(1, 2, 3, Resolution.EIGHTH)
        assert warm_start_flow(ok, padder, 1) is ok
        with pytest.raises(ResolutionMismatch):
            warm_start_flow(FlowField.zeros(1, 2, 2, Resolution.EIGHTH), padder, 1)

    def test_full_field_must_match_input(self):
        padder = InputPadder(13, 21)

        with pytest.raises(ResolutionMismatch):
            warm_start_flow(FlowField.zeros(1, 16, 24, Resolution.FULL), padder, 1)

    def test_full_field_is_padded_then_averaged(self):
        padder = InputPadder(13, 21)
        warm = FlowField(Tensor(np.full((1, 2, 13, 21), 4.0, dtype=np.float32)), Resolution.FULL)

        eighth = warm_start_flow(warm, padder, 1)

        assert eighth.resolution is Resolution.EIGHTH
        assert_allclose(eighth.numpy(), np.full((1, 2, 2, 3), 0.5))
