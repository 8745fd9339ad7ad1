import numpy as np
import pytest
from numpy.testing import assert_array_equal
from pydantic import ValidationError

from hmaflow.etc.consts import CONFIG
from hmaflow.etc.enums import AlignmentMode, Resolution, SearchStrategy
from hmaflow.etc.errors import ShapeMismatch
from hmaflow.model.config import LossConfig, ModelConfig, TrainingConfig
from hmaflow.model.flow import FlowField
from hmaflow.model.report import FlowMetrics, OverfitReport
from hmaflow.tensor import Tensor


class TestModelConfig:
    def test_defaults(self):
        config = ModelConfig()

        assert config.radii == (4, 6, 8, 10)
        assert config.motion_channels == 980
        assert config.correlation_dim == 324
        assert config.alignment is AlignmentMode.CONV2X2
        assert config.use_csa and config.use_position_embedding and config.hierarchical_motion

    def test_pooled_pyramid_channels(self):
        config = ModelConfig(search_strategy=SearchStrategy.AVERAGE_POOLING)

        assert config.motion_channels == 4 * 9 * 9

    def test_max_tokens_rounds_up(self):
        assert ModelConfig(max_image_height=100, max_image_width=64).max_tokens == 13 * 8

    def test_environment_defaults(self, monkeypatch):
        monkeypatch.setattr(CONFIG, 'seed', 42)

        assert ModelConfig().seed == 42

    def test_rejects_non_positive_radius(self):
        with pytest.raises(ValidationError):
            ModelConfig(radii=(4, 0))

    def test_rejects_unknown_fields(self):
        with pytest.raises(ValidationError):
            ModelConfig(use_attention=False)

    def test_is_frozen(self):
        with pytest.raises(ValidationError):
            ModelConfig().use_csa = False

    def test_enum_values_are_accepted(self):
        config = ModelConfig(alignment='maxpool', search_strategy='average_pooling')

        assert config.alignment is AlignmentMode.MAXPOOL
        assert config.search_strategy is SearchStrategy.AVERAGE_POOLING


def test_training_and_loss_defaults_follow_settings():
    training = TrainingConfig()

    assert training.iters == CONFIG.train_iters
    assert training.learning_rate == pytest.approx(2e-4)
    assert LossConfig().gamma == pytest.approx(0.8)
    with pytest.raises(ValidationError):
        LossConfig(gamma=1.5)


class TestFlowField:
    def test_from_array_layouts(self):
        hw2 = np.random.default_rng(0).standard_normal((3, 4, 2)).astype(np.float32)

        field = FlowField.from_array(hw2)

        assert field.data.shape == (1, 2, 3, 4)
        assert_array_equal(field.to_hw2(), hw2)
        assert FlowField.from_array(np.zeros((2, 3, 4))).data.shape == (1, 2, 3, 4)

    def test_components(self):
        field = FlowField.from_array(np.stack([np.ones((2, 2)), np.full((2, 2), 2.0)]))

        assert_array_equal(field.u.numpy(), np.ones((1, 1, 2, 2)))
        assert_array_equal(field.v.numpy(), np.full((1, 1, 2, 2), 2.0))
        assert (field.batch, field.height, field.width) == (1, 2, 2)

    def test_zeros(self):
        field = FlowField.zeros(2, 3, 5, Resolution.EIGHTH)

        assert field.resolution is Resolution.EIGHTH
        assert field.data.shape == (2, 2, 3, 5)

    def test_rejects_wrong_channel_count(self):
        with pytest.raises(ShapeMismatch):
            FlowField(Tensor(np.zeros((1, 3, 2, 2))))


class TestReports:
    @pytest.mark.asyncio
    async def test_json_round_trip(self, tmp_path):
        report = OverfitReport(steps=3, final_loss=0.5, final_epe=0.25, per_iter_epe=[1.0, 0.25])
        path = tmp_path / 'reports' / 'overfit.json'

        await report.save_json(path)

        assert await OverfitReport.load_json(path) == report

    def test_dump_uses_plain_json_types(self):
        metrics = FlowMetrics(epe=1.0, fl_all=2.0, px1=3.0, px3=4.0, px5=5.0)

        assert metrics.model_dump() == {'epe': 1.0, 'fl_all': 2.0, 'px1': 3.0, 'px3': 4.0, 'px5': 5.0}
