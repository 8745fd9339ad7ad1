import numpy as np
import pytest
from numpy.testing import assert_allclose

from hmaflow.nn import Parameter
from hmaflow.pipeline.optim import AdamW, WarmupCosineSchedule, clip_grad_norm


def _param(values, grad=None):
    param = Parameter(np.asarray(values, dtype=np.float64))
    if grad is not None:
        param.grad = np.asarray(grad, dtype=np.float64)
    return param


class TestAdamW:
    def test_first_step_moves_by_learning_rate(self):
        param = _param([1.0, -2.0], [0.5, -3.0])

        AdamW([param], lr=0.1).step()

        assert_allclose(param.numpy(), [0.9, -1.9], rtol=1e-6)

    def test_weight_decay_is_decoupled(self):
        param = _param([1.0], [0.5])

        AdamW([param], lr=0.1, weight_decay=0.1).step()

        assert param.numpy()[0] == pytest.approx(1.0 * (1 - 0.01) - 0.1, rel=1e-6)

    def test_step_learning_rate_overrides_default(self):
        param = _param([0.0], [1.0])

        AdamW([param], lr=0.1).step(lr=0.5)

        assert param.numpy()[0] == pytest.approx(-0.5, rel=1e-6)

    def test_parameters_without_gradient_are_skipped(self):
        frozen = _param([4.0])
        moving = _param([4.0], [1.0])

        AdamW([frozen, moving], lr=0.1, weight_decay=0.5).step()

        assert frozen.numpy()[0] == 4.0
        assert moving.numpy()[0] != 4.0

    def test_zero_grad(self):
        param = _param([1.0], [1.0])
        optimizer = AdamW([param], lr=0.1)

        optimizer.zero_grad()

        assert param.grad is None

    def test_minimises_quadratic(self):
        param = Parameter(np.array([3.0, -2.0]))
        optimizer = AdamW([param], lr=0.05)

        for _ in range(400):
            optimizer.zero_grad()
            (param * param).sum().backward()
            optimizer.step()

        assert np.abs(param.numpy()).max() < 0.1

    def test_keeps_float32_parameters(self):
        param = Parameter(np.ones(3, dtype=np.float32))
        param.grad = np.ones(3, dtype=np.float64)

        AdamW([param], lr=0.1).step()

        assert param.dtype == np.float32


class TestClipGradNorm:
    def test_scales_large_gradients(self):
        a, b = _param([0.0], [3.0]), _param([0.0], [4.0])

        norm = clip_grad_norm([a, b], 1.0)

        assert norm == pytest.approx(5.0)
        assert_allclose([a.grad[0], b.grad[0]], [0.6, 0.8], rtol=1e-5)

    def test_small_gradients_are_untouched(self):
        a = _param([0.0, 0.0], [0.3, 0.4])

        assert clip_grad_norm([a], 1.0) == pytest.approx(0.5)
        assert_allclose(a.grad, [0.3, 0.4])

    def test_no_gradients(self):
        assert clip_grad_norm([_param([1.0])], 1.0) == 0.0


class TestWarmupCosineSchedule:
    def test_linear_warmup(self):
        schedule = WarmupCosineSchedule(1.0, 100, 0.05)

        assert [schedule(s) for s in range(5)] == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])

    def test_cosine_decay(self):
        schedule = WarmupCosineSchedule(2.0, 100, 0.05)

        assert schedule(5) == pytest.approx(2.0)
        assert schedule(5 + 95 // 2) == pytest.approx(1.0, rel=0.05)
        assert schedule(99) < 0.01
        assert schedule(500) == pytest.approx(0.0, abs=1e-12)

    def test_without_warmup(self):
        schedule = WarmupCosineSchedule(1.0, 10, 0.0)

        assert schedule(0) == pytest.approx(1.0)
        assert all(schedule(s) >= schedule(s + 1) for s in range(10))
