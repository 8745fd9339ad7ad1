"""
Named self-verification checks: dimension identities, cost volume and search oracles,
autodiff gradients, metric hand cases and file format round trips.

A check returns a short detail string on success and raises on failure.
"""

import asyncio
import math
import os
import tempfile
import time
from typing import Callable, Iterable, Optional
import numpy as np

from hmaflow.etc.consts import CORRELATION_DIM, DEFAULT_RADII, LOGGER
from hmaflow.etc.enums import AlignmentMode, Level, Resolution
from hmaflow.etc.errors import InvalidConfiguration
from hmaflow.etc.utils import get_rng, iter_progress
from hmaflow.io.flo import read_flo, write_flo
from hmaflow.io.weights import WeightsContainerFileV1
from hmaflow.model.config import LossConfig
from hmaflow.model.flow import FlowField
from hmaflow.model.report import CheckResult
from hmaflow.network.cost_volume import MotionVolume, build_base_volume, motion_channels, \
    multi_scale_search, window_offsets
from hmaflow.network.csa import CorrelationSelfAttention, csa_forward
from hmaflow.network.hma import AlignedCostVolume, HierarchicalMotionAlignment, align_and_fuse
from hmaflow.supervision import epe, fl_all, sequence_loss
from hmaflow.tensor import ConvSpec, Tensor, bilinear_sample, conv2d, gradient_check, no_grad

GRADIENT_TOLERANCE = 1e-5
ORACLE_TOLERANCE = 1e-5

Check = Callable[[], str]
CHECKS: dict[str, Check] = {}


def register(name: str) -> Callable[[Check], Check]:
    def decorator(func: Check) -> Check:
        if name in CHECKS:
            raise InvalidConfiguration(f'Duplicate self-test check name: {name}')
        CHECKS[name] = func
        return func
    return decorator


def _expect(condition: bool, message: str):
    if not condition:
        raise AssertionError(message)


def _random(shape: tuple[int, ...], seed: int, dtype=np.float64) -> Tensor:
    return Tensor(get_rng(seed).standard_normal(shape).astype(dtype))


def _bilinear_point(grid: np.ndarray, x: float, y: float) -> float:
    """
    Zero-padded bilinear sample of a 2-D array at (x, y), written out corner by corner.
    """
    height, width = grid.shape
    x0, y0 = math.floor(x), math.floor(y)
    total = 0.0
    for xi, yi in ((x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)):
        if 0 <= xi < width and 0 <= yi < height:
            total += (1 - abs(x - xi)) * (1 - abs(y - yi)) * grid[yi, xi]
    return total


@register('dimensions')
def check_dimensions() -> str:
    channels = motion_channels(DEFAULT_RADII)
    _expect(channels == 980, f'default radii give {channels} motion channels, expected 980')
    _expect(window_offsets(DEFAULT_RADII).shape == (980, 2), 'offset table does not match channel count')

    rng = get_rng(0)
    with no_grad():
        hma = HierarchicalMotionAlignment(channels, rng=rng)
        quarter = MotionVolume(Level.QUARTER, _random((1, channels, 4, 4), 1, np.float32), DEFAULT_RADII)
        eighth = MotionVolume(Level.EIGHTH, _random((1, channels, 2, 2), 2, np.float32), DEFAULT_RADII)
        aligned = align_and_fuse(quarter, eighth, hma)
        _expect(aligned.data.shape == (1, CORRELATION_DIM, 2, 2), f'aligned volume has shape {aligned.data.shape}')

        csa = CorrelationSelfAttention(CORRELATION_DIM, max_tokens=4, rng=rng)
        attended = csa_forward(aligned, csa)
        _expect(attended.data.shape == aligned.data.shape, f'attention changed shape to {attended.data.shape}')

    return f'd={channels}, aligned {aligned.data.shape}, attention preserves shape'


@register('cost-volume-oracle')
def check_cost_volume_oracle() -> str:
    f1 = _random((1, 8, 6, 8), 3, np.float32)
    f2 = _random((1, 8, 6, 8), 4, np.float32)
    with no_grad():
        vol = build_base_volume(f1, f2)
    actual = vol.as_array()[0]

    a, b = f1.numpy()[0], f2.numpy()[0]
    expected = np.zeros((6, 8, 6, 8))
    for i in range(6):
        for j in range(8):
            for m in range(6):
                for n in range(8):
                    expected[i, j, m, n] = sum(a[d, i, j] * b[d, m, n] for d in range(8)) / math.sqrt(8)

    error = float(np.abs(actual - expected).max())
    _expect(error < ORACLE_TOLERANCE, f'volume deviates from brute force by {error:.3g}')
    return f'max deviation {error:.2e}'


@register('search-oracle')
def check_search_oracle() -> str:
    radii = (1, 2)
    f1 = _random((1, 4, 5, 6), 5, np.float32)
    f2 = _random((1, 4, 5, 6), 6, np.float32)
    flow_values = get_rng(7).uniform(-2.0, 2.0, size=(1, 2, 5, 6)).astype(np.float32)

    with no_grad():
        vol = build_base_volume(f1, f2)
        motion = multi_scale_search(vol, FlowField(Tensor(flow_values), Resolution.EIGHTH), radii)
    actual = motion.data.numpy()[0]
    volume = vol.as_array()[0]

    offsets = window_offsets(radii)
    expected = np.zeros(actual.shape)
    for i in range(5):
        for j in range(6):
            u, v = flow_values[0, 0, i, j], flow_values[0, 1, i, j]
            for k, (dx, dy) in enumerate(offsets):
                expected[k, i, j] = _bilinear_point(volume[i, j], j + u + dx, i + v + dy)

    error = float(np.abs(actual - expected).max())
    _expect(error < ORACLE_TOLERANCE, f'search deviates from the per-offset loop by {error:.3g}')
    return f'{len(offsets)} offsets, max deviation {error:.2e}'


def _gradient_cases() -> Iterable[tuple[str, Callable[..., Tensor], list[Tensor]]]:
    rng = get_rng(11)

    spec = ConvSpec.build(2, 3, 3, stride=2, padding=1)
    yield 'conv2d', lambda x, w, b: conv2d(x, spec, w, b), [
        _random((1, 2, 5, 5), 12), _random(spec.kernel, 13), _random((3,), 14),
    ]

    coords = Tensor(rng.uniform(0.2, 3.8, size=(1, 2, 6)).round(1) + 0.05)
    yield 'bilinear_sample', bilinear_sample, [_random((1, 2, 5, 5), 15), coords]

    hma = HierarchicalMotionAlignment(4, out_channels=3, mode=AlignmentMode.CONV2X2, rng=rng).to_dtype(np.float64)
    yield 'align_and_fuse', lambda q, e: align_and_fuse(
        MotionVolume(Level.QUARTER, q, (1,)), MotionVolume(Level.EIGHTH, e, (1,)), hma,
    ).data, [
        Tensor(rng.uniform(0.5, 1.5, size=(1, 4, 4, 4))), Tensor(rng.uniform(0.5, 1.5, size=(1, 4, 2, 2))),
    ]

    csa = CorrelationSelfAttention(4, max_tokens=4, rng=rng).to_dtype(np.float64)
    yield 'csa_forward', lambda x: csa_forward(AlignedCostVolume(x), csa).data, [_random((1, 4, 2, 2), 16)]

    gt = FlowField(_random((1, 2, 3, 3), 17), Resolution.FULL)
    loss_config = LossConfig(gamma=0.8, max_flow=400.0)
    yield 'sequence_loss', lambda p1, p2: sequence_loss(
        [FlowField(p1), FlowField(p2)], gt, None, loss_config,
    ), [_random((1, 2, 3, 3), 18), _random((1, 2, 3, 3), 19)]


@register('gradients')
def check_gradients() -> str:
    errors = {}
    for name, fn, inputs in _gradient_cases():
        errors[name] = gradient_check(fn, inputs)

    failing = {name: e for name, e in errors.items() if e >= GRADIENT_TOLERANCE}
    _expect(not failing, 'gradient errors above tolerance: ' + ', '.join(f'{n}={e:.2e}' for n, e in failing.items()))
    return 'worst ' + max(errors, key=errors.get) + f' {max(errors.values()):.2e}'


@register('metrics')
def check_metrics() -> str:
    gt = np.zeros((1, 2, 1, 1))
    pred = np.array([3.0, 4.0]).reshape(1, 2, 1, 1)
    _expect(epe(pred, gt) == 5.0, 'EPE of a (3, 4) error is not 5')

    large = np.array([200.0, 0.0]).reshape(1, 2, 1, 1)
    small = np.array([10.0, 0.0]).reshape(1, 2, 1, 1)
    shifted = lambda f: f + np.array([0.0, 5.0]).reshape(1, 2, 1, 1)
    _expect(fl_all(shifted(large), large) == 0.0, 'a 5 px error on a 200 px flow counted as an outlier')
    _expect(fl_all(shifted(small), small) == 100.0, 'a 5 px error on a 10 px flow not counted as an outlier')

    target = FlowField(_random((1, 2, 2, 3), 20))
    p1, p2 = FlowField(_random((1, 2, 2, 3), 21)), FlowField(_random((1, 2, 2, 3), 22))
    with no_grad():
        loss = sequence_loss([p1, p2], target, None, LossConfig(gamma=0.8, max_flow=400.0)).item()
    l1 = lambda p: np.abs(p.numpy() - target.numpy()).sum(axis=1).mean()
    expanded = 0.8 * l1(p1) + l1(p2)
    _expect(abs(loss - expanded) < 1e-6, f'sequence loss {loss} differs from the expanded sum {expanded}')

    return 'EPE, Fl-all and sequence loss hand cases match'


@register('io-roundtrip')
def check_io_roundtrip() -> str:
    with tempfile.TemporaryDirectory() as tmp:
        flo_path = os.path.join(tmp, 'flow.flo')
        array = get_rng(23).standard_normal((3, 4, 2)).astype(np.float32)
        write_flo(flo_path, array)
        _expect(np.array_equal(read_flo(flo_path).to_hw2(), array), '.flo round trip is not bit-exact')

        write_flo(os.path.join(tmp, 'zero.flo'), np.zeros((2, 2, 2), dtype=np.float32))
        size = os.path.getsize(os.path.join(tmp, 'zero.flo'))
        _expect(size == 44, f'2x2 .flo file is {size} bytes, expected 44')

        state = {
            'a.weight': get_rng(24).standard_normal((2, 3, 1, 1)).astype(np.float32),
            'a.bias': np.zeros(2, dtype=np.float32),
        }
        first, second = os.path.join(tmp, 'a.hmaw'), os.path.join(tmp, 'b.hmaw')

        async def roundtrip():
            await WeightsContainerFileV1(first).write(state)
            await WeightsContainerFileV1(second).write(await WeightsContainerFileV1(first).read())

        asyncio.run(roundtrip())
        with open(first, 'rb') as f1, open(second, 'rb') as f2:
            _expect(f1.read() == f2.read(), 'weights save-load-save is not byte-identical')

    return '.flo and weights round trips bit-exact'


def run_check(name: str) -> CheckResult:
    """
    Run one registered check, capturing its outcome and wall time.
    """
    if name not in CHECKS:
        raise InvalidConfiguration(f'Unknown self-test check {name!r}; available: {", ".join(CHECKS)}')

    start = time.perf_counter()
    try:
        detail = CHECKS[name]()
        passed = True
    except Exception as e:  # pylint: disable=broad-except
        LOGGER.debug('Self-test check %s failed', name, exc_info=True)
        detail = f'{type(e).__name__}: {e}'
        passed = False

    return CheckResult(name=name, passed=passed, detail=detail, seconds=time.perf_counter() - start)


def run_checks(only: Optional[Iterable[str]] = None) -> list[CheckResult]:
    """
    Run the selected checks, or all of them, in registration order.
    """
    names = list(CHECKS) if not only else list(only)
    for name in names:
        if name not in CHECKS:
            raise InvalidConfiguration(f'Unknown self-test check {name!r}; available: {", ".join(CHECKS)}')

    return [run_check(name) for name in iter_progress(names, description='Self-testing...', total=len(names))]
