import os
from concurrent.futures import ThreadPoolExecutor
import numpy as np
import pytest

from hmaflow.etc.consts import CONFIG
from hmaflow.etc import utils
from hmaflow.etc.utils import ensure_parent_directory, get_rng, iter_progress, schedule_tasks, verbose_print


def test_iter_progress_yields_all_items_when_progress_bar_disabled(monkeypatch):
    monkeypatch.setattr(CONFIG, 'disable_progress_bar', True)

    items = list(iter_progress(range(5), description='test'))

    assert items == [0, 1, 2, 3, 4]


def test_iter_progress_yields_all_items_when_progress_bar_enabled(monkeypatch):
    monkeypatch.setattr(CONFIG, 'disable_progress_bar', False)

    items = list(iter_progress(range(5), description='test', total=5))

    assert items == [0, 1, 2, 3, 4]


class _RecordingProgress:
    def __init__(self, *args, **kwargs):
        self.stopped = False

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stopped = True

    def add_task(self, **kwargs):
        return 0

    def advance(self, task):
        pass


@pytest.fixture
def recorded_bars(monkeypatch):
    bars = []

    def factory(*args, **kwargs):
        bars.append(_RecordingProgress(*args, **kwargs))
        return bars[-1]

    monkeypatch.setattr(CONFIG, 'disable_progress_bar', False)
    monkeypatch.setattr(utils, 'Progress', factory)
    return bars


def test_iter_progress_stops_bar_when_closed_early(recorded_bars):
    items = iter_progress(range(5), description='test', total=5)

    assert next(items) == 0
    items.close()

    assert recorded_bars[0].stopped


def test_iter_progress_stops_bar_when_consumer_raises(recorded_bars):
    with pytest.raises(RuntimeError):
        for _ in iter_progress(range(5), description='test', total=5):
            raise RuntimeError('consumer failed')

    assert recorded_bars[0].stopped


@pytest.mark.asyncio
async def test_schedule_tasks_yields_every_result(monkeypatch):
    monkeypatch.setattr(CONFIG, 'disable_progress_bar', True)

    with ThreadPoolExecutor(max_workers=2) as executor:
        results = [r async for r in schedule_tasks(executor, lambda x: x * x, range(6), max_concurrency=2)]

    assert sorted(results) == [0, 1, 4, 9, 16, 25]


@pytest.mark.asyncio
async def test_schedule_tasks_rejects_zero_concurrency():
    with ThreadPoolExecutor(max_workers=1) as executor:
        with pytest.raises(ValueError):
            async for _ in schedule_tasks(executor, abs, [1], max_concurrency=0):
                pass


def test_get_rng_defaults_to_configured_seed(monkeypatch):
    monkeypatch.setattr(CONFIG, 'seed', 11)

    assert np.array_equal(get_rng().random(4), np.random.default_rng(11).random(4))
    assert np.array_equal(get_rng(3).random(4), np.random.default_rng(3).random(4))


def test_ensure_parent_directory(tmp_path):
    target = tmp_path / 'a' / 'b' / 'file.flo'

    ensure_parent_directory(target)

    assert os.path.isdir(tmp_path / 'a' / 'b')


def test_verbose_print_respects_setting(monkeypatch, capsys):
    monkeypatch.setattr(CONFIG, 'verbose_print', False)
    verbose_print('hidden')
    monkeypatch.setattr(CONFIG, 'verbose_print', True)
    verbose_print('shown')

    assert capsys.readouterr().out == 'shown\n'
