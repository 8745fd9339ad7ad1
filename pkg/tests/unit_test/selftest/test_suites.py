import pytest

from hmaflow.etc.errors import InvalidConfiguration
from hmaflow.selftest import CHECKS, run_check, run_checks
from hmaflow.selftest.suites import register


def test_registered_checks():
    assert list(CHECKS) == [
        'dimensions', 'cost-volume-oracle', 'search-oracle', 'gradients', 'metrics', 'io-roundtrip',
    ]


@pytest.mark.parametrize('name', list(CHECKS))
def test_every_check_passes(name):
    result = run_check(name)

    assert result.passed, result.detail
    assert result.name == name
    assert result.seconds >= 0.0


def test_failures_are_captured(monkeypatch):
    def broken() -> str:
        raise AssertionError('EPE was 4.9, expected 5')

    monkeypatch.setitem(CHECKS, 'broken', broken)

    result = run_check('broken')

    assert not result.passed
    assert result.detail == 'AssertionError: EPE was 4.9, expected 5'


def test_run_checks_keeps_requested_order():
    results = run_checks(['metrics', 'dimensions'])

    assert [r.name for r in results] == ['metrics', 'dimensions']


def test_unknown_check():
    with pytest.raises(InvalidConfiguration, match='available'):
        run_checks(['metrics', 'no-such-check'])


def test_duplicate_registration():
    with pytest.raises(InvalidConfiguration):
        register('metrics')(lambda: 'again')
