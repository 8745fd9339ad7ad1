import asyncio
import json
import numpy as np
import pytest
import typer
from typer.testing import CliRunner

from hmaflow import __version__
from hmaflow.cli.cli import cli_main, create_cli
from hmaflow.cli.utils import build_model_config, parse_motion, parse_radii, parse_size
from hmaflow.etc.enums import AlignmentMode, MotionKind, SearchStrategy
from hmaflow.io.flo import read_flo, write_flo
from hmaflow.io.image import save_image
from hmaflow.io.weights import save_weights
from hmaflow.network import HmaFlow

RUNNER = CliRunner()


@pytest.fixture(scope='module')
def weights_path(tmp_path_factory):
    path = tmp_path_factory.mktemp('weights') / 'default.hmaw'
    asyncio.run(save_weights(HmaFlow(), path))
    return path


@pytest.fixture
def frames(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for name in ('frame1.png', 'frame2.png'):
        path = tmp_path / name
        save_image(path, rng.integers(0, 256, size=(12, 20, 3), dtype=np.uint8))
        paths.append(path)
    return paths


class TestCallback:
    def test_version(self):
        result = RUNNER.invoke(create_cli(), ['--version'])

        assert result.exit_code == 0
        assert __version__ in result.output

    def test_unknown_option_is_usage_error(self):
        assert cli_main(['--no-such-flag']) == 2

    def test_unknown_command_option_prints_usage(self, capsys):
        code = cli_main(['selftest', '--no-such-flag'])

        captured = capsys.readouterr()
        assert code == 2
        assert 'Usage' in captured.out + captured.err

    def test_version_returns_zero(self, capsys):
        assert cli_main(['--version']) == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_required_option(self):
        result = RUNNER.invoke(create_cli(), ['infer', '--image1', 'a.png'])

        assert result.exit_code == 2


class TestSelftestCommand:
    def test_selected_check_passes(self):
        result = RUNNER.invoke(create_cli(), ['selftest', '--only', 'metrics'])

        assert result.exit_code == 0
        assert 'PASS' in result.output

    def test_unknown_check_exits_with_error(self):
        assert cli_main(['selftest', '--only', 'no-such-check']) == 1


class TestInferCommand:
    def test_writes_flow_and_visualisation(self, weights_path, frames, tmp_path):
        out, viz = tmp_path / 'out' / 'flow.flo', tmp_path / 'out' / 'flow.png'

        result = RUNNER.invoke(create_cli(), [
            'infer', '--image1', str(frames[0]), '--image2', str(frames[1]),
            '--weights', str(weights_path), '--out', str(out), '--viz', str(viz), '--iters', '1',
        ])

        assert result.exit_code == 0, result.output
        assert read_flo(out).data.shape == (1, 2, 12, 20)
        assert viz.is_file()

    def test_output_is_deterministic(self, weights_path, frames, tmp_path):
        outputs = [tmp_path / 'a.flo', tmp_path / 'b.flo']

        for out in outputs:
            assert cli_main([
                'infer', '--image1', str(frames[0]), '--image2', str(frames[1]),
                '--weights', str(weights_path), '--out', str(out), '--iters', '1',
            ]) == 0

        assert outputs[0].read_bytes() == outputs[1].read_bytes()

    def test_warm_start_file(self, weights_path, frames, tmp_path):
        warm = tmp_path / 'warm.flo'
        write_flo(warm, np.full((12, 20, 2), 2.0, dtype=np.float32))
        out = tmp_path / 'warm_out.flo'

        code = cli_main([
            'infer', '--image1', str(frames[0]), '--image2', str(frames[1]),
            '--weights', str(weights_path), '--out', str(out), '--iters', '1', '--warm-start', str(warm),
        ])

        assert code == 0
        assert read_flo(out).data.shape == (1, 2, 12, 20)

    def test_architecture_flags_must_match_weights(self, weights_path, frames, tmp_path):
        result = RUNNER.invoke(create_cli(), [
            'infer', '--image1', str(frames[0]), '--image2', str(frames[1]),
            '--weights', str(weights_path), '--out', str(tmp_path / 'x.flo'), '--no-csa',
        ])

        assert result.exit_code == 1
        assert 'Error' in result.output

    def test_missing_image(self, weights_path, tmp_path):
        code = cli_main([
            'infer', '--image1', str(tmp_path / 'absent.png'), '--image2', str(tmp_path / 'absent.png'),
            '--weights', str(weights_path), '--out', str(tmp_path / 'x.flo'),
        ])

        assert code == 1


class TestEvalCommand:
    def test_report(self, weights_path, tmp_path):
        rng = np.random.default_rng(1)
        for name in ('a.png', 'b.png'):
            save_image(tmp_path / name, rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        write_flo(tmp_path / 'gt.flo', np.zeros((16, 16, 2), dtype=np.float32))
        (tmp_path / 'pairs.txt').write_text('a.png b.png gt.flo\n', encoding='utf-8')
        report = tmp_path / 'report.json'

        result = RUNNER.invoke(create_cli(), [
            'eval', '--pairs', str(tmp_path / 'pairs.txt'), '--weights', str(weights_path),
            '--iters', '1', '--report', str(report), '--flow-dir', str(tmp_path / 'flows'),
        ])

        assert result.exit_code == 0, result.output
        document = json.loads(report.read_text(encoding='utf-8'))
        assert document['iters'] == 1
        assert len(document['pairs']) == 1
        assert set(document['mean']) == {'epe', 'fl_all', 'px1', 'px3', 'px5'}
        assert (tmp_path / 'flows' / '000000.flo').is_file()


class TestOverfitCommand:
    def test_single_step_report(self, tmp_path):
        report = tmp_path / 'overfit.json'

        result = RUNNER.invoke(create_cli(), [
            'overfit', '--size', '16x16', '--motion', 'translate:1,1', '--steps', '1', '--iters', '1',
            '--report', str(report), '--save-weights', str(tmp_path / 'trained.hmaw'),
        ])

        assert result.exit_code == 0, result.output
        document = json.loads(report.read_text(encoding='utf-8'))
        assert set(document) == {'steps', 'final_loss', 'final_epe', 'per_iter_epe'}
        assert document['steps'] == 1
        assert len(document['per_iter_epe']) == 1
        assert (tmp_path / 'trained.hmaw').is_file()

    def test_bad_motion(self):
        result = RUNNER.invoke(create_cli(), ['overfit', '--motion', 'shear:1', '--steps', '1'])

        assert result.exit_code != 0


class TestParsers:
    def test_size(self):
        assert parse_size('64x96') == (64, 96)
        with pytest.raises(typer.BadParameter):
            parse_size('64')

    @pytest.mark.parametrize('text, kind', [
        ('translate:5,3', MotionKind.TRANSLATE),
        ('rotate:12.5', MotionKind.ROTATE),
        ('zoom:1.1', MotionKind.ZOOM),
    ])
    def test_motion(self, text, kind):
        assert parse_motion(text).kind is kind

    @pytest.mark.parametrize('text', ['translate:5', 'rotate:a', 'zoom:-1', 'spin:2'])
    def test_bad_motion(self, text):
        with pytest.raises(typer.BadParameter):
            parse_motion(text)

    def test_radii(self):
        assert parse_radii('4,6,8,10') == (4, 6, 8, 10)
        with pytest.raises(typer.BadParameter):
            parse_radii('4,0')

    def test_model_config_from_flags(self):
        config = build_model_config('1,2', SearchStrategy.MULTI_SCALE, AlignmentMode.MAXPOOL, True, False, False,
                                    seed=5)

        assert config.radii == (1, 2)
        assert config.alignment is AlignmentMode.MAXPOOL
        assert not config.use_csa
        assert config.seed == 5
