import numpy as np
import pytest

from hmaflow.etc.errors import FilesNotFound, InvalidConfiguration
from hmaflow.io.flo import read_flo, write_flo
from hmaflow.io.image import save_image
from hmaflow.model.config import ModelConfig
from hmaflow.model.report import FlowMetrics
from hmaflow.network import HmaFlow
from hmaflow.pipeline.evaluation import evaluate_pair, evaluate_pairs, mean_metrics, read_pairs_file


SMALL = ModelConfig(feature_dim=8, hidden_dim=6, context_dim=4, correlation_dim=10, radii=(1, 2),
                    max_image_height=32, max_image_width=32, seed=0)


@pytest.fixture
def pair_list(tmp_path):
    rng = np.random.default_rng(0)
    lines = ['# frames and ground truth', '']
    for index, u in enumerate((0.0, 3.0, 6.0)):
        for frame in (1, 2):
            save_image(tmp_path / 'frames' / f'{index}_{frame}.png',
                       rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        gt = np.zeros((16, 16, 2), dtype=np.float32)
        gt[..., 0] = u
        write_flo(tmp_path / 'flow' / f'{index}.flo', gt)
        lines.append(f'frames/{index}_1.png frames/{index}_2.png flow/{index}.flo  # pair {index}')

    path = tmp_path / 'pairs.txt'
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


class TestReadPairsFile:
    def test_resolves_relative_paths(self, pair_list, tmp_path):
        pairs = read_pairs_file(pair_list)

        assert [p.index for p in pairs] == [0, 1, 2]
        assert pairs[1].image1 == str(tmp_path / 'frames' / '1_1.png')
        assert pairs[2].ground_truth == str(tmp_path / 'flow' / '2.flo')

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / 'pairs.txt'
        path.write_text('a.png b.png\n', encoding='utf-8')

        with pytest.raises(InvalidConfiguration, match=':1:'):
            read_pairs_file(path)

    def test_only_comments(self, tmp_path):
        path = tmp_path / 'pairs.txt'
        path.write_text('# nothing here\n\n', encoding='utf-8')

        with pytest.raises(InvalidConfiguration):
            read_pairs_file(path)

    def test_missing(self, tmp_path):
        with pytest.raises(FilesNotFound):
            read_pairs_file(tmp_path / 'absent.txt')


class TestEvaluatePairs:
    @pytest.mark.asyncio
    async def test_metrics_and_order(self, pair_list):
        model = HmaFlow(SMALL)
        pairs = read_pairs_file(pair_list)

        report = await evaluate_pairs(model, pairs, iters=1)

        # A fresh model predicts zero flow, so the EPE equals the ground truth magnitude
        assert report.iters == 1
        assert [r.index for r in report.pairs] == [0, 1, 2]
        assert [r.metrics.epe for r in report.pairs] == pytest.approx([0.0, 3.0, 6.0])
        assert report.mean.epe == pytest.approx(3.0)
        assert report.mean.fl_all == pytest.approx(100.0 / 3)
        assert all(r.flow_output is None for r in report.pairs)

    @pytest.mark.asyncio
    async def test_matches_single_pair_evaluation(self, pair_list):
        model = HmaFlow(SMALL).eval()
        pairs = read_pairs_file(pair_list)

        report = await evaluate_pairs(model, pairs, iters=2)

        for result, pair in zip(report.pairs, pairs):
            _, _, metrics = evaluate_pair(model, pair, 2)
            assert result.metrics == metrics

    @pytest.mark.asyncio
    async def test_writes_predicted_flows(self, pair_list, tmp_path):
        out = tmp_path / 'predicted'

        report = await evaluate_pairs(HmaFlow(SMALL), read_pairs_file(pair_list), iters=1, flow_dir=out)

        assert sorted(p.name for p in out.iterdir()) == ['000000.flo', '000001.flo', '000002.flo']
        assert report.pairs[1].flow_output == str(out / '000001.flo')
        assert read_flo(out / '000002.flo').data.shape == (1, 2, 16, 16)

    @pytest.mark.asyncio
    async def test_empty_pair_list(self):
        with pytest.raises(InvalidConfiguration):
            await evaluate_pairs(HmaFlow(SMALL), [])


def test_mean_metrics_is_unweighted():
    metrics = [
        FlowMetrics(epe=1.0, fl_all=0.0, px1=100.0, px3=100.0, px5=100.0),
        FlowMetrics(epe=3.0, fl_all=50.0, px1=0.0, px3=50.0, px5=100.0),
    ]

    mean = mean_metrics(metrics)

    assert mean == FlowMetrics(epe=2.0, fl_all=25.0, px1=50.0, px3=75.0, px5=100.0)
