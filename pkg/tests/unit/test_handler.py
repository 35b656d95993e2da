"""Scenario dispatch and command-line tests.

Runs a small custom scenario end to end and checks that the emitted files
are byte-identical across repeated runs and worker counts. Runner failures
are injected by patching the runner lookup.
"""

import hashlib
import json
import os
from unittest.mock import patch

import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import write_config
from pipeline.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from pipeline.handler import run_scenario
from pipeline.runners.ma_detect import channel_taps, summarize_realizations
from shared import __version__
from shared.errors import ConfigError, DomainError

SMALL_CUSTOM = (
    'scenario = custom\n'
    'model.kind = iid_gaussian\n'
    'model.mean0 = 0.0\n'
    'model.mean1 = 1.0\n'
    'design.N = 4\n'
    'design.n_train = 400\n'
    'design.method = exact\n'
    'eval.grid_nodes = 201\n'
    'eval.box = 8.0\n'
    'eval.trials = 200\n'
    'eval.n = 5\n'
    'run.seed = 7\n'
)

SMALL_MA = (
    'scenario = ma_detect\n'
    'design.N = 4\n'
    'design.n_train = 400\n'
    'design.n_mc = 200\n'
    'eval.grid_nodes = 101\n'
    'eval.box = 10.0\n'
    'eval.trials = 100\n'
    'eval.n = 10\n'
    'run.seed = 3\n'
)

REDUCIBLE_HMM = (
    'scenario = custom\n'
    'model.kind = hmm\n'
    'model.M = 2.0\n'
    'model.sigma = 0.5\n'
    'model.centers = [[-1.0], [1.0]]\n'
    'model.transitions0 = [[1.0, 0.0], [0.0, 1.0]]\n'
    'model.transitions1 = [[1.0, 0.0], [0.0, 1.0]]\n'
    'run.seed = 1\n'
)


def _read_all(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), 'rb') as f:
            out[name] = f.read()
    return out


# ---------------------------------------------------------------------------
# run_scenario
# ---------------------------------------------------------------------------
class TestRunScenario:
    def test_custom_run_emits_report_and_artifacts(self, tmp_path):
        path = write_config(tmp_path, SMALL_CUSTOM)
        result = run_scenario(path, out_dir=str(tmp_path / 'out'))
        assert result['status'] == 'success'
        files = set(result['files'])
        assert {'report.json', 'config.echo', 'field_fbar.csv'} <= files
        assert {'codebook_uniform.csv', 'codebook_mse.csv', 'codebook_proposed.csv'} <= files
        assert {'roc_uniform.csv', 'roc_mse.csv', 'roc_proposed.csv'} <= files
        with open(tmp_path / 'out' / 'report.json', encoding='utf-8') as f:
            report = json.load(f)
        assert report['version'] == __version__
        assert report['scenario'] == 'custom'
        entries = {e['label']: e for e in report['results']['table']['entries']}
        assert entries['proposed']['auc'] > 0.5
        assert entries['uniform']['De'] > report['results']['table']['holder_bound']

    def test_repeated_runs_are_byte_identical(self, tmp_path):
        path = write_config(tmp_path, SMALL_CUSTOM)
        run_scenario(path, out_dir=str(tmp_path / 'a'), threads=1)
        run_scenario(path, out_dir=str(tmp_path / 'b'), threads=4)
        assert _read_all(tmp_path / 'a') == _read_all(tmp_path / 'b')

    def test_accepts_dict_config(self, tmp_path):
        values = {'scenario': 'custom', 'model.kind': 'iid_gaussian', 'design.N': 4, 'design.n_train': 400,
                  'design.method': 'exact', 'eval.grid_nodes': 101, 'run.seed': 1}
        result = run_scenario(values, out_dir=str(tmp_path))
        assert result['status'] == 'success'
        assert 'roc_mse.csv' not in result['files']

    def test_config_errors_raise(self, tmp_path):
        with pytest.raises(ConfigError):
            run_scenario({'scenario': 'custom', 'run.seed': 1}, out_dir=str(tmp_path))

    def test_grid_quantizer_needs_perfect_power(self, tmp_path):
        with pytest.raises(ConfigError):
            run_scenario({'scenario': 'ar_detect', 'run.seed': 1, 'design.N': 10, 'design.n_train': 200},
                         out_dir=str(tmp_path))

    def test_stage_failures_name_the_stage(self, tmp_path):
        path = write_config(tmp_path, REDUCIBLE_HMM)
        result = run_scenario(path, out_dir=str(tmp_path / 'out'))
        assert result['status'] == 'error'
        assert result['stage'] == 'model'
        assert 'strictly positive' in result['message']

    def test_runner_library_errors_become_results(self, tmp_path):
        def failing(ctx):
            raise DomainError('point outside the box')

        with patch('pipeline.handler._get_runner', return_value=failing):
            result = run_scenario({'scenario': 'qpsk_oqpsk', 'run.seed': 1}, out_dir=str(tmp_path))
        assert result == {'status': 'error', 'stage': 'qpsk_oqpsk', 'message': 'point outside the box'}

    def test_runner_error_status_is_passed_through(self, tmp_path):
        with patch('pipeline.handler._get_runner', return_value=lambda ctx: {'status': 'error', 'message': 'nope'}):
            result = run_scenario({'scenario': 'qpsk_oqpsk', 'run.seed': 1}, out_dir=str(tmp_path))
        assert result['status'] == 'error'
        assert result['message'] == 'nope'
        assert not os.path.exists(tmp_path / 'report.json')

    def test_csv_artifacts_carry_provenance(self, tmp_path):
        path = write_config(tmp_path, SMALL_CUSTOM)
        result = run_scenario(path, out_dir=str(tmp_path / 'out'))
        echo = (tmp_path / 'out' / 'config.echo').read_text(encoding='utf-8')
        digest = hashlib.sha256(echo.encode('utf-8')).hexdigest()[:16]
        expected = f'# detquant {__version__} scenario=custom run.seed=7 config_sha256={digest}'
        csvs = [name for name in result['files'] if name.endswith('.csv')]
        assert csvs
        for name in csvs:
            first = (tmp_path / 'out' / name).read_text(encoding='utf-8').splitlines()[0]
            assert first == expected, name


# ---------------------------------------------------------------------------
# Moving-average runner
# ---------------------------------------------------------------------------
def _data_lines(path):
    return [line for line in path.read_text(encoding='utf-8').splitlines() if not line.startswith('#')]


class TestMovingAverageRunner:
    def test_point_density_columns(self, tmp_path):
        path = write_config(tmp_path, SMALL_MA)
        result = run_scenario(path, out_dir=str(tmp_path / 'out'))
        assert result['status'] == 'success'
        lines = _data_lines(tmp_path / 'out' / 'field_point_density.csv')
        assert lines[0] == 'x1,p0,zeta_uniform,zeta_mse,zeta_gupta_hero,zeta_proposed'
        body = np.array([line.split(',') for line in lines[1:]], dtype=float)
        assert body.shape == (101, 6)
        # Four equal cells over [-10, 10].
        np.testing.assert_allclose(body[:, 2], 1.0 / 20.0, rtol=0.02)
        dx = body[1, 0] - body[0, 0]
        for column in range(1, 6):
            assert trapezoid(body[:, column], dx=dx) == pytest.approx(1.0, abs=0.05)

    def test_channel_realizations_report_mean_and_stderr(self, tmp_path):
        path = write_config(tmp_path, SMALL_MA + 'channel.realizations = 2\n')
        result = run_scenario(path, out_dir=str(tmp_path / 'out'))
        assert result['status'] == 'success'
        files = set(result['files'])
        for r in (0, 1):
            assert {f'codebook_proposed_r{r}.csv', f'field_point_density_r{r}.csv', f'field_fbar_r{r}.csv'} <= files
        with open(tmp_path / 'out' / 'report.json', encoding='utf-8') as f:
            report = json.load(f)['results']
        assert len(report['realizations']) == 2
        for r, taps in enumerate(report['taps']):
            np.testing.assert_allclose(taps, channel_taps(3, r, 3))
        for entry in report['summary'].values():
            assert 1 <= entry['realizations'] <= 2
            assert 0.0 <= entry['auc']['mean'] <= 1.0
            assert entry['auc']['stderr'] >= 0.0

    def test_channel_taps_are_standard_normal(self):
        taps = np.array([channel_taps(11, r, 3) for r in range(4000)])
        np.testing.assert_allclose(taps.mean(axis=0), 0.0, atol=0.06)
        np.testing.assert_allclose(taps.std(axis=0), 1.0, atol=0.04)
        np.testing.assert_array_equal(channel_taps(11, 5, 3), channel_taps(11, 5, 3))

    def test_summary_statistics(self):
        runs = [{'mse': {'auc': a, 'miss': {'0.1': m}}, 'uniform': {'N': 4, 'skipped': True}}
                for a, m in ((0.7, 0.4), (0.8, 0.2), (0.9, 0.3))]
        summary = summarize_realizations(runs)
        assert set(summary) == {'mse'}
        assert summary['mse']['realizations'] == 3
        assert summary['mse']['auc']['mean'] == pytest.approx(0.8)
        assert summary['mse']['auc']['stderr'] == pytest.approx(0.1 / np.sqrt(3))
        assert summary['mse']['miss']['0.1']['mean'] == pytest.approx(0.3)



# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------
class TestCli:
    def test_version(self, capsys):
        assert main(['version']) == EXIT_OK
        assert capsys.readouterr().out.strip() == __version__

    def test_validate_ok(self, tmp_path, capsys):
        path = write_config(tmp_path, 'scenario = ar_detect\nrun.seed = 1\n')
        assert main(['validate', path]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith('ok: ar_detect')
        assert 'default design.N = 64' in out

    def test_validate_bad_config(self, tmp_path, capsys):
        path = write_config(tmp_path, 'scenario = ar_detect\ndesign.N = -1\n')
        assert main(['validate', path]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert 'Config errors:' in err
        assert 'run.seed' in err

    def test_run_bad_config(self, tmp_path):
        path = write_config(tmp_path, 'scenario = nothing\n')
        assert main(['run', path, '--out', str(tmp_path / 'out')]) == EXIT_CONFIG

    def test_run_runtime_failure(self, tmp_path, capsys):
        path = write_config(tmp_path, REDUCIBLE_HMM)
        assert main(['run', path, '--out', str(tmp_path / 'out')]) == EXIT_RUNTIME
        assert 'ERROR in stage model' in capsys.readouterr().err

    def test_run_success_lists_files(self, tmp_path, capsys):
        path = write_config(tmp_path, SMALL_CUSTOM)
        assert main(['run', path, '--out', str(tmp_path / 'out'), '--threads', '2']) == EXIT_OK
        assert 'report.json' in capsys.readouterr().out
