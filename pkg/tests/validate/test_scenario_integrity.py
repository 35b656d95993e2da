"""Cross-file integrity checks for the scenario registry.

Validates that every scenario maps to a runner module, that the shipped
example configs validate, and that defaults pass the cross-key checks.
"""

import glob
import os

import pytest

from conftest import EXAMPLES_DIR
from shared.config import validate_config, validate_values

RUNNERS_DIR = os.path.join(os.path.dirname(__file__), '..', '..', 'detquant', 'pipeline', 'runners')
EXAMPLE_CONFIGS = sorted(glob.glob(os.path.join(EXAMPLES_DIR, '*.conf')))


class TestScenarioIdsMapToRunners:
    def test_scenario_ids_map_to_runner_files(self, scenario_registry):
        for scenario_id in scenario_registry:
            expected_file = os.path.join(RUNNERS_DIR, f'{scenario_id}.py')
            assert os.path.exists(expected_file), \
                f"Scenario '{scenario_id}' has no runner at {expected_file}"

    def test_runners_expose_execute(self, scenario_registry):
        for scenario_id in scenario_registry:
            mod = __import__(f'pipeline.runners.{scenario_id}', fromlist=['execute'])
            assert callable(mod.execute), f"Runner '{scenario_id}' has no execute()"

    def test_no_orphan_runners(self, scenario_registry):
        runners = {os.path.splitext(os.path.basename(p))[0]
                   for p in glob.glob(os.path.join(RUNNERS_DIR, '*.py'))} - {'__init__'}
        assert runners == set(scenario_registry)


class TestExampleConfigs:
    def test_examples_exist(self):
        assert len(EXAMPLE_CONFIGS) >= 4

    @pytest.mark.parametrize('path', EXAMPLE_CONFIGS, ids=os.path.basename)
    def test_example_validates(self, path):
        assert validate_config(path)['status'] == 'ok'

    def test_every_scenario_has_an_example(self, scenario_registry):
        covered = {validate_config(path)['scenario'] for path in EXAMPLE_CONFIGS}
        assert covered == set(scenario_registry)


class TestDefaultsPassCrossChecks:
    def test_fixed_scenarios_validate_with_only_a_seed(self, scenario_registry):
        for scenario_id, entry in scenario_registry.items():
            if entry['required'] == ['run.seed']:
                config = validate_values({'scenario': scenario_id, 'run.seed': 0})
                assert config.scenario == scenario_id
