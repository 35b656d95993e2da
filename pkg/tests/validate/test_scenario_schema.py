"""JSON schema validation for the scenario registry.

Validates that config/scenarios.json and config/keys.json conform to the
expected shapes and that every default satisfies its key schema.
"""

import re

import jsonschema
import pytest


# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------
SCENARIOS_SCHEMA = {
    'type': 'object',
    'minProperties': 1,
    'patternProperties': {
        '^[a-z][a-z0-9_]+$': {
            'type': 'object',
            'required': ['name', 'description', 'required', 'defaults'],
            'properties': {
                'name': {'type': 'string', 'minLength': 1},
                'description': {'type': 'string', 'minLength': 1},
                'required': {
                    'type': 'array',
                    'items': {'type': 'string'},
                    'uniqueItems': True,
                },
                'defaults': {'type': 'object'},
            },
            'additionalProperties': False,
        }
    },
    'additionalProperties': False,
}

KEYS_SCHEMA = {
    'type': 'object',
    'minProperties': 1,
    'patternProperties': {
        '^(scenario|(model|design|eval|run)\\.[A-Za-z0-9_]+)$': {
            'type': 'object',
            'required': ['type', 'description'],
            'properties': {
                'type': {'enum': ['string', 'number', 'integer', 'boolean', 'array']},
                'description': {'type': 'string', 'minLength': 1},
            },
        }
    },
    'additionalProperties': False,
}


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------
class TestScenariosSchema:
    def test_scenarios_valid(self, scenario_registry):
        jsonschema.validate(scenario_registry, SCENARIOS_SCHEMA)

    def test_has_four_scenarios(self, scenario_registry):
        assert set(scenario_registry) == {'qpsk_oqpsk', 'ar_detect', 'ma_detect', 'custom'}

    def test_every_scenario_requires_a_seed(self, scenario_registry):
        for scenario_id, entry in scenario_registry.items():
            assert 'run.seed' in entry['required'], f'{scenario_id} does not require run.seed'

    def test_no_default_for_required_keys(self, scenario_registry):
        for scenario_id, entry in scenario_registry.items():
            overlap = set(entry['required']) & set(entry['defaults'])
            assert not overlap, f'{scenario_id} has defaults for required keys {overlap}'


class TestKeysSchema:
    def test_keys_valid(self, key_registry):
        jsonschema.validate(key_registry, KEYS_SCHEMA)

    def test_every_key_schema_is_valid_draft7(self, key_registry):
        for key, schema in key_registry.items():
            jsonschema.Draft7Validator.check_schema(schema)

    @pytest.mark.parametrize('prefix', ['model.', 'design.', 'eval.', 'run.'])
    def test_each_section_has_keys(self, key_registry, prefix):
        assert any(k.startswith(prefix) for k in key_registry)

    def test_keys_are_dotted_lowercase_sections(self, key_registry):
        for key in key_registry:
            assert key == 'scenario' or re.match(r'^[a-z]+\.[A-Za-z0-9_]+$', key), key


class TestDefaultsMatchKeys:
    def test_defaults_use_known_keys(self, scenario_registry, key_registry):
        for scenario_id, entry in scenario_registry.items():
            for key in list(entry['defaults']) + entry['required']:
                assert key in key_registry, f'{scenario_id} uses unknown key {key}'

    def test_defaults_satisfy_key_schemas(self, scenario_registry, key_registry):
        for scenario_id, entry in scenario_registry.items():
            for key, value in entry['defaults'].items():
                jsonschema.validate(value, key_registry[key])
