"""Scenario configuration: flat dotted-key files validated against the registry.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment. Values are YAML scalars or flow lists (``model.h = [1.0, -0.5]``).
config/keys.json types every known key and config/scenarios.json lists the
required keys and defaults of each scenario.
"""

import json
import os
from dataclasses import dataclass, field

import yaml
from jsonschema import Draft7Validator

from shared.errors import ConfigError

_config_dir = os.path.join(os.path.dirname(__file__), '..', '..', 'config')
with open(os.path.join(_config_dir, 'scenarios.json'), encoding='utf-8') as f:
    SCENARIOS = json.load(f)
with open(os.path.join(_config_dir, 'keys.json'), encoding='utf-8') as f:
    KEYS = json.load(f)


@dataclass
class ScenarioConfig:
    scenario: str
    values: dict
    defaults_applied: list = field(default_factory=list)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values['run.seed']

    def echo(self) -> str:
        """Canonical text form; parses back to the same config."""
        lines = [f'scenario = {self.scenario}']
        lines += [f'{key} = {json.dumps(self.values[key])}' for key in sorted(self.values) if key != 'scenario']
        return '\n'.join(lines) + '\n'


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines, collecting every malformed line."""
    values = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, value = (part.strip() for part in line.partition('='))
        if not key:
            errors.append(f'line {lineno}: missing key')
            continue
        if key in values:
            errors.append(f'line {lineno}: duplicate key {key}')
            continue
        try:
            values[key] = yaml.safe_load(value) if value else None
        except yaml.YAMLError as e:
            errors.append(f'line {lineno}: cannot parse value of {key}: {e.__class__.__name__}')
    if errors:
        raise ConfigError(errors)
    return values


def load_config(path) -> dict:
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError([f'cannot read {path}: {e.strerror}'])
    return parse_config_text(text)


def _schema_for(scenario: str) -> dict:
    entry = SCENARIOS[scenario]
    return {
        'type': 'object',
        'properties': KEYS,
        'required': ['scenario'] + entry['required'],
        'additionalProperties': False,
    }


def _describe(error) -> str:
    if error.validator == 'additionalProperties':
        return f'unknown key: {error.message}'
    if error.path:
        return f'{error.path[0]}: {error.message}'
    return error.message


def _cross_checks(values: dict) -> list:
    errors = []
    n_train, N = values.get('design.n_train'), values.get('design.N')
    if isinstance(n_train, int) and isinstance(N, int) and n_train < 10 * N:
        errors.append(f'design.n_train: {n_train} is less than 10 x design.N = {10 * N}')
    taps, memory = values.get('model.h'), values.get('model.L')
    if isinstance(taps, list) and isinstance(memory, int) and memory != len(taps) - 1:
        errors.append(f'model.L: {memory} does not match {len(taps)} taps in model.h')
    if values.get('model.kind') == 'hmm':
        for key in ('model.M', 'model.sigma', 'model.centers', 'model.transitions0', 'model.transitions1'):
            if key not in values:
                errors.append(f"'{key}' is a required property for model.kind = hmm")
    if values.get('model.kind') == 'ar1' and 'model.a' not in values:
        errors.append("'model.a' is a required property for model.kind = ar1")
    if values.get('model.kind') == 'ma' and 'model.h' not in values:
        errors.append("'model.h' is a required property for model.kind = ma")
    return errors


def validate_values(values: dict) -> ScenarioConfig:
    """Apply scenario defaults and validate; raises ConfigError listing every violation."""
    scenario = values.get('scenario')
    if scenario not in SCENARIOS:
        raise ConfigError([f'scenario: must be one of {sorted(SCENARIOS)}, got {scenario!r}'])
    merged = dict(values)
    applied = []
    for key, default in SCENARIOS[scenario]['defaults'].items():
        if key not in merged:
            merged[key] = default
            applied.append(key)
    validator = Draft7Validator(_schema_for(scenario))
    errors = [_describe(e) for e in sorted(validator.iter_errors(merged), key=lambda e: list(e.path))]
    errors += _cross_checks(merged)
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(scenario, merged, sorted(applied))


def validate_config(path) -> dict:
    """Validate a config file without running it.

    Returns:
        dict with 'status': 'ok', the scenario, the merged config and the
        defaults that were applied.
    """
    config = validate_values(load_config(path))
    return {
        'status': 'ok',
        'scenario': config.scenario,
        'config': config.values,
        'defaults_applied': {key: config.values[key] for key in config.defaults_applied},
    }
