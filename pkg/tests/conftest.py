"""Shared fixtures and helpers for DetQuant tests."""

import json
import os
import sys

import numpy as np
import pytest

# ---------------------------------------------------------------------------
# Path setup: make detquant/ importable as top-level packages
# ---------------------------------------------------------------------------
_repo_root = os.path.join(os.path.dirname(__file__), '..')
_source_dir = os.path.join(_repo_root, 'detquant')
sys.path.insert(0, _source_dir)

CONFIG_DIR = os.path.join(_repo_root, 'config')
EXAMPLES_DIR = os.path.join(CONFIG_DIR, 'examples')


# ---------------------------------------------------------------------------
# Fixtures - the real scenario registry
# ---------------------------------------------------------------------------
@pytest.fixture
def scenario_registry():
    """Load the real config/scenarios.json as a dict."""
    with open(os.path.join(CONFIG_DIR, 'scenarios.json'), encoding='utf-8') as f:
        return json.load(f)


@pytest.fixture
def key_registry():
    """Load the real config/keys.json as a dict."""
    with open(os.path.join(CONFIG_DIR, 'keys.json'), encoding='utf-8') as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# Fixtures - small models
# ---------------------------------------------------------------------------
@pytest.fixture
def two_state_hmm():
    """Two-state scalar chain with distinct H0/H1 dynamics and a shared stationary law."""
    from shared.processes import FiniteStateHmm

    transitions = np.array([
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.8, 0.2], [0.2, 0.8]],
    ])
    return FiniteStateHmm(transitions, [[-1.0], [1.0]], 0.7, 3.0, label='two_state')


@pytest.fixture
def three_state_hmm():
    """Three-state planar chain; H1 forbids one transition."""
    from shared.processes import FiniteStateHmm

    h0 = np.full((3, 3), 1.0 / 3.0)
    h1 = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    centers = [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    return FiniteStateHmm(np.stack([h0, h1]), centers, 0.8, 2.5, label='three_state')


@pytest.fixture
def gaussian_pair():
    from shared.processes import gaussian_iid

    return gaussian_iid(0.0, 1.0, 1.0, 1.0)


@pytest.fixture
def identical_pair():
    from shared.processes import gaussian_iid

    return gaussian_iid(0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def ar_model():
    from shared.processes import ar_detection

    return ar_detection(0.8, 1.0, dimension=2, circular=True)


@pytest.fixture
def ma_model():
    from shared.processes import ma_detection

    return ma_detection()


def write_config(tmp_path, text, name='scenario.conf'):
    """Write config text to a temp file and return its path."""
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)
