"""Scenario dispatch: validate a config, run its runner, write the report.

Each scenario id in config/scenarios.json maps to a runner module
pipeline/runners/<scenario>.py exposing ``execute(ctx) -> dict``.
"""

import logging
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import __version__
from shared.config import ScenarioConfig, load_config, validate_values
from shared.errors import ConfigError, DetQuantError, StageError
from pipeline.context import RunContext

logger = logging.getLogger(__name__)


def run_scenario(config, out_dir: str = None, threads: int = None) -> dict:
    """Run one scenario end to end.

    Args:
        config: A ScenarioConfig, a dict of dotted keys, or a config file path.
        out_dir: Output directory; defaults to the config's run.output_dir.
        threads: Worker cap; never changes results.

    Returns:
        dict with 'status' ('success' or 'error'), 'message', and on success
        the emitted 'files'; errors carry the failing 'stage'.

    Raises:
        ConfigError: The config does not validate.
    """
    if isinstance(config, (str, os.PathLike)):
        config = load_config(config)
    if not isinstance(config, ScenarioConfig):
        config = validate_values(config)
    out_dir = out_dir or config['run.output_dir']
    os.makedirs(out_dir, exist_ok=True)
    ctx = RunContext(config, out_dir, threads)
    logger.info('running %s into %s', config.scenario, out_dir)

    try:
        runner = _get_runner(config.scenario)
        result = runner(ctx)
    except StageError as e:
        logger.error('stage %s failed: %s', e.stage, e.cause)
        return {'status': 'error', 'stage': e.stage, 'message': str(e.cause)}
    except ConfigError:
        raise
    except DetQuantError as e:
        return {'status': 'error', 'stage': config.scenario, 'message': str(e)}
    if result.get('status') != 'success':
        return {'status': 'error', 'stage': config.scenario, 'message': result.get('message', 'runner failed')}

    ctx.write_text('config.echo', config.echo())
    manifest = sorted(ctx.files + ['report.json'])
    ctx.write_json('report.json', {
        'version': __version__,
        'scenario': config.scenario,
        'config': config.values,
        'files': manifest,
        'results': result,
    })
    return {
        'status': 'success',
        'message': result.get('message', f'{config.scenario} finished'),
        'files': manifest,
        'out_dir': out_dir,
    }


def _get_runner(scenario):
    """Dynamically import and return the runner for a scenario."""
    mod = __import__(f'pipeline.runners.{scenario}', fromlist=['execute'])
    return mod.execute
