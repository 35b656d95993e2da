"""Per-run state shared by the scenario runners: config, output directory and file manifest."""

import hashlib
import json
import logging
import os
from contextlib import contextmanager

from shared import __version__
from shared.errors import ConfigError, DetQuantError, StageError
from shared.evaluation import write_roc_csv
from shared.fields import write_columns_csv, write_field_csv
from shared.quantizers import write_codebook

logger = logging.getLogger(__name__)


def provenance_line(config) -> str:
    """One-line origin stamp written as the leading comment of every CSV."""
    digest = hashlib.sha256(config.echo().encode('utf-8')).hexdigest()[:16]
    return f'detquant {__version__} scenario={config.scenario} run.seed={config.seed} config_sha256={digest}'


class RunContext:
    def __init__(self, config, out_dir: str, threads: int = None):
        self.config = config
        self.out_dir = out_dir
        self.threads = threads
        self.files = []
        self.provenance = provenance_line(config)

    @property
    def seed(self) -> int:
        return self.config.seed

    @contextmanager
    def stage(self, name: str):
        """Tag any failure inside the block with the stage name."""
        logger.info('stage %s', name)
        try:
            yield
        except (ConfigError, StageError):
            raise
        except (DetQuantError, ValueError, ArithmeticError, MemoryError) as e:
            raise StageError(name, e) from e

    def _path(self, filename: str) -> str:
        self.files.append(filename)
        return os.path.join(self.out_dir, filename)

    def write_codebook(self, q, suffix: str = ''):
        write_codebook(self._path(f'codebook_{q.label}{suffix}.csv'), q, comments=[self.provenance])

    def write_field(self, name: str, grid, values, stderr=None):
        write_field_csv(self._path(f'field_{name}.csv'), grid, values, stderr, comments=[self.provenance])

    def write_columns(self, name: str, grid, columns: dict):
        write_columns_csv(self._path(f'field_{name}.csv'), grid, columns, comments=[self.provenance])

    def write_roc(self, curve, suffix: str = ''):
        write_roc_csv(self._path(f'roc_{curve.label}{suffix}.csv'), curve, comments=[self.provenance])

    def write_text(self, filename: str, text: str):
        with open(self._path(filename), 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)

    def write_json(self, filename: str, payload: dict):
        self.write_text(filename, json.dumps(payload, indent=2, sort_keys=True) + '\n')
