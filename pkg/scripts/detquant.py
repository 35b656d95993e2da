#!/usr/bin/env python3
"""Run the detquant CLI from a source checkout.

Usage:
    python scripts/detquant.py run config/examples/ar_detect.conf
    python scripts/detquant.py validate config/examples/qpsk_oqpsk.conf
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'detquant'))

from pipeline.cli import main

if __name__ == '__main__':
    sys.exit(main())
