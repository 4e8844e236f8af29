"""Timestamped progress messages on stderr (silent unless verbose)."""

import sys
import time

from .config import get_config


def log(m):
    if not get_config()['runtime']['verbose']:
        return
    print(f'[{time.strftime("%H:%M:%S")}] {m}', file=sys.stderr, flush=True)
