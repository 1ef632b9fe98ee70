# cltpc/app.py
from __future__ import annotations

import sys

from .cli import main


def run(argv=None):
    sys.exit(main(argv))
