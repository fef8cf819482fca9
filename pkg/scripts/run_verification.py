#!/usr/bin/env python3
"""Lemma sweep on the example grids, noiseless round trip and RK4 oracle check.

Exits 2 when any inequality is violated, like ``parasource verify``.
"""

import sys

from parasource.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify", *sys.argv[1:]]))
