#!/usr/bin/env python3
"""Model-driven comparison of all sampling algorithms (checked-in preset)."""

import sys

from flowsamp.cli import main as cli_main

if __name__ == "__main__":
    sys.exit(cli_main(["compare", "--config", "configs/model_driven.json"]
                      + sys.argv[1:]))
