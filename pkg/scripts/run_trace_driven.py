#!/usr/bin/env python3
"""Trace-driven comparison. Point it at a trace produced by make_trace.py:

    python scripts/run_trace_driven.py --trace data/backbone.trace

or edit configs/trace_driven.json and run it without flags.
"""

import sys

from flowsamp.cli import main as cli_main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--trace" not in args:
        args = ["--config", "configs/trace_driven.json"] + args
    sys.exit(cli_main(["compare", "--preset", "trace-driven"] + args))
