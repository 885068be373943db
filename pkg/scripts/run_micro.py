#!/usr/bin/env python3
"""Micro benchmarks: solver runtime gap, scaling, rate-distribution
sensitivity, and the epoch-length sweep. Writes tables under out/."""

import sys

from flowsamp import Formulation, SolverConfig, solve_apx, solve_exact
from flowsamp.cli import main as cli_main
from flowsamp.instances import big_scale_free_network, runtime_comparison_network


def runtime_table(seed: int = 7) -> None:
    net = runtime_comparison_network(seed)
    apx = solve_apx(net, SolverConfig(Formulation.APX, delta=0.2))
    exact = solve_exact(net, SolverConfig(Formulation.EXACT, delta=0.2,
                                          node_limit=200_000))
    print(f"50 flows / 11 switches:")
    print(f"  surrogate: objective={apx.objective} optimal={apx.optimal} "
          f"time={apx.wall_time * 1e3:.2f} ms")
    print(f"  cone:      objective={exact.objective} optimal={exact.optimal} "
          f"time={exact.wall_time:.2f} s nodes={exact.nodes_explored}")
    for n_switches, n_flows in ((100, 1000), (500, 5000)):
        net = big_scale_free_network(3, n_switches=n_switches, n_flows=n_flows)
        res = solve_apx(net, SolverConfig(Formulation.APX, delta=0.2, time_limit=30.0))
        print(f"{n_flows} flows / {len(net.switches)} switches: surrogate "
              f"objective={res.objective} optimal={res.optimal} "
              f"time={res.wall_time:.2f} s")


def main() -> int:
    runtime_table()
    print("\nepoch-length sweep:")
    cli_main(["simulate", "--preset", "epoch-sweep", "--seed", "42",
              "--out-dir", "out"])
    print("\nrate-distribution sensitivity:")
    cli_main(["simulate", "--preset", "distribution-sensitivity",
              "--out-dir", "out"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
