import itertools

import pytest

from flowsamp import (Allocation, Formulation, FlowSpec, SwitchSpec,
                      additive_feasible, build_network, socp_feasible)
from flowsamp.instances import two_switch_toy


@pytest.fixture
def toy_network():
    return two_switch_toy()


def random_instance(rng, max_switches=3, max_flows=6):
    """Small random instance with a mix of tight and slack capacities."""
    ns = int(rng.integers(1, max_switches + 1))
    nf = int(rng.integers(1, max_flows + 1))
    switches = [SwitchSpec(f"s{i}", float(rng.uniform(1, 50))) for i in range(ns)]
    sids = [s.id for s in switches]
    flows = []
    for j in range(nf):
        k = int(rng.integers(1, ns + 1))
        path = tuple(sids[i] for i in rng.choice(ns, size=k, replace=False))
        flows.append(FlowSpec(f"f{j}", "x", "y", path,
                              float(rng.uniform(0.05, 1.0)),
                              float(rng.uniform(0, 100)),
                              float(rng.uniform(0, 900))))
    return build_network(switches, flows)


def enumerate_best_objective(network, config):
    """Independent oracle: plain product enumeration with a from-scratch
    feasibility check per candidate, no pruning."""
    choices = [[None] + sorted(f.path) for f in network.flows]
    best = -1
    for combo in itertools.product(*choices):
        assign = {f.id: s for f, s in zip(network.flows, combo) if s is not None}
        alloc = Allocation(assign)
        if config.formulation == Formulation.EXACT:
            ok = socp_feasible(network, alloc, config.delta)
        else:
            ok = additive_feasible(network, alloc, config)
        if ok and len(assign) > best:
            best = len(assign)
    return best


def all_allocations(network):
    choices = [[None] + sorted(f.path) for f in network.flows]
    for combo in itertools.product(*choices):
        yield Allocation({f.id: s for f, s in zip(network.flows, combo) if s is not None})
