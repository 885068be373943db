"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``)."""

import dataclasses
import time

import numpy as np

from flowsamp import (Allocation, Formulation, LoadStats, SolverConfig,
                      additive_feasible, brute_force_optimal, build_network,
                      min_required_capacity, socp_feasible, solve, solve_apx,
                      solve_exact, squared_form_feasible, violation_probability)
from flowsamp.cli import compare_algorithms
from flowsamp.instances import (big_scale_free_network, epoch_sweep_scenario,
                                model_driven_scenario, runtime_comparison_network,
                                sensitivity_scenario, two_switch_toy)
from flowsamp.simulator import run_simulation
from flowsamp.trafficgen import Distribution

from conftest import all_allocations, random_instance


def _report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_criterion_1_toy_violation_probabilities():
    net = two_switch_toy()
    det = Allocation({"f1": "S1", "f3": "S1", "f2": "S2", "f4": "S2"})
    aware = Allocation({"f1": "S1", "f2": "S1", "f3": "S2", "f4": "S2"})
    v_det = violation_probability(net, det, "S1")
    v_aware = violation_probability(net, aware, "S1")
    ok = abs(v_det - 0.137) <= 0.005 and abs(v_aware - 0.079) <= 0.005
    _report("criterion-1 toy violation probabilities", ok,
            f"deterministic {v_det:.4f} (target 0.137), "
            f"variance-aware {v_aware:.4f} (target 0.079)")


def test_criterion_2_min_capacity_figure():
    value = min_required_capacity([LoadStats(1000.0, 100.0)] * 20, 0.05)
    ok = abs(value - 20735.6) <= 0.1
    _report("criterion-2 minimum capacity", ok, f"{value:.4f} pps (target 20735.6 +- 0.1)")


def test_criterion_3_violation_rate_calibration():
    t0 = time.perf_counter()
    seeds = range(20)
    fractions = {}
    for dist in Distribution:
        per_seed = []
        for seed in seeds:
            b = sensitivity_scenario(dist, seed)
            rep = run_simulation(b.network, list(b.queries), b.process, b.epoch, seed)
            assert all(s["objective"] == 20 for s in rep.solves)
            per_seed.append(rep.violation_fraction("SW"))
        fractions[dist.value] = float(np.mean(per_seed))
    tol = {d.value: 0.02 if d == Distribution.TRUNC_NORMAL else 0.03
           for d in Distribution}
    ok = all(abs(f - 0.05) <= tol[name] for name, f in fractions.items())
    detail = ", ".join(f"{n}={f:.4f}" for n, f in fractions.items())
    _report("criterion-3 violation-rate calibration", ok,
            f"{detail} ({time.perf_counter() - t0:.1f}s)")


def test_criterion_4_exactness_and_containment():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n_instances = 200
    apx_matches = containment = dominance = equivalence = True
    for _ in range(n_instances):
        net = random_instance(rng, max_switches=3, max_flows=6)
        delta = float(rng.uniform(0.01, 0.5))
        cfg = SolverConfig(Formulation.APX, delta=delta)
        apx = solve_apx(net, cfg)
        exact = solve_exact(net, SolverConfig(Formulation.EXACT, delta=delta))
        oracle = brute_force_optimal(net, cfg)
        apx_matches &= apx.optimal and apx.objective == oracle.objective
        dominance &= exact.optimal and exact.objective >= apx.objective
        for alloc in all_allocations(net):
            cone = socp_feasible(net, alloc, delta)
            if additive_feasible(net, alloc, cfg) and not cone:
                containment = False
            if squared_form_feasible(net, alloc, delta) != cone:
                equivalence = False
    ok = apx_matches and containment and dominance and equivalence
    _report("criterion-4 exactness and containment", ok,
            f"{n_instances} instances: surrogate=oracle {apx_matches}, "
            f"additive-in-cone {containment}, exact>=surrogate {dominance}, "
            f"squared-form<->cone {equivalence} ({time.perf_counter() - t0:.1f}s)")


def test_criterion_5_runtime_gap():
    net = runtime_comparison_network(7)
    apx = solve_apx(net, SolverConfig(Formulation.APX, delta=0.2))
    exact = solve_exact(net, SolverConfig(Formulation.EXACT, delta=0.2,
                                          node_limit=200_000))
    gap_ok = apx.optimal and apx.wall_time < 1.0 and \
        (exact.wall_time >= 100.0 * apx.wall_time or not exact.optimal)
    big = big_scale_free_network(3)
    big_result = solve_apx(big, SolverConfig(Formulation.APX, delta=0.2,
                                             time_limit=4.0))
    big_ok = big_result.wall_time < 5.0
    _report("criterion-5 runtime gap", gap_ok and big_ok,
            f"50-flow: surrogate {apx.wall_time * 1e3:.1f} ms (optimal), cone "
            f"{exact.wall_time:.2f} s (optimal={exact.optimal}); "
            f"{len(big.switches)}-switch/{len(big.flows)}-flow: "
            f"{big_result.wall_time:.2f} s, objective {big_result.objective}")


def test_criterion_6_epoch_length_convergence():
    stats = {}
    for length in (1.0, 5.0, 20.0):
        b = epoch_sweep_scenario(length, 42)
        rep = run_simulation(b.network, list(b.queries), b.process, b.epoch, 42)
        rates = [rep.measured_rate(f.id) for f in b.network.flows
                 if rep.ever_admitted(f.id)]
        rates = [r for r in rates if r is not None]
        q1, q3 = np.percentile(rates, [25, 75])
        stats[length] = (float(np.mean(rates)), float(q3 - q1))
    mean_ok = abs(stats[20.0][0] - 0.1) <= 0.01
    iqrs = [stats[length][1] for length in (1.0, 5.0, 20.0)]
    iqr_ok = iqrs[0] > iqrs[1] > iqrs[2]
    _report("criterion-6 epoch-length convergence", mean_ok and iqr_ok,
            f"mean@20s={stats[20.0][0]:.4f} (target 0.1 +- 0.01), "
            f"IQR 1s/5s/20s = {iqrs[0]:.4f}/{iqrs[1]:.4f}/{iqrs[2]:.4f}")


def test_criterion_7_comparative_ordering():
    t0 = time.perf_counter()
    seeds = [1, 2, 3, 4, 5]
    algos = ["ds", "ds2sigma", "apx", "csamp+100", "csamp+150", "csamp+200"]
    res = compare_algorithms(lambda s: model_driven_scenario(s), algos, seeds)
    adm = {a: res[a]["admitted"] for a in algos}
    ful = {a: res[a]["fully_sampled"] for a in algos}
    admitted_ok = adm["ds"] >= adm["ds2sigma"] >= adm["apx"]
    fully_ok = ful["apx"] >= ful["ds2sigma"] >= ful["ds"]
    best_cs = max(ful["csamp+100"], ful["csamp+150"], ful["csamp+200"])
    cs_ok = ful["apx"] > best_cs
    median = res["apx"]["rate_quartiles"][1]
    median_ok = abs(median - 0.10) <= 0.005
    ok = admitted_ok and fully_ok and cs_ok and median_ok
    _report("criterion-7 comparative ordering", ok,
            f"admitted ds/ds2sigma/apx = {adm['ds']}/{adm['ds2sigma']}/{adm['apx']}, "
            f"fully apx/ds2sigma/ds = {ful['apx']}/{ful['ds2sigma']}/{ful['ds']}, "
            f"best csamp fully = {best_cs}, apx median rate = {median:.4f} "
            f"({time.perf_counter() - t0:.1f}s)")


def test_criterion_8_zero_variance_collapse():
    rng = np.random.default_rng(88)
    ok = True
    for _ in range(20):
        net = random_instance(rng, max_switches=3, max_flows=6)
        flows = [dataclasses.replace(f, rate_var_pps2=0.0) for f in net.flows]
        net = build_network(net.switches, flows)
        objectives = {solve(net, SolverConfig(form, delta=0.2, epsilon_pps=0.0)).objective
                      for form in Formulation}
        ok &= len(objectives) == 1
    _report("criterion-8 zero-variance collapse", ok,
            "all five formulations agree on 20 deterministic instances")
