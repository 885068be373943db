import dataclasses
import math

import numpy as np
import pytest

from flowsamp import (EpochConfig, EstimatorMode, Formulation, FlowSpec, RateProcess,
                      SamplingQuery, SolverConfig, SwitchSpec, build_network,
                      measure_metrics, run_simulation, write_flow_epochs_csv,
                      write_summary_json)


def constant_process(rates_by_flow, n_buckets, bucket=0.1):
    return RateProcess(bucket, n_buckets,
                       {fid: np.full(n_buckets, rate)
                        for fid, rate in rates_by_flow.items()})


def single_flow_net(capacity=1e9, alpha=0.1, mean=1000.0, var=0.0):
    return build_network([SwitchSpec("s", capacity)],
                         [FlowSpec("f", "a", "b", ("s",), alpha, mean, var)])


def test_single_flow_binomial_sampling():
    # 1000 pps over one 5 s epoch offers exactly 5000 packets; at rate 0.1
    # roughly 500 are sampled and none dropped
    net = single_flow_net()
    process = constant_process({"f": 1000.0}, 50)
    config = EpochConfig(epoch_length=5.0, estimator_mode=EstimatorMode.DECLARED)
    report = run_simulation(net, [SamplingQuery("f", 0.0, 5.0, 0.1)], process, config, 0)
    rec = report.records[0]
    assert rec.offered == 5000
    assert rec.dropped == 0
    assert abs(rec.forwarded - 500) <= 45
    assert report.measured_rate("f") == pytest.approx(0.1, abs=0.01)


def test_zero_queries():
    net = single_flow_net()
    report = run_simulation(net, [], constant_process({"f": 10.0}, 10),
                            EpochConfig(), 0)
    assert not report.records
    assert report.n_epochs == 0
    summary = measure_metrics(report)
    assert summary.admitted_flows == 0
    assert summary.fully_sampled_flows == 0
    assert summary.violation_fraction == 0.0


def test_conservation_and_bucket_caps():
    rng = np.random.default_rng(4)
    net = build_network(
        [SwitchSpec("s", 200.0)],
        [FlowSpec(f"f{i}", "a", "b", ("s",), 1.0, 120.0, 0.0) for i in range(3)])
    process = RateProcess(0.1, 30, {f"f{i}": rng.uniform(50, 200, 30) for i in range(3)})
    config = EpochConfig(epoch_length=1.0, solver=SolverConfig(Formulation.DS),
                         estimator_mode=EstimatorMode.DECLARED)
    queries = [SamplingQuery(f"f{i}", 0.0, 3.0, 1.0) for i in range(3)]
    report = run_simulation(net, queries, process, config, 1)
    for r in report.records:
        assert r.offered >= r.sampled
        assert r.sampled == r.forwarded + r.dropped
        assert r.dropped >= 0
    cap = math.floor(200.0 * 0.1)
    loads = report.switch_loads[0]
    flags = report.switch_violations[0]
    assert ((loads > cap) == flags).all()


def test_half_capacity_halves_measured_rate():
    # declared 500 pps fits the 500 pps budget, but the flow really sends
    # 1000 pps at alpha 1, so every bucket drops half its sampled packets
    net = single_flow_net(capacity=500.0, alpha=1.0, mean=500.0)
    process = constant_process({"f": 1000.0}, 50)
    config = EpochConfig(epoch_length=5.0, solver=SolverConfig(Formulation.DS),
                         estimator_mode=EstimatorMode.DECLARED)
    report = run_simulation(net, [SamplingQuery("f", 0.0, 5.0, 1.0)], process, config, 0)
    assert report.measured_rate("f") == pytest.approx(0.5, abs=1e-6)
    assert not report.fully_sampled("f")
    assert report.violation_fraction("s") == 1.0


def test_fully_sampled_requires_admission_in_every_active_epoch():
    # epoch 1 brings a cheaper competitor that evicts the first flow
    switches = [SwitchSpec("s", 100.0)]
    flows = [FlowSpec("big", "a", "b", ("s",), 1.0, 90.0, 0.0),
             FlowSpec("small", "a", "b", ("s",), 1.0, 20.0, 0.0)]
    net = build_network(switches, flows)
    process = constant_process({"big": 90.0, "small": 20.0}, 20)
    config = EpochConfig(
        epoch_length=1.0, solver=SolverConfig(Formulation.DS),
        estimator_mode=EstimatorMode.DECLARED, fully_sampled_tolerance=0.9)
    queries = [SamplingQuery("big", 0.0, 2.0, 1.0),
               SamplingQuery("small", 1.0, 1.0, 1.0)]
    report = run_simulation(net, queries, process, config, 0)
    by_epoch = {(r.flow_id, r.epoch): r for r in report.records}
    assert by_epoch[("big", 0)].assigned_switch == "s"
    # epoch 1: 90 + 20 > 100, the solver keeps the pair that maximizes count
    assert by_epoch[("small", 1)].assigned_switch == "s"
    assert by_epoch[("big", 1)].assigned_switch is None
    assert not report.fully_sampled("big")
    assert report.fully_sampled("small")


def test_mid_epoch_query_waits_for_next_boundary():
    net = single_flow_net(alpha=1.0)
    process = constant_process({"f": 100.0}, 100)
    config = EpochConfig(epoch_length=5.0, solver=SolverConfig(Formulation.DS),
                         estimator_mode=EstimatorMode.DECLARED)
    report = run_simulation(net, [SamplingQuery("f", 2.5, 5.0, 1.0)], process, config, 0)
    epochs = sorted(r.epoch for r in report.records)
    assert epochs == [1]
    assert report.active_epochs["f"] == [1]


def test_windowed_estimator_reacts_to_observed_rates():
    # declared mean 100 but the flow actually sends 300; capacity only
    # covers the declared rate, so epoch 1 drops it once history exists
    net = build_network([SwitchSpec("s", 150.0)],
                        [FlowSpec("f", "a", "b", ("s",), 1.0, 100.0, 0.0)])
    process = constant_process({"f": 300.0}, 40)
    queries = [SamplingQuery("f", 0.0, 4.0, 1.0)]
    windowed = EpochConfig(epoch_length=1.0, solver=SolverConfig(Formulation.DS),
                           estimator_mode=EstimatorMode.WINDOWED)
    report = run_simulation(net, queries, process, windowed, 0)
    assigned = {r.epoch: r.assigned_switch for r in report.records}
    assert assigned[0] == "s"          # cold start trusts the declaration
    assert assigned[1] is None         # history says 300 > 150
    declared = dataclasses.replace(windowed, estimator_mode=EstimatorMode.DECLARED)
    report2 = run_simulation(net, queries, process, declared, 0)
    assert all(r.assigned_switch == "s" for r in report2.records)


def test_unknown_query_flow_rejected():
    net = single_flow_net()
    with pytest.raises(ValueError, match="unknown flow"):
        run_simulation(net, [SamplingQuery("ghost", 0.0, 1.0, 0.5)],
                       constant_process({"f": 1.0}, 10), EpochConfig(), 0)


def test_short_rate_process_rejected():
    net = single_flow_net()
    with pytest.raises(ValueError, match="horizon"):
        run_simulation(net, [SamplingQuery("f", 0.0, 10.0, 0.5)],
                       constant_process({"f": 1.0}, 10), EpochConfig(), 0)


def test_query_validation():
    with pytest.raises(ValueError):
        SamplingQuery("f", 0.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        SamplingQuery("f", 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        SamplingQuery("f", 0.0, 1.0, 1.5)


def test_epoch_config_validation():
    with pytest.raises(ValueError):
        EpochConfig(epoch_length=0.55, bucket=0.1)
    with pytest.raises(ValueError):
        EpochConfig(fully_sampled_tolerance=1.0)
    with pytest.raises(ValueError):
        EpochConfig(capacity_period="minute")


def test_per_second_capacity_period():
    # budget floor(B) per second: 55 sampled packets/second against a
    # 50 pps budget forwards 50 each second (admitted on its declared 45)
    net = single_flow_net(capacity=50.0, alpha=1.0, mean=45.0)
    process = constant_process({"f": 55.0}, 20)
    config = EpochConfig(epoch_length=2.0, solver=SolverConfig(Formulation.DS),
                         estimator_mode=EstimatorMode.DECLARED,
                         capacity_period="second")
    report = run_simulation(net, [SamplingQuery("f", 0.0, 2.0, 1.0)], process, config, 0)
    total_fwd = sum(r.forwarded for r in report.records)
    assert total_fwd == 100
    assert sum(r.offered for r in report.records) == 110


def test_simulation_deterministic(tmp_path):
    net = build_network(
        [SwitchSpec("s", 30.0)],
        [FlowSpec(f"f{i}", "a", "b", ("s",), 0.2, 100.0, 400.0) for i in range(4)])
    rng = np.random.default_rng(2)
    process = RateProcess(0.1, 20, {f"f{i}": rng.uniform(50, 150, 20) for i in range(4)})
    queries = [SamplingQuery(f"f{i}", 0.0, 2.0, 0.2) for i in range(4)]
    config = EpochConfig(epoch_length=1.0)
    paths = []
    for run in range(2):
        report = run_simulation(net, queries, process, config, 77)
        csv_path = tmp_path / f"run{run}.csv"
        json_path = tmp_path / f"run{run}.json"
        write_flow_epochs_csv(report, str(csv_path))
        write_summary_json(report, str(json_path))
        paths.append((csv_path, json_path))
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    assert paths[0][1].read_bytes() == paths[1][1].read_bytes()
    assert paths[0][0].read_text().startswith("#flow-epochs v1\n")


def test_metrics_no_pressure_fully_sampled_equals_admitted():
    net = build_network(
        [SwitchSpec("s", 1e6)],
        [FlowSpec(f"f{i}", "a", "b", ("s",), 1.0, 200.0, 0.0) for i in range(5)])
    process = constant_process({f"f{i}": 200.0 for i in range(5)}, 20)
    config = EpochConfig(epoch_length=2.0, solver=SolverConfig(Formulation.DS),
                         estimator_mode=EstimatorMode.DECLARED)
    queries = [SamplingQuery(f"f{i}", 0.0, 2.0, 1.0) for i in range(5)]
    summary = measure_metrics(run_simulation(net, queries, process, config, 0))
    assert summary.admitted_flows == 5
    assert summary.fully_sampled_flows == 5
    assert summary.rate_quartiles == (1.0, 1.0, 1.0)
    assert summary.violation_fraction == 0.0
