"""Epoch-driven discrete-time simulation of coordinated flow sampling.

Each epoch the control loop batches the queries that have arrived by the
epoch boundary, estimates per-flow rate moments, solves for a sampling
schedule, and then replays traffic bucket by bucket: admitted flows offer
packets (fractional packets-per-bucket carry over so long-run counts are
exact), each offered packet is sampled independently with the flow's
target probability, and each switch forwards at most its per-bucket budget
of sampled packets, dropping the excess and flagging a capacity violation.

Queries arriving mid-epoch wait for the next boundary. Drops on an
overloaded switch are split across its flows proportionally to their
sampled counts (largest-remainder rounding, ties to the earlier flow).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import Network, build_network
from .optimizer import SolverConfig, solve
from .stats import RateHistory, estimate_flow_stats
from .trafficgen import RateProcess


class EstimatorMode(str, Enum):
    WINDOWED = "windowed"   # sliding-window moments of past per-epoch rates
    DECLARED = "declared"   # pass through the declared flow moments


@dataclass(frozen=True)
class SamplingQuery:
    """A request to sample one flow at a rate over a time span."""

    flow_id: str
    start: float
    duration: float
    sampling_rate: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"query for {self.flow_id!r}: duration must be positive")
        if not 0.0 < self.sampling_rate <= 1.0:
            raise ValueError(f"query for {self.flow_id!r}: sampling_rate must be in (0, 1]")


@dataclass(frozen=True)
class EpochConfig:
    epoch_length: float = 5.0
    bucket: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    fully_sampled_tolerance: float = 0.05
    estimator_mode: EstimatorMode = EstimatorMode.WINDOWED
    estimator_window: int = 5
    capacity_period: str = "bucket"  # or "second"

    def __post_init__(self):
        ratio = self.epoch_length / self.bucket
        if abs(ratio - round(ratio)) > 1e-9 or self.epoch_length <= 0:
            raise ValueError("epoch_length must be a whole number of buckets")
        if not 0.0 <= self.fully_sampled_tolerance < 1.0:
            raise ValueError("fully_sampled_tolerance must be in [0, 1)")
        if self.estimator_window < 1:
            raise ValueError("estimator_window must be >= 1")
        if self.capacity_period not in ("bucket", "second"):
            raise ValueError("capacity_period must be 'bucket' or 'second'")
        if self.capacity_period == "second":
            per_sec = 1.0 / self.bucket
            if abs(per_sec - round(per_sec)) > 1e-9:
                raise ValueError("per-second enforcement needs a bucket dividing 1 s")

    @property
    def buckets_per_epoch(self) -> int:
        return int(round(self.epoch_length / self.bucket))


@dataclass(frozen=True)
class FlowEpochRecord:
    epoch: int
    flow_id: str
    assigned_switch: str | None
    offered: int
    sampled: int
    forwarded: int
    dropped: int


@dataclass
class SimReport:
    """Raw per-epoch outcomes plus per-switch per-bucket load/violation."""

    records: list[FlowEpochRecord]
    switch_ids: list[str]
    switch_loads: np.ndarray        # (n_switches, n_buckets) sampled packets
    switch_violations: np.ndarray   # (n_switches, n_buckets) bool
    targets: dict[str, float]       # flow id -> target sampling rate
    active_epochs: dict[str, list[int]]
    solves: list[dict]
    n_epochs: int
    epoch_length: float
    bucket: float
    fully_sampled_tolerance: float

    def totals(self, flow_id: str) -> tuple[int, int, int, int]:
        off = smp = fwd = drp = 0
        for r in self.records:
            if r.flow_id == flow_id:
                off += r.offered
                smp += r.sampled
                fwd += r.forwarded
                drp += r.dropped
        return off, smp, fwd, drp

    def measured_rate(self, flow_id: str) -> float | None:
        off, _, fwd, _ = self.totals(flow_id)
        return fwd / off if off > 0 else None

    def ever_admitted(self, flow_id: str) -> bool:
        return any(r.flow_id == flow_id and r.assigned_switch is not None
                   for r in self.records)

    def fully_sampled(self, flow_id: str) -> bool:
        """Admitted in every epoch its query was active and measured at the
        target rate within the configured tolerance."""
        epochs = self.active_epochs.get(flow_id, [])
        if not epochs:
            return False
        assigned = {r.epoch for r in self.records
                    if r.flow_id == flow_id and r.assigned_switch is not None}
        if not all(e in assigned for e in epochs):
            return False
        rate = self.measured_rate(flow_id)
        if rate is None:
            return False
        return rate >= self.targets[flow_id] * (1.0 - self.fully_sampled_tolerance)

    def violation_fraction(self, switch_id: str | None = None) -> float:
        if switch_id is None:
            return float(self.switch_violations.mean()) if self.switch_violations.size else 0.0
        idx = self.switch_ids.index(switch_id)
        row = self.switch_violations[idx]
        return float(row.mean()) if row.size else 0.0


def run_simulation(network: Network, queries: list[SamplingQuery], rates: RateProcess,
                   config: EpochConfig, seed: int) -> SimReport:
    for q in queries:
        if not network.has_flow(q.flow_id):
            raise ValueError(f"query references unknown flow {q.flow_id!r}")
    bpe = config.buckets_per_epoch
    span = max((q.start + q.duration for q in queries), default=0.0)
    n_epochs = int(math.ceil(span / config.epoch_length - 1e-9)) if queries else 0
    n_buckets = n_epochs * bpe
    if n_buckets > rates.n_buckets:
        raise ValueError(
            f"rate process horizon {rates.horizon:g} s is shorter than the "
            f"{n_epochs} whole epochs ({n_epochs * config.epoch_length:g} s) "
            "spanned by the queries")
    if abs(rates.bucket - config.bucket) > 1e-12:
        raise ValueError("rate process bucket differs from simulation bucket")

    flows = network.flows
    nf = len(flows)
    flow_ids = [f.id for f in flows]
    fidx = {fid: i for i, fid in enumerate(flow_ids)}
    switch_ids = [s.id for s in network.switches]
    ns = len(switch_ids)
    sidx = {sid: i for i, sid in enumerate(switch_ids)}
    rate_mat = np.stack([rates.series(fid)[:n_buckets] for fid in flow_ids]) \
        if nf and n_buckets else np.zeros((nf, n_buckets))

    cap_bucket = np.array([math.floor(s.capacity_pps * config.bucket) for s in network.switches],
                          dtype=np.int64)
    per_second = int(round(1.0 / config.bucket)) if config.capacity_period == "second" else 0
    cap_second = np.array([math.floor(s.capacity_pps) for s in network.switches], dtype=np.int64)

    rng = np.random.default_rng(seed)
    acc = np.zeros(nf)
    history: dict[str, RateHistory] = {fid: RateHistory() for fid in flow_ids}
    records: list[FlowEpochRecord] = []
    loads = np.zeros((ns, n_buckets), dtype=np.int64)
    violations = np.zeros((ns, n_buckets), dtype=bool)
    targets: dict[str, float] = {}
    active_epochs: dict[str, list[int]] = {}
    solves: list[dict] = []
    budget = cap_second.copy()

    for e in range(n_epochs):
        t_e = e * config.epoch_length
        alpha = np.zeros(nf)
        for q in queries:
            if q.start <= t_e + 1e-9 and t_e < q.start + q.duration - 1e-9:
                i = fidx[q.flow_id]
                alpha[i] = max(alpha[i], q.sampling_rate)
                targets[q.flow_id] = max(targets.get(q.flow_id, 0.0), q.sampling_rate)
        active = [i for i in range(nf) if alpha[i] > 0]
        for i in active:
            active_epochs.setdefault(flow_ids[i], []).append(e)

        epoch_flows = []
        for i in active:
            f = flows[i]
            if config.estimator_mode == EstimatorMode.DECLARED or len(history[f.id]) == 0:
                mean, var = f.rate_mean_pps, f.rate_var_pps2
            else:
                mean, var = estimate_flow_stats(history[f.id], config.estimator_window)
            epoch_flows.append(dataclasses.replace(
                f, target_rate=alpha[i], rate_mean_pps=mean, rate_var_pps2=var))
        epoch_net = build_network(network.switches, epoch_flows)
        result = solve(epoch_net, config.solver)
        solves.append({
            "epoch": e, "objective": result.objective, "optimal": result.optimal,
            "nodes_explored": result.nodes_explored, "wall_time_s": result.wall_time,
        })
        assigned = np.full(nf, -1, dtype=np.int64)
        for fid, sid in result.allocation.assignment.items():
            assigned[fidx[fid]] = sidx[sid]
        admit_mask = assigned >= 0

        off_sum = np.zeros(nf, dtype=np.int64)
        smp_sum = np.zeros(nf, dtype=np.int64)
        fwd_sum = np.zeros(nf, dtype=np.int64)
        for b in range(bpe):
            k = e * bpe + b
            acc += rate_mat[:, k] * config.bucket
            offered = np.floor(acc + 1e-9).astype(np.int64)
            acc -= offered
            n_vec = np.where(admit_mask, offered, 0)
            sampled = rng.binomial(n_vec, alpha)
            forwarded = sampled.copy()
            if per_second and k % per_second == 0:
                budget = cap_second.copy()
            totals = np.bincount(assigned[admit_mask], weights=sampled[admit_mask],
                                 minlength=ns).astype(np.int64) if admit_mask.any() \
                else np.zeros(ns, dtype=np.int64)
            loads[:, k] = totals
            limit = budget if per_second else cap_bucket
            over = np.nonzero(totals > limit)[0]
            for s in over:
                violations[s, k] = True
                member = np.nonzero((assigned == s) & (sampled > 0))[0]
                _apportion(forwarded, sampled, member, int(limit[s]))
            if per_second:
                budget -= np.minimum(totals, limit)
            for i in active:
                off_sum[i] += offered[i]
            smp_sum += sampled
            fwd_sum += forwarded
        for i in active:
            records.append(FlowEpochRecord(
                epoch=e, flow_id=flow_ids[i],
                assigned_switch=switch_ids[assigned[i]] if admit_mask[i] else None,
                offered=int(off_sum[i]), sampled=int(smp_sum[i]),
                forwarded=int(fwd_sum[i]), dropped=int(smp_sum[i] - fwd_sum[i]),
            ))
        if nf and bpe:
            epoch_means = rate_mat[:, e * bpe:(e + 1) * bpe].mean(axis=1)
            for i, fid in enumerate(flow_ids):
                history[fid].append(e, float(epoch_means[i]))

    return SimReport(
        records=records, switch_ids=switch_ids, switch_loads=loads,
        switch_violations=violations, targets=targets, active_epochs=active_epochs,
        solves=solves, n_epochs=n_epochs, epoch_length=config.epoch_length,
        bucket=config.bucket, fully_sampled_tolerance=config.fully_sampled_tolerance,
    )


def _apportion(forwarded: np.ndarray, sampled: np.ndarray, member: np.ndarray,
               capacity: int) -> None:
    """Split a switch's forwarding budget across flows proportionally to
    their sampled counts; largest fractional remainders get the leftovers,
    earlier flows winning ties."""
    total = int(sampled[member].sum())
    quotas = capacity * sampled[member] / total
    base = np.floor(quotas).astype(np.int64)
    leftover = capacity - int(base.sum())
    if leftover > 0:
        frac = quotas - base
        take = np.lexsort((np.arange(len(member)), -frac))[:leftover]
        base[take] += 1
    forwarded[member] = base


# ---------------------------------------------------------------------------
# Metrics and serialization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricSummary:
    admitted_flows: int
    fully_sampled_flows: int
    rate_quartiles: tuple[float, float, float] | None  # over ever-admitted flows
    violation_fraction: float
    per_switch_violation: dict[str, float]
    mean_solver_wall_time: float

    def to_json_dict(self) -> dict:
        return {
            "version": "sim-summary/1",
            "admitted_flows": self.admitted_flows,
            "fully_sampled_flows": self.fully_sampled_flows,
            "rate_quartiles": list(self.rate_quartiles) if self.rate_quartiles else None,
            "violation_fraction": self.violation_fraction,
            "per_switch_violation": self.per_switch_violation,
            "mean_solver_wall_time_s": self.mean_solver_wall_time,
        }


def measure_metrics(report: SimReport) -> MetricSummary:
    """Admitted flows (assigned in at least one epoch), fully sampled flows,
    and the quartiles of measured sampling rates excluding never-admitted
    flows."""
    flow_ids = sorted({r.flow_id for r in report.records})
    admitted = [fid for fid in flow_ids if report.ever_admitted(fid)]
    fully = sum(1 for fid in flow_ids if report.fully_sampled(fid))
    measured = [report.measured_rate(fid) for fid in admitted]
    measured = [m for m in measured if m is not None]
    quartiles = tuple(float(q) for q in np.percentile(measured, [25, 50, 75])) \
        if measured else None
    per_switch = {sid: report.violation_fraction(sid) for sid in report.switch_ids}
    times = [s["wall_time_s"] for s in report.solves]
    return MetricSummary(
        admitted_flows=len(admitted),
        fully_sampled_flows=fully,
        rate_quartiles=quartiles,
        violation_fraction=report.violation_fraction(),
        per_switch_violation=per_switch,
        mean_solver_wall_time=float(np.mean(times)) if times else 0.0,
    )


def write_flow_epochs_csv(report: SimReport, path: str) -> None:
    """One row per (flow, epoch); see docs/formats.md."""
    with open(path, "w") as fh:
        fh.write("#flow-epochs v1\n")
        fh.write("epoch,flow,assigned_switch,offered,sampled,forwarded,dropped,measured_rate\n")
        for r in report.records:
            rate = f"{r.forwarded / r.offered:.6f}" if r.offered else ""
            fh.write(f"{r.epoch},{r.flow_id},{r.assigned_switch or ''},"
                     f"{r.offered},{r.sampled},{r.forwarded},{r.dropped},{rate}\n")


def write_summary_json(report: SimReport, path: str) -> None:
    """Reproducible run summary: byte-identical for identical (inputs, seed).
    Wall-clock timings are excluded for that reason; they live in the
    compare tables and on stdout."""
    doc = measure_metrics(report).to_json_dict()
    doc.pop("mean_solver_wall_time_s", None)
    doc["n_epochs"] = report.n_epochs
    doc["epoch_length_s"] = report.epoch_length
    doc["solves"] = [{k: v for k, v in s.items() if k != "wall_time_s"}
                     for s in report.solves]
    per_flow = {}
    for fid in sorted({r.flow_id for r in report.records}):
        rate = report.measured_rate(fid)
        per_flow[fid] = {
            "target": report.targets.get(fid),
            "measured_rate": rate,
            "fully_sampled": report.fully_sampled(fid),
            "ever_admitted": report.ever_admitted(fid),
        }
    doc["flows"] = per_flow
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
