"""Sampling-allocation solvers.

Every formulation maximizes the number of admitted flows subject to
"each flow sampled on at most one switch on its path" plus a per-switch
capacity constraint; they differ only in how a flow is charged:

  APX        mu + z(delta) * sigma        (linear surrogate of the cone)
  DS         mu                           (means only)
  DS2SIGMA   mu + 2 * sigma               (fixed two-sigma headroom)
  CSAMP_EPS  target_rate * (rate_mean + epsilon)   (worst-case inflation)
  EXACT      sum(mu) + z(delta) * sqrt(sum(sigma^2)) <= capacity per switch

The first four charge an additive per-flow weight, which makes the problem
a multiple knapsack with assignment restrictions; EXACT keeps the
second-order cone constraint and is solved by the same branch-and-bound
with a per-node cone feasibility check. Since the auxiliary pair variables
of the linearized integer program are functionally determined by the
assignment variables, searching assignments directly is equivalent to
solving that program.

All capacity checks allow a relative feasibility slack (default 1e-6, the
usual MIP convention) so instances specified at published, rounded
capacities behave as intended at the boundary.
"""

from __future__ import annotations

import json
import math
import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum

from .model import Allocation, FlowSpec, LoadStats, Network, load_stats
from .stats import normal_quantile

FEAS_TOL = 1e-6
ENUMERATION_BUDGET = 10_000_000


class Formulation(str, Enum):
    APX = "apx"
    EXACT = "exact"
    DS = "ds"
    DS2SIGMA = "ds2sigma"
    CSAMP_EPS = "csamp"


@dataclass(frozen=True)
class SolverConfig:
    formulation: Formulation = Formulation.APX
    delta: float = 0.20
    epsilon_pps: float = 0.0
    time_limit: float = 600.0
    node_limit: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.5:
            # delta <= 0.5 keeps z(delta) >= 0; beyond that the capacity
            # constraint loses convexity and the squared form is invalid.
            raise ValueError(f"delta must be in (0, 0.5], got {self.delta}")
        if self.epsilon_pps < 0:
            raise ValueError("epsilon_pps must be >= 0")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    objective: int
    optimal: bool
    nodes_explored: int
    wall_time: float

    def to_json_dict(self) -> dict:
        return {
            "version": "solve-result/1",
            "objective": self.objective,
            "optimal": self.optimal,
            "nodes_explored": self.nodes_explored,
            "wall_time_s": self.wall_time,
            "assignment": dict(sorted(self.allocation.assignment.items())),
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")


def load_solve_result(path: str) -> SolveResult:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != "solve-result/1":
        raise ValueError(f"{path}: unsupported result version {doc.get('version')!r}")
    alloc = Allocation(doc["assignment"])
    result = SolveResult(
        allocation=alloc,
        objective=int(doc["objective"]),
        optimal=bool(doc["optimal"]),
        nodes_explored=int(doc["nodes_explored"]),
        wall_time=float(doc["wall_time_s"]),
    )
    if result.objective != len(alloc):
        raise ValueError(f"{path}: objective does not match assignment size")
    return result


def effective_load(flow: FlowSpec, config: SolverConfig) -> float:
    """The additive per-flow capacity charge of a formulation (pps).

    Undefined for EXACT, whose per-switch charge is not additive.
    """
    stats = load_stats(flow)
    form = config.formulation
    if form == Formulation.APX:
        return stats.mu + normal_quantile(config.delta) * stats.sigma
    if form == Formulation.DS:
        return stats.mu
    if form == Formulation.DS2SIGMA:
        return stats.mu + 2.0 * stats.sigma
    if form == Formulation.CSAMP_EPS:
        return flow.target_rate * (flow.rate_mean_pps + config.epsilon_pps)
    raise ValueError(f"no additive load for formulation {form}")


def _slack(capacity: float, tol: float = FEAS_TOL) -> float:
    return tol * max(1.0, capacity)


def socp_feasible(network: Network, alloc: Allocation, delta: float,
                  tol: float = FEAS_TOL) -> bool:
    """True iff every switch satisfies
    sum(mu) + z(delta) * sqrt(sum(sigma^2)) <= capacity (within slack)."""
    z = normal_quantile(delta)
    mu_sum: dict[str, float] = {}
    var_sum: dict[str, float] = {}
    for fid, sid in alloc.assignment.items():
        stats = load_stats(network.flow(fid))
        mu_sum[sid] = mu_sum.get(sid, 0.0) + stats.mu
        var_sum[sid] = var_sum.get(sid, 0.0) + stats.sigma ** 2
    for sid, mu in mu_sum.items():
        cap = network.switch(sid).capacity_pps
        if mu + z * math.sqrt(var_sum[sid]) > cap + _slack(cap, tol):
            return False
    return True


def additive_feasible(network: Network, alloc: Allocation, config: SolverConfig,
                      tol: float = FEAS_TOL) -> bool:
    """True iff every switch's summed effective loads fit its capacity."""
    used: dict[str, float] = {}
    for fid, sid in alloc.assignment.items():
        used[sid] = used.get(sid, 0.0) + effective_load(network.flow(fid), config)
    return all(
        w <= network.switch(sid).capacity_pps + _slack(network.switch(sid).capacity_pps, tol)
        for sid, w in used.items()
    )


def min_required_capacity(flows: list[LoadStats], delta: float) -> float:
    """Smallest single-switch capacity that samples all given loads while
    keeping the violation probability at delta (normal approximation)."""
    if not flows:
        raise ValueError("flows must be non-empty")
    mu = sum(s.mu for s in flows)
    var = sum(s.sigma ** 2 for s in flows)
    return mu + normal_quantile(delta) * math.sqrt(var)


# ---------------------------------------------------------------------------
# Linearized integer-program model (for inspection; the solver itself
# searches assignments directly, which is equivalent).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IlpModel:
    """Variable index maps and constraint descriptors of the linearized
    program: assignment variables per (flow, on-path switch) and one
    auxiliary variable per unordered flow pair sharing a switch."""

    x_index: dict[tuple[str, str], int]
    w_index: dict[tuple[str, str, str], int]
    constraints: tuple[tuple, ...]

    @property
    def num_x(self) -> int:
        return len(self.x_index)

    @property
    def num_w(self) -> int:
        return len(self.w_index)


def build_ilp_model(network: Network) -> IlpModel:
    x_index: dict[tuple[str, str], int] = {}
    for f in network.flows:
        for sid in f.path:
            x_index[(f.id, sid)] = len(x_index)
    w_index: dict[tuple[str, str, str], int] = {}
    constraints: list[tuple] = []
    for f in network.flows:
        constraints.append(("assign_at_most_once", f.id))
    for s in network.switches:
        constraints.append(("mean_within_capacity", s.id))
        members = network.flows_at[s.id]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                a, b = sorted((members[i], members[j]))
                w_index[(a, b, s.id)] = len(w_index)
                constraints.append(("pair_le_first", a, b, s.id))
                constraints.append(("pair_le_second", a, b, s.id))
                constraints.append(("pair_ge_sum_minus_one", a, b, s.id))
        constraints.append(("squared_capacity", s.id))
    return IlpModel(x_index, w_index, tuple(constraints))


def squared_form_feasible(network: Network, alloc: Allocation, delta: float,
                          tol: float = FEAS_TOL) -> bool:
    """Feasibility of the linearized program at a given assignment.

    The pair variables are derived from the assignment (their defining
    inequalities force w = x_a * x_b), so this checks, per switch, the
    non-negative mean headroom condition and the squared capacity
    condition. Equivalent to :func:`socp_feasible` for delta <= 0.5.
    """
    z = normal_quantile(delta)
    by_switch: dict[str, list[LoadStats]] = {}
    for fid, sid in alloc.assignment.items():
        by_switch.setdefault(sid, []).append(load_stats(network.flow(fid)))
    for sid, members in by_switch.items():
        cap = network.switch(sid).capacity_pps
        mu_sum = sum(m.mu for m in members)
        if cap - mu_sum < -_slack(cap, tol):
            return False
        var_sum = sum(m.sigma ** 2 for m in members)
        sq_sum = sum(m.mu ** 2 for m in members)
        pair_sum = 0.0
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pair_sum += members[i].mu * members[j].mu
        lhs = z * z * var_sum
        rhs = cap * cap - 2.0 * cap * mu_sum + sq_sum + 2.0 * pair_sum
        if lhs > rhs + tol * max(1.0, cap * cap):
            return False
    return True


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------

class _Instance:
    """Search-ready arrays for one solve: flows ordered by ascending charge
    (flow id breaking ties), per-switch membership in that order, and
    prefix sums used by the fractional-relaxation bounds."""

    def __init__(self, network: Network, config: SolverConfig):
        self.network = network
        self.exact = config.formulation == Formulation.EXACT
        self.z = normal_quantile(config.delta)
        flows = network.flows
        n = len(flows)
        loads = [load_stats(f) for f in flows]
        if self.exact:
            # Charge floor for bounds: adding a flow raises a switch's cone
            # load by at least its mean.
            g = [s.mu for s in loads]
        else:
            g = [effective_load(f, config) for f in flows]
        order = sorted(range(n), key=lambda i: (g[i], flows[i].id))
        self.order = order
        self.flow_ids = [flows[i].id for i in order]
        self.g = [g[i] for i in order]
        self.mu = [loads[i].mu for i in order]
        self.var = [loads[i].sigma ** 2 for i in order]
        self.prefix = [0.0] * (n + 1)
        for k in range(n):
            self.prefix[k + 1] = self.prefix[k] + self.g[k]

        switches = network.switches
        self.switch_ids = [s.id for s in switches]
        self.capacity = [s.capacity_pps for s in switches]
        self.slack = [_slack(c) for c in self.capacity]
        self.slack_total = sum(self.slack)
        sidx = {s.id: k for k, s in enumerate(switches)}
        self.on_path = [[sidx[sid] for sid in flows[i].path] for i in order]
        # Per-switch members by search position; g is ascending in that
        # order, so prefix sums give "k cheapest remaining on this switch".
        self.members: list[list[int]] = [[] for _ in switches]
        for pos in range(n):
            for s in self.on_path[pos]:
                self.members[s].append(pos)
        self.member_prefix = []
        for s, positions in enumerate(self.members):
            acc = [0.0]
            for pos in positions:
                acc.append(acc[-1] + self.g[pos])
            self.member_prefix.append(acc)
        self.n = n


def _bb_solve(network: Network, config: SolverConfig) -> SolveResult:
    t0 = time.perf_counter()
    inst = _Instance(network, config)
    n = inst.n
    n_switch = len(inst.capacity)
    exact = inst.exact
    z = inst.z
    used_g = [0.0] * n_switch            # additive weight, or mean for EXACT
    used_var = [0.0] * n_switch
    choice = [-1] * n
    best_obj = 0
    best_choice = list(choice)           # empty allocation is always feasible
    admitted = 0
    nodes = 0
    limit_hit = False

    def cone_used(s: int) -> float:
        return used_g[s] + z * math.sqrt(used_var[s])

    def fits(pos: int, s: int) -> bool:
        cap_s = inst.capacity[s] + inst.slack[s]
        if exact:
            return (used_g[s] + inst.mu[pos]
                    + z * math.sqrt(used_var[s] + inst.var[pos])) <= cap_s
        return used_g[s] + inst.g[pos] <= cap_s

    def children(depth: int) -> list[int]:
        cands = []
        for s in inst.on_path[depth]:
            if fits(depth, s):
                cap = inst.capacity[s]
                used = cone_used(s) if exact else used_g[s]
                util = used / cap if cap > 0 else 1.0
                cands.append((util, inst.switch_ids[s], s))
        cands.sort()
        out = [s for _, _, s in cands]
        out.append(-1)  # leave the flow unsampled
        return out

    def upper_bound(depth: int) -> int:
        rem = n - depth
        if rem == 0:
            return 0
        pool = 0.0
        for s in range(n_switch):
            r = inst.capacity[s] - used_g[s]
            if r > 0:
                pool += r
        # Account for the per-switch feasibility slack so the relaxation
        # stays an upper bound for assignments admitted at the boundary.
        target = inst.prefix[depth] + pool + inst.slack_total + 1e-9 * (1.0 + pool)
        pooled = bisect_right(inst.prefix, target, depth, n + 1) - 1 - depth
        if pooled <= 0:
            return max(0, pooled)
        per_switch = 0
        for s in range(n_switch):
            positions = inst.members[s]
            j = bisect_left(positions, depth)
            if j >= len(positions):
                continue
            acc = inst.member_prefix[s]
            resid = inst.capacity[s] - used_g[s]
            if resid < 0:
                continue
            hi = bisect_right(acc, acc[j] + resid + inst.slack[s], j)
            per_switch += hi - 1 - j
            if per_switch >= pooled:
                return min(rem, pooled)
        return min(rem, pooled, per_switch)

    # Frames: [children, next index, switch applied on the edge into the
    # frame (-2 for the root, -1 for a skip edge)].
    stack = [[children(0), 0, -2]] if n else []
    deadline = t0 + config.time_limit
    while stack:
        frame = stack[-1]
        kids, idx, _ = frame
        depth = len(stack) - 1
        if idx >= len(kids):
            stack.pop()
            edge = frame[2]
            if edge >= 0:
                pos = len(stack) - 1
                used_g[edge] -= inst.g[pos] if not exact else inst.mu[pos]
                if exact:
                    used_var[edge] -= inst.var[pos]
                    if used_var[edge] < 0:
                        used_var[edge] = 0.0
                choice[pos] = -1
                admitted -= 1
            continue
        frame[1] += 1
        s = kids[idx]
        nodes += 1
        if nodes >= config.node_limit or (nodes % 512 == 0 and time.perf_counter() > deadline):
            limit_hit = True
            break
        applied = s >= 0
        if applied:
            used_g[s] += inst.g[depth] if not exact else inst.mu[depth]
            if exact:
                used_var[s] += inst.var[depth]
            choice[depth] = s
            admitted += 1
            if admitted > best_obj:
                best_obj = admitted
                best_choice = list(choice)
        nd = depth + 1
        if nd < n and admitted + upper_bound(nd) > best_obj:
            stack.append([children(nd), 0, s if applied else -1])
        elif applied:
            used_g[s] -= inst.g[depth] if not exact else inst.mu[depth]
            if exact:
                used_var[s] -= inst.var[depth]
                if used_var[s] < 0:
                    used_var[s] = 0.0
            choice[depth] = -1
            admitted -= 1

    assignment = {
        inst.flow_ids[pos]: inst.switch_ids[s]
        for pos, s in enumerate(best_choice) if s >= 0
    }
    return SolveResult(
        allocation=Allocation(assignment),
        objective=len(assignment),
        optimal=not limit_hit,
        nodes_explored=nodes,
        wall_time=time.perf_counter() - t0,
    )


def solve_apx(network: Network, config: SolverConfig) -> SolveResult:
    """Solve any of the additive-weight formulations to optimality by
    branch and bound (greedy-first depth-first search; the incumbent at a
    node or time limit is returned with ``optimal=False``)."""
    if config.formulation == Formulation.EXACT:
        raise ValueError("use solve_exact for the cone formulation")
    return _bb_solve(network, config)


def solve_exact(network: Network, config: SolverConfig) -> SolveResult:
    """Solve the cone-constrained formulation by branch and bound with a
    per-node cone feasibility check."""
    cfg = config if config.formulation == Formulation.EXACT else \
        SolverConfig(Formulation.EXACT, config.delta, config.epsilon_pps,
                     config.time_limit, config.node_limit)
    return _bb_solve(network, cfg)


def solve(network: Network, config: SolverConfig) -> SolveResult:
    """Dispatch on the configured formulation."""
    if config.formulation == Formulation.EXACT:
        return solve_exact(network, config)
    return solve_apx(network, config)


def brute_force_optimal(network: Network, config: SolverConfig) -> SolveResult:
    """Enumerate every assignment (each flow: one on-path switch or none)
    and return a maximum-cardinality feasible one.

    Flows are scanned in declaration order and each flow's choices in the
    order (unassigned, switches ascending by id); the first assignment
    attaining the maximum in that enumeration order is returned, which
    makes ties deterministic. Intended as a testing oracle for small
    instances; refuses instances beyond the enumeration budget.
    """
    t0 = time.perf_counter()
    flows = network.flows
    n = len(flows)
    total = 1
    for f in flows:
        total *= len(f.path) + 1
        if total > ENUMERATION_BUDGET:
            raise ValueError("instance too large for exhaustive enumeration")
    exact = config.formulation == Formulation.EXACT
    z = normal_quantile(config.delta)
    loads = [load_stats(f) for f in flows]
    weights = None if exact else [effective_load(f, config) for f in flows]
    switches = {s.id: i for i, s in enumerate(network.switches)}
    caps = [s.capacity_pps for s in network.switches]
    slacks = [_slack(c) for c in caps]
    options = [[None] + sorted(f.path) for f in flows]
    used_mu = [0.0] * len(caps)
    used_var = [0.0] * len(caps)

    best_obj = -1
    best_assign: dict[str, str] = {}
    current: dict[str, str] = {}
    nodes = 0

    def feasible_add(i: int, s: int) -> bool:
        if exact:
            return (used_mu[s] + loads[i].mu
                    + z * math.sqrt(used_var[s] + loads[i].sigma ** 2)) <= caps[s] + slacks[s]
        return used_mu[s] + weights[i] <= caps[s] + slacks[s]

    def recurse(i: int, count: int):
        nonlocal best_obj, best_assign, nodes
        nodes += 1
        if i == n:
            if count > best_obj:
                best_obj = count
                best_assign = dict(current)
            return
        for opt in options[i]:
            if opt is None:
                recurse(i + 1, count)
                continue
            s = switches[opt]
            if not feasible_add(i, s):
                continue
            charge = loads[i].mu if exact else weights[i]
            used_mu[s] += charge
            if exact:
                used_var[s] += loads[i].sigma ** 2
            current[flows[i].id] = opt
            recurse(i + 1, count + 1)
            del current[flows[i].id]
            used_mu[s] -= charge
            if exact:
                used_var[s] -= loads[i].sigma ** 2

    if n == 0:
        best_obj, best_assign = 0, {}
    else:
        recurse(0, 0)
    return SolveResult(
        allocation=Allocation(best_assign),
        objective=best_obj,
        optimal=True,
        nodes_explored=nodes,
        wall_time=time.perf_counter() - t0,
    )
