"""Receding-horizon PNC controller and the baseline forwarding policies.

The controller minimises the expected quadratic queue cost over ``H`` future
TTIs. Queues evolve by their mean dynamics (certainty equivalence) with the
per-step success probabilities taken from the channel chain's marginals. The
control space is small (at most 16 actions per slot with the default
constituency row) so the optimum is found exactly by depth-first branch and
bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dtmc import DtmcModel
from .queues import (SGNB1, SGNB2, RoutingMatrix, _column_effect, all_controls,
                     is_feasible)

TIE_RTOL = 1e-12
FEAS_TOL = 1e-9


@dataclass
class CostWeights:
    q_diag: tuple[float, ...] = (1.0, 1.0, 1.0, 0.0)
    horizon: int = 4

    def __post_init__(self):
        self.q_diag = tuple(float(x) for x in self.q_diag)
        if any(x < 0 for x in self.q_diag):
            raise ValueError("cost weights must be non-negative")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class PlanningProblem:
    """Everything the controller conditions on at one TTI.

    ``q`` are the physical queues (positivity is enforced on them), ``v0`` the
    queues with in-flight Xn/S1 bits credited to their destination (the cost is
    charged on these). ``m`` holds the expected per-link success probabilities
    for lookaheads ``0..H-1``.
    """

    q: np.ndarray
    routing: RoutingMatrix
    a: np.ndarray
    m: np.ndarray
    arrivals_mean: np.ndarray
    weights: CostWeights = field(default_factory=CostWeights)
    v0: np.ndarray | None = None
    landings: np.ndarray | None = None
    r_feas: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.v0 = self.q.copy() if self.v0 is None else np.asarray(self.v0, dtype=float)
        self.m = np.atleast_2d(np.asarray(self.m, dtype=float))
        self.arrivals_mean = np.asarray(self.arrivals_mean, dtype=float)
        h = self.weights.horizon
        if self.m.shape[0] == 1 and h > 1:
            self.m = np.repeat(self.m, h, axis=0)
        if self.m.shape[0] < h:
            raise ValueError(f"need success probabilities for {h} lookahead steps")
        if self.arrivals_mean.ndim == 1:
            self.arrivals_mean = np.tile(self.arrivals_mean, (h, 1))
        if self.arrivals_mean.shape[0] < h:
            raise ValueError(f"need arrivals for {h} lookahead steps")
        if self.landings is None:
            self.landings = np.zeros((h, self.q.size))
        if self.r_feas is None:
            self.r_feas = self.routing.r

    @classmethod
    def from_dtmc(cls, q, dtmc: DtmcModel, weights: CostWeights, routing: RoutingMatrix, a,
                  arrivals_mean, **kw) -> "PlanningProblem":
        return cls(q, routing, np.asarray(a), dtmc.expected_success(weights.horizon),
                   arrivals_mean, weights, **kw)

    @property
    def horizon(self) -> int:
        return self.weights.horizon


@dataclass
class PolicyDecision:
    u_now: tuple[int, ...]
    predicted_cost: float
    planned_trajectory: list[tuple[int, ...]]
    nodes_expanded: int = 0


@dataclass
class TrajectoryCostBreakdown:
    expected_queues: list[np.ndarray]
    step_costs: list[float]

    @property
    def total(self) -> float:
        return float(sum(self.step_costs))


def _tie(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(1.0, abs(a), abs(b))


def _tie_key(traj) -> tuple:
    return sum(sum(u) for u in traj), tuple(itertools.chain.from_iterable(traj))


def _better(cost, traj, best_cost, best_traj) -> bool:
    if best_traj is None:
        return True
    if _tie(cost, best_cost):
        return _tie_key(traj) < _tie_key(best_traj)
    return cost < best_cost


def _stage_cost(v, qd) -> float:
    total = 0.0
    for k in range(len(qd)):
        total += qd[k] * v[k] * v[k]
    return total


def cost_breakdown(trajectory, problem: PlanningProblem) -> TrajectoryCostBreakdown:
    """Certainty-equivalent cost of a control trajectory, step by step."""
    if len(trajectory) != problem.horizon:
        raise ValueError(f"trajectory length {len(trajectory)} != horizon {problem.horizon}")
    qd = problem.weights.q_diag
    v = [float(x) for x in problem.v0]
    queues, costs = [], []
    for i, u in enumerate(trajectory):
        delta = problem.routing.expected_columns(problem.m[i]) @ np.asarray(u) + problem.arrivals_mean[i]
        v = [v[k] + float(delta[k]) for k in range(len(v))]
        queues.append(np.array(v))
        costs.append(_stage_cost(v, qd))
    return TrajectoryCostBreakdown(queues, costs)


def _exact_cost(trajectory, problem: PlanningProblem, dtmc: DtmcModel) -> float:
    h = problem.horizon
    if h > 3:
        raise ValueError("exact expectation is only offered for H <= 3")
    qd = np.asarray(problem.weights.q_diag)
    succ = dtmc.success_matrices
    p = dtmc.transition
    s0 = dtmc.current_state - 1
    routing = problem.routing
    n_links = len(routing.links)
    total = 0.0
    for path in itertools.product(range(dtmc.state_count), repeat=h - 1):
        states = (s0,) + path
        w_path = 1.0
        for a, b in zip(states, states[1:]):
            w_path *= p[a, b]
        if w_path == 0.0:
            continue
        # Bernoulli outcomes only matter for links used at each step
        used = [sorted({l for j in np.flatnonzero(u) for l in routing.column_links(j)})
                for u in trajectory]
        for outs in itertools.product(*[itertools.product((0, 1), repeat=len(us)) for us in used]):
            w = w_path
            v = problem.v0.copy()
            cost = 0.0
            for i, u in enumerate(trajectory):
                m = succ[states[i]]
                outcome = np.zeros(n_links, dtype=bool)
                for lid, o in zip(used[i], outs[i]):
                    outcome[lid] = bool(o)
                    w *= m[lid] if o else 1.0 - m[lid]
                for j in np.flatnonzero(u):
                    v = v + _column_effect(routing, j, outcome)
                v = v + problem.arrivals_mean[i]
                cost += float(qd @ (v * v))
            total += w * cost
    return total


def evaluate_cost(trajectory, problem: PlanningProblem, mode: str = "ce",
                  dtmc: DtmcModel | None = None) -> float:
    """Expected quadratic queue cost of ``trajectory``.

    ``mode="ce"`` propagates mean queues; ``mode="exact"`` enumerates chain
    paths and Bernoulli outcomes (needs ``dtmc``, H <= 3).
    """
    if mode == "ce":
        return cost_breakdown(trajectory, problem).total
    if mode == "exact":
        if dtmc is None:
            raise ValueError("exact mode needs the chain")
        if len(trajectory) != problem.horizon:
            raise ValueError("trajectory length does not match the horizon")
        return _exact_cost(trajectory, problem, dtmc)
    raise ValueError(f"unknown cost mode {mode!r}")


_CONTROL_CACHE: dict = {}


def _controls_for(a, routing: RoutingMatrix):
    """Admissible controls (and their array form) for a constituency matrix."""
    a = np.asarray(a)
    moving = np.any(routing.r != 0, axis=0)
    key = (a.tobytes(), a.shape, moving.tobytes())
    hit = _CONTROL_CACHE.get(key)
    if hit is None:
        controls = [c for c in all_controls(a) if not np.any(np.asarray(c, bool) & ~moving)]
        hit = (controls, np.array(controls, dtype=float).T)
        _CONTROL_CACHE[key] = hit
    return hit


def _expected_columns_stack(routing: RoutingMatrix, m: np.ndarray) -> np.ndarray:
    """``expected_columns`` for every row of ``m`` at once, shape (H, nodes, controls)."""
    if not routing.composites:
        return routing.r[None, :, :] * m[:, None, :routing.n_controls]
    return np.stack([routing.expected_columns(row) for row in m])


class _Tables:
    """Per-step action deltas, precomputed once per solve."""

    def __init__(self, problem: PlanningProblem):
        h = problem.horizon
        self.controls, us = _controls_for(problem.a, problem.routing)
        routing = problem.routing
        r_feas = np.asarray(problem.r_feas, dtype=float)
        feas_routing = RoutingMatrix(r_feas, routing.links, routing.composites)
        m = problem.m[:h]
        abar = problem.arrivals_mean[:h, None, :]
        self.need = (r_feas @ us).T                                        # (C, n)
        self.dv = np.ascontiguousarray(
            np.swapaxes(_expected_columns_stack(routing, m) @ us, 1, 2) + abar)
        self.dp = np.ascontiguousarray(
            np.swapaxes(_expected_columns_stack(feas_routing, m) @ us, 1, 2)
            + abar + problem.landings[:h, None, :])                        # (H, C, n)
        # cheapest conceivable per-component change at each step (relaxation)
        self.min_delta = self.dv.min(axis=1)
        self.qd = problem.weights.q_diag
        self.act = us.sum(axis=0).astype(np.int64)

    def lower_bound(self, depth: int, v) -> float:
        qd, lb = self.qd, 0.0
        cur = list(v)
        for i in range(depth, len(self.dv)):
            md = self.min_delta[i]
            for k in range(len(cur)):
                cur[k] += md[k]
                if cur[k] > 0.0:
                    lb += qd[k] * cur[k] * cur[k]
        return lb


def _feasible(p, need, tol) -> bool:
    for pk, nk in zip(p, need):
        if pk + nk < -tol:
            return False
    return True


@njit(cache=True)
def _bnb_kernel(v0, p0, dv, dp, need, qd, min_delta, act, prune):
    h, nc, n = dv.shape
    best_cost = np.inf
    best_path = np.full(h, -1, np.int64)
    best_act = 0
    path = np.zeros(h, np.int64)
    order = np.zeros((h, nc), np.int64)
    ccost = np.zeros((h, nc))
    count = np.zeros(h, np.int64)
    pos = np.zeros(h, np.int64)
    vs = np.zeros((h + 1, n))
    ps = np.zeros((h + 1, n))
    cs = np.zeros(h + 1)
    vs[0] = v0
    ps[0] = p0
    nodes = 0
    depth = 0
    expand = True
    while depth >= 0:
        if expand:
            nodes += 1
            tol = 0.0 if depth == 0 else 1e-9
            k = 0
            for c in range(nc):
                ok = True
                for j in range(n):
                    if ps[depth, j] + need[c, j] < -tol:
                        ok = False
                        break
                if not ok:
                    continue
                cost = cs[depth]
                for j in range(n):
                    x = vs[depth, j] + dv[depth, c, j]
                    cost += qd[j] * x * x
                # insertion sort, stable in control index
                i = k
                while i > 0 and ccost[depth, i - 1] > cost:
                    ccost[depth, i] = ccost[depth, i - 1]
                    order[depth, i] = order[depth, i - 1]
                    i -= 1
                ccost[depth, i] = cost
                order[depth, i] = c
                k += 1
            count[depth] = k
            pos[depth] = 0
            expand = False
        if pos[depth] >= count[depth]:
            depth -= 1
            continue
        slot = pos[depth]
        pos[depth] += 1
        c = order[depth, slot]
        cost = ccost[depth, slot]
        path[depth] = c
        if depth + 1 == h:
            total_act = 0
            for i in range(h):
                total_act += act[path[i]]
            better = False
            if best_path[0] < 0:
                better = True
            else:
                scale = max(1.0, abs(cost), abs(best_cost))
                if abs(cost - best_cost) <= 1e-12 * scale:
                    if total_act < best_act:
                        better = True
                    elif total_act == best_act:
                        for i in range(h):
                            if path[i] != best_path[i]:
                                better = path[i] < best_path[i]
                                break
                else:
                    better = cost < best_cost
            if better:
                best_cost = cost
                best_act = total_act
                best_path[:] = path
            continue
        for j in range(n):
            vs[depth + 1, j] = vs[depth, j] + dv[depth, c, j]
        if prune and best_path[0] >= 0:
            lb = cost
            for j in range(n):
                x = vs[depth + 1, j]
                for i in range(depth + 1, h):
                    x += min_delta[i, j]
                    if x > 0.0:
                        lb += qd[j] * x * x
            scale = max(1.0, abs(lb), abs(best_cost))
            if lb > best_cost and abs(lb - best_cost) > 1e-12 * scale:
                continue
        for j in range(n):
            ps[depth + 1, j] = max(0.0, ps[depth, j] + dp[depth, c, j])
        cs[depth + 1] = cost
        depth += 1
        expand = True
    return best_path, best_cost, nodes


def _solve_python(problem: PlanningProblem, tb: "_Tables", prune: bool):
    h = problem.horizon
    qd = tb.qd
    n = len(qd)
    best = {"cost": math.inf, "traj": None}
    nodes = 0
    need = tb.need.tolist()
    tb.min_delta = tb.min_delta.tolist()

    def rec(depth, v, p, cost, path):
        nonlocal nodes
        nodes += 1
        tol = 0.0 if depth == 0 else FEAS_TOL
        dv, dp = tb.dv[depth].tolist(), tb.dp[depth].tolist()
        children = []
        for ci, c in enumerate(tb.controls):
            if not _feasible(p, need[ci], tol):
                continue
            d = dv[ci]
            nv = tuple(v[k] + d[k] for k in range(n))
            children.append((cost + _stage_cost(nv, qd), ci, nv))
        children.sort(key=lambda t: t[0])
        for ccost, ci, nv in children:
            c = tb.controls[ci]
            if depth + 1 == h:
                traj = path + [c]
                if _better(ccost, traj, best["cost"], best["traj"]):
                    best["cost"], best["traj"] = ccost, traj
                continue
            if prune and best["traj"] is not None:
                bound = ccost + tb.lower_bound(depth + 1, nv)
                if bound > best["cost"] and not _tie(bound, best["cost"]):
                    continue
            d = dp[ci]
            np_ = tuple(max(0.0, p[k] + d[k]) for k in range(n))
            rec(depth + 1, nv, np_, ccost, path + [c])

    rec(0, tuple(problem.v0), tuple(problem.q), 0.0, [])
    return best["traj"], best["cost"], nodes


def solve(problem: PlanningProblem, prune: bool = True, backend: str = "compiled") -> PolicyDecision:
    """Optimal first control of the H-step problem by branch and bound.

    Feasibility is exact on the physical queues for the executed step and is
    checked against the expected (floored) queues for later steps. Ties go to
    the trajectory with fewer activations, then the lexicographically smaller.
    ``backend="python"`` runs the same search without the compiled kernel.
    """
    tb = _Tables(problem)
    if backend == "python":
        traj, cost, nodes = _solve_python(problem, tb, prune)
    elif backend == "compiled":
        idx, cost, nodes = _bnb_kernel(
            np.asarray(problem.v0, dtype=float), np.asarray(problem.q, dtype=float),
            tb.dv, tb.dp, np.ascontiguousarray(tb.need), np.asarray(tb.qd, dtype=float),
            tb.min_delta, tb.act, prune)
        traj = [tb.controls[i] for i in idx] if idx[0] >= 0 else None
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if traj is None:
        raise RuntimeError("no feasible trajectory (the all-off control should always be)")
    return PolicyDecision(traj[0], float(cost), traj, int(nodes))


def exhaustive_solve(problem: PlanningProblem) -> PolicyDecision:
    """Unpruned enumeration of every trajectory; reference for :func:`solve`."""
    h = problem.horizon
    nonzero = np.any(problem.routing.r != 0, axis=0)
    controls = [c for c in all_controls(problem.a) if not np.any(np.asarray(c, bool) & ~nonzero)]
    r_feas = np.asarray(problem.r_feas, dtype=float)
    feas_routing = RoutingMatrix(r_feas, problem.routing.links, problem.routing.composites)
    best_cost, best_traj, count = math.inf, None, 0
    for traj in itertools.product(controls, repeat=h):
        p = problem.q.copy()
        ok = True
        for i, u in enumerate(traj):
            tol = 0.0 if i == 0 else FEAS_TOL
            if np.any(p + r_feas @ np.asarray(u) < -tol):
                ok = False
                break
            p = np.maximum(0.0, p + feas_routing.expected_columns(problem.m[i]) @ np.asarray(u)
                           + problem.arrivals_mean[i] + problem.landings[i])
        if not ok:
            continue
        count += 1
        cost = evaluate_cost(list(traj), problem)
        if _better(cost, list(traj), best_cost, best_traj):
            best_cost, best_traj = cost, list(traj)
    return PolicyDecision(best_traj[0], best_cost, best_traj, count)


def baseline_maxweight(q, routing: RoutingMatrix, m, a, arrivals_mean,
                       q_diag=(1.0, 1.0, 1.0, 0.0), v0=None, r_feas=None) -> tuple[int, ...]:
    """Myopic one-step comparator: the feasible control with the lowest next-step cost.

    ``m`` is the success vector for the current TTI (a 2-D array uses its first row).
    """
    q = np.asarray(q, dtype=float)
    v = q if v0 is None else np.asarray(v0, dtype=float)
    r_feas = routing.r if r_feas is None else r_feas
    m = np.asarray(m, dtype=float)
    e = routing.expected_columns(m[0] if m.ndim == 2 else m)
    abar = np.asarray(arrivals_mean, dtype=float)
    abar = abar[0] if abar.ndim == 2 else abar
    qd = tuple(float(x) for x in q_diag)
    best_cost, best = math.inf, None
    for u in all_controls(a):
        if not is_feasible(q, u, r_feas, a):
            continue
        nv = v + e @ np.asarray(u) + abar
        cost = _stage_cost([float(x) for x in nv], qd)
        if _better(cost, [u], best_cost, None if best is None else [best]):
            best_cost, best = cost, u
    return best


def baseline_single_connectivity(q, routing: RoutingMatrix, a=None) -> tuple[int, ...]:
    """Only ever the direct MgNB link, whenever it is feasible."""
    n = routing.n_controls
    a = np.zeros((1, n), dtype=np.int64) if a is None else a
    u = tuple(1 if j == 0 else 0 for j in range(n))
    return u if is_feasible(q, u, routing.feasibility_matrix(), a) else (0,) * n


# (wireless link, Xn forwarding link) per serving small cell; None -> MgNB only
A6_LINKS = {SGNB1: (2, 1), SGNB2: (4, 3), None: (0,)}


def baseline_autonomous_a6(q, routing: RoutingMatrix, a, serving_scell: int | None) -> tuple[int, ...]:
    """Split-bearer forwarding to the serving SCell only.

    Activates the serving SgNB's radio link and the Xn link feeding it, each
    only when it stays feasible; the radio link is considered first.
    """
    n = routing.n_controls
    r = routing.feasibility_matrix()
    u = [0] * n
    for lid in A6_LINKS[serving_scell]:
        trial = list(u)
        trial[lid] = 1
        if is_feasible(q, trial, r, a):
            u = trial
    return tuple(u)
