"""Random planning instances shared by the policy and acceptance tests."""

import numpy as np

from pncsim.policy import CostWeights, PlanningProblem
from pncsim.queues import build_routing_matrix, canonical_links, constituency_matrix


def random_problem(rng: np.random.Generator, horizon: int, q_diag=(1.0, 1.0, 1.0, 0.0),
                   preset=None, dc=None) -> PlanningProblem:
    tbs = rng.integers(100, 6000, size=5)
    dc = bool(rng.random() < 0.3) if dc is None else dc
    routing = build_routing_matrix(canonical_links(tbs, 4), enable_dc=dc)
    preset = preset or ("small-cell-exclusive" if rng.random() < 0.5 else "wireless-exclusive")
    a = constituency_matrix(preset, routing)
    q = rng.integers(0, 20000, size=4).astype(float)
    q[3] = 0.0
    # some empty queues so positivity binds
    q[:3][rng.random(3) < 0.25] = 0.0
    m = rng.random((horizon, 5))
    m[:, [1, 3]] = 1.0
    m[:, rng.random(5) < 0.15] = 0.0
    m[:, [1, 3]] = 1.0
    v0 = q + np.r_[rng.integers(0, 3000, size=3), 0]
    landings = np.zeros((horizon, 4))
    landings[:, 1:3] = rng.integers(0, 2000, size=(horizon, 2)) * (rng.random((horizon, 2)) < 0.3)
    arrivals = np.zeros((horizon, 4))
    arrivals[:, 0] = rng.uniform(0, 3000, size=horizon)
    return PlanningProblem(q, routing, a, m, arrivals, CostWeights(q_diag, horizon), v0=v0,
                           landings=landings, r_feas=routing.feasibility_matrix())
