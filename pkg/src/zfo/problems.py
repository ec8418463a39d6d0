"""Benchmark problems: per-agent cost structure, feasible sets, analytic
gradients, and a centralized reference solver.

A `Problem` couples n agents, each owning a block of the joint decision
vector and a private cost f_i over the *joint* vector; the system cost
is f = (1/n) sum_i f_i. The simulator only ever queries local costs at
joint actions, which is what makes the method model-free.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, OracleError
from .geometry import Box, ConvexSet, ShiftedSimplex, WholeSpace


@dataclass
class Problem:
    name: str
    dims: list[int]
    sets: list[ConvexSet]
    local_costs: Callable[..., np.ndarray]  # (flat, check=True) -> (n,)
    grad: Callable[[np.ndarray], np.ndarray] | None = None  # gradient of f
    local_grads: Callable[[np.ndarray], np.ndarray] | None = None  # (n, d)
    affected: list[frozenset[int]] | None = None
    f_star: float | None = None
    x_star: np.ndarray | None = None
    f_lower: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.dims) != len(self.sets):
            raise ConfigurationError("dims and sets must align")
        for d, s in zip(self.dims, self.sets):
            if s.dim != d:
                raise ConfigurationError("set dimension mismatch")
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(self.offsets[-1])

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        return [flat[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n)]

    def join(self, blocks) -> np.ndarray:
        return np.concatenate([np.asarray(b, dtype=float) for b in blocks])

    def global_cost(self, flat: np.ndarray, check: bool = True) -> float:
        return float(np.mean(self.local_costs(flat, check=check)))

    def feasible(self, flat: np.ndarray, tol: float = 1e-9) -> bool:
        return all(
            s.contains(b, tol) for s, b in zip(self.sets, self.split(flat))
        )

    def project_feasible(self, flat: np.ndarray) -> np.ndarray:
        return self.join(s.project(b) for s, b in zip(self.sets, self.split(flat)))


def observe(problem: Problem, flat: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy per-agent cost observations at a joint action. The action
    must be feasible: evaluating outside the domain is a hard error."""
    costs = problem.local_costs(flat, check=True)
    if sigma > 0:
        costs = costs + sigma * rng.standard_normal(problem.n)
    return costs


# ---------------------------------------------------------------------------
# box-constrained quadratic


def build_box_quadratic(
    n: int,
    dim_per_agent: int,
    seed: int,
    half_width: float = 1.0,
    center_scale: float = 0.5,
) -> Problem:
    """f_i(x) = 0.5 ||x - c_i||^2 over per-agent boxes [-w, w]^d_i.

    Every constant the complexity bounds need is exact here, which is
    what makes this the calibration problem for bound checks.
    """
    if not (0 < center_scale < half_width):
        raise ConfigurationError("need 0 < center_scale < half_width for an interior optimum")
    rng = np.random.default_rng(seed)
    d = n * dim_per_agent
    centers = rng.uniform(-center_scale, center_scale, size=(n, d))
    c_mean = centers.mean(axis=0)
    w = float(half_width)

    def local_costs(flat, check=True):
        flat = np.asarray(flat, dtype=float)
        if check and np.max(np.abs(flat)) > w + 1e-9:
            raise DomainError("action outside the box")
        diff = flat[None, :] - centers
        return 0.5 * np.einsum("ij,ij->i", diff, diff)

    def grad(flat):
        return np.asarray(flat, dtype=float) - c_mean

    def local_grads(flat):
        return np.asarray(flat, dtype=float)[None, :] - centers

    f_star = float(0.5 * np.mean(np.sum(centers**2, axis=1)) - 0.5 * np.dot(c_mean, c_mean))
    # exact worst-case values over the box
    far_sq = np.maximum((-w - centers) ** 2, (w - centers) ** 2).sum(axis=1)
    lipschitz = float(np.sqrt(far_sq.max()))
    gap_max = float(0.5 * np.maximum((-w - c_mean) ** 2, (w - c_mean) ** 2).sum())
    sets = [Box(np.full(dim_per_agent, -w), np.full(dim_per_agent, w)) for _ in range(n)]
    return Problem(
        name="box_quadratic",
        dims=[dim_per_agent] * n,
        sets=sets,
        local_costs=local_costs,
        grad=grad,
        local_grads=local_grads,
        affected=[frozenset(range(n)) for _ in range(n)],
        f_star=f_star,
        x_star=c_mean.copy(),
        f_lower=f_star,
        meta={
            "lipschitz": lipschitz,
            "smoothness": 1.0,
            "outer_radius": w * np.sqrt(d),
            "inner_radius": w,
            # exact max of 0.5||x* - x||^2 over the box: the optimum is
            # interior, so the farthest point flips every coordinate's sign
            "breg_diameter": float(0.5 * ((w + np.abs(c_mean)) ** 2).sum()),
            "gap_max": gap_max,
            "constants_estimated": False,
        },
    )


# ---------------------------------------------------------------------------
# smooth nonconvex trigonometric sum


def build_trig_sum(n: int, dim_per_agent: int, seed: int) -> Problem:
    """f_i(x) = sum_k a_ik (1 - cos(x_k - phi_ik)), unconstrained.

    Smooth and nonconvex with exact Lipschitz/smoothness constants
    (G = max_i ||a_i||, L = max_ik a_ik) and a global lower bound of 0.
    """
    rng = np.random.default_rng(seed)
    d = n * dim_per_agent
    amps = rng.uniform(0.3, 1.0, size=(n, d))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n, d))

    def local_costs(flat, check=True):
        flat = np.asarray(flat, dtype=float)
        return np.sum(amps * (1.0 - np.cos(flat[None, :] - phases)), axis=1)

    def local_grads(flat):
        flat = np.asarray(flat, dtype=float)
        return amps * np.sin(flat[None, :] - phases)

    def grad(flat):
        return local_grads(flat).mean(axis=0)

    return Problem(
        name="trig_sum",
        dims=[dim_per_agent] * n,
        sets=[WholeSpace(dim_per_agent) for _ in range(n)],
        local_costs=local_costs,
        grad=grad,
        local_grads=local_grads,
        affected=[frozenset(range(n)) for _ in range(n)],
        f_lower=0.0,
        meta={
            "lipschitz": float(np.linalg.norm(amps, axis=1).max()),
            "smoothness": float(amps.max()),
            "constants_estimated": False,
        },
    )


# ---------------------------------------------------------------------------
# congestion routing benchmark


@dataclass
class RoutingInstance:
    """Traffic-routing benchmark: agents split traffic over shared routes.

    Agents come in consecutive groups; group g (0-indexed) may use
    routes {2g, ..., 2g + 3}, so neighbouring groups share two routes
    and the number of routes is 2 * n_groups + 2. Route r has unit cost
    c_r(q) = quad_r q^2 + lin_r q + offset_r at total load q.
    """

    n_groups: int
    agents_per_group: int
    routes: np.ndarray  # (n, k) 0-based route ids
    traffic: np.ndarray  # (n,)
    quad: np.ndarray  # (m,)
    lin: np.ndarray  # (m,)
    offset: np.ndarray  # (m,)
    groups: np.ndarray  # (n,)

    @property
    def n_agents(self) -> int:
        return self.routes.shape[0]

    @property
    def routes_per_agent(self) -> int:
        return self.routes.shape[1]

    @property
    def n_routes(self) -> int:
        return 2 * self.n_groups + 2


def build_routing_instance(
    n_groups: int, agents_per_group: int, seed: int
) -> RoutingInstance:
    if n_groups < 1 or agents_per_group < 1:
        raise ConfigurationError("need at least one group and one agent per group")
    rng = np.random.default_rng(seed)
    n = n_groups * agents_per_group
    m = 2 * n_groups + 2
    groups = np.repeat(np.arange(n_groups), agents_per_group)
    routes = np.stack([2 * g + np.arange(4) for g in groups])
    traffic = np.abs(rng.normal(1.0, np.sqrt(0.2), size=n))
    quad = np.abs(rng.normal(0.0, np.sqrt(0.8), size=m))
    lin = np.abs(rng.normal(0.0, np.sqrt(0.8), size=m))
    offset = np.abs(rng.normal(0.0, np.sqrt(0.8), size=m))
    return RoutingInstance(
        n_groups=n_groups,
        agents_per_group=agents_per_group,
        routes=routes,
        traffic=traffic,
        quad=quad,
        lin=lin,
        offset=offset,
        groups=groups,
    )


def eval_allocation(inst: RoutingInstance, v: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-agent costs and the system cost of a full allocation v (n, k).

    The system cost is computed independently in per-route form
    (1/n) sum_r q_r c_r(q_r) and must agree with the mean of the
    per-agent costs; the two are the same sum in different orders.
    """
    v = np.asarray(v, dtype=float)
    m = inst.n_routes
    loads = np.bincount(
        inst.routes.ravel(), weights=(v * inst.traffic[:, None]).ravel(), minlength=m
    )
    unit = (inst.quad * loads + inst.lin) * loads + inst.offset
    per_agent = inst.traffic * np.einsum("ik,ik->i", v, unit[inst.routes])
    f_routes = float(np.dot(loads, unit)) / inst.n_agents
    assert abs(per_agent.mean() - f_routes) <= 1e-12 * max(1.0, abs(f_routes)), (
        "per-agent and per-route cost aggregation disagree"
    )
    return per_agent, f_routes


def route_loads(inst: RoutingInstance, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.bincount(
        inst.routes.ravel(), weights=(v * inst.traffic[:, None]).ravel(),
        minlength=inst.n_routes,
    )


def reduced_to_alloc(inst: RoutingInstance, x: np.ndarray) -> np.ndarray:
    """Reduced coordinates (n, k-1) -> full allocation (n, k).

    The reduced block is the first k-1 route fractions re-centered so
    the uniform split maps to the origin; the dropped fraction is
    recovered from the unit sum.
    """
    k = inst.routes_per_agent
    x = np.asarray(x, dtype=float).reshape(inst.n_agents, k - 1)
    head = x + 1.0 / k
    return np.concatenate([head, 1.0 - head.sum(axis=1, keepdims=True)], axis=1)


def alloc_to_reduced(inst: RoutingInstance, v: np.ndarray) -> np.ndarray:
    k = inst.routes_per_agent
    v = np.asarray(v, dtype=float).reshape(inst.n_agents, k)
    return v[:, :-1] - 1.0 / k


def routing_affected_sets(inst: RoutingInstance) -> list[frozenset[int]]:
    """A_i = agents sharing at least one route with i (includes i)."""
    route_sets = [set(r) for r in inst.routes.tolist()]
    return [
        frozenset(j for j in range(inst.n_agents) if route_sets[i] & route_sets[j])
        for i in range(inst.n_agents)
    ]


def routing_problem(inst: RoutingInstance) -> Problem:
    n = inst.n_agents
    k = inst.routes_per_agent
    dim = k - 1
    shift = -1.0 / k
    sets = [ShiftedSimplex(dim, shift=shift) for _ in range(n)]
    lo = shift  # reduced-coordinate lower bound for the fast check

    def local_costs(flat, check=True):
        x = np.asarray(flat, dtype=float).reshape(n, dim)
        if check:
            w = x - lo
            if np.min(w) < -1e-9 or np.max(w.sum(axis=1)) > 1.0 + 1e-9:
                bad = int(np.argmax(np.maximum(-w.min(axis=1), w.sum(axis=1) - 1.0)))
                raise DomainError(f"agent {bad + 1} action outside its simplex")
        per_agent, _ = eval_allocation(inst, reduced_to_alloc(inst, x))
        return per_agent

    def grad(flat):
        x = np.asarray(flat, dtype=float).reshape(n, dim)
        v = reduced_to_alloc(inst, x)
        loads = route_loads(inst, v)
        marginal = inst.offset + 2.0 * inst.lin * loads + 3.0 * inst.quad * loads**2
        mc = marginal[inst.routes]  # (n, k)
        g = (inst.traffic[:, None] / n) * (mc[:, :-1] - mc[:, -1:])
        return g.ravel()

    shared = _shared_route_positions(inst)

    def local_grads(flat):
        x = np.asarray(flat, dtype=float).reshape(n, dim)
        v = reduced_to_alloc(inst, x)
        loads = route_loads(inst, v)
        unit = (inst.quad * loads + inst.lin) * loads + inst.offset
        slope = inst.lin + 2.0 * inst.quad * loads
        out = np.zeros((n, n, k))
        for i in range(n):
            out[i, i, :] += inst.traffic[i] * unit[inst.routes[i]]
            for j, (pos_i, pos_j) in shared[i].items():
                r = inst.routes[i, pos_i]
                out[i, j, pos_j] += (
                    inst.traffic[i] * v[i, pos_i] * slope[r] * inst.traffic[j]
                )
        reduced = out[:, :, :-1] - out[:, :, -1:]
        return reduced.reshape(n, n * dim)

    return Problem(
        name="routing",
        dims=[dim] * n,
        sets=sets,
        local_costs=local_costs,
        grad=grad,
        local_grads=local_grads,
        affected=routing_affected_sets(inst),
        f_lower=0.0,
        meta={
            "instance": inst,
            "inner_radius": 1.0 / (k * np.sqrt(dim)),
            "constants_estimated": True,
        },
    )


def _shared_route_positions(inst: RoutingInstance):
    """For each agent i: {j: (positions in R_i, positions in R_j)} over
    shared routes, i != j handled together with j == i."""
    n, k = inst.routes.shape
    where = {}
    for j in range(n):
        for pos, r in enumerate(inst.routes[j]):
            where.setdefault(int(r), []).append((j, pos))
    shared: list[dict[int, tuple[np.ndarray, np.ndarray]]] = [dict() for _ in range(n)]
    pair_lists: list[dict[int, list[tuple[int, int]]]] = [dict() for _ in range(n)]
    for i in range(n):
        for pos_i, r in enumerate(inst.routes[i]):
            for j, pos_j in where[int(r)]:
                pair_lists[i].setdefault(j, []).append((pos_i, pos_j))
    for i in range(n):
        for j, pairs in pair_lists[i].items():
            pi = np.array([p[0] for p in pairs], dtype=int)
            pj = np.array([p[1] for p in pairs], dtype=int)
            shared[i][j] = (pi, pj)
    return shared


def sample_feasible_reduced(inst: RoutingInstance, rng: np.random.Generator) -> np.ndarray:
    """Uniform allocation per agent (flat Dirichlet) in reduced coords."""
    n, k = inst.routes.shape
    cuts = np.sort(rng.random((n, k - 1)), axis=1)
    v = np.diff(np.concatenate([np.zeros((n, 1)), cuts, np.ones((n, 1))], axis=1), axis=1)
    return alloc_to_reduced(inst, v)


def estimate_constants(
    problem: Problem, n_samples: int = 200, seed: int = 0
) -> tuple[float, float]:
    """Sampled Lipschitz (G) and smoothness (L) estimates with a safety
    factor, for problems without closed-form constants."""
    if problem.local_grads is None:
        raise ConfigurationError("constant estimation needs local gradients")
    rng = np.random.default_rng(seed)
    inst = problem.meta.get("instance")
    grads = []
    points = []
    for _ in range(n_samples):
        if inst is not None:
            x = sample_feasible_reduced(inst, rng).ravel()
        else:
            x = problem.project_feasible(rng.normal(size=problem.total_dim))
        points.append(x)
        grads.append(problem.local_grads(x))
    g_hat = max(float(np.linalg.norm(g, axis=1).max()) for g in grads)
    l_hat = 0.0
    for a in range(0, n_samples - 1, 2):
        dx = float(np.linalg.norm(points[a] - points[a + 1]))
        if dx < 1e-12:
            continue
        dg = float(np.linalg.norm(grads[a] - grads[a + 1], axis=1).max())
        l_hat = max(l_hat, dg / dx)
    return 1.2 * g_hat, 1.5 * max(l_hat, 1e-12)


# ---------------------------------------------------------------------------
# centralized reference solver


@dataclass
class SolveResult:
    x: np.ndarray
    f: float
    n_iter: int
    converged: bool
    residual: float


def centralized_solve(
    problem: Problem,
    x0: np.ndarray | None = None,
    max_iter: int = 200_000,
    tol: float = 1e-9,
    require_convergence: bool = False,
) -> SolveResult:
    """Projected gradient descent with backtracking line search.

    Stops when the prox-gradient residual ||x+ - x|| / step falls below
    `tol`. For convex problems the result is the global optimum; for
    nonconvex ones it is a stationary point.
    """
    if problem.grad is None and problem.local_grads is None:
        raise ConfigurationError("centralized solve needs a gradient")
    grad = problem.grad or (lambda x: problem.local_grads(x).mean(axis=0))
    x = problem.project_feasible(
        np.zeros(problem.total_dim) if x0 is None else np.asarray(x0, dtype=float)
    )
    f_x = problem.global_cost(x, check=False)
    step = 1.0
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        while True:
            x_new = problem.project_feasible(x - step * g)
            diff = x_new - x
            sq = float(np.dot(diff, diff))
            f_new = problem.global_cost(x_new, check=False)
            if f_new <= f_x + float(np.dot(g, diff)) + sq / (2.0 * step) + 1e-15:
                break
            step *= 0.5
            if step < 1e-18:
                raise OracleError("line search collapsed; gradient may be wrong")
        residual = np.sqrt(sq) / step
        x, f_x = x_new, f_new
        if residual <= tol:
            return SolveResult(x=x, f=f_x, n_iter=it, converged=True, residual=residual)
        step = min(step * 1.3, 1e6)
    result = SolveResult(x=x, f=f_x, n_iter=it, converged=False, residual=residual)
    if require_convergence:
        raise OracleError(
            f"reference solver did not reach tolerance {tol} in {max_iter} "
            f"iterations (residual {residual:.3e})"
        )
    return result
