"""Round-synchronous simulator for the zeroth-order feedback protocol.

Each round every agent, in lockstep: samples a feasibility-constrained
Gaussian perturbation, takes the two signed perturbed actions (all agents
synchronously), observes its own local cost twice, forms the difference
quotient, merges the info tables received from neighbors (sent at the end of
the previous round), sends its post-merge table, assembles its gradient block
from the freshest quotients paired with its own stored perturbations, and
performs a projected step on the shrunken feasible set.

The engine is vectorized across agents: all per-agent quantities live in
``(n, d_max)`` arrays (rows zero-padded past each agent's dimension), and
agents whose feasible sets share the same parameters are processed in one
batched geometry call.

Randomness is drawn from per-agent streams keyed by ``(master seed, purpose,
agent id)``, so traces are a pure function of ``(config, seed)`` and do not
depend on scheduling or on table mode.  Diagnostic metrics (global cost,
optimality gap, gradient norms) use centralized information that no agent
sees; they never feed back into the protocol.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .agents import SwarmTables
from .errors import ConfigurationError, DomainError, OracleError, ProtocolViolation
from .geometry import (
    Ball,
    Box,
    ConvexSet,
    SampleStats,
    ShiftedSimplex,
    WholeSpace,
    constrain_perturbation_batch,
)
from .network import CommGraph, DelayModel, NoDelay, check_compatibility, shortest_path_lengths
from .problems import Problem

__all__ = [
    "RunConfig",
    "RoundView",
    "RunTrace",
    "run",
    "metrics_snapshot",
    "write_trace_csv",
    "summary_dict",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = ("t", "f", "gap", "grad_sq", "stale_max", "feasible", "fallbacks")

_FEASIBILITY_TOL = 1e-9
_STEP_BOUND_TOL = 1e-9

# Stream purposes: every generator is seeded by (master seed, purpose, index).
_PURPOSE_PERTURBATION = 0
_PURPOSE_NOISE = 1
_PURPOSE_NETWORK = 2

# Rounds of raw Gaussian draws materialized per refill.
_BLOCK_ROUNDS = 2048


def _stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(purpose), int(index)]))


def _set_group_key(s: ConvexSet):
    """Agents whose sets compare equal under this key share batched calls."""
    if isinstance(s, WholeSpace):
        return ("free", s.dim)
    if isinstance(s, Box):
        return ("box", s.lower.tobytes(), s.upper.tobytes())
    if isinstance(s, Ball):
        return ("ball", s.center.tobytes(), s.radius)
    if isinstance(s, ShiftedSimplex):
        return ("simplex", s.dim, s.shift.tobytes(), s.scale)
    return ("unique", id(s))


@dataclass
class RunConfig:
    """Everything one simulated run needs.

    ``mode`` selects the estimator: ``"full"`` sums every tracked column,
    ``"dependence"`` sums only the columns of costs the agent actually
    affects (requires the problem to carry dependence sets).
    ``reduced_tables`` additionally stops tracking and forwarding the other
    columns, which is sound only when the graph is compatible with the
    dependence sets; the run refuses to start otherwise.

    ``strict_staleness`` turns a measured extra delay above the delay
    model's declared bound into an abort instead of a flagged summary.
    """

    problem: Problem
    graph: CommGraph
    eta: float
    u: float
    horizon: int
    delta: float = 0.0
    sigma: float = 0.0
    mode: str = "full"
    reduced_tables: bool = False
    delay: DelayModel = field(default_factory=NoDelay)
    seed: int = 0
    metric_every: int = 100
    x0: np.ndarray | None = None
    strict_staleness: bool = False
    track_gradients: bool = True
    history_slack: int = 32
    probe: Callable[["RoundView"], None] | None = None
    echo: dict | None = None  # round-trippable source config, echoed in summaries

    def describe(self) -> dict:
        """Best-effort JSON-able description (used when no echo is attached)."""
        return {
            "problem": self.problem.name,
            "dims": [int(d) for d in self.problem.dims],
            "graph": {"n": self.graph.n, "edges": [[i + 1, j + 1] for i, j in self.graph.edges]},
            "eta": float(self.eta),
            "u": float(self.u),
            "delta": float(self.delta),
            "sigma": float(self.sigma),
            "horizon": int(self.horizon),
            "mode": self.mode,
            "reduced_tables": bool(self.reduced_tables),
            "delay": repr(self.delay),
            "seed": int(self.seed),
            "metric_every": int(self.metric_every),
        }


@dataclass
class RoundView:
    """Live references handed to a probe after the merge/assemble phase.

    Arrays are the engine's working storage: copy anything you keep.
    ``x`` is the round's pre-step state; ``x_next`` the post-step state.
    """

    t: int
    x: np.ndarray
    z: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray
    quotients: np.ndarray
    tables: SwarmTables
    staleness: np.ndarray
    gradient: np.ndarray
    x_next: np.ndarray
    dims: np.ndarray
    dim_mask: np.ndarray


@dataclass
class RunTrace:
    """Outputs of one run: cadence rows plus ergodic and protocol summaries."""

    rows: list[dict]
    x_final: np.ndarray
    x_ergodic: np.ndarray
    f_final: float
    f_ergodic: float
    gap_final: float | None
    gap_ergodic: float | None
    grad_sq_final: float | None
    grad_sq_mean_ergodic: float | None
    samples: int
    stale_max_overall: int
    delta_hat: int
    assumption_clean: bool
    staleness_bound: int
    feasibility_checks: int
    feasibility_violations: int
    cap_projections: int
    fallback_projections: int
    step_bound_max_excess: float
    payload_columns: list[int]
    payload_floats_per_round: int
    wall_time: float
    seed: int
    notes: tuple[str, ...]


def _finite_difference_gradient(problem: Problem, flat: np.ndarray, step: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(flat)
    probe = flat.copy()
    for k in range(flat.size):
        probe[k] = flat[k] + step
        hi = problem.global_cost(probe, check=False)
        probe[k] = flat[k] - step
        lo = problem.global_cost(probe, check=False)
        probe[k] = flat[k]
        grad[k] = (hi - lo) / (2.0 * step)
    return grad


def metrics_snapshot(
    problem: Problem,
    flat: np.ndarray,
    t: int,
    delta: float = 0.0,
    u: float | None = None,
    z_flat: np.ndarray | None = None,
    fd_step: float = 1e-5,
) -> dict:
    """Centralized diagnostics at one state: cost, gap, gradient, feasibility.

    The feasibility flag asserts ``x`` lies in every agent's shrunken set
    and, when ``u`` and ``z_flat`` are given, that both signed perturbed
    actions are feasible in the unshrunken sets (tolerance 1e-9).  Uses the
    problem's analytic gradient when available, otherwise central finite
    differences at ``fd_step`` with the estimate flagged.
    """
    flat = np.asarray(flat, dtype=float)
    f_value = problem.global_cost(flat, check=False)
    gap = None if problem.f_star is None else f_value - problem.f_star
    if problem.grad is not None:
        grad = problem.grad(flat)
        estimated = False
    else:
        grad = _finite_difference_gradient(problem, flat, fd_step)
        estimated = True
    feasible = True
    blocks = problem.split(flat)
    z_blocks = problem.split(np.asarray(z_flat, dtype=float)) if z_flat is not None else None
    for i, (s, b) in enumerate(zip(problem.sets, blocks)):
        if not s.shrink(delta).contains(b, _FEASIBILITY_TOL):
            feasible = False
            break
        if z_blocks is not None and u is not None:
            z = z_blocks[i]
            if not (s.contains(b + u * z, _FEASIBILITY_TOL) and s.contains(b - u * z, _FEASIBILITY_TOL)):
                feasible = False
                break
    return {
        "t": int(t),
        "f": float(f_value),
        "gap": None if gap is None else float(gap),
        "grad_sq": float(np.dot(grad, grad)),
        "grad_estimated": estimated,
        "feasible": bool(feasible),
    }


def _validate(config: RunConfig) -> None:
    p, g = config.problem, config.graph
    if p.n != g.n:
        raise ConfigurationError(f"problem has {p.n} agents but the graph has {g.n} nodes")
    if config.u <= 0:
        raise ConfigurationError(f"smoothing radius u must be > 0, got {config.u}")
    if config.eta < 0:
        raise ConfigurationError(f"step size eta must be >= 0, got {config.eta}")
    if not (0.0 <= config.delta < 1.0):
        raise ConfigurationError(f"shrinkage factor delta must lie in [0, 1), got {config.delta}")
    if config.sigma < 0:
        raise ConfigurationError(f"noise level sigma must be >= 0, got {config.sigma}")
    if config.mode not in ("full", "dependence"):
        raise ConfigurationError(f"mode must be 'full' or 'dependence', got {config.mode!r}")
    if config.metric_every < 1:
        raise ConfigurationError("metric_every must be >= 1")
    if config.history_slack < 1:
        raise ConfigurationError("history_slack must be >= 1")
    if int(config.horizon) != config.horizon or config.horizon < 0:
        raise ConfigurationError(f"horizon must be a non-negative integer, got {config.horizon}")
    if config.mode == "dependence" and p.affected is None:
        raise ConfigurationError("dependence mode needs the problem's dependence sets")
    if config.reduced_tables and config.mode != "dependence":
        raise ConfigurationError("reduced tables require dependence mode")


def run(config: RunConfig) -> RunTrace:
    """Execute one seeded run and return its trace.

    Aborts with ``DomainError`` if any round would take an infeasible action
    (hard-constraint model), and with ``ProtocolViolation`` if a quotient's
    generation round has already left the perturbation history window (the
    staleness bound plus slack was exceeded).
    """
    started = time.perf_counter()
    _validate(config)
    problem, graph = config.problem, config.graph
    n = problem.n
    dims = np.asarray(problem.dims, dtype=np.int64)
    d_max = int(dims.max())
    eta, u, delta, sigma = config.eta, config.u, config.delta, config.sigma
    horizon = int(config.horizon)
    notes: list[str] = []

    dim_mask = np.zeros((n, d_max), dtype=bool)
    for i, d in enumerate(dims):
        dim_mask[i, :d] = True

    distances = shortest_path_lengths(graph)
    declared_delta = int(config.delay.declared_delta)
    staleness_bound = int(distances.max()) + declared_delta
    if horizon < staleness_bound:
        raise ConfigurationError(
            f"horizon {horizon} is below the staleness bound {staleness_bound}; "
            "no round would enter the ergodic window"
        )

    # --- agent groups sharing one feasible set ----------------------------
    groups: dict = {}
    for i, s in enumerate(problem.sets):
        groups.setdefault(_set_group_key(s), (s, []))[1].append(i)
    set_groups = [
        (s, np.asarray(rows, dtype=np.int64), int(s.dim), s.shrink(delta))
        for s, rows in groups.values()
    ]

    inner_radii = [s.inner_radius() for s, _, _, _ in set_groups]
    if all(np.isfinite(r) for r in inner_radii):
        hypothesis = delta * min(inner_radii) / (3.0 * np.sqrt(problem.total_dim))
        if u > hypothesis:
            notes.append(
                f"smoothing radius u = {u} exceeds the analyzed range "
                f"delta * inner_radius / (3 sqrt(d)) = {hypothesis}; "
                "convergence guarantees may not apply"
            )

    # --- estimator masks and tables ---------------------------------------
    aff_mask = None
    if config.mode == "dependence":
        aff_mask = np.zeros((n, n), dtype=bool)
        for j, who in enumerate(problem.affected):
            aff_mask[list(who), j] = True
    if config.reduced_tables:
        report = check_compatibility(graph, problem.affected)
        if not report.compatible:
            raise ConfigurationError(
                "reduced tables need a graph compatible with the dependence sets; "
                f"blocking (tracker, non-tracker, column) triples: {report.witnesses[:5]}"
            )
        tracked = aff_mask.copy()
        np.fill_diagonal(tracked, True)
    else:
        tracked = np.ones((n, n), dtype=bool)
    swarm = SwarmTables(n, tracked)
    use_mask = aff_mask if config.mode == "dependence" else None

    # --- neighbor matrix (rows padded with the agent itself) --------------
    max_deg = max(graph.degree(i) for i in range(n))
    neighbor_matrix = np.tile(np.arange(n, dtype=np.int64)[:, None], (1, max(max_deg, 1)))
    for i in range(n):
        nb = graph.neighbors[i]
        neighbor_matrix[i, : len(nb)] = nb

    # --- perturbation history ring ----------------------------------------
    cap = staleness_bound + int(config.history_slack)
    z_hist = np.zeros((cap, n, d_max))
    hist_rounds = np.full(cap, -1, dtype=np.int64)

    # --- random streams -----------------------------------------------------
    perturb_gens = [_stream(config.seed, _PURPOSE_PERTURBATION, i) for i in range(n)]
    noise_gens = (
        [_stream(config.seed, _PURPOSE_NOISE, i) for i in range(n)] if sigma > 0 else None
    )
    net_gen = _stream(config.seed, _PURPOSE_NETWORK, 0)
    block_rounds = min(horizon + 1, _BLOCK_ROUNDS)
    zhat_block = np.zeros((block_rounds, n, d_max))
    noise_block = np.zeros((block_rounds, n, 2)) if sigma > 0 else None

    def refill(start: int) -> None:
        count = min(block_rounds, horizon + 1 - start)
        for i in range(n):
            zhat_block[:count, i, : dims[i]] = perturb_gens[i].standard_normal((count, dims[i]))
            if noise_block is not None:
                noise_block[:count, i, :] = noise_gens[i].standard_normal((count, 2))

    # --- initial state -------------------------------------------------------
    x = np.zeros((n, d_max))
    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float)
        if x0.shape != (problem.total_dim,):
            raise ConfigurationError(
                f"x0 must be a flat vector of length {problem.total_dim}, got shape {x0.shape}"
            )
        x[dim_mask] = x0
    moved = 0.0
    for s, rows, dd, shrunk in set_groups:
        projected = shrunk.project_batch(x[rows, :dd])
        moved = max(moved, float(np.abs(projected - x[rows, :dd]).max(initial=0.0)))
        x[rows, :dd] = projected
    if moved > _FEASIBILITY_TOL:
        notes.append(
            f"initial point was projected into the shrunken feasible set (moved {moved:.3e})"
        )

    # --- accumulators ---------------------------------------------------------
    stats = SampleStats()
    track_grad = config.track_gradients and problem.grad is not None
    x_acc = np.zeros(problem.total_dim)
    grad_sq_acc = 0.0
    samples = 0
    stale_max_overall = 0
    delta_hat = 0
    feasibility_checks = 0
    step_excess_max = 0.0
    rows_out: list[dict] = []
    x_final: np.ndarray | None = None
    prev_snapshot = None
    fd_noted = False

    untracked_penalty = np.iinfo(np.int64).min // 2

    for t in range(horizon + 1):
        bi = t % block_rounds
        if bi == 0:
            refill(t)

        # (1) constrained Gaussian perturbations
        raw = zhat_block[bi]
        z = np.zeros((n, d_max))
        for s, rows, dd, _ in set_groups:
            z[rows, :dd] = constrain_perturbation_batch(s, x[rows, :dd], raw[rows, :dd], u, stats)

        # hard-constraint checks: current state and both signed actions
        feasibility_checks += 1
        for s, rows, dd, shrunk in set_groups:
            xs = x[rows, :dd]
            zs = z[rows, :dd]
            ok_state = shrunk.contains_batch(xs, _FEASIBILITY_TOL)
            ok_plus = s.contains_batch(xs + u * zs, _FEASIBILITY_TOL)
            ok_minus = s.contains_batch(xs - u * zs, _FEASIBILITY_TOL)
            bad = ~(ok_state & ok_plus & ok_minus)
            if bool(np.any(bad)):
                agent = int(rows[int(np.argmax(bad))])
                raise DomainError(
                    f"agent {agent + 1} would act outside its feasible set at round {t}"
                )

        slot = t % cap
        z_hist[slot] = z
        hist_rounds[slot] = t

        # (2)-(3) synchronous signed actions; every agent observes its cost
        flat_plus = (x + u * z)[dim_mask]
        flat_minus = (x - u * z)[dim_mask]
        f_plus = np.asarray(problem.local_costs(flat_plus, check=False), dtype=float)
        f_minus = np.asarray(problem.local_costs(flat_minus, check=False), dtype=float)
        if sigma > 0:
            f_plus = f_plus + sigma * noise_block[bi, :, 0]
            f_minus = f_minus + sigma * noise_block[bi, :, 1]

        # (4) difference quotients, stamped with the current round
        quotients = (f_plus - f_minus) / (2.0 * u)
        swarm.record_own(t, quotients)

        # (5) merge the tables neighbors sent at the end of the previous round
        if t > 0 and max_deg > 0:
            drop = config.delay.drop_mask(net_gen, (n, max_deg))
            swarm.merge_from(prev_snapshot, neighbor_matrix, drop)
        # (6) the post-merge snapshot is what everyone sends this round
        prev_snapshot = swarm.snapshot()

        stale = swarm.staleness(t)
        stale_now = int(stale.max(initial=0))
        stale_max_overall = max(stale_max_overall, stale_now)
        extra_now = int(
            np.where(tracked, stale - distances, untracked_penalty).max(initial=untracked_penalty)
        )
        if extra_now > delta_hat:
            delta_hat = extra_now
            if config.strict_staleness and delta_hat > declared_delta:
                raise ProtocolViolation(
                    f"measured extra staleness {delta_hat} exceeds the declared bound "
                    f"{declared_delta} at round {t}"
                )

        # (7) assemble gradient blocks and take the projected step
        gradient = swarm.assemble(z_hist, hist_rounds, use_mask)
        x_next = np.zeros((n, d_max))
        for s, rows, dd, shrunk in set_groups:
            x_next[rows, :dd] = shrunk.project_batch(x[rows, :dd] - eta * gradient[rows, :dd])

        step_norm = np.linalg.norm((x_next - x).reshape(n, -1), axis=1)
        step_cap = eta * np.linalg.norm(gradient.reshape(n, -1), axis=1)
        excess = float((step_norm - step_cap).max(initial=0.0))
        step_excess_max = max(step_excess_max, excess)
        if excess > _STEP_BOUND_TOL * max(1.0, float(np.abs(x).max(initial=0.0))):
            raise OracleError(
                f"projected step moved farther than the step bound allows at round {t} "
                f"(excess {excess:.3e}); projection output is not certified"
            )

        flat = x[dim_mask]
        if t >= staleness_bound:
            x_acc += flat
            samples += 1
            if track_grad:
                g_now = problem.grad(flat)
                grad_sq_acc += float(np.dot(g_now, g_now))

        if t == 0 or t % config.metric_every == 0 or t == horizon:
            row = metrics_snapshot(problem, flat, t, delta=delta, u=u, z_flat=z[dim_mask])
            if row["grad_estimated"] and not fd_noted:
                fd_noted = True
                notes.append(
                    "no analytic gradient available; cadence rows use finite differences"
                )
            row["stale_max"] = stale_now
            row["fallbacks"] = stats.fallbacks
            rows_out.append(row)
            if not row["feasible"]:
                raise DomainError(f"feasibility check failed at round {t}")

        if config.probe is not None:
            config.probe(
                RoundView(
                    t=t,
                    x=x,
                    z=z,
                    f_plus=f_plus,
                    f_minus=f_minus,
                    quotients=quotients,
                    tables=swarm,
                    staleness=stale,
                    gradient=gradient,
                    x_next=x_next,
                    dims=dims,
                    dim_mask=dim_mask,
                )
            )

        if t == horizon:
            x_final = flat.copy()
        x = x_next

    x_ergodic = x_acc / samples
    f_final = problem.global_cost(x_final, check=False)
    f_ergodic = problem.global_cost(x_ergodic, check=False)
    gap_final = None if problem.f_star is None else f_final - problem.f_star
    gap_ergodic = None if problem.f_star is None else f_ergodic - problem.f_star
    if problem.grad is not None:
        g_fin = problem.grad(x_final)
        grad_sq_final = float(np.dot(g_fin, g_fin))
    else:
        grad_sq_final = None

    payload_columns = [int(c) for c in tracked.sum(axis=1)]
    payload_floats = int(sum(graph.degree(i) * 2 * payload_columns[i] for i in range(n)))

    return RunTrace(
        rows=rows_out,
        x_final=x_final,
        x_ergodic=x_ergodic,
        f_final=float(f_final),
        f_ergodic=float(f_ergodic),
        gap_final=gap_final,
        gap_ergodic=gap_ergodic,
        grad_sq_final=grad_sq_final,
        grad_sq_mean_ergodic=(grad_sq_acc / samples) if track_grad else None,
        samples=samples,
        stale_max_overall=stale_max_overall,
        delta_hat=max(0, delta_hat),
        assumption_clean=max(0, delta_hat) <= declared_delta,
        staleness_bound=staleness_bound,
        feasibility_checks=feasibility_checks,
        feasibility_violations=0,
        cap_projections=stats.projections,
        fallback_projections=stats.fallbacks,
        step_bound_max_excess=step_excess_max,
        payload_columns=payload_columns,
        payload_floats_per_round=payload_floats,
        wall_time=time.perf_counter() - started,
        seed=int(config.seed),
        notes=tuple(notes),
    )


def write_trace_csv(trace: RunTrace, path) -> None:
    """Write the cadence rows as CSV with the documented column set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace.rows:
            writer.writerow(
                [
                    row["t"],
                    repr(row["f"]),
                    "" if row["gap"] is None else repr(row["gap"]),
                    repr(row["grad_sq"]),
                    row["stale_max"],
                    int(row["feasible"]),
                    row["fallbacks"],
                ]
            )


def summary_dict(trace: RunTrace, config: RunConfig) -> dict:
    """JSON-able run summary: ergodic outputs, protocol health, config echo."""
    return {
        "version": 1,
        "seed": trace.seed,
        "samples": trace.samples,
        "f_final": trace.f_final,
        "f_ergodic": trace.f_ergodic,
        "gap_final": trace.gap_final,
        "gap_ergodic": trace.gap_ergodic,
        "grad_sq_final": trace.grad_sq_final,
        "grad_sq_mean_ergodic": trace.grad_sq_mean_ergodic,
        "x_final": [float(v) for v in trace.x_final],
        "x_ergodic": [float(v) for v in trace.x_ergodic],
        "staleness": {
            "bound": trace.staleness_bound,
            "max_observed": trace.stale_max_overall,
            "extra_observed": trace.delta_hat,
            "assumption_clean": trace.assumption_clean,
        },
        "feasibility": {
            "checks": trace.feasibility_checks,
            "violations": trace.feasibility_violations,
        },
        "projections": {
            "cap": trace.cap_projections,
            "fallbacks": trace.fallback_projections,
        },
        "step_bound_max_excess": trace.step_bound_max_excess,
        "payload": {
            "columns_per_agent": trace.payload_columns,
            "floats_per_round": trace.payload_floats_per_round,
        },
        "wall_time": trace.wall_time,
        "notes": list(trace.notes),
        "config": config.echo if config.echo is not None else config.describe(),
    }
