"""Acceptance suite.

Each test exercises one advertised guarantee end to end and prints a
single PASS/FAIL line (visible with ``pytest -s`` or on failure).  The
quantitative thresholds and runtime budgets are stated inline; every
expected value is either computed exactly, re-derived independently in
the test, or measured against a reference oracle.
"""

import dataclasses
import itertools
import time

import numpy as np

from zfo.geometry import WholeSpace, constrain_perturbation_batch
from zfo.network import (
    CommGraph,
    check_compatibility,
    network_stats,
    shortest_path_lengths,
)
from zfo.planner import ProblemConstants, constants_for, expected_gap_bound, plan, scaling_report
from zfo.problems import (
    build_box_quadratic,
    build_routing_instance,
    centralized_solve,
    routing_problem,
)
from zfo.runner import RunConfig, run


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _solved_routing(groups: int, per: int, seed: int):
    instance = build_routing_instance(groups, per, seed=seed)
    problem = routing_problem(instance)
    result = centralized_solve(problem, tol=1e-10, require_convergence=True)
    return dataclasses.replace(problem, f_star=result.f, x_star=result.x)


# ---------------------------------------------------------------------------
# 1. estimator unbiasedness (unconstrained quadratic)
# ---------------------------------------------------------------------------


def test_acceptance_1_estimator_unbiasedness():
    """Monte Carlo mean of the two-point estimator matches the gradient.

    f(x) = ||x||^2 at a fixed random point, 1e5 Gaussian directions: for
    a quadratic the difference quotient is exact and u-independent, so
    the estimator mean must equal the gradient within 3 standard errors
    per coordinate.  Budget: < 5 s.
    """
    start = time.perf_counter()
    d, n_samples, u = 8, 100_000, 0.01
    rng = np.random.default_rng(7)
    x = rng.normal(size=d)
    grad = 2.0 * x

    raw = rng.standard_normal((n_samples, d))
    z = constrain_perturbation_batch(WholeSpace(d), np.tile(x, (n_samples, 1)), raw, u)
    f_plus = np.sum((x + u * z) ** 2, axis=1)
    f_minus = np.sum((x - u * z) ** 2, axis=1)
    quotients = (f_plus - f_minus) / (2.0 * u)
    estimates = quotients[:, None] * z

    mean = estimates.mean(axis=0)
    stderr = estimates.std(axis=0, ddof=1) / np.sqrt(n_samples)
    deviation = np.abs(mean - grad)
    ok = bool(np.all(deviation <= 3.0 * stderr))
    elapsed = time.perf_counter() - start
    _report(
        1,
        ok and elapsed < 5.0,
        f"max |mean - grad| / stderr = {np.max(deviation / stderr):.2f} "
        f"(need <= 3) over {d} coords, {n_samples} draws, {elapsed:.2f}s (< 5s)",
    )


# ---------------------------------------------------------------------------
# 2. second-moment bound of the gossiped estimator terms
# ---------------------------------------------------------------------------


def test_acceptance_2_moment_bound():
    """Empirical E||D_j z^i||^2 stays below (12 G^2 + sigma^2/(2u^2)) d_i.

    Linear local costs make the quotient's Lipschitz content exact
    (D_j = a_j . z plus the noise difference), so G is known by
    construction.  1e5 protocol samples for (sigma, u) in
    {(0, 0.01), (0.1, 0.01)}.  Budget: < 30 s.
    """
    start = time.perf_counter()
    dims = [4, 4]
    offsets = [0, 4]
    d = sum(dims)
    n_samples = 100_000
    rng = np.random.default_rng(11)
    a = rng.normal(size=(2, d))
    a *= 1.5 / np.linalg.norm(a, axis=1, keepdims=True)  # ||a_j|| = G exactly
    lipschitz = 1.5

    worst = -np.inf
    for sigma, u in ((0.0, 0.01), (0.1, 0.01)):
        z = rng.standard_normal((n_samples, d))
        noise = sigma * rng.standard_normal((n_samples, 2, 2))
        for j in range(2):
            f_plus = u * (z @ a[j]) + noise[:, j, 0]
            f_minus = -u * (z @ a[j]) + noise[:, j, 1]
            quotients = (f_plus - f_minus) / (2.0 * u)
            for i, (off, di) in enumerate(zip(offsets, dims)):
                norms_sq = np.sum(z[:, off : off + di] ** 2, axis=1)
                moment = float(np.mean(quotients**2 * norms_sq))
                bound = (12.0 * lipschitz**2 + sigma**2 / (2.0 * u**2)) * di
                worst = max(worst, moment / bound)
    ok = worst <= 1.0
    elapsed = time.perf_counter() - start
    _report(
        2,
        ok and elapsed < 30.0,
        f"max empirical moment / bound = {worst:.3f} (need <= 1) over all "
        f"(i, j, sigma) cases, {elapsed:.1f}s (< 30s)",
    )


# ---------------------------------------------------------------------------
# 3. feasibility is never violated over a full routing run
# ---------------------------------------------------------------------------


def test_acceptance_3_feasibility_always():
    """T = 1e4 routing rounds with zero feasibility violations at 1e-9.

    The engine certifies x(t) in the shrunken set and both perturbed
    actions in the true set every round (and aborts otherwise); a probe
    re-verifies independently against the set definitions.
    """
    problem = _solved_routing(2, 3, seed=1)
    graph = CommGraph.complete(6)
    delta, u = 0.05, 2e-3
    recheck = {"rounds": 0}

    def probe(view):
        recheck["rounds"] += 1
        for i, s in enumerate(problem.sets):
            xi = view.x[i, : view.dims[i]]
            zi = view.z[i, : view.dims[i]]
            assert s.shrink(delta).contains(xi, 1e-9)
            assert s.contains(xi + u * zi, 1e-9)
            assert s.contains(xi - u * zi, 1e-9)

    trace = run(
        RunConfig(
            problem=problem,
            graph=graph,
            eta=3e-2 / problem.f_star,
            u=u,
            delta=delta,
            horizon=10_000,
            seed=0,
            metric_every=1_000,
            track_gradients=False,
            probe=probe,
        )
    )
    ok = (
        trace.feasibility_violations == 0
        and trace.feasibility_checks == 10_001
        and recheck["rounds"] == 10_001
        and all(r["feasible"] for r in trace.rows)
    )
    _report(
        3,
        ok,
        f"{trace.feasibility_checks} engine checks + {recheck['rounds']} probe "
        f"re-checks at tol 1e-9, {trace.feasibility_violations} violations",
    )


# ---------------------------------------------------------------------------
# 4. exact delay accounting without drops
# ---------------------------------------------------------------------------


def test_acceptance_4_exact_delay_accounting():
    """With loss-free links, stamp ages equal hop distances exactly.

    Five random connected graphs (n <= 20): for every ordered pair
    (i, j) and every round t >= b_ij the table stamp is exactly
    t - b_ij (integer equality), and -1 before first contact.
    """
    checked_pairs = 0
    for n, seed in ((5, 0), (8, 1), (12, 2), (16, 3), (20, 4)):
        graph = CommGraph.random_connected(n, seed=seed)
        dist = shortest_path_lengths(graph)
        problem = build_box_quadratic(n, 1, seed=n)
        horizon = int(dist.max()) + 6
        stamps_by_round = []

        def probe(view):
            stamps_by_round.append(view.tables.stamps.copy())

        run(
            RunConfig(
                problem=problem,
                graph=graph,
                eta=0.0,
                u=1e-3,
                horizon=horizon,
                seed=seed,
                probe=probe,
            )
        )
        for t, stamps in enumerate(stamps_by_round):
            expected = np.where(t >= dist, t - dist, -1)
            np.testing.assert_array_equal(stamps, expected)
            checked_pairs += n * n
    _report(
        4,
        True,
        f"stamp == t - hop_distance exactly for {checked_pairs} (pair, round) "
        "checks across 5 random graphs (n = 5..20)",
    )


# ---------------------------------------------------------------------------
# 5. the convex-regime performance bound holds empirically
# ---------------------------------------------------------------------------


def test_acceptance_5_convex_bound_holds():
    """20-seed mean ergodic gap stays below the certified bound.

    Box-constrained quadratic with every constant (G, L, radii, Bregman
    diameter, network stats) computed exactly from the instance; the
    planner picks (eta, u, delta, T) for epsilon = 2.0 and the run's
    E[f(xbar(T))] - f* must not exceed the bound evaluated at those
    parameters.  Budget: < 5 min.
    """
    start = time.perf_counter()
    problem = build_box_quadratic(3, 2, seed=0)
    graph = CommGraph.path(3)
    stats = network_stats(graph, 0, dims=problem.dims)
    constants = constants_for(problem, stats)
    p = plan(constants, 2.0, "convex-noiseless")
    bound = expected_gap_bound(constants, p.eta, p.u, p.delta, p.horizon)

    gaps = []
    for seed in range(20):
        trace = run(
            RunConfig(
                problem=problem,
                graph=graph,
                eta=p.eta,
                u=p.u,
                delta=p.delta,
                horizon=p.horizon,
                seed=seed,
                metric_every=p.horizon,
                track_gradients=False,
            )
        )
        gaps.append(trace.gap_ergodic)
    mean_gap = float(np.mean(gaps))
    elapsed = time.perf_counter() - start
    ok = mean_gap <= bound and bound <= 2.0
    _report(
        5,
        ok and elapsed < 300.0,
        f"mean ergodic gap {mean_gap:.4g} <= certified bound {bound:.4g} "
        f"(<= eps = 2.0), 20 seeds, T = {p.horizon}, {elapsed:.0f}s (< 300s)",
    )


# ---------------------------------------------------------------------------
# 6. desk-scale routing convergence
# ---------------------------------------------------------------------------


def test_acceptance_6_routing_convergence():
    """6-agent routing reaches a 5% relative gap in 5e4 rounds.

    Fixed instance (2 groups x 3 agents, 6 routes), complete graph,
    sigma = 0, eta = 3e-2/f*, u = 2e-3, delta = 0.05; relative gap of
    the final iterate vs the centralized reference, averaged over 10
    seeds.  Budget: < 2 min.
    """
    start = time.perf_counter()
    problem = _solved_routing(2, 3, seed=1)
    graph = CommGraph.complete(6)
    gaps = []
    for seed in range(10):
        trace = run(
            RunConfig(
                problem=problem,
                graph=graph,
                eta=3e-2 / problem.f_star,
                u=2e-3,
                delta=0.05,
                horizon=50_000,
                seed=seed,
                metric_every=50_000,
                track_gradients=False,
            )
        )
        gaps.append(trace.gap_final / problem.f_star)
    mean_gap = float(np.mean(gaps))
    elapsed = time.perf_counter() - start
    ok = mean_gap <= 5e-2
    _report(
        6,
        ok and elapsed < 120.0,
        f"10-seed mean relative gap {mean_gap:.4f} (need <= 0.05) after 5e4 "
        f"rounds, {elapsed:.0f}s (< 120s)",
    )


# ---------------------------------------------------------------------------
# 7. noisy degradation ordering
# ---------------------------------------------------------------------------


def test_acceptance_7_noise_degradation_ordering():
    """Final mean gaps increase monotonically with observation noise.

    60-agent routing benchmark with the benchmark's parameter choices
    per noise level: sigma = 0 (eta = 3e-2/f*, u = 2e-3, delta = 0.05),
    sigma = 0.02 f* (5e-3/f*, 4e-3, 0.10), sigma = 0.05 f*
    (2e-3/f*, 6e-3, 0.15); 10 seeds each, T = 1e4.
    """
    problem = _solved_routing(10, 6, seed=0)
    fs = problem.f_star
    graph = CommGraph.random_connected(60, seed=1)
    cases = [
        (0.0, 3e-2 / fs, 2e-3, 0.05),
        (0.02 * fs, 5e-3 / fs, 4e-3, 0.10),
        (0.05 * fs, 2e-3 / fs, 6e-3, 0.15),
    ]
    means = []
    for sigma, eta, u, delta in cases:
        gaps = []
        for seed in range(10):
            trace = run(
                RunConfig(
                    problem=problem,
                    graph=graph,
                    eta=eta,
                    u=u,
                    delta=delta,
                    sigma=sigma,
                    horizon=10_000,
                    seed=seed,
                    metric_every=10_000,
                    track_gradients=False,
                )
            )
            gaps.append(trace.gap_final / fs)
        means.append(float(np.mean(gaps)))
    ok = means[0] < means[1] < means[2]
    _report(
        7,
        ok,
        "10-seed mean relative gaps "
        f"{means[0]:.4f} < {means[1]:.4f} < {means[2]:.4f} for "
        "sigma = 0, 0.02 f*, 0.05 f* (monotone increasing)",
    )


# ---------------------------------------------------------------------------
# 8. planner horizon scaling exponents
# ---------------------------------------------------------------------------


def test_acceptance_8_planner_scaling():
    """T(1/eps) scales with the advertised exponents.

    Fitted log-log slope over eps in {0.2, 0.1, 0.05, 0.025}: 2.00 +/-
    0.10 for the convex noiseless regime and 3.00 +/- 0.15 for the
    nonconvex noisy regime.
    """
    epsilons = [0.2, 0.1, 0.05, 0.025]
    problem = build_box_quadratic(3, 2, seed=0)
    stats = network_stats(CommGraph.path(3), 0, dims=problem.dims)
    convex = constants_for(problem, stats)
    convex_slope = scaling_report(convex, "convex-noiseless", epsilons)["exponent"]

    nonconvex = ProblemConstants(
        n_agents=4,
        dim=8,
        lipschitz=2.0,
        smoothness=3.0,
        b_bar=1.4,
        b_frak=1.3,
        staleness_bound=3,
        sigma=0.2,
        init_gap=5.0,
    )
    noisy_slope = scaling_report(nonconvex, "nonconvex-noisy", epsilons)["exponent"]
    ok = abs(convex_slope - 2.0) <= 0.10 and abs(noisy_slope - 3.0) <= 0.15
    _report(
        8,
        ok,
        f"convex-noiseless slope {convex_slope:.3f} (2.00 +/- 0.10), "
        f"nonconvex-noisy slope {noisy_slope:.3f} (3.00 +/- 0.15)",
    )


# ---------------------------------------------------------------------------
# 9. dependence-mode equivalence and payload savings
# ---------------------------------------------------------------------------


def test_acceptance_9_dependence_equivalence_and_savings():
    """Dependence-restricted gradients equal the masked full-mode sums.

    Routing instance (3 groups x 2 agents) on a path graph whose
    tracker sets are all connected (the compatibility check passes
    first).  Two comparisons, both at 1e-12 with identical seeds:
    (a) frozen trajectory (eta = 0): the full-mode and dependence-mode
    runs see identical tables, and the dependence-mode gradient equals
    the full-mode sum masked to each agent's dependence set; (b) moving
    trajectory: every dependence-mode gradient equals the estimator
    definition rebuilt independently from that round's tables and the
    stamped perturbations.  The reduced-table payload must be exactly
    |A_i| columns per agent.
    """
    instance = build_routing_instance(3, 2, seed=3)
    problem = routing_problem(instance)
    graph = CommGraph.path(6)
    n = problem.n

    compat = check_compatibility(graph, problem.affected)
    assert compat.compatible, "compatibility precondition failed"

    aff = np.zeros((n, n), dtype=bool)
    for j, who in enumerate(problem.affected):
        aff[list(who), j] = True

    def masked_rebuild(view, z_log):
        stamps = view.tables.stamps
        values = view.tables.quotients
        g = np.zeros_like(view.gradient)
        for i in range(n):
            for j in range(n):
                s = stamps[i, j]
                if s >= 0 and aff[i, j]:
                    g[i] += values[i, j] * z_log[s][i]
        return g / n

    # (a) frozen trajectory: full-mode tables + post-hoc mask vs dependence mode
    z_full: dict[int, np.ndarray] = {}
    masked: list[np.ndarray] = []
    full_tables: list[np.ndarray] = []

    def probe_full(view):
        z_full[view.t] = view.z.copy()
        masked.append(masked_rebuild(view, z_full))
        full_tables.append(view.tables.stamps.copy())

    dep_static: list[np.ndarray] = []
    dep_tables: list[np.ndarray] = []

    def probe_dep_static(view):
        dep_static.append(view.gradient.copy())
        dep_tables.append(view.tables.stamps.copy())

    frozen = dict(
        problem=problem, graph=graph, eta=0.0, u=1e-3, delta=0.02, horizon=30, seed=5
    )
    run(RunConfig(mode="full", probe=probe_full, **frozen))
    run(RunConfig(mode="dependence", probe=probe_dep_static, **frozen))
    for a_t, b_t in zip(full_tables, dep_tables):
        np.testing.assert_array_equal(a_t, b_t)
    cross_err = max(
        float(np.max(np.abs(got - want))) for got, want in zip(dep_static, masked)
    )

    # (b) moving trajectory: dependence-mode gradient vs its own-table rebuild
    z_dep: dict[int, np.ndarray] = {}
    self_errs: list[float] = []

    def probe_dep_moving(view):
        z_dep[view.t] = view.z.copy()
        rebuilt = masked_rebuild(view, z_dep)
        self_errs.append(float(np.max(np.abs(view.gradient - rebuilt))))

    moving = dict(
        problem=problem, graph=graph, eta=1e-3, u=1e-3, delta=0.02, horizon=30, seed=5
    )
    run(RunConfig(mode="dependence", probe=probe_dep_moving, **moving))
    self_err = max(self_errs)

    reduced = run(RunConfig(mode="dependence", reduced_tables=True, **moving))
    expected_columns = [int(aff[i].sum()) for i in range(n)]
    payload_ok = reduced.payload_columns == expected_columns

    ok = cross_err <= 1e-12 and self_err <= 1e-12 and payload_ok
    _report(
        9,
        ok,
        f"masked full-mode vs dependence-mode max err {cross_err:.2e}, "
        f"definition-rebuild max err {self_err:.2e} (both need <= 1e-12, 31 "
        f"rounds); reduced payload columns {reduced.payload_columns} == |A_i| "
        f"{expected_columns}; compatibility check passed first",
    )


# ---------------------------------------------------------------------------
# 10. brute-force protocol oracle
# ---------------------------------------------------------------------------


def _connected_graphs(n):
    if n == 1:
        yield []
        return
    pairs = list(itertools.combinations(range(n), 2))
    for bits in range(2 ** len(pairs)):
        edges = [pairs[k] for k in range(len(pairs)) if bits >> k & 1]
        adj = [set() for _ in range(n)]
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        seen = {0}
        frontier = [0]
        while frontier:
            nxt = []
            for v in frontier:
                for w in adj[v]:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        if len(seen) == n:
            yield edges


def _flood_stamps(adj, n, horizon):
    table = -np.ones((n, n), dtype=np.int64)
    prev = table.copy()
    out = []
    for t in range(horizon + 1):
        table[np.arange(n), np.arange(n)] = t
        if t > 0:
            merged = table.copy()
            for i in range(n):
                for k in adj[i]:
                    merged[i] = np.maximum(merged[i], prev[k])
            table = merged
        prev = table.copy()
        out.append(table.copy())
    return out


def test_acceptance_10_brute_force_protocol_oracle():
    """Tables match an exhaustive flood-simulation oracle on every graph.

    All 772 connected labeled graphs with n <= 5 vertices, T = 8 rounds,
    loss-free links: the engine's (stamp) tables must equal the oracle's
    flood fill exactly, every agent, every column, every round.
    """
    horizon = 8
    total = 0
    problems = {n: build_box_quadratic(n, 1, seed=n) for n in range(1, 6)}
    for n in range(1, 6):
        for edges in _connected_graphs(n):
            graph = CommGraph(n, edges)
            adj = [list(graph.neighbors[i]) for i in range(n)]
            expected = _flood_stamps(adj, n, horizon)
            seen = []

            def probe(view):
                seen.append(view.tables.stamps.copy())

            run(
                RunConfig(
                    problem=problems[n],
                    graph=graph,
                    eta=0.0,
                    u=1e-3,
                    horizon=horizon,
                    seed=1,
                    probe=probe,
                )
            )
            for t in range(horizon + 1):
                np.testing.assert_array_equal(seen[t], expected[t])
            total += 1
    _report(
        10,
        total == 772,
        f"{total} connected graphs (n <= 5) x 9 rounds match the flood "
        "oracle exactly (expected 772 graphs)",
    )
