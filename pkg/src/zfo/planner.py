"""Parameter planning from the algorithm's certified complexity regimes.

Given the constants that describe a problem instance and its communication
network, this module computes shrinkage ``delta``, smoothing radius ``u``,
step size ``eta``, and horizon ``T`` so that every sufficient condition of
the chosen convergence regime holds with equality (the configuration that
yields the advertised iteration complexity).  It also re-verifies arbitrary
parameter tuples against those conditions, evaluates the closed-form
expected-performance bounds, and fits the horizon-versus-accuracy scaling
exponent.

Five regimes are supported:

- ``convex-noiseless``        exact observations, constrained convex costs
- ``convex-noisy``            noisy observations, constrained convex costs
- ``convex-noisy-interior``   as above, with the optimum known to be interior
- ``nonconvex-noiseless``     exact observations, unconstrained smooth costs
- ``nonconvex-noisy``         noisy observations, unconstrained smooth costs

All functions are pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, OracleError
from .network import NetworkStats
from .problems import Problem

__all__ = [
    "REGIMES",
    "ProblemConstants",
    "ParamPlan",
    "ConditionCheck",
    "PlanReport",
    "constants_for",
    "smoothing_condition_value",
    "plan",
    "verify_plan",
    "expected_gap_bound",
    "expected_stationarity_bound",
    "scaling_report",
]

REGIMES = (
    "convex-noiseless",
    "convex-noisy",
    "convex-noisy-interior",
    "nonconvex-noiseless",
    "nonconvex-noisy",
)

_CONVEX_REGIMES = ("convex-noiseless", "convex-noisy", "convex-noisy-interior")
_NONCONVEX_REGIMES = ("nonconvex-noiseless", "nonconvex-noisy")

# Relative tolerance for the smoothing-radius bisection.
_BISECT_RTOL = 1e-12
_BISECT_MAX_ITER = 300

# Tolerance used when judging whether a re-checked inequality holds; plan()
# output satisfies every condition with slack 0 up to this tolerance.
_CHECK_RTOL = 1e-9


def _require_positive(name: str, value: float, *, allow_zero: bool = False) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    if allow_zero:
        if value < 0:
            raise ConfigurationError(f"{name} must be >= 0, got {value!r}")
    elif value <= 0:
        raise ConfigurationError(f"{name} must be > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class ProblemConstants:
    """Scalar constants describing a problem instance on a network.

    Attributes
    ----------
    n_agents:
        Number of agents ``n``.
    dim:
        Total decision dimension ``d`` (all agents combined).
    lipschitz:
        Bound ``G`` on the norm of any local cost gradient.
    smoothness:
        Bound ``L`` on the Lipschitz constant of any local cost gradient.
    b_bar:
        Root-mean-square delayed pairwise distance of the network.
    b_frak:
        Dimension-weighted variant of ``b_bar``.
    staleness_bound:
        Worst-case information staleness ``B`` (network diameter plus the
        extra-delay allowance).
    sigma:
        Standard deviation of additive observation noise (0 = exact).
    outer_radius:
        Radius bound on the joint feasible set (constrained regimes only).
    inner_radius:
        Radius of a ball around the origin contained in every agent's
        feasible set (constrained regimes only).
    breg_diameter:
        Upper bound on the Bregman divergence from any feasible point to the
        optimum (constrained regimes only).
    init_gap:
        Upper bound on ``f(x(0)) - inf f`` (unconstrained regimes; the
        horizon formula floors it at 1 when absent).
    gap_max:
        ``max f - min f`` over the feasible set, the admissible accuracy
        range of the convex noiseless regime.
    """

    n_agents: int
    dim: int
    lipschitz: float
    smoothness: float
    b_bar: float
    b_frak: float
    staleness_bound: int
    sigma: float = 0.0
    outer_radius: float | None = None
    inner_radius: float | None = None
    breg_diameter: float | None = None
    init_gap: float | None = None
    gap_max: float | None = None

    def __post_init__(self) -> None:
        if int(self.n_agents) != self.n_agents or self.n_agents < 1:
            raise ConfigurationError(f"n_agents must be a positive integer, got {self.n_agents!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigurationError(f"dim must be a positive integer, got {self.dim!r}")
        if int(self.staleness_bound) != self.staleness_bound or self.staleness_bound < 0:
            raise ConfigurationError(
                f"staleness_bound must be a non-negative integer, got {self.staleness_bound!r}"
            )
        _require_positive("lipschitz", self.lipschitz)
        _require_positive("smoothness", self.smoothness, allow_zero=True)
        _require_positive("b_bar", self.b_bar, allow_zero=True)
        _require_positive("b_frak", self.b_frak, allow_zero=True)
        _require_positive("sigma", self.sigma, allow_zero=True)
        for name in ("outer_radius", "inner_radius", "breg_diameter", "gap_max"):
            value = getattr(self, name)
            if value is not None:
                _require_positive(name, value)
        if self.init_gap is not None:
            _require_positive("init_gap", self.init_gap, allow_zero=True)

    def as_dict(self) -> dict:
        return {
            "n_agents": int(self.n_agents),
            "dim": int(self.dim),
            "lipschitz": float(self.lipschitz),
            "smoothness": float(self.smoothness),
            "b_bar": float(self.b_bar),
            "b_frak": float(self.b_frak),
            "staleness_bound": int(self.staleness_bound),
            "sigma": float(self.sigma),
            "outer_radius": None if self.outer_radius is None else float(self.outer_radius),
            "inner_radius": None if self.inner_radius is None else float(self.inner_radius),
            "breg_diameter": None if self.breg_diameter is None else float(self.breg_diameter),
            "init_gap": None if self.init_gap is None else float(self.init_gap),
            "gap_max": None if self.gap_max is None else float(self.gap_max),
        }

    @staticmethod
    def from_dict(data: dict) -> "ProblemConstants":
        known = {
            "n_agents",
            "dim",
            "lipschitz",
            "smoothness",
            "b_bar",
            "b_frak",
            "staleness_bound",
            "sigma",
            "outer_radius",
            "inner_radius",
            "breg_diameter",
            "init_gap",
            "gap_max",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown constants field(s): {sorted(unknown)}")
        missing = {"n_agents", "dim", "lipschitz", "smoothness", "b_bar", "b_frak", "staleness_bound"} - set(data)
        if missing:
            raise ConfigurationError(f"missing constants field(s): {sorted(missing)}")
        return ProblemConstants(**data)


def constants_for(
    problem: Problem,
    stats: NetworkStats,
    sigma: float = 0.0,
    x0: np.ndarray | None = None,
) -> ProblemConstants:
    """Assemble :class:`ProblemConstants` from a problem and network stats.

    ``init_gap`` is filled in when ``x0`` is given and the problem records
    either its optimal value or a lower bound on it.
    """
    if stats.n != problem.n:
        raise ConfigurationError(
            f"network has {stats.n} nodes but the problem has {problem.n} agents"
        )
    meta = problem.meta
    init_gap = None
    if x0 is not None:
        floor = problem.f_star if problem.f_star is not None else problem.f_lower
        if floor is not None:
            init_gap = float(problem.global_cost(np.asarray(x0, dtype=float)) - floor)
    return ProblemConstants(
        n_agents=problem.n,
        dim=problem.total_dim,
        lipschitz=float(meta["lipschitz"]),
        smoothness=float(meta["smoothness"]),
        b_bar=stats.b_bar,
        b_frak=stats.b_frak,
        staleness_bound=stats.staleness_bound,
        sigma=float(sigma),
        outer_radius=meta.get("outer_radius"),
        inner_radius=meta.get("inner_radius"),
        breg_diameter=meta.get("breg_diameter"),
        init_gap=init_gap,
        gap_max=meta.get("gap_max"),
    )


@dataclass(frozen=True)
class ParamPlan:
    """A full parameter tuple for one regime at one target accuracy."""

    regime: str
    epsilon: float
    delta: float
    u: float
    eta: float
    horizon: int
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "epsilon": float(self.epsilon),
            "delta": float(self.delta),
            "u": float(self.u),
            "eta": float(self.eta),
            "horizon": int(self.horizon),
            "notes": list(self.notes),
        }

    @staticmethod
    def from_dict(data: dict) -> "ParamPlan":
        return ParamPlan(
            regime=str(data["regime"]),
            epsilon=float(data["epsilon"]),
            delta=float(data["delta"]),
            u=float(data["u"]),
            eta=float(data["eta"]),
            horizon=int(data["horizon"]),
            notes=tuple(data.get("notes", ())),
        )


@dataclass(frozen=True)
class ConditionCheck:
    """One re-evaluated inequality: ``value <= bound`` or ``value >= bound``."""

    name: str
    kind: str  # "max": value must be <= bound; "min": value must be >= bound
    value: float
    bound: float
    satisfied: bool
    slack: float  # bound - value for "max", value - bound for "min"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "value": float(self.value),
            "bound": float(self.bound),
            "satisfied": bool(self.satisfied),
            "slack": float(self.slack),
        }


@dataclass(frozen=True)
class PlanReport:
    """Verification report for a parameter tuple against its regime."""

    regime: str
    epsilon: float
    checks: tuple[ConditionCheck, ...]
    satisfied: bool
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "epsilon": float(self.epsilon),
            "checks": [c.as_dict() for c in self.checks],
            "satisfied": bool(self.satisfied),
            "notes": list(self.notes),
        }


def _check_max(name: str, value: float, bound: float) -> ConditionCheck:
    tol = _CHECK_RTOL * max(1.0, abs(bound))
    return ConditionCheck(
        name=name,
        kind="max",
        value=float(value),
        bound=float(bound),
        satisfied=bool(value <= bound + tol),
        slack=float(bound - value),
    )


def _check_min(name: str, value: float, bound: float) -> ConditionCheck:
    tol = _CHECK_RTOL * max(1.0, abs(bound))
    return ConditionCheck(
        name=name,
        kind="min",
        value=float(value),
        bound=float(bound),
        satisfied=bool(value >= bound - tol),
        slack=float(value - bound),
    )


# ---------------------------------------------------------------------------
# Smoothing-radius equation
# ---------------------------------------------------------------------------


def smoothing_condition_value(u: float, constants: ProblemConstants, epsilon: float) -> float:
    """Left-hand side of the constrained-regime smoothing condition.

    Returns ``u * sqrt(d + (4/9) * max(0, ln(20 G R^2 sqrt(n) / (u eps))))``
    which must stay below ``delta * r / 3``.  Strictly increasing in ``u``.
    """
    if u <= 0:
        raise ConfigurationError(f"smoothing radius must be > 0, got {u!r}")
    c = constants
    if c.outer_radius is None:
        raise ConfigurationError("smoothing condition needs outer_radius (bounded feasible set)")
    log_arg = 20.0 * c.lipschitz * c.outer_radius**2 * math.sqrt(c.n_agents) / (u * epsilon)
    log_term = max(0.0, math.log(log_arg))
    return u * math.sqrt(c.dim + (4.0 / 9.0) * log_term)


def _solve_smoothing_radius(constants: ProblemConstants, epsilon: float, target: float) -> float:
    """Solve ``smoothing_condition_value(u) == target`` for ``u`` by bisection.

    The left-hand side is continuous, vanishes as ``u -> 0`` and exceeds
    ``target`` at ``u = target`` (it is at least ``u * sqrt(d)`` with
    ``d >= 1``), so a root exists in ``(0, target]``.  The feasible (lower)
    endpoint is returned so the inequality holds after rounding.
    """
    if target <= 0:
        raise ConfigurationError(f"smoothing bisection target must be > 0, got {target!r}")
    hi = target
    hi_value = smoothing_condition_value(hi, constants, epsilon)
    if hi_value < target:  # the lhs is >= u * sqrt(d) >= u, so this cannot happen
        raise OracleError(
            "smoothing-radius bisection is not bracketed: "
            f"value at the upper endpoint {hi!r} is {hi_value!r} < target {target!r}"
        )
    lo = 0.0
    for _ in range(_BISECT_MAX_ITER):
        if hi - lo <= _BISECT_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if smoothing_condition_value(mid, constants, epsilon) <= target:
            lo = mid
        else:
            hi = mid
    if lo <= 0.0 or hi - lo > _BISECT_RTOL * hi:
        raise OracleError("smoothing-radius bisection failed to converge")
    return lo


# ---------------------------------------------------------------------------
# Regime requirements
# ---------------------------------------------------------------------------


def _require_regime(regime: str) -> None:
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}; expected one of {list(REGIMES)}")


def _require_noise_match(constants: ProblemConstants, regime: str) -> None:
    noiseless = regime.endswith("-noiseless")
    if noiseless and constants.sigma != 0.0:
        raise ConfigurationError(
            f"regime {regime!r} requires exact observations (sigma = 0), got sigma = {constants.sigma}"
        )
    if not noiseless and constants.sigma <= 0.0:
        raise ConfigurationError(
            f"regime {regime!r} requires noisy observations (sigma > 0), got sigma = {constants.sigma}"
        )


def _require_constrained_constants(constants: ProblemConstants, regime: str) -> None:
    missing = [
        name
        for name in ("outer_radius", "inner_radius", "breg_diameter")
        if getattr(constants, name) is None
    ]
    if missing:
        raise ConfigurationError(
            f"regime {regime!r} needs a bounded feasible set; missing constants: {missing}"
        )


def _require_nonconvex_constants(constants: ProblemConstants, regime: str) -> None:
    if constants.smoothness <= 0:
        raise ConfigurationError(f"regime {regime!r} requires smoothness > 0")
    if constants.b_bar <= 0:
        raise ConfigurationError(
            f"regime {regime!r} requires b_bar > 0 (a single agent with no extra delay is degenerate)"
        )


def _convex_eta_bound_noiseless(constants: ProblemConstants, epsilon: float) -> float:
    c = constants
    grad_sq = c.lipschitz**2 + (c.smoothness * c.outer_radius / 4.0) ** 2
    return epsilon / (32.0 * grad_sq * (c.b_frak + 0.5) * (math.sqrt(c.dim) + 1.0) ** 2)


def _convex_eta_bound_noisy(constants: ProblemConstants, epsilon: float, u: float) -> float:
    c = constants
    return 3.0 * u * u * epsilon / (8.0 * c.sigma**2 * (c.b_frak + 0.5) * (math.sqrt(c.dim) + 1.0) ** 2)


def _convex_delta_bound(constants: ProblemConstants, epsilon: float, regime: str) -> float:
    c = constants
    if regime == "convex-noisy-interior":
        return math.sqrt(epsilon) / (c.outer_radius * math.sqrt(2.0 * c.smoothness))
    return epsilon / (5.0 * c.lipschitz * c.outer_radius)


def _convex_sample_bound(constants: ProblemConstants, epsilon: float, eta: float) -> int:
    return int(math.ceil(15.0 * constants.breg_diameter / (2.0 * eta * epsilon)))


def _nonconvex_eta_bound(constants: ProblemConstants, epsilon: float, u: float, regime: str) -> float:
    c = constants
    base = c.smoothness * c.b_bar * math.sqrt(c.n_agents) * c.dim
    if regime == "nonconvex-noiseless":
        return epsilon / (48.0 * base)
    return epsilon * u * u / (c.sigma**2 * 2.0 * base)


def _nonconvex_u_bound(constants: ProblemConstants, epsilon: float) -> float:
    return math.sqrt(epsilon) / (4.0 * constants.smoothness * math.sqrt(constants.dim))


def _nonconvex_budget(constants: ProblemConstants) -> tuple[float, str | None]:
    """Horizon budget ``max(init_gap, 1)``; a note explains a defaulted gap."""
    if constants.init_gap is None:
        return 1.0, "initial optimality gap not supplied; horizon uses the formula's floor of 1"
    return max(float(constants.init_gap), 1.0), None


def _nonconvex_sample_bound(constants: ProblemConstants, epsilon: float, eta: float) -> int:
    budget, _ = _nonconvex_budget(constants)
    return int(math.ceil(6.0 * budget / (eta * epsilon)))


# ---------------------------------------------------------------------------
# Planning
# ---------------------------------------------------------------------------


def plan(constants: ProblemConstants, epsilon: float, regime: str) -> ParamPlan:
    """Choose ``delta, u, eta, T`` so every regime condition holds with equality.

    The smoothing radius of the constrained regimes is found by bisection on
    its defining equation to 1e-12 relative accuracy; all other parameters
    are direct substitutions.  ``verify_plan`` on the result is always clean.
    """
    _require_regime(regime)
    epsilon = _require_positive("epsilon", epsilon)
    _require_noise_match(constants, regime)
    c = constants
    notes: list[str] = []

    if regime in _CONVEX_REGIMES:
        _require_constrained_constants(c, regime)
        if regime == "convex-noiseless":
            if c.gap_max is None:
                raise ConfigurationError(
                    "convex-noiseless planning needs gap_max (the admissible accuracy range)"
                )
            if epsilon > c.gap_max:
                raise ConfigurationError(
                    f"epsilon = {epsilon} is outside the admissible range (0, {c.gap_max}] "
                    "for the convex-noiseless regime"
                )
        if regime == "convex-noisy-interior" and c.smoothness <= 0:
            raise ConfigurationError("convex-noisy-interior planning requires smoothness > 0")

        delta = _convex_delta_bound(c, epsilon, regime)
        if delta >= 1.0:
            raise ConfigurationError(
                f"epsilon = {epsilon} is too large: the implied shrinkage factor {delta} reaches 1"
            )
        u = _solve_smoothing_radius(c, epsilon, delta * c.inner_radius / 3.0)
        if regime == "convex-noiseless":
            eta = _convex_eta_bound_noiseless(c, epsilon)
        else:
            eta = _convex_eta_bound_noisy(c, epsilon, u)
            smooth_term = (
                16.0
                * eta
                * (c.lipschitz**2 + (c.smoothness * c.outer_radius / 4.0) ** 2)
                * (c.b_frak + 0.5)
                * (math.sqrt(c.dim) + 1.0 / 6.0) ** 2
            )
            noise_term = (
                2.0 * eta * c.sigma**2 / (3.0 * u * u) * (c.b_frak + 0.5) * (math.sqrt(c.dim) + 1.0 / 6.0) ** 2
            )
            if smooth_term > 0.1 * noise_term:
                notes.append(
                    "second-order smoothness term "
                    f"({smooth_term:.6e}) exceeds 10% of the first-order noise term "
                    f"({noise_term:.6e}); epsilon may not be small enough for the "
                    "advertised accuracy guarantee"
                )
        samples = _convex_sample_bound(c, epsilon, eta)
        horizon = c.staleness_bound - 1 + samples
    else:
        _require_nonconvex_constants(c, regime)
        delta = 0.0
        notes.append("feasible-set shrinkage disabled: this regime targets unconstrained problems")
        u = _nonconvex_u_bound(c, epsilon)
        eta = _nonconvex_eta_bound(c, epsilon, u, regime)
        budget, budget_note = _nonconvex_budget(c)
        if budget_note is not None:
            notes.append(budget_note)
        samples = _nonconvex_sample_bound(c, epsilon, eta)
        horizon = c.staleness_bound - 1 + samples
        if c.staleness_bound > 0:
            moment = 12.0 * c.lipschitz**2
            if c.sigma > 0:
                moment += c.sigma**2 / (2.0 * u * u)
            trailing = c.lipschitz * c.staleness_bound * math.sqrt(moment * c.dim) / samples
            counterpart = 6.0 * budget / (5.0 * eta * samples)
            if trailing > 0.1 * counterpart:
                notes.append(
                    "second-order warm-up term "
                    f"({trailing:.6e}) exceeds 10% of the first-order initial-gap term "
                    f"({counterpart:.6e}); epsilon may not be small enough for the "
                    "advertised accuracy guarantee"
                )

    return ParamPlan(
        regime=regime,
        epsilon=epsilon,
        delta=float(delta),
        u=float(u),
        eta=float(eta),
        horizon=int(horizon),
        notes=tuple(notes),
    )


def verify_plan(constants: ProblemConstants, epsilon: float, candidate: ParamPlan) -> PlanReport:
    """Re-evaluate every inequality of the candidate's regime and report slack.

    Pure re-evaluation: never raises on a violated inequality, only reports
    it.  ``plan()`` output verifies clean with zero slack (up to 1e-9) on
    the equality-tight conditions.
    """
    regime = candidate.regime
    _require_regime(regime)
    epsilon = _require_positive("epsilon", epsilon)
    _require_noise_match(constants, regime)
    c = constants
    checks: list[ConditionCheck] = []
    notes: list[str] = []

    if regime in _CONVEX_REGIMES:
        _require_constrained_constants(c, regime)
        if regime == "convex-noiseless":
            if c.gap_max is None:
                raise ConfigurationError(
                    "convex-noiseless verification needs gap_max (the admissible accuracy range)"
                )
            checks.append(_check_max("accuracy-range", epsilon, c.gap_max))
        checks.append(
            _check_max("shrinkage", candidate.delta, _convex_delta_bound(c, epsilon, regime))
        )
        checks.append(
            _check_max(
                "smoothing",
                smoothing_condition_value(candidate.u, c, epsilon),
                candidate.delta * c.inner_radius / 3.0,
            )
        )
        if regime == "convex-noiseless":
            eta_bound = _convex_eta_bound_noiseless(c, epsilon)
        else:
            eta_bound = _convex_eta_bound_noisy(c, epsilon, candidate.u)
        checks.append(_check_max("step-size", candidate.eta, eta_bound))
        checks.append(
            _check_min(
                "horizon",
                candidate.horizon - c.staleness_bound + 1,
                _convex_sample_bound(c, epsilon, candidate.eta),
            )
        )
    else:
        _require_nonconvex_constants(c, regime)
        checks.append(_check_max("smoothing", candidate.u, _nonconvex_u_bound(c, epsilon)))
        checks.append(
            _check_max(
                "step-size",
                candidate.eta,
                _nonconvex_eta_bound(c, epsilon, candidate.u, regime),
            )
        )
        _, budget_note = _nonconvex_budget(c)
        if budget_note is not None:
            notes.append(budget_note)
        checks.append(
            _check_min(
                "horizon",
                candidate.horizon - c.staleness_bound + 1,
                _nonconvex_sample_bound(c, epsilon, candidate.eta),
            )
        )

    return PlanReport(
        regime=regime,
        epsilon=epsilon,
        checks=tuple(checks),
        satisfied=all(ch.satisfied for ch in checks),
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Closed-form expected-performance bounds
# ---------------------------------------------------------------------------


def expected_gap_bound(
    constants: ProblemConstants,
    eta: float,
    u: float,
    delta: float,
    horizon: int,
    interior: bool = False,
) -> float:
    """Closed-form bound on the expected ergodic optimality gap (convex case).

    Valid under the hypothesis ``0 < u <= delta * inner_radius / (3 sqrt(d))``
    and ``horizon >= staleness_bound``; raises ``ConfigurationError`` outside
    that range, where the formula certifies nothing.  With ``interior=True``
    the variant for an optimum known to lie strictly inside the feasible set
    is evaluated.
    """
    c = constants
    _require_constrained_constants(c, "expected_gap_bound")
    eta = _require_positive("eta", eta)
    u = _require_positive("u", u)
    _require_positive("delta", delta, allow_zero=True)
    sqrt_d = math.sqrt(c.dim)
    hypothesis = delta * c.inner_radius / (3.0 * sqrt_d)
    if u > hypothesis * (1.0 + 1e-12):
        raise ConfigurationError(
            f"expected_gap_bound requires u <= delta * inner_radius / (3 sqrt(d)) = {hypothesis}, got u = {u}"
        )
    if horizon < c.staleness_bound:
        raise ConfigurationError(
            f"horizon {horizon} is below the staleness bound {c.staleness_bound}; "
            "the ergodic average would be empty"
        )
    samples = horizon - c.staleness_bound + 1
    weight = c.b_frak + 0.5
    cap = (sqrt_d + 1.0 / 6.0) ** 2
    grad_sq = c.lipschitz**2 + (c.smoothness * c.outer_radius / 4.0) ** 2

    averaging = 5.0 * c.breg_diameter / (4.0 * eta * samples)
    if interior:
        smoothing_bias = 0.5 * u * u * c.smoothness * c.dim
        shrink_bias = 0.5 * c.smoothness * c.outer_radius**2 * delta**2
    else:
        smoothing_bias = u * c.lipschitz * sqrt_d
        shrink_bias = c.lipschitz * c.outer_radius * delta
    step_term = 16.0 * eta * grad_sq * weight * cap
    noise_term = 2.0 * eta * c.sigma**2 / (3.0 * u * u) * weight * cap
    tail = (
        5.0
        * c.lipschitz
        * c.outer_radius**2
        * math.sqrt(c.n_agents)
        / (2.0 * u)
        * math.exp(c.dim / 2.0 - (delta * c.inner_radius) ** 2 / (4.0 * u * u))
    )
    return averaging + smoothing_bias + step_term + noise_term + tail + shrink_bias


def expected_stationarity_bound(
    constants: ProblemConstants,
    eta: float,
    u: float,
    horizon: int,
) -> float:
    """Closed-form bound on the mean squared gradient norm (nonconvex case).

    Requires ``init_gap`` (a bound on ``f(x(0)) - inf f``) and
    ``horizon >= staleness_bound``.  The final term is the warm-up cost of
    the first ``staleness_bound`` rounds, which the planner reports but does
    not optimize.
    """
    c = constants
    if c.init_gap is None:
        raise ConfigurationError("expected_stationarity_bound requires init_gap")
    if c.smoothness <= 0:
        raise ConfigurationError("expected_stationarity_bound requires smoothness > 0")
    eta = _require_positive("eta", eta)
    u = _require_positive("u", u)
    if horizon < c.staleness_bound:
        raise ConfigurationError(
            f"horizon {horizon} is below the staleness bound {c.staleness_bound}; "
            "the ergodic average would be empty"
        )
    samples = horizon - c.staleness_bound + 1
    moment = 12.0 * c.lipschitz**2 + (c.sigma**2 / (2.0 * u * u) if c.sigma > 0 else 0.0)
    descent = 6.0 * c.init_gap / (5.0 * eta * samples)
    drift = 12.0 / 5.0 * eta * c.smoothness * c.b_bar * math.sqrt(c.n_agents) * c.dim * moment
    smoothing_bias = 2.0 * u * u * c.smoothness**2 * c.dim
    warmup = c.lipschitz * c.staleness_bound / samples * math.sqrt(moment * c.dim)
    return descent + drift + smoothing_bias + warmup


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------


def scaling_report(
    constants: ProblemConstants,
    regime: str,
    epsilons: list[float] | tuple[float, ...],
) -> dict:
    """Tabulate planned horizons across accuracies and fit the growth exponent.

    Fits ``log T`` against ``log(1/epsilon)`` by least squares.  Requires at
    least three accuracies spanning a factor of four or more.
    """
    _require_regime(regime)
    eps = [float(e) for e in epsilons]
    if len(eps) < 3:
        raise ConfigurationError(f"scaling_report needs at least 3 accuracies, got {len(eps)}")
    for e in eps:
        _require_positive("epsilon", e)
    if max(eps) / min(eps) < 4.0:
        raise ConfigurationError(
            "scaling_report needs accuracies spanning at least a factor of 4, "
            f"got {max(eps) / min(eps):.3g}"
        )
    eps_sorted = sorted(eps, reverse=True)
    rows = []
    for e in eps_sorted:
        p = plan(constants, e, regime)
        rows.append(
            {
                "epsilon": e,
                "horizon": p.horizon,
                "samples": p.horizon - constants.staleness_bound + 1,
            }
        )
    log_inv_eps = np.log([1.0 / r["epsilon"] for r in rows])
    log_t = np.log([float(r["horizon"]) for r in rows])
    exponent = float(np.polyfit(log_inv_eps, log_t, 1)[0])
    return {"regime": regime, "rows": rows, "exponent": exponent}
