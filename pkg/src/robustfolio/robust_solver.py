"""Worst-case expected utility over a Wasserstein ball, and robust pricing.

Purpose
-------
Solves V(delta) = sup_{pi in A} inf_{W_p(P~, P) <= delta} E_{P~}[u(<X, pi>)]
for a discrete baseline P (d = 1), two regimes:

p = inf (exact reduction)
    The inner infimum is attained by shifting every atom a distance delta
    against the position: inf = E_P[u(<X, pi> - delta |pi|)]. In d = 1 the
    sign of pi picks the shift direction, so the outer problem splits into
    two concave one-dimensional solves on shifted atoms (pi >= 0 with atoms
    x - delta, pi <= 0 with atoms x + delta) plus the pi = 0 value u(0).
    The reduction is for the unconstrained ball; the state space never
    constrains the p = inf adversary (all closed-form targets are of this
    form), and the worst case is the full Monge shift.

finite p (certified numerical oracle)
    The inner problem is an exact finite-dimensional program over transport
    plans that split each atom into at most two fragments. For a fixed
    strategy the per-atom trade-off curve (cost |s|^p, utility at the
    displaced point) has a lower convex envelope whose chords are exactly the
    two-fragment mixtures; the inner infimum is the separable convex program
    min sum_i w_i f_i(theta_i) s.t. sum w_i theta_i <= delta^p, solved to
    optimality by consuming envelope segments in slope order. Iterative grid
    refinement around the active segments drives the discretization error to
    rounding level. Displacements are capped by the state space S; the cap is
    what keeps the infimum finite (for utilities with a finite domain edge or
    an exponential tail the uncapped infimum is -inf), so S with unbounded
    sides in the displacement direction is rejected rather than silently
    truncated.

The outer maximization for finite p uses bounded scalar minimization (the
inner value is concave in pi, being an infimum of concave functions) followed
by Newton polish on the envelope derivative E_{P*}[X u'(<X, pi>)].

Robust Davis prices follow the optimizer branch:
  * pi_delta != 0: p_d(delta) = E_{P*}[u' g] / E_{P*}[u'] on the worst-case
    measure P*;
  * pi_delta = 0 with 0 interior to A: the marginal-utility weight is
    constant, every ball member prices, and the robust (lower) price is the
    ball infimum of E[g];
  * pi_delta = 0 pinned on the boundary of A: the worst case is selected by
    continuity as the limit along feasible strategies pi -> 0, a uniform
    shift of magnitude delta against the feasible direction e, for every
    order p; the price curve is E_P[g(X - delta e)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .baseline_solver import (PI_ZERO_THRESHOLD, _DOMAIN_MARGIN, Payoff,
                              ProblemSpec, _concave_max_raw, _feasible_interval_raw,
                              solve_baseline)
from .errors import (AssumptionViolation, ConfigError, DegenerateSensitivityError,
                     DomainCompatibilityError, NumericalFailure)
from .measures import DiscreteMeasure, StateSpace, wasserstein_distance
from .sensitivity import (_pinned_direction, degeneracy_guard, optimizer_sensitivity,
                          transport_direction)
from .utility import Utility

_ORACLE_MAX_ATOMS = 16
_MEAN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class RobustSolution:
    """Outcome of one robust solve at radius delta."""

    delta: float
    V_delta: float
    pi_delta: np.ndarray
    adversary: DiscreteMeasure
    transport_cost: float
    method: str  # "inf_exact" | "finite_p_oracle"

    @property
    def pi_delta_scalar(self) -> float:
        if self.pi_delta.size != 1:
            raise ConfigError("scalar strategy requested on a d>1 solution")
        return float(self.pi_delta[0])


def _as_adversary(points: np.ndarray, weights: np.ndarray, *, base: DiscreteMeasure,
                  delta: float, p: float, constrained: bool) -> DiscreteMeasure:
    space = base.state_space if constrained else None
    return DiscreteMeasure(points=np.asarray(points, dtype=float).reshape(-1, 1),
                           weights=weights, state_space=space,
                           is_quadrature=base.is_quadrature, kind="adversary",
                           params={"base": base.kind, "delta": float(delta), "p": float(p)})


# ---------------------------------------------------------------------------
# p = inf: exact reduction
# ---------------------------------------------------------------------------

def _certified_cost(P: DiscreteMeasure, adversary: DiscreteMeasure, order,
                    delta: float) -> float:
    """Transport cost of the constructed adversary, certified <= delta.

    The construction keeps the plan inside the budget; re-measuring the
    distance reintroduces power/root rounding, so ulp-level excess is clamped
    while anything larger still surfaces as a failure. Re-measuring a shift
    of an atom at coordinate x cannot resolve below ulp(x), so the clamp
    scales with the largest atom magnitude (quadrature stand-ins for heavy
    tails put atoms at 1e10 and beyond)."""
    cost = wasserstein_distance(P, adversary, order)
    if cost > delta:
        max_abs = max(float(np.max(np.abs(P.points))),
                      float(np.max(np.abs(adversary.points))))
        tol = delta * 1e-9 + 4.0 * np.finfo(float).eps * max_abs
        if cost > delta + tol:
            raise NumericalFailure(
                f"adversary left the ball: cost {cost} > radius {delta}")
        cost = delta
    return cost


def robust_solve_inf(spec: ProblemSpec, delta: float) -> RobustSolution:
    """Exact solve for the infinity-order ball via the shifted-atom reduction."""
    if not spec.order.is_inf:
        raise ConfigError("robust_solve_inf needs order p = inf (use robust_solve_p)")
    if spec.dim != 1:
        raise ConfigError("the robust reduction is implemented for d = 1")
    if delta < 0.0:
        raise ConfigError(f"delta must be nonnegative, got {delta}")
    if delta == 0.0:
        base = solve_baseline(spec)
        return RobustSolution(delta=0.0, V_delta=base.V0, pi_delta=base.pi_star,
                              adversary=spec.model, transport_cost=0.0,
                              method="inf_exact")
    x = spec.model.support_1d
    w = spec.model.weights
    u = spec.utility
    a_lo = spec.action_space.lower[0]
    a_hi = spec.action_space.upper[0]

    candidates: list[tuple[float, float, float]] = []  # (value, pi, shift)
    if a_hi > 0.0:
        xs = x - delta
        pi_p, _ = _concave_max_raw(xs, w, u, max(a_lo, 0.0), a_hi)
        candidates.append((float(np.dot(w, u.u(pi_p * xs))), pi_p, -delta))
    if a_lo < 0.0:
        xs = x + delta
        pi_m, _ = _concave_max_raw(xs, w, u, a_lo, min(a_hi, 0.0))
        candidates.append((float(np.dot(w, u.u(pi_m * xs))), pi_m, delta))
    if not candidates:
        raise DomainCompatibilityError("action space is the single point 0")
    # Ties at pi = 0 (both branches pinned): prefer the zero strategy.
    candidates.sort(key=lambda c: (-c[0], abs(c[1])))
    value, pi, shift = candidates[0]

    if abs(pi) <= PI_ZERO_THRESHOLD:
        pi = 0.0
        mean = float(spec.model.weights @ spec.model.support_1d)
        zero_on_a_boundary = not (a_lo < -1e-14 and a_hi > 1e-14)
        if zero_on_a_boundary and abs(mean) > _MEAN_ZERO_TOL:
            # pinned at the boundary of A: continuity limit along pi -> 0
            e = _pinned_direction(spec)
            adversary = _as_adversary(x - delta * e, w, base=spec.model,
                                      delta=delta, p=math.inf, constrained=False)
        else:
            # every ball member attains u(0); pick the saddle point — the
            # smallest uniform shift that also makes pi = 0 optimal
            saddle_shift = min(max(mean, -delta), delta)
            adversary = _as_adversary(x - saddle_shift, w, base=spec.model,
                                      delta=delta, p=math.inf, constrained=False)
    else:
        adversary = _as_adversary(x + shift, w, base=spec.model,
                                  delta=delta, p=math.inf, constrained=False)
    cost = _certified_cost(spec.model, adversary, spec.order, delta)
    return RobustSolution(delta=float(delta), V_delta=value, pi_delta=np.array([pi]),
                          adversary=adversary, transport_cost=cost, method="inf_exact")


# ---------------------------------------------------------------------------
# finite p: envelope oracle for the inner problem
# ---------------------------------------------------------------------------

def _displacement_grid(lo: float, hi: float, grid_points: int,
                       grid_step: float | None) -> np.ndarray:
    """Signed displacement grid on [lo, hi] containing 0 and both ends.

    Default: linear + geometric spacing on each side (the geometric part
    resolves the small-displacement Monge regime). ``grid_step`` switches to a
    plain uniform grid of that step, the brute-force reference recipe."""
    if grid_step is not None:
        pieces = [np.array([lo, 0.0, hi])]
        if hi > 0.0:
            pieces.append(np.arange(0.0, hi, grid_step))
        if lo < 0.0:
            pieces.append(-np.arange(0.0, -lo, grid_step))
        s = np.concatenate(pieces)
    else:
        half = max(grid_points // 2, 16)
        pieces = [np.array([lo, 0.0, hi])]
        for side in (lo, hi):
            extent = abs(side)
            if extent > 0.0:
                sign = math.copysign(1.0, side)
                lin = np.linspace(0.0, extent, half)
                geo = np.geomspace(max(extent * 1e-12, 1e-300), extent, half)
                pieces.append(sign * lin)
                pieces.append(sign * geo)
        s = np.concatenate(pieces)
    return np.unique(np.clip(s, lo, hi))


def _lower_hull(cost: np.ndarray, val: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull vertices of (cost, val), cost ascending.

    Duplicate costs keep the smaller value; collinear middle points are
    dropped, so hull slopes are strictly increasing."""
    order = np.lexsort((val, cost))
    cost = cost[order]
    val = val[order]
    _, first = np.unique(cost, return_index=True)
    keep = order[first]
    c = cost[first]
    v = val[first]
    hull: list[int] = []
    for j in range(c.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (v[b] - v[a]) * (c[j] - c[b]) >= (v[j] - v[b]) * (c[b] - c[a]):
                hull.pop()
            else:
                break
        hull.append(j)
    return keep[np.asarray(hull, dtype=int)]


def _transport_minimize(x: np.ndarray, w: np.ndarray, s_lo: np.ndarray, s_hi: np.ndarray,
                        p: float, budget: float,
                        value_fn: Callable[[int, np.ndarray], np.ndarray],
                        grid_points: int = 1200, refinements: int = 3,
                        grid_step: float | None = None
                        ) -> tuple[float, list[tuple[int, float, float]], float]:
    """min over two-fragment transport plans of sum_i w_i E[f_i(s_i)] subject
    to sum_i w_i |s_i|^p <= budget and s_i in [s_lo_i, s_hi_i].

    value_fn(i, s) evaluates atom i's per-unit-mass objective at displacements
    s (a vector). Returns (value, fragments, cost_used) with fragments a list
    of (atom index, displacement, mass fraction of the atom).

    Exactness: for each atom the feasible (cost, value) pairs of a split into
    two fragments sweep out exactly the chords of the discretized trade-off
    curve, i.e. its lower convex envelope; minimizing the separable sum of
    piecewise-linear convex envelopes under one linear budget is solved by
    consuming segments in increasing-slope order. The only gap to the true
    continuum optimum is grid resolution, which the refinement passes shrink
    around the active segments.
    """
    n = x.shape[0]
    grids = [_displacement_grid(float(s_lo[i]), float(s_hi[i]), grid_points, grid_step)
             for i in range(n)]
    best: tuple[float, list[tuple[int, float, float]], float] | None = None
    for _ in range(max(refinements, 0) + 1):
        hull_s: list[np.ndarray] = []
        hull_cost: list[np.ndarray] = []
        hull_val: list[np.ndarray] = []
        segments: list[tuple[float, int, int]] = []
        for i in range(n):
            s = grids[i]
            cost = np.abs(s) ** p
            val = np.asarray(value_fn(i, s), dtype=float)
            idx = _lower_hull(cost, val)
            hs, hc, hv = s[idx], cost[idx], val[idx]
            if hc[0] != 0.0:
                raise NumericalFailure("envelope lost the zero-displacement vertex")
            hull_s.append(hs)
            hull_cost.append(hc)
            hull_val.append(hv)
            slopes = np.diff(hv) / np.diff(hc)
            segments.extend((float(slopes[k]), i, k) for k in range(slopes.size)
                            if slopes[k] < 0.0)
        segments.sort(key=lambda t: t[0])
        reached = [0] * n
        partial: dict[int, tuple[int, float]] = {}
        remaining = budget
        for slope, i, k in segments:
            if remaining <= 0.0:
                break
            if k != reached[i]:
                raise NumericalFailure("envelope segments consumed out of order")
            cap = w[i] * (hull_cost[i][k + 1] - hull_cost[i][k])
            take = min(cap, remaining)
            remaining -= take
            if take >= cap:
                reached[i] = k + 1
            else:
                partial[i] = (k, take / cap)
                break
        fragments: list[tuple[int, float, float]] = []
        value = 0.0
        cost_used = 0.0
        for i in range(n):
            if i in partial:
                k, frac = partial[i]
                pieces = [(hull_s[i][k], 1.0 - frac), (hull_s[i][k + 1], frac)]
            else:
                pieces = [(hull_s[i][reached[i]], 1.0)]
            for s_val, mass in pieces:
                if mass <= 0.0:
                    continue
                fragments.append((i, float(s_val), float(mass)))
                value += w[i] * mass * float(value_fn(i, np.array([s_val]))[0])
                cost_used += w[i] * mass * abs(s_val) ** p
        if cost_used > budget * (1.0 + 1e-9) + 1e-300:
            raise NumericalFailure(f"transport plan overspent: {cost_used} > {budget}")
        if cost_used > budget:
            # re-accumulation rounding can overshoot by ulps; shed the excess
            # mass from the costliest fragment back to zero displacement so
            # the returned plan is certified within budget
            j = max(range(len(fragments)),
                    key=lambda t: w[fragments[t][0]] * abs(fragments[t][1]) ** p)
            i_j, s_j, m_j = fragments[j]
            unit = w[i_j] * abs(s_j) ** p
            shed = min(m_j, (cost_used - budget) / unit)
            fragments[j] = (i_j, s_j, m_j - shed)
            fragments.append((i_j, 0.0, shed))
            value += w[i_j] * shed * float(value_fn(i_j, np.array([0.0]))[0]
                                           - value_fn(i_j, np.array([s_j]))[0])
            cost_used = min(cost_used - unit * shed, budget)
        if best is None or value < best[0]:
            best = (value, fragments, cost_used)
        # refine around the active vertices of each displaced atom
        new_grids = []
        changed = False
        for i in range(n):
            if reached[i] == 0 and i not in partial:
                new_grids.append(grids[i])  # atom never moved; nothing to refine
                continue
            active = {hull_s[i][reached[i]]}
            if i in partial:
                k, _ = partial[i]
                active.update((hull_s[i][k], hull_s[i][k + 1]))
            grid = grids[i]
            extra = []
            for s_star in active:
                j = int(np.searchsorted(grid, s_star))
                gap = 0.0
                if j + 1 < grid.size:
                    gap = max(gap, grid[min(j + 1, grid.size - 1)] - s_star)
                if j > 0:
                    gap = max(gap, s_star - grid[j - 1])
                if gap > 0.0:
                    extra.append(np.linspace(s_star - gap, s_star + gap, 33))
            if extra:
                changed = True
                merged = np.unique(np.clip(np.concatenate([grid] + extra),
                                           s_lo[i], s_hi[i]))
                new_grids.append(merged)
            else:
                new_grids.append(grid)
        if not changed:
            break
        grids = new_grids
    assert best is not None
    return best


def adversary_inner_inf(P: DiscreteMeasure, utility: Utility, pi, delta: float,
                        order, *, grid_points: int = 1200, refinements: int = 3,
                        grid_step: float | None = None
                        ) -> tuple[float, DiscreteMeasure]:
    """Certified inner infimum inf_{W_p(P~,P) <= delta} E_{P~}[u(pi X)] (d=1).

    Each atom moves against the position (displacement capped by the state
    space S); the value and the attaining two-fragment plan come from the
    envelope program above. Unbounded S in the displacement direction is
    rejected: there the infimum is genuinely -inf (a vanishing-mass fragment
    sent to the domain edge or along an exponential tail).
    """
    if P.dim != 1:
        raise ConfigError("the adversary oracle is implemented for d = 1")
    if order.is_inf:
        raise ConfigError("order p = inf reduces exactly; use robust_solve_inf")
    if P.n_atoms > _ORACLE_MAX_ATOMS:
        raise ConfigError(f"oracle limited to {_ORACLE_MAX_ATOMS} atoms, "
                          f"got {P.n_atoms}")
    if delta < 0.0:
        raise ConfigError(f"delta must be nonnegative, got {delta}")
    pi_s = float(np.atleast_1d(np.asarray(pi, dtype=float))[0])
    x = P.support_1d
    w = P.weights
    if delta == 0.0 or abs(pi_s) <= PI_ZERO_THRESHOLD:
        wealth = pi_s * x
        if not utility.contains(wealth):
            raise DomainCompatibilityError("wealth outside the utility domain at this strategy")
        return float(np.dot(w, utility.u(wealth))), P

    space = P.state_space if P.state_space is not None else StateSpace.unbounded(1)
    s_floor, s_ceil = space.lower[0], space.upper[0]
    # beneficial displacement direction: against the position
    direction = -math.copysign(1.0, pi_s)
    if direction < 0.0:
        extents = x - s_floor
    else:
        extents = s_ceil - x
    if not np.all(np.isfinite(extents)):
        if math.isinf(utility.domain[0]) and utility.kind == "exponential":
            raise DegenerateSensitivityError(
                "exponential utility with finite order on an unbounded state space: "
                "the inner infimum is -inf for every delta > 0")
        raise DomainCompatibilityError(
            "finite-order adversary needs a state space bounded in the "
            "displacement direction")
    worst_wealth = pi_s * (x + direction * extents)
    d_lo, d_hi = utility.domain
    if np.any(worst_wealth <= d_lo + _DOMAIN_MARGIN) or np.any(worst_wealth >= d_hi - _DOMAIN_MARGIN):
        raise DomainCompatibilityError(
            "state space lets wealth reach the utility-domain boundary at this "
            "strategy; the inner infimum is -inf")
    if not np.all(np.isfinite(utility.u(worst_wealth))):
        # utility saturates float range at the worst reachable wealth (outer
        # line searches probe extreme strategies); -inf is the correctly
        # rounded infimum and the center measure stands in as the witness
        return -math.inf, P
    if direction < 0.0:
        s_lo, s_hi = -extents, np.zeros_like(x)
    else:
        s_lo, s_hi = np.zeros_like(x), extents

    def value_fn(i: int, s: np.ndarray) -> np.ndarray:
        return utility.u(pi_s * (x[i] + s))

    value, fragments, _ = _transport_minimize(
        x, w, s_lo, s_hi, order.p, delta ** order.p, value_fn,
        grid_points=grid_points, refinements=refinements, grid_step=grid_step)
    pts = np.array([x[i] + s for i, s, m in fragments if m > 0.0])
    masses = np.array([w[i] * m for i, s, m in fragments if m > 0.0])
    adversary = _as_adversary(pts, masses / masses.sum(), base=P, delta=delta,
                              p=order.p, constrained=True)
    return value, adversary


def robust_solve_p(spec: ProblemSpec, delta: float, *, grid_points: int = 1200,
                   refinements: int = 3, xatol: float = 1e-8) -> RobustSolution:
    """Outer maximization over A of the certified inner infimum (finite p, d=1)."""
    if spec.order.is_inf:
        raise ConfigError("robust_solve_p needs a finite order (use robust_solve_inf)")
    if spec.dim != 1:
        raise ConfigError("the finite-order solver is implemented for d = 1")
    if delta < 0.0:
        raise ConfigError(f"delta must be nonnegative, got {delta}")
    degeneracy_guard(spec)
    if delta == 0.0:
        base = solve_baseline(spec)
        return RobustSolution(delta=0.0, V_delta=base.V0, pi_delta=base.pi_star,
                              adversary=spec.model, transport_cost=0.0,
                              method="finite_p_oracle")
    space = spec.state_space
    corners = np.array([space.lower[0], space.upper[0]])
    if not np.all(np.isfinite(corners)):
        raise DomainCompatibilityError(
            "finite-order robust solve needs a bounded state space")
    lo, hi = _feasible_interval_raw(corners, 0.0, spec.utility,
                                    spec.action_space.lower[0],
                                    spec.action_space.upper[0])
    if not lo < hi:
        raise DomainCompatibilityError(
            "no strategy keeps wealth inside the utility domain over the whole "
            "state space")

    cache: dict[float, float] = {}

    def inner(pi_val: float) -> float:
        if pi_val not in cache:
            cache[pi_val], _ = adversary_inner_inf(
                spec.model, spec.utility, pi_val, delta, spec.order,
                grid_points=grid_points, refinements=refinements)
        return cache[pi_val]

    res = minimize_scalar(lambda t: -inner(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol})
    pi = float(res.x)
    # Newton polish on the envelope derivative E_{P*}[X u'(pi X)] (Danskin);
    # re-solve the inner problem at each step.
    for _ in range(6):
        _, adv = adversary_inner_inf(spec.model, spec.utility, pi, delta, spec.order,
                                     grid_points=grid_points, refinements=refinements)
        y = adv.support_1d
        m = adv.weights
        g = float(np.dot(m * spec.utility.u_prime(pi * y), y))
        h = float(np.dot(m * spec.utility.u_double_prime(pi * y), y * y))
        if h >= 0.0 or abs(g) <= 1e-13:
            break
        nxt = min(max(pi - g / h, lo), hi)
        if nxt == pi:
            break
        pi = nxt
    # endpoint candidates (pinned optima lose nothing; interior keeps polish)
    for cand in (lo, hi, 0.0 if lo < 0.0 < hi else pi):
        if inner(cand) > inner(pi):
            pi = cand
    if abs(pi) <= max(PI_ZERO_THRESHOLD, xatol * 1e-2):
        pi = 0.0
    value, adversary = adversary_inner_inf(spec.model, spec.utility, pi, delta,
                                           spec.order, grid_points=grid_points,
                                           refinements=refinements)
    if pi == 0.0 and lo < 0.0 < hi:
        # all ball members attain u(0); report the saddle adversary (uniform
        # shift zeroing the mean keeps pi = 0 optimal), when it is feasible
        mean = float(spec.model.weights @ spec.model.support_1d)
        shift = min(max(mean, -delta), delta)
        shifted = spec.model.support_1d - shift
        if np.all((shifted >= space.lower[0]) & (shifted <= space.upper[0])):
            adversary = _as_adversary(shifted, spec.model.weights, base=spec.model,
                                      delta=delta, p=spec.order.p, constrained=True)
    cost = _certified_cost(spec.model, adversary, spec.order, delta)
    return RobustSolution(delta=float(delta), V_delta=value, pi_delta=np.array([pi]),
                          adversary=adversary, transport_cost=cost,
                          method="finite_p_oracle")


def robust_solve(spec: ProblemSpec, delta: float, **kwargs) -> RobustSolution:
    """Dispatch on the order: exact reduction at p = inf, oracle otherwise."""
    if spec.order.is_inf:
        return robust_solve_inf(spec, delta)
    return robust_solve_p(spec, delta, **kwargs)


def solve_delta_grid(spec: ProblemSpec, deltas) -> list[RobustSolution]:
    """Solve along a radius grid and enforce V(delta) nonincreasing.

    A violation beyond slack flags an oracle failure rather than being
    returned as data."""
    deltas = [float(d) for d in deltas]
    solutions = [robust_solve(spec, d) for d in deltas]
    order = np.argsort(deltas)
    for a, b in zip(order[:-1], order[1:]):
        slack = 1e-9 * (1.0 + abs(solutions[a].V_delta))
        if solutions[b].V_delta > solutions[a].V_delta + slack:
            raise NumericalFailure(
                f"robust value increased along the radius grid: "
                f"V({deltas[a]}) = {solutions[a].V_delta} < "
                f"V({deltas[b]}) = {solutions[b].V_delta}")
    return solutions


# ---------------------------------------------------------------------------
# Robust Davis pricing
# ---------------------------------------------------------------------------

def _window_min(payoff: Payoff, lo: float, hi: float) -> float:
    """min of g on [lo, hi]: kink candidates + grid + bounded local polish."""
    if hi <= lo:
        return float(payoff(np.array([lo]))[0])
    cand = np.unique(np.clip(np.concatenate([
        np.linspace(lo, hi, 2001),
        np.asarray([k for k in payoff.kinks if lo <= k <= hi], dtype=float),
    ]), lo, hi))
    vals = payoff(cand)
    j = int(np.argmin(vals))
    b_lo = cand[max(j - 1, 0)]
    b_hi = cand[min(j + 1, cand.size - 1)]
    best = float(vals[j])
    if b_lo < b_hi:
        res = minimize_scalar(lambda t: float(payoff(np.array([t]))[0]),
                              bounds=(b_lo, b_hi), method="bounded",
                              options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return best


def _ball_infimum_of_price(spec: ProblemSpec, payoff: Payoff, delta: float) -> float:
    """inf over the ball of E[g] — the robust price when the marginal-utility
    weight is constant (pi_delta = 0 interior)."""
    x = spec.model.support_1d
    w = spec.model.weights
    space = spec.state_space
    if spec.order.is_inf:
        total = 0.0
        for xi, wi in zip(x, w):
            total += wi * _window_min(payoff, max(xi - delta, space.lower[0]),
                                      min(xi + delta, space.upper[0]))
        return total
    if not (math.isfinite(space.lower[0]) and math.isfinite(space.upper[0])):
        raise DomainCompatibilityError(
            "finite-order ball infimum needs a bounded state space")
    s_lo = space.lower[0] - x
    s_hi = space.upper[0] - x

    def value_fn(i: int, s: np.ndarray) -> np.ndarray:
        return payoff(x[i] + s)

    value, _, _ = _transport_minimize(x, w, s_lo, s_hi, spec.order.p,
                                      delta ** spec.order.p, value_fn)
    return value


def robust_davis_price(spec: ProblemSpec, payoff: Payoff, delta: float,
                       solution: RobustSolution | None = None) -> float:
    """Marginal-utility price under the worst-case measure at radius delta."""
    if delta < 0.0:
        raise ConfigError(f"delta must be nonnegative, got {delta}")
    sol = solution if solution is not None else robust_solve(spec, delta)
    pi = sol.pi_delta_scalar
    if abs(pi) > PI_ZERO_THRESHOLD:
        y = sol.adversary.support_1d
        dens = sol.adversary.weights * spec.utility.u_prime(pi * y)
        dens = dens / dens.sum()
        return float(dens @ payoff(y))
    a_lo = spec.action_space.lower[0]
    a_hi = spec.action_space.upper[0]
    zero_interior = a_lo < -1e-14 and a_hi > 1e-14
    mean = float(spec.model.weights @ spec.model.support_1d)
    if zero_interior:
        if abs(mean) <= _MEAN_ZERO_TOL:
            # no trading at any radius: the price degrades to the robust
            # buyer's bound over the whole ball
            return _ball_infimum_of_price(spec, payoff, delta)
        # the optimizer collapsed to zero at this radius (delta >= drift):
        # the saddle adversary is the uniform shift that zeroes the mean,
        # and the pricing weight u'(0 * y) is constant
        saddle_shift = min(max(mean, -delta), delta)
        return float(spec.model.weights @ payoff(spec.model.support_1d - saddle_shift))
    e = _pinned_direction(spec)
    y = spec.model.support_1d - delta * e
    return float(spec.model.weights @ payoff(y))


def robust_davis_first_order(spec: ProblemSpec, payoff: Payoff, delta: float) -> float:
    """First-order approximation of the robust Davis price at radius delta.

    Reweights the baseline atoms displaced along the transport direction,
    x |-> x - delta T(x), by marginal utility at the first-order strategy
    pi* + delta pi*'(0). Agrees with robust_davis_price to O(delta^2) for
    interior nonzero optima."""
    sol = solve_baseline(spec)
    if sol.pi_is_zero or sol.boundary:
        raise AssumptionViolation(
            "the first-order price approximation needs an interior nonzero optimizer")
    pi_prime, _ = optimizer_sensitivity(spec, sol)
    T = transport_direction(spec, sol, spec.model.points)
    y = spec.model.support_1d - delta * T[:, 0]
    pi_new = sol.pi_star_scalar + delta * float(pi_prime[0])
    dens = spec.model.weights * spec.utility.u_prime(pi_new * y)
    dens = dens / dens.sum()
    return float(dens @ payoff(y))


def martingale_check_robust(spec: ProblemSpec, solution: RobustSolution) -> float:
    """| E[X] | under the robust pricing measure (marginal-utility reweighted
    adversary). Zero to solver tolerance for interior pi_delta."""
    pi = np.atleast_1d(solution.pi_delta)
    y = solution.adversary.points
    dens = solution.adversary.weights * spec.utility.u_prime(y @ pi)
    dens = dens / dens.sum()
    return float(np.linalg.norm(dens @ y))
