"""Baseline expected-utility problem: solve, price, cross-check.

Purpose
-------
Solves the one-period problem

    V(0) = sup_{pi in A} E_P[u(<X, pi>)]

for a discrete model P, produces the subjective pricing measure

    dQ_u/dP = u'(<X, pi*>) / E_P[u'(<X, pi*>)]

(under which X is a martingale whenever pi* is an interior optimizer, by the
first-order condition E_P[X u'(<X, pi*>)] = 0), and computes the marginal
utility (Davis) price of an option g two independent ways:

* directly as p_d = E_{Q_u}[g(X)],
* as the root of p_d |-> d/d-eps V(eps, p_d) at eps = 0, where

      V(eps, p_d) = sup_pi E_P[u(-eps + <X, pi> + (eps/p_d) g(X))]

  and the eps-derivative is a central finite difference with a full inner
  re-optimization of pi at each eps. The two routes are kept strictly
  separate: the root-finding path never reuses the envelope formula.

Solver: the objective is strictly concave and both derivatives are exact atom
sums, so d=1 uses a bracketing root find on the gradient with Newton polish,
and d>1 uses damped projected Newton with a line search that keeps wealth
inside the utility domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (ArbitrageError, BoundaryOptimumError, ConfigError,
                     DomainCompatibilityError, NumericalFailure)
from .measures import DiscreteMeasure, StateSpace, WassersteinOrder, no_arbitrage_check
from .utility import Utility

# |pi*| at or below this routes to the pi*=0 branches of the sensitivity and
# robust-pricing formulas.
PI_ZERO_THRESHOLD = 1e-10

# Minimal wealth clearance from the utility-domain boundary.
_DOMAIN_MARGIN = 1e-9

_BOUNDARY_TOL = 1e-12


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Payoff:
    """Option payoff g with gradient, d=1.

    Kinked catalog members (call, butterfly, abs_shift) are quadratically
    rounded on [kink - s, kink + s]; outside those bands the smoothed and raw
    payoffs coincide, so the smoothing is inert whenever no atom falls within
    s of a kink.
    """

    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    kinks: tuple[float, ...] = ()
    smoothing: float = 0.0
    params: dict = field(default_factory=dict)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)


def power_payoff(k: int) -> Payoff:
    k = int(k)
    if k < 1:
        raise ConfigError(f"power payoff needs integer exponent k >= 1, got {k}")
    return Payoff(
        kind="power",
        value=lambda x: np.asarray(x, dtype=float) ** k,
        grad=lambda x: k * np.asarray(x, dtype=float) ** (k - 1),
        params={"k": k},
    )


def _smoothed_call(strike: float, s: float):
    """(x - strike)^+ with a C^1 quadratic cap on [strike - s, strike + s]."""

    def value(x):
        x = np.asarray(x, dtype=float)
        y = x - strike
        out = np.maximum(y, 0.0)
        band = np.abs(y) <= s
        out = np.where(band, (y + s) ** 2 / (4.0 * s), out)
        return out

    def grad(x):
        x = np.asarray(x, dtype=float)
        y = x - strike
        out = np.where(y > 0.0, 1.0, 0.0)
        band = np.abs(y) <= s
        out = np.where(band, (y + s) / (2.0 * s), out)
        return out

    return value, grad


def call_payoff(strike: float = 0.0, smoothing: float = 1e-4) -> Payoff:
    if smoothing <= 0.0:
        raise ConfigError("smoothing width must be positive")
    v, g = _smoothed_call(strike, smoothing)
    return Payoff(kind="call", value=v, grad=g, kinks=(float(strike),),
                  smoothing=smoothing, params={"strike": float(strike)})


def butterfly_payoff(K: float, smoothing: float = 1e-4) -> Payoff:
    """(x+K)^+ - 2 x^+ + (x-K)^+  — the tent (K - |x|)^+, three smoothed kinks."""
    if K <= 0.0:
        raise ConfigError(f"butterfly needs K > 0, got {K}")
    if smoothing <= 0.0:
        raise ConfigError("smoothing width must be positive")
    v1, g1 = _smoothed_call(-K, smoothing)
    v2, g2 = _smoothed_call(0.0, smoothing)
    v3, g3 = _smoothed_call(K, smoothing)
    return Payoff(
        kind="butterfly",
        value=lambda x: v1(x) - 2.0 * v2(x) + v3(x),
        grad=lambda x: g1(x) - 2.0 * g2(x) + g3(x),
        kinks=(-float(K), 0.0, float(K)),
        smoothing=smoothing,
        params={"K": float(K)},
    )


def abs_shift_payoff(x0: float, smoothing: float = 1e-4) -> Payoff:
    """|x + x0| with a quadratic rounding of the kink at -x0."""
    if smoothing <= 0.0:
        raise ConfigError("smoothing width must be positive")
    s = smoothing

    def value(x):
        y = np.asarray(x, dtype=float) + x0
        out = np.abs(y)
        return np.where(np.abs(y) <= s, (y * y + s * s) / (2.0 * s), out)

    def grad(x):
        y = np.asarray(x, dtype=float) + x0
        out = np.sign(y)
        return np.where(np.abs(y) <= s, y / s, out)

    return Payoff(kind="abs_shift", value=value, grad=grad, kinks=(-float(x0),),
                  smoothing=s, params={"x0": float(x0)})


def custom_payoff(xs, ys) -> Payoff:
    """Tabulated payoff: linear interpolation for g, central differences on the
    table grid for the gradient (interpolated between nodes)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ConfigError("custom payoff needs matching 1-d x/y tables with >= 2 nodes")
    if np.any(np.diff(xs) <= 0.0):
        raise ConfigError("custom payoff x-table must be strictly increasing")
    dy = np.gradient(ys, xs)  # central differences, one-sided at the ends
    return Payoff(
        kind="custom",
        value=lambda x: np.interp(np.asarray(x, dtype=float), xs, ys),
        grad=lambda x: np.interp(np.asarray(x, dtype=float), xs, dy),
        params={"n_nodes": int(xs.size)},
    )


_PAYOFF_BUILDERS: dict[str, Callable[..., Payoff]] = {
    "power": power_payoff,
    "call": call_payoff,
    "butterfly": butterfly_payoff,
    "abs_shift": abs_shift_payoff,
    "custom": custom_payoff,
}


def make_payoff(descriptor: dict) -> Payoff:
    if not isinstance(descriptor, dict) or "kind" not in descriptor:
        raise ConfigError("payoff descriptor needs a 'kind' field")
    kind = descriptor["kind"]
    if kind not in _PAYOFF_BUILDERS:
        raise ConfigError(f"unknown payoff kind {kind!r}")
    kwargs = {k: v for k, v in descriptor.items() if k != "kind"}
    try:
        return _PAYOFF_BUILDERS[kind](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for payoff kind {kind!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Problem specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Model + utility + action box A + state space S + transport order (+ payoff).

    Construction verifies no-arbitrage and that wealth stays inside the
    utility domain with positive margin for actions in A evaluated on the
    atoms of P (the compatibility condition the closed-form solver relies
    on). Robust searches additionally require compatibility over the whole
    state space; that stricter check lives in the robust solver.
    """

    model: DiscreteMeasure
    utility: Utility
    action_space: StateSpace
    order: WassersteinOrder = field(default_factory=lambda: WassersteinOrder(math.inf))
    payoff: Payoff | None = None
    state_space: StateSpace | None = None
    solver_tol: float = 1e-12
    max_iterations: int = 200

    def __post_init__(self) -> None:
        if self.action_space.dim != self.model.dim:
            raise ConfigError("action-space dimension does not match the model")
        space = self.state_space if self.state_space is not None else self.model.state_space
        if space is None:
            space = StateSpace.unbounded(self.model.dim)
        if not space.contains(self.model.points):
            raise ConfigError("model atoms outside the declared state space")
        object.__setattr__(self, "state_space", space)
        if not no_arbitrage_check(self.model):
            raise ArbitrageError("baseline model admits arbitrage "
                                 "(some nonzero strategy never gains)")
        if self.model.dim == 1:
            lo, hi = _feasible_pi_interval(self)
            if not lo < hi:
                raise DomainCompatibilityError(
                    "no strategy in A keeps wealth inside the utility domain")

    @property
    def dim(self) -> int:
        return self.model.dim


def _feasible_pi_interval(spec: ProblemSpec) -> tuple[float, float]:
    """Maximal sub-interval of A (d=1) on which every atom's wealth sits in the
    utility domain with margin. Intersection of per-atom half-lines."""
    return _feasible_interval_raw(spec.model.support_1d, 0.0, spec.utility,
                                  spec.action_space.lower[0], spec.action_space.upper[0])


def _feasible_interval_raw(x: np.ndarray, endowment, utility: Utility,
                           a_lo: float, a_hi: float) -> tuple[float, float]:
    """Same intersection on raw arrays, wealth pi*x_i + e_i."""
    e = np.zeros(x.shape[0]) + endowment
    d_lo, d_hi = utility.domain
    lo, hi = a_lo, a_hi
    for xi, ei in zip(x, e):
        if xi > 0.0:
            if not math.isinf(d_lo):
                lo = max(lo, (d_lo + _DOMAIN_MARGIN - ei) / xi)
            if not math.isinf(d_hi):
                hi = min(hi, (d_hi - _DOMAIN_MARGIN - ei) / xi)
        elif xi < 0.0:
            if not math.isinf(d_lo):
                hi = min(hi, (d_lo + _DOMAIN_MARGIN - ei) / xi)
            if not math.isinf(d_hi):
                lo = max(lo, (d_hi - _DOMAIN_MARGIN - ei) / xi)
        else:
            if not (d_lo + _DOMAIN_MARGIN <= ei <= d_hi - _DOMAIN_MARGIN):
                return 1.0, 0.0  # empty
    return lo, hi


@dataclass(frozen=True)
class BaselineSolution:
    """Optimal strategy with diagnostics.

    ``q_u`` reweights P by normalized marginal utility; it is well defined for
    interior optima and for pi* = 0 (constant u'), and None on other boundary
    solutions. ``hessian`` is E_P[X X^T u''(<X, pi*>)].
    """

    pi_star: np.ndarray
    V0: float
    foc_residual: np.ndarray
    q_u: DiscreteMeasure | None
    hessian: np.ndarray
    boundary: bool

    @property
    def pi_star_scalar(self) -> float:
        if self.pi_star.size != 1:
            raise ConfigError("scalar strategy requested on a d>1 solution")
        return float(self.pi_star[0])

    @property
    def pi_is_zero(self) -> bool:
        return bool(np.linalg.norm(self.pi_star) <= PI_ZERO_THRESHOLD)


def _wealth(spec: ProblemSpec, pi: np.ndarray, endowment: np.ndarray | float = 0.0) -> np.ndarray:
    return spec.model.points @ np.atleast_1d(pi) + endowment


def _objective(spec: ProblemSpec, pi: np.ndarray, endowment=0.0) -> float:
    w = _wealth(spec, pi, endowment)
    if not spec.utility.contains(w):
        return -math.inf
    return spec.model.expectation(spec.utility.u(w))


def _gradient(spec: ProblemSpec, pi: np.ndarray, endowment=0.0) -> np.ndarray:
    w = _wealth(spec, pi, endowment)
    return (spec.model.weights * spec.utility.u_prime(w)) @ spec.model.points


def _hessian(spec: ProblemSpec, pi: np.ndarray, endowment=0.0) -> np.ndarray:
    w = _wealth(spec, pi, endowment)
    weighted = spec.model.weights * spec.utility.u_double_prime(w)
    return (weighted[:, None] * spec.model.points).T @ spec.model.points


def _concave_max_raw(x: np.ndarray, w: np.ndarray, utility: Utility,
                     a_lo: float, a_hi: float, endowment=0.0) -> tuple[float, bool]:
    """Concave maximization of sum_i w_i u(pi x_i + e_i) over [a_lo, a_hi]
    intersected with the domain-feasible interval, on raw arrays.

    The gradient pi -> E[X u'(pi X + e)] is nonincreasing (strictly decreasing
    off the linear branch of the capped utility), so its root — or the sign of
    the gradient at the interval ends — pins the maximizer.
    """
    e = np.zeros(x.shape[0]) + endowment
    lo, hi = _feasible_interval_raw(x, e, utility, a_lo, a_hi)
    if not lo < hi:
        raise DomainCompatibilityError("empty feasible strategy interval")

    def grad(p: float) -> float:
        return float(np.dot(w * utility.u_prime(p * x + e), x))

    g_lo, g_hi = grad(lo), grad(hi)
    if g_lo <= 0.0:
        return lo, True  # maximizer at the left end (A-bound or domain-bound)
    if g_hi >= 0.0:
        return hi, True
    pi = brentq(grad, lo, hi, xtol=1e-15, rtol=8.882e-16, maxiter=200)
    # Newton polish — the bracketing solve already gives ~1e-15, two damped
    # Newton steps push the residual to rounding level.
    for _ in range(2):
        h = float(np.dot(w * utility.u_double_prime(pi * x + e), x * x))
        if h >= 0.0:
            break
        pi = min(max(pi - grad(pi) / h, lo), hi)
    boundary = (abs(pi - a_lo) <= _BOUNDARY_TOL) or (abs(pi - a_hi) <= _BOUNDARY_TOL)
    return pi, boundary


def _solve_1d(spec: ProblemSpec, endowment=0.0) -> tuple[float, bool]:
    return _concave_max_raw(spec.model.support_1d, spec.model.weights, spec.utility,
                            spec.action_space.lower[0], spec.action_space.upper[0],
                            endowment)


def _solve_projected_newton(spec: ProblemSpec, endowment=0.0) -> tuple[np.ndarray, bool]:
    """Damped projected Newton for d > 1."""
    d = spec.dim
    lo = np.asarray(spec.action_space.lower)
    hi = np.asarray(spec.action_space.upper)
    pi = np.clip(np.zeros(d), lo, hi)
    if not np.isfinite(_objective(spec, pi, endowment)):
        raise DomainCompatibilityError("initial strategy infeasible for the utility domain")
    for _ in range(spec.max_iterations):
        g = _gradient(spec, pi, endowment)
        H = _hessian(spec, pi, endowment)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = g  # gradient ascent fallback
        f0 = _objective(spec, pi, endowment)
        alpha = 1.0
        improved = False
        for _ in range(60):
            cand = np.clip(pi + alpha * step, lo, hi)
            f1 = _objective(spec, cand, endowment)
            if math.isfinite(f1) and f1 >= f0 - 1e-18:
                if np.linalg.norm(cand - pi) <= 1e-16:
                    improved = False
                    break
                pi = cand
                improved = f1 > f0
                break
            alpha *= 0.5
        # Convergence: projected gradient small.
        g = _gradient(spec, pi, endowment)
        active_lo = (pi <= lo + _BOUNDARY_TOL) & (g < 0)
        active_hi = (pi >= hi - _BOUNDARY_TOL) & (g > 0)
        proj = g.copy()
        proj[active_lo | active_hi] = 0.0
        if np.linalg.norm(proj) <= spec.solver_tol:
            boundary = bool(np.any(pi <= lo + _BOUNDARY_TOL) or np.any(pi >= hi - _BOUNDARY_TOL))
            return pi, boundary
        if not improved and np.linalg.norm(proj) <= 1e-9:
            boundary = bool(np.any(pi <= lo + _BOUNDARY_TOL) or np.any(pi >= hi - _BOUNDARY_TOL))
            return pi, boundary
    raise NumericalFailure("projected Newton did not converge")


def solve_baseline(spec: ProblemSpec) -> BaselineSolution:
    """Maximize E_P[u(<X, pi>)] over the action box A.

    Interior optima satisfy the first-order condition
    E_P[X u'(<X, pi*>)] = 0 to solver tolerance; boundary optima are flagged
    (interiority-based sensitivity formulas then refuse, except the documented
    pi* = 0 case).
    """
    if spec.dim == 1:
        pi_val, boundary = _solve_1d(spec)
        pi = np.array([pi_val])
    else:
        pi, boundary = _solve_projected_newton(spec)
    w = _wealth(spec, pi)
    V0 = spec.model.expectation(spec.utility.u(w))
    residual = _gradient(spec, pi)
    hess = _hessian(spec, pi)
    q_u: DiscreteMeasure | None
    if boundary and np.linalg.norm(pi) > PI_ZERO_THRESHOLD:
        q_u = None
    else:
        q_u = _q_u(spec, pi)
    return BaselineSolution(pi_star=pi, V0=V0, foc_residual=residual,
                            q_u=q_u, hessian=hess, boundary=boundary)


def _q_u(spec: ProblemSpec, pi: np.ndarray) -> DiscreteMeasure:
    w = _wealth(spec, pi)
    dens = spec.model.weights * spec.utility.u_prime(w)
    return DiscreteMeasure(points=spec.model.points, weights=dens / dens.sum(),
                           state_space=spec.state_space,
                           is_quadrature=spec.model.is_quadrature,
                           kind="q_u", params={"base": spec.model.kind})


def q_u_measure(spec: ProblemSpec, sol: BaselineSolution) -> DiscreteMeasure:
    """P reweighted by normalized marginal utility at the optimum.

    E[X] vanishes under the returned measure for interior optima; for pi* = 0
    the density is constant and Q_u = P. Other boundary optima refuse.
    """
    if sol.boundary and not sol.pi_is_zero:
        raise BoundaryOptimumError("pricing measure requires an interior optimizer (or pi* = 0)")
    if sol.q_u is not None:
        return sol.q_u
    return _q_u(spec, sol.pi_star)


def davis_price(spec: ProblemSpec, sol: BaselineSolution, payoff: Payoff) -> float:
    """Marginal utility price p_d = E_{Q_u}[g(X)]."""
    q = q_u_measure(spec, sol)
    g_vals = payoff(q.support_1d if q.dim == 1 else q.points)
    return q.expectation(g_vals)


def solve_with_endowment(spec: ProblemSpec, endowment: np.ndarray) -> tuple[float, np.ndarray]:
    """sup_pi E_P[u(<X, pi> + e(X))] for a per-atom endowment vector.

    Used by the root-finding Davis price and by optimizer-continuity
    diagnostics; returns (value, maximizer).
    """
    endowment = np.asarray(endowment, dtype=float).reshape(-1)
    if endowment.shape[0] != spec.model.n_atoms:
        raise ConfigError("endowment must provide one value per atom")
    if spec.dim == 1:
        pi_val, _ = _solve_1d(spec, endowment)
        pi = np.array([pi_val])
    else:
        pi, _ = _solve_projected_newton(spec, endowment)
    value = _objective(spec, pi, endowment)
    return value, pi


def davis_price_via_root(spec: ProblemSpec, payoff: Payoff,
                         bracket: tuple[float, float], fd_step: float = 1e-5) -> float:
    """Davis price as the root of p_d -> d/d-eps V(eps, p_d)|_{eps=0}.

    The eps-derivative is a central finite difference (step ``fd_step``) with a
    full re-optimization of pi at each perturbed problem — an independent
    validation route for the envelope formula, not a reuse of it.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ConfigError("bracket must satisfy lo < hi")
    g_vals = payoff(spec.model.support_1d if spec.dim == 1 else spec.model.points)

    def eps_derivative(p_d: float) -> float:
        if p_d == 0.0:
            raise ConfigError("candidate price 0 is not admissible")
        e_plus = fd_step * (g_vals / p_d - 1.0)
        v_plus, _ = solve_with_endowment(spec, e_plus)
        v_minus, _ = solve_with_endowment(spec, -e_plus)
        return (v_plus - v_minus) / (2.0 * fd_step)

    f_lo, f_hi = eps_derivative(lo), eps_derivative(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise NumericalFailure(
            f"no sign change of the eps-derivative in the bracket [{lo}, {hi}]")
    return float(brentq(eps_derivative, lo, hi, xtol=1e-10, rtol=8.882e-16, maxiter=200))
