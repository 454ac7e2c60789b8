"""First-order sensitivities of the robust problem at radius zero.

Purpose
-------
For the problem V(delta) = sup_pi inf_{P~ in B_delta(P)} E[u(<X, pi>)] with a
p-Wasserstein ball and conjugate exponent q = p/(p-1) (q = 1 at p = inf), this
module evaluates the closed-form derivatives at delta = 0:

Value:
    V'(0) = - ( E_P[ |u'(<X, pi*>)|^q ] )^{1/q} * |pi*|            (<= 0)

Optimizer (pi* interior, nonzero, Hessian negative definite):
    kappa_u = ||u'||_{L^q(P)}^{1-q} * E_P[ (<X,pi*> u'' + u') * |u'|^{q-1} ]
    pi*'(0) = (grad^2_pi V(0))^{-1} (pi*/|pi*|) kappa_u,
    with grad^2_pi V(0) = E_P[X X^T u''(<X, pi*>)].

Transport direction (the adversary's first-order mass displacement):
    T(x)  = (pi*/|pi*|) |u'(<x,pi*>)|^{q-1} (E_P[|u'|^q])^{1/q-1}
    T(x)  = pi*/|pi*|  when q = 1.

Davis price p_d(delta) = E_{P*}[u' g]/E_{P*}[u'], three branches at delta=0:
  (interior, pi* != 0)
    p_d'(0) = E_{Q_u}[ R_u(<X,pi*>) (<T(X),pi*> - <X, pi*'(0)>) (g(X) - p_d)
                       - <grad g(X), T(X)> ]
  (pi* = 0 interior, i.e. E_P[X] = 0: every ball member is worst-case and the
   robust price is the ball infimum of E[g])
    p_d'(0) = - ( E_P[ |grad g(X)|^q ] )^{1/q}
  (pi* = 0 pinned at the action boundary with E_P[X] != 0: the worst case is
   selected by continuity as the limit of the adversaries for feasible
   strategies pi -> 0, a uniform shift against the feasible direction e)
    p_d'(0) = - E_P[ <grad g(X), e> ].

A Kullback-Leibler comparator (radius-constrained relative-entropy ball) and
the first-order Wasserstein preference score complete the module. Everything
is an exact atom sum; no sampling.

Degeneracy guard: with exponential-type tails (exponential utility, or the
capped variant with a cap parameter below 1e-3) and a *finite* order p, models
representing unbounded-support laws make V'(0) = -inf; requesting a
closed-form sensitivity there raises ``DegenerateSensitivityError`` instead of
returning the (finite, wrong) formula value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .baseline_solver import PI_ZERO_THRESHOLD, BaselineSolution, Payoff, ProblemSpec, \
    davis_price, q_u_measure
from .errors import AssumptionViolation, BoundaryOptimumError, ConfigError, \
    DegenerateSensitivityError
from .measures import DiscreteMeasure, WassersteinOrder
from .utility import Utility

# Guard thresholds (see module docstring).
CAPPED_KAPPA_FLOOR = 1e-3
SUPPORT_DIAMETER_CAP = 100.0

_MEAN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class SensitivityReport:
    """All first-order quantities of one problem, with the branch that
    produced the Davis derivative."""

    q: float
    V_prime0: float
    pi_prime0: np.ndarray
    kappa_u: float
    davis_price: float | None
    davis_prime0: float | None
    branch: Literal["interior", "pi_star_zero"]
    kl_V_prime0: float | None = None

    def __post_init__(self) -> None:
        if self.branch not in ("interior", "pi_star_zero"):
            raise ConfigError(f"unknown branch tag {self.branch!r}")
        if self.V_prime0 > 1e-12:
            raise AssumptionViolation(
                f"value sensitivity must be nonpositive, got {self.V_prime0}")


def degeneracy_guard(spec: ProblemSpec) -> None:
    """Reject exponential-type utilities with finite p on unbounded models.

    Triggers when the utility has an exponential tail (exponential, or capped
    exponential with kappa < 1e-3), the order p is finite, and the model either
    stands in for an unbounded-support law or has support diameter above the
    cap. In that regime the worst case concentrates vanishing mass arbitrarily
    far out and the first-order sensitivity is -inf.
    """
    if spec.order.is_inf:
        return
    u = spec.utility
    exponential_tail = u.kind == "exponential" or (
        u.kind == "capped_exponential" and u.params.get("kappa", math.inf) < CAPPED_KAPPA_FLOOR)
    if not exponential_tail:
        return
    if spec.model.unbounded_tails or spec.model.support_diameter() > SUPPORT_DIAMETER_CAP:
        raise DegenerateSensitivityError(
            "finite transport order with exponential-type utility on an "
            "unbounded-support model: V'(0) = -inf, closed forms do not apply")


def _require_usable_optimum(sol: BaselineSolution) -> None:
    if sol.boundary and not sol.pi_is_zero:
        raise BoundaryOptimumError(
            "sensitivity formulas require an interior optimizer (or pi* = 0)")


def _lq_norm_uprime(spec: ProblemSpec, sol: BaselineSolution) -> float:
    w = spec.model.points @ sol.pi_star
    up = np.abs(spec.utility.u_prime(w))
    q = spec.order.q
    return float(spec.model.expectation(up ** q) ** (1.0 / q))


def value_sensitivity(spec: ProblemSpec, sol: BaselineSolution) -> float:
    """V'(0) = -||u'(<X,pi*>)||_{L^q} |pi*|; zero exactly when pi* = 0."""
    degeneracy_guard(spec)
    _require_usable_optimum(sol)
    norm_pi = float(np.linalg.norm(sol.pi_star))
    if norm_pi <= PI_ZERO_THRESHOLD:
        return 0.0
    return -_lq_norm_uprime(spec, sol) * norm_pi


def optimizer_sensitivity(spec: ProblemSpec, sol: BaselineSolution) -> tuple[np.ndarray, float]:
    """(pi*'(0), kappa_u). Needs pi* interior and nonzero, and a negative
    definite Hessian E[X X^T u''(<X,pi*>)]."""
    degeneracy_guard(spec)
    _require_usable_optimum(sol)
    norm_pi = float(np.linalg.norm(sol.pi_star))
    if norm_pi <= PI_ZERO_THRESHOLD:
        raise AssumptionViolation("optimizer sensitivity is undefined at pi* = 0")
    q = spec.order.q
    w = spec.model.points @ sol.pi_star
    up = spec.utility.u_prime(w)
    upp = spec.utility.u_double_prime(w)
    norm_q = _lq_norm_uprime(spec, sol)
    integrand = (w * upp + up) * np.abs(up) ** (q - 1.0)
    kappa = norm_q ** (1.0 - q) * spec.model.expectation(integrand)
    H = sol.hessian
    eigs = np.linalg.eigvalsh(H)
    if eigs.max() >= 0.0:
        raise AssumptionViolation(
            f"Hessian must be negative definite (max eigenvalue {eigs.max():.3e})")
    direction = sol.pi_star / norm_pi
    pi_prime = np.linalg.solve(H, direction) * kappa
    return pi_prime, float(kappa)


def transport_direction(spec: ProblemSpec, sol: BaselineSolution, x) -> np.ndarray:
    """T(x) for one point or an (n, d) batch; rows are direction vectors.

    For q = 1 the direction is the constant unit vector pi*/|pi*| (sign(pi*)
    in d=1) regardless of x.
    """
    _require_usable_optimum(sol)
    norm_pi = float(np.linalg.norm(sol.pi_star))
    if norm_pi <= PI_ZERO_THRESHOLD:
        raise AssumptionViolation("transport direction is undefined at pi* = 0")
    pts = np.asarray(x, dtype=float)
    squeeze = pts.ndim <= 1 and spec.dim == 1 and pts.ndim == 0
    pts = pts.reshape(-1, spec.dim)
    unit = sol.pi_star / norm_pi
    q = spec.order.q
    if q == 1.0:
        scale = np.ones(pts.shape[0])
    else:
        up = np.abs(spec.utility.u_prime(pts @ sol.pi_star))
        norm_q = _lq_norm_uprime(spec, sol)
        scale = up ** (q - 1.0) * norm_q ** (1.0 - q)
    out = scale[:, None] * unit[None, :]
    if squeeze:
        return out[0]
    return out


def _payoff_grad_atoms(spec: ProblemSpec, payoff: Payoff) -> np.ndarray:
    if spec.dim != 1:
        raise ConfigError("payoff gradients are implemented for d=1 models")
    return np.asarray(payoff.grad(spec.model.support_1d), dtype=float)


def _pinned_direction(spec: ProblemSpec) -> float:
    """Feasible unit direction e at a pi* = 0 optimum pinned on the boundary
    of A (d=1): +1 when A = [0, hi], -1 when A = [lo, 0]."""
    a_lo = spec.action_space.lower[0]
    a_hi = spec.action_space.upper[0]
    if abs(a_lo) <= 1e-14 and a_hi > 0.0:
        return 1.0
    if abs(a_hi) <= 1e-14 and a_lo < 0.0:
        return -1.0
    raise AssumptionViolation(
        "pi* = 0 with E_P[X] != 0 requires 0 on the action-space boundary; "
        "the first-order condition excludes it in the interior")


def davis_sensitivity(spec: ProblemSpec, sol: BaselineSolution, payoff: Payoff) -> float:
    """p_d'(0) under the branch dictated by pi* (see module docstring)."""
    degeneracy_guard(spec)
    if sol.pi_is_zero:
        grad = _payoff_grad_atoms(spec, payoff)
        mean = spec.model.weights @ spec.model.points
        if abs(float(mean[0])) <= _MEAN_ZERO_TOL:
            q = spec.order.q
            return -float(spec.model.expectation(np.abs(grad) ** q) ** (1.0 / q))
        e = _pinned_direction(spec)
        return -e * float(spec.model.expectation(grad))
    _require_usable_optimum(sol)
    pi_prime, _ = optimizer_sensitivity(spec, sol)
    q_u = q_u_measure(spec, sol)
    x = spec.model.points
    w = x @ sol.pi_star
    T = transport_direction(spec, sol, x)
    R = spec.utility.risk_aversion(w)
    g_vals = np.asarray(payoff(spec.model.support_1d), dtype=float)
    p_d = davis_price(spec, sol, payoff)
    grad_g = _payoff_grad_atoms(spec, payoff)
    recentering = R * (T @ sol.pi_star - x @ pi_prime) * (g_vals - p_d)
    # d=1: <grad g, T> = g'(x) * T_1(x)
    gradient_term = grad_g * T[:, 0]
    return float(q_u.expectation(recentering - gradient_term))


def kl_value_sensitivity(spec: ProblemSpec, sol: BaselineSolution) -> float:
    """Comparator: first-order decay of the value under a relative-entropy
    ball, -sqrt(2 Var_P(u(<X, pi*>))). Finite-support models only: quadrature
    stand-ins for continuous laws are rejected (the entropy ball collapses
    there)."""
    if spec.model.is_quadrature:
        raise AssumptionViolation(
            "relative-entropy comparator needs a genuinely finite-support model")
    _require_usable_optimum(sol)
    w = spec.model.points @ sol.pi_star
    u_vals = spec.utility.u(w)
    mean = spec.model.expectation(u_vals)
    var = spec.model.expectation((u_vals - mean) ** 2)
    if not math.isfinite(var):
        raise AssumptionViolation("non-finite utility variance")
    return -math.sqrt(2.0 * max(var, 0.0))


@dataclass(frozen=True)
class PreferenceComparison:
    score_base: float
    score_alternative: float
    ordering: Literal["base", "alternative", "tie"]


def preference_compare(P: DiscreteMeasure, P_alt: DiscreteMeasure, pi,
                       utility: Utility, order: WassersteinOrder,
                       delta: float, tie_tol: float = 1e-12) -> PreferenceComparison:
    """First-order robust preference between two models at a fixed strategy.

    score(M) = E_M[u(<X,pi>)] - delta |pi| (E_M[|u'(<X,pi>)|^q])^{1/q};
    the model with the larger score is preferred at radius delta.
    """
    if delta < 0.0:
        raise ConfigError("delta must be nonnegative")
    pi = np.atleast_1d(np.asarray(pi, dtype=float))

    def score(M: DiscreteMeasure) -> float:
        w = M.points @ pi
        base = M.expectation(utility.u(w))
        up = np.abs(utility.u_prime(w))
        q = order.q
        penalty = delta * float(np.linalg.norm(pi)) * M.expectation(up ** q) ** (1.0 / q)
        return base - penalty

    s_base, s_alt = score(P), score(P_alt)
    if abs(s_base - s_alt) <= tie_tol:
        ordering = "tie"
    elif s_base > s_alt:
        ordering = "base"
    else:
        ordering = "alternative"
    return PreferenceComparison(s_base, s_alt, ordering)


def sensitivity_report(spec: ProblemSpec, sol: BaselineSolution,
                       payoff: Payoff | None = None,
                       include_kl: bool | None = None) -> SensitivityReport:
    """Assemble the full report; Davis fields require a payoff.

    ``include_kl=None`` adds the comparator exactly when the model supports it.
    """
    v_prime = value_sensitivity(spec, sol)
    if sol.pi_is_zero:
        branch = "pi_star_zero"
        pi_prime = np.zeros(spec.dim)  # the optimizer stays at zero to first order
        kappa = math.nan
    else:
        branch = "interior"
        pi_prime, kappa = optimizer_sensitivity(spec, sol)
    p_d = p_d_prime = None
    payoff = payoff if payoff is not None else spec.payoff
    if payoff is not None:
        p_d = davis_price(spec, sol, payoff)
        p_d_prime = davis_sensitivity(spec, sol, payoff)
    kl = None
    if include_kl or (include_kl is None and not spec.model.is_quadrature):
        kl = kl_value_sensitivity(spec, sol)
    return SensitivityReport(q=spec.order.q, V_prime0=v_prime, pi_prime0=pi_prime,
                             kappa_u=kappa, davis_price=p_d, davis_prime0=p_d_prime,
                             branch=branch, kl_V_prime0=kl)
