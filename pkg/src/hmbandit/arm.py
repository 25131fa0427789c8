"""Single-arm model: parameters, belief-update operators, and classifiers.

An arm is a two-state hidden Markov chain observed through a binary signal
when (and only when) it is sampled.  Beliefs are probabilities pi = P(state 0).
The three belief-update operators are

    gamma1(pi)  posterior-then-prediction after sampling and seeing signal 1,
    gamma0(pi)  same for signal 0,
    gamma2(pi)  prediction only (arm not sampled).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateObservation,
    NoConvergence,
    OrderViolation,
    OutOfRange,
    UnsupportedOrdering,
    ValidationError,
)

# Guard for the Bayes denominators in gamma0/gamma1.  Unreachable while
# 0 < rho0 < rho1 < 1, but documents the rho in {0, 1} extension explicitly.
MIN_DENOMINATOR = 1e-300

# Fixed-point iteration fallback.
FP_MAX_ITER = 100_000
FP_TOL = 1e-12
FP_RESIDUAL = 1e-10

_PROB_FIELDS = ("lambda0", "lambda1", "mu0", "mu1", "rho0", "rho1")


@dataclass(frozen=True)
class ArmParams:
    """All per-arm probabilities and rewards.

    lambda0/lambda1: P(next state 0 | current state i) when not sampled.
    mu0/mu1:         same when sampled.
    rho0/rho1:       P(signal 1 | state i) for a sampled arm.
    eta0/eta1:       reward for sampling the arm in state 0 / state 1.
    eta2:            reward for not sampling (the passive subsidy).
    """

    lambda0: float
    lambda1: float
    mu0: float
    mu1: float
    rho0: float
    rho1: float
    eta0: float
    eta1: float
    eta2: float = 0.0

    def __post_init__(self):
        for name in _PROB_FIELDS:
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise OutOfRange(f"{name}={p!r} is not a probability in [0, 1]")
        if not self.rho0 < self.rho1:
            raise OrderViolation(f"need rho0 < rho1, got {self.rho0} >= {self.rho1}")
        if not self.eta0 < self.eta1:
            raise OrderViolation(f"need eta0 < eta1, got {self.eta0} >= {self.eta1}")

    @property
    def rewards_tied(self) -> bool:
        """True iff the sampling rewards equal the signal probabilities."""
        return self.eta0 == self.rho0 and self.eta1 == self.rho1


def validate(raw) -> ArmParams:
    """Build ArmParams from a mapping, rejecting bad or unknown fields."""
    allowed = set(_PROB_FIELDS) | {"eta0", "eta1", "eta2"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown parameter field(s): {sorted(unknown)}")
    missing = (allowed - {"eta2"}) - set(raw)
    if missing:
        raise ValidationError(f"missing parameter field(s): {sorted(missing)}")
    try:
        kwargs = {k: float(v) for k, v in raw.items()}
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"non-numeric parameter value: {exc}") from exc
    return ArmParams(**kwargs)


def rho(params: ArmParams, pi):
    """Expected one-slot sampling signal rate: pi*rho0 + (1-pi)*rho1."""
    pi = np.asarray(pi, dtype=float)
    out = pi * params.rho0 + (1.0 - pi) * params.rho1
    return float(out) if out.ndim == 0 else out


def gamma2(params: ArmParams, pi):
    """Belief update when the arm is not sampled (prediction only; affine)."""
    pi = np.asarray(pi, dtype=float)
    out = pi * params.lambda0 + (1.0 - pi) * params.lambda1
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def gamma1(params: ArmParams, pi):
    """Belief update after sampling and observing signal 1."""
    pi = np.asarray(pi, dtype=float)
    num = pi * params.rho0 * params.mu0 + (1.0 - pi) * params.rho1 * params.mu1
    den = pi * params.rho0 + (1.0 - pi) * params.rho1
    if np.any(np.asarray(den) < MIN_DENOMINATOR):
        raise DegenerateObservation("signal-1 posterior undefined: P(Z=1) = 0")
    out = np.clip(num / den, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def gamma0(params: ArmParams, pi):
    """Belief update after sampling and observing signal 0."""
    pi = np.asarray(pi, dtype=float)
    u0 = 1.0 - params.rho0
    u1 = 1.0 - params.rho1
    num = pi * u0 * params.mu0 + (1.0 - pi) * u1 * params.mu1
    den = pi * u0 + (1.0 - pi) * u1
    if np.any(np.asarray(den) < MIN_DENOMINATOR):
        raise DegenerateObservation("signal-0 posterior undefined: P(Z=0) = 0")
    out = np.clip(num / den, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


_OPERATORS = {"gamma0": gamma0, "gamma1": gamma1, "gamma2": gamma2}


def _quadratic_fixed_point(w0: float, w1: float, mu0: float, mu1: float) -> list[float]:
    """Roots of (w0-w1)x^2 + (w1 - w0*mu0 + w1*mu1)x - w1*mu1 = 0 in the mu band.

    This is the fixed-point equation of x -> (x*w0*mu0 + (1-x)*w1*mu1) /
    (x*w0 + (1-x)*w1); w is rho for gamma1 and (1-rho) for gamma0.
    """
    a = w0 - w1
    b = w1 - w0 * mu0 + w1 * mu1
    c = -w1 * mu1
    lo, hi = min(mu0, mu1), max(mu0, mu1)
    if a == 0.0:
        roots = [] if b == 0.0 else [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return []
        # Standard cancellation-safe quadratic formula.
        q = -0.5 * (b + np.copysign(np.sqrt(disc), b if b != 0.0 else 1.0))
        roots = [q / a]
        if q != 0.0:
            roots.append(c / q)
    eps = 1e-12
    inside = [r for r in roots if lo - eps <= r <= hi + eps]
    return [float(min(max(r, 0.0), 1.0)) for r in inside]


def fixed_point(params: ArmParams, operator: str) -> float:
    """Limit point pi* = gamma(pi*) of one of the three belief operators.

    Analytic solve first (linear for gamma2, quadratic for gamma0/gamma1),
    plain iteration as cross-check and fallback.
    """
    if operator not in _OPERATORS:
        raise ValueError(f"operator must be one of {sorted(_OPERATORS)}")
    gamma = _OPERATORS[operator]

    if operator == "gamma2":
        drift = 1.0 - params.lambda0 + params.lambda1
        if drift == 0.0:
            raise NoConvergence("gamma2 is the identity map; no unique fixed point")
        candidates = [params.lambda1 / drift]
    elif operator == "gamma1":
        candidates = _quadratic_fixed_point(
            params.rho0, params.rho1, params.mu0, params.mu1
        )
    else:
        candidates = _quadratic_fixed_point(
            1.0 - params.rho0, 1.0 - params.rho1, params.mu0, params.mu1
        )

    for cand in candidates:
        if abs(gamma(params, cand) - cand) <= FP_RESIDUAL:
            return float(cand)

    # Iteration fallback from the middle of the invariant band.
    x = 0.5 * (params.mu0 + params.mu1) if operator != "gamma2" else 0.5
    for _ in range(FP_MAX_ITER):
        nxt = gamma(params, x)
        if abs(nxt - x) <= FP_TOL:
            x = nxt
            break
        x = nxt
    else:
        raise NoConvergence(f"{operator} fixed-point iteration exhausted its budget")
    if abs(gamma(params, x) - x) > FP_RESIDUAL:
        raise NoConvergence(f"{operator} iteration stalled away from a fixed point")
    return float(x)


@dataclass(frozen=True)
class RegionLabel:
    """Belief-interval label used by the closed-form index, plus boundaries."""

    label: str  # A1, A2a, A2b, A2c, A2d, A3, A4, A5
    mu1: float
    gamma1_inf: float
    gamma2_inf: float
    gamma0_inf: float
    mu0: float


def region_boundaries(params: ArmParams) -> tuple[float, float, float, float, float]:
    """(mu1, gamma1_inf, gamma2_inf, gamma0_inf, mu0) for the sticky ordering.

    Requires lambda0 = mu0 > mu1 = lambda1 and 0 < rho0 < rho1 < 1; the five
    boundaries then satisfy 0 < mu1 < gamma1_inf < gamma2_inf < gamma0_inf
    < mu0 < 1.
    """
    if not (params.lambda0 == params.mu0 and params.lambda1 == params.mu1):
        raise UnsupportedOrdering("closed-form regions need lambda0=mu0 and mu1=lambda1")
    if not params.mu0 > params.mu1:
        raise UnsupportedOrdering("closed-form regions need mu0 > mu1")
    if not (0.0 < params.rho0 and params.rho1 < 1.0):
        raise UnsupportedOrdering("closed-form regions need 0 < rho0 < rho1 < 1")
    b = (
        params.mu1,
        fixed_point(params, "gamma1"),
        fixed_point(params, "gamma2"),
        fixed_point(params, "gamma0"),
        params.mu0,
    )
    if not (0.0 < b[0] < b[1] < b[2] < b[3] < b[4] < 1.0):
        raise UnsupportedOrdering(f"fixed points out of order: {b}")
    return b


def classify_region(params: ArmParams, beta: float, pi: float) -> RegionLabel:
    """Assign a belief to one of the closed-form index regions.

    `beta` is part of the fixed operation signature but the boundaries depend
    only on the belief maps.  Boundary ties go to the left interval.
    """
    if not params.rewards_tied:
        raise UnsupportedOrdering("closed-form regions assume eta0=rho0 and eta1=rho1")
    mu1, g1_inf, g2_inf, g0_inf, mu0 = region_boundaries(params)
    if not 0.0 <= pi <= 1.0:
        raise OutOfRange(f"pi={pi!r} is not a belief in [0, 1]")

    if pi <= mu1:
        label = "A1"
    elif pi <= g2_inf:
        g1 = gamma1(params, pi)
        if g1 >= pi:
            label = "A2a"
        elif gamma0(params, pi) >= pi and gamma0(params, g1) > pi:
            label = "A2b" if gamma1(params, g1) >= pi else "A2c"
        else:
            label = "A2d"
    elif pi <= g0_inf:
        label = "A3"
    elif pi <= mu0:
        label = "A4"
    else:
        label = "A5"
    return RegionLabel(label, mu1, g1_inf, g2_inf, g0_inf, mu0)


def special_case(params: ArmParams):
    """Which monotone-advantage parameter band holds: 'Case1', 'Case2', or None.

    Case1: 0 <= mu0-mu1 <= 1/5 and |lambda0-lambda1| <= 1/5.
    Case2: 0 <= mu1-mu0 <= 1/3 and |lambda0-lambda1| <= 1/3.
    """
    dmu = params.mu0 - params.mu1
    dlam = abs(params.lambda0 - params.lambda1)
    if 0.0 <= dmu <= 1.0 / 5.0 and dlam <= 1.0 / 5.0:
        return "Case1"
    if 0.0 <= -dmu <= 1.0 / 3.0 and dlam <= 1.0 / 3.0:
        return "Case2"
    return None


def kappa1(params: ArmParams, beta: float) -> float:
    """Lipschitz factor 1 / (1 - beta*|mu0 - mu1|) of the value function."""
    d = beta * abs(params.mu0 - params.mu1)
    if d >= 1.0:
        raise ValueError("kappa1 requires beta*|mu0-mu1| < 1")
    return 1.0 / (1.0 - d)


def beta1_lower_bound(params: ArmParams, epsilon: float) -> float:
    """Constructive lower bound eps/(2u+eps) on the discount threshold,
    with u = max(rho0, rho1, eta2)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    u = max(params.rho0, params.rho1, params.eta2)
    return epsilon / (2.0 * u + epsilon)
