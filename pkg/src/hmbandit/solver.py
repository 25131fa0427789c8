"""Discounted dynamic programming for a single arm on a discretized belief grid.

The optimal value satisfies V = max(V_S, V_NS) with

    V_S(pi)  = rho(pi) + beta * [rho(pi) V(gamma1(pi)) + (1-rho(pi)) V(gamma0(pi))]
    V_NS(pi) = eta2 + beta * V(gamma2(pi))

and is computed by synchronous value-iteration sweeps with linear
interpolation between grid nodes.  V is convex and Lipschitz, so the
piecewise-linear approximation stays convex and its error is bounded.
An exact finite-horizon belief-tree evaluation (no grid) doubles as an
independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arm import ArmParams, gamma0, gamma1, gamma2, kappa1, rho
from .errors import HorizonTooLarge, IterationBudgetExceeded, TooCoarse

DEFAULT_GRID_POINTS = 2001
DEFAULT_TOL = 1e-9
MAX_SWEEPS = 10**6

# Exact tree evaluation: hard cap and the chunking limits that keep the
# breadth-first expansion inside a few hundred MB.
MAX_ORACLE_HORIZON = 20
_BF_HORIZON = 13          # deepest subtree expanded breadth-first
_BF_NODE_BUDGET = 4_000_000


@dataclass(frozen=True)
class BeliefGrid:
    """Sorted belief nodes spanning [0, 1]."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise TooCoarse("belief grid needs at least 3 nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise TooCoarse("belief grid must increase strictly from 0 to 1")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_points(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        """Largest gap between adjacent nodes (uniform grids: the spacing)."""
        return float(np.max(np.diff(self.nodes)))


def build_grid(n_points: int) -> BeliefGrid:
    """Uniform belief grid with n_points nodes on [0, 1]."""
    if n_points < 3:
        raise TooCoarse(f"n_points={n_points} < 3")
    return BeliefGrid(np.linspace(0.0, 1.0, int(n_points)))


_EVAL_KEYS = {"v": "v", "v_s": "v_s", "v_ns": "v_ns", "vs": "v_s", "vns": "v_ns"}


@dataclass(frozen=True)
class ValueTable:
    """Converged (or partially iterated) values on a belief grid."""

    grid: BeliefGrid
    v: np.ndarray
    v_s: np.ndarray
    v_ns: np.ndarray
    eta2: float
    beta: float
    iterations: int
    residual: float

    def __post_init__(self):
        for name in ("v", "v_s", "v_ns"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def eval(self, pi, which: str = "v"):
        """Linear interpolation of v / v_s / v_ns at pi (exact at nodes)."""
        key = _EVAL_KEYS.get(which.lower())
        if key is None:
            raise ValueError(f"which={which!r}; expected one of v, v_s, v_ns")
        values = getattr(self, key)
        out = np.interp(np.asarray(pi, dtype=float), self.grid.nodes, values)
        return float(out) if out.ndim == 0 else out

    def to_csv(self, path) -> None:
        """Write columns pi, v, v_s, v_ns at 17 significant digits."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("pi,v,v_s,v_ns\n")
            for p, v, vs, vns in zip(self.grid.nodes, self.v, self.v_s, self.v_ns):
                fh.write(f"{p:.17g},{v:.17g},{vs:.17g},{vns:.17g}\n")


def _interp_weights(nodes: np.ndarray, targets: np.ndarray):
    """Bracketing index and fractional weight of each target in the grid."""
    idx = np.searchsorted(nodes, targets, side="right") - 1
    idx = np.clip(idx, 0, nodes.size - 2)
    frac = (targets - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
    return idx, frac


class _BackupKernel:
    """Precomputed pieces of one synchronous sweep for (params, grid)."""

    def __init__(self, params: ArmParams, grid: BeliefGrid):
        nodes = grid.nodes
        self.r = rho(params, nodes)
        self.i1, self.f1 = _interp_weights(nodes, gamma1(params, nodes))
        self.i0, self.f0 = _interp_weights(nodes, gamma0(params, nodes))
        self.i2, self.f2 = _interp_weights(nodes, gamma2(params, nodes))

    def _lerp(self, v: np.ndarray, idx, frac):
        return v[..., idx] * (1.0 - frac) + v[..., idx + 1] * frac

    def sweep(self, v: np.ndarray, eta2s: np.ndarray, beta: float):
        """One synchronous backup of v (shape (..., n)); returns (v_s, v_ns)."""
        r = self.r
        v_s = r + beta * (r * self._lerp(v, self.i1, self.f1)
                          + (1.0 - r) * self._lerp(v, self.i0, self.f0))
        v_ns = eta2s + beta * self._lerp(v, self.i2, self.f2)
        return v_s, v_ns


def _solve_batch(params: ArmParams, eta2s: np.ndarray, beta: float,
                 grid: BeliefGrid, tol: float, budget: int = MAX_SWEEPS):
    """Value iteration from v=0 for a whole vector of subsidies at once.

    Returns (v, v_s, v_ns, iterations, per-row residuals); each row i is the
    solution for eta2s[i].  Stops when the batch sup-norm change drops below
    tol*(1-beta)/(2*beta), which bounds the distance to the grid-restricted
    fixed point by tol.
    """
    kernel = _BackupKernel(params, grid)
    eta2s = np.atleast_1d(np.asarray(eta2s, dtype=float))
    col = eta2s[:, None]
    v = np.zeros((eta2s.size, grid.n_points))
    thresh = tol * (1.0 - beta) / (2.0 * beta)
    for it in range(1, budget + 1):
        v_s, v_ns = kernel.sweep(v, col, beta)
        v_new = np.maximum(v_s, v_ns)
        row_delta = np.abs(v_new - v).max(axis=1)
        v = v_new
        if row_delta.max() <= thresh:
            return v, v_s, v_ns, it, row_delta
    raise IterationBudgetExceeded(
        f"no convergence within {budget} sweeps (last change {row_delta.max():.3e})"
    )


def solve(params: ArmParams, eta2: float, beta: float, grid=None,
          tol: float = DEFAULT_TOL, budget: int = MAX_SWEEPS) -> ValueTable:
    """Solve the single-arm dynamic program at one subsidy level."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta={beta!r} must lie strictly inside (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    grid = _as_grid(grid)
    v, v_s, v_ns, iters, resid = _solve_batch(
        params, np.array([eta2], dtype=float), beta, grid, tol, budget
    )
    return ValueTable(grid, v[0], v_s[0], v_ns[0], float(eta2), beta, iters,
                      float(resid[0]))


def _as_grid(grid) -> BeliefGrid:
    if grid is None:
        return build_grid(DEFAULT_GRID_POINTS)
    if isinstance(grid, BeliefGrid):
        return grid
    return build_grid(int(grid))


def bellman_backup(table: ValueTable, params: ArmParams) -> ValueTable:
    """One synchronous sweep applied to an existing table."""
    kernel = _BackupKernel(params, table.grid)
    v_s, v_ns = kernel.sweep(table.v[None, :], np.array([[table.eta2]]),
                             table.beta)
    v_s, v_ns = v_s[0], v_ns[0]
    v_new = np.maximum(v_s, v_ns)
    residual = float(np.abs(v_new - table.v).max())
    return ValueTable(table.grid, v_new, v_s, v_ns, table.eta2, table.beta,
                      table.iterations + 1, residual)


def finite_horizon_oracle(params: ArmParams, eta2: float, beta: float, pi,
                          horizon: int):
    """Exact optimal value of the horizon-step problem, no discretization.

    Enumerates the full action/signal tree on continuous beliefs; the result
    is the reference the grid solver is checked against.  Written for vector
    pi; horizons above 13 recurse level by level to cap memory, so 20 (the
    hard limit) is slow but safe.
    """
    if horizon > MAX_ORACLE_HORIZON:
        raise HorizonTooLarge(f"horizon {horizon} exceeds {MAX_ORACLE_HORIZON}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    pi_arr = np.atleast_1d(np.asarray(pi, dtype=float))
    out = _oracle_value(params, eta2, beta, pi_arr, horizon)
    return float(out[0]) if np.ndim(pi) == 0 else out


def _oracle_value(params, eta2, beta, beliefs, t):
    if t == 1:
        return np.maximum(rho(params, beliefs), eta2)
    if 3**t <= _BF_NODE_BUDGET:
        chunk = max(1, _BF_NODE_BUDGET // 3**t)
        if beliefs.size <= chunk:
            return _oracle_breadth_first(params, eta2, beta, beliefs, t)
        parts = [
            _oracle_breadth_first(params, eta2, beta, beliefs[i:i + chunk], t)
            for i in range(0, beliefs.size, chunk)
        ]
        return np.concatenate(parts)
    # Too deep to expand at once: peel one level and recurse.
    g1 = _oracle_value(params, eta2, beta, gamma1(params, beliefs), t - 1)
    g0 = _oracle_value(params, eta2, beta, gamma0(params, beliefs), t - 1)
    g2 = _oracle_value(params, eta2, beta, gamma2(params, beliefs), t - 1)
    r = rho(params, beliefs)
    return np.maximum(eta2 + beta * g2, r + beta * (r * g1 + (1.0 - r) * g0))


def _oracle_breadth_first(params, eta2, beta, beliefs, t):
    """Expand all reachable beliefs level by level, then fold values back up."""
    levels = [beliefs]
    for _ in range(t - 1):
        b = levels[-1]
        levels.append(np.concatenate(
            [gamma1(params, b), gamma0(params, b), gamma2(params, b)]
        ))
    g = np.maximum(rho(params, levels[-1]), eta2)
    for b in reversed(levels[:-1]):
        m = b.size
        g1, g0, g2 = g[:m], g[m:2 * m], g[2 * m:]
        r = rho(params, b)
        g = np.maximum(eta2 + beta * g2, r + beta * (r * g1 + (1.0 - r) * g0))
    return g


def oracle_error_bound(params: ArmParams, eta2: float, beta: float,
                       horizon: int, spacing: float) -> float:
    """Bound on |grid solution - exact horizon-step value| at any belief.

    Sum of the tail the truncated horizon ignores and the interpolation
    error of the grid, using the contraction-based Lipschitz factor (which
    requires beta*|mu0-mu1| < 1).
    """
    rmax = max(params.eta1, params.rho1, abs(eta2))
    tail = beta**horizon * rmax / (1.0 - beta)
    lip = kappa1(params, beta) * abs(params.rho1 - params.rho0)
    return tail + lip * spacing


def convexity_report(table: ValueTable, tol_convex: float = 1e-8) -> list:
    """Grid triples where any of v, v_s, v_ns bends the wrong way.

    Checks the second difference on consecutive node triples; for the convex
    value functions every entry should be >= -tol_convex, so the expected
    report is empty.
    """
    violations = []
    nodes = table.grid.nodes
    for name in ("v", "v_s", "v_ns"):
        y = getattr(table, name)
        d2 = y[:-2] - 2.0 * y[1:-1] + y[2:]
        for i in np.nonzero(d2 < -tol_convex)[0]:
            violations.append((name, float(nodes[i + 1]), float(d2[i])))
    return violations
