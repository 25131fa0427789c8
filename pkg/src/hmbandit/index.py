"""Threshold policies, indexability checks, and Whittle-type subsidy indices.

The subsidy index W(pi) of a belief is the passive reward eta2 at which
sampling and not sampling are equally good, i.e. the root in eta2 of
V_S(pi) - V_NS(pi).  Where the chain is "sticky" (lambda0 = mu0 > mu1 =
lambda1, tied rewards) the index has closed forms on parts of the belief
range; everywhere else it is obtained numerically by scanning and
bisecting the subsidy against the converged dynamic program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arm import ArmParams, classify_region, gamma1, gamma2, rho
from .errors import NoCrossingInBracket, NonTerminatingTau, UnsupportedOrdering
from .solver import DEFAULT_TOL, ValueTable, _as_grid, _solve_batch, solve

INDEX_TOL = 1e-6          # subsidy accuracy of numeric index values
PI_REFINE_TOL = 1e-6      # belief accuracy of refined threshold crossings
ETA2_SCAN_STEP = 0.01     # coarse subsidy step used to bracket index roots
TAU_BUDGET = 10_000       # iteration cap for the gamma1 re-crossing time
BRACKET_EXPAND = 2.0      # one-shot widening applied when the scan finds no root
_DIRECTION_SLACK = 2e-6   # refinement noise allowed when judging monotonicity


def sampling_advantage(table: ValueTable) -> np.ndarray:
    """Nodal advantage of sampling: v_s - v_ns (>= 0 means sample)."""
    return table.v_s - table.v_ns


@dataclass(frozen=True)
class ThresholdResult:
    """Shape of the optimal policy at one subsidy level."""

    eta2: float
    beta: float
    regime: str                      # AlwaysSample / NeverSample / Threshold / ApproxThreshold
    pi_t: float                      # operative threshold (first crossing)
    crossings: tuple                 # refined advantage zero crossings, ascending
    pi_circ: float | None            # myopic threshold, defined for eta2 in [rho0, rho1]
    hole: tuple | None               # interval around pi_circ holding the extra crossings
    no_sample_mask: np.ndarray       # nodes where not sampling is strictly better


def _interp_adv(nodes, v_s, v_ns, x):
    return np.interp(x, nodes, v_s) - np.interp(x, nodes, v_ns)


def _refine_crossing(nodes, v_s, v_ns, lo, hi, lo_is_sample):
    """Bisect the interpolated advantage down to PI_REFINE_TOL."""
    while hi - lo > PI_REFINE_TOL:
        mid = 0.5 * (lo + hi)
        mid_is_sample = _interp_adv(nodes, v_s, v_ns, mid) >= 0.0
        if mid_is_sample == lo_is_sample:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _find_crossings(nodes, v_s, v_ns):
    adv = v_s - v_ns
    sample = adv >= 0.0
    flips = np.nonzero(sample[:-1] != sample[1:])[0]
    return [
        _refine_crossing(nodes, v_s, v_ns, nodes[i], nodes[i + 1], sample[i])
        for i in flips
    ]


def _classify(params: ArmParams, eta2, beta, nodes, v_s, v_ns) -> ThresholdResult:
    adv = v_s - v_ns
    crossings = _find_crossings(nodes, v_s, v_ns)
    pi_circ = None
    hole = None
    if eta2 < params.rho0:
        regime, pi_t = "AlwaysSample", 1.0
    elif eta2 > params.rho1:
        regime, pi_t = "NeverSample", 0.0
    else:
        pi_circ = (params.rho1 - eta2) / (params.rho1 - params.rho0)
        if not crossings:
            # the advantage never changes sign: degenerate threshold at a boundary
            pi_t = 1.0 if bool(np.all(adv >= 0.0)) else 0.0
            crossings = [pi_t]
            regime = "Threshold"
        elif len(crossings) == 1:
            regime, pi_t = "Threshold", crossings[0]
        else:
            regime, pi_t = "ApproxThreshold", crossings[0]
            radius = max(abs(c - pi_circ) for c in crossings[1:])
            hole = (max(0.0, pi_circ - radius), min(1.0, pi_circ + radius))
    return ThresholdResult(
        eta2=float(eta2), beta=float(beta), regime=regime, pi_t=float(pi_t),
        crossings=tuple(float(c) for c in crossings), pi_circ=pi_circ,
        hole=hole, no_sample_mask=adv < 0.0,
    )


def threshold(params: ArmParams, eta2: float, beta: float, grid=None,
              tol: float = DEFAULT_TOL) -> ThresholdResult:
    """Solve at one subsidy and classify the resulting policy."""
    table = solve(params, eta2, beta, grid=grid, tol=tol)
    return _classify(params, eta2, beta, table.grid.nodes, table.v_s, table.v_ns)


def threshold_curve(params: ArmParams, eta2_values, beta: float, grid=None,
                    tol: float = DEFAULT_TOL) -> list:
    """Threshold classification for a whole subsidy sweep (one batched solve)."""
    grid = _as_grid(grid)
    eta2_values = np.asarray(eta2_values, dtype=float)
    _, v_s, v_ns, _, _ = _solve_batch(params, eta2_values, beta, grid, tol)
    return [
        _classify(params, e, beta, grid.nodes, v_s[k], v_ns[k])
        for k, e in enumerate(eta2_values)
    ]


def write_threshold_curve_csv(results, path) -> None:
    """Columns eta2, value, regime for a sweep of ThresholdResult rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("eta2,value,regime\n")
        for r in results:
            fh.write(f"{r.eta2:.17g},{r.pi_t:.17g},{r.regime}\n")


@dataclass(frozen=True)
class IndexabilityReport:
    """Outcome of the set-inclusion indexability test over a subsidy sweep."""

    eta2_values: np.ndarray
    thresholds: np.ndarray
    regimes: tuple
    holes: tuple
    indexable: bool                  # no-sample sets nested without exception
    epsilon_indexable: bool          # every violating node sits inside a hole
    violations: tuple                # (eta2_lo, eta2_hi, offending node beliefs)
    pi_t_direction: str              # constant / non-increasing / non-decreasing / mixed


def indexability_check(params: ArmParams, eta2_values, beta: float, grid=None,
                       tol: float = DEFAULT_TOL) -> IndexabilityReport:
    """Check that the no-sample set grows with the subsidy (set inclusion).

    Violations are nodes that leave the no-sample set as eta2 increases.
    When policies are only approximately threshold, violations confined to
    the reported holes still count as (epsilon-) indexable.
    """
    grid = _as_grid(grid)
    eta2_values = np.sort(np.asarray(eta2_values, dtype=float))
    results = threshold_curve(params, eta2_values, beta, grid=grid, tol=tol)
    nodes = grid.nodes
    violations = []
    all_in_holes = True
    for low, high in zip(results[:-1], results[1:]):
        escaped = low.no_sample_mask & ~high.no_sample_mask
        if not escaped.any():
            continue
        offenders = nodes[escaped]
        violations.append((low.eta2, high.eta2, tuple(float(x) for x in offenders)))
        holes = [h for h in (low.hole, high.hole) if h is not None]
        for x in offenders:
            if not any(h[0] <= x <= h[1] for h in holes):
                all_in_holes = False
    thresholds = np.array([r.pi_t for r in results])
    diffs = np.diff(thresholds)
    if np.all(np.abs(diffs) <= _DIRECTION_SLACK):
        direction = "constant"
    elif np.all(diffs <= _DIRECTION_SLACK):
        direction = "non-increasing"
    elif np.all(diffs >= -_DIRECTION_SLACK):
        direction = "non-decreasing"
    else:
        direction = "mixed"
    return IndexabilityReport(
        eta2_values=eta2_values,
        thresholds=thresholds,
        regimes=tuple(r.regime for r in results),
        holes=tuple(r.hole for r in results),
        indexable=not violations,
        epsilon_indexable=all_in_holes,
        violations=tuple(violations),
        pi_t_direction=direction,
    )


def _default_bracket(params: ArmParams):
    return params.rho0 - 1.0, params.rho1 + 1.0


def _scan_values(lo, hi, step):
    count = int(np.ceil((hi - lo) / step)) + 1
    return np.linspace(lo, hi, max(count, 2))


def whittle_numeric(params: ArmParams, pi: float, beta: float, grid=None,
                    tol: float = DEFAULT_TOL, index_tol: float = INDEX_TOL,
                    bracket=None) -> float:
    """Index at one belief: scan the subsidy upward, then bisect.

    Returns the smallest eta2 (to within index_tol) at which not sampling
    is optimal at pi.  The bracket widens once by BRACKET_EXPAND on each
    side before giving up.
    """
    grid = _as_grid(grid)
    lo, hi = bracket if bracket is not None else _default_bracket(params)
    for expanded in (False, True):
        etas = _scan_values(lo, hi, ETA2_SCAN_STEP)
        _, v_s, v_ns, _, _ = _solve_batch(params, etas, beta, grid, tol)
        gap = np.array([
            np.interp(pi, grid.nodes, v_ns[k]) - np.interp(pi, grid.nodes, v_s[k])
            for k in range(etas.size)
        ])
        passive = np.nonzero(gap >= 0.0)[0]
        if passive.size and passive[0] > 0:
            k = passive[0]
            b_lo, b_hi = etas[k - 1], etas[k]
            break
        if expanded:
            raise NoCrossingInBracket(
                f"no index root for pi={pi} in [{lo}, {hi}] after widening"
            )
        lo, hi = lo - BRACKET_EXPAND, hi + BRACKET_EXPAND
    while b_hi - b_lo > index_tol:
        mid = 0.5 * (b_lo + b_hi)
        t = solve(params, mid, beta, grid=grid, tol=tol)
        if t.eval(pi, "v_ns") - t.eval(pi, "v_s") >= 0.0:
            b_hi = mid
        else:
            b_lo = mid
    return 0.5 * (b_lo + b_hi)


def whittle_closed_form(params: ArmParams, pi: float, beta: float):
    """Closed-form index where the sticky-chain case analysis provides one.

    Returns (value, region) or None when the belief falls in a region that
    is only handled numerically.  Raises UnsupportedOrdering when the
    parameters violate the case analysis' standing assumptions, and
    NonTerminatingTau when the re-crossing time of the gamma1 orbit never
    materializes.
    """
    region = classify_region(params, beta, pi).label
    if region in ("A1", "A2a"):
        return float(rho(params, pi)), region
    if region == "A2b":
        return _a2b_value(params, pi, beta), region
    if region == "A2c":
        return float(_a2c_series(params, pi, beta)), region
    if region in ("A2d", "A3"):
        return None
    m = (params.rho0 - params.rho1) / (1.0 - beta * (params.mu0 - params.mu1))
    if region == "A4":
        return float(rho(params, pi) + beta * gamma2(params, pi) * (m - 1.0)), region
    # A5
    c = (params.rho1 + beta * params.mu1 * m) / (1.0 - beta)
    w = (m * pi * (1.0 - beta * (params.lambda0 - params.lambda1))
         + (1.0 - beta) * c - beta * params.lambda1 * m)
    return float(w), region


def _a2b_value(params: ArmParams, pi: float, beta: float) -> float:
    """Two-step re-crossing index: the tau1 = 2 geometric series in closed form."""
    r = rho(params, pi)
    r1 = rho(params, gamma1(params, pi))
    num = (1.0 - beta) * (r + beta * r * r1)
    den = 1.0 - beta * (1.0 - r * (1.0 - beta))
    return float(num / den)


def _a2c_series(params: ArmParams, pi: float, beta: float) -> float:
    """Geometric-series index for beliefs whose gamma1 orbit dips below pi.

    tau1 is the first time the orbit climbs back to pi; the sums C1..C4
    collect the sample-path rewards and continuation weights up to tau1.
    """
    rs = [rho(params, pi)]
    x = pi
    tau1 = None
    for k in range(1, TAU_BUDGET + 1):
        x = gamma1(params, x)
        if x >= pi:
            tau1 = k
            break
        rs.append(rho(params, x))
    if tau1 is None:
        raise NonTerminatingTau(
            f"gamma1 orbit from pi={pi} never returned above pi "
            f"within {TAU_BUDGET} steps"
        )
    rs = np.array(rs[:tau1])
    prods = np.cumprod(rs)                      # prods[l] = prod_{j<=l} rho(gamma1^(j))
    powers = beta ** np.arange(tau1)
    c1 = float(np.sum(powers * prods))
    c2 = beta ** tau1 * float(prods[-1])
    c3 = 0.0
    if tau1 > 1:
        # prefix[l] = prod_{j=1..l} rho(gamma1^(j-1)) = prods[l-1]
        ls = np.arange(1, tau1)
        c3 = float(np.sum(beta ** (ls + 1) * prods[ls - 1] * (1.0 - rs[ls])))
    c4 = beta * (1.0 - rs[0])
    return (1.0 - beta) * c1 / (1.0 - (c2 + c3 + c4))


@dataclass(frozen=True)
class WhittleTable:
    """Per-belief index values with the method that produced each entry."""

    pis: np.ndarray
    values: np.ndarray
    methods: tuple
    params: ArmParams
    beta: float
    index_tol: float
    discrepancies: tuple = field(default_factory=tuple)

    def lookup(self, pi):
        """Linear interpolation of the index (clamped at the table's ends)."""
        out = np.interp(np.asarray(pi, dtype=float), self.pis, self.values)
        return float(out) if out.ndim == 0 else out

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("pi,value,method\n")
            for p, w, m in zip(self.pis, self.values, self.methods):
                fh.write(f"{p:.17g},{w:.17g},{m}\n")


def _nodal_gap(params, etas, beta, grid, tol, node_idx):
    """|v_s - v_ns| at each row's own node after re-solving at eta row-wise."""
    _, v_s, v_ns, _, _ = _solve_batch(params, etas, beta, grid, tol)
    rows = np.arange(etas.size)
    return np.abs(v_s[rows, node_idx] - v_ns[rows, node_idx])


def _bisect_nodes(params, beta, grid, tol, index_tol, node_idx, lo, hi):
    """Lockstep subsidy bisection for many grid nodes at once."""
    lo = lo.copy()
    hi = hi.copy()
    rows = np.arange(node_idx.size)
    while np.max(hi - lo) > index_tol:
        mid = 0.5 * (lo + hi)
        _, v_s, v_ns, _, _ = _solve_batch(params, mid, beta, grid, tol)
        passive = v_ns[rows, node_idx] - v_s[rows, node_idx] >= 0.0
        hi = np.where(passive, mid, hi)
        lo = np.where(passive, lo, mid)
    return 0.5 * (lo + hi)


def _scan_brackets(params, beta, grid, tol, node_idx, bracket):
    """Bracket the index root of every node from one ascending subsidy scan."""
    lo, hi = bracket
    for expanded in (False, True):
        etas = _scan_values(lo, hi, ETA2_SCAN_STEP)
        _, v_s, v_ns, _, _ = _solve_batch(params, etas, beta, grid, tol)
        passive = (v_ns - v_s)[:, node_idx] >= 0.0          # (B, nodes)
        first = np.argmax(passive, axis=0)
        ok = passive.any(axis=0) & (first > 0)
        if ok.all():
            return etas[first - 1], etas[first]
        if expanded:
            bad = grid.nodes[node_idx[~ok]]
            raise NoCrossingInBracket(
                f"no index root in [{lo}, {hi}] for beliefs {bad[:5]}..."
            )
        lo, hi = lo - BRACKET_EXPAND, hi + BRACKET_EXPAND
    raise AssertionError("unreachable")


def whittle_table(params: ArmParams, beta: float, grid=None,
                  tol: float = DEFAULT_TOL, index_tol: float = INDEX_TOL,
                  bracket=None, method: str = "auto") -> WhittleTable:
    """Index at every grid node.

    method="auto" tries the closed forms first and verifies each candidate
    by re-solving at that subsidy; entries whose verification gap exceeds
    index_tol are recorded in .discrepancies and recomputed by bisection.
    method="scan" instead sweeps the subsidy once and inverts the threshold
    curve, yielding exact (pi_t, eta2) pairs on the index curve.
    """
    grid = _as_grid(grid)
    if bracket is None:
        bracket = _default_bracket(params)
    if method == "scan":
        return _table_by_scan(params, beta, grid, tol, index_tol, bracket)
    if method != "auto":
        raise ValueError(f"method={method!r}; expected 'auto' or 'scan'")
    nodes = grid.nodes
    n = nodes.size
    values = np.full(n, np.nan)
    methods = [""] * n
    closed = np.full(n, np.nan)
    regions = [None] * n
    for i, p in enumerate(nodes):
        try:
            out = whittle_closed_form(params, float(p), beta)
        except (UnsupportedOrdering, NonTerminatingTau):
            out = None
        if out is not None:
            closed[i], regions[i] = out
    discrepancies = []
    have_cf = np.nonzero(~np.isnan(closed))[0]
    if have_cf.size:
        gaps = _nodal_gap(params, closed[have_cf], beta, grid, tol, have_cf)
        for j, i in enumerate(have_cf):
            if gaps[j] <= index_tol:
                values[i] = closed[i]
                methods[i] = f"ClosedForm({regions[i]})"
            else:
                discrepancies.append(
                    (float(nodes[i]), regions[i], float(closed[i]), float(gaps[j]))
                )
    numeric = np.nonzero(np.isnan(values))[0]
    if numeric.size:
        b_lo, b_hi = _scan_brackets(params, beta, grid, tol, numeric, bracket)
        values[numeric] = _bisect_nodes(
            params, beta, grid, tol, index_tol, numeric, b_lo, b_hi
        )
        for i in numeric:
            methods[i] = "Bisection"
    return WhittleTable(
        pis=nodes.copy(), values=values, methods=tuple(methods), params=params,
        beta=beta, index_tol=index_tol, discrepancies=tuple(discrepancies),
    )


def _table_by_scan(params, beta, grid, tol, index_tol, bracket) -> WhittleTable:
    lo, hi = bracket
    etas = _scan_values(lo, hi, ETA2_SCAN_STEP)
    _, v_s, v_ns, _, _ = _solve_batch(params, etas, beta, grid, tol)
    adv = v_s - v_ns
    nodes = grid.nodes
    entries = {}
    for k in range(etas.size):
        row = adv[k]
        sample = row >= 0.0
        for i in np.nonzero(sample[:-1] != sample[1:])[0]:
            # linear root of the piecewise-linear advantage: exact indifference
            frac = row[i] / (row[i] - row[i + 1])
            c = float(nodes[i] + frac * (nodes[i + 1] - nodes[i]))
            if c not in entries or etas[k] > entries[c]:
                entries[c] = float(etas[k])
    if not entries:
        raise NoCrossingInBracket(
            f"threshold inversion found no indifference points in [{lo}, {hi}]"
        )
    pis = np.array(sorted(entries))
    values = np.array([entries[p] for p in pis])
    return WhittleTable(
        pis=pis, values=values,
        methods=("ValueIterationScan",) * pis.size,
        params=params, beta=beta, index_tol=index_tol,
    )
