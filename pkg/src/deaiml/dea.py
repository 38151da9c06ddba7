"""Output-oriented radial DEA with smoothed-bootstrap bias correction.

Scores are computed on the Farrell scale (``theta >= 1``, the feasible
proportional output expansion) and reported inverted (``te = 1/theta``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linprog
from .errors import NumericError
from .rng import stream
from .tabular import DmuPanel, FrontierSpec

log = logging.getLogger(__name__)

EFFICIENT_TOL = 1e-6
_PRICE_TOL = 1e-9


@dataclass
class EfficiencyEstimate:
    dmu_id: str
    te_farrell: float
    te: float
    tebc: float = math.nan
    bias: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    reference_weights: dict[str, float] = field(default_factory=dict)

    @property
    def efficient(self) -> bool:
        return abs(self.te_farrell - 1.0) < EFFICIENT_TOL


@dataclass
class BootstrapDiagnostics:
    reps: int
    performance: np.ndarray  # per DMU, 3 * bias^2 / variance (Farrell scale)
    bandwidth: float
    level: float = 0.95
    ci_method: str = "basic"
    skipped: bool = False

    @property
    def mean_performance(self) -> float:
        finite = self.performance[np.isfinite(self.performance)]
        return float(finite.mean()) if finite.size else math.inf


@dataclass
class RtsTestResult:
    statistic: float
    bootstrap_reps: int
    p_value: float
    level: float = 0.05
    bootstrap_statistics: np.ndarray | None = None

    @property
    def reject_crs(self) -> bool:
        return self.p_value < self.level


# --- envelopment kernel -------------------------------------------------------

def undominated(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Indices of reference points not weakly dominated by another point.

    Of several identical points only the first is kept. Dropping dominated
    points leaves both the convex (VRS) and conical (CRS) envelopment sets
    unchanged.
    """
    n = X.shape[0]
    keep = np.ones(n, dtype=bool)
    chunk = max(1, 4_000_000 // max(1, n * (X.shape[1] + Y.shape[1])))
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        # dom[k, j]: point k weakly dominates point j (j in the chunk)
        dom = (X[:, None, :] <= X[None, sl, :]).all(-1) & (Y[:, None, :] >= Y[None, sl, :]).all(-1)
        same = (X[:, None, :] == X[None, sl, :]).all(-1) & (Y[:, None, :] == Y[None, sl, :]).all(-1)
        idx = np.arange(sl.start, sl.stop)
        strict = dom & ~same
        earlier_twin = same & (np.arange(n)[:, None] < idx[None, :])
        keep[sl] = ~(strict | earlier_twin).any(axis=0)
    return np.flatnonzero(keep)


def envelopment(Xe: np.ndarray, Ye: np.ndarray, Xr: np.ndarray, Yr: np.ndarray,
                rts: str = "VRS") -> tuple[np.ndarray, np.ndarray]:
    """Farrell output scores of points ``(Xe, Ye)`` against the reference set ``(Xr, Yr)``.

    For each evaluated point solves ``max theta`` s.t. ``Yr' z >= theta * y``,
    ``Xr' z <= x``, ``z >= 0`` (plus ``sum z = 1`` under VRS). Returns
    ``(theta, Z)`` with ``Z[i]`` the weights over reference points; ``theta``
    is nan where the VRS program is infeasible.

    Dominated reference points are dropped first. Each program then starts
    from a single column and takes in the reference points that price out
    against its current duals until none does, which gives the optimum over
    the full reference set.
    """
    Xe, Ye = np.atleast_2d(Xe).astype(float), np.atleast_2d(Ye).astype(float)
    Xr, Yr = np.atleast_2d(Xr).astype(float), np.atleast_2d(Yr).astype(float)
    vrs = rts.upper() == "VRS"
    ne, m = Xe.shape
    s = Ye.shape[1]
    nr = Xr.shape[0]
    theta = np.full(ne, np.nan)
    Z = np.zeros((ne, nr))
    if ne == 0:
        return theta, Z

    cand = undominated(Xr, Yr)
    Xc, Yc = Xr[cand], Yr[cand]
    Ac = np.vstack([Yc.T, Xc.T] + ([np.ones((1, cand.size))] if vrs else []))
    k = Ac.shape[0]
    relations = [linprog.GE] * s + [linprog.LE] * m + ([linprog.EQ] if vrs else [])

    # each program starts from its own free-disposal reference, which keeps it
    # feasible under VRS, and grows its own column set from dual prices
    covers = (Xc[None, :, :] <= Xe[:, None, :]).all(-1)
    ratio = np.where(covers, (Yc[None, :, :] / Ye[:, None, :]).min(-1), -np.inf)
    has_ref = covers.any(axis=1)
    P = ratio.argmax(axis=1)[:, None]
    pending = np.arange(ne)
    if vrs and not has_ref.all():
        # only a mixture can cover these inputs, if anything can: solve over every candidate
        hard = np.flatnonzero(~has_ref)
        full = np.broadcast_to(np.arange(cand.size), (hard.size, cand.size))
        sol = _solve_restricted(Xe[hard], Ye[hard], Ac, full, s, m, vrs, relations)
        feas = sol.status == "optimal"
        _check(sol, hard, feas | (sol.status == "infeasible"))
        theta[hard[feas]] = sol.objective_value[feas]
        Z[np.ix_(hard[feas], cand)] = sol.primal[feas, 1:]
        pending = np.flatnonzero(has_ref)
        P = P[has_ref]

    if pending.size:
        theta[pending], Z[pending] = _generate_columns(Xe[pending], Ye[pending], Ac, P[:, 0], cand,
                                                      nr, s, m, vrs, relations)
    return theta, Z


def _generate_columns(Xe, Ye, Ac, first, cand, nr, s, m, vrs, relations):
    """Solve each program over a growing private column set, warm-starting every round."""
    B = Xe.shape[0]
    k = Ac.shape[0]
    A = np.zeros((B, k, 2))
    A[:, :s, 0] = -Ye
    A[:, :, 1] = Ac[:, first].T
    rhs = np.zeros((B, k))
    rhs[:, s:s + m] = Xe
    if vrs:
        rhs[:, -1] = 1.0
    lp = linprog.WarmBatch(np.array([1.0, 0.0]), A, relations, rhs)
    base_cols = lp.n_columns  # columns beyond the structural pair are slacks/artificials
    P = first[:, None]
    pending = np.arange(B)
    for _ in range(Ac.shape[1] + 1):
        _check_status(lp.status[pending], pending)
        y = lp.duals[pending]
        red = (y @ Ac) / (1.0 + np.abs(y) @ np.abs(Ac))
        rows = np.arange(pending.size)[:, None]
        red[rows, np.where(P[pending] >= 0, P[pending], 0)] = np.where(P[pending] >= 0, np.inf,
                                                                       red[rows, 0])
        violated = red < -_PRICE_TOL
        again = violated.any(axis=1)
        if not again.any():
            break
        pending, red, violated = pending[again], red[again], violated[again]
        t = min(k, red.shape[1])
        best = np.argpartition(red, t - 1, axis=1)[:, :t]
        best = np.take_along_axis(best, np.argsort(np.take_along_axis(red, best, 1), axis=1), 1)
        ok = np.take_along_axis(violated, best, 1)
        lp.add_columns(pending, np.where(ok[:, None, :], Ac[:, best].transpose(1, 0, 2), 0.0))
        added = np.full((B, t), -1)
        added[pending] = np.where(ok, best, -1)
        P = np.concatenate([P, added], axis=1)
    else:
        raise NumericError("column generation failed to converge")
    _check_status(lp.status, np.arange(B))
    x = lp.primal()
    theta = lp.objective_value
    Z = np.zeros((B, nr))
    cols = np.concatenate([[1], np.arange(base_cols, lp.n_columns)])
    weights = x[:, cols]
    rows, j = np.nonzero(P >= 0)
    np.add.at(Z, (rows, cand[P[rows, j]]), weights[rows, j])
    return theta, Z


def _check_status(status, which):
    ok = status == "optimal"
    if not ok.all():
        raise NumericError(f"envelopment program failed for point(s) {which[~ok].tolist()[:5]}: "
                           f"{sorted(set(status[~ok]))}")


def _solve_restricted(Xe, Ye, Ac, P, s, m, vrs, relations):
    """Batch of envelopment programs, program ``b`` restricted to columns ``P[b]`` (-1 = unused)."""
    B, w = P.shape
    k = Ac.shape[0]
    A = np.zeros((B, k, 1 + w))
    A[:, :s, 0] = -Ye
    A[:, :, 1:] = np.where(P[:, None, :] >= 0, Ac[:, np.where(P >= 0, P, 0)].transpose(1, 0, 2), 0.0)
    rhs = np.zeros((B, k))
    rhs[:, s:s + m] = Xe
    if vrs:
        rhs[:, -1] = 1.0
    c = np.zeros(1 + w)
    c[0] = 1.0
    return linprog.solve_batch("maximize", c, A, relations, rhs)


def _check(sol, which, ok):
    if not ok.all():
        raise NumericError(f"envelopment program failed for point(s) {which[~ok].tolist()[:5]}: "
                           f"{sorted(set(sol.status[~ok]))}")


def envelopment_program(X: np.ndarray, Y: np.ndarray, o: int, rts: str = "VRS") -> linprog.LinearProgram:
    """The full envelopment program of row ``o`` as an explicit LP (variables ``theta, z_1..z_n``).

    Not used by the solver path; meant for exporting and cross-checking.
    """
    X, Y = np.atleast_2d(X).astype(float), np.atleast_2d(Y).astype(float)
    n = X.shape[0]
    rows = [(np.concatenate([[-Y[o, r]], Y[:, r]]), linprog.GE, 0.0) for r in range(Y.shape[1])]
    rows += [(np.concatenate([[0.0], X[:, i]]), linprog.LE, X[o, i]) for i in range(X.shape[1])]
    if rts.upper() == "VRS":
        rows.append((np.concatenate([[0.0], np.ones(n)]), linprog.EQ, 1.0))
    c = np.zeros(n + 1)
    c[0] = 1.0
    return linprog.LinearProgram.from_rows("maximize", c, rows)


def _scores(X, Y, rts) -> tuple[np.ndarray, np.ndarray]:
    theta, Z = envelopment(X, Y, X, Y, rts)
    if np.isnan(theta).any():
        raise NumericError("in-sample envelopment program infeasible")
    # in-sample theta >= 1 holds exactly (z = unit vector is feasible); clip roundoff
    return np.maximum(theta, 1.0), Z


# --- public operations ----------------------------------------------------------

def radial_scores(panel: DmuPanel, spec: FrontierSpec) -> list[EfficiencyEstimate]:
    """Farrell output-oriented scores of every DMU against its own panel."""
    X, Y = spec.matrices(panel)
    if panel.n < X.shape[1] + Y.shape[1]:
        log.warning("only %d DMUs for %d inputs + %d outputs; scores will be weakly discriminating",
                    panel.n, X.shape[1], Y.shape[1])
    theta, Z = _scores(X, Y, spec.rts)
    ids = panel.ids
    out = []
    for i in range(panel.n):
        nz = np.flatnonzero(Z[i] > 1e-12)
        out.append(EfficiencyEstimate(ids[i], float(theta[i]), float(1.0 / theta[i]),
                                      reference_weights={ids[j]: float(Z[i, j]) for j in nz}))
    return out


def silverman_bandwidth(sample: np.ndarray) -> float:
    """0.9 * min(sd, IQR/1.349) * N^(-1/5); falls back to sd when the IQR is zero."""
    sample = np.asarray(sample, dtype=float)
    sd = float(sample.std(ddof=1)) if sample.size > 1 else 0.0
    q1, q3 = np.percentile(sample, [25, 75])
    iqr = q3 - q1
    # a mass of ties (e.g. many fully efficient units) can leave only roundoff in the IQR
    spread = sd if iqr <= 1e-12 * max(1.0, abs(q3)) else min(sd, iqr / 1.349)
    return 0.9 * spread * sample.size ** (-0.2)


def smoothed_draw(theta_hat: np.ndarray, h: float, rng: np.random.Generator) -> np.ndarray:
    """One smoothed-bootstrap draw of Farrell scores (reflection about 1, Gaussian kernel)."""
    n = theta_hat.size
    reflected = np.concatenate([theta_hat, 2.0 - theta_hat])
    beta = reflected[rng.integers(0, 2 * n, size=n)]
    eps = rng.standard_normal(n)
    var = reflected.var(ddof=1)
    if h <= 0 or var <= 0:
        draw = beta
    else:
        bbar = beta.mean()
        draw = bbar + (beta + h * eps - bbar) / math.sqrt(1.0 + h * h / var)
    return np.where(draw < 1.0, 2.0 - draw, draw)


def _bootstrap_reps(args):
    X, Y, theta_hat, h, rts, seed, reps = args
    out = np.empty((len(reps), theta_hat.size))
    for row, b in enumerate(reps):
        star = smoothed_draw(theta_hat, h, stream(seed, "dea-bootstrap", b))
        Yref = Y * (theta_hat / star)[:, None]
        th, _ = envelopment(X, Y, X, Yref, rts)
        out[row] = th
    return out


def _run_reps(worker, payload, reps: int, jobs: int) -> np.ndarray:
    """Evaluate replicate indices ``0..reps-1`` in order, optionally across processes."""
    if jobs <= 1 or reps < 2:
        return worker((*payload, range(reps)))
    jobs = min(jobs, reps)
    bounds = np.linspace(0, reps, jobs + 1).astype(int)
    chunks = [range(bounds[i], bounds[i + 1]) for i in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(worker, [(*payload, c) for c in chunks]))
    return np.vstack(parts)


def bootstrap_performance(bias, variance) -> np.ndarray:
    """``3 * bias^2 / variance`` elementwise; zero variance maps to +inf (0 if bias is 0)."""
    bias = np.asarray(bias, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("variance must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 3.0 * bias ** 2 / variance
    out = np.where(variance == 0, np.where(bias == 0, 0.0, np.inf), out)
    return out


def smoothed_bootstrap(panel: DmuPanel, spec: FrontierSpec, reps: int = 2000, level: float = 0.95,
                       seed: int = 0, bandwidth: float | None = None, ci_method: str = "basic",
                       jobs: int = 1, return_draws: bool = False):
    """Homogeneous smoothed bootstrap for bias-corrected scores and confidence intervals.

    Returns ``(estimates, diagnostics)`` (plus the ``reps x n`` matrix of
    bootstrap Farrell scores when ``return_draws``). Each original DMU is
    re-evaluated against every pseudo-sample, whose outputs are
    ``y_i * theta_i / theta_i*``.
    """
    if reps < 100:
        raise ValueError("the bootstrap needs at least 100 replications")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if ci_method not in ("basic", "percentile"):
        raise ValueError("ci_method must be 'basic' or 'percentile'")
    est = radial_scores(panel, spec)
    X, Y = spec.matrices(panel)
    theta_hat = np.array([e.te_farrell for e in est])
    reflected = np.concatenate([theta_hat, 2.0 - theta_hat])
    h = silverman_bandwidth(reflected) if bandwidth is None else float(bandwidth)

    if np.ptp(theta_hat) == 0 or h <= 0:
        log.warning("degenerate score sample (all Farrell scores equal); bootstrap skipped")
        for e in est:
            e.tebc, e.bias, e.ci_low, e.ci_high = e.te, 0.0, e.te, e.te
        diag = BootstrapDiagnostics(reps, np.zeros(panel.n), 0.0, level, ci_method, skipped=True)
        draws = np.tile(theta_hat, (reps, 1))
        return (est, diag, draws) if return_draws else (est, diag)

    draws = _run_reps(_bootstrap_reps, (X, Y, theta_hat, h, spec.rts, seed), reps, jobs)
    if np.isnan(draws).any():
        raise NumericError("bootstrap envelopment program infeasible")
    mean_star = draws.mean(axis=0)
    bias_f = mean_star - theta_hat
    var_f = draws.var(axis=0, ddof=1)
    theta_bc = theta_hat - bias_f
    alpha = 1.0 - level
    if ci_method == "basic":
        delta = draws - theta_hat
        lo_q, hi_q = np.quantile(delta, [alpha / 2, 1 - alpha / 2], axis=0)
        theta_lo, theta_hi = theta_hat - hi_q, theta_hat - lo_q
    else:
        theta_lo, theta_hi = np.quantile(draws, [alpha / 2, 1 - alpha / 2], axis=0)
    for i, e in enumerate(est):
        e.tebc = float(1.0 / theta_bc[i])
        e.bias = e.te - e.tebc
        e.ci_low = float(1.0 / theta_hi[i])
        e.ci_high = float(1.0 / theta_lo[i])
    diag = BootstrapDiagnostics(reps, bootstrap_performance(bias_f, var_f), h, level, ci_method)
    return (est, diag, draws) if return_draws else (est, diag)


def _rts_reps(args):
    X, Y, theta_crs, h, seed, reps = args
    out = np.empty(len(reps))
    for row, b in enumerate(reps):
        star = smoothed_draw(theta_crs, h, stream(seed, "rts-test", b))
        Ys = Y * (theta_crs / star)[:, None]
        crs, _ = _scores(X, Ys, "CRS")
        vrs, _ = _scores(X, Ys, "VRS")
        out[row] = np.mean(crs / vrs)
    return out


def rts_test(panel: DmuPanel, reps: int = 500, seed: int = 0, spec: FrontierSpec | None = None,
             level: float = 0.05, jobs: int = 1) -> RtsTestResult:
    """Bootstrap test of H0: the technology is CRS, against VRS.

    Statistic ``S = mean(theta_crs / theta_vrs)``; pseudo-samples are drawn
    under the null from the CRS scores and ``p = share(S* >= S)``.
    """
    if reps < 100:
        raise ValueError("the RTS test needs at least 100 replications")
    spec = spec or FrontierSpec(tuple(range(panel.m)), tuple(range(panel.s)))
    X, Y = spec.matrices(panel)
    if panel.n < X.shape[1] + Y.shape[1] + 1:
        raise ValueError("rts_test needs n >= m + s + 1")
    crs, _ = _scores(X, Y, "CRS")
    vrs, _ = _scores(X, Y, "VRS")
    stat = float(np.mean(crs / vrs))
    reflected = np.concatenate([crs, 2.0 - crs])
    h = silverman_bandwidth(reflected)
    boot = _run_reps(_rts_reps, (X, Y, crs, h, seed), reps, jobs).ravel()
    p = float(np.mean(boot >= stat - 1e-12))
    return RtsTestResult(stat, reps, p, level, boot)


def estimates_table(estimates: list[EfficiencyEstimate], group: str | None = None) -> list[dict]:
    """One row per DMU: id, group, te, tebc, ci_low, ci_high (plus Farrell score and bias)."""
    return [{"id": e.dmu_id, "group": group, "te": e.te, "tebc": e.tebc, "ci_low": e.ci_low,
             "ci_high": e.ci_high, "te_farrell": e.te_farrell, "bias": e.bias} for e in estimates]
