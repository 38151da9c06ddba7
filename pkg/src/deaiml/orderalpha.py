"""Order-alpha partial frontiers and the super-efficiency outlier screen.

Scores are on the Farrell output scale: ``score < 1`` means the DMU lies
above the order-alpha frontier (super-efficient).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .tabular import DmuPanel, DmuRecord, FrontierSpec

log = logging.getLogger(__name__)

SUPER_TOL = 1e-9
DEFAULT_GRID = tuple(np.round(np.arange(100.0, 49.75, -0.5), 1))


def _matrices(panel: DmuPanel, spec: FrontierSpec | None):
    if spec is None:
        return panel.X, panel.Y
    return spec.matrices(panel)


def _position(dmu, panel: DmuPanel) -> int:
    if isinstance(dmu, DmuRecord):
        return panel.ids.index(dmu.id)
    if isinstance(dmu, str):
        return panel.ids.index(dmu)
    return int(dmu)


def ratio_sets(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted dominating-set ratios for every DMU.

    Row ``o`` of the first array holds ``min_r y_jr / y_or`` over the DMUs
    ``j`` that use no more of any input than ``o`` (``o`` included), sorted
    ascending and padded with ``inf``; the second array holds the set sizes.
    """
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    dom = (X[None, :, :] <= X[:, None, :]).all(-1)  # dom[o, j]: j in D(x_o)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = (Y[None, :, :] / Y[:, None, :]).min(-1)
    R = np.where(dom, R, np.inf)
    R.sort(axis=1)
    return R, dom.sum(axis=1)


def _quantile(R: np.ndarray, n_d: np.ndarray, alpha: float) -> np.ndarray:
    # alpha * n_D is exact for grid-like alphas, so ceil sees the true rank
    rank = np.ceil(alpha * n_d / 100.0).astype(int)
    rank = np.clip(rank, 1, n_d)
    return R[np.arange(R.shape[0]), rank - 1]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha <= 100:
        raise ValueError(f"alpha must lie in (0, 100], got {alpha}")
    return alpha


def fdh_output_score(dmu, panel: DmuPanel, spec: FrontierSpec | None = None) -> float:
    """FDH Farrell output score (>= 1) of one DMU; ``dmu`` is a record, id or row index."""
    return order_alpha_score(dmu, panel, 100.0, spec)


def order_alpha_score(dmu, panel: DmuPanel, alpha: float, spec: FrontierSpec | None = None) -> float:
    """Order-alpha output score: the ceiling-rank alpha-quantile of the dominating-set ratios."""
    alpha = _check_alpha(alpha)
    X, Y = _matrices(panel, spec)
    o = _position(dmu, panel)
    dom = (X <= X[o]).all(axis=1)
    U = np.sort((Y[dom] / Y[o]).min(axis=1))
    k = max(1, math.ceil(alpha * U.size / 100.0))
    return float(U[k - 1])


def order_alpha_scores(panel: DmuPanel, alpha: float, spec: FrontierSpec | None = None) -> np.ndarray:
    """Vectorized :func:`order_alpha_score` for every DMU of the panel."""
    alpha = _check_alpha(alpha)
    R, n_d = ratio_sets(*_matrices(panel, spec))
    return _quantile(R, n_d, alpha)


@dataclass
class AlphaCurve:
    alpha_grid: np.ndarray
    share: np.ndarray
    chosen_alpha: float
    jump_size: float
    super_efficient: list[str] = field(default_factory=list)  # ids flagged at chosen_alpha

    def to_records(self) -> list[dict]:
        return [{"alpha": float(a), "share": float(s)} for a, s in zip(self.alpha_grid, self.share)]


def super_share_curve(panel: DmuPanel, alpha_grid=DEFAULT_GRID, spec: FrontierSpec | None = None) -> AlphaCurve:
    """Share of strictly super-efficient DMUs along a descending alpha grid.

    ``chosen_alpha`` is the grid point at which the largest single-step rise
    in the share has taken place (the lower alpha of that step); ties go to
    the step at higher alpha. The DMUs flagged there are the outlier set.
    """
    grid = np.asarray(alpha_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 10:
        raise ValueError("alpha grid needs at least 10 points")
    if np.any(grid <= 0) or np.any(grid > 100):
        raise ValueError("alpha grid must lie in (0, 100]")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("alpha grid must be strictly descending")
    R, n_d = ratio_sets(*_matrices(panel, spec))
    flags = np.array([_quantile(R, n_d, a) < 1.0 - SUPER_TOL for a in grid])
    share = flags.mean(axis=1)
    steps = np.diff(share)
    if steps.size == 0 or steps.max() <= 0:
        log.warning("super-efficiency share is flat over the grid; nothing flagged")
        return AlphaCurve(grid, share, float(grid[0]), 0.0, [])
    k = int(np.argmax(steps))  # first maximum = highest alpha
    chosen = k + 1
    ids = panel.ids
    flagged = [ids[i] for i in np.flatnonzero(flags[chosen])]
    return AlphaCurve(grid, share, float(grid[chosen]), float(steps[k]), flagged)


@dataclass
class TrimRow:
    label: str
    full_mean: float
    trimmed_mean: float
    diff_pct: float
    delta_n: int


@dataclass
class TrimComparison:
    group: str | None
    chosen_alpha: float
    removed: list[str]
    rows: list[TrimRow]

    def to_records(self) -> list[dict]:
        return [{"group": self.group, "stratum": r.label, "diff_pct": r.diff_pct, "delta_n": r.delta_n,
                 "full_mean": r.full_mean, "trimmed_mean": r.trimmed_mean} for r in self.rows]


def trim_and_rerun(panel: DmuPanel, spec: FrontierSpec, chosen_alpha: float, reps: int = 500,
                   seed: int = 0, level: float = 0.95, jobs: int = 1, full_estimates=None,
                   group: str | None = None, whole_label: str = "Whole sample") -> TrimComparison:
    """Drop DMUs super-efficient at ``chosen_alpha`` and rerun the smoothed bootstrap.

    Reports, for the whole panel and each stratum, the percent change of the
    mean bias-corrected score and the (nonpositive) change in DMU count.
    ``full_estimates`` may carry the full-panel bootstrap to avoid recomputing it.
    """
    from . import dea

    scores = order_alpha_scores(panel, chosen_alpha, spec)
    drop = scores < 1.0 - SUPER_TOL
    keep = np.flatnonzero(~drop)
    m, s = len(spec.input_columns), len(spec.output_columns)
    if keep.size < m + s:
        raise DataError(f"trimming leaves {keep.size} DMUs, fewer than inputs + outputs ({m + s})")
    if full_estimates is None:
        full_estimates, _ = dea.smoothed_bootstrap(panel, spec, reps=reps, level=level, seed=seed, jobs=jobs)
    full = np.array([e.tebc for e in full_estimates])
    if drop.any():
        trimmed_est, _ = dea.smoothed_bootstrap(panel.subset(keep), spec, reps=reps, level=level,
                                                seed=seed, jobs=jobs)
        trimmed = np.full(panel.n, np.nan)
        trimmed[keep] = [e.tebc for e in trimmed_est]
    else:
        trimmed = full.copy()

    strata = np.array([st if st is not None else "" for st in panel.strata], dtype=object)
    labels = [(whole_label, np.ones(panel.n, dtype=bool))]
    for st in dict.fromkeys(strata):
        if st != "":
            labels.append((st, strata == st))
    rows = []
    for label, mask in labels:
        fm = float(full[mask].mean())
        kept = mask & ~drop
        tm = float(trimmed[kept].mean()) if kept.any() else math.nan
        diff = 0.0 if not (mask & drop).any() else (tm - fm) / fm * 100.0
        rows.append(TrimRow(label, fm, tm, diff, -int((mask & drop).sum())))
    ids = panel.ids
    return TrimComparison(group, float(chosen_alpha), [ids[i] for i in np.flatnonzero(drop)], rows)
