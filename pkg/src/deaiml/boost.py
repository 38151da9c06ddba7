"""Gradient-boosted trees for binary labels, plus the cross-validation harness.

Trees are grown by exact greedy search on second-order (Newton) statistics
of the logistic loss; missing feature values follow a learned default
direction. Also provides a penalized logistic regression baseline and the
ranking metrics used to compare models.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .rng import child_seed, stream

log = logging.getLogger(__name__)

GRID = {
    "n_estimators": (100, 500, 1000, 5000),
    "subsample": (0.5, 0.7, 0.9),
    "max_depth": (3, 5, 7, 9),
    "learning_rate": (0.001, 0.01, 0.1),
}


@dataclass(frozen=True)
class GbtConfig:
    n_estimators: int = 100
    subsample: float = 0.7
    max_depth: int = 5
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_cover: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 0 or self.max_depth < 1:
            raise ValueError("n_estimators must be >= 0 and max_depth >= 1")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")
        if self.learning_rate <= 0 or self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("learning_rate must be > 0; reg_lambda and gamma >= 0")
        if self.min_child_cover < 1:
            raise ValueError("min_child_cover must be >= 1")

    def off_grid(self) -> list[str]:
        """Hyperparameters set to values outside the standard search grid."""
        return [k for k, vals in GRID.items() if getattr(self, k) not in vals]

    def label(self) -> str:
        return f"{self.n_estimators}, {self.subsample}, {self.max_depth}, {self.learning_rate}"


def config_grid(**values) -> list[GbtConfig]:
    """Cartesian product of hyperparameter values (defaults: the full standard grid)."""
    axes = {k: tuple(values.pop(k, GRID[k])) for k in GRID}
    base = GbtConfig(**values)
    out = []
    for ne in axes["n_estimators"]:
        for ss in axes["subsample"]:
            for md in axes["max_depth"]:
                for lr in axes["learning_rate"]:
                    out.append(replace(base, n_estimators=ne, subsample=ss, max_depth=md, learning_rate=lr))
    return out


# --- trees --------------------------------------------------------------------------

@dataclass
class Tree:
    """Flat binary tree; node 0 is the root, ``left == -1`` marks a leaf.

    Internal nodes send ``x < threshold`` left and missing values to the
    default side. ``value`` holds leaf weights (before shrinkage).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    default_left: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            inner = self.left[node] >= 0
            if not inner.any():
                return node
            x = X[rows, np.where(inner, self.feature[node], 0)]
            go_left = np.where(np.isnan(x), self.default_left[node], x < self.threshold[node])
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_index(X)]

    def to_dict(self, node: int = 0) -> dict:
        if self.left[node] < 0:
            return {"leaf": float(self.value[node]), "cover": int(self.cover[node])}
        return {"feature": int(self.feature[node]), "threshold": float(self.threshold[node]),
                "default_left": bool(self.default_left[node]), "cover": int(self.cover[node]),
                "left": self.to_dict(int(self.left[node])), "right": self.to_dict(int(self.right[node]))}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        b = _TreeBuilder()

        def visit(nd):
            i = b.add(int(nd["cover"]))
            if "leaf" in nd:
                b.value[i] = float(nd["leaf"])
            else:
                l, r = visit(nd["left"]), visit(nd["right"])
                b.split(i, int(nd["feature"]), float(nd["threshold"]), bool(nd["default_left"]), l, r)
            return i

        visit(d)
        return b.build()


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.default_left, self.value, self.cover = [], [], []

    def add(self, cover: int) -> int:
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.default_left.append(True)
        self.value.append(0.0)
        self.cover.append(cover)
        return len(self.feature) - 1

    def split(self, i, feature, threshold, default_left, left, right):
        self.feature[i], self.threshold[i] = feature, threshold
        self.default_left[i], self.left[i], self.right[i] = default_left, left, right

    def build(self) -> Tree:
        return Tree(np.array(self.feature, dtype=int), np.array(self.threshold, dtype=float),
                    np.array(self.left, dtype=int), np.array(self.right, dtype=int),
                    np.array(self.default_left, dtype=bool), np.array(self.value, dtype=float),
                    np.array(self.cover, dtype=int))


@dataclass
class TreeEnsemble:
    trees: list[Tree]
    base_score: float
    learning_rate: float
    feature_count: int
    config: dict = field(default_factory=dict)
    train_loss: list[float] = field(default_factory=list)

    def margin(self, X) -> np.ndarray:
        X = _check_X(X, self.feature_count)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def to_json(self) -> str:
        return json.dumps({"format": "gbt-binary-logistic/1", "base_score": self.base_score,
                           "learning_rate": self.learning_rate, "feature_count": self.feature_count,
                           "config": self.config, "trees": [t.to_dict() for t in self.trees]}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        d = json.loads(text)
        return cls([Tree.from_dict(t) for t in d["trees"]], float(d["base_score"]),
                   float(d["learning_rate"]), int(d["feature_count"]), d.get("config", {}))


def _check_X(X, p=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if p is not None and X.shape[1] != p:
        raise ValueError(f"expected {p} features, got {X.shape[1]}")
    if np.isinf(X).any():
        raise ValueError("X must not contain infinities (use NaN for missing)")
    return X


def _check_y(y, n) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError("y must be a vector with one label per row")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    y = y.astype(float)
    if y.min() == y.max():
        raise ValueError("both classes must be present")
    return y


def leaf_weight(G: float, H: float, reg_lambda: float) -> float:
    return -G / (H + reg_lambda)


def split_gain(GL, HL, GR, HR, reg_lambda, gamma):
    """Loss reduction of a split: 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma."""
    G, H = GL + GR, HL + HR
    return 0.5 * (GL ** 2 / (HL + reg_lambda) + GR ** 2 / (HR + reg_lambda)
                  - G ** 2 / (H + reg_lambda)) - gamma


def _best_split(V, Gs, Hs, cfg: GbtConfig):
    """Best split of one node given per-feature sorted values/gradients (NaNs last).

    Returns ``(gain, feature, threshold, default_left)`` or ``None``.
    """
    n, p = V.shape
    if n < 2:
        return None
    present = ~np.isnan(V)
    k = present.sum(axis=0)
    G, H = Gs[:, 0].sum(), Hs[:, 0].sum()
    GL = np.cumsum(np.where(present, Gs, 0.0), axis=0)[:-1]
    HL = np.cumsum(np.where(present, Hs, 0.0), axis=0)[:-1]
    CL = np.arange(1, n)[:, None]
    last = np.maximum(k - 1, 0)
    Gm = G - np.cumsum(np.where(present, Gs, 0.0), axis=0)[last, np.arange(p)]
    Hm = H - np.cumsum(np.where(present, Hs, 0.0), axis=0)[last, np.arange(p)]
    Cm = n - k
    valid = V[:-1] < V[1:]  # False at ties and next to NaN
    if not valid.any():
        return None
    lam, gam, mc = cfg.reg_lambda, cfg.gamma, cfg.min_child_cover
    # missing values to the right
    g_r = split_gain(GL, HL, G - GL, H - HL, lam, gam)
    ok_r = valid & (CL >= mc) & (n - CL >= mc)
    # missing values to the left
    GLm, HLm = GL + Gm, HL + Hm
    g_l = split_gain(GLm, HLm, G - GLm, H - HLm, lam, gam)
    ok_l = valid & (CL + Cm >= mc) & (n - CL - Cm >= mc)
    g_r = np.where(ok_r, g_r, -np.inf)
    g_l = np.where(ok_l, g_l, -np.inf)
    left = g_l >= g_r
    gain = np.where(left, g_l, g_r)
    flat = gain.T.ravel()  # feature-major: ties go to the lowest feature, then lowest threshold
    j = int(np.argmax(flat))
    best = flat[j]
    if not best > 0:
        return None
    f, i = divmod(j, n - 1)
    lo, hi = V[i, f], V[i + 1, f]
    thr = 0.5 * (lo + hi)
    if not lo < thr <= hi:
        thr = hi
    return float(best), f, float(thr), bool(left[i, f])


def _grow_tree(Xs, g, h, cfg: GbtConfig) -> Tree:
    n, p = Xs.shape
    order = np.argsort(Xs, axis=0, kind="stable")  # NaN sorts last
    cols = np.arange(p)
    b = _TreeBuilder()
    root = b.add(n)
    stack = [(root, order, 0)]
    while stack:
        node, S, depth = stack.pop()
        rows = S[:, 0]
        G, H = g[rows].sum(), h[rows].sum()
        b.value[node] = leaf_weight(G, H, cfg.reg_lambda)
        if depth >= cfg.max_depth:
            continue
        V = Xs[S, cols]
        found = _best_split(V, g[S], h[S], cfg)
        if found is None:
            continue
        _, f, thr, dleft = found
        x = Xs[:, f]
        go_left = np.where(np.isnan(x), dleft, x < thr)
        L = go_left[S]
        n_left = int(L[:, 0].sum())
        SL = S.T[L.T].reshape(p, n_left).T
        SR = S.T[~L.T].reshape(p, S.shape[0] - n_left).T
        li, ri = b.add(n_left), b.add(S.shape[0] - n_left)
        b.split(node, f, thr, dleft, li, ri)
        stack.append((ri, SR, depth + 1))
        stack.append((li, SL, depth + 1))
    return b.build()


def logistic_loss(y, margin) -> float:
    """Mean negative log-likelihood of 0/1 labels under logit ``margin``."""
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def train_gbt(X, y, config: GbtConfig = GbtConfig(), keys: tuple = ()) -> TreeEnsemble:
    """Boosted trees on the logistic loss.

    Row subsampling for round ``r`` draws from ``stream(config.seed, *keys, r)``,
    so the fit is reproducible and independent of scheduling.
    """
    X = _check_X(X)
    if X.shape[0] == 0:
        raise ValueError("X is empty")
    y = _check_y(y, X.shape[0])
    off = config.off_grid()
    if off:
        log.info("GBT hyperparameters outside the standard grid: %s", ", ".join(off))
    n, p = X.shape
    prior = y.mean()
    base = math.log(prior / (1.0 - prior))
    margin = np.full(n, base)
    trees, losses = [], [logistic_loss(y, margin)]
    n_sub = max(1, int(round(config.subsample * n)))
    for r in range(config.n_estimators):
        prob = expit(margin)
        g, h = prob - y, prob * (1.0 - prob)
        if n_sub < n:
            rows = np.sort(stream(config.seed, "gbt", *keys, r).choice(n, size=n_sub, replace=False))
            tree = _grow_tree(X[rows], g[rows], h[rows], config)
        else:
            tree = _grow_tree(X, g, h, config)
        margin = margin + config.learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(logistic_loss(y, margin))
    return TreeEnsemble(trees, base, config.learning_rate, p, asdict(config), losses)


def predict_proba(model: TreeEnsemble, X) -> np.ndarray:
    return expit(model.margin(X))


# --- metrics ------------------------------------------------------------------------

def _binary(scores, y):
    scores = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(y).ravel()
    if scores.shape != y.shape:
        raise ValueError("scores and labels must have the same length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    y = y.astype(bool)
    if y.all() or not y.any():
        raise ValueError("both classes must be present")
    return scores, y


def auroc(scores, y) -> float:
    """Area under the ROC curve via the rank-sum identity (ties count one half)."""
    scores, y = _binary(scores, y)
    n1, n0 = int(y.sum()), int((~y).sum())
    ranks = rankdata(scores)
    return float((ranks[y].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def auprc(scores, y) -> float:
    """Average precision: sum over distinct thresholds of (recall step) x precision."""
    scores, y = _binary(scores, y)
    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], y[order]
    tp = np.cumsum(t)
    last = np.r_[s[1:] != s[:-1], True]  # last position of each tied block
    tp, k = tp[last], np.flatnonzero(last) + 1
    precision = tp / k
    recall = tp / t.sum()
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


# --- resampling -----------------------------------------------------------------------

def stratified_kfold(y, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold id per row: classes shuffled separately, then dealt round-robin."""
    y = np.asarray(y)
    folds = np.empty(y.size, dtype=int)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise ValueError(f"class {cls!r} has {idx.size} members, fewer than k = {k}")
        perm = stream(seed, "kfold", int(cls)).permutation(idx)
        folds[perm] = (offset + np.arange(idx.size)) % k
        offset += idx.size
    return folds


def stratified_split(y, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Train/test row indices with each class split at ``test_fraction``."""
    y = np.asarray(y)
    train, test = [], []
    for cls in np.unique(y):
        idx = stream(seed, "split", int(cls)).permutation(np.flatnonzero(y == cls))
        n_test = int(round(test_fraction * idx.size))
        if n_test == 0 or n_test == idx.size:
            raise ValueError(f"class {cls!r} is too small for a {test_fraction:.0%} split")
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def undersample_majority(rows, y, seed: int = 0) -> np.ndarray:
    """Subset of ``rows`` with majority-class rows dropped at random until classes balance.

    ``y`` is indexed by the entries of ``rows``.
    """
    rows = np.asarray(rows)
    lab = np.asarray(y)[rows]
    classes, counts = np.unique(lab, return_counts=True)
    if classes.size != 2:
        raise ValueError("undersampling needs two classes")
    if counts[0] == counts[1]:
        return rows.copy()
    major = classes[np.argmax(counts)]
    maj_rows = rows[lab == major]
    kept = stream(seed, "undersample").choice(maj_rows, size=counts.min(), replace=False)
    return np.sort(np.concatenate([rows[lab != major], kept]))


# --- logistic regression --------------------------------------------------------------

@dataclass
class LogitModel:
    coef: np.ndarray       # on standardized features
    intercept: float
    mean: np.ndarray
    scale: np.ndarray
    penalty: str
    C: float
    iterations: int
    converged: bool
    grad_norm: float

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X = np.where(np.isnan(X), self.mean, X)
        return (X - self.mean) / self.scale

    def margin(self, X) -> np.ndarray:
        return self.standardize(X) @ self.coef + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.margin(X))


def logit_objective(w, b, Z, y, penalty: str, C: float) -> float:
    """Mean log-loss plus ``penalty(w) / (C n)`` (the intercept is not penalized).

    Equivalent, up to the factor ``n``, to ``C * sum(loss) + penalty(w)``.
    """
    m = Z @ w + b
    pen = np.abs(w).sum() if penalty == "l1" else 0.5 * float(w @ w)
    return logistic_loss(y, m) + pen / (C * y.size)


def logit_gradient(w, b, Z, y, penalty: str, C: float) -> tuple[np.ndarray, float]:
    """Gradient of the smooth part (the whole objective for L2)."""
    r = expit(Z @ w + b) - y
    gw = Z.T @ r / y.size
    if penalty == "l2":
        gw = gw + w / (C * y.size)
    return gw, float(r.mean())


def train_logit(X, y, penalty: str = "l2", C: float = 1.0, max_iter: int = 10_000,
                tol: float = 1e-8) -> LogitModel:
    """Penalized logistic regression on z-scored features (missing values mean-imputed).

    L1 uses proximal gradient steps, L2 gradient descent; both backtrack on
    the step size. Stops when the objective changes by less than ``tol``.
    """
    penalty = penalty.lower()
    if penalty not in ("l1", "l2"):
        raise ValueError("penalty must be 'l1' or 'l2'")
    if C <= 0:
        raise ValueError("C must be positive")
    X = _check_X(X)
    y = _check_y(y, X.shape[0])
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(X, axis=0)
    mean = np.where(np.isnan(mean), 0.0, mean)
    Xf = np.where(np.isnan(X), mean, X)
    scale = Xf.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (Xf - mean) / scale
    w, b = np.zeros(X.shape[1]), math.log(y.mean() / (1 - y.mean()))
    lam = 1.0 / (C * y.size)  # L1 weight in the objective
    step = 1.0
    obj = logit_objective(w, b, Z, y, penalty, C)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gw, gb = logit_gradient(w, b, Z, y, penalty, C)
        smooth = obj - (lam * np.abs(w).sum() if penalty == "l1" else 0.0)
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            if penalty == "l1":
                w_new = np.sign(w_new) * np.maximum(np.abs(w_new) - step * lam, 0.0)
            dw, db = w_new - w, b_new - b
            new_obj = logit_objective(w_new, b_new, Z, y, penalty, C)
            new_smooth = new_obj - (lam * np.abs(w_new).sum() if penalty == "l1" else 0.0)
            # sufficient-decrease test on the smooth part (Armijo for L2, prox-gradient bound for L1)
            bound = smooth + gw @ dw + gb * db + (dw @ dw + db * db) / (2 * step)
            if new_smooth <= bound + 1e-15 or step < 1e-12:
                break
            step *= 0.5
        w, b = w_new, b_new
        change = obj - new_obj
        obj = new_obj
        step = min(step * 2.0, 1e3)
        if abs(change) < tol:
            converged = True
            break
    gw, gb = logit_gradient(w, b, Z, y, penalty, C)
    if penalty == "l1":
        # distance to the subdifferential optimality condition
        gw = np.where(w != 0, gw + lam * np.sign(w), np.sign(gw) * np.maximum(np.abs(gw) - lam, 0))
    gnorm = float(np.sqrt(gw @ gw + gb * gb))
    if not converged:
        log.warning("logistic regression did not converge in %d iterations (gradient norm %.3g)",
                    max_iter, gnorm)
    return LogitModel(w, float(b), mean, scale, penalty, float(C), it, converged, gnorm)


# --- cross-validation -----------------------------------------------------------------

@dataclass
class CvReport:
    rows: list[dict]           # one per candidate: parameters, fold metrics, means
    chosen: object             # GbtConfig or (penalty, C)
    chosen_index: int
    holdout_auroc: float
    holdout_auprc: float
    cv_auroc: float
    cv_auprc: float
    model: object = None
    n_train: int = 0
    n_test: int = 0

    def table(self) -> list[dict]:
        return [{k: v for k, v in r.items() if not k.startswith("fold_")} for r in self.rows]


def _fit_predict(task):
    kind, params, X, y, train_rows, eval_rows, keys = task
    if kind == "gbt":
        model = train_gbt(X[train_rows], y[train_rows], params, keys=keys)
        scores = predict_proba(model, X[eval_rows])
    else:
        penalty, C = params
        model = train_logit(X[train_rows], y[train_rows], penalty, C)
        scores = model.predict_proba(X[eval_rows])
    return model, scores


def _cross_validate(kind, candidates, X, y, k, seed, jobs, describe):
    X = _check_X(X)
    y = _check_y(y, X.shape[0]).astype(int)
    train, test = stratified_split(y, 0.2, seed)
    folds = stratified_kfold(y[train], k, seed)
    tasks = []
    for ci, params in enumerate(candidates):
        for f in range(k):
            fit_rows = undersample_majority(train[folds != f], y, _child(seed, "fold", f))
            tasks.append((kind, params, X, y, fit_rows, train[folds == f], ("cv", ci, f)))
    results = _map(_fit_predict, tasks, jobs)
    rows = []
    for ci, params in enumerate(candidates):
        au, ap = [], []
        for f in range(k):
            _, scores = results[ci * k + f]
            lab = y[train[folds == f]]
            au.append(auroc(scores, lab))
            ap.append(auprc(scores, lab))
        row = describe(params)
        row.update(mean_auroc=float(np.mean(au)), mean_auprc=float(np.mean(ap)),
                   fold_auroc=au, fold_auprc=ap)
        rows.append(row)
    # best mean AUROC, then best mean AUPRC, then earliest candidate
    best = min(range(len(rows)), key=lambda i: (-rows[i]["mean_auroc"], -rows[i]["mean_auprc"], i))
    refit_rows = undersample_majority(train, y, _child(seed, "refit"))
    model, scores = _fit_predict((kind, candidates[best], X, y, refit_rows, test, ("refit",)))
    return CvReport(rows, candidates[best], best, auroc(scores, y[test]), auprc(scores, y[test]),
                    rows[best]["mean_auroc"], rows[best]["mean_auprc"], model, train.size, test.size)


_child = child_seed


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def grid_search(X, y, grid=None, k: int = 5, seed: int = 0, jobs: int = 1) -> CvReport:
    """Choose GBT hyperparameters by stratified k-fold CV on an 80% split.

    Training folds are undersampled to balance; validation and the 20%
    holdout are left as drawn. The chosen configuration is refit on the
    (undersampled) 80% and scored on the holdout.
    """
    grid = config_grid() if grid is None else list(grid)
    if not grid:
        raise ValueError("grid is empty")
    grid = [replace(c, seed=_child(seed, "gbt", i)) for i, c in enumerate(grid)]
    return _cross_validate("gbt", grid, X, y, k, seed, jobs,
                           lambda c: {f.name: getattr(c, f.name) for f in fields(c) if f.name != "seed"})


def logit_grid_search(X, y, penalties=("l1", "l2"), Cs=(0.1, 1.0, 10.0), k: int = 5, seed: int = 0,
                      jobs: int = 1) -> CvReport:
    """Same protocol as :func:`grid_search` for the penalized logistic baseline."""
    cands = [(p, float(c)) for p in penalties for c in Cs]
    if not cands:
        raise ValueError("grid is empty")
    return _cross_validate("logit", cands, X, y, k, seed, jobs,
                           lambda pc: {"penalty": pc[0], "C": pc[1]})
