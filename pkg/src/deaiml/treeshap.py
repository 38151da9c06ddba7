"""Exact path-dependent Shapley attributions for boosted tree ensembles.

Attributions are on the margin (log-odds) scale, where they add up exactly:
``phi0 + phi.sum() == model.margin(x)``. Feature absence is modelled by the
trees themselves: an absent feature's split is averaged over both children
weighted by training cover.

All routines work on a block of rows at once; the recursion over tree nodes
is shared and only the "which child does x follow" flags differ per row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boost import Tree, TreeEnsemble, _check_X

MAX_INTERACTION_FEATURES = 64


# --- single-tree recursion ----------------------------------------------------------

class _Path:
    """Unique-feature path with subset-size weights; ``o`` and ``w`` are per row."""

    __slots__ = ("d", "z", "o", "w")

    def __init__(self, d, z, o, w):
        self.d, self.z, self.o, self.w = d, z, o, w

    def copy(self):
        return _Path(list(self.d), list(self.z), [v for v in self.o], [v.copy() for v in self.w])

    def extend(self, pz, po, feature, R):
        l = len(self.d)
        self.d.append(feature)
        self.z.append(pz)
        self.o.append(po)
        self.w.append(np.ones(R) if l == 0 else np.zeros(R))
        for i in range(l - 1, -1, -1):
            self.w[i + 1] += po * self.w[i] * ((i + 1) / (l + 1))
            self.w[i] = pz * self.w[i] * ((l - i) / (l + 1))

    def unwind(self, k):
        l = len(self.d) - 1
        o, z = self.o[k], self.z[k]
        nxt = self.w[l]
        on = o != 0
        safe_o = np.where(on, o, 1.0)
        for i in range(l - 1, -1, -1):
            w_on = nxt * (l + 1) / ((i + 1) * safe_o)
            w_off = self.w[i] * (l + 1) / (z * (l - i)) if z != 0 else np.zeros_like(nxt)
            tmp = self.w[i]
            new = np.where(on, w_on, w_off)
            nxt = tmp - w_on * z * ((l - i) / (l + 1))
            self.w[i] = new
        del self.d[k], self.z[k], self.o[k]
        self.w.pop()

    def unwound_sum(self, k):
        l = len(self.d) - 1
        o, z = self.o[k], self.z[k]
        on = o != 0
        safe_o = np.where(on, o, 1.0)
        total_on = np.zeros_like(self.w[0])
        total_off = np.zeros_like(self.w[0])
        nxt = self.w[l]
        for i in range(l - 1, -1, -1):
            tmp = nxt * (l + 1) / ((i + 1) * safe_o)
            total_on += tmp
            nxt = self.w[i] - tmp * z * ((l - i) / (l + 1))
            if z != 0:
                total_off += self.w[i] / z / ((l - i) / (l + 1))
        return np.where(on, total_on, total_off)


def _tree_shap(tree: Tree, X: np.ndarray, phi: np.ndarray, scale: float,
               condition: int = 0, cond_feature: int = -1) -> None:
    """Add ``scale`` x this tree's attributions for every row of ``X`` into ``phi``.

    ``condition`` = +1 / -1 computes attributions with ``cond_feature`` held
    present / absent (used for interaction values).
    """
    R = X.shape[0]
    goes_left = {}

    def left_mask(node):
        if node not in goes_left:
            x = X[:, tree.feature[node]]
            goes_left[node] = np.where(np.isnan(x), tree.default_left[node], x < tree.threshold[node])
        return goes_left[node]

    def recurse(node, path, pz, po, pfeat, cfrac):
        if not np.any(cfrac):
            return
        path = path.copy()
        if condition == 0 or pfeat != cond_feature:
            path.extend(pz, po, pfeat, R)
        if tree.left[node] < 0:
            v = tree.value[node] * scale
            for i in range(1, len(path.d)):
                w = path.unwound_sum(i)
                phi[:, path.d[i]] += w * (path.o[i] - path.z[i]) * v * cfrac
            return
        f = tree.feature[node]
        iz, io = 1.0, np.ones(R)
        if f in path.d[1:]:
            k = path.d.index(f, 1)
            iz, io = path.z[k], path.o[k]
            path.unwind(k)
        gl = left_mask(node)
        lc, rc = tree.left[node], tree.right[node]
        zl = tree.cover[lc] / tree.cover[node]
        zr = tree.cover[rc] / tree.cover[node]
        cl = cr = cfrac
        if condition != 0 and f == cond_feature:
            if condition > 0:  # only the branch x follows carries weight
                cl, cr = cfrac * gl, cfrac * ~gl
            else:
                cl, cr = cfrac * zl, cfrac * zr
        recurse(lc, path, zl * iz, io * gl, f, cl)
        recurse(rc, path, zr * iz, io * ~gl, f, cr)

    recurse(0, _Path([], [], [], []), 1.0, np.ones(R), -1, np.ones(R))


def expected_value(tree: Tree) -> float:
    """Cover-weighted mean leaf value."""
    leaves = tree.left < 0
    return float(np.sum(tree.value[leaves] * tree.cover[leaves]) / tree.cover[0])


# --- public API -------------------------------------------------------------------------

@dataclass
class ShapVector:
    phi: np.ndarray
    phi0: float

    @property
    def total(self) -> float:
        return float(self.phi.sum())


def base_value(model: TreeEnsemble) -> float:
    return model.base_score + model.learning_rate * sum(expected_value(t) for t in model.trees)


def shap_matrix(model: TreeEnsemble, X) -> tuple[np.ndarray, float]:
    """Attributions for every row: ``(phi, phi0)`` with ``phi`` of shape ``(rows, features)``."""
    X = _check_X(X, model.feature_count)
    phi = np.zeros((X.shape[0], model.feature_count))
    for t in model.trees:
        if t.n_nodes > 1:
            _tree_shap(t, X, phi, model.learning_rate)
    return phi, base_value(model)


def shap_values(model: TreeEnsemble, x) -> ShapVector:
    phi, phi0 = shap_matrix(model, np.asarray(x, dtype=float).reshape(1, -1))
    return ShapVector(phi[0], phi0)


@dataclass
class InteractionMatrix:
    Phi: np.ndarray
    phi: np.ndarray

    @property
    def main_effects(self) -> np.ndarray:
        return np.diag(self.Phi).copy()


def interaction_tensor(model: TreeEnsemble, X) -> np.ndarray:
    """Interaction matrices for every row, shape ``(rows, features, features)``."""
    X = _check_X(X, model.feature_count)
    M = model.feature_count
    if M > MAX_INTERACTION_FEATURES:
        raise ValueError(f"interaction values are limited to {MAX_INTERACTION_FEATURES} features "
                         f"(model has {M}); use shap_matrix for values only")
    R = X.shape[0]
    phi = np.zeros((R, M))
    half = np.zeros((R, M, M))  # half[:, j, i] = (phi_i | j present - phi_i | j absent) / 2
    for t in model.trees:
        if t.n_nodes < 2:
            continue
        _tree_shap(t, X, phi, model.learning_rate)
        for j in np.unique(t.feature[t.left >= 0]):
            on = np.zeros((R, M))
            off = np.zeros((R, M))
            _tree_shap(t, X, on, model.learning_rate, +1, int(j))
            _tree_shap(t, X, off, model.learning_rate, -1, int(j))
            half[:, j, :] += 0.5 * (on - off)
    idx = np.arange(M)
    half[:, idx, idx] = 0.0
    Phi = 0.5 * (half + half.transpose(0, 2, 1))
    Phi[:, idx, idx] = phi - Phi.sum(axis=2)
    return Phi


def shap_interactions(model: TreeEnsemble, x) -> InteractionMatrix:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    Phi = interaction_tensor(model, x)[0]
    return InteractionMatrix(Phi, Phi.sum(axis=1))


@dataclass
class GlobalRanking:
    features: list[str]
    mean_abs: np.ndarray   # in ranked order
    order: np.ndarray      # feature indices, most important first

    def top(self, k: int = 30) -> list[tuple[str, float]]:
        return [(self.features[i], float(v)) for i, v in zip(self.order[:k], self.mean_abs[:k])]

    def to_records(self) -> list[dict]:
        return [{"rank": r + 1, "feature": self.features[i], "mean_abs_shap": float(v)}
                for r, (i, v) in enumerate(zip(self.order, self.mean_abs))]


def global_ranking(model: TreeEnsemble, X, feature_names=None, phi: np.ndarray | None = None) -> GlobalRanking:
    """Features ordered by mean |phi| over the rows (ties by feature index)."""
    if phi is None:
        phi, _ = shap_matrix(model, X)
    if phi.shape[0] < 1:
        raise ValueError("need at least one row")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(phi.shape[1])]
    imp = np.abs(phi).mean(axis=0)
    order = np.argsort(-imp, kind="stable")
    return GlobalRanking(names, imp[order], order)


@dataclass
class LocalProfile:
    dmu_id: str
    total: float
    features: list[tuple[str, float, float]] = field(default_factory=list)  # name, phi, raw value
    note: str = ""

    def to_dict(self) -> dict:
        return {"dmu_id": self.dmu_id, "total_contribution": self.total, "note": self.note,
                "features": [{"feature": n, "shap": p, "value": v} for n, p, v in self.features]}


def extreme_profiles(model: TreeEnsemble, X, ids, feature_names=None, k: int = 12,
                     phi: np.ndarray | None = None) -> tuple[LocalProfile, LocalProfile]:
    """Profiles of the rows with the largest and smallest total contribution (sum of phi).

    Ties go to the earlier row.
    """
    X = _check_X(X, model.feature_count)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    if phi is None:
        phi, _ = shap_matrix(model, X)
    ids = [str(i) for i in ids]
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    totals = phi.sum(axis=1)

    def profile(r, which):
        top = np.argsort(-np.abs(phi[r]), kind="stable")[:k]
        tied = int(np.sum(totals == totals[r]))
        note = f"{which} total shared by {tied} rows; earliest row reported" if tied > 1 else ""
        return LocalProfile(ids[r], float(totals[r]),
                            [(names[j], float(phi[r, j]), float(X[r, j])) for j in top], note)

    return profile(int(np.argmax(totals)), "maximum"), profile(int(np.argmin(totals)), "minimum")
