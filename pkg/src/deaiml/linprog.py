"""Dense two-phase primal simplex.

Small, auditable LP kernel used by every envelopment solve. Programs are
converted to standard form (nonnegative variables, nonnegative right-hand
sides, equality rows with slack/surplus/artificial columns) and solved on a
dense tableau with Bland's rule, so the pivot sequence is a deterministic
function of the input ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PIVOT_TOL = 1e-9
RESIDUAL_TOL = 1e-7

LE, GE, EQ = "<=", ">=", "="
_RELATIONS = {LE: LE, GE: GE, EQ: EQ, "≤": LE, "≥": GE, "==": EQ}


@dataclass
class LinearProgram:
    """A linear program over ``v`` variables.

    ``A``/``relations``/``rhs`` hold the constraint rows. Variables default to
    ``x >= 0``; ``lower[j] = -inf`` makes a variable free and ``upper[j]``
    adds a finite upper bound.
    """

    sense: str
    objective: np.ndarray
    A: np.ndarray
    relations: Sequence[str]
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.sense not in ("maximize", "minimize"):
            raise ValueError(f"sense must be 'maximize' or 'minimize', got {self.sense!r}")
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        v = self.objective.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, v)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.relations = tuple(_normalize_relation(r) for r in self.relations)
        k = self.A.shape[0]
        if len(self.relations) != k or self.rhs.size != k:
            raise ValueError(
                f"constraint arity mismatch: {k} coefficient rows, "
                f"{len(self.relations)} relations, {self.rhs.size} rhs values")
        if not np.all(np.isfinite(self.rhs)) or not np.all(np.isfinite(self.A)):
            raise ValueError("constraint coefficients and rhs must be finite")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        self.lower = np.zeros(v) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(v, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if self.lower.size != v or self.upper.size != v:
            raise ValueError("bounds must have one entry per variable")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)) or np.any(self.lower == np.inf):
            raise ValueError("invalid variable bounds")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @classmethod
    def from_rows(cls, sense, objective, rows, lower=None, upper=None) -> "LinearProgram":
        """Build from ``[(coefficients, relation, rhs), ...]``."""
        objective = np.asarray(objective, dtype=float)
        if rows:
            A = np.array([np.asarray(r[0], dtype=float) for r in rows])
            if A.ndim != 2 or A.shape[1] != objective.size:
                raise ValueError("every coefficient vector must match the objective length")
        else:
            A = np.zeros((0, objective.size))
        return cls(sense, objective, A, [r[1] for r in rows], [r[2] for r in rows], lower, upper)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Constraint violations of ``x`` (zero where satisfied)."""
        lhs = self.A @ x
        viol = np.zeros(len(self.relations))
        for i, rel in enumerate(self.relations):
            d = lhs[i] - self.rhs[i]
            viol[i] = max(d, 0.0) if rel == LE else max(-d, 0.0) if rel == GE else abs(d)
        bound_viol = np.concatenate([np.maximum(self.lower - x, 0.0), np.maximum(x - self.upper, 0.0)])
        return np.concatenate([viol, bound_viol])

    def to_lp_text(self, name: str = "program") -> str:
        """Render in CPLEX LP text format for cross-checking with external solvers."""
        def term_list(coefs):
            parts = []
            for j, c in enumerate(coefs):
                if c == 0:
                    continue
                sign = "-" if c < 0 else "+"
                parts.append(f"{sign} {abs(c):.17g} x{j}")
            if not parts:
                return "0 x0"
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {name}", "Maximize" if self.sense == "maximize" else "Minimize",
                 f" obj: {term_list(self.objective)}", "Subject To"]
        for i, rel in enumerate(self.relations):
            lines.append(f" c{i}: {term_list(self.A[i])} {rel} {self.rhs[i]:.17g}")
        lines.append("Bounds")
        for j in range(self.n_vars):
            lo, up = self.lower[j], self.upper[j]
            if lo == -np.inf and up == np.inf:
                lines.append(f" x{j} free")
            elif up == np.inf:
                lines.append(f" x{j} >= {lo:.17g}")
            else:
                lo_txt = "-inf" if lo == -np.inf else f"{lo:.17g}"
                lines.append(f" {lo_txt} <= x{j} <= {up:.17g}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _normalize_relation(r) -> str:
    try:
        return _RELATIONS[r]
    except (KeyError, TypeError):
        raise ValueError(f"unknown relation {r!r}") from None


@dataclass
class LpSolution:
    status: str
    objective_value: float = float("nan")
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Dense tableau with the objective held in the last row (reduced costs)."""

    def __init__(self, T: np.ndarray, basis: np.ndarray):
        self.T = T
        self.basis = basis
        self.iterations = 0

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        row = T[r] / T[r, c]
        T -= T[:, c, None] * row
        T[r] = row
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: int, max_iter: int) -> str:
        """Minimize the last-row objective over columns ``< allowed`` with Bland's rule."""
        T = self.T
        m = T.shape[0] - 1
        basis = self.basis
        while True:
            entering = T[-1, :allowed] < -PIVOT_TOL
            c = int(entering.argmax())
            if not entering[c]:
                return "optimal"
            if self.iterations >= max_iter:
                raise RuntimeError("simplex iteration limit reached")
            col = T[:m, c]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            np.divide(T[:m, -1], col, out=ratios, where=pos)
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + PIVOT_TOL * max(1.0, abs(best)))
            # Bland: among tied rows leave via the lowest-index basic variable
            r = int(ties[0]) if ties.size == 1 else int(ties[np.argmin(basis[ties])])
            self.pivot(r, c)


def _standardize_variables(lp: LinearProgram):
    """Map bounded/free variables onto nonnegative ones: ``x = shift + M @ x'``.

    Returns ``(M, shift, upper_rows)`` where ``upper_rows`` lists
    ``(column, width)`` pairs that become explicit ``<=`` rows.
    """
    v = lp.n_vars
    lo, up = lp.lower, lp.upper
    if not np.any(lo != 0.0) and np.all(up == np.inf):
        return None, np.zeros(v), []
    free = lo == -np.inf
    cols, signs = [], []
    shift = np.where(free, np.where(up == np.inf, 0.0, up), lo)
    upper_rows = []
    for j in range(v):
        if free[j]:
            if up[j] == np.inf:
                cols += [j, j]
                signs += [1.0, -1.0]
            else:
                cols.append(j)
                signs.append(-1.0)
        else:
            cols.append(j)
            signs.append(1.0)
            if up[j] != np.inf:
                upper_rows.append((len(cols) - 1, up[j] - lo[j]))
    M = np.zeros((v, len(cols)))
    M[cols, np.arange(len(cols))] = signs
    return M, shift, upper_rows


def solve(lp: LinearProgram, max_iter: int = 50_000) -> LpSolution:
    """Solve ``lp`` by the two-phase primal simplex method with Bland's rule.

    Infeasible and unbounded programs are reported through ``status``; only
    malformed input raises. On optimality ``duals`` holds one multiplier per
    original constraint row, signed for the program's own sense.
    """
    if not isinstance(lp, LinearProgram):
        raise TypeError("solve expects a LinearProgram")
    c = lp.objective if lp.sense == "maximize" else -lp.objective

    M, shift, upper_rows = _standardize_variables(lp)
    if M is None:
        A, cz, b = lp.A.copy(), c, lp.rhs.copy()
    else:
        A, cz, b = lp.A @ M, c @ M, lp.rhs - lp.A @ shift
    rel = list(lp.relations)
    n_orig_rows = len(rel)
    if upper_rows:
        if any(w < 0 for _, w in upper_rows):
            return LpSolution("infeasible")
        extra = np.zeros((len(upper_rows), A.shape[1]))
        extra[np.arange(len(upper_rows)), [k for k, _ in upper_rows]] = 1.0
        A = np.vstack([A, extra])
        b = np.concatenate([b, [w for _, w in upper_rows]])
        rel += [LE] * len(upper_rows)
    nv = A.shape[1]

    # orient rows so rhs >= 0; a zero-rhs ">=" row becomes "<=" and starts slack-basic
    k = len(rel)
    rel_arr = np.array(rel, dtype=object)
    flip = (b < 0) | ((b == 0) & (rel_arr == GE))
    A[flip] *= -1.0
    b[flip] *= -1.0
    rel = [(GE if r == LE else LE if r == GE else EQ) if f else r for r, f in zip(rel, flip)]

    is_le = np.array([r == LE for r in rel], dtype=bool)
    is_eq = np.array([r == EQ for r in rel], dtype=bool)
    slack_rows = np.flatnonzero(~is_eq)
    art_rows = np.flatnonzero(~is_le)
    n_slack, n_art = slack_rows.size, art_rows.size
    first_art = nv + n_slack
    width = first_art + n_art

    T = np.zeros((k + 1, width + 1))
    T[:k, :nv] = A
    T[:k, -1] = b
    T[slack_rows, nv + np.arange(n_slack)] = np.where(is_le[slack_rows], 1.0, -1.0)
    T[art_rows, first_art + np.arange(n_art)] = 1.0
    basis = np.empty(k, dtype=int)
    basis[slack_rows[is_le[slack_rows]]] = nv + np.flatnonzero(is_le[slack_rows])
    basis[art_rows] = first_art + np.arange(n_art)
    standard = T[:k, :first_art].copy()

    tab = _Tableau(T, basis)
    keep = np.ones(k, dtype=bool)
    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, first_art:width] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        tab.run(width, max_iter)
        if -T[-1, -1] > RESIDUAL_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpSolution("infeasible", iterations=tab.iterations)
        # drive zero-level artificials out of the basis; rows with no pivot are redundant
        for i in range(k):
            if tab.basis[i] >= first_art:
                nz = np.flatnonzero(np.abs(T[i, :first_art]) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(i, int(nz[0]))
                else:
                    keep[i] = False
        rows = np.append(keep, True)
        T = np.delete(tab.T, np.s_[first_art:width], axis=1)[rows]
        iterations = tab.iterations
        tab = _Tableau(T, tab.basis[keep].copy())
        tab.iterations = iterations

    # phase 2: maximize cz from the feasible basis
    T = tab.T
    T[-1, :] = 0.0
    T[-1, :nv] = -cz
    cb = np.zeros(tab.basis.size)
    structural = tab.basis < nv
    cb[structural] = cz[tab.basis[structural]]
    T[-1] += cb @ T[:-1]
    status = tab.run(T.shape[1] - 1, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=tab.iterations)
    cb = np.zeros(tab.basis.size)
    structural = tab.basis < nv
    cb[structural] = cz[tab.basis[structural]]

    xs = np.zeros(first_art)
    xs[tab.basis] = T[:-1, -1]
    x = xs[:nv] if M is None else shift + M @ xs[:nv]

    # duals from B^T y = c_B over the kept rows, mapped back through row flips
    y = np.zeros(k)
    B = standard[keep][:, tab.basis]
    try:
        y[keep] = np.linalg.solve(B.T, cb)
    except np.linalg.LinAlgError:
        y[keep] = np.linalg.lstsq(B.T, cb, rcond=None)[0]
    y[flip] *= -1.0
    if lp.sense == "minimize":
        y = -y
    return LpSolution("optimal", float(lp.objective @ x), x, tab.iterations, y[:n_orig_rows])


@dataclass
class BatchSolution:
    """Results of :func:`solve_batch`, one entry per program."""

    status: np.ndarray
    objective_value: np.ndarray
    primal: np.ndarray
    duals: np.ndarray
    iterations: np.ndarray


def _run_batch(T: np.ndarray, basis: np.ndarray, iters: np.ndarray, allowed: int,
               max_iter: int, mask: np.ndarray | None = None) -> np.ndarray:
    """Bland's-rule simplex on a stack of tableaux; returns 0 optimal / 2 unbounded per program.

    Works on a compacted copy of the still-running programs and writes each
    tableau back once it stops.
    """
    B, rows, _ = T.shape
    m = rows - 1
    status = np.zeros(B, dtype=int)
    active = np.arange(B)
    work, wb, wi = T.copy(), basis.copy(), iters.copy()

    def retire(mask, code):
        nonlocal active, work, wb, wi
        done = active[mask]
        T[done], basis[done], iters[done] = work[mask], wb[mask], wi[mask]
        status[done] = code
        keep = ~mask
        active, work, wb, wi = active[keep], work[keep], wb[keep], wi[keep]

    while active.size:
        ent = work[:, -1, :allowed] < -PIVOT_TOL
        if mask is not None:
            ent &= mask[:allowed]
        c = ent.argmax(axis=1)
        going = ent[np.arange(active.size), c]
        if not going.all():
            retire(~going, 0)
            c = c[going]
            if not active.size:
                break
        if np.any(wi >= max_iter):
            raise RuntimeError("simplex iteration limit reached")
        ar = np.arange(active.size)
        col = work[ar, :m, c]
        pos = col > PIVOT_TOL
        bounded = pos.any(axis=1)
        if not bounded.all():
            retire(~bounded, 2)
            c, col, pos = c[bounded], col[bounded], pos[bounded]
            if not active.size:
                break
            ar = np.arange(active.size)
        ratios = np.full(col.shape, np.inf)
        np.divide(work[:, :m, -1], col, out=ratios, where=pos)
        best = ratios.min(axis=1)
        ties = ratios <= (best + PIVOT_TOL * np.maximum(1.0, np.abs(best)))[:, None]
        key = np.where(ties, wb, np.iinfo(wb.dtype).max)
        r = key.argmin(axis=1)
        row = work[ar, r] / work[ar, r, c][:, None]
        work -= work[ar, :, c][:, :, None] * row[:, None, :]
        work[ar, r] = row
        wb[ar, r] = c
        wi += 1
    return status


def solve_batch(sense: str, objective: np.ndarray, A: np.ndarray, relations: Sequence[str],
                rhs: np.ndarray, max_iter: int = 50_000) -> BatchSolution:
    """Solve a stack of same-shaped programs ``A[b] x (rel) rhs[b]``, ``x >= 0``.

    Each program follows exactly the pivot sequence :func:`solve` would take
    on it; batching only removes per-pivot interpreter overhead. Programs whose
    phase 1 leaves a redundant row are delegated to :func:`solve`.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 3:
        raise ValueError("A must have shape (batch, rows, vars)")
    Bn, k, nv = A.shape
    rhs = np.asarray(rhs, dtype=float).reshape(Bn, k)
    objective = np.broadcast_to(np.asarray(objective, dtype=float), (Bn, nv))
    rel = [_normalize_relation(r) for r in relations]
    if len(rel) != k:
        raise ValueError("one relation per constraint row required")
    if sense not in ("maximize", "minimize"):
        raise ValueError(f"sense must be 'maximize' or 'minimize', got {sense!r}")

    out = BatchSolution(np.empty(Bn, dtype=object), np.full(Bn, np.nan), np.zeros((Bn, nv)),
                        np.zeros((Bn, k)), np.zeros(Bn, dtype=int))
    ge = np.array([r == GE for r in rel])
    flip = (rhs < 0) | ((rhs == 0) & ge[None, :])
    patterns, group = np.unique(flip, axis=0, return_inverse=True)
    for g, pattern in enumerate(patterns):
        idx = np.flatnonzero(group.ravel() == g)
        _solve_group(sense, objective[idx], A[idx], rel, rhs[idx], pattern, max_iter, out, idx)
    return out


def _solve_group(sense, objective, A, rel, rhs, flip, max_iter, out, idx):
    Bn, k, nv = A.shape
    c = objective if sense == "maximize" else -objective
    A = A.copy()
    b = rhs.copy()
    A[:, flip] *= -1.0
    b[:, flip] *= -1.0
    rel = [(GE if r == LE else LE if r == GE else EQ) if f else r for r, f in zip(rel, flip)]
    is_le = np.array([r == LE for r in rel], dtype=bool)
    is_eq = np.array([r == EQ for r in rel], dtype=bool)
    slack_rows = np.flatnonzero(~is_eq)
    art_rows = np.flatnonzero(~is_le)
    n_slack, n_art = slack_rows.size, art_rows.size
    first_art = nv + n_slack
    width = first_art + n_art

    T = np.zeros((Bn, k + 1, width + 1))
    T[:, :k, :nv] = A
    T[:, :k, -1] = b
    T[:, slack_rows, nv + np.arange(n_slack)] = np.where(is_le[slack_rows], 1.0, -1.0)
    T[:, art_rows, first_art + np.arange(n_art)] = 1.0
    basis = np.empty((Bn, k), dtype=np.int64)
    basis[:, slack_rows[is_le[slack_rows]]] = nv + np.flatnonzero(is_le[slack_rows])
    basis[:, art_rows] = first_art + np.arange(n_art)
    standard = T[:, :k, :first_art].copy()
    iters = np.zeros(Bn, dtype=int)
    ok = np.ones(Bn, dtype=bool)

    if n_art:
        T[:, -1, first_art:width] = 1.0
        T[:, -1] -= T[:, art_rows].sum(axis=1)
        _run_batch(T, basis, iters, width, max_iter)
        scale = np.maximum(1.0, np.abs(b).max(axis=1))
        infeasible = -T[:, -1, -1] > RESIDUAL_TOL * scale
        out.status[idx[infeasible]] = "infeasible"
        out.iterations[idx[infeasible]] = iters[infeasible]
        ok &= ~infeasible
        for bi in np.flatnonzero(ok):
            for i in np.flatnonzero(basis[bi] >= first_art):
                nz = np.flatnonzero(np.abs(T[bi, i, :first_art]) > PIVOT_TOL)
                if not nz.size:
                    ok[bi] = False  # redundant row: solve this one on its own
                    break
                tab = _Tableau(T[bi], basis[bi])
                tab.pivot(int(i), int(nz[0]))
                iters[bi] += 1
        for bi in np.flatnonzero(~ok & ~infeasible):
            lp = LinearProgram(sense, objective[bi], np.where(flip[:, None], -A[bi], A[bi]),
                               [(GE if r == LE else LE if r == GE else EQ) if f else r
                                for r, f in zip(rel, flip)],
                               np.where(flip, -b[bi], b[bi]))
            sol = solve(lp, max_iter)
            j = idx[bi]
            out.status[j] = sol.status
            out.iterations[j] = sol.iterations
            if sol.optimal:
                out.objective_value[j] = sol.objective_value
                out.primal[j] = sol.primal
                out.duals[j] = sol.duals
        T = np.delete(T, np.s_[first_art:width], axis=2)

    sel = np.flatnonzero(ok)
    if not sel.size:
        return
    T, basis, iters = T[sel], basis[sel], iters[sel]
    c = c[sel]
    T[:, -1, :] = 0.0
    T[:, -1, :nv] = -c
    structural = basis < nv
    cb = np.where(structural, np.take_along_axis(c, np.where(structural, basis, 0), axis=1), 0.0)
    T[:, -1] += np.einsum("bk,bkw->bw", cb, T[:, :-1])
    status = _run_batch(T, basis, iters, T.shape[2] - 1, max_iter)
    structural = basis < nv
    cb = np.where(structural, np.take_along_axis(c, np.where(structural, basis, 0), axis=1), 0.0)

    j = idx[sel]
    out.iterations[j] = iters
    good = status == 0
    out.status[j[~good]] = "unbounded"
    out.status[j[good]] = "optimal"
    T, basis, cb, jg = T[good], basis[good], cb[good], j[good]
    if not jg.size:
        return
    xs = np.zeros((jg.size, first_art))
    np.put_along_axis(xs, basis, T[:, :-1, -1], axis=1)
    x = xs[:, :nv]
    out.primal[jg] = x
    # same reduction as solve() so batched and single results agree bit for bit
    out.objective_value[jg] = [float(cv @ xv) for cv, xv in zip(objective[sel][good], x)]
    Bmat = np.take_along_axis(standard[sel][good], basis[:, None, :], axis=2)
    try:
        y = np.linalg.solve(np.swapaxes(Bmat, 1, 2), cb[..., None])[..., 0]
    except np.linalg.LinAlgError:
        y = np.stack([np.linalg.lstsq(Bm.T, cv, rcond=None)[0] for Bm, cv in zip(Bmat, cb)])
    y[:, flip] *= -1.0
    if sense == "minimize":
        y = -y
    out.duals[jg] = y


class WarmBatch:
    """A stack of maximization programs that can be re-optimized after new columns arrive.

    Programs are ``max c'x`` s.t. ``A[b] x (rel) rhs[b]``, ``x >= 0``, with
    shared relations. Every row carries an identity column (its artificial)
    that never re-enters the basis, so the tableau always holds the current
    basis inverse. :meth:`add_columns` prices new columns against it and
    continues phase 2 from the previous optimal basis.
    """

    def __init__(self, objective, A, relations, rhs, max_iter: int = 50_000):
        A = np.asarray(A, dtype=float)
        if A.ndim != 3:
            raise ValueError("A must have shape (batch, rows, vars)")
        Bn, k, v = A.shape
        rel = np.array([_normalize_relation(r) for r in relations], dtype=object)
        if rel.size != k:
            raise ValueError("one relation per constraint row required")
        rhs = np.asarray(rhs, dtype=float).reshape(Bn, k)
        c = np.broadcast_to(np.asarray(objective, dtype=float), (Bn, v))
        self.k, self.max_iter = k, max_iter
        flip = (rhs < 0) | ((rhs == 0) & (rel == GE)[None, :])
        self.sign = np.where(flip, -1.0, 1.0)
        le = np.where(flip, rel == GE, rel == LE)
        ge = np.where(flip, rel == LE, rel == GE)

        # columns: [structural v | slack k | artificial k | added ...] + rhs
        T = np.zeros((Bn, k + 1, v + 2 * k + 1))
        T[:, :k, :v] = A * self.sign[:, :, None]
        T[:, :k, -1] = rhs * self.sign
        diag = np.arange(k)
        T[:, diag, v + diag] = np.where(le, 1.0, np.where(ge, -1.0, 0.0))
        T[:, diag, v + k + diag] = 1.0
        self.basis = np.where(le, v + diag, v + k + diag).astype(np.int64)
        self.art = slice(v + k, v + 2 * k)
        self.iterations = np.zeros(Bn, dtype=int)
        self.status = np.full(Bn, "optimal", dtype=object)
        self.cost = np.zeros((Bn, v + 2 * k))
        self.cost[:, :v] = c

        needs = ~le
        if needs.any():
            T[:, -1, self.art] = needs
            T[:, -1] -= np.einsum("bk,bkw->bw", needs.astype(float), T[:, :k])
            _run_batch(T, self.basis, self.iterations, T.shape[2] - 1, max_iter, self._mask(T))
            scale = np.maximum(1.0, np.abs(rhs).max(axis=1))
            bad = -T[:, -1, -1] > RESIDUAL_TOL * scale
            self.status[bad] = "infeasible"
        self.T = T
        self._drive_out(np.flatnonzero(self.status == "optimal"))
        # phase 2 objective row: c_B B^-1 A - c
        T[:, -1] = 0.0
        T[:, -1, :self.cost.shape[1]] = -self.cost
        cb = np.take_along_axis(self.cost, self.basis, axis=1)
        T[:, -1] += np.einsum("bk,bkw->bw", cb, T[:, :k])
        self._optimize(np.flatnonzero(self.status == "optimal"))

    def _mask(self, T):
        mask = np.ones(T.shape[2] - 1, dtype=bool)
        mask[self.art] = False
        return mask

    def _drive_out(self, rows):
        """Pivot zero-level artificials out of the basis where some column allows it."""
        T, k = self.T, self.k
        mask = self._mask(T)
        rows = np.asarray(rows, dtype=int)
        stuck = ((self.basis[rows] >= self.art.start) & (self.basis[rows] < self.art.stop)).any(axis=1)
        for b in rows[stuck]:
            for i in np.flatnonzero((self.basis[b] >= self.art.start) & (self.basis[b] < self.art.stop)):
                nz = np.flatnonzero((np.abs(T[b, i, :-1]) > PIVOT_TOL) & mask)
                if nz.size:
                    tab = _Tableau(T[b], self.basis[b])
                    tab.pivot(int(i), int(nz[0]))
                    self.iterations[b] += 1

    def _optimize(self, rows):
        if not rows.size:
            return
        sub, basis, iters = self.T[rows], self.basis[rows], self.iterations[rows]
        st = _run_batch(sub, basis, iters, sub.shape[2] - 1, self.max_iter, self._mask(sub))
        self.T[rows], self.basis[rows], self.iterations[rows] = sub, basis, iters
        self.status[rows[st == 2]] = "unbounded"

    @property
    def objective_value(self) -> np.ndarray:
        return np.where(self.status == "optimal", self.T[:, -1, -1], np.nan)

    @property
    def duals(self) -> np.ndarray:
        """One multiplier per original row (``y' A_j - c_j`` is each column's reduced cost)."""
        return self.T[:, -1, self.art] * self.sign

    def primal(self, rows=None) -> np.ndarray:
        """Values of every column (structural, slack, artificial, then added ones)."""
        rows = np.arange(self.T.shape[0]) if rows is None else np.asarray(rows)
        x = np.zeros((rows.size, self.T.shape[2] - 1))
        np.put_along_axis(x, self.basis[rows], self.T[rows, :-1, -1], axis=1)
        return x

    @property
    def n_columns(self) -> int:
        return self.T.shape[2] - 1

    def add_columns(self, rows, columns, cost=0.0) -> None:
        """Append ``columns[i]`` (shape ``(k, t)``) to program ``rows[i]`` and re-optimize those.

        Other programs receive zero columns, which never enter their basis.
        """
        rows = np.asarray(rows, dtype=int)
        columns = np.asarray(columns, dtype=float)
        t = columns.shape[2]
        Bn, _, W = self.T.shape
        cost = np.broadcast_to(np.asarray(cost, dtype=float), (rows.size, t))
        signed = columns * self.sign[rows][:, :, None]
        binv = self.T[rows, :self.k, self.art]
        block = np.zeros((Bn, self.k + 1, t))
        block[rows, :self.k] = binv @ signed
        block[rows, -1] = np.einsum("bk,bkt->bt", self.T[rows, -1, self.art], signed) - cost
        self.T = np.concatenate([self.T[:, :, :-1], block, self.T[:, :, -1:]], axis=2)
        full = np.zeros((Bn, t))
        full[rows] = cost
        self.cost = np.concatenate([self.cost, full], axis=1)
        live = rows[self.status[rows] == "optimal"]
        self._drive_out(live)
        self._optimize(live)
