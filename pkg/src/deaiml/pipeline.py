"""Stage orchestration: dea -> sdtest -> outliers -> explain, with content-hash caching.

Every stage writes into ``<out>/<stage>/`` and finishes with a ``_stage.json``
stamp holding the stage key (a hash of the data, the relevant settings and
the upstream stamps) and the SHA-256 of each file it wrote. A stage whose
stamp matches the current key and whose files are intact is skipped.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import math
import shutil
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.stats import gaussian_kde

from . import __version__, boost, dea, orderalpha, sdtest, treeshap
from .config import PipelineConfig, digest
from .errors import ConfigError, DataError, NumericError
from .rng import child_seed
from .tabular import (DmuPanel, FrontierSpec, binarize_efficiency, describe, load_csv, read_records,
                      split_by_group, write_records)

log = logging.getLogger(__name__)

STAGES = ("dea", "sdtest", "outliers", "explain")
UPSTREAM = {"dea": (), "sdtest": ("dea",), "outliers": ("dea",), "explain": ("dea",)}
SETTINGS = {
    "dea": ("schema", "group_a", "group_b", "frontiers", "bootstrap_reps", "bootstrap_level", "ci_method"),
    "sdtest": ("group_a", "group_b", "frontiers", "sd_reps", "sd_level"),
    "outliers": ("schema", "group_a", "group_b", "frontiers", "alpha_grid", "bootstrap_reps",
                 "bootstrap_level", "ci_method"),
    "explain": ("schema", "group_a", "group_b", "frontiers", "gbt_grid", "reg_lambda", "gamma",
                "min_child_cover", "logit_penalties", "logit_C", "k_folds", "top_k", "profile_k"),
}
STAMP = "_stage.json"
WHOLE = "Whole sample"
DENSITY_POINTS = 512

PANEL_A_COLUMNS = ["group", "TE", "TEBC", "lower", "upper", "performance", "N"]
STRATA_COLUMNS = ["panel", "group", "stratum", "Mean", "SD", "IQR", "Min", "Max", "N"]
TABLE5_ROWS = ("Test statistic", "Critical-value", "P-value")
A1_COLUMNS = ["arm", "row", "chosen_parameters", "AUROC", "AUPRC", "cv_AUROC", "cv_AUPRC"]


def open_defaults(cfg: PipelineConfig) -> dict:
    """Numerical conventions that shape the outputs, recorded in the run manifest."""
    return {
        "efficiency_tolerance": dea.EFFICIENT_TOL,
        "lp_solver": "dense two-phase simplex, Bland's rule, pivot tol 1e-9, residual tol 1e-7",
        "bandwidth_rule": "0.9*min(sd, IQR/1.349)*N^(-1/5) on the reflected Farrell scores; "
                          "sd alone when the IQR is roundoff",
        "bootstrap_scheme": "smoothed, reflection about 1, variance-corrected Gaussian kernel; "
                            "pseudo outputs y*theta/theta*; observed units scored against each pseudo set",
        "bias_correction": "theta_bc = 2*theta - mean(theta*) on the Farrell scale, tebc = 1/theta_bc",
        "ci_method": cfg.ci_method,
        "bootstrap_performance": "3*bias^2/variance on the Farrell scale; table reports the mean over finite values",
        "order_alpha_quantile": "ceil(alpha*n_D/100)-th smallest dominating ratio",
        "super_efficiency_tolerance": orderalpha.SUPER_TOL,
        "alpha_selection": "lower alpha of the largest one-step rise in super-efficient share; "
                           "higher-alpha step on ties",
        "sd_scores": "tebc",
        "sd_scheme": "pooled bootstrap with replacement at group sizes; pooled-sample grid; "
                     "critical value = (1-level) quantile; p = (1+#{T*>=T})/(reps+1)",
        "label_rule": "tebc strictly above the pooled mean of both groups for the same frontier",
        "gbt": {"reg_lambda": cfg.reg_lambda, "gamma": cfg.gamma, "min_child_cover": cfg.min_child_cover,
                "base_score": "log-odds of the training positive rate", "split_search": "exact greedy",
                "missing_values": "learned default direction", "subsample": "exact row count without replacement"},
        "logit": "z-scored features, mean imputation, mean log-loss + penalty/(C*n)",
        "cv_protocol": f"stratified 80/20 holdout; stratified {cfg.k_folds}-fold CV on the 80%; majority "
                       "class undersampled in training folds; rank by mean AUROC then AUPRC",
        "explanation_model": "chosen GBT configuration refit on every unit of the group",
        "shap": "path-dependent tree SHAP on the log-odds margin",
        "density": f"Gaussian KDE (Scott bandwidth) on a {DENSITY_POINTS}-point grid",
    }


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _json_dump(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def _finite_mean(v) -> float:
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    return float(v.mean()) if v.size else math.nan


class StageError(Exception):
    """Wraps a stage failure; ``cause`` keeps the original exception type for exit codes."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class StageRecord:
    name: str
    key: str
    content_hash: str
    cached: bool
    seconds: float | None = None


@dataclass
class RunManifest:
    config_hash: str
    data_sha256: str
    seed: int
    stages: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)
    version: str = __version__
    started_at: str = ""
    finished_at: str = ""

    def deterministic_part(self) -> dict:
        return {"version": self.version, "config_hash": self.config_hash, "data_sha256": self.data_sha256,
                "seed": self.seed, "defaults": self.defaults,
                "stages": {k: {"key": v.key, "content_hash": v.content_hash} for k, v in self.stages.items()}}

    @property
    def manifest_hash(self) -> str:
        return digest(self.deterministic_part())

    def to_dict(self) -> dict:
        d = self.deterministic_part()
        d["manifest_hash"] = self.manifest_hash
        d["timings_seconds"] = {k: v.seconds for k, v in self.stages.items()}
        d["cached"] = {k: v.cached for k, v in self.stages.items()}
        d["started_at"], d["finished_at"] = self.started_at, self.finished_at
        return d


class Pipeline:
    def __init__(self, cfg: PipelineConfig, out=None, jobs: int | None = None):
        self.cfg = cfg
        self.out = Path(out if out is not None else cfg.out)
        self.jobs = cfg.jobs if jobs is None else jobs

    # --- inputs ----------------------------------------------------------------------------
    @cached_property
    def data_sha256(self) -> str:
        path = Path(self.cfg.data_path)
        if not path.is_file():
            raise DataError(f"data file not found: {path}")
        return sha256_file(path)

    @cached_property
    def panel(self) -> DmuPanel:
        panel = load_csv(self.cfg.data_path, self.cfg.schema)
        for g in (self.cfg.group_a, self.cfg.group_b):
            split_by_group(panel, g)  # raises when a group is absent
        return panel

    def group_panel(self, group: str) -> DmuPanel:
        return split_by_group(self.panel, group)

    def spec(self, frontier, panel: DmuPanel) -> FrontierSpec:
        return FrontierSpec.for_panel(panel, frontier.inputs, frontier.outputs, frontier.rts)

    @property
    def groups(self) -> tuple[str, str]:
        return self.cfg.group_a, self.cfg.group_b

    # --- stamps ----------------------------------------------------------------------------
    def stage_dir(self, stage: str) -> Path:
        return self.out / stage

    def read_stamp(self, stage: str) -> dict | None:
        p = self.stage_dir(stage) / STAMP
        if not p.is_file():
            return None
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return None

    def stamp_valid(self, stage: str, key: str | None = None) -> bool:
        stamp = self.read_stamp(stage)
        if stamp is None or (key is not None and stamp.get("key") != key):
            return False
        d = self.stage_dir(stage)
        return all((d / f).is_file() and sha256_file(d / f) == h for f, h in stamp["files"].items())

    def stage_key(self, stage: str) -> str:
        upstream = {}
        for u in UPSTREAM[stage]:
            stamp = self.read_stamp(u)
            if stamp is None or not self.stamp_valid(u, self.stage_key(u)):
                raise DataError(f"stage {stage!r} needs current outputs of stage {u!r} under "
                                f"{self.stage_dir(u)}; run it first")
            upstream[u] = stamp["content_hash"]
        return digest({"stage": stage, "version": __version__, "data": self.data_sha256,
                       "seed": self.cfg.seed, "settings": self.cfg.section(*SETTINGS[stage]),
                       "upstream": upstream})

    def _write_stamp(self, stage: str, key: str) -> dict:
        d = self.stage_dir(stage)
        files = {p.name: sha256_file(p) for p in sorted(d.iterdir()) if p.is_file() and p.name != STAMP}
        stamp = {"stage": stage, "key": key, "files": files, "content_hash": digest(files)}
        _json_dump(d / STAMP, stamp)
        return stamp

    # --- running ---------------------------------------------------------------------------
    def run(self, stages=STAGES, force: bool = False) -> RunManifest:
        started = _now()
        manifest = RunManifest(self.cfg.config_hash(), self.data_sha256, self.cfg.seed,
                               defaults=open_defaults(self.cfg), started_at=started)
        self.out.mkdir(parents=True, exist_ok=True)
        for stage in STAGES:
            if stage not in stages:
                continue
            try:
                key = self.stage_key(stage)
                if not force and self.stamp_valid(stage, key):
                    log.info("stage %s: cached", stage)
                    stamp = self.read_stamp(stage)
                    manifest.stages[stage] = StageRecord(stage, key, stamp["content_hash"], True, 0.0)
                    continue
                d = self.stage_dir(stage)
                if d.exists():
                    shutil.rmtree(d)
                d.mkdir(parents=True)
                t0 = time.perf_counter()
                log.info("stage %s: running", stage)
                getattr(self, f"_stage_{stage}")(d)
                seconds = time.perf_counter() - t0
                stamp = self._write_stamp(stage, key)
                manifest.stages[stage] = StageRecord(stage, key, stamp["content_hash"], False, round(seconds, 3))
            except (ConfigError, DataError, NumericError, ValueError) as exc:
                raise StageError(stage, exc) from exc
        # stages not requested this time still count if their outputs are current
        for stage in STAGES:
            if stage in manifest.stages:
                continue
            try:
                key = self.stage_key(stage)
            except DataError:
                continue
            if self.stamp_valid(stage, key):
                manifest.stages[stage] = StageRecord(stage, key, self.read_stamp(stage)["content_hash"], True)
        manifest.stages = {s: manifest.stages[s] for s in STAGES if s in manifest.stages}
        manifest.finished_at = _now()
        _json_dump(self.out / "manifest.json", manifest.to_dict())
        return manifest

    # --- dea -------------------------------------------------------------------------------
    def _stage_dea(self, d: Path) -> None:
        cfg = self.cfg
        for fr in cfg.frontiers:
            panel_a, strata_rows, dens = [], [], {}
            for label, g in zip(("B", "C"), self.groups):
                sub = self.group_panel(g)
                spec = self.spec(fr, sub)
                est, diag = dea.smoothed_bootstrap(
                    sub, spec, reps=cfg.bootstrap_reps, level=cfg.bootstrap_level,
                    seed=child_seed(cfg.seed, "dea", fr.name, g), ci_method=cfg.ci_method, jobs=self.jobs)
                rows = []
                for rec, e, perf in zip(sub.records, est, diag.performance):
                    rows.append({"id": e.dmu_id, "group": g, "stratum": rec.stratum, "te": e.te,
                                 "tebc": e.tebc, "ci_low": e.ci_low, "ci_high": e.ci_high,
                                 "te_farrell": e.te_farrell, "bias": e.bias, "performance": float(perf),
                                 "efficient": e.efficient})
                write_records(d / f"scores_{fr.name}_{g}.csv", rows, SCORE_COLUMNS)
                _json_dump(d / f"bootstrap_{fr.name}_{g}.json",
                           {"reps": diag.reps, "bandwidth": diag.bandwidth, "level": diag.level,
                            "ci_method": diag.ci_method, "skipped": diag.skipped,
                            "mean_performance": diag.mean_performance})
                te = np.array([r["te"] for r in rows])
                tebc = np.array([r["tebc"] for r in rows])
                panel_a.append({"group": g, "TE": te.mean(), "TEBC": tebc.mean(),
                                "lower": np.mean([r["ci_low"] for r in rows]),
                                "upper": np.mean([r["ci_high"] for r in rows]),
                                "performance": diag.mean_performance, "N": sub.n})
                strata_rows += stratum_summary(label, g, [r["stratum"] for r in rows], tebc)
                dens[f"{g}_te"], dens[f"{g}_tebc"] = te, tebc
            write_records(d / f"table_{fr.name}_panelA.csv", panel_a, PANEL_A_COLUMNS)
            write_records(d / f"table_{fr.name}_strata.csv", strata_rows, STRATA_COLUMNS)
            write_records(d / f"density_{fr.name}.csv", density_grid(dens))

    # --- sdtest ----------------------------------------------------------------------------
    def _stage_sdtest(self, d: Path) -> None:
        cfg = self.cfg
        a, b = self.groups
        long_rows = []
        wide = {(x, y): {r: {"row": r} for r in TABLE5_ROWS} for x, y in ((a, b), (b, a))}
        for fr in cfg.frontiers:
            scores = {g: self._tebc(fr.name, g) for g in (a, b)}
            for dom, sub in ((a, b), (b, a)):
                for s in (1, 2):
                    res = sdtest.sd_test(scores[dom], scores[sub], s=s, reps=cfg.sd_reps,
                                         seed=child_seed(cfg.seed, "sd", fr.name, dom, sub),
                                         level=cfg.sd_level)
                    long_rows.append({"outcome": fr.name, "order": s, "dominant": dom, "dominated": sub,
                                      "null": f"{dom} dominates {sub} at order {s}",
                                      "statistic": res.statistic, "critical_value": res.critical_value,
                                      "p_value": res.p_value, "reps": res.reps, "reject": res.reject})
                    col = f"{fr.name}_s{s}"
                    w = wide[(dom, sub)]
                    w["Test statistic"][col] = res.statistic
                    w["Critical-value"][col] = res.critical_value
                    w["P-value"][col] = res.p_value
            grid = np.unique(np.concatenate(list(scores.values())))
            cdf = {"score": grid}
            for g in (a, b):
                cdf[f"F_{g}"] = sdtest.ecdf(scores[g], grid)
                cdf[f"D2F_{g}"] = sdtest.integrated_cdf(scores[g], grid)
            write_records(d / f"cdf_{fr.name}.csv", _columns_to_rows(cdf), list(cdf))
        write_records(d / "sd_tests.csv", long_rows)
        cols = ["row"] + [f"{fr.name}_s{s}" for fr in cfg.frontiers for s in (1, 2)]
        for (dom, sub), w in wide.items():
            write_records(d / f"table5_{dom}_dominates_{sub}.csv", list(w.values()), cols)

    def _tebc(self, frontier: str, group: str) -> np.ndarray:
        rows = read_records(self.stage_dir("dea") / f"scores_{frontier}_{group}.csv", ["id", "group", "stratum"])
        return np.array([r["tebc"] for r in rows], dtype=float)

    def _scores(self, frontier: str, group: str) -> list[dict]:
        return read_records(self.stage_dir("dea") / f"scores_{frontier}_{group}.csv", ["id", "group", "stratum"])

    # --- outliers --------------------------------------------------------------------------
    def _stage_outliers(self, d: Path) -> None:
        cfg = self.cfg
        rows = []
        for fr in cfg.frontiers:
            by_group = {}
            for g in self.groups:
                sub = self.group_panel(g)
                spec = self.spec(fr, sub)
                curve = orderalpha.super_share_curve(sub, cfg.alpha_grid, spec)
                chosen = np.isclose(curve.alpha_grid, curve.chosen_alpha)
                write_records(d / f"alpha_curve_{fr.name}_{g}.csv",
                              [{**r, "chosen": bool(c)} for r, c in zip(curve.to_records(), chosen)])
                full = [dea.EfficiencyEstimate(r["id"], r["te_farrell"], r["te"], r["tebc"])
                        for r in self._scores(fr.name, g)]
                if [e.dmu_id for e in full] != list(sub.ids):
                    raise DataError(f"score file for {fr.name}/{g} does not match the panel rows")
                try:
                    cmp = orderalpha.trim_and_rerun(
                        sub, spec, curve.chosen_alpha, reps=cfg.bootstrap_reps,
                        seed=child_seed(cfg.seed, "outliers", fr.name, g), level=cfg.bootstrap_level,
                        jobs=self.jobs, full_estimates=full, group=g, whole_label=WHOLE)
                except DataError as exc:
                    raise DataError(f"{fr.name}/{g}: {exc}") from None
                _json_dump(d / f"trim_{fr.name}_{g}.json",
                           {"frontier": fr.name, "group": g, "chosen_alpha": curve.chosen_alpha,
                            "jump_size": curve.jump_size, "share_at_chosen": float(curve.share[chosen][0]),
                            "removed": cmp.removed})
                by_group[g] = {r.label: r for r in cmp.rows}
            labels = [WHOLE] + sorted({k for v in by_group.values() for k in v} - {WHOLE})
            for lab in labels:
                row = {"panel": fr.name, "stratum": lab}
                for g in self.groups:
                    r = by_group[g].get(lab)
                    row[f"{g}_diff_pct"] = r.diff_pct if r else None
                    row[f"{g}_delta_n"] = r.delta_n if r else None
                rows.append(row)
        cols = ["panel", "stratum"] + [f"{g}_{c}" for g in self.groups for c in ("diff_pct", "delta_n")]
        write_records(d / "tableC1.csv", rows, cols)

    # --- explain ---------------------------------------------------------------------------
    def _stage_explain(self, d: Path) -> None:
        cfg = self.cfg
        names = list(self.panel.covariate_names)
        a1 = {"logit": [], "gbt": []}
        for fr in cfg.frontiers:
            scores = {g: self._scores(fr.name, g) for g in self.groups}
            pooled = np.array([r["tebc"] for g in self.groups for r in scores[g]], dtype=float)
            threshold = float(pooled.mean())
            label_rows = []
            for g in self.groups:
                sub = self.group_panel(g)
                tebc = np.array([r["tebc"] for r in scores[g]], dtype=float)
                y = binarize_efficiency(tebc, threshold)
                label_rows += [{"id": r["id"], "group": g, "tebc": r["tebc"], "threshold": threshold, "label": int(v)}
                               for r, v in zip(scores[g], y)]
                counts = np.bincount(y, minlength=2)
                if counts.min() < cfg.k_folds:
                    raise DataError(f"{fr.name}/{g}: labels against the pooled mean {threshold:.6g} give "
                                    f"{counts[0]} low / {counts[1]} high units; each class needs at "
                                    f"least {cfg.k_folds} for {cfg.k_folds}-fold CV")
                X = sub.C
                tag = f"{fr.name}_{g}"
                row_label = f"{fr.name} - {g}"
                lrep = boost.logit_grid_search(X, y, cfg.logit_penalties, cfg.logit_C, k=cfg.k_folds,
                                               seed=child_seed(cfg.seed, "logit", fr.name, g), jobs=self.jobs)
                write_records(d / f"cv_{tag}_logit.csv", lrep.table())
                pen, C = lrep.chosen
                a1["logit"].append({"arm": "logit", "row": row_label, "chosen_parameters": f"{pen.upper()}, {C:g}",
                                    "AUROC": lrep.holdout_auroc, "AUPRC": lrep.holdout_auprc,
                                    "cv_AUROC": lrep.cv_auroc, "cv_AUPRC": lrep.cv_auprc})
                grep = boost.grid_search(X, y, cfg.gbt_configs(), k=cfg.k_folds,
                                         seed=child_seed(cfg.seed, "gbt", fr.name, g), jobs=self.jobs)
                write_records(d / f"cv_{tag}_gbt.csv", grep.table())
                a1["gbt"].append({"arm": "gbt", "row": row_label, "chosen_parameters": grep.chosen.label(),
                                  "AUROC": grep.holdout_auroc, "AUPRC": grep.holdout_auprc,
                                  "cv_AUROC": grep.cv_auroc, "cv_AUPRC": grep.cv_auprc})
                final = boost.train_gbt(X, y, grep.chosen, keys=("final", fr.name, g))
                (d / f"model_{tag}.json").write_text(final.to_json() + "\n", encoding="utf-8")
                phi, phi0 = treeshap.shap_matrix(final, X)
                ranking = treeshap.global_ranking(final, X, names, phi=phi)
                write_records(d / f"ranking_{tag}.csv", ranking.to_records()[:cfg.top_k])
                hi, lo = treeshap.extreme_profiles(final, X, sub.ids, names, k=cfg.profile_k, phi=phi)
                _json_dump(d / f"profiles_{tag}.json",
                           {"base_value": phi0, "highest_total": hi.to_dict(), "lowest_total": lo.to_dict()})
                shap_rows = [{"id": i, "label": int(v), "base_value": phi0, "total": float(p.sum()),
                              **{n: float(x) for n, x in zip(names, p)}} for i, v, p in zip(sub.ids, y, phi)]
                write_records(d / f"shap_{tag}.csv", shap_rows)
            write_records(d / f"labels_{fr.name}.csv", label_rows)
        write_records(d / "tableA1.csv", a1["logit"] + a1["gbt"], A1_COLUMNS)


SCORE_COLUMNS = ["id", "group", "stratum", "te", "tebc", "ci_low", "ci_high", "te_farrell", "bias",
                 "performance", "efficient"]


def stratum_summary(panel_label: str, group: str, strata, values) -> list[dict]:
    """Mean/SD/IQR/Min/Max/N of ``values`` for the whole group and per stratum (sorted)."""
    values = np.asarray(values, dtype=float)
    strata = np.array([s if s is not None else "" for s in strata], dtype=object)
    out = []
    labels = [(WHOLE, np.ones(values.size, dtype=bool))]
    labels += [(s, strata == s) for s in sorted(set(strata) - {""})]
    for lab, mask in labels:
        st = describe(values[mask])
        out.append({"panel": panel_label, "group": group, "stratum": lab, "Mean": st["mean"], "SD": st["sd"],
                    "IQR": st["iqr"], "Min": st["min"], "Max": st["max"], "N": st["n"]})
    return out


def density_grid(series: dict, points: int = DENSITY_POINTS) -> list[dict]:
    """Gaussian-KDE densities of every series on one shared grid (nan for degenerate series)."""
    allv = np.concatenate([np.asarray(v, float) for v in series.values()])
    lo, hi = float(allv.min()), float(allv.max())
    pad = 0.1 * (hi - lo) if hi > lo else 0.05
    grid = np.linspace(lo - pad, hi + pad, points)
    cols = {"x": grid}
    for name, v in series.items():
        v = np.asarray(v, float)
        if v.size < 2 or np.ptp(v) == 0:
            cols[name] = np.full(points, np.nan)
        else:
            cols[name] = gaussian_kde(v)(grid)
    return _columns_to_rows(cols)


def _columns_to_rows(cols: dict) -> list[dict]:
    keys = list(cols)
    n = len(cols[keys[0]])
    return [{k: float(cols[k][i]) for k in keys} for i in range(n)]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
