"""Markdown rendering of the stage outputs in fixed table layouts."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .config import PipelineConfig
from .errors import DataError
from .pipeline import STAGES, TABLE5_ROWS
from .tabular import read_records

TEXT = ("group", "stratum", "panel", "row", "arm", "chosen_parameters", "feature", "id")


def _fmt(v, digits=3) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.{digits}f}"
    return str(v)


def _table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return lines + [""]


def render_report(cfg: PipelineConfig, out) -> str:
    out = Path(out)
    present = [s for s in STAGES if (out / s / "_stage.json").is_file()]
    if not present:
        raise DataError(f"no stage outputs under {out}; run the pipeline first")
    lines = ["# Efficiency analysis report", ""]
    a, b = cfg.group_a, cfg.group_b
    if "dea" in present:
        for fr in cfg.frontiers:
            d = out / "dea"
            lines += [f"## Efficiency scores: {fr.name} outputs", "",
                      "Panel A: whole sample by group (means over units; CI bounds on the efficiency scale)", ""]
            pa = read_records(d / f"table_{fr.name}_panelA.csv", TEXT)
            lines += _table(["", "TE", "TEBC", "lower", "upper", "performance", "N"],
                            [[r["group"]] + [_fmt(r[k]) for k in ("TE", "TEBC", "lower", "upper", "performance")]
                             + [str(r["N"])] for r in pa])
            st = read_records(d / f"table_{fr.name}_strata.csv", TEXT)
            for label, g in (("B", a), ("C", b)):
                lines += [f"Panel {label}: {g}, bias-corrected scores by stratum", ""]
                lines += _table(["", "Mean", "SD", "IQR", "Min", "Max", "N"],
                                [[r["stratum"]] + [_fmt(r[k]) for k in ("Mean", "SD", "IQR", "Min", "Max")]
                                 + [str(r["N"])] for r in st if r["group"] == g])
    if "sdtest" in present:
        lines += ["## Stochastic dominance tests on bias-corrected scores", ""]
        for dom, sub in ((a, b), (b, a)):
            rows = read_records(out / "sdtest" / f"table5_{dom}_dominates_{sub}.csv", TEXT)
            cols = [c for c in rows[0] if c != "row"]
            lines += [f"H0: {dom} dominates {sub} at order s", ""]
            lines += _table([""] + cols, [[r["row"]] + [_fmt(r[c], 4) for c in cols] for r in rows])
    if "outliers" in present:
        lines += ["## Scores excluding super-efficient units", ""]
        rows = read_records(out / "outliers" / "tableC1.csv", TEXT)
        for fr in cfg.frontiers:
            alphas = []
            for g in (a, b):
                info = json.loads((out / "outliers" / f"trim_{fr.name}_{g}.json").read_text())
                alphas.append(f"{g}: order-alpha = {info['chosen_alpha']:g}, share = {info['share_at_chosen']:.3f}")
            lines += [f"Panel: {fr.name} outputs ({'; '.join(alphas)})", ""]
            lines += _table(["", f"{a} difference (%)", f"{a} delta N", f"{b} difference (%)", f"{b} delta N"],
                            [[r["stratum"], _fmt(r[f"{a}_diff_pct"], 2), _fmt(r[f"{a}_delta_n"]),
                              _fmt(r[f"{b}_diff_pct"], 2), _fmt(r[f"{b}_delta_n"])]
                             for r in rows if r["panel"] == fr.name])
    if "explain" in present:
        d = out / "explain"
        lines += ["## Classifier grid search", "",
                  "AUROC/AUPRC on the 20% holdout; CV columns are mean validation scores of the chosen candidate. "
                  f"Tree settings: lambda = {cfg.reg_lambda:g}, gamma = {cfg.gamma:g}, "
                  f"minimum child cover = {cfg.min_child_cover}.", ""]
        rows = read_records(d / "tableA1.csv", TEXT)
        for arm, title in (("logit", "Penalized logit"), ("gbt", "Gradient boosted trees")):
            lines += [title, ""]
            lines += _table(["", "Chosen parameters", "AUROC", "AUPRC", "CV AUROC", "CV AUPRC"],
                            [[r["row"], r["chosen_parameters"]] + [_fmt(r[k]) for k in ("AUROC", "AUPRC", "cv_AUROC", "cv_AUPRC")]
                             for r in rows if r["arm"] == arm])
        lines += ["## Leading features by mean |SHAP|", ""]
        for fr in cfg.frontiers:
            for g in (a, b):
                rk = read_records(d / f"ranking_{fr.name}_{g}.csv", TEXT)[:10]
                lines += [f"{fr.name} - {g}", ""]
                lines += _table(["rank", "feature", "mean abs SHAP"],
                                [[str(r["rank"]), r["feature"], _fmt(r["mean_abs_shap"], 4)] for r in rk])
    return "\n".join(lines)
