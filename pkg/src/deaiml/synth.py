"""Synthetic two-group panels with a known frontier and planted efficiency drivers.

Outputs are a Cobb-Douglas frontier in the inputs times an inefficiency
factor ``exp(-v)``. ``v`` is more dispersed in group B, rises with the
stratum index and with two covariates (``cov00`` strongly, ``cov01`` weakly), so a
classifier trained on the bias-corrected scores has a planted signal to find.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import FrontierConfig, PipelineConfig, config_to_toml
from .rng import stream
from .tabular import DmuPanel, Schema, write_csv

INPUTS = ("in_ses", "in_parents", "in_home", "in_books")
COGNITIVE = ("out_math", "out_read", "out_sci")
NONCOGNITIVE = ("out_wellbeing",)
EXPONENTS = np.array([0.2, 0.15, 0.1, 0.1])


def frontier_output(X: np.ndarray) -> np.ndarray:
    """Noise-free frontier level ``prod x_i^b_i`` (decreasing returns to scale)."""
    return np.prod(np.asarray(X, float) ** EXPONENTS, axis=1)


def synthetic_panel(n: int = 500, seed: int = 0, n_covariates: int = 42, n_strata: int = 4,
                    share_a: float = 0.4, missing_rate: float = 0.03,
                    labels: tuple[str, str] = ("private", "public")) -> DmuPanel:
    if n < 20 or n_covariates < 3 or n_strata < 1:
        raise ValueError("need n >= 20, at least 3 covariates and one stratum")
    rng = stream(seed, "synthetic-panel")
    in_a = rng.random(n) < share_a
    in_a[:2], in_a[2:4] = True, False  # both groups always present
    stratum = rng.integers(0, n_strata, size=n)
    X = rng.uniform(1.0, 10.0, size=(n, len(INPUTS)))
    C = rng.standard_normal((n, n_covariates))
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))
    # each group is scored against its own frontier, so the group gap shows up as spread
    spread = np.where(in_a, 1.0, 1.6)
    base = 0.03 + 0.02 * stratum
    v_cog = base + spread * (0.25 * sig(2.5 * C[:, 0]) + 0.08 * sig(2.0 * C[:, 1]) + rng.exponential(0.04, n))
    v_non = base + spread * (0.2 * sig(2.5 * C[:, 2]) + 0.05 * sig(2.0 * C[:, 0]) + rng.exponential(0.05, n))
    f = frontier_output(X)
    Y_cog = 100.0 * f[:, None] * np.exp(-v_cog)[:, None] * np.exp(-rng.exponential(0.03, (n, 3)))
    Y_non = 10.0 * f * np.exp(-v_non)
    Y = np.column_stack([Y_cog, Y_non])
    C[rng.random(C.shape) < missing_rate] = np.nan
    return DmuPanel.from_arrays(
        X, Y, ids=[f"u{i:05d}" for i in range(n)],
        groups=[labels[0] if a else labels[1] for a in in_a], covariates=C,
        strata=[f"region{k + 1}" for k in stratum], input_names=INPUTS,
        output_names=COGNITIVE + NONCOGNITIVE,
        covariate_names=[f"cov{j:02d}" for j in range(n_covariates)])


def quick_config(data_path: str, panel: DmuPanel, labels=("private", "public"), **kw) -> PipelineConfig:
    """A configuration sized for a laptop run over a synthetic panel."""
    schema = Schema("id", "group", panel.input_names, panel.output_names, panel.covariate_names, "stratum")
    cfg = PipelineConfig(
        data_path=str(data_path), schema=schema, group_a=labels[0], group_b=labels[1],
        frontiers=(FrontierConfig("cognitive", INPUTS, COGNITIVE),
                   FrontierConfig("noncognitive", INPUTS, NONCOGNITIVE)),
        bootstrap_reps=500, sd_reps=500,
        gbt_grid={"n_estimators": [100], "subsample": [0.7], "max_depth": [3, 5],
                  "learning_rate": [0.1]},
        logit_penalties=("l1", "l2"), logit_C=(0.1, 1.0, 10.0))
    return replace(cfg, **kw) if kw else cfg


def write_synthetic(directory, n: int = 500, seed: int = 0, **kw) -> tuple[Path, Path]:
    """Write ``panel.csv`` and ``config.toml`` into ``directory``; returns both paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    panel = synthetic_panel(n, seed)
    data = d / "panel.csv"
    write_csv(panel, data)
    cfg = quick_config(str(data), panel, seed=seed, **kw)
    conf = d / "config.toml"
    conf.write_text(config_to_toml(cfg, data_path="panel.csv"), encoding="utf-8")
    return data, conf
