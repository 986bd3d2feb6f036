"""Repeated-run benchmark: strategies x rates x patch sizes x seeds.

Produces one CSV whose rows are, told apart by ``row_type``:

``run``        one train/detect/evaluate cell
``aggregate``  mean and sample std of kappa over the seeds of a cell group
``ttest``      Welch test of each strategy's kappas against ``uc`` at one rate
``failed``     a cell that raised; the message is in ``error``
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import replace
from typing import Iterable, Sequence

from .errors import ChangeDetectionError
from .evalstat import aggregate, confusion, error_rates, kappa, welch_t_test
from .pipeline import RunConfig, detect, train_model
from .raster import ReferenceMap, TemporalPair
from .synthgen import SceneSpec, generate_scene

log = logging.getLogger(__name__)

COLUMNS = [
    "row_type", "patch", "strategy", "rate", "seed", "n_changed", "n_unchanged",
    "kappa", "fa", "missed", "oe", "pcc", "n_runs", "mean", "std",
    "baseline", "t", "dof", "p", "significant", "error",
]
BASELINE = "uc"


def run_bench(
    strategies: Sequence[str],
    rates: Sequence[float],
    seeds: Iterable[int],
    patches: Sequence[int] = (7,),
    base: RunConfig | None = None,
    scene: SceneSpec | None = None,
    data: tuple[TemporalPair, ReferenceMap] | None = None,
    workers: int = 1,
) -> list[dict]:
    """Run every cell and return CSV-ready rows.

    With ``data`` every seed reuses that scene (only sampling and training
    randomness vary). Otherwise seed ``s`` evaluates the synthetic scene
    ``replace(scene, seed=s)``.
    """
    base = base or RunConfig()
    scene = scene or SceneSpec()
    seeds = list(seeds)
    cache: dict[int, tuple[TemporalPair, ReferenceMap]] = {}

    def scene_for(seed):
        if data is not None:
            return data
        if seed not in cache:
            cache[seed] = generate_scene(replace(scene, seed=seed))
        return cache[seed]

    rows = []
    kappas: dict[tuple, list[float]] = {}
    for h in patches:
        for strategy in strategies:
            for rate in rates:
                key = (h, strategy, rate)
                kappas[key] = []
                for seed in seeds:
                    cell = {"patch": h, "strategy": strategy, "rate": rate, "seed": seed}
                    try:
                        block = h if base.block == base.patch else base.block
                        cfg = replace(base, patch=h, block=block, strategy=strategy, rate=rate, seed=seed)
                        pair, ref = scene_for(seed)
                        tr = train_model(pair, ref, cfg)
                        cm = confusion(detect(tr.model, pair, workers), ref)
                    except ChangeDetectionError as exc:
                        log.warning("cell %s failed: %s", cell, exc)
                        rows.append({"row_type": "failed", **cell, "error": f"{type(exc).__name__}: {exc}"})
                        continue
                    er = error_rates(cm)
                    k = kappa(cm)
                    kappas[key].append(k)
                    rows.append({
                        "row_type": "run", **cell,
                        "n_changed": tr.training_set.n_changed,
                        "n_unchanged": tr.training_set.n_unchanged,
                        "kappa": k, "fa": er["false_alarm"], "missed": er["missed"],
                        "oe": er["overall_error"], "pcc": er["pcc"],
                    })
                    log.info("%s kappa=%.4f", cell, k)

    for (h, strategy, rate), ks in kappas.items():
        row = {"row_type": "aggregate", "patch": h, "strategy": strategy, "rate": rate, "n_runs": len(ks)}
        if ks:
            agg = aggregate(ks)
            row.update(mean=agg.mean, std=agg.std)
        rows.append(row)

    if BASELINE in strategies:
        for h in patches:
            for rate in rates:
                for strategy in strategies:
                    if strategy == BASELINE:
                        continue
                    a, b = kappas[(h, BASELINE, rate)], kappas[(h, strategy, rate)]
                    row = {"row_type": "ttest", "patch": h, "strategy": strategy, "rate": rate, "baseline": BASELINE}
                    if len(a) < 2 or len(b) < 2:
                        row["error"] = "fewer than two successful runs"
                    else:
                        tt = welch_t_test(a, b)
                        row.update(t=tt.t_value, dof=tt.dof, p=tt.p_value, significant=int(tt.significant))
                    rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: list[dict], path: str | os.PathLike | None = None, stream=None) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            # absent keys are blank; present-but-undefined values are NA
            w.writerow(["" if c not in r else _fmt(r[c]) for c in COLUMNS])

    if stream is not None:
        emit(stream)
    else:
        with open(path, "w", newline="") as fh:
            emit(fh)


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
