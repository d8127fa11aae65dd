"""Monte Carlo ensembles: seeded independent runs, empirical quantile bands
and maximal-deviation tables.

Run seeds derive deterministically from a master seed (master + run index),
so an ensemble is reproducible and independent of the worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from . import output
from .problem import Problem


def quantile_band(samples: np.ndarray, level: float, axis: int = 0):
    """Symmetric band around the median containing `level` of the mass:
    the ((1-level)/2, (1+level)/2) empirical quantiles with the linear
    interpolation estimator."""
    lo = (1.0 - level) / 2.0
    hi = (1.0 + level) / 2.0
    return (np.quantile(samples, lo, axis=axis, method="linear"),
            np.quantile(samples, hi, axis=axis, method="linear"))


def _run_one(problem_dir, seed, sigma, step_s):
    problem = Problem.load(problem_dir, step_s)
    result = problem.simulate(seed=seed, sigma=sigma)
    if result.status != "ok":
        return seed, None
    return seed, output.build_output_document(problem, result)


@dataclass
class EnsembleResult:
    sigma: float | None
    seeds: list
    documents: list        # per successful run, aligned with seeds
    failed_seeds: list

    def series(self, key: str) -> np.ndarray:
        """Stacked series over runs; shape (runs, time, ...)."""
        arrays = [output.resolve_series(doc, key)[2] for doc in self.documents]
        return np.stack(arrays)


def run_ensemble(problem_dir, runs: int, master_seed: int,
                 sigma: float | None = None, workers: int = 1,
                 step_s: float | None = None) -> EnsembleResult:
    seeds = [master_seed + i for i in range(runs)]
    docs_by_seed = {}
    failed = []
    if workers <= 1:
        results = [_run_one(problem_dir, s, sigma, step_s) for s in seeds]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, problem_dir, s, sigma, step_s)
                       for s in seeds]
            results = [f.result() for f in futures]
    for seed, doc in results:
        if doc is None:
            failed.append(seed)
        else:
            docs_by_seed[seed] = doc
    ordered = [docs_by_seed[s] for s in seeds if s in docs_by_seed]
    return EnsembleResult(sigma, [s for s in seeds if s in docs_by_seed],
                          ordered, failed)


def quantile_rows(ensemble: EnsembleResult, key: str, levels) -> list:
    """Long-format table rows: one per (time, location) with the median and
    the lo/hi band per level."""
    series = ensemble.series(key)          # (runs, time[, loc])
    if series.ndim == 2:
        series = series[:, :, None]
    doc = ensemble.documents[0]
    ident, field, _ = output.resolve_series(doc, key)
    times = doc["components"][ident]["time_s"]
    xs = doc["components"][ident].get("x_m")
    median = np.quantile(series, 0.5, axis=0, method="linear")
    bands = {lv: quantile_band(series, lv, axis=0) for lv in levels}
    rows = []
    for j, t in enumerate(times):
        for loc in range(series.shape[2]):
            row = {"time_s": t,
                   "location": xs[loc] if xs is not None else "",
                   "median": median[j, loc]}
            for lv in levels:
                lo, hi = bands[lv]
                row[f"lo{int(round(lv * 100))}"] = lo[j, loc]
                row[f"hi{int(round(lv * 100))}"] = hi[j, loc]
            rows.append(row)
    return rows


def max_deviation_rows(baseline_doc: dict, ensemble_docs) -> list:
    """Per component/field/location maximum of |value - baseline| over time
    and over the whole ensemble; invariant to run ordering."""
    rows = []
    base_components = baseline_doc["components"]
    for ident in sorted(base_components):
        comp = base_components[ident]
        for field in sorted(comp):
            if field in ("kind", "time_s", "x_m"):
                continue
            base = np.asarray(comp[field], dtype=float)
            worst = np.zeros_like(base)
            for doc in ensemble_docs:
                other = np.asarray(doc["components"][ident][field], dtype=float)
                worst = np.maximum(worst, np.abs(other - base))
            over_time = np.max(worst, axis=0) if worst.ndim > 0 else worst
            xs = comp.get("x_m")
            if np.ndim(over_time) == 0:
                rows.append({"component": ident, "field": field,
                             "location": "", "max_abs_deviation": float(over_time)})
            else:
                for loc, val in enumerate(over_time):
                    rows.append({"component": ident, "field": field,
                                 "location": xs[loc] if xs else loc,
                                 "max_abs_deviation": float(val)})
    return rows
