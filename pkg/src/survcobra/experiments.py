"""Experiment runners behind the CLI: benchmark, tune, simulate, relevance.

Every runner derives all randomness from the config's master seed through
`derive_seed` with fixed purpose indices (0: dataset generation,
1: outer folds, 2: ensemble fits, 3: tuning, 4: query draws), collects its
results fully in memory, and only then writes the report files, so a
failing run leaves no partial outputs and a repeated run reproduces every
file byte for byte.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cobra import CobraParams, fit_cobra, predict_cobra, predict_cobra_batch
from .data import (
    SurvivalDataset,
    SyntheticConfig,
    generate_synthetic,
    kfold_split,
    load_csv,
    load_raw_csv,
    preprocess,
)
from .exceptions import ConfigError
from .learners import LearnerSpec, default_roster, fit
from .metrics import MetricReport, concordance_td, d_calibration, integrated_brier
from .relevance import relevance_study
from .seeds import derive_seed
from .tuning import SearchSpace, random_search

PROPOSED = "proposed"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see README for the JSON schema)."""

    dataset: dict
    roster: tuple[LearnerSpec, ...]
    fixed_params: dict | None
    search: dict | None
    folds: int
    inner_folds: int
    seed: int
    queries: int
    dcal_bins: int
    dcal_level: float
    out_dir: str
    jobs: int

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("the config root must be a JSON object")
        known = {
            "dataset",
            "roster",
            "params",
            "search",
            "folds",
            "inner_folds",
            "seed",
            "queries",
            "dcal_bins",
            "dcal_level",
            "out_dir",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        dataset = raw.get("dataset")
        if not isinstance(dataset, dict) or "kind" not in dataset:
            raise ConfigError("config needs a 'dataset' object with a 'kind'")
        if dataset["kind"] not in ("synthetic", "csv"):
            raise ConfigError(f"dataset kind must be 'synthetic' or 'csv', got {dataset['kind']!r}")

        roster_cfg = raw.get("roster")
        if roster_cfg is None:
            roster = default_roster()
        else:
            try:
                roster = tuple(
                    LearnerSpec(entry["kind"], {k: v for k, v in entry.items() if k != "kind"})
                    for entry in roster_cfg
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid roster entry: {exc}") from exc

        fixed = raw.get("params")
        search = raw.get("search")
        if (fixed is None) == (search is None):
            raise ConfigError("supply exactly one of 'params' and 'search'")
        if fixed is not None:
            missing = {"epsilon", "alpha", "l_fraction"} - set(fixed)
            if missing:
                raise ConfigError(f"'params' needs keys epsilon, alpha, l_fraction (missing {sorted(missing)})")
        if search is not None and "trials" not in search:
            raise ConfigError("'search' needs a 'trials' entry")

        return ExperimentConfig(
            dataset=dataset,
            roster=roster,
            fixed_params=fixed,
            search=search,
            folds=int(raw.get("folds", 5)),
            inner_folds=int(raw.get("inner_folds", 3)),
            seed=int(raw.get("seed", 0)),
            queries=int(raw.get("queries", 100)),
            dcal_bins=int(raw.get("dcal_bins", 10)),
            dcal_level=float(raw.get("dcal_level", 0.05)),
            out_dir=str(raw.get("out_dir", "survcobra-out")),
            jobs=1,
        )

    def with_overrides(self, seed=None, out_dir=None, jobs=None) -> "ExperimentConfig":
        from dataclasses import replace

        updates = {}
        if seed is not None:
            updates["seed"] = int(seed)
        if out_dir is not None:
            updates["out_dir"] = str(out_dir)
        if jobs is not None:
            if int(jobs) < 1:
                raise ConfigError("--jobs must be at least 1")
            updates["jobs"] = int(jobs)
        return replace(self, **updates) if updates else self


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(raw)


def load_dataset(cfg: ExperimentConfig) -> SurvivalDataset:
    spec = cfg.dataset
    if spec["kind"] == "synthetic":
        seed = spec.get("seed")
        return generate_synthetic(
            SyntheticConfig(
                n=int(spec.get("n", 2000)),
                censor_fraction=float(spec.get("censor_fraction", 0.4)),
                dim=int(spec.get("dim", 9)),
                seed=int(seed) if seed is not None else derive_seed(cfg.seed, 0),
            )
        )
    path = spec.get("path")
    if not path:
        raise ConfigError("csv dataset needs a 'path'")
    time_col = spec.get("time_col")
    event_col = spec.get("event_col")
    if not time_col or not event_col:
        raise ConfigError("csv dataset needs 'time_col' and 'event_col'")
    if "numeric" in spec or "categorical" in spec:
        table = load_raw_csv(path)
        return preprocess(
            table,
            numeric=spec.get("numeric", []),
            categorical=spec.get("categorical", []),
            time_col=time_col,
            event_col=event_col,
        )
    return load_csv(path, time_col, event_col)


def _resolve_params(cfg: ExperimentConfig, train: SurvivalDataset, tune_seed: int):
    """Fixed params from the config, or the best triple of a fresh search."""
    if cfg.fixed_params is not None:
        p = cfg.fixed_params
        params = CobraParams(
            float(p["epsilon"]), float(p["alpha"]), float(p["l_fraction"]), cfg.roster
        )
        return params, None
    search_cfg = cfg.search
    space = SearchSpace(
        trials=int(search_cfg["trials"]),
        objective=str(search_cfg.get("objective", "ibs")),
        seed=tune_seed,
    )
    best, trace = random_search(space, train, inner_folds=cfg.inner_folds, roster=cfg.roster)
    return best.params, (best, trace)


def _fold_metrics(train, test, cfg: ExperimentConfig, fold_id: int):
    """Metric reports for the five standalone learners and the ensemble."""
    rows = {}
    for spec in cfg.roster:
        model = fit(spec, train)
        curves = [model.predict_curve(x) for x in test.x]
        rows[spec.kind] = _report(curves, test, cfg, fold_id)
    params, _ = _resolve_params(cfg, train, derive_seed(cfg.seed, 3, fold_id))
    ensemble = fit_cobra(train, params, derive_seed(cfg.seed, 2, fold_id))
    curves = predict_cobra_batch(ensemble, test.x)
    rows[PROPOSED] = _report(curves, test, cfg, fold_id)
    return rows


def _report(curves, test, cfg, fold_id) -> MetricReport:
    passed, pvalue = d_calibration(
        curves, test.time, test.event, bins=cfg.dcal_bins, level=cfg.dcal_level
    )
    return MetricReport(
        concordance=concordance_td(curves, test.time, test.event),
        ibs=integrated_brier(curves, test.time, test.event),
        dcal_pass=passed,
        dcal_pvalue=pvalue,
        fold_id=fold_id,
    )


def _bench_fold_worker(raw_config: dict, fold_id: int):
    cfg = ExperimentConfig.from_dict(raw_config)
    data = load_dataset(cfg)
    train, test = kfold_split(data, cfg.folds, derive_seed(cfg.seed, 1))[fold_id]
    reports = _fold_metrics(train, test, cfg, fold_id)
    return {
        name: (r.concordance, r.ibs, r.dcal_pass, r.dcal_pvalue) for name, r in reports.items()
    }


def run_bench(cfg: ExperimentConfig, raw_config: dict) -> dict:
    """Outer cross-validation over all models; returns {model: [MetricReport]}."""
    data = load_dataset(cfg)
    pairs = kfold_split(data, cfg.folds, derive_seed(cfg.seed, 1))
    model_names = [spec.kind for spec in cfg.roster] + [PROPOSED]
    results: dict[str, list[MetricReport]] = {name: [] for name in model_names}
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_bench_fold_worker, raw_config, k) for k in range(cfg.folds)]
            fold_rows = [f.result() for f in futures]  # fold order preserved
        for fold_id, row in enumerate(fold_rows):
            for name, (c, ibs, dpass, dp) in row.items():
                results[name].append(MetricReport(c, ibs, dpass, dp, fold_id))
    else:
        for fold_id, (train, test) in enumerate(pairs):
            for name, report in _fold_metrics(train, test, cfg, fold_id).items():
                results[name].append(report)
    return results


def _dataset_label(cfg: ExperimentConfig) -> str:
    if cfg.dataset["kind"] == "synthetic":
        return "synthetic"
    return Path(cfg.dataset["path"]).stem


def write_bench_reports(cfg: ExperimentConfig, results: dict, out: Path):
    label = _dataset_label(cfg)
    fold_ids = list(range(cfg.folds))
    with _open(out / "metrics.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "model", "fold", "concordance", "ibs", "dcal_pass", "dcal_pvalue"])
        for name, reports in results.items():
            for r in reports:
                w.writerow([label, name, r.fold_id, repr(r.concordance), repr(r.ibs), int(r.dcal_pass), repr(r.dcal_pvalue)])
    for metric, filename in (("concordance", "concordance.csv"), ("ibs", "ibs.csv")):
        with _open(out / filename) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model"] + [f"fold_{k}" for k in fold_ids] + ["mean"])
            for name, reports in results.items():
                values = [getattr(r, metric) for r in reports]
                w.writerow([name] + [repr(v) for v in values] + [repr(float(np.mean(values)))])
    with _open(out / "dcalibration.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "passes", "folds"])
        for name, reports in results.items():
            w.writerow([name, sum(int(r.dcal_pass) for r in reports), len(reports)])


def run_simulate(cfg: ExperimentConfig):
    """Synthetic-population study: fit the ensemble, score covariate relevance."""
    data = load_dataset(cfg)
    params, tuning = _resolve_params(cfg, data, derive_seed(cfg.seed, 3))
    model = fit_cobra(data, params, derive_seed(cfg.seed, 2))
    dim = data.n_features
    query_cfg = SyntheticConfig(
        n=cfg.queries, censor_fraction=0.0, dim=dim, seed=derive_seed(cfg.seed, 4)
    )
    queries = generate_synthetic(query_cfg).x
    study = relevance_study(model, queries)
    sample = queries[: min(5, len(queries))]
    curves = [predict_cobra(model, q) for q in sample]
    return model, params, study, curves, tuning


def run_relevance(cfg: ExperimentConfig):
    """Relevance study on a user dataset; queries are held-out records."""
    data = load_dataset(cfg)
    if cfg.queries >= data.n:
        raise ConfigError(f"queries ({cfg.queries}) must be below the record count ({data.n})")
    rng = np.random.default_rng(derive_seed(cfg.seed, 4))
    perm = rng.permutation(data.n)
    held = np.sort(perm[: cfg.queries])
    rest = np.sort(perm[cfg.queries :])
    train = data.subset(rest)
    queries = data.x[held]
    params, tuning = _resolve_params(cfg, train, derive_seed(cfg.seed, 3))
    model = fit_cobra(train, params, derive_seed(cfg.seed, 2))
    study = relevance_study(model, queries)
    sample = queries[: min(5, len(queries))]
    curves = [predict_cobra(model, q) for q in sample]
    return model, params, study, curves, tuning


def write_relevance_reports(cfg: ExperimentConfig, feature_names, study, curves, out: Path):
    order = study.ranking()
    with _open(out / "relevance.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["covariate", "aggregate_score", "rank"])
        ranks = np.empty(len(feature_names), dtype=int)
        ranks[order] = np.arange(1, len(feature_names) + 1)
        for j, name in enumerate(feature_names):
            w.writerow([name, repr(float(study.aggregate[j])), int(ranks[j])])
    with _open(out / "relevance_per_query.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "degenerate", "intercept"] + list(feature_names))
        for q in range(study.per_query.shape[0]):
            row = [q, int(study.degenerate[q])] + [repr(float(v)) for v in study.per_query[q]]
            w.writerow(row)
    with _open(out / "curves.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "time", "value"])
        for q, curve in enumerate(curves):
            for t, v in curve.to_rows():
                w.writerow([q, repr(float(t)), repr(float(v))])


def run_tune(cfg: ExperimentConfig):
    if cfg.search is None:
        raise ConfigError("the tune command needs a 'search' section")
    data = load_dataset(cfg)
    space = SearchSpace(
        trials=int(cfg.search["trials"]),
        objective=str(cfg.search.get("objective", "ibs")),
        seed=derive_seed(cfg.seed, 3),
    )
    best, trace = random_search(space, data, inner_folds=cfg.inner_folds, roster=cfg.roster)
    return best, trace


def write_tune_reports(cfg: ExperimentConfig, best, trace, out: Path):
    with _open(out / "trials.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "epsilon", "alpha", "l_fraction", "objective", "error"])
        for t in trace:
            w.writerow(
                [
                    t.trial_index,
                    repr(t.params.epsilon),
                    repr(t.params.alpha),
                    repr(t.params.l_fraction),
                    "nan" if t.failed else repr(t.objective_value),
                    t.error or "",
                ]
            )
    payload = {
        "epsilon": best.params.epsilon,
        "alpha": best.params.alpha,
        "l_fraction": best.params.l_fraction,
        "objective": cfg.search.get("objective", "ibs") if cfg.search else "ibs",
        "objective_value": best.objective_value,
        "trial": best.trial_index,
        "trials": len(trace),
    }
    _write_json(out / "best_params.json", payload)


def write_run_metadata(cfg: ExperimentConfig, command: str, raw_config: dict, out: Path, extra=None):
    payload = {
        "command": command,
        "master_seed": cfg.seed,
        "config": raw_config,
    }
    if extra:
        payload.update(extra)
    _write_json(out / "run.json", payload)


def _open(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
