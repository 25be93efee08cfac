"""End-to-end orchestration with resumable, byte-reproducible stage artifacts.

Stages and what they leave in the output directory:

* ``prep``: ingest, impute, outlier adjustment, ANOVA, scaling, SA selection,
  split and SMOTE.  Writes ``missing_counts.csv``, ``cuckoo_log.csv``
  (convergence), ``cuckoo_adjustments.csv``, ``anova.csv``, ``sa_trace.csv``
  and the arrays under ``state/``.
* ``train``: grid search with stratified CV, then a final fit per model.
  Writes ``grid_<model>.csv``, ``cv_<model>.csv`` and ``model_<model>.bin``.
* ``evaluate``: held-out metrics from the reloaded models.  Writes
  ``metrics_<model>.csv`` and ``roc_<model>.csv``.
* ``explain``: exact SHAP for the boosted model on the test rows.  Writes
  ``shap_values.csv`` and ``shap_ranking.csv``.
* ``report``: ``report.json`` with every summary and artifact digests.

Wall-clock timings go to ``timings.json``, which is the only file that is not
reproducible byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .anneal import sa_select
from .baselines import train_forest, train_logreg, train_mlp
from .boost import BoostParams, fit_boost
from .config import MODEL_NAMES, PipelineConfig
from .errors import CkdError, StageError
from .evaluate import accuracy, evaluate_predictions, grid_search, kfold_cv
from .explain import summarize, tree_shap
from .ingest import encode, load_dataset, missing_counts
from .outliers import adjust_outliers
from .persist import load_model, save_model
from .preprocess import anova_screen, apply_standardize, fit_standardize, knn_impute, mode_impute
from .resample import Split, smote_with_parents, split_indices
from .seeds import derive_seed

STAGES = ("prep", "train", "evaluate", "explain", "report")
TIMINGS_FILE = "timings.json"


# -- output helpers ----------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return "none"
    return str(v)


def _jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the file stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Workspace:
    """Output directory with deterministic writers."""

    def __init__(self, out_dir):
        self.root = Path(out_dir)
        self.state = self.root / "state"

    def ensure(self):
        self.state.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        (self.root / name).write_text(buf.getvalue())

    def write_json(self, name, obj, state=False):
        ((self.state if state else self.root) / name).write_text(dumps_json(obj))

    def read_json(self, name, stage, state=True):
        path = (self.state if state else self.root) / name
        if not path.exists():
            raise StageError(stage, f"missing {path}; run the earlier stages first")
        return json.loads(path.read_text())

    def save_array(self, name, arr):
        np.save(self.state / f"{name}.npy", np.ascontiguousarray(arr), allow_pickle=False)

    def load_array(self, name, stage):
        path = self.state / f"{name}.npy"
        if not path.exists():
            raise StageError(stage, f"missing {path}; run the earlier stages first")
        return np.load(path, allow_pickle=False)

    def digests(self):
        """SHA-256 of every reproducible artifact, keyed by relative path."""
        out = {}
        for path in sorted(self.root.rglob("*")):
            rel = path.relative_to(self.root).as_posix()
            if path.is_file() and rel not in ("report.json", TIMINGS_FILE):
                out[rel] = hashlib.sha256(path.read_bytes()).hexdigest()
        return out

    def record_times(self, entries):
        path = self.root / TIMINGS_FILE
        timings = json.loads(path.read_text()) if path.exists() else {}
        timings.update(entries)
        path.write_text(dumps_json(timings))


@contextmanager
def _stage(name, partial):
    try:
        yield
    except StageError:
        raise
    except (CkdError, OSError, ValueError, ArithmeticError) as exc:
        raise StageError(name, exc, partial) from exc


def _seed(cfg: PipelineConfig, label, index=0):
    return derive_seed(cfg.run.master_seed, label, index)


# -- prep --------------------------------------------------------------------


def run_prep(cfg: PipelineConfig, ws: Workspace):
    """Data preparation in workflow order; returns the prep summary."""
    ws.ensure()
    summary = {}
    leak_safe = cfg.run.leakage_safe

    with _stage("ingest", summary):
        dataset = load_dataset(cfg.data.path, cfg.data.format, cfg.data.target)
        counts = missing_counts(dataset)
    ws.write_csv("missing_counts.csv", ["feature", "missing"], counts)
    summary["dataset"] = {"rows": dataset.n_rows, "columns": len(dataset.schemas)}
    summary["missing_counts"] = dict(counts)

    with _stage("encode", summary):
        matrix = encode(dataset, drop=cfg.data.drop)
    summary["label_mapping"] = matrix.label_mapping
    summary["class_counts"] = {str(c): int((matrix.labels == c).sum()) for c in np.unique(matrix.labels)}

    with _stage("impute", summary):
        matrix = mode_impute(matrix, matrix.categorical)
        matrix = knn_impute(matrix, cfg.impute_config())

    logs = []
    if cfg.cuckoo.enabled:
        with _stage("cuckoo", summary):
            matrix, logs = adjust_outliers(matrix, cfg.cuckoo_config(_seed(cfg, "cuckoo")))
    ws.write_csv(
        "cuckoo_log.csv",
        ["column", "iteration", "best_fitness"],
        [(log.column, i, f) for log in logs for i, f in enumerate(log.best_fitness)],
    )
    ws.write_csv(
        "cuckoo_adjustments.csv",
        ["column", "row", "original", "adjusted", "lower_fence", "upper_fence", "skipped"],
        [
            (log.column, r, o, a, log.fences.lower, log.fences.upper, log.skipped)
            for log in logs
            for r, o, a in zip(log.outlier_rows, log.original, log.adjusted)
        ],
    )
    summary["outliers"] = {
        log.column: {
            "count": len(log.outlier_rows),
            "skipped": log.skipped,
            "final_objective": log.best_fitness[-1] if log.best_fitness else None,
        }
        for log in logs
    }

    # The split depends only on labels and seed, so both orderings share the same test rows.
    def do_split():
        with _stage("split", summary):
            return split_indices(matrix.labels, cfg.split_config(_seed(cfg, "split")))

    fit_rows = np.arange(matrix.n_rows)
    if leak_safe:
        train_idx, test_idx = do_split()
        fit_rows = train_idx

    fit_view = matrix.take_rows(fit_rows)
    kept = list(matrix.feature_names)
    anova_rows = []
    if cfg.anova.enabled:
        with _stage("anova", summary):
            kept, results = anova_screen(fit_view, cfg.anova.alpha)
        anova_rows = [
            (r.feature_name, r.f_stat, r.p_value, r.df_between, r.df_within, r.feature_name in kept) for r in results
        ]
    ws.write_csv("anova.csv", ["feature", "f_stat", "p_value", "df_between", "df_within", "kept"], anova_rows)
    summary["anova"] = {"alpha": cfg.anova.alpha, "kept": kept, "dropped": [n for n in matrix.feature_names if n not in kept]}

    with _stage("standardize", summary):
        screened = matrix.select(kept)
        scaler = fit_standardize(screened.values[fit_rows], kept)
        X_all = apply_standardize(screened.values, scaler)

    mask = np.ones(len(kept), dtype=bool)
    trace_rows = []
    if cfg.anneal.enabled:
        with _stage("anneal", summary):
            mask, trace = sa_select(X_all[fit_rows], matrix.labels[fit_rows], cfg.sa_config(_seed(cfg, "anneal")))
        trace_rows = trace.rows()
    ws.write_csv("sa_trace.csv", ["iteration", "avg_fitness", "max_fitness"], trace_rows)
    selected = [n for n, m in zip(kept, mask) if m]
    summary["selection"] = {"features": kept, "mask": [bool(m) for m in mask], "selected": selected}

    if not leak_safe:
        train_idx, test_idx = do_split()
    X = X_all[:, mask]
    y = matrix.labels
    split = Split(train_idx, test_idx, X[train_idx], y[train_idx], X[test_idx], y[test_idx])
    summary["split"] = {
        "test_fraction": cfg.split.test_fraction,
        "train_index": train_idx,
        "test_index": test_idx,
        "train_counts": {str(c): int((split.y_train == c).sum()) for c in np.unique(y)},
        "test_counts": {str(c): int((split.y_test == c).sum()) for c in np.unique(y)},
    }

    X_train, y_train = split.X_train, split.y_train
    parents = np.empty((0, 2), dtype=np.int64)
    if cfg.smote.enabled:
        with _stage("smote", summary):
            X_train, y_train, parents = smote_with_parents(X_train, y_train, cfg.smote_config(_seed(cfg, "smote")))
    summary["smote"] = {
        "enabled": cfg.smote.enabled,
        "counts": {str(c): int((y_train == c).sum()) for c in np.unique(y_train)},
        "synthetic_rows": int(parents.shape[0]),
    }

    ws.save_array("X_train", X_train)
    ws.save_array("y_train", y_train)
    ws.save_array("X_train_original", split.X_train)
    ws.save_array("smote_parents", parents)
    ws.save_array("X_test", split.X_test)
    ws.save_array("y_test", split.y_test)
    ws.write_json("prep.json", summary, state=True)
    return summary


# -- train -------------------------------------------------------------------


def _max_depth(v):
    return None if v in (None, "none", 0) else int(v)


def model_trainer(name, params, seed, n_jobs=1):
    """Return ``trainer(X, y)`` for a model family and one parameter cell."""
    p = dict(params)
    if name == "logreg":
        return lambda X, y: train_logreg(X, y, l2=p.get("l2", 0.01), lr=p.get("lr", 0.1), epochs=p.get("epochs", 200))
    if name == "mlp":
        return lambda X, y: train_mlp(
            X,
            y,
            hidden=p.get("hidden", 32),
            lr=p.get("lr", 0.01),
            epochs=p.get("epochs", 200),
            l2=p.get("l2", 1e-4),
            seed=seed,
            batch_size=p.get("batch_size", 32),
        )
    if name == "forest":
        return lambda X, y: train_forest(
            X,
            y,
            n_trees=p.get("n_trees", 100),
            max_depth=_max_depth(p.get("max_depth")),
            min_leaf=p.get("min_leaf", 1),
            seed=seed,
            max_features=p.get("max_features", "sqrt"),
            n_jobs=n_jobs,
        )
    if name == "boost":
        keys = ("iterations", "depth", "learning_rate", "l2_leaf_reg", "border_count")
        bp = BoostParams(**{k: p[k] for k in keys if k in p}, seed=seed)
        return lambda X, y: fit_boost(X, y, bp)
    raise StageError("train", f"unknown model {name!r}")


def run_train(cfg: PipelineConfig, ws: Workspace):
    summary = ws.read_json("prep.json", "train")
    X = ws.load_array("X_train", "train")
    y = ws.load_array("y_train", "train")
    names = summary["selection"]["selected"]
    out = {}
    timings = {}
    cv_seed = _seed(cfg, "cv")
    for name in [m for m in MODEL_NAMES if m in cfg.models]:
        spec = cfg.models[name]
        seed = _seed(cfg, "model", MODEL_NAMES.index(name))
        tag = f"train:{name}"
        with _stage(tag, {"prep": summary, "models": out}):

            def family(cell, name=name, spec=spec, seed=seed):
                return model_trainer(name, {**spec.fixed, **cell}, seed)

            if spec.grid:
                best, table = grid_search(spec.grid, family, X, y, cfg.cv.folds, cv_seed, cfg.run.n_jobs)
            else:
                folds = kfold_cv(X, y, cfg.cv.folds, cv_seed, family({}), cfg.run.n_jobs)
                best, table = {}, [{"params": {}, "fold_accuracies": folds, "mean_accuracy": float(np.mean(folds))}]
            params = {**spec.fixed, **best}
            start = time.perf_counter()
            model = model_trainer(name, params, seed, cfg.run.n_jobs)(X, y)
            timings[f"fit:{name}"] = time.perf_counter() - start
            train_acc = accuracy(y, (np.asarray(model.predict_proba(X)) >= 0.5).astype(np.int64))
        save_model(ws.root / f"model_{name}.bin", model, names)
        keys = sorted(spec.grid)
        ws.write_csv(
            f"grid_{name}.csv",
            keys + ["mean_accuracy"] + [f"fold_{i}" for i in range(cfg.cv.folds)],
            [[row["params"][k] for k in keys] + [row["mean_accuracy"]] + list(row["fold_accuracies"]) for row in table],
        )
        best_row = next(row for row in table if row["params"] == best)
        ws.write_csv(f"cv_{name}.csv", ["fold", "accuracy"], list(enumerate(best_row["fold_accuracies"])))
        out[name] = {
            "best_params": params,
            "cv_mean_accuracy": best_row["mean_accuracy"],
            "cv_fold_accuracies": best_row["fold_accuracies"],
            "grid": table,
            "train_accuracy": train_acc,
        }
    ws.write_json("train.json", out, state=True)
    ws.record_times(timings)
    return out


# -- evaluate ------------------------------------------------------------------


def _metric_rows(report):
    rows = [("accuracy", report.accuracy), ("auc", report.auc), ("kappa", report.kappa)]
    for label, m in sorted(report.per_class.items()):
        rows += [(f"precision_{label}", m.precision), (f"recall_{label}", m.recall), (f"f1_{label}", m.f1)]
    cm = report.confusion
    rows += [("tp", cm.tp), ("fp", cm.fp), ("fn", cm.fn), ("tn", cm.tn)]
    return rows


def run_evaluate(cfg: PipelineConfig, ws: Workspace):
    X_test = ws.load_array("X_test", "evaluate")
    y_test = ws.load_array("y_test", "evaluate")
    trained = ws.read_json("train.json", "evaluate")
    out = {}
    for name in trained:
        with _stage(f"evaluate:{name}", {"models": out}):
            artifact = load_model(ws.root / f"model_{name}.bin")
            report = evaluate_predictions(y_test, artifact.predict_proba(X_test), positive_label=1)
        ws.write_csv(f"metrics_{name}.csv", ["metric", "value"], _metric_rows(report))
        ws.write_csv(f"roc_{name}.csv", ["fpr", "tpr"], report.roc)
        out[name] = report.to_dict()
    ws.write_json("evaluate.json", out, state=True)
    return out


# -- explain -----------------------------------------------------------------


def run_explain(cfg: PipelineConfig, ws: Workspace):
    if "boost" not in cfg.models:
        ws.write_json("explain.json", {}, state=True)
        return {}
    X_test = ws.load_array("X_test", "explain")
    background = ws.load_array("X_train", "explain")
    with _stage("explain", {}):
        artifact = load_model(ws.root / "model_boost.bin")
        shap = tree_shap(artifact.model, X_test, background)
        margin = artifact.model.predict_margin(X_test)
        ranking = summarize(shap, artifact.feature_names)
    names = artifact.feature_names
    ws.write_csv(
        "shap_values.csv",
        ["sample", "feature", "phi", "value"],
        [(i, names[j], shap.phi[i, j], X_test[i, j]) for i in range(X_test.shape[0]) for j in range(len(names))],
    )
    ws.write_csv(
        "shap_ranking.csv",
        ["rank", "feature", "mean_abs_phi"],
        [(r + 1, n, v) for r, (n, v) in enumerate(ranking.entries)],
    )
    residual = np.abs(shap.base_value + shap.phi.sum(axis=1) - margin)
    out = {
        "base_value": shap.base_value,
        "ranking": [{"feature": n, "mean_abs_phi": v} for n, v in ranking.entries],
        "max_local_accuracy_error": float(residual.max()) if residual.size else 0.0,
    }
    ws.write_json("explain.json", out, state=True)
    return out


# -- report --------------------------------------------------------------------


def run_report(cfg: PipelineConfig, ws: Workspace):
    report = {
        "config": cfg.to_dict(),
        "prep": ws.read_json("prep.json", "report"),
        "models": {},
        "shap": ws.read_json("explain.json", "report"),
    }
    trained = ws.read_json("train.json", "report")
    tested = ws.read_json("evaluate.json", "report")
    for name, info in trained.items():
        report["models"][name] = {**info, "test": tested.get(name)}
    report["artifacts"] = ws.digests()
    (ws.root / "report.json").write_text(dumps_json(report))
    return report


RUNNERS = {
    "prep": run_prep,
    "train": run_train,
    "evaluate": run_evaluate,
    "explain": run_explain,
    "report": run_report,
}


def run_stages(cfg: PipelineConfig, stages=STAGES, out_dir=None):
    """Run the named stages in order, each reading its inputs from disk."""
    ws = Workspace(out_dir or cfg.run.out_dir)
    ws.ensure()
    result = None
    for stage in stages:
        start = time.perf_counter()
        result = RUNNERS[stage](cfg, ws)
        ws.record_times({stage: time.perf_counter() - start})
    return result


def run_pipeline(cfg: PipelineConfig, out_dir=None, start="prep"):
    """Full workflow; ``start`` resumes from a later stage using artifacts on disk."""
    if start not in STAGES:
        raise StageError("pipeline", f"unknown stage {start!r}; expected one of {', '.join(STAGES)}")
    return run_stages(cfg, STAGES[STAGES.index(start):], out_dir)


def _headline(report):
    out = {}
    for name, info in report["models"].items():
        test = info["test"]
        out[name] = {"accuracy": test["accuracy"], "auc": test["auc"], "kappa": test["kappa"]}
    return out


def run_sweep(cfg: PipelineConfig, n_seeds, out_dir=None):
    """Repeat the pipeline for seeds ``master_seed .. master_seed + n - 1`` and aggregate test metrics."""
    root = Path(out_dir or cfg.run.out_dir)
    per_seed = {}
    for k in range(n_seeds):
        seed = cfg.run.master_seed + k
        seeded = cfg.with_seed(seed)
        report = run_pipeline(seeded, root / f"seed_{seed}")
        per_seed[str(seed)] = _headline(report)
    aggregate = {}
    models = sorted({m for v in per_seed.values() for m in v})
    for m in models:
        aggregate[m] = {}
        for metric in ("accuracy", "auc", "kappa"):
            vals = np.array([v[m][metric] for v in per_seed.values()], dtype=float)
            aggregate[m][metric] = {"mean": float(vals.mean()), "std": float(vals.std()), "min": float(vals.min())}
    sweep = {"config": cfg.to_dict(), "seeds": per_seed, "aggregate": aggregate}
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep.json").write_text(dumps_json(sweep))
    return sweep
