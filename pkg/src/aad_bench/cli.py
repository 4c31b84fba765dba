"""Command-line orchestrator: corpus synthesis, benchmark grids, reports.

`run` expands a (subject x strategy x window x K x repetition) grid over a
dataset, trains one model per fold, and appends one row per fold to
results.csv as soon as it is available. Reruns skip rows that already
exist, so an interrupted run resumes where it stopped. Per-job seeds are
derived by hashing the master seed with the job coordinates, which makes any
grid subset reproduce exactly the rows the full grid would produce, for any
worker count.

Time-frequency features are computed once per trial and cached on disk as
float32, keyed by a hash of the raw samples and the preprocessing and
wavelet settings; workers only ever read the cache. AAD_BENCH_CACHE_DIR
overrides the cache location (default: <out_dir>/cache).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np
import yaml

from . import dsp
from .core_data import Direction, TfTrial, Trial, load_manifest, read_trial
from .dsp import CwtConfig, PreprocessConfig
from .evaluate import (ConfigKey, RunRecord, append_results_csv, config_of,
                       config_stats, emit_tables, fit_accuracy_slope,
                       load_records, summarize, wilcoxon_signed_rank,
                       write_markdown_tables, write_summary_csv)
from .partition import N_FOLDS, Strategy, effective_stride, plan_folds
from .prototype import PrototypeConfig
from .synth import SynthConfig, generate, write_corpus
from .trainer import Optimizer, TrainConfig, evaluate_windows, train

CACHE_ENV = "AAD_BENCH_CACHE_DIR"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str
    dataset_name: str = "synth"
    manifest_path: str | None = None
    synth: SynthConfig | None = None
    preprocess: PreprocessConfig = PreprocessConfig()
    cwt: CwtConfig = CwtConfig()
    strategies: tuple[Strategy, ...] = (Strategy.CROSS_TRIAL,
                                        Strategy.WITHIN_TRIAL_SEGMENTS,
                                        Strategy.WITHIN_TRIAL_WINDOWS)
    window_lengths_s: tuple[float, ...] = (0.5, 1.0, 3.0, 5.0)
    stride_s: float = 1.0
    k_values: tuple[int, ...] = (1, 10)
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.001
    optimizer: str = "adam"
    dtype: str = "float32"
    weight_lo: float = 0.1
    weight_hi: float = 1.0
    distinct_trials: bool = True
    n_repetitions: int = 4
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.manifest_path is None and self.synth is None:
            raise ConfigError("config needs a dataset: either manifest or synth")
        if self.manifest_path is not None and self.synth is not None:
            raise ConfigError("config gives both a manifest and a synth dataset")
        if not self.strategies or not self.window_lengths_s or not self.k_values:
            raise ConfigError("strategies, window_lengths_s, and k_values must be non-empty")
        if any(k < 1 for k in self.k_values):
            raise ConfigError(f"k values must be >= 1, got {self.k_values}")
        if self.n_repetitions < 1:
            raise ConfigError(f"n_repetitions must be >= 1, got {self.n_repetitions}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def train_config(self, k: int, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=Optimizer(self.optimizer),
            prototype=PrototypeConfig(k=k, weight_lo=self.weight_lo,
                                      weight_hi=self.weight_hi,
                                      distinct_trials=self.distinct_trials),
            seed=seed,
            dtype=self.dtype,
        )


def _synth_from_dict(section: dict) -> SynthConfig:
    if "alpha_band" in section:
        section["alpha_band"] = tuple(float(f) for f in section["alpha_band"])
    return _build(SynthConfig, section, "synth")


def _build(cls, data: dict, what: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what} config: {exc}") from exc


def load_experiment_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return experiment_config_from_dict(raw, overrides)


def experiment_config_from_dict(raw: dict, overrides: dict | None = None
                                ) -> ExperimentConfig:
    data = dict(raw)
    dataset = data.pop("dataset", {})
    if not isinstance(dataset, dict):
        raise ConfigError("dataset section must be a mapping")
    kwargs: dict = {}
    kwargs["dataset_name"] = dataset.get("name", "synth")
    if "manifest" in dataset:
        kwargs["manifest_path"] = dataset["manifest"]
    if "synth" in dataset:
        kwargs["synth"] = _synth_from_dict(dict(dataset["synth"] or {}))
    if "preprocess" in data:
        kwargs["preprocess"] = _build(PreprocessConfig, dict(data.pop("preprocess")),
                                      "preprocess")
    if "cwt" in data:
        cwt = dict(data.pop("cwt"))
        if "freqs_hz" in cwt:
            cwt["freqs_hz"] = tuple(float(f) for f in cwt["freqs_hz"])
        kwargs["cwt"] = _build(CwtConfig, cwt, "cwt")
    if "train" in data:
        train_section = dict(data.pop("train"))
        proto = dict(train_section.pop("prototype", {}))
        proto.pop("k", None)  # k comes from the grid axis
        for key in ("weight_lo", "weight_hi", "distinct_trials"):
            if key in proto:
                kwargs[key] = proto[key]
        for key in ("epochs", "batch_size", "learning_rate", "optimizer", "dtype"):
            if key in train_section:
                kwargs[key] = train_section.pop(key)
        if train_section:
            raise ConfigError(f"unknown train keys: {sorted(train_section)}")
    if "strategies" in data:
        try:
            kwargs["strategies"] = tuple(
                Strategy.parse(str(s)) for s in data.pop("strategies"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    for key in ("window_lengths_s", "k_values"):
        if key in data:
            data[key] = tuple(data[key])
    data.update(kwargs)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        if "window_lengths_s" in data:
            data["window_lengths_s"] = tuple(float(w) for w in data["window_lengths_s"])
        if "k_values" in data:
            data["k_values"] = tuple(int(k) for k in data["k_values"])
        return _build(ExperimentConfig, data, "experiment")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def job_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and job coordinates."""
    text = "|".join([str(master_seed)] + [_canon(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2 ** 63 - 1)


def _canon(part) -> str:
    if isinstance(part, float):
        return repr(part)
    if isinstance(part, Strategy):
        return part.value
    return str(part)


# ---------------------------------------------------------------------------
# Feature cache


def _cache_key(dataset: str, trial: Trial, pre: PreprocessConfig,
               cwt: CwtConfig) -> str:
    sample_digest = hashlib.sha256(
        np.ascontiguousarray(trial.samples, dtype="<f4").tobytes()).hexdigest()
    text = "|".join([
        "features-v1", dataset, trial.subject_id, trial.trial_id,
        repr(trial.fs_hz), str(int(trial.label)), sample_digest,
        repr((pre.target_fs_hz, pre.band_lo_hz, pre.band_hi_hz,
              pre.filter_order, pre.zero_phase)),
        repr((cwt.freqs_hz, cwt.frames_per_s, cwt.wavelet_cycles,
              cwt.energy_floor)),
    ])
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def ensure_features(trial: Trial, dataset: str, pre: PreprocessConfig,
                    cwt: CwtConfig, cache_dir: str) -> str:
    """Compute-and-store on miss, no-op on hit; returns the npz path."""
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, _cache_key(dataset, trial, pre, cwt) + ".npz")
    if os.path.exists(path):
        return path
    tf = dsp.cwt_log_energy(dsp.preprocess(trial, pre), cwt)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh,
                     energy=tf.energy.astype(np.float32),
                     freqs_hz=np.array(tf.freqs_hz, dtype=np.float64),
                     frames_per_s=np.float64(tf.frames_per_s),
                     label=np.int64(int(tf.label)),
                     subject_id=np.str_(tf.subject_id),
                     trial_id=np.str_(tf.trial_id))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_features(path: str) -> TfTrial:
    with np.load(path) as data:
        return TfTrial(
            subject_id=str(data["subject_id"][()]),
            trial_id=str(data["trial_id"][()]),
            label=Direction(int(data["label"][()])),
            frames_per_s=float(data["frames_per_s"][()]),
            freqs_hz=tuple(float(f) for f in data["freqs_hz"]),
            energy=data["energy"],
        )


# ---------------------------------------------------------------------------
# Job execution


@dataclass(frozen=True)
class TaskSpec:
    """Everything one worker needs for one (subject, strategy, window, K,
    repetition) cell: light fields plus feature-cache paths."""

    dataset: str
    subject_id: str
    strategy: str
    window_s: float
    stride_s: float
    k: int
    repetition: int
    plan_seed: int
    fold_seeds: tuple[int, ...]
    skip_folds: tuple[int, ...]
    feature_paths: tuple[str, ...]
    epochs: int
    batch_size: int
    learning_rate: float
    optimizer: str
    dtype: str
    weight_lo: float
    weight_hi: float
    distinct_trials: bool


def run_task(spec: TaskSpec) -> list[RunRecord]:
    strategy = Strategy(spec.strategy)
    tfs = [load_features(p) for p in spec.feature_paths]
    plans = plan_folds(tfs, strategy, spec.window_s, spec.stride_s, spec.plan_seed)
    records = []
    for plan in plans:
        if plan.fold_index in spec.skip_folds:
            continue
        seed = spec.fold_seeds[plan.fold_index]
        cfg = TrainConfig(
            epochs=spec.epochs, batch_size=spec.batch_size,
            learning_rate=spec.learning_rate, optimizer=Optimizer(spec.optimizer),
            prototype=PrototypeConfig(k=spec.k, weight_lo=spec.weight_lo,
                                      weight_hi=spec.weight_hi,
                                      distinct_trials=spec.distinct_trials),
            seed=seed, dtype=spec.dtype,
        )
        model = train(plan.train, cfg)
        acc = evaluate_windows(model, plan.test)
        records.append(RunRecord(
            dataset=spec.dataset, subject_id=spec.subject_id, strategy=strategy,
            window_s=spec.window_s,
            stride_s=effective_stride(strategy, spec.window_s, spec.stride_s),
            k=spec.k, repetition=spec.repetition, fold=plan.fold_index,
            accuracy=acc, n_test_windows=len(plan.test), seed=seed,
        ))
    return records


def _run_task_safe(spec: TaskSpec) -> tuple[list[RunRecord], str | None]:
    try:
        return run_task(spec), None
    except Exception:
        key = (f"{spec.subject_id}/{spec.strategy}/w{spec.window_s:g}/k{spec.k}"
               f"/rep{spec.repetition}")
        return [], f"{key}\n{traceback.format_exc()}"


def _load_dataset(cfg: ExperimentConfig) -> tuple[str, dict[str, list[Trial]]]:
    by_subject: dict[str, list[Trial]] = {}
    if cfg.synth is not None:
        trials, _ = generate(cfg.synth)
        name = cfg.dataset_name
    else:
        manifest = load_manifest(cfg.manifest_path)
        name = cfg.dataset_name if cfg.dataset_name != "synth" else manifest.name
        trials = [read_trial(entry.path) for entry in manifest.trials]
    for trial in trials:
        by_subject.setdefault(trial.subject_id, []).append(trial)
    return name, by_subject


def _completed_keys(results_path: str) -> set[tuple]:
    if not os.path.exists(results_path):
        return set()
    done = set()
    for rec in load_records(results_path):
        done.add((rec.subject_id, rec.strategy.value, rec.window_s, rec.k,
                  rec.repetition, rec.fold))
    return done


def run_experiment(cfg: ExperimentConfig) -> int:
    """Execute the grid; returns a process exit code (0 ok, 1 job failures)."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    cache_dir = os.environ.get(CACHE_ENV) or os.path.join(cfg.out_dir, "cache")
    results_path = os.path.join(cfg.out_dir, "results.csv")

    dataset, by_subject = _load_dataset(cfg)
    subjects = sorted(by_subject)
    print(f"dataset {dataset}: {len(subjects)} subjects, "
          f"{sum(len(v) for v in by_subject.values())} trials", flush=True)

    feature_paths: dict[str, tuple[str, ...]] = {}
    for subject in subjects:
        feature_paths[subject] = tuple(
            ensure_features(t, dataset, cfg.preprocess, cfg.cwt, cache_dir)
            for t in sorted(by_subject[subject], key=lambda t: t.trial_id))
    del by_subject

    done = _completed_keys(results_path)
    if done:
        print(f"resuming: {len(done)} folds already in {results_path}", flush=True)

    tasks = []
    for subject in subjects:
        for strategy in cfg.strategies:
            for window_s in cfg.window_lengths_s:
                stride_s = window_s if window_s < cfg.stride_s else cfg.stride_s
                for k in cfg.k_values:
                    for rep in range(cfg.n_repetitions):
                        skip = tuple(
                            fold for fold in range(N_FOLDS)
                            if (subject, strategy.value, window_s, k, rep, fold) in done)
                        if len(skip) == N_FOLDS:
                            continue
                        tasks.append(TaskSpec(
                            dataset=dataset, subject_id=subject,
                            strategy=strategy.value, window_s=window_s,
                            stride_s=stride_s, k=k, repetition=rep,
                            plan_seed=job_seed(cfg.seed, "plan", subject,
                                               strategy, window_s, rep),
                            fold_seeds=tuple(
                                job_seed(cfg.seed, "train", subject, strategy,
                                         window_s, k, rep, fold)
                                for fold in range(N_FOLDS)),
                            skip_folds=skip,
                            feature_paths=feature_paths[subject],
                            epochs=cfg.epochs, batch_size=cfg.batch_size,
                            learning_rate=cfg.learning_rate,
                            optimizer=cfg.optimizer, dtype=cfg.dtype,
                            weight_lo=cfg.weight_lo, weight_hi=cfg.weight_hi,
                            distinct_trials=cfg.distinct_trials,
                        ))

    print(f"{len(tasks)} tasks to run ({cfg.workers} workers)", flush=True)
    failures: list[str] = []
    n_done = 0

    def consume(records: list[RunRecord], error: str | None) -> None:
        nonlocal n_done
        n_done += 1
        if error:
            failures.append(error)
            print(f"[{n_done}/{len(tasks)}] FAILED {error.splitlines()[0]}", flush=True)
            return
        append_results_csv(records, results_path)
        if records:
            r = records[0]
            print(f"[{n_done}/{len(tasks)}] {r.subject_id} strategy {r.strategy.value} "
                  f"w={r.window_s:g}s k={r.k} rep={r.repetition} "
                  f"acc={np.mean([x.accuracy for x in records]):.3f}", flush=True)

    if cfg.workers == 1:
        for spec in tasks:
            consume(*_run_task_safe(spec))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for records, error in pool.map(_run_task_safe, tasks, chunksize=1):
                consume(records, error)

    if failures:
        fail_path = os.path.join(cfg.out_dir, "failures.log")
        with open(fail_path, "w") as fh:
            fh.write("\n\n".join(failures))
        print(f"{len(failures)} task(s) failed; details in {fail_path}", flush=True)

    if os.path.exists(results_path):
        records = load_records(results_path)
        complete, dropped = _complete_grid_records(records)
        for warning in dropped:
            print(f"warning: {warning}", flush=True)
        if complete:
            emit_tables(complete, cfg.out_dir)
            print(f"tables written to {cfg.out_dir}", flush=True)
    return 1 if failures else 0


def _complete_grid_records(records: Sequence[RunRecord]
                           ) -> tuple[list[RunRecord], list[str]]:
    """Split records into complete 16-cell (config, subject) grids and
    warnings about incomplete ones."""
    cells: dict[tuple[ConfigKey, str], list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((config_of(rec), rec.subject_id), []).append(rec)
    complete: list[RunRecord] = []
    warnings: list[str] = []
    expected = N_FOLDS * 4
    for (config, subject), recs in sorted(cells.items()):
        if len(recs) == expected:
            complete.extend(recs)
        else:
            warnings.append(
                f"subject {subject} {config.dataset} strategy {config.strategy} "
                f"w={config.window_s:g} k={config.k}: {len(recs)}/{expected} folds; "
                f"excluded from tables")
    return complete, warnings


# ---------------------------------------------------------------------------
# Reports


def write_wilcoxon_csv(records: Sequence[RunRecord], path: str) -> int:
    """Per-configuration paired test of each K against K=1 on subject means."""
    summaries = summarize(records)
    by_config: dict[ConfigKey, dict[str, float]] = {}
    for s in summaries:
        by_config.setdefault(s.config, {})[s.subject_id] = s.mean_accuracy
    rows = []
    for config in sorted(by_config):
        if config.k == 1:
            continue
        base = config._replace(k=1)
        if base not in by_config:
            continue
        subjects = sorted(set(by_config[config]) & set(by_config[base]))
        a = [by_config[config][s] for s in subjects]
        b = [by_config[base][s] for s in subjects]
        mean_diff = float(np.mean(a) - np.mean(b))
        try:
            res = wilcoxon_signed_rank(a, b)
            stat, p, n, method = res.statistic, res.p_value, res.n, res.method
        except ValueError as exc:
            stat, p, n, method = "n/a", "n/a", len(subjects), f"skipped: {exc}"
        rows.append([config.dataset, config.strategy, repr(config.window_s),
                     repr(config.stride_s), config.model, config.k, 1,
                     len(subjects), mean_diff, stat, p, method])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "strategy", "window_s", "stride_s", "model",
                         "k", "k_baseline", "n_subjects", "mean_diff",
                         "statistic", "p_value", "method"])
        writer.writerows(rows)
    return len(rows)


def write_slopes_csv(records: Sequence[RunRecord], path: str) -> int:
    """Accuracy-vs-window-length slope per (dataset, strategy, K), in
    percentage points per second over across-subject means."""
    stats = config_stats(summarize(records))
    by_line: dict[tuple[str, str, int, str], list[tuple[float, float]]] = {}
    for st in stats:
        c = st.config
        key = (c.dataset, c.strategy, c.k, c.model)
        by_line.setdefault(key, []).append((c.window_s, 100.0 * st.mean_accuracy))
    rows = []
    for key in sorted(by_line):
        points = sorted(by_line[key])
        dataset, strategy, k, model = key
        if len({p[0] for p in points}) >= 2:
            slope = f"{fit_accuracy_slope(points):.4f}"
        else:
            slope = "n/a"
        rows.append([dataset, strategy, k, model, len(points), slope])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "strategy", "k", "model",
                         "n_window_lengths", "slope_pct_per_s"])
        writer.writerows(rows)
    return len(rows)


def cmd_report(results_path: str, out_dir: str) -> int:
    if not os.path.exists(results_path):
        print(f"results file not found: {results_path}", file=sys.stderr)
        return 2
    os.makedirs(out_dir, exist_ok=True)
    records = load_records(results_path)
    complete, warnings = _complete_grid_records(records)
    for warning in warnings:
        print(f"warning: {warning}", flush=True)
    if not complete:
        print("no complete (subject, configuration) grids; nothing to report",
              file=sys.stderr)
        return 1
    stats = config_stats(summarize(complete))
    write_summary_csv(stats, os.path.join(out_dir, "summary.csv"))
    write_markdown_tables(stats, os.path.join(out_dir, "tables.md"))
    n_tests = write_wilcoxon_csv(complete, os.path.join(out_dir, "wilcoxon.csv"))
    n_slopes = write_slopes_csv(complete, os.path.join(out_dir, "slopes.csv"))
    print(f"report: {len(stats)} configurations, {n_tests} paired tests, "
          f"{n_slopes} slope rows -> {out_dir}", flush=True)
    return 1 if warnings else 0


def cmd_synth(cfg: SynthConfig, out_dir: str) -> int:
    trials, report = generate(cfg)
    manifest_path = write_corpus(trials, report, out_dir)
    ratios = [t.alpha_lr_ratio for t in report.trials]
    print(f"wrote {len(trials)} trials for {cfg.n_subjects} subjects to {out_dir}")
    print(f"manifest: {manifest_path}")
    print(f"alpha L/R ratio: min {min(ratios):.3f}, median "
          f"{float(np.median(ratios)):.3f}, max {max(ratios):.3f}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _parse_list(text: str, cast) -> tuple:
    return tuple(cast(part) for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aad-bench",
        description="Spatial auditory-attention decoding benchmark on EEG "
                    "time-frequency features.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic EEG corpus")
    p_synth.add_argument("--config", help="YAML config with a dataset.synth section")
    p_synth.add_argument("--out", default="synth_corpus", help="output directory")
    p_synth.add_argument("--seed", type=int, help="override the corpus seed")
    p_synth.add_argument("--rho-a", type=float, dest="rho_a",
                         help="override attention_strength")
    p_synth.add_argument("--rho-f", type=float, dest="rho_f",
                         help="override fingerprint_strength")

    p_run = sub.add_parser("run", help="run the benchmark grid")
    p_run.add_argument("--config", required=True, help="YAML experiment config")
    p_run.add_argument("--strategies", help="comma list, e.g. I,II,III")
    p_run.add_argument("--windows", help="comma list of window lengths in seconds")
    p_run.add_argument("--k", help="comma list of prototype sampling numbers")
    p_run.add_argument("--workers", type=int, help="parallel fold workers")
    p_run.add_argument("--out", help="override out_dir")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--resume", action="store_true",
                       help="explicitly allowed; reruns always skip completed folds")

    p_report = sub.add_parser("report", help="regenerate tables from results.csv")
    p_report.add_argument("--results", required=True, help="path to results.csv")
    p_report.add_argument("--out", required=True, help="report output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            if args.config:
                with open(args.config) as fh:
                    raw = yaml.safe_load(fh) or {}
                section = (raw.get("dataset", {}) or {}).get("synth", {}) or {}
            else:
                section = {}
            if args.seed is not None:
                section["seed"] = args.seed
            if args.rho_a is not None:
                section["attention_strength"] = args.rho_a
            if args.rho_f is not None:
                section["fingerprint_strength"] = args.rho_f
            cfg = _synth_from_dict(section)
            return cmd_synth(cfg, args.out)
        if args.command == "run":
            overrides: dict = {}
            try:
                if args.strategies:
                    overrides["strategies"] = tuple(
                        Strategy.parse(s) for s in args.strategies.split(","))
                if args.windows:
                    overrides["window_lengths_s"] = _parse_list(args.windows, float)
                if args.k:
                    overrides["k_values"] = _parse_list(args.k, int)
            except ValueError as exc:
                raise ConfigError(f"bad command-line override: {exc}") from exc
            if args.workers is not None:
                overrides["workers"] = args.workers
            if args.out is not None:
                overrides["out_dir"] = args.out
            if args.seed is not None:
                overrides["seed"] = args.seed
            cfg = load_experiment_config(args.config, overrides)
            return run_experiment(cfg)
        if args.command == "report":
            return cmd_report(args.results, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
