"""Aggregation and statistics over benchmark run records.

Accuracies live as fractions in [0, 1] everywhere except the Markdown table
layer, which renders percentages with two decimals. Per-subject scores are
means over a complete 16-cell (repetition, fold) grid; configuration rows
aggregate subject means with the population standard deviation.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .partition import N_FOLDS, Strategy

N_REPETITIONS = 4
EXACT_WILCOXON_MAX_N = 20

RESULTS_COLUMNS = (
    "dataset", "subject_id", "strategy", "window_s", "stride_s", "k",
    "model", "repetition", "fold", "accuracy", "n_test_windows", "seed",
)


@dataclass(frozen=True)
class RunRecord:
    """Accuracy of one trained model on one fold's test windows."""

    dataset: str
    subject_id: str
    strategy: Strategy
    window_s: float
    stride_s: float
    k: int
    repetition: int
    fold: int
    accuracy: float
    n_test_windows: int
    seed: int
    model: str = "eegwavenet"

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if not 0 <= self.repetition < N_REPETITIONS:
            raise ValueError(f"repetition {self.repetition} outside 0..{N_REPETITIONS - 1}")
        if not 0 <= self.fold < N_FOLDS:
            raise ValueError(f"fold {self.fold} outside 0..{N_FOLDS - 1}")


class ConfigKey(NamedTuple):
    dataset: str
    strategy: str
    window_s: float
    stride_s: float
    k: int
    model: str


def config_of(record: RunRecord) -> ConfigKey:
    return ConfigKey(record.dataset, record.strategy.value, record.window_s,
                     record.stride_s, record.k, record.model)


@dataclass(frozen=True)
class SubjectSummary:
    subject_id: str
    config: ConfigKey
    mean_accuracy: float
    std_accuracy: float


@dataclass(frozen=True)
class ConfigStat:
    config: ConfigKey
    n_subjects: int
    mean_accuracy: float
    std_accuracy: float


def summarize(records: Iterable[RunRecord]) -> list[SubjectSummary]:
    """Per-subject mean over the 16 (repetition, fold) cells of each
    configuration; incomplete or duplicated grids are an error."""
    grids: dict[tuple[ConfigKey, str], dict[tuple[int, int], float]] = {}
    for rec in records:
        key = (config_of(rec), rec.subject_id)
        cell = (rec.repetition, rec.fold)
        grid = grids.setdefault(key, {})
        if cell in grid:
            raise ValueError(
                f"duplicate (repetition, fold) {cell} for subject {rec.subject_id}, "
                f"configuration {key[0]}"
            )
        grid[cell] = rec.accuracy
    if not grids:
        raise ValueError("no records to summarize")

    expected = {(r, f) for r in range(N_REPETITIONS) for f in range(N_FOLDS)}
    summaries = []
    for (config, subject_id), grid in sorted(grids.items()):
        missing = sorted(expected - set(grid))
        if missing:
            raise ValueError(
                f"subject {subject_id}, configuration {config}: missing "
                f"(repetition, fold) cells {missing}"
            )
        values = np.array([grid[cell] for cell in sorted(grid)])
        summaries.append(SubjectSummary(subject_id, config,
                                        float(values.mean()), float(values.std())))
    return summaries


def config_stats(summaries: Iterable[SubjectSummary]) -> list[ConfigStat]:
    """Across-subject mean and population std of the subject means."""
    by_config: dict[ConfigKey, list[float]] = {}
    for s in summaries:
        by_config.setdefault(s.config, []).append(s.mean_accuracy)
    stats = []
    for config, values in sorted(by_config.items()):
        arr = np.array(values)
        stats.append(ConfigStat(config, len(values), float(arr.mean()), float(arr.std())))
    return stats


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    n: int
    method: str
    degenerate: bool


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are dropped. The statistic is the sum of signed ranks
    (positive minus negative rank sum). For n <= 20 the p-value counts all
    2^n sign assignments exactly (via the rank-sum distribution, which
    enumerates the same assignments); beyond that a normal approximation
    with variance sum(r_i^2) and continuity correction 1.0 is used. All
    differences zero is degenerate: p = 1.0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"need equal-length 1-d samples, got {a.shape} and {b.shape}")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate", True)
    if n < 5:
        raise ValueError(f"need >= 5 nonzero differences, got {n}")

    ranks = rankdata(np.abs(diffs))
    statistic = float(np.sum(np.sign(diffs) * ranks))

    if n <= EXACT_WILCOXON_MAX_N:
        p = _exact_two_sided_p(ranks, statistic)
        method = "exact"
    else:
        sigma = math.sqrt(float(np.sum(ranks ** 2)))
        z = max(abs(statistic) - 1.0, 0.0) / sigma
        p = min(1.0, math.erfc(z / math.sqrt(2.0)))
        method = "normal"
    return WilcoxonResult(statistic, p, n, method, False)


def _exact_two_sided_p(ranks: np.ndarray, statistic: float) -> float:
    # Doubled ranks are integers even with averaged ties, so the sign-flip
    # distribution lives on an integer lattice and the count is exact.
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    # counts[s] = number of sign assignments whose positive doubled-rank sum
    # is s; one convolution step per rank covers all 2^n assignments.
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.size - r]
        counts += shifted
    # statistic = 2*W+ - sum(r); in doubled units t2 = 4*W+ - 2*sum(r).
    w_plus_doubled = np.arange(total + 1) * 2 - total
    t2 = int(round(2.0 * statistic))
    extreme = counts[np.abs(w_plus_doubled) >= abs(t2)].sum()
    return float(extreme / 2.0 ** len(doubled))


def fit_accuracy_slope(points: Sequence[tuple[float, float]]) -> float:
    """Ordinary least-squares slope of accuracy against window length."""
    if len(points) < 2:
        raise ValueError(f"need >= 2 points, got {len(points)}")
    x = np.array([p[0] for p in points], dtype=np.float64)
    y = np.array([p[1] for p in points], dtype=np.float64)
    if np.all(x == x[0]):
        raise ValueError("all window lengths equal; slope undefined")
    return float(np.polyfit(x, y, 1)[0])


def _fmt_float(value: float) -> str:
    return repr(float(value))


def write_results_csv(records: Sequence[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for r in records:
            writer.writerow([
                r.dataset, r.subject_id, r.strategy.value,
                _fmt_float(r.window_s), _fmt_float(r.stride_s), r.k, r.model,
                r.repetition, r.fold, f"{r.accuracy:.6f}",
                r.n_test_windows, r.seed,
            ])


def append_results_csv(records: Sequence[RunRecord], path) -> None:
    """Append records, writing the header only when the file starts empty."""
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RESULTS_COLUMNS)
        for r in records:
            writer.writerow([
                r.dataset, r.subject_id, r.strategy.value,
                _fmt_float(r.window_s), _fmt_float(r.stride_s), r.k, r.model,
                r.repetition, r.fold, f"{r.accuracy:.6f}",
                r.n_test_windows, r.seed,
            ])


def load_records(path) -> list[RunRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RESULTS_COLUMNS:
            raise ValueError(f"{path}: unexpected results.csv header {reader.fieldnames}")
        for row in reader:
            records.append(RunRecord(
                dataset=row["dataset"],
                subject_id=row["subject_id"],
                strategy=Strategy.parse(row["strategy"]),
                window_s=float(row["window_s"]),
                stride_s=float(row["stride_s"]),
                k=int(row["k"]),
                model=row["model"],
                repetition=int(row["repetition"]),
                fold=int(row["fold"]),
                accuracy=float(row["accuracy"]),
                n_test_windows=int(row["n_test_windows"]),
                seed=int(row["seed"]),
            ))
    return records


def write_summary_csv(stats: Sequence[ConfigStat], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "strategy", "window_s", "stride_s", "k",
                         "model", "n_subjects", "mean_accuracy", "std_accuracy"])
        for s in stats:
            c = s.config
            writer.writerow([
                c.dataset, c.strategy, _fmt_float(c.window_s),
                _fmt_float(c.stride_s), c.k, c.model, s.n_subjects,
                f"{s.mean_accuracy:.6f}", f"{s.std_accuracy:.6f}",
            ])


def _cell(stat: ConfigStat) -> str:
    return f"{100.0 * stat.mean_accuracy:.2f}±{100.0 * stat.std_accuracy:.2f}"


def write_markdown_tables(stats: Sequence[ConfigStat], path) -> None:
    """One table per (dataset, window length): strategies as columns,
    model/K variants as rows, cells as percent mean and std."""
    by_table: dict[tuple[str, float, float], dict[tuple[str, int], dict[str, ConfigStat]]] = {}
    strategies: dict[tuple[str, float, float], list[str]] = {}
    for s in stats:
        c = s.config
        table_key = (c.dataset, c.window_s, c.stride_s)
        rows = by_table.setdefault(table_key, {})
        rows.setdefault((c.model, c.k), {})[c.strategy] = s
        cols = strategies.setdefault(table_key, [])
        if c.strategy not in cols:
            cols.append(c.strategy)

    lines = ["# Decoding accuracy (%)", ""]
    for table_key in sorted(by_table):
        dataset, window_s, stride_s = table_key
        cols = sorted(strategies[table_key])
        lines.append(f"## {dataset}, window {window_s:g} s, stride {stride_s:g} s")
        lines.append("")
        lines.append("| model | " + " | ".join(f"Strategy {c}" for c in cols) + " |")
        lines.append("|---" * (len(cols) + 1) + "|")
        for (model, k) in sorted(by_table[table_key]):
            row = by_table[table_key][(model, k)]
            cells = [_cell(row[c]) if c in row else "n/a" for c in cols]
            lines.append(f"| {model}-K{k} | " + " | ".join(cells) + " |")
        lines.append("")
    lines.append("Cells are mean±std of per-subject accuracies; "
                 "std is the population standard deviation across subjects.")
    lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def emit_tables(records: Sequence[RunRecord], out_dir) -> dict[str, str]:
    """Write results.csv, summary.csv, and tables.md under out_dir."""
    if not records:
        raise ValueError("no records to emit")
    os.makedirs(out_dir, exist_ok=True)
    stats = config_stats(summarize(records))
    paths = {
        "results": os.path.join(out_dir, "results.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "tables": os.path.join(out_dir, "tables.md"),
    }
    write_results_csv(records, paths["results"])
    write_summary_csv(stats, paths["summary"])
    write_markdown_tables(stats, paths["tables"])
    return paths
