"""Prototype sampling: convex combinations of same-label training windows.

A prototype is built around an anchor window. K-1 further windows with the
anchor's label are drawn (from distinct other trials when possible), K
weights are drawn i.i.d. Uniform[weight_lo, weight_hi] and normalized to sum
to one, and the prototype is the element-wise weighted sum. The anchor takes
the last weight. K=1 degenerates to the anchor itself with weight exactly 1,
so training with K=1 is training on the raw windows.

Each epoch every training window anchors exactly one prototype, so the
number of training samples per epoch equals the raw training set size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core_data import Direction, TfWindow


@dataclass(frozen=True)
class PrototypeConfig:
    k: int = 1
    weight_lo: float = 0.1
    weight_hi: float = 1.0
    distinct_trials: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.weight_lo <= self.weight_hi:
            raise ValueError(
                f"need 0 < weight_lo <= weight_hi, got [{self.weight_lo}, {self.weight_hi}]"
            )


@dataclass(eq=False)
class PrototypeSample:
    """One synthetic training instance with its constituent windows."""

    energy: np.ndarray
    label: Direction
    provenance: list[tuple[TfWindow, float]]


class WindowIndex:
    """Label and trial lookup over a training window pool."""

    def __init__(self, windows: list[TfWindow]):
        self.windows = list(windows)
        self.by_label: dict[Direction, list[TfWindow]] = {}
        self.trials_by_label: dict[Direction, list[tuple[str, str]]] = {}
        self._by_trial: dict[Direction, dict[tuple[str, str], list[TfWindow]]] = {}
        for w in self.windows:
            self.by_label.setdefault(w.label, []).append(w)
            per_trial = self._by_trial.setdefault(w.label, {})
            if w.trial_key not in per_trial:
                per_trial[w.trial_key] = []
                self.trials_by_label.setdefault(w.label, []).append(w.trial_key)
            per_trial[w.trial_key].append(w)

    def same_label(self, label: Direction) -> list[TfWindow]:
        return self.by_label.get(label, [])

    def windows_in(self, label: Direction, trial_key: tuple[str, str]) -> list[TfWindow]:
        return self._by_trial[label][trial_key]


def make_prototype(
    anchor: TfWindow,
    pool: WindowIndex,
    cfg: PrototypeConfig,
    rng: np.random.Generator,
) -> PrototypeSample:
    """Draw one prototype anchored at `anchor`.

    Constituents are drawn first, then the K weights, so a pinned rng gives a
    reproducible sample. With distinct_trials and at least K-1 other trials
    carrying the label, the K constituents come from K distinct trials;
    otherwise constituents are drawn with replacement from the same-label
    pool.
    """
    label = anchor.label
    if cfg.k == 1:
        return PrototypeSample(anchor.energy, label, [(anchor, 1.0)])
    if not pool.same_label(label):
        raise ValueError(f"no windows with label {label.name} in the pool")

    n_extra = cfg.k - 1
    other_trials = [tk for tk in pool.trials_by_label.get(label, ())
                    if tk != anchor.trial_key]
    constituents: list[TfWindow] = []
    if cfg.distinct_trials and len(other_trials) >= n_extra:
        picked = rng.choice(len(other_trials), size=n_extra, replace=False)
        for idx in picked:
            group = pool.windows_in(label, other_trials[int(idx)])
            constituents.append(group[int(rng.integers(len(group)))])
    else:
        candidates = [w for w in pool.same_label(label) if w is not anchor]
        if not candidates:
            candidates = [anchor]
        for idx in rng.integers(0, len(candidates), size=n_extra):
            constituents.append(candidates[int(idx)])

    raw = rng.uniform(cfg.weight_lo, cfg.weight_hi, size=cfg.k)
    weights = raw / raw.sum()
    # Constituents take weights[0..K-2] in draw order; the anchor takes the
    # last weight. Python-float weights keep the accumulation in the energy
    # arrays' own dtype.
    energy = anchor.energy * float(weights[-1])
    for w_i, win in zip(weights[:-1], constituents):
        energy += float(w_i) * win.energy
    provenance = list(zip(constituents, weights[:-1].tolist()))
    provenance.append((anchor, float(weights[-1])))
    return PrototypeSample(energy, label, provenance)


def epoch_batches(
    train_windows: list[TfWindow],
    cfg: PrototypeConfig,
    batch_size: int,
    rng: np.random.Generator,
) -> Iterator[tuple[list[PrototypeSample], np.ndarray]]:
    """One shuffled anchor pass over the training set, in batches.

    Yields (samples, labels) with labels as an int array aligned with the
    samples. The final batch may be short. Exactly len(train_windows)
    prototypes are emitted per call.
    """
    if not train_windows:
        raise ValueError("empty training set")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    labels_present = {w.label for w in train_windows}
    if labels_present != {Direction.LEFT, Direction.RIGHT}:
        missing = {Direction.LEFT, Direction.RIGHT} - labels_present
        names = ", ".join(d.name for d in sorted(missing))
        raise ValueError(f"training set is missing label(s): {names}")

    pool = WindowIndex(train_windows)
    order = rng.permutation(len(train_windows))
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        samples = [make_prototype(train_windows[int(i)], pool, cfg, rng) for i in chunk]
        labels = np.array([int(s.label) for s in samples], dtype=np.int64)
        yield samples, labels
