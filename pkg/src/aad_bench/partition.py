"""Train/test partitioning strategies with 4-fold cross-validation.

Three strategies with very different leakage profiles:

* CROSS_TRIAL: whole trials are held out, so test windows come from trials
  the decoder never saw.
* WITHIN_TRIAL_SEGMENTS: every trial contributes a contiguous quarter to the
  test set; training windows whose interval touches any test window in the
  same trial are dropped to avoid sample-level leakage.
* WITHIN_TRIAL_WINDOWS: all windows are pooled and split at random; the
  segmentation stride is raised to the window length so train and test
  windows can never overlap in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core_data import TfTrial, TfWindow
from .dsp import segment_windows, _frames

N_FOLDS = 4


class Strategy(Enum):
    CROSS_TRIAL = "I"
    WITHIN_TRIAL_SEGMENTS = "II"
    WITHIN_TRIAL_WINDOWS = "III"

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        key = text.strip().upper()
        for member in cls:
            if key in (member.value, member.name):
                return member
        raise ValueError(f"unknown strategy {text!r}; expected one of I, II, III")


@dataclass
class FoldPlan:
    """Window assignment of one cross-validation fold."""

    fold_index: int
    train: list[TfWindow]
    test: list[TfWindow]
    seed: int
    repetition: int = 0


def _group_sizes(n: int, k: int) -> list[int]:
    # Remainders go one-per-fold to the first folds, keeping sizes within 1.
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def _split_permuted(rng: np.random.Generator, n: int, k: int) -> list[np.ndarray]:
    perm = rng.permutation(n)
    groups = []
    offset = 0
    for size in _group_sizes(n, k):
        groups.append(perm[offset:offset + size])
        offset += size
    return groups


def effective_stride(strategy: Strategy, window_s: float, stride_s: float) -> float:
    """WITHIN_TRIAL_WINDOWS raises the stride to the window length so that
    randomly scattered train/test windows cannot overlap."""
    if strategy is Strategy.WITHIN_TRIAL_WINDOWS:
        return max(stride_s, window_s)
    return stride_s


def plan_folds(
    trials: list[TfTrial],
    strategy: Strategy,
    window_s: float,
    stride_s: float,
    seed: int,
) -> list[FoldPlan]:
    """Build the 4 fold plans for one repetition.

    Windows are segmented per trial with (window_s, stride_s), except under
    WITHIN_TRIAL_WINDOWS where the stride is first raised to the window
    length. All randomness comes from `seed`.
    """
    if strategy is Strategy.CROSS_TRIAL and len(trials) < N_FOLDS:
        raise ValueError(f"cross-trial folds need >= {N_FOLDS} trials, got {len(trials)}")
    rng = np.random.default_rng(seed)
    stride_s = effective_stride(strategy, window_s, stride_s)

    if strategy is Strategy.CROSS_TRIAL:
        per_trial = [segment_windows(t, window_s, stride_s) for t in trials]
        groups = _split_permuted(rng, len(trials), N_FOLDS)
        plans = []
        for fold, test_idx in enumerate(groups):
            test_set = set(test_idx.tolist())
            test = [w for i in sorted(test_set) for w in per_trial[i]]
            train = [w for i in range(len(trials)) if i not in test_set for w in per_trial[i]]
            plans.append(FoldPlan(fold, train, test, seed))
    elif strategy is Strategy.WITHIN_TRIAL_SEGMENTS:
        t_w = _frames(window_s, trials[0].frames_per_s, "window_s")
        plans = [FoldPlan(fold, [], [], seed) for fold in range(N_FOLDS)]
        for trial in trials:
            base = trial.n_frames // N_FOLDS
            if base < t_w:
                raise ValueError(
                    f"trial {trial.trial_id}: quarter segment of {base} frames cannot "
                    f"hold a {t_w}-frame window"
                )
            windows = segment_windows(trial, window_s, stride_s)
            for fold in range(N_FOLDS):
                seg_lo = fold * base
                seg_hi = (fold + 1) * base if fold < N_FOLDS - 1 else trial.n_frames
                test = [w for w in windows
                        if w.start_frame >= seg_lo and w.end_frame <= seg_hi]
                # A test window overlaps itself, so this also drops the test
                # windows from the training pool.
                spans = [(w.start_frame, w.end_frame) for w in test]
                train = [w for w in windows if not _hits_any(w, spans)]
                plans[fold].test.extend(test)
                plans[fold].train.extend(train)
    elif strategy is Strategy.WITHIN_TRIAL_WINDOWS:
        pooled = [w for t in trials for w in segment_windows(t, window_s, stride_s)]
        groups = _split_permuted(rng, len(pooled), N_FOLDS)
        plans = []
        for fold, test_idx in enumerate(groups):
            test_set = set(test_idx.tolist())
            test = [pooled[i] for i in sorted(test_set)]
            train = [pooled[i] for i in range(len(pooled)) if i not in test_set]
            plans.append(FoldPlan(fold, train, test, seed))
    else:
        raise ValueError(f"unknown strategy {strategy}")

    for plan in plans:
        if not plan.train or not plan.test:
            raise ValueError(
                f"strategy {strategy.value} fold {plan.fold_index} is empty "
                f"(train={len(plan.train)}, test={len(plan.test)}); not enough data"
            )
    return plans


def _hits_any(window: TfWindow, spans: list[tuple[int, int]]) -> bool:
    for lo, hi in spans:
        if window.start_frame < hi and lo < window.end_frame:
            return True
    return False


def repeat_plans(
    trials: list[TfTrial],
    strategy: Strategy,
    window_s: float,
    stride_s: float,
    base_seed: int,
    n_repetitions: int = 4,
) -> list[FoldPlan]:
    """Independent re-draws of plan_folds with seeds base_seed..base_seed+n-1,
    tagged with their repetition index; 4 repetitions give the 16 folds the
    benchmark averages over."""
    plans = []
    for rep in range(n_repetitions):
        for plan in plan_folds(trials, strategy, window_s, stride_s, base_seed + rep):
            plan.repetition = rep
            plans.append(plan)
    return plans
