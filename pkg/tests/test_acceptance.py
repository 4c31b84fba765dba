"""Release gates for the whole benchmark, one test per gate.

The fast gates re-derive their oracles on the spot: finite differences for
the decoder gradients, the closed-form bilinear-prewarp response for the
filter, brute-force interval intersection for the partitions, and exact
sign-pattern enumeration for the statistics. The phenomenon gates at the
bottom train full-size model grids on the bundled synthetic corpus; they
dominate the suite's runtime (a few CPU-hours) and report mean accuracies,
so run this module last or in the background.
"""

import hashlib
import math
import os
import time

import numpy as np
import pytest

import aad_bench.evaluate as evaluate_mod
from aad_bench.cli import ExperimentConfig, cmd_report, main, run_experiment
from aad_bench.core_data import Direction, TfTrial, TfWindow, Trial
from aad_bench.dsp import (
    CwtConfig,
    PreprocessConfig,
    cwt_log_energy,
    preprocess,
    wavelet_half_support,
)
from aad_bench.eegwavenet import LEARNABLE_FIELDS, backward, forward, init_params
from aad_bench.evaluate import load_records, summarize, wilcoxon_signed_rank
from aad_bench.partition import Strategy, effective_stride, plan_folds
from aad_bench.prototype import (
    PrototypeConfig,
    WindowIndex,
    epoch_batches,
    make_prototype,
)
from aad_bench.synth import SynthConfig, generate, write_corpus

FS = 128.0


# ---------------------------------------------------------------------------
# Gate 1: every decoder gradient matches central finite differences.


def test_every_gradient_matches_finite_differences():
    # eps=1e-4 central differences in 64-bit on a (4, 3, 6, 8) batch; every
    # entry of every learnable tensor must agree to relative error < 1e-4,
    # and the whole sweep must finish within a minute
    started = time.monotonic()
    rng = np.random.default_rng(20260814)
    batch = rng.normal(size=(4, 3, 6, 8))
    labels = np.array([0, 1, 0, 1])
    params = init_params(c_in=3, t_w=6, f=8, seed=0)
    _, trace = forward(params, batch, mode="train")
    _, grads = backward(params, trace, labels)

    eps = 1e-4
    checked = 0
    for name in LEARNABLE_FIELDS:
        tensor = getattr(params, name)
        analytic = getattr(grads, name)
        for index in np.ndindex(tensor.shape):
            orig = tensor[index]
            tensor[index] = orig + eps
            _, t_up = forward(params, batch, mode="train")
            up, _ = backward(params, t_up, labels)
            tensor[index] = orig - eps
            _, t_dn = forward(params, batch, mode="train")
            down, _ = backward(params, t_dn, labels)
            tensor[index] = orig
            numeric = (up - down) / (2 * eps)
            # the conv bias gradient is exactly zero (batch norm absorbs
            # per-map constants), so the denominator needs an absolute floor
            rel = abs(numeric - analytic[index]) / max(
                abs(numeric), abs(analytic[index]), 1e-6)
            assert rel < 1e-4, (name, index, numeric, float(analytic[index]), rel)
            checked += 1
    assert checked == sum(getattr(params, n).size for n in LEARNABLE_FIELDS)
    assert time.monotonic() - started < 60.0


# ---------------------------------------------------------------------------
# Gate 2: filter and wavelet outputs against closed-form oracles.


def test_signal_chain_matches_closed_form_oracles():
    # (a) band-pass gain at mid-band within 5% of unity and equal to the
    # analytic forward-backward Butterworth response to 1e-6
    cfg = PreprocessConfig()
    t = np.arange(int(20 * FS)) / FS
    s = np.cos(2 * np.pi * 25.0 * t)
    trial = Trial("S", "T", FS, np.stack([s, -s], axis=1), Direction.LEFT,
                  ["a", "b"], ["L", "R"])
    out = preprocess(trial, cfg).samples[:, 0]
    lo, hi = int(5 * FS), int(15 * FS)
    tt = np.arange(lo, hi) / FS
    measured = 2 * abs(np.sum(out[lo:hi] * np.exp(-2j * np.pi * 25.0 * tt))) / (hi - lo)
    warp = lambda g: 2 * FS * math.tan(math.pi * g / FS)
    w, wl, wh = warp(25.0), warp(cfg.band_lo_hz), warp(cfg.band_hi_hz)
    n_poles = cfg.filter_order // 2
    analytic = 1.0 / (1.0 + ((w * w - wl * wh) / ((wh - wl) * w)) ** (2 * n_poles))
    assert abs(measured - analytic) < 1e-6
    assert 0.95 <= measured <= 1.05

    # (b) DC rejection below 1e-6
    dc = np.ones((int(10 * FS), 2))
    dc[:, 1] = -1.0
    flat = preprocess(Trial("S", "T", FS, dc, Direction.LEFT, ["a", "b"],
                            ["L", "R"]), cfg).samples
    assert np.max(np.abs(flat)) < 1e-6

    # (c) a pure 10 Hz tone peaks at the 10 Hz bin at every interior frame
    cwt = CwtConfig()
    tone = np.cos(2 * np.pi * 10.0 * np.arange(int(60 * FS)) / FS)
    tone_trial = Trial("S", "T", FS, np.stack([tone, tone], axis=1),
                       Direction.LEFT, ["a", "b"], ["L", "L"])
    tf = cwt_log_energy(tone_trial, cwt)
    pad = wavelet_half_support(cwt, FS)
    frame_samples = np.rint(np.arange(tf.n_frames) * FS / cwt.frames_per_s).astype(int)
    interior = (frame_samples >= pad) & (frame_samples < tone_trial.n_samples - pad)
    assert interior.sum() > 500
    fi = tf.freqs_hz.index(10.0)
    assert np.all(tf.energy[0].argmax(axis=1)[interior] == fi)

    # (d) scaling the input by c shifts unclamped log-energies by 2 ln c
    rng = np.random.default_rng(11)
    noise = rng.normal(size=(int(30 * FS), 2))
    mk = lambda c: Trial("S", "T", FS, c * noise, Direction.LEFT,
                         ["a", "b"], ["L", "R"])
    base = cwt_log_energy(mk(1.0), cwt).energy
    scaled = cwt_log_energy(mk(3.7), cwt).energy
    floor_log = math.log(cwt.energy_floor)
    clear = (base > floor_log + 1e-6) & (scaled > floor_log + 1e-6)
    assert clear.mean() > 0.99
    assert np.max(np.abs((scaled - base)[clear] - 2 * math.log(3.7))) < 1e-9


# ---------------------------------------------------------------------------
# Gate 3: partitions never leak, checked by brute-force interval intersection.


def fabricated_tf_trials(rng):
    # 20 trials of uneven length, two channels, three frequency bins
    trials = []
    for i in range(20):
        frames = int(rng.integers(200, 401))
        trials.append(TfTrial(
            subject_id="S01",
            trial_id=f"T{i:02d}",
            label=Direction.LEFT if i % 2 == 0 else Direction.RIGHT,
            frames_per_s=10.0,
            freqs_hz=(8.0, 10.0, 12.0),
            energy=np.zeros((2, frames, 3), dtype=np.float32),
        ))
    return trials


def spans_of(windows, trial_ids):
    trial = np.array([trial_ids[w.trial_key] for w in windows], dtype=np.int64)
    start = np.array([w.start_frame for w in windows], dtype=np.int64)
    end = np.array([w.end_frame for w in windows], dtype=np.int64)
    return trial, start, end


def test_no_partition_leaks_train_into_test():
    rng = np.random.default_rng(42)
    checked_folds = 0
    for seed in range(100):
        trials = fabricated_tf_trials(rng)
        trial_ids = {t.trial_key: i for i, t in enumerate(trials)}
        for strategy in Strategy:
            for window_s, stride_s in ((1.0, 1.0), (3.0, 1.0)):
                plans = plan_folds(trials, strategy, window_s, stride_s, seed=seed)
                test_trial_sets = []
                for plan in plans:
                    tr_t, tr_s, tr_e = spans_of(plan.train, trial_ids)
                    te_t, te_s, te_e = spans_of(plan.test, trial_ids)
                    same = tr_t[None, :] == te_t[:, None]
                    overlap = (tr_s[None, :] < te_e[:, None]) & (te_s[:, None] < tr_e[None, :])
                    assert not np.any(same & overlap), (strategy, seed, window_s)
                    test_trial_sets.append({w.trial_key for w in plan.test})
                    checked_folds += 1

                if strategy is Strategy.CROSS_TRIAL:
                    # fold test sets partition the trial set
                    assert sum(len(s) for s in test_trial_sets) == 20
                    assert set.union(*test_trial_sets) == {t.trial_key for t in trials}

                if strategy is Strategy.WITHIN_TRIAL_WINDOWS:
                    # scattered windows are forced onto a non-overlapping grid
                    assert effective_stride(strategy, window_s, stride_s) == max(
                        stride_s, window_s)
                    onsets = {}
                    for plan in plans:
                        for w in plan.train + plan.test:
                            onsets.setdefault(w.trial_key, set()).add(w.start_frame)
                    step = int(max(stride_s, window_s) * 10.0)
                    for got in onsets.values():
                        assert sorted(got) == list(range(0, max(got) + 1, step))
    assert checked_folds == 100 * 3 * 2 * 4


# ---------------------------------------------------------------------------
# Gate 4: prototype sampler invariants over 1,000 draws.


def test_prototype_sampler_invariants():
    rng = np.random.default_rng(7)
    windows = []
    for t in range(8):
        label = Direction.LEFT if t % 2 == 0 else Direction.RIGHT
        for i in range(6):
            start = i * 10
            windows.append(TfWindow(
                subject_id="S01", trial_id=f"T{t}", start_frame=start,
                end_frame=start + 10, label=label,
                energy=rng.normal(size=(2, 10, 3))))
    pool = WindowIndex(windows)

    # K=1 returns the anchor's array itself, bit for bit
    cfg1 = PrototypeConfig(k=1)
    for anchor in windows[:10]:
        sample = make_prototype(anchor, pool, cfg1, rng)
        assert sample.energy is anchor.energy
        assert sample.provenance == [(anchor, 1.0)]

    # 1,000 draws at K=5: weights positive, sum to 1 within 1e-12, and the
    # prototype lies inside the element-wise envelope of its constituents
    cfg5 = PrototypeConfig(k=5)
    for draw in range(1000):
        anchor = windows[draw % len(windows)]
        sample = make_prototype(anchor, pool, cfg5, rng)
        weights = np.array([w for _, w in sample.provenance])
        assert len(weights) == 5
        assert np.all(weights > 0)
        assert abs(weights.sum() - 1.0) < 1e-12
        stack = np.stack([win.energy for win, _ in sample.provenance])
        slack = 1e-12
        assert np.all(sample.energy >= stack.min(axis=0) - slack)
        assert np.all(sample.energy <= stack.max(axis=0) + slack)
        assert {win.trial_key for win, _ in sample.provenance} >= {anchor.trial_key}

    # one epoch emits exactly one prototype per training window
    count = 0
    for samples, labels in epoch_batches(windows, cfg5, 16, rng):
        assert len(samples) == len(labels)
        count += len(samples)
    assert count == len(windows)


# ---------------------------------------------------------------------------
# Gate 5: signed-rank test exactness and approximation agreement.


def test_wilcoxon_exact_and_approximate_branches(monkeypatch):
    # five all-positive differences: exact two-sided p is 2/2^5
    res = wilcoxon_signed_rank([0.7, 0.8, 0.75, 0.9, 0.85],
                               [0.6, 0.7, 0.70, 0.8, 0.80])
    assert res.method == "exact"
    assert res.p_value == pytest.approx(0.0625, abs=1e-12)

    # exact vs normal-approximation agreement at n=15 over 50 instances;
    # lowering the enumeration cutoff forces the shipped normal branch onto
    # the same data
    rng = np.random.default_rng(99)
    cutoff = evaluate_mod.EXACT_WILCOXON_MAX_N
    worst = 0.0
    for _ in range(50):
        a = rng.normal(0.7, 0.05, size=15)
        b = a - rng.normal(0.01, 0.04, size=15)
        exact = wilcoxon_signed_rank(a, b)
        assert exact.method == "exact"
        monkeypatch.setattr(evaluate_mod, "EXACT_WILCOXON_MAX_N", 14)
        approx = wilcoxon_signed_rank(a, b)
        monkeypatch.setattr(evaluate_mod, "EXACT_WILCOXON_MAX_N", cutoff)
        assert approx.method == "normal"
        worst = max(worst, abs(exact.p_value - approx.p_value))
    assert worst < 0.02


# ---------------------------------------------------------------------------
# Gate 9 (fast): byte-identical reruns, worker-count invariance.


def small_run_config(out_dir, workers=1):
    return ExperimentConfig(
        out_dir=str(out_dir),
        synth=SynthConfig(n_subjects=2, n_trials=6, trial_s=15.0,
                          n_channels=4, seed=3),
        strategies=(Strategy.CROSS_TRIAL, Strategy.WITHIN_TRIAL_WINDOWS),
        window_lengths_s=(1.0,),
        k_values=(1, 10),
        epochs=2,
        n_repetitions=2,
        workers=workers,
        seed=5,
    )


def sha256_of(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_identical_runs_and_worker_counts_are_byte_identical(tmp_path):
    digests = {}
    for name, workers in (("first", 1), ("second", 1), ("eight", 8)):
        out = tmp_path / name
        assert run_experiment(small_run_config(out, workers)) == 0
        digests[name] = sha256_of(out / "results.csv")
    assert digests["first"] == digests["second"]
    assert digests["first"] == digests["eight"]


# ---------------------------------------------------------------------------
# Gate 10 (fast): a user-supplied trial corpus drives the full default grid.


def test_external_corpus_completes_full_grid_with_report(tmp_path):
    trials, report = generate(SynthConfig(
        n_subjects=2, n_trials=8, trial_s=24.0, n_channels=4, seed=11))
    corpus_dir = tmp_path / "corpus"
    manifest_path = write_corpus(trials, report, corpus_dir, name="external")

    out_dir = tmp_path / "out"
    config_path = tmp_path / "config.yaml"
    config_path.write_text(
        "dataset:\n"
        "  name: external\n"
        f"  manifest: {manifest_path}\n"
        f"out_dir: {out_dir}\n"
        "train:\n"
        "  epochs: 1\n"
        "seed: 2\n"
    )
    assert main(["run", "--config", str(config_path)]) == 0

    records = load_records(out_dir / "results.csv")
    # full default grid: 3 strategies x 4 windows x 2 K x 4 reps x 4 folds
    # for each of the 2 subjects
    assert len(records) == 3 * 4 * 2 * 4 * 4 * 2
    assert {r.strategy.value for r in records} == {"I", "II", "III"}
    assert {r.window_s for r in records} == {0.5, 1.0, 3.0, 5.0}
    assert {r.k for r in records} == {1, 10}

    report_dir = tmp_path / "report"
    assert main(["report", "--results", str(out_dir / "results.csv"),
                 "--out", str(report_dir)]) == 0
    tables = (report_dir / "tables.md").read_text()
    # accuracy tables keep the strategies-as-columns, model/K-as-rows layout
    assert "| model | Strategy I | Strategy II | Strategy III |" in tables
    assert "| eegwavenet-K1 |" in tables
    assert "| eegwavenet-K10 |" in tables
    assert (report_dir / "wilcoxon.csv").exists()
    assert (report_dir / "slopes.csv").exists()


# ---------------------------------------------------------------------------
# Phenomenon gates: full-size grids on the calibrated synthetic corpus.
# Everything below shares two session-scoped benchmark runs and takes a few
# CPU-hours in total.


def subject_means(records, strategy, k):
    picked = [s for s in summarize(records)
              if s.config.strategy == strategy.value and s.config.k == k]
    assert len(picked) == 8, f"expected 8 subjects, got {len(picked)}"
    return {s.subject_id: s.mean_accuracy for s in picked}


@pytest.fixture(scope="session")
def calibrated_runs(tmp_path_factory):
    """Strategy I vs III at K=1, plus Strategy I at K=10, on the default
    corpus: 8 subjects, 20 x 60 s trials, 16 channels, 1 s windows."""
    base = tmp_path_factory.mktemp("calibrated")
    t0 = os.times()
    rc_a = run_experiment(ExperimentConfig(
        out_dir=str(base / "strategies"),
        synth=SynthConfig(),
        strategies=(Strategy.CROSS_TRIAL, Strategy.WITHIN_TRIAL_WINDOWS),
        window_lengths_s=(1.0,),
        k_values=(1,),
        workers=1,
        seed=0,
    ))
    t1 = os.times()
    rc_b = run_experiment(ExperimentConfig(
        out_dir=str(base / "prototypes"),
        synth=SynthConfig(),
        strategies=(Strategy.CROSS_TRIAL,),
        window_lengths_s=(1.0,),
        k_values=(10,),
        workers=1,
        seed=0,
    ))
    assert rc_a == 0 and rc_b == 0
    cpu_strategies = sum(t1[:4]) - sum(t0[:4])
    return {
        "strategies": load_records(base / "strategies" / "results.csv"),
        "prototypes": load_records(base / "prototypes" / "results.csv"),
        "cpu_strategies_s": cpu_strategies,
    }


def test_within_trial_partitions_inflate_accuracy(calibrated_runs):
    # window-scattering (Strategy III) must beat cross-trial (Strategy I) by
    # at least 5 accuracy points at K=1, and the comparison must cost no more
    # than 7200 CPU-seconds (30 min of 4-way parallel work)
    records = calibrated_runs["strategies"]
    mean_i = np.mean(list(subject_means(records, Strategy.CROSS_TRIAL, 1).values()))
    mean_iii = np.mean(list(subject_means(
        records, Strategy.WITHIN_TRIAL_WINDOWS, 1).values()))
    assert mean_iii - mean_i >= 0.05, (mean_i, mean_iii)
    assert calibrated_runs["cpu_strategies_s"] <= 7200.0


def test_prototype_training_beats_the_baseline_cross_trial(calibrated_runs):
    # K=10 must beat K=1 under Strategy I by >= 1 point on average with a
    # two-sided signed-rank p < 0.1 across the 8 subjects
    k1 = subject_means(calibrated_runs["strategies"], Strategy.CROSS_TRIAL, 1)
    k10 = subject_means(calibrated_runs["prototypes"], Strategy.CROSS_TRIAL, 10)
    assert sorted(k1) == sorted(k10)
    subjects = sorted(k1)
    diffs = [k10[s] - k1[s] for s in subjects]
    assert float(np.mean(diffs)) >= 0.01, dict(zip(subjects, diffs))
    res = wilcoxon_signed_rank([k10[s] for s in subjects],
                               [k1[s] for s in subjects])
    assert res.p_value < 0.1, (res, dict(zip(subjects, diffs)))


@pytest.fixture(scope="session")
def null_run(tmp_path_factory):
    """Same corpus with the attention contrast switched off."""
    base = tmp_path_factory.mktemp("null")
    rc = run_experiment(ExperimentConfig(
        out_dir=str(base / "out"),
        synth=SynthConfig(attention_strength=0.0),
        strategies=(Strategy.CROSS_TRIAL,),
        window_lengths_s=(1.0,),
        k_values=(1, 10),
        workers=1,
        seed=0,
    ))
    assert rc == 0
    return load_records(base / "out" / "results.csv")


def test_no_attention_contrast_means_chance_decoding(null_run):
    # with the contrast off, every model configuration must stay within
    # [0.45, 0.55] under Strategy I: fingerprints alone cannot fake decoding
    for k in (1, 10):
        means = subject_means(null_run, Strategy.CROSS_TRIAL, k)
        overall = float(np.mean(list(means.values())))
        assert 0.45 <= overall <= 0.55, (k, means)
