"""Synthetic corpus generator: spectral structure, determinism, calibration.

The lateralization checks compute alpha-band power from the raw samples with
a plain periodogram, independent of the generator's own bookkeeping.
"""

import json

import numpy as np
import pytest

from aad_bench.core_data import Direction, load_manifest, read_trial
from aad_bench.synth import (
    ALPHA_GUARD_HZ,
    OSC_RANGE_HZ,
    SynthConfig,
    calibrate,
    generate,
    hemisphere_tags,
    subject_ids,
    write_corpus,
)


def small_cfg(**kw):
    base = dict(n_subjects=2, n_trials=6, trial_s=15.0, n_channels=4, seed=0)
    base.update(kw)
    return SynthConfig(**base)


def alpha_ratio(trial, band=(8.0, 12.0)):
    """Left/right alpha-band power ratio straight from the samples."""
    x = trial.samples.T.astype(np.float64)
    half = x.shape[0] // 2
    spec = np.abs(np.fft.rfft(x, axis=1)) ** 2
    freqs = np.fft.rfftfreq(x.shape[1], 1.0 / trial.fs_hz)
    sel = (freqs >= band[0]) & (freqs <= band[1])
    return spec[:half, sel].sum() / spec[half:, sel].sum()


def test_config_validation():
    with pytest.raises(ValueError):
        small_cfg(n_channels=5)
    with pytest.raises(ValueError):
        small_cfg(trial_s=5.0)
    with pytest.raises(ValueError):
        small_cfg(alpha_band=(8.0, 70.0))
    with pytest.raises(ValueError):
        small_cfg(noise_scale=0.0)
    with pytest.raises(ValueError):
        small_cfg(attention_strength=-0.1)


def test_corpus_shape_and_metadata():
    cfg = small_cfg()
    trials, report = generate(cfg)
    assert len(trials) == cfg.n_subjects * cfg.n_trials
    assert subject_ids(cfg) == ["S01", "S02"]
    assert hemisphere_tags(4) == ("L", "L", "R", "R")
    for trial in trials:
        assert trial.samples.dtype == np.float32
        assert trial.samples.shape == (int(15.0 * 128.0), 4)
        assert trial.fs_hz == 128.0
        assert tuple(trial.hemisphere) == ("L", "L", "R", "R")
        assert trial.channel_names == ("L01", "L02", "R01", "R02")
    assert len(report.trials) == len(trials)


def test_labels_alternate_and_balance():
    cfg = small_cfg()
    trials, _ = generate(cfg)
    for s in range(cfg.n_subjects):
        labels = [t.label for t in trials if t.subject_id == subject_ids(cfg)[s]]
        assert labels == [Direction.LEFT, Direction.RIGHT] * 3
        assert labels.count(Direction.LEFT) == labels.count(Direction.RIGHT)


def test_generation_is_byte_deterministic():
    a, _ = generate(small_cfg())
    b, _ = generate(small_cfg())
    for ta, tb in zip(a, b):
        assert ta.samples.tobytes() == tb.samples.tobytes()
    c, _ = generate(small_cfg(seed=1))
    assert a[0].samples.tobytes() != c[0].samples.tobytes()


def test_trials_depend_only_on_their_own_index():
    # growing the corpus must not disturb already-generated trials
    short, _ = generate(small_cfg(n_trials=2))
    long, _ = generate(small_cfg(n_trials=6))
    by_key = {(t.subject_id, t.trial_id): t for t in long}
    for t in short:
        assert t.samples.tobytes() == by_key[(t.subject_id, t.trial_id)].samples.tobytes()


def test_no_lateralization_without_attention_signal():
    cfg = small_cfg(n_subjects=1, n_trials=20, n_channels=16,
                    attention_strength=0.0, fingerprint_strength=0.0)
    trials, _ = generate(cfg)
    ratios = np.array([alpha_ratio(t) for t in trials])
    assert abs(ratios.mean() - 1.0) < 0.05


def test_fingerprints_do_not_leak_lateralization():
    # fingerprints include a per-trial alpha asymmetry, so individual ratios
    # scatter; what must hold is label independence: neither labeled group is
    # systematically lateralized, and the log-ratios are centered near zero
    cfg = small_cfg(n_subjects=1, n_trials=20, n_channels=16,
                    attention_strength=0.0, fingerprint_strength=0.6)
    trials, _ = generate(cfg)
    log_ratios = np.log([alpha_ratio(t) for t in trials])
    by_label = {
        lab: log_ratios[[t.label is lab for t in trials]]
        for lab in (Direction.LEFT, Direction.RIGHT)
    }
    assert abs(log_ratios.mean()) < 0.45  # 3 sigma for the jitter scale used
    assert abs(by_label[Direction.LEFT].mean() - by_label[Direction.RIGHT].mean()) < 0.8


def test_attention_lateralizes_alpha_toward_the_attended_side():
    cfg = small_cfg(n_subjects=1, n_trials=20, attention_strength=0.5)
    trials, report = generate(cfg)
    left, right = [], []
    for trial, tr in zip(trials, report.trials):
        r = alpha_ratio(trial)
        (left if trial.label is Direction.LEFT else right).append(r)
        # every trial still lateralizes to the labeled side
        assert (r > 1.0) == (trial.label is Direction.LEFT)
        assert tr.alpha_lr_ratio == pytest.approx(r, rel=1e-6)
    assert np.mean(left) > 1.5
    assert np.mean(right) < 1.0 / 1.5


def test_lateralization_strength_is_monotone():
    means = []
    for rho in (0.0, 0.25, 0.5):
        cfg = small_cfg(n_subjects=1, n_trials=10, attention_strength=rho)
        trials, _ = generate(cfg)
        left = [alpha_ratio(t) for t in trials if t.label is Direction.LEFT]
        means.append(np.mean(left))
    assert means[0] < means[1] < means[2]


def test_fingerprint_frequencies_avoid_alpha():
    cfg = small_cfg(fingerprint_strength=0.8)
    _, report = generate(cfg)
    for tr in report.trials:
        for f in tr.fingerprint_freqs_hz:
            assert OSC_RANGE_HZ[0] <= f <= OSC_RANGE_HZ[1]
            assert not (ALPHA_GUARD_HZ[0] <= f <= ALPHA_GUARD_HZ[1])
        assert 9.0 <= tr.alpha_freq_hz <= 11.0  # band shrunk by 25% margins


def test_fingerprints_make_trials_identifiable():
    # nearest-centroid trial identification on channel covariance features:
    # short chunks from held-out halves of each trial point back to their
    # own trial well above the 1/8 chance level
    cfg = small_cfg(n_subjects=1, n_trials=8, trial_s=16.0,
                    attention_strength=0.0, fingerprint_strength=0.8)
    trials, _ = generate(cfg)
    feats, labels = [], []
    for ti, trial in enumerate(trials):
        x = trial.samples.T.astype(np.float64)
        chunks = x.reshape(4, 8, -1)  # 8 two-second chunks
        for ci in range(8):
            cov = np.cov(chunks[:, ci, :])
            feats.append(cov[np.triu_indices(4)])
            labels.append(ti)
    feats = np.array(feats)
    labels = np.array(labels)
    train = np.arange(len(labels)) % 8 < 4
    centroids = np.array([feats[train & (labels == t)].mean(axis=0)
                          for t in range(8)])
    d = np.linalg.norm(feats[~train][:, None, :] - centroids[None], axis=2)
    accuracy = float((d.argmin(axis=1) == labels[~train]).mean())
    assert accuracy > 0.5  # chance is 1/8

    cfg = small_cfg(fingerprint_strength=0.0)
    _, report = generate(cfg)
    assert all(t.mixing_perturbation_norm == 0.0 for t in report.trials)


def test_write_corpus_layout(tmp_path):
    cfg = small_cfg()
    trials, report = generate(cfg)
    manifest_path = write_corpus(trials, report, tmp_path, name="demo")
    manifest = load_manifest(manifest_path)
    assert manifest.name == "demo"
    assert manifest.subjects == ["S01", "S02"]
    assert len(manifest.trials) == 12
    assert (tmp_path / "S01" / "T01.eegtrial").exists()
    back = read_trial(manifest.trials[0].path)
    assert back.samples.tobytes() == trials[0].samples.tobytes()
    assert back.label == trials[0].label

    report_doc = json.loads((tmp_path / "synth_report.json").read_text())
    assert report_doc["config"]["n_subjects"] == 2
    assert len(report_doc["trials"]) == 12
    assert {"alpha_freq_hz", "alpha_lr_ratio"} <= set(report_doc["trials"][0])


class TestCalibrate:
    def test_converges_on_a_monotone_pipeline(self):
        cfg = small_cfg()
        pipeline = lambda c: 0.5 + 0.4 * c.attention_strength
        result = calibrate(cfg, pipeline, target=(0.65, 0.75))
        assert result.converged
        assert 0.65 <= result.accuracy <= 0.75
        assert result.accuracy == 0.5 + 0.4 * result.config.attention_strength
        assert result.config.seed == cfg.seed

    def test_reports_failure_when_target_unreachable(self):
        cfg = small_cfg()
        result = calibrate(cfg, lambda c: 0.5, target=(0.65, 0.75), max_iter=6)
        assert not result.converged
        assert result.accuracy == 0.5
        assert len(result.history) <= 6

    def test_returns_best_probe_on_failure(self):
        cfg = small_cfg()
        # saturating pipeline that skips the band: jumps 0.6 -> 0.9
        pipeline = lambda c: 0.6 if c.attention_strength < 0.4 else 0.9
        result = calibrate(cfg, pipeline, target=(0.68, 0.72), max_iter=8)
        assert not result.converged
        assert result.accuracy in (0.6, 0.9)
        probed = [acc for _, acc in result.history]
        assert abs(result.accuracy - 0.7) == min(abs(a - 0.7) for a in probed)
