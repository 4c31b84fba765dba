"""Synthetic EEG corpus with controllable trial fingerprints and
attention-dependent alpha lateralization.

Each trial is built from three ingredients:

* a pink-noise bed, one 1/f-shaped noise process per channel;
* a trial fingerprint, stable for the whole trial: the bed is passed
  through a per-trial channel mixing matrix I + rho_f * G (G random with
  unit spectral norm), two narrowband oscillators at random non-alpha
  frequencies with random per-channel gains are added with amplitude
  scaled by rho_f, and the alpha oscillator itself carries a per-trial
  hemispheric asymmetry offset, drawn from a fixed symmetric profile
  (ASYM_PROFILE * rho_f) that is independent of the attended side;
* an attention signal: an alpha-band oscillator at the subject's individual
  alpha frequency whose per-channel amplitude is scaled by (1 + rho_a) on
  the hemisphere ipsilateral to the attended direction and by (1 - rho_a)
  contralateral.

Labels alternate Left/Right within each subject, the first half of the
channels is tagged hemisphere L and the second half R, and every trial draws
its randomness from a sub-seed of (seed, subject index, trial index), so a
corpus is byte-identical for a given config.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .core_data import (DatasetManifest, Direction, ManifestEntry, Trial,
                        write_manifest, write_trial)

# Fingerprint oscillators are drawn outside this guard band around alpha and
# inside the analysis passband.
ALPHA_GUARD_HZ = (7.0, 13.0)
OSC_RANGE_HZ = (3.0, 45.0)
N_FINGERPRINT_OSC = 2
# Oscillator amplitude per unit of fingerprint_strength * noise_scale. Kept
# well below the alpha amplitude: the oscillators mark trials without drowning
# the decision band.
OSC_AMP = 0.1
# Per-trial hemispheric alpha asymmetry offsets (log-amplitude units per unit
# of fingerprint_strength). This is the part of the trial fingerprint that
# sits inside the decision-relevant band. The profile is a fixed symmetric
# multiset, permuted once per subject and sign-flipped on every second pass:
# every subject carries the same offset energy, each label sees every
# magnitude with both signs, and the three strong entries are large enough
# that those trials' alpha asymmetry runs decisively against their label at
# moderate attention strengths, not merely near the decision boundary.
ASYM_PROFILE = (1.2, -1.2, 1.2, -0.15, 0.15, -0.15, 0.15, -0.15, 0.15, -0.15)
# Alpha oscillator amplitude relative to the noise bed. Keeps single-window
# alpha estimates stable so the trial-level asymmetry above, not per-window
# noise, is the dominant error source.
ALPHA_AMP = 2.0


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 8
    n_trials: int = 20
    trial_s: float = 60.0
    n_channels: int = 16
    fs_hz: float = 128.0
    fingerprint_strength: float = 0.6
    attention_strength: float = 0.2
    noise_scale: float = 1.0
    alpha_band: tuple[float, float] = (8.0, 12.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1 or self.n_trials < 1:
            raise ValueError("need at least one subject and one trial")
        if self.n_channels < 2 or self.n_channels % 2 != 0:
            raise ValueError(f"n_channels must be even and >= 2, got {self.n_channels}")
        if self.trial_s < 10.0:
            raise ValueError(f"trial_s must be >= 10, got {self.trial_s}")
        if self.fs_hz <= 0:
            raise ValueError(f"fs_hz must be positive, got {self.fs_hz}")
        if self.fingerprint_strength < 0 or self.attention_strength < 0:
            raise ValueError("strength parameters must be >= 0")
        if self.noise_scale <= 0:
            raise ValueError(f"noise_scale must be > 0, got {self.noise_scale}")
        lo, hi = self.alpha_band
        if not 0 < lo < hi < self.fs_hz / 2:
            raise ValueError(f"alpha_band {self.alpha_band} not inside (0, fs/2)")


@dataclass(frozen=True)
class TrialReport:
    subject_id: str
    trial_id: str
    label: str
    alpha_freq_hz: float
    alpha_lr_ratio: float
    fingerprint_freqs_hz: tuple[float, float]
    mixing_perturbation_norm: float


@dataclass
class SynthReport:
    config: SynthConfig
    trials: list[TrialReport]

    def to_json(self) -> str:
        payload = {
            "config": asdict(self.config),
            "trials": [asdict(t) for t in self.trials],
        }
        return json.dumps(payload, indent=2)


def _pink_noise(rng: np.random.Generator, n_channels: int, n_samples: int,
                fs_hz: float) -> np.ndarray:
    """1/f-amplitude noise, unit variance per channel."""
    white = rng.standard_normal((n_channels, n_samples))
    spec = np.fft.rfft(white, axis=1)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / fs_hz)
    shape = np.zeros_like(freqs)
    shape[1:] = 1.0 / np.sqrt(freqs[1:])
    x = np.fft.irfft(spec * shape, n=n_samples, axis=1)
    x /= x.std(axis=1, keepdims=True)
    return x


def _draw_non_alpha_freq(rng: np.random.Generator) -> float:
    lo, hi = OSC_RANGE_HZ
    g_lo, g_hi = ALPHA_GUARD_HZ
    while True:
        f = float(rng.uniform(lo, hi))
        if not g_lo <= f <= g_hi:
            return f


def subject_ids(cfg: SynthConfig) -> list[str]:
    return [f"S{i + 1:02d}" for i in range(cfg.n_subjects)]


def hemisphere_tags(n_channels: int) -> tuple[str, ...]:
    half = n_channels // 2
    return tuple(["L"] * half + ["R"] * half)


def _subject_traits(cfg: SynthConfig, subj_idx: int) -> tuple[float, np.ndarray]:
    """Stable per-subject draws from a subject-level stream (so they do not
    depend on the trial count): the individual alpha frequency, taken from
    the middle half of the alpha band, and the subject's permutation of the
    asymmetry profile."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, subj_idx]))
    band_lo, band_hi = cfg.alpha_band
    margin = 0.25 * (band_hi - band_lo)
    f_alpha = float(rng.uniform(band_lo + margin, band_hi - margin))
    asym_perm = rng.permutation(len(ASYM_PROFILE))
    return f_alpha, asym_perm


def _trial_asym(cfg: SynthConfig, asym_perm: np.ndarray, trial_idx: int) -> float:
    cycle, pos = divmod(trial_idx, len(ASYM_PROFILE))
    flip = 1.0 if cycle % 2 == 0 else -1.0
    return flip * ASYM_PROFILE[int(asym_perm[pos])] * cfg.fingerprint_strength


def _make_trial(cfg: SynthConfig, subj_idx: int, trial_idx: int,
                f_alpha: float, asym: float) -> tuple[Trial, TrialReport]:
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, subj_idx, trial_idx]))
    n = int(round(cfg.trial_s * cfg.fs_hz))
    c = cfg.n_channels
    half = c // 2
    t = np.arange(n) / cfg.fs_hz
    label = Direction.LEFT if trial_idx % 2 == 0 else Direction.RIGHT

    bed = _pink_noise(rng, c, n, cfg.fs_hz) * cfg.noise_scale

    g = rng.standard_normal((c, c))
    g /= np.linalg.norm(g, 2)
    mixing = np.eye(c) + cfg.fingerprint_strength * g
    x = mixing @ bed

    osc_freqs = []
    for _ in range(N_FINGERPRINT_OSC):
        f_osc = _draw_non_alpha_freq(rng)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        gains = rng.standard_normal(c)
        amp = OSC_AMP * cfg.fingerprint_strength * cfg.noise_scale
        x += amp * gains[:, None] * np.sin(2.0 * np.pi * f_osc * t + phase)[None, :]
        osc_freqs.append(f_osc)

    phases = rng.uniform(0.0, 2.0 * np.pi, size=c)
    # Homologous left/right channel pairs share a base gain, so with
    # attention_strength 0 the left/right alpha power ratio is exactly
    # symmetric and only the hemisphere factors below separate the sides.
    pair_gain = rng.uniform(0.5, 1.5, size=half)
    base_gain = np.concatenate([pair_gain, pair_gain])
    ipsi = 1.0 + cfg.attention_strength
    contra = 1.0 - cfg.attention_strength
    l_fac, r_fac = (ipsi, contra) if label is Direction.LEFT else (contra, ipsi)
    l_fac *= math.exp(0.5 * asym)
    r_fac *= math.exp(-0.5 * asym)
    hemi_factor = np.concatenate([np.full(half, l_fac), np.full(c - half, r_fac)])
    alpha_amp = cfg.noise_scale * ALPHA_AMP * base_gain * hemi_factor
    x += alpha_amp[:, None] * np.sin(2.0 * np.pi * f_alpha * t[None, :] + phases[:, None])

    samples = x.T.astype(np.float32)
    subject_id = f"S{subj_idx + 1:02d}"
    trial_id = f"T{trial_idx + 1:02d}"
    trial = Trial(
        subject_id=subject_id,
        trial_id=trial_id,
        fs_hz=cfg.fs_hz,
        samples=samples,
        label=label,
        channel_names=tuple(f"{h}{i % half + 1:02d}" for i, h in
                            enumerate(hemisphere_tags(c))),
        hemisphere=hemisphere_tags(c),
    )
    report = TrialReport(
        subject_id=subject_id,
        trial_id=trial_id,
        label=label.name,
        alpha_freq_hz=f_alpha,
        alpha_lr_ratio=_alpha_lr_ratio(samples.T, cfg),
        fingerprint_freqs_hz=(osc_freqs[0], osc_freqs[1]),
        mixing_perturbation_norm=cfg.fingerprint_strength,
    )
    return trial, report


def _alpha_lr_ratio(x: np.ndarray, cfg: SynthConfig) -> float:
    """Left/right hemisphere power ratio inside the alpha band, from the
    raw periodogram of the generated samples (channels x time input)."""
    half = cfg.n_channels // 2
    spec = np.abs(np.fft.rfft(x, axis=1)) ** 2
    freqs = np.fft.rfftfreq(x.shape[1], 1.0 / cfg.fs_hz)
    band = (freqs >= cfg.alpha_band[0]) & (freqs <= cfg.alpha_band[1])
    left = float(spec[:half, band].sum())
    right = float(spec[half:, band].sum())
    return left / right


def generate(cfg: SynthConfig) -> tuple[list[Trial], SynthReport]:
    """Build the full corpus; deterministic per cfg.seed."""
    trials = []
    reports = []
    for s in range(cfg.n_subjects):
        f_alpha, asym_perm = _subject_traits(cfg, s)
        for t in range(cfg.n_trials):
            trial, report = _make_trial(cfg, s, t, f_alpha,
                                        _trial_asym(cfg, asym_perm, t))
            trials.append(trial)
            reports.append(report)
    return trials, SynthReport(cfg, reports)


def write_corpus(trials: list[Trial], report: SynthReport, out_dir,
                 name: str = "synth") -> str:
    """Write one file per trial plus a manifest and the generation report;
    returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for trial in trials:
        subj_dir = os.path.join(out_dir, trial.subject_id)
        os.makedirs(subj_dir, exist_ok=True)
        path = os.path.join(subj_dir, f"{trial.trial_id}.eegtrial")
        write_trial(trial, path)
        entries.append(ManifestEntry(
            subject_id=trial.subject_id,
            trial_id=trial.trial_id,
            path=path,
            label=trial.label,
            duration_s=trial.duration_s,
        ))
    manifest = DatasetManifest(
        name=name,
        subjects=sorted({e.subject_id for e in entries}),
        trials=entries,
    )
    manifest_path = os.path.join(out_dir, "manifest.json")
    write_manifest(manifest, manifest_path)
    with open(os.path.join(out_dir, "synth_report.json"), "w") as fh:
        fh.write(report.to_json())
    return manifest_path


@dataclass
class CalibrationResult:
    config: SynthConfig
    accuracy: float
    converged: bool
    history: list[tuple[float, float]]


def calibrate(cfg: SynthConfig, pipeline, target: tuple[float, float] = (0.65, 0.75),
              lo: float = 0.0, hi: float = 1.0, max_iter: int = 10
              ) -> CalibrationResult:
    """Bisect attention_strength until `pipeline` (a SynthConfig -> accuracy
    callable) lands inside `target`; on budget exhaustion returns the best
    point found with converged=False."""
    t_lo, t_hi = target
    mid_target = 0.5 * (t_lo + t_hi)
    history: list[tuple[float, float]] = []
    best: tuple[float, float] | None = None
    for _ in range(max_iter):
        rho = 0.5 * (lo + hi)
        candidate = replace(cfg, attention_strength=rho)
        acc = float(pipeline(candidate))
        history.append((rho, acc))
        if best is None or abs(acc - mid_target) < abs(best[1] - mid_target):
            best = (rho, acc)
        if t_lo <= acc <= t_hi:
            return CalibrationResult(candidate, acc, True, history)
        if acc < t_lo:
            lo = rho
        else:
            hi = rho
        if math.isclose(lo, hi, abs_tol=1e-6):
            break
    final = replace(cfg, attention_strength=best[0])
    return CalibrationResult(final, best[1], False, history)
