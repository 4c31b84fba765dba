"""Domain types shared across the pipeline, plus the portable trial file format.

A recording is organized into trials: continuous multichannel EEG segments
during which the listener attends one fixed direction. Trials are stored on
disk in the EEGTRIAL v1 format, a single JSON header line followed by the
raw float32 sample payload, so that corpora can be inspected with `head`
and parsed without vendor tooling.

EEGTRIAL v1 layout:
    line 1:  UTF-8 JSON object terminated by '\\n' with keys
             format ("EEGTRIAL"), version (1), subject_id, trial_id,
             fs_hz, n_channels, n_samples, label (0=left, 1=right),
             channel_names, hemisphere ("L"/"R"/"M" per channel)
    rest:    n_samples * n_channels little-endian float32 values,
             time-major (sample index outer, channel index inner)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np


class Direction(IntEnum):
    """Attended direction. Integer codes are part of the file format."""

    LEFT = 0
    RIGHT = 1


VALID_HEMISPHERES = ("L", "R", "M")


@dataclass(eq=False)
class Trial:
    """One continuous EEG recording segment with a single attention label.

    Attributes:
        subject_id: Subject identifier.
        trial_id: Trial identifier, unique within the subject.
        fs_hz: Sampling rate in Hz.
        samples: Signal array of shape (n_samples, n_channels).
        label: Attended direction for the whole trial.
        channel_names: One name per channel.
        hemisphere: "L", "R" or "M" (midline) per channel.
    """

    subject_id: str
    trial_id: str
    fs_hz: float
    samples: np.ndarray
    label: Direction
    channel_names: list[str]
    hemisphere: list[str]

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2D (time, channels), got shape {self.samples.shape}")
        n_samples, n_channels = self.samples.shape
        if n_channels < 1:
            raise ValueError("trial must have at least one channel")
        if self.fs_hz <= 0:
            raise ValueError(f"fs_hz must be positive, got {self.fs_hz}")
        if n_samples < self.fs_hz:
            raise ValueError(
                f"trial must hold at least 1 s of data: {n_samples} samples at {self.fs_hz} Hz"
            )
        if len(self.channel_names) != n_channels:
            raise ValueError(
                f"channel_names has {len(self.channel_names)} entries for {n_channels} channels"
            )
        if len(self.hemisphere) != n_channels:
            raise ValueError(
                f"hemisphere has {len(self.hemisphere)} entries for {n_channels} channels"
            )
        bad = set(self.hemisphere) - set(VALID_HEMISPHERES)
        if bad:
            raise ValueError(f"hemisphere tags must be in {VALID_HEMISPHERES}, got {sorted(bad)}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trial samples contain non-finite values")
        self.label = Direction(self.label)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs_hz


@dataclass(eq=False)
class TfTrial:
    """Log-energy time-frequency representation of one trial.

    Attributes:
        energy: Array of shape (n_channels, n_frames, n_freqs), natural-log
            energy values. Finite by construction (energy is floor-clamped
            before the log).
        frames_per_s: Frame rate of the time axis.
        freqs_hz: Strictly ascending analysis frequencies, within [2, 50] Hz.
    """

    subject_id: str
    trial_id: str
    label: Direction
    frames_per_s: float
    freqs_hz: tuple[float, ...]
    energy: np.ndarray

    def __post_init__(self):
        if self.energy.ndim != 3:
            raise ValueError(
                f"energy must be 3D (channels, frames, freqs), got shape {self.energy.shape}"
            )
        if self.energy.shape[2] != len(self.freqs_hz):
            raise ValueError(
                f"energy has {self.energy.shape[2]} frequency bins for {len(self.freqs_hz)} freqs"
            )
        freqs = np.asarray(self.freqs_hz, dtype=float)
        if freqs.size == 0 or np.any(np.diff(freqs) <= 0):
            raise ValueError("freqs_hz must be non-empty and strictly ascending")
        if freqs[0] < 2.0 or freqs[-1] > 50.0:
            raise ValueError(f"freqs_hz must lie within [2, 50] Hz, got [{freqs[0]}, {freqs[-1]}]")
        if self.frames_per_s <= 0:
            raise ValueError(f"frames_per_s must be positive, got {self.frames_per_s}")
        if not np.all(np.isfinite(self.energy)):
            raise ValueError("energy contains non-finite values")
        self.label = Direction(self.label)

    @property
    def n_channels(self) -> int:
        return self.energy.shape[0]

    @property
    def n_frames(self) -> int:
        return self.energy.shape[1]

    @property
    def trial_key(self) -> tuple[str, str]:
        return (self.subject_id, self.trial_id)


@dataclass(eq=False)
class TfWindow:
    """A fixed-length slice of a TfTrial used as one classification instance.

    `energy` is a view onto the source trial's array, shape
    (n_channels, end_frame - start_frame, n_freqs). The half-open frame
    interval [start_frame, end_frame) locates the window inside its trial.
    """

    subject_id: str
    trial_id: str
    start_frame: int
    end_frame: int
    label: Direction
    energy: np.ndarray

    def __post_init__(self):
        if self.end_frame <= self.start_frame:
            raise ValueError(f"empty window [{self.start_frame}, {self.end_frame})")
        if self.energy.shape[1] != self.end_frame - self.start_frame:
            raise ValueError("energy frame count does not match the window span")
        self.label = Direction(self.label)

    @property
    def trial_key(self) -> tuple[str, str]:
        return (self.subject_id, self.trial_id)

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    trial_id: str
    path: Path
    label: Direction
    duration_s: float


@dataclass
class DatasetManifest:
    """Catalog of a trial corpus: metadata only, payloads stay on disk."""

    name: str
    subjects: list[str]
    trials: list[ManifestEntry] = field(default_factory=list)


def write_trial(trial: Trial, path: Path | str) -> None:
    """Write `trial` to `path` in EEGTRIAL v1 format.

    Samples are stored as little-endian float32; pass float32 data for a
    bit-exact round trip.
    """
    if not np.all(np.isfinite(trial.samples)):
        raise ValueError("refusing to write non-finite samples")
    header = {
        "format": "EEGTRIAL",
        "version": 1,
        "subject_id": trial.subject_id,
        "trial_id": trial.trial_id,
        "fs_hz": float(trial.fs_hz),
        "n_channels": trial.n_channels,
        "n_samples": trial.n_samples,
        "label": int(trial.label),
        "channel_names": list(trial.channel_names),
        "hemisphere": list(trial.hemisphere),
    }
    payload = np.ascontiguousarray(trial.samples, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def read_trial(path: Path | str) -> Trial:
    """Read an EEGTRIAL v1 file; inverse of write_trial.

    Raises ValueError on a malformed header, a payload whose size does not
    match the header, or non-finite payload values.
    """
    with open(path, "rb") as fh:
        header_line = fh.readline()
        if not header_line.endswith(b"\n"):
            raise ValueError(f"{path}: missing header line")
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: malformed header: {exc}") from exc
        if header.get("format") != "EEGTRIAL" or header.get("version") != 1:
            raise ValueError(f"{path}: not an EEGTRIAL v1 file")
        required = ("subject_id", "trial_id", "fs_hz", "n_channels", "n_samples",
                    "label", "channel_names", "hemisphere")
        missing = [k for k in required if k not in header]
        if missing:
            raise ValueError(f"{path}: header missing fields {missing}")
        n_samples = int(header["n_samples"])
        n_channels = int(header["n_channels"])
        payload = fh.read()
    expected = n_samples * n_channels * 4
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload size mismatch: expected {expected} bytes, got {len(payload)}"
        )
    samples = np.frombuffer(payload, dtype="<f4").reshape(n_samples, n_channels)
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"{path}: payload contains non-finite values")
    return Trial(
        subject_id=header["subject_id"],
        trial_id=header["trial_id"],
        fs_hz=float(header["fs_hz"]),
        samples=samples,
        label=Direction(int(header["label"])),
        channel_names=list(header["channel_names"]),
        hemisphere=list(header["hemisphere"]),
    )


def write_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    """Write a dataset manifest as JSON. Trial paths are stored relative to
    the manifest's directory when possible."""
    path = Path(path)
    base = path.parent.resolve()
    entries = []
    for entry in manifest.trials:
        p = Path(entry.path)
        try:
            rel = p.resolve().relative_to(base)
        except ValueError:
            rel = p
        entries.append({
            "subject_id": entry.subject_id,
            "trial_id": entry.trial_id,
            "path": str(rel),
            "label": int(entry.label),
            "duration_s": float(entry.duration_s),
        })
    doc = {
        "format": "EEGMANIFEST",
        "version": 1,
        "name": manifest.name,
        "subjects": list(manifest.subjects),
        "trials": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_manifest(path: Path | str) -> DatasetManifest:
    """Load a manifest. Validates id uniqueness and that every referenced
    trial file exists; sample payloads are not read."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "EEGMANIFEST" or doc.get("version") != 1:
        raise ValueError(f"{path}: not an EEGMANIFEST v1 file")
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[tuple[str, str]] = set()
    for raw in doc["trials"]:
        key = (raw["subject_id"], raw["trial_id"])
        if key in seen:
            raise ValueError(f"{path}: duplicate trial id {key}")
        seen.add(key)
        trial_path = base / raw["path"]
        if not trial_path.exists():
            raise ValueError(f"{path}: referenced file missing: {trial_path}")
        entries.append(ManifestEntry(
            subject_id=raw["subject_id"],
            trial_id=raw["trial_id"],
            path=trial_path,
            label=Direction(int(raw["label"])),
            duration_s=float(raw["duration_s"]),
        ))
    subjects = doc.get("subjects")
    if subjects is None:
        subjects = sorted({e.subject_id for e in entries})
    return DatasetManifest(name=doc.get("name", path.stem), subjects=list(subjects), trials=entries)
