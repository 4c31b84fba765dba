"""Spatial auditory-attention decoding benchmark on EEG time-frequency
features: data formats, Morlet-CWT features, partitioning strategies,
prototype sampling, a compact CNN decoder with hand-written gradients, and
experiment orchestration."""

from .core_data import (DatasetManifest, Direction, ManifestEntry, TfTrial,
                        TfWindow, Trial, load_manifest, read_trial,
                        write_manifest, write_trial)
from .dsp import (CwtConfig, PreprocessConfig, cwt_log_energy, morlet_kernel,
                  preprocess, segment_windows)
from .eegwavenet import (ModelGrads, ModelParams, backward, forward,
                         init_params, param_count, predict, predict_batch)
from .evaluate import (ConfigStat, RunRecord, SubjectSummary, WilcoxonResult,
                       config_stats, emit_tables, fit_accuracy_slope,
                       summarize, wilcoxon_signed_rank)
from .partition import FoldPlan, Strategy, plan_folds, repeat_plans
from .prototype import (PrototypeConfig, PrototypeSample, WindowIndex,
                        epoch_batches, make_prototype)
from .synth import (CalibrationResult, SynthConfig, SynthReport, calibrate,
                    generate, write_corpus)
from .trainer import (Optimizer, TrainConfig, TrainedModel, evaluate_windows,
                      train)

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult", "ConfigStat", "CwtConfig", "DatasetManifest",
    "Direction", "FoldPlan", "ManifestEntry", "ModelGrads", "ModelParams",
    "Optimizer", "PreprocessConfig", "PrototypeConfig", "PrototypeSample",
    "RunRecord", "Strategy", "SubjectSummary", "SynthConfig", "SynthReport",
    "TfTrial", "TfWindow", "TrainConfig", "TrainedModel", "Trial",
    "WilcoxonResult", "WindowIndex", "backward", "calibrate", "config_stats",
    "cwt_log_energy", "emit_tables", "epoch_batches", "evaluate_windows",
    "fit_accuracy_slope", "forward", "generate", "init_params",
    "load_manifest", "make_prototype", "morlet_kernel", "param_count",
    "plan_folds", "predict", "predict_batch", "preprocess", "read_trial",
    "repeat_plans", "segment_windows", "summarize", "train",
    "wilcoxon_signed_rank", "write_corpus", "write_manifest", "write_trial",
]
