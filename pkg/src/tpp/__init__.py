"""Trainable temporal post-processor for multi-state time-series readout."""

from ._accel import BACKEND
from .datamodel import (
    FilterBank,
    HeterodyneRecord,
    LabeledDataset,
    MomentSummary,
    TrainedTpp,
    estimate_moments,
    flatten,
    read_dataset,
    read_model,
    unflatten,
    write_dataset,
    write_model,
)
from .discriminators import classify_argmax, classify_gaussian, fgda_pipeline, fit_gaussian, multi_fgda
from .errors import TppError
from .filters import analytic_filters, boxcar_filter, matched_filter, one_vs_all_filter, whitening
from .metrics import cross_validate, e_metric, fidelity, n_metric, noise_psd
from .simulator import CavityConfig, NoiseSpec, cavity_mean_trace, simulate
from .training import TrainingOptions, predict, train_closed_form, train_numeric

__version__ = "0.1.0"
