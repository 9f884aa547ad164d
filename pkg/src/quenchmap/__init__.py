"""Quenched quantum feature maps: tabular samples -> Ising quench -> <Z> features -> classifiers."""

__version__ = "0.1.0"

from .data import (PreprocessReport, SplitPlan, TabularDataset, apply_preprocessing,  # noqa: E402
                   fit_preprocessing, impute_median, load_csv, mutual_information,
                   select_features, standardize, stratified_splits)
from .encoding import (CouplingGraph, IsingInstance, diagonal_energies, encode_sample,  # noqa: E402
                       fit_couplings)
from .features import MappedDataset, QuantumFeatureVector, map_dataset, map_sample  # noqa: E402
from .quench import (QuenchConfig, StateVector, evolve, exact_ground_state, expect_z,  # noqa: E402
                     expect_zz, initial_state, sample_bitstrings)
from .schedule import AnnealSchedule, load_schedule_csv  # noqa: E402
