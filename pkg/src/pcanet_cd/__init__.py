"""Supervised PCA-Net change detection for co-registered SAR image pairs."""

from .classifier import LinearModel, predict, train_linear
from .evalstat import confusion, kappa, welch_t_test
from .pcanet import FilterBank, PcaNetModel, extract_feature, extract_features, fit_feature_extractor
from .pipeline import RunConfig, detect, train_model
from .raster import Raster, ReferenceMap, TemporalPair, load_pair, load_raster, log_ratio
from .sampling import SamplePartition, TrainingSet, partition
from .synthgen import SceneSpec, generate_scene

__version__ = "0.1.0"
