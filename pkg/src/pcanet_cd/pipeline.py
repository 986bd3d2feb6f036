"""Training and detection end to end.

All randomness comes from one master seed. Each purpose (sample selection,
filter sub-window sampling, classifier shuffling) gets its own stream so
changing how one stage consumes randomness never perturbs another.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sampling
from .classifier import DEFAULT_EPOCHS, DEFAULT_LAMBDA, decision_values, train_linear
from .errors import ParameterError
from .pcanet import (
    DEFAULT_FILTER_SIZE,
    DEFAULT_FILTERS,
    DEFAULT_N_MAX,
    DEFAULT_PATCH,
    PcaNetModel,
    check_geometry,
    extract_features,
    fit_feature_extractor,
    iter_feature_chunks,
)
from .raster import DEFAULT_LOG_OFFSET, ReferenceMap, TemporalPair, check_reference, log_ratio

log = logging.getLogger(__name__)

_PURPOSES = {"sampling": 1, "filters": 2, "classifier": 3}


def purpose_rng(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _PURPOSES[purpose]]))


@dataclass
class RunConfig:
    patch: int = DEFAULT_PATCH
    filter_size: int = DEFAULT_FILTER_SIZE
    filters1: int = DEFAULT_FILTERS
    filters2: int = DEFAULT_FILTERS
    block: int | None = None  # defaults to the patch size
    radius: int = sampling.DEFAULT_RADIUS
    strategy: str = "obuc"
    rate: float = 0.05
    seed: int = 0
    lam: float = DEFAULT_LAMBDA
    epochs: int = DEFAULT_EPOCHS
    n_max: int = DEFAULT_N_MAX
    offset: float = DEFAULT_LOG_OFFSET
    confidence: float = 0.5
    normalize_hist: bool = True

    def __post_init__(self):
        if self.block is None:
            self.block = self.patch
        self.validate()

    def validate(self) -> None:
        check_geometry(self.patch, self.filter_size, self.filters1, self.filters2, self.block)
        if self.radius < 0:
            raise ParameterError(f"radius must be >= 0, got {self.radius}")
        if self.strategy not in sampling.STRATEGIES:
            raise ParameterError(f"unknown strategy {self.strategy!r}")
        if not 0 < self.rate <= 1:
            raise ParameterError(f"rate must lie in (0, 1], got {self.rate}")
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.n_max < 1:
            raise ParameterError(f"n_max must be >= 1, got {self.n_max}")
        if not self.offset > 0:
            raise ParameterError(f"log-ratio offset must be positive, got {self.offset}")
        if not 0 < self.confidence <= 1:
            raise ParameterError(f"confidence must lie in (0, 1], got {self.confidence}")


@dataclass
class TrainResult:
    model: PcaNetModel
    training_set: sampling.TrainingSet
    partition: sampling.SamplePartition | None
    features: np.ndarray = field(repr=False)


def select_samples(pair: TemporalPair, ref: ReferenceMap | None, cfg: RunConfig) -> sampling.TrainingSet:
    rng = purpose_rng(cfg.seed, "sampling")
    diff = log_ratio(pair, cfg.offset) if cfg.strategy == "pseudo" else None
    return sampling.draw(cfg.strategy, ref, cfg.rate, rng, cfg.radius, diff=diff, confidence=cfg.confidence)


def _unique_features(model: PcaNetModel, pair: TemporalPair, coords: np.ndarray) -> np.ndarray:
    # oversampled sets repeat coordinates; extract each pixel once
    uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
    return extract_features(model, pair, uniq)[inverse.reshape(-1)]


def train_on_samples(pair: TemporalPair, ts: sampling.TrainingSet, cfg: RunConfig) -> tuple[PcaNetModel, np.ndarray]:
    stage1, stage2 = fit_feature_extractor(
        pair,
        ts.coords,
        h=cfg.patch,
        k=cfg.filter_size,
        l1=cfg.filters1,
        l2=cfg.filters2,
        n_max=cfg.n_max,
        rng=purpose_rng(cfg.seed, "filters"),
    )
    bare = PcaNetModel(cfg.patch, cfg.filter_size, stage1, stage2, cfg.block, cfg.normalize_hist)
    F = _unique_features(bare, pair, ts.coords)
    clf = train_linear(F, ts.labels, cfg.lam, cfg.epochs, purpose_rng(cfg.seed, "classifier"), seed=cfg.seed)
    model = PcaNetModel(cfg.patch, cfg.filter_size, stage1, stage2, cfg.block, cfg.normalize_hist, clf)
    return model, F


def train_model(pair: TemporalPair, ref: ReferenceMap | None, cfg: RunConfig) -> TrainResult:
    """Select samples by ``cfg.strategy``, learn both filter banks and the classifier."""
    if ref is not None:
        check_reference(pair, ref)
    elif cfg.strategy != "pseudo":
        raise ParameterError(f"strategy {cfg.strategy!r} needs a reference map")
    ts = select_samples(pair, ref, cfg)
    part = sampling.partition(ref, cfg.radius) if ref is not None else None
    log.info("training set: %d changed, %d unchanged (%s)", ts.n_changed, ts.n_unchanged, ts.strategy)
    model, F = train_on_samples(pair, ts, cfg)
    return TrainResult(model, ts, part, F)


def detect(model: PcaNetModel, pair: TemporalPair, workers: int = 1) -> ReferenceMap:
    """Classify every pixel. Output does not depend on ``workers``."""
    if model.classifier is None:
        raise ParameterError("model has no trained classifier")
    H, W = pair.shape
    rows_per_task = max(1, 512 // W)
    spans = [(r, min(H, r + rows_per_task)) for r in range(0, H, rows_per_task)]

    def run(span):
        r0, r1 = span
        rr, cc = np.mgrid[r0:r1, 0:W]
        coords = np.column_stack([rr.ravel(), cc.ravel()])
        out = np.empty(coords.shape[0], dtype=np.uint8)
        for start, f in iter_feature_chunks(model, pair, coords):
            out[start : start + f.shape[0]] = decision_values(model.classifier, f) > 0
        return out.reshape(r1 - r0, W)

    if workers <= 1:
        parts = [run(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
    return ReferenceMap(np.concatenate(parts, axis=0))
