"""Morphological partition of a reference map and training-sample strategies.

The reference map is split into three disjoint pixel sets:

* ``boundary``  - pixels within ``radius`` (Chebyshev) of the class interface,
* ``changed``   - changed pixels outside that band,
* ``unchanged`` - unchanged pixels outside that band.

Strategies
----------
``uc``
    uniform draw over the whole map (imbalanced, the random baseline).
``buc``
    half of the budget from the boundary band, the rest split between the
    two inner sets.
``obuc``
    ``buc`` followed by minority-class duplication to equal class counts.
``pseudo``
    labels from two-class k-means on a log-ratio map (no reference used).
``generalize``
    the whole boundary band plus a proportional share of each inner set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegeneracyError, ImbalanceError, ParameterError
from .raster import Raster, ReferenceMap

DEFAULT_RADIUS = 2
STRATEGIES = ("uc", "buc", "obuc", "pseudo", "generalize")

_NEIGHBOURS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]


@dataclass(frozen=True, eq=False)
class SamplePartition:
    boundary: np.ndarray
    changed: np.ndarray
    unchanged: np.ndarray
    radius: int

    def coords(self, which: str) -> np.ndarray:
        """``(n, 2)`` row/col coordinates of one set, in row-major order."""
        return np.argwhere(getattr(self, which))

    def visualize(self) -> Raster:
        """0 = inner unchanged, 128 = boundary band, 255 = inner changed."""
        img = np.zeros(self.boundary.shape)
        img[self.boundary] = 128
        img[self.changed] = 255
        return Raster(img)


@dataclass(frozen=True, eq=False)
class TrainingSet:
    coords: np.ndarray  # (n, 2) row, col
    labels: np.ndarray  # (n,) 0/1
    strategy: str

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.intp).reshape(-1, 2)
        lab = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if c.shape[0] != lab.shape[0]:
            raise ParameterError("coordinate and label counts differ")
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"unknown strategy {self.strategy!r}")
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n_changed(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_unchanged(self) -> int:
        return int(np.count_nonzero(self.labels == 0))

    def __eq__(self, other):
        if not isinstance(other, TrainingSet):
            return NotImplemented
        return (
            self.strategy == other.strategy
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.labels, other.labels)
        )


# ---------------------------------------------------------------------------
# Morphology
# ---------------------------------------------------------------------------


def find_boundary(ref: ReferenceMap) -> np.ndarray:
    """Mask of pixels with at least one in-bounds 8-neighbour of the other class."""
    lab = ref.labels
    H, W = lab.shape
    out = np.zeros((H, W), dtype=bool)
    for dy, dx in _NEIGHBOURS:
        ys, yd = slice(max(dy, 0), H + min(dy, 0)), slice(max(-dy, 0), H + min(-dy, 0))
        xs, xd = slice(max(dx, 0), W + min(dx, 0)), slice(max(-dx, 0), W + min(-dx, 0))
        # compare each pixel (dest view) with its neighbour at (+dy, +dx)
        out[yd, xd] |= lab[yd, xd] != lab[ys, xs]
    return out


def dilate(mask, radius: int) -> np.ndarray:
    """Binary dilation by a ``(2r+1) x (2r+1)`` square, clipped to the image."""
    m = np.asarray(mask, dtype=bool)
    if radius < 0:
        raise ParameterError(f"dilation radius must be >= 0, got {radius}")
    if radius == 0:
        return m.copy()
    w = 2 * radius + 1
    p = np.pad(m, ((radius, radius), (0, 0)))
    m = sliding_window_view(p, w, axis=0).any(axis=-1)
    p = np.pad(m, ((0, 0), (radius, radius)))
    return sliding_window_view(p, w, axis=1).any(axis=-1)


def partition(ref: ReferenceMap, radius: int = DEFAULT_RADIUS) -> SamplePartition:
    band = dilate(find_boundary(ref), radius)
    chg = ref.changed
    return SamplePartition(band, chg & ~band, ~chg & ~band, radius)


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def training_budget(rate: float, n_pixels: int) -> int:
    if not 0 < rate <= 1:
        raise ParameterError(f"sampling rate must lie in (0, 1], got {rate}")
    budget = _round_half_up(rate * n_pixels)
    if budget == 0:
        raise ParameterError(f"rate {rate} yields no training samples on {n_pixels} pixels")
    return budget


def _pick(coords: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    n = min(n, coords.shape[0])
    if n == 0:
        return coords[:0]
    return coords[np.sort(rng.choice(coords.shape[0], size=n, replace=False))]


def _labelled(ref: ReferenceMap, coords: np.ndarray, strategy: str) -> TrainingSet:
    return TrainingSet(coords, ref.labels[coords[:, 0], coords[:, 1]], strategy)


def draw_uc(ref: ReferenceMap, rate: float, rng: np.random.Generator) -> TrainingSet:
    budget = training_budget(rate, ref.labels.size)
    everything = np.argwhere(np.ones(ref.shape, dtype=bool))
    return _labelled(ref, _pick(everything, budget, rng), "uc")


def draw_buc(part: SamplePartition, ref: ReferenceMap, rate: float, rng: np.random.Generator) -> TrainingSet:
    budget = training_budget(rate, ref.labels.size)
    band = part.coords("boundary")
    inner_c = part.coords("changed")
    inner_u = part.coords("unchanged")

    n_band = min(band.shape[0], math.ceil(budget / 2))
    rest = budget - n_band
    n_c = math.ceil(rest / 2)
    n_u = rest - n_c
    # move any shortfall to the other inner set
    if n_c > inner_c.shape[0]:
        n_u += n_c - inner_c.shape[0]
        n_c = inner_c.shape[0]
    if n_u > inner_u.shape[0]:
        n_c = min(inner_c.shape[0], n_c + n_u - inner_u.shape[0])
        n_u = inner_u.shape[0]

    picked = np.concatenate([_pick(band, n_band, rng), _pick(inner_c, n_c, rng), _pick(inner_u, n_u, rng)])
    return _labelled(ref, picked, "buc")


def oversample_balance(ts: TrainingSet, rng: np.random.Generator) -> TrainingSet:
    """Duplicate randomly chosen minority samples until both classes are equally large."""
    n1, n0 = ts.n_changed, ts.n_unchanged
    if n1 == 0:
        raise ImbalanceError("cannot balance: no changed samples")
    if n0 == 0:
        raise ImbalanceError("cannot balance: no unchanged samples")
    if n1 == n0:
        return TrainingSet(ts.coords, ts.labels, "obuc")
    minority = 1 if n1 < n0 else 0
    pool = np.flatnonzero(ts.labels == minority)
    extra = pool[rng.integers(0, pool.shape[0], size=abs(n1 - n0))]
    return TrainingSet(
        np.concatenate([ts.coords, ts.coords[extra]]),
        np.concatenate([ts.labels, ts.labels[extra]]),
        "obuc",
    )


def draw_obuc(part: SamplePartition, ref: ReferenceMap, rate: float, rng: np.random.Generator) -> TrainingSet:
    return oversample_balance(draw_buc(part, ref, rate, rng), rng)


def draw_generalize(part: SamplePartition, ref: ReferenceMap, rng: np.random.Generator) -> TrainingSet:
    """All boundary pixels plus ``round(|boundary| / 2)`` from each inner set."""
    band = part.coords("boundary")
    if band.shape[0] == 0:
        raise ParameterError("boundary set is empty; the reference map has no changes to learn from")
    quota = _round_half_up(band.shape[0] / 2)
    picked = np.concatenate(
        [band, _pick(part.coords("changed"), quota, rng), _pick(part.coords("unchanged"), quota, rng)]
    )
    return _labelled(ref, picked, "generalize")


# ---------------------------------------------------------------------------
# Pseudolabels
# ---------------------------------------------------------------------------


def two_means(values, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with two centroids on scalar data.

    Centroids start at the 5th and 95th percentiles (or the min and max if
    those coincide). Returns ``(assignment, centroids)`` with cluster 1 the
    higher centroid; ties in distance go to cluster 0.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0 or v.min() == v.max():
        raise DegeneracyError("cannot cluster a constant difference map")
    lo, hi = np.percentile(v, [5, 95])
    if lo == hi:
        lo, hi = v.min(), v.max()
    cent = np.array([lo, hi])
    assign = None
    for _ in range(max_iter):
        new = (np.abs(v - cent[1]) < np.abs(v - cent[0])).astype(np.int8)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in (0, 1):
            if np.any(assign == j):
                cent[j] = v[assign == j].mean()
    if cent[0] > cent[1]:
        assign = 1 - assign
        cent = cent[::-1].copy()
    return assign, cent


def pseudolabel_baseline(diff: Raster, confidence: float, rng: np.random.Generator | None = None) -> TrainingSet:
    """Keep the ``confidence`` fraction of each k-means cluster nearest its centroid.

    ``rng`` is accepted for interface symmetry; the procedure is deterministic.
    """
    if not 0 < confidence <= 1:
        raise ParameterError(f"confidence must lie in (0, 1], got {confidence}")
    v = diff.values.ravel()
    assign, cent = two_means(v)
    keep = []
    for j in (0, 1):
        idx = np.flatnonzero(assign == j)
        n_keep = int(math.floor(confidence * idx.size))
        dist = np.abs(v[idx] - cent[j])
        order = np.lexsort((idx, dist))
        keep.append(np.sort(idx[order[:n_keep]]))
    flat = np.concatenate(keep)
    flat.sort()
    coords = np.column_stack(np.unravel_index(flat, diff.shape))
    return TrainingSet(coords, assign[flat], "pseudo")


def draw(
    strategy: str,
    ref: ReferenceMap | None,
    rate: float,
    rng: np.random.Generator,
    radius: int = DEFAULT_RADIUS,
    diff: Raster | None = None,
    confidence: float = 0.5,
) -> TrainingSet:
    """Dispatch to a sampling strategy by name.

    ``pseudo`` needs ``diff`` and ignores ``ref``; its confident pool is
    subsampled uniformly to the rate budget. ``generalize`` ignores ``rate``.
    """
    if strategy == "pseudo":
        if diff is None:
            raise ParameterError("pseudo strategy needs a difference map")
        ts = pseudolabel_baseline(diff, confidence, rng)
        budget = training_budget(rate, diff.values.size)
        if budget < len(ts):
            sel = np.sort(rng.choice(len(ts), size=budget, replace=False))
            ts = TrainingSet(ts.coords[sel], ts.labels[sel], "pseudo")
        return ts
    if ref is None:
        raise ParameterError(f"strategy {strategy!r} needs a reference map")
    if strategy == "uc":
        return draw_uc(ref, rate, rng)
    part = partition(ref, radius)
    if strategy == "buc":
        return draw_buc(part, ref, rate, rng)
    if strategy == "obuc":
        return draw_obuc(part, ref, rate, rng)
    if strategy == "generalize":
        return draw_generalize(part, ref, rng)
    raise ParameterError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
