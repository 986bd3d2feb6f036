"""Two-stage PCA-Net feature extractor for temporal image pairs.

A feature for pixel ``(row, col)`` is built as follows:

1. cut the ``h x h`` neighbourhood from both dates and stack them into a
   ``2h x h`` cascaded patch (t1 on top, t2 below);
2. normalize it (zero mean, unit l2 norm);
3. correlate with the ``L1`` stage-1 eigenfilters, normalize each response,
   correlate each with the ``L2`` stage-2 eigenfilters;
4. binarize the ``L2`` responses that share a stage-1 parent and pack them
   into one integer map (bit ``l`` set when filter ``l`` responds > 0);
5. histogram each integer map over non-overlapping blocks and concatenate.

Filters are the leading eigenvectors of ``X X^T`` where the columns of ``X``
are normalized ``k x k`` sub-windows sampled from training patches.
Vectorization of windows and filters is column-major throughout, so that
``mat(u)`` followed by correlation equals the inner product ``u . x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .classifier import LinearModel
from .errors import DegeneracyError, DimensionError, ParameterError
from .raster import TemporalPair

DEFAULT_PATCH = 7
DEFAULT_FILTER_SIZE = 5
DEFAULT_FILTERS = 8
DEFAULT_N_MAX = 50_000
NORM_EPS = 1e-12
MAX_STAGE2_FILTERS = 16

# pixels per feature-extraction batch; results do not depend on it
_CHUNK = 512


@dataclass(frozen=True, eq=False)
class FilterBank:
    """``L`` filters of shape ``(k, k)``; eigenvalues are absent for loaded models."""

    filters: np.ndarray
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        f = np.array(self.filters, dtype=np.float64)
        if f.ndim != 3 or f.shape[1] != f.shape[2]:
            raise ParameterError(f"filters must have shape (L, k, k), got {f.shape}")
        f.flags.writeable = False
        object.__setattr__(self, "filters", f)
        if self.eigenvalues is not None:
            ev = np.array(self.eigenvalues, dtype=np.float64)
            ev.flags.writeable = False
            object.__setattr__(self, "eigenvalues", ev)

    @property
    def count(self) -> int:
        return self.filters.shape[0]

    @property
    def k(self) -> int:
        return self.filters.shape[1]

    def vectors(self) -> np.ndarray:
        """Column-major vectorized filters as the columns of a ``(k*k, L)`` matrix."""
        return np.stack([f.ravel(order="F") for f in self.filters], axis=1)

    def __eq__(self, other):
        if not isinstance(other, FilterBank):
            return NotImplemented
        return bool(np.array_equal(self.filters, other.filters))


@dataclass(frozen=True)
class PcaNetModel:
    h: int
    k: int
    stage1: FilterBank
    stage2: FilterBank
    block_side: int
    normalize_hist: bool = True
    classifier: LinearModel | None = None

    def __post_init__(self):
        check_geometry(self.h, self.k, self.stage1.count, self.stage2.count, self.block_side)
        if self.stage1.k != self.k or self.stage2.k != self.k:
            raise ParameterError("filter banks do not match filter size k")
        if self.classifier is not None and self.classifier.dim != self.feature_length:
            raise DimensionError(
                f"classifier length {self.classifier.dim} != feature length {self.feature_length}"
            )

    @property
    def n_blocks(self) -> int:
        return (2 * self.h // self.block_side) * (self.h // self.block_side)

    @property
    def bins(self) -> int:
        return 1 << self.stage2.count

    @property
    def feature_length(self) -> int:
        return self.stage1.count * self.n_blocks * self.bins


def check_geometry(h: int, k: int, l1: int, l2: int, block_side: int) -> None:
    """Validate network hyperparameters together."""
    if h < 1 or h % 2 == 0:
        raise ParameterError(f"patch size must be a positive odd integer, got {h}")
    if k < 1 or k % 2 == 0:
        raise ParameterError(f"filter size must be a positive odd integer, got {k}")
    if k > h:
        raise ParameterError(f"filter size {k} exceeds patch size {h}")
    if not 1 <= l1 <= k * k:
        raise ParameterError(f"stage-1 filter count must lie in [1, {k * k}], got {l1}")
    if not 1 <= l2 <= min(k * k, MAX_STAGE2_FILTERS):
        raise ParameterError(
            f"stage-2 filter count must lie in [1, {min(k * k, MAX_STAGE2_FILTERS)}], got {l2}"
        )
    if block_side < 1 or h % block_side:
        raise ParameterError(f"block side {block_side} must divide the patch size {h}")


# ---------------------------------------------------------------------------
# Patches and normalization
# ---------------------------------------------------------------------------


def _mirror_pad(img: np.ndarray, r: int) -> np.ndarray:
    return np.pad(img, r, mode="reflect") if r else img


def cascade_patches(pair: TemporalPair, centers, h: int) -> np.ndarray:
    """Cascaded patches for many ``(row, col)`` centers, shape ``(n, 2h, h)``.

    Neighbourhoods crossing the image border are mirror-reflected about the
    edge pixel (the edge itself is not repeated).
    """
    if h < 1 or h % 2 == 0:
        raise ParameterError(f"patch size must be a positive odd integer, got {h}")
    c = np.asarray(centers, dtype=np.intp).reshape(-1, 2)
    rows, cols = pair.shape
    if c.size and (c[:, 0].min() < 0 or c[:, 0].max() >= rows or c[:, 1].min() < 0 or c[:, 1].max() >= cols):
        raise ParameterError("patch center outside the image")
    r = h // 2
    out = []
    for img in (pair.t1.values, pair.t2.values):
        win = sliding_window_view(_mirror_pad(img, r), (h, h))
        out.append(win[c[:, 0], c[:, 1]])
    return np.concatenate(out, axis=1)


def cascade_patch(pair: TemporalPair, center, h: int) -> np.ndarray:
    return cascade_patches(pair, [center], h)[0]


def _normalize_last(x: np.ndarray) -> np.ndarray:
    y = x - x.mean(axis=-1, keepdims=True)
    nrm = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
    ok = nrm > NORM_EPS
    return np.where(ok, y / np.where(ok, nrm, 1.0), 0.0)


def normalize_vector(x) -> np.ndarray:
    """Remove the mean and scale to unit l2 norm; near-constant input maps to zeros."""
    return _normalize_last(np.asarray(x, dtype=np.float64))


def normalize_maps(maps: np.ndarray) -> np.ndarray:
    """Apply :func:`normalize_vector` to each trailing 2-D map."""
    maps = np.asarray(maps, dtype=np.float64)
    flat = maps.reshape(maps.shape[:-2] + (-1,))
    return _normalize_last(flat).reshape(maps.shape)


# ---------------------------------------------------------------------------
# Filter learning
# ---------------------------------------------------------------------------


def build_patch_matrix(patches, k: int, n_max: int, rng: np.random.Generator) -> np.ndarray:
    """Sample normalized ``k x k`` sub-windows from ``patches`` as columns.

    When ``n_max`` covers every valid window, all are used. Otherwise draw
    ``i`` is taken from patch ``i mod n_patches`` at a uniformly random
    position. Column order is shuffled by ``rng`` in both cases.

    Returns
    -------
    ndarray, shape (k*k, N)
    """
    p = np.asarray(patches, dtype=np.float64)
    if p.ndim == 2:
        p = p[None]
    n, H, W = p.shape
    if n < 1:
        raise ParameterError("no training patches")
    if k < 1 or k > min(H, W):
        raise ParameterError(f"sub-window size {k} does not fit in {H}x{W} patches")
    if n_max < 1:
        raise ParameterError(f"sample count must be >= 1, got {n_max}")
    ny, nx = H - k + 1, W - k + 1
    per = ny * nx
    total = n * per
    if n_max >= total:
        pidx = np.repeat(np.arange(n), per)
        pos = np.tile(np.arange(per), n)
    else:
        pidx = np.arange(n_max) % n
        pos = rng.integers(0, per, size=n_max)
    order = rng.permutation(pidx.shape[0])
    pidx, pos = pidx[order], pos[order]
    win = sliding_window_view(p, (k, k), axis=(1, 2))[pidx, pos // nx, pos % nx]
    cols = win.transpose(0, 2, 1).reshape(-1, k * k)
    return np.ascontiguousarray(_normalize_last(cols).T)


def _fix_sign(u: np.ndarray) -> np.ndarray:
    return -u if u[np.argmax(np.abs(u))] < 0 else u


def learn_filters(X, L: int) -> FilterBank:
    """The ``L`` leading eigenvectors of ``X X^T`` reshaped into ``k x k`` filters.

    These minimize ``|X - U U^T X|_F^2`` over orthonormal ``U`` of rank ``L``.
    Each eigenvector's sign is chosen so its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[0]
    k = int(round(np.sqrt(d)))
    if X.ndim != 2 or k * k != d:
        raise ParameterError(f"patch matrix must have k*k rows, got shape {X.shape}")
    if not 1 <= L <= d:
        raise ParameterError(f"filter count must lie in [1, {d}], got {L}")
    evals, evecs = np.linalg.eigh(X @ X.T)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    tol = max(float(evals[0]), 0.0) * d * np.finfo(np.float64).eps * 100
    rank = int(np.sum(evals > tol))
    if rank < L:
        raise DegeneracyError(f"patch covariance has numeric rank {rank}, cannot learn {L} filters")
    U = np.stack([_fix_sign(evecs[:, i]) for i in range(L)], axis=1)
    filters = np.stack([U[:, i].reshape(k, k, order="F") for i in range(L)])
    return FilterBank(filters, evals[:L].copy())


# ---------------------------------------------------------------------------
# Filtering, hashing, histograms
# ---------------------------------------------------------------------------


def correlate_bank(maps: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """Zero-padded 'same' cross-correlation of every trailing 2-D map with every filter.

    ``maps`` has shape ``(..., H, W)`` and ``filters`` ``(L, k, k)``; the
    result has shape ``(..., L, H, W)``. Each output element is computed
    independently of the others, so results do not depend on batching.
    """
    maps = np.asarray(maps, dtype=np.float64)
    filters = np.asarray(filters, dtype=np.float64)
    lead = maps.shape[:-2]
    out = np.empty(lead + (filters.shape[0],) + maps.shape[-2:])
    spread = (None,) * len(lead)
    for l, f in enumerate(filters):
        # a depth-1 kernel keeps leading axes independent
        out[..., l, :, :] = ndimage.correlate(maps, f[spread], mode="constant", cval=0.0)
    return out


def convolve_same(patch, filt) -> np.ndarray:
    filt = np.asarray(filt, dtype=np.float64)
    if filt.ndim != 2 or filt.shape[0] != filt.shape[1] or filt.shape[0] % 2 == 0:
        raise ParameterError(f"filter must be square with odd side, got {filt.shape}")
    return correlate_bank(np.asarray(patch, dtype=np.float64), filt[None])[0]


def run_cascade(stage1: FilterBank, stage2: FilterBank, patch) -> np.ndarray:
    """Stage-2 responses for one normalized cascaded patch, shape ``(L1, L2, 2h, h)``."""
    m1 = normalize_maps(correlate_bank(patch, stage1.filters))
    return correlate_bank(m1, stage2.filters)


def binary_hash(maps) -> np.ndarray:
    """Pack ``L2`` responses into integers: map ``l`` (0-based) contributes ``2**l`` where > 0."""
    maps = np.asarray(maps)
    codes = np.zeros(maps.shape[1:], dtype=np.int64)
    for l in range(maps.shape[0]):
        codes += (maps[l] > 0).astype(np.int64) << l
    return codes


def _hash_groups(m2: np.ndarray) -> np.ndarray:
    # m2: (..., L2, H, W) -> (..., H, W)
    L2 = m2.shape[-3]
    codes = np.zeros(m2.shape[:-3] + m2.shape[-2:], dtype=np.int64)
    for l in range(L2):
        codes += (m2[..., l, :, :] > 0).astype(np.int64) << l
    return codes


def _block_histograms(codes: np.ndarray, block_side: int, bins: int, normalize: bool) -> np.ndarray:
    # codes: (G, H, W) -> (G, B * bins), blocks in row-major order
    G, H, W = codes.shape
    bs = block_side
    by, bx = H // bs, W // bs
    blocks = codes.reshape(G, by, bs, bx, bs).transpose(0, 1, 3, 2, 4).reshape(G, by * bx, bs * bs)
    slot = (np.arange(G * by * bx).reshape(G, by * bx, 1)) * bins + blocks
    hist = np.bincount(slot.ravel(), minlength=G * by * bx * bins).astype(np.float64)
    hist = hist.reshape(G, by * bx * bins)
    if normalize:
        hist /= bs * bs
    return hist


def block_histogram(hashed, block_side: int, bins: int, normalize: bool = True) -> np.ndarray:
    hashed = np.asarray(hashed, dtype=np.int64)
    H, W = hashed.shape
    if block_side < 1 or H % block_side or W % block_side:
        raise ParameterError(f"block side {block_side} does not divide a {H}x{W} map")
    if hashed.size and (hashed.min() < 0 or hashed.max() >= bins):
        raise ParameterError(f"hashed values must lie in [0, {bins - 1}]")
    return _block_histograms(hashed[None], block_side, bins, normalize)[0]


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def _features_from_patches(model: PcaNetModel, patches: np.ndarray) -> np.ndarray:
    n = patches.shape[0]
    x = normalize_maps(patches)
    m1 = normalize_maps(correlate_bank(x, model.stage1.filters))
    m2 = correlate_bank(m1, model.stage2.filters)
    codes = _hash_groups(m2)  # (n, L1, 2h, h)
    L1 = model.stage1.count
    hist = _block_histograms(
        codes.reshape((n * L1,) + codes.shape[-2:]), model.block_side, model.bins, model.normalize_hist
    )
    return hist.reshape(n, model.feature_length)


def iter_feature_chunks(model: PcaNetModel, pair: TemporalPair, centers, chunk: int = _CHUNK):
    """Yield ``(start, features)`` for consecutive slices of ``centers``."""
    c = np.asarray(centers, dtype=np.intp).reshape(-1, 2)
    for start in range(0, c.shape[0], chunk):
        patches = cascade_patches(pair, c[start : start + chunk], model.h)
        yield start, _features_from_patches(model, patches)


def extract_features(model: PcaNetModel, pair: TemporalPair, centers) -> np.ndarray:
    """Feature vectors for many pixel centers, shape ``(n, D)``."""
    c = np.asarray(centers, dtype=np.intp).reshape(-1, 2)
    out = np.empty((c.shape[0], model.feature_length))
    for start, f in iter_feature_chunks(model, pair, c):
        out[start : start + f.shape[0]] = f
    return out


def extract_feature(model: PcaNetModel, pair: TemporalPair, center) -> np.ndarray:
    return extract_features(model, pair, [center])[0]


def fit_feature_extractor(
    pairs: TemporalPair | Sequence[TemporalPair],
    coords,
    h: int = DEFAULT_PATCH,
    k: int = DEFAULT_FILTER_SIZE,
    l1: int = DEFAULT_FILTERS,
    l2: int = DEFAULT_FILTERS,
    n_max: int = DEFAULT_N_MAX,
    rng: np.random.Generator | None = None,
) -> tuple[FilterBank, FilterBank]:
    """Learn both filter banks from the patches around training coordinates.

    ``pairs`` may be a single pair with one coordinate array, or a sequence of
    pairs with a matching sequence of coordinate arrays (multi-scene training).
    """
    if isinstance(pairs, TemporalPair):
        pairs, coords = [pairs], [coords]
    if len(pairs) != len(coords):
        raise ParameterError("need one coordinate array per image pair")
    check_geometry(h, k, l1, l2, 1)
    if rng is None:
        rng = np.random.default_rng()
    patches = [cascade_patches(p, c, h) for p, c in zip(pairs, coords)]
    patches = np.concatenate(patches, axis=0)
    if patches.shape[0] == 0:
        raise ParameterError("no training coordinates")

    stage1 = learn_filters(build_patch_matrix(patches, k, n_max, rng), l1)

    maps = normalize_maps(correlate_bank(normalize_maps(patches), stage1.filters))
    pool = maps.reshape((-1,) + maps.shape[-2:])
    stage2 = learn_filters(build_patch_matrix(pool, k, n_max, rng), l2)
    return stage1, stage2
