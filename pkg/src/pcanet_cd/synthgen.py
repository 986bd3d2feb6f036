"""Synthetic two-date SAR scenes with disc-shaped changes and gamma speckle."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError
from .raster import Raster, ReferenceMap, TemporalPair

# exponential draws held in memory at once; draws are look-major either way
_DRAW_BUDGET = 1 << 22


@dataclass(frozen=True)
class SceneSpec:
    width: int = 128
    height: int = 128
    n_blobs: int = 3
    radius_min: int = 6
    radius_max: int = 12
    looks: int = 2
    bg_level: float = 60.0
    fg_level: float = 140.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("scene dimensions must be positive")
        if self.n_blobs < 0:
            raise ParameterError("blob count must be >= 0")
        if not 0 <= self.radius_min <= self.radius_max:
            raise ParameterError("need 0 <= radius_min <= radius_max")
        if self.n_blobs and 2 * self.radius_max + 1 > min(self.width, self.height):
            raise ParameterError(
                f"blob radius {self.radius_max} does not fit in a {self.width}x{self.height} scene"
            )
        if int(self.looks) != self.looks or self.looks < 1:
            raise ParameterError(f"looks must be an integer >= 1, got {self.looks}")
        if self.fg_level == self.bg_level:
            raise ParameterError("change level must differ from background level")
        if self.bg_level < 0 or self.fg_level < 0:
            raise ParameterError("reflectivity levels must be non-negative")

    def manifest(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())


def scene_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent streams for geometry, t1 speckle and t2 speckle."""
    geo, s1, s2 = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(geo), np.random.default_rng(s1), np.random.default_rng(s2)


def disc_mask(shape: tuple[int, int], center: tuple[int, int], radius: float) -> np.ndarray:
    """Pixels whose centre lies within ``radius`` of ``center`` (row, col)."""
    rr, cc = np.ogrid[: shape[0], : shape[1]]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius * radius


def generate_reflectivity(spec: SceneSpec, rng: np.random.Generator | None = None):
    """Noise-free reflectivities and the exact change reference.

    Disc radii are integers uniform in ``[radius_min, radius_max]``; centres are
    uniform over positions where the whole disc fits. Discs may overlap.
    """
    if rng is None:
        rng = scene_rngs(spec.seed)[0]
    shape = (spec.height, spec.width)
    changed = np.zeros(shape, dtype=bool)
    for _ in range(spec.n_blobs):
        r = int(rng.integers(spec.radius_min, spec.radius_max + 1))
        cy = int(rng.integers(r, spec.height - r))
        cx = int(rng.integers(r, spec.width - r))
        changed |= disc_mask(shape, (cy, cx), r)
    t1 = np.full(shape, float(spec.bg_level))
    t2 = np.where(changed, float(spec.fg_level), t1)
    return Raster(t1), Raster(t2), ReferenceMap(changed.astype(np.uint8))


def gamma_multipliers(shape, looks: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Gamma(looks, 1/looks) field as a sum of ``looks`` Exp(rate=looks) draws."""
    if int(looks) != looks or looks < 1:
        raise ParameterError(f"looks must be an integer >= 1, got {looks}")
    looks = int(looks)
    n = int(np.prod(shape))
    g = np.zeros(n)
    done = 0
    per_block = max(64, _DRAW_BUDGET // max(n, 1))
    while done < looks:
        m = min(per_block, looks - done)
        g += rng.exponential(1.0 / looks, size=(m, n)).sum(axis=0)
        done += m
    return g.reshape(shape)


def apply_speckle(clean: Raster, looks: int, rng: np.random.Generator) -> Raster:
    return Raster(clean.values * gamma_multipliers(clean.shape, looks, rng))


def generate_scene(spec: SceneSpec) -> tuple[TemporalPair, ReferenceMap]:
    geo, n1, n2 = scene_rngs(spec.seed)
    c1, c2, ref = generate_reflectivity(spec, geo)
    pair = TemporalPair(apply_speckle(c1, spec.looks, n1), apply_speckle(c2, spec.looks, n2))
    return pair, ref
