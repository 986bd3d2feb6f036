import numpy as np
import pytest

from pcanet_cd.errors import ParameterError
from pcanet_cd.raster import Raster
from pcanet_cd.synthgen import (
    SceneSpec,
    apply_speckle,
    disc_mask,
    gamma_multipliers,
    generate_reflectivity,
    generate_scene,
)


def test_disc_pixel_count():
    m = disc_mask((32, 32), (16, 16), 3)
    brute = sum(1 for y in range(32) for x in range(32) if (y - 16) ** 2 + (x - 16) ** 2 <= 9)
    assert m.sum() == brute == 29


def test_no_blobs():
    t1, t2, ref = generate_reflectivity(SceneSpec(n_blobs=0, width=20, height=20))
    assert not ref.labels.any()
    assert t1 == t2


@pytest.mark.parametrize("seed", range(5))
def test_reference_is_support_of_difference(seed):
    t1, t2, ref = generate_reflectivity(SceneSpec(seed=seed))
    assert np.array_equal(ref.labels == 1, t1.values != t2.values)
    assert np.all(t1.values == 60) and set(np.unique(t2.values)) <= {60.0, 140.0}


def test_spec_validation():
    with pytest.raises(ParameterError):
        SceneSpec(width=10, height=10, radius_max=6)
    with pytest.raises(ParameterError):
        SceneSpec(fg_level=60.0)
    with pytest.raises(ParameterError):
        SceneSpec(looks=0)
    with pytest.raises(ParameterError):
        SceneSpec(looks=1.5)


def test_manifest_lists_every_field():
    text = SceneSpec(seed=4).manifest()
    keys = [line.split("=")[0] for line in text.splitlines()]
    assert keys == ["width", "height", "n_blobs", "radius_min", "radius_max", "looks", "bg_level", "fg_level", "seed"]
    assert "seed=4" in text.splitlines()


@pytest.mark.parametrize("looks", [1, 2, 4])
def test_gamma_moments(looks):
    g = gamma_multipliers((1000, 1000), looks, np.random.default_rng(looks))
    assert abs(g.mean() - 1) <= 0.005
    assert abs(g.var() / (1 / looks) - 1) <= 0.05
    assert np.all(g > 0)


def test_zero_stays_zero(rng):
    out = apply_speckle(Raster(np.zeros((4, 4))), 3, rng)
    assert np.all(out.values == 0)


def test_many_looks_approach_clean():
    spec = SceneSpec(width=9, height=9, n_blobs=1, radius_min=2, radius_max=3, looks=10**6, seed=2)
    (pair, _), (c1, c2, _) = generate_scene(spec), generate_reflectivity(spec)
    assert np.all(np.abs(pair.t1.values / c1.values - 1) <= 0.01)
    assert np.all(np.abs(pair.t2.values / c2.values - 1) <= 0.01)


@pytest.mark.parametrize("seed", range(3))
def test_changed_region_mean(seed):
    spec = SceneSpec(seed=seed)
    pair, ref = generate_scene(spec)
    vals = pair.t2.values[ref.changed]
    tol = 3 * spec.fg_level / np.sqrt(spec.looks * vals.size)
    assert abs(vals.mean() - spec.fg_level) <= tol


def test_block_means_converge():
    clean = Raster(np.full((256, 256), 80.0))
    noisy = apply_speckle(clean, 2, np.random.default_rng(0)).values
    blocks = noisy.reshape(4, 64, 4, 64).mean(axis=(1, 3))
    assert np.all(np.abs(blocks / 80.0 - 1) <= 0.02)


def test_noise_fields_independent():
    # one 128x128 correlation has sd ~ 1/128, so single scenes get a 4-sd bound
    # and the 0.01 bound applies to the mean over seeds
    corrs = []
    for seed in range(20):
        pair, ref = generate_scene(SceneSpec(seed=seed))
        n1 = pair.t1.values / 60.0
        n2 = pair.t2.values / np.where(ref.changed, 140.0, 60.0)
        corrs.append(np.corrcoef(n1.ravel(), n2.ravel())[0, 1])
    assert np.all(np.abs(corrs) <= 4 / 128)
    assert abs(np.mean(corrs)) <= 0.01


def test_scene_is_deterministic():
    a, ra = generate_scene(SceneSpec(seed=11))
    b, rb = generate_scene(SceneSpec(seed=11))
    c, _ = generate_scene(SceneSpec(seed=12))
    assert a.t1 == b.t1 and a.t2 == b.t2 and ra == rb
    assert not a.t1 == c.t1
