import numpy as np
import pytest

from pcanet_cd import pcanet
from pcanet_cd.pipeline import RunConfig, train_model
from pcanet_cd.raster import Raster, ReferenceMap, TemporalPair
from pcanet_cd.synthgen import SceneSpec, generate_scene

# Every filter bank learned anywhere in the suite is audited here.
BANK_AUDIT = {"count": 0, "max_orth": 0.0, "max_resid": 0.0}
_learn_filters = pcanet.learn_filters


def audit_bank(X, bank):
    U = bank.vectors()
    orth = np.abs(U.T @ U - np.eye(U.shape[1])).max()
    C = X @ X.T
    scale = np.linalg.norm(C, 2)
    resid = max(
        np.linalg.norm(C @ U[:, i] - lam * U[:, i]) / scale for i, lam in enumerate(bank.eigenvalues)
    )
    assert orth <= 1e-10, f"filters not orthonormal: {orth}"
    assert resid <= 1e-8, f"eigen residual too large: {resid}"
    assert np.all(np.diff(bank.eigenvalues) <= 1e-12 * scale)
    assert np.all(bank.eigenvalues >= -1e-10)
    BANK_AUDIT["count"] += 1
    BANK_AUDIT["max_orth"] = max(BANK_AUDIT["max_orth"], orth)
    BANK_AUDIT["max_resid"] = max(BANK_AUDIT["max_resid"], resid)


@pytest.fixture(autouse=True, scope="session")
def _audit_learned_filters():
    def audited(X, L):
        bank = _learn_filters(X, L)
        audit_bank(np.asarray(X, dtype=np.float64), bank)
        return bank

    mp = pytest.MonkeyPatch()
    mp.setattr(pcanet, "learn_filters", audited)
    yield
    mp.undo()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SMALL_SCENE = SceneSpec(width=40, height=40, n_blobs=2, radius_min=4, radius_max=7, seed=5)


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(SMALL_SCENE)


@pytest.fixture(scope="session")
def small_trained(small_scene):
    pair, ref = small_scene
    cfg = RunConfig(strategy="obuc", rate=0.1, seed=3)
    return pair, ref, cfg, train_model(pair, ref, cfg)


def random_pair(rng, shape=(12, 10)):
    return TemporalPair(Raster(rng.gamma(2.0, 30.0, shape)), Raster(rng.gamma(2.0, 30.0, shape)))


def random_ref(rng, shape=(32, 32), p=0.3):
    return ReferenceMap((rng.random(shape) < p).astype(np.uint8))


# criterion number -> (passed, detail); printed in the terminal summary
ACCEPTANCE = {}


def pytest_collection_modifyitems(items):
    # the suite-wide bank audit must see every bank, so it runs last
    last = [it for it in items if it.name.endswith("bank_audit")]
    items[:] = [it for it in items if it not in last] + last


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
