import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


@pytest.fixture(scope="session")
def identity_model():
    """Tiny model trained to output the identity grid for one smooth image."""
    from cgunwarp.grid import UnwarpGrid2D
    from cgunwarp.nn import CGUNet, CGUNetConfig
    from cgunwarp.nn.train import GridDataset, TrainConfig, train

    cfg = CGUNetConfig.tiny()
    yy, xx = np.mgrid[0:64, 0:48] / 47.0
    img = np.stack([0.5 + 0.3 * np.sin(3 * xx), 0.5 + 0.3 * np.cos(2 * yy), 0.4 + 0.2 * xx * yy], -1)
    ident = UnwarpGrid2D.identity(cfg.grid_rows, cfg.grid_cols).coords
    d = GridDataset.build([(img, ident, np.zeros(ident.shape[:2] + (3,)))], cfg, "identity")
    m = CGUNet(cfg, seed=0)
    train(m, TrainConfig(batch_size=1, lr=3e-3, const_epochs=400, decay_epochs=0), {"a": d})
    return m, img


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)
