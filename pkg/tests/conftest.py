import numpy as np
import pytest

from url2graph.encoders import EncoderConfig
from url2graph.fusion import ModelParams
from url2graph.pipeline.config import TrainConfig
from url2graph.pipeline.training import build_artifacts
from url2graph.synth import generate, to_dataset

from report import LINES



def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


# ---------------------------------------------------------------- fixtures

SMALL = EncoderConfig(d_c=6, widths=(2, 3), n_k=4, d_t=8, layers=1, heads=2, d_g=5, gcn_layers=2)


@pytest.fixture(scope="session")
def synth_small():
    recs = generate(300, seed=3)
    return to_dataset(recs)


@pytest.fixture(scope="session")
def small_artifacts(synth_small):
    cfg = TrainConfig(min_pair_count=2)
    return build_artifacts(synth_small, cfg)


@pytest.fixture
def small_params(small_artifacts):
    return ModelParams.init(SMALL, len(small_artifacts.vocab), 2, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

