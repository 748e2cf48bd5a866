import numpy as np
import pytest

from adkit.config import build_config, parse_config_text
from adkit.data import generate_synthetic_cohort

SMOKE = """\
run.seeds = 0
run.side = 16
run.epochs = 10
run.cadence = 5
run.strategies = {strategies}
data.n_train = 40
data.n_val_normal = 10
data.n_val_abnormal = 10
data.n_test_normal = 20
data.n_test_abnormal = 20
cohort.structural.kind = structural
detector.ae.kind = ae_pixel
detector.ae.hidden_sizes = 32, 16, 8
detector.lg.kind = latent_gaussian
detector.lg.n_components = 8
"""

ALL_STRATEGIES = "last_epoch, normal_val_loss, sample_wise, complete_validation"


def smoke_text(strategies=ALL_STRATEGIES, extra=""):
    return SMOKE.format(strategies=strategies) + extra


@pytest.fixture
def smoke_config():
    return build_config(parse_config_text(smoke_text()))


@pytest.fixture(scope="session")
def small_cohort(tmp_path_factory):
    """A side-16 structural cohort shared by the detector and selection tests."""
    out = tmp_path_factory.mktemp("cohort")
    return generate_synthetic_cohort("structural", 30, 8, 8, 10, 10, side=16, seed=3, out_dir=out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
