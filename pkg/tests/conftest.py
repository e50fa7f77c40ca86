import numpy as np
import pytest

import zzedit as zz

# Calibrated two-component testbed shared by the editing tests: well
# separated semantic components on dim 0, a shared-mean background on dim 1
# whose per-component variances couple it to the semantic dimension, and
# soft prompt weights so conditioned scores saturate near the target.
TESTBED_MEANS = np.array([[-3.0, 0.0], [3.0, 0.0]])
TESTBED_VARIANCES = np.array([[1.0, 0.6], [1.0, 1.4]])
TESTBED_SRC = np.array([0.8, 0.2])
TESTBED_TGT = np.array([0.2, 0.8])
TESTBED_SEED = 20260809


@pytest.fixture(scope="session")
def schedule_50():
    return zz.build_linear_schedule(50)


@pytest.fixture(scope="session")
def two_comp_model():
    return zz.GmmModelSpec(
        dim=2,
        means=TESTBED_MEANS,
        variances=TESTBED_VARIANCES,
        null_weights=zz.ConditionEmbedding(np.array([0.5, 0.5])),
    )


@pytest.fixture(scope="session")
def testbed(two_comp_model):
    from zzedit.metrics import TestbedSpec

    return TestbedSpec(
        model=two_comp_model,
        c_src=zz.ConditionEmbedding(TESTBED_SRC),
        c_tgt=zz.ConditionEmbedding(TESTBED_TGT),
        background_dims=(1,),
        seed=TESTBED_SEED,
        n_instances=50,
    )


@pytest.fixture(scope="session")
def symmetric_1d_model():
    # The 1-D two-component mixture used for closed-form score checks.
    return zz.GmmModelSpec(
        dim=1,
        means=np.array([[-2.0], [2.0]]),
        variances=np.array([[1.0], [1.0]]),
        null_weights=zz.ConditionEmbedding(np.array([0.5, 0.5])),
    )


class CountingPredictor:
    """Test helper: counts predict calls while delegating."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def predict(self, z, alpha_bar_t, cond):
        self.calls += 1
        return self.inner.predict(z, alpha_bar_t, cond)


@pytest.fixture
def counting():
    return CountingPredictor
