import numpy as np
import pytest

from emgwin.dataio import EmgRecording
from emgwin.synthgen import SynthConfig, generate


@pytest.fixture(scope="session")
def small_dataset():
    return generate(SynthConfig(seed=0, scale="small"))


@pytest.fixture
def make_recording():
    def make(labels, channels=4, seed=0, rate=1024.0, subject="S01", session="R01"):
        labels = np.asarray(labels, dtype=np.uint8)
        rng = np.random.default_rng(seed)
        samples = rng.standard_normal((channels, labels.size)).astype(np.float32)
        return EmgRecording(subject, session, samples, labels, rate)
    return make
