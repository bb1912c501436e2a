import numpy as np
import pytest

from sfmprobe.datastore import Audiogram, LayerFeatureTensor, SfmAttributes, SfmDescriptor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_sfm():
    return SfmDescriptor(
        name="toy",
        layers=3,
        channels=8,
        attributes=SfmAttributes(
            asr_wer=5.0, data_hours=1000, arch_date="2021.01", train_task_count=1
        ),
    )


def random_features(rng, layers=3, frames=45, channels=8):
    return LayerFeatureTensor(
        values=rng.normal(size=(2, layers, frames, channels)).astype(np.float32)
    )


def random_audiogram(rng, bins=8):
    return Audiogram(
        left=tuple(rng.uniform(0, 70, bins)),
        right=tuple(rng.uniform(0, 70, bins)),
    )
