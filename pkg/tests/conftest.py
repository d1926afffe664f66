import hypothesis
import numpy as np
import pytest

import freqiml as fq

hypothesis.settings.register_profile(
    "suite", derandomize=True, max_examples=50, deadline=None
)
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_grid():
    # 4 s at 10 ms: 400 samples, cheap FFTs, 9 bins below the 2 Hz cutoff
    return fq.make_grid(0.01, 4.0)


@pytest.fixture(scope="session")
def small_cutoff():
    return 2.0 * np.pi * 2.0


@pytest.fixture(scope="session")
def small_trajectory(small_grid):
    return fq.desired_trajectory(
        fq.TrajectorySpec(
            main_frequency_hz=0.5, num_harmonics=1, t0=1.0, t1=2.0, t2=3.0, total_duration=4.0
        ),
        small_grid,
    )


@pytest.fixture(scope="session")
def plant():
    return fq.example_plant()
