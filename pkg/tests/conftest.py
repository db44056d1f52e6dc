import os

# Pin BLAS threads before numpy loads anywhere in the session; the dense
# kernels here are too small to benefit from threading.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import warnings

import pytest

from kickrl import demos, envs


@pytest.fixture(scope="session")
def room_spec():
    return envs.make_room_nav()


@pytest.fixture(scope="session")
def room_store(room_spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", demos.DemoBudgetWarning)
        return demos.generate_demos(room_spec, expert_noise=0.1, n_traj=40, seed=3)


@pytest.fixture(scope="session")
def room_store_path(room_store, tmp_path_factory):
    path = tmp_path_factory.mktemp("demos") / "room.demos.jsonl"
    demos.save_demos(room_store, str(path))
    return str(path)
