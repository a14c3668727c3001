import numpy as np
import pytest

from fnsda.dynamics import (
    default_environment_set,
    generate_dataset,
    load_dataset,
    save_dataset,
    verify_dataset,
)
from fnsda.errors import DataFormatError


@pytest.fixture(scope="module")
def lv_bundle():
    env_set = default_environment_set("lv", n_tr=3, n_ev=2)
    return generate_dataset(env_set, seed=11)


def test_lv_default_grid_shape(lv_bundle):
    # 9 train envs, 41 recorded states each (T=20, dt=0.5)
    assert sum(1 for t in lv_bundle.train if t) == 9
    traj = lv_bundle.train[0][0]
    assert traj.states.shape == (41, 2)
    assert traj.dt == 0.5


def test_go_frame_count():
    env_set = default_environment_set("go", n_tr=1, n_ev=1)
    bundle = generate_dataset(env_set, seed=5)
    assert bundle.train[0][0].states.shape == (41, 7)  # T=2, dt=0.05


@pytest.mark.slow
def test_gs_frame_count():
    env_set = default_environment_set("gs", n_tr=1, n_ev=1)
    bundle = generate_dataset(env_set, seed=5)
    assert bundle.train[0][0].states.shape == (11, 2, 32, 32)  # T=400, dt=40


def test_lv_positive_states(lv_bundle):
    for trajs in lv_bundle.train + lv_bundle.eval:
        for t in trajs:
            assert np.all(t.states > 0)


def test_generation_bitwise_reproducible(tmp_path, lv_bundle):
    env_set = default_environment_set("lv", n_tr=3, n_ev=2)
    again = generate_dataset(env_set, seed=11)
    p1, p2 = str(tmp_path / "a.fnsd"), str(tmp_path / "b.fnsd")
    d1 = save_dataset(lv_bundle, p1)
    d2 = save_dataset(again, p2)
    assert d1 == d2
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_different_seed_differs():
    env_set = default_environment_set("lv", n_tr=1, n_ev=1)
    a = generate_dataset(env_set, seed=1)
    b = generate_dataset(env_set, seed=2)
    assert not np.array_equal(a.train[0][0].states, b.train[0][0].states)


def test_roundtrip_exact(tmp_path, lv_bundle):
    path = str(tmp_path / "lv.fnsd")
    save_dataset(lv_bundle, path)
    back = load_dataset(path)
    assert back.environment_set.family == "lv"
    assert len(back.environment_set.train_envs) == 9
    assert len(back.environment_set.eval_envs) == 4
    for env_index in range(13):
        for a, b in zip(lv_bundle.train[env_index], back.train[env_index]):
            np.testing.assert_array_equal(a.states, b.states)
            assert a.seed == b.seed and a.dt == b.dt and a.env_index == b.env_index
    spec_a = lv_bundle.environment_set.all_envs[3]
    spec_b = back.environment_set.all_envs[3]
    assert spec_a.params == spec_b.params
    assert (spec_a.dt, spec_a.horizon, spec_a.adapt_horizon) == (
        spec_b.dt,
        spec_b.horizon,
        spec_b.adapt_horizon,
    )


def test_verify_ok(tmp_path, lv_bundle):
    path = str(tmp_path / "lv.fnsd")
    save_dataset(lv_bundle, path)
    report = verify_dataset(path)
    assert report["ok"]
    assert report["sidecar_match"] is True
    assert report["problems"] == []
    assert report["n_traj"] == 9 * 3 + 4 * 2


def test_verify_catches_corruption(tmp_path, lv_bundle):
    path = str(tmp_path / "lv.fnsd")
    save_dataset(lv_bundle, path)
    raw = bytearray(open(path, "rb").read())
    raw[-5] ^= 0xFF  # flip a bit inside the last trajectory payload
    with open(path, "wb") as fh:
        fh.write(raw)
    report = verify_dataset(path)
    assert report["sidecar_match"] is False
    assert not report["ok"]


def test_load_rejects_bad_magic(tmp_path):
    path = str(tmp_path / "junk.fnsd")
    with open(path, "wb") as fh:
        fh.write(b"NOPE" + b"\x00" * 32)
    with pytest.raises(DataFormatError):
        load_dataset(path)


def test_load_rejects_truncation(tmp_path, lv_bundle):
    path = str(tmp_path / "lv.fnsd")
    save_dataset(lv_bundle, path)
    raw = open(path, "rb").read()
    with open(path, "wb") as fh:
        fh.write(raw[: len(raw) // 2])
    with pytest.raises(DataFormatError):
        load_dataset(path)
