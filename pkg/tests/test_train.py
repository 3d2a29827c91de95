import numpy as np
import pytest

from cgunwarp.nn import CGUNet, CGUNetConfig
from cgunwarp.nn.train import EmptyDatasetError, GridDataset, TrainConfig, read_log, schedule, train, write_log
from cgunwarp.synth import SOURCE_DOC3D, SOURCE_UVDOC, generate_standin, write_dataset

CFG = CGUNetConfig.tiny()


@pytest.fixture(scope="module")
def dsets():
    a = GridDataset.from_samples(generate_standin(5, 1, SOURCE_DOC3D, 48, 64), CFG)
    b = GridDataset.from_samples(generate_standin(3, 2, SOURCE_UVDOC, 48, 64), CFG)
    return {"standin_doc3d": a, "uvdoc_style": b}


def test_dataset_shapes_and_centred_w(dsets):
    d = dsets["standin_doc3d"]
    assert d.images.shape == (5, 3, 64, 48)
    assert d.g.shape == (5, 2, CFG.grid_rows, CFG.grid_cols)
    assert np.allclose(d.w.reshape(5, 3, -1).mean(axis=2), 0.0, atol=1e-6)
    assert d.tag == SOURCE_DOC3D


def test_alternation_and_batch_counts(dsets):
    n = 6
    counts = {}
    m = CGUNet(CFG)
    cfg = TrainConfig(batch_size=2, const_epochs=1, decay_epochs=0, steps_per_epoch=2 * n)
    rows = train(m, cfg, dsets)
    assert len(rows) == 2 * n
    for r in rows:
        counts[r["dataset"]] = counts.get(r["dataset"], 0) + 1
    assert counts == {SOURCE_DOC3D: n, SOURCE_UVDOC: n}
    assert [r["dataset"] for r in rows[:4]] == [SOURCE_DOC3D, SOURCE_UVDOC] * 2


def test_schedule_default_steps(dsets):
    order = schedule(dsets, TrainConfig(batch_size=2))
    assert order == ["standin_doc3d", "uvdoc_style"] * 3


def test_lr_per_epoch_in_log(dsets):
    cfg = TrainConfig(batch_size=4, steps_per_epoch=2)
    rows = train(CGUNet(CFG), cfg, dsets)
    lr = {r["epoch"]: r["lr"] for r in rows}
    assert len(rows) == 30
    assert lr[12] == pytest.approx(0.0006, abs=1e-18)
    assert lr[15] == 0.0


def test_training_deterministic(dsets):
    cfg = TrainConfig(batch_size=2, steps_per_epoch=4, seed=5)
    a, b = CGUNet(CFG, seed=1), CGUNet(CFG, seed=1)
    ra = train(a, cfg, dsets, max_steps=10)
    rb = train(b, cfg, dsets, max_steps=10)
    assert ra == rb
    for k in a.params:
        assert a.params[k].data.tobytes() == b.params[k].data.tobytes()


def test_empty_dataset_errors(dsets):
    empty = GridDataset(np.zeros((0, 3, 64, 48)), np.zeros((0, 2, 4, 3)), np.zeros((0, 3, 4, 3)), "x")
    with pytest.raises(EmptyDatasetError):
        train(CGUNet(CFG), TrainConfig(), {"a": dsets["standin_doc3d"], "b": empty})
    with pytest.raises(EmptyDatasetError):
        train(CGUNet(CFG), TrainConfig(), {})
    with pytest.raises(EmptyDatasetError):
        GridDataset.build([], CFG, "x")


def test_non_alternating_merges(dsets):
    cfg = TrainConfig(batch_size=4, alternate=False, steps_per_epoch=3, const_epochs=1, decay_epochs=0)
    rows = train(CGUNet(CFG), cfg, dsets)
    assert {r["dataset"] for r in rows} == {"mixed"}


def test_w_loss_disabled_logs_blank(dsets):
    cfg = TrainConfig(batch_size=2, enable_w=False, steps_per_epoch=2, const_epochs=1, decay_epochs=0)
    m = CGUNet(CFG)
    before = {k: v.data.copy() for k, v in m.head_params("W").items()}
    rows = train(m, cfg, dsets)
    assert all(r["L_W"] == "" for r in rows)
    assert all(r["loss"] == r["L_G"] for r in rows)
    for k, v in m.head_params("W").items():
        assert np.array_equal(v.data, before[k])


def test_log_round_trip(tmp_path, dsets):
    rows = train(CGUNet(CFG), TrainConfig(batch_size=2, steps_per_epoch=2), dsets, max_steps=3)
    write_log(tmp_path / "log.csv", rows)
    back = read_log(tmp_path / "log.csv")
    assert [int(r["step"]) for r in back] == [1, 2, 3]
    assert [float(r["loss"]) for r in back] == [r["loss"] for r in rows]


def test_from_dir(tmp_path):
    samples = generate_standin(2, 3, SOURCE_DOC3D, 48, 64)
    write_dataset(samples, tmp_path)
    d = GridDataset.from_dir(tmp_path, CFG)
    assert len(d) == 2 and d.tag == SOURCE_DOC3D
    ref = GridDataset.from_samples(samples, CFG)
    assert np.allclose(d.images, ref.images, atol=1 / 255)
    assert np.allclose(d.g, ref.g, atol=1e-6)
