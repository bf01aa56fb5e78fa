import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cistgcn.data import AugmentationSpec, synth_dataset
from cistgcn.tensor import NumericError, Tensor, backward, grad_check, new_tape
from cistgcn.training import (Adam, Checkpoint, CheckpointError, TrainConfig, Trainer,
                              clip_grad_norm, dumps_checkpoint, load_checkpoint, load_model,
                              loads_checkpoint, mpjpe, mpjpe_loss, save_checkpoint, step_decay)


def brute_force_mpjpe(pred, target):
    total, count = 0.0, 0
    for t in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            d = 0.0
            for k in range(3):
                d += (pred[t, j, k] - target[t, j, k]) ** 2
            total += d ** 0.5
            count += 1
    return total / count


# --- loss -------------------------------------------------------------------

@given(st.integers(0, 2**31 - 1))
def test_mpjpe_matches_double_loop(seed):
    rng = np.random.default_rng(seed)
    shape = (int(rng.integers(1, 8)), int(rng.integers(1, 8)), 3)
    pred, target = rng.normal(scale=100, size=shape), rng.normal(scale=100, size=shape)
    want = brute_force_mpjpe(pred, target)
    assert abs(float(mpjpe_loss(Tensor(pred), Tensor(target)).data) - want) <= 1e-9
    assert abs(mpjpe(pred, target) - want) <= 1e-9


def test_mpjpe_345_offset_is_exactly_five(rng):
    target = rng.normal(size=(25, 22, 3))
    pred = target + np.array([3.0, 4.0, 0.0])
    target = pred - np.array([3.0, 4.0, 0.0])  # exact offsets in floating point
    assert float(mpjpe_loss(Tensor(pred), Tensor(target)).data) == 5.0
    assert float(mpjpe_loss(Tensor(target), Tensor(target)).data) == 0.0


def test_mpjpe_gradient_is_finite_at_zero_error(rng):
    x = Tensor(rng.normal(size=(2, 3, 3)), requires_grad=True)
    with new_tape():
        loss = mpjpe_loss(x, Tensor(x.data.copy()))
        backward(loss)
    assert np.all(x.grad == 0)


def test_mpjpe_gradcheck(rng):
    x = Tensor(rng.normal(size=(4, 5, 3)), requires_grad=True)
    y = Tensor(rng.normal(size=(4, 5, 3)))
    assert grad_check(lambda: mpjpe_loss(x, y), {"x": x}, tolerance=1e-7).passed


def test_mpjpe_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        mpjpe_loss(Tensor(np.zeros((2, 3, 3))), Tensor(np.zeros((2, 4, 3))))


# --- optimizer --------------------------------------------------------------

def _param(values, grad=None):
    p = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
    p.grad = None if grad is None else np.asarray(grad, dtype=np.float64)
    return p


def test_adam_zero_gradient_leaves_parameters_unchanged():
    p = _param([1.0, -2.0], [0.0, 0.0])
    Adam([("p", p)], lr=0.1).step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_has_magnitude_lr():
    g = np.array([1e-3, -5.0, 30.0])
    p = _param([0.0, 0.0, 0.0], g)
    Adam([("p", p)], lr=0.01, eps=1e-8).step()
    want = -0.01 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(p.data, want, rtol=1e-9)


def test_adam_matches_hand_recurrence(rng):
    lr, b1, b2, eps = 0.05, 0.8, 0.95, 1e-6
    x = rng.normal(size=4)
    p = _param(x.copy())
    opt = Adam([("p", p)], lr, b1, b2, eps)
    m = v = np.zeros(4)
    for t in range(1, 6):
        g = rng.normal(size=4)
        p.grad = g.copy()
        opt.step()
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        np.testing.assert_allclose(p.data, x, rtol=1e-12)


def test_adam_state_round_trip(rng):
    p = _param(rng.normal(size=3), rng.normal(size=3))
    opt = Adam([("p", p)])
    opt.step()
    clone = Adam([("p", _param(p.data.copy()))])
    clone.load_state_tensors(opt.state_tensors())
    assert clone.step_count == 1
    np.testing.assert_array_equal(clone.m["p"], opt.m["p"])
    with pytest.raises(KeyError, match="mismatch"):
        Adam([("q", _param([0.0]))]).load_state_tensors(opt.state_tensors())


def test_clip_grad_norm(rng):
    a, b = _param([0.0, 0.0], [3.0, 0.0]), _param([0.0], [4.0])
    assert clip_grad_norm([a, b], 1.0) == 5.0
    np.testing.assert_allclose(np.concatenate([a.grad, b.grad]), [0.6, 0.0, 0.8])
    assert clip_grad_norm([a, b], 10.0) == pytest.approx(1.0)
    np.testing.assert_allclose(a.grad, [0.6, 0.0])


def test_step_decay():
    assert [step_decay(1.0, e, 0.5, 3) for e in range(7)] == [1, 1, 1, 0.5, 0.5, 0.5, 0.25]


# --- checkpoints ------------------------------------------------------------

def _random_checkpoint(rng):
    def tensors(prefix):
        return {f"{prefix}{i}": rng.normal(size=tuple(rng.integers(1, 4, rng.integers(0, 4)))).astype(np.float32)
                for i in range(int(rng.integers(0, 5)))}
    config = {f"k{i}": str(rng.normal()) for i in range(int(rng.integers(0, 5)))}
    return Checkpoint(config, tensors("p"), tensors("adam.m/"), rng.bytes(16))


@given(st.integers(0, 2**31 - 1))
def test_checkpoint_round_trip_is_byte_identical(seed):
    buf = dumps_checkpoint(_random_checkpoint(np.random.default_rng(seed)))
    assert dumps_checkpoint(loads_checkpoint(buf)) == buf


@pytest.mark.parametrize("mutate,message", [
    (lambda b: b"XIST" + b[4:], "magic"),
    (lambda b: b[:4] + b"\x09\0\0\0" + b[8:], "version"),
    (lambda b: b[:-1], "truncated"),
    (lambda b: b + b"\0", "trailing"),
])
def test_checkpoint_rejects_corruption(rng, mutate, message):
    buf = dumps_checkpoint(Checkpoint({"a": "1"}, {"w": np.ones(3, np.float32)}, {}, bytes(16)))
    with pytest.raises(CheckpointError, match=message):
        loads_checkpoint(mutate(buf))


def test_checkpoint_rejects_bad_rng_state():
    with pytest.raises(CheckpointError, match="16 bytes"):
        dumps_checkpoint(Checkpoint(rng_state=b"short"))


# --- trainer ----------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_data():
    return synth_dataset(30, n_frames=40, joints=4)


def _trainer(tiny_config, data, **kwargs):
    cfg = dict(epochs=3, batch_size=8, lr_interval=1, window_stride=5, seed=5)
    cfg.update(kwargs)
    return Trainer.create(tiny_config, TrainConfig(**cfg), data)


def test_train_config_validation_and_dict_round_trip():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    c = TrainConfig(epochs=7, augmentation=AugmentationSpec(rotation_max_deg=90, scale_range=(0.9, 1.1)))
    assert TrainConfig.from_dict({k: str(v) for k, v in c.to_dict().items()}) == c
    with pytest.raises(KeyError):
        TrainConfig.from_dict({"momentum": 0.9})


def test_epoch_report_and_loss_decrease(tiny_config, tiny_data):
    trainer = _trainer(tiny_config, tiny_data, epochs=4, learning_rate=3e-3)
    history = trainer.fit(validate=True)
    assert [r.epoch for r in history] == [1, 2, 3, 4]
    assert [r.lr for r in history] == [3e-3 * 0.5 ** e for e in range(4)]
    assert all(r.batches == -(-len(trainer.train_windows) // 8) for r in history)
    assert all(r.grad_norm_max >= r.grad_norm_mean > 0 and r.seconds > 0 for r in history)
    assert history[-1].loss < history[0].loss
    assert np.isfinite(history[-1].val_mpjpe)


def test_identical_seeds_give_identical_checkpoint_bytes(tiny_config, tiny_data, tmp_path):
    for name in ("a", "b"):
        t = _trainer(tiny_config, tiny_data, augmentation=AugmentationSpec(rotation_max_deg=360, noise_rate=0.1))
        t.train_epoch()
        t.save(tmp_path / f"{name}.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_resume_reproduces_uninterrupted_trajectory(tiny_config, tiny_data, tmp_path):
    spec = AugmentationSpec(rotation_max_deg=360, noise_rate=0.1)
    full = _trainer(tiny_config, tiny_data, augmentation=spec)
    full_losses = [r.loss for r in full.fit(validate=False)]

    first = _trainer(tiny_config, tiny_data, augmentation=spec)
    first.fit(epochs=1, validate=False, checkpoint_dir=tmp_path)
    resumed = Trainer.from_checkpoint(tmp_path / "epoch_0001.ckpt", tiny_data)
    assert resumed.epoch == 1
    losses = [first.history[0].loss] + [r.loss for r in resumed.fit(validate=False)]
    assert losses == full_losses
    full.save(tmp_path / "full.ckpt")
    resumed.save(tmp_path / "resumed.ckpt")
    assert (tmp_path / "full.ckpt").read_bytes() == (tmp_path / "resumed.ckpt").read_bytes()


def test_fit_writes_log_and_checkpoints(tiny_config, tiny_data, tmp_path):
    trainer = _trainer(tiny_config, tiny_data, epochs=2)
    trainer.fit(log_path=tmp_path / "train.log", checkpoint_dir=tmp_path / "ckpt")
    lines = (tmp_path / "train.log").read_text().splitlines()
    assert [line.split("\t")[:2] for line in lines] == [
        ["1", "train"], ["1", "val"], ["2", "train"], ["2", "val"]]
    assert sorted(p.name for p in (tmp_path / "ckpt").iterdir()) == [
        "epoch_0001.ckpt", "epoch_0002.ckpt", "last.ckpt"]
    model = load_model(tmp_path / "ckpt" / "last.ckpt")
    assert not model.training
    assert model.config == tiny_config
    ckpt = load_checkpoint(tmp_path / "ckpt" / "last.ckpt")
    assert ckpt.config["state.epoch"] == "2"


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_reports_epoch_batch_and_sequences(tiny_config, tiny_data):
    trainer = _trainer(tiny_config, tiny_data)
    trainer.model.embed.weight.data[...] = np.inf
    with pytest.raises(NumericError, match=r"epoch 1 batch 0 \(sequences \[\d+"):
        trainer.train_epoch()


def test_empty_training_split_is_an_error(tiny_config):
    data = synth_dataset(3, n_frames=8, joints=4)
    with pytest.raises(ValueError, match="no windows"):
        _trainer(tiny_config, data).train_epoch()


def test_saving_a_checkpoint_keeps_config_and_optimizer(tiny_config, tiny_data, tmp_path):
    trainer = _trainer(tiny_config, tiny_data)
    trainer.train_epoch()
    save_checkpoint(trainer.to_checkpoint(), tmp_path / "x.ckpt")
    back = Trainer.from_checkpoint(load_checkpoint(tmp_path / "x.ckpt"), tiny_data)
    assert back.config == trainer.config
    assert back.optimizer.step_count == trainer.optimizer.step_count
    for (name, a), (_, b) in zip(trainer.model.named_parameters(), back.model.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)
