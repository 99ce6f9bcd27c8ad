import numpy as np
import pytest

from ctxcap.optim import AdamState, adam_step, clip_grad_norm
from ctxcap.params import CheckpointError, ParamStore, load_checkpoint, save_checkpoint


def test_init_scheme():
    ps = ParamStore(seed=3)
    w = ps.create("w", (100, 7))
    b = ps.create("b", (7,))
    assert np.all(np.abs(w.data) <= 0.1)
    assert np.all(b.data == 0)
    assert w.dtype == np.float32


def test_same_seed_same_values():
    a, b = ParamStore(5), ParamStore(5)
    for ps in (a, b):
        ps.create("x", (4, 4))
    assert a.checksum() == b.checksum()


def test_duplicate_name_rejected():
    ps = ParamStore()
    ps.create("x", (2,))
    with pytest.raises(KeyError):
        ps.create("x", (2,))


def test_checkpoint_round_trip(tmp_path):
    tensors = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array([1.5, -2.0])}
    save_checkpoint(tmp_path / "m.ckpt", tensors, {"note": "x"})
    back, meta = load_checkpoint(tmp_path / "m.ckpt")
    assert meta == {"note": "x"}
    for k in tensors:
        np.testing.assert_array_equal(back[k], tensors[k])
        assert back[k].dtype == tensors[k].dtype


def test_checkpoint_bad_magic(tmp_path):
    (tmp_path / "bad").write_bytes(b"NOTACKPT" + b"\0" * 8)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad")


def test_load_state_shape_mismatch():
    ps = ParamStore()
    ps.create("x", (2, 2))
    with pytest.raises(CheckpointError, match="shape"):
        ps.load_state({"x": np.zeros((3, 2))})


class TestAdam:
    def _scalar(self, value=1.0):
        ps = ParamStore(dtype=np.float64)
        ps.add("theta", np.array([value]))
        return ps

    def test_zero_gradient_leaves_parameter(self):
        ps = self._scalar()
        ps["theta"].grad = np.zeros(1)
        adam_step(ps, AdamState())
        assert ps["theta"].data[0] == 1.0

    def test_first_step_moves_by_learning_rate(self):
        # m_hat = g, v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps)
        ps = self._scalar()
        ps["theta"].grad = np.ones(1)
        st = AdamState(learning_rate=1e-3)
        adam_step(ps, st)
        assert ps["theta"].data[0] == pytest.approx(1.0 - 1e-3 / (1.0 + 1e-8), abs=1e-15)

    def test_identical_scalars_get_identical_updates(self):
        ps = ParamStore(dtype=np.float64)
        ps.add("a", np.array([0.3]))
        ps.add("b", np.array([0.3]))
        st = AdamState(learning_rate=0.01)
        for g in (0.5, -1.0, 2.0):
            ps["a"].grad = np.array([g])
            ps["b"].grad = np.array([g])
            adam_step(ps, st)
        assert ps["a"].data[0] == ps["b"].data[0]

    def test_missing_gradient_names_parameter(self):
        ps = self._scalar()
        with pytest.raises(KeyError, match="theta"):
            adam_step(ps, AdamState())

    def test_gradients_cleared(self):
        ps = self._scalar()
        ps["theta"].grad = np.ones(1)
        adam_step(ps, AdamState())
        assert ps["theta"].grad is None


def test_clip_grad_norm():
    ps = ParamStore(dtype=np.float64)
    ps.add("a", np.zeros(2))
    ps.add("b", np.zeros(1))
    ps["a"].grad = np.array([3.0, 0.0])
    ps["b"].grad = np.array([4.0])
    assert clip_grad_norm(ps, ["a", "b"], 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose(ps["a"].grad, [0.6, 0.0])
    np.testing.assert_allclose(ps["b"].grad, [0.8])
    assert clip_grad_norm(ps, ["a", "b"], 10.0) == pytest.approx(1.0)
    np.testing.assert_allclose(ps["b"].grad, [0.8])
