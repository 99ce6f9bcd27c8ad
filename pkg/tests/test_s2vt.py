import numpy as np
import pytest

from ctxcap.gradcheck import grad_check
from ctxcap.params import ParamStore
from ctxcap.s2vt import S2VT, LstmState, S2VTConfig, lstm_step, make_lstm, zero_state
from ctxcap.tensor import ShapeError, Tensor

from .oracles import np_lstm


def cfg(**kw):
    base = dict(T_enc=3, T_dec=4, video_feature_dim=5, video_embed_dim=4, word_embed_dim=3, hidden_dim=6)
    base.update(kw)
    return S2VTConfig(**base)


def model(c=None, seed=0, scale=None):
    ps = ParamStore(seed, np.float64)
    m = S2VT(c or cfg(), ps)
    if scale is not None:
        rng = np.random.default_rng(seed)
        for _, p in ps.items():
            p.data = rng.normal(0, scale, size=p.shape) if scale else np.zeros(p.shape)
    return m, ps


def test_config_validation():
    with pytest.raises(ValueError):
        S2VTConfig(hidden_dim=7)
    with pytest.raises(ValueError):
        S2VTConfig(T_enc=0)


class TestFrameEmbedding:
    def test_zero(self):
        m, ps = model(scale=0)
        out = m.embed_frames(np.zeros((1, 3, 5)))
        assert np.all(out.data == 0)

    def test_identity(self):
        m, ps = model(cfg(video_feature_dim=4, video_embed_dim=4), scale=0)
        ps["s2vt.embed.W"].data = np.eye(4)
        x = np.random.default_rng(1).normal(size=(1, 3, 4))
        np.testing.assert_array_equal(m.embed_frames(x).data, x)

    def test_per_frame_affine(self):
        m, ps = model(scale=0.5)
        x = np.random.default_rng(2).normal(size=(1, 3, 5))
        W, b = ps["s2vt.embed.W"].data, ps["s2vt.embed.b"].data
        want = np.stack([x[0, t] @ W + b for t in range(3)])
        np.testing.assert_allclose(m.embed_frames(x).data[0], want, atol=1e-14)

    def test_dim_mismatch(self):
        m, _ = model()
        with pytest.raises(ShapeError):
            m.embed_frames(np.zeros((1, 3, 7)))


class TestLstmStep:
    def setup_method(self):
        self.ps = ParamStore(0, np.float64)
        make_lstm(self.ps, "l", 3, 2)

    def test_zero_params_zero_state(self):
        for _, p in self.ps.items():
            p.data = np.zeros(p.shape)
        s = lstm_step(Tensor(np.ones((1, 3))), zero_state(1, 2, np.float64), self.ps, "l")
        assert np.all(s.h.data == 0) and np.all(s.c.data == 0)

    def test_zero_input_matches_gate_equations(self):
        rng = np.random.default_rng(3)
        for _, p in self.ps.items():
            p.data = rng.normal(size=p.shape)
        h, c = rng.normal(size=(1, 2)), rng.normal(size=(1, 2))
        s = lstm_step(Tensor(np.zeros((1, 3))), LstmState(Tensor(h), Tensor(c)), self.ps, "l")
        want_h, want_c = np_lstm(np.zeros((1, 3)), h, c, *(self.ps[f"l.{k}"].data for k in ("W_x", "W_h", "b")))
        np.testing.assert_allclose(s.h.data, want_h, atol=1e-14)
        np.testing.assert_allclose(s.c.data, want_c, atol=1e-14)

    def test_gradient_through_three_steps(self):
        rng = np.random.default_rng(4)
        for _, p in self.ps.items():
            p.data = rng.normal(0, 0.7, size=p.shape)
        xs = rng.normal(size=(3, 2, 3))

        def loss():
            s = zero_state(2, 2, np.float64)
            for x in xs:
                s = lstm_step(Tensor(x), s, self.ps, "l")
            return (s.h * s.h).sum() + s.c.sum()

        assert grad_check(loss, self.ps, max_coords=50) < 1e-4

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            lstm_step(Tensor(np.zeros((1, 4))), zero_state(1, 2, np.float64), self.ps, "l")


class TestEncoder:
    def test_zero_params(self):
        m, _ = model(scale=0)
        enc = m.encode(np.ones((2, 3, 5)))
        assert np.all(enc.top_states.data == 0)
        assert np.all(enc.bottom.h.data == 0)

    def test_bidirectional_symmetry(self):
        m, _ = model(scale=0.5)
        x = np.random.default_rng(5).normal(size=(1, 3, 5))
        a = m.encode(x).top_states.data[0]
        b = m.encode(x[:, ::-1]).top_states.data[0]
        half = 3
        assert not np.allclose(a[:, :half], b[:, :half])
        # with tied directions, the backward half on x is the forward half on
        # reversed x, read back to front
        m2, ps2 = model(scale=0.5)
        for k in ("W_x", "W_h", "b"):
            ps2[f"s2vt.top_bw.{k}"].data = ps2[f"s2vt.top_fw.{k}"].data.copy()
        a = m2.encode(x).top_states.data[0]
        b = m2.encode(x[:, ::-1]).top_states.data[0]
        np.testing.assert_allclose(a[:, half:], b[::-1, :half], atol=1e-14)

    def test_single_frame(self):
        c = cfg(T_enc=1)
        m, ps = model(c, scale=0.5)
        x = np.random.default_rng(6).normal(size=(1, 1, 5))
        v = x[0] @ ps["s2vt.embed.W"].data + ps["s2vt.embed.b"].data
        z = np.zeros((1, 3))
        get = lambda p: [ps[f"{p}.{k}"].data for k in ("W_x", "W_h", "b")]
        hf, _ = np_lstm(v, z, z, *get("s2vt.top_fw"))
        hb, _ = np_lstm(v, z, z, *get("s2vt.top_bw"))
        enc = m.encode(x)
        np.testing.assert_allclose(enc.top_states.data[0, 0], np.concatenate([hf, hb], -1)[0], atol=1e-14)

    def test_errors(self):
        m, _ = model()
        with pytest.raises(ValueError):
            m.encode(np.zeros((1, 0, 5)))
        with pytest.raises(ShapeError):
            m.encode(np.zeros((1, 4, 5)))

    def test_short_video_is_padded(self):
        m, _ = model(scale=0.5)
        enc = m.encode(np.ones((1, 2, 5)))
        assert enc.top_states.shape == (1, 3, 6)


class TestTemporalAttention:
    def test_equal_scores_give_mean(self):
        m, ps = model(scale=0.5)
        enc = m.encode(np.random.default_rng(7).normal(size=(1, 3, 5)))
        ps["s2vt.attn.v"].data[:] = 0.0
        s_star, eta = m.temporal_attention(enc, Tensor(np.ones((1, 6))))
        np.testing.assert_allclose(eta.data, 1 / 3)
        np.testing.assert_allclose(s_star.data[0], enc.top_states.data[0].mean(0), atol=1e-14)

    def test_saturated_score_selects_state(self):
        m, ps = model(scale=0.5)
        enc = m.encode(np.random.default_rng(8).normal(size=(1, 3, 5)))
        enc.keys = Tensor(np.zeros_like(enc.keys.data))
        enc.keys.data[0, 1, 0] = 1.0
        ps["s2vt.attn.W2"].data[:] = 0
        ps["s2vt.attn.b"].data[:] = 0
        ps["s2vt.attn.v"].data[:] = 0
        ps["s2vt.attn.v"].data[0, 0] = 100.0
        s_star, _ = m.temporal_attention(enc, Tensor(np.zeros((1, 6))))
        np.testing.assert_allclose(s_star.data[0], enc.top_states.data[0, 1], atol=1e-6)

    def test_against_direct_arithmetic(self):
        m, ps = model(scale=0.5)
        enc = m.encode(np.random.default_rng(9).normal(size=(1, 3, 5)))
        q = np.random.default_rng(10).normal(size=(1, 6))
        S = enc.top_states.data[0]
        W1, W2, b, v = (ps[f"s2vt.attn.{k}"].data for k in ("W1", "W2", "b", "v"))
        e = np.array([(np.tanh(S[t] @ W1 + q[0] @ W2 + b) @ v)[0] for t in range(3)])
        eta = np.exp(e - e.max()) / np.exp(e - e.max()).sum()
        s_star, got = m.temporal_attention(enc, Tensor(q))
        np.testing.assert_allclose(got.data[0], eta, atol=1e-14)
        np.testing.assert_allclose(s_star.data[0], eta @ S, atol=1e-14)


class TestDecodeStep:
    def test_before_encode(self):
        m, _ = model()
        with pytest.raises(RuntimeError):
            m.decode_step(Tensor(np.zeros((1, 3))), None, zero_state(1, 3, np.float64), zero_state(1, 6, np.float64))

    def test_zero_params(self):
        m, _ = model(scale=0)
        enc = m.encode(np.ones((1, 3, 5)))
        h, *_ = m.decode_step(Tensor(np.ones((1, 3))), enc, enc.top_forward, enc.bottom)
        assert np.all(h.data == 0)

    def test_composed_oracle(self):
        c = cfg(T_enc=2, T_dec=1, video_feature_dim=3, video_embed_dim=2, word_embed_dim=2, hidden_dim=4, attention_dim=3)
        m, ps = model(c, scale=0.5)
        x = np.random.default_rng(11).normal(size=(1, 2, 3))
        w = np.random.default_rng(12).normal(size=(1, 2))
        enc = m.encode(x)
        get = lambda p: [ps[f"{p}.{k}"].data for k in ("W_x", "W_h", "b")]
        top_h, _ = np_lstm(np.zeros((1, 2)), enc.top_forward.h.data, enc.top_forward.c.data, *get("s2vt.top_fw"))
        s_top = np.concatenate([top_h, np.zeros((1, 2))], -1)
        S = enc.top_states.data[0]
        W1, W2, b, v = (ps[f"s2vt.attn.{k}"].data for k in ("W1", "W2", "b", "v"))
        q = enc.bottom.h.data[0]
        e = np.array([(np.tanh(S[t] @ W1 + q @ W2 + b) @ v)[0] for t in range(2)])
        eta = np.exp(e) / np.exp(e).sum()
        inp = np.concatenate([w, s_top, (eta @ S)[None]], -1)
        want, _ = np_lstm(inp, enc.bottom.h.data, enc.bottom.c.data, *get("s2vt.bottom"))
        h, *_ = m.decode_step(Tensor(w), enc, enc.top_forward, enc.bottom)
        np.testing.assert_allclose(h.data, want, atol=1e-13)

    def test_gradient_encode_and_two_steps(self):
        m, ps = model(scale=0.5)
        rng = np.random.default_rng(13)
        x, words = rng.normal(size=(2, 3, 5)), rng.normal(size=(2, 2, 3))

        def loss():
            enc = m.encode(x)
            top, bottom = enc.top_forward, enc.bottom
            total = None
            for t in range(2):
                h, top, bottom, _ = m.decode_step(Tensor(words[:, t]), enc, top, bottom)
                term = (h * h).sum()
                total = term if total is None else total + term
            return total

        assert grad_check(loss, ps, h=1e-5, max_coords=10) < 1e-4


def test_attention_weights_sum_to_one():
    m, _ = model(scale=0.5)
    enc = m.encode(np.random.default_rng(14).normal(size=(4, 3, 5)))
    _, eta = m.temporal_attention(enc, Tensor(np.random.default_rng(15).normal(size=(4, 6))))
    np.testing.assert_allclose(eta.data.sum(-1), 1.0, atol=1e-12)
