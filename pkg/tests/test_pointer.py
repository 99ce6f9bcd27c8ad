import numpy as np
import pytest

from ctxcap.gradcheck import grad_check
from ctxcap.params import ParamStore
from ctxcap.pointer import (
    PointerGenerator,
    copy_matrix,
    coverage_penalty,
    final_distribution,
    step_loss,
    update_coverage,
)
from ctxcap.tensor import Tensor

from .oracles import np_lstm, softmax


def make(V=6, E=3, S=4, C=2, A=3, scale=0.5, seed=0):
    ps = ParamStore(seed, np.float64)
    pg = PointerGenerator(ps, V, E, S, context_hidden=C, attention_dim=A)
    rng = np.random.default_rng(seed)
    for _, p in ps.items():
        p.data = rng.normal(0, scale, size=p.shape) if scale else np.zeros(p.shape)
    return pg, ps


class TestContextEncoder:
    def test_zero_params(self):
        pg, _ = make(scale=0)
        enc = pg.encode_context(Tensor(np.ones((1, 4, 3))), np.ones((1, 4), bool))
        assert np.all(enc.h.data == 0)

    def test_single_token_is_two_cells(self):
        pg, ps = make()
        x = np.random.default_rng(1).normal(size=(1, 1, 3))
        enc = pg.encode_context(Tensor(x), np.ones((1, 1), bool))
        z = np.zeros((1, 2))
        get = lambda p: [ps[f"{p}.{k}"].data for k in ("W_x", "W_h", "b")]
        hf, _ = np_lstm(x[0], z, z, *get("ptr.ctx_fw"))
        hb, _ = np_lstm(x[0], z, z, *get("ptr.ctx_bw"))
        np.testing.assert_allclose(enc.h.data[0, 0], np.concatenate([hf, hb], -1)[0], atol=1e-14)

    def test_order_sensitive(self):
        pg, _ = make()
        x = np.random.default_rng(2).normal(size=(1, 3, 3))
        a = pg.encode_context(Tensor(x), np.ones((1, 3), bool)).h.data
        b = pg.encode_context(Tensor(x[:, ::-1]), np.ones((1, 3), bool)).h.data
        assert not np.allclose(a[0, 0], b[0, 2])

    def test_empty_context(self):
        pg, _ = make()
        with pytest.raises(ValueError):
            pg.encode_context(Tensor(np.zeros((1, 2, 3))), np.zeros((1, 2), bool))

    def test_padding_does_not_change_real_positions(self):
        pg, _ = make()
        x = np.random.default_rng(3).normal(size=(1, 3, 3))
        short = pg.encode_context(Tensor(x), np.ones((1, 3), bool)).h.data
        padded_x = np.concatenate([x, np.random.default_rng(4).normal(size=(1, 2, 3))], 1)
        mask = np.array([[1, 1, 1, 0, 0]], bool)
        long = pg.encode_context(Tensor(padded_x), mask).h.data
        np.testing.assert_allclose(long[0, :3], short[0], atol=1e-14)


class TestAttention:
    def test_identical_states_uniform(self):
        pg, ps = make()
        enc = pg.encode_context(Tensor(np.zeros((1, 4, 3))), np.ones((1, 4), bool))
        enc.h = Tensor(np.ones((1, 4, 4)))
        enc.keys = enc.h @ ps["ptr.attn.W_h"]
        xi = pg.attention(enc, Tensor(np.ones((1, 4))), Tensor(np.zeros((1, 4))))
        np.testing.assert_allclose(xi.data, 0.25)

    def test_against_direct_arithmetic(self):
        pg, ps = make()
        rng = np.random.default_rng(5)
        enc = pg.encode_context(Tensor(rng.normal(size=(1, 3, 3))), np.ones((1, 3), bool))
        s, c = rng.normal(size=(1, 4)), np.abs(rng.normal(size=(1, 3)))
        W_h, W_s, w_c, b, u = (ps[f"ptr.attn.{k}"].data for k in ("W_h", "W_s", "w_c", "b", "u"))
        h = enc.h.data[0]
        beta = np.array([(np.tanh(h[i] @ W_h + s[0] @ W_s + w_c[0] * c[0, i] + b) @ u)[0] for i in range(3)])
        xi = pg.attention(enc, Tensor(s), Tensor(c))
        np.testing.assert_allclose(xi.data[0], softmax(beta), atol=1e-14)
        # with w_c = 0 coverage is irrelevant
        ps["ptr.attn.w_c"].data[:] = 0
        a = pg.attention(enc, Tensor(s), Tensor(c)).data
        b0 = pg.attention(enc, Tensor(s), Tensor(np.zeros((1, 3)))).data
        np.testing.assert_array_equal(a, b0)

    def test_masked_positions_zero(self):
        pg, _ = make()
        mask = np.array([[1, 1, 0]], bool)
        enc = pg.encode_context(Tensor(np.random.default_rng(6).normal(size=(1, 3, 3))), mask)
        xi = pg.attention(enc, Tensor(np.ones((1, 4))), Tensor(np.zeros((1, 3)))).data
        assert xi[0, 2] == 0.0 and abs(xi.sum() - 1) < 1e-12


class TestCoverage:
    def test_accumulates(self):
        M = 4
        c = Tensor(np.zeros((1, M)))
        assert np.all(c.data == 0)
        for t in range(1, 6):
            c = update_coverage(c, Tensor(np.full((1, M), 1 / M)))
            np.testing.assert_allclose(c.data, t / M)
            assert abs(c.data.sum() - t) < 1e-6

    def test_penalty_example(self):
        xi, cov = Tensor(np.array([[0.3, 0.7]])), Tensor(np.array([[0.5, 0.2]]))
        assert coverage_penalty(xi, cov).data[0] == pytest.approx(0.5)
        loss = step_loss(Tensor(np.array([[1.0, 0.0]])), np.array([0]), xi, cov, 1.0)
        assert loss.data[0] == pytest.approx(0.5)

    def test_first_step_penalty_is_zero(self):
        xi = Tensor(np.array([[0.9, 0.1]]))
        assert coverage_penalty(xi, Tensor(np.zeros((1, 2)))).data[0] == 0.0


class TestVocabAndGen:
    def test_zero_weights_uniform(self):
        pg, _ = make(scale=0)
        p = pg.vocab_distribution(Tensor(np.ones((1, 4))), Tensor(np.ones((1, 4))))
        np.testing.assert_allclose(p.data, 1 / 6)

    def test_vocab_oracle(self):
        pg, ps = make(V=4)
        rng = np.random.default_rng(7)
        s, h = rng.normal(size=(1, 4)), rng.normal(size=(1, 4))
        W, b, W2, b2 = (ps[f"ptr.out.{k}"].data for k in ("W", "b", "W2", "b2"))
        want = softmax((np.concatenate([s, h], -1) @ W + b) @ W2 + b2)
        got = pg.vocab_distribution(Tensor(s), Tensor(h)).data
        np.testing.assert_allclose(got, want, atol=1e-14)
        assert abs(got.sum() - 1) < 1e-9

    def test_context_vector(self):
        h = np.random.default_rng(8).normal(size=(1, 3, 4))
        from ctxcap.pointer import ContextEncoding

        enc = ContextEncoding(Tensor(h), Tensor(h), np.ones((1, 3), bool))
        one_hot = PointerGenerator.context_vector(enc, Tensor(np.array([[0.0, 1.0, 0.0]]))).data
        np.testing.assert_array_equal(one_hot[0], h[0, 1])
        uni = PointerGenerator.context_vector(enc, Tensor(np.full((1, 3), 1 / 3))).data
        np.testing.assert_allclose(uni[0], h[0].mean(0), atol=1e-15)
        w = np.array([[0.2, 0.5, 0.3]])
        np.testing.assert_allclose(PointerGenerator.context_vector(enc, Tensor(w)).data[0], w[0] @ h[0], atol=1e-15)

    def test_generation_prob(self):
        pg, ps = make(scale=0)
        z = Tensor(np.ones((1, 4)))
        assert pg.generation_prob(z, z, Tensor(np.ones((1, 3)))).data[0, 0] == 0.5
        ps["ptr.gen.b"].data[:] = 20.0
        assert pg.generation_prob(z, z, Tensor(np.ones((1, 3)))).data[0, 0] > 1 - 1e-8
        pg, ps = make()
        rng = np.random.default_rng(9)
        h, s, x = rng.normal(size=(1, 4)), rng.normal(size=(1, 4)), rng.normal(size=(1, 3))
        z = h @ ps["ptr.gen.w_h"].data + s @ ps["ptr.gen.w_s"].data + x @ ps["ptr.gen.w_x"].data + ps["ptr.gen.b"].data
        got = pg.generation_prob(Tensor(h), Tensor(s), Tensor(x)).data
        np.testing.assert_allclose(got, 1 / (1 + np.exp(-z)), atol=1e-15)


class TestFinalDistribution:
    def fixture(self, p_gen):
        # global vocab {a, b}; context (b, c) with c out of vocabulary -> id 2
        p_vocab = Tensor(np.array([[0.6, 0.4]]))
        xi = Tensor(np.array([[0.5, 0.5]]))
        cmap = copy_matrix(np.array([[1, 2]]), np.ones((1, 2), bool), 3)
        return final_distribution(p_vocab, xi, Tensor(np.array([[p_gen]])), cmap).data[0]

    def test_worked_example(self):
        np.testing.assert_allclose(self.fixture(0.5), [0.30, 0.45, 0.25], atol=1e-15)

    def test_generation_limit(self):
        np.testing.assert_array_equal(self.fixture(1.0), [0.6, 0.4, 0.0])

    def test_copy_limit(self):
        np.testing.assert_array_equal(self.fixture(0.0), [0.0, 0.5, 0.5])

    def test_repeated_context_word_aggregates(self):
        cmap = copy_matrix(np.array([[2, 0, 2]]), np.ones((1, 3), bool), 3)
        out = final_distribution(
            Tensor(np.array([[0.5, 0.5]])), Tensor(np.array([[0.2, 0.3, 0.5]])), Tensor(np.array([[0.0]])), cmap
        ).data[0]
        np.testing.assert_allclose(out, [0.3, 0.0, 0.7])


class TestStepLoss:
    def test_perfect_prediction(self):
        assert step_loss(Tensor(np.array([[0.0, 1.0]])), np.array([1]), None, None, 0.0).data[0] == 0.0

    def test_zero_probability_is_finite(self):
        out = step_loss(Tensor(np.array([[1.0, 0.0]])), np.array([1]), None, None, 0.0).data[0]
        assert np.isfinite(out) and out == pytest.approx(-np.log(1e-12))


def test_full_pointer_step_gradient():
    pg, ps = make(V=5, E=3, S=4, C=2, A=3)
    rng = np.random.default_rng(10)
    emb = rng.normal(size=(2, 4, 3))
    mask = np.array([[1, 1, 1, 1], [1, 1, 1, 0]], bool)
    s, x = rng.normal(size=(2, 4)), rng.normal(size=(2, 3))
    cov0 = np.abs(rng.normal(size=(2, 4))) * mask
    cmap = copy_matrix(np.array([[0, 5, 2, 6], [5, 1, 3, 0]]), mask, 7)

    def loss():
        enc = pg.encode_context(Tensor(emb), mask)
        out = pg.step(enc, Tensor(s), Tensor(x), Tensor(cov0), cmap)
        return step_loss(out.p_final, np.array([5, 3]), out.xi, Tensor(cov0), 1.0).sum()

    assert grad_check(loss, ps, max_coords=10) < 1e-4
