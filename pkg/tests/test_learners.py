import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iplna.errors import ConfigError, DivergenceError, DomainError
from iplna.learners import (
    AdamState,
    GdState,
    NgdState,
    RlsState,
    adam_extended_matrix,
    adam_extended_state,
    adam_step,
    batch_gd_step,
    gd_step,
    learner_step,
    ngd_step,
    parse_learner,
    rls_step,
)

seeds = st.integers(0, 2**32 - 1)


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


class TestGd:
    def test_zero_fixed_point(self):
        w, ss, sample, _ = gd_step(np.zeros(3), [1.0, -2.0, 0.5], 0.0, GdState(0.3))
        assert np.array_equal(w, np.zeros(3)) and sample.e == 0.0

    def test_scalar_hand_computation(self):
        w, ss, sample, _ = gd_step([0.0], [1.0], 1.0, GdState(1.0))
        assert w.tolist() == [1.0]
        assert ss.A.tolist() == [[0.0]] and ss.u.tolist() == [1.0] and ss.B.tolist() == [[1.0]]

    def test_two_dim_hand_computation(self):
        w, ss, sample, _ = gd_step([1.0, 0.0], [1.0, 1.0], 0.0, GdState(0.5))
        assert sample.e == -1.0
        assert w.tolist() == [0.5, -0.5]
        assert np.allclose(ss.apply(np.array([1.0, 0.0])), w, rtol=0, atol=1e-15)

    @settings(max_examples=50)
    @given(seeds, st.integers(1, 6))
    def test_affine_superposition(self, seed, n):
        rng = np.random.default_rng(seed)
        g, s = rng.standard_normal(n), GdState(float(rng.uniform(0.01, 1)))
        w1, w2 = rng.standard_normal(n), rng.standard_normal(n)
        y1, y2 = rng.standard_normal(2)
        a = float(rng.uniform(-2, 2))
        step = lambda w, y: gd_step(w, g, y, s).w  # noqa: E731
        # affine map: f(a p + (1-a) q) = a f(p) + (1-a) f(q)
        lhs = step(a * w1 + (1 - a) * w2, a * y1 + (1 - a) * y2)
        rhs = a * step(w1, y1) + (1 - a) * step(w2, y2)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_divergence_carries_step_index(self):
        with pytest.raises(DivergenceError) as info:
            gd_step([1e300], [1e10], 0.0, GdState(1e10), k=17)
        assert info.value.k == 17

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            gd_step([0.0, 0.0], [1.0], 0.0, GdState(0.1))


class TestNgd:
    def test_zero_features_keep_weights(self):
        w, ss, sample, _ = ngd_step([0.3, -0.2], [0.0, 0.0], 5.0, NgdState(1.0, 1e-3))
        assert sample.eta == pytest.approx(1000.0)
        assert w.tolist() == [0.3, -0.2]

    def test_scalar_hand_computation(self):
        w, ss, sample, _ = ngd_step([0.0], [2.0], 1.0, NgdState(1.0, 0.0))
        assert sample.eta == 0.25
        assert ss.A.tolist() == [[0.0]]

    def test_zero_features_without_regulariser(self):
        with pytest.raises(DomainError):
            ngd_step([0.0], [0.0], 1.0, NgdState(1.0, 0.0))

    @settings(max_examples=200)
    @given(seeds, st.integers(1, 16), st.floats(0.01, 1.99))
    def test_active_direction_contracts(self, seed, n, mu):
        g = np.random.default_rng(seed).uniform(-5, 5, n)
        _, ss, sample, _ = ngd_step(np.zeros(n), g, 1.0, NgdState(mu, 1e-12))
        assert abs(1 - sample.eta * (g @ g)) < 1

    @settings(max_examples=100)
    @given(seeds, st.integers(1, 10))
    def test_state_space_equivalence(self, seed, n):
        rng = np.random.default_rng(seed)
        w, g, y = rng.standard_normal(n), rng.standard_normal(n), float(rng.standard_normal())
        res = ngd_step(w, g, y, NgdState(float(rng.uniform(0.1, 1.9)), 1e-6))
        assert rel_err(res.ss.apply(w), res.w) < 1e-10


class TestRls:
    def test_zero_features(self):
        s = RlsState(P=np.array([[2.0, 0.5], [0.5, 1.0]]), mu=0.9)
        w, ss, sample, s2 = rls_step([1.0, 2.0], [0.0, 0.0], 3.0, s)
        assert np.array_equal(sample.eta, np.zeros(2))
        assert w.tolist() == [1.0, 2.0]
        assert np.allclose(s2.P, s.P / 0.9, rtol=0, atol=1e-15)

    def test_scalar_hand_computation(self):
        w, ss, sample, s2 = rls_step([0.0], [1.0], 1.0, RlsState(P=np.array([[1.0]]), mu=1.0))
        assert sample.eta.tolist() == [0.5]
        assert w.tolist() == [0.5]
        assert s2.P.tolist() == [[0.5]]

    def test_converges_on_noiseless_linear_data(self):
        rng = np.random.default_rng(4)
        n, true_w = 3, np.array([0.7, -1.3, 0.25])
        # delta=100 leaves a prior bias of ~2e-6 after 500 steps at mu=0.99
        s, w = RlsState.initial(n, mu=0.99, delta=1e4), np.zeros(n)
        G = rng.uniform(-1, 1, (500, n))
        ys = G @ true_w
        for k in range(500):
            w, _, _, s = rls_step(w, G[k], ys[k], s, k)
        oracle = np.linalg.solve(G.T @ G, G.T @ ys)
        assert np.max(np.abs(oracle - true_w)) < 1e-12
        assert np.max(np.abs(w - oracle)) < 1e-6

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_consistency_after_50n_samples(self, seed, n):
        rng = np.random.default_rng(seed)
        true_w = rng.uniform(-1, 1, n)
        s, w = RlsState.initial(n, mu=1.0, delta=1e6), np.zeros(n)
        G = rng.uniform(-1, 1, (50 * n, n))
        for k, g in enumerate(G):
            w, _, _, s = rls_step(w, g, g @ true_w, s, k)
        oracle = np.linalg.lstsq(G, G @ true_w, rcond=None)[0]
        assert np.max(np.abs(w - oracle)) < 1e-6

    def test_covariance_stays_symmetric(self):
        rng = np.random.default_rng(9)
        s, w = RlsState.initial(4), np.zeros(4)
        for k in range(300):
            g = rng.standard_normal(4)
            w, _, _, s = rls_step(w, g, float(rng.standard_normal()), s, k)
            assert np.max(np.abs(s.P - s.P.T)) <= 1e-9

    @settings(max_examples=100)
    @given(seeds, st.integers(1, 8))
    def test_state_space_equivalence(self, seed, n):
        rng = np.random.default_rng(seed)
        w, s = rng.standard_normal(n), RlsState.initial(n)
        for k in range(5):
            g, y = rng.standard_normal(n), float(rng.standard_normal())
            res = rls_step(w, g, y, s, k)
            assert res.ss.B.shape == (n, 1) and res.ss.u.shape == (1,)
            assert rel_err(res.ss.apply(w), res.w) < 1e-10
            w, s = res.w, res.state

    def test_bad_forgetting_factor(self):
        with pytest.raises(ConfigError):
            RlsState.initial(2, mu=1.5)


def adam_oracle(w0, gs, ys, eta, beta1):
    """Plain-loop ADAM recursion with a fixed scalar step size."""
    w, m = np.array(w0, dtype=float), np.zeros(len(w0))
    out = []
    for g, y in zip(gs, ys):
        e = y - g @ w
        w, m = w - eta * m, beta1 * m + (beta1 - 1) * g * e
        out.append((w.copy(), m.copy()))
    return out


class TestAdam:
    def test_equilibrium(self):
        s = AdamState.initial(2)
        w, ss, sample, s2 = adam_step([1.0, 2.0], [1.0, 0.5], 2.0, s)
        assert sample.e == 0.0
        assert w.tolist() == [1.0, 2.0] and s2.m.tolist() == [0.0, 0.0]

    def test_two_step_hand_trace(self):
        s = AdamState.initial(1, mu=0.01, beta1=0.9, beta2=0.999, eps=1e-300)
        w, _, _, s = adam_step([0.0], [1.0], 1.0, s, 0)
        assert w.tolist() == [0.0]
        assert s.m[0] == pytest.approx(-0.1, abs=1e-15)
        # k=1: v_hat = 1, eta = 0.01 / (1 - 0.9) = 0.1
        assert s.step_size() == pytest.approx(0.1, rel=1e-14)
        w, _, _, s = adam_step(w, [1.0], 1.0, s, 1)
        assert w[0] == pytest.approx(0.01, rel=1e-14)

    def test_extended_matrix_blocks(self):
        A = adam_extended_matrix(np.array([1.0]), 0.1, 0.1, 0.9)
        expected = [[0, 1, 0, 0], [0, 1, 0, -0.1], [0, 0, 0, 1], [0.1, 0, -0.01, 0.9]]
        assert np.allclose(A, expected, rtol=0, atol=1e-15)

    def test_block_system_reproduces_fixed_step_recursion(self):
        rng = np.random.default_rng(2)
        n, beta1, eta, steps = 1, 0.9, 0.1, 100
        gs, ys = rng.uniform(-1, 1, (steps, n)), rng.uniform(-1, 1, steps)
        gs[:, 0] = 1.0
        oracle = adam_oracle(np.zeros(n), gs, ys, eta, beta1)
        xi = np.zeros(4 * n)
        B = np.vstack([np.zeros((3 * n, n)), (beta1 - 1) * np.eye(n)])
        for k in range(steps):
            prev_eta = 0.0 if k == 0 else eta
            xi = adam_extended_matrix(gs[k], eta, prev_eta, beta1) @ xi + B @ (ys[k] * gs[k])
            w, m = oracle[k]
            assert np.allclose(xi[n : 2 * n], w, rtol=0, atol=1e-12)
            assert np.allclose(xi[3 * n :], m, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("mode", ["scalar", "elementwise"])
    @pytest.mark.parametrize("n", [1, 4])
    def test_extended_trajectory_matches_direct(self, mode, n):
        rng = np.random.default_rng(n)
        s, w = AdamState.initial(n, mu=0.05, mode=mode), rng.uniform(-0.1, 0.1, n)
        xi = adam_extended_state(w, s)
        true_w = rng.uniform(-1, 1, n)
        for k in range(100):
            g = rng.uniform(-1, 1, n)
            res = adam_step(w, g, g @ true_w, s, k)
            xi = res.ss.apply(xi)
            w, s = res.w, res.state
            assert np.max(np.abs(xi - adam_extended_state(w, s))) <= 1e-9

    def test_elementwise_step_size_is_per_coordinate(self):
        s = AdamState(m=np.zeros(2), v=np.array([4.0, 1.0]) * 0.001, mu=0.01, beta2=0.999, eps=1e-300, mode="elementwise", k=1)
        assert np.allclose(s.step_size(), [0.05, 0.1], rtol=1e-12)
        assert np.allclose(AdamState(**{**s.__dict__, "mode": "scalar"}).step_size(), 0.01 / 0.1 / np.sqrt(2.5))

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            adam_step([0.0, 0.0], [1.0, 1.0], 1.0, AdamState.initial(3))


class TestBatch:
    def test_batch_of_one_matches_single_sample(self):
        w, g, y = np.array([0.2, -0.1, 0.4]), np.array([1.0, 0.5, -2.0]), 0.7
        for s, single in ((GdState(0.1), gd_step), (NgdState(0.8, 1e-6), ngd_step)):
            b = batch_gd_step(w, g[None, :], [y], s)
            r = single(w, g, y, s)
            assert np.array_equal(b.w, r.w)
            assert np.array_equal(b.ss.A, r.ss.A)

    def test_duplicated_samples_at_half_rate(self):
        w, g, y = np.array([0.2, -0.1]), np.array([1.0, 0.5]), 0.7
        b = batch_gd_step(w, np.vstack([g, g]), [y, y], GdState(0.05))
        assert np.allclose(b.w, gd_step(w, g, y, GdState(0.1)).w, rtol=1e-15, atol=1e-15)

    def test_three_samples_against_matmul_oracle(self):
        G = np.array([[1.0, 2.0], [0.5, -1.0], [-0.3, 0.8]])
        ys = np.array([1.0, 0.0, -2.0])
        w = np.array([0.1, 0.2])
        s = NgdState(1.0, 0.01)
        eta = 1.0 / (sum(v * v for v in G.ravel()) + 0.01)
        gtg = [[sum(G[i][a] * G[i][b] for i in range(3)) for b in range(2)] for a in range(2)]
        b = batch_gd_step(w, G, ys, s)
        assert np.allclose(b.ss.A, np.eye(2) - eta * np.array(gtg), rtol=0, atol=1e-15)
        assert rel_err(b.ss.apply(w), b.w) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            batch_gd_step([0.0, 0.0], np.ones((3, 2)), [1.0, 2.0], GdState(0.1))


class TestSpecStrings:
    def test_all_kinds(self):
        assert parse_learner("gd:mu=0.1", 3) == GdState(0.1)
        assert parse_learner("ngd:mu=1.0,eps=1e-6", 3) == NgdState(1.0, 1e-6)
        s = parse_learner("rls:mu=0.99,delta=50", 3)
        assert isinstance(s, RlsState) and np.array_equal(s.P, 50 * np.eye(3))
        a = parse_learner("adam:mu=0.001,beta1=0.9,beta2=0.999,eps=1e-8,mode=elementwise", 2)
        assert isinstance(a, AdamState) and a.mode == "elementwise" and a.m.shape == (2,)
        assert parse_learner("adam:mu=0.001,beta1=0.9,beta2=0.999,eps=1e-8", 2).mode == "scalar"

    @pytest.mark.parametrize(
        "text",
        ["gd", "gd:mu=-1", "ngd:mu=1", "rls:mu=0.99", "rls:mu=0,delta=1", "adam:mu=1,beta1=1,beta2=0.9,eps=1e-8",
         "adam:mu=1,beta1=0.9,beta2=0.9,eps=1e-8,mode=other", "sgd:mu=1", "gd:mu=abc", "gd:mu=1,eps=2"],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_learner(text, 2)

    def test_dispatch(self):
        r = learner_step([0.0], [1.0], 1.0, GdState(1.0), k=3)
        assert r.sample.k == 3 and r.w.tolist() == [1.0]
